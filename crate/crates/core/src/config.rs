//! Run-configuration file: TOML schema, defaults, validation and conversion
//! into scenarios. All defaults equal the marble parameter set.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::absorption::{AsymmetricParams, SymmetricParams};
use crate::error::{Error, Result};
use crate::physics::{
    make_scenario, Ambient, AmbientSchedule, LawChoice, ModelParams, OutsidePorosity, Scenario,
    ScenarioKind, ScenarioOverrides, SECONDS_PER_YEAR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub ambient: AmbientSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub absorption: AbsorptionSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub study: StudySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Grid intervals per axis; nodes per axis is one more.
    pub cells: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Time step in seconds; scenario default when absent.
    pub dt: Option<f64>,
    /// Simulated duration in seconds; scenario default when absent.
    pub duration: Option<f64>,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection { dt: None, duration: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientSection {
    /// Ambient moisture (g/cm^3); scenario default when absent.
    pub e: Option<f64>,
    /// Ambient carbonic acid (g/cm^3); scenario default when absent.
    pub c: Option<f64>,
    /// Optional piecewise-constant schedule overriding the constants.
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
}

impl Default for AmbientSection {
    fn default() -> Self {
        AmbientSection { e: None, c: None, schedule: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    /// Start time (s) from which these values hold.
    pub from: f64,
    pub e: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub mu: f64,
    pub rho_0: f64,
    pub d_c: f64,
    pub k_c: f64,
    pub n_tilde: f64,
    pub k_w: f64,
    pub k_a: f64,
    pub k_n: f64,
    pub n_max: f64,
    pub outside_porosity: OutsidePorosity,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            mu: 8.9e-3,
            rho_0: 2.71,
            d_c: 1.18e-5,
            k_c: 1.7e-3,
            n_tilde: 0.0063,
            k_w: 1e-2,
            k_a: 1e-2,
            k_n: 1e-3,
            n_max: 0.20,
            outside_porosity: OutsidePorosity::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbsorptionSection {
    pub law: LawChoice,
    pub symmetric: SymmetricSection,
    pub asymmetric: AsymmetricSection,
}

impl Default for AbsorptionSection {
    fn default() -> Self {
        AbsorptionSection {
            law: LawChoice::Asymmetric,
            symmetric: SymmetricSection::default(),
            asymmetric: AsymmetricSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymmetricSection {
    pub s_r: f64,
    pub s_s: f64,
    pub d: f64,
}

impl Default for SymmetricSection {
    fn default() -> Self {
        SymmetricSection { s_r: 0.227, s_s: 0.884, d: 1.09e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymmetricSection {
    pub s_r: f64,
    pub s_s: f64,
    pub alpha: f64,
    pub c: f64,
    pub k_s: f64,
    pub gamma: f64,
}

impl Default for AsymmetricSection {
    fn default() -> Self {
        AsymmetricSection {
            s_r: 0.227,
            s_s: 0.884,
            alpha: 0.5,
            c: 34.19,
            k_s: 7.9e-9,
            gamma: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Snapshot times in seconds. Defaults: one week, 180 days, one year.
    pub snapshot_times: Vec<f64>,
    /// Record the front every this many steps.
    pub front_log_every: usize,
    /// Add the dissolved-gas diagnostic column c_a / K_c to snapshots.
    pub co2_diagnostic: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            snapshot_times: vec![7.0 * 86_400.0, 180.0 * 86_400.0, SECONDS_PER_YEAR],
            front_log_every: 1,
            co2_diagnostic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_nl: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    pub max_dt_halvings: usize,
    pub restore_after: usize,
    pub max_linear_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol_nl: 1e-10,
            max_outer: 50,
            max_newton: 25,
            max_dt_halvings: 10,
            restore_after: 100,
            max_linear_iters: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// Number of refinement levels (each halves dx and dt).
    pub refinements: usize,
    /// Error-evaluation horizon in seconds.
    pub horizon: f64,
    /// Run the manufactured-solution variant instead of the Cauchy study.
    pub mms: bool,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection { refinements: 4, horizon: 3600.0, mms: false }
    }
}

impl Config {
    pub fn default_for(kind: ScenarioKind) -> Self {
        Config {
            scenario: ScenarioSection { kind },
            grid: Default::default(),
            time: Default::default(),
            ambient: Default::default(),
            params: Default::default(),
            absorption: Default::default(),
            output: Default::default(),
            solver: Default::default(),
            study: Default::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_params(&self) -> Result<ModelParams<f64>> {
        let p = &self.params;
        let sym = SymmetricParams::new(
            self.absorption.symmetric.s_r,
            self.absorption.symmetric.s_s,
            self.absorption.symmetric.d,
        )?;
        let asym = AsymmetricParams::new(
            self.absorption.asymmetric.s_r,
            self.absorption.asymmetric.s_s,
            self.absorption.asymmetric.alpha,
            self.absorption.asymmetric.c,
            self.absorption.asymmetric.k_s,
            self.absorption.asymmetric.gamma,
            p.mu,
        )?;
        let mp = ModelParams {
            mu: p.mu,
            rho_0: p.rho_0,
            d_c: p.d_c,
            k_c: p.k_c,
            n_tilde: p.n_tilde,
            k_w: p.k_w,
            k_a: p.k_a,
            k_n: p.k_n,
            n_max: p.n_max,
            outside_porosity: p.outside_porosity,
            symmetric: sym,
            asymmetric: asym,
        };
        mp.validate()?;
        Ok(mp)
    }

    pub fn scenario(&self) -> Result<Scenario<f64>> {
        let schedule = if self.ambient.schedule.is_empty() {
            None
        } else {
            Some(AmbientSchedule::new(
                self.ambient
                    .schedule
                    .iter()
                    .map(|s| Ok((s.from, Ambient::new(s.e, s.c)?)))
                    .collect::<Result<Vec<_>>>()?,
            )?)
        };
        let ov = ScenarioOverrides {
            cells: self.grid.cells,
            dt: self.time.dt,
            duration: self.time.duration,
            ambient_e: self.ambient.e,
            ambient_c: self.ambient.c,
            law: Some(self.absorption.law),
            params: Some(self.model_params()?),
            schedule,
        };
        make_scenario(self.scenario.kind, &ov)
    }

    pub fn solver_options(&self) -> crate::solver::SolverOptions<f64> {
        crate::solver::SolverOptions {
            tol_nl: self.solver.tol_nl,
            max_outer: self.solver.max_outer,
            max_newton: self.solver.max_newton,
            max_dt_halvings: self.solver.max_dt_halvings,
            restore_after: self.solver.restore_after,
            max_linear_iters: self.solver.max_linear_iters,
            theta_source: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params()?;
        if let Some(dt) = self.time.dt {
            if dt <= 0.0 {
                return Err(Error::Config("time.dt must be positive".into()));
            }
        }
        if let Some(d) = self.time.duration {
            if d <= 0.0 {
                return Err(Error::Config("time.duration must be positive".into()));
            }
        }
        if self.output.front_log_every == 0 {
            return Err(Error::Config("output.front_log_every must be at least 1".into()));
        }
        if self.study.refinements < 3 {
            return Err(Error::Config("study.refinements must be at least 3".into()));
        }
        if self.study.horizon <= 0.0 {
            return Err(Error::Config("study.horizon must be positive".into()));
        }
        for w in self.ambient.schedule.windows(2) {
            if w[1].from <= w[0].from {
                return Err(Error::Config("ambient.schedule entries must have increasing from".into()));
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 of the raw configuration bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
