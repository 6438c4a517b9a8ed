//! Model parameters, ambient conditions, simulation state and scenarios.
//!
//! All quantities are in cgs units: lengths in cm, times in s, densities and
//! concentrations in g/cm^3. Moisture theta is a volume fraction; ambient
//! humidity is given in g/cm^3 of water and read as a volume fraction with
//! water density 1 g/cm^3, so the two are numerically interchangeable.

use serde::{Deserialize, Serialize};

use crate::absorption::{AsymmetricLaw, AsymmetricParams, Law, SymmetricLaw, SymmetricParams};
use crate::domain::{Dim, Grid, PorosityLevelSet};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Porosity value imposed at outside (fully eroded) nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutsidePorosity {
    /// Eroded region treated as open space, n = 1.
    #[default]
    One,
    /// Eroded region held at the loss threshold, n = n_max.
    NMax,
}

/// Absorption-law selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawChoice {
    Symmetric,
    Asymmetric,
}

/// Physical and calibrated constants of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Water viscosity (g/(cm s)).
    pub mu: T,
    /// Density of the stone matrix (g/cm^3).
    pub rho_0: T,
    /// Diffusion coefficient of dissolved bicarbonate (cm^2/s).
    pub d_c: T,
    /// Reaction constant (cm^3/(g s)).
    pub k_c: T,
    /// Unperturbed porosity (fraction).
    pub n_tilde: T,
    /// Air-exchange rate for moisture at the boundary (cm/s).
    pub k_w: T,
    /// Penetration rate of carbonic acid at the boundary (cm/s).
    pub k_a: T,
    /// Consumption factor of the matrix (dimensionless).
    pub k_n: T,
    /// Porosity threshold at which material is lost (fraction).
    pub n_max: T,
    pub outside_porosity: OutsidePorosity,
    pub symmetric: SymmetricParams<T>,
    pub asymmetric: AsymmetricParams<T>,
}

impl<T: Real> ModelParams<T> {
    /// Literature and fitted values for marble.
    pub fn marble() -> Self {
        let mu = lit::<T>(8.9e-3);
        ModelParams {
            mu,
            rho_0: lit(2.71),
            d_c: lit(1.18e-5),
            k_c: lit(1.7e-3),
            n_tilde: lit(0.0063),
            k_w: lit(1e-2),
            k_a: lit(1e-2),
            k_n: lit(1e-3),
            n_max: lit(0.20),
            outside_porosity: OutsidePorosity::One,
            symmetric: SymmetricParams {
                s_r: lit(0.227),
                s_s: lit(0.884),
                d: lit(1.09e-5),
            },
            asymmetric: AsymmetricParams {
                s_r: lit(0.227),
                s_s: lit(0.884),
                alpha: lit(0.5),
                c: lit(34.19),
                k_s: lit(7.9e-9),
                gamma: lit(2.0),
                mu,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T, name: &str| -> Result<()> {
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive")))
            }
        };
        pos(self.mu, "mu")?;
        pos(self.rho_0, "rho_0")?;
        pos(self.n_tilde, "n_tilde")?;
        // Zero rates are meaningful limits (switched-off reaction, zero-flux
        // boundaries) and are exercised by the verification suites.
        if self.d_c < T::zero()
            || self.k_c < T::zero()
            || self.k_w < T::zero()
            || self.k_a < T::zero()
            || self.k_n < T::zero()
        {
            return Err(Error::InvalidParameter("rate coefficients must be non-negative".into()));
        }
        if !(self.n_tilde < self.n_max && self.n_max < T::one()) {
            return Err(Error::InvalidParameter(
                "porosities must satisfy 0 < n_tilde < n_max < 1".into(),
            ));
        }
        SymmetricParams::new(self.symmetric.s_r, self.symmetric.s_s, self.symmetric.d)?;
        AsymmetricParams::new(
            self.asymmetric.s_r,
            self.asymmetric.s_s,
            self.asymmetric.alpha,
            self.asymmetric.c,
            self.asymmetric.k_s,
            self.asymmetric.gamma,
            self.asymmetric.mu,
        )?;
        Ok(())
    }

    /// Builds the selected absorption law.
    pub fn law(&self, choice: LawChoice) -> Law<T> {
        match choice {
            LawChoice::Symmetric => Law::Symmetric(SymmetricLaw::new(self.symmetric)),
            LawChoice::Asymmetric => Law::Asymmetric(AsymmetricLaw::new(self.asymmetric)),
        }
    }

    /// Porosity imposed outside the material.
    pub fn n_outside(&self) -> T {
        match self.outside_porosity {
            OutsidePorosity::One => T::one(),
            OutsidePorosity::NMax => self.n_max,
        }
    }

    /// Residual saturation of the selected law.
    pub fn s_residual(&self, choice: LawChoice) -> T {
        match choice {
            LawChoice::Symmetric => self.symmetric.s_r,
            LawChoice::Asymmetric => self.asymmetric.s_r,
        }
    }
}

/// Constant ambient moisture and carbonic-acid concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ambient<T> {
    /// Ambient moisture (g/cm^3, read as volume fraction).
    pub e: T,
    /// Ambient carbonic-acid concentration (g/cm^3).
    pub c: T,
}

impl<T: Real> Ambient<T> {
    pub fn new(e: T, c: T) -> Result<Self> {
        if e < T::zero() || c < T::zero() {
            return Err(Error::InvalidParameter("ambient values must be non-negative".into()));
        }
        Ok(Ambient { e, c })
    }
}

/// Time-dependent ambient values.
pub trait AmbientSource<T>: Send + Sync {
    /// Ambient (moisture, acid concentration) at simulated time t.
    fn at(&self, t: T) -> (T, T);
}

impl<T: Real> AmbientSource<T> for Ambient<T> {
    fn at(&self, _t: T) -> (T, T) {
        (self.e, self.c)
    }
}

/// Piecewise-constant ambient schedule; entries sorted by start time, each
/// holding from its start until the next entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientSchedule<T> {
    pub entries: Vec<(T, Ambient<T>)>,
}

impl<T: Real> AmbientSchedule<T> {
    pub fn new(mut entries: Vec<(T, Ambient<T>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("schedule must not be empty".into()));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(AmbientSchedule { entries })
    }
}

impl<T: Real> AmbientSource<T> for AmbientSchedule<T> {
    fn at(&self, t: T) -> (T, T) {
        let mut cur = self.entries[0].1;
        for (start, amb) in &self.entries {
            if t >= *start {
                cur = *amb;
            } else {
                break;
            }
        }
        (cur.e, cur.c)
    }
}

/// Ambient given by an arbitrary function of time (used by verification
/// harnesses).
pub struct AmbientFn<F>(pub F);

impl<T: Real, F: Fn(T) -> (T, T) + Send + Sync> AmbientSource<T> for AmbientFn<F> {
    fn at(&self, t: T) -> (T, T) {
        (self.0)(t)
    }
}

/// Ambient moisture from temperature (deg C) and relative humidity (0..=1).
pub fn ambient_humidity<T: Real>(temp_c: T, u_r: T) -> Result<T> {
    if temp_c < lit(-20.0) || temp_c > lit(60.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature {temp_c} outside the sane range [-20, 60] C"
        )));
    }
    if u_r < T::zero() || u_r > T::one() {
        return Err(Error::InvalidParameter(format!(
            "relative humidity {u_r} outside [0, 1]"
        )));
    }
    let t = temp_c;
    let sat = lit::<T>(5.018)
        + lit::<T>(0.32321) * t
        + lit::<T>(8.1847e-3) * t * t
        + lit::<T>(3.1243e-4) * t * t * t;
    Ok(u_r * sat * lit::<T>(1e-6))
}

/// The three coupled fields plus simulated time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState<T> {
    /// Moisture volume fraction per node.
    pub theta: Vec<T>,
    /// Carbonic-acid concentration per node (g/cm^3).
    pub c_a: Vec<T>,
    /// Porosity per node (fraction).
    pub n: Vec<T>,
    /// Simulated time (s).
    pub t: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Standard1d,
    Standard2d,
    Catastrophic1d,
}

/// A fully specified run: geometry, parameters, ambient values, time stepping.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub name: String,
    pub kind: ScenarioKind,
    pub dim: Dim,
    pub cells: usize,
    /// Computational domain is [0, extent] per axis (cm).
    pub extent: T,
    /// Sample bounds per axis: [[x_lo, x_hi], [y_lo, y_hi]].
    pub sample: [[T; 2]; 2],
    pub ambient: Ambient<T>,
    pub schedule: Option<AmbientSchedule<T>>,
    /// Total simulated time (s).
    pub duration: T,
    /// Time step (s).
    pub dt: T,
    pub law: LawChoice,
    pub params: ModelParams<T>,
}

/// Optional overrides applied on top of a scenario's defaults.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOverrides<T> {
    pub cells: Option<usize>,
    pub dt: Option<T>,
    pub duration: Option<T>,
    pub ambient_e: Option<T>,
    pub ambient_c: Option<T>,
    pub law: Option<LawChoice>,
    pub params: Option<ModelParams<T>>,
    pub schedule: Option<AmbientSchedule<T>>,
}

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.0 * SECONDS_PER_DAY;

/// Builds one of the reference scenarios with optional overrides.
pub fn make_scenario<T: Real>(kind: ScenarioKind, ov: &ScenarioOverrides<T>) -> Result<Scenario<T>> {
    let params = ov.params.clone().unwrap_or_else(ModelParams::marble);
    params.validate()?;
    let extent = lit::<T>(5.5);
    let sample_x = [lit::<T>(0.25), lit::<T>(5.25)];
    let sample_y = [lit::<T>(0.75), lit::<T>(4.75)];
    let (name, dim, cells, sample, e, c, duration, dt, law) = match kind {
        ScenarioKind::Standard1d => (
            "standard_1d",
            Dim::One,
            100,
            [sample_x, [T::zero(), T::zero()]],
            lit::<T>(0.001847),
            lit::<T>(5.5e-7),
            lit::<T>(SECONDS_PER_YEAR),
            T::one(),
            LawChoice::Asymmetric,
        ),
        ScenarioKind::Standard2d => (
            "standard_2d",
            Dim::Two,
            100,
            [sample_x, sample_y],
            lit::<T>(0.001847),
            lit::<T>(5.5e-7),
            lit::<T>(SECONDS_PER_YEAR),
            lit::<T>(0.1),
            LawChoice::Asymmetric,
        ),
        ScenarioKind::Catastrophic1d => (
            "catastrophic_1d",
            Dim::One,
            100,
            [sample_x, [T::zero(), T::zero()]],
            params.n_tilde,
            lit::<T>(5.5e-7),
            lit::<T>(SECONDS_PER_DAY),
            T::one(),
            LawChoice::Symmetric,
        ),
    };
    let ambient = Ambient::new(ov.ambient_e.unwrap_or(e), ov.ambient_c.unwrap_or(c))?;
    let cells = ov.cells.unwrap_or(cells);
    if cells < 4 {
        return Err(Error::InvalidParameter("need at least 4 grid cells".into()));
    }
    let dt = ov.dt.unwrap_or(dt);
    let duration = ov.duration.unwrap_or(duration);
    if dt <= T::zero() || duration <= T::zero() {
        return Err(Error::InvalidParameter("dt and duration must be positive".into()));
    }
    Ok(Scenario {
        name: name.into(),
        kind,
        dim,
        cells,
        extent,
        sample,
        ambient,
        schedule: ov.schedule.clone(),
        duration,
        dt,
        law: ov.law.unwrap_or(law),
        params,
    })
}

impl<T: Real> Scenario<T> {
    pub fn grid(&self) -> Grid<T> {
        let h = self.extent / lit::<T>(self.cells as f64);
        match self.dim {
            Dim::One => Grid::line(self.cells, h, T::zero()),
            Dim::Two => Grid::square(self.cells, h, [T::zero(), T::zero()]),
        }
    }

    fn inside_sample(&self, p: [T; 2], tol: T) -> bool {
        let x_ok = p[0] >= self.sample[0][0] - tol && p[0] <= self.sample[0][1] + tol;
        match self.dim {
            Dim::One => x_ok,
            Dim::Two => {
                x_ok && p[1] >= self.sample[1][0] - tol && p[1] <= self.sample[1][1] + tol
            }
        }
    }

    fn on_sample_edge(&self, p: [T; 2], tol: T) -> bool {
        let near = |v: T, e: T| (v - e).abs() <= tol;
        let x_edge = near(p[0], self.sample[0][0]) || near(p[0], self.sample[0][1]);
        match self.dim {
            Dim::One => x_edge,
            Dim::Two => x_edge || near(p[1], self.sample[1][0]) || near(p[1], self.sample[1][1]),
        }
    }

    /// Initial porosity level set.
    ///
    /// Internal nodes carry the pristine porosity. The first layer outside
    /// the sample carries a calibrated value so that the linear zero crossing
    /// of n - n_max sits exactly on the sample boundary; nodes on the
    /// boundary carry n_max. Everything further out takes the outside value.
    pub fn initial_level_set(&self, grid: &Grid<T>) -> PorosityLevelSet<T> {
        let tol = grid.h * lit::<T>(1e-9);
        let nt = self.params.n_tilde;
        let n_max = self.params.n_max;
        let n_out = self.params.n_outside();
        let nn = grid.num_nodes();
        let mut values = vec![n_out; nn];
        let mut strict_inside = vec![false; nn];
        for idx in 0..nn {
            let p = grid.pos(idx);
            if self.inside_sample(p, tol) {
                if self.on_sample_edge(p, tol) {
                    values[idx] = n_max;
                } else {
                    values[idx] = nt;
                    strict_inside[idx] = true;
                }
            }
        }
        for idx in 0..nn {
            if values[idx] != n_out {
                continue;
            }
            let p = grid.pos(idx);
            // Calibrate against an inside axis neighbor, if any.
            let mut assigned = None;
            for (axis, nb) in grid.neighbors(idx).into_iter().enumerate() {
                let Some(nb) = nb else { continue };
                if !strict_inside[nb] {
                    continue;
                }
                let k = axis / 2; // 0 for x, 1 for y
                let pn = grid.pos(nb);
                let lo = self.sample[k][0];
                let hi = self.sample[k][1];
                let edge = if p[k] < lo { lo } else { hi };
                let d_g = (p[k] - edge).abs();
                let d_i = (pn[k] - edge).abs();
                if d_i <= tol {
                    continue;
                }
                let v = n_max + (n_max - nt) * d_g / d_i;
                assigned = Some(match assigned {
                    Some(prev) => v.min(prev),
                    None => v,
                });
            }
            if let Some(v) = assigned {
                values[idx] = v;
            }
        }
        PorosityLevelSet::new(values, n_max)
    }

    /// Initial field state: dry pristine specimen.
    ///
    /// Moisture starts at the residual content s_R * n_tilde (the minimum
    /// hydraulically connected value), acid at zero, porosity at n_tilde.
    /// Outside nodes are pinned at ambient values.
    pub fn initial_state(&self, grid: &Grid<T>, lsf: &PorosityLevelSet<T>) -> SimulationState<T> {
        let nn = grid.num_nodes();
        let nt = self.params.n_tilde;
        let n_out = self.params.n_outside();
        let theta0 = self.params.s_residual(self.law) * nt;
        let (e0, c0) = match &self.schedule {
            Some(s) => s.at(T::zero()),
            None => (self.ambient.e, self.ambient.c),
        };
        let mut theta = vec![e0; nn];
        let mut c_a = vec![c0; nn];
        let mut n = vec![n_out; nn];
        for idx in 0..nn {
            let is_internal = lsf.phi(idx) < T::zero();
            let is_ghost = !is_internal
                && grid
                    .neighbors(idx)
                    .into_iter()
                    .flatten()
                    .any(|nb| lsf.phi(nb) < T::zero());
            if is_internal || is_ghost {
                theta[idx] = theta0;
                c_a[idx] = T::zero();
                n[idx] = nt;
            }
        }
        SimulationState {
            theta,
            c_a,
            n,
            t: T::zero(),
        }
    }
}

/// Dissolved-gas diagnostic c_a / K_c.
///
/// K_c is not dimensionless, so this carries mixed units; it is a plotting
/// convenience only and takes no part in the model or its verification.
pub fn co2_equivalent<T: Real>(c_a: T, k_c: T) -> T {
    c_a / k_c
}
