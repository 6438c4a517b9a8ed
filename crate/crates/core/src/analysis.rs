//! Post-processing: sub-grid front positions, erosion rates, discrete error
//! norms and convergence studies.

use std::sync::Arc;

use rayon::prelude::*;

use crate::absorption::LinearLaw;
use crate::domain::{Dim, Grid, GridClassification, PorosityLevelSet};
use crate::error::{Error, Result};
use crate::physics::{
    make_scenario, AmbientFn, ModelParams, Scenario, ScenarioKind, ScenarioOverrides,
    SimulationState,
};
use crate::scalar::{lit, Real};
use crate::solver::{Simulation, SolverOptions, SourceFn, StepOutcome};

/// Monitored boundary rays. 1D runs use Left/Right; 2D runs additionally
/// log Bottom/Top along the sample midlines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left = 0,
    Right = 1,
    Bottom = 2,
    Top = 3,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

impl Side {
    pub fn label(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

/// Time series of sub-grid front positions per monitored side.
#[derive(Debug, Clone, Default)]
pub struct FrontLog<T> {
    pub times: Vec<T>,
    pub positions: Vec<[Option<T>; 4]>,
}

impl<T: Real> FrontLog<T> {
    pub fn record(&mut self, t: T, pos: [Option<T>; 4]) {
        self.times.push(t);
        self.positions.push(pos);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn position(&self, side: Side, idx: usize) -> Option<T> {
        self.positions[idx][side as usize]
    }

    /// Eroded distance |p(t_idx) - p(t_0)| on a side.
    pub fn erosion(&self, side: Side, idx: usize) -> Option<T> {
        let p0 = self.position(side, 0)?;
        let p = self.position(side, idx)?;
        Some((p - p0).abs())
    }

    /// Least-squares slope of eroded distance against time over a window,
    /// returned in cm/h.
    pub fn erosion_slope(&self, side: Side, t_lo: T, t_hi: T) -> Result<T> {
        let mut ts: Vec<T> = Vec::new();
        let mut es: Vec<T> = Vec::new();
        for k in 0..self.len() {
            let t = self.times[k];
            if t < t_lo || t > t_hi {
                continue;
            }
            if let Some(e) = self.erosion(side, k) {
                ts.push(t);
                es.push(e);
            }
        }
        if ts.len() < 2 {
            return Err(Error::InsufficientSamples);
        }
        let n = lit::<T>(ts.len() as f64);
        let mean_t = ts.iter().copied().sum::<T>() / n;
        let mean_e = es.iter().copied().sum::<T>() / n;
        let mut num = T::zero();
        let mut den = T::zero();
        for k in 0..ts.len() {
            let dt = ts[k] - mean_t;
            num = num + dt * (es[k] - mean_e);
            den = den + dt * dt;
        }
        if den == T::zero() {
            return Err(Error::InsufficientSamples);
        }
        Ok(num / den * lit::<T>(3600.0))
    }

    /// Average recession rate over the whole log, in cm/h: the final eroded
    /// distance divided by the elapsed time. This is the "slope" figure the
    /// erosion tables quote.
    pub fn mean_recession_rate(&self, side: Side) -> Option<T> {
        if self.len() < 2 {
            return None;
        }
        let last = self.len() - 1;
        let e = self.erosion(side, last)?;
        let span = self.times[last] - self.times[0];
        if span <= T::zero() {
            return None;
        }
        Some(e / span * lit::<T>(3600.0))
    }

    /// Checks that every side recedes monotonically (within a roundoff slack).
    pub fn is_monotone(&self, slack: T) -> bool {
        for side in SIDES {
            let mut prev: Option<T> = None;
            for k in 0..self.len() {
                let Some(e) = self.erosion(side, k) else { continue };
                if let Some(p) = prev {
                    if e < p - slack {
                        return false;
                    }
                }
                prev = Some(e);
            }
        }
        true
    }
}

fn ray_crossing_1d<T: Real>(
    grid: &Grid<T>,
    lsf: &PorosityLevelSet<T>,
    nodes: &[usize],
    internal: impl Fn(usize) -> bool,
) -> (Option<T>, Option<T>) {
    let first_internal = nodes.iter().position(|&n| internal(n));
    let last_internal = nodes.iter().rposition(|&n| internal(n));
    let (Some(fi), Some(li)) = (first_internal, last_internal) else {
        return (None, None);
    };
    let axis_pos = |k: usize| -> T {
        let p = grid.pos(nodes[k]);
        if nodes.len() >= 2 && grid.coords(nodes[1]).0 != grid.coords(nodes[0]).0 {
            p[0]
        } else {
            p[1]
        }
    };
    let low = if fi == 0 {
        None
    } else {
        let a = nodes[fi - 1];
        let b = nodes[fi];
        let pa = lsf.phi(a);
        let pb = lsf.phi(b);
        Some(axis_pos(fi - 1) + grid.h * pa / (pa - pb))
    };
    let high = if li == nodes.len() - 1 {
        None
    } else {
        let a = nodes[li + 1];
        let b = nodes[li];
        let pa = lsf.phi(a);
        let pb = lsf.phi(b);
        Some(axis_pos(li + 1) - grid.h * pa / (pa - pb))
    };
    (low, high)
}

/// Sub-grid front positions: the linear zero crossing of the level set
/// between the last internal and first non-internal node along each
/// monitored ray.
pub fn front_positions<T: Real>(
    grid: &Grid<T>,
    lsf: &PorosityLevelSet<T>,
    cls: &GridClassification<T>,
) -> [Option<T>; 4] {
    let np = grid.nodes_per_axis();
    let internal = |n: usize| cls.is_internal(n);
    match grid.dim {
        Dim::One => {
            let nodes: Vec<usize> = (0..np).collect();
            let (l, r) = ray_crossing_1d(grid, lsf, &nodes, internal);
            [l, r, None, None]
        }
        Dim::Two => {
            // Monitor the rows/columns through the centroid of the internal set.
            let mut sx = T::zero();
            let mut sy = T::zero();
            for &i in &cls.internal {
                let p = grid.pos(i);
                sx = sx + p[0];
                sy = sy + p[1];
            }
            let count = lit::<T>(cls.internal.len() as f64);
            let cx = sx / count;
            let cy = sy / count;
            let i_mid = ((cx - grid.origin[0]) / grid.h)
                .round()
                .to_f64()
                .unwrap_or(0.0) as usize;
            let j_mid = ((cy - grid.origin[1]) / grid.h)
                .round()
                .to_f64()
                .unwrap_or(0.0) as usize;
            let i_mid = i_mid.min(np - 1);
            let j_mid = j_mid.min(np - 1);
            let row: Vec<usize> = (0..np).map(|i| grid.index(i, j_mid)).collect();
            let col: Vec<usize> = (0..np).map(|j| grid.index(i_mid, j)).collect();
            let (l, r) = ray_crossing_1d(grid, lsf, &row, internal);
            let (b, t) = ray_crossing_1d(grid, lsf, &col, internal);
            [l, r, b, t]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Theta,
    Acid,
    Porosity,
}

/// One completed run of a refinement level.
pub struct LevelRun<T> {
    pub grid: Grid<T>,
    pub state: SimulationState<T>,
    pub internal: Vec<bool>,
    pub dt: T,
}

/// Runs a scenario to the given horizon and keeps the final fields.
pub fn run_scenario_to<T: Real>(
    sc: &Scenario<T>,
    horizon: T,
    opts: &SolverOptions<T>,
) -> Result<LevelRun<T>> {
    let mut sim = Simulation::from_scenario(sc, opts.clone())?;
    sim.run_until(horizon)?;
    let internal = (0..sim.grid.num_nodes())
        .map(|i| sim.cls.is_internal(i))
        .collect();
    Ok(LevelRun {
        grid: sim.grid,
        state: sim.state,
        internal,
        dt: sc.dt,
    })
}

/// Discrete 2-norm difference between a run and its 2-refinement on shared
/// nodes that are internal in both runs: sqrt(h^dim * sum (u_c - u_f)^2).
pub fn discrete_error<T: Real>(coarse: &LevelRun<T>, fine: &LevelRun<T>, field: FieldKind) -> Result<T> {
    let gc = &coarse.grid;
    let gf = &fine.grid;
    if gc.dim != gf.dim || gf.cells != 2 * gc.cells {
        return Err(Error::GridsNotNested);
    }
    let tol = gc.h * lit::<T>(1e-12);
    if (gc.origin[0] - gf.origin[0]).abs() > tol
        || (gc.origin[1] - gf.origin[1]).abs() > tol
        || (gc.h - gf.h * lit::<T>(2.0)).abs() > tol
    {
        return Err(Error::GridsNotNested);
    }
    let pick = |st: &SimulationState<T>, i: usize| -> T {
        match field {
            FieldKind::Theta => st.theta[i],
            FieldKind::Acid => st.c_a[i],
            FieldKind::Porosity => st.n[i],
        }
    };
    let np_c = gc.nodes_per_axis();
    let mut sum = T::zero();
    match gc.dim {
        Dim::One => {
            for i in 0..np_c {
                let fi = 2 * i;
                if coarse.internal[i] && fine.internal[fi] {
                    let d = pick(&coarse.state, i) - pick(&fine.state, fi);
                    sum = sum + d * d;
                }
            }
            Ok((gc.h * sum).sqrt())
        }
        Dim::Two => {
            for j in 0..np_c {
                for i in 0..np_c {
                    let ci = gc.index(i, j);
                    let fi = gf.index(2 * i, 2 * j);
                    if coarse.internal[ci] && fine.internal[fi] {
                        let d = pick(&coarse.state, ci) - pick(&fine.state, fi);
                        sum = sum + d * d;
                    }
                }
            }
            Ok((gc.h * gc.h * sum).sqrt())
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow<T> {
    pub cells: usize,
    pub dx: T,
    pub dt: T,
    pub err_theta: T,
    pub order_theta: Option<T>,
    pub err_acid: T,
    pub order_acid: Option<T>,
}

fn order_between<T: Real>(prev: T, cur: T) -> Option<T> {
    if prev > T::zero() && cur > T::zero() {
        Some((prev / cur).ln() / lit::<T>(2.0).ln())
    } else {
        None
    }
}

fn rows_from_runs<T: Real>(runs: &[LevelRun<T>], with_acid: bool) -> Result<Vec<ConvergenceRow<T>>> {
    let mut rows = Vec::new();
    let mut prev_t: Option<T> = None;
    let mut prev_c: Option<T> = None;
    for k in 0..runs.len().saturating_sub(1) {
        let et = discrete_error(&runs[k], &runs[k + 1], FieldKind::Theta)?;
        let ec = if with_acid {
            discrete_error(&runs[k], &runs[k + 1], FieldKind::Acid)?
        } else {
            T::zero()
        };
        rows.push(ConvergenceRow {
            cells: runs[k].grid.cells,
            dx: runs[k].grid.h,
            dt: runs[k].dt,
            err_theta: et,
            order_theta: prev_t.and_then(|p| order_between(p, et)),
            err_acid: ec,
            order_acid: prev_c.and_then(|p| order_between(p, ec)),
        });
        prev_t = Some(et);
        prev_c = Some(ec);
    }
    Ok(rows)
}

/// Successive-refinement (Cauchy) convergence study: refinement level k runs
/// with cells * 2^k cells and dt / 2^k, all to the same horizon; errors
/// compare each level against the next on shared internal nodes.
///
/// On failure the completed rows are preserved alongside the error.
pub fn convergence_study<T: Real>(
    base: &Scenario<T>,
    levels: usize,
    horizon: T,
    opts: &SolverOptions<T>,
) -> (Vec<ConvergenceRow<T>>, Option<Error>) {
    if levels < 3 {
        return (
            Vec::new(),
            Some(Error::InvalidParameter("a study needs at least 3 refinement levels".into())),
        );
    }
    let configs: Vec<(usize, T)> = (0..levels)
        .map(|k| {
            (
                base.cells << k,
                base.dt / lit::<T>((1u64 << k) as f64),
            )
        })
        .collect();
    let results: Vec<Result<LevelRun<T>>> = configs
        .par_iter()
        .map(|&(cells, dt)| {
            let mut sc = base.clone();
            sc.cells = cells;
            sc.dt = dt;
            sc.duration = horizon;
            run_scenario_to(&sc, horizon, opts)
        })
        .collect();
    let mut runs = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                let rows = rows_from_runs(&runs, true).unwrap_or_default();
                return (rows, Some(e));
            }
        }
    }
    match rows_from_runs(&runs, true) {
        Ok(rows) => (rows, None),
        Err(e) => (Vec::new(), Some(e)),
    }
}

/// Manufactured-solution study on a linear-diffusion problem.
///
/// The moisture field is forced toward theta*(x, t) = a + b cos(k (x - xc))
/// exp(-t / tau) with a matching interior source and a Robin-consistent
/// ambient value, on a frozen porosity field with the linear law. Errors are
/// against the exact solution at the horizon, so the observed order reflects
/// the full scheme including the boundary treatment.
pub fn mms_study<T: Real>(
    cells0: usize,
    dt0: T,
    levels: usize,
    horizon: T,
    opts: &SolverOptions<T>,
) -> (Vec<ConvergenceRow<T>>, Option<Error>) {
    if levels < 3 {
        return (
            Vec::new(),
            Some(Error::InvalidParameter("a study needs at least 3 refinement levels".into())),
        );
    }
    let results: Vec<Result<(LevelRun<T>, T)>> = (0..levels)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let cells = cells0 << k;
            let dt = dt0 / lit::<T>((1u64 << k) as f64);
            run_mms_level(cells, dt, horizon, opts)
        })
        .collect();
    let mut rows: Vec<ConvergenceRow<T>> = Vec::new();
    let mut prev: Option<T> = None;
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok((run, err)) => {
                rows.push(ConvergenceRow {
                    cells: run.grid.cells,
                    dx: run.grid.h,
                    dt: dt0 / lit::<T>((1u64 << k) as f64),
                    err_theta: err,
                    order_theta: prev.and_then(|p| order_between(p, err)),
                    err_acid: T::zero(),
                    order_acid: None,
                });
                prev = Some(err);
            }
            Err(e) => return (rows, Some(e)),
        }
    }
    (rows, None)
}

struct MmsProblem<T> {
    a: T,
    b: T,
    k: T,
    xc: T,
    tau: T,
    d_eff: T,
    d0: T,
    n_tilde: T,
    k_w: T,
    x_edge: T,
}

impl<T: Real> MmsProblem<T> {
    fn standard() -> Self {
        let n_tilde = lit::<T>(0.0063);
        let d0 = lit::<T>(1.09e-5);
        MmsProblem {
            a: lit(3.0e-3),
            b: lit(1.0e-3),
            k: lit(std::f64::consts::TAU / 50.0),
            xc: lit(2.75),
            tau: lit(1200.0),
            d_eff: d0 / n_tilde,
            d0,
            n_tilde,
            k_w: lit(1e-2),
            x_edge: lit(0.25),
        }
    }

    fn exact(&self, x: T, t: T) -> T {
        self.a + self.b * (self.k * (x - self.xc)).cos() * (-t / self.tau).exp()
    }

    fn source(&self, x: T, t: T) -> T {
        let shape = self.b * (self.k * (x - self.xc)).cos() * (-t / self.tau).exp();
        shape * (-T::one() / self.tau + self.d_eff * self.k * self.k)
    }

    /// Ambient value making the Robin condition hold for the exact solution.
    /// Both sides agree by symmetry of the profile about xc.
    fn ambient(&self, t: T) -> T {
        let x = self.x_edge;
        // outward normal on the left side is -x
        let dth_dx = -self.b * self.k * (self.k * (x - self.xc)).sin() * (-t / self.tau).exp();
        let grad_n = -dth_dx;
        self.exact(x, t) + self.d0 / (self.n_tilde * self.k_w) * grad_n
    }
}

fn run_mms_level<T: Real>(
    cells: usize,
    dt: T,
    horizon: T,
    opts: &SolverOptions<T>,
) -> Result<(LevelRun<T>, T)> {
    let prob = Arc::new(MmsProblem::<T>::standard());
    let mut params = ModelParams::<T>::marble();
    params.k_c = T::zero(); // frozen porosity
    let mut ov = ScenarioOverrides::<T>::default();
    ov.cells = Some(cells);
    ov.dt = Some(dt);
    ov.duration = Some(horizon);
    ov.params = Some(params.clone());
    let sc = make_scenario(ScenarioKind::Standard1d, &ov)?;
    let grid = sc.grid();
    let lsf = sc.initial_level_set(&grid);
    let mut state = sc.initial_state(&grid, &lsf);
    for i in 0..grid.num_nodes() {
        state.theta[i] = prob.exact(grid.pos(i)[0], T::zero());
        state.c_a[i] = T::zero();
    }
    let law = LinearLaw { d: prob.d0 };
    let p_amb = Arc::clone(&prob);
    let ambient = AmbientFn(move |t: T| (p_amb.ambient(t), T::zero()));
    let mut solver_opts = opts.clone();
    let p_src = Arc::clone(&prob);
    let src: SourceFn<T> = Arc::new(move |pos: [T; 2], t: T| p_src.source(pos[0], t));
    solver_opts.theta_source = Some(src);
    let mut sim = Simulation::new(grid, params, law, ambient, state, lsf, dt, solver_opts)?;
    let steps = (horizon / dt).round().to_f64().unwrap_or(0.0) as usize;
    for _ in 0..steps {
        match sim.step()? {
            StepOutcome::Advanced(_) => {}
            StepOutcome::Complete => break,
        }
    }
    let mut sum = T::zero();
    for &i in &sim.cls.internal {
        let d = sim.state.theta[i] - prob.exact(sim.grid.pos(i)[0], sim.state.t);
        sum = sum + d * d;
    }
    let err = (sim.grid.h * sum).sqrt();
    let internal = (0..sim.grid.num_nodes())
        .map(|i| sim.cls.is_internal(i))
        .collect();
    Ok((
        LevelRun {
            grid: sim.grid,
            state: sim.state,
            internal,
            dt,
        },
        err,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::domain::classify;

    #[test]
    fn front_positions_pristine_standard() {
        let sc = make_scenario::<f64>(ScenarioKind::Standard1d, &Default::default()).unwrap();
        let grid = sc.grid();
        let lsf = sc.initial_level_set(&grid);
        let cls = classify(&grid, &lsf).unwrap();
        let pos = front_positions(&grid, &lsf, &cls);
        assert_relative_eq!(pos[0].unwrap(), 0.25, epsilon = 1e-12);
        assert_relative_eq!(pos[1].unwrap(), 5.25, epsilon = 1e-12);
        assert!(pos[2].is_none() && pos[3].is_none());
    }

    #[test]
    fn front_passes_through_node_at_threshold() {
        let grid = Grid::line(10, 0.5, 0.0);
        let n_max = 0.2_f64;
        let mut values = vec![1.0_f64; 11];
        for i in 3..=7 {
            values[i] = 0.0063;
        }
        values[2] = n_max; // exactly at the threshold
        let lsf = PorosityLevelSet::new(values, n_max);
        let cls = classify(&grid, &lsf).unwrap();
        let pos = front_positions(&grid, &lsf, &cls);
        assert_relative_eq!(pos[0].unwrap(), 1.0, epsilon = 1e-14); // node 2 at x=1.0
    }

    #[test]
    fn erosion_slope_linear_series() {
        let mut log = FrontLog::<f64>::default();
        // position recedes at 2 cm per hour on the left
        for k in 0..10 {
            let t = k as f64 * 3600.0;
            log.record(t, [Some(5.0 - 2.0 * k as f64), Some(10.0 + 2.0 * k as f64), None, None]);
        }
        let s = log.erosion_slope(Side::Left, 0.0, 9.0 * 3600.0).unwrap();
        assert_relative_eq!(s, 2.0, max_relative = 1e-12);
        let s = log.erosion_slope(Side::Right, 0.0, 9.0 * 3600.0).unwrap();
        assert_relative_eq!(s, 2.0, max_relative = 1e-12);
        assert_relative_eq!(log.mean_recession_rate(Side::Left).unwrap(), 2.0, max_relative = 1e-12);
        // stationary front
        let mut flat = FrontLog::<f64>::default();
        for k in 0..5 {
            flat.record(k as f64, [Some(1.0), None, None, None]);
        }
        assert_relative_eq!(flat.erosion_slope(Side::Left, 0.0, 4.0).unwrap(), 0.0);
        assert!(flat.erosion_slope(Side::Left, 10.0, 20.0).is_err());
        assert!(log.is_monotone(0.0));
    }

    #[test]
    fn discrete_error_cases() {
        let mk = |cells: usize, offset: f64| {
            let grid = Grid::<f64>::line(cells, 5.5 / cells as f64, 0.0);
            let nn = grid.num_nodes();
            let state = SimulationState {
                theta: (0..nn).map(|i| grid.pos(i)[0] + offset).collect(),
                c_a: vec![0.0; nn],
                n: vec![0.0063; nn],
                t: 0.0,
            };
            LevelRun {
                grid,
                state,
                internal: vec![true; nn],
                dt: 1.0,
            }
        };
        let coarse = mk(100, 0.0);
        let fine = mk(200, 0.0);
        assert_eq!(discrete_error(&coarse, &fine, FieldKind::Theta).unwrap(), 0.0);
        // constant offset eps at all shared nodes -> sqrt(h * n_shared) * eps
        let fine_off = mk(200, 1e-3);
        let err = discrete_error(&coarse, &fine_off, FieldKind::Theta).unwrap();
        let expect = (0.055_f64 * 101.0).sqrt() * 1e-3;
        assert_relative_eq!(err, expect, max_relative = 1e-12);
        // sign symmetry
        let coarse_off = mk(100, 1e-3);
        let fine0 = mk(200, 0.0);
        let err2 = discrete_error(&coarse_off, &fine0, FieldKind::Theta).unwrap();
        assert_relative_eq!(err, err2, max_relative = 1e-12);
        // non-nested grids rejected
        let bad = mk(150, 0.0);
        assert!(matches!(
            discrete_error(&coarse, &bad, FieldKind::Theta),
            Err(Error::GridsNotNested)
        ));
    }

    #[test]
    fn study_rejects_too_few_levels() {
        let sc = make_scenario::<f64>(ScenarioKind::Standard1d, &Default::default()).unwrap();
        let (rows, err) = convergence_study(&sc, 2, 60.0, &SolverOptions::default());
        assert!(rows.is_empty());
        assert!(err.is_some());
    }

    #[test]
    fn mms_orders_near_one_small() {
        // small fast variant of the manufactured-solution study
        let (rows, err) = mms_study::<f64>(50, 120.0, 3, 1200.0, &SolverOptions::default());
        assert!(err.is_none(), "mms study failed: {err:?}");
        assert_eq!(rows.len(), 2);
        let order = rows[1].order_theta.unwrap();
        assert!((0.9..=1.1).contains(&order), "mms order {order} outside [0.9, 1.1]");
    }
}
