//! Implicit-Euler time stepping of the coupled system.
//!
//! Each step solves the fully implicit relations for porosity, moisture and
//! acid by a nonlinear Gauss-Seidel sweep over the three fields:
//!
//! 1. the porosity relation is scalar per node and solved in closed form
//!    given the current acid iterate;
//! 2. the moisture equation is solved by damped Newton, with the ghost
//!    Robin rows assembled into the same linear system;
//! 3. the acid equation is linear given moisture and porosity and solved
//!    directly.
//!
//! The sweep repeats until the joint residual of all discrete relations,
//! scaled by ambient magnitudes, drops below the nonlinear tolerance.
//! Afterwards any internal node whose porosity reached the loss threshold
//! is converted to an outside point and the classification is rebuilt.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::absorption::AbsorptionLaw;
use crate::domain::{
    classify, Dim, Grid, GridClassification, PointClass, PorosityLevelSet,
};
use crate::error::{Error, Result};
use crate::linalg::{bicgstab, Banded, Csr};
use crate::physics::{AmbientSource, ModelParams, Scenario, SimulationState};
use crate::scalar::{lit, Real};

/// Optional per-node source term for the moisture equation (manufactured
/// solutions); arguments are the node position and the implicit time level.
pub type SourceFn<T> = Arc<dyn Fn([T; 2], T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct SolverOptions<T> {
    /// Joint nonlinear tolerance on the scaled max-norm residual.
    pub tol_nl: T,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Step retries with halved dt before giving up.
    pub max_dt_halvings: usize,
    /// Successful steps at reduced dt before attempting restoration.
    pub restore_after: usize,
    pub max_linear_iters: usize,
    pub theta_source: Option<SourceFn<T>>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tol_nl: lit(1e-10),
            max_outer: 50,
            max_newton: 25,
            max_dt_halvings: 10,
            restore_after: 100,
            max_linear_iters: 600,
            theta_source: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepReport<T> {
    /// Outer nonlinear iterations used.
    pub iterations: usize,
    /// Scaled max-norm residual at convergence.
    pub max_residual: T,
    /// Nodes converted internal -> outside by this step.
    pub converted: Vec<usize>,
    pub dt_used: T,
    /// Wall clock spent in the step (diagnostic only).
    pub wall: Duration,
}

#[derive(Debug)]
pub enum StepOutcome<T> {
    Advanced(StepReport<T>),
    /// The internal set emptied: the specimen is gone.
    Complete,
}

/// Conservative divergence-form operator at an internal node.
///
/// Returns the 1D contribution or the sum of both axis contributions in 2D.
/// Every stencil node must be internal or ghost.
pub fn div_form<T: Real>(
    grid: &Grid<T>,
    cls: &GridClassification<T>,
    r: &[T],
    w: &[T],
    node: usize,
) -> Result<T> {
    if !cls.is_internal(node) {
        return Err(Error::InvalidParameter(format!(
            "div_form requires an internal node, got {node}"
        )));
    }
    let nbrs = grid.neighbors(node);
    let needed = if grid.dim == Dim::Two { 4 } else { 2 };
    for nb in nbrs.iter().take(needed) {
        match nb {
            Some(k) if cls.class[*k] != PointClass::Outside => {}
            _ => return Err(Error::OutsideInStencil { node }),
        }
    }
    let inv2h2 = T::one() / (lit::<T>(2.0) * grid.h * grid.h);
    let term = |lo: usize, hi: usize| -> T {
        ((r[node] + r[hi]) * (w[hi] - w[node]) - (r[lo] + r[node]) * (w[node] - w[lo])) * inv2h2
    };
    let mut acc = term(nbrs[0].unwrap(), nbrs[1].unwrap());
    if grid.dim == Dim::Two {
        acc = acc + term(nbrs[2].unwrap(), nbrs[3].unwrap());
    }
    Ok(acc)
}

/// One simulation instance: owns the state, level set and classification.
pub struct Simulation<T: Real, L, A> {
    pub grid: Grid<T>,
    pub params: ModelParams<T>,
    pub law: L,
    pub ambient: A,
    pub opts: SolverOptions<T>,
    pub state: SimulationState<T>,
    pub lsf: PorosityLevelSet<T>,
    pub cls: GridClassification<T>,
    dt_base: T,
    dt_cur: T,
    ok_streak: usize,
}

/// Ambient source assembled from a scenario (constant or scheduled).
pub enum ScenarioAmbient<T> {
    Constant(crate::physics::Ambient<T>),
    Schedule(crate::physics::AmbientSchedule<T>),
}

impl<T: Real> AmbientSource<T> for ScenarioAmbient<T> {
    fn at(&self, t: T) -> (T, T) {
        match self {
            ScenarioAmbient::Constant(a) => a.at(t),
            ScenarioAmbient::Schedule(s) => s.at(t),
        }
    }
}

impl<T: Real> Simulation<T, crate::absorption::Law<T>, ScenarioAmbient<T>> {
    /// Builds a simulation from a scenario with its initial conditions.
    pub fn from_scenario(sc: &Scenario<T>, opts: SolverOptions<T>) -> Result<Self> {
        sc.params.validate()?;
        let grid = sc.grid();
        let lsf = sc.initial_level_set(&grid);
        let state = sc.initial_state(&grid, &lsf);
        let law = sc.params.law(sc.law);
        let ambient = match &sc.schedule {
            Some(s) => ScenarioAmbient::Schedule(s.clone()),
            None => ScenarioAmbient::Constant(sc.ambient),
        };
        Simulation::new(grid, sc.params.clone(), law, ambient, state, lsf, sc.dt, opts)
    }
}

impl<T: Real, L: AbsorptionLaw<T>, A: AmbientSource<T>> Simulation<T, L, A> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid<T>,
        params: ModelParams<T>,
        law: L,
        ambient: A,
        state: SimulationState<T>,
        lsf: PorosityLevelSet<T>,
        dt: T,
        opts: SolverOptions<T>,
    ) -> Result<Self> {
        params.validate()?;
        let cls = classify(&grid, &lsf)?;
        let mut sim = Simulation {
            grid,
            params,
            law,
            ambient,
            opts,
            state,
            lsf,
            cls,
            dt_base: dt,
            dt_cur: dt,
            ok_streak: 0,
        };
        sim.sync_ghost_porosity();
        Ok(sim)
    }

    pub fn dt_current(&self) -> T {
        self.dt_cur
    }

    /// Porosity at ghost nodes stands in for the boundary porosity n*: the
    /// value of the reference internal node of each ghost.
    fn sync_ghost_porosity(&mut self) {
        for g in &self.cls.ghosts {
            self.state.n[g.node] = self.state.n[g.ref_internal];
        }
    }

    /// Advances one step, halving dt on nonlinear failure (up to the
    /// configured number of halvings) and restoring it after a run of
    /// successful steps.
    pub fn step(&mut self) -> Result<StepOutcome<T>> {
        let mut halvings_left = self.opts.max_dt_halvings;
        loop {
            match self.step_with_dt(self.dt_cur) {
                Ok(outcome) => {
                    if self.dt_cur < self.dt_base {
                        self.ok_streak += 1;
                        if self.ok_streak >= self.opts.restore_after {
                            self.dt_cur = (self.dt_cur * lit::<T>(2.0)).min(self.dt_base);
                            self.ok_streak = 0;
                        }
                    }
                    return Ok(outcome);
                }
                Err(Error::SolverFailure(msg)) => {
                    if halvings_left == 0 {
                        return Err(Error::SolverFailure(format!(
                            "step failed after exhausting dt halvings: {msg}"
                        )));
                    }
                    halvings_left -= 1;
                    self.dt_cur = self.dt_cur / lit::<T>(2.0);
                    self.ok_streak = 0;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Runs until the simulated time reaches `t_end` (within half a step).
    pub fn run_until(&mut self, t_end: T) -> Result<()> {
        while self.state.t < t_end - self.dt_cur / lit::<T>(2.0) {
            match self.step()? {
                StepOutcome::Advanced(_) => {}
                StepOutcome::Complete => break,
            }
        }
        Ok(())
    }

    /// One implicit step at the given dt: solve, commit, move the front.
    pub fn step_with_dt(&mut self, dt: T) -> Result<StepOutcome<T>> {
        let start = Instant::now();
        let (fields, iterations, max_residual) = self.solve_system(dt)?;

        // Commit fields.
        let t_new = self.state.t + dt;
        for &i in &self.cls.active {
            self.state.theta[i] = fields.theta[i];
            self.state.c_a[i] = fields.c[i];
            self.state.n[i] = fields.n[i];
        }
        let (e_new, c_amb) = self.ambient.at(t_new);
        for &i in &self.cls.outside {
            self.state.theta[i] = e_new;
            self.state.c_a[i] = c_amb;
            self.state.n[i] = self.params.n_outside();
        }
        self.state.t = t_new;

        // The level set follows the live internal porosity; non-internal
        // values stay frozen so the reconstructed front moves continuously.
        for &i in &self.cls.internal {
            self.lsf.values[i] = self.state.n[i];
        }

        let converted = self.apply_front_motion(e_new, c_amb)?;
        if let Some(conv) = converted {
            let report = StepReport {
                iterations,
                max_residual,
                converted: conv,
                dt_used: dt,
                wall: start.elapsed(),
            };
            Ok(StepOutcome::Advanced(report))
        } else {
            Ok(StepOutcome::Complete)
        }
    }

    /// Converts internal nodes that reached the loss threshold and rebuilds
    /// the classification. Returns None when the internal set emptied.
    fn apply_front_motion(&mut self, e_new: T, c_amb: T) -> Result<Option<Vec<usize>>> {
        let mut converted = Vec::new();
        for &i in &self.cls.internal {
            if self.state.n[i] >= self.params.n_max {
                converted.push(i);
            }
        }
        if !converted.is_empty() {
            for &i in &converted {
                // Level-set value freezes at the crossing porosity; the state
                // takes the outside values.
                self.state.theta[i] = e_new;
                self.state.c_a[i] = c_amb;
                self.state.n[i] = self.params.n_outside();
            }
        }
        match classify(&self.grid, &self.lsf) {
            Ok(cls) => {
                self.cls = cls;
                self.sync_ghost_porosity();
                Ok(Some(converted))
            }
            Err(Error::FullyEroded) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Residual scales: ambient magnitudes with floors from the current state.
    fn scales(&self, fields: &Fields<T>, e_new: T, c_amb: T) -> (T, T) {
        let mut th = e_new.max(self.params.n_tilde);
        let mut cc = c_amb;
        for &i in &self.cls.active {
            th = th.max(fields.theta[i].abs());
            cc = cc.max(fields.c[i].abs());
        }
        (th.max(lit(1e-30)), cc.max(lit(1e-30)))
    }

    /// Nonlinear Gauss-Seidel over (n, theta, c). Returns converged fields.
    fn solve_system(&self, dt: T) -> Result<(Fields<T>, usize, T)> {
        let t_new = self.state.t + dt;
        let (e_new, c_amb) = self.ambient.at(t_new);
        let mut fields = Fields {
            theta: self.state.theta.clone(),
            c: self.state.c_a.clone(),
            n: self.state.n.clone(),
            r: vec![T::zero(); self.grid.num_nodes()],
            b: vec![T::zero(); self.grid.num_nodes()],
            bq: vec![T::zero(); self.grid.num_nodes()],
        };
        self.refresh_r(&mut fields);
        self.refresh_b(&mut fields);

        let mut iterations = 0usize;
        loop {
            let resid = self.global_residual(&fields, dt, t_new, e_new, c_amb);
            if resid <= self.opts.tol_nl {
                return Ok((fields, iterations, resid));
            }
            if iterations >= self.opts.max_outer {
                return Err(Error::SolverFailure(format!(
                    "residual {resid} after {iterations} outer iterations (dt = {dt})"
                )));
            }
            iterations += 1;

            self.update_porosity(&mut fields, dt);
            self.refresh_r(&mut fields);
            self.refresh_b(&mut fields);
            self.newton_theta(&mut fields, dt, t_new, e_new)?;
            self.solve_acid(&mut fields, dt, c_amb)?;
        }
    }

    fn update_porosity(&self, fields: &mut Fields<T>, dt: T) {
        let kc = self.params.k_c;
        for &i in &self.cls.internal {
            let a = dt * kc * fields.c[i];
            fields.n[i] = (self.state.n[i] + a) / (T::one() + a);
        }
        for g in &self.cls.ghosts {
            fields.n[g.node] = fields.n[g.ref_internal];
        }
    }

    fn refresh_r(&self, fields: &mut Fields<T>) {
        let nt = self.params.n_tilde;
        for &i in &self.cls.active {
            let ratio = fields.n[i] / nt;
            fields.r[i] = ratio * ratio;
        }
    }

    fn refresh_b(&self, fields: &mut Fields<T>) {
        for &i in &self.cls.active {
            let s = fields.theta[i] / fields.n[i];
            fields.b[i] = self.law.b(s);
            fields.bq[i] = self.law.b_prime(s) / fields.n[i];
        }
    }

    #[inline]
    fn div_interior(&self, r: &[T], w: &[T], node: usize) -> T {
        let nbrs = self.grid.neighbors(node);
        let inv2h2 = T::one() / (lit::<T>(2.0) * self.grid.h * self.grid.h);
        let term = |lo: usize, hi: usize| -> T {
            ((r[node] + r[hi]) * (w[hi] - w[node]) - (r[lo] + r[node]) * (w[node] - w[lo])) * inv2h2
        };
        let mut acc = term(nbrs[0].unwrap(), nbrs[1].unwrap());
        if self.grid.dim == Dim::Two {
            acc = acc + term(nbrs[2].unwrap(), nbrs[3].unwrap());
        }
        acc
    }

    fn theta_source_at(&self, node: usize, t_new: T) -> T {
        match &self.opts.theta_source {
            Some(f) => f(self.grid.pos(node), t_new),
            None => T::zero(),
        }
    }

    /// Moisture residual for one active node (interior relation or ghost
    /// Robin row).
    fn theta_residual_at(&self, fields: &Fields<T>, dt: T, t_new: T, e_new: T, node: usize) -> T {
        if self.cls.is_internal(node) {
            fields.theta[node]
                - self.state.theta[node]
                - dt * self.div_interior(&fields.r, &fields.b, node)
                - dt * self.theta_source_at(node, t_new)
        } else {
            let g = &self.cls.ghosts[self.cls.ghost_of_node[node]];
            let nstar = fields.n[g.ref_internal] / self.params.n_tilde;
            let coef = nstar * nstar;
            let mut flux = T::zero();
            let mut value = T::zero();
            for (k, &p) in g.stencil.nodes.iter().enumerate() {
                flux = flux + g.stencil.neumann[k] * fields.b[p];
                value = value + g.stencil.dirichlet[k] * fields.theta[p];
            }
            coef * flux - self.params.k_w * (e_new - value)
        }
    }

    /// Scale of a ghost moisture row, used to express its residual in
    /// moisture units.
    fn ghost_theta_scale(&self, fields: &Fields<T>, g: &crate::domain::GhostGeometry<T>) -> T {
        let nstar = fields.n[g.ref_internal] / self.params.n_tilde;
        let coef = nstar * nstar;
        self.params.k_w + coef * self.law.d_max() / self.grid.h
    }

    fn ghost_acid_scale(&self, fields: &Fields<T>, g: &crate::domain::GhostGeometry<T>, r_th: T) -> T {
        let nstar = fields.n[g.ref_internal] / self.params.n_tilde;
        let coef = nstar * nstar;
        self.params.k_a + coef * self.law.d_max() / self.grid.h
            + self.params.d_c * r_th / self.grid.h
    }

    /// Acid residual for one active node.
    fn acid_residual_at(&self, fields: &Fields<T>, dt: T, c_amb: T, node: usize) -> T {
        let p = &self.params;
        if self.cls.is_internal(node) {
            let adv = self.div_adv(fields, node);
            let mut diff = self.div_diff(fields, node);
            diff = adv + diff;
            let sink = p.k_c * fields.c[node] * (T::one() - fields.n[node]) * p.k_n * p.rho_0;
            fields.theta[node] * fields.c[node] - self.state.theta[node] * self.state.c_a[node]
                - dt * diff
                + dt * sink
        } else {
            let g = &self.cls.ghosts[self.cls.ghost_of_node[node]];
            let nstar = fields.n[g.ref_internal] / p.n_tilde;
            let coef = nstar * nstar;
            let mut flux_b = T::zero();
            let mut flux_c = T::zero();
            let mut val_c = T::zero();
            let mut val_th = T::zero();
            for (k, &q) in g.stencil.nodes.iter().enumerate() {
                flux_b = flux_b + g.stencil.neumann[k] * fields.b[q];
                flux_c = flux_c + g.stencil.neumann[k] * fields.c[q];
                val_c = val_c + g.stencil.dirichlet[k] * fields.c[q];
                val_th = val_th + g.stencil.dirichlet[k] * fields.theta[q];
            }
            val_c * coef * flux_b + p.d_c * val_th * flux_c - p.k_a * (c_amb - val_c)
        }
    }

    /// Advective acid transport: divergence form with coefficient c (n/nt)^2
    /// against the moisture potential.
    #[inline]
    fn div_adv(&self, fields: &Fields<T>, node: usize) -> T {
        let nbrs = self.grid.neighbors(node);
        let inv2h2 = T::one() / (lit::<T>(2.0) * self.grid.h * self.grid.h);
        let rc = |i: usize| fields.c[i] * fields.r[i];
        let term = |lo: usize, hi: usize| -> T {
            ((rc(node) + rc(hi)) * (fields.b[hi] - fields.b[node])
                - (rc(lo) + rc(node)) * (fields.b[node] - fields.b[lo]))
                * inv2h2
        };
        let mut acc = term(nbrs[0].unwrap(), nbrs[1].unwrap());
        if self.grid.dim == Dim::Two {
            acc = acc + term(nbrs[2].unwrap(), nbrs[3].unwrap());
        }
        acc
    }

    /// Fickian acid diffusion with coefficient D_c theta.
    #[inline]
    fn div_diff(&self, fields: &Fields<T>, node: usize) -> T {
        let nbrs = self.grid.neighbors(node);
        let inv2h2 = T::one() / (lit::<T>(2.0) * self.grid.h * self.grid.h);
        let dth = |i: usize| self.params.d_c * fields.theta[i];
        let term = |lo: usize, hi: usize| -> T {
            ((dth(node) + dth(hi)) * (fields.c[hi] - fields.c[node])
                - (dth(lo) + dth(node)) * (fields.c[node] - fields.c[lo]))
                * inv2h2
        };
        let mut acc = term(nbrs[0].unwrap(), nbrs[1].unwrap());
        if self.grid.dim == Dim::Two {
            acc = acc + term(nbrs[2].unwrap(), nbrs[3].unwrap());
        }
        acc
    }

    /// Scaled max-norm residual of every discrete relation.
    fn global_residual(&self, fields: &Fields<T>, dt: T, t_new: T, e_new: T, c_amb: T) -> T {
        let (r_th, r_c) = self.scales(fields, e_new, c_amb);
        let p = &self.params;
        let mut worst = T::zero();
        for &i in &self.cls.active {
            let ft = self.theta_residual_at(fields, dt, t_new, e_new, i);
            let fc = self.acid_residual_at(fields, dt, c_amb, i);
            let (st, sc) = if self.cls.is_internal(i) {
                (r_th, r_th * r_c)
            } else {
                let g = &self.cls.ghosts[self.cls.ghost_of_node[i]];
                (
                    self.ghost_theta_scale(fields, g) * r_th,
                    self.ghost_acid_scale(fields, g, r_th) * r_c,
                )
            };
            worst = worst.max(ft.abs() / st).max(fc.abs() / sc);
            if self.cls.is_internal(i) {
                let fn_ = fields.n[i]
                    - self.state.n[i]
                    - dt * p.k_c * fields.c[i] * (T::one() - fields.n[i]);
                worst = worst.max(fn_.abs() / p.n_max);
            }
        }
        worst
    }

    /// Scaled max-norm of the moisture rows only.
    fn theta_residual_norm(&self, fields: &Fields<T>, dt: T, t_new: T, e_new: T, r_th: T) -> T {
        let mut worst = T::zero();
        for &i in &self.cls.active {
            let f = self.theta_residual_at(fields, dt, t_new, e_new, i);
            let s = if self.cls.is_internal(i) {
                r_th
            } else {
                let g = &self.cls.ghosts[self.cls.ghost_of_node[i]];
                self.ghost_theta_scale(fields, g) * r_th
            };
            worst = worst.max(f.abs() / s);
        }
        worst
    }

    /// Damped Newton on the moisture rows with porosity frozen.
    fn newton_theta(&self, fields: &mut Fields<T>, dt: T, t_new: T, e_new: T) -> Result<()> {
        let (r_th, _) = self.scales(fields, e_new, T::zero());
        let target = self.opts.tol_nl * lit::<T>(0.3);
        let na = self.cls.active.len();
        let reg = lit::<T>(1e-14);
        let mut f = vec![T::zero(); na];
        let mut norm = self.theta_residual_norm(fields, dt, t_new, e_new, r_th);
        if norm <= target {
            return Ok(());
        }
        let mut delta = vec![T::zero(); na];
        let mut theta_save = vec![T::zero(); na];

        for _ in 0..self.opts.max_newton {
            for (k, &i) in self.cls.active.iter().enumerate() {
                f[k] = -self.theta_residual_at(fields, dt, t_new, e_new, i);
            }
            self.solve_theta_linear(fields, dt, reg, &f, &mut delta, r_th)?;

            for (k, &i) in self.cls.active.iter().enumerate() {
                theta_save[k] = fields.theta[i];
            }
            let mut lambda = T::one();
            let mut improved = false;
            for _ in 0..10 {
                for (k, &i) in self.cls.active.iter().enumerate() {
                    fields.theta[i] = theta_save[k] + lambda * delta[k];
                }
                self.refresh_b(fields);
                let new_norm = self.theta_residual_norm(fields, dt, t_new, e_new, r_th);
                if new_norm < norm {
                    norm = new_norm;
                    improved = true;
                    break;
                }
                lambda = lambda / lit::<T>(2.0);
            }
            if !improved {
                // restore and let the outer loop decide
                for (k, &i) in self.cls.active.iter().enumerate() {
                    fields.theta[i] = theta_save[k];
                }
                self.refresh_b(fields);
                return Ok(());
            }
            if norm <= target {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Assembles and solves the Newton correction for the moisture rows.
    fn solve_theta_linear(
        &self,
        fields: &Fields<T>,
        dt: T,
        reg: T,
        rhs: &[T],
        delta: &mut [T],
        r_th: T,
    ) -> Result<()> {
        let na = self.cls.active.len();
        let inv2h2 = T::one() / (lit::<T>(2.0) * self.grid.h * self.grid.h);
        let mut row: Vec<(usize, T)> = Vec::with_capacity(16);

        let build_row = |i: usize, row: &mut Vec<(usize, T)>| {
            row.clear();
            if self.cls.is_internal(i) {
                let nbrs = self.grid.neighbors(i);
                let naxes = if self.grid.dim == Dim::Two { 2 } else { 1 };
                let mut diag = T::one() + reg;
                for ax in 0..naxes {
                    let lo = nbrs[2 * ax].unwrap();
                    let hi = nbrs[2 * ax + 1].unwrap();
                    let c_hi = (fields.r[i] + fields.r[hi]) * inv2h2;
                    let c_lo = (fields.r[lo] + fields.r[i]) * inv2h2;
                    diag = diag + dt * (c_hi + c_lo) * fields.bq[i];
                    row.push((self.cls.active_of_node[lo], -dt * c_lo * fields.bq[lo]));
                    row.push((self.cls.active_of_node[hi], -dt * c_hi * fields.bq[hi]));
                }
                row.push((self.cls.active_of_node[i], diag));
            } else {
                let g = &self.cls.ghosts[self.cls.ghost_of_node[i]];
                let nstar = fields.n[g.ref_internal] / self.params.n_tilde;
                let coef = nstar * nstar;
                let me = self.cls.active_of_node[i];
                let mut has_diag = false;
                for (k, &p) in g.stencil.nodes.iter().enumerate() {
                    let col = self.cls.active_of_node[p];
                    let v = coef * g.stencil.neumann[k] * fields.bq[p]
                        + self.params.k_w * g.stencil.dirichlet[k];
                    if col == me {
                        has_diag = true;
                        row.push((col, v + reg));
                    } else {
                        row.push((col, v));
                    }
                }
                if !has_diag {
                    row.push((me, reg));
                }
            }
        };

        match self.grid.dim {
            Dim::One => {
                let mut band = Banded::<T>::new(na, 2, 2);
                let mut b = rhs.to_vec();
                for (k, &i) in self.cls.active.iter().enumerate() {
                    build_row(i, &mut row);
                    for &(col, v) in row.iter() {
                        band.add(k, col, v);
                    }
                }
                band.solve(&mut b)
                    .map_err(|e| Error::SolverFailure(format!("moisture system: {e}")))?;
                delta.copy_from_slice(&b);
                Ok(())
            }
            Dim::Two => {
                let mut csr = Csr::<T>::with_capacity(na, 9 * na);
                let mut b = vec![T::zero(); na];
                let mut scaled: Vec<(usize, T)> = Vec::with_capacity(16);
                for (k, &i) in self.cls.active.iter().enumerate() {
                    build_row(i, &mut row);
                    // row scaling keeps the system O(1) across interior and
                    // Robin rows
                    let s = if self.cls.is_internal(i) {
                        T::one()
                    } else {
                        let g = &self.cls.ghosts[self.cls.ghost_of_node[i]];
                        self.ghost_theta_scale(fields, g)
                    };
                    scaled.clear();
                    for &(c, v) in row.iter() {
                        scaled.push((c, v / s));
                    }
                    scaled.sort_by_key(|e| e.0);
                    csr.push_row(&scaled);
                    b[k] = rhs[k] / s;
                }
                delta.fill(T::zero());
                let fnorm: T = b.iter().map(|v| *v * *v).sum::<T>().sqrt();
                let tol = (fnorm * lit::<T>(1e-4)).max(r_th * lit::<T>(1e-16));
                bicgstab(&csr, &b, delta, tol, self.opts.max_linear_iters)
                    .map_err(|e| Error::SolverFailure(format!("moisture system: {e}")))?;
                Ok(())
            }
        }
    }

    /// Direct solve of the acid system, linear given moisture and porosity.
    fn solve_acid(&self, fields: &mut Fields<T>, dt: T, c_amb: T) -> Result<()> {
        let p = &self.params;
        let na = self.cls.active.len();
        let inv2h2 = T::one() / (lit::<T>(2.0) * self.grid.h * self.grid.h);
        let mut row: Vec<(usize, T)> = Vec::with_capacity(16);
        let (r_th, r_c) = self.scales(fields, T::zero(), c_amb);

        let build_row = |i: usize, row: &mut Vec<(usize, T)>| -> T {
            row.clear();
            if self.cls.is_internal(i) {
                let nbrs = self.grid.neighbors(i);
                let naxes = if self.grid.dim == Dim::Two { 2 } else { 1 };
                let mut diag = fields.theta[i]
                    + dt * p.k_c * (T::one() - fields.n[i]) * p.k_n * p.rho_0;
                for ax in 0..naxes {
                    let lo = nbrs[2 * ax].unwrap();
                    let hi = nbrs[2 * ax + 1].unwrap();
                    let db_hi = fields.b[hi] - fields.b[i];
                    let db_lo = fields.b[i] - fields.b[lo];
                    // advective part, coefficient c r against the potential
                    diag = diag - dt * fields.r[i] * (db_hi - db_lo) * inv2h2;
                    let mut c_hi = -dt * fields.r[hi] * db_hi * inv2h2;
                    let mut c_lo = dt * fields.r[lo] * db_lo * inv2h2;
                    // Fickian part
                    let dth_hi = p.d_c * (fields.theta[i] + fields.theta[hi]) * inv2h2;
                    let dth_lo = p.d_c * (fields.theta[lo] + fields.theta[i]) * inv2h2;
                    diag = diag + dt * (dth_hi + dth_lo);
                    c_hi = c_hi - dt * dth_hi;
                    c_lo = c_lo - dt * dth_lo;
                    row.push((self.cls.active_of_node[lo], c_lo));
                    row.push((self.cls.active_of_node[hi], c_hi));
                }
                row.push((self.cls.active_of_node[i], diag));
                self.state.theta[i] * self.state.c_a[i]
            } else {
                let g = &self.cls.ghosts[self.cls.ghost_of_node[i]];
                let nstar = fields.n[g.ref_internal] / p.n_tilde;
                let coef = nstar * nstar;
                let mut flux_b = T::zero();
                let mut val_th = T::zero();
                for (k, &q) in g.stencil.nodes.iter().enumerate() {
                    flux_b = flux_b + g.stencil.neumann[k] * fields.b[q];
                    val_th = val_th + g.stencil.dirichlet[k] * fields.theta[q];
                }
                for (k, &q) in g.stencil.nodes.iter().enumerate() {
                    let v = g.stencil.dirichlet[k] * (coef * flux_b + p.k_a)
                        + p.d_c * val_th * g.stencil.neumann[k];
                    row.push((self.cls.active_of_node[q], v));
                }
                p.k_a * c_amb
            }
        };

        match self.grid.dim {
            Dim::One => {
                let mut band = Banded::<T>::new(na, 2, 2);
                let mut b = vec![T::zero(); na];
                for (k, &i) in self.cls.active.iter().enumerate() {
                    let rhs = build_row(i, &mut row);
                    b[k] = rhs;
                    for &(col, v) in row.iter() {
                        band.add(k, col, v);
                    }
                }
                band.solve(&mut b)
                    .map_err(|e| Error::SolverFailure(format!("acid system: {e}")))?;
                for (k, &i) in self.cls.active.iter().enumerate() {
                    fields.c[i] = b[k];
                }
                Ok(())
            }
            Dim::Two => {
                let mut csr = Csr::<T>::with_capacity(na, 9 * na);
                let mut b = vec![T::zero(); na];
                let mut scaled: Vec<(usize, T)> = Vec::with_capacity(16);
                for (k, &i) in self.cls.active.iter().enumerate() {
                    let rhs = build_row(i, &mut row);
                    let s = if self.cls.is_internal(i) {
                        r_th
                    } else {
                        let g = &self.cls.ghosts[self.cls.ghost_of_node[i]];
                        self.ghost_acid_scale(fields, g, r_th)
                    };
                    scaled.clear();
                    for &(c, v) in row.iter() {
                        scaled.push((c, v / s));
                    }
                    scaled.sort_by_key(|e| e.0);
                    csr.push_row(&scaled);
                    b[k] = rhs / s;
                }
                let mut x = vec![T::zero(); na];
                for (k, &i) in self.cls.active.iter().enumerate() {
                    x[k] = fields.c[i];
                }
                let tol = (r_c * lit::<T>(0.03) * self.opts.tol_nl).max(lit(1e-300));
                bicgstab(&csr, &b, &mut x, tol, self.opts.max_linear_iters)
                    .map_err(|e| Error::SolverFailure(format!("acid system: {e}")))?;
                for (k, &i) in self.cls.active.iter().enumerate() {
                    fields.c[i] = x[k];
                }
                Ok(())
            }
        }
    }
}

struct Fields<T> {
    theta: Vec<T>,
    c: Vec<T>,
    n: Vec<T>,
    /// (n/n_tilde)^2 per node.
    r: Vec<T>,
    /// B(theta/n) per node.
    b: Vec<T>,
    /// B'(theta/n)/n per node: d B(theta/n) / d theta.
    bq: Vec<T>,
}
