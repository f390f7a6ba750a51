//! Projection integrator for the incompressible limit system: director
//! update, velocity predictor with explicit convection and Ericksen force and
//! implicit viscosity, then a discrete projection onto divergence-free fields
//! that vanish on the wall.

use crate::config::RunConfig;
use crate::director::{advective_cfl, director_step};
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid, ScalarField, VectorField};
use crate::init::initial_data;
use crate::model::{self, EnergyLedger, ModelParams};
use crate::ops;
use crate::poisson::SpectralSolver;
use crate::trajectory::{RunDiagnostics, RunResult, Snapshot, Trajectory};

const PROJECTION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct IncompressibleState {
    pub t: f64,
    pub u: VectorField,
    pub d: DirectorField,
    /// Zero-mean hydrostatic pressure.
    pub pi: ScalarField,
}

/// `lambda div(grad d (.) grad d)`; identically zero for a constant director.
pub fn ericksen_force(d: &DirectorField, lambda: f64) -> VectorField {
    let mut t = model::director_gram(d);
    for v in t.xx.iter_mut().chain(t.xy.iter_mut()).chain(t.yy.iter_mut()) {
        *v *= lambda;
    }
    ops::div_tensor(&t)
}

/// `(u . grad) u` with centred differences.
pub fn convection(u: &VectorField) -> VectorField {
    let gx = ops::grad(&u.component(0));
    let gy = ops::grad(&u.component(1));
    let mut out = VectorField::zeros(u.grid);
    for k in 0..u.grid.len() {
        out.x[k] = u.x[k] * gx.x[k] + u.y[k] * gx.y[k];
        out.y[k] = u.x[k] * gy.x[k] + u.y[k] * gy.y[k];
    }
    out
}

/// `||div u|| / ||grad u||` in the grid norms; zero for a vanishing field.
pub fn divergence_ratio(u: &VectorField) -> f64 {
    let dv = ops::div(u);
    let grad = ops::edge_energy(&u.grid, &u.x) + ops::edge_energy(&u.grid, &u.y);
    if grad == 0.0 {
        return 0.0;
    }
    dv.dot(&dv).sqrt() / grad.sqrt()
}

pub struct IncompressibleSolver {
    pub grid: Grid,
    pub params: ModelParams,
    spectral: SpectralSolver,
}

impl IncompressibleSolver {
    pub fn new(grid: Grid, params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { grid, params, spectral: SpectralSolver::new(grid) })
    }

    /// Discrete projection of an arbitrary field, with its wall trace removed first.
    pub fn project(&self, u: &VectorField) -> Result<VectorField> {
        let mut v = u.clone();
        v.zero_boundary();
        if self.grid.is_slab() {
            v.y.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(self.spectral.fd_project(&v, PROJECTION_TOL)?.0)
    }

    pub fn step(&self, s: &IncompressibleState, dt: f64) -> Result<IncompressibleState> {
        let g = self.grid;
        let p = &self.params;
        g.check_same(&s.u.grid)?;
        g.check_same(&s.d.grid)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let cfl = advective_cfl(&s.u, dt);
        if cfl > 1.0 {
            return Err(Error::StepRejected(format!("advective CFL number {cfl:.3} exceeds 1")));
        }
        let d_new = director_step(&s.d, &s.u, dt, p, &self.spectral)?;
        let mut rhs = s.u.clone();
        rhs.axpy(-dt, &convection(&s.u));
        rhs.axpy(-dt, &ericksen_force(&d_new, p.lambda));
        let zero = vec![0.0; g.len()];
        let mut star = VectorField::zeros(g);
        star.x = self.spectral.dirichlet_helmholtz(1.0, dt * p.mu, &rhs.x, &zero);
        if !g.is_slab() {
            star.y = self.spectral.dirichlet_helmholtz(1.0, dt * p.mu, &rhs.y, &zero);
        }
        let (u, psi, _) = self.spectral.fd_project(&star, PROJECTION_TOL)?;
        let mean = psi.mean();
        let pi = psi.map(|v| (v - mean) / dt);
        if !u.is_finite() || !d_new.is_finite() {
            return Err(Error::InvalidState("non-finite velocity or director".into()));
        }
        Ok(IncompressibleState { t: s.t + dt, u, d: d_new, pi })
    }
}

/// Initial state with the projected initial velocity.
pub fn initial_state(cfg: &RunConfig) -> Result<IncompressibleState> {
    let g = cfg.grid()?;
    let init = initial_data(&g, &cfg.init, cfg.params.epsilon);
    let solver = IncompressibleSolver::new(g, cfg.params)?;
    Ok(IncompressibleState { t: 0.0, u: solver.project(&init.u)?, d: init.d, pi: ScalarField::zeros(g) })
}

pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    run_from(cfg, initial_state(cfg)?)
}

pub fn run_from(cfg: &RunConfig, state0: IncompressibleState) -> Result<RunResult> {
    let g = cfg.grid()?;
    let params = cfg.params;
    let solver = IncompressibleSolver::new(g, params)?;
    let steps = cfg.steps();
    let dt = cfg.time.t_final / steps as f64;
    let mut state = state0;
    let mut traj = Trajectory::new(g);
    let mut ledger = EnergyLedger::new();
    let mut diag = RunDiagnostics {
        initial_director_max: state.d.max_norm(),
        max_director_norm: state.d.max_norm(),
        ..Default::default()
    };
    let record = |s: &IncompressibleState, ledger: &mut EnergyLedger| {
        let e = model::energy_snapshot(None, &s.u, &s.d, &params);
        ledger.record(s.t, e, model::viscous_dissipation_rate(&s.u, params.mu), model::director_dissipation_rate(&s.d, &params))
    };
    let snap = |s: &IncompressibleState| Snapshot { t: s.t, rho: None, u: s.u.clone(), d: s.d.clone() };
    record(&state, &mut ledger);
    traj.snapshots.push(snap(&state));
    let e0 = ledger.initial_total();
    for n in 1..=steps {
        let mut next = solver.step(&state, dt).map_err(|e| match e {
            Error::StepRejected(r) | Error::InvalidState(r) => Error::NumericalAbort { t: state.t, reason: r },
            other => other,
        })?;
        next.t = n as f64 * dt;
        diag.steps += 1;
        diag.max_director_norm = diag.max_director_norm.max(next.d.max_norm());
        diag.max_divergence_ratio = diag.max_divergence_ratio.max(divergence_ratio(&next.u));
        let row = record(&next, &mut ledger);
        if row.total_plus_dissipation > e0 * 1.05 + 1e-10 {
            return Err(Error::NumericalAbort { t: next.t, reason: "energy ledger increased by more than 5%".into() });
        }
        state = next;
        if n % cfg.time.output_stride == 0 || n == steps {
            traj.snapshots.push(snap(&state));
        }
    }
    diag.max_energy_increase = ledger.max_relative_increase();
    Ok(RunResult { trajectory: traj, ledger, traces: Default::default(), diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Domain;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(Domain::rectangle(PI, PI).unwrap(), 32, 32).unwrap()
    }

    fn still(g: Grid, u: VectorField) -> IncompressibleState {
        IncompressibleState { t: 0.0, u, d: DirectorField::constant(g, [0.0, 0.0, 1.0]), pi: ScalarField::zeros(g) }
    }

    #[test]
    fn rest_state_is_stationary() {
        let g = grid();
        let s = IncompressibleSolver::new(g, ModelParams::default()).unwrap();
        let s0 = still(g, VectorField::zeros(g));
        let s1 = s.step(&s0, 0.01).unwrap();
        assert!(s1.u.max_abs() < 1e-12);
        assert!(s1.d.sub(&s0.d).max_norm() < 1e-12);
    }

    #[test]
    fn constant_director_gives_no_force() {
        let g = grid();
        let d = DirectorField::constant(g, [0.6, 0.0, 0.8]);
        assert_eq!(ericksen_force(&d, 0.5).max_abs(), 0.0);
    }

    #[test]
    fn viscous_bubble_decays_monotonically() {
        let g = grid();
        let solver = IncompressibleSolver::new(g, ModelParams::default()).unwrap();
        let bubble = VectorField::sample(&g, |x, y| {
            let (sx, cx) = x.sin_cos();
            let (sy, cy) = y.sin_cos();
            [0.1 * 2.0 * sx * sx * sy * cy, -0.1 * 2.0 * sx * cx * sy * sy]
        });
        let mut s = still(g, solver.project(&bubble).unwrap());
        let mut ke = s.u.dot(&s.u);
        for _ in 0..20 {
            s = solver.step(&s, 0.01).unwrap();
            let k = s.u.dot(&s.u);
            assert!(k < ke);
            ke = k;
            assert!(divergence_ratio(&s.u) <= 1e-8);
        }
    }
}
