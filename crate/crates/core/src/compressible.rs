//! Semi-implicit integrator for the scaled compressible nematic system with
//! no-slip walls and Dirichlet director data.
//!
//! A step updates the director, forms a momentum predictor with explicit
//! convection and Ericksen stress and implicit viscosity, then solves a
//! linearised Helmholtz problem for the pressure increment so that the new
//! density and momentum are consistent. The density update is a discrete
//! divergence of a momentum with zero wall trace, so mass is conserved to
//! round-off.

use crate::acoustic::{self, ModeAmplitude, ModeProjector, TraceSet, WaveState};
use crate::config::RunConfig;
use crate::director::{advective_cfl, director_step};
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid, ScalarField, TensorField, VectorField};
use crate::init::initial_data;
use crate::model::{self, EnergyLedger, ModelParams};
use crate::ops::{self, GradMask};
use crate::poisson::SpectralSolver;
use crate::spectral::SpectralBasis;
use crate::trajectory::{RunDiagnostics, RunResult, Snapshot, Trajectory};

/// Maximum number of successive time-step halvings.
pub const MAX_HALVINGS: u32 = 10;
/// Coefficient of the fourth-difference velocity filter.
pub const FILTER_STRENGTH: f64 = 1.0 / 128.0;
/// Runs abort when total-plus-dissipation exceeds its initial value by this fraction.
pub const ENERGY_ABORT_FRACTION: f64 = 0.05;

const SOLVE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CompressibleState {
    pub t: f64,
    pub rho: ScalarField,
    pub u: VectorField,
    pub d: DirectorField,
}

impl CompressibleState {
    pub fn momentum(&self) -> VectorField {
        VectorField { grid: self.u.grid, x: mul(&self.rho.data, &self.u.x), y: mul(&self.rho.data, &self.u.y) }
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    /// Fluctuation-momentum pair rescaled to unit sound speed:
    /// `(sqrt(gamma) (rho - 1) / eps, rho u)` with Mach parameter `eps / sqrt(gamma)`.
    pub fn wave_state(&self, params: &ModelParams) -> WaveState {
        let sg = params.gamma.sqrt();
        WaveState {
            phi: self.rho.map(|r| sg * (r - 1.0) / params.epsilon),
            m: self.momentum(),
            epsilon: params.epsilon / sg,
        }
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `u1 = u` where `|rho - 1| <= 1/2`, `u2 = u` elsewhere.
pub fn velocity_split(state: &CompressibleState) -> (VectorField, VectorField) {
    let g = state.u.grid;
    let mut u1 = VectorField::zeros(g);
    let mut u2 = VectorField::zeros(g);
    for k in 0..g.len() {
        let target = if (state.rho.data[k] - 1.0).abs() <= 0.5 { &mut u1 } else { &mut u2 };
        target.x[k] = state.u.x[k];
        target.y[k] = state.u.y[k];
    }
    (u1, u2)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    /// Number of substeps actually taken (a power of two).
    pub substeps: usize,
    pub max_iterations: usize,
}

pub struct CompressibleSolver {
    pub grid: Grid,
    pub params: ModelParams,
    pub filter: bool,
    spectral: SpectralSolver,
}

impl CompressibleSolver {
    pub fn new(grid: Grid, params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { grid, params, filter: true, spectral: SpectralSolver::new(grid) })
    }

    pub fn spectral(&self) -> &SpectralSolver {
        &self.spectral
    }

    /// Advances by `dt`, halving the step up to [`MAX_HALVINGS`] times when a
    /// substep produces a negative density or violates the advective CFL bound.
    pub fn step(&self, state: &CompressibleState, dt: f64) -> Result<(CompressibleState, StepStats)> {
        let mut last_reason = String::new();
        for level in 0..=MAX_HALVINGS {
            let n = 1usize << level;
            let h = dt / n as f64;
            let mut cur = state.clone();
            let mut stats = StepStats { substeps: n, max_iterations: 0 };
            let mut ok = true;
            for _ in 0..n {
                match self.try_step(&cur, h) {
                    Ok((next, it)) => {
                        stats.max_iterations = stats.max_iterations.max(it);
                        cur = next;
                    }
                    Err(Error::StepRejected(r)) | Err(Error::InvalidState(r)) => {
                        last_reason = r;
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if ok {
                cur.t = state.t + dt;
                return Ok((cur, stats));
            }
        }
        Err(Error::NumericalAbort {
            t: state.t,
            reason: format!("step failed after {MAX_HALVINGS} halvings: {last_reason}"),
        })
    }

    /// One attempt at a single step of size `dt`; returns the new state and the
    /// largest inner iteration count.
    pub fn try_step(&self, s: &CompressibleState, dt: f64) -> Result<(CompressibleState, usize)> {
        let g = self.grid;
        let p = &self.params;
        g.check_same(&s.rho.grid)?;
        g.check_same(&s.u.grid)?;
        g.check_same(&s.d.grid)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let cfl = advective_cfl(&s.u, dt);
        if cfl > 1.0 {
            return Err(Error::StepRejected(format!("advective CFL number {cfl:.3} exceeds 1")));
        }
        let n = g.len();
        let d_new = director_step(&s.d, &s.u, dt, p, &self.spectral)?;

        // Momentum predictor.
        let rho = &s.rho.data;
        let mut conv = TensorField::zeros(g);
        for k in 0..n {
            conv.xx[k] = rho[k] * s.u.x[k] * s.u.x[k];
            conv.xy[k] = rho[k] * s.u.x[k] * s.u.y[k];
            conv.yy[k] = rho[k] * s.u.y[k] * s.u.y[k];
        }
        let mut force = ops::div_tensor(&conv);
        force.axpy(1.0, &ops::div_tensor(&model::ericksen_stress(&d_new, p.lambda, p.sigma0)));
        let mut u_hat = s.u.clone();
        let mut max_it = 0;
        for (comp, f, out) in [(&s.u.x, &force.x, &mut u_hat.x), (&s.u.y, &force.y, &mut u_hat.y)] {
            let rhs: Vec<f64> = (0..n).map(|k| rho[k] * comp[k] - dt * f[k]).collect();
            let rep = self.spectral.dirichlet_variable(rho, dt * p.mu, &rhs, out, SOLVE_TOL)?;
            max_it = max_it.max(rep.iterations);
        }
        if g.is_slab() {
            u_hat.y.iter_mut().for_each(|v| *v = 0.0);
        }
        if self.filter {
            fourth_difference_filter(&mut u_hat, FILTER_STRENGTH);
        }

        // Linearised acoustic correction for the pressure increment.
        let e2 = p.epsilon * p.epsilon;
        let pn = s.rho.map(|r| r.max(0.0).powf(p.gamma));
        let inv_c2: Vec<f64> = rho.iter().map(|r| 1.0 / (p.gamma * r.max(1e-300).powf(p.gamma - 1.0))).collect();
        let m_hat = VectorField { grid: g, x: mul(rho, &u_hat.x), y: mul(rho, &u_hat.y) };
        let div_m = ops::div(&m_hat);
        let dgp = ops::div(&ops::grad_masked(&pn, GradMask::All));
        let s_coef = dt * dt / e2;
        let rhs: Vec<f64> = (0..n).map(|k| -dt * div_m.data[k] + s_coef * dgp.data[k]).collect();
        let mut dp = vec![0.0; n];
        let rep = self.spectral.acoustic_solve(&inv_c2, s_coef, &rhs, &mut dp, SOLVE_TOL)?;
        max_it = max_it.max(rep.iterations);

        let p_new = ScalarField { grid: g, data: pn.data.iter().zip(&dp).map(|(a, b)| a + b).collect() };
        let mut m = m_hat;
        m.axpy(-dt / e2, &ops::grad_masked(&p_new, GradMask::All));
        let mut rho_new = s.rho.clone();
        rho_new.axpy(-dt, &ops::div(&m));
        if let Some(v) = rho_new.data.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidState(format!("density {v:e} after update")));
        }
        let u = VectorField { grid: g, x: m.x.iter().zip(&rho_new.data).map(|(a, r)| a / r).collect(), y: m.y.iter().zip(&rho_new.data).map(|(a, r)| a / r).collect() };
        if !u.is_finite() || !d_new.is_finite() {
            return Err(Error::InvalidState("non-finite velocity or director".into()));
        }
        Ok((CompressibleState { t: s.t + dt, rho: rho_new, u, d: d_new }, max_it))
    }
}

/// `u <- u - kappa (A_x^2 + A_y^2) u` with `A` the Dirichlet second difference,
/// applied at interior nodes.
pub fn fourth_difference_filter(u: &mut VectorField, kappa: f64) {
    let g = u.grid;
    for comp in [&mut u.x, &mut u.y] {
        let second = |f: &[f64], along_x: bool| -> Vec<f64> {
            let mut out = vec![0.0; f.len()];
            for (i, j, k) in g.nodes() {
                if g.is_boundary(i, j) {
                    continue;
                }
                out[k] = if along_x {
                    f[g.idx(i + 1, j)] - 2.0 * f[k] + f[g.idx(i - 1, j)]
                } else {
                    f[g.idx(i, j + 1)] - 2.0 * f[k] + f[g.idx(i, j - 1)]
                };
            }
            out
        };
        let mut corr = second(&second(comp, true), true);
        if !g.is_slab() {
            let yy = second(&second(comp, false), false);
            corr.iter_mut().zip(&yy).for_each(|(a, b)| *a += b);
        }
        comp.iter_mut().zip(&corr).for_each(|(v, c)| *v -= kappa * c);
    }
}

/// Mode amplitudes and forcing projections of a compressible state, in the
/// unit-sound-speed scaling of [`CompressibleState::wave_state`].
pub fn state_modes(state: &CompressibleState, params: &ModelParams, proj: &ModeProjector) -> Result<(Vec<ModeAmplitude>, Vec<ModeAmplitude>)> {
    let beta = acoustic::mode_amplitudes(&state.wave_state(params), proj)?;
    let c = acoustic::acoustic_forcing(&state.rho, &state.u, &state.d, params, proj)?;
    Ok((beta, c))
}

/// Builds the initial state of a configuration.
pub fn initial_state(cfg: &RunConfig) -> Result<CompressibleState> {
    let g = cfg.grid()?;
    let init = initial_data(&g, &cfg.init, cfg.params.epsilon);
    Ok(CompressibleState { t: 0.0, rho: init.rho, u: init.u, d: init.d })
}

/// Integrates a configuration to its final time, keeping snapshots at the
/// output stride and the energy ledger at every step. Mode traces are
/// recorded when a basis is supplied.
pub fn run(cfg: &RunConfig, basis: Option<&SpectralBasis>) -> Result<RunResult> {
    cfg.validate()?;
    run_from(cfg, initial_state(cfg)?, basis)
}

pub fn run_from(cfg: &RunConfig, state0: CompressibleState, basis: Option<&SpectralBasis>) -> Result<RunResult> {
    let g = cfg.grid()?;
    let params = cfg.params;
    let solver = CompressibleSolver::new(g, params)?;
    let proj = basis.map(|b| ModeProjector::new(g, b)).transpose()?;
    let steps = cfg.steps();
    let dt = cfg.time.t_final / steps as f64;

    let mut state = state0;
    let mut traj = Trajectory::new(g);
    let mut ledger = EnergyLedger::new();
    let mut traces = proj.as_ref().map(TraceSet::for_projector).unwrap_or_default();
    let mut diag = RunDiagnostics {
        initial_mass: state.mass(),
        initial_director_max: state.d.max_norm(),
        max_director_norm: state.d.max_norm(),
        ..Default::default()
    };

    let record_ledger = |s: &CompressibleState, ledger: &mut EnergyLedger| {
        let e = model::energy_snapshot(Some(&s.rho), &s.u, &s.d, &params);
        ledger.record(s.t, e, model::viscous_dissipation_rate(&s.u, params.mu), model::director_dissipation_rate(&s.d, &params))
    };
    let sample = |s: &CompressibleState, traj: &mut Trajectory, traces: &mut TraceSet| -> Result<()> {
        traj.snapshots.push(Snapshot { t: s.t, rho: Some(s.rho.clone()), u: s.u.clone(), d: s.d.clone() });
        if let Some(p) = &proj {
            let (beta, c) = state_modes(s, &params, p)?;
            traces.push(s.t, &beta, Some(&c));
        }
        Ok(())
    };

    record_ledger(&state, &mut ledger);
    sample(&state, &mut traj, &mut traces)?;
    let e0 = ledger.initial_total();
    for n in 1..=steps {
        let (mut next, stats) = solver.step(&state, dt)?;
        next.t = n as f64 * dt;
        diag.steps += 1;
        if stats.substeps > 1 {
            diag.halved_steps += 1;
        }
        diag.max_solver_iterations = diag.max_solver_iterations.max(stats.max_iterations);
        let drift = (next.mass() - diag.initial_mass).abs() / diag.initial_mass.abs().max(f64::MIN_POSITIVE);
        diag.max_relative_mass_drift = diag.max_relative_mass_drift.max(drift);
        diag.max_director_norm = diag.max_director_norm.max(next.d.max_norm());
        let row = record_ledger(&next, &mut ledger);
        if row.total_plus_dissipation > e0 * (1.0 + ENERGY_ABORT_FRACTION) + 1e-10 {
            return Err(Error::NumericalAbort {
                t: next.t,
                reason: format!("energy {:.6e} exceeds initial {:.6e} by more than 5%", row.total_plus_dissipation, e0),
            });
        }
        state = next;
        if n % cfg.time.output_stride == 0 || n == steps {
            sample(&state, &mut traj, &mut traces)?;
        }
    }
    diag.max_energy_increase = ledger.max_relative_increase();
    Ok(RunResult { trajectory: traj, ledger, traces, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitConfig, Profile};
    use crate::spectral::{eigenpair, Domain, ModeIndex};
    use std::f64::consts::PI;

    fn cfg(profile: Profile, n: usize) -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.nx = n;
        c.grid.ny = n;
        c.init = InitConfig { profile, amplitude: 1.0, seed: 1 };
        c.time.t_final = 0.05;
        c.time.dt = 0.0025;
        c
    }

    #[test]
    fn equilibrium_is_stationary() {
        let c = cfg(Profile::Equilibrium, 16);
        let s0 = initial_state(&c).unwrap();
        let solver = CompressibleSolver::new(c.grid().unwrap(), c.params).unwrap();
        let (s1, _) = solver.step(&s0, 0.01).unwrap();
        assert!(s1.rho.sub(&s0.rho).max_abs() < 1e-12);
        assert!(s1.u.max_abs() < 1e-12);
        assert!(s1.d.sub(&s0.d).max_norm() < 1e-12);
    }

    #[test]
    fn mass_is_conserved_and_walls_hold() {
        let c = cfg(Profile::Mixed, 24);
        let s0 = initial_state(&c).unwrap();
        let solver = CompressibleSolver::new(c.grid().unwrap(), c.params).unwrap();
        let mut s = s0.clone();
        for _ in 0..5 {
            s = solver.step(&s, 0.0025).unwrap().0;
        }
        assert!((s.mass() - s0.mass()).abs() <= 1e-12 * s0.mass());
        assert_eq!(s.u.boundary_max_abs(), 0.0);
        assert_eq!(s.d.max_boundary_deviation(&s0.d), 0.0);
    }

    #[test]
    fn split_examples() {
        let g = Grid::new(Domain::rectangle(PI, PI).unwrap(), 16, 16).unwrap();
        let u = VectorField::sample(&g, |x, y| [x.sin(), y.cos()]);
        let d = DirectorField::constant(g, [0.0, 0.0, 1.0]);
        let mk = |rho: ScalarField| CompressibleState { t: 0.0, rho, u: u.clone(), d: d.clone() };
        let (u1, u2) = velocity_split(&mk(ScalarField::constant(g, 1.0)));
        assert_eq!(u1, u);
        assert_eq!(u2.max_abs(), 0.0);
        let (u1, u2) = velocity_split(&mk(ScalarField::constant(g, 2.0)));
        assert_eq!(u1.max_abs(), 0.0);
        assert_eq!(u2, u);
        let phi = g.sample_mode(&eigenpair(g.domain, ModeIndex::new(1, 0)));
        let scale = 0.6 * (PI * PI / 2.0).sqrt();
        let st = mk(phi.map(|v| 1.0 + scale * v));
        let (u1, u2) = velocity_split(&st);
        assert!(u1.max_abs() > 0.0 && u2.max_abs() > 0.0);
        assert_eq!(u1.add(&u2), u);
        assert!((u1.dot(&u1) + u2.dot(&u2) - u.dot(&u)).abs() < 1e-12 * u.dot(&u));
    }

    #[test]
    fn run_reports_ledger_and_snapshots() {
        let c = cfg(Profile::Mixed, 16);
        let r = run(&c, None).unwrap();
        assert_eq!(r.ledger.rows.len(), 21);
        assert_eq!(r.trajectory.snapshots.len(), 6);
        assert!(r.diagnostics.max_relative_mass_drift < 1e-12);
    }

    #[test]
    fn equilibrium_run_has_constant_ledger() {
        let mut c = cfg(Profile::Equilibrium, 16);
        c.time.t_final = 1.0;
        c.time.dt = 0.01;
        let r = run(&c, None).unwrap();
        let first = r.ledger.rows[0];
        for row in &r.ledger.rows {
            assert!((row.total_plus_dissipation - first.total_plus_dissipation).abs() < 1e-12);
            assert!(row.kinetic.abs() < 1e-20);
        }
    }
}
