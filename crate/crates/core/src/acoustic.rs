//! Acoustic mode analysis: the wave operator, projections onto the
//! eigenvectors `(Phi_k, -+ i grad Phi_k / lambda_k)`, the modal ODE and its
//! exponential-integrator solution, a Crank-Nicolson integrator for the
//! linear dissipative wave system, decay-rate fits, the damped/undamped split
//! of gradient fields, and oscillatory cross-term integrals.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid, ScalarField, VectorField};
use crate::model::{self, ModelParams};
use crate::ops::{self, Boundary, GradMask};
use crate::poisson::{pcg, SpectralSolver};
use crate::spectral::{ModeClass, ModeIndex, NeumannMode, Sign, SpectralBasis};

/// Density fluctuation and momentum, `(phi, m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub phi: ScalarField,
    pub m: VectorField,
    pub epsilon: f64,
}

impl WaveState {
    /// `(||phi||^2 + ||m||^2) / 2`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.phi.dot(&self.phi) + self.m.dot(&self.m))
    }
}

/// `L(phi, m) = (div m, grad phi)`, plus `eps mu Delta m` in the second slot when `viscous`.
///
/// The gradient has its normal component masked at the wall, which makes the
/// inviscid operator exactly skew for momenta with zero normal trace.
pub fn apply_wave_operator(state: &WaveState, viscous: bool, mu: f64) -> WaveState {
    let phi = ops::div(&state.m);
    let mut m = ops::grad_masked(&state.phi, GradMask::Normal);
    if viscous {
        let lap = ops::vector_laplacian(&state.m, Boundary::Dirichlet);
        m.axpy(state.epsilon * mu, &lap);
    }
    WaveState { phi, m, epsilon: state.epsilon }
}

/// Grid samples of `Phi_k` and `grad Phi_k` for every nonconstant retained mode.
#[derive(Clone, Debug)]
pub struct ModeProjector {
    pub grid: Grid,
    pub entries: Vec<ProjectorEntry>,
}

#[derive(Clone, Debug)]
pub struct ProjectorEntry {
    pub mode: NeumannMode,
    pub class: ModeClass,
    pub phi: ScalarField,
    pub grad: VectorField,
}

impl ModeProjector {
    pub fn new(grid: Grid, basis: &SpectralBasis) -> Result<Self> {
        if grid.domain != basis.domain {
            return Err(Error::Mismatch("basis and grid live on different domains".into()));
        }
        let entries = basis
            .acoustic()
            .map(|(mode, corr)| ProjectorEntry {
                mode: *mode,
                class: corr.class,
                phi: grid.sample_mode(mode),
                grad: VectorField::sample(&grid, |x, y| mode.grad(x, y)),
            })
            .collect();
        Ok(Self { grid, entries })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeAmplitude {
    pub index: ModeIndex,
    pub sign: Sign,
    pub value: Complex64,
}

/// `(f, g) = int f conj(g)` of a real vector field against `(-+ i / lambda) grad Phi`:
/// equals `+- (i / lambda) int f . grad Phi`.
fn against_vector_part(f: &VectorField, e: &ProjectorEntry, sign: Sign) -> Complex64 {
    Complex64::new(0.0, sign.factor() * f.dot(&e.grad) / e.mode.lambda0)
}

/// `beta_k^+- = (phi, Phi_k) + (m, m_k^+-)` for every retained mode and sign.
pub fn mode_amplitudes(state: &WaveState, proj: &ModeProjector) -> Result<Vec<ModeAmplitude>> {
    proj.grid.check_same(&state.phi.grid)?;
    proj.grid.check_same(&state.m.grid)?;
    let mut out = Vec::with_capacity(2 * proj.entries.len());
    for e in &proj.entries {
        let s = state.phi.dot(&e.phi);
        for sign in Sign::BOTH {
            out.push(ModeAmplitude { index: e.mode.index, sign, value: s + against_vector_part(&state.m, e, sign) });
        }
    }
    Ok(out)
}

/// `(v, m_k^+-)` for a real vector field.
pub fn vector_projection(v: &VectorField, proj: &ModeProjector) -> Vec<ModeAmplitude> {
    proj.entries
        .iter()
        .flat_map(|e| Sign::BOTH.into_iter().map(move |sign| ModeAmplitude { index: e.mode.index, sign, value: against_vector_part(v, e, sign) }))
        .collect()
}

/// Nonlinear forcing of the momentum equation in fluctuation form:
/// `g = -div(rho u (x) u) - grad pi_r - lambda div(grad d (.) grad d)`, where
/// `pi_r` carries only the nonlinear part `(rho^gamma - 1 - gamma (rho - 1)) / eps^2`
/// of the pressure together with `-(lambda/2)|grad d|^2 - lambda F(d)`.
pub fn forcing_field(rho: &ScalarField, u: &VectorField, d: &DirectorField, params: &ModelParams) -> Result<VectorField> {
    let g = rho.grid;
    g.check_same(&u.grid)?;
    g.check_same(&d.grid)?;
    let mut conv = crate::field::TensorField::zeros(g);
    for k in 0..g.len() {
        let r = rho.data[k];
        conv.xx[k] = r * u.x[k] * u.x[k];
        conv.xy[k] = r * u.x[k] * u.y[k];
        conv.yy[k] = r * u.y[k] * u.y[k];
    }
    let gram = model::director_gram(d);
    let (big_f, _) = model::penalty(d, params.sigma0);
    let e2 = params.epsilon * params.epsilon;
    let gamma = params.gamma;
    let mut pi_r = ScalarField::zeros(g);
    for k in 0..g.len() {
        let r = rho.data[k];
        pi_r.data[k] = (r.powf(gamma) - 1.0 - gamma * (r - 1.0)) / e2
            - params.lambda * (0.5 * (gram.xx[k] + gram.yy[k]) + big_f.data[k]);
    }
    let mut lam_gram = gram;
    for v in lam_gram.xx.iter_mut().chain(lam_gram.xy.iter_mut()).chain(lam_gram.yy.iter_mut()) {
        *v *= params.lambda;
    }
    let mut out = ops::div_tensor(&conv).scale(-1.0);
    out.axpy(-1.0, &ops::grad(&pi_r));
    out.axpy(-1.0, &ops::div_tensor(&lam_gram));
    Ok(out)
}

/// `c_k^+- = (g, m_k^+-)` with the forcing of [`forcing_field`].
pub fn acoustic_forcing(
    rho: &ScalarField,
    u: &VectorField,
    d: &DirectorField,
    params: &ModelParams,
    proj: &ModeProjector,
) -> Result<Vec<ModeAmplitude>> {
    let g = forcing_field(rho, u, d, params)?;
    Ok(vector_projection(&g, proj))
}

/// `(e^x - 1) / x`.
pub fn phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.25 {
        // sum x^k / (k+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..20 {
            term *= x / (k as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (x.exp() - 1.0) / x
    }
}

/// `(e^x - 1 - x) / x^2`.
pub fn phi2(x: Complex64) -> Complex64 {
    if x.norm() < 0.25 {
        // sum x^k / (k+2)!
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for k in 1..20 {
            term *= x / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (x.exp() - 1.0 - x) / (x * x)
    }
}

/// `int_0^1 s e^{x s} ds = (e^x (x - 1) + 1) / x^2`.
fn psi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.25 {
        // sum x^k / (k! (k + 2))
        let mut fact = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        for k in 1..22 {
            fact *= x / k as f64;
            sum += fact / (k as f64 + 2.0);
        }
        sum
    } else {
        (x.exp() * (x - 1.0) + 1.0) / (x * x)
    }
}

fn check_times(times: &[f64], len: usize) -> Result<()> {
    if times.len() != len {
        return Err(Error::InvalidInput(format!("{} samples but {} times", len, times.len())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// Solves `b' = conj(i lambda) b / eps + c(t)` by the exponential integrator that is
/// exact for `c` piecewise linear between the samples. Returns `b` at every sample time.
pub fn duhamel_solve(b0: Complex64, ilambda: Complex64, c: &[Complex64], epsilon: f64, times: &[f64]) -> Result<Vec<Complex64>> {
    if ilambda.re > 0.0 {
        return Err(Error::InvalidInput(format!("growing mode: Re(i lambda) = {} > 0", ilambda.re)));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    check_times(times, c.len())?;
    let z = ilambda.conj() / epsilon;
    let mut out = Vec::with_capacity(times.len());
    let mut b = b0;
    out.push(b);
    for n in 0..times.len().saturating_sub(1) {
        let h = times[n + 1] - times[n];
        let x = z * h;
        b = x.exp() * b + h * (phi1(x) * c[n] + phi2(x) * (c[n + 1] - c[n]));
        out.push(b);
    }
    Ok(out)
}

/// `int e^{i dlambda t / eps} b_k(t) b_l(t) dt` over the sample span, with the product
/// interpolated linearly and the oscillatory factor integrated exactly on each interval.
pub fn oscillation_integral(bk: &[Complex64], bl: &[Complex64], times: &[f64], dlambda: f64, epsilon: f64) -> Result<Complex64> {
    if dlambda == 0.0 {
        return Err(Error::InvalidInput("equal eigenvalues produce a gradient term, not an oscillation".into()));
    }
    if bk.len() != bl.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    check_times(times, bk.len())?;
    let w = dlambda / epsilon;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..times.len().saturating_sub(1) {
        let h = times[n + 1] - times[n];
        let g0 = bk[n] * bl[n];
        let g1 = bk[n + 1] * bl[n + 1];
        let x = Complex64::new(0.0, w * h);
        let phase = Complex64::new(0.0, w * times[n]).exp();
        acc += phase * h * (g0 * phi1(x) + (g1 - g0) * psi1(x));
    }
    Ok(acc)
}

/// Least-squares decay rate `-d log|b| / dt`, fitted over the interior local maxima
/// of `|b|` when there are at least three, otherwise over every sample.
pub fn fit_damping_rate(times: &[f64], magnitudes: &[f64]) -> Result<f64> {
    if times.len() != magnitudes.len() {
        return Err(Error::InvalidInput("times and magnitudes differ in length".into()));
    }
    if magnitudes.len() < 10 {
        return Err(Error::InvalidInput(format!("need at least 10 samples, got {}", magnitudes.len())));
    }
    if let Some(v) = magnitudes.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("magnitudes must be positive, found {v}")));
    }
    let peaks: Vec<usize> = (1..magnitudes.len() - 1)
        .filter(|&i| magnitudes[i] > magnitudes[i - 1] && magnitudes[i] >= magnitudes[i + 1])
        .collect();
    let idx: Vec<usize> = if peaks.len() >= 3 { peaks } else { (0..magnitudes.len()).collect() };
    let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| magnitudes[i].ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    Ok(-slope)
}

/// Slope and Pearson correlation of the least-squares line through `(x, y)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let corr = if sxx > 0.0 && syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
    (slope, corr)
}

/// Damped / undamped parts of the gradient component of a vector field.
#[derive(Clone, Debug)]
pub struct QSplit {
    pub q1: VectorField,
    pub q2: VectorField,
    /// `|| Q u - Q1 u - Q2 u ||`: the part of `Qu` beyond the truncation.
    pub tail_norm: f64,
}

/// Expands `Qu` in `grad Phi_k / lambda_k` and sums the class-I and class-J terms separately.
pub fn q_split(u: &VectorField, proj: &ModeProjector, solver: &SpectralSolver) -> Result<QSplit> {
    let g = proj.grid;
    g.check_same(&u.grid)?;
    let (_, qu) = solver.leray(u)?;
    let mut q1 = VectorField::zeros(g);
    let mut q2 = VectorField::zeros(g);
    for e in &proj.entries {
        let l2 = e.mode.lambda0 * e.mode.lambda0;
        let a = qu.dot(&e.grad) / l2;
        match e.class {
            ModeClass::I => q1.axpy(a, &e.grad),
            ModeClass::J => q2.axpy(a, &e.grad),
            ModeClass::Trivial => {}
        }
    }
    let rest = qu.sub(&q1).sub(&q2);
    Ok(QSplit { q1, q2, tail_norm: rest.dot(&rest).sqrt() })
}

/// Time series of one mode amplitude.
#[derive(Clone, Debug, Default)]
pub struct AcousticTrace {
    pub index: Option<ModeIndex>,
    pub sign: Option<Sign>,
    pub times: Vec<f64>,
    /// Amplitudes against the zeroth-order eigenvectors.
    pub b: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub c: Vec<Complex64>,
}

impl AcousticTrace {
    pub fn new(index: ModeIndex, sign: Sign) -> Self {
        Self { index: Some(index), sign: Some(sign), ..Default::default() }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.b.iter().map(|v| v.norm()).collect()
    }
}

/// Collection of traces keyed by `(mode, sign)` in basis order.
#[derive(Clone, Debug, Default)]
pub struct TraceSet {
    pub traces: Vec<AcousticTrace>,
}

impl TraceSet {
    pub fn for_projector(proj: &ModeProjector) -> Self {
        let traces = proj
            .entries
            .iter()
            .flat_map(|e| Sign::BOTH.into_iter().map(move |s| AcousticTrace::new(e.mode.index, s)))
            .collect();
        Self { traces }
    }

    /// Appends one sample; `beta` and `c` must be in projector order.
    pub fn push(&mut self, t: f64, beta: &[ModeAmplitude], c: Option<&[ModeAmplitude]>) {
        for (k, tr) in self.traces.iter_mut().enumerate() {
            tr.times.push(t);
            tr.b.push(beta[k].value);
            tr.beta.push(beta[k].value);
            tr.c.push(c.map_or(Complex64::new(0.0, 0.0), |c| c[k].value));
        }
    }

    pub fn get(&self, index: ModeIndex, sign: Sign) -> Option<&AcousticTrace> {
        self.traces.iter().find(|t| t.index == Some(index) && t.sign == Some(sign))
    }

    /// Writes `t,m,n,sign,re_b,im_b,abs_b,re_c,im_c`, time-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,m,n,sign,re_b,im_b,abs_b,re_c,im_c")?;
        let n = self.traces.first().map_or(0, |t| t.times.len());
        for s in 0..n {
            for tr in &self.traces {
                let (idx, sign) = (tr.index.unwrap_or(ModeIndex::new(0, 0)), tr.sign.unwrap_or(Sign::Plus));
                let b = tr.b[s];
                let c = tr.c[s];
                writeln!(
                    w,
                    "{:.17e},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    tr.times[s],
                    idx.m,
                    idx.n,
                    sign.symbol(),
                    b.re,
                    b.im,
                    b.norm(),
                    c.re,
                    c.im
                )?;
            }
        }
        Ok(())
    }
}

/// Settings of the linear dissipative wave integrator.
#[derive(Clone, Copy, Debug)]
pub struct WaveRunSettings {
    pub epsilon: f64,
    pub mu: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Amplitudes are recorded every `stride` steps.
    pub stride: usize,
}

#[derive(Clone, Debug)]
pub struct WaveRun {
    pub final_state: WaveState,
    pub energies: Vec<(f64, f64)>,
    pub traces: TraceSet,
    pub max_pcg_iterations: usize,
}

/// Crank-Nicolson integration of `phi_t = -div m / eps`, `m_t = -grad phi / eps + mu Delta m`,
/// `m = 0` on the wall. The momentum update is solved by conjugate gradients on the
/// system obtained after eliminating `phi`, preconditioned by the viscous part.
pub fn linearized_wave_run(phi0: &ScalarField, m0: &VectorField, settings: WaveRunSettings, proj: &ModeProjector) -> Result<WaveRun> {
    let g = phi0.grid;
    g.check_same(&m0.grid)?;
    let WaveRunSettings { epsilon, mu, t_final, dt, stride } = settings;
    if !(epsilon > 0.0 && dt > 0.0 && t_final > 0.0 && mu >= 0.0) || stride == 0 {
        return Err(Error::InvalidInput("wave run needs positive epsilon, dt, T and stride".into()));
    }
    let solver = SpectralSolver::new(g);
    let steps = (t_final / dt).round().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let a = dt / (2.0 * epsilon);
    let nu = 0.5 * dt * mu;
    let mut phi = phi0.clone();
    let mut m = m0.clone();
    m.zero_boundary();
    let interior: Vec<f64> = g.nodes().map(|(i, j, _)| if g.is_boundary(i, j) { 0.0 } else { 1.0 }).collect();
    let n = g.len();

    let apply = |p: &[f64], out: &mut [f64]| {
        let v = VectorField { grid: g, x: p[..n].to_vec(), y: p[n..].to_vec() };
        let lap = ops::vector_laplacian(&v, Boundary::Dirichlet);
        let gd = ops::grad_masked(&ops::div(&v), GradMask::All);
        for k in 0..n {
            out[k] = interior[k] * (p[k] - nu * lap.x[k] - a * a * gd.x[k]);
            out[n + k] = interior[k] * (p[n + k] - nu * lap.y[k] - a * a * gd.y[k]);
        }
    };
    let precond = |r: &[f64], z: &mut [f64]| {
        z.copy_from_slice(r);
        let (zx, zy) = z.split_at_mut(n);
        solver.dirichlet_inverse(1.0, nu, zx);
        solver.dirichlet_inverse(1.0, nu, zy);
    };
    let w = g.weights();
    let dot = |p: &[f64], q: &[f64]| -> f64 {
        let (px, py) = p.split_at(n);
        let (qx, qy) = q.split_at(n);
        (0..n).map(|k| w[k] * (px[k] * qx[k] + py[k] * qy[k])).sum()
    };

    let mut traces = TraceSet::for_projector(proj);
    let mut energies = Vec::new();
    let record = |t: f64, phi: &ScalarField, m: &VectorField, traces: &mut TraceSet, energies: &mut Vec<(f64, f64)>| -> Result<()> {
        let st = WaveState { phi: phi.clone(), m: m.clone(), epsilon };
        traces.push(t, &mode_amplitudes(&st, proj)?, None);
        energies.push((t, st.energy()));
        Ok(())
    };
    record(0.0, &phi, &m, &mut traces, &mut energies)?;
    let mut max_it = 0;
    let mut x = vec![0.0; 2 * n];
    for step in 1..=steps {
        let lap = ops::vector_laplacian(&m, Boundary::Dirichlet);
        let gphi = ops::grad_masked(&phi, GradMask::All);
        let gdm = ops::grad_masked(&ops::div(&m), GradMask::All);
        let mut rhs = vec![0.0; 2 * n];
        for k in 0..n {
            rhs[k] = interior[k] * (m.x[k] + nu * lap.x[k] - 2.0 * a * gphi.x[k] + a * a * gdm.x[k]);
            rhs[n + k] = interior[k] * (m.y[k] + nu * lap.y[k] - 2.0 * a * gphi.y[k] + a * a * gdm.y[k]);
        }
        x[..n].copy_from_slice(&m.x);
        x[n..].copy_from_slice(&m.y);
        let rep = pcg(&apply, &precond, dot, &rhs, &mut x, 1e-13, 0.0, 1000);
        if !rep.converged {
            return Err(Error::NumericalAbort {
                t: step as f64 * dt,
                reason: format!("wave solve stalled at residual {:e}", rep.relative_residual),
            });
        }
        max_it = max_it.max(rep.iterations);
        let m_new = VectorField { grid: g, x: x[..n].to_vec(), y: x[n..].to_vec() };
        let dsum = ops::div(&m_new.add(&m));
        phi.axpy(-a, &dsum);
        m = m_new;
        if step % stride == 0 || step == steps {
            record(step as f64 * dt, &phi, &m, &mut traces, &mut energies)?;
        }
    }
    Ok(WaveRun { final_state: WaveState { phi, m, epsilon }, energies, traces, max_pcg_iterations: max_it })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_basis, Domain};
    use std::f64::consts::PI;

    fn setup(n: usize) -> (Grid, SpectralBasis, ModeProjector) {
        let d = Domain::rectangle(PI, PI).unwrap();
        let g = Grid::new(d, n, n).unwrap();
        let b = build_basis(d, 8, 1.0).unwrap();
        let p = ModeProjector::new(g, &b).unwrap();
        (g, b, p)
    }

    #[test]
    fn amplitude_examples() {
        let (g, b, p) = setup(32);
        let (m10, _) = b.find(ModeIndex::new(1, 0)).unwrap();
        let phi = g.sample_mode(m10).scale(0.7);
        let st = WaveState { phi, m: VectorField::zeros(g), epsilon: 0.1 };
        let amps = mode_amplitudes(&st, &p).unwrap();
        for a in amps.iter().filter(|a| a.index == ModeIndex::new(1, 0)) {
            assert!((a.value - Complex64::new(0.7, 0.0)).norm() < 1e-13);
        }
        for a in amps.iter().filter(|a| a.index == ModeIndex::new(2, 1)) {
            assert!(a.value.norm() < 1e-13);
        }
        let m = VectorField::sample(&g, |x, y| {
            let gr = m10.grad(x, y);
            [gr[0] / m10.lambda0, gr[1] / m10.lambda0]
        });
        let st = WaveState { phi: ScalarField::zeros(g), m, epsilon: 0.1 };
        let amps = mode_amplitudes(&st, &p).unwrap();
        let plus = amps.iter().find(|a| a.index == ModeIndex::new(1, 0) && a.sign == Sign::Plus).unwrap();
        let minus = amps.iter().find(|a| a.index == ModeIndex::new(1, 0) && a.sign == Sign::Minus).unwrap();
        assert!((plus.value - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((minus.value - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn wave_operator_on_constants() {
        let (g, _, _) = setup(16);
        let st = WaveState { phi: ScalarField::constant(g, 2.0), m: VectorField::zeros(g), epsilon: 0.1 };
        let l = apply_wave_operator(&st, true, 1.0);
        assert_eq!(l.phi.max_abs(), 0.0);
        assert_eq!(l.m.max_abs(), 0.0);
    }

    #[test]
    fn duhamel_examples() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.001).collect();
        let zero = vec![Complex64::new(0.0, 0.0); times.len()];
        let b0 = Complex64::new(0.3, -0.4);
        let rot = duhamel_solve(b0, Complex64::new(0.0, 1.0), &zero, 0.05, &times).unwrap();
        assert!(rot.iter().all(|b| (b.norm() - 0.5).abs() < 1e-14));

        let eps: f64 = 0.01;
        let il = Complex64::new(0.0, 1.0) - 0.22508 * Complex64::new(1.0, 1.0) * eps.sqrt();
        let d = duhamel_solve(Complex64::new(1.0, 0.0), il, &zero, eps, &times).unwrap();
        let expect = (-0.22508f64 * 0.2 / 0.1).exp();
        assert!((d.last().unwrap().norm() - expect).abs() < 1e-12);
        assert!((expect - 0.6376).abs() < 1e-3);

        let c = vec![Complex64::new(0.8, 0.1); times.len()];
        let s = duhamel_solve(b0, Complex64::new(-1.0, 0.0), &c, 1.0, &times).unwrap();
        for (b, t) in s.iter().zip(&times) {
            let e = (-t).exp();
            let exact = b0 * e + c[0] * (1.0 - e);
            assert!((b - exact).norm() < 1e-10);
        }
        assert!(duhamel_solve(b0, Complex64::new(0.1, 1.0), &c, 1.0, &times).is_err());
    }

    #[test]
    fn oscillation_examples() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let one = vec![Complex64::new(1.0, 0.0); times.len()];
        let v = oscillation_integral(&one, &one, &times, 1.0, 0.1).unwrap();
        assert!((v.norm() - 0.2 * 5f64.sin().abs()).abs() < 1e-12);
        assert!((v.norm() - 0.19178).abs() < 1e-5);
        let zero = vec![Complex64::new(0.0, 0.0); times.len()];
        assert_eq!(oscillation_integral(&zero, &one, &times, 1.0, 0.1).unwrap().norm(), 0.0);
        assert!(oscillation_integral(&one, &one, &times, 0.0, 0.1).is_err());
    }

    #[test]
    fn fit_examples() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.02).collect();
        let a: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        assert!((fit_damping_rate(&t, &a).unwrap() - 2.0).abs() < 1e-8);
        let flat = vec![3.0; 50];
        assert!(fit_damping_rate(&t, &flat).unwrap().abs() < 1e-12);
        let t: Vec<f64> = (0..4000).map(|k| k as f64 * 0.0005).collect();
        let osc: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp() * (50.0 * t).cos().abs() + 1e-300).collect();
        let r = fit_damping_rate(&t, &osc).unwrap();
        assert!((r - 2.0).abs() < 0.1, "{r}");
        assert!(fit_damping_rate(&t[..5], &osc[..5]).is_err());
        let mut neg = vec![1.0; 20];
        neg[3] = 0.0;
        assert!(fit_damping_rate(&t[..20], &neg).is_err());
    }

    #[test]
    fn phi_functions_are_continuous_across_branch() {
        for r in [0.2499, 0.2501] {
            let x = Complex64::from_polar(r, 1.1);
            let direct1 = (x.exp() - 1.0) / x;
            let direct2 = (x.exp() - 1.0 - x) / (x * x);
            let direct3 = (x.exp() * (x - 1.0) + 1.0) / (x * x);
            assert!((phi1(x) - direct1).norm() < 1e-13);
            assert!((phi2(x) - direct2).norm() < 1e-12);
            assert!((psi1(x) - direct3).norm() < 1e-12);
        }
    }

    #[test]
    fn q_split_examples() {
        let (g, _, p) = setup(32);
        let s = SpectralSolver::new(g);
        let u = VectorField::sample(&g, |x, y| [-x.sin() * y.cos(), -x.cos() * y.sin()]);
        let split = q_split(&u, &p, &s).unwrap();
        assert_eq!(split.q2.max_abs(), 0.0);
        assert!(split.q1.sub(&u).max_abs() < 1e-12);

        let w = VectorField::sample(&g, |x, y| {
            let (sx, cx) = x.sin_cos();
            let (sy, cy) = y.sin_cos();
            [2.0 * sx * sx * sy * cy, -2.0 * sx * cx * sy * sy]
        });
        let split = q_split(&w, &p, &s).unwrap();
        assert!(split.q1.max_abs() < 5e-3);

        let sd = Domain::slab(PI).unwrap();
        let sg = Grid::new(sd, 64, 0).unwrap();
        let sp = ModeProjector::new(sg, &build_basis(sd, 4, 1.0).unwrap()).unwrap();
        let su = VectorField::sample(&sg, |x, _| [-x.sin(), 0.0]);
        let split = q_split(&su, &sp, &SpectralSolver::new(sg)).unwrap();
        assert_eq!(split.q1.max_abs(), 0.0);
        assert!(split.q2.sub(&su).max_abs() < 1e-12);
    }

    #[test]
    fn inviscid_wave_conserves_energy() {
        let (g, b, p) = setup(64);
        let (m10, _) = b.find(ModeIndex::new(1, 0)).unwrap();
        let phi = g.sample_mode(m10);
        let eps = 0.1;
        let settings = WaveRunSettings { epsilon: eps, mu: 0.0, t_final: 2.0 * PI * eps, dt: eps / 16.0, stride: 4 };
        let run = linearized_wave_run(&phi, &VectorField::zeros(g), settings, &p).unwrap();
        let e0 = run.energies[0].1;
        for (_, e) in &run.energies {
            assert!((e - e0).abs() < 1e-10 * e0);
        }
        let tr = run.traces.get(ModeIndex::new(1, 0), Sign::Plus).unwrap();
        for v in tr.magnitudes() {
            assert!((v - 1.0).abs() < 1e-2, "{v}");
        }
    }
}
