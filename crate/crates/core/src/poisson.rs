//! Elliptic kernels: the cosine-spectral Neumann Poisson solve, the spectral
//! Leray projection, sine-transform Dirichlet solves, and preconditioned
//! conjugate gradients for the variable-coefficient and masked-gradient
//! systems used by the time steppers.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::ops::{self, Boundary, GradMask};
use crate::transform::{Kind, Trig2};

pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    /// Final residual relative to the right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for an operator that is symmetric and
/// positive semidefinite in the inner product `dot`. Starts from `x`.
///
/// Stops once the residual falls below `tol * |b|` or below `abs_tol`.
#[allow(clippy::too_many_arguments)]
pub fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    dot: impl Fn(&[f64], &[f64]) -> f64,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    abs_tol: f64,
    max_iter: usize,
) -> PcgReport {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 || bnorm <= abs_tol {
        x.iter_mut().for_each(|v| *v = 0.0);
        return PcgReport { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = (tol * bnorm).max(abs_tol) / bnorm;
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > target && it < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        it += 1;
        if res <= target {
            break;
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    PcgReport { iterations: it, relative_residual: res, converged: res <= target }
}

/// Transform plans and spectra for one grid.
#[derive(Clone, Debug)]
pub struct SpectralSolver {
    pub grid: Grid,
    trig: Trig2,
    weights: Vec<f64>,
}

impl SpectralSolver {
    pub fn new(grid: Grid) -> Self {
        let ny = if grid.is_slab() { None } else { Some(grid.ny) };
        Self { grid, trig: Trig2::new(grid.nx, ny), weights: grid.weights() }
    }

    fn y_kind(&self, k: Kind) -> Kind {
        if self.grid.is_slab() {
            Kind::Identity
        } else {
            k
        }
    }

    pub fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    fn wavenumbers(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let kx = (0..=g.nx).map(|m| m as f64 * PI / g.domain.lx()).collect();
        let ky = match g.domain.ly() {
            Some(ly) => (0..=g.ny).map(|n| n as f64 * PI / ly).collect(),
            None => vec![0.0],
        };
        (kx, ky)
    }

    /// `data <- sum'' mult(m, n) c_mn cos cos`, where `c_mn` are the cosine
    /// coefficients of `data`.
    fn cos_filter(&self, data: &mut [f64], mult: impl Fn(usize, usize) -> f64) {
        let g = &self.grid;
        let nyn = g.nodes_y();
        self.trig.apply(data, Kind::CosForward, self.y_kind(Kind::CosForward));
        let sx = 2.0 / g.nx as f64;
        let sy = if g.is_slab() { 1.0 } else { 2.0 / g.ny as f64 };
        for m in 0..=g.nx {
            let fx = if m == 0 || m == g.nx { 0.5 * sx } else { sx };
            for n in 0..nyn {
                let fy = if g.is_slab() { 1.0 } else if n == 0 || n == g.ny { 0.5 * sy } else { sy };
                data[m * nyn + n] *= mult(m, n) * fx * fy;
            }
        }
        self.trig.apply(data, Kind::CosSynth, self.y_kind(Kind::CosSynth));
    }

    /// Sine-series analogue of [`Self::cos_filter`] on interior nodes; boundary output is zero.
    fn sin_filter(&self, data: &mut [f64], mult: impl Fn(usize, usize) -> f64) {
        let g = &self.grid;
        let nyn = g.nodes_y();
        if g.is_slab() {
            self.trig.apply(data, Kind::SinForward, Kind::Identity);
        } else {
            self.trig.apply(data, Kind::SinForward, Kind::SinForward);
        }
        let sx = 2.0 / g.nx as f64;
        let sy = if g.is_slab() { 1.0 } else { 2.0 / g.ny as f64 };
        for m in 0..=g.nx {
            for n in 0..nyn {
                data[m * nyn + n] *= mult(m, n) * sx * sy;
            }
        }
        if g.is_slab() {
            self.trig.apply(data, Kind::SinSynth, Kind::Identity);
        } else {
            self.trig.apply(data, Kind::SinSynth, Kind::SinSynth);
        }
    }

    /// Laplacian evaluated through the continuous cosine spectrum.
    pub fn spectral_laplacian(&self, f: &ScalarField) -> ScalarField {
        let (kx, ky) = self.wavenumbers();
        let mut data = f.data.clone();
        self.cos_filter(&mut data, |m, n| -(kx[m] * kx[m] + ky[n] * ky[n]));
        ScalarField { grid: self.grid, data }
    }

    /// Zero-mean `psi` with `-Delta psi = rhs` and homogeneous Neumann data.
    ///
    /// A right-hand side whose mean exceeds `tol` relative to its sup norm is rejected.
    pub fn neumann_poisson(&self, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
        self.grid.check_same(&rhs.grid)?;
        let mean = rhs.mean();
        if mean.abs() > tol * rhs.max_abs().max(f64::MIN_POSITIVE) && mean.abs() > tol {
            return Err(Error::Compatibility { mean });
        }
        let (kx, ky) = self.wavenumbers();
        let mut data = rhs.data.clone();
        self.cos_filter(&mut data, |m, n| {
            let l2 = kx[m] * kx[m] + ky[n] * ky[n];
            if l2 == 0.0 {
                0.0
            } else {
                1.0 / l2
            }
        });
        Ok(ScalarField { grid: self.grid, data })
    }

    /// Orthogonal Helmholtz split `v = Pv + Qv` with `Qv` in the closure of
    /// Neumann-cosine gradients (plus the boundary normal values).
    pub fn leray(&self, v: &VectorField) -> Result<(VectorField, VectorField)> {
        self.grid.check_same(&v.grid)?;
        let g = &self.grid;
        let mut q = VectorField::zeros(*g);
        if g.is_slab() {
            q.x = v.x.clone();
        } else {
            let (nx, ny, nyn) = (g.nx, g.ny, g.nodes_y());
            let (lx, ly) = (g.domain.lx(), g.domain.ly().unwrap_or(1.0));
            let (kx, ky) = self.wavenumbers();
            let mut a = v.x.clone();
            let mut b = v.y.clone();
            self.trig.apply(&mut a, Kind::SinForward, Kind::CosForward);
            self.trig.apply(&mut b, Kind::CosForward, Kind::SinForward);
            let cell = g.hx * g.hy;
            let mut qa = vec![0.0; g.len()];
            let mut qb = vec![0.0; g.len()];
            for m in 0..=nx {
                for n in 0..=ny {
                    let k = m * nyn + n;
                    let has_x = m >= 1 && m < nx;
                    let has_y = n >= 1 && n < ny;
                    let cx = if n == 0 || n == ny { 2.0 } else { 1.0 };
                    let cy = if m == 0 || m == nx { 2.0 } else { 1.0 };
                    let nxx = 0.25 * lx * ly * cx;
                    let nyy = 0.25 * lx * ly * cy;
                    match (has_x, has_y) {
                        (true, true) => {
                            let t = (kx[m] * cell * a[k] + ky[n] * cell * b[k])
                                / (kx[m] * kx[m] * nxx + ky[n] * ky[n] * nyy);
                            qa[k] = kx[m] * t;
                            qb[k] = ky[n] * t;
                        }
                        (true, false) => qa[k] = cell * a[k] / nxx,
                        (false, true) => qb[k] = cell * b[k] / nyy,
                        (false, false) => {}
                    }
                }
            }
            self.trig.apply(&mut qa, Kind::SinSynth, Kind::CosSynth);
            self.trig.apply(&mut qb, Kind::CosSynth, Kind::SinSynth);
            for j in 0..nyn {
                qa[j] = v.x[j];
                qa[nx * nyn + j] = v.x[nx * nyn + j];
            }
            for i in 0..=nx {
                qb[i * nyn] = v.y[i * nyn];
                qb[i * nyn + ny] = v.y[i * nyn + ny];
            }
            q.x = qa;
            q.y = qb;
        }
        let p = v.sub(&q);
        Ok((p, q))
    }

    /// Solves `(a - b Delta) u = rhs` at interior nodes with `u = boundary` on the
    /// boundary, for the compact Dirichlet Laplacian.
    pub fn dirichlet_helmholtz(&self, a: f64, b: f64, rhs: &[f64], boundary: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut lifted = vec![0.0; g.len()];
        for (i, j, k) in g.nodes() {
            if g.is_boundary(i, j) {
                lifted[k] = boundary[k];
            }
        }
        let lap = ops::laplacian_raw(g, &lifted, Boundary::Dirichlet);
        let mut r: Vec<f64> = rhs.iter().zip(&lap).map(|(r, l)| r + b * l).collect();
        for (i, j, k) in g.nodes() {
            if g.is_boundary(i, j) {
                r[k] = 0.0;
            }
        }
        let eig = self.dirichlet_eigs();
        let nyn = g.nodes_y();
        self.sin_filter(&mut r, |m, n| 1.0 / (a + b * (eig.0[m] + eig.1[n.min(nyn - 1)])));
        for (i, j, k) in g.nodes() {
            if g.is_boundary(i, j) {
                r[k] = lifted[k];
            }
        }
        r
    }

    /// Eigenvalues of `-Delta` (compact Dirichlet) per axis.
    fn dirichlet_eigs(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let ex = (0..=g.nx)
            .map(|m| {
                let s = (0.5 * PI * m as f64 / g.nx as f64).sin();
                4.0 * s * s / (g.hx * g.hx)
            })
            .collect();
        let ey = if g.is_slab() {
            vec![0.0]
        } else {
            (0..=g.ny)
                .map(|n| {
                    let s = (0.5 * PI * n as f64 / g.ny as f64).sin();
                    4.0 * s * s / (g.hy * g.hy)
                })
                .collect()
        };
        (ex, ey)
    }

    /// Eigenvalues of `-D G_N` (wide stencil) per axis, diagonalised by DCT-I.
    fn wide_eigs(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let ex = (0..=g.nx)
            .map(|m| {
                let s = (PI * m as f64 / g.nx as f64).sin();
                s * s / (g.hx * g.hx)
            })
            .collect();
        let ey = if g.is_slab() {
            vec![0.0]
        } else {
            (0..=g.ny)
                .map(|n| {
                    let s = (PI * n as f64 / g.ny as f64).sin();
                    s * s / (g.hy * g.hy)
                })
                .collect()
        };
        (ex, ey)
    }

    /// `(c + s * (-D G_0))^+` preconditioned solve; `c` is a diagonal (may be zero).
    fn masked_helmholtz(&self, c: Option<&[f64]>, s: f64, rhs: &[f64], x: &mut [f64], tol: f64, abs_tol: f64) -> PcgReport {
        let g = self.grid;
        let mut rhs = rhs.to_vec();
        if c.is_none() {
            self.deflate_masked_kernel(&mut rhs);
        }
        let cbar = c.map_or(0.0, |c| {
            let tot: f64 = c.iter().zip(&self.weights).map(|(a, w)| a * w).sum();
            tot / self.weights.iter().sum::<f64>()
        });
        let (ex, ey) = self.wide_eigs();
        let apply = |p: &[f64], out: &mut [f64]| {
            let f = ScalarField { grid: g, data: p.to_vec() };
            let dg = ops::div(&ops::grad_masked(&f, GradMask::All));
            for k in 0..p.len() {
                out[k] = -s * dg.data[k] + c.map_or(0.0, |c| c[k] * p[k]);
            }
        };
        let precond = |r: &[f64], z: &mut [f64]| {
            z.copy_from_slice(r);
            self.cos_filter(z, |m, n| {
                let l = cbar + s * (ex[m] + ey[n]);
                if l > 1e-12 * (cbar + s * (ex[1] + 1.0)) {
                    1.0 / l
                } else {
                    0.0
                }
            });
        };
        pcg(apply, precond, |a, b| self.weighted_dot(a, b), &rhs, x, tol, abs_tol, 4 * g.len().min(2000))
    }

    /// Removes the kernel of `D G_0` from a right-hand side: the parity modes
    /// `(+-1)^i (+-1)^j` and, in 2D, the corner nodes, which the masked gradient never reads.
    fn deflate_masked_kernel(&self, r: &mut [f64]) {
        let g = self.grid;
        let ys: &[bool] = if g.is_slab() { &[false] } else { &[false, true] };
        for &px in &[false, true] {
            for &py in ys {
                let mode: Vec<f64> = g
                    .nodes()
                    .map(|(i, j, _)| {
                        let a = if px && i % 2 == 1 { -1.0 } else { 1.0 };
                        let b = if py && j % 2 == 1 { -1.0 } else { 1.0 };
                        a * b
                    })
                    .collect();
                let coef = self.weighted_dot(r, &mode) / self.weighted_dot(&mode, &mode);
                for (v, m) in r.iter_mut().zip(&mode) {
                    *v -= coef * m;
                }
            }
        }
        if !g.is_slab() {
            for i in [0, g.nx] {
                for j in [0, g.ny] {
                    r[g.idx(i, j)] = 0.0;
                }
            }
        }
    }

    /// Discrete projection `u - G_0 psi` with `D G_0 psi = D u`, so the result is
    /// divergence free for the conservative divergence and vanishes on the boundary
    /// whenever `u` does. Returns the projected field and `psi`.
    pub fn fd_project(&self, u: &VectorField, tol: f64) -> Result<(VectorField, ScalarField, PcgReport)> {
        self.grid.check_same(&u.grid)?;
        let rhs: Vec<f64> = ops::div(u).data.iter().map(|v| -v).collect();
        let mut psi = vec![0.0; self.grid.len()];
        let grad_scale = (ops::edge_energy(&self.grid, &u.x) + ops::edge_energy(&self.grid, &u.y)).sqrt();
        let rep = self.masked_helmholtz(None, 1.0, &rhs, &mut psi, tol, tol * grad_scale);
        if !rep.converged {
            return Err(Error::NumericalAbort {
                t: f64::NAN,
                reason: format!("projection solve stalled at residual {:e}", rep.relative_residual),
            });
        }
        let psi = ScalarField { grid: self.grid, data: psi };
        // psi solves -D G_0 psi = -D u
        let gp = ops::grad_masked(&psi, GradMask::All);
        Ok((u.sub(&gp), psi, rep))
    }

    /// Solves `(diag(c) - s D G_0) x = rhs` by PCG from the initial guess in `x`.
    pub fn acoustic_solve(&self, c: &[f64], s: f64, rhs: &[f64], x: &mut [f64], tol: f64) -> Result<PcgReport> {
        let rep = self.masked_helmholtz(Some(c), s, rhs, x, tol, 0.0);
        if !rep.converged {
            return Err(Error::StepRejected(format!(
                "acoustic solve stalled at residual {:e} after {} iterations",
                rep.relative_residual, rep.iterations
            )));
        }
        Ok(rep)
    }

    /// Solves `(diag(c) - b Delta_D) x = rhs` on interior nodes with zero boundary values.
    pub fn dirichlet_variable(&self, c: &[f64], b: f64, rhs: &[f64], x: &mut [f64], tol: f64) -> Result<PcgReport> {
        let g = self.grid;
        let interior: Vec<f64> = g.nodes().map(|(i, j, _)| if g.is_boundary(i, j) { 0.0 } else { 1.0 }).collect();
        let cbar = {
            let (s, w) = g.nodes().filter(|&(i, j, _)| !g.is_boundary(i, j)).fold((0.0, 0.0), |(s, w), (i, j, k)| {
                (s + g.weight(i, j) * c[k], w + g.weight(i, j))
            });
            s / w
        };
        let (ex, ey) = self.dirichlet_eigs();
        let apply = |p: &[f64], out: &mut [f64]| {
            let lap = ops::laplacian_raw(&g, p, Boundary::Dirichlet);
            for k in 0..p.len() {
                out[k] = interior[k] * (c[k] * p[k] - b * lap[k]);
            }
        };
        let precond = |r: &[f64], z: &mut [f64]| {
            z.copy_from_slice(r);
            self.sin_filter(z, |m, n| 1.0 / (cbar + b * (ex[m] + ey[n])));
        };
        let rhs: Vec<f64> = rhs.iter().zip(&interior).map(|(a, b)| a * b).collect();
        for (v, m) in x.iter_mut().zip(&interior) {
            *v *= m;
        }
        let rep = pcg(apply, precond, |a, b| self.weighted_dot(a, b), &rhs, x, tol, 0.0, 2000);
        if !rep.converged {
            return Err(Error::StepRejected(format!(
                "viscous solve stalled at residual {:e}",
                rep.relative_residual
            )));
        }
        Ok(rep)
    }

    /// Applies `(a - b Delta_D)^{-1}` to interior values (zero boundary data).
    pub fn dirichlet_inverse(&self, a: f64, b: f64, r: &mut [f64]) {
        let (ex, ey) = self.dirichlet_eigs();
        self.sin_filter(r, |m, n| 1.0 / (a + b * (ex[m] + ey[n])));
    }
}

/// Convenience wrapper building a one-off solver.
pub fn neumann_poisson_solve(rhs: &ScalarField) -> Result<ScalarField> {
    SpectralSolver::new(rhs.grid).neumann_poisson(rhs, COMPATIBILITY_TOL)
}

/// Convenience wrapper returning `(Pv, Qv)`.
pub fn leray_project(v: &VectorField) -> Result<(VectorField, VectorField)> {
    SpectralSolver::new(v.grid).leray(v)
}
