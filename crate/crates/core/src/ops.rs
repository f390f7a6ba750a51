//! Finite-difference calculus on node grids and the quadrature norms.
//!
//! Gradients are centred in the interior. At boundary nodes the caller picks
//! second-order one-sided differences, or masks the normal (or every)
//! component to zero. The divergence is centred in the interior and
//! first-order one-sided at boundary nodes; with that choice it is exactly
//! minus the adjoint of the normal-masked gradient in the trapezoid inner
//! product for fields with zero normal trace, and `int div m = [m.nu]` holds
//! to round-off.

use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid, ScalarField, TensorField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Mirror ghost nodes, zero normal derivative.
    Neumann,
    /// Boundary values are data; the operator returns zero there.
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradMask {
    /// Second-order one-sided differences at boundary nodes.
    None,
    /// Normal component set to zero at boundary nodes.
    Normal,
    /// Every component set to zero at boundary nodes.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ends {
    Second,
    Conservative,
    Masked,
}

/// Derivative along x of a node array.
fn dx(grid: &Grid, f: &[f64], ends: Ends) -> Vec<f64> {
    let (nx, nyn) = (grid.nx, grid.nodes_y());
    let h = grid.hx;
    let mut out = vec![0.0; f.len()];
    for i in 1..nx {
        for j in 0..nyn {
            out[i * nyn + j] = (f[(i + 1) * nyn + j] - f[(i - 1) * nyn + j]) / (2.0 * h);
        }
    }
    for j in 0..nyn {
        let at = |i: usize| f[i * nyn + j];
        let (a, b) = match ends {
            Ends::Second => (
                (4.0 * (at(1) - at(0)) - (at(2) - at(0))) / (2.0 * h),
                (4.0 * (at(nx) - at(nx - 1)) - (at(nx) - at(nx - 2))) / (2.0 * h),
            ),
            Ends::Conservative => ((at(1) - at(0)) / h, (at(nx) - at(nx - 1)) / h),
            Ends::Masked => (0.0, 0.0),
        };
        out[j] = a;
        out[nx * nyn + j] = b;
    }
    out
}

/// Derivative along y; identically zero on the slab.
fn dy(grid: &Grid, f: &[f64], ends: Ends) -> Vec<f64> {
    let ny = grid.ny;
    let mut out = vec![0.0; f.len()];
    if ny == 0 {
        return out;
    }
    let nyn = ny + 1;
    let h = grid.hy;
    for i in 0..grid.nodes_x() {
        let row = &f[i * nyn..(i + 1) * nyn];
        let o = &mut out[i * nyn..(i + 1) * nyn];
        for j in 1..ny {
            o[j] = (row[j + 1] - row[j - 1]) / (2.0 * h);
        }
        match ends {
            Ends::Second => {
                o[0] = (4.0 * (row[1] - row[0]) - (row[2] - row[0])) / (2.0 * h);
                o[ny] = (4.0 * (row[ny] - row[ny - 1]) - (row[ny] - row[ny - 2])) / (2.0 * h);
            }
            Ends::Conservative => {
                o[0] = (row[1] - row[0]) / h;
                o[ny] = (row[ny] - row[ny - 1]) / h;
            }
            Ends::Masked => {
                o[0] = 0.0;
                o[ny] = 0.0;
            }
        }
    }
    out
}

pub fn grad_masked(s: &ScalarField, mask: GradMask) -> VectorField {
    let g = &s.grid;
    let ends = if mask == GradMask::None { Ends::Second } else { Ends::Masked };
    let mut v = VectorField { grid: *g, x: dx(g, &s.data, ends), y: dy(g, &s.data, ends) };
    if mask == GradMask::All {
        v.zero_boundary();
    }
    v
}

/// Second-order gradient everywhere.
pub fn grad(s: &ScalarField) -> VectorField {
    grad_masked(s, GradMask::None)
}

/// Conservative divergence.
pub fn div(v: &VectorField) -> ScalarField {
    let g = &v.grid;
    let a = dx(g, &v.x, Ends::Conservative);
    let b = dy(g, &v.y, Ends::Conservative);
    ScalarField { grid: *g, data: a.iter().zip(&b).map(|(p, q)| p + q).collect() }
}

/// Scalar curl `dx v_y - dy v_x`.
pub fn curl(v: &VectorField) -> ScalarField {
    let g = &v.grid;
    let a = dx(g, &v.y, Ends::Second);
    let b = dy(g, &v.x, Ends::Second);
    ScalarField { grid: *g, data: a.iter().zip(&b).map(|(p, q)| p - q).collect() }
}

/// Compact five-point Laplacian.
pub fn laplacian(s: &ScalarField, bc: Boundary) -> ScalarField {
    ScalarField { grid: s.grid, data: laplacian_raw(&s.grid, &s.data, bc) }
}

pub(crate) fn laplacian_raw(g: &Grid, f: &[f64], bc: Boundary) -> Vec<f64> {
    let (nx, ny, nyn) = (g.nx, g.ny, g.nodes_y());
    let (ihx2, ihy2) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let mut out = vec![0.0; f.len()];
    for i in 0..=nx {
        for j in 0..nyn {
            if bc == Boundary::Dirichlet && g.is_boundary(i, j) {
                continue;
            }
            let k = i * nyn + j;
            let c = f[k];
            let xm = if i == 0 { f[k + nyn] } else { f[k - nyn] };
            let xp = if i == nx { f[k - nyn] } else { f[k + nyn] };
            let mut l = (xm - 2.0 * c + xp) * ihx2;
            if ny > 0 {
                let ym = if j == 0 { f[k + 1] } else { f[k - 1] };
                let yp = if j == ny { f[k - 1] } else { f[k + 1] };
                l += (ym - 2.0 * c + yp) * ihy2;
            }
            out[k] = l;
        }
    }
    out
}

pub fn vector_laplacian(v: &VectorField, bc: Boundary) -> VectorField {
    let g = &v.grid;
    VectorField { grid: *g, x: laplacian_raw(g, &v.x, bc), y: laplacian_raw(g, &v.y, bc) }
}

/// Row-wise divergence of a symmetric tensor, second order everywhere.
pub fn div_tensor(t: &TensorField) -> VectorField {
    let g = &t.grid;
    let add = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(p, q)| p + q).collect::<Vec<_>>();
    VectorField {
        grid: *g,
        x: add(dx(g, &t.xx, Ends::Second), dy(g, &t.xy, Ends::Second)),
        y: add(dx(g, &t.xy, Ends::Second), dy(g, &t.yy, Ends::Second)),
    }
}

/// Gradients of the three director components.
pub fn grad_director(d: &DirectorField) -> [VectorField; 3] {
    std::array::from_fn(|c| grad(&d.component(c)))
}

/// `int |grad f|^2` built from one-sided edge differences, the quadratic form of
/// the compact Laplacian: `-<f, lap f> = edge_energy(f)` when `f` vanishes on the boundary.
pub fn edge_energy(g: &Grid, f: &[f64]) -> f64 {
    let nyn = g.nodes_y();
    let wy = |j: usize| if g.ny == 0 { 1.0 } else if j == 0 || j == g.ny { 0.5 * g.hy } else { g.hy };
    let wx = |i: usize| if i == 0 || i == g.nx { 0.5 * g.hx } else { g.hx };
    let mut e = 0.0;
    for i in 0..g.nx {
        for j in 0..nyn {
            let d = (f[(i + 1) * nyn + j] - f[i * nyn + j]) / g.hx;
            e += g.hx * wy(j) * d * d;
        }
    }
    if g.ny > 0 {
        for i in 0..=g.nx {
            for j in 0..g.ny {
                let d = (f[i * nyn + j + 1] - f[i * nyn + j]) / g.hy;
                e += wx(i) * g.hy * d * d;
            }
        }
    }
    e
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffOp {
    Grad,
    Div,
    Curl,
    Laplacian(Boundary),
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyField {
    Scalar(ScalarField),
    Vector(VectorField),
}

/// Rank-checked dispatch over the operators above.
pub fn diff_op(kind: DiffOp, field: &AnyField) -> Result<AnyField> {
    match (kind, field) {
        (DiffOp::Grad, AnyField::Scalar(s)) => Ok(AnyField::Vector(grad(s))),
        (DiffOp::Laplacian(bc), AnyField::Scalar(s)) => Ok(AnyField::Scalar(laplacian(s, bc))),
        (DiffOp::Laplacian(bc), AnyField::Vector(v)) => Ok(AnyField::Vector(vector_laplacian(v, bc))),
        (DiffOp::Div, AnyField::Vector(v)) => Ok(AnyField::Scalar(div(v))),
        (DiffOp::Curl, AnyField::Vector(v)) => Ok(AnyField::Scalar(curl(v))),
        (k, f) => Err(Error::Mismatch(format!(
            "{k:?} is not defined on a {} field",
            if matches!(f, AnyField::Scalar(_)) { "scalar" } else { "vector" }
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpec {
    Lp(f64),
    H1Seminorm,
    Linf,
}

fn lp_from_pointwise(g: &Grid, mag: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("Lebesgue exponent must lie in [1, inf], got {p}")));
    }
    if p.is_infinite() {
        return Ok(mag.iter().fold(0.0f64, |m, v| m.max(*v)));
    }
    let s: f64 = g.nodes().map(|(i, j, k)| g.weight(i, j) * mag[k].powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

pub trait Norm {
    fn norm(&self, spec: NormSpec) -> Result<f64>;
}

impl Norm for ScalarField {
    fn norm(&self, spec: NormSpec) -> Result<f64> {
        match spec {
            NormSpec::Lp(p) => {
                let mag: Vec<f64> = self.data.iter().map(|v| v.abs()).collect();
                lp_from_pointwise(&self.grid, &mag, p)
            }
            NormSpec::Linf => Ok(self.max_abs()),
            NormSpec::H1Seminorm => grad(self).norm(NormSpec::Lp(2.0)),
        }
    }
}

impl Norm for VectorField {
    fn norm(&self, spec: NormSpec) -> Result<f64> {
        match spec {
            NormSpec::Lp(p) => {
                let mag: Vec<f64> = self.norm_sq_pointwise().data.iter().map(|v| v.sqrt()).collect();
                lp_from_pointwise(&self.grid, &mag, p)
            }
            NormSpec::Linf => Ok(self.norm_sq_pointwise().max_abs().sqrt()),
            NormSpec::H1Seminorm => {
                let a = grad(&self.component(0)).dot(&grad(&self.component(0)));
                let b = grad(&self.component(1)).dot(&grad(&self.component(1)));
                Ok((a + b).sqrt())
            }
        }
    }
}

impl Norm for DirectorField {
    fn norm(&self, spec: NormSpec) -> Result<f64> {
        match spec {
            NormSpec::Lp(p) => {
                let mag: Vec<f64> = self.norm_sq_pointwise().data.iter().map(|v| v.sqrt()).collect();
                lp_from_pointwise(&self.grid, &mag, p)
            }
            NormSpec::Linf => Ok(self.max_norm()),
            NormSpec::H1Seminorm => Ok(grad_director(self).iter().map(|g| g.dot(g)).sum::<f64>().sqrt()),
        }
    }
}

/// Full `H^1` norm `(||f||^2 + |f|_1^2)^{1/2}` of a director field.
pub fn director_h1(d: &DirectorField) -> f64 {
    let l2 = d.dot(d);
    let h1: f64 = grad_director(d).iter().map(|g| g.dot(g)).sum();
    (l2 + h1).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigenpair, Domain, ModeIndex};
    use std::f64::consts::PI;

    fn square(n: usize) -> Grid {
        Grid::new(Domain::rectangle(PI, PI).unwrap(), n, n).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = square(16);
        let v = grad(&ScalarField::constant(g, 3.5));
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(grad_masked(&ScalarField::constant(g, 1.0), GradMask::Normal).max_abs(), 0.0);
    }

    #[test]
    fn neumann_laplacian_of_cos_is_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = square(n);
            let f = g.sample(|x, _| x.cos());
            let l = laplacian(&f, Boundary::Neumann);
            let e = l.add(&f).max_abs();
            errs.push(e * (n * n) as f64);
        }
        // max error / h^2 approaches the Taylor constant 1/12 * pi^2
        for e in &errs {
            assert!(*e < PI * PI / 12.0 * 1.01 && *e > PI * PI / 12.0 * 0.95, "{errs:?}");
        }
    }

    #[test]
    fn div_grad_of_mode_converges() {
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64] {
            let g = square(n);
            let m = eigenpair(g.domain, ModeIndex::new(1, 1));
            let phi = g.sample_mode(&m);
            let lap = div(&grad(&phi));
            let mut err: f64 = 0.0;
            for (i, j, k) in g.nodes() {
                if !g.is_boundary(i, j) {
                    err = err.max((lap.data[k] + 2.0 * phi.data[k]).abs());
                }
            }
            assert!(err < prev / 3.5);
            prev = err;
        }
    }

    #[test]
    fn divergence_is_conservative() {
        let g = Grid::new(Domain::rectangle(2.0, 1.0).unwrap(), 20, 12).unwrap();
        let v = VectorField::sample(&g, |x, y| [x * x * y + 0.3, (x * y).sin()]);
        let total = div(&v).integral();
        let mut flux = 0.0;
        for j in 0..g.nodes_y() {
            let w = g.weight(0, j) / (0.5 * g.hx);
            flux += w * (v.x[g.idx(g.nx, j)] - v.x[g.idx(0, j)]);
        }
        for i in 0..g.nodes_x() {
            let w = g.weight(i, 0) / (0.5 * g.hy);
            flux += w * (v.y[g.idx(i, g.ny)] - v.y[g.idx(i, 0)]);
        }
        assert!((total - flux).abs() < 1e-12, "{total} vs {flux}");
    }

    #[test]
    fn divergence_adjoint_to_masked_gradient() {
        let g = Grid::new(Domain::rectangle(1.0, 1.5).unwrap(), 12, 10).unwrap();
        let mut m = VectorField::sample(&g, |x, y| [(3.0 * x + y).sin(), (x - 2.0 * y).cos()]);
        m.zero_boundary();
        let psi = g.sample(|x, y| (x * y + x).exp());
        let lhs = div(&m).dot(&psi);
        let rhs = -m.dot(&grad_masked(&psi, GradMask::Normal));
        assert!((lhs - rhs).abs() < 1e-12);
        let rhs0 = -m.dot(&grad_masked(&psi, GradMask::All));
        assert!((lhs - rhs0).abs() < 1e-12);
    }

    #[test]
    fn edge_energy_matches_laplacian_form() {
        let g = Grid::new(Domain::rectangle(1.0, 2.0).unwrap(), 10, 14).unwrap();
        let f = g.sample(|x, y| (PI * x).sin() * (0.5 * PI * y).sin() * (1.0 + x * y));
        let mut f = f;
        for (i, j, k) in g.nodes() {
            if g.is_boundary(i, j) {
                f.data[k] = 0.0;
            }
        }
        let lap = laplacian(&f, Boundary::Dirichlet);
        assert!((-f.dot(&lap) - edge_energy(&g, &f.data)).abs() < 1e-12);
    }

    #[test]
    fn curl_of_gradient_is_small() {
        let g = square(64);
        let f = g.sample(|x, y| (x * y).sin());
        assert!(curl(&grad(&f)).max_abs() < 1e-2);
    }

    #[test]
    fn rank_mismatch_is_reported() {
        let g = square(8);
        let s = AnyField::Scalar(ScalarField::zeros(g));
        assert!(matches!(diff_op(DiffOp::Div, &s), Err(Error::Mismatch(_))));
        let v = AnyField::Vector(VectorField::zeros(g));
        assert!(diff_op(DiffOp::Grad, &v).is_err());
        assert!(diff_op(DiffOp::Curl, &v).is_ok());
    }

    #[test]
    fn norm_examples() {
        let g = square(64);
        assert!((ScalarField::constant(g, 1.0).norm(NormSpec::Lp(2.0)).unwrap() - PI).abs() < 1e-12);
        let c = g.sample(|x, _| x.cos());
        assert!((c.norm(NormSpec::Lp(2.0)).unwrap() - (PI * PI / 2.0).sqrt()).abs() < 1e-12);
        let phi = g.sample_mode(&eigenpair(g.domain, ModeIndex::new(1, 0)));
        assert!((phi.norm(NormSpec::Lp(2.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(c.norm(NormSpec::Lp(0.5)).is_err());
        assert_eq!(c.norm(NormSpec::Lp(f64::INFINITY)).unwrap(), 1.0);
        // |cos|_{H1} = ||sin x|| = pi / sqrt 2
        let h1 = c.norm(NormSpec::H1Seminorm).unwrap();
        assert!((h1 - PI / 2f64.sqrt()).abs() < 1e-2);
    }

    #[test]
    fn slab_operators() {
        let g = Grid::new(Domain::slab(PI).unwrap(), 32, 0).unwrap();
        let f = g.sample(|x, _| x.cos());
        let v = grad(&f);
        assert!(v.y.iter().all(|&y| y == 0.0));
        let l = laplacian(&f, Boundary::Neumann);
        assert!(l.add(&f).max_abs() < 1e-2);
    }
}
