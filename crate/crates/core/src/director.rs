//! Director update shared by both solvers: upwind transport, explicit
//! Ginzburg-Landau relaxation, implicit diffusion with Dirichlet data.
//! Each stage maps the ball `|d| <= max(1, |d|_inf)` into itself.

use crate::error::{Error, Result};
use crate::field::{DirectorField, VectorField};
use crate::model::ModelParams;
use crate::poisson::SpectralSolver;

/// `dt (|u_x|/hx + |u_y|/hy)` maximised over the grid.
pub fn advective_cfl(u: &VectorField, dt: f64) -> f64 {
    let g = u.grid;
    let sy = if g.is_slab() { 0.0 } else { 1.0 / g.hy };
    u.x.iter().zip(&u.y).map(|(a, b)| dt * (a.abs() / g.hx + b.abs() * sy)).fold(0.0, f64::max)
}

/// First-order upwind step of `d_t + u . grad d = 0` on interior nodes.
fn transport(d: &DirectorField, u: &VectorField, dt: f64) -> DirectorField {
    let g = d.grid;
    let mut out = d.clone();
    for (i, j, k) in g.nodes() {
        if g.is_boundary(i, j) {
            continue;
        }
        let (ux, uy) = (u.x[k], u.y[k]);
        let kx = if ux > 0.0 { g.idx(i - 1, j) } else { g.idx(i + 1, j) };
        let cx = dt * ux.abs() / g.hx;
        let (ky, cy) = if g.is_slab() {
            (k, 0.0)
        } else {
            (if uy > 0.0 { g.idx(i, j - 1) } else { g.idx(i, j + 1) }, dt * uy.abs() / g.hy)
        };
        for c in 0..3 {
            let v = &d.c[c];
            out.c[c][k] = (1.0 - cx - cy) * v[k] + cx * v[kx] + cy * v[ky];
        }
    }
    out
}

/// `d <- d (1 - a (|d|^2 - 1))` with `a = dt theta / (2 sigma0^2)`, substepped so that `a <= 1/2`.
fn relax(d: &mut DirectorField, dt: f64, params: &ModelParams) {
    let g = d.grid;
    let a_total = dt * params.theta / (2.0 * params.sigma0 * params.sigma0);
    let sub = (2.0 * a_total).ceil().max(1.0) as usize;
    let a = a_total / sub as f64;
    for (i, j, k) in g.nodes() {
        if g.is_boundary(i, j) {
            continue;
        }
        let mut v = d.at(k);
        for _ in 0..sub {
            let q = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 1.0;
            let s = 1.0 - a * q;
            v = [s * v[0], s * v[1], s * v[2]];
        }
        for c in 0..3 {
            d.c[c][k] = v[c];
        }
    }
}

/// One step of `d_t + u . grad d = theta (Delta d - f(d))` with `d` held at its current
/// boundary values. Rejected when the upwind CFL number exceeds one.
pub fn director_step(d: &DirectorField, u: &VectorField, dt: f64, params: &ModelParams, solver: &SpectralSolver) -> Result<DirectorField> {
    d.grid.check_same(&u.grid)?;
    let cfl = advective_cfl(u, dt);
    if cfl > 1.0 {
        return Err(Error::StepRejected(format!("director CFL number {cfl:.3} exceeds 1")));
    }
    let mut next = transport(d, u, dt);
    relax(&mut next, dt, params);
    for c in 0..3 {
        next.c[c] = solver.dirichlet_helmholtz(1.0, dt * params.theta, &next.c[c], &d.c[c]);
    }
    Ok(next)
}
