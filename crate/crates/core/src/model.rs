//! Constitutive relations of the nematic model and the energy ledger.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DirectorField, ScalarField, TensorField, VectorField};
use crate::ops::{self, Boundary};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub lambda: f64,
    pub theta: f64,
    pub sigma0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { gamma: 2.0, epsilon: 0.1, mu: 1.0, lambda: 0.5, theta: 1.0, sigma0: 0.2 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.5) {
            return Err(Error::Config(format!("gamma must exceed 3/2, got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        for (name, v) in [("mu", self.mu), ("lambda", self.lambda), ("theta", self.theta), ("sigma0", self.sigma0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `min(2, gamma)`.
    pub fn kappa(&self) -> f64 {
        self.gamma.min(2.0)
    }
}

/// `F(d) = (|d|^2 - 1)^2 / (4 s^2)` and `f(d) = (|d|^2 - 1) d / (2 s^2)` at a point.
pub fn penalty_point(d: [f64; 3], sigma0: f64) -> (f64, [f64; 3]) {
    let q = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - 1.0;
    let s2 = sigma0 * sigma0;
    let c = q / (2.0 * s2);
    (q * q / (4.0 * s2), [c * d[0], c * d[1], c * d[2]])
}

pub fn penalty(d: &DirectorField, sigma0: f64) -> (ScalarField, DirectorField) {
    let g = d.grid;
    let mut big = ScalarField::zeros(g);
    let mut small = DirectorField::zeros(g);
    for k in 0..g.len() {
        let (v, f) = penalty_point(d.at(k), sigma0);
        big.data[k] = v;
        for c in 0..3 {
            small.c[c][k] = f[c];
        }
    }
    (big, small)
}

/// `grad d (.) grad d` as a symmetric 2x2 tensor.
pub fn director_gram(d: &DirectorField) -> TensorField {
    let gd = ops::grad_director(d);
    let mut t = TensorField::zeros(d.grid);
    for k in 0..d.grid.len() {
        for gc in &gd {
            t.xx[k] += gc.x[k] * gc.x[k];
            t.xy[k] += gc.x[k] * gc.y[k];
            t.yy[k] += gc.y[k] * gc.y[k];
        }
    }
    t
}

/// `lambda (grad d (.) grad d - (|grad d|^2 / 2 + F(d)) I)`.
pub fn ericksen_stress(d: &DirectorField, lambda: f64, sigma0: f64) -> TensorField {
    let mut t = director_gram(d);
    for k in 0..d.grid.len() {
        let (f, _) = penalty_point(d.at(k), sigma0);
        let iso = 0.5 * (t.xx[k] + t.yy[k]) + f;
        t.xx[k] = lambda * (t.xx[k] - iso);
        t.xy[k] *= lambda;
        t.yy[k] = lambda * (t.yy[k] - iso);
    }
    t
}

fn check_density(rho: &ScalarField) -> Result<()> {
    if let Some(v) = rho.data.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidState(format!("density sample {v} is negative or not finite")));
    }
    Ok(())
}

/// `P = rho^gamma / eps^2` and `pi_eps = P - (lambda/2)|grad d|^2 - lambda F(d)`.
pub fn pressure(rho: &ScalarField, d: &DirectorField, params: &ModelParams) -> Result<(ScalarField, ScalarField)> {
    check_density(rho)?;
    rho.grid.check_same(&d.grid)?;
    let e2 = params.epsilon * params.epsilon;
    let p = rho.map(|r| r.powf(params.gamma) / e2);
    let gram = director_gram(d);
    let (big_f, _) = penalty(d, params.sigma0);
    let mut pi = p.clone();
    for k in 0..pi.data.len() {
        pi.data[k] -= params.lambda * (0.5 * (gram.xx[k] + gram.yy[k]) + big_f.data[k]);
    }
    Ok((p, pi))
}

/// `(rho - 1) / eps`.
pub fn density_fluctuation(rho: &ScalarField, epsilon: f64) -> ScalarField {
    rho.map(|r| (r - 1.0) / epsilon)
}

/// `rho^gamma - gamma rho + gamma - 1`, nonnegative by convexity.
pub fn internal_integrand(rho: f64, gamma: f64) -> f64 {
    (rho.powf(gamma) - gamma * rho + gamma - 1.0).max(0.0)
}

/// Instantaneous energy terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    pub kinetic: f64,
    pub internal: f64,
    pub elastic: f64,
    pub penalty: f64,
}

impl EnergySnapshot {
    pub fn total(&self) -> f64 {
        self.kinetic + self.internal + self.elastic + self.penalty
    }
}

/// Energy of a state; `rho = None` means unit density and no internal energy.
pub fn energy_snapshot(rho: Option<&ScalarField>, u: &VectorField, d: &DirectorField, params: &ModelParams) -> EnergySnapshot {
    let g = u.grid;
    let kin = match rho {
        Some(r) => 0.5 * g.nodes().map(|(i, j, k)| g.weight(i, j) * r.data[k] * (u.x[k] * u.x[k] + u.y[k] * u.y[k])).sum::<f64>(),
        None => 0.5 * u.dot(u),
    };
    let internal = rho.map_or(0.0, |r| {
        let scale = params.epsilon * params.epsilon * (params.gamma - 1.0);
        r.map(|v| internal_integrand(v, params.gamma)).integral() / scale
    });
    let elastic = 0.5 * params.lambda * d.c.iter().map(|c| ops::edge_energy(&g, c)).sum::<f64>();
    let (big_f, _) = penalty(d, params.sigma0);
    EnergySnapshot { kinetic: kin, internal, elastic, penalty: params.lambda * big_f.integral() }
}

/// `mu int |grad u|^2` with the edge-difference quadrature.
pub fn viscous_dissipation_rate(u: &VectorField, mu: f64) -> f64 {
    mu * (ops::edge_energy(&u.grid, &u.x) + ops::edge_energy(&u.grid, &u.y))
}

/// `lambda theta int |Delta d - f(d)|^2` over interior nodes.
pub fn director_dissipation_rate(d: &DirectorField, params: &ModelParams) -> f64 {
    let g = d.grid;
    let (_, f) = penalty(d, params.sigma0);
    let mut acc = 0.0;
    for c in 0..3 {
        let lap = ops::laplacian(&d.component(c), Boundary::Dirichlet);
        for (i, j, k) in g.nodes() {
            if !g.is_boundary(i, j) {
                let r = lap.data[k] - f.c[c][k];
                acc += g.weight(i, j) * r * r;
            }
        }
    }
    params.lambda * params.theta * acc
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub elastic: f64,
    pub penalty: f64,
    pub diss_visc: f64,
    pub diss_dir: f64,
    pub total_plus_dissipation: f64,
}

/// Energy time series with trapezoid-in-time dissipation accumulation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
    last_rates: Option<(f64, f64, f64)>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row at time `t` given the current energy and dissipation rates.
    pub fn record(&mut self, t: f64, e: EnergySnapshot, visc_rate: f64, dir_rate: f64) -> LedgerRow {
        let (dv, dd) = match (self.rows.last(), self.last_rates) {
            (Some(prev), Some((t0, v0, d0))) => {
                let h = t - t0;
                (prev.diss_visc + 0.5 * h * (v0 + visc_rate), prev.diss_dir + 0.5 * h * (d0 + dir_rate))
            }
            _ => (0.0, 0.0),
        };
        let row = LedgerRow {
            t,
            kinetic: e.kinetic,
            internal: e.internal,
            elastic: e.elastic,
            penalty: e.penalty,
            diss_visc: dv,
            diss_dir: dd,
            total_plus_dissipation: e.total() + dv + dd,
        };
        self.rows.push(row);
        self.last_rates = Some((t, visc_rate, dir_rate));
        row
    }

    pub fn initial_total(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.total_plus_dissipation)
    }

    /// Largest rise of total-plus-dissipation above its running minimum,
    /// relative to the initial value (absolute when the initial value is zero).
    pub fn max_relative_increase(&self) -> f64 {
        let e0 = self.initial_total().abs();
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        let mut lo = f64::INFINITY;
        let mut worst: f64 = 0.0;
        for r in &self.rows {
            lo = lo.min(r.total_plus_dissipation);
            worst = worst.max(r.total_plus_dissipation - lo);
        }
        worst / scale
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,kinetic,internal,elastic,penalty,diss_visc,diss_dir,total_plus_dissipation")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t, r.kinetic, r.internal, r.elastic, r.penalty, r.diss_visc, r.diss_dir, r.total_plus_dissipation
            )?;
        }
        Ok(())
    }
}
