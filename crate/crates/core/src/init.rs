//! Initial-data profiles. Velocity and director are independent of epsilon;
//! the density is `1 + eps phi0` for a fixed zero-mean profile `phi0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitConfig, Profile};
use crate::field::{DirectorField, Grid, ScalarField, VectorField};
use crate::spectral::{eigenpair, ModeIndex};

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub rho: ScalarField,
    pub u: VectorField,
    pub d: DirectorField,
}

/// Stream function and potential coefficients of a band-limited profile:
/// `u = rot psi + grad chi`, `d = (sin a, 0, cos a)`, `rho = 1 + eps phi0`.
#[derive(Clone, Debug)]
struct Shape {
    /// `(kx, ky, coefficient)` of `sin^2`-type bumps `sin(kx x)^2 sin(ky y)^2`.
    stream: Vec<(f64, f64, f64)>,
    potential: Vec<(f64, f64, f64)>,
    /// `a = sum c sin(kx x) sin(ky y)`.
    tilt: Vec<(f64, f64, f64)>,
    /// `phi0 = sum c Phi_{m,n}`.
    density: Vec<(usize, usize, f64)>,
}

fn shape(init: &InitConfig, slab: bool) -> Shape {
    let a = init.amplitude;
    match init.profile {
        Profile::Equilibrium => Shape { stream: vec![], potential: vec![], tilt: vec![], density: vec![] },
        Profile::Acoustic => Shape { stream: vec![], potential: vec![], tilt: vec![], density: vec![(1, 0, a)] },
        Profile::Mixed => Shape {
            stream: if slab { vec![] } else { vec![(1.0, 1.0, 0.5 * a)] },
            potential: vec![(1.0, 1.0, 0.25 * a)],
            tilt: vec![(1.0, 1.0, 0.5 * a)],
            density: if slab { vec![(1, 0, a)] } else { vec![(1, 1, a)] },
        },
        Profile::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
            let mut pick = |n: usize, scale: f64| -> Vec<(f64, f64, f64)> {
                (0..n)
                    .map(|_| {
                        let kx = rng.gen_range(1..=3) as f64;
                        let ky = if slab { 1.0 } else { rng.gen_range(1..=3) as f64 };
                        (kx, ky, scale * a * rng.gen_range(-1.0..1.0))
                    })
                    .collect()
            };
            let stream = if slab { vec![] } else { pick(3, 0.5) };
            let potential = pick(3, 0.25);
            let tilt = pick(3, 0.5);
            let density = (0..4)
                .map(|_| {
                    let m = rng.gen_range(0..=3);
                    let n = if slab { 0 } else { rng.gen_range(if m == 0 { 1 } else { 0 }..=3) };
                    (m.max(if slab { 1 } else { 0 }), n, a * rng.gen_range(-1.0..1.0))
                })
                .collect();
            Shape { stream, potential, tilt, density }
        }
    }
}

/// `b = sin(kx x)^2 sin(ky y)^2` and its gradient; the slab drops the y factor.
fn bump(kx: f64, ky: f64, x: f64, y: f64, slab: bool) -> (f64, [f64; 2]) {
    let (sx, cx) = (kx * x).sin_cos();
    if slab {
        return (sx * sx, [2.0 * kx * sx * cx, 0.0]);
    }
    let (sy, cy) = (ky * y).sin_cos();
    (sx * sx * sy * sy, [2.0 * kx * sx * cx * sy * sy, 2.0 * ky * sx * sx * sy * cy])
}

/// Builds the profile on `grid`; coordinates are scaled so that wavenumber one
/// spans the domain once.
pub fn initial_data(grid: &Grid, init: &InitConfig, epsilon: f64) -> InitialData {
    let slab = grid.is_slab();
    let s = shape(init, slab);
    let lx = grid.domain.lx();
    let ly = grid.domain.ly().unwrap_or(1.0);
    let (fx, fy) = (std::f64::consts::PI / lx, std::f64::consts::PI / ly);

    let u = VectorField::sample(grid, |x, y| {
        let (xs, ys) = (x * fx, y * fy);
        let mut v = [0.0, 0.0];
        for &(kx, ky, c) in &s.stream {
            let (_, g) = bump(kx, ky, xs, ys, slab);
            v[0] += c * g[1] * fy;
            v[1] -= c * g[0] * fx;
        }
        for &(kx, ky, c) in &s.potential {
            let (_, g) = bump(kx, ky, xs, ys, slab);
            v[0] += c * g[0] * fx;
            v[1] += c * g[1] * fy;
        }
        v
    });
    let d = DirectorField::sample(grid, |x, y| {
        let (xs, ys) = (x * fx, y * fy);
        let a: f64 = s
            .tilt
            .iter()
            .map(|&(kx, ky, c)| c * (kx * xs).sin() * if slab { 1.0 } else { (ky * ys).sin() })
            .sum();
        [a.sin(), 0.0, a.cos()]
    });
    let mut phi0 = ScalarField::zeros(*grid);
    for &(m, n, c) in &s.density {
        let mode = eigenpair(grid.domain, ModeIndex::new(m, n));
        phi0.axpy(c, &grid.sample_mode(&mode));
    }
    let rho = phi0.map(|p| 1.0 + epsilon * p);
    InitialData { rho, u, d }
}
