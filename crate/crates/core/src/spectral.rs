//! Closed-form Neumann-Laplacian eigenbasis on rectangles and slabs, the
//! eigenvectors of the inviscid wave operator built from it, and the
//! first-order boundary-layer damping correction of each acoustic mode.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computational domain. Lengths are nondimensional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    #[serde(rename = "rectangle2d")]
    Rectangle { lx: f64, ly: f64 },
    #[serde(rename = "slab1d")]
    Slab { lx: f64 },
}

impl Domain {
    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Config(format!("rectangle extents must be positive, got {lx} x {ly}")));
        }
        Ok(Domain::Rectangle { lx, ly })
    }

    pub fn slab(lx: f64) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::Config(format!("slab length must be positive, got {lx}")));
        }
        Ok(Domain::Slab { lx })
    }

    pub fn lx(&self) -> f64 {
        match *self {
            Domain::Rectangle { lx, .. } | Domain::Slab { lx } => lx,
        }
    }

    /// Transverse extent; `None` for the slab.
    pub fn ly(&self) -> Option<f64> {
        match *self {
            Domain::Rectangle { ly, .. } => Some(ly),
            Domain::Slab { .. } => None,
        }
    }

    pub fn is_slab(&self) -> bool {
        matches!(self, Domain::Slab { .. })
    }

    /// Lebesgue measure of the domain (length for the slab).
    pub fn measure(&self) -> f64 {
        self.lx() * self.ly().unwrap_or(1.0)
    }
}

/// Cosine multi-index. For the slab `n` is always zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m: usize,
    pub n: usize,
}

impl ModeIndex {
    pub const fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }

    pub fn is_constant(&self) -> bool {
        self.m == 0 && self.n == 0
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// Normalised eigenfunction `-Delta Phi = lambda^2 Phi`, `dPhi/dnu = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeumannMode {
    pub index: ModeIndex,
    pub domain: Domain,
    /// Square root of the eigenvalue.
    pub lambda0: f64,
    /// Wavenumbers `m pi / Lx`, `n pi / Ly`.
    pub kx: f64,
    pub ky: f64,
    /// L2 normalisation constant.
    pub amplitude: f64,
}

impl NeumannMode {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (self.kx * x).cos() * (self.ky * y).cos()
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let (sx, cx) = (self.kx * x).sin_cos();
        let (sy, cy) = (self.ky * y).sin_cos();
        [-self.amplitude * self.kx * sx * cy, -self.amplitude * self.ky * cx * sy]
    }

    pub fn lambda_sq(&self) -> f64 {
        self.kx * self.kx + self.ky * self.ky
    }

    pub fn is_constant(&self) -> bool {
        self.index.is_constant()
    }

    /// `int_{dOmega} |grad Phi|^2 ds`, evaluated edge by edge in closed form.
    ///
    /// On the edges `y = 0, Ly` only the x-derivative survives and
    /// `int_0^Lx sin^2(kx x) dx = Lx/2` for `m > 0`; symmetrically for `x = 0, Lx`.
    /// For the slab the boundary is the two endpoints where `sin(m pi x / L)` vanishes.
    pub fn boundary_grad_sq(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        match self.domain {
            Domain::Rectangle { lx, ly } => {
                let horizontal = if self.index.m > 0 { 2.0 * a2 * self.kx * self.kx * lx / 2.0 } else { 0.0 };
                let vertical = if self.index.n > 0 { 2.0 * a2 * self.ky * self.ky * ly / 2.0 } else { 0.0 };
                horizontal + vertical
            }
            Domain::Slab { lx } => {
                let g0 = self.grad(0.0, 0.0)[0];
                let g1 = self.grad(lx, 0.0)[0];
                // sin(m pi) is only zero up to round-off
                let clean = |g: f64| if g.abs() < 1e-12 * (1.0 + self.lambda0 * self.amplitude) { 0.0 } else { g };
                clean(g0).powi(2) + clean(g1).powi(2)
            }
        }
    }

    /// Boundary sample points used for trace checks: `per_edge` points per edge.
    pub fn boundary_trace(&self, per_edge: usize) -> Vec<f64> {
        match self.domain {
            Domain::Rectangle { lx, ly } => {
                let k = per_edge.max(2);
                let mut out = Vec::with_capacity(4 * k);
                for s in 0..k {
                    let t = s as f64 / (k - 1) as f64;
                    out.push(self.value(t * lx, 0.0));
                    out.push(self.value(t * lx, ly));
                    out.push(self.value(0.0, t * ly));
                    out.push(self.value(lx, t * ly));
                }
                out
            }
            Domain::Slab { lx } => vec![self.value(0.0, 0.0), self.value(lx, 0.0)],
        }
    }
}

/// Closed-form Neumann eigenpair for a multi-index.
pub fn eigenpair(domain: Domain, index: ModeIndex) -> NeumannMode {
    let norm_factor = |k: usize| if k == 0 { 1.0 } else { 2.0 };
    match domain {
        Domain::Rectangle { lx, ly } => {
            let kx = index.m as f64 * PI / lx;
            let ky = index.n as f64 * PI / ly;
            NeumannMode {
                index,
                domain,
                lambda0: (kx * kx + ky * ky).sqrt(),
                kx,
                ky,
                amplitude: (norm_factor(index.m) * norm_factor(index.n) / (lx * ly)).sqrt(),
            }
        }
        Domain::Slab { lx } => {
            let index = ModeIndex::new(index.m, 0);
            let kx = index.m as f64 * PI / lx;
            NeumannMode { index, domain, lambda0: kx, kx, ky: 0.0, amplitude: (norm_factor(index.m) / lx).sqrt() }
        }
    }
}

/// Branch of the acoustic eigenvalue `+- i lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Eigenvector `(Phi, +-grad Phi / (i lambda))` of the wave operator `L(Phi, m) = (div m, grad Phi)`.
#[derive(Clone, Copy, Debug)]
pub struct WaveEigenvector {
    pub mode: NeumannMode,
    pub sign: Sign,
}

impl WaveEigenvector {
    pub fn new(mode: NeumannMode, sign: Sign) -> Result<Self> {
        if mode.is_constant() {
            return Err(Error::InvalidInput("the constant mode has no acoustic eigenvector".into()));
        }
        Ok(Self { mode, sign })
    }

    pub fn scalar_part(&self, x: f64, y: f64) -> f64 {
        self.mode.value(x, y)
    }

    /// `+-grad Phi / (i lambda) = -+ i grad Phi / lambda`.
    pub fn vector_part(&self, x: f64, y: f64) -> [Complex64; 2] {
        let g = self.mode.grad(x, y);
        let c = Complex64::new(0.0, -self.sign.factor() / self.mode.lambda0);
        [c * g[0], c * g[1]]
    }

    /// Eigenvalue `+- i lambda0`.
    pub fn eigenvalue(&self) -> Complex64 {
        Complex64::new(0.0, self.sign.factor() * self.mode.lambda0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeClass {
    /// Strictly damped by the viscous boundary layer.
    I,
    /// No first-order boundary-layer damping.
    J,
    Trivial,
}

impl ModeClass {
    pub fn label(self) -> &'static str {
        match self {
            ModeClass::I => "I",
            ModeClass::J => "J",
            ModeClass::Trivial => "trivial",
        }
    }
}

/// First-order correction `i lambda_{k,1}^{+-}` of the acoustic eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingCorrection {
    /// Correction on the `+` branch; the `-` branch is its complex conjugate.
    pub plus: Complex64,
    pub boundary_integral: f64,
    pub class: ModeClass,
}

impl DampingCorrection {
    pub fn value(&self, sign: Sign) -> Complex64 {
        match sign {
            Sign::Plus => self.plus,
            Sign::Minus => self.plus.conj(),
        }
    }

    /// Envelope decay rate `-Re(i lambda_1) / sqrt(eps)` predicted in the scaled time variable.
    pub fn predicted_rate(&self, epsilon: f64) -> f64 {
        -self.plus.re / epsilon.sqrt()
    }
}

/// `i lambda_1^+ = -((1 + i)/2) sqrt(mu / (2 lambda0^3)) int_{dOmega} |grad Phi|^2 ds`.
pub fn damping_correction(mode: &NeumannMode, mu: f64) -> DampingCorrection {
    if mode.is_constant() || mode.lambda0 == 0.0 {
        return DampingCorrection { plus: Complex64::new(0.0, 0.0), boundary_integral: 0.0, class: ModeClass::Trivial };
    }
    let b = mode.boundary_grad_sq();
    let scale = 0.5 * (mu / (2.0 * mode.lambda0.powi(3))).sqrt() * b;
    let plus = Complex64::new(-scale, -scale);
    let class = if b > 0.0 { ModeClass::I } else { ModeClass::J };
    DampingCorrection { plus, boundary_integral: b, class }
}

/// Truncated eigenbasis: the constant mode followed by the `truncation` lowest nonconstant modes.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub domain: Domain,
    pub modes: Vec<NeumannMode>,
    pub corrections: Vec<DampingCorrection>,
    pub truncation: usize,
    pub mu: f64,
}

impl SpectralBasis {
    /// Nonconstant modes with their corrections.
    pub fn acoustic(&self) -> impl Iterator<Item = (&NeumannMode, &DampingCorrection)> {
        self.modes.iter().zip(&self.corrections).filter(|(m, _)| !m.is_constant())
    }

    pub fn find(&self, index: ModeIndex) -> Option<(&NeumannMode, &DampingCorrection)> {
        self.modes.iter().zip(&self.corrections).find(|(m, _)| m.index == index)
    }

    /// Writes `m,n,lambda0,boundary_integral,re_lambda1,im_lambda1,class`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,n,lambda0,boundary_integral,re_lambda1,im_lambda1,class")?;
        for (mode, corr) in self.modes.iter().zip(&self.corrections) {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                mode.index.m,
                mode.index.n,
                mode.lambda0,
                corr.boundary_integral,
                corr.plus.re,
                corr.plus.im,
                corr.class.label()
            )?;
        }
        Ok(())
    }
}

/// Builds the constant mode plus the `n` lowest nonconstant modes, ordered by
/// eigenvalue (ties broken by `n`, then `m`).
pub fn build_basis(domain: Domain, n: usize, mu: f64) -> Result<SpectralBasis> {
    if n == 0 {
        return Err(Error::InvalidInput("basis truncation must be at least 1".into()));
    }
    let mut candidates: Vec<NeumannMode> = match domain {
        Domain::Rectangle { .. } => (0..=n)
            .flat_map(|m| (0..=n).map(move |k| ModeIndex::new(m, k)))
            .filter(|i| !i.is_constant())
            .map(|i| eigenpair(domain, i))
            .collect(),
        Domain::Slab { .. } => (1..=n).map(|m| eigenpair(domain, ModeIndex::new(m, 0))).collect(),
    };
    candidates.sort_by(|a, b| {
        let (la, lb) = (a.lambda_sq(), b.lambda_sq());
        if (la - lb).abs() <= 1e-12 * la.max(lb) {
            (a.index.n, a.index.m).cmp(&(b.index.n, b.index.m))
        } else {
            la.total_cmp(&lb)
        }
    });
    candidates.truncate(n);
    let mut modes = Vec::with_capacity(n + 1);
    modes.push(eigenpair(domain, ModeIndex::new(0, 0)));
    modes.extend(candidates);
    let corrections = modes.iter().map(|m| damping_correction(m, mu)).collect();
    Ok(SpectralBasis { domain, modes, corrections, truncation: n, mu })
}

/// Outcome of testing the overdetermined Neumann problem against the basis.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionHReport {
    pub satisfied: bool,
    pub tolerance: f64,
    /// Nonconstant modes whose boundary trace is constant.
    pub violations: Vec<ModeIndex>,
    /// `(mode, max - min of the boundary trace)` for every nonconstant mode.
    pub trace_ranges: Vec<(ModeIndex, f64)>,
}

pub const DEFAULT_H_TOLERANCE: f64 = 1e-8;

/// A nonconstant mode with constant boundary trace is a nontrivial solution of the
/// overdetermined problem; condition (H) holds iff there are none among the retained modes.
pub fn check_condition_h(basis: &SpectralBasis, tol: f64) -> ConditionHReport {
    let mut violations = Vec::new();
    let mut trace_ranges = Vec::new();
    for mode in basis.modes.iter().filter(|m| !m.is_constant()) {
        let trace = mode.boundary_trace(65);
        let (lo, hi) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range <= tol {
            violations.push(mode.index);
        }
        trace_ranges.push((mode.index, range));
    }
    ConditionHReport { satisfied: violations.is_empty(), tolerance: tol, violations, trace_ranges }
}
