//! Type-I discrete cosine and sine transforms on node-centred grids.
//!
//! Conventions (node index `i = 0..=n`, mode index `k`):
//!
//! * `dct1`: `C_k = sum''_i v_i cos(pi i k / n)`, endpoints weighted by 1/2, `k = 0..=n`.
//! * `dst1`: `S_k = sum_i v_i sin(pi i k / n)` over interior nodes `i = 1..n`, `k = 1..n`.
//!
//! Both are evaluated through a length-`2n` complex FFT of the even (odd) extension.
//! The synthesis routines evaluate the plain sums `sum_k c_k cos(pi i k / n)` and
//! `sum_k s_k sin(pi i k / n)` with no normalisation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cached FFT plan for type-I transforms of a fixed size `n` (cells).
#[derive(Clone)]
pub struct Trig1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Trig1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trig1").field("n", &self.n).finish()
    }
}

impl Trig1 {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform size must be positive");
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * n);
        Self { n, fft }
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    /// Forward DCT-I, in place on `n + 1` values.
    pub fn dct1(&self, v: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        debug_assert_eq!(v.len(), n + 1);
        buf.clear();
        buf.resize(2 * n, Complex64::new(0.0, 0.0));
        for i in 0..=n {
            buf[i].re = v[i];
        }
        for i in 1..n {
            buf[2 * n - i].re = v[i];
        }
        self.fft.process(buf);
        for k in 0..=n {
            v[k] = 0.5 * buf[k].re;
        }
    }

    /// Forward DST-I on the interior values `v[1..n]`; `v[0]` and `v[n]` are set to zero.
    pub fn dst1(&self, v: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        debug_assert_eq!(v.len(), n + 1);
        buf.clear();
        buf.resize(2 * n, Complex64::new(0.0, 0.0));
        for i in 1..n {
            buf[i].re = v[i];
            buf[2 * n - i].re = -v[i];
        }
        self.fft.process(buf);
        v[0] = 0.0;
        for k in 1..n {
            v[k] = -0.5 * buf[k].im;
        }
        v[n] = 0.0;
    }

    /// `v_i <- sum_{k=0}^{n} c_k cos(pi i k / n)`.
    pub fn cos_synth(&self, v: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        v[0] *= 2.0;
        v[n] *= 2.0;
        self.dct1(v, buf);
    }

    /// `v_i <- sum_{k=1}^{n-1} s_k sin(pi i k / n)`.
    pub fn sin_synth(&self, v: &mut [f64], buf: &mut Vec<Complex64>) {
        self.dst1(v, buf);
    }
}

/// Which type-I transform to apply along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    CosForward,
    SinForward,
    CosSynth,
    SinSynth,
    /// Leave the axis untouched (degenerate axis of a 1D slab).
    Identity,
}

/// Applies 1D transforms along the axes of a row-major `(nx+1) x (ny+1)` node array.
#[derive(Clone, Debug)]
pub struct Trig2 {
    pub x: Trig1,
    pub y: Option<Trig1>,
}

impl Trig2 {
    pub fn new(nx: usize, ny: Option<usize>) -> Self {
        Self { x: Trig1::new(nx), y: ny.map(Trig1::new) }
    }

    fn nodes_y(&self) -> usize {
        self.y.as_ref().map_or(1, |t| t.cells() + 1)
    }

    /// Data layout: `data[i * nodes_y + j]`.
    pub fn apply(&self, data: &mut [f64], along_x: Kind, along_y: Kind) {
        let nyn = self.nodes_y();
        let nxn = self.x.cells() + 1;
        debug_assert_eq!(data.len(), nxn * nyn);
        let mut buf = Vec::new();
        if along_x != Kind::Identity {
            let mut line = vec![0.0; nxn];
            for j in 0..nyn {
                for i in 0..nxn {
                    line[i] = data[i * nyn + j];
                }
                run(&self.x, along_x, &mut line, &mut buf);
                for i in 0..nxn {
                    data[i * nyn + j] = line[i];
                }
            }
        }
        if along_y != Kind::Identity {
            if let Some(ty) = &self.y {
                for i in 0..nxn {
                    run(ty, along_y, &mut data[i * nyn..(i + 1) * nyn], &mut buf);
                }
            }
        }
    }
}

fn run(t: &Trig1, kind: Kind, line: &mut [f64], buf: &mut Vec<Complex64>) {
    match kind {
        Kind::CosForward => t.dct1(line, buf),
        Kind::SinForward => t.dst1(line, buf),
        Kind::CosSynth => t.cos_synth(line, buf),
        Kind::SinSynth => t.sin_synth(line, buf),
        Kind::Identity => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dct(v: &[f64]) -> Vec<f64> {
        let n = v.len() - 1;
        (0..=n)
            .map(|k| {
                (0..=n)
                    .map(|i| {
                        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                        w * v[i] * (PI * (i * k) as f64 / n as f64).cos()
                    })
                    .sum()
            })
            .collect()
    }

    fn naive_dst(v: &[f64]) -> Vec<f64> {
        let n = v.len() - 1;
        let mut out = vec![0.0; n + 1];
        for k in 1..n {
            out[k] = (1..n).map(|i| v[i] * (PI * (i * k) as f64 / n as f64).sin()).sum();
        }
        out
    }

    #[test]
    fn dct_matches_direct_sum() {
        let v: Vec<f64> = (0..=12).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let t = Trig1::new(12);
        let mut w = v.clone();
        t.dct1(&mut w, &mut Vec::new());
        for (a, b) in w.iter().zip(naive_dct(&v)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dst_matches_direct_sum() {
        let v: Vec<f64> = (0..=10).map(|i| (i as f64 * 0.7).sin() + 0.2).collect();
        let t = Trig1::new(10);
        let mut w = v.clone();
        t.dst1(&mut w, &mut Vec::new());
        for (a, b) in w.iter().zip(naive_dst(&v)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_inverts_forward() {
        let n = 16;
        let t = Trig1::new(n);
        let v: Vec<f64> = (0..=n).map(|i| (i as f64).powi(2) * 0.01 - 0.4).collect();
        let mut w = v.clone();
        let mut buf = Vec::new();
        t.dct1(&mut w, &mut buf);
        // v_i = (2/n) sum''_k C_k cos(.)
        w[0] *= 0.5;
        w[n] *= 0.5;
        t.cos_synth(&mut w, &mut buf);
        for (a, b) in w.iter().zip(&v) {
            assert!((a * 2.0 / n as f64 - b).abs() < 1e-12);
        }

        let mut s = v.clone();
        t.dst1(&mut s, &mut buf);
        t.sin_synth(&mut s, &mut buf);
        for i in 1..n {
            assert!((s[i] * 2.0 / n as f64 - v[i]).abs() < 1e-12);
        }
    }
}
