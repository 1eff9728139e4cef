//! Polar belief propagation on the Arikan factor graph.
//!
//! The grid holds left messages `L` and right messages `R` for every node
//! `(s, j)`, `s ∈ 0..=n`. Stage 0 is the source side: its `R` carries the
//! frozen prior (`+LLR_SAT` for frozen positions, 0 otherwise). Stage `n` is
//! the channel side: its `L` carries the channel LLRs. One iteration is a
//! right pass over stages `0..n` followed by a left pass over `n-1..=0`;
//! both update in place so the left pass sees the `L` values it has just
//! refreshed, and the right pass sees the `L` values of the previous
//! iteration.

use crate::code::PolarCode;
use crate::{saturate, Error, Result, LLR_SAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `2·artanh(tanh(x/2)·tanh(y/2))`.
    Exact,
    /// `sign(x)·sign(y)·min(|x|, |y|)`.
    #[default]
    MinSum,
}

impl Kernel {
    #[inline]
    pub fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Exact => g_exact(x, y),
            Kernel::MinSum => g_minsum(x, y),
        }
    }

    /// Partial derivatives `(∂g/∂x, ∂g/∂y)`. For min-sum the whole gradient
    /// goes to the smaller-magnitude argument, the first one on ties.
    #[inline]
    pub fn grad(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Kernel::Exact => {
                let p = logistic(x + y);
                (p - logistic(x - y), p - logistic(y - x))
            }
            Kernel::MinSum => {
                if x.abs() <= y.abs() {
                    (sign(y), 0.0)
                } else {
                    (0.0, sign(x))
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Exact => "exact",
            Kernel::MinSum => "min-sum",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Kernel::Exact),
            "min-sum" | "minsum" => Ok(Kernel::MinSum),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Exact box-plus in sign-magnitude form:
/// `sign(x)sign(y)·(min(|x|,|y|) + ln(1+e^{−(|x|+|y|)}) − ln(1+e^{−||x|−|y||}))`.
#[inline]
pub fn g_exact(x: f64, y: f64) -> f64 {
    let s = sign(x) * sign(y);
    if s == 0.0 {
        return 0.0;
    }
    let (ax, ay) = (x.abs(), y.abs());
    let min = ax.min(ay);
    let mag = min + (-(ax + ay)).exp().ln_1p() - (-(ax - ay).abs()).exp().ln_1p();
    saturate(s * mag.clamp(0.0, min))
}

#[inline]
pub fn g_minsum(x: f64, y: f64) -> f64 {
    sign(x) * sign(y) * x.abs().min(y.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageGrid {
    stages: usize,
    len: usize,
    l: Vec<f64>,
    r: Vec<f64>,
    iteration: usize,
}

impl MessageGrid {
    /// Initialized grid: channel LLRs on `L` at stage `n`, frozen prior on
    /// `R` at stage 0, zeros elsewhere.
    pub fn new(code: &PolarCode, llr: &[f64]) -> Result<Self> {
        let len = code.len();
        if llr.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: llr.len(),
            });
        }
        let stages = code.stages();
        let mut l = vec![0.0; (stages + 1) * len];
        let mut r = vec![0.0; (stages + 1) * len];
        for (dst, &v) in l[stages * len..].iter_mut().zip(llr) {
            *dst = saturate(v);
        }
        for (j, dst) in r[..len].iter_mut().enumerate() {
            if code.is_frozen(j) {
                *dst = LLR_SAT;
            }
        }
        Ok(Self {
            stages,
            len,
            l,
            r,
            iteration: 0,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn block_len(&self) -> usize {
        self.len
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    #[inline]
    pub fn l(&self, s: usize, j: usize) -> f64 {
        self.l[s * self.len + j]
    }

    #[inline]
    pub fn r(&self, s: usize, j: usize) -> f64 {
        self.r[s * self.len + j]
    }

    /// Left messages of stage `s`.
    pub fn l_row(&self, s: usize) -> &[f64] {
        &self.l[s * self.len..(s + 1) * self.len]
    }

    pub fn r_row(&self, s: usize) -> &[f64] {
        &self.r[s * self.len..(s + 1) * self.len]
    }

    pub(crate) fn raw_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.l, &mut self.r)
    }

    pub(crate) fn bump_iteration(&mut self) {
        self.iteration += 1;
    }

    /// One right pass then one left pass.
    pub fn iterate(&mut self, kernel: Kernel) {
        let len = self.len;
        let (l, r) = (&mut self.l, &mut self.r);
        for s in 0..self.stages {
            let half = len >> (s + 1);
            let (cur, next) = (s * len, (s + 1) * len);
            for start in (0..len).step_by(2 * half) {
                for j in start..start + half {
                    let k = j + half;
                    let up = r[cur + j];
                    let lo = r[cur + k];
                    r[next + j] = saturate(kernel.apply(up, l[next + k] + lo));
                    r[next + k] = saturate(kernel.apply(up, l[next + j]) + lo);
                }
            }
        }
        for s in (0..self.stages).rev() {
            let half = len >> (s + 1);
            let (cur, next) = (s * len, (s + 1) * len);
            for start in (0..len).step_by(2 * half) {
                for j in start..start + half {
                    let k = j + half;
                    let lj = l[next + j];
                    let lk = l[next + k];
                    l[cur + j] = saturate(kernel.apply(lj, lk + r[cur + k]));
                    l[cur + k] = saturate(kernel.apply(r[cur + j], lj) + lk);
                }
            }
        }
        self.iteration += 1;
    }

    /// `û_j = 0` when the stage-0 left message is `≥ 0`, else 1.
    pub fn hard_decision(&self) -> Vec<u8> {
        hard_decision(self.l_row(0))
    }
}

pub fn hard_decision(soft: &[f64]) -> Vec<u8> {
    soft.iter().map(|&v| u8::from(v < 0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    pub bits: Vec<u8>,
    /// Final stage-0 left messages.
    pub soft: Vec<f64>,
}

/// Run `iterations` BP iterations and return the full grid.
pub fn bp_grid(code: &PolarCode, llr: &[f64], iterations: usize, kernel: Kernel) -> Result<MessageGrid> {
    if iterations == 0 {
        return Err(Error::Config("BP needs at least one iteration".into()));
    }
    let mut grid = MessageGrid::new(code, llr)?;
    for _ in 0..iterations {
        grid.iterate(kernel);
    }
    Ok(grid)
}

pub fn bp_decode(code: &PolarCode, llr: &[f64], iterations: usize, kernel: Kernel) -> Result<BpOutput> {
    let grid = bp_grid(code, llr, iterations, kernel)?;
    Ok(BpOutput {
        bits: grid.hard_decision(),
        soft: grid.l_row(0).to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::noiseless_llr;
    use proptest::prelude::*;

    fn full_rate(stages: usize) -> PolarCode {
        PolarCode::from_frozen_mask(vec![false; 1 << stages]).unwrap()
    }

    #[test]
    fn exact_kernel_values() {
        for x in [-7.0, -0.3, 0.0, 2.5, 30.0] {
            assert_eq!(g_exact(x, 0.0), 0.0);
        }
        for y in [-10.0, -3.3, -0.01, 0.0, 0.5, 9.99, 10.0] {
            assert!((g_exact(LLR_SAT, y) - y).abs() < 1e-6);
        }
        // 2·artanh(tanh(1)²) evaluated independently
        assert!((g_exact(2.0, 2.0) - 1.325_002_747_357_864_3).abs() < 1e-12);
    }

    #[test]
    fn exact_kernel_matches_tanh_rule() {
        for &(x, y) in &[(0.7, -1.9), (3.0, 4.0), (-0.2, -0.05), (6.0, -12.0)] {
            let oracle = 2.0 * ((x / 2.0f64).tanh() * (y / 2.0f64).tanh()).atanh();
            assert!((g_exact(x, y) - oracle).abs() < 1e-12, "{x} {y}");
        }
    }

    #[test]
    fn minsum_values() {
        assert_eq!(g_minsum(3.0, -2.0), -2.0);
        assert_eq!(g_minsum(5.0, 0.0), 0.0);
        assert_eq!(g_minsum(-4.0, -5.0), 4.0);
    }

    #[test]
    fn kernel_gradients_match_differences() {
        let h = 1e-6;
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            for &(x, y) in &[(0.7, -1.9), (3.0, 4.5), (-2.2, 0.4)] {
                let (gx, gy) = kernel.grad(x, y);
                let nx = (kernel.apply(x + h, y) - kernel.apply(x - h, y)) / (2.0 * h);
                let ny = (kernel.apply(x, y + h) - kernel.apply(x, y - h)) / (2.0 * h);
                assert!((gx - nx).abs() < 1e-6, "{kernel:?} {x} {y}");
                assert!((gy - ny).abs() < 1e-6, "{kernel:?} {x} {y}");
            }
        }
    }

    #[test]
    fn init_layout() {
        let code = PolarCode::from_frozen_mask(vec![true, false]).unwrap();
        let g = MessageGrid::new(&code, &[1.5, -2.0]).unwrap();
        assert_eq!(g.l_row(1), &[1.5, -2.0]);
        assert_eq!(g.r_row(0), &[LLR_SAT, 0.0]);
        assert_eq!(g.l_row(0), &[0.0, 0.0]);
        assert_eq!(g.r_row(1), &[0.0, 0.0]);

        let g = MessageGrid::new(&full_rate(3), &[0.5; 8]).unwrap();
        assert!(g.r_row(0).iter().all(|&v| v == 0.0));
        let none = PolarCode::from_frozen_mask(vec![true; 8]).unwrap();
        let g = MessageGrid::new(&none, &[0.5; 8]).unwrap();
        assert!(g.r_row(0).iter().all(|&v| v == LLR_SAT));
        assert!(MessageGrid::new(&none, &[0.5; 4]).is_err());
    }

    #[test]
    fn single_iteration_two_bits() {
        let code = full_rate(1);
        let (a, b) = (1.3, -0.4);
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            let out = bp_decode(&code, &[a, b], 1, kernel).unwrap();
            assert_eq!(out.soft[0], kernel.apply(a, b));
            assert_eq!(out.soft[1], b);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let code = PolarCode::bhattacharyya(3, 4).unwrap();
        let g = bp_grid(&code, &[0.0; 8], 3, Kernel::MinSum).unwrap();
        for s in 0..=3 {
            assert!(g.l_row(s).iter().all(|&v| v == 0.0));
        }
        assert_eq!(g.r_row(0), MessageGrid::new(&code, &[0.0; 8]).unwrap().r_row(0));
    }

    #[test]
    fn hard_decision_boundary() {
        assert_eq!(hard_decision(&[0.1, -0.1]), vec![0, 1]);
        assert_eq!(hard_decision(&[0.0, 0.0]), vec![0, 0]);
        assert_eq!(hard_decision(&[-0.0]), vec![0]);
    }

    #[test]
    fn needs_an_iteration() {
        assert!(bp_decode(&full_rate(2), &[1.0; 4], 0, Kernel::MinSum).is_err());
    }

    #[test]
    fn noiseless_full_rate_four_recovers_every_word() {
        let code = full_rate(2);
        for kernel in [Kernel::Exact, Kernel::MinSum] {
            for m in 0..16u8 {
                let u: Vec<u8> = (0..4).map(|b| (m >> b) & 1).collect();
                let x = code.encode(&u).unwrap();
                let out = bp_decode(&code, &noiseless_llr(&x), 5, kernel).unwrap();
                assert_eq!(out.bits, u, "{kernel:?} {u:?}");
            }
        }
    }

    #[test]
    fn noiseless_zero_codeword_decodes_to_zero() {
        for (n, k) in [(3, 4), (5, 16), (7, 64)] {
            let code = PolarCode::bhattacharyya(n, k).unwrap();
            let out = bp_decode(&code, &vec![LLR_SAT; 1 << n], 5, Kernel::Exact).unwrap();
            assert!(out.bits.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn messages_stay_saturated() {
        let code = PolarCode::bhattacharyya(4, 8).unwrap();
        let llr: Vec<f64> = (0..16).map(|j| if j % 3 == 0 { -29.0 } else { 28.5 }).collect();
        let g = bp_grid(&code, &llr, 6, Kernel::MinSum).unwrap();
        for s in 0..=4 {
            assert!(g.l_row(s).iter().chain(g.r_row(s)).all(|v| v.abs() <= LLR_SAT));
        }
    }

    proptest! {
        #[test]
        fn kernels_symmetric(x in -40.0f64..40.0, y in -40.0f64..40.0) {
            prop_assert_eq!(g_exact(x, y), g_exact(y, x));
            prop_assert_eq!(g_minsum(x, y), g_minsum(y, x));
        }

        #[test]
        fn exact_bounded_by_minsum(x in -30.0f64..30.0, y in -30.0f64..30.0) {
            let e = g_exact(x, y);
            let m = g_minsum(x, y);
            prop_assert!(e.abs() <= m.abs());
            prop_assert_eq!(m.abs(), x.abs().min(y.abs()));
            if x != 0.0 && y != 0.0 && e != 0.0 {
                prop_assert_eq!(sign(e), sign(x) * sign(y));
            }
        }

        #[test]
        fn kernels_sign_equivariant(x in -30.0f64..30.0, y in -30.0f64..30.0, sx in prop::bool::ANY, sy in prop::bool::ANY) {
            let fx = if sx { -1.0 } else { 1.0 };
            let fy = if sy { -1.0 } else { 1.0 };
            for k in [Kernel::Exact, Kernel::MinSum] {
                prop_assert_eq!(k.apply(fx * x, fy * y), fx * fy * k.apply(x, y));
            }
        }
    }
}
