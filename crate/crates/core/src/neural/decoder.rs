//! Unrolled weighted / hypernetwork BP with exact reverse-mode gradients.
//!
//! Every message update has the shape
//!
//! ```text
//! out = sat( (1−c)·h(x, y) + c·(w·g(x, y)) + extra )
//! ```
//!
//! where `g` is the BP kernel, `w` the per-iteration edge weight (α for left
//! messages, β for right messages) and `extra` the unweighted pass-through
//! term of the lower butterfly branch. Weighted BP is the case without the
//! `h` path (`out = sat(w·g + extra)`). `h` gets its weights and gates from
//! `f(|x|, |y|)`, so the update is sign-equivariant in `x` and `y`.
//!
//! The schedule is the one of [`crate::bp`], which makes `α = β = 1` (and
//! `c = 1`) reproduce plain BP bit for bit.

use crate::bp::{logistic, sign, Kernel, MessageGrid};
use crate::code::PolarCode;
use crate::nnet::{Gradients, MlpSpec, TapeView};
use crate::{saturate, Error, Result, LLR_SAT};

use super::params::{eval_f, f_spec, h_spec, HyperParams, HyperScratch, WbpParams, F_OUT, THETA_LEN};

/// Lower bound of the output probability clamp before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Parameters of either learned decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnedParams {
    Wbp(WbpParams),
    Hyper(HyperParams),
}

impl LearnedParams {
    pub fn wbp(&self) -> &WbpParams {
        match self {
            LearnedParams::Wbp(w) => w,
            LearnedParams::Hyper(h) => &h.wbp,
        }
    }

    pub fn iterations(&self) -> usize {
        self.wbp().iterations()
    }

    /// Length of the flat parameter vector: `[α | β | f | c]` (no `f`, `c`
    /// for weighted BP).
    pub fn flat_len(&self) -> usize {
        let w = self.wbp().weight_count();
        match self {
            LearnedParams::Wbp(_) => 2 * w,
            LearnedParams::Hyper(h) => 2 * w + h.f_weights.len() + 1,
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        let w = self.wbp();
        out.extend_from_slice(&w.alpha);
        out.extend_from_slice(&w.beta);
        if let LearnedParams::Hyper(h) = self {
            out.extend_from_slice(&h.f_weights);
            out.push(h.c);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::Dimension {
                what: "flat parameters",
                expected: self.flat_len(),
                actual: flat.len(),
            });
        }
        let (wbp, rest) = match self {
            LearnedParams::Wbp(w) => (w, None),
            LearnedParams::Hyper(h) => (&mut h.wbp, Some((&mut h.f_weights, &mut h.c))),
        };
        let n = wbp.weight_count();
        wbp.alpha.copy_from_slice(&flat[..n]);
        wbp.beta.copy_from_slice(&flat[n..2 * n]);
        if let Some((f, c)) = rest {
            let m = f.len();
            f.copy_from_slice(&flat[2 * n..2 * n + m]);
            *c = flat[2 * n + m];
        }
        Ok(())
    }

    /// Index of `c` inside the flat vector, if any.
    pub fn c_index(&self) -> Option<usize> {
        match self {
            LearnedParams::Wbp(_) => None,
            LearnedParams::Hyper(_) => Some(self.flat_len() - 1),
        }
    }

    /// Range of the `f` weights inside the flat vector, if any.
    pub fn f_range(&self) -> Option<std::ops::Range<usize>> {
        match self {
            LearnedParams::Wbp(_) => None,
            LearnedParams::Hyper(h) => {
                let start = 2 * self.wbp().weight_count();
                Some(start..start + h.f_weights.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralOutput {
    pub bits: Vec<u8>,
    /// Final stage-0 left messages.
    pub soft: Vec<f64>,
    /// Soft outputs, see [`output_probs`].
    pub probs: Vec<f64>,
}

/// Soft outputs `o_j = logistic(−L_j)`: the estimated probability that
/// `u_j = 1` under the convention that a positive LLR favours 0. `L_j = 0`
/// gives `o_j = 0.5`.
pub fn output_probs(soft: &[f64]) -> Vec<f64> {
    soft.iter().map(|&l| logistic(-l)).collect()
}

/// Binary cross-entropy `−(1/N)·Σ [u_j ln o_j + (1−u_j) ln(1−o_j)]` over all
/// `N` positions, frozen ones included. `o` is clamped to
/// `[PROB_EPS, 1 − PROB_EPS]`.
pub fn bce_loss(probs: &[f64], u: &[u8]) -> Result<f64> {
    if probs.len() != u.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            actual: probs.len(),
        });
    }
    let n = probs.len() as f64;
    let sum: f64 = probs
        .iter()
        .zip(u)
        .map(|(&o, &b)| {
            let o = o.clamp(PROB_EPS, 1.0 - PROB_EPS);
            if b & 1 == 1 {
                o.ln()
            } else {
                (1.0 - o).ln()
            }
        })
        .sum();
    Ok(-sum / n)
}

/// `∂loss/∂o_j` of [`bce_loss`]; zero where the clamp is active.
pub fn bce_grad(probs: &[f64], u: &[u8]) -> Vec<f64> {
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(u)
        .map(|(&o, &b)| {
            if !(PROB_EPS..=1.0 - PROB_EPS).contains(&o) {
                0.0
            } else if b & 1 == 1 {
                -1.0 / (o * n)
            } else {
                1.0 / ((1.0 - o) * n)
            }
        })
        .collect()
}

/// Values recorded per message update for the reverse pass.
#[derive(Debug, Clone, Copy, Default)]
struct OpRecord {
    x: f64,
    y: f64,
    /// Output saturated (zero local gradient).
    clamped: bool,
    /// `h` output saturated.
    h_clamped: bool,
    /// Offset of the stored `f`/`h` tapes in [`DecodeRecord::tapes`], or
    /// `NO_TAPE` when `h` was not evaluated.
    tape: usize,
}

const NO_TAPE: usize = usize::MAX;

/// Forward record of one decode, consumed by [`Decoder::backward`].
#[derive(Debug, Clone, Default)]
pub struct DecodeRecord {
    ops: Vec<OpRecord>,
    /// Per evaluated `h`: `f` values, `h` values, `h` pre-gate values, gates.
    tapes: Vec<f64>,
    soft: Vec<f64>,
}

impl DecodeRecord {
    pub fn soft(&self) -> &[f64] {
        &self.soft
    }
}

/// Which message an update writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    L(usize),
    R(usize),
}

/// Reference to one update in schedule order with its slots.
#[derive(Debug, Clone, Copy)]
struct Update {
    out: Slot,
    x: Slot,
    y: (Slot, Slot),
    /// `y` is a single message (second element unused).
    y_single: bool,
    extra: Option<Slot>,
    /// Index into α (left) or β (right).
    weight: usize,
    left: bool,
}

/// Enumerate the updates of iteration `t` in forward order.
fn schedule(w: &WbpParams, t: usize, mut visit: impl FnMut(Update)) {
    let (stages, len) = (w.stages(), w.block_len());
    for s in 0..stages {
        let half = len >> (s + 1);
        let (cur, next) = (s * len, (s + 1) * len);
        for start in (0..len).step_by(2 * half) {
            for j in start..start + half {
                let k = j + half;
                visit(Update {
                    out: Slot::R(next + j),
                    x: Slot::R(cur + j),
                    y: (Slot::L(next + k), Slot::R(cur + k)),
                    y_single: false,
                    extra: None,
                    weight: w.index(t, s, j),
                    left: false,
                });
                visit(Update {
                    out: Slot::R(next + k),
                    x: Slot::R(cur + j),
                    y: (Slot::L(next + j), Slot::L(next + j)),
                    y_single: true,
                    extra: Some(Slot::R(cur + k)),
                    weight: w.index(t, s, k),
                    left: false,
                });
            }
        }
    }
    for s in (0..stages).rev() {
        let half = len >> (s + 1);
        let (cur, next) = (s * len, (s + 1) * len);
        for start in (0..len).step_by(2 * half) {
            for j in start..start + half {
                let k = j + half;
                visit(Update {
                    out: Slot::L(cur + j),
                    x: Slot::L(next + j),
                    y: (Slot::L(next + k), Slot::R(cur + k)),
                    y_single: false,
                    extra: None,
                    weight: w.index(t, s, j),
                    left: true,
                });
                visit(Update {
                    out: Slot::L(cur + k),
                    x: Slot::R(cur + j),
                    y: (Slot::L(next + j), Slot::L(next + j)),
                    y_single: true,
                    extra: Some(Slot::L(next + k)),
                    weight: w.index(t, s, k),
                    left: true,
                });
            }
        }
    }
}

#[inline]
fn read(l: &[f64], r: &[f64], slot: Slot) -> f64 {
    match slot {
        Slot::L(i) => l[i],
        Slot::R(i) => r[i],
    }
}

#[inline]
fn slot_mut<'a>(l: &'a mut [f64], r: &'a mut [f64], slot: Slot) -> &'a mut f64 {
    match slot {
        Slot::L(i) => &mut l[i],
        Slot::R(i) => &mut r[i],
    }
}

/// Gradients of a scalar loss with respect to the decoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub f_weights: Vec<f64>,
    pub c: f64,
}

impl ParamGrads {
    /// Same layout as [`LearnedParams::to_flat`].
    pub fn to_flat(&self, hyper: bool) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.alpha);
        out.extend_from_slice(&self.beta);
        if hyper {
            out.extend_from_slice(&self.f_weights);
            out.push(self.c);
        }
        out
    }
}

/// A learned decoder bound to a code, kernel and parameters.
pub struct Decoder<'a> {
    code: &'a PolarCode,
    kernel: Kernel,
    params: &'a LearnedParams,
    f: MlpSpec,
    h: MlpSpec,
    /// `f` weights in the layout of [`MlpSpec::forward_cols`].
    f_t: Vec<f64>,
}

impl<'a> Decoder<'a> {
    pub fn new(code: &'a PolarCode, kernel: Kernel, params: &'a LearnedParams) -> Result<Self> {
        params.wbp().check_code(code)?;
        if params.iterations() == 0 {
            return Err(Error::Config("decoder needs at least one iteration".into()));
        }
        let f = f_spec();
        let f_t = match params {
            LearnedParams::Hyper(h) => {
                h.check()?;
                f.transpose_params(&h.f_weights)
            }
            LearnedParams::Wbp(_) => Vec::new(),
        };
        Ok(Self {
            code,
            kernel,
            params,
            f,
            h: h_spec(),
            f_t,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn decode(&self, llr: &[f64]) -> Result<NeuralOutput> {
        let grid = self.run(llr, None)?;
        let soft = grid.l_row(0).to_vec();
        Ok(NeuralOutput {
            bits: grid.hard_decision(),
            probs: output_probs(&soft),
            soft,
        })
    }

    /// Decode and return the whole message grid.
    pub fn decode_grid(&self, llr: &[f64]) -> Result<MessageGrid> {
        self.run(llr, None)
    }

    /// Decode while recording what the reverse pass needs.
    pub fn decode_recorded(&self, llr: &[f64]) -> Result<(NeuralOutput, DecodeRecord)> {
        let mut record = DecodeRecord::default();
        let grid = self.run(llr, Some(&mut record))?;
        let soft = grid.l_row(0).to_vec();
        record.soft = soft.clone();
        Ok((
            NeuralOutput {
                bits: grid.hard_decision(),
                probs: output_probs(&soft),
                soft,
            },
            record,
        ))
    }

    fn run(&self, llr: &[f64], mut record: Option<&mut DecodeRecord>) -> Result<MessageGrid> {
        let mut grid = MessageGrid::new(self.code, llr)?;
        let w = self.params.wbp();
        let hyper = match self.params {
            LearnedParams::Hyper(h) => Some(h),
            LearnedParams::Wbp(_) => None,
        };
        let mut scratch = HyperScratch::default();
        if let Some(rec) = record.as_deref_mut() {
            rec.ops.clear();
            rec.tapes.clear();
            rec.ops.reserve(w.iterations() * 2 * w.stages() * w.block_len());
        }
        for t in 0..w.iterations() {
            let (l, r) = grid.raw_mut();
            schedule(w, t, |u| {
                let x = read(l, r, u.x);
                let y = if u.y_single {
                    read(l, r, u.y.0)
                } else {
                    read(l, r, u.y.0) + read(l, r, u.y.1)
                };
                let weight = if u.left { w.alpha[u.weight] } else { w.beta[u.weight] };
                let g = self.kernel.apply(x, y);
                let mut h_clamped = false;
                let mut tape = NO_TAPE;
                let mut v = match hyper {
                    None => weight * g,
                    Some(hp) => {
                        let (h, hc) = self.eval_h(hp, x, y, &mut scratch);
                        h_clamped = hc;
                        if let (Some(rec), true) = (record.as_deref_mut(), sign(x) * sign(y) != 0.0) {
                            tape = rec.tapes.len();
                            let (f, hv) = (scratch.f_tape.view(), scratch.h_tape.view());
                            rec.tapes.extend_from_slice(f.values);
                            rec.tapes.extend_from_slice(hv.values);
                            rec.tapes.extend_from_slice(hv.acts);
                            rec.tapes.extend_from_slice(&scratch.gates);
                        }
                        (1.0 - hp.c) * h + hp.c * (weight * g)
                    }
                };
                if let Some(e) = u.extra {
                    v += read(l, r, e);
                }
                let out = saturate(v);
                if let Some(rec) = record.as_deref_mut() {
                    rec.ops.push(OpRecord {
                        x,
                        y,
                        clamped: v.abs() > LLR_SAT,
                        h_clamped,
                        tape,
                    });
                }
                *slot_mut(l, r, u.out) = out;
            });
            grid.bump_iteration();
        }
        Ok(grid)
    }

    /// `h(x, y)` with weights from `f(|x|, |y|)`; second value reports
    /// saturation.
    #[inline]
    fn eval_h(&self, hp: &HyperParams, x: f64, y: f64, scratch: &mut HyperScratch) -> (f64, bool) {
        let s = sign(x) * sign(y);
        if s == 0.0 {
            return (0.0, false);
        }
        let (a, b) = (x.abs(), y.abs());
        eval_f(&self.f, &self.f_t, hp.gating, a, b, scratch);
        let theta = &scratch.f_tape.output()[..THETA_LEN];
        let z = self
            .h
            .forward_unchecked(theta, Some(&scratch.gates), &[a, b], &mut scratch.h_tape)[0];
        let h = s * z;
        (saturate(h), h.abs() > LLR_SAT)
    }

    fn f_values_len(&self) -> usize {
        self.f.widths().iter().sum()
    }

    fn h_values_len(&self) -> usize {
        self.h.widths().iter().sum()
    }

    /// Stored floats per evaluated `h`.
    fn tape_len(&self) -> usize {
        self.f_values_len() + 2 * self.h_values_len() - 2 + self.h.gate_count()
    }

    /// Reverse pass. `d_probs` is `∂loss/∂o` for the outputs
    /// `o = logistic(−L)` of the recorded decode.
    pub fn backward(&self, record: &DecodeRecord, d_probs: &[f64]) -> Result<ParamGrads> {
        let len = self.code.len();
        if d_probs.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: d_probs.len(),
            });
        }
        let w = self.params.wbp();
        let expected_ops = w.iterations() * 2 * w.stages() * len;
        if record.ops.len() != expected_ops || record.soft.len() != len {
            return Err(Error::Config("decode record does not match this decoder".into()));
        }
        let hyper = match self.params {
            LearnedParams::Hyper(h) => Some(h),
            LearnedParams::Wbp(_) => None,
        };
        let stages = w.stages();
        let mut adj_l = vec![0.0; (stages + 1) * len];
        let mut adj_r = vec![0.0; (stages + 1) * len];
        for j in 0..len {
            // o = logistic(−L)
            let o = logistic(-record.soft[j]);
            adj_l[j] = -d_probs[j] * o * (1.0 - o);
        }
        let mut grads = ParamGrads {
            alpha: vec![0.0; w.weight_count()],
            beta: vec![0.0; w.weight_count()],
            f_weights: vec![0.0; hyper.map_or(0, |h| h.f_weights.len())],
            c: 0.0,
        };
        let mut f_grads = Gradients::zeros(&self.f);
        let mut h_grads = Gradients::zeros(&self.h);
        let mut f_up = vec![0.0; F_OUT];

        let mut op_index = record.ops.len();
        for t in (0..w.iterations()).rev() {
            let mut updates = Vec::with_capacity(2 * stages * len);
            schedule(w, t, |u| updates.push(u));
            for u in updates.into_iter().rev() {
                op_index -= 1;
                let op = record.ops[op_index];
                let slot = slot_mut(&mut adj_l, &mut adj_r, u.out);
                let d = *slot;
                *slot = 0.0;
                if op.clamped || d == 0.0 {
                    continue;
                }
                let (x, y) = (op.x, op.y);
                let weight = if u.left { w.alpha[u.weight] } else { w.beta[u.weight] };
                let g = self.kernel.apply(x, y);
                let (gx, gy) = self.kernel.grad(x, y);
                let (mut dx, mut dy);
                match hyper {
                    None => {
                        let dw = d * g;
                        if u.left {
                            grads.alpha[u.weight] += dw;
                        } else {
                            grads.beta[u.weight] += dw;
                        }
                        dx = d * weight * gx;
                        dy = d * weight * gy;
                    }
                    Some(hp) => {
                        let c = hp.c;
                        let dw = d * c * g;
                        if u.left {
                            grads.alpha[u.weight] += dw;
                        } else {
                            grads.beta[u.weight] += dw;
                        }
                        dx = d * c * weight * gx;
                        dy = d * c * weight * gy;
                        if op.tape != NO_TAPE {
                            let (sx, sy) = (sign(x), sign(y));
                            let t = &record.tapes[op.tape..op.tape + self.tape_len()];
                            let (f_values, rest) = t.split_at(self.f_values_len());
                            let (h_values, rest) = rest.split_at(self.h_values_len());
                            let (h_acts, gates) = rest.split_at(self.h_values_len() - 2);
                            let h = saturate(sx * sy * h_values[h_values.len() - 1]);
                            grads.c += d * (weight * g - h);
                            if !op.h_clamped {
                                // h = sx·sy·net(a, b); upstream into net
                                let dz = d * (1.0 - c) * sx * sy;
                                let theta = &f_values[f_values.len() - F_OUT..][..THETA_LEN];
                                h_grads.reset(&self.h);
                                self.h.backward_accumulate(
                                    theta,
                                    Some(gates),
                                    TapeView { values: h_values, acts: h_acts },
                                    &[dz],
                                    1.0,
                                    &mut h_grads,
                                );
                                f_up[..THETA_LEN].copy_from_slice(&h_grads.params);
                                if hp.gating {
                                    for (k, up) in f_up[THETA_LEN..].iter_mut().enumerate() {
                                        let gate = gates[k];
                                        *up = h_grads.gates[k] * gate * (1.0 - gate);
                                    }
                                } else {
                                    f_up[THETA_LEN..].iter_mut().for_each(|v| *v = 0.0);
                                }
                                self.f.backward_accumulate(
                                    &hp.f_weights,
                                    None,
                                    TapeView { values: f_values, acts: &[] },
                                    &f_up,
                                    1.0,
                                    &mut f_grads,
                                );
                                let da = h_grads.input[0] + f_grads.input[0];
                                let db = h_grads.input[1] + f_grads.input[1];
                                dx += sx * da;
                                dy += sy * db;
                            }
                        } else {
                            grads.c += d * weight * g;
                        }
                    }
                }
                *slot_mut(&mut adj_l, &mut adj_r, u.x) += dx;
                *slot_mut(&mut adj_l, &mut adj_r, u.y.0) += dy;
                if !u.y_single {
                    *slot_mut(&mut adj_l, &mut adj_r, u.y.1) += dy;
                }
                if let Some(e) = u.extra {
                    *slot_mut(&mut adj_l, &mut adj_r, e) += d;
                }
            }
        }
        if hyper.is_some() {
            grads.f_weights.copy_from_slice(&f_grads.params);
        }
        Ok(grads)
    }
}
