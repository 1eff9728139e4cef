//! Small dense tanh networks without bias terms.
//!
//! Weights live in a flat slice, layer-major and row-major inside each
//! layer: layer `l` is a `widths[l+1] × widths[l]` matrix whose row `o`
//! holds the weights feeding output neuron `o`. Hidden layers use tanh, the
//! last layer is linear. Optional gates (one per neuron of every layer,
//! layer-major) multiply each layer's activations.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!(
                "network widths {widths:?} need at least two positive entries"
            )));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// `Σ widths[l]·widths[l+1]`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// One gate per neuron of every layer.
    pub fn gate_count(&self) -> usize {
        self.widths[1..].iter().sum()
    }

    fn check(&self, params: &[f64], gates: Option<&[f64]>, input: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                what: "network parameters",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        if let Some(g) = gates {
            if g.len() != self.gate_count() {
                return Err(Error::Dimension {
                    what: "network gates",
                    expected: self.gate_count(),
                    actual: g.len(),
                });
            }
        }
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Forward pass recording a tape. The returned slice is the output.
    pub fn forward<'t>(
        &self,
        params: &[f64],
        gates: Option<&[f64]>,
        input: &[f64],
        tape: &'t mut Tape,
    ) -> Result<&'t [f64]> {
        self.check(params, gates, input)?;
        Ok(self.forward_unchecked(params, gates, input, tape))
    }

    pub(crate) fn forward_unchecked<'t>(
        &self,
        params: &[f64],
        gates: Option<&[f64]>,
        input: &[f64],
        tape: &'t mut Tape,
    ) -> &'t [f64] {
        let layers = self.layers();
        let total: usize = self.widths.iter().sum();
        tape.values.resize(total, 0.0);
        tape.acts.resize(if gates.is_some() { total - self.widths[0] } else { 0 }, 0.0);
        tape.gated = gates.is_some();
        tape.out_len = self.output_dim();
        tape.values[..self.widths[0]].copy_from_slice(input);
        let (mut w_off, mut v_off, mut g_off) = (0, 0, 0);
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &params[w_off..w_off + n_in * n_out];
            let (head, tail) = tape.values.split_at_mut(v_off + n_in);
            let x = &head[v_off..];
            let out = &mut tail[..n_out];
            let last = l + 1 == layers;
            for (o, row) in out.iter_mut().zip(w.chunks_exact(n_in)) {
                let z = dot(row, x);
                *o = if last { z } else { tanh(z) };
            }
            if let Some(g) = gates {
                tape.acts[g_off..g_off + n_out].copy_from_slice(out);
                for (o, g) in out.iter_mut().zip(&g[g_off..g_off + n_out]) {
                    *o *= g;
                }
            }
            w_off += n_in * n_out;
            v_off += n_in;
            g_off += n_out;
        }
        &tape.values[v_off..]
    }

    /// Weights re-laid per layer as `widths[l] × widths[l+1]` (input-major)
    /// for [`MlpSpec::forward_cols`].
    pub fn transpose_params(&self, params: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; params.len()];
        let mut off = 0;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            for o in 0..n_out {
                for i in 0..n_in {
                    out[off + i * n_out + o] = params[off + o * n_in + i];
                }
            }
            off += n_in * n_out;
        }
        out
    }

    /// Ungated forward pass on transposed weights. Bit-identical to
    /// [`MlpSpec::forward`] on the original layout, and vectorizes.
    pub(crate) fn forward_cols<'t>(&self, params_t: &[f64], input: &[f64], tape: &'t mut Tape) -> &'t [f64] {
        let layers = self.layers();
        let total: usize = self.widths.iter().sum();
        tape.values.resize(total, 0.0);
        tape.acts.clear();
        tape.gated = false;
        tape.out_len = self.output_dim();
        tape.values[..self.widths[0]].copy_from_slice(input);
        let (mut w_off, mut v_off) = (0, 0);
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &params_t[w_off..w_off + n_in * n_out];
            let (head, tail) = tape.values.split_at_mut(v_off + n_in);
            let x = &head[v_off..];
            let out = &mut tail[..n_out];
            // blocks of outputs kept in registers, inputs summed in order
            let mut o0 = 0;
            while o0 + 8 <= n_out {
                let mut acc = [0.0; 8];
                for (i, xi) in x.iter().enumerate() {
                    let c = &w[i * n_out + o0..i * n_out + o0 + 8];
                    for k in 0..8 {
                        acc[k] += c[k] * xi;
                    }
                }
                out[o0..o0 + 8].copy_from_slice(&acc);
                o0 += 8;
            }
            for o in o0..n_out {
                let mut acc = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    acc += w[i * n_out + o] * xi;
                }
                out[o] = acc;
            }
            if l + 1 != layers {
                out.iter_mut().for_each(|v| *v = tanh(*v));
            }
            w_off += n_in * n_out;
            v_off += n_in;
        }
        &tape.values[v_off..]
    }

    /// Reverse pass. `grads` is resized to this network and overwritten.
    pub fn backward(
        &self,
        params: &[f64],
        gates: Option<&[f64]>,
        tape: &Tape,
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension {
                what: "upstream gradient",
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        if tape.values.len() != self.widths.iter().sum::<usize>() || tape.gated != gates.is_some() {
            return Err(Error::Config("tape does not match this network".into()));
        }
        grads.reset(self);
        self.backward_accumulate(params, gates, tape.view(), upstream, 1.0, grads);
        Ok(())
    }

    /// Adds `scale ×` the gradients into `grads` without clearing it. The
    /// input gradient is overwritten.
    pub(crate) fn backward_accumulate(
        &self,
        params: &[f64],
        gates: Option<&[f64]>,
        tape: TapeView<'_>,
        upstream: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) {
        let layers = self.layers();
        let Gradients { params: gp, gates: gg, input, delta, next } = grads;
        delta.clear();
        delta.extend(upstream.iter().map(|u| u * scale));
        let mut w_off = self.param_count();
        let mut g_off = self.gate_count();
        let mut v_off = tape.values.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            w_off -= n_in * n_out;
            g_off -= n_out;
            v_off -= n_out;
            // post-activation, pre-gate values
            let act = match gates {
                Some(_) => &tape.acts[g_off..g_off + n_out],
                None => &tape.values[v_off..v_off + n_out],
            };
            if let Some(g) = gates {
                let g = &g[g_off..g_off + n_out];
                for o in 0..n_out {
                    gg[g_off + o] += delta[o] * act[o];
                    delta[o] *= g[o];
                }
            }
            if l + 1 != layers {
                for o in 0..n_out {
                    delta[o] *= 1.0 - act[o] * act[o];
                }
            }
            let x = &tape.values[v_off - n_in..v_off];
            let w = &params[w_off..w_off + n_in * n_out];
            let gw = &mut gp[w_off..w_off + n_in * n_out];
            next.clear();
            next.resize(n_in, 0.0);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * x[i];
                    next[i] += d * row[i];
                }
            }
            std::mem::swap(delta, next);
        }
        input.clear();
        input.extend_from_slice(delta);
    }
}

/// Sequential dot product; same summation order as [`MlpSpec::forward_cols`].
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut z = 0.0;
    for (x, y) in a.iter().zip(b) {
        z += x * y;
    }
    z
}

/// `tanh` through one `exp`, odd by construction. Absolute error stays
/// within a few `f64::EPSILON` of `f64::tanh`; about twice as fast.
#[inline]
pub(crate) fn tanh(z: f64) -> f64 {
    let a = z.abs();
    if a > 20.0 {
        return 1f64.copysign(z);
    }
    (1.0 - 2.0 / ((2.0 * a).exp() + 1.0)).copysign(z)
}

/// Activations recorded by a forward pass, flat over layers.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    /// Input followed by the (gated) output of every layer.
    values: Vec<f64>,
    /// Pre-gate outputs of every layer; empty for ungated passes.
    acts: Vec<f64>,
    gated: bool,
    out_len: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn output(&self) -> &[f64] {
        &self.values[self.values.len() - self.out_len..]
    }

    pub(crate) fn view(&self) -> TapeView<'_> {
        TapeView { values: &self.values, acts: &self.acts }
    }
}

/// Borrowed tape contents, possibly stored outside a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct TapeView<'a> {
    pub values: &'a [f64],
    pub acts: &'a [f64],
}

#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub gates: Vec<f64>,
    pub input: Vec<f64>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl PartialEq for Gradients {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.gates == other.gates && self.input == other.input
    }
}

impl Gradients {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let mut g = Self::default();
        g.reset(spec);
        g
    }

    pub(crate) fn reset(&mut self, spec: &MlpSpec) {
        self.params.clear();
        self.params.resize(spec.param_count(), 0.0);
        self.gates.clear();
        self.gates.resize(spec.gate_count(), 0.0);
        self.input.clear();
        self.input.resize(spec.input_dim(), 0.0);
    }
}

/// Relative error used by gradient checks: `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between reverse-mode gradients of `Σ outputs` and
/// central differences with step `epsilon`, over every parameter, gate and
/// input coordinate.
pub fn grad_check(
    spec: &MlpSpec,
    params: &[f64],
    gates: Option<&[f64]>,
    input: &[f64],
    epsilon: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    spec.forward(params, gates, input, &mut tape)?;
    let upstream = vec![1.0; spec.output_dim()];
    let mut grads = Gradients::default();
    spec.backward(params, gates, &tape, &upstream, &mut grads)?;

    let objective = |p: &[f64], g: Option<&[f64]>, x: &[f64]| -> f64 {
        let mut t = Tape::new();
        spec.forward_unchecked(p, g, x, &mut t).iter().sum()
    };
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + epsilon;
        let plus = objective(&p, gates, input);
        p[i] = orig - epsilon;
        let minus = objective(&p, gates, input);
        p[i] = orig;
        worst = worst.max(relative_error(grads.params[i], (plus - minus) / (2.0 * epsilon)));
    }
    if let Some(gates) = gates {
        let mut g = gates.to_vec();
        for i in 0..g.len() {
            let orig = g[i];
            g[i] = orig + epsilon;
            let plus = objective(params, Some(&g), input);
            g[i] = orig - epsilon;
            let minus = objective(params, Some(&g), input);
            g[i] = orig;
            worst = worst.max(relative_error(grads.gates[i], (plus - minus) / (2.0 * epsilon)));
        }
    }
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + epsilon;
        let plus = objective(params, gates, &x);
        x[i] = orig - epsilon;
        let minus = objective(params, gates, &x);
        x[i] = orig;
        worst = worst.max(relative_error(grads.input[i], (plus - minus) / (2.0 * epsilon)));
    }
    Ok(worst)
}
