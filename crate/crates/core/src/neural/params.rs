use crate::bp::logistic;
use crate::code::PolarCode;
use crate::nnet::{MlpSpec, Tape};
use crate::rng::{Purpose, SimRng};
use crate::{Error, Result};

/// Neurons per hidden layer of both networks.
pub const HIDDEN: usize = 16;
/// Weights of `h`: `2·16 + 16·1`.
pub const THETA_LEN: usize = 2 * HIDDEN + HIDDEN;
/// Gates of `h`: one per hidden neuron plus one for the output.
pub const GATE_LEN: usize = HIDDEN + 1;
/// Output width of `f`.
pub const F_OUT: usize = THETA_LEN + GATE_LEN;

/// Layer widths of the weight-generating network `f`.
pub fn f_spec() -> MlpSpec {
    MlpSpec::new(vec![2, HIDDEN, HIDDEN, HIDDEN, F_OUT]).expect("static widths")
}

/// Layer widths of the message network `h`.
pub fn h_spec() -> MlpSpec {
    MlpSpec::new(vec![2, HIDDEN, 1]).expect("static widths")
}

/// Per-iteration edge weights. `alpha[t][s][j]` scales the kernel output of
/// the left message `L(s, j)` written in iteration `t`; `beta[t][s][j]` the
/// right message `R(s + 1, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WbpParams {
    iterations: usize,
    stages: usize,
    len: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl WbpParams {
    /// All weights 1: plain BP.
    pub fn ones(code: &PolarCode, iterations: usize) -> Self {
        Self::filled(code, iterations, 1.0)
    }

    pub fn filled(code: &PolarCode, iterations: usize, value: f64) -> Self {
        let size = iterations * code.stages() * code.len();
        Self {
            iterations,
            stages: code.stages(),
            len: code.len(),
            alpha: vec![value; size],
            beta: vec![value; size],
        }
    }

    pub fn from_parts(
        iterations: usize,
        stages: usize,
        len: usize,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let size = iterations * stages * len;
        for (what, v) in [("alpha", &alpha), ("beta", &beta)] {
            if v.len() != size {
                return Err(Error::Dimension {
                    what,
                    expected: size,
                    actual: v.len(),
                });
            }
        }
        Ok(Self {
            iterations,
            stages,
            len,
            alpha,
            beta,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn block_len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn index(&self, t: usize, s: usize, j: usize) -> usize {
        (t * self.stages + s) * self.len + j
    }

    pub fn weight_count(&self) -> usize {
        self.alpha.len()
    }

    pub(crate) fn check_code(&self, code: &PolarCode) -> Result<()> {
        if self.stages != code.stages() || self.len != code.len() {
            return Err(Error::Dimension {
                what: "edge weights block length",
                expected: code.len(),
                actual: self.len,
            });
        }
        Ok(())
    }
}

/// Parameters of the hypernetwork decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub wbp: WbpParams,
    /// Flat weights of `f`, layout of [`MlpSpec`].
    pub f_weights: Vec<f64>,
    /// Damping between the `h` path and the weighted kernel path.
    pub c: f64,
    /// When false all gates are 1 and the gate outputs of `f` are unused.
    pub gating: bool,
}

impl HyperParams {
    /// `α = β = 1`, `f` uniform in `[−0.1, 0.1]`, `c` uniform in `[0, 1]`.
    pub fn init(code: &PolarCode, iterations: usize, seed: u64) -> Self {
        let mut rng = SimRng::new(seed, Purpose::Init, 0, 0);
        let f_weights = (0..f_spec().param_count())
            .map(|_| rng.uniform_range(-0.1, 0.1))
            .collect();
        let c = rng.uniform();
        Self {
            wbp: WbpParams::ones(code, iterations),
            f_weights,
            c,
            gating: true,
        }
    }

    pub fn check(&self) -> Result<()> {
        let expected = f_spec().param_count();
        if self.f_weights.len() != expected {
            return Err(Error::Dimension {
                what: "f weights",
                expected,
                actual: self.f_weights.len(),
            });
        }
        Ok(())
    }
}

/// Scratch buffers for evaluating `f` and `h` without allocating per call.
#[derive(Debug, Default)]
pub(crate) struct HyperScratch {
    pub f_tape: Tape,
    pub h_tape: Tape,
    pub gates: Vec<f64>,
}

/// Runs `f` on `(a, b)` with weights transposed by
/// [`MlpSpec::transpose_params`]; fills `scratch.gates` and returns `θ` (a
/// view into the `f` tape). Gates are `logistic` of the last 17 outputs, or
/// 1 when gating is off.
pub(crate) fn eval_f<'s>(
    f: &MlpSpec,
    f_weights_t: &[f64],
    gating: bool,
    a: f64,
    b: f64,
    scratch: &'s mut HyperScratch,
) -> &'s [f64] {
    let out = f.forward_cols(f_weights_t, &[a, b], &mut scratch.f_tape);
    scratch.gates.clear();
    if gating {
        scratch
            .gates
            .extend(out[THETA_LEN..].iter().map(|&z| logistic(z)));
    } else {
        scratch.gates.resize(GATE_LEN, 1.0);
    }
    &scratch.f_tape.output()[..THETA_LEN]
}

/// Weights and gates generated by `f` for the magnitudes `(a, b)`.
pub fn hyper_f(params: &HyperParams, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check()?;
    let f = f_spec();
    let mut scratch = HyperScratch::default();
    let f_t = f.transpose_params(&params.f_weights);
    let theta = eval_f(&f, &f_t, params.gating, a, b, &mut scratch).to_vec();
    Ok((theta, scratch.gates))
}

/// The message network: `sign(x)·sign(y)·net(|x|, |y|)`, saturated, where
/// `net` is the gated `[2, 16, 1]` network with weights `theta`.
pub fn hyper_h(theta: &[f64], gates: &[f64], x: f64, y: f64) -> Result<f64> {
    let h = h_spec();
    if theta.len() != THETA_LEN {
        return Err(Error::Dimension {
            what: "h weights",
            expected: THETA_LEN,
            actual: theta.len(),
        });
    }
    let s = crate::bp::sign(x) * crate::bp::sign(y);
    let mut tape = Tape::new();
    let z = h.forward(theta, Some(gates), &[x.abs(), y.abs()], &mut tape)?[0];
    Ok(crate::saturate(s * z))
}
