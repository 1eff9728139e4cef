//! Polar code decoding toolkit.
//!
//! The crate covers the whole pipeline needed to study learned belief
//! propagation decoders for polar codes:
//!
//! * [`code`]: code description, frozen-set construction and GF(2) encoding.
//! * [`channel`]: BPSK over AWGN and channel LLRs.
//! * [`bp`]: classical polar belief propagation on the Arikan factor graph.
//! * [`sc`]: successive cancellation and successive cancellation list decoders.
//! * [`nnet`]: a small dense tanh network engine with reverse-mode gradients.
//! * [`neural`]: weighted BP and the gated hypernetwork BP decoder with damping.
//! * [`train`]: zero-codeword training with the step-decay learning rate schedule.
//! * [`harness`]: Monte-Carlo BER/FER evaluation, ablation table and reports.
//!
//! All message passing happens in the LLR domain and every message is kept
//! inside `[-LLR_SAT, LLR_SAT]`.

pub mod bp;
pub mod channel;
pub mod code;
pub mod error;
pub mod harness;
pub mod neural;
pub mod nnet;
pub mod rng;
pub mod sc;
pub mod train;

pub use error::{Error, Result};

/// Saturation magnitude for every LLR in the toolkit. Also stands in for the
/// infinite prior of frozen bits.
pub const LLR_SAT: f64 = 30.0;

/// Clamp an LLR into `[-LLR_SAT, LLR_SAT]`.
#[inline]
pub fn saturate(x: f64) -> f64 {
    x.clamp(-LLR_SAT, LLR_SAT)
}
