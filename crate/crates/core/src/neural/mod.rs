//! Learned polar BP decoders: weighted BP and the gated hypernetwork decoder.

mod checkpoint;
mod decoder;
mod params;

pub use checkpoint::Checkpoint;
pub use decoder::{
    bce_grad, bce_loss, output_probs, DecodeRecord, Decoder, LearnedParams, NeuralOutput,
    ParamGrads, PROB_EPS,
};
pub use params::{
    f_spec, h_spec, hyper_f, hyper_h, HyperParams, WbpParams, F_OUT, GATE_LEN, HIDDEN, THETA_LEN,
};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Per-edge weighted BP.
    Wbp,
    /// Gated hypernetwork BP with damping.
    Hyper,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "wbp" => Ok(Variant::Wbp),
            "hyper" => Ok(Variant::Hyper),
            other => Err(Error::Config(format!("unknown learned decoder '{other}'"))),
        }
    }
}

/// Ablation variants of the hypernetwork decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ablation {
    /// Learned damping and gating.
    #[default]
    Full,
    /// `c` fixed at 0: only the `h` path.
    NoDamping,
    /// `c` fixed at 0.5.
    FixedDamping,
    /// All gates fixed at 1.
    NoGating,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::NoDamping,
        Ablation::FixedDamping,
        Ablation::NoGating,
        Ablation::Full,
    ];

    /// Fixed damping value, when the variant does not learn `c`.
    pub fn fixed_c(self) -> Option<f64> {
        match self {
            Ablation::NoDamping => Some(0.0),
            Ablation::FixedDamping => Some(0.5),
            _ => None,
        }
    }

    pub fn gating(self) -> bool {
        self != Ablation::NoGating
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoDamping => "no-damping",
            Ablation::FixedDamping => "fixed-damping",
            Ablation::NoGating => "no-gating",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Ablation::Full => 0,
            Ablation::NoDamping => 1,
            Ablation::FixedDamping => 2,
            Ablation::NoGating => 3,
        }
    }

    pub(crate) fn from_code(v: u8) -> Option<Self> {
        Some(match v {
            0 => Ablation::Full,
            1 => Ablation::NoDamping,
            2 => Ablation::FixedDamping,
            3 => Ablation::NoGating,
            _ => return None,
        })
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "full" => Ok(Ablation::Full),
            "no-damping" => Ok(Ablation::NoDamping),
            "fixed-damping" => Ok(Ablation::FixedDamping),
            "no-gating" => Ok(Ablation::NoGating),
            other => Err(Error::Config(format!("unknown ablation '{other}'"))),
        }
    }
}
