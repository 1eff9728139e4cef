//! Zero-codeword training of the learned decoders.
//!
//! Each batch holds noisy all-zero codewords split equally across the
//! training SNRs. Per-frame gradients are computed in parallel over fixed
//! chunks and summed in chunk order, so results do not depend on the number
//! of worker threads.

use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::Kernel;
use crate::channel::{add_noise, channel_llr, modulate, NoiseSpec};
use crate::code::PolarCode;
use crate::neural::{
    bce_grad, bce_loss, Ablation, Checkpoint, Decoder, HyperParams, LearnedParams, Variant,
    WbpParams,
};
use crate::rng::{Purpose, SimRng};
use crate::{Error, Result};

/// Frames per gradient work unit.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    /// Plain gradient descent.
    #[default]
    Sgd,
    /// Adam-style per-coordinate step sizes.
    Adaptive,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adaptive" => Ok(Optimizer::Adaptive),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub ablation: Ablation,
    pub kernel: Kernel,
    pub iterations: usize,
    pub batch: usize,
    /// Training SNRs in dB.
    pub snrs_db: Vec<f64>,
    /// Interpret `snrs_db` as Es/N0 instead of Eb/N0.
    pub esn0: bool,
    pub lr0: f64,
    pub decay: f64,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a better validation BER.
    pub patience: Option<usize>,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global gradient-norm bound per batch.
    pub grad_clip: Option<f64>,
    pub val_snr_db: f64,
    pub val_frames: usize,
}

impl TrainConfig {
    /// Defaults for `code`: batch 3600 and `lr0 = 0.99` up to N = 32,
    /// batch 1800 and `lr0 = 2.5` above.
    pub fn new(code: &PolarCode, variant: Variant, ablation: Ablation) -> Self {
        let small = code.len() <= 32;
        Self {
            variant,
            ablation,
            kernel: Kernel::MinSum,
            iterations: 5,
            batch: if small { 3600 } else { 1800 },
            snrs_db: (1..=6).map(f64::from).collect(),
            esn0: false,
            lr0: if small { 0.99 } else { 2.5 },
            decay: 1e-4,
            batches_per_epoch: 125,
            epochs: 200,
            patience: Some(20),
            seed: 0,
            optimizer: Optimizer::Sgd,
            grad_clip: Some(1.0),
            val_snr_db: 4.0,
            val_frames: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.snrs_db.is_empty() {
            return bad("no training SNRs".into());
        }
        if self.batch == 0 || self.batch % self.snrs_db.len() != 0 {
            return bad(format!(
                "batch {} is not a positive multiple of the {} training SNRs",
                self.batch,
                self.snrs_db.len()
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.batches_per_epoch == 0 {
            return bad("batches per epoch must be at least 1".into());
        }
        if !(self.lr0.is_finite() && self.lr0 >= 0.0) || !(self.decay.is_finite() && self.decay >= 0.0) {
            return bad(format!("invalid learning rate lr0={} decay={}", self.lr0, self.decay));
        }
        if self.variant == Variant::Wbp && self.ablation != Ablation::Full {
            return bad("ablations apply to the hypernetwork decoder only".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("gradient clip {c} must be positive"));
            }
        }
        Ok(())
    }

    /// `lr0 / (1 + k·decay)` for epoch `k`.
    pub fn lr_at(&self, k: usize) -> f64 {
        self.lr0 / (1.0 + k as f64 * self.decay)
    }

    fn noise(&self, db: f64, rate: f64) -> Result<NoiseSpec> {
        if self.esn0 {
            NoiseSpec::from_esn0(db, rate)
        } else {
            NoiseSpec::from_ebn0(db, rate)
        }
    }
}

/// One training batch: channel LLRs of noisy zero codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub llr: Vec<Vec<f64>>,
    /// SNR of each frame, in dB.
    pub snr_db: Vec<f64>,
    /// Source words (all zero).
    pub labels: Vec<Vec<u8>>,
}

/// Batch `batch` of epoch `epoch`; `batch / snrs` frames per SNR in the
/// order of `cfg.snrs_db`.
pub fn gen_batch(code: &PolarCode, cfg: &TrainConfig, epoch: usize, batch: usize) -> Result<Batch> {
    cfg.validate()?;
    let per_snr = cfg.batch / cfg.snrs_db.len();
    let mut rng = SimRng::new(cfg.seed, Purpose::TrainBatch, epoch as u32, batch as u32);
    let symbols = modulate(&vec![0; code.len()]);
    let mut out = Batch {
        llr: Vec::with_capacity(cfg.batch),
        snr_db: Vec::with_capacity(cfg.batch),
        labels: vec![vec![0; code.len()]; cfg.batch],
    };
    for &db in &cfg.snrs_db {
        let sigma = cfg.noise(db, code.rate())?.sigma();
        for _ in 0..per_snr {
            let y = add_noise(&symbols, sigma, &mut rng);
            out.llr.push(channel_llr(&y, sigma));
            out.snr_db.push(db);
        }
    }
    Ok(out)
}

/// Initial parameters for `cfg`, with the ablation applied.
pub fn init_params(code: &PolarCode, cfg: &TrainConfig) -> LearnedParams {
    match cfg.variant {
        Variant::Wbp => LearnedParams::Wbp(WbpParams::ones(code, cfg.iterations)),
        Variant::Hyper => {
            let mut p = HyperParams::init(code, cfg.iterations, cfg.seed);
            if let Some(c) = cfg.ablation.fixed_c() {
                p.c = c;
            }
            p.gating = cfg.ablation.gating();
            LearnedParams::Hyper(p)
        }
    }
}

/// Mean loss and mean flat gradient over the batch.
pub fn batch_gradient(
    code: &PolarCode,
    kernel: Kernel,
    params: &LearnedParams,
    batch: &Batch,
) -> Result<(f64, Vec<f64>)> {
    let hyper = matches!(params, LearnedParams::Hyper(_));
    let dim = params.flat_len();
    let frames: Vec<(&Vec<f64>, &Vec<u8>)> = batch.llr.iter().zip(&batch.labels).collect();
    let partial: Vec<Result<(f64, Vec<f64>)>> = frames
        .par_chunks(CHUNK)
        .map(|chunk| {
            let dec = Decoder::new(code, kernel, params)?;
            let mut loss = 0.0;
            let mut grad = vec![0.0; dim];
            for (llr, u) in chunk {
                let (out, rec) = dec.decode_recorded(llr)?;
                loss += bce_loss(&out.probs, u)?;
                let g = dec.backward(&rec, &bce_grad(&out.probs, u))?.to_flat(hyper);
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            Ok((loss, grad))
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim];
    for p in partial {
        let (l, g) = p?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let n = batch.llr.len().max(1) as f64;
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((loss / n, grad))
}

/// Info-bit BER of random codewords at `db`, fixed validation stream.
pub fn validation_ber(
    code: &PolarCode,
    cfg: &TrainConfig,
    params: &LearnedParams,
    db: f64,
    frames: usize,
) -> Result<f64> {
    let sigma = cfg.noise(db, code.rate())?.sigma();
    let dec = Decoder::new(code, cfg.kernel, params)?;
    let mut rng = SimRng::new(cfg.seed, Purpose::Validation, 0, 0);
    let mut errors = 0usize;
    for _ in 0..frames {
        let info: Vec<u8> = (0..code.info_len()).map(|_| rng.bit()).collect();
        let x = code.encode(&info)?;
        let y = add_noise(&modulate(&x), sigma, &mut rng);
        let out = dec.decode(&channel_llr(&y, sigma))?;
        errors += code
            .extract_info(&out.bits)
            .iter()
            .zip(&info)
            .filter(|(a, b)| a != b)
            .count();
    }
    let bits = frames * code.info_len();
    Ok(if bits == 0 { 0.0 } else { errors as f64 / bits as f64 })
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub val_snr_db: f64,
    pub val_ber: f64,
}

/// Where [`train`] writes its artifacts.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    /// Best parameters so far, rewritten after every epoch.
    pub checkpoint: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation BER (earliest on ties).
    pub params: LearnedParams,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    fn apply(&mut self, flat: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        for i in 0..flat.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            flat[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

fn checkpoint_for(code: &PolarCode, cfg: &TrainConfig, params: &LearnedParams) -> Checkpoint {
    Checkpoint::new(code, cfg.kernel, cfg.ablation, params.clone())
}

/// Train from [`init_params`].
pub fn train(
    code: &PolarCode,
    cfg: &TrainConfig,
    outputs: &TrainOutputs,
    progress: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    train_from(code, cfg, init_params(code, cfg), outputs, progress)
}

/// Train starting from `params`.
pub fn train_from(
    code: &PolarCode,
    cfg: &TrainConfig,
    mut params: LearnedParams,
    outputs: &TrainOutputs,
    mut progress: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if params.iterations() != cfg.iterations {
        return Err(Error::Config(format!(
            "parameters unrolled for {} iterations, config asks for {}",
            params.iterations(),
            cfg.iterations
        )));
    }
    Decoder::new(code, cfg.kernel, &params)?;
    let c_index = params.c_index();
    let freeze_c = cfg.ablation.fixed_c().is_some();
    let mut flat = params.to_flat();
    let mut adam = Adam::new(flat.len());
    let mut metrics_writer = match &outputs.metrics {
        Some(p) => Some(csv::Writer::from_writer(
            File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => None,
    };

    let mut best = (validation_ber(code, cfg, &params, cfg.val_snr_db, cfg.val_frames)?, 0, params.clone());
    let mut history = Vec::new();
    let mut stale = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let mut loss_sum = 0.0;
        for b in 0..cfg.batches_per_epoch {
            let batch = gen_batch(code, cfg, epoch, b)?;
            let (loss, mut grad) = batch_gradient(code, cfg.kernel, &params, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(non_finite(code, cfg, &params, outputs, epoch, b, loss));
            }
            loss_sum += loss;
            if let (Some(i), true) = (c_index, freeze_c) {
                grad[i] = 0.0;
            }
            if let Some(max) = cfg.grad_clip {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    grad.iter_mut().for_each(|g| *g *= max / norm);
                }
            }
            match cfg.optimizer {
                Optimizer::Sgd => flat.iter_mut().zip(&grad).for_each(|(p, g)| *p -= lr * g),
                Optimizer::Adaptive => adam.apply(&mut flat, &grad, lr),
            }
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(non_finite(code, cfg, &params, outputs, epoch, b, loss));
            }
            if let Some(i) = c_index {
                flat[i] = match cfg.ablation.fixed_c() {
                    Some(c) => c,
                    None => flat[i].clamp(0.0, 1.0),
                };
            }
            params.set_from_flat(&flat)?;
        }
        let val_ber = validation_ber(code, cfg, &params, cfg.val_snr_db, cfg.val_frames)?;
        let row = EpochMetrics {
            epoch,
            lr,
            mean_loss: loss_sum / cfg.batches_per_epoch as f64,
            val_snr_db: cfg.val_snr_db,
            val_ber,
        };
        if val_ber < best.0 {
            best = (val_ber, epoch + 1, params.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        if let Some(path) = &outputs.checkpoint {
            checkpoint_for(code, cfg, &best.2).save(path)?;
        }
        if let Some(w) = metrics_writer.as_mut() {
            w.serialize(&row)?;
            w.flush().map_err(|e| Error::io(outputs.metrics.as_deref().unwrap_or(Path::new("")), e))?;
        }
        progress(&row);
        history.push(row);
        if cfg.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }
    if let Some(path) = &outputs.checkpoint {
        checkpoint_for(code, cfg, &best.2).save(path)?;
    }
    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.1,
        metrics: history,
    })
}

/// Build the abort error and leave the last finite parameters next to the
/// checkpoint path.
fn non_finite(
    code: &PolarCode,
    cfg: &TrainConfig,
    params: &LearnedParams,
    outputs: &TrainOutputs,
    epoch: usize,
    batch: usize,
    loss: f64,
) -> Error {
    let flat = params.to_flat();
    let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max = flat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut msg = format!(
        "epoch {epoch} batch {batch}: loss {loss}; parameters before the step: norm {norm:.6e}, max |p| {max:.6e}"
    );
    if let Some(c) = params.c_index().map(|i| flat[i]) {
        msg.push_str(&format!(", c {c}"));
    }
    if let Some(path) = &outputs.checkpoint {
        let snap = path.with_extension("nonfinite.ckpt");
        if checkpoint_for(code, cfg, params).save(&snap).is_ok() {
            msg.push_str(&format!("; snapshot written to {}", snap.display()));
        }
    }
    Error::NonFinite(msg)
}
