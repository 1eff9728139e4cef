//! Monte-Carlo BER/FER evaluation, result files and the ablation runner.

mod plot;

use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{bp_decode, Kernel};
use crate::channel::{add_noise, channel_llr, modulate, noiseless_llr, NoiseSpec};
use crate::code::PolarCode;
use crate::neural::{Ablation, Checkpoint, Decoder, LearnedParams, Variant};
use crate::rng::{Purpose, SimRng};
use crate::sc::{sc_decode, scl_decode};
use crate::train::{self, TrainConfig, TrainOutputs};
use crate::{Error, Result};

pub use plot::{emit_plot, render_svg, PLOT_FLOOR};

/// Frames per generator stream.
pub const SHARD_FRAMES: usize = 64;
/// Shards decoded concurrently before the stopping rule is checked.
const SHARDS_PER_ROUND: usize = 16;

/// Decoder names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    BpExact,
    BpMinSum,
    Wbp,
    Hyper,
    Sc,
    Scl,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::BpExact => "bp-exact",
            DecoderKind::BpMinSum => "bp-minsum",
            DecoderKind::Wbp => "wbp",
            DecoderKind::Hyper => "hyper",
            DecoderKind::Sc => "sc",
            DecoderKind::Scl => "scl",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, DecoderKind::Wbp | DecoderKind::Hyper)
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bp-exact" => DecoderKind::BpExact,
            "bp-minsum" => DecoderKind::BpMinSum,
            "wbp" => DecoderKind::Wbp,
            "hyper" => DecoderKind::Hyper,
            "sc" => DecoderKind::Sc,
            "scl" => DecoderKind::Scl,
            other => return Err(Error::Config(format!("unknown decoder '{other}'"))),
        })
    }
}

/// A fully configured decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum DecoderSpec {
    Bp { kernel: Kernel, iterations: usize },
    Learned { kernel: Kernel, params: LearnedParams },
    Sc { kernel: Kernel },
    Scl { kernel: Kernel, list_size: usize },
}

impl DecoderSpec {
    /// Build from a command-line decoder name. Learned decoders need a
    /// checkpoint trained for `code` with the matching variant.
    pub fn from_kind(
        kind: DecoderKind,
        code: &PolarCode,
        checkpoint: Option<&Checkpoint>,
        iterations: usize,
        list_size: usize,
    ) -> Result<Self> {
        Ok(match kind {
            DecoderKind::BpExact => DecoderSpec::Bp { kernel: Kernel::Exact, iterations },
            DecoderKind::BpMinSum => DecoderSpec::Bp { kernel: Kernel::MinSum, iterations },
            DecoderKind::Sc => DecoderSpec::Sc { kernel: Kernel::Exact },
            DecoderKind::Scl => DecoderSpec::Scl { kernel: Kernel::Exact, list_size },
            DecoderKind::Wbp | DecoderKind::Hyper => {
                let ck = checkpoint.ok_or_else(|| {
                    Error::Config(format!("decoder '{}' needs a checkpoint", kind.name()))
                })?;
                ck.check_code(code)?;
                let want = if kind == DecoderKind::Wbp { Variant::Wbp } else { Variant::Hyper };
                if ck.variant() != want {
                    return Err(Error::Checkpoint(format!(
                        "checkpoint holds a {:?} decoder, '{}' requested",
                        ck.variant(),
                        kind.name()
                    )));
                }
                DecoderSpec::Learned { kernel: ck.kernel, params: ck.params.clone() }
            }
        })
    }

    /// Estimated source word `û` (length N).
    pub fn decode(&self, code: &PolarCode, llr: &[f64]) -> Result<Vec<u8>> {
        match self {
            DecoderSpec::Bp { kernel, iterations } => Ok(bp_decode(code, llr, *iterations, *kernel)?.bits),
            DecoderSpec::Learned { kernel, params } => Ok(Decoder::new(code, *kernel, params)?.decode(llr)?.bits),
            DecoderSpec::Sc { kernel } => sc_decode(code, llr, *kernel),
            DecoderSpec::Scl { kernel, list_size } => Ok(scl_decode(code, llr, *list_size, *kernel)?.bits),
        }
    }

    fn check(&self, code: &PolarCode) -> Result<()> {
        match self {
            DecoderSpec::Bp { iterations: 0, .. } => Err(Error::Config("BP needs at least one iteration".into())),
            DecoderSpec::Learned { kernel, params } => Decoder::new(code, *kernel, params).map(|_| ()),
            DecoderSpec::Scl { list_size: 0, .. } => Err(Error::Config("list size must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// Counts for one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    /// `frames · K`; frozen positions are never counted.
    pub info_bits: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
}

impl EvalRecord {
    fn from_counts(snr_db: f64, c: Counts, k: usize) -> Self {
        let info_bits = c.frames * k as u64;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            snr_db,
            frames: c.frames,
            bit_errors: c.bit_errors,
            info_bits,
            frame_errors: c.frame_errors,
            ber: ratio(c.bit_errors, info_bits),
            fer: ratio(c.frame_errors, c.frames),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    frames: u64,
    bit_errors: u64,
    frame_errors: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Eb/N0 points in dB.
    pub snrs_db: Vec<f64>,
    pub min_frames: u64,
    pub max_frames: u64,
    /// Stop a point once this many bit errors are seen (after `min_frames`).
    pub target_errors: u64,
    pub seed: u64,
    /// Transmit the all-zero codeword instead of random information words.
    pub zero_codeword: bool,
    /// Replace the channel output with saturated noiseless LLRs.
    pub noiseless: bool,
}

impl EvalConfig {
    pub fn new(snrs_db: Vec<f64>, seed: u64) -> Self {
        Self {
            snrs_db,
            min_frames: 1000,
            max_frames: 1_000_000,
            target_errors: 500,
            seed,
            zero_codeword: false,
            noiseless: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.snrs_db.is_empty() {
            return Err(Error::Config("no SNR points".into()));
        }
        if self.max_frames == 0 || self.min_frames > self.max_frames {
            return Err(Error::Config(format!(
                "need 0 < min frames ({}) <= max frames ({})",
                self.min_frames, self.max_frames
            )));
        }
        Ok(())
    }
}

/// Parse `"start:stop:step"` (inclusive) or a comma-separated list.
pub fn parse_snr_range(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid SNR range '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let out = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(out)
}

/// Stream tag of an SNR point, so the same SNR sees the same noise whatever
/// list it appears in.
fn snr_tag(db: f64) -> u32 {
    ((db * 1000.0).round() as i64) as u32
}

fn run_shard(
    code: &PolarCode,
    spec: &DecoderSpec,
    cfg: &EvalConfig,
    sigma: f64,
    snr_db: f64,
    shard: u64,
    frames: u64,
) -> Result<Counts> {
    let mut rng = SimRng::new(cfg.seed, Purpose::Evaluation, snr_tag(snr_db), shard as u32);
    let mut counts = Counts::default();
    for _ in 0..frames {
        let info: Vec<u8> = if cfg.zero_codeword {
            vec![0; code.info_len()]
        } else {
            (0..code.info_len()).map(|_| rng.bit()).collect()
        };
        let x = code.encode(&info)?;
        let llr = if cfg.noiseless {
            noiseless_llr(&x)
        } else {
            channel_llr(&add_noise(&modulate(&x), sigma, &mut rng), sigma)
        };
        let u_hat = spec.decode(code, &llr)?;
        let errors = code
            .extract_info(&u_hat)
            .iter()
            .zip(&info)
            .filter(|(a, b)| a != b)
            .count() as u64;
        counts.frames += 1;
        counts.bit_errors += errors;
        counts.frame_errors += u64::from(errors > 0);
    }
    Ok(counts)
}

/// Simulate every SNR point of `cfg`. Frames are drawn in shards of
/// [`SHARD_FRAMES`] with one generator stream per `(seed, snr, shard)`;
/// shards are merged in index order and the stopping rule is applied after
/// each one, so results are independent of the worker count.
pub fn evaluate(code: &PolarCode, spec: &DecoderSpec, cfg: &EvalConfig) -> Result<Vec<EvalRecord>> {
    cfg.validate()?;
    spec.check(code)?;
    let mut records = Vec::with_capacity(cfg.snrs_db.len());
    for &db in &cfg.snrs_db {
        let sigma = NoiseSpec::from_ebn0(db, code.rate())?.sigma();
        let mut total = Counts::default();
        let mut next_shard = 0u64;
        'point: loop {
            let first = next_shard;
            let plans: Vec<(u64, u64)> = (0..SHARDS_PER_ROUND as u64)
                .map(|i| first + i)
                .map(|s| {
                    let start = s * SHARD_FRAMES as u64;
                    (s, cfg.max_frames.saturating_sub(start).min(SHARD_FRAMES as u64))
                })
                .filter(|&(_, n)| n > 0)
                .collect();
            if plans.is_empty() {
                break;
            }
            next_shard += plans.len() as u64;
            let results: Vec<Result<Counts>> = plans
                .par_iter()
                .map(|&(s, n)| run_shard(code, spec, cfg, sigma, db, s, n))
                .collect();
            for r in results {
                let c = r?;
                total.frames += c.frames;
                total.bit_errors += c.bit_errors;
                total.frame_errors += c.frame_errors;
                let enough = total.frames >= cfg.min_frames && total.bit_errors >= cfg.target_errors;
                if enough || total.frames >= cfg.max_frames {
                    break 'point;
                }
            }
        }
        records.push(EvalRecord::from_counts(db, total, code.info_len()));
    }
    Ok(records)
}

pub const CSV_HEADER: &str = "snr_db,frames,bit_errors,info_bits,frame_errors,ber,fer";

pub fn emit_csv(records: &[EvalRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to write".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(file);
    let header = rd.headers().map_err(|e| Error::file(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::file(path, format!("expected header '{CSV_HEADER}'")));
    }
    rd.deserialize()
        .collect::<std::result::Result<Vec<EvalRecord>, _>>()
        .map_err(|e| Error::file(path, e.to_string()))
}

/// `−ln(BER)` per variant and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub snrs_db: Vec<f64>,
    pub rows: Vec<(Ablation, Vec<EvalRecord>)>,
}

impl AblationTable {
    pub fn neg_ln_ber(&self, ablation: Ablation) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .find(|(a, _)| *a == ablation)
            .map(|(_, recs)| recs.iter().map(|r| -r.ber.ln()).collect())
    }

    /// One row per variant, one column per SNR.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant");
        for db in &self.snrs_db {
            out.push_str(&format!(",{db}dB"));
        }
        out.push('\n');
        for (ablation, recs) in &self.rows {
            out.push_str(ablation.name());
            for r in recs {
                out.push_str(&format!(",{:.4}", -r.ber.ln()));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Checkpoint file name used by [`ablation_suite`] for a variant.
pub fn ablation_checkpoint_name(ablation: Ablation) -> String {
    format!("{}.ckpt", ablation.name())
}

/// Train (or load from `checkpoint_dir`) the four hypernetwork variants and
/// evaluate each. `base` supplies every training setting but the ablation.
/// With a directory, missing checkpoints are trained and written there.
pub fn ablation_suite(
    code: &PolarCode,
    base: &TrainConfig,
    eval: &EvalConfig,
    checkpoint_dir: Option<&Path>,
    mut progress: impl FnMut(&str),
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for ablation in Ablation::ALL {
        let cfg = TrainConfig { variant: Variant::Hyper, ablation, ..base.clone() };
        let path: Option<PathBuf> = checkpoint_dir.map(|d| d.join(ablation_checkpoint_name(ablation)));
        let params = match &path {
            Some(p) if p.exists() => {
                let ck = Checkpoint::load(p)?;
                ck.check_code(code)?;
                if ck.ablation != ablation || ck.variant() != Variant::Hyper {
                    return Err(Error::file(p, format!("not a '{}' hypernetwork checkpoint", ablation.name())));
                }
                progress(&format!("{}: loaded {}", ablation.name(), p.display()));
                ck.params
            }
            _ => {
                progress(&format!("{}: training", ablation.name()));
                let outputs = TrainOutputs { checkpoint: path.clone(), metrics: None };
                train::train(code, &cfg, &outputs, |m| {
                    progress(&format!(
                        "{}: epoch {} loss {:.5} val_ber {:.3e}",
                        ablation.name(),
                        m.epoch,
                        m.mean_loss,
                        m.val_ber
                    ))
                })?
                .params
            }
        };
        let spec = DecoderSpec::Learned { kernel: cfg.kernel, params };
        let recs = evaluate(code, &spec, eval)?;
        progress(&format!(
            "{}: -ln(ber) {:?}",
            ablation.name(),
            recs.iter().map(|r| (-r.ber.ln() * 100.0).round() / 100.0).collect::<Vec<_>>()
        ));
        rows.push((ablation, recs));
    }
    Ok(AblationTable { snrs_db: eval.snrs_db.clone(), rows })
}
