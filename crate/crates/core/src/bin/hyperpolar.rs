use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hyperpolar::bp::Kernel;
use hyperpolar::code::{construct_frozen_set, Construction, PolarCode, DEFAULT_DESIGN_Z};
use hyperpolar::harness::{
    ablation_suite, emit_csv, emit_plot, evaluate, parse_snr_range, read_csv, DecoderKind,
    DecoderSpec, EvalConfig,
};
use hyperpolar::neural::{Ablation, Checkpoint, Variant};
use hyperpolar::train::{train, Optimizer, TrainConfig, TrainOutputs};
use hyperpolar::{Error, Result};

#[derive(Parser)]
#[command(name = "hyperpolar", version, about = "Polar code construction, decoding, training and BER simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a code and write its frozen set.
    Construct(ConstructArgs),
    /// Encode information words read one per line.
    Encode(EncodeArgs),
    /// Monte-Carlo BER/FER simulation.
    Simulate(SimulateArgs),
    /// Train a learned decoder on noisy zero codewords.
    Train(TrainArgs),
    /// Train or load the four ablation variants and tabulate -ln(BER).
    Ablate(AblateArgs),
    /// Render BER curves from result files as SVG.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Bhattacharyya,
    File,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "bhattacharyya")]
    method: Method,
    /// Initial erasure probability, or the frozen-list path for `file`.
    #[arg(long)]
    design_param: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    BpExact,
    BpMinsum,
    Wbp,
    Hyper,
    Sc,
    Scl,
}

impl From<DecoderArg> for DecoderKind {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::BpExact => DecoderKind::BpExact,
            DecoderArg::BpMinsum => DecoderKind::BpMinSum,
            DecoderArg::Wbp => DecoderKind::Wbp,
            DecoderArg::Hyper => DecoderKind::Hyper,
            DecoderArg::Sc => DecoderKind::Sc,
            DecoderArg::Scl => DecoderKind::Scl,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long, value_enum)]
    decoder: DecoderArg,
    #[arg(long, default_value_t = 8)]
    list_size: usize,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// BP iterations for the unlearned decoders.
    #[arg(long, default_value_t = 5)]
    iters: usize,
    /// `start:stop:step` in dB, or a comma-separated list.
    #[arg(long, default_value = "1:6:1")]
    snr: String,
    #[arg(long, default_value_t = 1000)]
    min_frames: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 500)]
    target_errors: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    zero_codeword: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Wbp,
    Hyper,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationArg {
    Full,
    NoDamping,
    FixedDamping,
    NoGating,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Full => Ablation::Full,
            AblationArg::NoDamping => Ablation::NoDamping,
            AblationArg::FixedDamping => Ablation::FixedDamping,
            AblationArg::NoGating => Ablation::NoGating,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Exact,
    MinSum,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Exact => Kernel::Exact,
            KernelArg::MinSum => Kernel::MinSum,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adaptive,
}

/// Training knobs shared by `train` and `ablate`; unset values take the
/// defaults for the code length.
#[derive(Args)]
struct TrainKnobs {
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    batches_per_epoch: Option<usize>,
    #[arg(long, value_enum, default_value = "min-sum")]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value = "sgd")]
    optimizer: OptimizerArg,
    /// Training SNRs in dB (`start:stop:step` or list).
    #[arg(long)]
    train_snr: Option<String>,
    /// Read training SNRs as Es/N0 instead of Eb/N0.
    #[arg(long)]
    esn0: bool,
    /// Gradient-norm clip; 0 disables clipping.
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Early-stop patience in epochs; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_frames: Option<usize>,
    #[arg(long)]
    val_snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainKnobs {
    fn config(&self, code: &PolarCode, variant: Variant, ablation: Ablation) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::new(code, variant, ablation);
        cfg.kernel = self.kernel.into();
        cfg.optimizer = match self.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Adaptive => Optimizer::Adaptive,
        };
        cfg.esn0 = self.esn0;
        cfg.seed = self.seed;
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.lr0 {
            cfg.lr0 = v;
        }
        if let Some(v) = self.decay {
            cfg.decay = v;
        }
        if let Some(v) = self.batches_per_epoch {
            cfg.batches_per_epoch = v;
        }
        if let Some(s) = &self.train_snr {
            cfg.snrs_db = parse_snr_range(s)?;
        }
        if let Some(c) = self.grad_clip {
            cfg.grad_clip = (c > 0.0).then_some(c);
        }
        if let Some(p) = self.patience {
            cfg.patience = (p > 0).then_some(p);
        }
        if let Some(v) = self.val_frames {
            cfg.val_frames = v;
        }
        if let Some(v) = self.val_snr {
            cfg.val_snr_db = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long, value_enum, default_value = "hyper")]
    decoder: VariantArg,
    #[arg(long, value_enum, default_value = "full")]
    ablation: AblationArg,
    #[command(flatten)]
    knobs: TrainKnobs,
    #[arg(long)]
    checkpoint_out: PathBuf,
    #[arg(long)]
    metrics_out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Load `<variant>.ckpt` from here when present; train and store otherwise.
    #[arg(long)]
    reuse_checkpoints: Option<PathBuf>,
    #[command(flatten)]
    knobs: TrainKnobs,
    /// Evaluation SNRs in dB.
    #[arg(long, default_value = "1:5:1")]
    snr: String,
    #[arg(long, default_value_t = 1000)]
    min_frames: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 500)]
    target_errors: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Comma-separated result files; legend entries are the file stems.
    #[arg(long = "in", value_delimiter = ',', required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct(a) => construct(a),
        Command::Encode(a) => encode(a),
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => run_train(a),
        Command::Ablate(a) => ablate(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn construct(a: ConstructArgs) -> Result<()> {
    let method = match a.method {
        Method::Bhattacharyya => {
            let z0 = match &a.design_param {
                None => DEFAULT_DESIGN_Z,
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("design parameter '{s}' is not a number")))?,
            };
            Construction::Bhattacharyya { z0 }
        }
        Method::File => Construction::ExternalFile(
            a.design_param
                .as_ref()
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config("method 'file' needs --design-param PATH".into()))?,
        ),
    };
    let mask = construct_frozen_set(a.n, a.k, &method)?;
    PolarCode::from_frozen_mask(mask)?.save(&a.out)
}

fn parse_word(line: &str, path: &Path, lineno: usize) -> Result<Vec<u8>> {
    line.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::file(path, format!("line {}: unexpected character '{other}'", lineno + 1))),
        })
        .collect()
}

fn encode(a: EncodeArgs) -> Result<()> {
    let code = PolarCode::load(&a.code)?;
    let text = fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let info = parse_word(line, &a.input, i)?;
        if info.len() != code.info_len() {
            return Err(Error::file(
                &a.input,
                format!("line {}: {} bits, the code carries {}", i + 1, info.len(), code.info_len()),
            ));
        }
        let x = code.encode(&info)?;
        out.extend(x.iter().map(|&b| if b == 1 { '1' } else { '0' }));
        out.push('\n');
    }
    fs::write(&a.out, out).map_err(|e| Error::io(&a.out, e))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let code = PolarCode::load(&a.code)?;
    let kind: DecoderKind = a.decoder.into();
    let checkpoint = match &a.checkpoint {
        Some(p) => Some(Checkpoint::load(p)?),
        None => None,
    };
    let spec = DecoderSpec::from_kind(kind, &code, checkpoint.as_ref(), a.iters, a.list_size)?;
    let cfg = EvalConfig {
        min_frames: a.min_frames,
        max_frames: a.max_frames,
        target_errors: a.target_errors,
        zero_codeword: a.zero_codeword,
        ..EvalConfig::new(parse_snr_range(&a.snr)?, a.seed)
    };
    let records = evaluate(&code, &spec, &cfg)?;
    for r in &records {
        eprintln!(
            "{} {:>5} dB  frames {:>8}  ber {:.3e}  fer {:.3e}",
            kind.name(),
            r.snr_db,
            r.frames,
            r.ber,
            r.fer
        );
    }
    emit_csv(&records, &a.out)
}

fn run_train(a: TrainArgs) -> Result<()> {
    let code = PolarCode::load(&a.code)?;
    let variant = match a.decoder {
        VariantArg::Wbp => Variant::Wbp,
        VariantArg::Hyper => Variant::Hyper,
    };
    let cfg = a.knobs.config(&code, variant, a.ablation.into())?;
    let outputs = TrainOutputs {
        checkpoint: Some(a.checkpoint_out),
        metrics: Some(a.metrics_out),
    };
    let out = train(&code, &cfg, &outputs, |m| {
        eprintln!(
            "epoch {:>4}  lr {:.5}  loss {:.6}  val_ber@{}dB {:.3e}",
            m.epoch, m.lr, m.mean_loss, m.val_snr_db, m.val_ber
        )
    })?;
    eprintln!("best parameters from epoch {}", out.best_epoch);
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let code = PolarCode::load(&a.code)?;
    let base = a.knobs.config(&code, Variant::Hyper, Ablation::Full)?;
    let eval = EvalConfig {
        min_frames: a.min_frames,
        max_frames: a.max_frames,
        target_errors: a.target_errors,
        ..EvalConfig::new(parse_snr_range(&a.snr)?, a.knobs.seed)
    };
    if let Some(dir) = &a.reuse_checkpoints {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let table = ablation_suite(&code, &base, &eval, a.reuse_checkpoints.as_deref(), |m| eprintln!("{m}"))?;
    print!("{}", table.to_csv());
    table.save(&a.out)
}

fn plot(a: PlotArgs) -> Result<()> {
    let mut series = Vec::with_capacity(a.input.len());
    for p in &a.input {
        let name = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        series.push((name, read_csv(p)?));
    }
    emit_plot(&series, &a.out)
}
