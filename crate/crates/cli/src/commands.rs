use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use diffsr::metrics::{lsd, lsd_lf, LsdConfig};
use diffsr::oracle::{run_suite, SuiteOptions};
use diffsr::predictor::{Checkpoint, DiagonalGaussianPredictor, GaussianPriorSpec, NoisePredictor, ToyUdm, ToyUdmConfig};
use diffsr::resample::{FilterKind, FilterSpec, LowpassOperator};
use diffsr::rng::{seeded, stream};
use diffsr::sampler::{sample_conditional, sample_unconditional, SamplerConfig, StepRecord};
use diffsr::schedule::{NoiseSchedule, ScheduleEndpoints};
use diffsr::synth::{corpus, CorpusKind};
use diffsr::training::{train as run_training, LogRecord, TrainConfig};
use diffsr::Waveform;

use crate::config::{load, write_sidecar};
use crate::wav::{read_mono, write_float};
use crate::{DegradeArgs, EvalArgs, FilterArg, SampleArgs, SrArgs, SyntheticArg, TrainArgs, ValidateArgs};

/// A run that finished but produced non-finite values or failed validation.
#[derive(Debug)]
pub struct Numerical(pub String);

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Numerical {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e.chain().any(|c| {
        c.is::<Numerical>() || matches!(c.downcast_ref::<diffsr::Error>(), Some(diffsr::Error::NonFinite { .. }))
    });
    if numerical {
        3
    } else {
        2
    }
}

fn filter_kind(arg: FilterArg) -> FilterKind {
    match arg {
        FilterArg::Sinc => FilterKind::sinc_default(),
        FilterArg::Stft => FilterKind::stft_default(),
        FilterArg::Ideal => FilterKind::Ideal,
    }
}

fn default_filter() -> FilterKind {
    FilterKind::sinc_default()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradeConfig {
    pub target_rate: Option<u32>,
    pub filter: FilterKind,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            target_rate: None,
            filter: default_filter(),
        }
    }
}

pub fn degrade(args: DegradeArgs) -> Result<()> {
    let (mut cfg, cfg_path) = load::<DegradeConfig>(args.config.as_deref(), "degrade")?;
    if let Some(r) = args.target_rate {
        cfg.target_rate = Some(r);
    }
    if let Some(f) = args.filter {
        cfg.filter = filter_kind(f);
    }
    let target = cfg.target_rate.ok_or_else(|| anyhow!("--target-rate is required"))?;
    let x = read_mono(&args.input)?;
    let spec = FilterSpec::new(cfg.filter.clone(), x.sample_rate(), target)?;
    let passthrough = target == x.sample_rate();
    if passthrough {
        std::fs::copy(&args.input, &args.output)
            .with_context(|| format!("cannot write {}", args.output.display()))?;
    } else {
        let y = LowpassOperator::new(spec.clone())?.downsample(&x)?;
        write_float(&args.output, &y)?;
    }
    write_sidecar(
        &args.output,
        "degrade",
        &cfg,
        cfg_path.as_deref(),
        json!({ "input": args.input, "filter_spec": spec, "passthrough": passthrough }),
    )
}

/// Gaussian prior file for analytic sampling.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorFile {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub psd: Vec<f64>,
}

struct Model {
    predictor: Box<dyn NoisePredictor>,
    sample_rate: u32,
    endpoints: ScheduleEndpoints,
    /// Fixed output length for frame-based priors.
    frame_length: Option<usize>,
    describe: serde_json::Value,
}

fn load_model(checkpoint: Option<&Path>, prior: Option<&Path>) -> Result<Model> {
    match (checkpoint, prior) {
        (Some(path), None) => {
            let ckpt = Checkpoint::load(path)?;
            let model: ToyUdm<f32> = ckpt.model()?;
            Ok(Model {
                predictor: Box::new(model),
                sample_rate: ckpt.header.sample_rate,
                endpoints: ckpt.header.endpoints,
                frame_length: None,
                describe: json!({ "checkpoint": path, "step": ckpt.header.step, "ema": ckpt.header.ema }),
            })
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let pf: PriorFile =
                serde_json::from_str(&text).with_context(|| format!("invalid prior file {}", path.display()))?;
            if pf.sample_rate == 0 {
                bail!("prior sample rate must be positive");
            }
            let spec = GaussianPriorSpec::new(pf.psd, pf.frame_length)?;
            Ok(Model {
                predictor: Box::new(DiagonalGaussianPredictor::new(spec)),
                sample_rate: pf.sample_rate,
                endpoints: ScheduleEndpoints::default(),
                frame_length: Some(pf.frame_length),
                describe: json!({ "gaussian_prior": path }),
            })
        }
        _ => bail!("exactly one of --checkpoint and --gaussian-prior is required"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrConfig {
    pub steps: usize,
    pub eta: f64,
    pub seed: u64,
    pub filter: FilterKind,
    /// Overrides the checkpoint's schedule endpoints.
    pub endpoints: Option<ScheduleEndpoints>,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            eta: 0.0,
            seed: 0,
            filter: default_filter(),
            endpoints: None,
        }
    }
}

fn write_trace(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn sr(args: SrArgs) -> Result<()> {
    let (mut cfg, cfg_path) = load::<SrConfig>(args.config.as_deref(), "sr")?;
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(f) = args.filter {
        cfg.filter = filter_kind(f);
    }
    let outputs: Vec<PathBuf> = match (&args.output, &args.out_dir) {
        (Some(o), None) if args.inputs.len() == 1 => vec![o.clone()],
        (Some(_), None) => bail!("--output takes a single input; use --out-dir for several"),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            args.inputs
                .iter()
                .map(|p| p.file_name().map(|n| dir.join(n)).ok_or_else(|| anyhow!("{} has no file name", p.display())))
                .collect::<Result<_>>()?
        }
        _ => bail!("one of --output and --out-dir is required"),
    };
    if args.trace.is_some() && args.inputs.len() != 1 {
        bail!("--trace takes a single input");
    }
    let model = load_model(args.checkpoint.as_deref(), args.gaussian_prior.as_deref())?;
    let endpoints = cfg.endpoints.unwrap_or(model.endpoints);

    args.inputs
        .par_iter()
        .zip(&outputs)
        .enumerate()
        .map(|(i, (input, output))| -> Result<()> {
            let y = read_mono(input)?;
            if y.sample_rate() >= model.sample_rate {
                bail!(
                    "{}: input rate {} Hz must be below the model rate {} Hz",
                    input.display(),
                    y.sample_rate(),
                    model.sample_rate
                );
            }
            let filter = FilterSpec::new(cfg.filter.clone(), model.sample_rate, y.sample_rate())?;
            if let Some(n) = model.frame_length {
                let up = LowpassOperator::new(filter.clone())?.upsampled_len(y.len());
                if up != n {
                    bail!("{}: upsampled length {up} does not match the prior frame length {n}", input.display());
                }
            }
            let scfg = SamplerConfig {
                steps: cfg.steps,
                eta: cfg.eta,
                filter,
                seed: cfg.seed,
                endpoints,
            };
            let mut records = Vec::new();
            let x = sample_conditional(&*model.predictor, &y, &scfg, &mut stream(cfg.seed, i as u64), &mut |r| {
                records.push(*r)
            })
            .with_context(|| format!("sampling {}", input.display()))?;
            write_float(output, &x)?;
            if let Some(t) = &args.trace {
                write_trace(t, &records)?;
            }
            write_sidecar(
                output,
                "sr",
                &cfg,
                cfg_path.as_deref(),
                json!({
                    "input": input,
                    "rng_stream": i,
                    "model": model.describe,
                    "sampler": scfg,
                    "final_residual": records.last().map(|r| r.residual),
                }),
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub kind: CorpusKind,
    pub items: usize,
    pub length: usize,
    pub sample_rate: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub train: TrainConfig,
    pub model: ToyUdmConfig,
    pub corpus: Option<SyntheticCorpus>,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let (mut cfg, cfg_path) = load::<TrainRunConfig>(args.config.as_deref(), "train")?;
    if let Some(v) = args.steps {
        cfg.train.steps = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.batch {
        cfg.train.batch = v;
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(kind) = args.synthetic {
        let rate = args.rate.unwrap_or(4000);
        cfg.corpus = Some(SyntheticCorpus {
            kind: match kind {
                SyntheticArg::Ar1 => CorpusKind::ar1_default(),
                SyntheticArg::Tones => CorpusKind::Tones,
                SyntheticArg::Chirps => CorpusKind::Chirps,
                SyntheticArg::Speech => CorpusKind::Speech,
            },
            items: 16,
            length: rate as usize,
            sample_rate: rate,
            seed: cfg.train.seed,
        });
    } else if let (Some(rate), Some(c)) = (args.rate, cfg.corpus.as_mut()) {
        c.sample_rate = rate;
    }

    let data: Vec<Waveform> = if !args.inputs.is_empty() {
        if cfg.corpus.is_some() {
            bail!("give either WAV inputs or a synthetic corpus, not both");
        }
        let waves: Vec<Waveform> = args.inputs.iter().map(|p| read_mono(p)).collect::<Result<_>>()?;
        let rate = waves[0].sample_rate();
        if let Some(w) = waves.iter().find(|w| w.sample_rate() != rate) {
            bail!("corpus mixes sample rates {rate} and {}", w.sample_rate());
        }
        waves
    } else if let Some(c) = &cfg.corpus {
        corpus(&c.kind, c.items, c.length, c.sample_rate, c.seed)?
    } else {
        bail!("no training data: pass WAV files, --synthetic, or a corpus in the config");
    };
    let rate = data[0].sample_rate();

    let model = ToyUdm::<f32>::init(cfg.model.clone(), &mut seeded(cfg.train.seed))?;
    let mut log = match &args.log {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("cannot write {}", p.display()))?)),
        None => None,
    };
    let mut log_err = None;
    let outcome = run_training(&cfg.train, &data, model, |r: &LogRecord| {
        eprintln!("step {:>7}  loss {:>12.4}  smoothed {:>12.4}", r.step, r.loss, r.ema_loss);
        if let Some(w) = log.as_mut() {
            if let Err(e) = serde_json::to_writer(&mut *w, r).map_err(anyhow::Error::from).and_then(|_| Ok(w.write_all(b"\n")?)) {
                log_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(mut w) = log {
        w.flush()?;
    }
    if let Some(e) = log_err {
        return Err(e.context("writing training log"));
    }

    let ckpt = Checkpoint::from_model(&outcome.ema, cfg.train.endpoints, rate, true)
        .with_step(outcome.steps_completed)
        .with_adam(cfg.train.adam_settings());
    ckpt.save(&args.output)?;
    write_sidecar(
        &args.output,
        "train",
        &cfg,
        cfg_path.as_deref(),
        json!({
            "inputs": args.inputs,
            "sample_rate": rate,
            "steps_completed": outcome.steps_completed,
            "diverged_at": outcome.diverged_at,
            "final_loss": outcome.history.last().map(|r| r.ema_loss),
        }),
    )?;
    if let Some(step) = outcome.diverged_at {
        return Err(Numerical(format!(
            "training diverged at step {step}; saved the last finite parameters to {}",
            args.output.display()
        ))
        .into());
    }
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub lsd: LsdConfig,
    pub low_rate: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    reference: PathBuf,
    estimate: PathBuf,
}

#[derive(Debug, Serialize)]
struct MetricRow {
    reference: PathBuf,
    estimate: PathBuf,
    lsd: f64,
    lsd_lf: Option<f64>,
}

fn eval_pair(pair: &PairRow, cfg: &EvalConfig) -> Result<MetricRow> {
    let a = read_mono(&pair.reference)?;
    let b = read_mono(&pair.estimate)?;
    let full = lsd(&a, &b, &cfg.lsd).with_context(|| format!("comparing {}", pair.estimate.display()))?;
    let low = cfg.low_rate.map(|h| lsd_lf(&a, &b, h, &cfg.lsd)).transpose()?;
    Ok(MetricRow {
        reference: pair.reference.clone(),
        estimate: pair.estimate.clone(),
        lsd: full,
        lsd_lf: low,
    })
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let (mut cfg, _) = load::<EvalConfig>(args.config.as_deref(), "eval")?;
    if let Some(h) = args.low_rate {
        cfg.low_rate = Some(h);
    }
    let pairs: Vec<PairRow> = match (&args.pairs, &args.reference, &args.estimate) {
        (Some(p), _, _) => csv::Reader::from_path(p)
            .with_context(|| format!("cannot read {}", p.display()))?
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("invalid pair list {}", p.display()))?,
        (None, Some(r), Some(e)) => vec![PairRow {
            reference: r.clone(),
            estimate: e.clone(),
        }],
        _ => bail!("pass REFERENCE and ESTIMATE, or --pairs"),
    };
    let rows: Vec<MetricRow> = pairs.par_iter().map(|p| eval_pair(p, &cfg)).collect::<Result<_>>()?;
    if args.pairs.is_none() {
        let r = &rows[0];
        println!("LSD {:.3}", r.lsd);
        if let Some(v) = r.lsd_lf {
            println!("LSD-LF {:.3}", v);
        }
    } else {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    if let Some(p) = &args.csv {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("cannot write {}", p.display()))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn validate_oracle(args: ValidateArgs) -> Result<()> {
    let mut opts = if args.quick {
        SuiteOptions::quick()
    } else {
        SuiteOptions::full()
    };
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    let report = run_suite(&opts)?;
    for c in &report.checks {
        let status = match (c.skipped, c.pass) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        println!("{status} {:<18} {:>7.2}s  {}", c.name, c.seconds, c.details);
    }
    if let Some(p) = &args.report {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("cannot write {}", p.display()))?;
    }
    if !report.pass {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(Numerical(format!("oracle checks failed: {}", failed.join(", "))).into());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub length: Option<usize>,
    pub steps: usize,
    pub seed: u64,
    pub endpoints: Option<ScheduleEndpoints>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            length: None,
            steps: 50,
            seed: 0,
            endpoints: None,
        }
    }
}

pub fn sample_uncond(args: SampleArgs) -> Result<()> {
    let (mut cfg, cfg_path) = load::<SampleConfig>(args.config.as_deref(), "sample-uncond")?;
    if let Some(v) = args.length {
        cfg.length = Some(v);
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    let model = load_model(args.checkpoint.as_deref(), args.gaussian_prior.as_deref())?;
    let length = match (cfg.length, model.frame_length) {
        (Some(l), Some(n)) if l != n => bail!("length {l} does not match the prior frame length {n}"),
        (Some(l), _) => l,
        (None, Some(n)) => n,
        (None, None) => bail!("--length is required with a checkpoint"),
    };
    if length == 0 {
        bail!("length must be positive");
    }
    let schedule = NoiseSchedule::linear(cfg.endpoints.unwrap_or(model.endpoints), cfg.steps)?;
    let x = sample_unconditional(&*model.predictor, &schedule, length, model.sample_rate, &mut seeded(cfg.seed))?;
    write_float(&args.output, &x)?;
    write_sidecar(&args.output, "sample-uncond", &cfg, cfg_path.as_deref(), json!({ "model": model.describe }))
}
