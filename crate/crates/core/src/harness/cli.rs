//! The `revul` command line. Exit codes: 0 success, 1 findings present,
//! 2 errors (including usage errors).

use super::config::{FusionConfig, RunConfig};
use super::metrics::{compute_metrics, MetricsOptions, MetricsReport};
use super::prior_shift::{run_prior_shift_experiment, PriorShiftConfig};
use super::{dataset, factors_of, HarnessError};
use crate::datagen::corpus::{factorial_grid, find_rank_certificate, read_jsonl, write_jsonl};
use crate::datagen::{gen_corpus, validate, CorpusSpec, LabeledSample, Task};
use crate::factors::{AnalysisOptions, DepsMode};
use crate::fusion::{
    design_matrix_rank, extract_branch_features, jacobian_column_rank, train, FusionModel, Sensitivity, H,
};
use crate::ir_ingest::{parse_ir_stream, record_to_factors, IngestOptions, Opcode};
use crate::scoring::{argmax_pair, boolean_rule, soft_score, ScoreParams, SumMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "revul", version, about = "Factor-based reentrancy analysis, scoring, corpora and fusion training")]
struct Cli {
    /// JSON run configuration; flags and REVUL_* variables take precedence.
    #[arg(long, global = true, env = "REVUL_CONFIG")]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short, global = true, env = "REVUL_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Factor sets and boolean verdicts for contract files or directories.
    Analyze(AnalyzeArgs),
    /// Soft scores for contract files or directories.
    Score(ScoreArgs),
    /// Verdicts for compiler-exported JSON records (JSON or JSONL).
    IngestIr(IngestArgs),
    /// Generate a labeled corpus as JSONL plus a manifest.
    Gen(GenArgs),
    /// Train a fusion model on a corpus.
    Train(TrainArgs),
    /// Fusion predictions for a corpus or contract files.
    Infer(InferArgs),
    /// Metrics for a model on a corpus, or for a prediction list.
    Eval(EvalArgs),
    /// Design-matrix rank, covariance bound and Jacobian column rank.
    VerifyRank(VerifyRankArgs),
    /// Fusion stability under class-prior shift.
    PriorShift(PriorShiftArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    paths: Vec<PathBuf>,
    /// Ignore control dependencies (same as `--deps data-only`).
    #[arg(long)]
    data_only: bool,
    #[arg(long, value_enum)]
    deps: Option<DepsArg>,
    /// Exit code when any finding is present.
    #[arg(long, default_value_t = 1, env = "REVUL_FINDINGS_EXIT")]
    findings_exit: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DepsArg {
    All,
    DataOnly,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    CandidateRestricted,
    FullGrid,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    paths: Vec<PathBuf>,
    #[arg(long, env = "REVUL_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "REVUL_TAU")]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    sum_mode: Option<ModeArg>,
    #[arg(long)]
    data_only: bool,
    #[arg(long, value_enum)]
    deps: Option<DepsArg>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    path: PathBuf,
    /// Unknown opcodes are errors.
    #[arg(long)]
    strict: bool,
    /// Per-opcode call weight, e.g. HIGH_LEVEL_CALL=0.5.
    #[arg(long = "weight", value_name = "OPCODE=W")]
    weights: Vec<String>,
    #[arg(long, default_value_t = 1, env = "REVUL_FINDINGS_EXIT")]
    findings_exit: i32,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// E, D, O or FULL; repeatable.
    #[arg(long, required = true)]
    task: Vec<String>,
    /// Samples per task.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// positive:negative, e.g. 1:2.
    #[arg(long, default_value = "1:1")]
    ratio: String,
    #[arg(long, env = "REVUL_SEED")]
    seed: Option<u64>,
    /// Manifest path; defaults to the corpus path with `.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Validate every sample; failures exit 2.
    #[arg(long)]
    validate: bool,
}

#[derive(Debug, Args)]
struct FusionFlags {
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long, env = "REVUL_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    lambda_jaco: Option<f64>,
    #[arg(long)]
    tau_gate: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
    /// Enabled branches in E,S,D,O order, e.g. 1011.
    #[arg(long)]
    mask: Option<String>,
    /// Fixed gate weights a,b,c,d.
    #[arg(long)]
    fixed_alpha: Option<String>,
    /// Gate prior a,b,c,d.
    #[arg(long)]
    prior: Option<String>,
    /// Mix the prior into the gate output.
    #[arg(long)]
    prior_mix: bool,
    #[arg(long, value_enum)]
    sensitivity: Option<SensArg>,
    /// Accepted for compatibility; has no effect.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SensArg {
    Total,
    FusionOnly,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus JSONL.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint destination.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    fusion: FusionFlags,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus JSONL.
    #[arg(long, conflicts_with = "paths")]
    data: Option<PathBuf>,
    /// Contract files or directories.
    paths: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, requires = "data", conflicts_with = "predictions")]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON list of {"score", "label"} objects.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5, env = "REVUL_THRESHOLD")]
    threshold: f64,
    /// Omit precision and F1 (benchmarks without negatives).
    #[arg(long)]
    recall_only: bool,
    /// Emit a CSV row instead of JSON.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct VerifyRankArgs {
    /// Corpus JSONL; without it a balanced factorial grid is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    per_cell: usize,
    #[arg(long, default_value_t = 0, env = "REVUL_SEED")]
    seed: u64,
}

#[derive(Debug, Args)]
struct PriorShiftArgs {
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 600)]
    samples: usize,
    #[arg(long, default_value_t = 400)]
    eval_samples: usize,
    #[arg(long)]
    steps: Option<usize>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, HarnessError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out = cli.out.clone().or_else(|| cfg.output_dir.as_ref().map(|d| d.join("report.json")));
    let out = out.as_deref();
    match &cli.cmd {
        Cmd::Analyze(a) => analyze_cmd(a, &cfg, out),
        Cmd::Score(a) => score_cmd(a, &cfg, out),
        Cmd::IngestIr(a) => ingest_cmd(a, out),
        Cmd::Gen(a) => gen_cmd(a, &cfg, cli.out.as_deref()),
        Cmd::Train(a) => train_cmd(a, &cfg, out),
        Cmd::Infer(a) => infer_cmd(a, &cfg, out),
        Cmd::Eval(a) => eval_cmd(a, out),
        Cmd::VerifyRank(a) => verify_rank_cmd(a, out),
        Cmd::PriorShift(a) => prior_shift_cmd(a, &cfg, out),
    }
}

fn emit(v: &Value, out: Option<&Path>) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text + "\n")?;
        }
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}")?;
        }
    }
    Ok(())
}

/// `.sol` files under the given paths, sorted within each directory.
pub fn collect_sources(paths: &[PathBuf]) -> Result<Vec<PathBuf>, HarnessError> {
    fn walk(dir: &Path, acc: &mut Vec<PathBuf>) -> std::io::Result<()> {
        let mut entries: Vec<PathBuf> =
            std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, acc)?;
            } else if p.extension().is_some_and(|e| e == "sol") {
                acc.push(p);
            }
        }
        Ok(())
    }
    let mut acc = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut acc)?;
        } else if p.exists() {
            acc.push(p.clone());
        } else {
            return Err(HarnessError::Config(format!("{} does not exist", p.display())));
        }
    }
    Ok(acc)
}

fn input_paths(given: &[PathBuf], cfg: &RunConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let paths = if given.is_empty() { &cfg.inputs } else { given };
    if paths.is_empty() {
        return Err(HarnessError::Config("no input paths".into()));
    }
    collect_sources(paths)
}

fn analysis_opts(data_only: bool) -> AnalysisOptions {
    AnalysisOptions { deps: if data_only { DepsMode::DataOnly } else { DepsMode::All } }
}

fn analyze_cmd(a: &AnalyzeArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, HarnessError> {
    let files = input_paths(&a.paths, cfg)?;
    let opts = analysis_opts(a.data_only || a.deps == Some(DepsArg::DataOnly));
    let rows: Vec<(Value, bool, bool)> = files
        .par_iter()
        .map(|p| {
            let path = p.display().to_string();
            match std::fs::read_to_string(p)
                .map_err(HarnessError::from)
                .and_then(|src| factors_of(&src, &opts).map_err(|err| HarnessError::Parse { path: path.clone(), err }))
            {
                Ok(fs) => {
                    let v = boolean_rule(&fs);
                    (json!({"path": path, "factors": fs.to_json(), "verdict": v}), v.vulnerable, false)
                }
                Err(HarnessError::Parse { err, .. }) => (json!({"path": path, "error": err.diagnostics}), false, true),
                Err(e) => (json!({"path": path, "error": e.to_string()}), false, true),
            }
        })
        .collect();
    let findings = rows.iter().filter(|r| r.1).count();
    let errors = rows.iter().filter(|r| r.2).count();
    let files: Vec<Value> = rows.into_iter().map(|r| r.0).collect();
    emit(&json!({"files": files, "findings": findings, "errors": errors}), out)?;
    Ok(if errors > 0 {
        2
    } else if findings > 0 {
        a.findings_exit
    } else {
        0
    })
}

fn score_cmd(a: &ScoreArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, HarnessError> {
    let d = ScoreParams::<f64>::default();
    let mode = match a.sum_mode {
        Some(ModeArg::FullGrid) => SumMode::FullGrid,
        Some(ModeArg::CandidateRestricted) => SumMode::CandidateRestricted,
        None => cfg.scoring.sum_mode.unwrap_or(d.sum_mode),
    };
    let params = ScoreParams::new(
        a.alpha.or(cfg.scoring.alpha).unwrap_or(d.alpha),
        a.tau.or(cfg.scoring.tau).unwrap_or(d.tau),
        mode,
    )
    .map_err(|e| HarnessError::Config(e.to_string()))?;
    let files = input_paths(&a.paths, cfg)?;
    let opts = analysis_opts(a.data_only || a.deps == Some(DepsArg::DataOnly));
    let rows: Vec<Result<Value, HarnessError>> = files
        .par_iter()
        .map(|p| {
            let path = p.display().to_string();
            let src = std::fs::read_to_string(p)?;
            let fs = factors_of(&src, &opts).map_err(|err| HarnessError::Parse { path: path.clone(), err })?;
            let s = soft_score(&fs, &params);
            let v = boolean_rule(&fs);
            Ok(json!({
                "path": path,
                "verdict": v.vulnerable,
                "witnesses": v.witnesses,
                "raw_f": s.raw_f,
                "centered_f": s.centered_f,
                "probability": s.probability,
                "argmax_pair": argmax_pair(&fs, &params),
            }))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    emit(&json!({"params": params, "files": rows}), out)?;
    Ok(0)
}

fn parse_weight(s: &str) -> Result<(Opcode, f64), HarnessError> {
    let bad = || HarnessError::Config(format!("weight {s:?} is not OPCODE=W"));
    let (op, w) = s.split_once('=').ok_or_else(bad)?;
    let op = Opcode::parse(op.trim()).ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    if !(w >= 0.0 && w.is_finite()) {
        return Err(bad());
    }
    Ok((op, w))
}

fn ingest_cmd(a: &IngestArgs, out: Option<&Path>) -> Result<i32, HarnessError> {
    let opcode_weights = a.weights.iter().map(|w| parse_weight(w)).collect::<Result<BTreeMap<_, _>, _>>()?;
    let opts = IngestOptions { strict: a.strict, opcode_weights };
    let text = std::fs::read_to_string(&a.path)?;
    let mut records = Vec::new();
    let (mut findings, mut errors) = (0, 0);
    for (i, r) in parse_ir_stream(&text, &opts).into_iter().enumerate() {
        match r.and_then(|ing| record_to_factors(&ing.record, &opts).map(|fs| (ing, fs))) {
            Ok((ing, fs)) => {
                let v = boolean_rule(&fs);
                findings += v.vulnerable as usize;
                records.push(json!({
                    "index": i,
                    "id": ing.record.id,
                    "sol_name": ing.record.sol_name.as_ref().or(ing.record.sol_path.as_ref()),
                    "warnings": ing.warnings,
                    "factors": fs.to_json(),
                    "verdict": v,
                }));
            }
            Err(e) => {
                errors += 1;
                records.push(json!({"index": i, "error": e.to_string()}));
            }
        }
    }
    emit(&json!({"records": records, "findings": findings, "errors": errors}), out)?;
    Ok(if errors > 0 {
        2
    } else if findings > 0 {
        a.findings_exit
    } else {
        0
    })
}

fn parse_ratio(s: &str) -> Result<(f64, f64), HarnessError> {
    let bad = || HarnessError::Config(format!("ratio {s:?} is not p:q with positive parts"));
    let (p, q) = s.split_once(':').ok_or_else(bad)?;
    let (p, q): (f64, f64) = (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?);
    if !(p >= 0.0 && q >= 0.0 && p + q > 0.0 && (p + q).is_finite()) {
        return Err(bad());
    }
    Ok((p, q))
}

fn gen_cmd(a: &GenArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, HarnessError> {
    let out = out.ok_or_else(|| HarnessError::Config("gen needs --out for the corpus".into()))?;
    let mut counts = BTreeMap::new();
    for t in &a.task {
        for name in t.split(',') {
            let task =
                Task::parse(name.trim()).ok_or_else(|| HarnessError::Config(format!("unknown task {name:?}")))?;
            counts.insert(task, a.count);
        }
    }
    let seed = a.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
    let corpus = gen_corpus(&CorpusSpec { counts, ratio: parse_ratio(&a.ratio)?, seed });
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_jsonl(&corpus.samples, std::io::BufWriter::new(std::fs::File::create(out)?))?;
    let manifest_path = a.manifest.clone().unwrap_or_else(|| out.with_extension("manifest.json"));
    let mut manifest = serde_json::to_value(&corpus.manifest)?;
    let mut code = 0;
    if a.validate {
        let failures: Vec<Value> = corpus
            .samples
            .par_iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let r = validate(s);
                (!r.passed).then(|| json!({"index": i, "issues": r.issues}))
            })
            .collect();
        if !failures.is_empty() {
            code = 2;
        }
        manifest["validation_failures"] = Value::from(failures);
    }
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    eprintln!("wrote {} samples to {}", corpus.samples.len(), out.display());
    Ok(code)
}

fn read_corpus(p: &Path) -> Result<Vec<LabeledSample>, HarnessError> {
    read_jsonl(BufReader::new(std::fs::File::open(p)?))
        .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))
}

fn parse_simplex(s: &str) -> Result<[f64; 4], HarnessError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| HarnessError::Config(format!("{s:?} is not four comma-separated numbers")))?;
    v.try_into().map_err(|_| HarnessError::Config(format!("{s:?} is not four comma-separated numbers")))
}

fn parse_mask(s: &str) -> Result<[bool; 4], HarnessError> {
    let bad = || HarnessError::Config(format!("mask {s:?} is not four 0/1 digits"));
    let v: Vec<bool> = s
        .chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            _ => Err(bad()),
        })
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| bad())
}

fn fusion_setup(
    f: &FusionFlags,
    cfg: &RunConfig,
) -> Result<(FusionModel<f64>, crate::fusion::TrainConfig), HarnessError> {
    let fc = &cfg.fusion;
    let merged = FusionConfig {
        learning_rate: f.lr.or(fc.learning_rate),
        total_steps: f.steps.or(fc.total_steps),
        batch_size: f.batch.or(fc.batch_size),
        weight_decay: f.weight_decay.or(fc.weight_decay),
        ..FusionConfig::default()
    };
    let seed = f.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
    let mut m = FusionModel::<f64>::new(H);
    let g = &mut m.gate;
    if let Some(v) = f.lambda_jaco.or(fc.lambda_jaco) {
        g.lambda_jaco = v;
    }
    if let Some(v) = f.tau_gate.or(fc.tau_gate) {
        g.tau_gate = v;
    }
    if let Some(v) = f.warmup.or(fc.warmup_ratio) {
        g.warmup_ratio = v;
    }
    g.mask = match &f.mask {
        Some(s) => parse_mask(s)?,
        None => fc.mask.unwrap_or([true; 4]),
    };
    g.fixed_alpha = match &f.fixed_alpha {
        Some(s) => Some(parse_simplex(s)?),
        None => fc.fixed_alpha,
    };
    g.prior = match &f.prior {
        Some(s) => Some(parse_simplex(s)?),
        None => fc.prior,
    };
    g.prior_mix = f.prior_mix || fc.prior_mix.unwrap_or(false);
    g.sensitivity = match f.sensitivity {
        Some(SensArg::Total) => Sensitivity::Total,
        Some(SensArg::FusionOnly) => Sensitivity::FusionOnly,
        None if fc.sensitivity.as_deref() == Some("fusion-only") => Sensitivity::FusionOnly,
        None => Sensitivity::Total,
    };
    if f.delta.or(fc.delta).is_some() {
        eprintln!("warning: delta is ignored");
    }
    g.validate()?;
    Ok((m, merged.train_config(seed)))
}

fn train_cmd(a: &TrainArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, HarnessError> {
    let samples = read_corpus(&a.data)?;
    let data = dataset(&samples, &AnalysisOptions::default())?;
    let (template, tc) = fusion_setup(&a.fusion, cfg)?;
    let (model, report) = train(&data, &template, &tc)?;
    std::fs::write(&a.model, serde_json::to_string_pretty(&model.to_checkpoint())? + "\n")?;
    let last = report.history.last().copied();
    emit(
        &json!({
            "samples": data.len(),
            "steps": tc.total_steps,
            "warmup_steps": report.warmup_steps,
            "degenerate_targets": report.degenerate_targets,
            "final_loss": last.map(|l| json!({"ce": l.ce, "jaco": l.jaco, "total": l.total})),
            "epoch_ce": report.epoch_ce,
            "model": a.model.display().to_string(),
        }),
        out,
    )?;
    Ok(0)
}

fn load_model(p: &Path) -> Result<FusionModel<f64>, HarnessError> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
    Ok(FusionModel::from_checkpoint(&v)?)
}

fn infer_cmd(a: &InferArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, HarnessError> {
    let model = load_model(&a.model)?;
    let opts = AnalysisOptions::default();
    let mut rows = Vec::new();
    if let Some(d) = &a.data {
        let samples = read_corpus(d)?;
        for (i, (z, y)) in dataset(&samples, &opts)?.iter().enumerate() {
            rows.push(json!({"index": i, "probability": model.predict(z)?, "gate": model.gate(z)?, "label": y}));
        }
    } else {
        for p in input_paths(&a.paths, cfg)? {
            let path = p.display().to_string();
            let fs = factors_of(&std::fs::read_to_string(&p)?, &opts)
                .map_err(|err| HarnessError::Parse { path: path.clone(), err })?;
            let z = extract_branch_features(&fs);
            rows.push(json!({"path": path, "probability": model.predict(&z)?, "gate": model.gate(&z)?}));
        }
    }
    emit(&json!({"predictions": rows}), out)?;
    Ok(0)
}

fn read_predictions(p: &Path) -> Result<Vec<(f64, bool)>, HarnessError> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
    let list = v.get("predictions").unwrap_or(&v);
    let bad =
        |i: usize| HarnessError::Config(format!("prediction {i} needs a numeric score and a 0/1 or boolean label"));
    list.as_array()
        .ok_or_else(|| HarnessError::Config("predictions must be a JSON list".into()))?
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let score =
                e.get("score").or_else(|| e.get("probability")).and_then(Value::as_f64).ok_or_else(|| bad(i))?;
            let label = match e.get("label") {
                Some(Value::Bool(b)) => *b,
                Some(Value::Number(n)) if n.as_u64() == Some(0) || n.as_u64() == Some(1) => n.as_u64() == Some(1),
                _ => return Err(bad(i)),
            };
            Ok((score, label))
        })
        .collect()
}

fn eval_cmd(a: &EvalArgs, out: Option<&Path>) -> Result<i32, HarnessError> {
    let preds = match (&a.model, &a.data, &a.predictions) {
        (_, _, Some(p)) => read_predictions(p)?,
        (Some(m), Some(d), None) => {
            let model = load_model(m)?;
            dataset(&read_corpus(d)?, &AnalysisOptions::default())?
                .iter()
                .map(|(z, y)| Ok((model.predict(z)?, *y)))
                .collect::<Result<Vec<_>, HarnessError>>()?
        }
        _ => return Err(HarnessError::Config("eval needs --predictions, or --model with --data".into())),
    };
    let report = compute_metrics(&preds, &MetricsOptions { threshold: a.threshold, recall_only: a.recall_only })?;
    if a.csv {
        let text = format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.to_csv_row());
        match out {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
    } else {
        emit(&serde_json::to_value(&report)?, out)?;
    }
    Ok(0)
}

/// Column rank of the logit Jacobian for a seeded generic model and input,
/// with every branch enabled and with the given mask.
pub fn generic_jacobian_ranks(seed: u64, mask: [bool; 4]) -> (usize, usize) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut m = FusionModel::<f64>::new(H);
    for k in 0..4 {
        m.gate.u[k] = (0..H).map(|_| r.gen_range(-1.0..1.0)).collect();
        m.gate.c[k] = r.gen_range(-0.5..0.5);
    }
    m.head.w = (0..H).map(|_| r.gen_range(-1.0..1.0)).collect();
    m.head.b = r.gen_range(-0.5..0.5);
    let z =
        crate::fusion::BranchFeatures { z: std::array::from_fn(|_| (0..H).map(|_| r.gen_range(-1.0..1.0)).collect()) };
    let full = jacobian_column_rank(&m, &z);
    m.gate.mask = mask;
    (full, jacobian_column_rank(&m, &z))
}

fn verify_rank_cmd(a: &VerifyRankArgs, out: Option<&Path>) -> Result<i32, HarnessError> {
    let samples = match &a.data {
        Some(d) => read_corpus(d)?,
        None => factorial_grid(a.per_cell, a.seed),
    };
    let bits: Vec<[bool; 4]> = samples.iter().map(|s| s.labels.bits).collect();
    let design = design_matrix_rank(&bits);
    let cert = find_rank_certificate(&bits);
    let cert_rank = cert.as_ref().map(|idx| design_matrix_rank(&idx.iter().map(|&i| bits[i]).collect::<Vec<_>>()).rank);
    let (jac_full, jac_masked) = generic_jacobian_ranks(a.seed, [true, true, false, false]);
    emit(
        &json!({
            "design": design,
            "certificate": cert,
            "certificate_rank": cert_rank,
            "jacobian_rank_full_mask": jac_full,
            "jacobian_rank_two_masked": jac_masked,
        }),
        out,
    )?;
    Ok(if design.rank == 4 && jac_full == 4 && jac_masked <= 2 { 0 } else { 1 })
}

fn prior_shift_cmd(a: &PriorShiftArgs, cfg: &RunConfig, out: Option<&Path>) -> Result<i32, HarnessError> {
    let d = PriorShiftConfig::default();
    let mut train = d.train.clone();
    if let Some(s) = a.steps.or(cfg.fusion.total_steps) {
        train.total_steps = s;
    }
    let ps = PriorShiftConfig {
        seeds: if cfg.seeds.is_empty() { (0..a.seeds).collect() } else { cfg.seeds.clone() },
        n_train: a.samples,
        n_eval: a.eval_samples,
        train,
        ..d
    };
    let report = run_prior_shift_experiment(&ps)?;
    emit(&serde_json::to_value(&report)?, out)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_parsers() {
        assert_eq!(parse_ratio("0.5:0.95").unwrap(), (0.5, 0.95));
        assert!(parse_ratio("1-2").is_err());
        assert!(parse_ratio("0:0").is_err());
        assert_eq!(parse_mask("1010").unwrap(), [true, false, true, false]);
        assert!(parse_mask("10").is_err());
        assert_eq!(parse_simplex("0.25,0.25,0.25,0.25").unwrap(), [0.25; 4]);
        assert_eq!(parse_weight("CALL=0.5").unwrap(), (Opcode::Call, 0.5));
        assert!(parse_weight("JUMP=1").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["revul", "frobnicate"]), 2);
        assert_eq!(run(["revul"]), 2);
        assert_eq!(run(["revul", "--help"]), 0);
    }

    #[test]
    fn generic_jacobian() {
        for seed in 0..5 {
            assert_eq!(generic_jacobian_ranks(seed, [true, false, true, false]), (4, 2));
        }
    }
}
