//! Command-line front end: train, eval, sweep, protos, export, report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrl::harness::{
    export_embeddings, grid_search, report_for, run_multi_seed, run_seed, Axis, Checkpoint,
    ExperimentConfig, Grid, Layer, ManifestEntry, Method, Model, OutputLayout, Partition,
    TrainOptions,
};
use rrl::metrics::{render_table, AggregateReport, RunReport};
use rrl::pbr::PbrConfig;
use rrl::pcm::{
    build_prototype_sets, builtin_embedders, load_prototypes, save_prototypes, PcmConfig,
    SamplingStrategy,
};
use rrl::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "rrl",
    version,
    about = "Hierarchical rhetorical role labeling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one or more seeds and write checkpoints and reports.
    Train(TrainArgs),
    /// Score a saved checkpoint on a split and print the role-wise table.
    Eval(EvalArgs),
    /// Exhaustive grid search over one or more axes.
    Sweep(SweepArgs),
    /// Extract and save PCM prototype sets from the training split.
    Protos(ProtosArgs),
    /// Dump per-sentence vectors of a checkpoint.
    Export(ExportArgs),
    /// Render saved reports side by side.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Replaces the configured method; missing method sections get defaults.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Replaces the configured seed list (repeatable).
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Precomputed prototype file for PCM methods.
    #[arg(long)]
    protos: Option<PathBuf>,
    /// Aggregate report of a baseline run-set for significance testing.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    /// Fold index for k-fold configs.
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Axis name, optionally with explicit values: `q` or `q=2,4,8`.
    /// Known axes: lr, q, lambda_prox, lambda_div, injection, sampling.
    #[arg(long = "axis", required = true)]
    axes: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyName {
    Full,
    Random,
    Supervised,
}

#[derive(Debug, Args)]
struct ProtosArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Overrides the configured sampling strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyName>,
    /// Document fraction for `random`.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Candidate cluster counts for `supervised`, as `lo,hi`.
    #[arg(long, default_value = "2,10")]
    clusters: String,
    /// Seed for `random` and `supervised` sampling.
    #[arg(long, default_value_t = 0)]
    sampling_seed: u64,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Output file; defaults to `prototypes/<name>-<strategy>.json` under the output dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_parser = parse_layer, default_value = "pooled")]
    layer: Layer,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// `.csv` writes comma-separated, anything else tab-separated.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Run reports, seed runs or aggregate reports (JSON).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Column names, in file order; defaults to the file stems.
    #[arg(long = "name")]
    names: Vec<String>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_layer(s: &str) -> std::result::Result<Layer, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Protos(a) => cmd_protos(a),
        Command::Export(a) => cmd_export(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Switches the method, adding default sections it needs and dropping the
/// ones it does not.
fn set_method(cfg: &mut ExperimentConfig, method: Method) {
    cfg.method = method;
    if method == Method::Pbr {
        cfg.pbr.get_or_insert_with(PbrConfig::default);
    } else {
        cfg.pbr = None;
    }
    if method.uses_pcm() {
        cfg.pcm.get_or_insert_with(PcmConfig::default);
    } else {
        cfg.pcm = None;
    }
}

fn partition(cfg: &ExperimentConfig, fold: usize) -> Result<Partition> {
    let mut parts = cfg.partitions()?;
    if fold >= parts.len() {
        return Err(Error::InvalidSplit(format!(
            "fold {fold} out of range ({} partitions)",
            parts.len()
        )));
    }
    Ok(parts.swap_remove(fold))
}

fn split_of(part: &Partition, split: SplitName) -> (&rrl::corpus::Corpus, &'static str) {
    match split {
        SplitName::Train => (&part.train, "train"),
        SplitName::Dev => (&part.dev, "dev"),
        SplitName::Test => (&part.test, "test"),
    }
}

fn load_model(cfg: &ExperimentConfig, path: &Path) -> Result<(Checkpoint, Model)> {
    let ck = Checkpoint::load(path)?;
    ck.ensure_matches(cfg)?;
    let model = Model::from_checkpoint(&ck)?;
    Ok((ck, model))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(m) = a.method {
        set_method(&mut cfg, m);
    }
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds.clone();
    }
    cfg.validate()?;
    let scheme = cfg.scheme()?;
    let prototypes = match &a.protos {
        Some(p) if cfg.method.uses_pcm() => Some(load_prototypes(p, &scheme)?),
        Some(_) => {
            return Err(Error::Config(format!(
                "--protos needs a PCM method, not `{}`",
                cfg.method
            )))
        }
        None => None,
    };
    let opts = TrainOptions {
        prototypes,
        save_checkpoint: true,
    };
    let layout = OutputLayout::new(&cfg.output_dir);
    layout.ensure()?;
    let fp = cfg.fingerprint();
    let stem = format!("{}-{}", cfg.name, cfg.method);

    if cfg.seeds.len() == 1 {
        let seed = cfg.seeds[0];
        let run = run_seed(&cfg, seed, &opts)?;
        let entry = ManifestEntry {
            fingerprint: fp,
            seed: Some(seed),
            ..ManifestEntry::default()
        };
        let path = layout.write_json(
            &layout.reports,
            &format!("{stem}-seed{seed}.json"),
            &run,
            entry,
        )?;
        for (i, s) in run.states.iter().enumerate() {
            println!(
                "fold {i}: best dev {:.4} at epoch {}",
                s.best_dev.unwrap_or(0.0),
                s.best_epoch.unwrap_or(0)
            );
        }
        println!("{}", render_table(&[(cfg.method.as_str(), &run.report)])?);
        println!("report: {}", path.display());
        return Ok(());
    }

    let baseline = match &a.baseline {
        Some(p) => Some(serde_json::from_str::<AggregateReport>(
            &std::fs::read_to_string(p).map_err(Error::file(p))?,
        )?),
        None => None,
    };
    let (agg, runs) = run_multi_seed(&cfg, &opts, baseline.as_ref())?;
    for run in &runs {
        let entry = ManifestEntry {
            fingerprint: fp.clone(),
            seed: Some(run.seed),
            ..ManifestEntry::default()
        };
        layout.write_json(
            &layout.reports,
            &format!("{stem}-seed{}.json", run.seed),
            run,
            entry,
        )?;
    }
    let entry = ManifestEntry {
        fingerprint: fp,
        note: format!("{} seeds", agg.runs.len()),
        ..ManifestEntry::default()
    };
    let path = layout.write_json(
        &layout.reports,
        &format!("{stem}-aggregate.json"),
        &agg,
        entry,
    )?;
    print_aggregate(&agg);
    println!("report: {}", path.display());
    Ok(())
}

fn print_aggregate(agg: &AggregateReport) {
    println!(
        "{}: macro-F1 {:.2} ± {:.2}, weighted-F1 {:.2} ± {:.2} over seeds {:?}",
        agg.method,
        100.0 * agg.macro_mean,
        100.0 * agg.macro_std,
        100.0 * agg.weighted_mean,
        100.0 * agg.weighted_std,
        agg.seeds()
    );
    for (name, s) in [
        ("macro", &agg.significance_macro),
        ("weighted", &agg.significance_weighted),
    ] {
        if let Some(s) = s {
            println!(
                "  {name} vs baseline: {} t={:.3} df={} p={:.4} (0.05: {}, 0.01: {})",
                s.test, s.t, s.df, s.p_value, s.at_05, s.at_01
            );
        }
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let (ck, model) = load_model(&cfg, &a.checkpoint)?;
    let part = partition(&cfg, a.fold)?;
    let (corpus, split) = split_of(&part, a.split);
    if corpus.is_empty() {
        return Err(Error::InvalidSplit(format!("the {split} split is empty")));
    }
    let report = report_for(&model, corpus, split, &ck.fingerprint, ck.seed)?;
    println!("{}", render_table(&[(cfg.method.as_str(), &report)])?);
    println!("accuracy {:.2}", 100.0 * report.accuracy);
    if let Some(acc) = report.assignment_accuracy {
        println!("prototype assignment accuracy {:.2}", 100.0 * acc);
    }
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn parse_axis(spec: &str, cfg: &ExperimentConfig) -> Result<Axis> {
    match spec.split_once('=') {
        Some((name, values)) => Axis::parse(name.trim(), values),
        None => Axis::standard(spec.trim(), cfg),
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let axes = a
        .axes
        .iter()
        .map(|s| parse_axis(s, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let stem = format!(
        "{}-sweep-{}",
        cfg.name,
        axes.iter().map(Axis::name).collect::<Vec<_>>().join("-")
    );
    let grid = Grid::new(axes);
    let result = grid_search(&cfg, &grid, a.seed, &TrainOptions::default())?;
    result.save(&OutputLayout::new(&cfg.output_dir), &stem)?;
    print!("{}", result.render());
    println!(
        "best: {}",
        result.rows[result.best]
            .settings
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

fn cmd_protos(a: ProtosArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let mut pcm = cfg.pcm.clone().unwrap_or_default();
    if let Some(s) = a.strategy {
        pcm.sampling = match s {
            StrategyName::Full => SamplingStrategy::Full,
            StrategyName::Random => SamplingStrategy::Random {
                fraction: a.fraction,
                seed: a.sampling_seed,
            },
            StrategyName::Supervised => {
                let range = parse_range(&a.clusters)?;
                SamplingStrategy::Supervised {
                    cluster_range: range,
                    seed: a.sampling_seed,
                }
            }
        };
    }
    let part = partition(&cfg, a.fold)?;
    let sets = build_prototype_sets(&pcm, &part.train, &builtin_embedders())?;
    let layout = OutputLayout::new(&cfg.output_dir);
    let out = match &a.out {
        Some(p) => p.clone(),
        None => {
            layout.ensure()?;
            layout
                .prototypes
                .join(format!("{}-{}.json", cfg.name, pcm.sampling.name()))
        }
    };
    save_prototypes(&out, part.train.scheme(), &sets)?;
    if a.out.is_none() {
        layout.record(
            &out,
            ManifestEntry {
                fingerprint: cfg.fingerprint(),
                note: format!("{} set(s), {} sampling", sets.len(), pcm.sampling.name()),
                ..ManifestEntry::default()
            },
        )?;
    }
    for (i, s) in sets.iter().enumerate() {
        println!(
            "set {i}: {} prototypes of width {} from {} documents",
            s.len(),
            s.dim(),
            s.source.doc_ids.len()
        );
    }
    println!("prototypes: {}", out.display());
    Ok(())
}

fn parse_range(s: &str) -> Result<[usize; 2]> {
    let bad = || Error::Config(format!("cluster range `{s}` is not `lo,hi`"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    Ok([
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ])
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let (_, model) = load_model(&cfg, &a.checkpoint)?;
    let part = partition(&cfg, a.fold)?;
    let (corpus, split) = split_of(&part, a.split);
    let n = export_embeddings(&model, corpus, a.layer, &a.out)?;
    println!(
        "{n} {} rows from the {split} split written to {}",
        a.layer,
        a.out.display()
    );
    Ok(())
}

/// Accepts a run report, a seed run (its fold average) or an aggregate
/// report (the mean over its seeds).
fn read_report(path: &Path) -> Result<RunReport> {
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).map_err(Error::file(path))?)?;
    if value.get("per_label").is_some() {
        return Ok(serde_json::from_value(value)?);
    }
    if let Some(r) = value.get("report") {
        return Ok(serde_json::from_value(r.clone())?);
    }
    if value.get("runs").is_some() {
        let agg: AggregateReport = serde_json::from_value(value)?;
        return RunReport::average(&agg.runs);
    }
    Err(Error::Metric(format!(
        "{} is not a report file",
        path.display()
    )))
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    if !a.names.is_empty() && a.names.len() != a.files.len() {
        return Err(Error::Config(format!(
            "{} names given for {} files",
            a.names.len(),
            a.files.len()
        )));
    }
    let reports = a
        .files
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = if a.names.is_empty() {
        a.files
            .iter()
            .map(|p| {
                p.file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("run")
                    .to_string()
            })
            .collect()
    } else {
        a.names.clone()
    };
    let columns: Vec<(&str, &RunReport)> = names.iter().map(String::as_str).zip(&reports).collect();
    println!("{}", render_table(&columns)?);
    Ok(())
}
