use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use patterning::batch;
use patterning::config::ExperimentConfig;
use patterning::io::{record, render};
use patterning::metrics;
use patterning::spectral::SpectralBasis;

#[derive(Parser)]
#[command(
    name = "patterning",
    about = "Ergodic coverage simulation for micro-patterning robot teams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and write its log and images.
    Run(ExperimentArgs),
    /// Run the batch protocol: every target x {none, full} x seeded trials.
    Batch(ExperimentArgs),
    /// Render the image set for a stored trial log.
    Render(RenderArgs),
    /// Recompute metrics from stored trial logs.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file (key = value lines); CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Communication mode: none | full.
    #[arg(long)]
    comm: Option<String>,
    /// Target name(s) or graymap path(s), comma-separated.
    #[arg(long)]
    target: Option<String>,
    /// Team size.
    #[arg(long)]
    agents: Option<usize>,
    /// Trial duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trials per condition (batch only).
    #[arg(long)]
    trials: Option<usize>,
    /// Any other config field, as key=value. May repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ExperimentArgs {
    fn build(&self) -> patterning::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(comm) = &self.comm {
            cfg.set("comm", comm)?;
        }
        if let Some(target) = &self.target {
            cfg.set("targets", target)?;
        }
        if let Some(agents) = self.agents {
            cfg.agents = agents;
        }
        if let Some(duration) = self.duration {
            cfg.duration = duration;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        for kv in &self.set {
            let Some((key, value)) = kv.split_once('=') else {
                return Err(patterning::Error::Config(format!(
                    "--set expects key=value, got '{kv}'"
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Trial log to render.
    #[arg(long)]
    record: PathBuf,
    /// Target name or graymap path (for the heat image and extents).
    #[arg(long, default_value = "uniform")]
    target: String,
    /// Output image edge length in pixels.
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Grid resolution for built-in targets.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trial logs to analyze.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Target the trials were run against.
    #[arg(long, default_value = "uniform")]
    target: String,
    /// Modes per axis used for the trials.
    #[arg(long, default_value_t = 10)]
    modes: usize,
    /// Grid resolution for built-in targets.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_one(cfg: &ExperimentConfig) -> patterning::Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let basis = SpectralBasis::new(cfg.extents, cfg.modes_per_axis)?;
    let spec = cfg.targets.first().expect("validated nonempty").clone();
    let objective = patterning::targets::label(&spec);
    let (density, target) = batch::prepare_target(cfg, &spec, &basis)?;
    let comm = cfg.comm_config();
    let trial = batch::run_single(cfg, &basis, &target, &comm, cfg.seed)?;
    let stem = format!("trial_{}_{}_{:04}", objective, comm.mode, cfg.seed);
    let csv_path = cfg.out_dir.join(format!("{stem}.csv"));
    record::write_trial_csv(&trial, &csv_path)?;
    render::render_trial(&trial, &density, cfg.render_size, &cfg.out_dir, &stem)?;
    let performance = metrics::trial_performance(&trial, &target, &basis)?;
    println!(
        "trial seed {} ({} agents, comm {}, target {})",
        cfg.seed, cfg.agents, comm.mode, objective
    );
    println!("  log: {}", csv_path.display());
    if let Some(e) = trial.final_ergodic_metric() {
        println!("  final ergodic metric: {e:.6e}");
    }
    if let Some(h) = trial.final_heterogeneity() {
        println!("  final team heterogeneity: {h:.6e}");
    }
    println!("  performance (dimple metric, lower is better): {performance:.6e}");
    Ok(())
}

fn run_batch_cmd(cfg: &ExperimentConfig) -> patterning::Result<()> {
    let summary = batch::run_batch(cfg)?;
    println!("condition,objective,median_heterogeneity,median_performance,trials");
    for row in &summary {
        println!(
            "{},{},{},{},{}",
            row.condition,
            row.objective,
            row.median_heterogeneity,
            row.median_performance,
            row.trials
        );
    }
    println!("artifacts in {}", cfg.out_dir.display());
    Ok(())
}

fn run_render(args: &RenderArgs) -> patterning::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let trial = record::read_trial_csv(&args.record)?;
    let density = patterning::targets::resolve(&args.target, args.resolution, [1.0, 1.0], false)?;
    let stem = args
        .record
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trial".into());
    render::render_trial(&trial, &density, args.size, &args.out, &stem)?;
    println!("rendered {stem}_{{dimples.pgm,trajectories.ppm,target.pgm}} in {}", args.out.display());
    Ok(())
}

fn run_analyze(args: &AnalyzeArgs) -> patterning::Result<()> {
    let basis = SpectralBasis::new([1.0, 1.0], args.modes)?;
    let density =
        patterning::targets::resolve(&args.target, args.resolution, [1.0, 1.0], false)?;
    let target = patterning::spectral::transform_density(&basis, &density)?;
    let rows = batch::analyze(&args.records, &basis, &target)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            batch::write_analysis_csv(&rows, std::io::BufWriter::new(file))?;
            println!("wrote {}", path.display());
        }
        None => batch::write_analysis_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => args.build().and_then(|cfg| run_one(&cfg)),
        Command::Batch(args) => args.build().and_then(|cfg| run_batch_cmd(&cfg)),
        Command::Render(args) => run_render(args),
        Command::Analyze(args) => run_analyze(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(inner) = source {
            eprintln!("  caused by: {inner}");
            source = inner.source();
        }
        std::process::exit(1);
    }
}
