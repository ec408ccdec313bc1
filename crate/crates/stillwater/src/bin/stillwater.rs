//! Command-line front end: simulate, track, restore, evaluate, bench.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use stillwater::imaging::{load_frame, load_sequence, save_frame, save_sequence};
use stillwater::pipeline::{
    evaluate, run_benchmark, run_restore, BenchScene, Mode, PipelineConfig,
};
use stillwater::tracking::{detect_features, save_trajectories, track};
use stillwater::wave_sim;
use stillwater::Error;

#[derive(Parser)]
#[command(name = "stillwater", version, about = "Restore videos distorted by a wavy water surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic distorted scene with ground truth.
    Simulate(SimulateArgs),
    /// Detect and track feature points through a sequence.
    Track(TrackArgs),
    /// Restore a distorted sequence.
    Restore(RestoreArgs),
    /// Score a restored sequence against a clean reference.
    Evaluate(EvaluateArgs),
    /// Run the scene x mode benchmark table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CommonConfig {
    /// TOML pipeline configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    aggregation: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed LASSO weight; omit to cross-validate.
    #[arg(long)]
    lambda: Option<f64>,
}

impl CommonConfig {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str(&text)
                    .map_err(|e| Error::InvalidInput(format!("bad config: {e}")))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(a) = &self.aggregation {
            cfg.aggregation = a.parse()?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.lambda {
            cfg.solver.lambda = l;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Clean input image; a procedural test card is generated if omitted.
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 101)]
    frames: usize,
    /// Number of superposed sinusoidal surface waves.
    #[arg(long, default_value_t = 3)]
    waves: usize,
    /// Target RMS displacement in pixels.
    #[arg(long, default_value_t = 6.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrackArgs {
    /// Input sequence directory.
    #[arg(long)]
    input: PathBuf,
    /// Output trajectory CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonConfig,
}

#[derive(Args)]
struct RestoreArgs {
    /// Input sequence directory.
    #[arg(long)]
    input: PathBuf,
    /// Run directory for restored sequence and stage artifacts.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonConfig,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Clean reference image.
    #[arg(long)]
    clean: PathBuf,
    /// Distorted input sequence directory.
    #[arg(long)]
    distorted: PathBuf,
    /// Restored sequence directory.
    #[arg(long)]
    restored: PathBuf,
    /// Optional report output path (key=value lines).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonConfig,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON manifest: [{"name": ..., "clean": ..., "distorted": ...}, ...].
    #[arg(long)]
    scenes: PathBuf,
    /// Comma-separated modes to run.
    #[arg(long, default_value = "cs,peof,cs_peof")]
    modes: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    if let Ok(threads) = std::env::var("STILLWATER_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("STILLWATER_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::NonFiniteObjective { .. } | Error::DegenerateSampling { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Track(args) => do_track(args),
        Command::Restore(args) => restore(args),
        Command::Evaluate(args) => do_evaluate(args),
        Command::Bench(args) => bench(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let clean = match &args.clean {
        Some(path) => load_frame(path)?,
        None => wave_sim::test_card(args.width, args.height, args.seed),
    };
    let model = wave_sim::random_model(args.seed, args.waves, args.sigma);
    let bundle = wave_sim::synthesize(&clean, &model, args.frames, args.seed)?;

    std::fs::create_dir_all(&args.out)?;
    save_sequence(&bundle.distorted, &args.out.join("distorted"))?;
    save_frame(&bundle.clean, &args.out.join("clean.png"))?;
    model.save(&args.out.join("model.toml"))?;
    bundle.true_field.save(&args.out.join("true_field.mvf"))?;
    println!(
        "simulated {} frames at {}x{}, analytic rms {:.3} px -> {}",
        args.frames,
        bundle.clean.width(),
        bundle.clean.height(),
        model.analytic_rms(),
        args.out.display()
    );
    Ok(())
}

fn do_track(args: TrackArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let video = load_sequence(&args.input)?;
    let seeds = detect_features(video.frame(0), &cfg.detect);
    let trajs = track(&video, &seeds, &cfg.track)?;
    let valid = trajs.iter().filter(|t| t.valid).count();
    save_trajectories(&trajs, &args.out)?;
    println!(
        "tracked {} points ({} valid, {} rejected) -> {}",
        trajs.len(),
        valid,
        trajs.len() - valid,
        args.out.display()
    );
    Ok(())
}

fn restore(args: RestoreArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let video = load_sequence(&args.input)?;
    let out = run_restore(&video, &cfg)?;

    std::fs::create_dir_all(&args.out)?;
    save_sequence(&out.restored, &args.out.join("restored"))?;
    save_frame(&out.mean_image, &args.out.join("mean.png"))?;
    if let Some(field) = &out.field {
        field.save(&args.out.join("field.mvf"))?;
    }
    if !out.trajectories.is_empty() {
        save_trajectories(&out.trajectories, &args.out.join("tracks.csv"))?;
    }
    std::fs::write(args.out.join("log.txt"), out.log.to_text())?;
    print!("{}", out.log.to_text());
    println!("restored sequence -> {}", args.out.display());
    Ok(())
}

fn do_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let clean = load_frame(&args.clean)?;
    let distorted = load_sequence(&args.distorted)?;
    let restored = load_sequence(&args.restored)?;
    let mean = stillwater::imaging::mean_frame(&restored);
    let report = evaluate(&clean, &distorted, &mean, &restored, &cfg)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.out {
        std::fs::write(path, report.to_text())?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct SceneEntry {
    name: String,
    clean: PathBuf,
    distorted: PathBuf,
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let modes = args
        .modes
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Mode>, _>>()?;
    let text = std::fs::read_to_string(&args.scenes)?;
    let entries: Vec<SceneEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("bad scene manifest: {e}")))?;
    let base = args.scenes.parent().unwrap_or(Path::new("."));
    let mut scenes = Vec::with_capacity(entries.len());
    for entry in entries {
        scenes.push(BenchScene {
            name: entry.name,
            clean: load_frame(&resolve_path(base, &entry.clean))?,
            distorted: load_sequence(&resolve_path(base, &entry.distorted))?,
        });
    }
    let csv = run_benchmark(&scenes, &modes, &cfg);
    std::fs::write(&args.out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
