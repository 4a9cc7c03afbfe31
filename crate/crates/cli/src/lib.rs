//! Experiment runner for rate-distortion explanations.

pub mod config;
pub mod error;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rdx_core::audio::{render_dataset, tone_manifest, N_CLASSES};
use rdx_core::radiomap::io::city_to_pgm;
use rdx_core::radiomap::{generate_city, CityParams};
use rdx_core::rng::substream;

pub use config::{ExperimentConfig, Task};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rdx", version, about = "Rate-distortion explanations for black-box models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its artifacts.
    Run(RunArgs),
    /// Check a config and print the resolved values without running.
    Validate(ConfigArgs),
    /// Generate a random city and write it as PGM and JSON.
    GenCity(GenCityArgs),
    /// Generate a synthetic tone manifest and its spectra.
    GenTones(GenTonesArgs),
    /// Estimate the distortion of one fixed mask (`task` defaults to `distortion_probe`).
    Probe(RunArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "RDX_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenCityArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 8)]
    pub buildings: usize,
}

#[derive(Debug, Args)]
pub struct GenTonesArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub per_class: usize,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rdx: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(a) => run(&a, None),
        Command::Probe(a) => run(&a, Some(Task::DistortionProbe)),
        Command::Validate(a) => {
            let cfg = load(&a, None)?;
            println!("OK");
            println!("{}", serde_json::to_string_pretty(&cfg.echo()).expect("echo serializes"));
            Ok(())
        }
        Command::GenCity(a) => gen_city(&a),
        Command::GenTones(a) => gen_tones(&a),
    }
}

fn load(a: &ConfigArgs, task_default: Option<Task>) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", a.config.display())))?;
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    ExperimentConfig::parse_with_default(&text, a.seed, base, task_default)
}

fn run(a: &RunArgs, task_default: Option<Task>) -> Result<(), CliError> {
    let cfg = load(&a.cfg, task_default)?;
    if a.threads == Some(0) {
        return Err(CliError::config(None, Some("threads"), "threads must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Run(format!("cannot start thread pool: {e}")))?;
    let start = Instant::now();
    let outcome = pool.install(|| tasks::execute(&cfg, &a.out))?;
    println!("{} wall_time={:.3}s", outcome.summary, start.elapsed().as_secs_f64());
    Ok(())
}

fn io_write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn gen_city(a: &GenCityArgs) -> Result<(), CliError> {
    let params = CityParams {
        height: a.height,
        width: a.width,
        n_buildings: a.buildings,
        ..CityParams::default()
    };
    let city = generate_city(a.seed, &params)?;
    fs::create_dir_all(&a.out)?;
    io_write(&a.out.join("city.pgm"), &city_to_pgm(&city))?;
    let json = serde_json::to_string_pretty(&city).expect("city serializes");
    io_write(&a.out.join("city.json"), &(json + "\n"))?;
    println!("city seed={} buildings={} size={}x{}", a.seed, city.buildings().len(), a.width, a.height);
    Ok(())
}

/// Writes the same manifest and spectra the synthetic audio dataset uses
/// for this seed.
fn gen_tones(a: &GenTonesArgs) -> Result<(), CliError> {
    let classes: Vec<usize> = (0..N_CLASSES).collect();
    let specs = tone_manifest(&classes, a.per_class, a.seed);
    let spectra = render_dataset(&specs, substream(a.seed, u64::MAX))?;
    fs::create_dir_all(&a.out)?;
    let manifest: String = specs.iter().map(|s| s.to_manifest_line() + "\n").collect();
    io_write(&a.out.join("manifest.txt"), &manifest)?;
    for (i, sd) in spectra.iter().enumerate() {
        sd.save_csv(&a.out.join(format!("tone_{i:03}.csv")))?;
    }
    println!("tones seed={} count={}", a.seed, specs.len());
    Ok(())
}
