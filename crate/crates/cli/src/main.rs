//! `msqi`: multiscale quasi-interpolation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msqi_core::config::{parse_domain, parse_list, RunConfig};
use msqi_core::experiment;
use msqi_core::{Error, Result};

#[derive(Parser)]
#[command(name = "msqi", version, about = "Multiscale quasi-interpolation on scattered sites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the Halton-tiled site sets of every level.
    GenPoints(Opts),
    /// Single-scale quasi-interpolation on the finest level.
    Approx(Opts),
    /// Scalar multiscale approximation with per-level errors.
    Multiscale(Opts),
    /// Multiscale approximation of an SO(3) or SPD(3) field.
    ManifoldMultiscale(Opts),
    /// Sweep over mu and fit the convergence constants.
    Convergence(Opts),
    /// Locate anomalies in the finest error map.
    Anomaly(Opts),
    /// Outlier-filtered multiscale fit of noisy rotations.
    Denoise(Opts),
    /// Time Shepard against quadratic MLS on one thread.
    Bench(Opts),
    /// Multiscale approximation of a PGM image (preset fig1 by default).
    ImageDemo(Opts),
}

#[derive(Args, Default)]
struct Opts {
    /// JSON config; fields it sets override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named settings: default or fig1.
    #[arg(long)]
    preset: Option<String>,
    /// xmin,xmax,ymin,ymax
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// First-level fill distance.
    #[arg(long = "h")]
    h1: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Support radius factor.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Polynomial reproduction degree (0 is Shepard).
    #[arg(long)]
    degree: Option<usize>,
    /// h, f, g, f_tilde, so3 or spd.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Evaluation rectangle xmin,xmax,ymin,ymax.
    #[arg(long, allow_hyphen_values = true)]
    rect: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    karcher_tol: Option<f64>,
    #[arg(long)]
    karcher_max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write 0 in the seconds column.
    #[arg(long)]
    no_timings: bool,
    /// Comma-separated sweep of mu values.
    #[arg(long)]
    mus: Option<String>,
    /// Noise level.
    #[arg(long)]
    sigma: Option<f64>,
    /// Outlier threshold t.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    threshold_sweep: Option<String>,
    /// Minimum component size of an anomaly box.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// PGM image.
    #[arg(long)]
    image: Option<PathBuf>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Opts) {
        match self {
            Command::GenPoints(o) => ("gen-points", o),
            Command::Approx(o) => ("approx", o),
            Command::Multiscale(o) => ("multiscale", o),
            Command::ManifoldMultiscale(o) => ("manifold-multiscale", o),
            Command::Convergence(o) => ("convergence", o),
            Command::Anomaly(o) => ("anomaly", o),
            Command::Denoise(o) => ("denoise", o),
            Command::Bench(o) => ("bench", o),
            Command::ImageDemo(o) => ("image-demo", o),
        }
    }
}

/// Preset, then subcommand defaults, then the config file, then flags.
fn resolve(name: &str, o: &Opts) -> Result<RunConfig> {
    let preset = o.preset.as_deref().unwrap_or(if name == "image-demo" { "fig1" } else { "default" });
    let mut cfg = RunConfig::preset(preset)?;
    if o.preset.is_none() {
        match name {
            "convergence" => cfg.function = "f".into(),
            "anomaly" => cfg.function = "f_tilde".into(),
            "bench" => cfg.function = "g".into(),
            "manifold-multiscale" | "denoise" => {
                cfg.function = "so3".into();
                cfg.levels = 4;
            }
            _ => {}
        }
    }
    if let Some(path) = &o.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
        cfg = cfg.merge_json(&text)?;
    }
    if let Some(d) = &o.domain {
        cfg.domain = parse_domain(d)?;
    }
    if let Some(r) = &o.rect {
        cfg.rect = Some(parse_domain(r)?);
    }
    if let Some(m) = &o.mus {
        cfg.mus = parse_list(m)?;
    }
    if let Some(t) = &o.threshold_sweep {
        cfg.threshold_sweep = parse_list(t)?;
    }
    macro_rules! set {
        ($($flag:ident => $field:expr),*) => {$(
            if let Some(v) = o.$flag.clone() { $field = v.into(); }
        )*};
    }
    set!(h1 => cfg.h1, mu => cfg.mu, nu => cfg.nu, levels => cfg.levels, degree => cfg.degree,
         function => cfg.function, grid_step => cfg.grid_step, seed => cfg.seed,
         karcher_tol => cfg.karcher.tolerance, karcher_max_iter => cfg.karcher.max_iterations,
         sigma => cfg.sigma, threshold => cfg.threshold, window => cfg.anomaly_window, reps => cfg.bench_reps);
    if o.out.is_some() {
        cfg.out_dir = o.out.clone();
    }
    if o.image.is_some() {
        cfg.image = o.image.clone();
    }
    if o.no_timings {
        cfg.timings = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<()> {
    match std::env::var("MSQI_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                msqi_core::parallel::init_threads(n);
                Ok(())
            }
            _ => Err(Error::invalid(format!("MSQI_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(()),
    }
}

fn print<T: serde::Serialize>(report: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (name, opts) = cli.command.parts();
    let cfg = resolve(name, opts)?;
    if name == "bench" {
        msqi_core::parallel::init_threads(1);
    } else {
        threads()?;
    }
    match name {
        "gen-points" => print(&experiment::gen_points(&cfg)?),
        "approx" => print(&experiment::run_approx(&cfg)?),
        "multiscale" => print(&experiment::run_multiscale(&cfg)?),
        "manifold-multiscale" => print(&experiment::run_manifold(&cfg)?),
        "convergence" => print(&experiment::run_convergence(&cfg)?),
        "anomaly" => print(&experiment::run_anomaly(&cfg)?),
        "denoise" => print(&experiment::run_denoise(&cfg)?),
        "bench" => print(&experiment::run_bench(&cfg)?),
        "image-demo" => {
            let image = cfg.image.clone().ok_or_else(|| Error::invalid("image-demo needs --image FILE.pgm"))?;
            print(&experiment::run_image_demo(&cfg, &image)?)
        }
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("msqi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
