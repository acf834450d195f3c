//! Command-line front end: every capability of the library as a
//! reproducible, scriptable command emitting plot-ready CSV/JSON.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use bellgyro::bell::{equal_probability_axes, rotation_table, sphere_map};
use bellgyro::experiment::{
    alpha_sweep, campaign_json, run_campaign, sweep_json, write_atomic, write_campaign_csv,
    write_sweep_csv, ExperimentConfig,
};
use bellgyro::linalg::{bell_state, joint_rotation, AxisAngle, BellKind, ComplexMatrix};
use bellgyro::{fmt_sig9, RotationVector};

#[derive(Parser)]
#[command(
    name = "bellgyro",
    version,
    about = "Rotation sensing with Bell pairs: outcome maps, equal-probability axes, and seeded estimation campaigns"
)]
struct Cli {
    /// Worker threads for parallel campaigns (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate Bell-measurement outcome probabilities over a sphere grid.
    Spheres(SpheresArgs),
    /// List the axes where the three reachable outcomes are equally likely.
    EqualPoints(EqualPointsArgs),
    /// Print the cardinal-axis rotation table with matrix and closed-form
    /// values and their deviation.
    RotationTable(RotationTableArgs),
    /// Run an error-versus-resources campaign from a config file.
    Estimate(EstimateArgs),
    /// Sweep the mixing fraction for the Bell and single-qubit estimators.
    AlphaSweep(AlphaSweepArgs),
}

#[derive(Args)]
struct SpheresArgs {
    /// Prepared Bell state: phi+, phi-, psi+ or psi-.
    #[arg(long)]
    initial: BellKind,
    /// Applied rotation vector in radians, as "x,y,z".
    #[arg(long, default_value = "0,0,0", value_parser = parse_rotation)]
    rot: RotationVector,
    /// Mixing fraction with the maximally mixed state.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Grid points in Θ (endpoint-inclusive over [0, π]).
    #[arg(long, default_value_t = 91)]
    n_theta: usize,
    /// Grid points in Λ (periodic over [0, 2π)).
    #[arg(long, default_value_t = 180)]
    n_lambda: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EqualPointsArgs {
    /// Prepared Bell state: phi+ or phi-.
    #[arg(long)]
    initial: BellKind,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RotationTableArgs {
    /// Rotation angle in radians (default: 20 degrees).
    #[arg(long, default_value_t = 20f64.to_radians())]
    theta: f64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Campaign config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output base path; writes `<out>.json` and `<out>.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Embed every per-run record in the JSON output.
    #[arg(long, default_value_t = false)]
    include_runs: bool,
}

#[derive(Args)]
struct AlphaSweepArgs {
    /// Campaign config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated mixing fractions, e.g. "0,0.001,0.005,0.02".
    #[arg(long, value_parser = parse_alphas)]
    alphas: AlphaList,
    /// Output base path; writes `<out>.json` and `<out>.csv`.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone)]
struct AlphaList(Vec<f64>);

fn parse_rotation(s: &str) -> Result<RotationVector, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated radians, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad component '{part}': {e}"))?;
    }
    Ok(RotationVector::from_array(v))
}

fn parse_alphas(s: &str) -> Result<AlphaList, String> {
    let values = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad alpha '{p}': {e}"))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    if values.is_empty() {
        return Err("need at least one alpha".into());
    }
    for &a in &values {
        if !(0.0..=1.0).contains(&a) {
            return Err(format!("alpha {a} outside [0, 1]"));
        }
    }
    Ok(AlphaList(values))
}

/// Process failures with the documented exit codes: 2 for configuration
/// problems, 3 for solver failures, 4 for I/O.
enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

fn io_err(path: &Path, err: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        // Ignore the error if a pool already exists (e.g. under tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let result = match cli.command {
        Command::Spheres(args) => cmd_spheres(args),
        Command::EqualPoints(args) => cmd_equal_points(args),
        Command::RotationTable(args) => cmd_rotation_table(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::AlphaSweep(args) => cmd_alpha_sweep(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn cmd_spheres(args: SpheresArgs) -> Result<(), CliError> {
    let map = sphere_map(
        args.initial,
        &args.rot,
        args.alpha,
        args.n_theta,
        args.n_lambda,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let mut bytes = Vec::new();
    use std::io::Write;
    write!(
        bytes,
        "# bellgyro spheres v{}\n# initial = {}\n# rot_rad = {},{},{}\n# alpha = {}\n# n_theta = {}\n# n_lambda = {}\n",
        env!("CARGO_PKG_VERSION"),
        args.initial,
        args.rot.x,
        args.rot.y,
        args.rot.z,
        args.alpha,
        args.n_theta,
        args.n_lambda,
    )
    .expect("vec write");
    map.write_csv(&mut bytes).expect("vec write");
    write_atomic(&args.out, &bytes).map_err(|e| io_err(&args.out, e))?;
    eprintln!(
        "wrote {} ({} cells)",
        args.out.display(),
        args.n_theta * args.n_lambda
    );
    Ok(())
}

fn cmd_equal_points(args: EqualPointsArgs) -> Result<(), CliError> {
    let axes = equal_probability_axes(args.initial).map_err(|e| match e {
        bellgyro::bell::BellError::UnsupportedInitialState(_) => CliError::Config(e.to_string()),
        other => CliError::Solver(other.to_string()),
    })?;
    let mut text = format!(
        "# bellgyro equal-points v{}\n# initial = {}\ninitial,theta_rad,lambda_rad,spread\n",
        env!("CARGO_PKG_VERSION"),
        args.initial
    );
    for found in &axes {
        text.push_str(&format!(
            "{},{},{},{}\n",
            args.initial,
            fmt_sig9(found.axis.theta()),
            fmt_sig9(found.axis.lambda()),
            fmt_sig9(found.spread),
        ));
    }
    match args.out {
        Some(path) => write_atomic(&path, text.as_bytes()).map_err(|e| io_err(&path, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_rotation_table(args: RotationTableArgs) -> Result<(), CliError> {
    let theta = args.theta;
    println!(
        "Bell states under R_j(θ)⊗R_j(θ) at θ = {theta:.9} rad ({:.4}°)",
        theta.to_degrees()
    );
    println!("{:-<78}", "");
    let id = ComplexMatrix::identity(2);
    let mut max_dev_table = 0.0f64;
    let mut max_dev_closed = 0.0f64;
    for cell in rotation_table(theta) {
        let rotation = joint_rotation(&AxisAngle::about(cell.axis, theta));
        let rotated = rotation.apply(&bell_state(cell.initial, &id).expect("identity frame"));
        let closed = bellgyro::bell::closed_form_coefficients(
            cell.initial,
            &AxisAngle::about(cell.axis, theta),
        );
        let mut parts = Vec::new();
        for (target, label, value) in &cell.overlaps {
            let matrix = bell_state(*target, &id)
                .expect("identity frame")
                .inner(&rotated);
            max_dev_table = max_dev_table.max((value - matrix).norm());
            max_dev_closed = max_dev_closed.max((closed[target.index()] - matrix).norm());
            parts.push(format!(
                "({label})|{target}> = {:+.6}{:+.6}i",
                matrix.re, matrix.im
            ));
        }
        println!(
            "R_{:?}  |{}>  ->  {}",
            cell.axis,
            cell.initial,
            parts.join("  +  ")
        );
    }
    println!("{:-<78}", "");
    println!("max |table - matrix| deviation:       {max_dev_table:.3e}");
    println!("max |closed-form - matrix| deviation: {max_dev_closed:.3e}");
    Ok(())
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut cfg = ExperimentConfig::from_key_values(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config, args.seed)?;
    let result = run_campaign(&cfg).map_err(|e| CliError::Solver(e.to_string()))?;

    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    let json = serde_json::to_string_pretty(&campaign_json(&result, args.include_runs))
        .expect("report serializes");
    write_atomic(&json_path, json.as_bytes()).map_err(|e| io_err(&json_path, e))?;
    let mut csv = Vec::new();
    write_campaign_csv(&mut csv, &result).expect("vec write");
    write_atomic(&csv_path, &csv).map_err(|e| io_err(&csv_path, e))?;

    let last = result.aggregate.checkpoints.last();
    eprintln!(
        "{} runs of {} complete ({} restarts); final mean error {}",
        result.aggregate.n_runs,
        cfg.estimator.label(),
        result.total_restarts,
        last.map_or("n/a".to_string(), |c| format!(
            "{:.6} rad at {} resources",
            c.mean_error, c.resources
        )),
    );
    eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn cmd_alpha_sweep(args: AlphaSweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config, args.seed)?;
    let rows = alpha_sweep(&cfg, &args.alphas.0).map_err(|e| CliError::Solver(e.to_string()))?;

    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    let json = serde_json::to_string_pretty(&sweep_json(&cfg, &rows)).expect("report serializes");
    write_atomic(&json_path, json.as_bytes()).map_err(|e| io_err(&json_path, e))?;
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &rows).expect("vec write");
    write_atomic(&csv_path, &csv).map_err(|e| io_err(&csv_path, e))?;

    eprintln!(
        "swept {} cells; wrote {} and {}",
        rows.len(),
        json_path.display(),
        csv_path.display()
    );
    Ok(())
}
