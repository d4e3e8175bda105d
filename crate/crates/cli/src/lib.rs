//! Command-line front end: configuration, subcommands and CSV output.

pub mod compare;
pub mod config;
pub mod table;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use heom_core::bath::{bath_correlation, lambda_cross};
use heom_core::model::ModelParams;

use config::{parse_config, RunConfig};
use table::{density_observation, trajectory_table, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_THRESHOLD: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "heom",
    version,
    about = "Hierarchical equations of motion for a particle in a harmonic bath"
)]
pub struct Cli {
    /// Worker threads for the propagator (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct IoArgs {
    /// JSON configuration; omitted keys take the benchmark defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV (default: outputs.path from the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the hierarchy and write the trajectory CSV.
    Run(IoArgs),
    /// Write the eigenvalues λ_k of the bath weight matrix.
    BathTable(IoArgs),
    /// Write λ_{kk'}(t) on the integrator's output times.
    LambdaT(IoArgs),
    /// Exact Gaussian moments with a discretised bath.
    OracleMoments(IoArgs),
    /// Coupled-channels solve for a small discrete bath.
    OracleDiscrete(IoArgs),
    /// Per-column differences between two trajectory CSVs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// ω_S t window, e.g. 0:4.
        #[arg(long, default_value = ":")]
        window: String,
        /// Pass/fail limits on max |a − b|, e.g. xi_q=0.05,xi_p=0.05.
        #[arg(long, default_value = "")]
        threshold: String,
        /// Report path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_path(args: &IoArgs, config: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| config.outputs.path.clone())
}

fn echo_config(config: &RunConfig, out: &Path) -> Result<()> {
    if !config.outputs.echo_config {
        return Ok(());
    }
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    let text = serde_json::to_string_pretty(config)?;
    std::fs::write(&name, text + "\n")
        .with_context(|| format!("writing {}", Path::new(&name).display()))
}

fn write_output(table: &Table, config: &RunConfig, out: &Path) -> Result<()> {
    table.write(out)?;
    echo_config(config, out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn run(model: &ModelParams) -> Result<Table> {
    eprintln!("sizing: {}", model.sizing());
    let built = model.build()?;
    if built.initial_norm < 0.999 {
        eprintln!(
            "warning: the grid clips the initial packet (norm {:.6})",
            built.initial_norm
        );
    }
    for d in built.diagnostics() {
        eprintln!("warning: {d}");
    }
    let trajectory = built.run()?;
    Ok(trajectory_table(&trajectory.points, model.system.omega_s))
}

fn bath_table(model: &ModelParams) -> Result<Table> {
    model.validate()?;
    let coeffs = model.bath_coefficients()?;
    for d in &coeffs.diagnostics {
        eprintln!("warning: {d}");
    }
    let mut table = Table::new(vec!["k".into(), "lambda".into()]);
    table.rows = coeffs
        .lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| vec![(i + 1) as f64, l])
        .collect();
    Ok(table)
}

fn lambda_t(model: &ModelParams) -> Result<Table> {
    model.validate()?;
    let basis = model.expansion_basis()?;
    let coeffs = model.bath_coefficients()?;
    let bath = model.bath.spec()?;
    let quad = model.bath.quadrature()?;
    let cfg = &model.integrator;
    let mut table = Table::new(
        ["t_eVinv", "Omega_t", "k", "kp", "re", "im"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for step in (0..=cfg.steps).step_by(cfg.stride) {
        let t = step as f64 * cfg.dt;
        let m = lambda_cross(t, &coeffs, &basis, &bath, quad)?;
        for ((a, b), z) in m.indexed_iter() {
            table.rows.push(vec![
                t,
                model.bath.cutoff * t,
                (a + 1) as f64,
                (b + 1) as f64,
                z.re,
                z.im,
            ]);
        }
    }
    // sanity line on the log: the trace identity at t = 0
    let l0 = bath_correlation(0.0, &bath, quad)?;
    log::info!("L(0)/ħ = {l0}");
    Ok(table)
}

fn oracle_moments(model: &ModelParams) -> Result<Table> {
    let (run, change) = model.moments_oracle()?;
    eprintln!(
        "moments oracle: {} modes checked against {}, max change {change:.3e}",
        model.oracle.modes,
        2 * model.oracle.modes
    );
    Ok(trajectory_table(
        &run.trajectory.points,
        model.system.omega_s,
    ))
}

fn oracle_discrete(model: &ModelParams) -> Result<Table> {
    let (run, change) = model.channels_oracle()?;
    eprintln!(
        "coupled channels: n_cut = {}, change at n_cut + 1 {change:.3e}",
        model.oracle.n_cut
    );
    let grid = model.grid()?;
    let points: Vec<_> = run
        .times
        .iter()
        .zip(&run.densities)
        .map(|(&t, rho)| density_observation(t, rho, &grid))
        .collect();
    Ok(trajectory_table(&points, model.system.omega_s))
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring threads")?;
    }
    let (args, produce): (&IoArgs, fn(&ModelParams) -> Result<Table>) = match &cli.command {
        Command::Run(a) => (a, run),
        Command::BathTable(a) => (a, bath_table),
        Command::LambdaT(a) => (a, lambda_t),
        Command::OracleMoments(a) => (a, oracle_moments),
        Command::OracleDiscrete(a) => (a, oracle_discrete),
        Command::Compare {
            a,
            b,
            window,
            threshold,
            out,
        } => {
            let diffs = compare::compare(
                &Table::read(a)?,
                &Table::read(b)?,
                compare::parse_window(window)?,
                &compare::parse_thresholds(threshold)?,
            )?;
            match out {
                Some(p) => compare::write_report(&diffs, std::fs::File::create(p)?)?,
                None => compare::write_report(&diffs, std::io::stdout().lock())?,
            }
            return Ok(if diffs.iter().all(|d| d.passes()) {
                EXIT_OK
            } else {
                EXIT_THRESHOLD
            });
        }
    };
    let config = parse_config(args.config.as_deref())?;
    let table = produce(&config.model())?;
    write_output(&table, &config, &output_path(args, &config))?;
    Ok(EXIT_OK)
}
