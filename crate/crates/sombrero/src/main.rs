use clap::{Parser, Subcommand};
use sombrero::config::{parse_config, ResolvedConfig};
use sombrero::scenario::{oracle_comparison, run_scenario, validate_setup, write_bundle};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Acceptance bound for the dense-oracle comparison.
const ORACLE_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "somb",
    version,
    about = "Split-operator simulator for a trapped spin-orbit-coupled condensate"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Promote monitored failures (norm drift, edge mass) to hard errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scenario and write its result bundle.
    Run {
        config: PathBuf,
        /// Output directory (overrides [output].dir and SOMB_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config and check every setup invariant without running.
    Validate { config: PathBuf },
    /// Compare the split-operator stepper against the dense-eigendecomposition
    /// oracle on a small grid.
    Oracle { config: PathBuf },
    /// Print build, version and numerical conventions.
    Info,
}

fn load_config(path: &Path) -> sombrero::Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn output_dir(cfg: &ResolvedConfig, cli_out: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = cli_out {
        return dir;
    }
    if let Some(dir) = &cfg.output_dir {
        return dir.clone();
    }
    let root = std::env::var("SOMB_OUT").unwrap_or_else(|_| "somb_out".into());
    Path::new(&root).join(cfg.scenario.as_str())
}

fn run(cli: Cli) -> sombrero::Result<i32> {
    match cli.cmd {
        Cmd::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&cfg, out);
            let bundle = run_scenario(&cfg, cli.strict)?;
            write_bundle(&bundle, &dir)?;
            println!("scenario: {}", cfg.scenario.as_str());
            println!("output: {}", dir.display());
            for s in &bundle.series {
                println!(
                    "series {}: {} samples, norm drift {:.2e}, flags {}",
                    s.file_stem(),
                    s.rows.len(),
                    s.monitors.max_norm_drift,
                    s.monitors.flag_summary()
                );
            }
            for (k, v) in &bundle.results {
                println!("result {k} = {v:.6}");
            }
            Ok(0)
        }
        Cmd::Validate { config } => {
            let cfg = load_config(&config)?;
            let field = validate_setup(&cfg)?;
            println!(
                "config ok: scenario={} grid={}x{} L={}x{} v=({}, {}) norm={:.12}",
                cfg.scenario.as_str(),
                cfg.grid.nx(),
                cfg.grid.ny(),
                cfg.grid.lx(),
                cfg.grid.ly(),
                cfg.params.v0,
                cfg.params.v1,
                field.norm()
            );
            Ok(0)
        }
        Cmd::Oracle { config } => {
            let cfg = load_config(&config)?;
            let dist = oracle_comparison(&cfg)?;
            let pass = dist < ORACLE_TOLERANCE;
            println!(
                "oracle: grid={}x{} v={} tau={} dtau={} l2_distance={dist:.3e} {}",
                cfg.grid.nx(),
                cfg.grid.ny(),
                cfg.params.v0,
                cfg.duration.unwrap_or(1.0),
                cfg.scheme.dtau,
                if pass { "PASS" } else { "FAIL" }
            );
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Info => {
            println!("somb {}", env!("CARGO_PKG_VERSION"));
            println!(
                "parallel: {}",
                if sombrero::par::parallel_enabled() {
                    "rayon (default feature)"
                } else {
                    "disabled (sequential build)"
                }
            );
            println!("transform: Phi(p) = (nx ny)^-1/2 sum_x exp(-i x.p) Psi(x), unitary both ways");
            println!("quadrature weight: dx*dy in both representations");
            println!(
                "momentum sign: initial phase exp(-i(px0 x + py0 y)) => mean momentum (-px0, -py0); \
                 scenario defaults pass px0 = -v so the packet starts at <p_x> = +v"
            );
            println!("default grid: 256x256, half-extent 16 oscillator lengths");
            println!("time unit: {:.4} ms for a 40 Hz trap", sombrero::scenario::TIME_UNIT_MS);
            println!("env: SOMB_THREADS (thread count hint), SOMB_OUT (default output root)");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    sombrero::par::configure_threads_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            let line = serde_json::json!({
                "error": error_category(&err),
                "message": err.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}

fn error_category(err: &sombrero::Error) -> &'static str {
    use sombrero::Error as E;
    match err {
        E::Config(_) => "config",
        E::Io(_) => "io",
        E::SnapshotFormat(_) | E::SeriesFormat(_) => "format",
        E::Monitor { .. } => "monitor",
        E::OracleGridTooLarge { .. } | E::OracleNonlinear | E::Eigen(_) => "oracle",
        E::DomainTooSmall { .. } | E::MomentumUnderresolved { .. } | E::InvalidGrid(_) => "setup",
        _ => "runtime",
    }
}
