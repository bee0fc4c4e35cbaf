use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qinsch::relent::Reference;
use qinsch_cli::commands::{self, format_table, output_dir};
use qinsch_cli::config::{parse_config, Config};
use qinsch_cli::manufactured::{manufactured_order, DEFAULT_DTS};
use qinsch_cli::CliError;

#[derive(Parser)]
#[command(name = "qinsch", about = "Quasi-incompressible Navier-Stokes/Cahn-Hilliard solver")]
struct Cli {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefKind {
    Refined,
    Same,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured problem, writing diagnostics and checkpoints.
    Run,
    /// Density-ratio sweep against a model H reference.
    SweepAlpha {
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long, value_enum, default_value = "refined")]
        reference: RefKind,
        /// Perturb the phase field by an O(sqrt(alpha)) mode per run.
        #[arg(long)]
        ill_prepared: bool,
    },
    /// Invariant suites; exits with 3 when any fails.
    Verify,
    /// Temporal order from a manufactured solution.
    Manufactured {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DTS)]
        dts: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
    },
}

fn load(path: Option<&PathBuf>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(parse_config(&text)?)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = load(cli.config.as_ref())?;
    match cli.command {
        Command::Run => {
            let dir = output_dir(&cfg);
            let s = commands::run_simulation(&cfg, Some(&dir))?;
            println!(
                "t = {}  steps = {}  backoffs = {}  E = {:e}",
                s.final_state.t,
                s.diagnostics.len(),
                s.backoffs,
                s.diagnostics.last().map_or(f64::NAN, |d| d.energy_after.total)
            );
            println!("wrote {}", dir.join("diagnostics.csv").display());
        }
        Command::SweepAlpha {
            alphas,
            reference,
            ill_prepared,
        } => {
            let reference = match reference {
                RefKind::Refined => Reference::Refined,
                RefKind::Same => Reference::SameResolution,
            };
            let sc = commands::sweep_config(&cfg, reference, !ill_prepared);
            let dir = output_dir(&cfg);
            let report = commands::sweep_alpha(&sc, &alphas, Some(&dir))?;
            print!("{}", report.summary());
            if let Some(f) = report.failure {
                return Err(CliError::Solver(f));
            }
        }
        Command::Verify => {
            let rows = commands::verify(&cfg)?;
            print!("{}", format_table(&rows));
            let failed: Vec<_> = rows.iter().filter(|r| !r.pass).map(|r| r.name).collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
        Command::Manufactured { dts, t_end } => {
            let r = manufactured_order(&cfg.torus(), &cfg.params, cfg.picard, &dts, t_end)?;
            print!("{}", r.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::path::{Path, PathBuf};

    use qinsch_cli::checkpoint::read_checkpoint;
    use qinsch_cli::diagnostics::CSV_HEADER;

    use super::*;

    const SMALL: &str = "
grid.n = 16
params.epsilon = -0.5
time.dt = 1e-3
time.t_end = 0.01
init.noise_amp = 0.05
init.seed = 11
output.checkpoint_every = 5
";

    fn scratch(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("qinsch-main-{}-{name}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    /// Writes `body` plus an `output.dir` line pointing at `out`.
    fn config(dir: &Path, body: &str, out: &Path) -> PathBuf {
        let cfg = dir.join(format!("{}.cfg", out.file_name().unwrap().to_string_lossy()));
        std::fs::write(&cfg, format!("{body}\noutput.dir = {}\n", out.display())).unwrap();
        cfg
    }

    fn exec(cfg: &Path, args: &[&str]) -> Result<(), CliError> {
        let mut argv = vec!["qinsch", "--config", cfg.to_str().unwrap()];
        argv.extend_from_slice(args);
        execute(Cli::try_parse_from(argv).unwrap())
    }

    #[test]
    fn run_writes_csv_and_checkpoints_reproducibly() {
        let dir = scratch("run");
        let (a, b) = (dir.join("a"), dir.join("b"));
        exec(&config(&dir, SMALL, &a), &["run"]).unwrap();
        exec(&config(&dir, SMALL, &b), &["run"]).unwrap();

        let csv = std::fs::read(a.join("diagnostics.csv")).unwrap();
        assert_eq!(csv, std::fs::read(b.join("diagnostics.csv")).unwrap());
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 11);

        for name in ["checkpoint_000005.bin", "checkpoint_000010.bin", "final.bin"] {
            let (state, header) = read_checkpoint(&std::fs::read(a.join(name)).unwrap()).unwrap();
            assert_eq!(header.n, vec![16, 16]);
            assert!((header.alpha - 1.0 / 3.0).abs() < 1e-15);
            assert!(state.t > 0.0);
        }
    }

    #[test]
    fn config_errors_exit_with_one() {
        let dir = scratch("bad");
        let cfg = dir.join("bad.cfg");
        std::fs::write(&cfg, "params.epsilon = -0.5\nparams.alpha = 0.2\n").unwrap();
        let err = exec(&cfg, &["run"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("line 2"), "{err}");

        let err = exec(&cfg.with_extension("missing"), &["run"]).unwrap_err();
        assert!(matches!(err, CliError::Io { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn verify_passes_on_a_small_grid() {
        let dir = scratch("verify");
        let cfg = load(Some(&config(&dir, SMALL, &dir.join("out")))).unwrap();
        let rows = commands::verify(&cfg).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.pass), "{}", format_table(&rows));
    }

    #[test]
    fn sweep_rejects_increasing_alphas() {
        let dir = scratch("sweep");
        let cfg = config(&dir, SMALL, &dir.join("out"));
        let err = exec(&cfg, &["sweep-alpha", "--alphas", "0.1,0.2"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn short_sweep_writes_report() {
        let dir = scratch("sweep-ok");
        let out = dir.join("out");
        let body = "grid.n = 16\ntime.t_end = 0.01\ninit.phi_preset = two-mode\ninit.u_preset = taylor-green\ninit.u_amp = 0.1\n";
        let cfg = config(&dir, body, &out);
        exec(&cfg, &["sweep-alpha", "--alphas", "0.2,0.1", "--reference", "same"]).unwrap();
        let csv = std::fs::read_to_string(out.join("rate_report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(std::fs::read_to_string(out.join("summary.txt")).unwrap().contains("fitted slope"));
    }

    #[test]
    fn clap_rejects_unknown_reference() {
        assert!(Cli::try_parse_from(["qinsch", "sweep-alpha", "--alphas", "0.2", "--reference", "coarse"]).is_err());
        assert!(Cli::try_parse_from(["qinsch", "sweep-alpha"]).is_err());
    }
}
