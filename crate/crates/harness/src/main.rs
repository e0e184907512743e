use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfcg_harness::runner::{check_model, fixed_point_options};
use mfcg_harness::{
    parse_config_file, run_experiment, ExperimentOutcome, HarnessError, Mode, DEFAULT_OUT_DIR,
    OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(
    name = "mfcg",
    version,
    about = "Run mean field control game experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        /// Output directory; falls back to the config, then $MFCG_OUT_DIR, then ./mfcg_out.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trace_every: Option<u64>,
    },
    /// Print structural constants and assumption verdicts for the configured model.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    // Usage errors are validation errors (exit 1); 2 is reserved for non-convergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Check { config } => {
            let cfg = parse_config_file(&config)?;
            let model = cfg.load_model()?;
            print!(
                "{}",
                check_model(model.as_model(), &fixed_point_options(&cfg))?.render()
            );
            Ok(())
        }
        Command::Run {
            config,
            mode,
            seed,
            steps,
            out,
            trace_every,
        } => {
            let mut cfg = parse_config_file(&config)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(n) = steps {
                cfg.n_steps = n;
            }
            if let Some(k) = trace_every {
                cfg.trace_every = Some(k);
            }
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            match run_experiment(&cfg, &out_dir)? {
                ExperimentOutcome::Check(report) => print!("{}", report.render()),
                ExperimentOutcome::Runs(reports) => {
                    for r in reports {
                        let seed = r.seed.map(|s| format!(" seed {s}")).unwrap_or_default();
                        let err = r
                            .comparison
                            .as_ref()
                            .map(|c| format!(", max |Q - Q*| = {:.3e}", c.q_max_error))
                            .unwrap_or_default();
                        println!(
                            "{}{seed}: done in {:.3} s{err}",
                            r.mode,
                            r.elapsed.as_secs_f64()
                        );
                    }
                    println!("output written to {}", out_dir.display());
                }
            }
            Ok(())
        }
    }
}
