//! Mode dispatch, seeded execution and file output.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfcg_core::async_learner::{init_async, run_async_from};
use mfcg_core::envs::two_state_exact;
use mfcg_core::ideal::run_ideal_from;
use mfcg_core::par::map_slice;
use mfcg_core::sync::run_sync_from;
use mfcg_core::{
    check_assumptions, extract_solution, softmin_error_bounds, solve_global_gase,
    structural_constants, Execution, FixedPointOptions, IdealState, MeanFieldModel, Schedule,
    SolutionTriple, TraceRow, TraceSink,
};

use crate::config::{ExperimentConfig, LoadedModel, Mode};
use crate::error::HarnessError;
use crate::report::{compare_to_exact, CheckReport, RunReport};
use crate::trajectory::CsvSink;

/// Random points used when estimating structural constants for a report.
const CONSTANTS_BUDGET: usize = 256;

#[derive(Debug)]
pub enum ExperimentOutcome {
    Runs(Vec<RunReport>),
    Check(CheckReport),
}

/// Paths written for a run of `mode`, optionally per seed.
pub fn output_paths(out_dir: &Path, mode: Mode, seed: Option<u64>) -> (PathBuf, PathBuf) {
    let stem = match seed {
        Some(s) => format!("{mode}_seed{s}"),
        None => mode.to_string(),
    };
    (
        out_dir.join(format!("{stem}.csv")),
        out_dir.join(format!("{stem}_report.txt")),
    )
}

pub fn fixed_point_options(cfg: &ExperimentConfig) -> FixedPointOptions {
    FixedPointOptions {
        tol: cfg.tolerances.fixed_point,
        max_iter: cfg.tolerances.max_iter,
        ..FixedPointOptions::default()
    }
}

/// The closed-form solution, when the model has one.
pub fn exact_oracle(model: &LoadedModel) -> Result<Option<SolutionTriple>, HarnessError> {
    match model.two_state_params() {
        Some(p) if p.in_unique_regime() => Ok(Some(two_state_exact(p)?)),
        _ => Ok(None),
    }
}

/// Constants and verdicts for `model`. The action gap, and with it the error
/// bounds, is taken at `Q^{*φ}`; if that solve fails the bounds are reported
/// as unavailable rather than failing the check.
pub fn check_model(
    model: &dyn MeanFieldModel,
    opts: &FixedPointOptions,
) -> Result<CheckReport, HarnessError> {
    let solved = solve_global_gase(model, opts);
    let q = solved.as_ref().ok().map(|s| &s.q);
    let constants = structural_constants(model, q, CONSTANTS_BUDGET)?;
    let assumptions = check_assumptions(&constants, model);
    let bounds = match &solved {
        Ok(_) => softmin_error_bounds(&constants, model).map_err(|e| e.to_string()),
        Err(e) => Err(format!(
            "no softmin equilibrium to take the action gap from: {e}"
        )),
    };
    Ok(CheckReport {
        constants,
        assumptions,
        bounds,
    })
}

/// Run the configured experiment, writing CSV and report files under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let loaded = cfg.load_model()?;
    let model = loaded.as_model();
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    if cfg.mode == Mode::Check {
        let report = check_model(model, &fixed_point_options(cfg))?;
        let path = out_dir.join("check_report.txt");
        std::fs::write(&path, report.render()).map_err(|e| HarnessError::Io { path, source: e })?;
        return Ok(ExperimentOutcome::Check(report));
    }

    let exact = exact_oracle(&loaded)?;
    let mut reports = match cfg.mode {
        Mode::Exact => vec![run_exact(cfg, model, out_dir)?],
        Mode::Ideal => vec![run_learner(cfg, model, out_dir, None)?],
        Mode::Sync | Mode::Async => map_slice(Execution::Parallel, &cfg.seeds, |&s| {
            run_learner(cfg, model, out_dir, Some(s))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?,
        Mode::Check => unreachable!("handled above"),
    };

    for r in &mut reports {
        if let Some(ex) = &exact {
            r.comparison = Some(compare_to_exact(r, ex)?);
        }
        let (_, path) = output_paths(out_dir, r.mode, r.seed.filter(|_| r.mode.is_seeded()));
        std::fs::write(&path, r.render()).map_err(|e| HarnessError::Io { path, source: e })?;
    }
    Ok(ExperimentOutcome::Runs(reports))
}

fn open_csv(
    path: &Path,
    model: &dyn MeanFieldModel,
) -> Result<CsvSink<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    CsvSink::new(BufWriter::new(file), model.dims()).map_err(|e| HarnessError::Csv {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Flush the sink whether or not the run succeeded; the run's error wins.
fn finish<T>(
    path: &Path,
    mut sink: CsvSink<BufWriter<File>>,
    outcome: Result<T, mfcg_core::MfcgError>,
) -> Result<T, HarnessError> {
    let flushed = sink.flush();
    let value = outcome?;
    flushed.map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(value)
}

fn attach_constants(
    report: &mut RunReport,
    model: &dyn MeanFieldModel,
) -> Result<(), HarnessError> {
    let constants = structural_constants(model, Some(&report.q), CONSTANTS_BUDGET)?;
    report.assumptions = Some(check_assumptions(&constants, model));
    report.constants = Some(constants);
    Ok(())
}

fn run_exact(
    cfg: &ExperimentConfig,
    model: &dyn MeanFieldModel,
    out_dir: &Path,
) -> Result<RunReport, HarnessError> {
    let (csv_path, _) = output_paths(out_dir, Mode::Exact, None);
    let mut sink = open_csv(&csv_path, model)?;
    let opts = fixed_point_options(cfg);
    let start = Instant::now();
    let solved = solve_global_gase(model, &opts)
        .and_then(|phi| Ok((extract_solution(model, &phi, &opts)?, phi)));
    let elapsed = start.elapsed();
    let solved = solved.and_then(|(triple, phi)| {
        sink.record(TraceRow::snapshot(
            0,
            &triple.mu_star,
            &triple.q_star,
            &triple.locals_star,
        ))
        .map_err(mfcg_core::MfcgError::Sink)?;
        Ok((triple, phi))
    });
    let (triple, phi) = finish(&csv_path, sink, solved)?;

    let mut report = RunReport::new(
        Mode::Exact,
        triple.mu_star.clone(),
        triple.q_star.clone(),
        triple.locals_star.clone(),
    );
    let fmt_vec = |v: &[f64]| {
        format!(
            "[{}]",
            v.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(", ")
        )
    };
    report.diagnostics = vec![
        (
            "alpha_star".into(),
            format!("{:?}", triple.alpha_star.choices()),
        ),
        ("mu_star_phi".into(), fmt_vec(triple.mu_star_phi.probs())),
        ("q_star_phi".into(), fmt_vec(triple.q_star_phi.values())),
        ("global_residual".into(), format!("{:.3e}", phi.residual)),
        ("global_iterations".into(), phi.iterations.to_string()),
    ];
    attach_constants(&mut report, model)?;
    report.elapsed = elapsed;
    Ok(report)
}

fn run_learner(
    cfg: &ExperimentConfig,
    model: &dyn MeanFieldModel,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunReport, HarnessError> {
    let (csv_path, _) = output_paths(out_dir, cfg.mode, seed);
    let mut sink = open_csv(&csv_path, model)?;
    let schedule = Schedule::new(cfg.exponents)?;
    let (n, every) = (cfg.n_steps, cfg.effective_trace_every());
    let start = Instant::now();
    let mut report = match cfg.mode {
        Mode::Ideal => {
            let run = run_ideal_from(
                model,
                &schedule,
                IdealState::initial(model.dims()),
                n,
                every,
                &mut sink,
            );
            let end = finish(&csv_path, sink, run)?;
            RunReport::new(Mode::Ideal, end.mu, end.q, end.locals)
        }
        Mode::Sync => {
            let seed = seed.expect("sync runs are seeded");
            let init = IdealState::initial(model.dims());
            let run = run_sync_from(model, &schedule, init, n, seed, every, &mut sink, false);
            let (end, psi) = finish(&csv_path, sink, run)?;
            let mut r = RunReport::new(Mode::Sync, end.mu, end.q, end.locals);
            let norm = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            r.diagnostics
                .push(("psi_mu_sup".into(), format!("{:.6e}", norm(&psi.psi_mu))));
            r.diagnostics
                .push(("psi_q_sup".into(), format!("{:.6e}", norm(&psi.psi_q))));
            r
        }
        Mode::Async => {
            let seed = seed.expect("async runs are seeded");
            let run = run_async_from(
                model,
                &schedule,
                init_async(model, seed),
                n,
                every,
                &mut sink,
            );
            let end = finish(&csv_path, sink, run)?;
            let fractions: Vec<String> = end
                .visit_fractions()
                .iter()
                .map(|v| format!("{v:.6e}"))
                .collect();
            let mut r = RunReport::new(
                Mode::Async,
                end.mu.clone(),
                end.q.clone(),
                end.locals.clone(),
            );
            r.diagnostics.push((
                "gate_open_fraction".into(),
                format!("{:.6}", end.gate_open_fraction()),
            ));
            r.diagnostics.push((
                "visit_fractions".into(),
                format!("[{}]", fractions.join(", ")),
            ));
            r
        }
        Mode::Exact | Mode::Check => unreachable!("not a learner mode"),
    };
    let elapsed = start.elapsed();
    report.seed = seed;
    report.n_steps = Some(n);
    attach_constants(&mut report, model)?;
    report.elapsed = elapsed;
    Ok(report)
}
