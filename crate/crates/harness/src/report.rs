//! Per-run reports and the learned-versus-exact comparison table.

use std::fmt::Write as _;
use std::time::Duration;

use mfcg_core::{
    AssumptionReport, ErrorBounds, LocalFamily, MfcgError, QTable, SimplexDist, SolutionTriple,
    StructuralConstants,
};

use crate::config::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct QEntryComparison {
    pub x: usize,
    pub a: usize,
    pub learned: f64,
    pub exact: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub q_entries: Vec<QEntryComparison>,
    pub q_max_error: f64,
    /// `|μ(y) − μ*(y)|` per state.
    pub mu_errors: Vec<f64>,
    pub mu_max_error: f64,
    /// Largest `‖μ̃^{(x,a)} − μ̃*^{(x,a)}‖₁` over pairs.
    pub locals_max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub n_steps: Option<u64>,
    pub mu: SimplexDist,
    pub q: QTable,
    pub locals: LocalFamily,
    pub comparison: Option<Comparison>,
    pub constants: Option<StructuralConstants>,
    pub assumptions: Option<AssumptionReport>,
    /// Mode-specific scalars, e.g. solver residuals or the gate-open fraction.
    pub diagnostics: Vec<(String, String)>,
    pub elapsed: Duration,
}

impl RunReport {
    pub fn new(mode: Mode, mu: SimplexDist, q: QTable, locals: LocalFamily) -> Self {
        RunReport {
            mode,
            seed: None,
            n_steps: None,
            mu,
            q,
            locals,
            comparison: None,
            constants: None,
            assumptions: None,
            diagnostics: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<&str> {
        self.diagnostics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Plain-text rendering. Everything except the final `elapsed` line is a
    /// deterministic function of the run's inputs.
    pub fn render(&self) -> String {
        let mut s = self.render_body();
        let _ = writeln!(s, "elapsed_seconds = {:.6}", self.elapsed.as_secs_f64());
        s
    }

    /// The report without the timing line.
    pub fn render_body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        if let Some(n) = self.n_steps {
            let _ = writeln!(s, "n_steps = {n}");
        }
        let dims = self.q.dims();

        let _ = writeln!(s, "\n[mu]");
        for (y, v) in self.mu.probs().iter().enumerate() {
            let _ = writeln!(s, "mu_{y} = {v:.16e}");
        }

        let _ = writeln!(s, "\n[q]");
        match &self.comparison {
            Some(c) => {
                let _ = writeln!(
                    s,
                    "{:>3} {:>3} {:>24} {:>24} {:>24}",
                    "x", "a", "learned", "exact", "abs_error"
                );
                for e in &c.q_entries {
                    let _ = writeln!(
                        s,
                        "{:>3} {:>3} {:>24.16e} {:>24.16e} {:>24.16e}",
                        e.x, e.a, e.learned, e.exact, e.abs_error
                    );
                }
            }
            None => {
                for x in 0..dims.n_states {
                    for a in 0..dims.n_actions {
                        let _ = writeln!(s, "q_{x}_{a} = {:.16e}", self.q.get(x, a));
                    }
                }
            }
        }

        let _ = writeln!(s, "\n[locals]");
        for x in 0..dims.n_states {
            for a in 0..dims.n_actions {
                let row: Vec<String> = self
                    .locals
                    .get(x, a)
                    .probs()
                    .iter()
                    .map(|v| format!("{v:.16e}"))
                    .collect();
                let _ = writeln!(s, "local_{x}_{a} = [{}]", row.join(", "));
            }
        }

        if let Some(c) = &self.comparison {
            let _ = writeln!(s, "\n[comparison]");
            let _ = writeln!(s, "q_max_error = {:.16e}", c.q_max_error);
            let errs: Vec<String> = c.mu_errors.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "mu_errors = [{}]", errs.join(", "));
            let _ = writeln!(s, "mu_max_error = {:.16e}", c.mu_max_error);
            let _ = writeln!(s, "locals_max_l1_error = {:.16e}", c.locals_max_error);
        }
        if let Some(k) = &self.constants {
            render_constants(&mut s, k);
        }
        if let Some(a) = &self.assumptions {
            render_assumptions(&mut s, a);
        }
        if !self.diagnostics.is_empty() {
            let _ = writeln!(s, "\n[diagnostics]");
            for (k, v) in &self.diagnostics {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        let _ = writeln!(s);
        s
    }
}

fn render_constants(s: &mut String, k: &StructuralConstants) {
    let _ = writeln!(s, "\n[constants]");
    let _ = writeln!(
        s,
        "source = {}",
        if k.declared { "declared" } else { "estimated" }
    );
    for (name, v) in [
        ("c_min", k.c_min),
        ("c_min_phi", k.c_min_phi),
        ("l_p_glob", k.l_p_glob),
        ("l_p_loc", k.l_p_loc),
        ("l_f_glob", k.l_f_glob),
        ("l_f_loc", k.l_f_loc),
        ("action_gap", k.action_gap),
    ] {
        let _ = writeln!(s, "{name} = {v:.16e}");
    }
}

fn render_assumptions(s: &mut String, a: &AssumptionReport) {
    let verdict = |ok: bool| if ok { "holds" } else { "violated" };
    let _ = writeln!(s, "\n[assumptions]");
    let _ = writeln!(
        s,
        "contraction_threshold = {:.16e}",
        a.contraction_threshold
    );
    let _ = writeln!(s, "contraction_margin = {:.16e}", a.contraction_margin);
    let _ = writeln!(s, "local_contraction = {}", verdict(a.local_contraction_ok));
    let _ = writeln!(
        s,
        "global_contraction = {}",
        verdict(a.global_contraction_ok)
    );
    let _ = writeln!(s, "phi = {:.16e}", a.phi);
    let _ = writeln!(
        s,
        "phi_bound = {:.16e}",
        a.phi_branch_total.min(a.phi_branch_glob)
    );
    let _ = writeln!(s, "phi_within_bound = {}", verdict(a.phi_bound_ok));
}

/// Output of `check`: constants, verdicts, and the error bounds when defined.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub constants: StructuralConstants,
    pub assumptions: AssumptionReport,
    pub bounds: Result<ErrorBounds, String>,
}

impl CheckReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        render_constants(&mut s, &self.constants);
        render_assumptions(&mut s, &self.assumptions);
        let _ = writeln!(s, "\n[error_bounds]");
        match &self.bounds {
            Ok(b) => {
                let _ = writeln!(s, "dist_bound = {:.16e}", b.dist_bound);
                let _ = writeln!(s, "q_bound = {:.16e}", b.q_bound);
            }
            Err(e) => {
                let _ = writeln!(s, "unavailable = \"{e}\"");
            }
        }
        let _ = writeln!(
            s,
            "\nall_assumptions_hold = {}",
            self.assumptions.all_hold()
        );
        s
    }
}

/// Entrywise comparison of a report's final iterates with an exact solution.
pub fn compare_to_exact(
    report: &RunReport,
    exact: &SolutionTriple,
) -> Result<Comparison, MfcgError> {
    let dims = report.q.dims();
    if dims != exact.q_star.dims()
        || report.mu.len() != exact.mu_star.len()
        || report.locals.dims() != exact.locals_star.dims()
    {
        return Err(MfcgError::InvalidInput(format!(
            "report is {}x{}, exact solution is {}x{}",
            dims.n_states,
            dims.n_actions,
            exact.q_star.dims().n_states,
            exact.q_star.dims().n_actions
        )));
    }
    let mut q_entries = Vec::with_capacity(dims.n_pairs());
    for x in 0..dims.n_states {
        for a in 0..dims.n_actions {
            let (learned, ex) = (report.q.get(x, a), exact.q_star.get(x, a));
            q_entries.push(QEntryComparison {
                x,
                a,
                learned,
                exact: ex,
                abs_error: (learned - ex).abs(),
            });
        }
    }
    let q_max_error = q_entries.iter().map(|e| e.abs_error).fold(0.0, f64::max);
    let mu_errors: Vec<f64> = report
        .mu
        .probs()
        .iter()
        .zip(exact.mu_star.probs())
        .map(|(l, e)| (l - e).abs())
        .collect();
    let mu_max_error = mu_errors.iter().copied().fold(0.0, f64::max);
    Ok(Comparison {
        q_entries,
        q_max_error,
        mu_errors,
        mu_max_error,
        locals_max_error: report.locals.max_l1_distance(&exact.locals_star),
    })
}
