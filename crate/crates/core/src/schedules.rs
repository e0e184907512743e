//! Power-law learning rates for the three timescales.
//!
//! Every rate has the form `1/(1+k)^ω`, where `k` is either the global step
//! counter or a per-pair visit count, and `½ < ω^{μ̃} < ω^Q < ω^μ < 1`.

use serde::{Deserialize, Serialize};

use crate::error::{MfcgError, Result};
use crate::types::SpaceDims;

/// Exponents of the three rate sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateExponents {
    pub omega_mu_tilde: f64,
    pub omega_q: f64,
    pub omega_mu: f64,
}

impl Default for RateExponents {
    fn default() -> Self {
        RateExponents {
            omega_mu_tilde: 0.55,
            omega_q: 0.75,
            omega_mu: 0.95,
        }
    }
}

/// Outcome of [`validate_exponents`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub ordering_ok: bool,
    /// Each exponent lies in (½, 1], so the sequence is non-summable and square-summable.
    pub summability_ok: bool,
    /// Holds when both of the above do; the power-law family then meets the
    /// usual step-size conditions for two-timescale convergence.
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

/// Check ordering and range conditions on a set of exponents.
pub fn validate_exponents(exps: &RateExponents) -> ExponentReport {
    let RateExponents {
        omega_mu_tilde: wt,
        omega_q: wq,
        omega_mu: wm,
    } = *exps;
    let mut diagnostics = Vec::new();
    let mut summability_ok = true;
    for (name, w) in [("omega_mu_tilde", wt), ("omega_q", wq), ("omega_mu", wm)] {
        if !w.is_finite() {
            diagnostics.push(format!("{name} = {w} is not finite"));
            summability_ok = false;
        } else if w <= 0.5 {
            diagnostics.push(format!(
                "{name} = {w} <= 1/2: squared rates are not summable"
            ));
            summability_ok = false;
        } else if w > 1.0 {
            diagnostics.push(format!("{name} = {w} > 1: rates are summable"));
            summability_ok = false;
        }
    }
    let mut ordering_ok = true;
    if !(0.5 < wt && wt < wq && wq < wm && wm < 1.0) {
        ordering_ok = false;
        if !(wt < wq) {
            diagnostics.push(format!(
                "ordering violated: omega_mu_tilde ({wt}) must be < omega_q ({wq})"
            ));
        }
        if !(wq < wm) {
            diagnostics.push(format!(
                "ordering violated: omega_q ({wq}) must be < omega_mu ({wm})"
            ));
        }
        if !(0.5 < wt) {
            diagnostics.push(format!(
                "ordering violated: omega_mu_tilde ({wt}) must be > 1/2"
            ));
        }
        if !(wm < 1.0) {
            diagnostics.push(format!("ordering violated: omega_mu ({wm}) must be < 1"));
        }
    }
    if ordering_ok && summability_ok {
        diagnostics.push(format!(
            "valid: rate ratios decay like n^-{:.3} (Q/local) and n^-{:.3} (global/Q)",
            wq - wt,
            wm - wq
        ));
    }
    ExponentReport {
        ordering_ok,
        summability_ok,
        valid: ordering_ok && summability_ok,
        diagnostics,
    }
}

/// Which of the three iterates a rate drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateKind {
    Mu,
    Q,
    MuTilde,
}

/// Per-pair visit counts ν(x, a, n).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitCounts {
    dims: SpaceDims,
    counts: Vec<u64>,
}

impl VisitCounts {
    pub fn new(dims: SpaceDims) -> Self {
        VisitCounts {
            dims,
            counts: vec![0; dims.n_pairs()],
        }
    }

    pub fn get(&self, x: usize, a: usize) -> u64 {
        self.counts[self.dims.pair(x, a)]
    }

    pub fn increment(&mut self, x: usize, a: usize) {
        let i = self.dims.pair(x, a);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }
}

/// A validated set of exponents with rate accessors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    exps: RateExponents,
}

impl Schedule {
    pub fn new(exps: RateExponents) -> Result<Self> {
        let report = validate_exponents(&exps);
        if !report.valid {
            return Err(MfcgError::InvalidExponents(report.diagnostics.join("; ")));
        }
        Ok(Schedule { exps })
    }

    pub fn exponents(&self) -> RateExponents {
        self.exps
    }

    fn omega(&self, kind: RateKind) -> f64 {
        match kind {
            RateKind::Mu => self.exps.omega_mu,
            RateKind::Q => self.exps.omega_q,
            RateKind::MuTilde => self.exps.omega_mu_tilde,
        }
    }

    /// `1/(1+n)^{ω^μ}`
    #[inline]
    pub fn global(&self, n: u64) -> f64 {
        power_rate(n, self.exps.omega_mu)
    }

    /// `1/(1+n)^ω` for the chosen timescale.
    #[inline]
    pub fn deterministic(&self, kind: RateKind, n: u64) -> f64 {
        power_rate(n, self.omega(kind))
    }

    /// `1/(1+ν(x,a,n))^ω`.
    pub fn visit(&self, kind: RateKind, counts: &VisitCounts, x: usize, a: usize) -> Result<f64> {
        counts.dims().check_pair(x, a)?;
        Ok(power_rate(counts.get(x, a), self.omega(kind)))
    }
}

#[inline]
fn power_rate(k: u64, omega: f64) -> f64 {
    (1.0 + k as f64).powf(-omega)
}

/// `ρ^μ_n = 1/(1+n)^{ω^μ}`.
pub fn rate_global(n: u64, exps: &RateExponents) -> Result<f64> {
    Ok(Schedule::new(*exps)?.global(n))
}

/// Visit-count rate for the Q or local timescale.
pub fn rate_visit(
    kind: RateKind,
    counts: &VisitCounts,
    x: usize,
    a: usize,
    exps: &RateExponents,
) -> Result<f64> {
    if kind == RateKind::Mu {
        return Err(MfcgError::InvalidInput(
            "visit-count rates exist only for Q and local distributions".into(),
        ));
    }
    Schedule::new(*exps)?.visit(kind, counts, x, a)
}

/// Step-indexed rate for the synchronous and idealized iterations.
pub fn rate_deterministic(kind: RateKind, n: u64, exps: &RateExponents) -> Result<f64> {
    Ok(Schedule::new(*exps)?.deterministic(kind, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let r = validate_exponents(&RateExponents::default());
        assert!(r.valid, "{:?}", r.diagnostics);
    }

    #[test]
    fn ordering_and_range_violations() {
        let inverted = RateExponents {
            omega_mu_tilde: 0.75,
            omega_q: 0.55,
            omega_mu: 0.95,
        };
        let r = validate_exponents(&inverted);
        assert!(!r.ordering_ok && r.summability_ok);
        assert!(r
            .diagnostics
            .iter()
            .any(|d| d.contains("omega_mu_tilde (0.75) must be < omega_q")));

        let low = RateExponents {
            omega_mu_tilde: 0.4,
            omega_q: 0.75,
            omega_mu: 0.95,
        };
        let r = validate_exponents(&low);
        assert!(!r.valid && !r.summability_ok);
        assert!(r.diagnostics.iter().any(|d| d.contains("not summable")));
        assert!(Schedule::new(low).is_err());
    }

    #[test]
    fn visit_rate_checks_indices() {
        let dims = SpaceDims::new(2, 2).unwrap();
        let mut c = VisitCounts::new(dims);
        let s = Schedule::new(RateExponents::default()).unwrap();
        assert_eq!(s.visit(RateKind::Q, &c, 1, 1).unwrap(), 1.0);
        c.increment(1, 1);
        assert_eq!(c.get(1, 1), 1);
        assert!(s.visit(RateKind::Q, &c, 2, 0).is_err());
        assert!(rate_visit(RateKind::Mu, &c, 0, 0, &RateExponents::default()).is_err());
    }
}
