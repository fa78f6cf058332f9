//! Randomized property suites over the symmetric-function and matrix
//! layers.  Each suite reports its most negative relative slack; everything
//! is driven by a single seed so runs are reproducible.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::herm::{polarize, s_k_mat, sample_herm_cone};
use crate::symfunc::{concavity_probe, elem_sym, inequality_report, sample_cone};

/// Outcome of one suite: worst relative slack over all samples (None when
/// no samples were drawn) and the pass verdict at the 1e-9 floor.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub samples: usize,
    pub worst_slack: Option<f64>,
    pub pass: bool,
}

pub const SLACK_FLOOR: f64 = -1e-9;

struct Tracker {
    samples: usize,
    worst: f64,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            samples: 0,
            worst: f64::INFINITY,
        }
    }

    fn record(&mut self, slack: f64) {
        self.samples += 1;
        self.worst = self.worst.min(slack);
    }

    fn finish(self) -> SuiteResult {
        if self.samples == 0 {
            SuiteResult {
                samples: 0,
                worst_slack: None,
                pass: true,
            }
        } else {
            SuiteResult {
                samples: self.samples,
                worst_slack: Some(self.worst),
                pass: self.worst >= SLACK_FLOOR,
            }
        }
    }
}

/// Run every scalar-inequality and matrix-positivity suite: Newton,
/// Maclaurin, generalized Newton-Maclaurin, sorted-partials monotonicity,
/// the two gradient lower bounds, the trace bound on eigenvalues, concavity
/// of S_k^{1/k}, and the Garding product bound for the polarization.
pub fn run_suites(
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<BTreeMap<&'static str, SuiteResult>> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "need 1 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut newton = Tracker::new();
    let mut maclaurin = Tracker::new();
    let mut generalized = Tracker::new();
    let mut sorted_partials = Tracker::new();
    let mut grad_lower = Tracker::new();
    let mut trace_dom = Tracker::new();
    let mut log_grad = Tracker::new();
    let mut concavity = Tracker::new();
    let mut garding = Tracker::new();

    for _ in 0..samples {
        let lam = sample_cone(&mut rng, n, k);
        let sk = elem_sym(&lam).s_norm[k];
        let rel = 1.0 + sk.abs();
        let rep = inequality_report(&lam, k)?;
        let min_of = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        newton.record(min_of(&rep.newton) / rel);
        if !rep.maclaurin.is_empty() {
            maclaurin.record(min_of(&rep.maclaurin) / rel);
        }
        if !rep.generalized.is_empty() {
            let g = rep
                .generalized
                .iter()
                .map(|&(_, v)| v)
                .fold(f64::INFINITY, f64::min);
            generalized.record(g / rel);
        }
        if !rep.sorted_partials.is_empty() {
            sorted_partials.record(min_of(&rep.sorted_partials) / rel);
        }
        grad_lower.record(rep.grad_lower_slack / rel);
        log_grad.record(rep.log_grad_lower_slack / rel);
        if let Some(v) = rep.trace_dominance_slack {
            trace_dom.record(v / rel);
        }

        let other = sample_cone(&mut rng, n, k);
        let t = rng.random::<f64>();
        concavity.record(concavity_probe(&lam, &other, k, t)? / rel);

        let mats: Vec<_> = (0..k).map(|_| sample_herm_cone(&mut rng, n, k)).collect();
        let p = polarize(&mats, k)?;
        let mut bound = 1.0;
        for m in &mats {
            bound *= s_k_mat(m, k)?.powf(1.0 / k as f64);
        }
        garding.record((p - bound) / (1.0 + bound.abs()));
    }

    let mut out = BTreeMap::new();
    out.insert("newton", newton.finish());
    out.insert("maclaurin", maclaurin.finish());
    out.insert("generalized-newton-maclaurin", generalized.finish());
    out.insert("sorted-partials", sorted_partials.finish());
    out.insert("gradient-lower-bound", grad_lower.finish());
    out.insert("log-gradient-lower-bound", log_grad.finish());
    out.insert("trace-dominates-eigenvalues", trace_dom.finish());
    out.insert("root-concavity", concavity.finish());
    out.insert("garding-product-bound", garding.finish());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_small_run() {
        for (n, k) in [(2, 2), (3, 2), (3, 3)] {
            let report = run_suites(n, k, 200, 1).unwrap();
            assert_eq!(report.len(), 9);
            for (name, suite) in &report {
                assert!(suite.pass, "{name}: {suite:?}");
                assert_eq!(suite.samples, 200, "{name}");
            }
        }
    }

    #[test]
    fn zero_samples_vacuous() {
        let report = run_suites(3, 2, 0, 1).unwrap();
        for suite in report.values() {
            assert_eq!(suite.samples, 0);
            assert!(suite.worst_slack.is_none());
            assert!(suite.pass);
        }
    }

    #[test]
    fn deterministic() {
        let a = run_suites(3, 2, 50, 9).unwrap();
        let b = run_suites(3, 2, 50, 9).unwrap();
        for (x, y) in a.values().zip(b.values()) {
            assert_eq!(x.worst_slack, y.worst_slack);
        }
    }

    #[test]
    fn k1_skips_trace_suite() {
        let report = run_suites(3, 1, 50, 2).unwrap();
        let suite = &report["trace-dominates-eigenvalues"];
        assert_eq!(suite.samples, 0);
        assert!(suite.pass);
    }
}
