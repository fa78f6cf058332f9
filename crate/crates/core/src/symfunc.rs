//! Normalized elementary symmetric functions S_k on R^n, the Gamma_k cones,
//! their first derivatives, and the scalar inequality battery.
//!
//! Throughout, S_k = sigma_k / C(n,k), so S_k(1,...,1) = 1.  All recurrences
//! run forward over the eigenvalues; leave-one-out values re-run the
//! recurrence without the excluded index rather than dividing it out.

use rand::Rng;

use crate::error::{Error, Result};

/// Real eigenvalue vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Spectrum { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Copy with entries in non-increasing order.
    pub fn sorted_desc(&self) -> Spectrum {
        let mut v = self.values.clone();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Spectrum { values: v }
    }
}

/// Unnormalized sigma_0..sigma_n together with S_j = sigma_j / C(n,j).
#[derive(Debug, Clone)]
pub struct SymTable {
    pub sigma: Vec<f64>,
    pub s_norm: Vec<f64>,
}

/// C(n,k) as f64, exact for n <= 64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b.round()
}

/// Forward recurrence for sigma_0..sigma_m over `vals`, written into
/// `sigma` (length m+1).  Skips index `skip` when `skip < vals.len()`.
fn sigma_into(vals: &[f64], skip: usize, sigma: &mut [f64]) {
    sigma.fill(0.0);
    sigma[0] = 1.0;
    let m = sigma.len() - 1;
    let mut count = 0usize;
    for (i, &lam) in vals.iter().enumerate() {
        if i == skip {
            continue;
        }
        count += 1;
        let top = m.min(count);
        for j in (1..=top).rev() {
            sigma[j] += lam * sigma[j - 1];
        }
    }
}

/// All elementary symmetric functions of the spectrum.
pub fn elem_sym(lambda: &Spectrum) -> SymTable {
    let n = lambda.n();
    let mut sigma = vec![0.0; n + 1];
    sigma_into(&lambda.values, usize::MAX, &mut sigma);
    let s_norm = (0..=n).map(|j| sigma[j] / binomial(n, j)).collect();
    SymTable { sigma, s_norm }
}

/// Allocation-free S_1..S_k into `s` (length >= k+1); used by the field
/// loops.  `s[0] = 1`.
pub(crate) fn s_norm_into(vals: &[f64], k: usize, scratch: &mut [f64], s: &mut [f64]) {
    let n = vals.len();
    sigma_into(vals, usize::MAX, &mut scratch[..=k]);
    for j in 0..=k {
        s[j] = scratch[j] / binomial(n, j);
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("k = {k} out of range 1..={n}")));
    }
    Ok(())
}

/// Gamma_k membership: S_j > margin for j = 1..k.
pub fn cone_member(lambda: &Spectrum, k: usize, margin: f64) -> Result<bool> {
    check_k(lambda.n(), k)?;
    let t = elem_sym(lambda);
    Ok((1..=k).all(|j| t.s_norm[j] > margin))
}

/// First failing index, if any; used to build cone-violation errors.
pub fn cone_first_failure(lambda: &Spectrum, k: usize, margin: f64) -> Option<usize> {
    let t = elem_sym(lambda);
    (1..=k).find(|&j| t.s_norm[j] <= margin)
}

pub(crate) fn require_cone(lambda: &Spectrum, k: usize) -> Result<()> {
    check_k(lambda.n(), k)?;
    match cone_first_failure(lambda, k, 0.0) {
        None => Ok(()),
        Some(j) => Err(Error::ConeViolation {
            first_failing_j: j,
            point: None,
            argument: None,
        }),
    }
}

/// Gradient of S_k: component j is sigma_{k-1}(lambda with entry j removed)
/// divided by C(n,k).  Safe at zero eigenvalues.
pub fn s_grad(lambda: &Spectrum, k: usize) -> Result<Vec<f64>> {
    let n = lambda.n();
    check_k(n, k)?;
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; k];
    for j in 0..n {
        sigma_into(&lambda.values, j, &mut scratch);
        out[j] = scratch[k - 1] / binomial(n, k);
    }
    Ok(out)
}

/// Same, without allocation, for the pointwise field loops.
pub(crate) fn s_grad_into(vals: &[f64], k: usize, scratch: &mut [f64], out: &mut [f64]) {
    let n = vals.len();
    let c = binomial(n, k);
    for j in 0..n {
        sigma_into(vals, j, &mut scratch[..k]);
        out[j] = scratch[k - 1] / c;
    }
}

/// Signed slacks for every scalar inequality of the preliminary section;
/// all entries are nonnegative (up to roundoff) when lambda is in Gamma_k.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    /// S_j^2 - S_{j-1} S_{j+1} for j = 1..n-1.
    pub newton: Vec<f64>,
    /// Chain values S_j^{1/j} for j = 1..k.
    pub maclaurin_chain: Vec<f64>,
    /// Chain slacks S_j^{1/j} - S_{j+1}^{1/(j+1)} for j = 1..k-1.
    pub maclaurin: Vec<f64>,
    /// (S_r/S_s)^{1/(r-s)} - (S_k/S_l)^{1/(k-l)} over admissible (l, r, s).
    pub generalized: Vec<((usize, usize, usize, usize), f64)>,
    /// dS_k/dlambda_{j+1} - dS_k/dlambda_j on the descending sort.
    pub sorted_partials: Vec<f64>,
    /// lambda_1 dS_k/dlambda_1 - (k/n) S_k.
    pub grad_lower_slack: f64,
    /// (1/S_k) dS_k/dlambda_1 - k/(n lambda_1).
    pub log_grad_lower_slack: f64,
    /// n S_1 - max_j |lambda_j|; meaningful for k >= 2.
    pub trace_dominance_slack: Option<f64>,
}

impl InequalityReport {
    /// Most negative slack over every suite in the report.
    pub fn min_slack(&self) -> f64 {
        let mut m = f64::INFINITY;
        for &v in self
            .newton
            .iter()
            .chain(self.maclaurin.iter())
            .chain(self.sorted_partials.iter())
        {
            m = m.min(v);
        }
        for &(_, v) in &self.generalized {
            m = m.min(v);
        }
        m = m.min(self.grad_lower_slack).min(self.log_grad_lower_slack);
        if let Some(v) = self.trace_dominance_slack {
            m = m.min(v);
        }
        m
    }
}

pub fn inequality_report(lambda: &Spectrum, k: usize) -> Result<InequalityReport> {
    require_cone(lambda, k)?;
    let n = lambda.n();
    let t = elem_sym(lambda);
    let s = &t.s_norm;

    let newton = (1..n).map(|j| s[j] * s[j] - s[j - 1] * s[j + 1]).collect();

    let maclaurin_chain: Vec<f64> = (1..=k).map(|j| s[j].powf(1.0 / j as f64)).collect();
    let maclaurin = (0..k.saturating_sub(1))
        .map(|i| maclaurin_chain[i] - maclaurin_chain[i + 1])
        .collect();

    // (S_k/S_l)^{1/(k-l)} <= (S_r/S_s)^{1/(r-s)} for
    // 0 <= s < r <= k, 0 <= l < k, s <= l.
    let mut generalized = Vec::new();
    for l in 0..k {
        let lhs = (s[k] / s[l]).powf(1.0 / (k - l) as f64);
        for r in 1..=k {
            for sm in 0..r.min(l + 1) {
                let rhs = (s[r] / s[sm]).powf(1.0 / (r - sm) as f64);
                generalized.push(((k, l, r, sm), rhs - lhs));
            }
        }
    }

    let sorted = lambda.sorted_desc();
    let grad = s_grad(&sorted, k)?;
    let sorted_partials = (0..n - 1).map(|j| grad[j + 1] - grad[j]).collect();

    let lam1 = sorted.values[0];
    let grad_lower_slack = lam1 * grad[0] - (k as f64 / n as f64) * s[k];
    let log_grad_lower_slack = grad[0] / s[k] - k as f64 / (n as f64 * lam1);

    let max_abs = lambda
        .values
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()));
    let trace_dominance_slack = if k >= 2 {
        Some(n as f64 * s[1] - max_abs)
    } else {
        None
    };

    Ok(InequalityReport {
        newton,
        maclaurin_chain,
        maclaurin,
        generalized,
        sorted_partials,
        grad_lower_slack,
        log_grad_lower_slack,
        trace_dominance_slack,
    })
}

/// Concavity defect of S_k^{1/k} along the segment: value at the convex
/// combination minus the combination of the values.  Nonnegative on Gamma_k.
pub fn concavity_probe(lambda_a: &Spectrum, lambda_b: &Spectrum, k: usize, t: f64) -> Result<f64> {
    require_cone(lambda_a, k)?;
    require_cone(lambda_b, k)?;
    if lambda_a.n() != lambda_b.n() {
        return Err(Error::Parameter("spectra of different length".into()));
    }
    let root = |lam: &Spectrum| elem_sym(lam).s_norm[k].powf(1.0 / k as f64);
    let mix = Spectrum::new(
        lambda_a
            .values
            .iter()
            .zip(&lambda_b.values)
            .map(|(&a, &b)| t * a + (1.0 - t) * b)
            .collect(),
    );
    Ok(root(&mix) - t * root(lambda_a) - (1.0 - t) * root(lambda_b))
}

/// Draw a Gaussian vector and shift it along (1,...,1) until it lands in
/// Gamma_k.  Reproducible given the rng state.
pub fn sample_cone<R: Rng>(rng: &mut R, n: usize, k: usize) -> Spectrum {
    let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
    let mut c = 0.0;
    loop {
        let cand = Spectrum::new(v.iter().map(|&x| x + c).collect());
        if cone_member(&cand, k, 0.0).unwrap() {
            return cand;
        }
        c = if c == 0.0 { 0.25 } else { c * 2.0 };
        if c > 1e6 {
            // unreachable for finite input; keep the loop total
            v = vec![1.0; n];
            c = 0.0;
        }
    }
}

/// Box-Muller standard normal.
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: expand prod (t + lambda_i) coefficient-wise by
    /// brute-force convolution over subsets for n <= 4.
    fn sigma_oracle(vals: &[f64], j: usize) -> f64 {
        let n = vals.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != j {
                continue;
            }
            let mut p = 1.0;
            for (i, &v) in vals.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    p *= v;
                }
            }
            total += p;
        }
        total
    }

    #[test]
    fn elem_sym_identity_vector() {
        let t = elem_sym(&Spectrum::new(vec![1.0, 1.0, 1.0]));
        for j in 0..=3 {
            assert!((t.s_norm[j] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn elem_sym_matches_subset_oracle() {
        for vals in [vec![1.0, 2.0, 3.0], vec![2.0, 2.0, -0.5], vec![-1.0, 5.0]] {
            let t = elem_sym(&Spectrum::new(vals.clone()));
            for j in 0..=vals.len() {
                assert!(
                    (t.sigma[j] - sigma_oracle(&vals, j)).abs() < 1e-12,
                    "sigma_{j} of {vals:?}"
                );
            }
        }
        // frozen values from the subset oracle
        let t = elem_sym(&Spectrum::new(vec![1.0, 2.0, 3.0]));
        assert_eq!(t.sigma, vec![1.0, 6.0, 11.0, 6.0]);
        assert!((t.s_norm[2] - 11.0 / 3.0).abs() < 1e-15);
        let t = elem_sym(&Spectrum::new(vec![2.0, 2.0, -0.5]));
        assert_eq!(t.sigma, vec![1.0, 3.5, 2.0, -2.0]);
    }

    #[test]
    fn cone_membership_cases() {
        let l = Spectrum::new(vec![1.0, 1.0, 1.0]);
        assert!(cone_member(&l, 3, 0.0).unwrap());
        let l = Spectrum::new(vec![2.0, 2.0, -0.5]);
        assert!(cone_member(&l, 2, 0.0).unwrap());
        assert!(!cone_member(&l, 3, 0.0).unwrap());
        let l = Spectrum::new(vec![-1.0, 5.0]);
        assert!(cone_member(&l, 1, 0.0).unwrap());
        assert!(!cone_member(&l, 2, 0.0).unwrap());
        assert!(cone_member(&l, 3, 0.0).is_err());
    }

    #[test]
    fn cone_nesting() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = 2 + (rng.random::<u32>() % 5) as usize;
            let k = 1 + (rng.random::<u32>() % n as u32) as usize;
            let lam = sample_cone(&mut rng, n, k);
            for j in 1..=k {
                assert!(cone_member(&lam, j, 0.0).unwrap());
            }
        }
    }

    #[test]
    fn s_grad_examples() {
        let g = s_grad(&Spectrum::new(vec![3.0, 2.0, 1.0]), 2).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((g[2] - 5.0 / 3.0).abs() < 1e-15);

        let g = s_grad(&Spectrum::new(vec![1.0, 1.0, 1.0, 1.0]), 3).unwrap();
        let expect = binomial(3, 2) / binomial(4, 3);
        for v in g {
            assert!((v - expect).abs() < 1e-15);
        }

        let g = s_grad(&Spectrum::new(vec![1.0, 2.0, 3.0]), 2).unwrap();
        assert!(g.iter().all(|&v| v > 0.0));
        assert!((g[0] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn s_grad_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = 3 + (rng.random::<u32>() % 3) as usize;
            let k = 1 + (rng.random::<u32>() % n as u32) as usize;
            let lam = sample_cone(&mut rng, n, k);
            let g = s_grad(&lam, k).unwrap();
            let h = 1e-5;
            for j in 0..n {
                let mut up = lam.clone();
                up.values[j] += h;
                let mut dn = lam.clone();
                dn.values[j] -= h;
                let fd = (elem_sym(&up).s_norm[k] - elem_sym(&dn).s_norm[k]) / (2.0 * h);
                let scale = g[j].abs().max(1e-10);
                assert!((fd - g[j]).abs() / scale < 1e-6, "j={j} fd={fd} g={}", g[j]);
            }
        }
    }

    #[test]
    fn euler_and_trace_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = 2 + (rng.random::<u32>() % 6) as usize;
            let k = 1 + (rng.random::<u32>() % n as u32) as usize;
            let lam = sample_cone(&mut rng, n, k);
            let t = elem_sym(&lam);
            let g = s_grad(&lam, k).unwrap();
            let euler: f64 = lam.values.iter().zip(&g).map(|(&l, &d)| l * d).sum();
            let kf = k as f64;
            assert!((euler - kf * t.s_norm[k]).abs() <= 1e-12 * (1.0 + euler.abs()));
            let trace: f64 = g.iter().sum();
            assert!(
                (trace - kf * t.s_norm[k - 1]).abs() <= 1e-12 * (1.0 + trace.abs())
            );
        }
    }

    #[test]
    fn inequality_report_examples() {
        // lambda = (1,2,3), k = 3: Maclaurin chain 6^{1/3} <= (11/3)^{1/2} <= 2
        let r = inequality_report(&Spectrum::new(vec![1.0, 2.0, 3.0]), 3).unwrap();
        assert!((r.maclaurin_chain[2] - 6f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((r.maclaurin_chain[1] - (11.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.maclaurin_chain[0] - 2.0).abs() < 1e-12);
        assert!(r.min_slack() >= -1e-12);

        // lambda = (3,2,1), k = 2: top-partial slack = 3*1 - (2/3)(11/3) = 5/9
        let r = inequality_report(&Spectrum::new(vec![3.0, 2.0, 1.0]), 2).unwrap();
        assert!((r.grad_lower_slack - 5.0 / 9.0).abs() < 1e-12);

        // constant vector: all Newton residuals 0, chain constant
        let r = inequality_report(&Spectrum::new(vec![2.5; 4]), 3).unwrap();
        for v in &r.newton {
            assert!(v.abs() < 1e-12);
        }
        for v in &r.maclaurin_chain {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn inequality_report_rejects_outside_cone() {
        let err = inequality_report(&Spectrum::new(vec![-1.0, 5.0]), 2).unwrap_err();
        match err {
            Error::ConeViolation { first_failing_j, .. } => assert_eq!(first_failing_j, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inequality_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..2000 {
            let n = 2 + (rng.random::<u32>() % 5) as usize;
            let k = 1 + (rng.random::<u32>() % n as u32) as usize;
            let lam = sample_cone(&mut rng, n, k);
            let sk = elem_sym(&lam).s_norm[k];
            let r = inequality_report(&lam, k).unwrap();
            assert!(
                r.min_slack() >= -1e-9 * (1.0 + sk.abs()),
                "slack {} at {:?} k={k}",
                r.min_slack(),
                lam
            );
        }
    }

    #[test]
    fn concavity_cases() {
        let a = Spectrum::new(vec![3.0, 1.0]);
        let b = Spectrum::new(vec![1.0, 3.0]);
        let v = concavity_probe(&a, &b, 2, 0.5).unwrap();
        assert!((v - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!(concavity_probe(&a, &a, 2, 0.3).unwrap().abs() < 1e-12);
        assert!(concavity_probe(&a, &b, 2, 0.0).unwrap().abs() < 1e-12);
        assert!(concavity_probe(&a, &b, 2, 1.0).unwrap().abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = 2 + (rng.random::<u32>() % 4) as usize;
            let k = 1 + (rng.random::<u32>() % n as u32) as usize;
            let la = sample_cone(&mut rng, n, k);
            let lb = sample_cone(&mut rng, n, k);
            let t = rng.random::<f64>();
            assert!(concavity_probe(&la, &lb, k, t).unwrap() >= -1e-10);
        }
    }
}
