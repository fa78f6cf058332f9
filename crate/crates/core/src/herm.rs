//! Hermitian-matrix layer: eigenvalues by cyclic Jacobi rotations, S_k of a
//! matrix, the log/root derivative matrices, and Garding polarization.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::symfunc::{self, binomial, elem_sym, gaussian, sample_cone, Spectrum};

const HERM_TOL: f64 = 1e-12;

/// Immutable n x n Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMat {
    n: usize,
    data: Vec<Complex64>,
}

impl HermMat {
    /// Validates Hermitian symmetry to absolute 1e-12 (relative to the max
    /// entry), then stores the exactly symmetrized matrix with real diagonal.
    pub fn from_entries(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Parameter(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let scale = data.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        for i in 0..n {
            for j in i..n {
                let defect = (data[i * n + j] - data[j * n + i].conj()).norm();
                if defect > HERM_TOL * scale {
                    return Err(Error::Validation(format!(
                        "matrix not Hermitian: entry ({i},{j}) defect {defect:.3e}"
                    )));
                }
            }
        }
        let mut m = HermMat { n, data };
        m.symmetrize();
        Ok(m)
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    /// Construct from the strict upper triangle and real diagonal; always
    /// exactly Hermitian.
    pub fn from_upper(n: usize, diag: &[f64], upper: &[Complex64]) -> Self {
        let mut data = vec![Complex64::ZERO; n * n];
        let mut u = 0;
        for i in 0..n {
            data[i * n + i] = Complex64::new(diag[i], 0.0);
            for j in i + 1..n {
                data[i * n + j] = upper[u];
                data[j * n + i] = upper[u].conj();
                u += 1;
            }
        }
        HermMat { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::ONE;
        }
        HermMat { n, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(values[i], 0.0);
        }
        HermMat { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn add(&self, other: &HermMat) -> HermMat {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        HermMat { n: self.n, data }
    }

    pub fn scale(&self, s: f64) -> HermMat {
        HermMat {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Eigenvalues in non-increasing order.
    pub fn eigvals_h(&self) -> Spectrum {
        let mut a = self.data.clone();
        let mut evals = vec![0.0; self.n];
        jacobi_eig(&mut a, self.n, None, &mut evals);
        evals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Spectrum::new(evals)
    }

    /// Full eigendecomposition A = V diag(evals) V^*, eigenvalues in
    /// non-increasing order with matching columns of V.
    pub fn eig_h(&self) -> (Spectrum, Vec<Complex64>) {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![Complex64::ZERO; n * n];
        let mut evals = vec![0.0; n];
        jacobi_eig(&mut a, n, Some(&mut v), &mut evals);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
        let sorted: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
        let mut vs = vec![Complex64::ZERO; n * n];
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                vs[row * n + col] = v[row * n + src];
            }
        }
        (Spectrum::new(sorted), vs)
    }
}

/// In-place cyclic Jacobi on a Hermitian matrix stored row-major in `a`.
/// On return the diagonal holds the (unsorted) eigenvalues, copied into
/// `evals`; `v` accumulates the eigenvector columns when supplied.
pub(crate) fn jacobi_eig(
    a: &mut [Complex64],
    n: usize,
    v: Option<&mut [Complex64]>,
    evals: &mut [f64],
) {
    let mut vv = v;
    if let Some(v) = vv.as_deref_mut() {
        v.fill(Complex64::ZERO);
        for i in 0..n {
            v[i * n + i] = Complex64::ONE;
        }
    }
    let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let thresh = (1e-13 * norm).max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= thresh {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = a[p * n + q];
                let babs = b.norm();
                if babs <= thresh * 1e-3 / (n as f64) {
                    continue;
                }
                // phase factor making the pivot real, then a real rotation
                let phase = b / babs; // e^{i phi}
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let tau = (aqq - app) / (2.0 * babs);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let spc = s * phase.conj(); // s e^{-i phi}
                let sp = s * phase; // s e^{+i phi}

                // A <- A U, columns p and q
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - spc * aiq;
                    a[i * n + q] = s * aip + c * phase.conj() * aiq;
                }
                // A <- U^* A, rows p and q
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - sp * aqj;
                    a[q * n + j] = s * apj + c * phase * aqj;
                }
                a[p * n + q] = Complex64::ZERO;
                a[q * n + p] = Complex64::ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;

                if let Some(v) = vv.as_deref_mut() {
                    for i in 0..n {
                        let vip = v[i * n + p];
                        let viq = v[i * n + q];
                        v[i * n + p] = c * vip - spc * viq;
                        v[i * n + q] = s * vip + c * phase.conj() * viq;
                    }
                }
            }
        }
    }
    for i in 0..n {
        evals[i] = a[i * n + i].re;
    }
}

/// S_k(A) = S_k(lambda(A)); unitarily invariant.
pub fn s_k_mat(a: &HermMat, k: usize) -> Result<f64> {
    if k < 1 || k > a.n() {
        return Err(Error::Parameter(format!("k = {k} out of range 1..={}", a.n())));
    }
    Ok(elem_sym(&a.eigvals_h()).s_norm[k])
}

/// Gamma_k membership for matrices.
pub fn cone_member_mat(a: &HermMat, k: usize, margin: f64) -> Result<bool> {
    symfunc::cone_member(&a.eigvals_h(), k, margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivKind {
    /// d log S_k / dA
    LogGrad,
    /// d S_k^{1/k} / dA
    RootGrad,
}

/// Derivative matrix of S_k at `base` under the trace pairing
/// d/de S_k(A + eB)|_0 = S_k(A) * tr(LogGrad(A) B).
#[derive(Debug, Clone)]
pub struct DerivMat {
    pub base: HermMat,
    pub kind: DerivKind,
    pub matrix: HermMat,
}

/// Build the derivative matrix in the eigenbasis of A and rotate it back.
/// Requires A in Gamma_k; the result is Hermitian positive definite.
pub fn deriv_matrix(a: &HermMat, k: usize, kind: DerivKind) -> Result<DerivMat> {
    let n = a.n();
    let (lam, v) = a.eig_h();
    symfunc::require_cone(&lam, k)?;
    let table = elem_sym(&lam);
    let sk = table.s_norm[k];
    let grad = symfunc::s_grad(&lam, k)?;
    let diag: Vec<f64> = match kind {
        DerivKind::LogGrad => grad.iter().map(|g| g / sk).collect(),
        DerivKind::RootGrad => {
            let factor = sk.powf(1.0 / k as f64 - 1.0) / k as f64;
            grad.iter().map(|g| factor * g).collect()
        }
    };
    // V diag(d) V^*
    let mut data = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut z = Complex64::ZERO;
            for m in 0..n {
                z += v[i * n + m] * diag[m] * v[j * n + m].conj();
            }
            data[i * n + j] = z;
        }
    }
    let mut matrix = HermMat { n, data };
    matrix.symmetrize();
    Ok(DerivMat {
        base: a.clone(),
        kind,
        matrix,
    })
}

/// Real trace pairing tr(M B) of two Hermitian matrices.
pub fn trace_pair(m: &HermMat, b: &HermMat) -> f64 {
    let n = m.n();
    let mut acc = Complex64::ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += m.get(i, j) * b.get(j, i);
        }
    }
    acc.re
}

/// Complete polarization of S_k by inclusion-exclusion:
/// P_k(A_1..A_k) = (1/k!) sum over nonempty S of (-1)^{k-|S|} S_k(sum_S A_i).
/// Symmetric, multilinear, and P_k(A,..,A) = S_k(A).
pub fn polarize(matrices: &[HermMat], k: usize) -> Result<f64> {
    if matrices.len() != k {
        return Err(Error::Parameter(format!(
            "polarize expects {k} matrices, got {}",
            matrices.len()
        )));
    }
    let n = matrices[0].n();
    if matrices.iter().any(|m| m.n() != n) {
        return Err(Error::Parameter("matrix sizes differ".into()));
    }
    let mut total = 0.0;
    let mut sum = vec![Complex64::ZERO; n * n];
    let mut scratch = vec![Complex64::ZERO; n * n];
    let mut evals = vec![0.0; n];
    let mut sig = vec![0.0; k + 1];
    let mut snorm = vec![0.0; k + 1];
    for mask in 1u32..(1 << k) {
        sum.fill(Complex64::ZERO);
        for (i, m) in matrices.iter().enumerate() {
            if mask >> i & 1 == 1 {
                for (dst, src) in sum.iter_mut().zip(m.entries()) {
                    *dst += src;
                }
            }
        }
        scratch.copy_from_slice(&sum);
        jacobi_eig(&mut scratch, n, None, &mut evals);
        symfunc::s_norm_into(&evals, k, &mut sig, &mut snorm);
        let sign = if (k - mask.count_ones() as usize) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * snorm[k];
    }
    let mut fact = 1.0;
    for i in 2..=k {
        fact *= i as f64;
    }
    Ok(total / fact)
}

/// Mixed-wedge value of k cone matrices against the background volume:
/// strictly positive whenever every argument lies in Gamma_k.
pub fn mixed_positivity(matrices: &[HermMat], k: usize) -> Result<f64> {
    if matrices.len() != k {
        return Err(Error::Parameter(format!(
            "expected {k} matrices, got {}",
            matrices.len()
        )));
    }
    for (idx, m) in matrices.iter().enumerate() {
        let lam = m.eigvals_h();
        if let Some(j) = symfunc::cone_first_failure(&lam, k, 0.0) {
            return Err(Error::ConeViolation {
                first_failing_j: j,
                point: None,
                argument: Some(idx),
            });
        }
    }
    polarize(matrices, k)
}

/// Random unitary built from a product of complex Jacobi-style rotations.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let mut u = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        u[i * n + i] = Complex64::ONE;
    }
    for p in 0..n {
        for q in p + 1..n {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            let (c, s) = (theta.cos(), theta.sin());
            let e = Complex64::from_polar(1.0, phi);
            for i in 0..n {
                let uip = u[i * n + p];
                let uiq = u[i * n + q];
                u[i * n + p] = c * uip - s * e.conj() * uiq;
                u[i * n + q] = s * uip + c * e.conj() * uiq;
            }
        }
    }
    u
}

/// U diag(lambda) U^* for the given spectrum and unitary.
pub fn conjugate_diag(lam: &Spectrum, u: &[Complex64]) -> HermMat {
    let n = lam.n();
    let mut data = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut z = Complex64::ZERO;
            for m in 0..n {
                z += u[i * n + m] * lam.values[m] * u[j * n + m].conj();
            }
            data[i * n + j] = z;
        }
    }
    let mut m = HermMat { n, data };
    m.symmetrize();
    m
}

/// Random Gamma_k Hermitian matrix: sampled cone spectrum conjugated by a
/// random unitary.
pub fn sample_herm_cone<R: Rng>(rng: &mut R, n: usize, k: usize) -> HermMat {
    let lam = sample_cone(rng, n, k);
    let u = random_unitary(rng, n);
    conjugate_diag(&lam, &u)
}

/// Random Hermitian matrix with Gaussian entries (no cone constraint).
pub fn sample_herm<R: Rng>(rng: &mut R, n: usize) -> HermMat {
    let mut diag = vec![0.0; n];
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for d in diag.iter_mut() {
        *d = gaussian(rng);
    }
    for _ in 0..n * (n - 1) / 2 {
        upper.push(Complex64::new(gaussian(rng), gaussian(rng)) * 0.5f64.sqrt());
    }
    HermMat::from_upper(n, &diag, &upper)
}

/// Closed-form polarization of S_k via power-sum traces, k <= 3 only.
/// Used as the independent oracle for `polarize`.
pub fn polarize_trace_oracle(matrices: &[HermMat], k: usize) -> Result<f64> {
    if matrices.len() != k {
        return Err(Error::Parameter("length mismatch".into()));
    }
    let n = matrices[0].n();
    let tr = |m: &HermMat| -> f64 {
        (0..n).map(|i| m.get(i, i).re).sum()
    };
    let mul = |a: &HermMat, b: &HermMat| -> HermMat {
        let mut data = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut z = Complex64::ZERO;
                for m in 0..n {
                    z += a.get(i, m) * b.get(m, j);
                }
                data[i * n + j] = z;
            }
        }
        HermMat { n, data }
    };
    let trp = |a: &HermMat, b: &HermMat| -> f64 {
        let mut z = Complex64::ZERO;
        for i in 0..n {
            for j in 0..n {
                z += a.get(i, j) * b.get(j, i);
            }
        }
        z.re
    };
    let value = match k {
        1 => tr(&matrices[0]),
        2 => {
            let (a, b) = (&matrices[0], &matrices[1]);
            0.5 * (tr(a) * tr(b) - trp(a, b))
        }
        3 => {
            let (a, b, c) = (&matrices[0], &matrices[1], &matrices[2]);
            let abc = trp(&mul(a, b), c);
            let acb = trp(&mul(a, c), b);
            (tr(a) * tr(b) * tr(c)
                - tr(a) * trp(b, c)
                - tr(b) * trp(a, c)
                - tr(c) * trp(a, b)
                + abc
                + acb)
                / 6.0
        }
        _ => return Err(Error::Parameter("trace oracle limited to k <= 3".into())),
    };
    Ok(value / binomial(n, k))
}
