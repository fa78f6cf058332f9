//! The nonlinear k-Hessian operator on fields, its log-form linearization
//! with pointwise G-matrices, the energy identity, and the estimate
//! monitors.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{complex_hessian, grad_holo, grad_sq, Field, HermField};
use crate::herm::{jacobi_eig, polarize, HermMat};
use crate::symfunc::{s_grad_into, s_norm_into};

/// Reusable per-point scratch for the field loops.
struct PointCtx {
    mat: Vec<Complex64>,
    vecs: Vec<Complex64>,
    evals: Vec<f64>,
    sigma: Vec<f64>,
    snorm: Vec<f64>,
    grad: Vec<f64>,
}

impl PointCtx {
    fn new(n: usize, k: usize) -> Self {
        PointCtx {
            mat: vec![Complex64::ZERO; n * n],
            vecs: vec![Complex64::ZERO; n * n],
            evals: vec![0.0; n],
            sigma: vec![0.0; k + 1],
            snorm: vec![0.0; k + 1],
            grad: vec![0.0; n],
        }
    }
}

fn check_k(n: usize, k: usize) -> usize {
    assert!(k >= 1 && k <= n, "k = {k} out of range 1..={n}");
    k
}

/// Pointwise S_k(I + Phi(x)).
pub fn apply_op(phi: &Field, k: usize) -> Field {
    let n = phi.grid.n;
    check_k(n, k);
    let hess = complex_hessian(phi);
    let mut ctx = PointCtx::new(n, k);
    let data = (0..phi.grid.points())
        .map(|p| {
            hess.write_shifted_into(p, 1.0, &mut ctx.mat);
            jacobi_eig(&mut ctx.mat, n, None, &mut ctx.evals);
            s_norm_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.snorm);
            ctx.snorm[k]
        })
        .collect();
    Field {
        grid: phi.grid,
        data,
    }
}

/// min over grid points of min_{j<=k} S_j(I + Phi); positive iff phi is in
/// the admissible class P_k.
pub fn cone_margin(phi: &Field, k: usize) -> f64 {
    let n = phi.grid.n;
    check_k(n, k);
    let hess = complex_hessian(phi);
    let mut ctx = PointCtx::new(n, k);
    let mut margin = f64::INFINITY;
    for p in 0..phi.grid.points() {
        hess.write_shifted_into(p, 1.0, &mut ctx.mat);
        jacobi_eig(&mut ctx.mat, n, None, &mut ctx.evals);
        s_norm_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.snorm);
        for j in 1..=k {
            margin = margin.min(ctx.snorm[j]);
        }
    }
    margin
}

/// S_k(I + Phi) and the cone margin in a single eigenvalue pass; the solver
/// hot path.
pub fn op_and_margin(phi: &Field, k: usize) -> (Field, f64) {
    let n = phi.grid.n;
    check_k(n, k);
    let hess = complex_hessian(phi);
    let mut ctx = PointCtx::new(n, k);
    let mut margin = f64::INFINITY;
    let data = (0..phi.grid.points())
        .map(|p| {
            hess.write_shifted_into(p, 1.0, &mut ctx.mat);
            jacobi_eig(&mut ctx.mat, n, None, &mut ctx.evals);
            s_norm_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.snorm);
            for j in 1..=k {
                margin = margin.min(ctx.snorm[j]);
            }
            ctx.snorm[k]
        })
        .collect();
    (
        Field {
            grid: phi.grid,
            data,
        },
        margin,
    )
}

/// Log-form linearization: pointwise G = d log S_k / dA at I + Phi.
#[derive(Debug)]
pub struct LinearizedOp {
    pub gfield: HermField,
    pub k: usize,
}

impl LinearizedOp {
    /// Average of tr(G)/n over the grid; the preconditioner constant.
    pub fn mean_trace_over_n(&self) -> f64 {
        self.gfield.trace_field().mean() / self.gfield.n as f64
    }
}

/// Build the pointwise G-matrices.  Fails with the worst grid point when
/// I + Phi leaves Gamma_k anywhere.
pub fn linearize(phi: &Field, k: usize) -> Result<LinearizedOp> {
    let n = phi.grid.n;
    check_k(n, k);
    let hess = complex_hessian(phi);
    let mut ctx = PointCtx::new(n, k);
    let mut gfield = HermField::zeros(phi.grid);
    let mut gmat = vec![Complex64::ZERO; n * n];
    for p in 0..phi.grid.points() {
        hess.write_shifted_into(p, 1.0, &mut ctx.mat);
        jacobi_eig(&mut ctx.mat, n, Some(&mut ctx.vecs), &mut ctx.evals);
        s_norm_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.snorm);
        if let Some(j) = (1..=k).find(|&j| ctx.snorm[j] <= 0.0) {
            return Err(Error::ConeViolation {
                first_failing_j: j,
                point: Some(p),
                argument: None,
            });
        }
        let sk = ctx.snorm[k];
        s_grad_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.grad);
        // V diag(g/S_k) V^*
        for i in 0..n {
            for j in i..n {
                let mut z = Complex64::ZERO;
                for m in 0..n {
                    z += ctx.vecs[i * n + m] * (ctx.grad[m] / sk) * ctx.vecs[j * n + m].conj();
                }
                gmat[i * n + j] = z;
            }
        }
        for i in 0..n {
            gmat[i * n + i].im = 0.0;
        }
        gfield.set_from_full(p, &gmat);
    }
    Ok(LinearizedOp { gfield, k })
}

/// sum_{a,b} G^{a bbar}(x) psi_{,a bbar}(x): the derivative of
/// log S_k(I + Phi + e Psi) at e = 0.
pub fn apply_lin(lin: &LinearizedOp, psi: &Field) -> Field {
    let n = psi.grid.n;
    let hess = complex_hessian(psi);
    let data = (0..psi.grid.points())
        .map(|p| {
            let gd = lin.gfield.diag_at(p);
            let hd = hess.diag_at(p);
            let gu = lin.gfield.upper_at(p);
            let hu = hess.upper_at(p);
            let mut acc = 0.0;
            for i in 0..n {
                acc += gd[i] * hd[i];
            }
            for (g, h) in gu.iter().zip(hu) {
                acc += 2.0 * (g * h.conj()).re;
            }
            acc
        })
        .collect();
    Field {
        grid: psi.grid,
        data,
    }
}

fn require_admissible(phi: &Field, k: usize) -> Result<()> {
    let n = phi.grid.n;
    let hess = complex_hessian(phi);
    let mut ctx = PointCtx::new(n, k);
    for p in 0..phi.grid.points() {
        hess.write_shifted_into(p, 1.0, &mut ctx.mat);
        jacobi_eig(&mut ctx.mat, n, None, &mut ctx.evals);
        s_norm_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.snorm);
        if let Some(j) = (1..=k).find(|&j| ctx.snorm[j] <= 0.0) {
            return Err(Error::ConeViolation {
                first_failing_j: j,
                point: Some(p),
                argument: None,
            });
        }
    }
    Ok(())
}

/// Result of the uniqueness-energy identity.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyIdentity {
    /// mean((psi - phi)(S_k(omega_psi) - S_k(omega_phi)))
    pub lhs: f64,
    /// Mixed-wedge means, one per power split l = 0..k-1; each nonnegative.
    pub terms: Vec<f64>,
    /// Minimum of the mixed integrands over all points and splits.
    pub pointwise_min: f64,
    /// |lhs + sum(terms)|; zero up to aliasing.
    pub defect: f64,
}

impl EnergyIdentity {
    pub fn relative_defect(&self) -> f64 {
        self.defect / (self.lhs.abs() + 1.0)
    }
}

/// Realize the telescoped uniqueness identity: with u = psi - phi,
/// mean(u (S_k(omega_psi) - S_k(omega_phi))) =
///   - sum_l mean(P_k(i du dbar u, omega_psi^l, omega_phi^{k-1-l}))
/// where the mixed wedge against omega^{n-k} is computed as the matrix
/// polarization of the rank-one gradient matrix with the shifted Hessians.
pub fn energy_identity(phi: &Field, psi: &Field, k: usize) -> Result<EnergyIdentity> {
    let grid = phi.grid;
    let n = grid.n;
    check_k(n, k);
    if psi.grid != grid {
        return Err(Error::Parameter("phi and psi live on different grids".into()));
    }
    require_admissible(phi, k)?;
    require_admissible(psi, k)?;

    let u = psi.sub(phi);
    let op_phi = apply_op(phi, k);
    let op_psi = apply_op(psi, k);
    let lhs = {
        let mut acc = 0.0;
        for p in 0..grid.points() {
            acc += u.data[p] * (op_psi.data[p] - op_phi.data[p]);
        }
        acc / grid.points() as f64
    };

    let grads = grad_holo(&u);
    let hess_phi = complex_hessian(phi);
    let hess_psi = complex_hessian(psi);

    let mut terms = vec![0.0; k];
    let mut pointwise_min = f64::INFINITY;
    let mut shifted = vec![Complex64::ZERO; n * n];
    for p in 0..grid.points() {
        // rank-one matrix u_{,a} conj(u_{,b})
        let r = {
            let mut data = vec![Complex64::ZERO; n * n];
            for a in 0..n {
                for b in 0..n {
                    data[a * n + b] = grads[a][p] * grads[b][p].conj();
                }
            }
            HermMat::from_entries(n, data).expect("rank-one gradient matrix is Hermitian")
        };
        hess_psi.write_shifted_into(p, 1.0, &mut shifted);
        let a_psi = HermMat::from_entries(n, shifted.clone()).unwrap();
        hess_phi.write_shifted_into(p, 1.0, &mut shifted);
        let a_phi = HermMat::from_entries(n, shifted.clone()).unwrap();
        for (l, term) in terms.iter_mut().enumerate() {
            let mut args = Vec::with_capacity(k);
            args.push(r.clone());
            for _ in 0..l {
                args.push(a_psi.clone());
            }
            for _ in 0..k - 1 - l {
                args.push(a_phi.clone());
            }
            let val = polarize(&args, k).expect("length checked");
            pointwise_min = pointwise_min.min(val);
            *term += val;
        }
    }
    for t in terms.iter_mut() {
        *t /= grid.points() as f64;
    }
    let defect = (lhs + terms.iter().sum::<f64>()).abs();
    Ok(EnergyIdentity {
        lhs,
        terms,
        pointwise_min,
        defect,
    })
}

/// Diagnostics tracked along a solve; everything is pointwise-exactly
/// checkable, no use is made of the non-explicit a priori constants.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// sup |grad phi|^2
    pub sup_b: f64,
    /// sup of A = log B - h(phi), h(t) = log(2t+1)/2, with inf phi
    /// shifted to 0 and B floored at the smallest positive double.
    pub sup_a: f64,
    pub osc_phi: f64,
    /// sup S_1(lambda(I+Phi)) = sup (n + lap phi)/n
    pub sup_s1: f64,
    pub sup_abs_lambda: f64,
    /// min over points of n S_1 - max_j |lambda_j|
    pub trace_dominance_slack: f64,
    /// min over points of S_k (S_{k-1}/S_k)^{k-1} - S_1
    pub s1_upper_slack: f64,
    pub tr_g_range: (f64, f64),
    pub tr_h_range: (f64, f64),
    pub maclaurin_ok: bool,
    /// sup of n S_1 - phi and n S_1 + phi (both sign conventions)
    pub sup_ns1_minus_phi: f64,
    pub sup_ns1_plus_phi: f64,
    /// sup |log S_k(I+Phi) - log f|
    pub sup_log_residual: f64,
}

pub fn monitors(phi: &Field, f: &Field, k: usize) -> Result<EstimateReport> {
    let grid = phi.grid;
    let n = grid.n;
    check_k(n, k);
    require_admissible(phi, k)?;

    let inf_phi = phi.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup_phi = phi.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let osc_phi = sup_phi - inf_phi;

    let b = grad_sq(phi);
    let sup_b = b.data.iter().cloned().fold(0.0, f64::max);
    let h = |t: f64| 0.5 * (2.0 * t + 1.0).ln();
    let mut sup_a = f64::NEG_INFINITY;
    for p in 0..grid.points() {
        let a = b.data[p].max(f64::MIN_POSITIVE).ln() - h(phi.data[p] - inf_phi);
        sup_a = sup_a.max(a);
    }

    let hess = complex_hessian(phi);
    let mut ctx = PointCtx::new(n, k);
    let mut sup_s1 = f64::NEG_INFINITY;
    let mut sup_abs_lambda = 0.0_f64;
    let mut trace_dominance_slack = f64::INFINITY;
    let mut s1_upper_slack = f64::INFINITY;
    let mut tr_g = (f64::INFINITY, f64::NEG_INFINITY);
    let mut tr_h = (f64::INFINITY, f64::NEG_INFINITY);
    let mut maclaurin_ok = true;
    let mut sup_minus = f64::NEG_INFINITY;
    let mut sup_plus = f64::NEG_INFINITY;
    let mut sup_log_residual = 0.0_f64;
    for p in 0..grid.points() {
        hess.write_shifted_into(p, 1.0, &mut ctx.mat);
        jacobi_eig(&mut ctx.mat, n, None, &mut ctx.evals);
        s_norm_into(&ctx.evals, k, &mut ctx.sigma, &mut ctx.snorm);
        let s = &ctx.snorm;
        let s1 = s[1];
        let sk = s[k];
        sup_s1 = sup_s1.max(s1);
        let max_abs = ctx.evals.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        sup_abs_lambda = sup_abs_lambda.max(max_abs);
        trace_dominance_slack = trace_dominance_slack.min(n as f64 * s1 - max_abs);
        s1_upper_slack = s1_upper_slack.min(sk * (s[k - 1] / sk).powi(k as i32 - 1) - s1);
        let g = k as f64 * s[k - 1] / sk;
        tr_g = (tr_g.0.min(g), tr_g.1.max(g));
        let th = sk.powf(1.0 / k as f64) * s[k - 1] / sk;
        tr_h = (tr_h.0.min(th), tr_h.1.max(th));
        let mut prev = f64::INFINITY;
        for j in 1..=k {
            let root = s[j].powf(1.0 / j as f64);
            if root > prev + 1e-9 {
                maclaurin_ok = false;
            }
            prev = root;
        }
        let shifted = phi.data[p] - inf_phi;
        sup_minus = sup_minus.max(n as f64 * s1 - shifted);
        sup_plus = sup_plus.max(n as f64 * s1 + shifted);
        sup_log_residual = sup_log_residual.max((sk.ln() - f.data[p].ln()).abs());
    }

    Ok(EstimateReport {
        sup_b,
        sup_a,
        osc_phi,
        sup_s1,
        sup_abs_lambda,
        trace_dominance_slack,
        s1_upper_slack,
        tr_g_range: tr_g,
        tr_h_range: tr_h,
        maclaurin_ok,
        sup_ns1_minus_phi: sup_minus,
        sup_ns1_plus_phi: sup_plus,
        sup_log_residual,
    })
}
