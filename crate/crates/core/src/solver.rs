//! Continuity-method outer loop and cone-preserving damped Newton inner
//! loop for S_k(omega_phi) = f, with a BiCGStab linear solver
//! preconditioned by the flat Laplacian inverse.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{laplace_inverse, Field};
use crate::operator::{
    apply_lin, cone_margin, linearize, monitors, op_and_margin, EstimateReport, LinearizedOp,
};

const ARMIJO: f64 = 1e-4;
const CONTINUATION_DT_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    /// Sup-norm stopping tolerance on the log residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Relative residual for the inner linear solves.
    pub krylov_tol: f64,
    /// Every accepted iterate keeps cone margin at least this.
    pub cone_margin_min: f64,
    /// Backtracking factor in (0,1).
    pub damping: f64,
    pub max_backtracks: usize,
    /// Initial number of continuation stages; the step adapts from 1/this.
    pub continuation_steps: usize,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            newton_tol: 1e-9,
            max_newton: 50,
            krylov_tol: 1e-10,
            cone_margin_min: 1e-6,
            damping: 0.5,
            max_backtracks: 40,
            continuation_steps: 4,
            seed: 0,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.krylov_tol > 0.0 && self.cone_margin_min > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Parameter("damping factor must be in (0,1)".into()));
        }
        if self.continuation_steps == 0 {
            return Err(Error::Parameter("continuation_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub residual_sup: f64,
    pub cone_margin: f64,
    pub step_len: f64,
    pub krylov_iters: usize,
    pub report: EstimateReport,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

fn validate_rhs(f: &Field) -> Result<()> {
    if let Some(point) = f.data.iter().position(|&v| v <= 0.0) {
        return Err(Error::Positivity { point });
    }
    let m = f.mean();
    if (m - 1.0).abs() > 1e-12 {
        return Err(Error::Compatibility(format!(
            "mean(f) = {m:.15} differs from 1"
        )));
    }
    Ok(())
}

/// BiCGStab on the mean-zero subspace; every operator application and
/// preconditioner application re-projects.  The preconditioner is the
/// constant-coefficient Laplacian inverse scaled by mean(tr G)/n.
pub fn krylov_solve(lin: &LinearizedOp, rhs: &Field, cfg: &SolveConfig) -> Result<(Field, usize)> {
    let sup = rhs.sup_norm();
    if rhs.mean().abs() > 1e-8 * sup.max(f64::MIN_POSITIVE) {
        return Err(Error::Compatibility(
            "krylov rhs must be mean-zero".into(),
        ));
    }
    let grid = rhs.grid;
    let c = lin.mean_trace_over_n();
    let matvec = |x: &Field| apply_lin(lin, x).project_zero_mean();
    let precond = |r: &Field| -> Result<Field> {
        // project twice: when r is mostly a constant the first subtraction
        // cancels catastrophically and can leave a relative mean above the
        // laplace_inverse tolerance
        let q = r.project_zero_mean().project_zero_mean();
        Ok(laplace_inverse(&q)?.scale(1.0 / c))
    };

    let b_norm = rhs.l2();
    if b_norm == 0.0 {
        return Ok((Field::zeros(grid), 0));
    }
    let mut x = Field::zeros(grid);
    let mut r = rhs.clone();
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = Field::zeros(grid);
    let mut p = Field::zeros(grid);
    let max_iters = 10 * grid.points();

    for iter in 1..=max_iters {
        let rho_new = r_hat.dot(&r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::LinearSolve {
                iterations: iter,
                residual: r.l2() / b_norm,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p = r.add_scaled(&p.add_scaled(&v, -omega), beta);
        let p_hat = precond(&p)?;
        v = matvec(&p_hat);
        let denom = r_hat.dot(&v);
        if denom.abs() < 1e-300 {
            return Err(Error::LinearSolve {
                iterations: iter,
                residual: r.l2() / b_norm,
            });
        }
        alpha = rho / denom;
        let s = r.add_scaled(&v, -alpha);
        if s.l2() <= cfg.krylov_tol * b_norm {
            x = x.add_scaled(&p_hat, alpha);
            return Ok((x.project_zero_mean(), iter));
        }
        let s_hat = precond(&s)?;
        let t = matvec(&s_hat);
        let tt = t.dot(&t);
        if tt == 0.0 {
            return Err(Error::LinearSolve {
                iterations: iter,
                residual: s.l2() / b_norm,
            });
        }
        omega = t.dot(&s) / tt;
        x = x.add_scaled(&p_hat, alpha).add_scaled(&s_hat, omega);
        r = s.add_scaled(&t, -omega);
        if r.l2() <= cfg.krylov_tol * b_norm {
            return Ok((x.project_zero_mean(), iter));
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iters,
        residual: r.l2() / b_norm,
    })
}

/// Log residual split into its mean-zero part and its constant offset.
/// The gauge mean(phi) = 0 can only control the projected part: the offset
/// is the discrete compatibility defect of the stage data and vanishes as
/// the iterate reaches an exactly representable right-hand side.
fn log_residual(op: &Field, log_f: &[f64]) -> (Field, f64) {
    let r = Field {
        grid: op.grid,
        data: op
            .data
            .iter()
            .zip(log_f)
            .map(|(&o, &lf)| o.ln() - lf)
            .collect(),
    };
    let offset = r.mean();
    (r.project_zero_mean(), offset)
}

/// Damped Newton at a fixed right-hand side, recording accepted steps into
/// `trace` tagged with the continuation parameter `t`.
fn newton_stage(
    f: &Field,
    k: usize,
    phi0: Field,
    cfg: &SolveConfig,
    t: f64,
    trace: &mut SolveTrace,
) -> Result<Field> {
    let log_f: Vec<f64> = f.data.iter().map(|v| v.ln()).collect();
    let mut phi = phi0.project_zero_mean();
    let (op, margin) = op_and_margin(&phi, k);
    if margin < cfg.cone_margin_min {
        return Err(Error::Validation(format!(
            "initial iterate has cone margin {margin:.3e} < {:.3e}",
            cfg.cone_margin_min
        )));
    }
    let (mut rfield, _) = log_residual(&op, &log_f);
    let mut res = rfield.sup_norm();

    for _iter in 0..cfg.max_newton {
        if res <= cfg.newton_tol {
            return Ok(phi);
        }
        let lin = linearize(&phi, k)?;
        let rhs = rfield.scale(-1.0);
        let (step, krylov_iters) = krylov_solve(&lin, &rhs, cfg)?;

        let mut s = 1.0;
        let mut accepted = None;
        for _bt in 0..=cfg.max_backtracks {
            let cand = phi.add_scaled(&step, s).project_zero_mean();
            let (cand_op, cand_margin) = op_and_margin(&cand, k);
            if cand_margin >= cfg.cone_margin_min {
                let (cand_rfield, _) = log_residual(&cand_op, &log_f);
                let cand_res = cand_rfield.sup_norm();
                if cand_res <= res * (1.0 - ARMIJO * s) {
                    accepted = Some((cand, cand_rfield, cand_margin, cand_res, s));
                    break;
                }
            }
            s *= cfg.damping;
        }
        let Some((cand, cand_rfield, cand_margin, cand_res, step_len)) = accepted else {
            return Err(Error::StepFailure {
                residual: res,
                trace: Box::new(trace.clone()),
            });
        };
        phi = cand;
        rfield = cand_rfield;
        res = cand_res;
        trace.records.push(TraceRecord {
            t,
            residual_sup: res,
            cone_margin: cand_margin,
            step_len,
            krylov_iters,
            report: monitors(&phi, f, k)?,
        });
    }
    if res <= cfg.newton_tol {
        return Ok(phi);
    }
    Err(Error::NonConvergence {
        residual: res,
        trace: Box::new(trace.clone()),
    })
}

/// Newton from an explicit admissible initial guess.
pub fn newton_solve(
    f: &Field,
    k: usize,
    phi0: &Field,
    cfg: &SolveConfig,
) -> Result<(Field, SolveTrace)> {
    cfg.validate()?;
    validate_rhs(f)?;
    if cone_margin(phi0, k) < cfg.cone_margin_min {
        return Err(Error::Validation(
            "initial guess violates the cone margin precondition".into(),
        ));
    }
    let mut trace = SolveTrace::default();
    let phi = newton_stage(f, k, phi0.clone(), cfg, 1.0, &mut trace)?;
    Ok((phi, trace))
}

/// Trace f_t = (1-t) + t f from the trivial problem at t = 0 to the target
/// at t = 1, warm-starting every stage; the t-step halves on failure and
/// grows by 1.5x on success.
pub fn continuity_solve(f: &Field, k: usize, cfg: &SolveConfig) -> Result<(Field, SolveTrace)> {
    cfg.validate()?;
    validate_rhs(f)?;
    let grid = f.grid;
    let mut phi = Field::zeros(grid);
    let mut trace = SolveTrace::default();
    let mut t = 0.0;
    let mut dt = 1.0 / cfg.continuation_steps as f64;
    while t < 1.0 {
        let t_try = (t + dt).min(1.0);
        // convex combination keeps mean 1 and positivity automatically
        let f_t = Field {
            grid,
            data: f.data.iter().map(|&v| (1.0 - t_try) + t_try * v).collect(),
        };
        let mut stage_trace = SolveTrace::default();
        match newton_stage(&f_t, k, phi.clone(), cfg, t_try, &mut stage_trace) {
            Ok(sol) => {
                phi = sol;
                trace.records.extend(stage_trace.records);
                t = t_try;
                dt *= 1.5;
            }
            Err(
                Error::StepFailure { .. }
                | Error::NonConvergence { .. }
                | Error::LinearSolve { .. },
            ) => {
                dt *= 0.5;
                if dt < CONTINUATION_DT_MIN {
                    return Err(Error::ContinuationFailure {
                        t,
                        trace: Box::new(trace),
                    });
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok((phi, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplace_inverse, TorusGrid};
    use crate::mms;
    use std::f64::consts::TAU;

    fn tight() -> SolveConfig {
        SolveConfig {
            newton_tol: 1e-11,
            krylov_tol: 1e-12,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn trivial_rhs_zero_iterations() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let f = Field::constant(grid, 1.0);
        let (phi, trace) = newton_solve(&f, 2, &Field::zeros(grid), &SolveConfig::default()).unwrap();
        assert_eq!(trace.records.len(), 0);
        assert!(phi.sup_norm() == 0.0);
    }

    #[test]
    fn rhs_validation() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let mut f = Field::constant(grid, 1.0);
        f.data[5] = -0.1;
        f.data[6] = 2.1; // restore the mean
        match newton_solve(&f, 2, &Field::zeros(grid), &SolveConfig::default()) {
            Err(Error::Positivity { point }) => assert_eq!(point, 5),
            other => panic!("unexpected {other:?}"),
        }

        let g = Field::constant(grid, 1.01);
        assert!(matches!(
            newton_solve(&g, 2, &Field::zeros(grid), &SolveConfig::default()),
            Err(Error::Compatibility(_))
        ));
    }

    #[test]
    fn krylov_constant_coefficient_reduces_to_poisson() {
        let grid = TorusGrid::new(2, 16).unwrap();
        for k in 1..=2 {
            let lin = linearize(&Field::zeros(grid), k).unwrap();
            let rhs = Field::from_fn(grid, |x| (TAU * x[0]).cos() + 0.5 * (TAU * 2.0 * x[3]).sin());
            let (psi, _) = krylov_solve(&lin, &rhs, &tight()).unwrap();
            let want = laplace_inverse(&rhs)
                .unwrap()
                .scale(grid.n as f64 / k as f64);
            assert!(
                psi.sub(&want).sup_norm() <= 1e-10 * want.sup_norm(),
                "k={k}"
            );
        }
    }

    #[test]
    fn krylov_recovers_known_solution() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let k = 2;
        let (phi, _, margin) = mms::generate(grid, k, 0.01, 4).unwrap();
        assert!(margin >= 0.8, "margin {margin}");
        let lin = linearize(&phi, k).unwrap();
        let psi_known = Field::from_fn(grid, |x| {
            0.3 * (TAU * x[0]).cos() + 0.2 * (TAU * (x[1] + x[2])).cos()
        })
        .project_zero_mean();
        let rhs = apply_lin(&lin, &psi_known).project_zero_mean();
        let (psi, iters) = krylov_solve(&lin, &rhs, &tight()).unwrap();
        assert!(
            psi.sub(&psi_known).sup_norm() <= 1e-8 * psi_known.sup_norm(),
            "err {}",
            psi.sub(&psi_known).sup_norm()
        );
        assert!(iters <= 30, "krylov took {iters} iterations");
    }

    #[test]
    fn newton_k1_matches_spectral_poisson() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let f = Field::from_fn(grid, |x| 0.05 * (TAU * x[0]).cos() + 0.03 * (TAU * x[2]).sin())
            .project_zero_mean()
            .add_scaled(&Field::constant(grid, 1.0), 1.0);
        let (phi, _) = newton_solve(&f, 1, &Field::zeros(grid), &tight()).unwrap();
        // k = 1: S_1 = f is the Poisson problem quarter-lap phi = n (f - 1)
        let want = laplace_inverse(&f.add_scaled(&Field::constant(grid, 1.0), -1.0))
            .unwrap()
            .scale(grid.n as f64)
            .project_zero_mean();
        assert!(
            phi.sub(&want).sup_norm() <= 1e-10,
            "err {}",
            phi.sub(&want).sup_norm()
        );
    }

    #[test]
    fn newton_recovers_mms() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let k = 2;
        let (phi_star, f, margin) = mms::generate(grid, k, 0.02, 13).unwrap();
        assert!(margin >= 0.5);
        let (phi, trace) = newton_solve(&f, k, &Field::zeros(grid), &SolveConfig::default()).unwrap();
        let err = phi.sub(&phi_star.project_zero_mean()).sup_norm();
        assert!(err <= 1e-8, "err {err}");
        // monotone residual across accepted steps
        for w in trace.records.windows(2) {
            assert!(w[1].residual_sup <= w[0].residual_sup);
        }
        // cone preservation
        for r in &trace.records {
            assert!(r.cone_margin >= SolveConfig::default().cone_margin_min);
        }
    }

    #[test]
    fn continuity_recovers_mms_and_is_config_independent() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let k = 2;
        let (phi_star, f, _) = mms::generate(grid, k, 0.02, 17).unwrap();
        let (phi_a, trace) = continuity_solve(&f, k, &SolveConfig::default()).unwrap();
        let err = phi_a.sub(&phi_star.project_zero_mean()).sup_norm();
        assert!(err <= 1e-8, "err {err}");
        let stages: Vec<f64> = {
            let mut ts: Vec<f64> = trace.records.iter().map(|r| r.t).collect();
            ts.dedup();
            ts
        };
        assert!(stages.len() <= 4, "stages {stages:?}");

        let alt = SolveConfig {
            damping: 0.25,
            continuation_steps: 8,
            ..SolveConfig::default()
        };
        let (phi_b, _) = continuity_solve(&f, k, &alt).unwrap();
        assert!(phi_a.sub(&phi_b).sup_norm() <= 1e-6);
    }

    #[test]
    fn continuity_trivial_rhs() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let f = Field::constant(grid, 1.0);
        let (phi, _) = continuity_solve(&f, 2, &SolveConfig::default()).unwrap();
        assert!(phi.sup_norm() == 0.0);
    }

    #[test]
    fn uniqueness_from_distinct_starts() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let k = 2;
        let (_, f, _) = mms::generate(grid, k, 0.02, 23).unwrap();
        let (phi_a, _) = newton_solve(&f, k, &Field::zeros(grid), &SolveConfig::default()).unwrap();
        let (other_start, _, m) = mms::generate(grid, k, 0.015, 24).unwrap();
        assert!(m > 0.5);
        let (phi_b, _) = newton_solve(&f, k, &other_start, &SolveConfig::default()).unwrap();
        assert!(phi_a.sub(&phi_b).sup_norm() <= 1e-6);
    }
}
