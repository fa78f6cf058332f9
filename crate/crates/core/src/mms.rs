//! Manufactured-solution generator: a random low-mode trigonometric
//! potential phi*, the right-hand side f = S_k(I + Phi*), and the achieved
//! cone margin.  Fully determined by the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{complex_hessian, Field, TorusGrid};
use crate::herm::jacobi_eig;
use crate::operator::{apply_op, cone_margin};
use crate::symfunc::gaussian;
use num_complex::Complex64;

const NUM_MODES: usize = 6;
const MAX_MODE: i64 = 2;

/// Generate (phi*, f, margin).  phi* is mean-zero, scaled so the largest
/// Hessian eigenvalue magnitude over the grid equals amp * pi^2 -- the same
/// calibration as the single mode a cos(2 pi x_1), whose cone margin is
/// exactly 1 - a pi^2.  High modes are damped so the spectrum stays smooth.
pub fn generate(grid: TorusGrid, k: usize, amp: f64, seed: u64) -> Result<(Field, Field, f64)> {
    if !(amp >= 0.0 && amp.is_finite()) {
        return Err(Error::Parameter(format!("amplitude {amp} must be finite and >= 0")));
    }
    if k < 1 || k > grid.n {
        return Err(Error::Parameter(format!("k = {k} out of range 1..={}", grid.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = grid.axes();
    let mut modes: Vec<(Vec<i64>, f64, f64)> = Vec::with_capacity(NUM_MODES);
    while modes.len() < NUM_MODES {
        let m: Vec<i64> = (0..axes)
            .map(|_| (rng.random::<u32>() % (2 * MAX_MODE as u32 + 1)) as i64 - MAX_MODE)
            .collect();
        let m2: i64 = m.iter().map(|v| v * v).sum();
        if m2 == 0 {
            continue;
        }
        // damp high modes so the Hessian stays comparable to the amplitude
        let coeff = gaussian(&mut rng) / (1.0 + m2 as f64).powi(2);
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        modes.push((m, coeff, phase));
    }

    let raw = Field::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(m, c, th)| {
                let dot: f64 = m.iter().zip(x).map(|(&mi, &xi)| mi as f64 * xi).sum();
                c * (std::f64::consts::TAU * dot + th).cos()
            })
            .sum()
    });
    // sup over points of the Hessian spectral radius fixes the scale
    let hess = complex_hessian(&raw);
    let n = grid.n;
    let mut mat = vec![Complex64::ZERO; n * n];
    let mut evals = vec![0.0; n];
    let mut radius = 0.0_f64;
    for p in 0..grid.points() {
        hess.write_shifted_into(p, 0.0, &mut mat);
        jacobi_eig(&mut mat, n, None, &mut evals);
        for &v in &evals {
            radius = radius.max(v.abs());
        }
    }
    let phi = if amp == 0.0 || radius == 0.0 {
        Field::zeros(grid)
    } else {
        raw.scale(amp * std::f64::consts::PI.powi(2) / radius)
    };
    let f = apply_op(&phi, k);
    let margin = cone_margin(&phi, k);
    Ok((phi, f, margin))
}
