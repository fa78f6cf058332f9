//! Periodic scalar fields on the flat torus C^n / (Z^n + i Z^n), spectral
//! differentiation producing the complex Hessian, gradients, means, and the
//! constant-coefficient Laplacian inverse.
//!
//! Axis order is (x_1, y_1, ..., x_n, y_n), row-major, spacing h = 1/N.
//! The background form is omega = i sum dz^a wedge dzbar^a; all constants
//! are stated in that gauge.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::herm::HermMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    /// Complex dimension.
    pub n: usize,
    /// Samples per real axis; a power of two, at least 4.
    pub size: usize,
}

impl TorusGrid {
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("complex dimension must be positive".into()));
        }
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "N = {size} must be a power of two, at least 4"
            )));
        }
        let axes = 2 * n;
        if (size as f64).powi(axes as i32) > 1e9 {
            return Err(Error::Parameter("grid too large".into()));
        }
        Ok(TorusGrid { n, size })
    }

    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn points(&self) -> usize {
        self.size.pow(self.axes() as u32)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    /// Decode a flat row-major index into per-axis coordinates.
    pub fn coords(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.axes()).rev() {
            out[a] = idx % self.size;
            idx /= self.size;
        }
    }
}

/// Real scalar samples on a torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: TorusGrid,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: TorusGrid) -> Self {
        Field {
            grid,
            data: vec![0.0; grid.points()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Field {
            grid,
            data: vec![c; grid.points()],
        }
    }

    /// Sample a closure of the physical coordinates x in [0,1)^{2n}.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(grid: TorusGrid, mut f: F) -> Self {
        let axes = grid.axes();
        let h = grid.spacing();
        let mut c = vec![0usize; axes];
        let mut x = vec![0.0; axes];
        let data = (0..grid.points())
            .map(|idx| {
                grid.coords(idx, &mut c);
                for a in 0..axes {
                    x[a] = c[a] as f64 * h;
                }
                f(&x)
            })
            .collect();
        Field { grid, data }
    }

    /// Uniform (= trapezoidal, on the torus) average, Kahan-compensated so
    /// the compatibility check stays meaningful on large grids.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &v in &self.data {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum / self.data.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// self + s * other
    pub fn add_scaled(&self, other: &Field, s: f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Field {
            grid: self.grid,
            data,
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.add_scaled(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Subtract the mean; the solver gauge.
    pub fn project_zero_mean(&self) -> Field {
        let m = self.mean();
        Field {
            grid: self.grid,
            data: self.data.iter().map(|v| v - m).collect(),
        }
    }
}

/// Pointwise Hermitian n x n matrix field; Hermitian symmetry is exact by
/// the storage layout (real diagonals plus the strict upper triangle).
#[derive(Debug, Clone)]
pub struct HermField {
    pub grid: TorusGrid,
    pub n: usize,
    diag: Vec<f64>,
    upper: Vec<Complex64>,
}

impl HermField {
    pub fn zeros(grid: TorusGrid) -> Self {
        let n = grid.n;
        let nu = n * (n - 1) / 2;
        HermField {
            grid,
            n,
            diag: vec![0.0; grid.points() * n],
            upper: vec![Complex64::ZERO; grid.points() * nu],
        }
    }

    fn upper_index(n: usize, a: usize, b: usize) -> usize {
        debug_assert!(a < b);
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn diag_at(&self, p: usize) -> &[f64] {
        &self.diag[p * self.n..(p + 1) * self.n]
    }

    pub fn upper_at(&self, p: usize) -> &[Complex64] {
        let nu = self.n * (self.n - 1) / 2;
        &self.upper[p * nu..(p + 1) * nu]
    }

    /// Write shift * I + M(p) into `buf` as a full row-major n x n matrix.
    pub fn write_shifted_into(&self, p: usize, shift: f64, buf: &mut [Complex64]) {
        let n = self.n;
        let d = self.diag_at(p);
        let u = self.upper_at(p);
        for i in 0..n {
            buf[i * n + i] = Complex64::new(d[i] + shift, 0.0);
            for j in i + 1..n {
                let z = u[Self::upper_index(n, i, j)];
                buf[i * n + j] = z;
                buf[j * n + i] = z.conj();
            }
        }
    }

    /// Overwrite point `p` from a full row-major n x n matrix buffer;
    /// the lower triangle is ignored.
    pub fn set_from_full(&mut self, p: usize, buf: &[Complex64]) {
        let n = self.n;
        let nu = n * (n - 1) / 2;
        for i in 0..n {
            self.diag[p * n + i] = buf[i * n + i].re;
            for j in i + 1..n {
                self.upper[p * nu + Self::upper_index(n, i, j)] = buf[i * n + j];
            }
        }
    }

    pub fn mat_at(&self, p: usize) -> HermMat {
        HermMat::from_upper(self.n, self.diag_at(p), self.upper_at(p))
    }

    /// Trace field sum_a M_{a abar}(x).
    pub fn trace_field(&self) -> Field {
        let data = (0..self.grid.points())
            .map(|p| self.diag_at(p).iter().sum::<f64>())
            .collect();
        Field {
            grid: self.grid,
            data,
        }
    }
}

/// Per-axis integer frequency: index i maps to i for i <= N/2, i - N above.
fn freq_table(size: usize) -> Vec<i64> {
    (0..size)
        .map(|i| {
            if i <= size / 2 {
                i as i64
            } else {
                i as i64 - size as i64
            }
        })
        .collect()
}

/// Frequency for odd (first-derivative) symbols: the Nyquist mode is zeroed
/// to keep derivatives of real fields real.
fn freq_table_odd(size: usize) -> Vec<i64> {
    let mut t = freq_table(size);
    t[size / 2] = 0;
    t
}

/// Transform along every axis of the 2n-dimensional array.
fn fft_all_axes(grid: &TorusGrid, data: &mut [Complex64], fft: &Fft, inverse: bool) {
    let size = grid.size;
    let axes = grid.axes();
    let points = grid.points();
    let mut line = vec![Complex64::ZERO; size];
    for a in 0..axes {
        let stride = size.pow((axes - 1 - a) as u32);
        let block = stride * size;
        for chunk in (0..points).step_by(block) {
            for off in 0..stride {
                let base = chunk + off;
                for j in 0..size {
                    line[j] = data[base + j * stride];
                }
                if inverse {
                    fft.inverse(&mut line);
                } else {
                    fft.forward(&mut line);
                }
                for j in 0..size {
                    data[base + j * stride] = line[j];
                }
            }
        }
    }
}

/// Forward multidimensional transform of a real field.
pub fn to_freq(field: &Field) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = field
        .data
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let fft = Fft::new(field.grid.size);
    fft_all_axes(&field.grid, &mut buf, &fft, false);
    buf
}

/// Inverse transform, real part.
pub fn from_freq_real(grid: TorusGrid, mut coeffs: Vec<Complex64>) -> Field {
    let fft = Fft::new(grid.size);
    fft_all_axes(&grid, &mut coeffs, &fft, true);
    Field {
        grid,
        data: coeffs.iter().map(|z| z.re).collect(),
    }
}

/// Inverse transform keeping the full complex samples.
pub fn from_freq_complex(grid: TorusGrid, mut coeffs: Vec<Complex64>) -> Vec<Complex64> {
    let fft = Fft::new(grid.size);
    fft_all_axes(&grid, &mut coeffs, &fft, true);
    coeffs
}

/// forward then inverse; identity up to roundoff.
pub fn fft_roundtrip(field: &Field) -> Field {
    from_freq_real(field.grid, to_freq(field))
}

/// Complex Hessian phi_{a bbar} of a real potential, computed spectrally:
/// 1/4 [ (d_xa d_xb + d_ya d_yb) + i (d_xa d_yb - d_ya d_xb) ] phi.
pub fn complex_hessian(phi: &Field) -> HermField {
    let grid = phi.grid;
    let n = grid.n;
    let axes = grid.axes();
    let points = grid.points();
    let phi_hat = to_freq(phi);
    let even = freq_table(grid.size);
    let odd = freq_table_odd(grid.size);
    let two_pi = std::f64::consts::TAU;

    let mut out = HermField::zeros(grid);
    let nu = n * (n - 1) / 2;
    let mut coords = vec![0usize; axes];
    let mut coeffs = vec![Complex64::ZERO; points];

    for alpha in 0..n {
        for beta in alpha..n {
            for (idx, c) in coeffs.iter_mut().enumerate() {
                grid.coords(idx, &mut coords);
                let sym = if alpha == beta {
                    let mx = even[coords[2 * alpha]] as f64;
                    let my = even[coords[2 * alpha + 1]] as f64;
                    Complex64::new(-0.25 * two_pi * two_pi * (mx * mx + my * my), 0.0)
                } else {
                    let mxa = odd[coords[2 * alpha]] as f64;
                    let mya = odd[coords[2 * alpha + 1]] as f64;
                    let mxb = odd[coords[2 * beta]] as f64;
                    let myb = odd[coords[2 * beta + 1]] as f64;
                    let re = -(mxa * mxb + mya * myb);
                    let im = -(mxa * myb - mya * mxb);
                    Complex64::new(re, im) * (0.25 * two_pi * two_pi)
                };
                *c = phi_hat[idx] * sym;
            }
            let values = from_freq_complex(grid, coeffs.clone());
            if alpha == beta {
                for (p, z) in values.iter().enumerate() {
                    out.diag[p * n + alpha] = z.re;
                }
            } else {
                let u = HermField::upper_index(n, alpha, beta);
                for (p, z) in values.iter().enumerate() {
                    out.upper[p * nu + u] = *z;
                }
            }
        }
    }
    out
}

/// Holomorphic gradient components phi_{,gamma} = 1/2 (d_x - i d_y) phi,
/// one complex sample array per gamma.
pub fn grad_holo(phi: &Field) -> Vec<Vec<Complex64>> {
    let grid = phi.grid;
    let axes = grid.axes();
    let points = grid.points();
    let phi_hat = to_freq(phi);
    let odd = freq_table_odd(grid.size);
    let two_pi = std::f64::consts::TAU;
    let mut coords = vec![0usize; axes];
    let mut out = Vec::with_capacity(grid.n);
    let mut coeffs = vec![Complex64::ZERO; points];
    for gamma in 0..grid.n {
        for (idx, c) in coeffs.iter_mut().enumerate() {
            grid.coords(idx, &mut coords);
            let mx = odd[coords[2 * gamma]] as f64;
            let my = odd[coords[2 * gamma + 1]] as f64;
            // 1/2 (i 2pi mx + 2pi my)
            let sym = Complex64::new(0.5 * two_pi * my, 0.5 * two_pi * mx);
            *c = phi_hat[idx] * sym;
        }
        out.push(from_freq_complex(grid, coeffs.clone()));
    }
    out
}

/// B = |grad phi|^2_omega = sum_gamma |phi_{,gamma}|^2.
pub fn grad_sq(phi: &Field) -> Field {
    let grads = grad_holo(phi);
    let mut data = vec![0.0; phi.grid.points()];
    for g in &grads {
        for (d, z) in data.iter_mut().zip(g) {
            *d += z.norm_sqr();
        }
    }
    Field {
        grid: phi.grid,
        data,
    }
}

/// Solve sum_a psi_{a abar} = rhs with mean(psi) = 0; the Fourier symbol is
/// -1/4 (2 pi)^2 |m|^2.  Requires mean-zero data.
pub fn laplace_inverse(rhs: &Field) -> Result<Field> {
    let m = rhs.mean();
    if m.abs() > 1e-8 * rhs.sup_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Compatibility(format!(
            "laplace_inverse needs mean-zero data, got mean {m:.3e}"
        )));
    }
    let grid = rhs.grid;
    let axes = grid.axes();
    let even = freq_table(grid.size);
    let two_pi = std::f64::consts::TAU;
    let mut coeffs = to_freq(rhs);
    let mut coords = vec![0usize; axes];
    for (idx, c) in coeffs.iter_mut().enumerate() {
        grid.coords(idx, &mut coords);
        let m2: f64 = coords.iter().map(|&i| (even[i] * even[i]) as f64).sum();
        if m2 == 0.0 {
            *c = Complex64::ZERO;
        } else {
            *c /= -0.25 * two_pi * two_pi * m2;
        }
    }
    Ok(from_freq_real(grid, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn rel_err(a: &Field, b: &Field) -> f64 {
        a.sub(b).sup_norm() / b.sup_norm().max(1e-300)
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(2, 16).is_ok());
        assert!(TorusGrid::new(2, 12).is_err());
        assert!(TorusGrid::new(2, 2).is_err());
        assert!(TorusGrid::new(0, 8).is_err());
    }

    #[test]
    fn roundtrip_cases() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let c = Field::constant(grid, 3.25);
        assert!(rel_err(&fft_roundtrip(&c), &c) < 1e-13);

        let mode = Field::from_fn(grid, |x| (TAU * x[0]).cos());
        assert!(fft_roundtrip(&mode).sub(&mode).sup_norm() < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Field::from_fn(grid, |_| rng.random::<f64>() - 0.5);
        assert!(fft_roundtrip(&r).sub(&r).sup_norm() <= 1e-12 * r.sup_norm());
    }

    #[test]
    fn hessian_single_mode() {
        // phi = a cos(2 pi x_1): phi_{1 1bar} = -a pi^2 cos(2 pi x_1)
        let grid = TorusGrid::new(2, 16).unwrap();
        let a = 0.7;
        let phi = Field::from_fn(grid, |x| a * (TAU * x[0]).cos());
        let h = complex_hessian(&phi);
        let want = Field::from_fn(grid, |x| -a * PI * PI * (TAU * x[0]).cos());
        for p in 0..grid.points() {
            let d = h.diag_at(p);
            assert!((d[0] - want.data[p]).abs() < 1e-11);
            assert!(d[1].abs() < 1e-11);
            for z in h.upper_at(p) {
                assert!(z.norm() < 1e-11);
            }
        }
    }

    #[test]
    fn hessian_constant_is_zero() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let h = complex_hessian(&Field::constant(grid, 2.0));
        for p in 0..grid.points() {
            assert!(h.diag_at(p).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn hessian_mixed_mode_matches_symbols_and_finite_differences() {
        // phi = a cos(2 pi (x_1 + y_2)), n = 2
        let grid = TorusGrid::new(2, 16).unwrap();
        let a = 0.5;
        let phi = Field::from_fn(grid, |x| a * (TAU * (x[0] + x[3])).cos());
        let h = complex_hessian(&phi);
        let cosf = Field::from_fn(grid, |x| (TAU * (x[0] + x[3])).cos());
        for p in 0..grid.points() {
            let d = h.diag_at(p);
            let want = -a * PI * PI * cosf.data[p];
            assert!((d[0] - want).abs() < 1e-10);
            assert!((d[1] - want).abs() < 1e-10);
            let z = h.upper_at(p)[0];
            // phi_{1 2bar} = -i a pi^2 cos(.)
            assert!((z - Complex64::new(0.0, -a * PI * PI * cosf.data[p])).norm() < 1e-10);
        }

        // 4th-order centered finite differences as an independent oracle
        let n4 = grid.size;
        let hh = grid.spacing();
        let sample = |c: &[i64]| -> f64 {
            let x: Vec<f64> = c
                .iter()
                .map(|&i| (i.rem_euclid(n4 as i64)) as f64 * hh)
                .collect();
            a * (TAU * (x[0] + x[3])).cos()
        };
        let d2 = |axis_a: usize, axis_b: usize, base: &[i64]| -> f64 {
            // fourth-order first-derivative stencil applied twice
            let d1 = |axis: usize, at: &[i64]| -> f64 {
                let mut m = at.to_vec();
                let mut val = 0.0;
                for (off, w) in [(-2i64, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)] {
                    m[axis] = at[axis] + off;
                    val += w * sample(&m);
                }
                val / hh
            };
            let mut m = base.to_vec();
            let mut val = 0.0;
            for (off, w) in [(-2i64, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)] {
                m[axis_a] = base[axis_a] + off;
                val += w * d1(axis_b, &m);
            }
            val / hh
        };
        let mut coords = vec![0usize; 4];
        for p in (0..grid.points()).step_by(97) {
            grid.coords(p, &mut coords);
            let base: Vec<i64> = coords.iter().map(|&c| c as i64).collect();
            let fd = 0.25
                * Complex64::new(
                    d2(0, 2, &base) + d2(1, 3, &base),
                    d2(0, 3, &base) - d2(1, 2, &base),
                );
            let z = h.upper_at(p)[0];
            assert!((z - fd).norm() < 5e-2 * a, "p={p}: {z} vs {fd}");
        }
    }

    #[test]
    fn hessian_trace_is_quarter_laplacian() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let phi = Field::from_fn(grid, |x| {
            (TAU * x[0]).cos() * (TAU * x[3]).sin() + 0.3 * (TAU * 2.0 * x[1]).cos()
        });
        let tr = complex_hessian(&phi).trace_field();
        // quarter Laplacian, spectral
        let lap = {
            let grid2 = grid;
            let even = freq_table(grid2.size);
            let mut coeffs = to_freq(&phi);
            let mut coords = vec![0usize; grid2.axes()];
            for (idx, c) in coeffs.iter_mut().enumerate() {
                grid2.coords(idx, &mut coords);
                let m2: f64 = coords.iter().map(|&i| (even[i] * even[i]) as f64).sum();
                *c *= -0.25 * TAU * TAU * m2;
            }
            from_freq_real(grid2, coeffs)
        };
        assert!(tr.sub(&lap).sup_norm() <= 1e-10 * lap.sup_norm());
        // integration by parts: trace integrates to zero
        assert!(tr.mean().abs() <= 1e-12 * phi.sup_norm());
    }

    #[test]
    fn grad_sq_cases() {
        let grid = TorusGrid::new(2, 16).unwrap();
        assert!(grad_sq(&Field::constant(grid, 5.0)).sup_norm() < 1e-12);

        let a = 1.3;
        let phi = Field::from_fn(grid, |x| a * (TAU * x[0]).cos());
        let b = grad_sq(&phi);
        let want = Field::from_fn(grid, |x| {
            let s = (TAU * x[0]).sin();
            a * a * PI * PI * s * s
        });
        assert!(b.sub(&want).sup_norm() < 1e-10);

        // Parseval check on the mean of B
        let grads = grad_holo(&phi);
        let phi_hat = to_freq(&phi);
        let odd = freq_table_odd(grid.size);
        let mut coords = vec![0usize; grid.axes()];
        let mut parseval = 0.0;
        for (idx, c) in phi_hat.iter().enumerate() {
            grid.coords(idx, &mut coords);
            for gamma in 0..grid.n {
                let mx = odd[coords[2 * gamma]] as f64;
                let my = odd[coords[2 * gamma + 1]] as f64;
                let sym = Complex64::new(0.5 * TAU * my, 0.5 * TAU * mx);
                parseval += (c * sym).norm_sqr();
            }
        }
        parseval /= (grid.points() * grid.points()) as f64;
        let physical = b.mean();
        assert!((physical - parseval).abs() <= 1e-10 * physical.abs());
        let _ = grads;
    }

    #[test]
    fn laplace_inverse_cases() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let f = Field::from_fn(grid, |x| (TAU * x[0]).cos());
        let psi = laplace_inverse(&f).unwrap();
        let want = Field::from_fn(grid, |x| -(TAU * x[0]).cos() / (PI * PI));
        assert!(psi.sub(&want).sup_norm() < 1e-12);

        assert!(laplace_inverse(&Field::zeros(grid)).unwrap().sup_norm() == 0.0);

        // forward-then-inverse on random mean-zero data
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = Field::from_fn(grid, |_| rng.random::<f64>() - 0.5).project_zero_mean();
        let psi = laplace_inverse(&r).unwrap();
        let fwd = complex_hessian(&psi).trace_field();
        // the Nyquist column of r is untouched by inverse-then-forward only if
        // symbols match; they do (both even), so the roundtrip is exact
        assert!(fwd.sub(&r).sup_norm() <= 1e-10 * r.sup_norm());

        let bad = Field::constant(grid, 1.0);
        assert!(matches!(laplace_inverse(&bad), Err(Error::Compatibility(_))));
    }

    #[test]
    fn differentiation_exact_on_resolved_modes() {
        let grid = TorusGrid::new(1, 16).unwrap();
        for m in 1..8i32 {
            let phi = Field::from_fn(grid, |x| (TAU * m as f64 * x[0]).cos());
            let h = complex_hessian(&phi);
            let want = Field::from_fn(grid, |x| {
                -(PI * m as f64) * (PI * m as f64) * (TAU * m as f64 * x[0]).cos()
            });
            let mut worst = 0.0_f64;
            for p in 0..grid.points() {
                worst = worst.max((h.diag_at(p)[0] - want.data[p]).abs());
            }
            assert!(worst <= 1e-11 * want.sup_norm(), "mode {m}: {worst}");
        }
    }
}
