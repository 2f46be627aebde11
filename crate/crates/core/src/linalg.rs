//! Dense complex linear-algebra helpers shared by the scale and frame modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Diagonal matrix with real entries.
pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v)),
    ))
}

/// Multiplies row `j` of `m` by `factors[j]`.
pub fn scale_rows(m: &CMatrix, factors: &[f64]) -> CMatrix {
    debug_assert_eq!(m.nrows(), factors.len());
    let mut out = m.clone();
    for (j, &f) in factors.iter().enumerate() {
        out.row_mut(j).scale_mut(f);
    }
    out
}

/// Multiplies column `k` of `m` by `factors[k]`.
pub fn scale_cols(m: &CMatrix, factors: &[f64]) -> CMatrix {
    debug_assert_eq!(m.ncols(), factors.len());
    let mut out = m.clone();
    for (k, &f) in factors.iter().enumerate() {
        out.column_mut(k).scale_mut(f);
    }
    out
}

pub fn scale_entries(v: &CVector, factors: &[f64]) -> CVector {
    debug_assert_eq!(v.len(), factors.len());
    CVector::from_iterator(v.len(), v.iter().zip(factors).map(|(x, &f)| x * f))
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, zero when both sides vanish.
pub fn relative_residual(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

pub fn relative_vector_residual(a: &CVector, b: &CVector) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Rank-revealing tolerance `ε · σ_max · max(rows, cols)`.
pub fn rank_tolerance(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    f64::EPSILON * sigma_max * rows.max(cols) as f64
}

pub fn numerical_rank(singular: &[f64], tolerance: f64) -> usize {
    singular.iter().filter(|&&s| s > tolerance).count()
}

/// Pseudo-inverse of a Hermitian matrix, dropping eigenvalues below
/// `cutoff · λ_max`. Returns the inverse and the number of retained eigenvalues.
pub fn hermitian_pinv(h: &CMatrix, cutoff: f64) -> (CMatrix, usize) {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let threshold = cutoff * lambda_max;
    let mut inverse = CMatrix::zeros(n, n);
    let mut kept = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > threshold && lambda > 0.0 {
            let v = eig.eigenvectors.column(i);
            inverse += (v * v.adjoint()) * c(1.0 / lambda);
            kept += 1;
        }
    }
    (inverse, kept)
}

/// Complex vector with independent standard-normal real and imaginary parts.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Column-major complex Gaussian matrix.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for k in 0..cols {
        for j in 0..rows {
            m[(j, k)] = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    m
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [8.0_f64, 16.0, 32.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [8.0_f64, 16.0, 32.0]
            .iter()
            .map(|x| (1.0 / x).ln())
            .collect();
        assert!((fit_slope(&xs, &ys) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_of_singular_hermitian() {
        let h = real_diag(&[2.0, 0.0]);
        let (inv, kept) = hermitian_pinv(&h, 1e-12);
        assert_eq!(kept, 1);
        assert!((inv[(0, 0)].re - 0.5).abs() < 1e-15);
        assert_eq!(inv[(1, 1)].norm(), 0.0);
    }

    #[test]
    fn residual_of_zero_matrices_is_zero() {
        let z = CMatrix::zeros(2, 2);
        assert_eq!(relative_residual(&z, &z), 0.0);
    }
}
