//! Small dense linear-algebra and polynomial helpers.
//!
//! Polynomials are stored as coefficient vectors in ascending order of degree.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Characteristic polynomial `det(λI − A)` by the Faddeev–LeVerrier recursion.
///
/// Adequate for the small matrices (m ≲ 10) used for phase-type laws.
pub fn charpoly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "charpoly needs a square matrix");
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let identity = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &identity * coeffs[n - k + 1];
        let am = a * &m;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `a + scale·b`
pub fn poly_axpy(a: &[f64], scale: f64, b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + scale * b.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// All complex roots of a real polynomial, as eigenvalues of its companion matrix.
///
/// Leading coefficients whose magnitude is below `1e-14` times the largest
/// coefficient are dropped before forming the companion matrix.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -coeffs[i] / lead;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// Solve `(θI − A) w = rhs` for complex θ. Returns `None` if singular.
pub fn shifted_solve(a: &DMatrix<f64>, theta: Complex64, rhs: &[f64]) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(-a[(i, j)], 0.0);
        }
        m[(i, i)] += theta;
    }
    let b = nalgebra::DVector::from_iterator(n, rhs.iter().map(|&x| Complex64::new(x, 0.0)));
    let lu = m.lu();
    lu.solve(&b).map(|v| v.iter().copied().collect())
}

/// Solve `(θI − A) w = rhs` for real θ.
pub fn shifted_solve_real(a: &DMatrix<f64>, theta: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let m = DMatrix::<f64>::identity(n, n) * theta - a;
    let b = nalgebra::DVector::from_column_slice(rhs);
    m.lu().solve(&b).map(|v| v.iter().copied().collect())
}
