//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// (M + Mᴴ)/2
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermiticity_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// The input is symmetrized first, so only its Hermitian part matters.
pub fn hermitian_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// V · diag(f(λ)) · Vᴴ
pub fn spectral_function(vals: &DVector<f64>, vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let mut scaled = vecs.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= c(f(vals[k]));
    }
    &scaled * vecs.adjoint()
}

pub fn diag_real(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|&v| c(v))))
}

/// Eigenvalues of a general complex square matrix (Schur form).
pub fn general_eigenvalues(m: &CMat) -> Option<CVec> {
    if m.nrows() == 1 {
        return Some(CVec::from_element(1, m[(0, 0)]));
    }
    m.eigenvalues()
}

/// aᴴ b
pub fn dotc(a: &CVec, b: &CVec) -> C64 {
    a.dotc(b)
}

/// Lᴴ·diag(w)·R through real products, skipping the imaginary parts when
/// both operands are real.
pub fn weighted_adjoint_product(left: &CMat, weights: &[f64], right: &CMat) -> CMat {
    let split = |m: &CMat, f: fn(&C64) -> f64| m.map(|z| f(&z));
    let (lr, li) = (split(left, |z| z.re), split(left, |z| z.im));
    let (rr, ri) = (split(right, |z| z.re), split(right, |z| z.im));
    let mut wr = rr.clone();
    let mut wi = ri.clone();
    for (row, &w) in weights.iter().enumerate() {
        wr.row_mut(row).scale_mut(w);
        wi.row_mut(row).scale_mut(w);
    }
    let left_real = li.iter().all(|&x| x == 0.0);
    let right_real = ri.iter().all(|&x| x == 0.0);
    let mut re = lr.tr_mul(&wr);
    let mut im = DMatrix::zeros(left.ncols(), right.ncols());
    if !right_real {
        im += lr.tr_mul(&wi);
    }
    if !left_real {
        im -= li.tr_mul(&wr);
        if !right_real {
            re += li.tr_mul(&wi);
        }
    }
    re.zip_map(&im, C64::new)
}

/// Formats like C's `%.12e`: twelve mantissa decimals and an exponent with
/// an explicit sign and at least two digits.
pub fn fmt_e12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printf_style_exponent() {
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e12(-2.5e-5), "-2.500000000000e-05");
        assert_eq!(fmt_e12(6.02e123), "6.020000000000e+123");
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0),
                C64::new(0.5, 0.25),
                c(0.0),
                C64::new(0.5, -0.25),
                c(1.0),
                C64::new(0.0, 0.1),
                c(0.0),
                C64::new(0.0, -0.1),
                c(3.0),
            ],
        );
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let back = spectral_function(&vals, &vecs, |x| x);
        assert!(max_abs_diff(&back, &m) < 1e-13);
    }
}
