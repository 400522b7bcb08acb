//! Biorthogonal basis and metric engine.
//!
//! A [`BiorthoBasis`] holds non-orthogonal states sampled on a
//! (channel × radial point) grid together with the quadrature weights of the
//! radial grid. Everything downstream works in the N-dimensional coefficient
//! space spanned by those states, where the metric is the Gram matrix
//! `S_kl = ⟨ψ_k|ψ_l⟩` and the dual states are `ψ̃ = Ψ S⁻¹`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};

/// Relative eigenvalue floor below which the Gram matrix is treated as singular.
pub const DEFAULT_TOL: f64 = 1e-10;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BiorthoBasis {
    energies: Vec<f64>,
    states: CMat,
    weights: Vec<f64>,
    n_channels: usize,
}

impl BiorthoBasis {
    /// Builds a basis of unit-normalized states. Rows of `states` are indexed
    /// by `channel * weights.len() + point`.
    pub fn new(energies: Vec<f64>, states: CMat, weights: Vec<f64>) -> Result<Self> {
        let basis = Self::from_columns(energies, states, weights)?;
        for k in 0..basis.len() {
            let col = basis.states.column(k).into_owned();
            let norm2 = basis.inner(&col, &col).re;
            if (norm2 - 1.0).abs() > NORM_TOL {
                return Err(Error::InputData(format!(
                    "state {k} has squared norm {norm2:.12e}, expected 1"
                )));
            }
        }
        Ok(basis)
    }

    /// Like [`BiorthoBasis::new`] but accepts columns of any nonzero norm.
    /// Used for similarity-transform checks where the states are the columns
    /// of an arbitrary invertible matrix.
    pub fn from_columns(energies: Vec<f64>, states: CMat, weights: Vec<f64>) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::InputData("basis needs at least one state".into()));
        }
        if states.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "basis columns vs energies",
                expected: n,
                found: states.ncols(),
            });
        }
        if weights.is_empty() || states.nrows() % weights.len() != 0 {
            return Err(Error::DimensionMismatch {
                context: "basis rows vs quadrature weights",
                expected: weights.len(),
                found: states.nrows(),
            });
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InputData("basis energies must be strictly increasing".into()));
        }
        if energies.iter().chain(weights.iter()).any(|x| !x.is_finite())
            || states.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InputData("non-finite basis data".into()));
        }
        let n_channels = states.nrows() / weights.len();
        Ok(Self {
            energies,
            states,
            weights,
            n_channels,
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> &CMat {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn grid_len(&self) -> usize {
        self.states.nrows()
    }

    #[inline]
    pub(crate) fn weight_of_row(&self, row: usize) -> f64 {
        self.weights[row % self.weights.len()]
    }

    /// Weighted inner product ⟨x|y⟩ on the grid.
    pub fn inner(&self, x: &CVec, y: &CVec) -> C64 {
        x.iter()
            .zip(y.iter())
            .enumerate()
            .map(|(row, (a, b))| a.conj() * b * self.weight_of_row(row))
            .sum()
    }

    /// W·M, scaling each grid row by its quadrature weight.
    pub(crate) fn weighted(&self, m: &CMat) -> CMat {
        let mut out = m.clone();
        for (row, mut r) in out.row_iter_mut().enumerate() {
            r *= c(self.weight_of_row(row));
        }
        out
    }

    /// Lᴴ·W·R for grid-column matrices L and R.
    pub(crate) fn project(&self, left: &CMat, right: &CMat) -> CMat {
        let w: Vec<f64> = (0..self.grid_len()).map(|row| self.weight_of_row(row)).collect();
        linalg::weighted_adjoint_product(left, &w, right)
    }

    /// Ψᴴ·W·x: plain overlaps ⟨ψ_k|x⟩.
    pub fn overlaps(&self, grid_vector: &CVec) -> Result<CVec> {
        if grid_vector.len() != self.grid_len() {
            return Err(Error::DimensionMismatch {
                context: "grid vector",
                expected: self.grid_len(),
                found: grid_vector.len(),
            });
        }
        let wx = CVec::from_iterator(
            grid_vector.len(),
            grid_vector
                .iter()
                .enumerate()
                .map(|(row, z)| z * self.weight_of_row(row)),
        );
        Ok(self.states.ad_mul(&wx))
    }

    /// Ψ·a
    pub fn synthesize(&self, coeffs: &CoeffVector) -> CVec {
        &self.states * coeffs.as_vector()
    }

    /// The metric Σ_E |ψ(E)⟩⟨ψ(E)| as an operator on the grid, `Ψ Ψᴴ W`.
    /// Dense in the grid dimension; meant for small ambient spaces.
    pub fn metric_operator(&self) -> CMat {
        &self.states * self.weighted(&self.states).adjoint()
    }
}

/// Expansion coefficients of a state over the basis.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVector(CVec);

impl CoeffVector {
    pub fn new(v: CVec) -> Result<Self> {
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InputData("non-finite expansion coefficient".into()));
        }
        Ok(Self(v))
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = CVec::zeros(n);
        v[k] = c(1.0);
        Self(v)
    }

    pub fn as_vector(&self) -> &CVec {
        &self.0
    }

    pub fn into_vector(self) -> CVec {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean norm, which is the norm in the metric-weighted product.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.norm() == 0.0)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InputData("cannot normalize a zero coefficient vector".into()));
        }
        Ok(Self(self.0.unscale(n)))
    }

    /// Inverse participation ratio (Σ|a|²)² / Σ|a|⁴: effective number of states.
    pub fn participation(&self) -> f64 {
        let p2: f64 = self.0.iter().map(|z| z.norm_sqr()).sum();
        let p4: f64 = self.0.iter().map(|z| z.norm_sqr().powi(2)).sum();
        if p4 == 0.0 {
            0.0
        } else {
            p2 * p2 / p4
        }
    }
}

/// Hermitian Gram matrix `S_kl = ⟨ψ_k|ψ_l⟩`.
#[derive(Clone, Debug)]
pub struct Gram(CMat);

impl Gram {
    pub fn from_matrix(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                context: "Gram matrix",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InputData("non-finite overlap".into()));
        }
        Ok(Self(linalg::hermitian_part(&m)))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

pub fn gram_from_states(basis: &BiorthoBasis) -> Result<Gram> {
    let s = basis.project(basis.states(), basis.states());
    Gram::from_matrix(s)
}

/// Metric data on the span of the basis: S, its eigendecomposition and the
/// powers S⁻¹, S^{±1/2}.
#[derive(Clone, Debug)]
pub struct MetricWorkspace {
    gram: CMat,
    eigvals: DVector<f64>,
    eigvecs: CMat,
    inv: CMat,
    sqrt: CMat,
    invsqrt: CMat,
    tol: f64,
    truncated: usize,
}

impl MetricWorkspace {
    /// Fails if any eigenvalue of S is at or below `tol · λ_max`.
    pub fn decompose(gram: Gram, tol: f64) -> Result<Self> {
        let (vals, vecs) = linalg::hermitian_eigen(gram.matrix());
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = tol * max.max(0.0);
        if let Some((index, &eigenvalue)) = vals.iter().enumerate().find(|(_, &v)| v <= floor || max <= 0.0) {
            return Err(Error::NotPositiveDefinite {
                index,
                eigenvalue,
                floor,
            });
        }
        Ok(Self::assemble(gram.0, vals, vecs, tol, 0))
    }

    /// Pseudo-inverse variant that drops eigen-directions below `tol · λ_max`
    /// instead of failing. Only for negative controls: a truncated workspace
    /// does not satisfy the biorthogonality relations.
    pub fn decompose_truncated(gram: Gram, tol: f64) -> Self {
        let (vals, vecs) = linalg::hermitian_eigen(gram.matrix());
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let truncated = vals.iter().filter(|&&v| v <= tol * max).count();
        Self::assemble(gram.0, vals, vecs, tol, truncated)
    }

    fn assemble(gram: CMat, vals: DVector<f64>, vecs: CMat, tol: f64, truncated: usize) -> Self {
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let floor = tol * max;
        let keep = |v: f64, f: f64| if v > floor { f } else { 0.0 };
        let inv = linalg::spectral_function(&vals, &vecs, |v| keep(v, 1.0 / v));
        let sqrt = linalg::spectral_function(&vals, &vecs, |v| keep(v, v.sqrt()));
        let invsqrt = linalg::spectral_function(&vals, &vecs, |v| keep(v, 1.0 / v.sqrt()));
        Self {
            gram,
            eigvals: vals,
            eigvecs: vecs,
            inv,
            sqrt,
            invsqrt,
            tol,
            truncated,
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigvecs
    }

    pub fn inverse(&self) -> &CMat {
        &self.inv
    }

    pub fn sqrt(&self) -> &CMat {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &CMat {
        &self.invsqrt
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Number of eigen-directions dropped by [`MetricWorkspace::decompose_truncated`].
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    pub fn condition_number(&self) -> f64 {
        let n = self.eigvals.len();
        self.eigvals[n - 1] / self.eigvals[0]
    }

    /// Quasi-Hermiticity residual of an operator given by its action on
    /// expansion coefficients (e.g. `diag(E)` for H̃). The relation
    /// `X = G Xᴴ G⁻¹` is evaluated on the plain matrix elements
    /// `⟨ψ_k|X|ψ_l⟩ = (S·action)_kl`, where the metric is represented by S.
    pub fn quasi_hermiticity_residual(&self, action: &CMat) -> Result<f64> {
        if action.shape() != self.gram.shape() {
            return Err(Error::DimensionMismatch {
                context: "operator vs metric",
                expected: self.dim(),
                found: action.nrows(),
            });
        }
        let elements = &self.gram * action;
        Ok(residual_with_inverse(&self.gram, &self.inv, &elements))
    }
}

/// `‖X − G·Xᴴ·G⁻¹‖_max` for an explicit metric G.
pub fn quasi_hermiticity_residual(metric: &CMat, op: &CMat) -> Result<f64> {
    if metric.shape() != op.shape() || !metric.is_square() {
        return Err(Error::DimensionMismatch {
            context: "operator vs metric",
            expected: metric.nrows(),
            found: op.nrows(),
        });
    }
    let inv = metric
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InputData("metric is singular".into()))?;
    Ok(residual_with_inverse(metric, &inv, op))
}

fn residual_with_inverse(metric: &CMat, inv: &CMat, op: &CMat) -> f64 {
    let mirrored = metric * op.adjoint() * inv;
    linalg::max_abs_diff(op, &mirrored)
}

/// Coefficients of a grid vector together with how well they reproduce it.
#[derive(Clone, Debug)]
pub struct DualExpansion {
    pub coeffs: CoeffVector,
    /// ‖Ψa − x‖ / ‖x‖ in the weighted grid norm.
    pub residual: f64,
    /// Captured fraction 1 − residual², i.e. ‖Ψa‖²/‖x‖² for the projection.
    pub fidelity: f64,
}

impl DualExpansion {
    /// True when the vector has no component along the basis.
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_zero() || self.fidelity <= f64::EPSILON
    }
}

/// `a = S⁻¹ Ψᴴ W x`, i.e. `a_k = ⟨ψ̃_k|x⟩`.
pub fn dual_coefficients(
    basis: &BiorthoBasis,
    work: &MetricWorkspace,
    grid_vector: &CVec,
) -> Result<DualExpansion> {
    if work.dim() != basis.len() {
        return Err(Error::DimensionMismatch {
            context: "workspace vs basis",
            expected: basis.len(),
            found: work.dim(),
        });
    }
    let proj = basis.overlaps(grid_vector)?;
    let a = work.inverse() * proj;
    let coeffs = CoeffVector::new(a)?;
    let x2 = basis.inner(grid_vector, grid_vector).re;
    if x2 == 0.0 {
        return Err(Error::InputData("zero grid vector".into()));
    }
    let recon = basis.synthesize(&coeffs);
    let diff = &recon - grid_vector;
    let residual = (basis.inner(&diff, &diff).re / x2).sqrt();
    Ok(DualExpansion {
        coeffs,
        residual,
        fidelity: (1.0 - residual * residual).max(0.0),
    })
}

/// Dual states ψ̃_k as grid columns: Ψ S⁻¹.
pub fn dual_states(basis: &BiorthoBasis, work: &MetricWorkspace) -> CMat {
    basis.states() * work.inverse()
}

/// max_{k,l} |⟨ψ̃_k|ψ_l⟩ − δ_kl|, evaluated through the dual states.
pub fn biortho_residual(basis: &BiorthoBasis, work: &MetricWorkspace) -> f64 {
    let duals = dual_states(basis, work);
    let overlaps = basis.project(&duals, basis.states());
    let n = overlaps.nrows();
    linalg::max_abs_diff(&overlaps, &CMat::identity(n, n))
}

/// Non-Hermiticity index: mean of the N largest off-diagonal magnitudes of the
/// Gram matrix, each unordered pair counted once, ties broken by (k, l).
/// When fewer than N pairs exist (N = 2) all pairs are averaged.
pub fn kappa_index(gram: &Gram) -> Result<f64> {
    let n = gram.dim();
    if n < 2 {
        return Err(Error::InputData("kappa needs at least two states".into()));
    }
    let s = gram.matrix();
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|k| ((k + 1)..n).map(move |l| (k, l)))
        .map(|(k, l)| (s[(k, l)].norm(), k, l))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let take = n.min(pairs.len());
    Ok(pairs[..take].iter().map(|p| p.0).sum::<f64>() / take as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, C64};

    fn ambient(energies: Vec<f64>, t: CMat) -> BiorthoBasis {
        let n = t.nrows();
        BiorthoBasis::from_columns(energies, t, vec![1.0; n]).unwrap()
    }

    #[test]
    fn disjoint_unit_vectors_give_identity() {
        let mut states = CMat::zeros(4, 2);
        states[(0, 0)] = c(1.0);
        states[(3, 1)] = C64::new(0.0, 1.0);
        let basis = BiorthoBasis::new(vec![-2.0, -1.0], states, vec![1.0; 4]).unwrap();
        let g = gram_from_states(&basis).unwrap();
        assert!(max_abs_diff(g.matrix(), &CMat::identity(2, 2)) < 1e-15);
        assert_eq!(kappa_index(&g).unwrap(), 0.0);
    }

    #[test]
    fn single_state_overlap_is_one() {
        let states = CMat::from_element(2, 1, c(std::f64::consts::FRAC_1_SQRT_2));
        let basis = BiorthoBasis::new(vec![-1.0], states, vec![1.0, 1.0]).unwrap();
        let g = gram_from_states(&basis).unwrap();
        assert!((g.matrix()[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!(kappa_index(&g).is_err());
    }

    #[test]
    fn rejects_bad_bases() {
        let states = CMat::from_element(2, 2, c(0.5_f64.sqrt()));
        assert!(BiorthoBasis::new(vec![1.0, 1.0], states.clone(), vec![1.0; 2]).is_err());
        assert!(BiorthoBasis::new(vec![1.0], states.clone(), vec![1.0; 2]).is_err());
        let unnormalized = CMat::from_element(2, 2, c(1.0));
        assert!(BiorthoBasis::new(vec![1.0, 2.0], unnormalized, vec![1.0; 2]).is_err());
    }

    #[test]
    fn diagonal_powers() {
        let g = Gram::from_matrix(crate::linalg::diag_real(&[4.0, 1.0])).unwrap();
        let w = MetricWorkspace::decompose(g, DEFAULT_TOL).unwrap();
        assert!(max_abs_diff(w.sqrt(), &crate::linalg::diag_real(&[2.0, 1.0])) < 1e-14);
        assert!(max_abs_diff(w.inv_sqrt(), &crate::linalg::diag_real(&[0.5, 1.0])) < 1e-14);
        assert!(max_abs_diff(w.inverse(), &crate::linalg::diag_real(&[0.25, 1.0])) < 1e-14);
        assert!((w.condition_number() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn identity_metric_powers_are_identity() {
        let g = Gram::from_matrix(CMat::identity(5, 5)).unwrap();
        let w = MetricWorkspace::decompose(g, DEFAULT_TOL).unwrap();
        for m in [w.inverse(), w.sqrt(), w.inv_sqrt()] {
            assert!(max_abs_diff(m, &CMat::identity(5, 5)) < 1e-14);
        }
    }

    #[test]
    fn singular_gram_names_the_eigenvalue() {
        let g = Gram::from_matrix(CMat::from_element(2, 2, c(1.0))).unwrap();
        match MetricWorkspace::decompose(g, DEFAULT_TOL) {
            Err(Error::NotPositiveDefinite { index, eigenvalue, .. }) => {
                assert_eq!(index, 0);
                assert!(eigenvalue.abs() < 1e-12);
            }
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn kappa_two_by_two_counts_the_single_pair() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(0.1), c(0.1), c(1.0)]);
        let k = kappa_index(&Gram::from_matrix(m).unwrap()).unwrap();
        assert!((k - 0.1).abs() < 1e-15);
    }

    #[test]
    fn kappa_takes_n_largest_pairs_once() {
        // 3 states, pairs (0,1)=0.3, (0,2)=0.1, (1,2)=0.2: all three are taken.
        let m = CMat::from_row_slice(
            3,
            3,
            &[c(1.0), c(0.3), c(0.1), c(0.3), c(1.0), c(-0.2), c(0.1), c(-0.2), c(1.0)],
        );
        let k = kappa_index(&Gram::from_matrix(m).unwrap()).unwrap();
        assert!((k - 0.2).abs() < 1e-15);
        // 4 states: 6 pairs, the 4 largest are averaged.
        let mut m = CMat::identity(4, 4);
        let vals = [0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let mut it = vals.iter();
        for k in 0..4 {
            for l in (k + 1)..4 {
                let v = *it.next().unwrap();
                m[(k, l)] = c(v);
                m[(l, k)] = c(v);
            }
        }
        let k = kappa_index(&Gram::from_matrix(m).unwrap()).unwrap();
        assert!((k - 0.45).abs() < 1e-15);
    }

    #[test]
    fn duals_of_basis_states_are_unit_vectors() {
        let t = CMat::from_row_slice(3, 3, &[c(1.0), c(0.3), c(0.1), c(0.0), c(1.0), c(0.2), c(0.1), c(0.0), c(1.0)]);
        let basis = ambient(vec![1.0, 2.0, 3.0], t);
        let w = MetricWorkspace::decompose(gram_from_states(&basis).unwrap(), DEFAULT_TOL).unwrap();
        for k in 0..3 {
            let x = basis.states().column(k).into_owned();
            let e = dual_coefficients(&basis, &w, &x).unwrap();
            let unit = CoeffVector::unit(3, k);
            assert!((e.coeffs.as_vector() - unit.as_vector()).norm() < 1e-12);
            assert!(e.residual < 1e-12);
        }
        assert!(biortho_residual(&basis, &w) < 1e-12);
    }

    #[test]
    fn vector_outside_the_span_has_zero_coefficients() {
        let mut states = CMat::zeros(3, 2);
        states[(0, 0)] = c(1.0);
        states[(1, 1)] = c(1.0);
        let basis = BiorthoBasis::new(vec![0.0, 1.0], states, vec![1.0; 3]).unwrap();
        let w = MetricWorkspace::decompose(gram_from_states(&basis).unwrap(), DEFAULT_TOL).unwrap();
        let mut x = CVec::zeros(3);
        x[2] = c(2.0);
        let e = dual_coefficients(&basis, &w, &x).unwrap();
        assert!(e.coeffs.is_zero());
        assert!(e.is_empty());
        assert_eq!(e.fidelity, 0.0);
    }

    #[test]
    fn hermitian_case_has_zero_quasi_hermiticity_residual() {
        let g = Gram::from_matrix(CMat::identity(3, 3)).unwrap();
        let w = MetricWorkspace::decompose(g, DEFAULT_TOL).unwrap();
        let h = crate::linalg::diag_real(&[-3.0, -2.0, -1.0]);
        assert_eq!(w.quasi_hermiticity_residual(&h).unwrap(), 0.0);
    }

    #[test]
    fn truncated_inverse_breaks_biorthogonality() {
        let t = CMat::from_row_slice(2, 2, &[c(1.0), c(0.999), c(0.0), c(0.0447)]);
        let basis = ambient(vec![1.0, 2.0], t);
        let g = gram_from_states(&basis).unwrap();
        let exact = MetricWorkspace::decompose(g.clone(), DEFAULT_TOL).unwrap();
        assert!(biortho_residual(&basis, &exact) < 1e-10);
        let cut = MetricWorkspace::decompose_truncated(g, 1e-2);
        assert_eq!(cut.truncated(), 1);
        assert!(biortho_residual(&basis, &cut) > 1e-3);
    }
}
