//! Observables over a biorthogonal basis.
//!
//! For a Hermitian grid operator A with plain matrix elements
//! `M = Ψᴴ W A Ψ`, the associated quasi-Hermitian operator Ã acts on
//! expansion coefficients as `X = S^{-1/2} M S^{-1/2}`, and its plain matrix
//! elements are `S X`. The Hermitization `S^{-1/2} (S X) S^{1/2} = M` recovers
//! the Hermitian counterpart. For the Hamiltonian the action is diag(E_k) by
//! construction and the counterpart is `S^{1/2} diag(E) S^{1/2}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, I};
use crate::metric::{BiorthoBasis, CoeffVector, MetricWorkspace};
use crate::scatter::RadialGrid;

/// Boundary amplitude (relative to the peak) above which the momentum
/// stencil is flagged as inaccurate.
pub const BOUNDARY_AMPLITUDE_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    Position,
    Momentum,
    Energy,
    Custom,
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservableKind::Position => "position",
            ObservableKind::Momentum => "momentum",
            ObservableKind::Energy => "energy",
            ObservableKind::Custom => "custom",
        })
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "position" => Ok(ObservableKind::Position),
            "momentum" => Ok(ObservableKind::Momentum),
            "energy" => Ok(ObservableKind::Energy),
            other => Err(Error::Config(format!("unknown observable '{other}' (energy|momentum|position)"))),
        }
    }
}

/// An observable in the coefficient space of a basis.
#[derive(Clone, Debug)]
pub struct ObservableRep {
    kind: ObservableKind,
    coeff_form: CMat,
    tilde_form: CMat,
    action: CMat,
    naive_form: CMat,
    warnings: Vec<String>,
}

impl ObservableRep {
    /// From the plain matrix elements M of a Hermitian operator.
    pub fn from_matrix_elements(kind: ObservableKind, m: CMat, work: &MetricWorkspace) -> Result<Self> {
        check_dim(&m, work)?;
        let action = work.inv_sqrt() * &m * work.inv_sqrt();
        let tilde_form = work.gram() * &action;
        Ok(Self {
            kind,
            naive_form: m.clone(),
            coeff_form: m,
            tilde_form,
            action,
            warnings: Vec::new(),
        })
    }

    /// From an explicit Hermitian matrix on the basis grid (small ambient spaces).
    pub fn from_grid_matrix(kind: ObservableKind, a: &CMat, basis: &BiorthoBasis, work: &MetricWorkspace) -> Result<Self> {
        if a.nrows() != basis.grid_len() || a.ncols() != basis.grid_len() {
            return Err(Error::DimensionMismatch {
                context: "grid operator",
                expected: basis.grid_len(),
                found: a.nrows(),
            });
        }
        let m = matrix_elements(basis, &(a * basis.states()));
        Self::from_matrix_elements(kind, m, work)
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    /// Plain matrix elements of the Hermitian counterpart A.
    pub fn coeff_form(&self) -> &CMat {
        &self.coeff_form
    }

    /// Plain matrix elements of Ã; quasi-Hermitian with respect to S.
    pub fn tilde_form(&self) -> &CMat {
        &self.tilde_form
    }

    /// Ã acting on expansion coefficients. Hermitian.
    pub fn action(&self) -> &CMat {
        &self.action
    }

    /// Matrix used by the naive weak value numerator `bᴴ · naive · a`.
    pub fn naive_form(&self) -> &CMat {
        &self.naive_form
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// The momentum stencil drops the end points of each channel, so a state
    /// with amplitude there gets a warning attached.
    pub fn check_boundary(&mut self, basis: &BiorthoBasis, state: &CoeffVector) {
        if self.kind != ObservableKind::Momentum {
            return;
        }
        let ratio = boundary_amplitude(basis, state);
        if ratio > BOUNDARY_AMPLITUDE_TOL {
            let msg = format!("state amplitude at the grid ends reaches {ratio:.3e} of its peak; the momentum stencil drops those points");
            log::warn!("{msg}");
            self.warnings.push(msg);
        }
    }

    /// S^{-1/2} · tilde · S^{1/2}; equals the Hermitian counterpart.
    pub fn hermitized(&self, work: &MetricWorkspace) -> CMat {
        work.inv_sqrt() * &self.tilde_form * work.sqrt()
    }

    /// ‖tilde − S tildeᴴ S⁻¹‖_max
    pub fn quasi_hermiticity_residual(&self, work: &MetricWorkspace) -> Result<f64> {
        work.quasi_hermiticity_residual(&self.action)
    }

    /// Eigenvalues of the tilde form; real up to rounding.
    pub fn tilde_eigenvalues(&self) -> Option<CVec> {
        linalg::general_eigenvalues(&self.tilde_form)
    }
}

fn check_dim(m: &CMat, work: &MetricWorkspace) -> Result<()> {
    if m.nrows() != work.dim() || m.ncols() != work.dim() {
        return Err(Error::DimensionMismatch {
            context: "observable coefficient matrix",
            expected: work.dim(),
            found: m.nrows(),
        });
    }
    Ok(())
}

fn check_grid(grid: &RadialGrid, basis: &BiorthoBasis) -> Result<()> {
    if grid.n_pts() != basis.n_points() {
        return Err(Error::DimensionMismatch {
            context: "radial grid vs basis",
            expected: basis.n_points(),
            found: grid.n_pts(),
        });
    }
    Ok(())
}

/// Ψᴴ W (AΨ)
fn matrix_elements(basis: &BiorthoBasis, a_psi: &CMat) -> CMat {
    basis.project(basis.states(), a_psi)
}

/// Radial position r, diagonal on the grid.
pub fn position_observable(grid: &RadialGrid, basis: &BiorthoBasis, work: &MetricWorkspace) -> Result<ObservableRep> {
    check_grid(grid, basis)?;
    let n_pts = grid.n_pts();
    let radii = grid.radii();
    let mut a_psi = basis.states().clone();
    for (row, mut r) in a_psi.row_iter_mut().enumerate() {
        r *= c(radii[row % n_pts]);
    }
    ObservableRep::from_matrix_elements(ObservableKind::Position, matrix_elements(basis, &a_psi), work)
}

/// −i D with D the central difference restricted to interior points in each
/// channel (boundary rows and columns zero), which is antisymmetric and so
/// makes the operator Hermitian under uniform trapezoid weights.
pub fn apply_momentum(grid: &RadialGrid, n_channels: usize, y: &CVec) -> CVec {
    let n = grid.n_pts();
    let inv2h = 1.0 / (2.0 * grid.step());
    let mut out = CVec::zeros(y.len());
    for ch in 0..n_channels {
        let base = ch * n;
        for i in 1..n - 1 {
            let left = if i > 1 { y[base + i - 1] } else { c(0.0) };
            let right = if i + 2 < n { y[base + i + 1] } else { c(0.0) };
            out[base + i] = -I * (right - left) * inv2h;
        }
    }
    out
}

pub fn momentum_observable(grid: &RadialGrid, basis: &BiorthoBasis, work: &MetricWorkspace) -> Result<ObservableRep> {
    check_grid(grid, basis)?;
    let n_ch = basis.n_channels();
    let mut a_psi = CMat::zeros(basis.grid_len(), basis.len());
    for k in 0..basis.len() {
        let col = basis.states().column(k).into_owned();
        a_psi.set_column(k, &apply_momentum(grid, n_ch, &col));
    }
    ObservableRep::from_matrix_elements(ObservableKind::Momentum, matrix_elements(basis, &a_psi), work)
}

/// Largest |Ψa| at the first or last point of any channel, relative to the
/// largest |Ψa| anywhere.
pub fn boundary_amplitude(basis: &BiorthoBasis, coeffs: &CoeffVector) -> f64 {
    let psi = basis.synthesize(coeffs);
    let n = basis.n_points();
    let peak = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let edge = (0..basis.n_channels())
        .flat_map(|ch| [ch * n, ch * n + n - 1])
        .fold(0.0f64, |m, row| m.max(psi[row].norm()));
    edge / peak
}

/// H̃ = diag(E) on coefficients. The naive Hamiltonian Σ_E E|ψ(E)⟩⟨ψ(E)| has
/// plain matrix elements S diag(E) S.
pub fn energy_observable(basis: &BiorthoBasis, work: &MetricWorkspace) -> Result<ObservableRep> {
    if basis.len() != work.dim() {
        return Err(Error::DimensionMismatch {
            context: "basis vs metric",
            expected: work.dim(),
            found: basis.len(),
        });
    }
    let d = linalg::diag_real(basis.energies());
    let s = work.gram();
    Ok(ObservableRep {
        kind: ObservableKind::Energy,
        coeff_form: work.sqrt() * &d * work.sqrt(),
        tilde_form: s * &d,
        naive_form: s * &d * s,
        action: d,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{gram_from_states, DEFAULT_TOL};

    fn flat_basis() -> (RadialGrid, BiorthoBasis) {
        let grid = RadialGrid::new(1.0, 9.0, 9).unwrap();
        let w = grid.trapezoid_weights();
        let mut m = CMat::zeros(9, 2);
        m[(3, 0)] = c(1.0);
        m[(5, 1)] = c(1.0);
        let basis = BiorthoBasis::new(vec![-1.0, -0.5], m, w).unwrap();
        (grid, basis)
    }

    #[test]
    fn flat_metric_tilde_equals_plain() {
        let (grid, basis) = flat_basis();
        let work = MetricWorkspace::decompose(gram_from_states(&basis).unwrap(), DEFAULT_TOL).unwrap();
        for rep in [
            position_observable(&grid, &basis, &work).unwrap(),
            momentum_observable(&grid, &basis, &work).unwrap(),
            energy_observable(&basis, &work).unwrap(),
        ] {
            assert!(linalg::max_abs_diff(rep.tilde_form(), rep.coeff_form()) < 1e-10);
            assert!(linalg::max_abs_diff(rep.tilde_form(), rep.naive_form()) < 1e-10);
        }
        let pos = position_observable(&grid, &basis, &work).unwrap();
        assert!((pos.coeff_form()[(0, 0)].re - 4.0).abs() < 1e-12);
        assert!((pos.coeff_form()[(1, 1)].re - 6.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_stencil_is_hermitian_under_trapezoid_weights() {
        let grid = RadialGrid::new(0.5, 3.0, 11).unwrap();
        let w = grid.trapezoid_weights();
        let n = 2 * grid.n_pts();
        let mut p = CMat::zeros(n, n);
        for j in 0..n {
            let mut e = CVec::zeros(n);
            e[j] = c(1.0);
            p.set_column(j, &apply_momentum(&grid, 2, &e));
        }
        let mut wp = p.clone();
        for (row, mut r) in wp.row_iter_mut().enumerate() {
            r *= c(w[row % grid.n_pts()]);
        }
        assert_eq!(linalg::hermiticity_residual(&wp), 0.0);
    }

    #[test]
    fn plane_wave_momentum() {
        let grid = RadialGrid::new(0.0001, 200.0, 20_001).unwrap();
        let k = 0.7;
        let h = grid.step();
        let y = CVec::from_iterator(grid.n_pts(), grid.radii().iter().map(|&r| (I * k * r).exp()));
        let py = apply_momentum(&grid, 1, &y);
        let mid = grid.n_pts() / 2;
        let expect = (k * h).sin() / h;
        assert!((py[mid] / y[mid] - expect).norm() < 1e-12);
        assert!((expect - k).abs() < k * k * k * h * h);
    }

    #[test]
    fn energy_eigenstate() {
        let (_, basis) = flat_basis();
        let work = MetricWorkspace::decompose(gram_from_states(&basis).unwrap(), DEFAULT_TOL).unwrap();
        let rep = energy_observable(&basis, &work).unwrap();
        let e1 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        let out = rep.action() * &e1;
        assert_eq!(out[1], c(-0.5));
        assert_eq!(out[0], c(0.0));
    }
}
