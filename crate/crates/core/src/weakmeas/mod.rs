//! Weak values in a non-orthogonal basis.
//!
//! Coefficient vectors `a` expand a state as `Ψa`. The metric-weighted
//! product of two states is `bᴴa`, and the plain one is `bᴴSa`. Pseudo
//! evolution multiplies by `e^{−iEt}` and conserves `aᴴa`. Naive evolution
//! `U(t) = Σ_E e^{−iEt}|ψ(E)⟩⟨ψ(E)|` maps `a` to `e^{−iEt}·S·a`.

mod meter;
mod recurrence;

pub use meter::{meter_simulate, meter_sweep, MeterShift, MeterState};
pub use recurrence::{autocorrelation, kepler_period, mean_energy, recurrence_time, RECURRENCE_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64, I};
use crate::metric::{dual_coefficients, BiorthoBasis, CoeffVector, MetricWorkspace};
use crate::observables::ObservableRep;
use crate::par::{self, Execution};
use crate::scatter::RadialGrid;

/// Smallest admissible |denominator| of a weak value.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;
/// Wavepackets reconstructed with lower fidelity are rejected.
pub const MIN_FIDELITY: f64 = 0.9;

/// Real Gaussian `exp(−(r − center)²/(2 width²))` in one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub channel: usize,
}

#[derive(Clone, Debug)]
pub struct Wavepacket {
    /// Normalized so that `aᴴa = 1`.
    pub coeffs: CoeffVector,
    pub fidelity: f64,
    pub residual: f64,
    pub participation: f64,
}

pub fn gaussian_grid_vector(grid: &RadialGrid, n_channels: usize, spec: &WavepacketSpec) -> Result<CVec> {
    if spec.channel >= n_channels {
        return Err(Error::InputData(format!(
            "wavepacket channel {} out of range (0..{n_channels})",
            spec.channel
        )));
    }
    if !(spec.center > grid.r0() && spec.center < grid.r_max() && spec.width > 0.0) {
        return Err(Error::InputData(format!(
            "wavepacket center {} must lie inside ({}, {}) with positive width",
            spec.center,
            grid.r0(),
            grid.r_max()
        )));
    }
    let n = grid.n_pts();
    let mut v = CVec::zeros(n * n_channels);
    for i in 0..n {
        let x = (grid.r(i) - spec.center) / spec.width;
        v[spec.channel * n + i] = C64::new((-0.5 * x * x).exp(), 0.0);
    }
    Ok(v)
}

/// Expands a Gaussian wavepacket on the dual basis, rejecting it when the
/// reconstruction fidelity is below `min_fidelity`.
pub fn wavepacket_initial(
    grid: &RadialGrid,
    basis: &BiorthoBasis,
    work: &MetricWorkspace,
    spec: &WavepacketSpec,
    min_fidelity: f64,
) -> Result<Wavepacket> {
    let x = gaussian_grid_vector(grid, basis.n_channels(), spec)?;
    let exp = dual_coefficients(basis, work, &x)?;
    if exp.fidelity < min_fidelity {
        return Err(Error::LowFidelity {
            fidelity: exp.fidelity,
            minimum: min_fidelity,
        });
    }
    let coeffs = exp.coeffs.normalized()?;
    Ok(Wavepacket {
        participation: coeffs.participation(),
        coeffs,
        fidelity: exp.fidelity,
        residual: exp.residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    Naive,
    Pseudo,
}

fn phases(energies: &[f64], t: f64) -> impl Iterator<Item = C64> + '_ {
    energies.iter().map(move |&e| (-I * (e * t)).exp())
}

/// Coefficients of the evolved state. Naive mode returns `e^{−iEt} S a`.
pub fn evolve(a: &CoeffVector, t: f64, energies: &[f64], work: &MetricWorkspace, mode: EvolutionMode) -> Result<CoeffVector> {
    if a.len() != energies.len() || a.len() != work.dim() {
        return Err(Error::DimensionMismatch {
            context: "evolution",
            expected: work.dim(),
            found: a.len(),
        });
    }
    let source = match mode {
        EvolutionMode::Pseudo => a.as_vector().clone(),
        EvolutionMode::Naive => work.gram() * a.as_vector(),
    };
    let out = CVec::from_iterator(source.len(), source.iter().zip(phases(energies, t)).map(|(x, p)| x * p));
    CoeffVector::new(out)
}

/// Plain norm ‖Ψa‖² = aᴴSa.
pub fn physical_norm(a: &CoeffVector, work: &MetricWorkspace) -> f64 {
    a.as_vector().dotc(&(work.gram() * a.as_vector())).re
}

/// Largest relative change of the naive physical norm over `times`,
/// relative to its value at t = 0.
pub fn naive_norm_drift(a: &CoeffVector, energies: &[f64], work: &MetricWorkspace, times: &[f64]) -> Result<f64> {
    let n0 = physical_norm(&evolve(a, 0.0, energies, work, EvolutionMode::Naive)?, work);
    let mut drift: f64 = 0.0;
    for &t in times {
        let nt = physical_norm(&evolve(a, t, energies, work, EvolutionMode::Naive)?, work);
        drift = drift.max((nt / n0 - 1.0).abs());
    }
    Ok(drift)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakValueResult {
    pub t: f64,
    pub naive: C64,
    pub corrected: C64,
    pub denom_naive: C64,
    pub denom_corrected: C64,
}

impl WeakValueResult {
    /// |naive − corrected| / |corrected|
    pub fn relative_gap(&self) -> f64 {
        (self.naive - self.corrected).norm() / self.corrected.norm()
    }
}

fn check_pair(obs: &ObservableRep, pre: &CoeffVector, post: &CoeffVector, energies: &[f64]) -> Result<()> {
    let n = obs.action().nrows();
    for (len, what) in [(pre.len(), "preselected"), (post.len(), "postselected"), (energies.len(), "energies")] {
        if len != n {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

/// Naive and metric-corrected weak values at measurement time `t`:
/// corrected = bᴴ X a(t) / bᴴ a(t) with pseudo evolution and X the action of
/// Ã; naive = bᴴ M a_n(t) / bᴴ S a_n(t) with naive evolution and M the plain
/// matrix elements of the naive operator. Denominators below `floor` in
/// modulus are rejected.
pub fn weak_value(
    obs: &ObservableRep,
    energies: &[f64],
    pre: &CoeffVector,
    post: &CoeffVector,
    t: f64,
    work: &MetricWorkspace,
    floor: f64,
) -> Result<WeakValueResult> {
    check_pair(obs, pre, post, energies)?;
    let b = post.as_vector();
    let ap = evolve(pre, t, energies, work, EvolutionMode::Pseudo)?.into_vector();
    let an = evolve(pre, t, energies, work, EvolutionMode::Naive)?.into_vector();
    let denom_corrected = b.dotc(&ap);
    let denom_naive = b.dotc(&(work.gram() * &an));
    if denom_corrected.norm() < floor || denom_naive.norm() < floor {
        return Err(Error::NearlyOrthogonal {
            naive: denom_naive.norm(),
            corrected: denom_corrected.norm(),
        });
    }
    let corrected = b.dotc(&(obs.action() * &ap)) / denom_corrected;
    let naive = b.dotc(&(obs.naive_form() * &an)) / denom_naive;
    Ok(WeakValueResult {
        t,
        naive,
        corrected,
        denom_naive,
        denom_corrected,
    })
}

/// Corrected weak value through the Hermitian counterpart,
/// bᴴ S^{-1/2} A S^{-1/2} a(t) / bᴴ a(t), computed independently of the
/// stored action.
pub fn corrected_via_hermitized(
    obs: &ObservableRep,
    energies: &[f64],
    pre: &CoeffVector,
    post: &CoeffVector,
    t: f64,
    work: &MetricWorkspace,
) -> Result<C64> {
    check_pair(obs, pre, post, energies)?;
    let ap = evolve(pre, t, energies, work, EvolutionMode::Pseudo)?.into_vector();
    let b = post.as_vector();
    let den = b.dotc(&ap);
    if den.norm() < DENOMINATOR_FLOOR {
        return Err(Error::NearlyOrthogonal {
            naive: f64::NAN,
            corrected: den.norm(),
        });
    }
    let left = work.inv_sqrt() * b;
    let right = work.inv_sqrt() * ap;
    Ok(left.dotc(&(obs.coeff_form() * right)) / den)
}

/// Weak values at each time; a failure at one time does not stop the sweep.
pub fn weak_value_sweep(
    obs: &ObservableRep,
    energies: &[f64],
    pre: &CoeffVector,
    post: &CoeffVector,
    times: &[f64],
    work: &MetricWorkspace,
    floor: f64,
    exec: Execution,
) -> Vec<Result<WeakValueResult>> {
    par::map(exec, times, |&t| weak_value(obs, energies, pre, post, t, work, floor))
}
