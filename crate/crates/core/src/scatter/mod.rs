//! Multichannel bound-state model: closed channels with a Coulomb tail
//! coupled at short range by an energy-dependent reaction matrix K(E).
//!
//! In channel j the radial function beyond r0 is
//! `u_j = Z_j f_j + (Σ_i K_ji Z_i) g_j`, matched to a decaying solution near
//! Rmax. Energies where that is possible are the bound states.

mod bound;
mod kmatrix;
pub mod radial;

pub use bound::{assemble_basis, BoundSearch, BoundState, ScatteringSystem, DECAY_TOL, ROOT_SPACING_FRACTION, ROOT_TOL};
pub use kmatrix::{Eigenphase, ReactionModel, Resonance};
pub use radial::{Potential, ReferencePair};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform radial grid on [r0, Rmax].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r0: f64,
    r_max: f64,
    n_pts: usize,
}

impl RadialGrid {
    pub fn new(r0: f64, r_max: f64, n_pts: usize) -> Result<Self> {
        if !(r0 > 0.0 && r_max > r0 && r_max.is_finite()) {
            return Err(Error::InputData(format!("radial grid needs 0 < r0 < Rmax, got [{r0}, {r_max}]")));
        }
        if n_pts < 3 {
            return Err(Error::InputData(format!("radial grid needs at least 3 points, got {n_pts}")));
        }
        if n_pts < 1000 {
            log::debug!("radial grid with {n_pts} points is below production resolution");
        }
        Ok(Self { r0, r_max, n_pts })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_pts(&self) -> usize {
        self.n_pts
    }

    pub fn step(&self) -> f64 {
        (self.r_max - self.r0) / (self.n_pts - 1) as f64
    }

    /// Grid point i; the last point is exactly Rmax.
    pub fn r(&self, i: usize) -> f64 {
        if i + 1 == self.n_pts {
            self.r_max
        } else {
            self.r0 + i as f64 * self.step()
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n_pts).map(|i| self.r(i)).collect()
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.n_pts];
        w[0] = h / 2.0;
        w[self.n_pts - 1] = h / 2.0;
        w
    }

    /// Nearest grid index to `r`, clamped to the grid.
    pub fn nearest_index(&self, r: f64) -> usize {
        let x = ((r - self.r0) / self.step()).round();
        x.clamp(0.0, (self.n_pts - 1) as f64) as usize
    }

    /// Same extent with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_pts: (self.n_pts - 1) * factor + 1,
            ..*self
        }
    }
}

/// Channel thresholds ε_i, the shared Coulomb charge and per-channel ℓ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    thresholds: Vec<f64>,
    z_core: f64,
    l: Vec<u32>,
}

impl ChannelSet {
    pub fn new(thresholds: Vec<f64>, z_core: f64) -> Result<Self> {
        let l = vec![0; thresholds.len()];
        Self::with_angular_momenta(thresholds, z_core, l)
    }

    pub fn with_angular_momenta(thresholds: Vec<f64>, z_core: f64, l: Vec<u32>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InputData("at least one channel is required".into()));
        }
        if thresholds.len() != l.len() {
            return Err(Error::DimensionMismatch {
                context: "channel angular momenta",
                expected: thresholds.len(),
                found: l.len(),
            });
        }
        if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InputData("thresholds must be finite and non-decreasing".into()));
        }
        if !(z_core.is_finite() && z_core >= 0.0) {
            return Err(Error::InputData(format!("core charge must be non-negative, got {z_core}")));
        }
        Ok(Self { thresholds, z_core, l })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn z_core(&self) -> f64 {
        self.z_core
    }

    pub fn potential(&self, channel: usize) -> Potential {
        Potential {
            z_core: self.z_core,
            l: self.l[channel],
        }
    }

    /// ϵ_j = E − ε_j, checking that every channel is closed.
    pub fn channel_energies(&self, energy: f64) -> Result<Vec<f64>> {
        self.thresholds
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let eps = energy - t;
                if eps < 0.0 {
                    Ok(eps)
                } else {
                    Err(Error::OpenChannel {
                        channel: j,
                        energy,
                        threshold: t,
                    })
                }
            })
            .collect()
    }

    /// Effective quantum numbers ν_j = Z/√(−2ϵ_j) (zero charge counts as 0).
    pub fn effective_quantum_numbers(&self, energy: f64) -> Result<Vec<f64>> {
        Ok(self
            .channel_energies(energy)?
            .into_iter()
            .map(|eps| self.z_core / (-2.0 * eps).sqrt())
            .collect())
    }
}
