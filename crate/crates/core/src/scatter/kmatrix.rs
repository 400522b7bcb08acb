use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance of an eigenphase from π/2 (mod π) below which K is treated as singular.
pub const POLE_GUARD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub center: f64,
    pub width: f64,
}

/// δ(E) = base + slope·E + atan((E − center)/width).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Eigenphase {
    pub base: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub resonance: Option<Resonance>,
}

impl Eigenphase {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            ..Self::default()
        }
    }

    pub fn at(&self, energy: f64) -> f64 {
        let mut d = self.base + self.slope * energy;
        if let Some(res) = self.resonance {
            d += ((energy - res.center) / res.width).atan();
        }
        d
    }

    pub fn derivative(&self, energy: f64) -> f64 {
        let mut d = self.slope;
        if let Some(res) = self.resonance {
            let x = energy - res.center;
            d += res.width / (x * x + res.width * res.width);
        }
        d
    }
}

/// K(E) = O · diag(tan δ_α(E)) · Oᵀ with a fixed orthogonal O.
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionModel {
    mixing: DMatrix<f64>,
    phases: Vec<Eigenphase>,
}

impl ReactionModel {
    pub fn new(mixing: DMatrix<f64>, phases: Vec<Eigenphase>) -> Result<Self> {
        let n = phases.len();
        if mixing.nrows() != n || mixing.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "reaction-model mixing matrix",
                expected: n,
                found: mixing.nrows().max(mixing.ncols()),
            });
        }
        let defect = (&mixing * mixing.transpose() - DMatrix::identity(n, n)).amax();
        if defect > 1e-12 {
            return Err(Error::InputData(format!("mixing matrix is not orthogonal (defect {defect:.3e})")));
        }
        for p in &phases {
            if let Some(res) = p.resonance {
                if !(res.width > 0.0) {
                    return Err(Error::InputData(format!("resonance width must be positive, got {}", res.width)));
                }
            }
            if !(p.base.is_finite() && p.slope.is_finite()) {
                return Err(Error::InputData("eigenphase parameters must be finite".into()));
            }
        }
        Ok(Self { mixing, phases })
    }

    /// Mixing built as the ordered product of Givens rotations over the
    /// channel pairs (0,1), (0,2), …, (1,2), … with the given angles (radians).
    pub fn from_angles(angles: &[f64], phases: Vec<Eigenphase>) -> Result<Self> {
        let n = phases.len();
        let pairs = n * n.saturating_sub(1) / 2;
        if angles.len() != pairs {
            return Err(Error::DimensionMismatch {
                context: "mixing angles",
                expected: pairs,
                found: angles.len(),
            });
        }
        let mut o = DMatrix::<f64>::identity(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let (s, c) = angles[k].sin_cos();
                let mut rot = DMatrix::<f64>::identity(n, n);
                rot[(i, i)] = c;
                rot[(j, j)] = c;
                rot[(i, j)] = -s;
                rot[(j, i)] = s;
                o = o * rot;
                k += 1;
            }
        }
        Self::new(o, phases)
    }

    /// K = 0 in every channel.
    pub fn uncoupled(n: usize) -> Self {
        Self {
            mixing: DMatrix::identity(n, n),
            phases: vec![Eigenphase::default(); n],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.phases.len()
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn phases(&self) -> &[Eigenphase] {
        &self.phases
    }

    pub fn eigenphases(&self, energy: f64) -> Vec<f64> {
        self.phases.iter().map(|p| p.at(energy)).collect()
    }

    /// Σ_α dδ_α/dE, the short-range contribution to the density of states times π.
    pub fn phase_derivative_sum(&self, energy: f64) -> f64 {
        self.phases.iter().map(|p| p.derivative(energy)).sum()
    }

    /// Symmetric reaction matrix; errors at an eigenphase pole.
    pub fn k_of_e(&self, energy: f64) -> Result<DMatrix<f64>> {
        let n = self.n_channels();
        let mut tans = Vec::with_capacity(n);
        for (alpha, delta) in self.eigenphases(energy).into_iter().enumerate() {
            let off = (delta - std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
            if off.min(std::f64::consts::PI - off) <= POLE_GUARD {
                return Err(Error::KMatrixPole { channel: alpha, energy });
            }
            tans.push(delta.tan());
        }
        let o = &self.mixing;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|a| o[(i, a)] * tans[a] * o[(j, a)]).sum();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }
}
