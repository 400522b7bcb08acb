//! Exact von Neumann meter with coupling `exp(−i g A X)`.
//!
//! Works with a Hermitian coefficient-space operator A′ and unit pre/post
//! vectors, so ordinary unitarity and the Born rule apply. After
//! postselection the pointer wavefunction is
//! `c(X) = Φ(X) Σ_j (b′ᴴv_j)(v_jᴴa′) e^{−i g λ_j X}`.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, I};
use crate::par::{self, Execution};

/// Probability of the postselection below which the run is rejected.
pub const MIN_POSTSELECTION: f64 = 1e-12;
/// Pointer momenta must stay below this fraction of the Nyquist wavenumber.
const NYQUIST_MARGIN: f64 = 0.5;
/// Pointer-momentum spread multiples included in the Nyquist check.
const MOMENTUM_SPREADS: f64 = 10.0;

/// Real zero-mean Gaussian pointer `Φ(X) = (2πσ²)^{-1/4} exp(−X²/4σ²)` on a
/// uniform grid symmetric about 0; σ² is the variance of |Φ|².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterState {
    pub sigma: f64,
    #[serde(default = "MeterState::default_points")]
    pub n_points: usize,
    /// Grid half-width in units of σ.
    #[serde(default = "MeterState::default_half_width")]
    pub half_width: f64,
}

impl MeterState {
    fn default_points() -> usize {
        4096
    }

    fn default_half_width() -> f64 {
        16.0
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            sigma,
            n_points: Self::default_points(),
            half_width: Self::default_half_width(),
        }
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width * self.sigma / self.n_points as f64
    }

    /// X_i = −L + i·dx, i = 0..n; symmetric about 0 for even n.
    pub fn positions(&self) -> Vec<f64> {
        let l = self.half_width * self.sigma;
        (0..self.n_points).map(|i| -l + i as f64 * self.dx()).collect()
    }

    pub fn profile(&self, x: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (2.0 * std::f64::consts::PI * s2).powf(-0.25) * (-x * x / (4.0 * s2)).exp()
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.half_width > 0.0 && self.n_points >= 16 && self.n_points % 2 == 0) {
            return Err(Error::InputData(format!(
                "meter needs sigma > 0, half_width > 0 and an even number (≥ 16) of points, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Pointer shifts relative to the uncoupled meter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeterShift {
    pub g: f64,
    pub dx: f64,
    pub dp: f64,
    pub p_post: f64,
}

struct Moments {
    norm: f64,
    x: f64,
    p: f64,
}

fn moments(meter: &MeterState, psi: &[C64], planner: &mut FftPlanner<f64>) -> Moments {
    let xs = meter.positions();
    let dx = meter.dx();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
    let x = psi.iter().zip(&xs).map(|(z, &x)| z.norm_sqr() * x).sum::<f64>() * dx / norm;

    let n = psi.len();
    let mut buf = psi.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    let (mut num, mut den) = (0.0, 0.0);
    for (m, z) in buf.iter().enumerate() {
        // the Nyquist bin is ambiguous in sign; it carries no weight for a resolved pointer
        if 2 * m == n {
            continue;
        }
        let k = if 2 * m < n { m as f64 } else { m as f64 - n as f64 } * dk;
        num += k * z.norm_sqr();
        den += z.norm_sqr();
    }
    Moments { norm, x, p: num / den }
}

/// Simulates the coupling `exp(−i g A′ X)` followed by postselection on
/// `post`, with `pre` as the system state at the measurement time.
/// Both vectors are normalized internally; `action` must be Hermitian.
pub fn meter_simulate(action: &CMat, pre: &CVec, post: &CVec, g: f64, meter: &MeterState) -> Result<MeterShift> {
    meter.validate()?;
    let n = action.nrows();
    if pre.len() != n || post.len() != n {
        return Err(Error::DimensionMismatch {
            context: "meter system vectors",
            expected: n,
            found: pre.len().max(post.len()),
        });
    }
    let (vals, vecs) = linalg::hermitian_eigen(action);
    let spectral_radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k_max = g.abs() * spectral_radius + MOMENTUM_SPREADS / (2.0 * meter.sigma);
    if k_max > NYQUIST_MARGIN * meter.nyquist() {
        return Err(Error::Nyquist {
            wavenumber: k_max,
            nyquist: meter.nyquist(),
        });
    }
    let a = pre.unscale(pre.norm());
    let b = post.unscale(post.norm());
    let weights: Vec<C64> = (0..n)
        .map(|j| {
            let v = vecs.column(j);
            b.dotc(&v) * v.dotc(&a)
        })
        .collect();

    let mut planner = FftPlanner::new();
    let xs = meter.positions();
    let pointer = |coupling: f64| -> Vec<C64> {
        xs.iter()
            .map(|&x| {
                let s: C64 = weights
                    .iter()
                    .zip(vals.iter())
                    .map(|(w, &lam)| w * (-I * (coupling * lam * x)).exp())
                    .sum();
                s * meter.profile(x)
            })
            .collect()
    };
    let coupled = moments(meter, &pointer(g), &mut planner);
    if !(coupled.norm >= MIN_POSTSELECTION) {
        return Err(Error::PostSelection {
            probability: coupled.norm,
        });
    }
    let free = moments(meter, &pointer(0.0), &mut planner);
    Ok(MeterShift {
        g,
        dx: coupled.x - free.x,
        dp: coupled.p - free.p,
        p_post: coupled.norm,
    })
}

/// One simulation per coupling strength.
pub fn meter_sweep(action: &CMat, pre: &CVec, post: &CVec, gs: &[f64], meter: &MeterState, exec: Execution) -> Vec<Result<MeterShift>> {
    par::map(exec, gs, |&g| meter_simulate(action, pre, post, g, meter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn two_level() -> CMat {
        CMat::from_row_slice(2, 2, &[c(1.0), C64::new(0.3, -0.2), C64::new(0.3, 0.2), c(-0.5)])
    }

    #[test]
    fn eigenstate_shift_is_exact() {
        let a = two_level();
        let (vals, vecs) = linalg::hermitian_eigen(&a);
        let v = vecs.column(1).into_owned();
        let meter = MeterState::gaussian(1.0);
        for g in [0.01, 0.1, 0.5] {
            let s = meter_simulate(&a, &v, &v, g, &meter).unwrap();
            assert!((s.dp + g * vals[1]).abs() < 1e-10, "{} vs {}", s.dp, -g * vals[1]);
            assert!(s.dx.abs() < 1e-10);
            assert!((s.p_post - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn weak_limit_matches_weak_value() {
        let a = two_level();
        let pre = CVec::from_vec(vec![c(0.8), C64::new(0.0, 0.6)]);
        let post = CVec::from_vec(vec![c(0.6), c(0.8)]);
        let wv = post.dotc(&(&a * &pre)) / post.dotc(&pre);
        let meter = MeterState::gaussian(1.0);
        let g = 1e-3;
        let s = meter_simulate(&a, &pre, &post, g, &meter).unwrap();
        assert!((s.dp / g + wv.re).abs() < 1e-3 * wv.norm());
        assert!((s.dx / (2.0 * g) - wv.im).abs() < 1e-3 * wv.norm());
    }

    #[test]
    fn nyquist_violation_rejected() {
        let a = two_level();
        let v = CVec::from_vec(vec![c(1.0), c(0.0)]);
        let meter = MeterState { sigma: 1.0, n_points: 64, half_width: 16.0 };
        assert!(matches!(meter_simulate(&a, &v, &v, 100.0, &meter), Err(Error::Nyquist { .. })));
    }
}
