//! Radial solutions of `u'' = 2 (V(r) − ϵ) u` with `V = −Z/r + ℓ(ℓ+1)/2r²`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::scatter::RadialGrid;

/// Relative Wronskian drift tolerated along the grid.
pub const WRONSKIAN_TOL: f64 = 1e-6;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RK4_SUBSTEPS: usize = 64;
/// e-folds of decay below the matching point kept by the inward solution.
const INWARD_DEPTH: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub z_core: f64,
    pub l: u32,
}

impl Potential {
    pub fn coulomb(z_core: f64) -> Self {
        Self { z_core, l: 0 }
    }

    pub fn free() -> Self {
        Self { z_core: 0.0, l: 0 }
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let l = self.l as f64;
        -self.z_core / r + l * (l + 1.0) / (2.0 * r * r)
    }

    /// q(r) = 2 (V(r) − ϵ), so that u'' = q u.
    #[inline]
    pub fn q(&self, r: f64, eps: f64) -> f64 {
        2.0 * (self.value(r) - eps)
    }

    /// Outermost classical turning point at channel energy `eps < 0`, or
    /// `None` when the motion is classically forbidden everywhere.
    pub fn outer_turning_point(&self, eps: f64) -> Option<f64> {
        let half_l = (self.l * (self.l + 1)) as f64 / 2.0;
        if eps >= 0.0 {
            return Some(f64::INFINITY);
        }
        // eps r² + Z r − ℓ(ℓ+1)/2 = 0, larger root
        let disc = self.z_core * self.z_core + 4.0 * eps * half_l;
        if disc < 0.0 {
            return None;
        }
        let root = (-self.z_core - disc.sqrt()) / (2.0 * eps);
        (root > 0.0).then_some(root)
    }
}

/// Which pair of independent solutions the reaction matrix refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePair {
    /// Energy-analytic Coulomb functions: `f` regular at the origin and `g`
    /// the irregular partner normalized so that a constant K = tan(πμ) gives
    /// the levels E = −Z²/2(n−μ)². Requires ℓ = 0.
    #[default]
    Coulomb,
    /// Value/slope initial conditions at r0: f(r0)=0, f'(r0)=1, g(r0)=1, g'(r0)=0.
    Anchored,
}

/// Value and derivative at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cauchy {
    pub value: f64,
    pub slope: f64,
}

impl ReferencePair {
    pub fn initial_conditions(self, pot: &Potential, eps: f64, r0: f64) -> Result<(Cauchy, Cauchy)> {
        match self {
            ReferencePair::Anchored => Ok((
                Cauchy { value: 0.0, slope: 1.0 },
                Cauchy { value: 1.0, slope: 0.0 },
            )),
            ReferencePair::Coulomb => {
                if pot.l != 0 || pot.z_core <= 0.0 {
                    return Err(Error::InputData(
                        "Coulomb reference pair needs an attractive Coulomb tail with l = 0".into(),
                    ));
                }
                if eps >= 0.0 {
                    return Err(Error::InputData(format!(
                        "Coulomb reference pair is defined for closed channels, got eps = {eps:e}"
                    )));
                }
                Ok(coulomb_pair_at(pot.z_core, eps, r0))
            }
        }
    }
}

/// Energy-analytic Coulomb pair (F, G) for ℓ = 0 evaluated at `r` by power
/// series. W(F, G) = −1/2π and the decaying solution is ∝ sin(πν) G − cos(πν) F
/// with ν = Z/√(−2ϵ).
pub fn coulomb_pair_at(z: f64, eps: f64, r: f64) -> (Cauchy, Cauchy) {
    // Scale to unit charge: ρ = Z r, e = ϵ/Z².
    let rho = z * r;
    let e = eps / (z * z);
    let nu = 1.0 / (-2.0 * e).sqrt();
    let (f, df, g, dg) = unit_charge_series(e, rho);
    let shift = 2.0 * (digamma(nu) - nu.ln() + 0.5 / nu);
    let two_pi = 2.0 * std::f64::consts::PI;
    let big_g = (g - shift * f) / two_pi;
    let big_dg = (dg - shift * df) / two_pi;
    (
        Cauchy {
            value: f / z,
            slope: df,
        },
        Cauchy {
            value: big_g,
            slope: z * big_dg,
        },
    )
}

/// Regular solution f = ρ + … and Frobenius partner g = −2 f ln ρ + Σ b_k ρ^k
/// (b₀ = 1, b₁ = 2 − 4γ − 2 ln 2) of u'' + (2/ρ + 2e) u = 0, with derivatives.
fn unit_charge_series(e: f64, rho: f64) -> (f64, f64, f64, f64) {
    const MAX_TERMS: usize = 2000;
    let c_log = -2.0;
    let mut a = vec![0.0, 1.0];
    let mut b = vec![1.0, 2.0 - 4.0 * EULER_GAMMA - 2.0 * std::f64::consts::LN_2];

    let (mut f, mut df) = (rho, 1.0);
    let (mut gs, mut dgs) = (b[0] + b[1] * rho, b[1]);
    let mut pow = rho; // rho^k for current k
    let mut scale = 1.0f64;
    let mut quiet = 0;
    for k in 1..MAX_TERMS {
        // a_{k+1}, b_{k+1}
        let kf = k as f64;
        let a_next = -(2.0 * a[k] + 2.0 * e * a[k - 1]) / ((kf + 1.0) * kf);
        a.push(a_next);
        let b_next = -(c_log * (2.0 * kf + 1.0) * a[k + 1] + 2.0 * b[k] + 2.0 * e * b[k - 1]) / (kf * (kf + 1.0));
        b.push(b_next);

        let dterm_pow = pow; // rho^k, used for derivative of rho^{k+1}
        pow *= rho;
        let ta = a_next * pow;
        let tb = b_next * pow;
        f += ta;
        gs += tb;
        df += (kf + 1.0) * a_next * dterm_pow;
        dgs += (kf + 1.0) * b_next * dterm_pow;
        scale = scale.max(f.abs()).max(gs.abs()).max(ta.abs()).max(tb.abs());
        if ta.abs().max(tb.abs()) < 1e-18 * scale && kf > 2.0 * rho.sqrt() + 8.0 {
            quiet += 1;
            if quiet > 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let ln_rho = rho.ln();
    let g = c_log * f * ln_rho + gs;
    let dg = c_log * (df * ln_rho + f / rho) + dgs;
    (f, df, g, dg)
}

/// A solution sampled on grid points `first..=last`.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub first: usize,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl GridSolution {
    pub fn last(&self) -> usize {
        self.first + self.values.len() - 1
    }

    pub fn at(&self, index: usize) -> Cauchy {
        let k = index - self.first;
        Cauchy {
            value: self.values[k],
            slope: self.slopes[k],
        }
    }
}

/// Potential sampled on a grid for one channel, reused across energies.
#[derive(Clone, Debug)]
pub struct ChannelTable {
    grid: RadialGrid,
    pot: Potential,
    v: Vec<f64>,
}

impl ChannelTable {
    pub fn new(grid: RadialGrid, pot: Potential) -> Self {
        let v = (0..grid.n_pts()).map(|i| pot.value(grid.r(i))).collect();
        Self { grid, pot, v }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    #[inline]
    fn q(&self, i: usize, eps: f64) -> f64 {
        2.0 * (self.v[i] - eps)
    }

    fn rk4_first_step(&self, eps: f64, start: Cauchy) -> (f64, f64) {
        let h = self.grid.step();
        let dh = h / RK4_SUBSTEPS as f64;
        let (mut y, mut p) = (start.value, start.slope);
        let mut r = self.grid.r0();
        let rhs = |r: f64, y: f64, p: f64| (p, self.pot.q(r, eps) * y);
        for _ in 0..RK4_SUBSTEPS {
            let (k1y, k1p) = rhs(r, y, p);
            let (k2y, k2p) = rhs(r + dh / 2.0, y + dh / 2.0 * k1y, p + dh / 2.0 * k1p);
            let (k3y, k3p) = rhs(r + dh / 2.0, y + dh / 2.0 * k2y, p + dh / 2.0 * k2p);
            let (k4y, k4p) = rhs(r + dh, y + dh * k3y, p + dh * k3p);
            y += dh / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            p += dh / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            r += dh;
        }
        (y, p)
    }

    /// Integrates outward from grid point 0 with the given value/slope up to
    /// grid point `last` (inclusive) by Numerov, the first step by RK4.
    pub fn outward(&self, eps: f64, start: Cauchy, last: usize) -> GridSolution {
        let n = last + 1;
        let h = self.grid.step();
        let h2 = h * h;
        let q: Vec<f64> = (0..=n.min(self.grid.n_pts() - 1)).map(|i| self.q(i, eps)).collect();
        let mut y = vec![0.0; q.len()];
        y[0] = start.value;
        if q.len() > 1 {
            y[1] = self.rk4_first_step(eps, start).0;
        }
        for i in 1..q.len() - 1 {
            let a = 1.0 - h2 * q[i + 1] / 12.0;
            let b = 2.0 * (1.0 + 5.0 * h2 * q[i] / 12.0) * y[i];
            let cc = (1.0 - h2 * q[i - 1] / 12.0) * y[i - 1];
            y[i + 1] = (b - cc) / a;
        }
        let mut slopes = vec![0.0; n];
        slopes[0] = start.slope;
        for i in 1..n {
            slopes[i] = if i + 1 < y.len() {
                numerov_slope(h, y[i - 1], q[i - 1], y[i + 1], q[i + 1])
            } else {
                backward_slope(h, y[i - 1], q[i - 1], y[i], q[i])
            };
        }
        y.truncate(n);
        GridSolution {
            first: 0,
            values: y,
            slopes,
        }
    }

    /// Decaying solution on grid points `first..` normalized to 1 at `first`.
    /// Integration starts where the WKB decay measured from `first` reaches
    /// e^{−INWARD_DEPTH}, or at Rmax if that comes first, from the WKB ratio
    /// of a decaying exponential. Points beyond the start are zero.
    pub fn inward(&self, eps: f64, first: usize) -> Result<GridSolution> {
        let last = self.grid.n_pts() - 1;
        let h = self.grid.step();
        let h2 = h * h;
        if self.q(last, eps) <= 0.0 {
            return Err(Error::InputData(format!(
                "channel energy {eps:.6e} is classically allowed at Rmax; enlarge the box"
            )));
        }
        let mut top = first + 1;
        let mut depth = 0.0;
        let mut kappa_prev = self.q(first, eps).max(0.0).sqrt();
        while top < last && depth < INWARD_DEPTH {
            let kappa = self.q(top, eps).max(0.0).sqrt();
            depth += 0.5 * h * (kappa + kappa_prev);
            kappa_prev = kappa;
            top += 1;
        }
        let lo = first.saturating_sub(1);
        let q: Vec<f64> = (lo..=last).map(|i| self.q(i, eps)).collect();
        let off = |i: usize| i - lo;
        let mut y = vec![0.0; q.len()];
        y[off(top)] = 1e-280;
        let kappa_n = q[off(top)].max(0.0).sqrt();
        let kappa_p = q[off(top - 1)].max(0.0).sqrt();
        let growth = if kappa_p > 0.0 && kappa_n > 0.0 {
            (kappa_n / kappa_p).sqrt() * (0.5 * h * (kappa_n + kappa_p)).exp()
        } else {
            (h * kappa_n.max(kappa_p)).exp()
        };
        y[off(top - 1)] = y[off(top)] * growth;
        let mut i = top - 1;
        while i > lo {
            let a = 1.0 - h2 * q[off(i - 1)] / 12.0;
            let b = 2.0 * (1.0 + 5.0 * h2 * q[off(i)] / 12.0) * y[off(i)];
            let cc = (1.0 - h2 * q[off(i + 1)] / 12.0) * y[off(i + 1)];
            let next = (b - cc) / a;
            if !next.is_finite() {
                return Err(Error::Overflow { energy: eps });
            }
            y[off(i - 1)] = next;
            if next.abs() > 1e200 {
                let s = next.abs();
                for v in &mut y[off(i - 1)..=off(top)] {
                    *v /= s;
                }
            }
            i -= 1;
        }
        let norm = y[off(first)];
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Overflow { energy: eps });
        }
        for v in &mut y[..=off(top)] {
            *v /= norm;
        }
        let mut slopes = vec![0.0; last - first + 1];
        for i in first..=top {
            slopes[i - first] = if i > lo && i < last {
                numerov_slope(h, y[off(i - 1)], q[off(i - 1)], y[off(i + 1)], q[off(i + 1)])
            } else if i == last {
                backward_slope(h, y[off(i - 1)], q[off(i - 1)], y[off(i)], q[off(i)])
            } else {
                forward_slope(h, y[off(i)], q[off(i)], y[off(i + 1)], q[off(i + 1)])
            };
        }
        let values = y[off(first)..].to_vec();
        Ok(GridSolution {
            first,
            values,
            slopes,
        })
    }

    /// Reference pair on points `0..=last` with the Wronskian check.
    pub fn pair(&self, eps: f64, reference: ReferencePair, last: usize) -> Result<RadialPair> {
        let (fs, gs) = reference.initial_conditions(&self.pot, eps, self.grid.r0())?;
        let f = self.outward(eps, fs, last);
        let g = self.outward(eps, gs, last);
        let w0 = wronskian(fs, gs);
        let mut drift: f64 = 0.0;
        for i in 0..=last {
            let (a, b) = (f.at(i), g.at(i));
            let w = wronskian(a, b);
            let products = (a.value * b.slope).abs() + (a.slope * b.value).abs();
            drift = drift.max((w - w0).abs() / w0.abs().max(products));
        }
        if drift > WRONSKIAN_TOL {
            return Err(Error::GridResolution {
                drift,
                tolerance: WRONSKIAN_TOL,
            });
        }
        Ok(RadialPair {
            f,
            g,
            wronskian: w0,
            wronskian_drift: drift,
        })
    }
}

/// Fourth-order slope from Numerov samples:
/// y'_i = [(y_{i+1} − h²q_{i+1}y_{i+1}/6) − (y_{i−1} − h²q_{i−1}y_{i−1}/6)] / 2h.
fn numerov_slope(h: f64, ym: f64, qm: f64, yp: f64, qp: f64) -> f64 {
    let h2 = h * h;
    ((yp - h2 * qp * yp / 6.0) - (ym - h2 * qm * ym / 6.0)) / (2.0 * h)
}

fn backward_slope(h: f64, ym: f64, qm: f64, y: f64, q: f64) -> f64 {
    (y - ym) / h + h * (q * y) / 3.0 + h * (qm * ym) / 6.0
}

fn forward_slope(h: f64, y: f64, q: f64, yp: f64, qp: f64) -> f64 {
    (yp - y) / h - h * (q * y) / 3.0 - h * (qp * yp) / 6.0
}

/// Two independent solutions on the whole grid.
#[derive(Clone, Debug)]
pub struct RadialPair {
    pub f: GridSolution,
    pub g: GridSolution,
    /// W(f, g) at r0.
    pub wronskian: f64,
    /// Largest deviation of W(f, g) from its value at r0, relative to
    /// max(|W|, |f g'| + |f' g|). Where both functions grow the second scale
    /// dominates: W is then a cancellation and only its relative accuracy
    /// against the products is observable.
    pub wronskian_drift: f64,
}

pub fn wronskian(a: Cauchy, b: Cauchy) -> f64 {
    a.value * b.slope - a.slope * b.value
}

/// Computes the reference pair at channel energy `eps` on the whole grid and
/// checks that their Wronskian stays constant.
pub fn radial_pair(grid: &RadialGrid, pot: &Potential, eps: f64, reference: ReferencePair) -> Result<RadialPair> {
    ChannelTable::new(*grid, *pot).pair(eps, reference, grid.n_pts() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_particle_at_zero_energy_is_linear() {
        let grid = RadialGrid::new(10.0, 50.0, 401).unwrap();
        let pair = radial_pair(&grid, &Potential::free(), 0.0, ReferencePair::Anchored).unwrap();
        for i in 0..grid.n_pts() {
            let r = grid.r(i);
            assert!((pair.f.values[i] - (r - 10.0)).abs() < 1e-11, "f at {r}");
            assert!((pair.g.values[i] - 1.0).abs() < 1e-12);
            assert!((pair.f.slopes[i] - 1.0).abs() < 1e-10);
        }
        assert_eq!(pair.wronskian, -1.0);
    }

    #[test]
    fn coulomb_pair_series_satisfies_the_ode() {
        // Finite-difference check of u'' = q u on the series itself.
        for &(eps, r) in &[(-0.005, 1.0), (-0.02, 4.0), (-0.00125, 10.0)] {
            let pot = Potential::coulomb(1.0);
            let d = 1e-3;
            for pick in 0..2 {
                let val = |x: f64| {
                    let (f, g) = coulomb_pair_at(1.0, eps, x);
                    if pick == 0 { f.value } else { g.value }
                };
                let second = (val(r + d) - 2.0 * val(r) + val(r - d)) / (d * d);
                let expect = pot.q(r, eps) * val(r);
                assert!((second - expect).abs() < 1e-5 * (1.0 + expect.abs()), "eps {eps} r {r} pick {pick}: {second} vs {expect}");
            }
        }
    }

    #[test]
    fn coulomb_pair_wronskian_is_constant() {
        let target = -1.0 / (2.0 * std::f64::consts::PI);
        for &(z, eps, r) in &[(1.0, -0.005, 0.5), (1.0, -0.03, 6.0), (2.0, -0.02, 3.0)] {
            let (f, g) = coulomb_pair_at(z, eps, r);
            assert!((wronskian(f, g) - target).abs() < 1e-11, "{z} {eps} {r}: {}", wronskian(f, g));
        }
    }

    #[test]
    fn turning_points() {
        let p = Potential::coulomb(1.0);
        assert!((p.outer_turning_point(-0.005).unwrap() - 200.0).abs() < 1e-9);
        let p = Potential { z_core: 1.0, l: 1 };
        let r = p.outer_turning_point(-0.005).unwrap();
        assert!(p.value(r) - -0.005 < 1e-12);
    }
}
