use crate::error::{Error, Result};
use crate::linalg::I;
use crate::metric::CoeffVector;

/// Autocorrelation level a revival has to reach.
pub const RECURRENCE_THRESHOLD: f64 = 0.8;
const SCAN_DIVISIONS: f64 = 200.0;

/// |aᴴ e^{−iEt} a| / aᴴa
pub fn autocorrelation(a: &CoeffVector, energies: &[f64], t: f64) -> f64 {
    let v = a.as_vector();
    let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let amp: crate::linalg::C64 = v
        .iter()
        .zip(energies)
        .map(|(z, &e)| (-I * (e * t)).exp() * z.norm_sqr())
        .sum();
    amp.norm() / norm2
}

/// Weighted mean energy Σ|a_k|² E_k / Σ|a_k|².
pub fn mean_energy(a: &CoeffVector, energies: &[f64]) -> f64 {
    let v = a.as_vector();
    let w: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    v.iter().zip(energies).map(|(z, &e)| z.norm_sqr() * e).sum::<f64>() / w
}

/// Kepler period 2π ν̄³/Z² with ν̄ = Z/√(2(threshold − Ē)).
pub fn kepler_period(mean_energy: f64, threshold: f64, z_core: f64) -> f64 {
    let nu = z_core / (2.0 * (threshold - mean_energy)).sqrt();
    2.0 * std::f64::consts::PI * nu.powi(3) / (z_core * z_core)
}

/// First local maximum of the autocorrelation above
/// [`RECURRENCE_THRESHOLD`] after `t_est/2`, scanning in steps of
/// `t_est/200` up to `horizon` and refining by golden-section search.
pub fn recurrence_time(a: &CoeffVector, energies: &[f64], t_est: f64, horizon: f64) -> Result<f64> {
    if !(t_est > 0.0 && t_est.is_finite()) {
        return Err(Error::InputData(format!("recurrence estimate must be positive, got {t_est}")));
    }
    let f = |t: f64| autocorrelation(a, energies, t);
    let step = t_est / SCAN_DIVISIONS;
    let mut t = 0.5 * t_est;
    let (mut prev, mut cur) = (f(t - step), f(t));
    while t + step <= horizon {
        let next = f(t + step);
        if cur > RECURRENCE_THRESHOLD && cur >= prev && cur >= next {
            return Ok(golden_max(&f, t - step, t + step));
        }
        prev = cur;
        cur = next;
        t += step;
    }
    Err(Error::NoRecurrence {
        threshold: RECURRENCE_THRESHOLD,
        horizon,
    })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec};

    #[test]
    fn two_state_beat_period() {
        let a = CoeffVector::new(CVec::from_vec(vec![c(0.6), c(0.8)])).unwrap();
        let e = [-0.02, -0.015];
        let period = 2.0 * std::f64::consts::PI / 0.005;
        let t = recurrence_time(&a, &e, period * 1.1, 10.0 * period).unwrap();
        // golden-section resolves a smooth maximum to about sqrt(machine epsilon)
        assert!((t / period - 1.0).abs() < 1e-7, "{t} vs {period}");
    }

    #[test]
    fn no_recurrence_reported() {
        let a = CoeffVector::new(CVec::from_vec(vec![c(0.6), c(0.8)])).unwrap();
        let e = [-0.02, -0.015];
        let period = 2.0 * std::f64::consts::PI / 0.005;
        assert!(matches!(
            recurrence_time(&a, &e, period, 0.9 * period),
            Err(Error::NoRecurrence { .. })
        ));
    }

    #[test]
    fn kepler_period_at_nu_ten() {
        let t = kepler_period(-0.005, 0.0, 1.0);
        assert!((t - 2000.0 * std::f64::consts::PI).abs() < 1e-9);
    }
}
