//! Built-in oracles run by `qhweak selftest`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::Result;
use crate::linalg::{self, CMat, CVec, C64};
use crate::metric::{dual_states, gram_from_states, quasi_hermiticity_residual, BiorthoBasis, CoeffVector, MetricWorkspace, DEFAULT_TOL};
use crate::observables::{ObservableKind, ObservableRep};
use crate::par::Execution;
use crate::scatter::Eigenphase;
use crate::weakmeas::{corrected_via_hermitized, weak_value, DENOMINATOR_FLOOR};

pub const SIMILARITY_INSTANCES: usize = 100;
pub const SIMILARITY_TOL: f64 = 1e-9;
pub const HYDROGENIC_TOL: f64 = 1e-6;
pub const DEFECT_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    linalg::hermitian_part(&random_complex(rng, n, n))
}

/// A random well-conditioned invertible matrix, identity plus a bounded
/// perturbation, with unit columns.
pub fn random_similarity(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let mut t = CMat::identity(n, n) + random_complex(rng, n, n) * C64::new(0.4 / (n as f64).sqrt(), 0.0);
    for mut col in t.column_iter_mut() {
        let norm = col.norm();
        col /= C64::new(norm, 0.0);
    }
    t
}

/// Largest deviation over one random instance: metric vs T·Tᴴ, duals vs
/// (T⁻¹)ᴴ, quasi-Hermiticity of T·H·T⁻¹ under T·Tᴴ, and the two forms of the
/// corrected weak value.
pub fn similarity_instance(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=12);
    let t = random_similarity(&mut rng, n);
    let t_inv = t.clone().try_inverse().expect("perturbed identity is invertible");
    let mut energies: Vec<f64> = Vec::with_capacity(n);
    let mut e = rng.gen_range(-1.0..0.0);
    for _ in 0..n {
        e += rng.gen_range(0.1..1.0);
        energies.push(e);
    }
    let basis = BiorthoBasis::from_columns(energies.clone(), t.clone(), vec![1.0; n])?;
    let work = MetricWorkspace::decompose(gram_from_states(&basis)?, DEFAULT_TOL)?;

    let g = &t * t.adjoint();
    let mut worst = linalg::max_abs_diff(&basis.metric_operator(), &g);
    worst = worst.max(linalg::max_abs_diff(&dual_states(&basis, &work), &t_inv.adjoint()));
    let h_tilde = &t * random_hermitian(&mut rng, n) * &t_inv;
    worst = worst.max(quasi_hermiticity_residual(&g, &h_tilde)?);

    let a = random_hermitian(&mut rng, n);
    let obs = ObservableRep::from_grid_matrix(ObservableKind::Custom, &a, &basis, &work)?;
    let pre = CoeffVector::new(CVec::from_iterator(n, random_complex(&mut rng, n, 1).iter().copied()))?;
    let post = CoeffVector::new(CVec::from_iterator(n, random_complex(&mut rng, n, 1).iter().copied()))?;
    let time = rng.gen_range(0.0..10.0);
    let direct = weak_value(&obs, &energies, &pre, &post, time, &work, DENOMINATOR_FLOOR)?.corrected;
    let hermitized = corrected_via_hermitized(&obs, &energies, &pre, &post, time, &work)?;
    worst = worst.max((direct - hermitized).norm() / direct.norm().max(1.0));
    Ok(worst)
}

pub fn similarity_oracle(seed: u64) -> Check {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for i in 0..SIMILARITY_INSTANCES as u64 {
        match similarity_instance(seed.wrapping_add(i)) {
            Ok(d) => worst = worst.max(d),
            Err(e) => {
                failure = Some(format!("instance {i}: {e}"));
                break;
            }
        }
    }
    match failure {
        Some(msg) => Check {
            name: "similarity oracle",
            passed: false,
            detail: msg,
        },
        None => Check {
            name: "similarity oracle",
            passed: worst < SIMILARITY_TOL,
            detail: format!("{SIMILARITY_INSTANCES} instances, worst deviation {worst:.3e} (tolerance {SIMILARITY_TOL:.0e})"),
        },
    }
}

/// Single Coulomb channel: bound energies for n = 5..12 against −1/(2n²)
/// with K = 0, and against −1/(2(n − μ)²) with K = tan(πμ).
pub fn hydrogenic_oracle(defect: f64, tol: f64) -> Check {
    let name = if defect == 0.0 { "hydrogenic spectrum" } else { "quantum-defect spectrum" };
    let run = || -> Result<(usize, f64)> {
        let mut cfg = RunConfig::hydrogenic();
        cfg.grid.r_max = 1000.0;
        cfg.grid.n_pts = 19_981;
        cfg.reaction.phases = vec![Eigenphase::constant(PI * defect)];
        cfg.window.e_min = -0.5 / (4.5 - defect).powi(2);
        cfg.window.e_max = -0.5 / (12.5 - defect).powi(2);
        let found = cfg.system()?.find_bound_states(cfg.window(), Execution::default())?;
        let mut worst: f64 = 0.0;
        for (s, n) in found.states.iter().zip(5..) {
            let exact = -0.5 / (n as f64 - defect).powi(2);
            worst = worst.max((s.energy / exact - 1.0).abs());
        }
        Ok((found.states.len(), worst))
    };
    match run() {
        Ok((count, worst)) => Check {
            name,
            passed: count == 8 && worst < tol,
            detail: format!("{count} levels for n = 5..12, worst relative error {worst:.3e} (tolerance {tol:.0e})"),
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        similarity_oracle(seed),
        hydrogenic_oracle(0.0, HYDROGENIC_TOL),
        hydrogenic_oracle(0.3, DEFECT_TOL),
    ]
}
