//! Bound-state search against closed-form Coulomb levels and the desk model's
//! numerical invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use qhweak::config::RunConfig;
use qhweak::par::Execution;
use qhweak::scatter::radial::{radial_pair, WRONSKIAN_TOL};
use qhweak::scatter::{BoundSearch, Eigenphase, ScatteringSystem, DECAY_TOL};
use qhweak::selftest::{hydrogenic_oracle, DEFECT_TOL, HYDROGENIC_TOL};

fn constant_defect(mu: f64, nu_lo: f64, nu_hi: f64) -> RunConfig {
    let mut cfg = RunConfig::hydrogenic();
    cfg.reaction.phases = vec![Eigenphase::constant(PI * mu)];
    cfg.window.e_min = -0.5 / nu_lo.powi(2);
    cfg.window.e_max = -0.5 / nu_hi.powi(2);
    cfg
}

fn desk() -> &'static (ScatteringSystem, BoundSearch) {
    static DESK: OnceLock<(ScatteringSystem, BoundSearch)> = OnceLock::new();
    DESK.get_or_init(|| {
        let cfg = RunConfig::desk();
        let system = cfg.system().unwrap();
        let search = system.find_bound_states(cfg.window(), Execution::Parallel).unwrap();
        (system, search)
    })
}

#[test]
fn hydrogen_levels_n5_to_n12() {
    let check = hydrogenic_oracle(0.0, HYDROGENIC_TOL);
    assert!(check.passed, "{}", check.detail);
}

#[test]
fn quantum_defect_levels_n5_to_n12() {
    let check = hydrogenic_oracle(0.3, DEFECT_TOL);
    assert!(check.passed, "{}", check.detail);
}

#[test]
fn fitted_defect_is_constant_across_n() {
    for mu in [0.05, 0.25, 0.45, 0.8] {
        let cfg = constant_defect(mu, 4.5 - mu, 20.5 - mu);
        let found = cfg.system().unwrap().find_bound_states(cfg.window(), Execution::Parallel).unwrap();
        assert_eq!(found.states.len(), 16, "mu = {mu}");
        // μ is defined modulo 1; recover it from the nearest integer.
        let fitted: Vec<f64> = found
            .states
            .iter()
            .map(|s| {
                let nu = 1.0 / (-2.0 * s.energy).sqrt();
                nu.ceil() - nu
            })
            .collect();
        let spread = fitted.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - fitted.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-4, "mu = {mu}: spread {spread:e}");
        assert!((fitted[0] - mu).abs() < 1e-4, "mu = {mu}: fitted {}", fitted[0]);
    }
}

#[test]
fn hydrogenic_count_matches_rydberg_counting() {
    let cfg = RunConfig::hydrogenic();
    let found = cfg.system().unwrap().find_bound_states(cfg.window(), Execution::Parallel).unwrap();
    assert_eq!(found.states.len(), 16);
    assert!((found.expected_count - 16.0).abs() < 1e-9, "{}", found.expected_count);
}

#[test]
fn desk_count_matches_rydberg_counting() {
    let (_, search) = desk();
    assert!(search.skipped.is_empty(), "{:?}", search.skipped);
    let n = search.states.len() as f64;
    assert!((n - search.expected_count).abs() <= 1.0, "{n} states vs {} expected", search.expected_count);
}

#[test]
fn desk_roots_are_refined_and_decay() {
    let (_, search) = desk();
    assert!(
        search.max_root_residual < 1e-8 * search.scan_scale,
        "residual {:e} vs scan scale {:e}",
        search.max_root_residual,
        search.scan_scale
    );
    for s in &search.states {
        assert!(s.boundary_ratio() < DECAY_TOL, "E = {:e}: ratio {:e}", s.energy, s.boundary_ratio());
        let norm: f64 = s
            .gridfun
            .iter()
            .map(|u| {
                let sq: f64 = u.iter().map(|v| v * v).sum();
                sq - 0.5 * (u[0] * u[0] + u[u.len() - 1] * u[u.len() - 1])
            })
            .sum::<f64>()
            * desk().0.grid().step();
        assert!((norm - 1.0).abs() < 1e-10, "E = {:e}: norm {norm}", s.energy);
    }
}

#[test]
fn desk_wronskians_are_constant() {
    let (system, search) = desk();
    let channels = system.channels();
    for s in search.states.iter().step_by(7) {
        for (j, eps) in channels.channel_energies(s.energy).unwrap().into_iter().enumerate() {
            let pair = radial_pair(system.grid(), &channels.potential(j), eps, system.reference()).unwrap();
            assert!(pair.wronskian_drift < WRONSKIAN_TOL, "E = {:e}, channel {j}: {:e}", s.energy, pair.wronskian_drift);
        }
    }
}

#[test]
fn desk_energies_are_converged_in_the_grid() {
    let (system, search) = desk();
    let fine = system.with_grid(system.grid().refined(2)).unwrap();
    let refined = fine.find_bound_states(RunConfig::desk().window(), Execution::Parallel).unwrap();
    assert_eq!(refined.states.len(), search.states.len());
    let worst = search
        .states
        .iter()
        .zip(&refined.states)
        .map(|(a, b)| (a.energy - b.energy).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "largest shift {worst:e}");
}

#[test]
fn parallel_and_sequential_searches_agree_bitwise() {
    let cfg = constant_defect(0.2, 4.5, 12.5);
    let system = cfg.system().unwrap();
    let par = system.find_bound_states(cfg.window(), Execution::Parallel).unwrap();
    let seq = system.find_bound_states(cfg.window(), Execution::Sequential).unwrap();
    assert_eq!(par.states, seq.states);
}
