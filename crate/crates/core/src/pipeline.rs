//! End-to-end runs: bound states, basis and metric, then wavepacket analyses.

use crate::config::{RunConfig, TimeUnit};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::metric::{biortho_residual, gram_from_states, kappa_index, BiorthoBasis, MetricWorkspace};
use crate::observables::{energy_observable, momentum_observable, position_observable, ObservableKind, ObservableRep};
use crate::par::Execution;
use crate::scatter::{assemble_basis, BoundState, ScatteringSystem};
use crate::weakmeas::{
    self, autocorrelation, evolve, kepler_period, mean_energy, meter_sweep, recurrence_time, weak_value,
    weak_value_sweep, EvolutionMode, MeterShift, MeterState, Wavepacket, WavepacketSpec, WeakValueResult,
};

/// A built basis with its metric.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: RunConfig,
    pub system: ScatteringSystem,
    /// Sorted by energy; column k of the basis is state k.
    pub states: Vec<BoundState>,
    pub basis: BiorthoBasis,
    pub work: MetricWorkspace,
    pub kappa: f64,
    pub biortho_residual: f64,
    pub expected_count: f64,
    pub skipped: Vec<(f64, String)>,
}

impl Model {
    pub fn build(config: &RunConfig, exec: Execution) -> Result<Self> {
        config.validate()?;
        let system = config.system()?;
        let search = system.find_bound_states(config.window(), exec)?;
        log::info!(
            "{} bound states in [{:.6e}, {:.6e}] ({:.2} expected)",
            search.states.len(),
            config.window.e_min,
            config.window.e_max,
            search.expected_count
        );
        Self::from_states(config.clone(), system, search.states, search.expected_count, search.skipped)
    }

    pub fn from_states(
        config: RunConfig,
        system: ScatteringSystem,
        mut states: Vec<BoundState>,
        expected_count: f64,
        skipped: Vec<(f64, String)>,
    ) -> Result<Self> {
        states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        let basis = assemble_basis(&states, system.grid())?;
        let gram = gram_from_states(&basis)?;
        let kappa = kappa_index(&gram)?;
        let work = MetricWorkspace::decompose(gram, config.tolerances.metric)?;
        let biortho_residual = biortho_residual(&basis, &work);
        Ok(Self {
            config,
            system,
            states,
            basis,
            work,
            kappa,
            biortho_residual,
            expected_count,
            skipped,
        })
    }

    pub fn energies(&self) -> &[f64] {
        self.basis.energies()
    }

    pub fn observable(&self, kind: ObservableKind) -> Result<ObservableRep> {
        let grid = self.system.grid();
        match kind {
            ObservableKind::Energy => energy_observable(&self.basis, &self.work),
            ObservableKind::Momentum => momentum_observable(grid, &self.basis, &self.work),
            ObservableKind::Position => position_observable(grid, &self.basis, &self.work),
            ObservableKind::Custom => Err(Error::Config("custom observables need an explicit matrix".into())),
        }
    }
}

/// A wavepacket expanded on a model, with its period.
#[derive(Clone, Debug)]
pub struct Analysis<'a> {
    pub model: &'a Model,
    pub spec: WavepacketSpec,
    pub packet: Wavepacket,
    pub mean_energy: f64,
    /// Kepler period 2πν̄³/Z² of the mean energy in the packet's channel.
    pub period: f64,
}

impl<'a> Analysis<'a> {
    pub fn new(model: &'a Model) -> Result<Self> {
        Self::with_packet(model, model.config.wavepacket)
    }

    pub fn with_packet(model: &'a Model, spec: WavepacketSpec) -> Result<Self> {
        let grid = model.system.grid();
        let packet = weakmeas::wavepacket_initial(
            grid,
            &model.basis,
            &model.work,
            &spec,
            model.config.tolerances.min_fidelity,
        )?;
        let channels = model.system.channels();
        let mean = mean_energy(&packet.coeffs, model.energies());
        let threshold = channels.thresholds()[spec.channel];
        if mean >= threshold {
            return Err(Error::InputData(format!(
                "wavepacket mean energy {mean:.6e} is not below its channel threshold {threshold:.6e}"
            )));
        }
        let period = kepler_period(mean, threshold, channels.z_core());
        log::info!(
            "wavepacket: fidelity {:.4}, participation {:.2}, mean energy {mean:.6e}, period {period:.6e}",
            packet.fidelity,
            packet.participation
        );
        Ok(Self {
            model,
            spec,
            packet,
            mean_energy: mean,
            period,
        })
    }

    pub fn to_au(&self, t: f64, unit: TimeUnit) -> f64 {
        match unit {
            TimeUnit::Au => t,
            TimeUnit::Period => t * self.period,
        }
    }

    /// Observable with the momentum boundary check applied to this packet.
    pub fn observable(&self, kind: ObservableKind) -> Result<ObservableRep> {
        let mut rep = self.model.observable(kind)?;
        rep.check_boundary(&self.model.basis, &self.packet.coeffs);
        Ok(rep)
    }

    /// Weak values with pre- and postselection on the packet.
    pub fn weak_values(&self, obs: &ObservableRep, times_au: &[f64], exec: Execution) -> Vec<Result<WeakValueResult>> {
        let m = self.model;
        let a = &self.packet.coeffs;
        weak_value_sweep(obs, m.energies(), a, a, times_au, &m.work, m.config.tolerances.denominator, exec)
    }

    pub fn weak_value(&self, obs: &ObservableRep, t_au: f64) -> Result<WeakValueResult> {
        let m = self.model;
        let a = &self.packet.coeffs;
        weak_value(obs, m.energies(), a, a, t_au, &m.work, m.config.tolerances.denominator)
    }

    /// Meter runs at time `t_au` for each coupling, together with the weak
    /// value they approximate.
    pub fn meter(
        &self,
        obs: &ObservableRep,
        t_au: f64,
        gs: &[f64],
        meter: &MeterState,
        exec: Execution,
    ) -> Result<(WeakValueResult, Vec<Result<MeterShift>>)> {
        let wv = self.weak_value(obs, t_au)?;
        let m = self.model;
        let pre = evolve(&self.packet.coeffs, t_au, m.energies(), &m.work, EvolutionMode::Pseudo)?;
        let shifts = meter_sweep(obs.action(), pre.as_vector(), self.packet.coeffs.as_vector(), gs, meter, exec);
        Ok((wv, shifts))
    }

    /// First autocorrelation revival after half a period, searched up to
    /// `horizon` periods.
    pub fn recurrence(&self, horizon: f64) -> Result<Recurrence> {
        let e = self.model.energies();
        let t = recurrence_time(&self.packet.coeffs, e, self.period, horizon * self.period)?;
        Ok(Recurrence {
            mean_energy: self.mean_energy,
            kepler_period: self.period,
            time: t,
            autocorrelation: autocorrelation(&self.packet.coeffs, e, t),
        })
    }

    /// Largest relative change of the naive physical norm at `times_au`.
    pub fn naive_norm_drift(&self, times_au: &[f64]) -> Result<f64> {
        weakmeas::naive_norm_drift(&self.packet.coeffs, self.model.energies(), &self.model.work, times_au)
    }

    /// Largest |aᴴa − 1| over `times_au` under pseudo evolution.
    pub fn pseudo_norm_drift(&self, times_au: &[f64]) -> Result<f64> {
        let m = self.model;
        let mut drift: f64 = 0.0;
        for &t in times_au {
            let a = evolve(&self.packet.coeffs, t, m.energies(), &m.work, EvolutionMode::Pseudo)?;
            drift = drift.max((a.norm().powi(2) - 1.0).abs());
        }
        Ok(drift)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recurrence {
    pub mean_energy: f64,
    pub kepler_period: f64,
    pub time: f64,
    pub autocorrelation: f64,
}

/// First-order pointer slopes `(dP/dg, dX/dg) = (−Re A_w, 2σ² Im A_w)`.
pub fn first_order_shifts(weak: C64, sigma: f64) -> (f64, f64) {
    (-weak.re, 2.0 * sigma * sigma * weak.im)
}
