//! Run configuration, read from TOML.
//!
//! All physical quantities are in atomic units. Angles are in radians.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metric::DEFAULT_TOL;
use crate::observables::ObservableKind;
use crate::scatter::{ChannelSet, Eigenphase, RadialGrid, ReactionModel, ReferencePair, Resonance, ScatteringSystem};
use crate::weakmeas::{MeterState, WavepacketSpec, DENOMINATOR_FLOOR, MIN_FIDELITY};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Seed for randomized self-tests.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub channels: ChannelsConfig,
    pub reaction: ReactionConfig,
    pub grid: GridConfig,
    pub window: WindowConfig,
    pub wavepacket: WavepacketSpec,
    pub sweep: SweepConfig,
    pub meter: MeterConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    20_240_601
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsConfig {
    pub thresholds: Vec<f64>,
    #[serde(default = "default_z_core")]
    pub z_core: f64,
    /// Per-channel angular momentum; all zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<u32>>,
}

fn default_z_core() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    /// Givens angles for the channel pairs (i, j), i < j, in lexicographic order.
    #[serde(default)]
    pub angles: Vec<f64>,
    pub phases: Vec<Eigenphase>,
    #[serde(default)]
    pub reference: ReferencePair,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r0: f64,
    pub r_max: f64,
    pub n_pts: usize,
}

/// Energy window searched for bound states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub e_min: f64,
    pub e_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Au,
    /// Kepler period of the wavepacket's mean energy.
    #[default]
    Period,
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Linspace {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Measurement times, given either as a list or as a linspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linspace: Option<Linspace>,
    #[serde(default)]
    pub unit: TimeUnit,
}

impl SweepConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match (&self.times, &self.linspace) {
            (Some(t), None) => t.clone(),
            (None, Some(l)) => l.values(),
            _ => return Err(Error::Config("sweep needs exactly one of `times` or `linspace`".into())),
        };
        if v.is_empty() || v.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("sweep times must be finite and non-empty".into()));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterConfig {
    pub sigma: f64,
    /// Coupling strengths; successive halvings allow the small-g extrapolation.
    pub g: Vec<f64>,
    /// Measurement times in the sweep unit.
    pub times: Vec<f64>,
    #[serde(default = "default_meter_points")]
    pub n_points: usize,
    /// Pointer grid half-width in units of sigma.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Observables coupled to the meter when none are given on the command line.
    #[serde(default = "default_meter_observables")]
    pub observables: Vec<ObservableKind>,
}

fn default_meter_observables() -> Vec<ObservableKind> {
    vec![ObservableKind::Momentum]
}

fn default_meter_points() -> usize {
    MeterState::gaussian(1.0).n_points
}

fn default_half_width() -> f64 {
    MeterState::gaussian(1.0).half_width
}

impl MeterConfig {
    pub fn state(&self) -> MeterState {
        MeterState {
            sigma: self.sigma,
            n_points: self.n_points,
            half_width: self.half_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    pub selected: Vec<ObservableKind>,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        Self {
            selected: vec![ObservableKind::Energy, ObservableKind::Momentum, ObservableKind::Position],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenvalue floor of the metric.
    #[serde(default = "default_metric_tol")]
    pub metric: f64,
    /// Smallest admissible |denominator| of a weak value.
    #[serde(default = "default_denominator")]
    pub denominator: f64,
    /// Smallest admissible wavepacket reconstruction fidelity.
    #[serde(default = "default_min_fidelity")]
    pub min_fidelity: f64,
}

fn default_metric_tol() -> f64 {
    DEFAULT_TOL
}

fn default_denominator() -> f64 {
    DENOMINATOR_FLOOR
}

fn default_min_fidelity() -> f64 {
    MIN_FIDELITY
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            metric: DEFAULT_TOL,
            denominator: DENOMINATOR_FLOOR,
            min_fidelity: MIN_FIDELITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for files whose path is not given on the command line.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    /// Two closed channels below thresholds 0 and 1.5e-3, mixed at 30°, with
    /// a resonance in the second eigenchannel placed inside the window.
    pub fn desk() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            channels: ChannelsConfig {
                thresholds: vec![0.0, 1.5e-3],
                z_core: 1.0,
                l: None,
            },
            reaction: ReactionConfig {
                angles: vec![PI / 6.0],
                phases: vec![
                    Eigenphase::constant(0.3 * PI),
                    Eigenphase {
                        base: 0.1 * PI,
                        slope: 0.0,
                        resonance: Some(Resonance {
                            center: -5.0e-3,
                            width: 3.0e-3,
                        }),
                    },
                ],
                reference: ReferencePair::Coulomb,
            },
            grid: GridConfig {
                r0: 1.0,
                r_max: 7000.0,
                n_pts: 139_981,
            },
            window: WindowConfig {
                e_min: -2.0e-2,
                e_max: -2.0e-4,
            },
            wavepacket: WavepacketSpec {
                center: 200.0,
                width: 20.0,
                channel: 0,
            },
            sweep: SweepConfig {
                times: None,
                linspace: Some(Linspace {
                    start: 0.0,
                    stop: 1.0,
                    count: 401,
                }),
                unit: TimeUnit::Period,
            },
            meter: MeterConfig {
                sigma: 1.0,
                g: vec![0.2, 0.1, 0.05],
                times: vec![0.3],
                n_points: default_meter_points(),
                half_width: default_half_width(),
                observables: default_meter_observables(),
            },
            observables: ObservablesConfig::default(),
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
        }
    }

    /// Desk configuration with every eigenphase constant: K does not depend
    /// on energy and the metric is nearly flat.
    pub fn desk_constant_k() -> Self {
        let mut cfg = Self::desk();
        for p in &mut cfg.reaction.phases {
            p.resonance = None;
            p.slope = 0.0;
        }
        cfg
    }

    /// One Coulomb channel with K = 0 covering n = 5..20.
    pub fn hydrogenic() -> Self {
        let mut cfg = Self::desk();
        cfg.channels = ChannelsConfig {
            thresholds: vec![0.0],
            z_core: 1.0,
            l: None,
        };
        cfg.reaction = ReactionConfig {
            angles: Vec::new(),
            phases: vec![Eigenphase::constant(0.0)],
            reference: ReferencePair::Coulomb,
        };
        cfg.grid = GridConfig {
            r0: 1.0,
            r_max: 1500.0,
            n_pts: 29_981,
        };
        cfg.window = WindowConfig {
            e_min: -0.5 / (4.5 * 4.5),
            e_max: -0.5 / (20.5 * 20.5),
        };
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let n_ch = self.channels.thresholds.len();
        if self.reaction.phases.len() != n_ch {
            return Err(Error::Config(format!(
                "{} eigenphases given for {n_ch} channels",
                self.reaction.phases.len()
            )));
        }
        if self.reaction.angles.len() != n_ch * n_ch.saturating_sub(1) / 2 {
            return Err(Error::Config(format!(
                "{n_ch} channels need {} mixing angles, got {}",
                n_ch * n_ch.saturating_sub(1) / 2,
                self.reaction.angles.len()
            )));
        }
        if !(self.window.e_min < self.window.e_max) {
            return Err(Error::Config("window needs e_min < e_max".into()));
        }
        if self.wavepacket.channel >= n_ch {
            return Err(Error::Config(format!("wavepacket channel {} out of range", self.wavepacket.channel)));
        }
        self.sweep.values()?;
        if self.meter.g.is_empty() || self.meter.times.is_empty() {
            return Err(Error::Config("meter needs at least one coupling and one time".into()));
        }
        if self.observables.selected.contains(&ObservableKind::Custom) || self.meter.observables.contains(&ObservableKind::Custom) {
            return Err(Error::Config("custom observables cannot be selected from a config".into()));
        }
        let t = &self.tolerances;
        if !(t.metric > 0.0 && t.denominator > 0.0 && (0.0..=1.0).contains(&t.min_fidelity)) {
            return Err(Error::Config("tolerances must be positive, min_fidelity in [0, 1]".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn channel_set(&self) -> Result<ChannelSet> {
        let c = &self.channels;
        match &c.l {
            Some(l) => ChannelSet::with_angular_momenta(c.thresholds.clone(), c.z_core, l.clone()),
            None => ChannelSet::new(c.thresholds.clone(), c.z_core),
        }
    }

    pub fn reaction_model(&self) -> Result<ReactionModel> {
        ReactionModel::from_angles(&self.reaction.angles, self.reaction.phases.clone())
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.r0, self.grid.r_max, self.grid.n_pts)
    }

    pub fn system(&self) -> Result<ScatteringSystem> {
        ScatteringSystem::new(
            self.channel_set()?,
            self.reaction_model()?,
            self.radial_grid()?,
            self.reaction.reference,
        )
    }

    pub fn window(&self) -> (f64, f64) {
        (self.window.e_min, self.window.e_max)
    }
}
