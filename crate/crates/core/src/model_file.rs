//! Versioned JSON container for a built model.
//!
//! Grid functions are stored as base64 of little-endian f64 with trailing
//! exact zeros dropped; the Gram matrix and diagnostics are stored for
//! inspection and recomputed on load.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline::Model;
use crate::scatter::BoundState;

pub const FORMAT: &str = "qhweak-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedRoot {
    pub energy: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub energy: f64,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    /// One encoded grid function per channel.
    pub gridfun: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub format_version: u32,
    pub crate_version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub n_channels: usize,
    pub n_points: usize,
    pub expected_count: f64,
    pub skipped: Vec<SkippedRoot>,
    pub states: Vec<StateRecord>,
    pub gram_re: Vec<Vec<f64>>,
    pub gram_im: Vec<Vec<f64>>,
    pub kappa: f64,
    pub condition_number: f64,
    pub biortho_residual: f64,
}

pub fn encode_f64(values: &[f64]) -> String {
    let end = values.iter().rposition(|&v| v != 0.0 || v.is_sign_negative()).map_or(0, |i| i + 1);
    let bytes: Vec<u8> = values[..end].iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

/// Inverse of [`encode_f64`], zero-padded to `len`.
pub fn decode_f64(text: &str, len: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::ModelFile(format!("bad base64 grid function: {e}")))?;
    if bytes.len() % 8 != 0 || bytes.len() / 8 > len {
        return Err(Error::ModelFile(format!(
            "grid function of {} bytes does not fit {len} points",
            bytes.len()
        )));
    }
    let mut out: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    out.resize(len, 0.0);
    Ok(out)
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        let g = model.work.gram();
        let n = g.nrows();
        Self {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: model.config.hash(),
            config: model.config.clone(),
            n_channels: model.system.channels().len(),
            n_points: model.system.grid().n_pts(),
            expected_count: model.expected_count,
            skipped: model
                .skipped
                .iter()
                .map(|(energy, reason)| SkippedRoot {
                    energy: *energy,
                    reason: reason.clone(),
                })
                .collect(),
            states: model
                .states
                .iter()
                .map(|s| StateRecord {
                    energy: s.energy,
                    z: s.z.clone(),
                    c: s.c.clone(),
                    gridfun: s.gridfun.iter().map(|u| encode_f64(u)).collect(),
                })
                .collect(),
            gram_re: (0..n).map(|k| (0..n).map(|l| g[(k, l)].re).collect()).collect(),
            gram_im: (0..n).map(|k| (0..n).map(|l| g[(k, l)].im).collect()).collect(),
            kappa: model.kappa,
            condition_number: model.work.condition_number(),
            biortho_residual: model.biortho_residual,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::ModelFile(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelFile(format!("cannot read {}: {e}", path.display())))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::ModelFile(e.to_string()))?;
        if file.format != FORMAT || file.format_version != FORMAT_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported container {} v{} (expected {FORMAT} v{FORMAT_VERSION})",
                file.format, file.format_version
            )));
        }
        Ok(file)
    }

    /// Rebuilds the model. The basis always comes from the stored states and
    /// the stored config; `config`, when given, replaces the analysis settings
    /// and a hash mismatch with the stored config is reported as a warning.
    pub fn into_model(self, config: Option<&RunConfig>) -> Result<Model> {
        let stored = self.config;
        if stored.hash() != self.config_hash {
            log::warn!("model file config hash does not match its embedded config");
        }
        let effective = match config {
            Some(c) if c.hash() != self.config_hash => {
                log::warn!(
                    "config hash {} differs from the model's {}; the stored basis is used as is",
                    c.hash(),
                    self.config_hash
                );
                c.clone()
            }
            Some(c) => c.clone(),
            None => stored.clone(),
        };
        let system = stored.system()?;
        if system.channels().len() != self.n_channels || system.grid().n_pts() != self.n_points {
            return Err(Error::ModelFile("stored dimensions disagree with the stored config".into()));
        }
        let states = self
            .states
            .into_iter()
            .map(|r| {
                if r.gridfun.len() != self.n_channels {
                    return Err(Error::ModelFile(format!("state at {:.12e} has wrong channel count", r.energy)));
                }
                let gridfun = r
                    .gridfun
                    .iter()
                    .map(|t| decode_f64(t, self.n_points))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BoundState {
                    energy: r.energy,
                    z: r.z,
                    c: r.c,
                    gridfun,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let skipped = self.skipped.into_iter().map(|s| (s.energy, s.reason)).collect();
        Model::from_states(effective, system, states, self.expected_count, skipped)
    }
}
