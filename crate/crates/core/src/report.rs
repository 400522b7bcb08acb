//! CSV and JSON outputs. Every number in a CSV is written as `%.12e`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::fmt_e12;
use crate::observables::ObservableKind;
use crate::pipeline::Model;
use crate::weakmeas::{MeterShift, WeakValueResult};

pub const WEAK_VALUE_HEADER: [&str; 10] = [
    "t_over_period",
    "t_au",
    "observable",
    "naive_re",
    "naive_im",
    "corrected_re",
    "corrected_im",
    "denom_naive_abs",
    "denom_corrected_abs",
    "error",
];

pub const METER_HEADER: [&str; 11] = [
    "t_over_period",
    "t_au",
    "observable",
    "sigma",
    "g",
    "delta_x",
    "delta_p",
    "p_post",
    "corrected_re",
    "corrected_im",
    "error",
];

#[derive(Clone, Debug)]
pub struct WeakValueRow {
    pub t_over_period: f64,
    pub t_au: f64,
    pub observable: ObservableKind,
    pub result: std::result::Result<WeakValueResult, String>,
}

#[derive(Clone, Debug)]
pub struct MeterRow {
    pub t_over_period: f64,
    pub t_au: f64,
    pub observable: ObservableKind,
    pub sigma: f64,
    pub g: f64,
    pub corrected: Option<crate::linalg::C64>,
    pub result: std::result::Result<MeterShift, String>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InputData(format!("csv: {other:?}")),
    }
}

fn nan_if_err<T>(r: &std::result::Result<T, String>, f: impl Fn(&T) -> f64) -> String {
    fmt_e12(r.as_ref().map_or(f64::NAN, f))
}

pub fn write_weak_values<W: Write>(out: W, rows: &[WeakValueRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WEAK_VALUE_HEADER).map_err(csv_err)?;
    for row in rows {
        let r = &row.result;
        w.write_record([
            fmt_e12(row.t_over_period),
            fmt_e12(row.t_au),
            row.observable.to_string(),
            nan_if_err(r, |v| v.naive.re),
            nan_if_err(r, |v| v.naive.im),
            nan_if_err(r, |v| v.corrected.re),
            nan_if_err(r, |v| v.corrected.im),
            nan_if_err(r, |v| v.denom_naive.norm()),
            nan_if_err(r, |v| v.denom_corrected.norm()),
            r.as_ref().err().cloned().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_meter<W: Write>(out: W, rows: &[MeterRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METER_HEADER).map_err(csv_err)?;
    for row in rows {
        let r = &row.result;
        let wv = row.corrected.unwrap_or(crate::linalg::C64::new(f64::NAN, f64::NAN));
        w.write_record([
            fmt_e12(row.t_over_period),
            fmt_e12(row.t_au),
            row.observable.to_string(),
            fmt_e12(row.sigma),
            fmt_e12(row.g),
            nan_if_err(r, |m| m.dx),
            nan_if_err(r, |m| m.dp),
            nan_if_err(r, |m| m.p_post),
            fmt_e12(wv.re),
            fmt_e12(wv.im),
            r.as_ref().err().cloned().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per state: energy, effective quantum number in every channel,
/// channel coefficients Z and the boundary decay ratio.
pub fn write_spectrum<W: Write>(out: W, model: &Model) -> Result<()> {
    let n_ch = model.system.channels().len();
    let mut header = vec!["index".to_string(), "energy_au".to_string()];
    header.extend((1..=n_ch).map(|j| format!("nu_{j}")));
    header.extend((1..=n_ch).map(|j| format!("z_{j}")));
    header.push("boundary_ratio".into());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(csv_err)?;
    for (k, s) in model.states.iter().enumerate() {
        let nu = model.system.channels().effective_quantum_numbers(s.energy)?;
        let mut rec = vec![k.to_string(), fmt_e12(s.energy)];
        rec.extend(nu.iter().map(|&v| fmt_e12(v)));
        rec.extend(s.z.iter().map(|&v| fmt_e12(v)));
        rec.push(fmt_e12(s.boundary_ratio()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub n_states: usize,
    pub expected_count: f64,
    pub skipped_roots: usize,
    pub kappa: f64,
    pub condition_number: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_off_diagonal: f64,
    pub biortho_residual: f64,
    /// ‖Ã − S Ãᴴ S⁻¹‖_max per observable.
    pub quasi_hermiticity: Vec<(ObservableKind, f64)>,
}

impl MetricReport {
    pub fn new(model: &Model, observables: &[ObservableKind]) -> Result<Self> {
        let w = &model.work;
        let g = w.gram();
        let n = g.nrows();
        let mut max_off: f64 = 0.0;
        for k in 0..n {
            for l in 0..n {
                if k != l {
                    max_off = max_off.max(g[(k, l)].norm());
                }
            }
        }
        let quasi_hermiticity = observables
            .iter()
            .map(|&kind| Ok((kind, model.observable(kind)?.quasi_hermiticity_residual(w)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_states: n,
            expected_count: model.expected_count,
            skipped_roots: model.skipped.len(),
            kappa: model.kappa,
            condition_number: w.condition_number(),
            min_eigenvalue: w.eigenvalues().min(),
            max_eigenvalue: w.eigenvalues().max(),
            max_off_diagonal: max_off,
            biortho_residual: model.biortho_residual,
            quasi_hermiticity,
        })
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::InputData(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}
