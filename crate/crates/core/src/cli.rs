//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input problems, 2 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, TimeUnit};
use crate::error::Result;
use crate::model_file::ModelFile;
use crate::observables::ObservableKind;
use crate::par::Execution;
use crate::pipeline::{Analysis, Model};
use crate::report::{self, MeterRow, MetricReport, WeakValueRow};
use crate::selftest;

#[derive(Debug, Parser)]
#[command(name = "qhweak", version, about = "Weak values in quasi-Hermitian bound-state scattering models")]
pub struct Cli {
    /// TOML run configuration; the built-in desk configuration when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model file: written by `build`, read by the analysis commands.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output file, `-` for standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Observables to evaluate (comma separated or repeated).
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub observable: Vec<ObservableArg>,
    /// Unit of the configured times.
    #[arg(long, global = true, value_enum)]
    pub time_unit: Option<TimeUnit>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObservableArg {
    Energy,
    Momentum,
    Position,
}

impl From<ObservableArg> for ObservableKind {
    fn from(a: ObservableArg) -> Self {
        match a {
            ObservableArg::Energy => ObservableKind::Energy,
            ObservableArg::Momentum => ObservableKind::Momentum,
            ObservableArg::Position => ObservableKind::Position,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate bound states, build the metric and write the model file.
    Build,
    /// Bound energies, effective quantum numbers and channel coefficients (CSV).
    Spectrum,
    /// κ, conditioning, biorthogonality and quasi-Hermiticity residuals (JSON).
    Metric,
    /// Naive and corrected weak values over the configured sweep (CSV).
    Weakvalue,
    /// Exact meter simulation at the configured times and couplings (CSV).
    Metersim,
    /// Wavepacket revival time from the autocorrelation (JSON).
    Recurrence {
        /// Search horizon in periods.
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
    },
    /// Similarity-transform and hydrogenic oracles.
    Selftest,
    /// Print the effective configuration as TOML.
    Config,
}

/// Parses the process arguments and runs; never panics on bad input.
pub fn main_entry() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    config: RunConfig,
    exec: Execution,
}

impl Context<'_> {
    fn observables(&self, fallback: &[ObservableKind]) -> Vec<ObservableKind> {
        if self.cli.observable.is_empty() {
            fallback.to_vec()
        } else {
            self.cli.observable.iter().map(|&a| a.into()).collect()
        }
    }

    fn time_unit(&self, config: &RunConfig) -> TimeUnit {
        self.cli.time_unit.unwrap_or(config.sweep.unit)
    }

    /// `--out`, or `default_name` in the output directory of `config`.
    fn output(&self, config: &RunConfig, default_name: &str) -> Result<Box<dyn Write>> {
        let path = match &self.cli.out {
            Some(p) => p.clone(),
            None => config.output.dir.join(default_name),
        };
        if path == Path::new("-") {
            return Ok(Box::new(io::stdout().lock()));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        log::info!("writing {}", path.display());
        Ok(Box::new(BufWriter::new(File::create(&path)?)))
    }

    /// The model read from `--model` or built in memory. Its `config` is the
    /// effective one: `--config` when given, otherwise the stored config.
    fn model(&self) -> Result<Model> {
        match &self.cli.model {
            Some(path) => {
                let explicit = self.cli.config.as_ref().map(|_| &self.config);
                ModelFile::read(path)?.into_model(explicit)
            }
            None => {
                log::info!("no model file given; building the model from the configuration");
                Model::build(&self.config, self.exec)
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::desk(),
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Context { cli, config, exec };
    match &cli.command {
        Command::Build => build(&ctx),
        Command::Spectrum => {
            let model = ctx.model()?;
            report::write_spectrum(ctx.output(&model.config, "spectrum.csv")?, &model)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Metric => {
            let model = ctx.model()?;
            let kinds = ctx.observables(&model.config.observables.selected);
            let rep = MetricReport::new(&model, &kinds)?;
            report::write_json(ctx.output(&model.config, "metric.json")?, &rep)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Weakvalue => weakvalue(&ctx),
        Command::Metersim => metersim(&ctx),
        Command::Recurrence { horizon } => {
            let model = ctx.model()?;
            let analysis = Analysis::new(&model)?;
            let rec = analysis.recurrence(*horizon)?;
            let json = serde_json::json!({
                "mean_energy": rec.mean_energy,
                "kepler_period_au": rec.kepler_period,
                "recurrence_au": rec.time,
                "recurrence_over_period": rec.time / rec.kepler_period,
                "autocorrelation": rec.autocorrelation,
            });
            report::write_json(ctx.output(&model.config, "recurrence.json")?, &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let checks = selftest::run_all(ctx.config.seed);
            let mut out = ctx.cli.out.as_ref().map_or_else(
                || Ok(Box::new(io::stdout().lock()) as Box<dyn Write>),
                |_| ctx.output(&ctx.config, "selftest.txt"),
            )?;
            for c in &checks {
                writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            out.flush()?;
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Config => {
            let mut out = ctx.output(&ctx.config, "config.toml")?;
            out.write_all(ctx.config.to_toml_string()?.as_bytes())?;
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn build(ctx: &Context) -> Result<ExitCode> {
    let model = Model::build(&ctx.config, ctx.exec)?;
    let path = ctx.cli.model.clone().unwrap_or_else(|| ctx.config.output.dir.join("model.json"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    ModelFile::from_model(&model).write(&path)?;
    log::info!(
        "wrote {}: {} states, kappa {:.4e}, condition number {:.3e}, biorthogonality residual {:.3e}",
        path.display(),
        model.states.len(),
        model.kappa,
        model.work.condition_number(),
        model.biortho_residual
    );
    Ok(ExitCode::SUCCESS)
}

fn weakvalue(ctx: &Context) -> Result<ExitCode> {
    let model = ctx.model()?;
    let analysis = Analysis::new(&model)?;
    let cfg = &model.config;
    let unit = ctx.time_unit(cfg);
    let raw = cfg.sweep.values()?;
    let times: Vec<f64> = raw.iter().map(|&t| analysis.to_au(t, unit)).collect();
    let kinds = ctx.observables(&cfg.observables.selected);
    let mut per_kind = Vec::with_capacity(kinds.len());
    for &kind in &kinds {
        let obs = analysis.observable(kind)?;
        per_kind.push(analysis.weak_values(&obs, &times, ctx.exec));
    }
    let mut rows = Vec::with_capacity(times.len() * kinds.len());
    for (i, &t) in times.iter().enumerate() {
        for (results, &kind) in per_kind.iter().zip(&kinds) {
            rows.push(WeakValueRow {
                t_over_period: t / analysis.period,
                t_au: t,
                observable: kind,
                result: results[i].as_ref().copied().map_err(|e| e.to_string()),
            });
        }
    }
    report::write_weak_values(ctx.output(cfg, "weakvalue.csv")?, &rows)?;
    finish(rows.iter().filter(|r| r.result.is_ok()).count(), rows.len())
}

fn metersim(ctx: &Context) -> Result<ExitCode> {
    let model = ctx.model()?;
    let analysis = Analysis::new(&model)?;
    let unit = ctx.time_unit(&model.config);
    let mc = &model.config.meter;
    let meter = mc.state();
    let kinds = ctx.observables(&mc.observables);
    let mut rows = Vec::new();
    for &kind in &kinds {
        let obs = analysis.observable(kind)?;
        for &raw in &mc.times {
            let t = analysis.to_au(raw, unit);
            let row = |g: f64, corrected, result| MeterRow {
                t_over_period: t / analysis.period,
                t_au: t,
                observable: kind,
                sigma: meter.sigma,
                g,
                corrected,
                result,
            };
            match analysis.meter(&obs, t, &mc.g, &meter, ctx.exec) {
                Ok((wv, shifts)) => {
                    for (&g, s) in mc.g.iter().zip(shifts) {
                        rows.push(row(g, Some(wv.corrected), s.map_err(|e| e.to_string())));
                    }
                }
                Err(e) => {
                    for &g in &mc.g {
                        rows.push(row(g, None, Err(e.to_string())));
                    }
                }
            }
        }
    }
    report::write_meter(ctx.output(&model.config, "metersim.csv")?, &rows)?;
    finish(rows.iter().filter(|r| r.result.is_ok()).count(), rows.len())
}

fn finish(succeeded: usize, total: usize) -> Result<ExitCode> {
    if succeeded < total {
        log::warn!("{} of {total} rows failed; see the error column", total - succeeded);
    }
    if succeeded == 0 {
        eprintln!("error: all {total} rows failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
