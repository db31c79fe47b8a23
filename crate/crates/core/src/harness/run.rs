//! Command implementations shared by the binary and the tests.
//!
//! Every command first computes all of its artifacts in memory and only then
//! writes them, so a failing run leaves the output directory untouched.
//!
//! CSV schemas:
//!
//! | file | columns |
//! |------|---------|
//! | `snapshots.csv` | `sample,node,antenna,re,im` |
//! | `spectrum_<est>.csv` | `x,y,z,value,estimator,iterations` |
//! | `mse.csv`, `sweep.csv` | `estimator,axis,value,trials,mse,std_err,resolve_rate,target_resolve_fraction,failures` |
//!
//! `scm.bin` holds the sample covariance as a little-endian `u64` dimension
//! followed by row-major `(re, im)` `f64` pairs.

use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::{ConfigError, ScenarioFile, SweepAxis, SweepSpec};
use super::svg::{normalized_db, HeatMap, LineChart, Series};
use crate::covariance::{scm, write_binary, CovarianceError};
use crate::estimators::{estimate, EstimatorError, EstimatorKind, EstimatorOptions, PowerSpectrum};
use crate::geometry::{build_steering_set, GridDescriptor};
use crate::metrics::{monte_carlo_mse, EstimatorSummary, MetricsError};
use crate::synth::{synthesize_trial, SampleBatch, Scenario, SynthError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error("{estimator}: {source}")]
    Estimator {
        estimator: EstimatorKind,
        #[source]
        source: EstimatorError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

/// A named output file held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, text: String) -> Self {
        Self {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }
}

/// Creates `out` if needed and writes every artifact into it.
pub fn write_artifacts(out: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(out).map_err(io(out))?;
    artifacts
        .iter()
        .map(|a| {
            let path = out.join(&a.name);
            std::fs::write(&path, &a.bytes).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}

fn csv_bytes(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    w.into_inner().map_err(|e| RunError::Csv(e.into_error().into()))
}

pub fn snapshots_csv(batch: &SampleBatch<f64>) -> Result<Vec<u8>, RunError> {
    csv_bytes(|w| {
        w.write_record(["sample", "node", "antenna", "re", "im"])?;
        for n in 0..batch.num_samples() {
            for l in 0..batch.num_nodes() {
                for (m, v) in batch.node_slice(n, l).iter().enumerate() {
                    w.write_record([n.to_string(), l.to_string(), m.to_string(), v.re.to_string(), v.im.to_string()])?;
                }
            }
        }
        Ok(())
    })
}

/// `snapshots.csv`, `scm.bin` and the effective `scenario.toml` for one trial.
pub fn synth_artifacts(scenario: &Scenario<f64>, trial: u64) -> Result<Vec<Artifact>, RunError> {
    let batch = synthesize_trial(scenario, trial)?.batch;
    let mut bin = Vec::new();
    write_binary(&scm(&batch)?, &mut bin).map_err(|source| RunError::Io {
        path: "scm.bin".into(),
        source,
    })?;
    Ok(vec![
        Artifact {
            name: "snapshots.csv".into(),
            bytes: snapshots_csv(&batch)?,
        },
        Artifact {
            name: "scm.bin".into(),
            bytes: bin,
        },
        Artifact::text("scenario.toml", ScenarioFile::from_scenario(scenario).to_toml()?),
    ])
}

/// Spectra of one synthesized trial, in the order of `estimators`.
pub fn compute_spectra(
    scenario: &Scenario<f64>,
    estimators: &[EstimatorKind],
    options: &EstimatorOptions<f64>,
    trial: u64,
) -> Result<Vec<PowerSpectrum<f64>>, RunError> {
    let batch = synthesize_trial(scenario, trial)?.batch;
    let steering = build_steering_set(&scenario.nodes, &scenario.grid).map_err(SynthError::from)?;
    estimators
        .iter()
        .map(|&kind| {
            estimate(kind, &batch, &steering, scenario.noise_power, scenario.num_targets(), options)
                .map_err(|source| RunError::Estimator { estimator: kind, source })
        })
        .collect()
}

/// Per-estimator spectrum CSVs plus, when `plot` is set, SVG figures: one line
/// chart overlaying all estimators for line/explicit grids, one heat map per
/// estimator for rectangular grids.
pub fn spectrum_artifacts(
    scenario: &Scenario<f64>,
    spectra: &[PowerSpectrum<f64>],
    plot: bool,
) -> Result<Vec<Artifact>, RunError> {
    let mut out = Vec::new();
    for p in spectra {
        let mut bytes = Vec::new();
        p.write_csv(&scenario.grid, &mut bytes)?;
        out.push(Artifact {
            name: format!("spectrum_{}.csv", p.estimator),
            bytes,
        });
    }
    if !plot {
        return Ok(out);
    }
    let grid = &scenario.grid;
    match grid.descriptor() {
        GridDescriptor::Rect { x_range, y_range, .. } => {
            let (nx, ny) = grid.rect_shape().expect("rect grid has a shape");
            for p in spectra {
                let map = HeatMap {
                    title: format!("{} spectrum (normalized dB)", p.estimator.as_str().to_uppercase()),
                    x_label: "x (m)".into(),
                    y_label: "y (m)".into(),
                    nx,
                    ny,
                    x_range: *x_range,
                    y_range: *y_range,
                    values_db: normalized_db(&p.values),
                    markers: scenario.targets.iter().map(|t| (t.position.x, t.position.y)).collect(),
                };
                out.push(Artifact::text(format!("spectrum_{}.svg", p.estimator), map.render()));
            }
        }
        GridDescriptor::Line { start, end, .. } => {
            let dir = (end - start).normalize();
            let coord = |q: &crate::geometry::Point<f64>| (q - start).dot(&dir) + start.dot(&dir);
            let chart = LineChart {
                title: "Power spectrum (normalized dB)".into(),
                x_label: "position along grid (m)".into(),
                y_label: "dB".into(),
                series: spectra
                    .iter()
                    .map(|p| Series {
                        name: p.estimator.as_str().to_uppercase(),
                        points: grid.points().iter().map(coord).zip(normalized_db(&p.values)).collect(),
                    })
                    .collect(),
                log_y: false,
                markers: scenario.targets.iter().map(|t| coord(&t.position)).collect(),
            };
            out.push(Artifact::text("spectrum.svg", chart.render()));
        }
        GridDescriptor::Explicit => {
            let chart = LineChart {
                title: "Power spectrum (normalized dB)".into(),
                x_label: "grid index".into(),
                y_label: "dB".into(),
                series: spectra
                    .iter()
                    .map(|p| Series {
                        name: p.estimator.as_str().to_uppercase(),
                        points: normalized_db(&p.values).into_iter().enumerate().map(|(i, v)| (i as f64, v)).collect(),
                    })
                    .collect(),
                log_y: false,
                markers: Vec::new(),
            };
            out.push(Artifact::text("spectrum.svg", chart.render()));
        }
    }
    Ok(out)
}

/// One row of an MSE report.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub summary: EstimatorSummary,
}

/// Monte-Carlo rows for the base scenario, tagged with its sample count.
pub fn mse_rows(
    scenario: &Scenario<f64>,
    estimators: &[EstimatorKind],
    trials: usize,
    options: &EstimatorOptions<f64>,
) -> Result<Vec<MseRow>, RunError> {
    let report = monte_carlo_mse(scenario, estimators, trials, options)?;
    log::info!("{}", report.render().trim_end());
    Ok(estimators
        .iter()
        .map(|k| MseRow {
            axis: SweepAxis::NumSamples,
            value: scenario.num_samples as f64,
            summary: report.per_estimator[k].clone(),
        })
        .collect())
}

/// Monte-Carlo rows for every sweep value, grouped by estimator in the order
/// given, then by increasing value.
pub fn sweep_rows(
    base: &Scenario<f64>,
    sweep: &SweepSpec,
    estimators: &[EstimatorKind],
    trials: usize,
    options: &EstimatorOptions<f64>,
) -> Result<Vec<MseRow>, RunError> {
    let mut per_value = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let scenario = sweep.apply(base, value)?;
        log::info!("sweep {} = {value}", sweep.axis);
        per_value.push(monte_carlo_mse(&scenario, estimators, trials, options)?);
    }
    let mut rows = Vec::new();
    for k in estimators {
        for (value, report) in sweep.values.iter().zip(&per_value) {
            rows.push(MseRow {
                axis: sweep.axis,
                value: *value,
                summary: report.per_estimator[k].clone(),
            });
        }
    }
    Ok(rows)
}

pub const MSE_COLUMNS: [&str; 9] = [
    "estimator",
    "axis",
    "value",
    "trials",
    "mse",
    "std_err",
    "resolve_rate",
    "target_resolve_fraction",
    "failures",
];

pub fn mse_csv(rows: &[MseRow]) -> Result<Vec<u8>, RunError> {
    csv_bytes(|w| {
        w.write_record(MSE_COLUMNS)?;
        for r in rows {
            let s = &r.summary;
            w.write_record([
                s.estimator.to_string(),
                r.axis.to_string(),
                r.value.to_string(),
                s.trials.to_string(),
                s.mse.to_string(),
                s.std_err.to_string(),
                s.resolve_rate.to_string(),
                s.target_resolve_fraction.to_string(),
                s.failures.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// MSE against the swept value, one series per estimator, log scale.
pub fn mse_chart(rows: &[MseRow]) -> LineChart {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let name = r.summary.estimator.as_str().to_uppercase();
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((r.value, r.summary.mse)),
            None => series.push(Series {
                name,
                points: vec![(r.value, r.summary.mse)],
            }),
        }
    }
    LineChart {
        title: "Localization MSE".into(),
        x_label: rows.first().map(|r| r.axis.to_string()).unwrap_or_default(),
        y_label: "MSE (m²)".into(),
        series,
        log_y: true,
        markers: Vec::new(),
    }
}
