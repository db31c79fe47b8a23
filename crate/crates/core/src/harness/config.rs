//! TOML scenario files.
//!
//! A file describes nodes, targets, the search grid and the sampling setup,
//! plus an optional `[sweep]` table. Signal strength is given either as
//! `snr_db` (uniform channel variances are derived from it) or as explicit
//! per-target `channel_variances`; when both are present they must agree.
//!
//! ```toml
//! num_samples = 2
//! seed = 1
//! snr_db = -5.0
//! num_antennas = 64
//!
//! [grid]
//! kind = "line"
//! start = [0.0, 0.0, 0.0]
//! end = [20.0, 0.0, 0.0]
//! step = 0.1
//!
//! [[nodes]]
//! position = [5.0, 0.0, 6.0]
//! axis = [1.0, 0.0, 0.0]
//!
//! [[targets]]
//! position = [7.8, 0.0, 0.0]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::EstimatorKind;
use crate::geometry::{Point, SearchGrid, SensingNode};
use crate::synth::{db_to_linear, ChannelMode, Scenario, TargetSource, Waveform, DEFAULT_TONE_PERIOD};

/// Trial count used when neither the command line nor the file sets one.
pub const DEFAULT_TRIALS: usize = 200;
/// Trial count selected by `--paper-scale`.
pub const PAPER_SCALE_TRIALS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read scenario file: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: {location}: {message}")]
    Invalid {
        origin: String,
        location: String,
        message: String,
    },
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Line {
        start: [f64; 3],
        end: [f64; 3],
        step: f64,
    },
    Rect {
        x_range: [f64; 2],
        y_range: [f64; 2],
        step: f64,
        #[serde(default)]
        z: f64,
    },
    Points {
        points: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveformSpec {
    Tone { frequency_index: u32 },
    Qpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModeSpec {
    #[default]
    PerBatch,
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_antennas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_over_wavelength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub position: [f64; 3],
    /// Defaults to a tone with frequency index `k + 1` for target `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<WaveformSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NumSamples,
    SnrDb,
    NumAntennas,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NumSamples => "num_samples",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::NumAntennas => "num_antennas",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Nonempty and strictly increasing.
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

/// On-disk form of a scenario. Serializing and re-parsing is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub num_samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_antennas: Option<usize>,
    #[serde(default = "default_spacing")]
    pub spacing_over_wavelength: f64,
    #[serde(default)]
    pub channel_mode: ChannelModeSpec,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_tone_period")]
    pub tone_period: usize,
    /// Default trial count for `mse`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub grid: GridSpec,
    pub nodes: Vec<NodeSpec>,
    pub targets: Vec<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_noise_power() -> f64 {
    1.0
}

fn default_spacing() -> f64 {
    0.5
}

fn default_tone_period() -> usize {
    DEFAULT_TONE_PERIOD
}

fn point(p: [f64; 3]) -> Point<f64> {
    Point::new(p[0], p[1], p[2])
}

fn array(p: &Point<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

impl FromStr for ScenarioFile {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        Self::parse(text, "<scenario>")
    }
}

impl ScenarioFile {
    /// Parses TOML text; `origin` prefixes error messages (usually the path).
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Builds and validates the scenario this file describes.
    pub fn to_scenario(&self, origin: &str) -> Result<Scenario<f64>, ConfigError> {
        let invalid = |location: String, message: String| ConfigError::Invalid {
            origin: origin.to_string(),
            location,
            message,
        };

        if self.nodes.is_empty() {
            return Err(invalid("nodes".into(), "at least one [[nodes]] entry is required".into()));
        }
        if self.targets.is_empty() {
            return Err(invalid("targets".into(), "at least one [[targets]] entry is required".into()));
        }
        if !(self.noise_power > 0.0) || !self.noise_power.is_finite() {
            return Err(invalid("noise_power".into(), "must be a positive number".into()));
        }
        if self.num_samples == 0 {
            return Err(invalid("num_samples".into(), "must be at least 1".into()));
        }
        if self.tone_period == 0 {
            return Err(invalid("tone_period".into(), "must be at least 1".into()));
        }

        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, spec) in self.nodes.iter().enumerate() {
            let n = spec.num_antennas.or(self.num_antennas).ok_or_else(|| {
                invalid(
                    format!("nodes[{i}].num_antennas"),
                    "missing (set it on the node or at top level)".into(),
                )
            })?;
            let node = SensingNode::new(
                point(spec.position),
                point(spec.axis.unwrap_or([1.0, 0.0, 0.0])),
                n,
                spec.spacing_over_wavelength.unwrap_or(self.spacing_over_wavelength),
            )
            .map_err(|e| invalid(format!("nodes[{i}]"), e.to_string()))?;
            nodes.push(node);
        }

        let grid = match &self.grid {
            GridSpec::Line { start, end, step } => SearchGrid::line(point(*start), point(*end), *step),
            GridSpec::Rect {
                x_range,
                y_range,
                step,
                z,
            } => SearchGrid::rect((x_range[0], x_range[1]), (y_range[0], y_range[1]), *step, *z),
            GridSpec::Points { points } => SearchGrid::from_points(points.iter().copied().map(point).collect()),
        }
        .map_err(|e| invalid("grid".into(), e.to_string()))?;

        let uniform = self.snr_db.map(|db| db_to_linear(db) * self.noise_power);
        let mut targets = Vec::with_capacity(self.targets.len());
        for (k, spec) in self.targets.iter().enumerate() {
            let channel_variances = match (&spec.channel_variances, uniform) {
                (Some(v), _) => {
                    if v.len() != nodes.len() {
                        return Err(invalid(
                            format!("targets[{k}].channel_variances"),
                            format!("has {} entries, expected one per node ({})", v.len(), nodes.len()),
                        ));
                    }
                    v.clone()
                }
                (None, Some(var)) => vec![var; nodes.len()],
                (None, None) => {
                    return Err(invalid(
                        format!("targets[{k}].channel_variances"),
                        "required when snr_db is not set".into(),
                    ))
                }
            };
            let waveform = match spec.waveform {
                Some(WaveformSpec::Tone { frequency_index }) => Waveform::Tone { frequency_index },
                Some(WaveformSpec::Qpsk) => Waveform::Qpsk,
                None => Waveform::Tone {
                    frequency_index: k as u32 + 1,
                },
            };
            targets.push(TargetSource {
                position: point(spec.position),
                channel_variances,
                waveform,
            });
        }

        let scenario = Scenario {
            nodes,
            targets,
            grid,
            noise_power: self.noise_power,
            num_samples: self.num_samples,
            seed: self.seed,
            declared_snr_db: self.snr_db,
            channel_mode: match self.channel_mode {
                ChannelModeSpec::PerBatch => ChannelMode::PerBatch,
                ChannelModeSpec::PerSample => ChannelMode::PerSample,
            },
            noiseless: self.noiseless,
            tone_period: self.tone_period,
        };
        scenario
            .validate()
            .map_err(|e| invalid("scenario".into(), e.to_string()))?;

        if let Some(sweep) = &self.sweep {
            sweep.validate().map_err(|(loc, msg)| invalid(format!("sweep.{loc}"), msg))?;
        }
        Ok(scenario)
    }

    /// File form of an existing scenario, with explicit variances and waveforms.
    pub fn from_scenario(scenario: &Scenario<f64>) -> Self {
        let grid = match scenario.grid.descriptor() {
            crate::geometry::GridDescriptor::Line { start, end, step } => GridSpec::Line {
                start: array(start),
                end: array(end),
                step: *step,
            },
            crate::geometry::GridDescriptor::Rect {
                x_range,
                y_range,
                step,
                z,
            } => GridSpec::Rect {
                x_range: [x_range.0, x_range.1],
                y_range: [y_range.0, y_range.1],
                step: *step,
                z: *z,
            },
            crate::geometry::GridDescriptor::Explicit => GridSpec::Points {
                points: scenario.grid.points().iter().map(array).collect(),
            },
        };
        ScenarioFile {
            num_samples: scenario.num_samples,
            seed: scenario.seed,
            snr_db: scenario.declared_snr_db,
            noise_power: scenario.noise_power,
            num_antennas: None,
            spacing_over_wavelength: default_spacing(),
            channel_mode: match scenario.channel_mode {
                ChannelMode::PerBatch => ChannelModeSpec::PerBatch,
                ChannelMode::PerSample => ChannelModeSpec::PerSample,
            },
            noiseless: scenario.noiseless,
            tone_period: scenario.tone_period,
            trials: None,
            grid,
            nodes: scenario
                .nodes
                .iter()
                .map(|n| NodeSpec {
                    position: array(&n.position),
                    axis: Some(array(&n.axis)),
                    num_antennas: Some(n.num_antennas),
                    spacing_over_wavelength: Some(n.spacing_over_wavelength),
                })
                .collect(),
            targets: scenario
                .targets
                .iter()
                .map(|t| TargetSpec {
                    position: array(&t.position),
                    waveform: Some(match t.waveform {
                        Waveform::Tone { frequency_index } => WaveformSpec::Tone { frequency_index },
                        Waveform::Qpsk => WaveformSpec::Qpsk,
                    }),
                    channel_variances: Some(t.channel_variances.clone()),
                })
                .collect(),
            sweep: None,
        }
    }
}

impl SweepSpec {
    fn validate(&self) -> Result<(), (String, String)> {
        if self.values.is_empty() {
            return Err(("values".into(), "must not be empty".into()));
        }
        for (i, w) in self.values.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err((format!("values[{}]", i + 1), "values must be strictly increasing".into()));
            }
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err((format!("values[{i}]"), "must be finite".into()));
            }
            if matches!(self.axis, SweepAxis::NumSamples | SweepAxis::NumAntennas) && (*v < 1.0 || v.fract() != 0.0) {
                return Err((format!("values[{i}]"), format!("{} must be a positive integer", self.axis)));
            }
        }
        if let Some(list) = &self.estimators {
            for (i, e) in list.iter().enumerate() {
                e.parse::<EstimatorKind>().map_err(|m| (format!("estimators[{i}]"), m))?;
            }
        }
        if self.trials == Some(0) {
            return Err(("trials".into(), "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn estimator_kinds(&self) -> Option<Vec<EstimatorKind>> {
        self.estimators
            .as_ref()
            .map(|l| l.iter().filter_map(|e| e.parse().ok()).collect())
    }

    /// The base scenario with the swept parameter set to `value`.
    pub fn apply(&self, base: &Scenario<f64>, value: f64) -> Result<Scenario<f64>, ConfigError> {
        let mut s = base.clone();
        let invalid = |message: String| ConfigError::Invalid {
            origin: "sweep".into(),
            location: format!("{} = {value}", self.axis),
            message,
        };
        match self.axis {
            SweepAxis::NumSamples => s.num_samples = value as usize,
            SweepAxis::SnrDb => {
                let factor = db_to_linear(value) / base.snr();
                for t in &mut s.targets {
                    for v in &mut t.channel_variances {
                        *v *= factor;
                    }
                }
                s.declared_snr_db = Some(value);
            }
            SweepAxis::NumAntennas => {
                for n in &mut s.nodes {
                    n.num_antennas = value as usize;
                }
            }
        }
        s.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(s)
    }
}

/// A parsed scenario file together with the scenario it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario<f64>,
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<LoadedScenario, ConfigError> {
    let file = ScenarioFile::parse(text, origin)?;
    let scenario = file.to_scenario(origin)?;
    Ok(LoadedScenario { file, scenario })
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}
