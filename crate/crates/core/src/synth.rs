//! Synthetic snapshot generation for the stacked multi-node signal model
//!
//! `y_l(n) = Σ_k √N_R α_{l,k} a_l(p_k) s_k(n) + v_l(n)`, stacked node by node.
//!
//! Every Monte-Carlo trial draws from its own ChaCha stream selected by
//! `(seed, trial)`, so trials are reproducible and independent of the order in
//! which they are run.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{
    common_array_size, steering_for_points, GeometryError, Point, SearchGrid, SensingNode,
    SteeringSet,
};
use crate::scalar::{czero, CMatrix, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Transmit waveform of a target. Both variants have unit modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    /// Single-carrier tone advancing `2π f / P` per sample, where `P` is the
    /// scenario's tone period, with a uniformly random start phase per trial.
    Tone { frequency_index: u32 },
    /// Independent uniformly drawn QPSK symbols `(±1 ± j)/√2`.
    Qpsk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSource<T: Real> {
    pub position: Point<T>,
    /// `σ²_{l,k}` for every sensing node `l`.
    pub channel_variances: Vec<T>,
    pub waveform: Waveform,
}

/// Whether channel coefficients stay fixed over a batch or are redrawn per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelMode {
    #[default]
    PerBatch,
    PerSample,
}

pub const DEFAULT_TONE_PERIOD: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub nodes: Vec<SensingNode<T>>,
    pub targets: Vec<TargetSource<T>>,
    pub grid: SearchGrid<T>,
    /// Noise power `σ_v²`, handed to the estimators as known.
    pub noise_power: T,
    pub num_samples: usize,
    pub seed: u64,
    /// SNR stated by the scenario author; must agree with the variances.
    pub declared_snr_db: Option<T>,
    pub channel_mode: ChannelMode,
    /// Skip the additive noise when synthesizing (estimators still see `noise_power`).
    pub noiseless: bool,
    pub tone_period: usize,
}

impl<T: Real> Scenario<T> {
    /// Scenario with one tone per target (frequency index `k + 1`) and
    /// uniform channel variances chosen to hit `snr_db`.
    pub fn with_snr(
        nodes: Vec<SensingNode<T>>,
        target_positions: &[Point<T>],
        grid: SearchGrid<T>,
        snr_db: T,
        num_samples: usize,
        seed: u64,
    ) -> Result<Self, SynthError> {
        let noise_power = T::one();
        let variance = db_to_linear(snr_db) * noise_power;
        let targets = target_positions
            .iter()
            .enumerate()
            .map(|(k, p)| TargetSource {
                position: *p,
                channel_variances: vec![variance; nodes.len()],
                waveform: Waveform::Tone {
                    frequency_index: k as u32 + 1,
                },
            })
            .collect();
        let scenario = Self {
            nodes,
            targets,
            grid,
            noise_power,
            num_samples,
            seed,
            declared_snr_db: Some(snr_db),
            channel_mode: ChannelMode::PerBatch,
            noiseless: false,
            tone_period: DEFAULT_TONE_PERIOD,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.num_antennas)
    }

    pub fn target_positions(&self) -> Vec<Point<T>> {
        self.targets.iter().map(|t| t.position).collect()
    }

    /// Linear SNR `(1/LK) Σ_l Σ_k σ²_{l,k} / σ_v²`.
    pub fn snr(&self) -> T {
        let count = T::from_usize_lossy(self.num_nodes() * self.num_targets());
        let total = self
            .targets
            .iter()
            .flat_map(|t| t.channel_variances.iter().copied())
            .fold(T::zero(), |a, b| a + b);
        total / count / self.noise_power
    }

    pub fn snr_db(&self) -> T {
        T::lit(10.0) * self.snr().log10()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |msg: String| Err(SynthError::Invalid(msg));
        common_array_size(&self.nodes)?;
        if self.targets.is_empty() {
            return invalid("at least one target is required".into());
        }
        if self.num_samples == 0 {
            return invalid("num_samples must be at least 1".into());
        }
        if !(self.noise_power > T::zero()) || !self.noise_power.is_finite() {
            return invalid("noise_power must be positive".into());
        }
        if self.tone_period == 0 {
            return invalid("tone_period must be at least 1".into());
        }
        for (k, t) in self.targets.iter().enumerate() {
            if t.channel_variances.len() != self.num_nodes() {
                return invalid(format!(
                    "targets[{k}].channel_variances has {} entries, expected one per node ({})",
                    t.channel_variances.len(),
                    self.num_nodes()
                ));
            }
            if let Some(l) = t.channel_variances.iter().position(|v| !(*v > T::zero()) || !v.is_finite()) {
                return invalid(format!("targets[{k}].channel_variances[{l}] must be positive"));
            }
            for (l, node) in self.nodes.iter().enumerate() {
                if node.position == t.position {
                    return invalid(format!("targets[{k}] coincides with nodes[{l}]"));
                }
            }
        }
        if let Some(declared) = self.declared_snr_db {
            let derived = self.snr();
            let expected = db_to_linear(declared);
            if !((derived - expected).abs() <= T::lit(1e-9) * expected.max(T::one())) {
                return invalid(format!(
                    "declared SNR {declared} dB disagrees with channel variances ({} dB)",
                    self.snr_db()
                ));
            }
        }
        Ok(())
    }

    /// Steering vectors towards the true target positions.
    pub fn target_steering(&self) -> Result<SteeringSet<T>, GeometryError> {
        steering_for_points(&self.nodes, &self.target_positions())
    }
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Independent random stream for Monte-Carlo trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re * s), T::lit(im * s))
}

/// Draws `α_l ~ CN(0, σ²_l)` for each variance.
pub fn draw_channel<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    variances: &[T],
) -> Result<Vec<Complex<T>>, SynthError> {
    if let Some(l) = variances.iter().position(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(SynthError::Invalid(format!("channel variance {l} must be positive")));
    }
    Ok(variances
        .iter()
        .map(|v| complex_gaussian(rng, v.as_f64()))
        .collect())
}

/// Per-trial waveform generator for one target.
#[derive(Debug, Clone, Copy)]
pub struct Emitter {
    waveform: Waveform,
    start_phase: f64,
    tone_period: usize,
}

impl Emitter {
    /// Draws the trial's random start phase (tones only).
    pub fn new<R: Rng + ?Sized>(waveform: Waveform, tone_period: usize, rng: &mut R) -> Self {
        let start_phase = match waveform {
            Waveform::Tone { .. } => rng.random::<f64>() * 2.0 * PI,
            Waveform::Qpsk => 0.0,
        };
        Self {
            waveform,
            start_phase,
            tone_period: tone_period.max(1),
        }
    }

    /// `s(n)` for the 1-based sample index `n`.
    pub fn emit<T: Real, R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Complex<T> {
        match self.waveform {
            Waveform::Tone { frequency_index } => {
                // Reduce the phase advance modulo the period before scaling to stay exact for large n.
                let cycles = (frequency_index as u64 * n as u64) % self.tone_period as u64;
                let phase = self.start_phase + 2.0 * PI * cycles as f64 / self.tone_period as f64;
                crate::scalar::polar(T::one(), T::lit(phase))
            }
            Waveform::Qpsk => {
                let bits: u8 = rng.random_range(0..4);
                let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                Complex::new(T::lit(re), T::lit(im))
            }
        }
    }
}

/// Stacked snapshots `y(1..N_s)`; column `n` is `y(n+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch<T: Real> {
    snapshots: CMatrix<T>,
    num_nodes: usize,
    num_antennas: usize,
}

impl<T: Real> SampleBatch<T> {
    pub fn new(snapshots: CMatrix<T>, num_nodes: usize, num_antennas: usize) -> Result<Self, SynthError> {
        if snapshots.nrows() != num_nodes * num_antennas {
            return Err(SynthError::Invalid(format!(
                "snapshot length {} does not match {num_nodes} nodes x {num_antennas} antennas",
                snapshots.nrows()
            )));
        }
        Ok(Self {
            snapshots,
            num_nodes,
            num_antennas,
        })
    }

    pub fn snapshots(&self) -> &CMatrix<T> {
        &self.snapshots
    }

    pub fn num_samples(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn dim(&self) -> usize {
        self.snapshots.nrows()
    }

    /// `y(n+1)` as a contiguous slice.
    pub fn snapshot(&self, n: usize) -> &[Complex<T>] {
        let dim = self.dim();
        &self.snapshots.as_slice()[n * dim..(n + 1) * dim]
    }

    /// `y_l(n+1)`, the `l`-th length-`N_R` block of snapshot `n`.
    pub fn node_slice(&self, n: usize, l: usize) -> &[Complex<T>] {
        &self.snapshot(n)[l * self.num_antennas..(l + 1) * self.num_antennas]
    }

    /// Row range of node `l` inside a stacked snapshot.
    pub fn node_range(&self, l: usize) -> std::ops::Range<usize> {
        l * self.num_antennas..(l + 1) * self.num_antennas
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            snapshots: self.snapshots.map(|v| v.scale(c)),
            num_nodes: self.num_nodes,
            num_antennas: self.num_antennas,
        }
    }
}

/// All random quantities of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization<T: Real> {
    /// `L x K` channel matrices: one entry for per-batch mode, `N_s` for per-sample.
    pub channels: Vec<CMatrix<T>>,
    /// `K x N_s` transmit samples.
    pub waveforms: CMatrix<T>,
    /// `N_R L x N_s` additive noise, absent when noiseless.
    pub noise: Option<CMatrix<T>>,
}

impl<T: Real> Realization<T> {
    fn channel_at(&self, n: usize) -> &CMatrix<T> {
        if self.channels.len() == 1 {
            &self.channels[0]
        } else {
            &self.channels[n]
        }
    }
}

/// Draws a full realization for `trial` of `scenario`.
pub fn draw_realization<T: Real>(scenario: &Scenario<T>, trial: u64) -> Result<Realization<T>, SynthError> {
    let mut rng = trial_rng(scenario.seed, trial);
    let l_count = scenario.num_nodes();
    let k_count = scenario.num_targets();
    let ns = scenario.num_samples;

    let draw_matrix = |rng: &mut ChaCha8Rng| -> Result<CMatrix<T>, SynthError> {
        let mut m = CMatrix::zeros(l_count, k_count);
        for (k, t) in scenario.targets.iter().enumerate() {
            let alpha = draw_channel(rng, &t.channel_variances)?;
            for (l, a) in alpha.into_iter().enumerate() {
                m[(l, k)] = a;
            }
        }
        Ok(m)
    };

    let mut channels = vec![draw_matrix(&mut rng)?];
    let emitters: Vec<Emitter> = scenario
        .targets
        .iter()
        .map(|t| Emitter::new(t.waveform, scenario.tone_period, &mut rng))
        .collect();
    let mut waveforms = CMatrix::zeros(k_count, ns);
    for n in 0..ns {
        for (k, e) in emitters.iter().enumerate() {
            waveforms[(k, n)] = e.emit(n + 1, &mut rng);
        }
    }
    if scenario.channel_mode == ChannelMode::PerSample {
        for _ in 1..ns {
            channels.push(draw_matrix(&mut rng)?);
        }
    }
    let noise = if scenario.noiseless {
        None
    } else {
        let var = scenario.noise_power.as_f64();
        let dim = l_count * scenario.num_antennas();
        let mut v = CMatrix::zeros(dim, ns);
        for n in 0..ns {
            for r in 0..dim {
                v[(r, n)] = complex_gaussian(&mut rng, var);
            }
        }
        Some(v)
    };
    Ok(Realization {
        channels,
        waveforms,
        noise,
    })
}

/// Forms the stacked snapshots for a given realization.
pub fn assemble<T: Real>(
    target_steering: &SteeringSet<T>,
    realization: &Realization<T>,
) -> Result<SampleBatch<T>, SynthError> {
    let l_count = target_steering.num_nodes();
    let nr = target_steering.num_antennas();
    let k_count = target_steering.num_points();
    let ns = realization.waveforms.ncols();
    if realization.waveforms.nrows() != k_count {
        return Err(SynthError::Invalid("waveform rows must equal the number of targets".into()));
    }
    let gain = T::from_usize_lossy(nr).sqrt();
    let mut y = match &realization.noise {
        Some(v) => v.clone(),
        None => CMatrix::zeros(l_count * nr, ns),
    };
    for n in 0..ns {
        let channel = realization.channel_at(n);
        for k in 0..k_count {
            let s = realization.waveforms[(k, n)];
            for l in 0..l_count {
                let coeff = channel[(l, k)] * s * gain;
                for (m, a) in target_steering.vector(k, l).iter().enumerate() {
                    y[(l * nr + m, n)] += coeff * a;
                }
            }
        }
    }
    SampleBatch::new(y, l_count, nr)
}

/// A synthesized batch together with the draws that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized<T: Real> {
    pub batch: SampleBatch<T>,
    pub realization: Realization<T>,
}

pub fn synthesize_trial<T: Real>(scenario: &Scenario<T>, trial: u64) -> Result<Synthesized<T>, SynthError> {
    scenario.validate()?;
    let steering = scenario.target_steering()?;
    let realization = draw_realization(scenario, trial)?;
    let batch = assemble(&steering, &realization)?;
    Ok(Synthesized { batch, realization })
}

/// Snapshots for trial 0 of `scenario`.
pub fn synthesize<T: Real>(scenario: &Scenario<T>) -> Result<SampleBatch<T>, SynthError> {
    Ok(synthesize_trial(scenario, 0)?.batch)
}

#[doc(hidden)]
pub fn zero_batch<T: Real>(num_nodes: usize, num_antennas: usize, num_samples: usize) -> SampleBatch<T> {
    SampleBatch {
        snapshots: CMatrix::from_element(num_nodes * num_antennas, num_samples, czero()),
        num_nodes,
        num_antennas,
    }
}
