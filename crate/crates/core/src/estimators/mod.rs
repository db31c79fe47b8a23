//! Grid power-spectrum estimators: MVDR, beam-space and iterative sparse recovery.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::Cholesky;
use num_complex::Complex;
use thiserror::Error;

use crate::covariance::CovarianceError;
use crate::geometry::{SearchGrid, SteeringSet};
use crate::scalar::{CMatrix, Real};
use crate::synth::SampleBatch;

mod beamspace;
mod isr;
mod mvdr;

pub use beamspace::{bs_spectrum, bs_spectrum_from_covariance, BsConfig, DEFAULT_DET_FLOOR};
pub use isr::{
    isr_init, isr_spectrum, isr_update_lambda, isr_update_r, isr_update_x, IsrConfig, IsrState,
    IllConditionedPoint, TerminationRule, DIVERGENCE_TRACE_RATIO, ILL_CONDITIONED_LIMIT,
};
pub use mvdr::{default_mvdr_loading, mvdr_spectrum, mvdr_spectrum_from_blocks};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error("node {node} covariance block is singular; add diagonal loading (e.g. the noise power)")]
    SingularBlock { node: usize },
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid signal subspace: K*L = {signal_dim} must be smaller than N_R*L = {dim}")]
    InvalidSubspace { signal_dim: usize, dim: usize },
    #[error("non-finite value at iteration {iteration}, grid point {point}")]
    NonFinite { iteration: usize, point: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Mvdr,
    Bs,
    Isr,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Mvdr, EstimatorKind::Bs, EstimatorKind::Isr];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Mvdr => "mvdr",
            EstimatorKind::Bs => "bs",
            EstimatorKind::Isr => "isr",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mvdr" => Ok(EstimatorKind::Mvdr),
            "bs" => Ok(EstimatorKind::Bs),
            "isr" => Ok(EstimatorKind::Isr),
            other => Err(format!("unknown estimator '{other}' (expected mvdr, bs or isr)")),
        }
    }
}

/// Nonnegative power per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum<T: Real> {
    pub values: Vec<T>,
    pub estimator: EstimatorKind,
    /// ISR iterations performed; zero for the one-shot estimators.
    pub iterations_run: usize,
    /// Grid points whose value was clamped (beam-space determinant floor).
    pub clamped: Vec<usize>,
}

impl<T: Real> PowerSpectrum<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            if best.is_none_or(|b| *v > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Writes `x,y,z,value,estimator,iterations` rows aligned with `grid`.
    pub fn write_csv<W: Write>(&self, grid: &SearchGrid<T>, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "z", "value", "estimator", "iterations"])?;
        for (p, v) in grid.points().iter().zip(&self.values) {
            out.write_record([
                p.x.as_f64().to_string(),
                p.y.as_f64().to_string(),
                p.z.as_f64().to_string(),
                format!("{:e}", v.as_f64()),
                self.estimator.to_string(),
                self.iterations_run.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Settings for running any of the three estimators on one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions<T: Real> {
    pub isr: IsrConfig<T>,
    pub bs: BsConfig<T>,
    /// MVDR diagonal loading; `None` selects [`default_mvdr_loading`].
    pub mvdr_loading: Option<T>,
}

impl<T: Real> Default for EstimatorOptions<T> {
    fn default() -> Self {
        Self {
            isr: IsrConfig::default(),
            bs: BsConfig::default(),
            mvdr_loading: None,
        }
    }
}

/// Runs `kind` on `batch`. `noise_power` is the known `σ_v²`; `num_targets`
/// sizes the beam-space signal subspace.
pub fn estimate<T: Real>(
    kind: EstimatorKind,
    batch: &SampleBatch<T>,
    steering: &SteeringSet<T>,
    noise_power: T,
    num_targets: usize,
    options: &EstimatorOptions<T>,
) -> Result<PowerSpectrum<T>, EstimatorError> {
    match kind {
        EstimatorKind::Mvdr => {
            let loading = options.mvdr_loading.unwrap_or_else(|| {
                default_mvdr_loading(batch.num_samples(), batch.num_antennas(), noise_power)
            });
            mvdr_spectrum(batch, steering, loading)
        }
        EstimatorKind::Bs => bs_spectrum(batch, steering, num_targets, &options.bs),
        EstimatorKind::Isr => isr_spectrum(batch, steering, noise_power, &options.isr).map(|(p, _)| p),
    }
}

/// Lower Cholesky factor used to apply `R^{-1/2}` by forward substitution.
pub(crate) struct Whitener<T: Real> {
    lower: CMatrix<T>,
}

impl<T: Real> Whitener<T> {
    pub(crate) fn new(m: &CMatrix<T>) -> Option<Self> {
        Cholesky::new(m.clone()).map(|c| Self { lower: c.l() })
    }

    pub(crate) fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Replaces `b` by `L⁻¹ b`, assuming `b[..start]` is zero.
    pub(crate) fn solve_lower_in_place(&self, b: &mut [Complex<T>], start: usize) {
        let n = self.dim();
        let data = self.lower.as_slice();
        for c in start..n {
            let col = &data[c * n..(c + 1) * n];
            let xc = b[c] / col[c];
            b[c] = xc;
            if xc.re == T::zero() && xc.im == T::zero() {
                continue;
            }
            for (bi, lic) in b[c + 1..].iter_mut().zip(&col[c + 1..]) {
                *bi -= *lic * xc;
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::synth::trial_rng;
    use rand::Rng;

    pub fn random_complex(rng: &mut impl Rng) -> Complex<f64> {
        Complex::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    }

    /// Random Hermitian positive definite matrix `B Bᴴ + shift I`.
    pub fn random_hpd(dim: usize, rank: usize, shift: f64, seed: u64) -> CMatrix<f64> {
        let mut rng = trial_rng(seed, 17);
        let b = CMatrix::from_fn(dim, rank, |_, _| random_complex(&mut rng));
        &b * b.adjoint() + CMatrix::identity(dim, dim) * Complex::new(shift, 0.0)
    }
}
