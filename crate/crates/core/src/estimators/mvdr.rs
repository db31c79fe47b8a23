use num_complex::Complex;

use super::{EstimatorError, EstimatorKind, PowerSpectrum, Whitener};
use crate::covariance::node_scm;
use crate::geometry::SteeringSet;
use crate::scalar::{norm_sqr, CMatrix, Real};
use crate::synth::SampleBatch;

/// Zero when every node block is full rank (`N_s >= N_R`), otherwise the noise power.
pub fn default_mvdr_loading<T: Real>(num_samples: usize, num_antennas: usize, noise_power: T) -> T {
    if num_samples >= num_antennas {
        T::zero()
    } else {
        noise_power
    }
}

/// `P_i = 1 / Σ_l a_lᴴ (R̂_SCM,l + δI)⁻¹ a_l`.
pub fn mvdr_spectrum<T: Real>(
    batch: &SampleBatch<T>,
    steering: &SteeringSet<T>,
    loading: T,
) -> Result<PowerSpectrum<T>, EstimatorError> {
    if !(loading >= T::zero()) {
        return Err(EstimatorError::Invalid("loading must be nonnegative".into()));
    }
    let blocks = (0..batch.num_nodes())
        .map(|l| {
            let mut b = node_scm(batch, l)?;
            for i in 0..b.nrows() {
                b[(i, i)].re += loading;
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;
    mvdr_spectrum_from_blocks(&blocks, steering)
}

/// MVDR spectrum from explicit per-node covariance blocks.
pub fn mvdr_spectrum_from_blocks<T: Real>(
    blocks: &[CMatrix<T>],
    steering: &SteeringSet<T>,
) -> Result<PowerSpectrum<T>, EstimatorError> {
    if blocks.len() != steering.num_nodes() {
        return Err(EstimatorError::Shape(format!(
            "{} covariance blocks for {} nodes",
            blocks.len(),
            steering.num_nodes()
        )));
    }
    let nr = steering.num_antennas();
    let whiteners = blocks
        .iter()
        .enumerate()
        .map(|(node, b)| {
            if b.shape() != (nr, nr) {
                return Err(EstimatorError::Shape(format!("block {node} is not {nr}x{nr}")));
            }
            Whitener::new(b).ok_or(EstimatorError::SingularBlock { node })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut scratch = vec![Complex::new(T::zero(), T::zero()); nr];
    let mut values = Vec::with_capacity(steering.num_points());
    for i in 0..steering.num_points() {
        let mut denom = T::zero();
        for (l, w) in whiteners.iter().enumerate() {
            scratch.copy_from_slice(steering.vector(i, l));
            w.solve_lower_in_place(&mut scratch, 0);
            denom += norm_sqr(&scratch);
        }
        let p = T::one() / denom;
        if !p.is_finite() || !(denom > T::zero()) {
            return Err(EstimatorError::SingularBlock { node: 0 });
        }
        values.push(p);
    }
    Ok(PowerSpectrum {
        values,
        estimator: EstimatorKind::Mvdr,
        iterations_run: 0,
        clamped: Vec::new(),
    })
}
