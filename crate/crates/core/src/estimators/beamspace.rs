use num_complex::Complex;

use super::{EstimatorError, EstimatorKind, PowerSpectrum};
use crate::covariance::{scm, CovarianceMatrix};
use crate::geometry::SteeringSet;
use crate::scalar::{czero, dotc, CMatrix, Real};
use crate::synth::SampleBatch;

pub const DEFAULT_DET_FLOOR: f64 = 1e-300;

/// Determinant floor for the beam-space spectrum and the value reported when
/// the floor is hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsConfig<T: Real> {
    pub det_floor: T,
    pub ceiling: T,
}

impl<T: Real> Default for BsConfig<T> {
    fn default() -> Self {
        // f32 cannot represent 1e-300; fall back to its smallest positive normal.
        let floor = T::from_f64(DEFAULT_DET_FLOOR)
            .filter(|f| *f > T::zero())
            .unwrap_or_else(|| T::lit(f64::from(f32::MIN_POSITIVE)));
        Self {
            det_floor: floor,
            ceiling: T::one() / floor,
        }
    }
}

/// Beam-space spectrum of the conventional sample covariance.
pub fn bs_spectrum<T: Real>(
    batch: &SampleBatch<T>,
    steering: &SteeringSet<T>,
    num_targets: usize,
    config: &BsConfig<T>,
) -> Result<PowerSpectrum<T>, EstimatorError> {
    let r = scm(batch)?;
    bs_spectrum_from_covariance(&r, steering, num_targets, config)
}

/// `P_i = 1 / det(A_iᴴ Π A_i)` with `Π` the projector onto the eigenvectors
/// beyond the `K L` largest eigenvalues.
pub fn bs_spectrum_from_covariance<T: Real>(
    cov: &CovarianceMatrix<T>,
    steering: &SteeringSet<T>,
    num_targets: usize,
    config: &BsConfig<T>,
) -> Result<PowerSpectrum<T>, EstimatorError> {
    let dim = steering.dim();
    let l_count = steering.num_nodes();
    let nr = steering.num_antennas();
    if cov.dim() != dim {
        return Err(EstimatorError::Shape(format!(
            "covariance is {0}x{0}, steering expects {dim}",
            cov.dim()
        )));
    }
    let signal_dim = num_targets * l_count;
    if signal_dim >= dim || num_targets == 0 {
        return Err(EstimatorError::InvalidSubspace { signal_dim, dim });
    }

    let eig = cov.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let noise_cols = &order[signal_dim..];
    let noise_dim = noise_cols.len();

    // Rows of U_n restricted to each node block, stored column-contiguous.
    let blocks: Vec<CMatrix<T>> = (0..l_count)
        .map(|l| CMatrix::from_fn(nr, noise_dim, |r, j| eig.eigenvectors[(l * nr + r, noise_cols[j])]))
        .collect();

    let mut values = Vec::with_capacity(steering.num_points());
    let mut clamped = Vec::new();
    let mut projections = vec![vec![czero::<T>(); noise_dim]; l_count];
    for i in 0..steering.num_points() {
        for (l, block) in blocks.iter().enumerate() {
            let a = steering.vector(i, l);
            for (j, w) in projections[l].iter_mut().enumerate() {
                *w = dotc(&block.as_slice()[j * nr..(j + 1) * nr], a);
            }
        }
        let gram = CMatrix::from_fn(l_count, l_count, |l, m| -> Complex<T> {
            dotc(&projections[l], &projections[m])
        });
        let det = gram.determinant().re;
        if det > config.det_floor && det.is_finite() {
            values.push(T::one() / det);
        } else {
            values.push(config.ceiling);
            clamped.push(i);
        }
    }
    if !clamped.is_empty() {
        log::debug!("beam-space determinant floor hit at {} grid points", clamped.len());
    }
    Ok(PowerSpectrum {
        values,
        estimator: EstimatorKind::Bs,
        iterations_run: 0,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceKind;
    use crate::estimators::test_support::random_hpd;
    use crate::geometry::{build_steering_set, Point, SearchGrid, SensingNode};
    use crate::synth::{synthesize, Scenario};

    fn steering(nr: usize) -> (SearchGrid<f64>, SteeringSet<f64>, Vec<SensingNode<f64>>) {
        let nodes = vec![
            SensingNode::with_defaults(Point::new(5.0, 0.0, 6.0), nr).unwrap(),
            SensingNode::with_defaults(Point::new(15.0, 0.0, 6.0), nr).unwrap(),
        ];
        let grid = SearchGrid::line(Point::zeros(), Point::new(20.0, 0.0, 0.0), 0.5).unwrap();
        let set = build_steering_set(&nodes, &grid).unwrap();
        (grid, set, nodes)
    }

    #[test]
    fn subspace_dimension_checked() {
        let (_, set, _) = steering(2);
        let cov = CovarianceMatrix::new(random_hpd(4, 4, 0.1, 1), CovarianceKind::Scm);
        assert!(matches!(
            bs_spectrum_from_covariance(&cov, &set, 2, &BsConfig::default()),
            Err(EstimatorError::InvalidSubspace { signal_dim: 4, dim: 4 })
        ));
        assert!(bs_spectrum_from_covariance(&cov, &set, 1, &BsConfig::default()).is_ok());
    }

    #[test]
    fn noiseless_target_diverges() {
        let (grid, _, nodes) = steering(8);
        let mut s = Scenario::with_snr(nodes.clone(), &[Point::new(8.0, 0.0, 0.0)], grid.clone(), 10.0, 4, 3).unwrap();
        s.noiseless = true;
        let batch = synthesize(&s).unwrap();
        let set = build_steering_set(&nodes, &grid).unwrap();
        let p = bs_spectrum(&batch, &set, 1, &BsConfig::default()).unwrap();
        let i0 = grid.nearest_index(&Point::new(8.0, 0.0, 0.0));
        assert_eq!(p.argmax(), Some(i0));
        assert!(p.values[i0] > 1e8);
    }

    #[test]
    fn argmax_invariant_under_scaling() {
        let (_, set, _) = steering(4);
        let batch = SampleBatch::new(random_hpd(8, 3, 0.0, 5), 2, 4).unwrap();
        let p1 = bs_spectrum(&batch, &set, 1, &BsConfig::default()).unwrap();
        let p2 = bs_spectrum(&batch.scaled(7.0), &set, 1, &BsConfig::default()).unwrap();
        assert_eq!(p1.argmax(), p2.argmax());
    }
}
