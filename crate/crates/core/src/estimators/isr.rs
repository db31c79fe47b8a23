//! Iterative sparse recovery.
//!
//! Every grid point `i` carries an `L`-dimensional source estimate
//! `x̂_i(n)` (one entry per sensing node). One cycle runs
//!
//! ```text
//! R̂(t) -> x̂_i(n) = (A_iᴴ R̂⁻¹ A_i)⁻¹ A_iᴴ R̂⁻¹ y(n)
//!      -> Λ̂_i    = (1/N_s) Σ_n x̂_i(n) x̂_i(n)ᴴ
//!      -> R̂(t+1) = Σ_i A_i Λ̂_i A_iᴴ + σ_v² I
//! ```
//!
//! and the spectrum is `P_i = tr(Λ̂_i) / N_R`. `R̂` is Cholesky-factored once
//! per cycle; all `R̂⁻¹` products go through forward substitution against the
//! factor (`R̂⁻¹ = L⁻ᴴ L⁻¹`), never an explicit inverse.

use nalgebra::Cholesky;
use num_complex::Complex;
use rayon::prelude::*;

use super::{EstimatorError, EstimatorKind, PowerSpectrum, Whitener};
use crate::covariance::{block_diag_scm, CovarianceKind, CovarianceMatrix};
use crate::geometry::SteeringSet;
use crate::scalar::{czero, dotc, CMatrix, Real};
use crate::synth::SampleBatch;

/// Condition number of `A_iᴴ R̂⁻¹ A_i` above which a point is reported and
/// solved through a truncated eigen-decomposition.
pub const ILL_CONDITIONED_LIMIT: f64 = 1e12;

/// `tr(R̂)` growth over `tr(R̂(0))` above which a run is reported as diverging.
pub const DIVERGENCE_TRACE_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationRule<T: Real> {
    pub max_iterations: usize,
    /// Stop once `‖P(t+1) - P(t)‖₂ / ‖P(t)‖₂` drops below this.
    pub tolerance: T,
}

impl<T: Real> Default for TerminationRule<T> {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            tolerance: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsrConfig<T: Real> {
    pub termination: TerminationRule<T>,
    /// Zero every `Λ̂_i` whose trace is below this fraction of the largest trace.
    /// Off by default.
    pub prune_threshold: Option<T>,
}

impl<T: Real> Default for IsrConfig<T> {
    fn default() -> Self {
        Self {
            termination: TerminationRule::default(),
            prune_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IllConditionedPoint {
    pub iteration: usize,
    pub point: usize,
    pub condition: f64,
}

/// Iterate of the cyclic update.
#[derive(Debug, Clone)]
pub struct IsrState<T: Real> {
    pub r_hat: CovarianceMatrix<T>,
    /// `L x L` source covariance per grid point.
    pub lambda_hat: Vec<CMatrix<T>>,
    /// `L x N_s` source estimates per grid point.
    pub x_hat: Vec<CMatrix<T>>,
    /// Completed cycles.
    pub iteration: usize,
    pub ill_conditioned: Vec<IllConditionedPoint>,
    /// `tr(R̂)` after each completed cycle, starting with `R̂(0)`.
    pub trace_history: Vec<T>,
}

impl<T: Real> IsrState<T> {
    /// `P_i = tr(Λ̂_i) / N_R`.
    pub fn spectrum_values(&self, num_antennas: usize) -> Vec<T> {
        let scale = T::one() / T::from_usize_lossy(num_antennas);
        self.lambda_hat
            .iter()
            .map(|lam| (0..lam.nrows()).fold(T::zero(), |acc, d| acc + lam[(d, d)].re) * scale)
            .collect()
    }
}

fn check_shapes<T: Real>(batch: &SampleBatch<T>, steering: &SteeringSet<T>) -> Result<(), EstimatorError> {
    if batch.num_nodes() != steering.num_nodes() || batch.num_antennas() != steering.num_antennas() {
        return Err(EstimatorError::Shape(format!(
            "batch has {} nodes x {} antennas, steering set {} x {}",
            batch.num_nodes(),
            batch.num_antennas(),
            steering.num_nodes(),
            steering.num_antennas()
        )));
    }
    Ok(())
}

fn check_noise<T: Real>(sigma_v2: T) -> Result<(), EstimatorError> {
    if !(sigma_v2 > T::zero()) || !sigma_v2.is_finite() {
        return Err(EstimatorError::Invalid("noise power must be positive".into()));
    }
    Ok(())
}

/// `R̂(0)` = block-diagonal SCM plus `σ_v² I` (recorded as loading); `Λ̂`, `x̂` zero.
pub fn isr_init<T: Real>(
    batch: &SampleBatch<T>,
    num_points: usize,
    sigma_v2: T,
) -> Result<IsrState<T>, EstimatorError> {
    check_noise(sigma_v2)?;
    let r_hat = block_diag_scm(batch)?.with_loading(sigma_v2);
    let l_count = batch.num_nodes();
    Ok(IsrState {
        trace_history: vec![r_hat.trace()],
        r_hat,
        lambda_hat: vec![CMatrix::zeros(l_count, l_count); num_points],
        x_hat: vec![CMatrix::zeros(l_count, batch.num_samples()); num_points],
        iteration: 0,
        ill_conditioned: Vec::new(),
    })
}

/// Solves the Hermitian `gram · X = rhs`. Returns the solution and, when the
/// system is ill-conditioned, its condition number.
fn solve_gram<T: Real>(gram: &CMatrix<T>, rhs: &CMatrix<T>) -> (CMatrix<T>, Option<f64>) {
    let eig = gram.clone().symmetric_eigen();
    let (mut lo, mut hi) = (T::max_value().unwrap_or_else(|| T::lit(f64::MAX)), T::zero());
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let condition = if lo > T::zero() { (hi / lo).as_f64() } else { f64::INFINITY };
    if condition <= ILL_CONDITIONED_LIMIT {
        if let Some(chol) = Cholesky::new(gram.clone()) {
            return (chol.solve(rhs), None);
        }
    }
    // Truncated pseudo-inverse through the eigenbasis.
    let cutoff = hi * T::lit(1.0 / ILL_CONDITIONED_LIMIT);
    let u = &eig.eigenvectors;
    let mut coeffs = u.adjoint() * rhs;
    for (r, lambda) in eig.eigenvalues.iter().enumerate() {
        let inv = if *lambda > cutoff && *lambda > T::zero() { T::one() / *lambda } else { T::zero() };
        for c in 0..coeffs.ncols() {
            coeffs[(r, c)] = coeffs[(r, c)].scale(inv);
        }
    }
    (u * coeffs, Some(condition))
}

/// Weighted least-squares source estimates for every grid point and sample.
pub fn isr_update_x<T: Real>(
    state: &mut IsrState<T>,
    batch: &SampleBatch<T>,
    steering: &SteeringSet<T>,
) -> Result<(), EstimatorError> {
    check_shapes(batch, steering)?;
    if state.x_hat.len() != steering.num_points() {
        return Err(EstimatorError::Shape("state and steering disagree on grid size".into()));
    }
    let whitener = Whitener::new(state.r_hat.matrix()).ok_or(EstimatorError::NotPositiveDefinite)?;
    let dim = batch.dim();
    let ns = batch.num_samples();
    let nr = batch.num_antennas();
    let l_count = batch.num_nodes();

    // Z = L⁻¹ Y, column-major.
    let mut z = batch.snapshots().clone();
    for n in 0..ns {
        whitener.solve_lower_in_place(&mut z.as_mut_slice()[n * dim..(n + 1) * dim], 0);
    }
    let z = &z;
    let iteration = state.iteration + 1;

    let results: Vec<(CMatrix<T>, Option<f64>)> = (0..steering.num_points())
        .into_par_iter()
        .map(|i| {
            // V = L⁻¹ A_i; column l is zero above row l·N_R.
            let mut v = vec![czero::<T>(); dim * l_count];
            for l in 0..l_count {
                let col = &mut v[l * dim..(l + 1) * dim];
                col[l * nr..(l + 1) * nr].copy_from_slice(steering.vector(i, l));
                whitener.solve_lower_in_place(col, l * nr);
            }
            let column = |l: usize| &v[l * dim..(l + 1) * dim];
            let gram = CMatrix::from_fn(l_count, l_count, |r, c| dotc(column(r), column(c)));
            let rhs = CMatrix::from_fn(l_count, ns, |r, n| dotc(column(r), &z.as_slice()[n * dim..(n + 1) * dim]));
            solve_gram(&gram, &rhs)
        })
        .collect();

    for (i, (x, condition)) in results.into_iter().enumerate() {
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(EstimatorError::NonFinite { iteration, point: i });
        }
        if let Some(condition) = condition {
            log::debug!("ISR iteration {iteration}: grid point {i} ill-conditioned ({condition:.3e})");
            state.ill_conditioned.push(IllConditionedPoint {
                iteration,
                point: i,
                condition,
            });
        }
        state.x_hat[i] = x;
    }
    Ok(())
}

/// `Λ̂_i = (1/N_s) Σ_n x̂_i(n) x̂_i(n)ᴴ`.
pub fn isr_update_lambda<T: Real>(state: &mut IsrState<T>) {
    let updated: Vec<CMatrix<T>> = state
        .x_hat
        .par_iter()
        .map(|x| {
            let l_count = x.nrows();
            let ns = x.ncols();
            let inv = T::one() / T::from_usize_lossy(ns.max(1));
            let mut lam = CMatrix::from_element(l_count, l_count, czero());
            for c in 0..l_count {
                for r in c..l_count {
                    let mut acc = czero::<T>();
                    for n in 0..ns {
                        acc += x[(r, n)] * x[(c, n)].conj();
                    }
                    let v = acc.scale(inv);
                    lam[(r, c)] = v;
                    lam[(c, r)] = v.conj();
                }
            }
            lam
        })
        .collect();
    state.lambda_hat = updated;
}

fn prune_lambda<T: Real>(state: &mut IsrState<T>, threshold: T) {
    let traces: Vec<T> = state
        .lambda_hat
        .iter()
        .map(|lam| (0..lam.nrows()).fold(T::zero(), |acc, d| acc + lam[(d, d)].re))
        .collect();
    let max = traces.iter().fold(T::zero(), |a, b| a.max(*b));
    for (lam, tr) in state.lambda_hat.iter_mut().zip(traces) {
        if tr < threshold * max {
            lam.fill(czero());
        }
    }
}

/// `R̂ = Σ_i A_i Λ̂_i A_iᴴ + σ_v² I`; completes one cycle.
pub fn isr_update_r<T: Real>(
    state: &mut IsrState<T>,
    steering: &SteeringSet<T>,
    sigma_v2: T,
) -> Result<(), EstimatorError> {
    check_noise(sigma_v2)?;
    if state.lambda_hat.len() != steering.num_points() {
        return Err(EstimatorError::Shape("state and steering disagree on grid size".into()));
    }
    let l_count = steering.num_nodes();
    let nr = steering.num_antennas();
    let pairs: Vec<(usize, usize)> = (0..l_count)
        .flat_map(|l| (l..l_count).map(move |m| (l, m)))
        .collect();
    let lambda = &state.lambda_hat;

    // Block (l, m) = Σ_i Λ̂_i[l, m] a_l(p_i) a_m(p_i)ᴴ, each summed in grid order.
    let blocks: Vec<CMatrix<T>> = pairs
        .par_iter()
        .map(|&(l, m)| {
            let mut block = CMatrix::from_element(nr, nr, czero::<T>());
            let data = block.as_mut_slice();
            for (i, lam) in lambda.iter().enumerate() {
                let c = lam[(l, m)];
                if c.re == T::zero() && c.im == T::zero() {
                    continue;
                }
                let (al, am) = (steering.vector(i, l), steering.vector(i, m));
                for (q, amq) in am.iter().enumerate() {
                    let w: Complex<T> = c * amq.conj();
                    for (dst, alp) in data[q * nr..(q + 1) * nr].iter_mut().zip(al) {
                        *dst += w * *alp;
                    }
                }
            }
            block
        })
        .collect();

    let dim = l_count * nr;
    let mut r = CMatrix::from_element(dim, dim, czero());
    for (&(l, m), block) in pairs.iter().zip(&blocks) {
        r.view_mut((l * nr, m * nr), (nr, nr)).copy_from(block);
        if l != m {
            r.view_mut((m * nr, l * nr), (nr, nr)).copy_from(&block.adjoint());
        }
    }
    state.r_hat = CovarianceMatrix::new(r, CovarianceKind::IsrReconstructed).with_loading(sigma_v2);
    state.trace_history.push(state.r_hat.trace());
    state.iteration += 1;
    Ok(())
}

fn l2_norm<T: Real>(v: impl Iterator<Item = T>) -> T {
    v.fold(T::zero(), |acc, x| acc + x * x).sqrt()
}

/// Runs the cyclic updates until the termination rule fires.
pub fn isr_spectrum<T: Real>(
    batch: &SampleBatch<T>,
    steering: &SteeringSet<T>,
    sigma_v2: T,
    config: &IsrConfig<T>,
) -> Result<(PowerSpectrum<T>, IsrState<T>), EstimatorError> {
    check_shapes(batch, steering)?;
    let mut state = isr_init(batch, steering.num_points(), sigma_v2)?;
    let nr = steering.num_antennas();
    let mut previous = vec![T::zero(); steering.num_points()];

    for _ in 0..config.termination.max_iterations {
        isr_update_x(&mut state, batch, steering)?;
        isr_update_lambda(&mut state);
        if let Some(threshold) = config.prune_threshold {
            prune_lambda(&mut state, threshold);
        }
        isr_update_r(&mut state, steering, sigma_v2)?;

        let current = state.spectrum_values(nr);
        if let Some(point) = current.iter().position(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite {
                iteration: state.iteration,
                point,
            });
        }
        let base = l2_norm(previous.iter().copied());
        let change = l2_norm(current.iter().zip(&previous).map(|(a, b)| *a - *b));
        previous = current;
        let converged = if base > T::zero() {
            change / base < config.termination.tolerance
        } else {
            change == T::zero()
        };
        if converged {
            break;
        }
    }

    if let (Some(first), Some(last)) = (state.trace_history.first(), state.trace_history.last()) {
        let growth = (*last / *first).as_f64();
        if growth > DIVERGENCE_TRACE_RATIO {
            log::warn!(
                "ISR reconstructed covariance grew {growth:.1}x in trace over {} iterations; the spectrum may be dominated by spurious power",
                state.iteration
            );
        }
    }

    Ok((
        PowerSpectrum {
            values: previous,
            estimator: EstimatorKind::Isr,
            iterations_run: state.iteration,
            clamped: Vec::new(),
        },
        state,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::test_support::{random_complex, random_hpd};
    use crate::geometry::{build_steering_set, Point, SearchGrid, SensingNode};
    use crate::scalar::relative_frobenius;
    use crate::synth::{trial_rng, zero_batch};
    use approx::assert_relative_eq;

    fn small_setup(l: usize, nr: usize) -> SteeringSet<f64> {
        let nodes: Vec<_> = (0..l)
            .map(|i| SensingNode::with_defaults(Point::new(3.0 + 7.0 * i as f64, 0.0, 6.0), nr).unwrap())
            .collect();
        let grid = SearchGrid::line(Point::zeros(), Point::new(20.0, 0.0, 0.0), 1.0).unwrap();
        build_steering_set(&nodes, &grid).unwrap()
    }

    fn random_batch(l: usize, nr: usize, ns: usize, seed: u64) -> SampleBatch<f64> {
        let mut rng = trial_rng(seed, 1);
        SampleBatch::new(CMatrix::from_fn(l * nr, ns, |_, _| random_complex(&mut rng)), l, nr).unwrap()
    }

    #[test]
    fn init_adds_noise_floor() {
        let batch = random_batch(2, 4, 1, 1);
        let state = isr_init(&batch, 5, 0.3).unwrap();
        assert_eq!(state.r_hat.loading(), 0.3);
        assert_eq!(state.iteration, 0);
        assert!(state.lambda_hat.iter().all(|m| m.iter().all(|v| v.norm() == 0.0)));
        assert!(state.r_hat.min_eigenvalue() >= 0.3 - 1e-10);
        // Single sample: block l is y_l y_lᴴ + σ²I.
        let y0 = nalgebra::DVector::from_column_slice(batch.node_slice(0, 0));
        let expected = &y0 * y0.adjoint() + CMatrix::identity(4, 4) * Complex::new(0.3, 0.0);
        assert!((state.r_hat.matrix().view((0, 0), (4, 4)) - expected).norm() < 1e-14);
        assert!(isr_init(&batch, 5, 0.0).is_err());
    }

    #[test]
    fn identity_covariance_gives_matched_filter() {
        let steering = small_setup(2, 4);
        let batch = random_batch(2, 4, 3, 2);
        let mut state = isr_init(&batch, steering.num_points(), 1.0).unwrap();
        state.r_hat = CovarianceMatrix::new(CMatrix::identity(8, 8), CovarianceKind::Analytic);
        isr_update_x(&mut state, &batch, &steering).unwrap();
        for i in 0..steering.num_points() {
            let a = steering.block_matrix(i);
            let expected = a.adjoint() * batch.snapshots();
            assert!((&state.x_hat[i] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn lambda_update_examples() {
        let steering = small_setup(2, 3);
        let batch = random_batch(2, 3, 1, 3);
        let mut state = isr_init(&batch, steering.num_points(), 1.0).unwrap();
        isr_update_lambda(&mut state);
        assert!(state.lambda_hat.iter().all(|m| m.iter().all(|v| v.norm() == 0.0)));

        isr_update_x(&mut state, &batch, &steering).unwrap();
        isr_update_lambda(&mut state);
        for (x, lam) in state.x_hat.iter().zip(&state.lambda_hat) {
            let expected = x * x.adjoint();
            assert!((lam - &expected).norm() < 1e-13);
        }
    }

    #[test]
    fn lambda_trace_identity() {
        let mut rng = trial_rng(11, 0);
        let x_hat: Vec<CMatrix<f64>> = (0..7).map(|_| CMatrix::from_fn(3, 5, |_, _| random_complex(&mut rng))).collect();
        let mut state = IsrState {
            r_hat: CovarianceMatrix::new(CMatrix::identity(3, 3), CovarianceKind::Analytic),
            lambda_hat: Vec::new(),
            x_hat,
            iteration: 0,
            ill_conditioned: Vec::new(),
            trace_history: Vec::new(),
        };
        isr_update_lambda(&mut state);
        for (x, lam) in state.x_hat.iter().zip(&state.lambda_hat) {
            let trace: f64 = (0..3).map(|d| lam[(d, d)].re).sum();
            assert_relative_eq!(trace, x.norm_squared() / 5.0, epsilon = 1e-12);
            assert!(crate::covariance::hermitian_defect(lam) == 0.0);
        }
    }

    #[test]
    fn r_update_examples() {
        let steering = small_setup(2, 4);
        let batch = random_batch(2, 4, 2, 4);
        let mut state = isr_init(&batch, steering.num_points(), 0.2).unwrap();
        isr_update_r(&mut state, &steering, 0.2).unwrap();
        assert!((state.r_hat.matrix() - CMatrix::identity(8, 8) * Complex::new(0.2, 0.0)).norm() < 1e-15);

        let i0 = 6;
        state.lambda_hat[i0] = CMatrix::identity(2, 2);
        isr_update_r(&mut state, &steering, 0.2).unwrap();
        let ev = state.r_hat.eigenvalues();
        for v in &ev[..6] {
            assert_relative_eq!(*v, 0.2, epsilon = 1e-10);
        }
        for v in &ev[6..] {
            assert_relative_eq!(*v, 1.2, epsilon = 1e-10);
        }
        assert_eq!(state.r_hat.kind(), CovarianceKind::IsrReconstructed);
        assert_eq!(state.iteration, 2);
    }

    #[test]
    fn reconstruction_identity_after_cycles() {
        let steering = small_setup(2, 4);
        let batch = random_batch(2, 4, 3, 5);
        let config = IsrConfig {
            termination: TerminationRule { max_iterations: 4, tolerance: 0.0 },
            prune_threshold: None,
        };
        let (_, state) = isr_spectrum(&batch, &steering, 0.5, &config).unwrap();
        let mut r = CMatrix::identity(8, 8) * Complex::new(0.5, 0.0);
        for (i, lam) in state.lambda_hat.iter().enumerate() {
            let a = steering.block_matrix(i);
            r += &a * lam * a.adjoint();
        }
        assert!(relative_frobenius(state.r_hat.matrix(), &r) < 1e-8);
        assert!(state.r_hat.max_hermitian_defect() <= 1e-12);
        assert!(state.r_hat.min_eigenvalue() >= 0.5 - 1e-10);
        for lam in &state.lambda_hat {
            let ev = lam.clone().symmetric_eigenvalues();
            assert!(ev.iter().all(|v| *v >= -1e-8));
        }
    }

    #[test]
    fn wls_forms_agree() {
        // (AᴴR⁻¹A)⁻¹AᴴR⁻¹y against the interference-plus-noise form.
        let steering = small_setup(2, 3);
        let i0 = 4;
        let a = steering.block_matrix(i0);
        let lam = random_hpd(2, 2, 0.0, 3) * Complex::new(0.1, 0.0);
        let r_in = random_hpd(6, 6, 0.5, 4);
        let r = &r_in + &a * &lam * a.adjoint();
        let batch = random_batch(2, 3, 2, 6);
        let mut state = isr_init(&batch, steering.num_points(), 1.0).unwrap();
        state.r_hat = CovarianceMatrix::new(r, CovarianceKind::Analytic);
        isr_update_x(&mut state, &batch, &steering).unwrap();
        let r_in_inv = r_in.try_inverse().unwrap();
        let gram = a.adjoint() * &r_in_inv * &a;
        let expected = gram.try_inverse().unwrap() * a.adjoint() * &r_in_inv * batch.snapshots();
        assert!(relative_frobenius(&state.x_hat[i0], &expected) < 1e-8);
    }

    #[test]
    fn zero_batch_yields_zero_spectrum() {
        let steering = small_setup(2, 4);
        let batch = zero_batch(2, 4, 3);
        let (p, state) = isr_spectrum(&batch, &steering, 1.0, &IsrConfig::default()).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
        assert_eq!(state.iteration, 1);
    }

    #[test]
    fn near_singular_covariance_stays_finite() {
        let steering = small_setup(1, 3);
        let batch = random_batch(1, 3, 2, 8);
        let mut state = isr_init(&batch, steering.num_points(), 1.0).unwrap();
        // Nearly rank-deficient R̂ makes AᴴR̂⁻¹A huge away from the dominant direction.
        let a = nalgebra::DVector::from_column_slice(steering.vector(3, 0));
        let r = CMatrix::identity(3, 3) * Complex::new(1e-10, 0.0) + &a * a.adjoint();
        state.r_hat = CovarianceMatrix::new(r, CovarianceKind::Analytic);
        isr_update_x(&mut state, &batch, &steering).unwrap();
        assert!(state.x_hat.iter().all(|x| x.iter().all(|v| v.re.is_finite())));
        let (_, cond) = solve_gram(&CMatrix::from_diagonal_element(2, 2, Complex::new(1.0, 0.0)), &CMatrix::zeros(2, 1));
        assert!(cond.is_none());
        let singular = CMatrix::from_fn(2, 2, |r, c| if r == 0 && c == 0 { Complex::new(1.0, 0.0) } else { czero() });
        let (x, cond) = solve_gram(&singular, &CMatrix::from_element(2, 1, Complex::new(1.0, 0.0)));
        assert!(cond.unwrap() > ILL_CONDITIONED_LIMIT);
        assert_relative_eq!(x[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_eq!(x[(1, 0)], czero());
    }

    #[test]
    fn pruning_zeroes_weak_points() {
        let steering = small_setup(2, 4);
        let batch = random_batch(2, 4, 3, 9);
        let config = IsrConfig {
            termination: TerminationRule { max_iterations: 3, tolerance: 0.0 },
            prune_threshold: Some(0.5),
        };
        let (p, _) = isr_spectrum(&batch, &steering, 0.5, &config).unwrap();
        let max = p.values.iter().cloned().fold(0.0, f64::max);
        assert!(p.values.iter().all(|v| *v == 0.0 || *v >= 0.5 * max - 1e-15));
        assert!(p.values.iter().filter(|v| **v == 0.0).count() > 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let steering = small_setup(2, 4);
        let batch = random_batch(2, 3, 1, 1);
        assert!(matches!(
            isr_spectrum(&batch, &steering, 1.0, &IsrConfig::default()),
            Err(EstimatorError::Shape(_))
        ));
    }
}
