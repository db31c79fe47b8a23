//! Peak extraction, peak-to-target assignment and Monte-Carlo error statistics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::{estimate, EstimatorKind, EstimatorOptions, PowerSpectrum};
use crate::geometry::{build_steering_set, Point, SearchGrid};
use crate::scalar::Real;
use crate::synth::{synthesize_trial, Scenario, SynthError};

/// Largest target count scored by exhaustive search over assignments.
pub const BRUTE_FORCE_MAX_TARGETS: usize = 6;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot score an empty peak set")]
    NoPeaks,
    #[error("no true target positions given")]
    NoTargets,
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid Monte-Carlo request: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak<T: Real> {
    pub index: usize,
    pub position: Point<T>,
    pub value: T,
}

/// Local maxima sorted by descending value (ties by grid index).
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet<T: Real> {
    pub peaks: Vec<Peak<T>>,
}

impl<T: Real> PeakSet<T> {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

/// Local maxima of `values` over the grid adjacency.
///
/// A point is a peak when it exceeds every neighbour, where an equal neighbour
/// only loses to the lower index. A flat plateau therefore yields one peak at
/// its lowest index.
pub fn find_peaks<T: Real>(values: &[T], grid: &SearchGrid<T>, max_peaks: usize) -> PeakSet<T> {
    let mut peaks: Vec<Peak<T>> = (0..values.len().min(grid.len()))
        .filter(|&i| {
            grid.neighbors(i).into_iter().all(|j| {
                let (vi, vj) = (values[i], values[j]);
                vi > vj || (vi == vj && i < j)
            })
        })
        .map(|i| Peak {
            index: i,
            position: grid.points()[i],
            value: values[i],
        })
        .collect();
    peaks.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index.cmp(&b.index))
    });
    peaks.truncate(max_peaks);
    PeakSet { peaks }
}

pub fn find_spectrum_peaks<T: Real>(spectrum: &PowerSpectrum<T>, grid: &SearchGrid<T>, max_peaks: usize) -> PeakSet<T> {
    find_peaks(&spectrum.values, grid, max_peaks)
}

/// Per-target outcome of matching peaks to ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetScore<T: Real> {
    pub squared_errors: Vec<T>,
    /// Index into the peak set of the matched peak, `None` when unmatched.
    pub matched_peak: Vec<Option<usize>>,
    /// Matched peak within one grid step of the target.
    pub resolved: Vec<bool>,
}

impl<T: Real> TargetScore<T> {
    pub fn mean_squared_error(&self) -> T {
        let n = T::from_usize_lossy(self.squared_errors.len());
        self.squared_errors.iter().fold(T::zero(), |a, b| a + *b) / n
    }

    pub fn all_resolved(&self) -> bool {
        self.resolved.iter().all(|r| *r)
    }

    pub fn resolved_fraction(&self) -> f64 {
        self.resolved.iter().filter(|r| **r).count() as f64 / self.resolved.len() as f64
    }
}

fn dist2<T: Real>(a: &Point<T>, b: &Point<T>) -> T {
    (a - b).norm_squared()
}

/// Best injective assignment of `m` peaks to the `k >= m` targets, as
/// `assignment[peak] = target`, by exhaustive search.
fn brute_force_assignment<T: Real>(cost: &[Vec<T>], k: usize, m: usize) -> Vec<usize> {
    fn recurse<T: Real>(
        cost: &[Vec<T>],
        peak: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        total: T,
        best: &mut (T, Vec<usize>),
    ) {
        if peak == current.capacity() {
            if total < best.0 {
                *best = (total, current.clone());
            }
            return;
        }
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                current.push(t);
                recurse(cost, peak + 1, used, current, total + cost[peak][t], best);
                current.pop();
                used[t] = false;
            }
        }
    }
    let mut best = (T::max_value().unwrap_or_else(|| T::lit(f64::MAX)), Vec::new());
    let mut current = Vec::with_capacity(m);
    recurse(cost, 0, &mut vec![false; k], &mut current, T::zero(), &mut best);
    best.1
}

/// Greedy closest-pair matching followed by pairwise-swap refinement.
fn greedy_assignment<T: Real>(cost: &[Vec<T>], k: usize, m: usize) -> Vec<usize> {
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|p| (0..k).map(move |t| (p, t))).collect();
    pairs.sort_by(|a, b| {
        cost[a.0][a.1]
            .partial_cmp(&cost[b.0][b.1])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut assignment = vec![usize::MAX; m];
    let mut target_taken = vec![false; k];
    for (p, t) in pairs {
        if assignment[p] == usize::MAX && !target_taken[t] {
            assignment[p] = t;
            target_taken[t] = true;
        }
    }
    loop {
        let mut improved = false;
        for a in 0..m {
            // Swap with another peak.
            for b in (a + 1)..m {
                let (ta, tb) = (assignment[a], assignment[b]);
                if cost[a][tb] + cost[b][ta] < cost[a][ta] + cost[b][tb] {
                    assignment.swap(a, b);
                    improved = true;
                }
            }
            // Move to a free target.
            for t in 0..k {
                if !target_taken[t] && cost[a][t] < cost[a][assignment[a]] {
                    target_taken[assignment[a]] = false;
                    target_taken[t] = true;
                    assignment[a] = t;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    assignment
}

/// Matches the `K` strongest peaks to the `K` true positions with minimum total
/// squared distance and returns per-target squared errors.
///
/// Targets left without a peak (fewer than `K` peaks) are charged the squared
/// distance to the nearest peak and marked unresolved.
pub fn assign_and_score<T: Real>(
    peaks: &PeakSet<T>,
    truth: &[Point<T>],
    grid_step: T,
) -> Result<TargetScore<T>, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::NoTargets);
    }
    if peaks.is_empty() {
        return Err(MetricsError::NoPeaks);
    }
    let k = truth.len();
    let used = &peaks.peaks[..k.min(peaks.len())];
    let m = used.len();
    let cost: Vec<Vec<T>> = used
        .iter()
        .map(|p| truth.iter().map(|t| dist2(&p.position, t)).collect())
        .collect();
    let assignment = if k <= BRUTE_FORCE_MAX_TARGETS {
        brute_force_assignment(&cost, k, m)
    } else {
        greedy_assignment(&cost, k, m)
    };

    let tolerance = grid_step * grid_step * T::lit(1.0 + 1e-9);
    let mut squared_errors = vec![T::zero(); k];
    let mut matched_peak = vec![None; k];
    let mut resolved = vec![false; k];
    for (p, &t) in assignment.iter().enumerate() {
        squared_errors[t] = cost[p][t];
        matched_peak[t] = Some(p);
        resolved[t] = cost[p][t] <= tolerance;
    }
    for t in 0..k {
        if matched_peak[t].is_none() {
            squared_errors[t] = (0..m).map(|p| cost[p][t]).fold(cost[0][t], |a, b| a.min(b));
        }
    }
    Ok(TargetScore {
        squared_errors,
        matched_peak,
        resolved,
    })
}

/// Aggregate over trials for one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    /// Mean over successful trials of the per-trial mean squared error (m²).
    pub mse: f64,
    /// Sample standard error of `mse`.
    pub std_err: f64,
    pub trials: usize,
    pub failures: usize,
    /// Fraction of trials in which every target was resolved.
    pub resolve_rate: f64,
    /// Mean fraction of targets resolved per trial.
    pub target_resolve_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    /// `None` when the estimator failed on this trial.
    pub mse: Option<f64>,
    pub resolved_fraction: f64,
    pub all_resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub per_estimator: BTreeMap<EstimatorKind, EstimatorSummary>,
    pub per_trial: BTreeMap<EstimatorKind, Vec<TrialRecord>>,
    pub config_echo: String,
}

impl MonteCarloReport {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.per_estimator.get(&kind)
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.config_echo);
        out.push_str("estimator        mse     std_err  resolve  targets  failures\n");
        for s in self.per_estimator.values() {
            out.push_str(&format!(
                "{:<9} {:>11.4e} {:>11.4e} {:>8.3} {:>8.3} {:>9}\n",
                s.estimator.as_str(), s.mse, s.std_err, s.resolve_rate, s.target_resolve_fraction, s.failures
            ));
        }
        out
    }
}

pub fn scenario_summary<T: Real>(scenario: &Scenario<T>) -> String {
    format!(
        "L={} N_R={} K={} N_G={} N_s={} SNR={:.2} dB seed={}",
        scenario.num_nodes(),
        scenario.num_antennas(),
        scenario.num_targets(),
        scenario.grid.len(),
        scenario.num_samples,
        scenario.snr_db().as_f64(),
        scenario.seed
    )
}

fn summarize(kind: EstimatorKind, records: &[TrialRecord]) -> EstimatorSummary {
    let errors: Vec<f64> = records.iter().filter_map(|r| r.mse).collect();
    let n = errors.len();
    let mse = if n > 0 { errors.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let std_err = if n > 1 {
        let var = errors.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let trials = records.len();
    EstimatorSummary {
        estimator: kind,
        mse,
        std_err,
        trials,
        failures: trials - n,
        resolve_rate: records.iter().filter(|r| r.all_resolved).count() as f64 / trials as f64,
        target_resolve_fraction: records.iter().map(|r| r.resolved_fraction).sum::<f64>() / trials as f64,
    }
}

/// Monte-Carlo localization error of each estimator on `scenario`.
///
/// Trial `t` draws from stream `(scenario.seed, t)`, so each trial's score is
/// independent of how many trials run and of scheduling.
pub fn monte_carlo_mse<T: Real>(
    scenario: &Scenario<T>,
    estimators: &[EstimatorKind],
    trials: usize,
    options: &EstimatorOptions<T>,
) -> Result<MonteCarloReport, MetricsError> {
    if trials == 0 {
        return Err(MetricsError::Invalid("trials must be at least 1".into()));
    }
    scenario.validate()?;
    let steering = build_steering_set(&scenario.nodes, &scenario.grid).map_err(SynthError::from)?;
    let truth = scenario.target_positions();
    let k = truth.len();
    let step = scenario.grid.step();

    let outcomes: Vec<Vec<TrialRecord>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Vec<TrialRecord>, MetricsError> {
            let batch = synthesize_trial(scenario, trial)?.batch;
            Ok(estimators
                .iter()
                .map(|&kind| {
                    let scored = estimate(kind, &batch, &steering, scenario.noise_power, k, options)
                        .map_err(|e| e.to_string())
                        .and_then(|spec| {
                            let peaks = find_spectrum_peaks(&spec, &scenario.grid, k);
                            assign_and_score(&peaks, &truth, step).map_err(|e| e.to_string())
                        });
                    match scored {
                        Ok(score) => TrialRecord {
                            trial,
                            mse: Some(score.mean_squared_error().as_f64()),
                            resolved_fraction: score.resolved_fraction(),
                            all_resolved: score.all_resolved(),
                        },
                        Err(e) => {
                            log::warn!("trial {trial}: {kind} failed: {e}");
                            TrialRecord {
                                trial,
                                mse: None,
                                resolved_fraction: 0.0,
                                all_resolved: false,
                            }
                        }
                    }
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let mut per_trial: BTreeMap<EstimatorKind, Vec<TrialRecord>> = BTreeMap::new();
    for row in outcomes {
        for (kind, rec) in estimators.iter().zip(row) {
            per_trial.entry(*kind).or_default().push(rec);
        }
    }
    let per_estimator = per_trial
        .iter()
        .map(|(kind, recs)| (*kind, summarize(*kind, recs)))
        .collect();
    Ok(MonteCarloReport {
        per_estimator,
        per_trial,
        config_echo: scenario_summary(scenario),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn line(n: usize) -> SearchGrid<f64> {
        SearchGrid::line(Point::zeros(), Point::new((n - 1) as f64, 0.0, 0.0), 1.0).unwrap()
    }

    fn pt(x: f64) -> Point<f64> {
        Point::new(x, 0.0, 0.0)
    }

    fn peaks_at(xs: &[f64]) -> PeakSet<f64> {
        PeakSet {
            peaks: xs
                .iter()
                .enumerate()
                .map(|(i, x)| Peak {
                    index: i,
                    position: pt(*x),
                    value: 10.0 - i as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn single_bump() {
        let ps = find_peaks(&[0.0, 1.0, 0.0], &line(3), 5);
        assert_eq!(ps.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn plateau_takes_lowest_index() {
        let ps = find_peaks(&[1.0, 1.0, 1.0], &line(3), 5);
        assert_eq!(ps.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn two_bumps_sorted_by_height() {
        let v: Vec<f64> = (0..21)
            .map(|i| {
                let x = i as f64;
                (-(x - 5.0).powi(2) / 2.0).exp() + 2.0 * (-(x - 14.0).powi(2) / 3.0).exp()
            })
            .collect();
        let ps = find_peaks(&v, &line(21), 10);
        assert_eq!(ps.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![14, 5]);
        assert_eq!(find_peaks(&v, &line(21), 1).len(), 1);
    }

    #[test]
    fn rectangle_peaks_use_four_neighbours() {
        let grid = SearchGrid::rect((0.0, 2.0), (0.0, 2.0), 1.0, 0.0).unwrap();
        // Diagonal neighbours do not suppress each other.
        let v = [0.1, 0.2, 3.0, 0.2, 0.1, 0.2, 2.0, 0.3, 0.2];
        let ps = find_peaks(&v, &grid, 5);
        assert_eq!(ps.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![2, 6]);
    }

    #[test]
    fn exact_peaks_score_zero() {
        let s = assign_and_score(&peaks_at(&[3.0, 1.0]), &[pt(1.0), pt(3.0)], 1.0).unwrap();
        assert_eq!(s.squared_errors, vec![0.0, 0.0]);
        assert!(s.all_resolved());
    }

    #[test]
    fn single_target_offset() {
        let s = assign_and_score(&peaks_at(&[8.0]), &[pt(7.8)], 0.1).unwrap();
        assert_relative_eq!(s.squared_errors[0], 0.04, epsilon = 1e-12);
        assert!(!s.resolved[0]);
        let s = assign_and_score(&peaks_at(&[7.9]), &[pt(7.8)], 0.1).unwrap();
        assert!(s.resolved[0]);
    }

    #[test]
    fn two_target_assignment_matches_enumeration() {
        let truth = [pt(2.0), pt(4.0)];
        let peaks = peaks_at(&[3.8, 2.5]);
        let s = assign_and_score(&peaks, &truth, 0.1).unwrap();
        // Both orderings, explicitly.
        let identity = (3.8f64 - 2.0).powi(2) + (2.5f64 - 4.0).powi(2);
        let swapped = (3.8f64 - 4.0).powi(2) + (2.5f64 - 2.0).powi(2);
        let best = identity.min(swapped);
        assert_relative_eq!(s.squared_errors.iter().sum::<f64>(), best, epsilon = 1e-12);
        assert_eq!(s.matched_peak, vec![Some(1), Some(0)]);
    }

    #[test]
    fn missing_peaks_fall_back_to_nearest() {
        let s = assign_and_score(&peaks_at(&[2.1]), &[pt(2.0), pt(5.0)], 0.5).unwrap();
        assert_relative_eq!(s.squared_errors[0], 0.01, epsilon = 1e-12);
        assert_relative_eq!(s.squared_errors[1], 2.9 * 2.9, epsilon = 1e-12);
        assert_eq!(s.resolved, vec![true, false]);
        assert_eq!(s.matched_peak[1], None);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(
            assign_and_score(&PeakSet::<f64> { peaks: vec![] }, &[pt(1.0)], 1.0),
            Err(MetricsError::NoPeaks)
        ));
        assert!(matches!(assign_and_score(&peaks_at(&[1.0]), &[], 1.0), Err(MetricsError::NoTargets)));
    }

    fn total_cost(cost: &[Vec<f64>], a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(p, t)| cost[p][*t]).sum()
    }

    proptest! {
        #[test]
        fn greedy_matches_brute_force_on_well_separated_sets(
            base in proptest::collection::vec(0.0..100.0f64, 7..9),
            jitter in proptest::collection::vec(-0.3..0.3f64, 9),
            perm_seed in any::<u64>(),
        ) {
            // Distinct truths at least one unit apart, peaks jittered and shuffled.
            let mut xs: Vec<f64> = base.iter().enumerate().map(|(i, b)| (b / 100.0) + 2.0 * i as f64).collect();
            let truth: Vec<_> = xs.iter().map(|x| pt(*x)).collect();
            let mut order: Vec<usize> = (0..xs.len()).collect();
            let mut s = perm_seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            xs = order.iter().map(|&i| xs[i] + jitter[i]).collect();
            let k = truth.len();
            let cost: Vec<Vec<f64>> = xs.iter().map(|x| truth.iter().map(|t| (x - t.x).powi(2)).collect()).collect();
            let greedy = greedy_assignment(&cost, k, k);
            let brute = brute_force_assignment(&cost, k, k);
            prop_assert!((total_cost(&cost, &greedy) - total_cost(&cost, &brute)).abs() < 1e-12);
        }

        #[test]
        fn score_is_invariant_under_target_relabeling(
            xs in proptest::collection::vec(0.0..20.0f64, 1..5),
            ps in proptest::collection::vec(0.0..20.0f64, 1..5),
        ) {
            let truth: Vec<_> = xs.iter().map(|x| pt(*x)).collect();
            let mut rev = truth.clone();
            rev.reverse();
            let peaks = peaks_at(&ps);
            let a = assign_and_score(&peaks, &truth, 0.1).unwrap();
            let b = assign_and_score(&peaks, &rev, 0.1).unwrap();
            prop_assert!((a.mean_squared_error() - b.mean_squared_error()).abs() < 1e-9);
        }
    }
}
