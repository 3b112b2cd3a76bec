//! Aggregation of per-sample search results into belief-level action values
//! and the risk-averse action choice.
//!
//! Each weighted sample contributes its per-action value table; the
//! aggregate keeps the weighted mean and the weighted population variance
//! per action. Selection maximizes `mean - alpha * variance`, penalizing
//! actions whose value swings across samples.

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QmdpError {
    #[error("no sample results to aggregate")]
    Empty,
    #[error("sample {index} has {got} actions, expected {expected}")]
    MismatchedActions { index: usize, expected: usize, got: usize },
    #[error("sample weights must sum to 1, got {0}")]
    BadWeights(f64),
}

/// Risk-aversion coefficient for action selection.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    pub alpha: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self { alpha: 0.01 }
    }
}

/// Mean and variance of one action's value across weighted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEstimate {
    pub q_mean: f64,
    pub q_variance: f64,
    /// The underlying (weight, value) pairs, one per sample.
    pub per_point: Vec<(f64, f64)>,
}

/// Belief-level value estimate for every action.
#[derive(Debug, Clone, PartialEq)]
pub struct QmdpEstimate {
    pub actions: Vec<ActionEstimate>,
}

impl QmdpEstimate {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }
}

/// Combine per-sample value tables into per-action weighted mean and
/// population variance. Weights must sum to one and every table must cover
/// the same action set.
pub fn aggregate(results: &[(f64, Vec<f64>)]) -> Result<QmdpEstimate, QmdpError> {
    let (_, first) = results.first().ok_or(QmdpError::Empty)?;
    let n_actions = first.len();
    for (i, (_, table)) in results.iter().enumerate() {
        if table.len() != n_actions {
            return Err(QmdpError::MismatchedActions {
                index: i,
                expected: n_actions,
                got: table.len(),
            });
        }
    }
    let weight_sum: f64 = results.iter().map(|(w, _)| w).sum();
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(QmdpError::BadWeights(weight_sum));
    }

    let mut actions = Vec::with_capacity(n_actions);
    for a in 0..n_actions {
        let q_mean: f64 = results.iter().map(|(w, q)| w * q[a]).sum();
        let q_variance: f64 = results.iter().map(|(w, q)| w * (q[a] - q_mean).powi(2)).sum();
        actions.push(ActionEstimate {
            q_mean,
            q_variance,
            per_point: results.iter().map(|(w, q)| (*w, q[a])).collect(),
        });
    }
    Ok(QmdpEstimate { actions })
}

/// Index of the action maximizing `q_mean - alpha * q_variance`; lowest
/// index on exact ties.
pub fn select_risk_averse(estimate: &QmdpEstimate, cfg: &RiskConfig) -> Result<usize, QmdpError> {
    if estimate.actions.is_empty() {
        return Err(QmdpError::Empty);
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, est) in estimate.actions.iter().enumerate() {
        let score = est.q_mean - cfg.alpha * est.q_variance;
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weighted_mean_of_two_samples() {
        let est = aggregate(&[(0.1, vec![3.0]), (0.9, vec![7.0])]).unwrap();
        assert!((est.actions[0].q_mean - (0.1 * 3.0 + 0.9 * 7.0)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_point_variance() {
        let est = aggregate(&[(0.5, vec![0.0]), (0.5, vec![10.0])]).unwrap();
        assert!((est.actions[0].q_mean - 5.0).abs() < 1e-12);
        assert!((est.actions[0].q_variance - 25.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_has_zero_variance() {
        let est = aggregate(&[(1.0, vec![4.0, -2.0, 9.5])]).unwrap();
        for a in &est.actions {
            assert_eq!(a.q_variance, 0.0);
        }
    }

    #[test]
    fn mismatched_action_sets_rejected() {
        assert!(matches!(
            aggregate(&[(0.5, vec![1.0, 2.0]), (0.5, vec![1.0])]),
            Err(QmdpError::MismatchedActions { .. })
        ));
        assert!(matches!(aggregate(&[]), Err(QmdpError::Empty)));
        assert!(matches!(
            aggregate(&[(0.5, vec![1.0]), (0.4, vec![1.0])]),
            Err(QmdpError::BadWeights(_))
        ));
    }

    #[test]
    fn alpha_zero_reduces_to_argmax_of_means() {
        let est = aggregate(&[(1.0, vec![1.0, 5.0, 3.0])]).unwrap();
        assert_eq!(select_risk_averse(&est, &RiskConfig { alpha: 0.0 }).unwrap(), 1);
    }

    #[test]
    fn variance_penalty_flips_the_choice() {
        // Action 0: mean 10, variance 400; action 1: mean 8, variance 1.
        // With alpha = 0.01 the scores are 6 vs 7.99, so action 1 wins.
        let est = QmdpEstimate {
            actions: vec![
                ActionEstimate { q_mean: 10.0, q_variance: 400.0, per_point: vec![] },
                ActionEstimate { q_mean: 8.0, q_variance: 1.0, per_point: vec![] },
            ],
        };
        assert_eq!(select_risk_averse(&est, &RiskConfig { alpha: 0.01 }).unwrap(), 1);
        assert_eq!(select_risk_averse(&est, &RiskConfig { alpha: 0.0 }).unwrap(), 0);
    }

    #[test]
    fn equal_variances_preserve_argmax_for_any_alpha() {
        let est = QmdpEstimate {
            actions: vec![
                ActionEstimate { q_mean: 2.0, q_variance: 3.0, per_point: vec![] },
                ActionEstimate { q_mean: 4.0, q_variance: 3.0, per_point: vec![] },
                ActionEstimate { q_mean: 1.0, q_variance: 3.0, per_point: vec![] },
            ],
        };
        for alpha in [0.0, 0.01, 0.1, 10.0] {
            assert_eq!(select_risk_averse(&est, &RiskConfig { alpha }).unwrap(), 1);
        }
    }

    fn random_results(rng: &mut ChaCha8Rng) -> Vec<(f64, Vec<f64>)> {
        let k = rng.gen_range(1..6);
        let n = rng.gen_range(1..6);
        let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        weights
            .into_iter()
            .map(|w| (w, (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect()))
            .collect()
    }

    #[test]
    fn randomized_aggregation_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1_000 {
            let results = random_results(&mut rng);
            let est = aggregate(&results).unwrap();

            // Variance is nonnegative and the mean lies within the sample range.
            for a in 0..est.num_actions() {
                assert!(est.actions[a].q_variance >= -1e-12);
                let vals: Vec<f64> = results.iter().map(|(_, q)| q[a]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(est.actions[a].q_mean >= lo - 1e-9 && est.actions[a].q_mean <= hi + 1e-9);
            }

            // Permutation invariance.
            let mut reversed = results.clone();
            reversed.reverse();
            let est_rev = aggregate(&reversed).unwrap();
            for (a, b) in est.actions.iter().zip(&est_rev.actions) {
                assert!((a.q_mean - b.q_mean).abs() < 1e-9);
                assert!((a.q_variance - b.q_variance).abs() < 1e-9);
            }

            // Alpha = 0 reduces to the argmax of means.
            let chosen = select_risk_averse(&est, &RiskConfig { alpha: 0.0 }).unwrap();
            let argmax = (0..est.num_actions())
                .max_by(|&a, &b| {
                    est.actions[a].q_mean.partial_cmp(&est.actions[b].q_mean).unwrap()
                })
                .unwrap();
            assert_eq!(chosen, argmax);
        }
    }

    #[test]
    fn zero_weight_point_changes_nothing() {
        // A zero-weight sample is rejected by belief construction upstream,
        // but aggregation itself must treat it as inert.
        let base = vec![(0.4, vec![1.0, 2.0]), (0.6, vec![3.0, -1.0])];
        let mut padded = base.clone();
        padded.push((0.0, vec![999.0, -999.0]));
        let a = aggregate(&base).unwrap();
        let b = aggregate(&padded).unwrap();
        for (x, y) in a.actions.iter().zip(&b.actions) {
            assert_eq!(x.q_mean.to_bits(), y.q_mean.to_bits());
            assert_eq!(x.q_variance.to_bits(), y.q_variance.to_bits());
        }
    }

    #[test]
    fn selection_invariant_under_common_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..200 {
            let results = random_results(&mut rng);
            let est = aggregate(&results).unwrap();
            let shift = rng.gen_range(-50.0..50.0);
            let shifted: Vec<(f64, Vec<f64>)> = results
                .iter()
                .map(|(w, q)| (*w, q.iter().map(|v| v + shift).collect()))
                .collect();
            let est_shifted = aggregate(&shifted).unwrap();
            let cfg = RiskConfig { alpha: rng.gen_range(0.0..0.1) };
            assert_eq!(
                select_risk_averse(&est, &cfg).unwrap(),
                select_risk_averse(&est_shifted, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn increasing_alpha_never_selects_strictly_worse_and_riskier() {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for _ in 0..500 {
            let results = random_results(&mut rng);
            let est = aggregate(&results).unwrap();
            let lo = RiskConfig { alpha: rng.gen_range(0.0..0.05) };
            let hi = RiskConfig { alpha: lo.alpha + rng.gen_range(0.0..0.05) };
            let a = select_risk_averse(&est, &lo).unwrap();
            let b = select_risk_averse(&est, &hi).unwrap();
            let (ea, eb) = (&est.actions[a], &est.actions[b]);
            let strictly_worse = eb.q_mean < ea.q_mean && eb.q_variance > ea.q_variance;
            assert!(!strictly_worse, "alpha {} -> {} chose dominated action", lo.alpha, hi.alpha);
        }
    }
}
