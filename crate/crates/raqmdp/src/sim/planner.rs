//! One behavior-planning cycle: sample the belief, search every sample,
//! aggregate, and choose.

use crate::belief::{generate_sigma_points, BeliefError, BeliefState, DEFAULT_CLOSENESS_EPS};
use crate::mcts::{search, SearchConfig, SearchError};
use crate::qmdp::{aggregate, select_risk_averse, QmdpError, QmdpEstimate, RiskConfig};
use crate::sim::mdp::HighwayMdp;
use crate::traffic::RoadModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("belief sampling failed: {0}")]
    Belief(#[from] BeliefError),
    #[error("tree search failed: {0}")]
    Search(#[from] SearchError),
    #[error("aggregation failed: {0}")]
    Qmdp(#[from] QmdpError),
}

/// Which planner variant drives the episode. The baselines differ from the
/// full planner only in the belief they consume; the search and selection
/// machinery is identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Full belief, risk-averse selection.
    RaQmdp,
    /// Stationary-object scenario baseline: assumes the road ahead is clear
    /// until detection.
    MctsP0,
    /// Stationary-object scenario baseline: assumes an object sits at sensor
    /// range with certainty.
    MctsP1,
    /// Ramp scenario baseline: reads the merging vehicle's velocity exactly.
    MctsGenie,
    /// Ramp scenario baseline: trusts the noisy measurement as truth.
    MctsNoisy,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::RaQmdp => "ra_qmdp",
            PlannerKind::MctsP0 => "mcts_p0",
            PlannerKind::MctsP1 => "mcts_p1",
            PlannerKind::MctsGenie => "mcts_genie",
            PlannerKind::MctsNoisy => "mcts_noisy",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "ra_qmdp" => Some(PlannerKind::RaQmdp),
            "mcts_p0" => Some(PlannerKind::MctsP0),
            "mcts_p1" => Some(PlannerKind::MctsP1),
            "mcts_genie" => Some(PlannerKind::MctsGenie),
            "mcts_noisy" => Some(PlannerKind::MctsNoisy),
            _ => None,
        }
    }
}

/// Outcome of one planning cycle.
#[derive(Debug, Clone)]
pub struct BpDecision {
    pub action: usize,
    pub estimate: QmdpEstimate,
    /// Root visit counts per action, summed across sigma points.
    pub root_visits: Vec<u32>,
    pub n_sigma_points: usize,
}

/// Split a query budget uniformly over `n` samples, handing the remainder to
/// the first (center) point.
pub fn split_budget(total: usize, n: usize) -> Vec<usize> {
    let base = total / n;
    let rem = total % n;
    (0..n).map(|i| if i == 0 { base + rem } else { base }).collect()
}

/// Run one full planning cycle: deterministic sigma points from the belief,
/// one tree search per point with its share of the query budget, weighted
/// aggregation, risk-averse choice. Per-point searches run in parallel with
/// RNG streams derived from `tick_seed`, so the result is independent of
/// scheduling.
pub fn plan_bp_action(
    belief: &BeliefState,
    w0: f64,
    mdp: &HighwayMdp,
    road: &RoadModel,
    search_cfg: &SearchConfig,
    risk_cfg: &RiskConfig,
    tick_seed: u64,
) -> Result<BpDecision, PlannerError> {
    let feasible = crate::belief::world_feasibility(road.clone(), mdp.vehicle_length);
    let eps = vec![DEFAULT_CLOSENESS_EPS; belief.dims().len()];
    let points = generate_sigma_points(belief, w0, &feasible, &eps)?;

    let n = points.points.len();
    let budgets = split_budget(search_cfg.queries, n);

    let results: Result<Vec<_>, SearchError> = points
        .points
        .par_iter()
        .enumerate()
        .map(|(i, point)| {
            let mut cfg = *search_cfg;
            cfg.queries = budgets[i].max(1);
            let root = mdp.root_from_world(&point.world, road);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(tick_seed, i as u64));
            let res = search(&root, mdp, &cfg, &mut rng)?;
            Ok((point.weight, res))
        })
        .collect();
    let results = results?;

    let tables: Vec<(f64, Vec<f64>)> =
        results.iter().map(|(w, r)| (*w, r.q_values())).collect();
    let estimate = aggregate(&tables)?;
    let action = select_risk_averse(&estimate, risk_cfg)?;

    let n_actions = estimate.num_actions();
    let mut root_visits = vec![0u32; n_actions];
    for (_, r) in &results {
        for (a, stat) in r.root.actions.iter().enumerate() {
            root_visits[a] += stat.visits;
        }
    }

    Ok(BpDecision { action, estimate, root_visits, n_sigma_points: n })
}

/// Derive an independent stream seed (splitmix-style finalizer).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idm::IdmParams;
    use crate::sim::mdp::{standard_actions, CostWeights};
    use crate::sim::sensor::scenario1_belief;
    use crate::traffic::{VehicleState, WorldState};

    #[test]
    fn budget_split_gives_remainder_to_center() {
        assert_eq!(split_budget(20_000, 3), vec![6668, 6666, 6666]);
        assert_eq!(split_budget(20_000, 2), vec![10_000, 10_000]);
        assert_eq!(split_budget(7, 5), vec![3, 1, 1, 1, 1]);
    }

    #[test]
    fn planner_kind_names_round_trip() {
        for k in [
            PlannerKind::RaQmdp,
            PlannerKind::MctsP0,
            PlannerKind::MctsP1,
            PlannerKind::MctsGenie,
            PlannerKind::MctsNoisy,
        ] {
            assert_eq!(PlannerKind::parse(k.name()), Some(k));
        }
        assert_eq!(PlannerKind::parse("nonsense"), None);
    }

    #[test]
    fn decision_is_deterministic_and_visits_cover_budget() {
        let road = RoadModel::single_lane();
        let world =
            WorldState::new(VehicleState::longitudinal(0.0, 29.17), vec![], 0.0).unwrap();
        let belief = scenario1_belief(&world, 60.0, 0.1, 99);
        let mdp = HighwayMdp::new(
            standard_actions(),
            IdmParams::default(),
            CostWeights::default(),
            0.5,
            5.0,
            None,
        );
        let cfg = SearchConfig { queries: 2_000, c_uct: 20.0, ..Default::default() };
        let risk = RiskConfig { alpha: 0.01 };
        let d1 = plan_bp_action(&belief, 0.5, &mdp, &road, &cfg, &risk, 1234).unwrap();
        let d2 = plan_bp_action(&belief, 0.5, &mdp, &road, &cfg, &risk, 1234).unwrap();
        assert_eq!(d1.action, d2.action);
        assert_eq!(d1.root_visits, d2.root_visits);
        for (a, b) in d1.estimate.actions.iter().zip(&d2.estimate.actions) {
            assert_eq!(a.q_mean.to_bits(), b.q_mean.to_bits());
            assert_eq!(a.q_variance.to_bits(), b.q_variance.to_bits());
        }
        assert_eq!(d1.n_sigma_points, 2);
        let total: u32 = d1.root_visits.iter().sum();
        assert_eq!(total, 2_000);
    }
}
