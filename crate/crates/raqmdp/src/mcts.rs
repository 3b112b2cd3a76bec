//! Online planner for deterministic MDPs: Monte Carlo tree search with an
//! upper-confidence selection rule inside the tree and an optional
//! epsilon-greedy rule at the root.
//!
//! Pure UCT visits low-value actions rarely, which is fine for choosing a
//! single best action but produces unreliable value estimates for the rest.
//! When the caller aggregates per-action values across several searches (as
//! the QMDP layer does), every root action needs a trustworthy estimate, so
//! the root can spend a fraction `epsilon` of its selections on the
//! least-visited action instead.

use rand::{Rng, RngCore};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("state exposes no actions")]
    EmptyActionSet,
    #[error("invalid search config: {0}")]
    InvalidConfig(&'static str),
}

/// Deterministic MDP seen by the search. Stochasticity belongs in the belief
/// that produced the root state, not here.
pub trait Mdp {
    type State: Clone;

    /// Number of actions selectable by the search in `state`; actions are
    /// dense indices `0..n` in a fixed order.
    fn num_actions(&self, state: &Self::State) -> usize;

    fn transition(&self, state: &Self::State, action: usize) -> Self::State;

    fn reward(&self, state: &Self::State, action: usize, next: &Self::State) -> f64;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Action applied during rollouts. May lie outside `0..num_actions` when
    /// the rollout policy uses a dedicated control envelope that
    /// `transition`/`reward` understand.
    fn rollout_action(&self, state: &Self::State, rng: &mut dyn RngCore) -> usize;
}

/// Per-action visit count and running mean of backed-up discounted returns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionStat {
    pub visits: u32,
    pub q: f64,
}

/// Visit statistics for one tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    /// Total selections made at this node; equals the sum of action visits.
    pub visits: u32,
    pub actions: Vec<ActionStat>,
}

impl NodeStats {
    pub fn new(num_actions: usize) -> Self {
        Self { visits: 0, actions: vec![ActionStat::default(); num_actions] }
    }
}

/// Search budget and shape.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Tree depth in decision steps.
    pub depth: usize,
    /// Total simulations per search call.
    pub queries: usize,
    /// Exploration constant in the upper-confidence bound.
    pub c_uct: f64,
    /// Probability of picking the least-visited root action instead of the
    /// upper-confidence choice.
    pub epsilon_root: f64,
    /// Per-step discount on returns.
    pub discount: f64,
    /// Decision period (s) baked into the MDP transitions; carried here so
    /// scenario configs keep the planning horizon explicit.
    pub dt: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { depth: 15, queries: 20_000, c_uct: 1.0, epsilon_root: 1.0, discount: 1.0, dt: 0.5 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.depth < 1 {
            return Err(SearchError::InvalidConfig("depth must be >= 1"));
        }
        if self.queries < 1 {
            return Err(SearchError::InvalidConfig("queries must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_root) {
            return Err(SearchError::InvalidConfig("epsilon_root must be in [0, 1]"));
        }
        if !(self.c_uct >= 0.0) {
            return Err(SearchError::InvalidConfig("c_uct must be >= 0"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(SearchError::InvalidConfig("discount must be in (0, 1]"));
        }
        if !(self.dt > 0.0) {
            return Err(SearchError::InvalidConfig("dt must be > 0"));
        }
        Ok(())
    }
}

/// Upper-confidence action choice. Unvisited actions take priority in index
/// order; among visited ones the highest `q + c * sqrt(ln N / N_a)` wins,
/// lowest index on ties.
pub fn select_action_uct(stats: &NodeStats, c: f64) -> Result<usize, SearchError> {
    if stats.actions.is_empty() {
        return Err(SearchError::EmptyActionSet);
    }
    if let Some(a) = stats.actions.iter().position(|s| s.visits == 0) {
        return Ok(a);
    }
    let ln_n = f64::ln(stats.visits.max(1) as f64);
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, s) in stats.actions.iter().enumerate() {
        let score = s.q + c * (ln_n / s.visits as f64).sqrt();
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    Ok(best)
}

/// Root action choice: with probability `1 - epsilon` the upper-confidence
/// rule, otherwise the least-visited action (lowest index on ties). With
/// `epsilon == 0` no random draw is consumed, so the trace matches a pure
/// upper-confidence search exactly.
pub fn select_action_root(
    stats: &NodeStats,
    c: f64,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<usize, SearchError> {
    if stats.actions.is_empty() {
        return Err(SearchError::EmptyActionSet);
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let mut best = 0;
        let mut fewest = u32::MAX;
        for (a, s) in stats.actions.iter().enumerate() {
            if s.visits < fewest {
                best = a;
                fewest = s.visits;
            }
        }
        return Ok(best);
    }
    select_action_uct(stats, c)
}

/// Final root statistics of one search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub root: NodeStats,
    /// Nodes added to the tree (one per simulation until saturation).
    pub expanded: usize,
}

impl SearchResult {
    pub fn q_values(&self) -> Vec<f64> {
        self.root.actions.iter().map(|s| s.q).collect()
    }

    pub fn visit_counts(&self) -> Vec<u32> {
        self.root.actions.iter().map(|s| s.visits).collect()
    }
}

struct Node<S> {
    state: S,
    depth: usize,
    terminal: bool,
    /// Reward collected on the edge entering this node.
    edge_reward: f64,
    stats: NodeStats,
    children: Vec<Option<u32>>,
}

/// Run `cfg.queries` simulations from `root_state`.
///
/// Each simulation descends the tree (root rule at depth zero, upper
/// confidence below), expands at most one new node, rolls out with the MDP's
/// rollout policy to the depth limit, and backs the discounted return up the
/// path as a running mean. Deterministic given the RNG seed.
pub fn search<M: Mdp>(
    root_state: &M::State,
    mdp: &M,
    cfg: &SearchConfig,
    rng: &mut dyn RngCore,
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let root_actions = mdp.num_actions(root_state);
    if root_actions == 0 {
        return Err(SearchError::EmptyActionSet);
    }

    let mut nodes: Vec<Node<M::State>> = Vec::with_capacity(cfg.queries.min(1 << 20) + 1);
    nodes.push(Node {
        state: root_state.clone(),
        depth: 0,
        terminal: mdp.is_terminal(root_state),
        edge_reward: 0.0,
        stats: NodeStats::new(root_actions),
        children: vec![None; root_actions],
    });

    let mut path: Vec<(u32, usize)> = Vec::with_capacity(cfg.depth + 1);
    for _ in 0..cfg.queries {
        path.clear();
        let mut current: u32 = 0;
        let mut tail = 0.0;

        loop {
            if nodes[current as usize].terminal || nodes[current as usize].depth >= cfg.depth {
                break;
            }
            let action = if current == 0 {
                select_action_root(&nodes[0].stats, cfg.c_uct, cfg.epsilon_root, rng)?
            } else {
                select_action_uct(&nodes[current as usize].stats, cfg.c_uct)?
            };
            path.push((current, action));

            if let Some(child) = nodes[current as usize].children[action] {
                current = child;
                continue;
            }

            // Expand: one new node per simulation, then roll out.
            let (child_idx, rollout_start_depth) = {
                let parent = &nodes[current as usize];
                let next = mdp.transition(&parent.state, action);
                let reward = mdp.reward(&parent.state, action, &next);
                debug_assert!(reward.is_finite(), "MDP reward must be finite");
                let depth = parent.depth + 1;
                let terminal = mdp.is_terminal(&next);
                let n_actions = mdp.num_actions(&next);
                let node = Node {
                    state: next,
                    depth,
                    terminal,
                    edge_reward: reward,
                    stats: NodeStats::new(n_actions),
                    children: vec![None; n_actions],
                };
                nodes.push(node);
                ((nodes.len() - 1) as u32, depth)
            };
            nodes[current as usize].children[action] = Some(child_idx);

            let leaf = &nodes[child_idx as usize];
            if !leaf.terminal && rollout_start_depth < cfg.depth {
                tail = rollout_return(
                    &leaf.state,
                    mdp,
                    cfg.depth - rollout_start_depth,
                    cfg.discount,
                    rng,
                );
            }
            break;
        }

        // Back up the discounted return along the path.
        let mut ret = tail;
        for &(node_idx, action) in path.iter().rev() {
            let child = nodes[node_idx as usize].children[action].expect("edge was traversed");
            ret = nodes[child as usize].edge_reward + cfg.discount * ret;
            let stats = &mut nodes[node_idx as usize].stats;
            let a = &mut stats.actions[action];
            a.visits += 1;
            a.q += (ret - a.q) / a.visits as f64;
            stats.visits += 1;
        }
    }

    let expanded = nodes.len() - 1;
    let root = nodes.swap_remove(0).stats;
    Ok(SearchResult { root, expanded })
}

fn rollout_return<M: Mdp>(
    start: &M::State,
    mdp: &M,
    max_steps: usize,
    discount: f64,
    rng: &mut dyn RngCore,
) -> f64 {
    let mut state = start.clone();
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..max_steps {
        if mdp.is_terminal(&state) {
            break;
        }
        let action = mdp.rollout_action(&state, rng);
        let next = mdp.transition(&state, action);
        total += weight * mdp.reward(&state, action, &next);
        weight *= discount;
        state = next;
    }
    total
}
