//! Small deterministic grid MDP with an exact finite-horizon value-iteration
//! solver. Serves as an independent reference point for exercising the tree
//! search: the solver enumerates states directly and shares no code with the
//! search path.

use crate::mcts::Mdp;
use rand::{Rng, RngCore};

/// Deterministic grid: move in four directions, walls bounce, a goal cell
/// pays out and terminates, a pit cell penalizes and terminates, and every
/// step costs a little.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    pub goal: (usize, usize),
    pub pit: (usize, usize),
    pub goal_reward: f64,
    pub pit_reward: f64,
    pub step_cost: f64,
}

impl Default for GridWorld {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            goal: (4, 4),
            pit: (2, 3),
            goal_reward: 10.0,
            pit_reward: -10.0,
            step_cost: 0.1,
        }
    }
}

pub const GRID_ACTIONS: usize = 4; // up, down, left, right

impl GridWorld {
    pub fn states(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.width).flat_map(move |x| (0..self.height).map(move |y| (x, y)))
    }

    pub fn is_terminal_cell(&self, s: (usize, usize)) -> bool {
        s == self.goal || s == self.pit
    }

    fn mv(&self, (x, y): (usize, usize), action: usize) -> (usize, usize) {
        let (dx, dy): (isize, isize) = match action {
            0 => (0, 1),
            1 => (0, -1),
            2 => (-1, 0),
            _ => (1, 0),
        };
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            (x, y)
        } else {
            (nx as usize, ny as usize)
        }
    }

    fn step_reward(&self, next: (usize, usize)) -> f64 {
        if next == self.goal {
            self.goal_reward
        } else if next == self.pit {
            self.pit_reward
        } else {
            -self.step_cost
        }
    }
}

impl Mdp for GridWorld {
    type State = (usize, usize);

    fn num_actions(&self, _: &Self::State) -> usize {
        GRID_ACTIONS
    }

    fn transition(&self, s: &Self::State, action: usize) -> Self::State {
        self.mv(*s, action)
    }

    fn reward(&self, _: &Self::State, _: usize, next: &Self::State) -> f64 {
        self.step_reward(*next)
    }

    fn is_terminal(&self, s: &Self::State) -> bool {
        self.is_terminal_cell(*s)
    }

    fn rollout_action(&self, _: &Self::State, rng: &mut dyn RngCore) -> usize {
        rng.gen_range(0..GRID_ACTIONS)
    }
}

/// Exact finite-horizon action values by backward induction.
///
/// `q[x][y][a]` is the optimal `horizon`-step discounted return of taking
/// `a` in `(x, y)` and acting optimally afterwards.
pub fn value_iteration(grid: &GridWorld, horizon: usize, discount: f64) -> Vec<Vec<[f64; GRID_ACTIONS]>> {
    let mut v = vec![vec![0.0; grid.height]; grid.width];
    let mut q = vec![vec![[0.0; GRID_ACTIONS]; grid.height]; grid.width];
    for _ in 0..horizon {
        let mut v_next = vec![vec![0.0; grid.height]; grid.width];
        for (x, y) in grid.states() {
            if grid.is_terminal_cell((x, y)) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..GRID_ACTIONS {
                let next = grid.mv((x, y), a);
                let tail = if grid.is_terminal_cell(next) { 0.0 } else { v[next.0][next.1] };
                let qa = grid.step_reward(next) + discount * tail;
                q[x][y][a] = qa;
                best = best.max(qa);
            }
            v_next[x][y] = best;
        }
        v = v_next;
    }
    q
}

/// Actions within `tol` of the optimum for a state, from a value-iteration
/// table.
pub fn optimal_actions(q: &[f64; GRID_ACTIONS], tol: f64) -> Vec<usize> {
    let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..GRID_ACTIONS).filter(|&a| q[a] >= best - tol).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcts::{search, SearchConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_prefers_stepping_toward_goal() {
        let grid = GridWorld::default();
        let q = value_iteration(&grid, 15, 0.95);
        // From just left of the goal, moving right is optimal.
        let best = optimal_actions(&q[3][4], 1e-9);
        assert!(best.contains(&3), "best from (3,4): {best:?}");
        // Adjacent to the pit, stepping into it is never optimal.
        let near_pit = optimal_actions(&q[2][2], 1e-9);
        assert!(!near_pit.contains(&0), "(2,2) should not move up into the pit");
    }

    #[test]
    fn search_matches_oracle_on_most_start_states() {
        let grid = GridWorld::default();
        let discount = 0.95;
        let q_star = value_iteration(&grid, 15, discount);
        // Exploration constant sized to the reward range.
        let cfg = SearchConfig {
            depth: 15,
            queries: 20_000,
            c_uct: 12.0,
            epsilon_root: 1.0,
            discount,
            ..Default::default()
        };
        let mut matches = 0;
        let mut total = 0;
        for seed in 0..3u64 {
            for start in grid.states() {
                if grid.is_terminal_cell(start) {
                    continue;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                let res = search(&start, &grid, &cfg, &mut rng).unwrap();
                let qs = res.q_values();
                let chosen = (0..GRID_ACTIONS)
                    .max_by(|&a, &b| qs[a].partial_cmp(&qs[b]).unwrap())
                    .unwrap();
                if optimal_actions(&q_star[start.0][start.1], 1e-9).contains(&chosen) {
                    matches += 1;
                }
                total += 1;
            }
        }
        let frac = matches as f64 / total as f64;
        assert!(frac >= 0.95, "match fraction {frac}");
    }
}
