//! Per-sample prediction MDP searched by the behavior planner.
//!
//! The tree steps the ego with perfect knowledge of its own dynamics while
//! every other object drives at constant velocity. One decision step covers
//! the behavior-planning period (0.5 s by default); an action is a bound on
//! the ego's longitudinal acceleration, executed by clamping the
//! car-following command into the interval.

use crate::idm::{idm_accel, safe_distance_unchecked, IdmParams};
use crate::mcts::Mdp;
use crate::traffic::{step_longitudinal, Gap, ObjectKind, RoadModel, WorldState};
use rand::RngCore;
use serde::Deserialize;
use smallvec::SmallVec;

/// Extra clearance the stop guard keeps beyond the jam distance (m).
pub const MP_STOP_MARGIN: f64 = 0.25;

/// Deceleration needed to come to rest `s0 + MP_STOP_MARGIN` short of the
/// lead, assuming the lead holds its velocity. `None` when not closing.
fn stop_guard_accel(v: f64, lead: Option<Gap>, idm: &IdmParams) -> Option<f64> {
    let g = lead?;
    let closing = v - g.lead_velocity.max(0.0);
    if closing <= 0.0 {
        return None;
    }
    let room = g.distance - (idm.s0 + MP_STOP_MARGIN);
    if room > 0.0 {
        Some((-closing * closing / (2.0 * room)).max(-idm.b_max))
    } else {
        Some(-idm.b_max)
    }
}

/// Acceleration the motion layer executes for a commanded interval: the
/// car-following command clamped into the interval, with two safety
/// overrides that only ever brake harder. The interval's lower bound yields
/// to the raw command once the live gap is inside the safe distance, and the
/// kinematic stop guard brakes at least hard enough to come to rest clear of
/// the lead (the raw law alone settles inside the jam distance). The upper
/// bound is always respected.
pub fn mp_accel(v: f64, lead: Option<Gap>, interval: BpAction, idm: &IdmParams) -> f64 {
    let raw = idm_accel(v, lead, idm, (-idm.b_max, idm.a_max));
    let mut cmd = if raw < interval.lo {
        let unsafe_gap = lead.map_or(false, |g| {
            g.distance < safe_distance_unchecked(v, g.lead_velocity.max(0.0), idm)
        });
        if unsafe_gap {
            raw
        } else {
            interval.lo
        }
    } else {
        raw.min(interval.hi)
    };
    if let Some(required) = stop_guard_accel(v, lead, idm) {
        cmd = cmd.min(required);
    }
    cmd.clamp(-idm.b_max, idm.a_max)
}

/// Acceleration assumed by the prediction model: the car-following command
/// clamped into the interval, with the stop guard confined to the interval's
/// own braking authority. Unlike execution, planning must not assume the
/// safety net will pierce the interval — otherwise every action looks
/// equally safe and the values stop distinguishing maneuvers.
pub fn planned_accel(v: f64, lead: Option<Gap>, interval: BpAction, idm: &IdmParams) -> f64 {
    let mut cmd = idm_accel(v, lead, idm, (interval.lo, interval.hi));
    if let Some(required) = stop_guard_accel(v, lead, idm) {
        let authority = interval.lo.max(-idm.b_max);
        cmd = cmd.min(required.max(authority));
    }
    cmd.clamp(-idm.b_max, idm.a_max)
}

/// One behavior-planning action: keep the lane with the longitudinal
/// acceleration confined to `[lo, hi]` m/s².
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct BpAction {
    pub lo: f64,
    pub hi: f64,
}

impl BpAction {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

/// The five standard acceleration intervals.
pub fn standard_actions() -> Vec<BpAction> {
    vec![
        BpAction::new(-8.0, -2.0),
        BpAction::new(-2.0, -1.0),
        BpAction::new(-1.0, 0.0),
        BpAction::new(0.0, 1.0),
        BpAction::new(1.0, 2.0),
    ]
}

/// Braking-only envelope applied during rollouts: coast at the current
/// velocity on a clear road, brake behind a lead.
pub const ROLLOUT_INTERVAL: BpAction = BpAction { lo: -8.0, hi: 0.0 };

/// Weights of the step-cost components. Each component is normalized to
/// order one before weighting; a crash additionally scales with the square
/// of the closing speed and terminates the branch.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub closeness: f64,
    pub crash: f64,
    pub hard_brake: f64,
    pub jerk: f64,
    pub velocity_deviation: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { closeness: 50.0, crash: 1000.0, hard_brake: 5.0, jerk: 5.0, velocity_deviation: 1.0 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), &'static str> {
        let all = [self.closeness, self.crash, self.hard_brake, self.jerk, self.velocity_deviation];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("cost weights must be nonnegative and finite");
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err("at least one cost weight must be positive");
        }
        Ok(())
    }
}

/// Compact non-ego object inside the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeObject {
    pub y: f64,
    pub v: f64,
    /// Lane the object started the search on; 0 is the ego's lane.
    pub lane: u32,
}

/// Search state: ego pose plus constant-velocity others.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeState {
    pub ego_y: f64,
    pub ego_v: f64,
    /// Acceleration executed on the edge into this state (for jerk and
    /// hard-brake costs).
    pub ego_a: f64,
    pub others: SmallVec<[TreeObject; 2]>,
    pub crashed: bool,
    /// Closing speed at the moment of the crash, zero otherwise.
    pub crash_closing: f64,
}

/// Prediction model shared by every sigma-point search within a planning
/// cycle.
pub struct HighwayMdp {
    pub actions: Vec<BpAction>,
    pub idm: IdmParams,
    pub cost: CostWeights,
    pub dt: f64,
    pub vehicle_length: f64,
    pub merge_point: Option<f64>,
}

impl HighwayMdp {
    pub fn new(
        actions: Vec<BpAction>,
        idm: IdmParams,
        cost: CostWeights,
        dt: f64,
        vehicle_length: f64,
        merge_point: Option<f64>,
    ) -> Self {
        Self { actions, idm, cost, dt, vehicle_length, merge_point }
    }

    /// Root search state for one sampled world.
    pub fn root_from_world(&self, world: &WorldState, road: &RoadModel) -> TreeState {
        let others = world
            .others
            .iter()
            .map(|o| TreeObject {
                y: o.state.y,
                v: if o.kind == ObjectKind::StationaryObject { 0.0 } else { o.state.vy },
                lane: road.lane_of(&o.state).unwrap_or(0),
            })
            .collect();
        TreeState {
            ego_y: world.ego.y,
            ego_v: world.ego.vy,
            ego_a: world.ego.ay,
            others,
            crashed: false,
            crash_closing: 0.0,
        }
    }

    fn on_ego_lane(&self, obj: &TreeObject) -> bool {
        obj.lane == 0 || self.merge_point.map_or(false, |m| obj.y >= m)
    }

    /// Nearest effective-same-lane object ahead of the ego.
    fn ego_lead(&self, s: &TreeState) -> Option<Gap> {
        let mut best: Option<Gap> = None;
        for o in &s.others {
            if self.on_ego_lane(o) && o.y > s.ego_y {
                let distance = o.y - s.ego_y - self.vehicle_length;
                if best.map_or(true, |b| distance < b.distance) {
                    best = Some(Gap { distance, lead_velocity: o.v });
                }
            }
        }
        best
    }

    fn interval(&self, action: usize) -> BpAction {
        if action < self.actions.len() {
            self.actions[action]
        } else {
            ROLLOUT_INTERVAL
        }
    }
}

impl Mdp for HighwayMdp {
    type State = TreeState;

    fn num_actions(&self, _: &TreeState) -> usize {
        self.actions.len()
    }

    fn transition(&self, s: &TreeState, action: usize) -> TreeState {
        debug_assert!(!s.crashed, "transition from a terminal state");
        let interval = self.interval(action);
        let lead = self.ego_lead(s);
        let accel = planned_accel(s.ego_v, lead, interval, &self.idm);
        let (ego_y, ego_v) = step_longitudinal(s.ego_y, s.ego_v, accel, self.dt);

        let mut next = TreeState {
            ego_y,
            ego_v,
            ego_a: accel,
            others: s.others.clone(),
            crashed: false,
            crash_closing: 0.0,
        };
        for o in &mut next.others {
            o.y += o.v * self.dt;
        }

        // Crash check against the new configuration; an order flip relative
        // to the previous step counts as a pass-through at this coarse step.
        for (before, after) in s.others.iter().zip(&next.others) {
            if !self.on_ego_lane(after) {
                continue;
            }
            let rel_before = before.y - s.ego_y;
            let rel_after = after.y - next.ego_y;
            let overlap = rel_after.abs() < self.vehicle_length;
            let flipped = (rel_before >= 0.0) != (rel_after >= 0.0);
            if overlap || flipped {
                let closing = if rel_before >= 0.0 {
                    s.ego_v - before.v
                } else {
                    before.v - s.ego_v
                };
                if closing > 0.0 || flipped {
                    next.crashed = true;
                    next.crash_closing = closing.max(0.0);
                    break;
                }
            }
        }
        next
    }

    fn reward(&self, s: &TreeState, _: usize, next: &TreeState) -> f64 {
        let w = &self.cost;
        let vd = self.idm.v_desired;
        let mut cost = 0.0;

        if next.crashed {
            cost += w.crash * (1.0 + (next.crash_closing / vd).powi(2));
        }

        if let Some(gap) = self.ego_lead(next) {
            if gap.distance <= 0.0 {
                cost += w.closeness;
            } else {
                let s_star = safe_distance_unchecked(next.ego_v, gap.lead_velocity.max(0.0), &self.idm);
                if gap.distance < s_star {
                    cost += w.closeness * ((s_star - gap.distance) / s_star).powi(2);
                }
            }
        }

        if next.ego_a < -self.idm.b_safe {
            let excess = (-next.ego_a - self.idm.b_safe) / (self.idm.b_max - self.idm.b_safe);
            cost += w.hard_brake * excess.powi(2);
        }

        cost += w.jerk * ((next.ego_a - s.ego_a) / self.idm.b_max).powi(2);
        cost += w.velocity_deviation * ((next.ego_v - vd) / vd).powi(2);

        -cost
    }

    fn is_terminal(&self, s: &TreeState) -> bool {
        s.crashed
    }

    fn rollout_action(&self, _: &TreeState, _: &mut dyn RngCore) -> usize {
        // Braking-only envelope, outside the searchable action set.
        self.actions.len()
    }
}
