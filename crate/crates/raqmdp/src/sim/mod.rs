//! Closed-loop episodes for the two uncertainty scenarios.
//!
//! The behavior planner runs every tenth motion tick (2 Hz against 20 Hz by
//! default): a sensor model fabricates the belief, the planner picks an
//! acceleration interval, and the motion layer executes the car-following
//! command clamped into that interval — except that it may brake below the
//! interval's lower bound whenever the live gap has fallen inside the safe
//! distance. Other vehicles follow the plain car-following law. Episodes end
//! at the configured duration, on a crash, or once the ego has fully stopped
//! behind the obstacle.

pub mod mdp;
pub mod planner;
pub mod sensor;
pub mod telemetry;

use crate::belief::BeliefState;
use crate::idm::{idm_accel, IdmParams};
use crate::mcts::SearchConfig;
use crate::qmdp::RiskConfig;
use crate::traffic::{
    step_kinematics, Gap, ObjectKind, RoadModel, RoadObject, TrafficError,
    VehicleRef, VehicleState, WorldState,
};
use mdp::{mp_accel, standard_actions, BpAction, CostWeights, HighwayMdp};
use planner::{mix_seed, plan_bp_action, PlannerError, PlannerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensor::{detection_probability, scenario1_belief, scenario2_belief, SensorModel};
use telemetry::{BpTick, EndReason, EpisodeSummary, MergeSnapshot, MpTick, Telemetry};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("planner failed at t={time}s: {source}")]
    Planner { time: f64, source: PlannerError },
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    StationaryObject,
    RampMerge,
}

/// Fully resolved episode setup.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub road: RoadModel,
    pub ego_start: VehicleState,
    pub others_start: Vec<RoadObject>,
    pub sensor: SensorModel,
    pub idm: IdmParams,
    pub search: SearchConfig,
    pub risk: RiskConfig,
    pub cost: CostWeights,
    pub planner: PlannerKind,
    pub actions: Vec<BpAction>,
    /// Episode duration cap (s).
    pub duration: f64,
    pub vehicle_length: f64,
    /// Center-point weight for sigma-point generation.
    pub w0: f64,
}

impl Scenario {
    /// Stationary object 400 m ahead, ego cruising at the desired velocity,
    /// detectability governed by `sensor_range`.
    pub fn stationary_object(sensor_range: f64, planner: PlannerKind) -> Self {
        Self {
            kind: ScenarioKind::StationaryObject,
            road: RoadModel::single_lane(),
            ego_start: VehicleState::longitudinal(0.0, 29.17),
            others_start: vec![RoadObject {
                id: 1,
                state: VehicleState::longitudinal(400.0, 0.0),
                kind: ObjectKind::StationaryObject,
            }],
            sensor: SensorModel::LimitedRange { range: sensor_range, window: 1.0, p_at_range: 0.1 },
            idm: IdmParams::default(),
            search: SearchConfig { c_uct: 20.0, ..Default::default() },
            risk: RiskConfig { alpha: 0.01 },
            cost: CostWeights::default(),
            planner,
            actions: standard_actions(),
            duration: 60.0,
            vehicle_length: 5.0,
            w0: 0.5,
        }
    }

    /// Ramp merge 300 m ahead, both vehicles starting at 20 m/s, the merging
    /// vehicle's velocity read through decaying noise.
    pub fn ramp_merge(planner: PlannerKind) -> Self {
        Self {
            kind: ScenarioKind::RampMerge,
            road: RoadModel::with_ramp(300.0),
            ego_start: VehicleState::longitudinal(0.0, 20.0),
            others_start: vec![RoadObject {
                id: 1,
                state: VehicleState::longitudinal(0.0, 20.0).with_x(3.5),
                kind: ObjectKind::Vehicle,
            }],
            sensor: SensorModel::VelocityNoise { sigma0: 4.0, tau: 3.0 },
            idm: IdmParams::default(),
            search: SearchConfig { c_uct: 20.0, ..Default::default() },
            risk: RiskConfig { alpha: 0.01 },
            cost: CostWeights::default(),
            planner,
            actions: standard_actions(),
            duration: 25.0,
            vehicle_length: 5.0,
            w0: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), EpisodeError> {
        let err = |m: String| Err(EpisodeError::Invalid(m));
        self.idm.validate().map_err(|e| EpisodeError::Invalid(e.to_string()))?;
        self.search.validate().map_err(|e| EpisodeError::Invalid(e.to_string()))?;
        self.cost.validate().map_err(|e| EpisodeError::Invalid(e.to_string()))?;
        self.sensor.validate().map_err(EpisodeError::Invalid)?;
        if self.actions.is_empty() {
            return err("actions: at least one acceleration interval required".into());
        }
        for (i, a) in self.actions.iter().enumerate() {
            if !(a.lo <= a.hi) {
                return err(format!("actions[{i}]: lo {} must be <= hi {}", a.lo, a.hi));
            }
        }
        if !(self.duration > 0.0) {
            return err(format!("episode.duration must be > 0, got {}", self.duration));
        }
        if !(self.vehicle_length > 0.0) {
            return err(format!(
                "episode.vehicle_length must be > 0, got {}",
                self.vehicle_length
            ));
        }
        if !(self.w0 > -1.0 && self.w0 < 1.0) {
            return err(format!("episode.w0 must be in (-1, 1), got {}", self.w0));
        }
        if !self.risk.alpha.is_finite() || self.risk.alpha < 0.0 {
            return err(format!("risk.alpha must be >= 0, got {}", self.risk.alpha));
        }
        match self.kind {
            ScenarioKind::StationaryObject => {
                if !matches!(self.sensor, SensorModel::LimitedRange { .. }) {
                    return err("scenario stationary_object needs sensor.kind = limited_range".into());
                }
                let objs: Vec<_> = self
                    .others_start
                    .iter()
                    .filter(|o| o.kind == ObjectKind::StationaryObject)
                    .collect();
                if objs.len() != 1 {
                    return err("scenario stationary_object needs exactly one stationary object".into());
                }
                if !matches!(
                    self.planner,
                    PlannerKind::RaQmdp | PlannerKind::MctsP0 | PlannerKind::MctsP1
                ) {
                    return err(format!(
                        "planner {} is not defined for scenario stationary_object",
                        self.planner.name()
                    ));
                }
            }
            ScenarioKind::RampMerge => {
                if !matches!(self.sensor, SensorModel::VelocityNoise { .. }) {
                    return err("scenario ramp_merge needs sensor.kind = velocity_noise".into());
                }
                if self.road.merge_point.is_none() {
                    return err("scenario ramp_merge needs road.merge_point".into());
                }
                let vehicles: Vec<_> = self
                    .others_start
                    .iter()
                    .filter(|o| o.kind == ObjectKind::Vehicle)
                    .collect();
                if vehicles.len() != 1 {
                    return err("scenario ramp_merge needs exactly one merging vehicle".into());
                }
                if !matches!(
                    self.planner,
                    PlannerKind::RaQmdp | PlannerKind::MctsGenie | PlannerKind::MctsNoisy
                ) {
                    return err(format!(
                        "planner {} is not defined for scenario ramp_merge",
                        self.planner.name()
                    ));
                }
            }
        }
        Ok(())
    }

    fn focus_object_id(&self) -> u32 {
        match self.kind {
            ScenarioKind::StationaryObject => self
                .others_start
                .iter()
                .find(|o| o.kind == ObjectKind::StationaryObject)
                .map(|o| o.id)
                .expect("validated"),
            ScenarioKind::RampMerge => self
                .others_start
                .iter()
                .find(|o| o.kind == ObjectKind::Vehicle)
                .map(|o| o.id)
                .expect("validated"),
        }
    }
}

/// Ego's true nearest same-lane lead, merge-aware.
fn true_ego_lead(world: &WorldState, road: &RoadModel, vehicle_length: f64) -> Option<Gap> {
    let ego_lane = road.lane_of(&world.ego);
    let mut best: Option<Gap> = None;
    for o in &world.others {
        if road.lane_of(&o.state) == ego_lane && o.state.y > world.ego.y {
            let distance = o.state.y - world.ego.y - vehicle_length;
            if best.map_or(true, |b| distance < b.distance) {
                best = Some(Gap { distance, lead_velocity: o.state.vy });
            }
        }
    }
    best
}

/// Crash: same-lane bumper overlap with positive closing speed, or a
/// pass-through (relative order flip) since the previous tick.
fn detect_crash(prev: &WorldState, world: &WorldState, road: &RoadModel, len: f64) -> Option<f64> {
    let ego_lane = road.lane_of(&world.ego);
    for (before, after) in prev.others.iter().zip(&world.others) {
        if road.lane_of(&after.state) != ego_lane {
            continue;
        }
        let rel_before = before.state.y - prev.ego.y;
        let rel_after = after.state.y - world.ego.y;
        let overlap = rel_after.abs() < len;
        let flipped = (rel_before >= 0.0) != (rel_after >= 0.0);
        let closing = if rel_before >= 0.0 {
            prev.ego.vy - before.state.vy
        } else {
            before.state.vy - prev.ego.vy
        };
        if (overlap && closing > 0.0) || flipped {
            return Some(closing.max(0.0));
        }
    }
    None
}

/// Run one deterministic closed-loop episode.
pub fn run_episode(scenario: &Scenario, seed: u64) -> Result<Telemetry, EpisodeError> {
    scenario.validate()?;

    let dt_bp = scenario.search.dt;
    let dt_mp = dt_bp / 10.0;
    let len = scenario.vehicle_length;
    let road = &scenario.road;
    let focus_id = scenario.focus_object_id();

    let highway = HighwayMdp::new(
        scenario.actions.clone(),
        scenario.idm,
        scenario.cost,
        dt_bp,
        len,
        road.merge_point,
    );

    let mut world = WorldState::new(scenario.ego_start, scenario.others_start.clone(), 0.0)?;
    let mut detect_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let sensor_seed = mix_seed(seed, 2);
    let search_seed = mix_seed(seed, 3);

    let mut detected = false;
    let mut detection_time: Option<f64> = None;
    let mut measured_mv_v = match &scenario.others_start[..] {
        [o] => o.state.vy,
        _ => 0.0,
    };
    let mut current_action = BpAction::new(0.0, 0.0);
    let mut prev_ay = scenario.ego_start.ay;
    let mut merge: Option<MergeSnapshot> = None;

    let mut mp_rows: Vec<MpTick> = Vec::new();
    let mut bp_rows: Vec<BpTick> = Vec::new();
    let mut end_reason = EndReason::DurationReached;
    let mut crashed = false;

    let total_ticks = (scenario.duration / dt_mp).round() as usize;
    for tick in 0..total_ticks {
        let t = tick as f64 * dt_mp;

        // Sensing: stationary-object detection latches per motion tick.
        if scenario.kind == ScenarioKind::StationaryObject && !detected {
            let obj = world.state_of(VehicleRef::Object(focus_id))?;
            let gap = obj.y - world.ego.y - len;
            let p = match scenario.sensor {
                SensorModel::LimitedRange { range, window, p_at_range } => {
                    detection_probability(gap, range, window, p_at_range)
                }
                _ => unreachable!("validated"),
            };
            if detect_rng.gen::<f64>() < p {
                detected = true;
                detection_time = Some(t);
            }
        }

        // Behavior planning at the slow rate.
        if tick % 10 == 0 {
            let bp_index = (tick / 10) as u64;
            let belief = build_belief(scenario, &world, detected, t, bp_index, sensor_seed, focus_id);
            if scenario.kind == ScenarioKind::RampMerge {
                if let Ok(mv) = belief.nominal_world().state_of(VehicleRef::Object(focus_id)) {
                    measured_mv_v = mv.vy;
                }
            }
            let decision = plan_bp_action(
                &belief,
                scenario.w0,
                &highway,
                road,
                &scenario.search,
                &scenario.risk,
                mix_seed(search_seed, bp_index),
            )
            .map_err(|source| EpisodeError::Planner { time: t, source })?;
            current_action = scenario.actions[decision.action];
            bp_rows.push(BpTick {
                time: t,
                action: decision.action,
                action_lo: current_action.lo,
                action_hi: current_action.hi,
                n_sigma_points: decision.n_sigma_points,
                q_mean: decision.estimate.actions.iter().map(|a| a.q_mean).collect(),
                q_variance: decision.estimate.actions.iter().map(|a| a.q_variance).collect(),
                root_visits: decision.root_visits,
            });
        }

        // Motion planning: car-following command confined to the action
        // interval, lower bound overridable downward when more deceleration
        // is needed for safety.
        let tracked_lead = tracked_ego_lead(scenario, &world, road, detected, measured_mv_v, len);
        let accel = mp_accel(world.ego.vy, tracked_lead, current_action, &scenario.idm);

        // Step the world.
        let prev_world = world.clone();
        world.ego = step_kinematics(&world.ego, accel, dt_mp)?;
        step_others(scenario, &mut world, road, len, dt_mp)?;
        let t_next = (tick + 1) as f64 * dt_mp;
        world.time = t_next;

        // Telemetry row.
        let jerk = (accel - prev_ay) / dt_mp;
        prev_ay = accel;
        let gap = true_ego_lead(&world, road, len);
        mp_rows.push(MpTick {
            time: t_next,
            ego_y: world.ego.y,
            ego_vy: world.ego.vy,
            ego_ay: accel,
            jerk,
            gap_to_lead: gap.map(|g| g.distance),
            time_headway: gap.and_then(|g| {
                (world.ego.vy > 0.0 && g.distance > 0.0).then(|| g.distance / world.ego.vy)
            }),
        });

        // Merge snapshot at the first tick past the merge point.
        if scenario.kind == ScenarioKind::RampMerge && merge.is_none() {
            if let Some(m) = road.merge_point {
                if world.ego.y >= m {
                    let mv = world.state_of(VehicleRef::Object(focus_id))?;
                    merge = Some(MergeSnapshot::capture(t_next, &world.ego, mv, len));
                }
            }
        }

        // Episode end checks.
        if let Some(_closing) = detect_crash(&prev_world, &world, road, len) {
            crashed = true;
            end_reason = EndReason::Crash;
            break;
        }
        if scenario.kind == ScenarioKind::StationaryObject
            && detected
            && world.ego.vy == 0.0
            && gap.map_or(false, |g| g.lead_velocity == 0.0)
        {
            end_reason = EndReason::StoppedBehindObstacle;
            break;
        }
    }

    let end_time = mp_rows.last().map_or(0.0, |r| r.time);
    let avg = |rows: &[&MpTick]| {
        if rows.is_empty() {
            f64::NAN
        } else {
            rows.iter().map(|r| r.ego_vy).sum::<f64>() / rows.len() as f64
        }
    };
    let all: Vec<&MpTick> = mp_rows.iter().collect();
    let avg_velocity = avg(&all);
    let event_time = match scenario.kind {
        ScenarioKind::StationaryObject => detection_time,
        ScenarioKind::RampMerge => merge.as_ref().map(|m| m.time),
    };
    let avg_velocity_pre_event = match event_time {
        Some(te) => {
            let pre: Vec<&MpTick> = mp_rows.iter().filter(|r| r.time <= te).collect();
            if pre.is_empty() {
                avg_velocity
            } else {
                avg(&pre)
            }
        }
        None => avg_velocity,
    };
    let max_abs_jerk = mp_rows.iter().map(|r| r.jerk.abs()).fold(0.0, f64::max);

    Ok(Telemetry {
        mp: mp_rows,
        bp: bp_rows,
        summary: EpisodeSummary {
            avg_velocity,
            avg_velocity_pre_event,
            max_abs_jerk,
            crashed,
            end_reason,
            end_time,
            detection_time,
            merge,
        },
    })
}

/// Belief seen by the configured planner at one planning tick.
fn build_belief(
    scenario: &Scenario,
    world: &WorldState,
    detected: bool,
    t: f64,
    bp_index: u64,
    sensor_seed: u64,
    focus_id: u32,
) -> BeliefState {
    match scenario.kind {
        ScenarioKind::StationaryObject => {
            if detected {
                return BeliefState::certain(world.clone());
            }
            let mut clear = world.clone();
            clear.others.retain(|o| o.id != focus_id);
            let (range, p) = match scenario.sensor {
                SensorModel::LimitedRange { range, p_at_range, .. } => (range, p_at_range),
                _ => unreachable!("validated"),
            };
            match scenario.planner {
                PlannerKind::MctsP0 => BeliefState::certain(clear),
                PlannerKind::MctsP1 => {
                    let b = scenario1_belief(&clear, range, p, focus_id);
                    BeliefState::certain(b.hypotheses()[0].0.clone())
                }
                _ => scenario1_belief(&clear, range, p, focus_id),
            }
        }
        ScenarioKind::RampMerge => {
            let (sigma0, tau) = match scenario.sensor {
                SensorModel::VelocityNoise { sigma0, tau } => (sigma0, tau),
                _ => unreachable!("validated"),
            };
            let true_v = world
                .state_of(VehicleRef::Object(focus_id))
                .expect("merging vehicle exists")
                .vy;
            match scenario.planner {
                PlannerKind::MctsGenie => BeliefState::certain(world.clone()),
                PlannerKind::MctsNoisy => {
                    let b = scenario2_belief(
                        world,
                        focus_id,
                        true_v,
                        t,
                        sigma0,
                        tau,
                        mix_seed(sensor_seed, bp_index),
                    );
                    BeliefState::certain(b.nominal_world())
                }
                _ => scenario2_belief(
                    world,
                    focus_id,
                    true_v,
                    t,
                    sigma0,
                    tau,
                    mix_seed(sensor_seed, bp_index),
                ),
            }
        }
    }
}

/// Lead the motion layer reacts to: true positions of objects it can see,
/// with the tracked (possibly noisy) lead velocity.
fn tracked_ego_lead(
    scenario: &Scenario,
    world: &WorldState,
    road: &RoadModel,
    detected: bool,
    measured_mv_v: f64,
    len: f64,
) -> Option<Gap> {
    match scenario.kind {
        ScenarioKind::StationaryObject => {
            if detected {
                true_ego_lead(world, road, len)
            } else {
                None
            }
        }
        ScenarioKind::RampMerge => {
            true_ego_lead(world, road, len).map(|g| Gap {
                distance: g.distance,
                lead_velocity: measured_mv_v,
            })
        }
    }
}

/// True dynamics for non-ego objects: stationary objects stay put; the
/// merging vehicle follows the car-following law against whatever leads it
/// on its (merge-aware) lane, and snaps onto the main lane when it crosses
/// the merge point.
fn step_others(
    scenario: &Scenario,
    world: &mut WorldState,
    road: &RoadModel,
    len: f64,
    dt: f64,
) -> Result<(), EpisodeError> {
    let ego = world.ego;
    let ego_lane = road.lane_of(&ego);
    let snapshot: Vec<RoadObject> = world.others.clone();
    for obj in &mut world.others {
        if obj.kind == ObjectKind::StationaryObject {
            continue;
        }
        let my_lane = road.lane_of(&obj.state);
        // Nearest lead among the ego and other objects on the same lane.
        let mut lead: Option<Gap> = None;
        if my_lane == ego_lane && ego.y > obj.state.y {
            lead = Some(Gap { distance: ego.y - obj.state.y - len, lead_velocity: ego.vy });
        }
        for other in &snapshot {
            if other.id != obj.id
                && road.lane_of(&other.state) == my_lane
                && other.state.y > obj.state.y
            {
                let d = other.state.y - obj.state.y - len;
                if lead.map_or(true, |g| d < g.distance) {
                    lead = Some(Gap { distance: d, lead_velocity: other.state.vy });
                }
            }
        }
        let accel = idm_accel(
            obj.state.vy,
            lead,
            &scenario.idm,
            (-scenario.idm.b_max, scenario.idm.a_max),
        );
        let before_merge = road
            .merge_point
            .map_or(false, |m| obj.state.y < m);
        obj.state = step_kinematics(&obj.state, accel, dt)?;
        if before_merge {
            if let Some(m) = road.merge_point {
                if obj.state.y >= m {
                    // Joins the main lane at the merge point.
                    if let Some(main) = road.lanes.first() {
                        obj.state.x = main.offset;
                    }
                }
            }
        }
    }
    Ok(())
}
