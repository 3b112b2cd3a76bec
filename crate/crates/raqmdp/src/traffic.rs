//! Road geometry, vehicle kinematic state, and deterministic time stepping.
//!
//! Everything here is an immutable value type; the stepping operations are
//! pure functions, so the same types can be shared freely between the
//! simulator and any number of concurrent tree searches.

use thiserror::Error;

/// Physical plausibility cap on longitudinal speed (m/s).
pub const MAX_SPEED: f64 = 70.0;

/// Physical plausibility cap on acceleration magnitude (m/s²).
pub const MAX_ACCEL: f64 = 8.0;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("time step must be > 0, got {0}")]
    NonPositiveDt(f64),
    #[error("duplicate object id {0}")]
    DuplicateObjectId(u32),
    #[error("unknown object id {0}")]
    UnknownObjectId(u32),
    #[error("lane width must be > 0 (lane {0})")]
    BadLaneWidth(u32),
    #[error("merge point {0} does not lie on two joined lanes")]
    BadMergePoint(f64),
}

/// Kinematic state of one road object: lateral and longitudinal position,
/// velocity, and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// Lateral position (m).
    pub x: f64,
    /// Longitudinal position (m).
    pub y: f64,
    /// Lateral velocity (m/s).
    pub vx: f64,
    /// Longitudinal velocity (m/s).
    pub vy: f64,
    /// Lateral acceleration (m/s²).
    pub ax: f64,
    /// Longitudinal acceleration (m/s²).
    pub ay: f64,
}

impl VehicleState {
    /// A vehicle at longitudinal position `y` moving at `vy`, centered in its
    /// lane laterally.
    pub fn longitudinal(y: f64, vy: f64) -> Self {
        Self { x: 0.0, y, vx: 0.0, vy, ax: 0.0, ay: 0.0 }
    }

    pub fn with_x(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.vx, self.vy, self.ax, self.ay]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Vehicle,
    StationaryObject,
}

/// One non-ego object sharing the road.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadObject {
    pub id: u32,
    pub state: VehicleState,
    pub kind: ObjectKind,
}

/// Reference to a vehicle within a [`WorldState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleRef {
    Ego,
    Object(u32),
}

/// Full world snapshot: the ego vehicle plus all other tracked objects.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub ego: VehicleState,
    pub others: Vec<RoadObject>,
    /// Seconds since episode start.
    pub time: f64,
}

impl WorldState {
    pub fn new(ego: VehicleState, others: Vec<RoadObject>, time: f64) -> Result<Self, TrafficError> {
        for (i, a) in others.iter().enumerate() {
            if others[i + 1..].iter().any(|b| b.id == a.id) {
                return Err(TrafficError::DuplicateObjectId(a.id));
            }
        }
        Ok(Self { ego, others, time })
    }

    pub fn state_of(&self, r: VehicleRef) -> Result<&VehicleState, TrafficError> {
        match r {
            VehicleRef::Ego => Ok(&self.ego),
            VehicleRef::Object(id) => self
                .others
                .iter()
                .find(|o| o.id == id)
                .map(|o| &o.state)
                .ok_or(TrafficError::UnknownObjectId(id)),
        }
    }

    pub fn state_of_mut(&mut self, r: VehicleRef) -> Result<&mut VehicleState, TrafficError> {
        match r {
            VehicleRef::Ego => Ok(&mut self.ego),
            VehicleRef::Object(id) => self
                .others
                .iter_mut()
                .find(|o| o.id == id)
                .map(|o| &mut o.state)
                .ok_or(TrafficError::UnknownObjectId(id)),
        }
    }
}

/// One lane: a centerline offset and width, optionally ending where it joins
/// another lane (used for on-ramps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub id: u32,
    /// Lateral offset of the lane centerline (m).
    pub offset: f64,
    pub width: f64,
    /// Longitudinal coordinate where this lane ends by joining the road's
    /// merge point, if any.
    pub ends_at: Option<f64>,
}

/// Lane layout plus an optional merge point where a ramp joins a main lane.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadModel {
    pub lanes: Vec<Lane>,
    pub merge_point: Option<f64>,
}

impl RoadModel {
    pub fn new(lanes: Vec<Lane>, merge_point: Option<f64>) -> Result<Self, TrafficError> {
        for l in &lanes {
            if !(l.width > 0.0) {
                return Err(TrafficError::BadLaneWidth(l.id));
            }
        }
        if let Some(m) = merge_point {
            // The merge point must lie on a lane that ends there and on a
            // lane that continues through it.
            let ends = lanes.iter().any(|l| l.ends_at == Some(m));
            let continues = lanes
                .iter()
                .any(|l| l.ends_at.map_or(true, |e| e > m));
            if !(ends && continues) {
                return Err(TrafficError::BadMergePoint(m));
            }
        }
        Ok(Self { lanes, merge_point })
    }

    /// A single infinite lane.
    pub fn single_lane() -> Self {
        Self {
            lanes: vec![Lane { id: 0, offset: 0.0, width: 3.5, ends_at: None }],
            merge_point: None,
        }
    }

    /// Main lane plus a parallel ramp lane that joins it at `merge_point`.
    pub fn with_ramp(merge_point: f64) -> Self {
        Self {
            lanes: vec![
                Lane { id: 0, offset: 0.0, width: 3.5, ends_at: None },
                Lane { id: 1, offset: 3.5, width: 3.5, ends_at: Some(merge_point) },
            ],
            merge_point: Some(merge_point),
        }
    }

    /// Lane id a vehicle occupies, by lateral position. Past the merge point
    /// every vehicle is on the main (first) lane.
    pub fn lane_of(&self, state: &VehicleState) -> Option<u32> {
        if let Some(m) = self.merge_point {
            if state.y >= m {
                return self.lanes.first().map(|l| l.id);
            }
        }
        self.lanes
            .iter()
            .find(|l| (state.x - l.offset).abs() <= l.width / 2.0)
            .map(|l| l.id)
    }

    pub fn is_on_road(&self, state: &VehicleState) -> bool {
        self.lanes
            .iter()
            .any(|l| (state.x - l.offset).abs() <= l.width / 2.0)
    }
}

/// Bumper-to-bumper gap to the nearest same-lane object ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    /// Bumper-to-bumper distance (m).
    pub distance: f64,
    /// Longitudinal velocity of the lead (m/s).
    pub lead_velocity: f64,
}

/// Closed-form constant-acceleration step on a (position, velocity) pair.
///
/// Velocity clamps to `[0, MAX_SPEED]`; when the clamp engages mid-step the
/// position integral runs only to the clamp instant, so a braking vehicle
/// never moves backwards.
pub fn step_longitudinal(y: f64, v: f64, accel: f64, dt: f64) -> (f64, f64) {
    let v_raw = v + accel * dt;
    if v_raw < 0.0 {
        let t_stop = if accel < 0.0 { v / -accel } else { 0.0 };
        (y + v * t_stop + 0.5 * accel * t_stop * t_stop, 0.0)
    } else if v_raw > MAX_SPEED {
        let t_cap = if accel > 0.0 { (MAX_SPEED - v) / accel } else { 0.0 };
        let y_cap = y + v * t_cap + 0.5 * accel * t_cap * t_cap;
        (y_cap + MAX_SPEED * (dt - t_cap), MAX_SPEED)
    } else {
        (y + v * dt + 0.5 * accel * dt * dt, v_raw)
    }
}

/// Advance a state by one constant-acceleration step.
///
/// Longitudinal only: `y` and `vy` integrate the commanded acceleration via
/// [`step_longitudinal`], `ay` records it, and the lateral fields pass
/// through unchanged.
pub fn step_kinematics(s: &VehicleState, accel: f64, dt: f64) -> Result<VehicleState, TrafficError> {
    if !accel.is_finite() {
        return Err(TrafficError::NonFinite("accel"));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(TrafficError::NonPositiveDt(dt));
    }
    if !s.is_finite() {
        return Err(TrafficError::NonFinite("state"));
    }
    let (y, vy) = step_longitudinal(s.y, s.vy, accel, dt);
    Ok(VehicleState { y, vy, ay: accel, ..*s })
}

/// Bumper-to-bumper distance to the nearest object ahead of `follower` among
/// `same_lane` object ids, and that object's longitudinal velocity. `None`
/// when the lane ahead is clear.
pub fn gap_to_lead(
    world: &WorldState,
    follower: VehicleRef,
    same_lane: &[u32],
    vehicle_length: f64,
) -> Result<Option<Gap>, TrafficError> {
    let fy = world.state_of(follower)?.y;
    let mut best: Option<Gap> = None;
    for o in &world.others {
        if VehicleRef::Object(o.id) == follower || !same_lane.contains(&o.id) {
            continue;
        }
        if o.state.y > fy {
            let distance = o.state.y - fy - vehicle_length;
            if best.map_or(true, |b| distance < b.distance) {
                best = Some(Gap { distance, lead_velocity: o.state.vy });
            }
        }
    }
    Ok(best)
}
