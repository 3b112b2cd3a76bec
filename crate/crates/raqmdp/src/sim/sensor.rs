//! Sensor models that fabricate beliefs for the two scenarios.
//!
//! Scenario 1 (stationary object): detection is a per-tick Bernoulli draw on
//! a logistic curve anchored so the detection probability is `p_at_range` at
//! the nominal sensor range and near-certain one `window` inside it. Until
//! detection the belief is a two-hypothesis mixture: an object sitting at
//! exactly sensor range, or a clear road.
//!
//! Scenario 2 (ramp merge): the merging vehicle's longitudinal velocity is
//! read through zero-mean Gaussian noise whose standard deviation decays
//! exponentially with tracking time; everything else is exact.

use crate::belief::{BeliefState, StateDim, StateField};
use crate::traffic::{ObjectKind, RoadObject, VehicleRef, VehicleState, WorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

/// Observation model for the scenario's uncertain quantity.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorModel {
    /// Stationary objects become detectable around `range` meters.
    LimitedRange {
        /// Distance at which the per-tick detection probability equals
        /// `p_at_range`.
        range: f64,
        /// Distance inside `range` over which detection becomes
        /// near-certain (probability 0.99).
        #[serde(default = "default_window")]
        window: f64,
        /// Detection probability at exactly `range`.
        #[serde(default = "default_p_at_range")]
        p_at_range: f64,
    },
    /// The merging vehicle's velocity is seen through decaying noise.
    VelocityNoise {
        /// Initial noise standard deviation (m/s).
        sigma0: f64,
        /// Exponential decay time constant (s).
        tau: f64,
    },
}

fn default_window() -> f64 {
    1.0
}

fn default_p_at_range() -> f64 {
    0.1
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            SensorModel::LimitedRange { range, window, p_at_range } => {
                if !(*range > 0.0) {
                    return Err(format!("sensor.range must be > 0, got {range}"));
                }
                if !(*window > 0.0) {
                    return Err(format!("sensor.window must be > 0, got {window}"));
                }
                if !(*p_at_range > 0.0 && *p_at_range < 1.0) {
                    return Err(format!("sensor.p_at_range must be in (0, 1), got {p_at_range}"));
                }
            }
            SensorModel::VelocityNoise { sigma0, tau } => {
                if !(*sigma0 >= 0.0) {
                    return Err(format!("sensor.sigma0 must be >= 0, got {sigma0}"));
                }
                if !(*tau > 0.0) {
                    return Err(format!("sensor.tau must be > 0, got {tau}"));
                }
            }
        }
        Ok(())
    }
}

/// Per-tick probability of detecting a stationary object at `distance`:
/// a logistic curve through (`range`, `p_at_range`) and
/// (`range - window`, 0.99).
pub fn detection_probability(distance: f64, range: f64, window: f64, p_at_range: f64) -> f64 {
    let odds_far = ((1.0 - p_at_range) / p_at_range).ln();
    let odds_near = (0.99_f64 / 0.01).ln();
    let k = (odds_far + odds_near) / window;
    let d0 = range - odds_far / k;
    1.0 / (1.0 + (k * (distance - d0)).exp())
}

/// Noise standard deviation after tracking for `t` seconds.
pub fn velocity_noise_sigma(t: f64, sigma0: f64, tau: f64) -> f64 {
    sigma0 * (-t / tau).exp()
}

/// Pre-detection belief for the stationary-object scenario: with probability
/// `p_present` a stationary object sits at exactly the sensor range ahead of
/// the ego; otherwise the road is clear.
pub fn scenario1_belief(
    clear_world: &WorldState,
    sensor_range: f64,
    p_present: f64,
    hypothesis_object_id: u32,
) -> BeliefState {
    let mut with_object = clear_world.clone();
    with_object.others.push(RoadObject {
        id: hypothesis_object_id,
        state: VehicleState::longitudinal(clear_world.ego.y + sensor_range, 0.0),
        kind: ObjectKind::StationaryObject,
    });
    BeliefState::discrete(vec![(with_object, p_present), (clear_world.clone(), 1.0 - p_present)])
        .expect("two-hypothesis mixture with p in (0,1) is valid")
}

/// Belief for the ramp scenario at tracking time `t`: a 1-D Gaussian on the
/// merging vehicle's longitudinal velocity, centered on a noisy measurement
/// of the true value, everything else exact. Deterministic in `seed`.
pub fn scenario2_belief(
    exact_world: &WorldState,
    mv_id: u32,
    true_mv_velocity: f64,
    t: f64,
    sigma0: f64,
    tau: f64,
    seed: u64,
) -> BeliefState {
    let sigma = velocity_noise_sigma(t, sigma0, tau);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: f64 = StandardNormal.sample(&mut rng);
    let measured = (true_mv_velocity + sigma * z).max(0.0);

    let mut nominal = exact_world.clone();
    nominal
        .state_of_mut(VehicleRef::Object(mv_id))
        .expect("merging vehicle exists")
        .vy = measured;
    BeliefState::gaussian_around(
        nominal,
        vec![StateDim { vehicle: VehicleRef::Object(mv_id), field: StateField::Vy }],
        nalgebra::DMatrix::from_vec(1, 1, vec![sigma * sigma]),
    )
    .expect("1-D velocity belief is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::generate_sigma_points;

    #[test]
    fn detection_curve_hits_its_anchors() {
        let p = |d: f64| detection_probability(d, 60.0, 1.0, 0.1);
        assert!((p(60.0) - 0.1).abs() < 1e-12);
        assert!((p(59.0) - 0.99).abs() < 1e-12);
        assert!(p(70.0) < 1e-9);
        assert!(p(55.0) > 0.999);
        // Monotone: closer is never harder to detect.
        let mut prev = 0.0;
        for i in (0..=200).rev() {
            let d = i as f64;
            let pd = p(d);
            assert!(pd >= prev);
            prev = pd;
        }
    }

    #[test]
    fn noise_decays_exponentially() {
        assert_eq!(velocity_noise_sigma(0.0, 4.0, 3.0), 4.0);
        assert!((velocity_noise_sigma(3.0, 4.0, 3.0) - 4.0 / std::f64::consts::E).abs() < 1e-12);
        assert!(velocity_noise_sigma(60.0, 4.0, 3.0) < 1e-8);
    }

    fn clear_world(ego_y: f64) -> WorldState {
        WorldState::new(VehicleState::longitudinal(ego_y, 29.17), vec![], 0.0).unwrap()
    }

    #[test]
    fn scenario1_two_hypotheses() {
        let b = scenario1_belief(&clear_world(120.0), 60.0, 0.1, 99);
        let hyps = b.hypotheses();
        assert_eq!(hyps.len(), 2);
        assert_eq!(hyps[0].1, 0.1);
        assert_eq!(hyps[1].1, 0.9);
        assert_eq!(hyps[0].0.others[0].state.y, 180.0);
        assert_eq!(hyps[0].0.others[0].kind, ObjectKind::StationaryObject);
        assert!(hyps[1].0.others.is_empty());
    }

    #[test]
    fn scenario2_sigma_points_with_half_center_weight() {
        let mv = RoadObject {
            id: 1,
            state: VehicleState::longitudinal(0.0, 20.0).with_x(3.5),
            kind: ObjectKind::Vehicle,
        };
        let world = WorldState::new(VehicleState::longitudinal(0.0, 20.0), vec![mv], 0.0).unwrap();
        // Zero-noise measurement path: seed is irrelevant once sigma == 0.
        let b = scenario2_belief(&world, 1, 20.0, 1e9, 4.0, 3.0, 7);
        let set = generate_sigma_points(&b, 0.5, &|_| true, &[1e-3]).unwrap();
        assert_eq!(set.points.len(), 1);

        // At t = 0 the spread is sigma0 and the three points sit at the
        // measurement and measurement +/- sqrt(2) sigma.
        let b = scenario2_belief(&world, 1, 20.0, 0.0, 4.0, 3.0, 7);
        let mu = b.mean()[0];
        let set = generate_sigma_points(&b, 0.5, &|_| true, &[1e-3]).unwrap();
        assert_eq!(set.points.len(), 3);
        let spread = 2.0_f64.sqrt() * 4.0;
        assert!((set.points[1].vector[0] - (mu + spread)).abs() < 1e-9);
        assert!((set.points[2].vector[0] - (mu - spread)).abs() < 1e-9);
        assert_eq!(
            set.points.iter().map(|p| p.weight).collect::<Vec<_>>(),
            vec![0.5, 0.25, 0.25]
        );
    }

    #[test]
    fn scenario2_same_seed_same_measurement() {
        let mv = RoadObject {
            id: 1,
            state: VehicleState::longitudinal(0.0, 20.0),
            kind: ObjectKind::Vehicle,
        };
        let world = WorldState::new(VehicleState::longitudinal(0.0, 20.0), vec![mv], 0.0).unwrap();
        let a = scenario2_belief(&world, 1, 20.0, 0.0, 4.0, 3.0, 42);
        let b = scenario2_belief(&world, 1, 20.0, 0.0, 4.0, 3.0, 42);
        assert_eq!(a.mean()[0].to_bits(), b.mean()[0].to_bits());
        let c = scenario2_belief(&world, 1, 20.0, 0.0, 4.0, 3.0, 43);
        assert_ne!(a.mean()[0].to_bits(), c.mean()[0].to_bits());
    }
}
