//! Belief representation and deterministic sampling.
//!
//! A belief is a Gaussian over selected continuous state dimensions crossed
//! with a set of discrete world hypotheses. Sampling draws the classic
//! `2n+1` sigma points through a symmetric matrix square root, drops
//! perturbation pairs that are degenerate or physically infeasible, and
//! crosses the survivors with every discrete hypothesis. The retained points
//! reproduce the belief's mean exactly and its covariance along every
//! retained direction.

use crate::traffic::{RoadModel, VehicleRef, VehicleState, WorldState, MAX_ACCEL, MAX_SPEED};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const SYMMETRY_TOL: f64 = 1e-9;
const EIGEN_TOL: f64 = 1e-9;
const PROB_TOL: f64 = 1e-9;

/// Default per-dimension closeness tolerance for excluding sigma points that
/// barely perturb the mean.
pub const DEFAULT_CLOSENESS_EPS: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("covariance must be square over {expected} dims, got {rows}x{cols}")]
    BadShape { expected: usize, rows: usize, cols: usize },
    #[error("covariance is not symmetric within {SYMMETRY_TOL}")]
    NotSymmetric,
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPositiveSemidefinite(f64),
    #[error("hypothesis probabilities must lie in (0, 1] and sum to 1, got sum {0}")]
    BadProbabilities(f64),
    #[error("belief needs at least one world hypothesis")]
    NoHypotheses,
    #[error("dimension {0} does not resolve in every hypothesis world")]
    UnresolvedDim(usize),
    #[error("center weight must satisfy -1 < w0 < 1, got {0}")]
    BadCenterWeight(f64),
    #[error("closeness tolerance list has {got} entries for {expected} dims")]
    BadEpsilonLength { expected: usize, got: usize },
    #[error("every sigma point is physically infeasible; planner cannot proceed")]
    AllPointsInfeasible,
}

/// Continuous state field addressed by a belief dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateField {
    X,
    Y,
    Vx,
    Vy,
    Ax,
    Ay,
}

impl StateField {
    fn get(self, s: &VehicleState) -> f64 {
        match self {
            StateField::X => s.x,
            StateField::Y => s.y,
            StateField::Vx => s.vx,
            StateField::Vy => s.vy,
            StateField::Ax => s.ax,
            StateField::Ay => s.ay,
        }
    }

    fn set(self, s: &mut VehicleState, v: f64) {
        match self {
            StateField::X => s.x = v,
            StateField::Y => s.y = v,
            StateField::Vx => s.vx = v,
            StateField::Vy => s.vy = v,
            StateField::Ax => s.ax = v,
            StateField::Ay => s.ay = v,
        }
    }
}

/// Which (vehicle, field) a continuous belief dimension addresses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDim {
    pub vehicle: VehicleRef,
    pub field: StateField,
}

/// Gaussian-plus-hypotheses belief over the world state.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    /// Discrete world hypotheses with probabilities. A single entry with
    /// probability 1 means no discrete uncertainty.
    hypotheses: Vec<(WorldState, f64)>,
    dims: Vec<StateDim>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl BeliefState {
    /// Belief with continuous uncertainty over `dims` around `nominal` and no
    /// discrete uncertainty.
    pub fn gaussian(
        nominal: WorldState,
        dims: Vec<StateDim>,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self, BeliefError> {
        Self::new(vec![(nominal, 1.0)], dims, mean, covariance)
    }

    /// Like [`BeliefState::gaussian`] with the mean read off the nominal
    /// world itself.
    pub fn gaussian_around(
        nominal: WorldState,
        dims: Vec<StateDim>,
        covariance: DMatrix<f64>,
    ) -> Result<Self, BeliefError> {
        let mean = DVector::from_iterator(
            dims.len(),
            dims.iter().map(|d| {
                d.field.get(nominal.state_of(d.vehicle).unwrap_or(&nominal.ego))
            }),
        );
        Self::new(vec![(nominal, 1.0)], dims, mean, covariance)
    }

    /// Purely discrete belief: a set of candidate worlds with probabilities.
    pub fn discrete(hypotheses: Vec<(WorldState, f64)>) -> Result<Self, BeliefError> {
        Self::new(hypotheses, Vec::new(), DVector::zeros(0), DMatrix::zeros(0, 0))
    }

    /// Point-mass belief: one world, no uncertainty at all.
    pub fn certain(world: WorldState) -> Self {
        Self::discrete(vec![(world, 1.0)]).expect("singleton hypothesis is always valid")
    }

    pub fn new(
        hypotheses: Vec<(WorldState, f64)>,
        dims: Vec<StateDim>,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self, BeliefError> {
        if hypotheses.is_empty() {
            return Err(BeliefError::NoHypotheses);
        }
        let sum: f64 = hypotheses.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > PROB_TOL || hypotheses.iter().any(|(_, p)| *p <= 0.0 || *p > 1.0) {
            return Err(BeliefError::BadProbabilities(sum));
        }
        let n = dims.len();
        if mean.len() != n || covariance.nrows() != n || covariance.ncols() != n {
            return Err(BeliefError::BadShape {
                expected: n,
                rows: covariance.nrows(),
                cols: covariance.ncols(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(BeliefError::NotSymmetric);
                }
            }
        }
        for (d, dim) in dims.iter().enumerate() {
            if hypotheses.iter().any(|(w, _)| w.state_of(dim.vehicle).is_err()) {
                return Err(BeliefError::UnresolvedDim(d));
            }
        }
        Ok(Self { hypotheses, dims, mean, covariance })
    }

    pub fn dims(&self) -> &[StateDim] {
        &self.dims
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn hypotheses(&self) -> &[(WorldState, f64)] {
        &self.hypotheses
    }

    /// The most natural single world for modules that cannot consume a full
    /// belief (e.g. the motion planner): the highest-probability hypothesis
    /// with the continuous mean written in.
    pub fn nominal_world(&self) -> WorldState {
        let (world, _) = self
            .hypotheses
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("probabilities are finite"))
            .expect("belief has at least one hypothesis");
        apply_dims(world, &self.dims, &self.mean)
    }
}

/// One weighted deterministic sample of the belief.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoint {
    pub world: WorldState,
    pub weight: f64,
    /// Values of the continuous dims at this point (empty when the belief is
    /// purely discrete).
    pub vector: DVector<f64>,
    /// Index of the discrete hypothesis this point was crossed with.
    pub hypothesis: usize,
}

/// Weighted deterministic sample set drawn from a [`BeliefState`].
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet {
    pub points: Vec<SigmaPoint>,
    /// Weight assigned to the center point.
    pub w0: f64,
    /// Number of continuous perturbation directions retained after exclusion.
    pub n_retained: usize,
    /// Number of continuous dims in the source belief.
    pub n_dims: usize,
}

impl SigmaPointSet {
    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

fn apply_dims(world: &WorldState, dims: &[StateDim], values: &DVector<f64>) -> WorldState {
    let mut w = world.clone();
    for (dim, v) in dims.iter().zip(values.iter()) {
        dim.field.set(
            w.state_of_mut(dim.vehicle).expect("dims validated against every hypothesis"),
            *v,
        );
    }
    w
}

/// Symmetric PSD square root through a spectral decomposition, so that a
/// near-singular covariance degrades to fewer effective directions instead
/// of failing outright.
fn symmetric_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, BeliefError> {
    let n = cov.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = cov.clone().symmetric_eigen();
    let mut sqrt_eigs = DVector::zeros(n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -EIGEN_TOL {
            return Err(BeliefError::NotPositiveSemidefinite(l));
        }
        sqrt_eigs[i] = l.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&sqrt_eigs) * q.transpose())
}

/// Draw weighted sigma points from `belief`.
///
/// The center point takes weight `w0`; each perturbation pair shares the
/// remaining mass equally. A pair is dropped when either side fails
/// `feasible` in some hypothesis world or lands within `closeness_eps` of
/// the center in every perturbed dimension; dropping one side alone would
/// bias the mean. Retained directions re-scale to the reduced dimension
/// count so their second moments stay exact. Finally every continuous point
/// is crossed with every discrete hypothesis, multiplying the weights.
pub fn generate_sigma_points(
    belief: &BeliefState,
    w0: f64,
    feasible: &dyn Fn(&WorldState) -> bool,
    closeness_eps: &[f64],
) -> Result<SigmaPointSet, BeliefError> {
    if !(w0 > -1.0 && w0 < 1.0) {
        return Err(BeliefError::BadCenterWeight(w0));
    }
    let n = belief.dims.len();
    if closeness_eps.len() != n {
        return Err(BeliefError::BadEpsilonLength { expected: n, got: closeness_eps.len() });
    }

    let sqrt_cov = symmetric_sqrt(&belief.covariance)?;

    // Candidate perturbations at the full-dimension scale.
    let scale0 = (n as f64 / (1.0 - w0)).sqrt();
    let mut retained: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let delta = sqrt_cov.column(i) * scale0;
        let too_close = delta.iter().zip(closeness_eps).all(|(d, eps)| d.abs() <= *eps);
        if too_close {
            continue;
        }
        let plus = &belief.mean + &delta;
        let minus = &belief.mean - &delta;
        let pair_feasible = belief.hypotheses.iter().all(|(world, _)| {
            feasible(&apply_dims(world, &belief.dims, &plus))
                && feasible(&apply_dims(world, &belief.dims, &minus))
        });
        if pair_feasible {
            retained.push(i);
        }
    }

    // Continuous part: center plus retained pairs re-scaled to the final
    // dimension count, ordered center, all plus, all minus.
    let m = retained.len();
    let mut continuous: Vec<(DVector<f64>, f64)> = Vec::with_capacity(2 * m + 1);
    if m == 0 {
        continuous.push((belief.mean.clone(), 1.0));
    } else {
        let scale = (m as f64 / (1.0 - w0)).sqrt();
        let w_i = (1.0 - w0) / (2.0 * m as f64);
        continuous.push((belief.mean.clone(), w0));
        for &i in &retained {
            continuous.push((&belief.mean + sqrt_cov.column(i) * scale, w_i));
        }
        for &i in &retained {
            continuous.push((&belief.mean - sqrt_cov.column(i) * scale, w_i));
        }
    }

    let mut points = Vec::with_capacity(continuous.len() * belief.hypotheses.len());
    for (vector, cw) in &continuous {
        for (h, (world, p)) in belief.hypotheses.iter().enumerate() {
            points.push(SigmaPoint {
                world: apply_dims(world, &belief.dims, vector),
                weight: cw * p,
                vector: vector.clone(),
                hypothesis: h,
            });
        }
    }

    if m == 0 && n > 0 {
        // Nothing but the center survived; if even the center worlds are
        // infeasible the planner has no state to search from.
        if points.iter().all(|pt| !feasible(&pt.world)) {
            return Err(BeliefError::AllPointsInfeasible);
        }
    }

    Ok(SigmaPointSet { points, w0, n_retained: m, n_dims: n })
}

/// Weighted mean and covariance of a sigma-point set's continuous part.
///
/// Intended as a validation utility: with no exclusions it recovers the
/// source belief's first two moments.
pub fn reconstruct_moments(set: &SigmaPointSet) -> (DVector<f64>, DMatrix<f64>) {
    let n = set.points.first().map_or(0, |p| p.vector.len());
    let mut mean = DVector::zeros(n);
    for p in &set.points {
        mean += &p.vector * p.weight;
    }
    let mut cov = DMatrix::zeros(n, n);
    for p in &set.points {
        let d = &p.vector - &mean;
        cov += (&d * d.transpose()) * p.weight;
    }
    (mean, cov)
}

/// Standard physical feasibility for a world: every vehicle on the road,
/// speeds and accelerations within the physical envelope, and no two
/// same-lane objects overlapping.
pub fn world_feasibility(road: RoadModel, vehicle_length: f64) -> impl Fn(&WorldState) -> bool {
    move |world: &WorldState| {
        let ok = |s: &VehicleState| {
            s.is_finite()
                && (0.0..=MAX_SPEED).contains(&s.vy)
                && s.ay.abs() <= MAX_ACCEL
                && road.is_on_road(s)
        };
        if !ok(&world.ego) || world.others.iter().any(|o| !ok(&o.state)) {
            return false;
        }
        let mut all: Vec<(Option<u32>, f64)> = Vec::with_capacity(world.others.len() + 1);
        all.push((road.lane_of(&world.ego), world.ego.y));
        for o in &world.others {
            all.push((road.lane_of(&o.state), o.state.y));
        }
        for i in 0..all.len() {
            for j in 0..i {
                if all[i].0 == all[j].0 && (all[i].1 - all[j].1).abs() < vehicle_length {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{ObjectKind, RoadObject};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn always(_: &WorldState) -> bool {
        true
    }

    fn base_world() -> WorldState {
        WorldState::new(
            VehicleState::longitudinal(0.0, 20.0),
            vec![RoadObject {
                id: 1,
                state: VehicleState::longitudinal(50.0, 20.0),
                kind: ObjectKind::Vehicle,
            }],
            0.0,
        )
        .unwrap()
    }

    fn mv_velocity_belief(mu: f64, sigma: f64) -> BeliefState {
        BeliefState::gaussian(
            base_world(),
            vec![StateDim { vehicle: VehicleRef::Object(1), field: StateField::Vy }],
            DVector::from_vec(vec![mu]),
            DMatrix::from_vec(1, 1, vec![sigma * sigma]),
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_velocity_noise_construction() {
        // Center weight 0.5 in one dimension puts the side points at
        // mean +/- sqrt(2) sigma with weights 0.25 each.
        let sigma = 4.0;
        let b = mv_velocity_belief(20.0, sigma);
        let set = generate_sigma_points(&b, 0.5, &always, &[1e-3]).unwrap();
        assert_eq!(set.points.len(), 3);
        assert_eq!(set.n_retained, 1);
        let vals: Vec<f64> = set.points.iter().map(|p| p.vector[0]).collect();
        assert!((vals[0] - 20.0).abs() < 1e-12);
        assert!((vals[1] - (20.0 + 2.0_f64.sqrt() * sigma)).abs() < 1e-9);
        assert!((vals[2] - (20.0 - 2.0_f64.sqrt() * sigma)).abs() < 1e-9);
        let ws: Vec<f64> = set.points.iter().map(|p| p.weight).collect();
        assert_eq!(ws, vec![0.5, 0.25, 0.25]);
        // The perturbed world actually carries the perturbed velocity.
        assert!((set.points[1].world.others[0].state.vy - vals[1]).abs() < 1e-12);
    }

    #[test]
    fn discrete_pair_with_zero_covariance() {
        let with_object = base_world();
        let mut clear = base_world();
        clear.others.clear();
        let b = BeliefState::discrete(vec![(with_object, 0.1), (clear, 0.9)]).unwrap();
        let set = generate_sigma_points(&b, 0.5, &always, &[]).unwrap();
        assert_eq!(set.points.len(), 2);
        assert_eq!(set.points[0].weight, 0.1);
        assert_eq!(set.points[1].weight, 0.9);
        assert_eq!(set.points[0].world.others.len(), 1);
        assert_eq!(set.points[1].world.others.len(), 0);
    }

    #[test]
    fn degenerate_covariance_collapses_to_center() {
        let b = mv_velocity_belief(20.0, 0.0);
        let set = generate_sigma_points(&b, 0.5, &always, &[1e-3]).unwrap();
        assert_eq!(set.points.len(), 1);
        assert_eq!(set.points[0].weight, 1.0);
        assert_eq!(set.n_retained, 0);
        let (mean, cov) = reconstruct_moments(&set);
        assert_eq!(mean[0], 20.0);
        assert_eq!(cov[(0, 0)], 0.0);
    }

    #[test]
    fn infeasible_pairs_are_dropped_and_weights_renormalize() {
        // Huge velocity noise pushes one side beyond the physical envelope.
        let road = RoadModel::single_lane();
        let feas = world_feasibility(road, 5.0);
        let b = mv_velocity_belief(20.0, 40.0);
        let set = generate_sigma_points(&b, 0.5, &feas, &[1e-3]).unwrap();
        assert_eq!(set.n_retained, 0);
        assert_eq!(set.points.len(), 1);
        assert_eq!(set.points[0].weight, 1.0);
    }

    #[test]
    fn rejects_bad_center_weight_and_non_psd() {
        let b = mv_velocity_belief(20.0, 1.0);
        assert!(generate_sigma_points(&b, 1.0, &always, &[1e-3]).is_err());
        assert!(generate_sigma_points(&b, -1.0, &always, &[1e-3]).is_err());
        let bad = BeliefState::gaussian(
            base_world(),
            vec![StateDim { vehicle: VehicleRef::Ego, field: StateField::Vy }],
            DVector::from_vec(vec![20.0]),
            DMatrix::from_vec(1, 1, vec![-0.5]),
        )
        .unwrap();
        assert!(matches!(
            generate_sigma_points(&bad, 0.5, &always, &[1e-3]),
            Err(BeliefError::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn probability_validation() {
        let w = base_world();
        assert!(BeliefState::discrete(vec![(w.clone(), 0.5), (w.clone(), 0.4)]).is_err());
        assert!(BeliefState::discrete(vec![(w.clone(), 0.0), (w, 1.0)]).is_err());
    }

    fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> BeliefState {
        // Six addressable fields on one object give up to six dims.
        let fields = [
            StateField::X,
            StateField::Y,
            StateField::Vx,
            StateField::Vy,
            StateField::Ax,
            StateField::Ay,
        ];
        let dims: Vec<StateDim> = fields[..n]
            .iter()
            .map(|&field| StateDim { vehicle: VehicleRef::Object(1), field })
            .collect();
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
        let mean = DVector::from_fn(n, |_, _| rng.gen_range(-10.0..10.0));
        BeliefState::gaussian(base_world(), dims, mean, cov).unwrap()
    }

    #[test]
    fn moment_preservation_over_random_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..60 {
            let n = rng.gen_range(1..=6);
            let b = random_belief(&mut rng, n);
            for &w0 in &[-0.3, 0.0, 0.5] {
                let set = generate_sigma_points(&b, w0, &always, &vec![1e-9; n]).unwrap();
                assert_eq!(set.n_retained, n);
                assert!((set.total_weight() - 1.0).abs() < 1e-9);
                let (mean, cov) = reconstruct_moments(&set);
                for d in 0..n {
                    assert!((mean[d] - b.mean()[d]).abs() < 1e-9, "w0={w0} dim {d}");
                }
                let diff = (&cov - b.covariance()).norm() / b.covariance().norm();
                assert!(diff < 1e-6, "cov frobenius rel err {diff} at w0={w0}");
            }
        }
    }

    #[test]
    fn retained_directions_stay_exact_after_exclusion() {
        // Feasibility that rejects perturbations of the object's position
        // knocks out one direction; the others keep their second moments.
        let n = 3;
        let dims = vec![
            StateDim { vehicle: VehicleRef::Object(1), field: StateField::Y },
            StateDim { vehicle: VehicleRef::Object(1), field: StateField::Vy },
            StateDim { vehicle: VehicleRef::Object(1), field: StateField::Ay },
        ];
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 4.0, 1.0]));
        let mean = DVector::from_vec(vec![50.0, 20.0, 0.0]);
        let b = BeliefState::gaussian(base_world(), dims, mean, cov).unwrap();
        // Reject any world that moves the object more than 5 m from nominal.
        let feas = |w: &WorldState| (w.others[0].state.y - 50.0).abs() < 5.0;
        let set = generate_sigma_points(&b, 0.5, &feas, &vec![1e-9; n]).unwrap();
        assert_eq!(set.n_retained, 2);
        assert!((set.total_weight() - 1.0).abs() < 1e-9);
        let (mean, cov) = reconstruct_moments(&set);
        assert!((mean[0] - 50.0).abs() < 1e-9);
        assert!((cov[(1, 1)] - 4.0).abs() < 1e-9);
        assert!((cov[(2, 2)] - 1.0).abs() < 1e-9);
        assert_eq!(cov[(0, 0)], 0.0);
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_belief(&mut rng, 4);
        let s1 = generate_sigma_points(&b, 0.5, &always, &vec![1e-3; 4]).unwrap();
        let s2 = generate_sigma_points(&b, 0.5, &always, &vec![1e-3; 4]).unwrap();
        assert_eq!(s1, s2);
        for (a, b) in s1.points.iter().zip(&s2.points) {
            assert!(a.weight.to_bits() == b.weight.to_bits());
            for (x, y) in a.vector.iter().zip(b.vector.iter()) {
                assert!(x.to_bits() == y.to_bits());
            }
        }
    }

    #[test]
    fn crossing_weights_multiply() {
        let with_object = base_world();
        let mut faster = base_world();
        faster.others[0].state.vy = 25.0;
        let b = BeliefState::new(
            vec![(with_object, 0.1), (faster, 0.9)],
            vec![StateDim { vehicle: VehicleRef::Ego, field: StateField::Vy }],
            DVector::from_vec(vec![20.0]),
            DMatrix::from_vec(1, 1, vec![4.0]),
        )
        .unwrap();
        let set = generate_sigma_points(&b, 0.5, &always, &[1e-3]).unwrap();
        assert_eq!(set.points.len(), 6);
        assert!((set.total_weight() - 1.0).abs() < 1e-12);
        assert!((set.points[0].weight - 0.05).abs() < 1e-12);
        assert!((set.points[1].weight - 0.45).abs() < 1e-12);
    }
}
