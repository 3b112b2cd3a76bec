use raqmdp::sim::{run_episode, planner::PlannerKind, Scenario};

fn main() {
    let planner = match std::env::args().nth(1).as_deref() {
        Some("p0") => PlannerKind::MctsP0,
        Some("ra") => PlannerKind::RaQmdp,
        _ => PlannerKind::MctsP1,
    };
    let mut s = Scenario::stationary_object(60.0, planner);
    s.search.queries = 20000;
    s.duration = 8.0;
    let t = run_episode(&s, 1).unwrap();
    for b in t.bp.iter().take(16) {
        println!("BP t={:4.1} action=[{:4},{:4}] npts={} q={:?} visits={:?}", b.time, b.action_lo, b.action_hi, b.n_sigma_points,
            b.q_mean.iter().map(|q| (*q * 10.0).round() / 10.0).collect::<Vec<_>>(), b.root_visits);
    }
    for r in t.mp.iter().step_by(20) {
        println!("MP t={:4.1} v={:6.3} a={:6.3}", r.time, r.ego_vy, r.ego_ay);
    }
}
