use raqmdp::sim::{run_episode, planner::PlannerKind, Scenario};

fn main() {
    let mut s = Scenario::stationary_object(60.0, PlannerKind::MctsP0);
    s.search.queries = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(400);
    let t = run_episode(&s, 3).unwrap();
    println!("end: {:?} crashed={} det={:?}", t.summary.end_reason, t.summary.crashed, t.summary.detection_time);
    let det = t.summary.detection_time.unwrap_or(f64::MAX);
    for b in t.bp.iter().filter(|b| b.time >= det - 1.0) {
        println!("BP t={:5.1} action=[{:4},{:4}] q={:?}", b.time, b.action_lo, b.action_hi,
            b.q_mean.iter().map(|q| (*q * 10.0).round() / 10.0).collect::<Vec<_>>());
    }
    for r in t.mp.iter().filter(|r| r.gap_to_lead.map_or(false, |g| g < 8.0)).step_by(10) {
        println!("MP t={:5.2} v={:6.3} a={:6.3} gap={:6.3}", r.time, r.ego_vy, r.ego_ay, r.gap_to_lead.unwrap());
    }
    let min_gap = t.mp.iter().filter_map(|r| r.gap_to_lead).fold(f64::INFINITY, f64::min);
    println!("min gap {min_gap}");
}
