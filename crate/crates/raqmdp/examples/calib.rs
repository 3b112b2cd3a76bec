use raqmdp::sim::{run_episode, planner::PlannerKind, Scenario};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let range: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(60.0);
    let queries: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(20000);
    let seed: u64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(1);
    for planner in [PlannerKind::MctsP0, PlannerKind::MctsP1, PlannerKind::RaQmdp] {
        let mut s = Scenario::stationary_object(range, planner);
        s.search.queries = queries;
        let t0 = Instant::now();
        let t = run_episode(&s, seed).unwrap();
        let wall = t0.elapsed().as_secs_f64();
        let min_gap = t.mp.iter().filter_map(|r| r.gap_to_lead).fold(f64::INFINITY, f64::min);
        println!(
            "{:10} range={range} seed={seed}: pre_v={:6.2} avg_v={:6.2} maxjerk={:7.2} end={:?} det={:?} min_gap={:.2} wall={:.1}s",
            planner.name(), t.summary.avg_velocity_pre_event, t.summary.avg_velocity,
            t.summary.max_abs_jerk, t.summary.end_reason,
            t.summary.detection_time.map(|x| (x*10.0).round()/10.0), min_gap, wall
        );
    }
}
