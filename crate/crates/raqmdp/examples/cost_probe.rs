use raqmdp::idm::IdmParams;
use raqmdp::mcts::Mdp;
use raqmdp::sim::mdp::{standard_actions, CostWeights, HighwayMdp};
use raqmdp::traffic::{ObjectKind, RoadModel, RoadObject, VehicleState, WorldState};

fn main() {
    let m = HighwayMdp::new(standard_actions(), IdmParams::default(), CostWeights::default(), 0.5, 5.0, None);
    let road = RoadModel::single_lane();
    let world = WorldState::new(
        VehicleState::longitudinal(0.0, 26.17),
        vec![RoadObject { id: 1, state: VehicleState::longitudinal(60.0, 0.0), kind: ObjectKind::StationaryObject }],
        0.0,
    ).unwrap();
    let root = m.root_from_world(&world, &road);
    // Held-action plans
    for a in 0..5 {
        let mut s = root.clone();
        let mut total = 0.0;
        let mut per = vec![];
        for _ in 0..15 {
            if s.crashed { break; }
            let n = m.transition(&s, a);
            let r = m.reward(&s, a, &n);
            per.push((n.ego_v, r));
            total += r;
            s = n;
        }
        print!("held a{a}: total={total:8.1} crashed={} traj:", s.crashed);
        for (v, r) in per.iter() { print!(" {:.0}/{:.0}", v, r); }
        println!();
    }
    // "coast then slam": [-1,0] x5 then [-8,-2] x10
    let mut s = root.clone();
    let mut total = 0.0;
    let mut per = vec![];
    for i in 0..15 {
        if s.crashed { break; }
        let a = if i < 5 { 2 } else { 0 };
        let n = m.transition(&s, a);
        let r = m.reward(&s, a, &n);
        per.push((n.ego_v, r));
        total += r;
        s = n;
    }
    print!("coast5+slam: total={total:8.1} crashed={} traj:", s.crashed);
    for (v, r) in per.iter() { print!(" {:.0}/{:.0}", v, r); }
    println!();
}
