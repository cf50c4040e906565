use std::path::PathBuf;

use dki_core::road::nearest_lane_center;
use dki_core::sim::{query_setup, run_with_environment};
use dki_core::sst::{is_state_valid, Budget};
use dki_core::{load_scenario, plan_query, PlannerMode, Scenario, Termination};

fn scenario(file: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(file);
    load_scenario(&path).unwrap_or_else(|e| panic!("{file}: {e}"))
}

const FILES: [&str; 5] = [
    "i_straight.json",
    "ii_static_overtake.json",
    "iii_roundabout.json",
    "iv_vru_evasive.json",
    "v_vru_braking.json",
];

#[test]
fn shipped_scenarios_load_and_validate() {
    for file in FILES {
        let sc = scenario(file);
        let env = sc.validate().unwrap_or_else(|e| panic!("{file}: {e}"));
        let start = sc.ego.state;
        assert!(
            env.grid.lookup(start.x, start.y) < sc.road.grid.invalid_penalty,
            "{file}: ego starts off the road"
        );
        assert!(!env.world.collides(&start.footprint(&sc.ego.params), 0.0));
    }
}

#[test]
fn first_query_is_solved_in_both_modes() {
    for file in FILES {
        let mut sc = scenario(file);
        sc.planner.budget = Budget::Iterations(8_000);
        let env = sc.validate().unwrap();
        for mode in [PlannerMode::Base, PlannerMode::Dki] {
            let r = plan_query(&sc, &env, &sc.ego.state, 0.0, mode, None, 3).unwrap();
            assert!(r.solved, "{file} {mode} unsolved");
            let traj = r.trajectory.unwrap();
            let (_, config) = query_setup(&sc, &env, &sc.ego.state, 3).unwrap();
            for s in traj.replay(&sc.ego.params).samples {
                assert!(is_state_valid(
                    &s.state,
                    s.t,
                    &env.grid,
                    &env.world,
                    &config,
                    &sc.ego.params
                ));
            }
        }
    }
}

#[test]
fn short_straight_run_keeps_the_lane() {
    let mut sc = scenario("i_straight.json");
    sc.planner.budget = Budget::Iterations(5_000);
    sc.sim.duration = 4.0;
    let env = sc.validate().unwrap();
    let log = run_with_environment(&sc, &env, PlannerMode::Dki, 1).unwrap();
    assert_eq!(log.termination, Termination::Duration);
    assert!(log.collisions.is_empty());
    assert_eq!(log.lane_invalid_states, 0);
    let last = log.executed.last().unwrap();
    assert!(last.state.x > sc.ego.state.x + 10.0);
    let (_, d, lane) = nearest_lane_center(&env.net, &last.state.position());
    assert_eq!(lane, "right");
    assert!(d < 1.0);
}
