use std::collections::HashMap;
use std::path::PathBuf;

use ltasim_core::engine::{mode_sequence, MemorySink, NullSink};
use ltasim_core::{
    load_scenario, run_match, AgentState, BallStatus, Engine, EventKind, Mode, Scenario, Vec3,
};
use ltasim_core::world::AgentSpawn;

fn fixture(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    load_scenario(path).expect("fixture loads")
}

fn short_half() -> Scenario {
    let mut sc = fixture("half_2v2.scenario");
    sc.arena.match_duration = 300.0;
    sc
}

#[test]
fn bookkeeping_invariants_hold_every_step() {
    let sc = short_half();
    let total = sc.balls.len();
    let mut engine = Engine::new(sc.clone());
    let mut last_score = [0, 0];
    for _ in 0..sc.step_count() {
        engine.step(&mut NullSink).unwrap();

        let (free, held, scored) = engine.ball_partition();
        assert_eq!(free + held + scored, total);

        let mut holder: HashMap<u32, u32> = HashMap::new();
        for a in &engine.agents {
            for id in &a.state.held_balls {
                assert!(holder.insert(*id, a.id).is_none(), "ball {id} held twice");
            }
        }
        for b in &engine.balls {
            match b.status {
                BallStatus::Held(agent) => assert_eq!(holder.get(&b.id), Some(&agent)),
                _ => assert!(!holder.contains_key(&b.id)),
            }
        }
        assert_eq!(holder.len(), held);

        assert!(engine.score[0] >= last_score[0] && engine.score[1] >= last_score[1]);
        last_score = engine.score;

        for a in &engine.agents {
            let s = &a.state;
            assert!(engine.scenario().arena.contains(&s.position()));
        }
    }
}

#[test]
fn events_are_ordered_and_scores_follow_releases() {
    let sc = short_half();
    let mut sink = MemorySink::default();
    let report = run_match(&sc, &mut sink).unwrap();
    assert!(sink.events.windows(2).all(|w| w[0].t <= w[1].t));
    assert_eq!(sink.records.len() as u64, sc.step_count() * sc.agents.len() as u64);

    let scores: Vec<_> = sink.events.iter().filter(|e| e.kind == EventKind::Score).collect();
    assert_eq!(scores.len() as u32, report.total_score());
    for s in scores {
        let released_before = sink
            .events
            .iter()
            .any(|e| e.kind == EventKind::Release && e.object == s.object && e.t <= s.t);
        assert!(released_before, "score without release: {s:?}");
    }
    assert_eq!(
        sink.events.iter().filter(|e| e.kind == EventKind::Capture).count() as u32,
        report.captures
    );
}

#[test]
fn replay_is_bit_identical() {
    let sc = short_half();
    let mut a = Engine::new(sc.clone());
    let mut b = Engine::new(sc.clone());
    for _ in 0..5_000 {
        a.step(&mut NullSink).unwrap();
        b.step(&mut NullSink).unwrap();
        assert_eq!(a.state_hash(), b.state_hash());
    }
    let mut c = Engine::new(Scenario { rng_seed: sc.rng_seed + 1, ..sc });
    for _ in 0..5_000 {
        c.step(&mut NullSink).unwrap();
    }
    assert_ne!(a.state_hash(), c.state_hash());
}

#[test]
fn a_distant_extra_agent_changes_nothing_for_the_others() {
    let mut base = fixture("demo_1v0_noisy.scenario");
    base.arena.extent_x = 200.0;
    base.arena.match_duration = 60.0;
    let mut extended = base.clone();
    extended.agents.push(AgentSpawn {
        id: 1,
        team: base.agents[0].team,
        position: Vec3::new(190.0, 7.5, 3.0),
        heading: 0.0,
    });

    let mut a = Engine::new(base.clone());
    let mut b = Engine::new(extended);
    let pose = |s: &AgentState| (s.x, s.y, s.z, s.theta, s.gate);
    for _ in 0..base.step_count() {
        a.step(&mut NullSink).unwrap();
        b.step(&mut NullSink).unwrap();
        assert_eq!(pose(&a.agents[0].state), pose(&b.agents[0].state));
        assert_eq!(a.score, b.score);
    }
}

#[test]
fn agent_captures_a_ball_four_meters_ahead() {
    let mut sc = fixture("demo_1v0.scenario");
    sc.arena.match_duration = 30.0;
    sc.agents[0].position = Vec3::new(8.0, 8.0, 3.0);
    sc.agents[0].heading = 0.3;
    // Four meters ahead, slightly left and above.
    sc.balls[0].center = Vec3::new(8.0 + 4.0 * 0.4f64.cos(), 8.0 + 4.0 * 0.4f64.sin(), 3.4);
    sc.goals.clear();

    let mut sink = MemorySink::default();
    let report = run_match(&sc, &mut sink).unwrap();
    assert_eq!(report.captures, 1);
    let capture_t = sink.events.iter().find(|e| e.kind == EventKind::Capture).unwrap().t;

    let chase: Vec<_> = sink.records.iter().filter(|r| r.mode == 2 && r.t <= capture_t).collect();
    let last = chase.last().unwrap();
    assert!(last.e_yaw.unwrap().abs() < 5.0, "{last:?}");
    assert!(last.e_vert.unwrap().abs() < 5.0, "{last:?}");
}

#[test]
fn demo_scores_once_after_visiting_every_mode() {
    let sc = fixture("demo_1v0.scenario");
    let mut sink = MemorySink::default();
    let report = run_match(&sc, &mut sink).unwrap();
    assert_eq!(report.total_score(), 1);
    assert!(report.first_score_time_s.unwrap() < 120.0);
    let seq = mode_sequence(&sink.records, 0);
    assert_eq!(
        &seq[..5],
        &[Mode::BallSearch, Mode::BallCapture, Mode::GoalSearch, Mode::GoalScore, Mode::BallCapture]
    );
    assert_eq!(seq.last(), Some(&Mode::BallSearch));
}
