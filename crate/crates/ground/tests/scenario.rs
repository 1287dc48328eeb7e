use rvops_core::safety::SafetyState;
use rvops_ground::acceptance::{STRAIGHT_INTO_ROCK, THROUGHPUT, TWO_ROCKS, WATCHDOG};
use rvops_ground::scenario::{replay_through_pipeline, run_scenario, RunOptions, Scenario};
use rvops_ground::PipelineConfig;
use rvops_wire::{MsgType, Payload, WireMessage};

fn run(text: &str, safety: Option<bool>) -> rvops_ground::ScenarioOutcome {
    let sc = Scenario::parse(text).unwrap();
    run_scenario(&sc, &RunOptions { safety, ..Default::default() }).unwrap()
}

#[test]
fn bundled_scenarios_parse() {
    for text in [STRAIGHT_INTO_ROCK, WATCHDOG, TWO_ROCKS, THROUGHPUT] {
        Scenario::parse(text).unwrap();
    }
}

#[test]
fn head_on_collides_without_gate_and_stops_with_it() {
    let off = run(STRAIGHT_INTO_ROCK, Some(false));
    assert!(off.metrics.collisions >= 1);
    assert!(!off.metrics.completed);
    assert_eq!(off.metrics.blocked_statuses, 0);
    assert_eq!(off.metrics.min_clearance_m, 0.0);

    let on = run(STRAIGHT_INTO_ROCK, Some(true));
    assert_eq!(on.metrics.collisions, 0);
    assert!(on.metrics.blocked_statuses >= 1);
    assert!(on.metrics.min_clearance_m > 0.0);
    assert!(on.metrics.distance_m > 0.5, "rover should approach before stopping: {}", on.metrics.distance_m);
    let blocked = on.publications.iter().any(|m| matches!(&m.payload, Payload::SafetyStatus(s) if s.state == SafetyState::Blocked));
    assert!(blocked);
}

#[test]
fn watchdog_stops_within_one_tick_of_the_gap() {
    let o = run(WATCHDOG, None);
    // Commands at 0 and 0.6 s; the gap passes 500 ms at tick 11 (0.55 s).
    assert_eq!(o.truth[10].v, 0.3);
    assert_eq!(o.truth[11].v, 0.0);
    assert_eq!(o.forwarded[11].v, 0.0);
    // The second command resumes motion until its own gap runs out.
    assert_eq!(o.truth[12].v, 0.3);
    assert_eq!(o.truth.last().unwrap().v, 0.0);
    assert_eq!(o.metrics.watchdog_stops, 2);
    let stale = o.publications.iter().filter(|m| matches!(&m.payload, Payload::SafetyStatus(s) if s.state == SafetyState::StaleCommand)).count();
    assert_eq!(stale, 2);
}

#[test]
fn per_topic_seqs_strictly_increase() {
    let o = run(STRAIGHT_INTO_ROCK, None);
    for t in MsgType::ALL {
        let seqs: Vec<u32> = o.publications.iter().filter(|m| m.msg_type() == t && t != MsgType::MetricsReport).map(|m| m.seq).collect();
        assert!(seqs.windows(2).all(|w| w[1] == w[0] + 1), "{t:?}: {seqs:?}");
        if let Some(first) = seqs.first() {
            assert_eq!(*first, 1);
        }
    }
}

#[test]
fn frame_publications_follow_frame_order() {
    let o = run(TWO_ROCKS, None);
    let stamps: Vec<u64> = o.publications.iter().filter(|m| m.msg_type() == MsgType::LandmarkSet).map(|m| m.stamp_ns).collect();
    assert_eq!(stamps.len(), 20);
    assert!(stamps.windows(2).all(|w| w[1] > w[0]));
    let meshes = o.publications.iter().filter(|m| m.msg_type() == MsgType::MeshChunk).count();
    let clouds = o.publications.iter().filter(|m| m.msg_type() == MsgType::PointCloudChunk).count();
    assert_eq!((meshes, clouds), (4, 4));
}

#[test]
fn first_frame_sees_one_unconfirmed_landmark_then_confirms() {
    let text = "rvscen 1\nscene_seed 2\nduration_s 0.8\nrock_count 0\nroughness 0\nrock 2.5 0 0.3\n";
    let o = run(text, None);
    let sets: Vec<&WireMessage> = o.publications.iter().filter(|m| m.msg_type() == MsgType::LandmarkSet).collect();
    let dets: Vec<&WireMessage> = o.publications.iter().filter(|m| m.msg_type() == MsgType::DetectionSet).collect();
    let Payload::DetectionSet { detections } = &dets[0].payload else { unreachable!() };
    assert_eq!(detections.len(), 1);
    let landmarks = |i: usize| match &sets[i].payload {
        Payload::LandmarkSet { landmarks } => landmarks.clone(),
        _ => unreachable!(),
    };
    assert_eq!(landmarks(0).len(), 1);
    assert!(!landmarks(0)[0].confirmed);
    assert!(!landmarks(1)[0].confirmed);
    assert!(landmarks(2)[0].confirmed);
}

#[test]
fn replaying_the_rover_stream_reproduces_publications() {
    let o = run(TWO_ROCKS, None);
    let (pubs, counters) = replay_through_pipeline(o.rover_stream.clone(), &PipelineConfig::default());
    assert_eq!(counters.frames_processed, 20);
    for t in [MsgType::DetectionSet, MsgType::LandmarkSet, MsgType::MeshChunk, MsgType::PointCloudChunk, MsgType::RgbFrame] {
        let a: Vec<_> = o.publications.iter().filter(|m| m.msg_type() == t).collect();
        let b: Vec<_> = pubs.iter().filter(|m| m.msg_type() == t).collect();
        assert_eq!(a, b, "{t:?}");
    }
}

#[test]
fn metrics_json_has_fixed_key_order() {
    let o = run(WATCHDOG, None);
    let json = o.metrics.to_json();
    let keys = ["elapsed_s", "collisions", "min_clearance_m", "distance_m", "completed", "mode", "safety", "blocked_statuses", "watchdog_stops", "frames"];
    let mut at = 0;
    for k in keys {
        let pos = json[at..].find(&format!("\"{k}\"")).unwrap_or_else(|| panic!("{k} missing or out of order in {json}"));
        at += pos;
    }
    assert!(json.contains("\"min_clearance_m\":999"), "{json}");
    let last = o.publications.last().unwrap();
    assert!(matches!(&last.payload, Payload::MetricsReport(r) if r.collisions == 0));
}
