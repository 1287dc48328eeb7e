//! Self-test suite: every acceptance criterion as a function returning a
//! pass/fail verdict with measured figures.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvops_core::mapping::{LandmarkTracker, TrackerParams};
use rvops_core::perception::{detect_rocks, fit_ground_plane_ransac, BBox, Detection, DetectorParams};
use rvops_core::simkit::{generate_scene, pixel_surfaces, render_depth, FrameStamp, RenderConfig, SceneParams, SimConfig, Surface};
use rvops_core::{CameraIntrinsics, CameraMount, Pose, Quat, Vec3};
use rvops_wire::fixtures::{random_any, random_message};
use rvops_wire::{crc32, decode_frame, encode_message, encode_payload, from_json, parse_log, to_json, LogWriter, MsgType, Payload, StreamDecoder, WireMessage};

use crate::config::PipelineConfig;
use crate::scenario::{replay_through_pipeline, run_scenario, RunOptions, Scenario};

pub const STRAIGHT_INTO_ROCK: &str = include_str!("../scenarios/straight_into_rock.scen");
pub const WATCHDOG: &str = include_str!("../scenarios/watchdog.scen");
pub const TWO_ROCKS: &str = include_str!("../scenarios/two_rocks.scen");
pub const THROUGHPUT: &str = include_str!("../scenarios/throughput.scen");

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:<12} {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub type Criterion = (&'static str, fn() -> (bool, String));

pub const CRITERIA: [Criterion; 8] = [
    ("geometry", geometry),
    ("plane-fit", plane_fit),
    ("detection", detection),
    ("tracker", tracker),
    ("codec", codec),
    ("determinism", determinism),
    ("safety", safety),
    ("throughput", throughput),
];

pub fn run_criterion(c: &Criterion) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match std::panic::catch_unwind(c.1) {
        Ok(r) => r,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    };
    CriterionResult { name: c.0, passed, detail, elapsed: start.elapsed() }
}

/// Runs the named criteria, or all of them for an empty filter.
pub fn run_all(filter: &[String], mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| filter.is_empty() || filter.iter().any(|f| f == c.0))
        .map(|c| {
            let r = run_criterion(c);
            report(&r);
            r
        })
        .collect()
}

fn unit_quat(rng: &mut ChaCha8Rng) -> Quat {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = c.iter().map(|x| x * x).sum();
        if n2 > 1e-3 && n2 <= 1.0 {
            return Quat::new(c[0], c[1], c[2], c[3]);
        }
    }
}

fn vec_in(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

fn pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(unit_quat(rng), vec_in(rng, 10.0))
}

pub fn geometry() -> (bool, String) {
    const N: usize = 10_000;
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e0);
    let mut worst = [0.0f64; 3];
    for _ in 0..N {
        let q = unit_quat(&mut rng);
        let (v, w) = (vec_in(&mut rng, 10.0), vec_in(&mut rng, 10.0));
        let back = q.conjugate().rotate(q.rotate(v));
        let e = [
            (q.norm() - 1.0).abs(),
            (q.rotate(v).norm() - v.norm()).abs(),
            (back - v).norm(),
            ((q.rotate(v) - q.rotate(w)).norm() - (v - w).norm()).abs(),
        ];
        worst[0] = e.iter().fold(worst[0], |a, b| a.max(*b));
    }
    for _ in 0..N {
        let (a, b, c) = (pose(&mut rng), pose(&mut rng), pose(&mut rng));
        let p = vec_in(&mut rng, 10.0);
        let id = a.compose(&a.inverse());
        let lhs = a.compose(&b).transform_point(p);
        let rhs = a.transform_point(b.transform_point(p));
        let ab_c = a.compose(&b).compose(&c).transform_point(p);
        let a_bc = a.compose(&b.compose(&c)).transform_point(p);
        let e = [id.rotation.angle(), id.translation.norm(), (lhs - rhs).norm(), (ab_c - a_bc).norm()];
        worst[1] = e.iter().fold(worst[1], |a, b| a.max(*b));
    }
    let k = CameraIntrinsics::default_rgbd();
    for _ in 0..N {
        let u = rng.random_range(0.0..k.width as f64);
        let v = rng.random_range(0.0..k.height as f64);
        let z = rng.random_range(0.1..=10.0);
        let p = k.back_project(u, v, z).expect("positive depth");
        let (pu, pv) = k.project(p).expect("in front of camera");
        worst[2] = worst[2].max((pu - u).abs().max((pv - v).abs())).max((p.z - z).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst.iter().all(|w| *w <= TOL) && elapsed < Duration::from_secs(5);
    (ok, format!("3x{N} cases, worst quat {:.1e} pose {:.1e} projection {:.1e}, {:.2} s", worst[0], worst[1], worst[2], elapsed.as_secs_f64()))
}

pub fn plane_fit() -> (bool, String) {
    const TRIALS: usize = 100;
    let start = Instant::now();
    let params = DetectorParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x91a);
    let mut good = 0;
    let (mut worst_deg, mut worst_off) = (0.0f64, 0.0f64);
    for trial in 0..TRIALS {
        let tilt = rng.random_range(0.0..0.35f64);
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let n = Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos());
        let d = rng.random_range(-1.0..1.0);
        // Two tangent directions spanning the plane.
        let t1 = n.cross(Vec3::new(0.0, 1.0, 0.0)).normalized();
        let t2 = n.cross(t1);
        let base = n * -d;
        let inliers = 300;
        let mut pts: Vec<Vec3> = (0..inliers)
            .map(|_| {
                let noise = rng.random_range(-0.002..0.002);
                base + t1 * rng.random_range(-3.0..3.0) + t2 * rng.random_range(-3.0..3.0) + n * noise
            })
            .collect();
        for _ in 0..inliers / 3 {
            let h = rng.random_range(0.05..1.0);
            pts.push(base + t1 * rng.random_range(-3.0..3.0) + t2 * rng.random_range(-3.0..3.0) + n * h);
        }
        let Ok(fit) = fit_ground_plane_ransac(&pts, &params, trial as u64) else { continue };
        let deg = fit.normal.dot(n).clamp(-1.0, 1.0).acos().to_degrees();
        let off = (fit.offset - d).abs();
        worst_deg = worst_deg.max(deg);
        worst_off = worst_off.max(off);
        if deg < 0.5 && off < 0.005 {
            good += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = good >= 99 && elapsed < Duration::from_secs(10);
    (ok, format!("{good}/{TRIALS} within bounds, worst {worst_deg:.3} deg {:.2} mm, {:.2} s", worst_off * 1e3, elapsed.as_secs_f64()))
}

pub fn detection() -> (bool, String) {
    const SCENES: u64 = 50;
    const MIN_PX: usize = 30;
    const RECALL_GATE: f64 = 0.3;
    let start = Instant::now();
    let k = CameraIntrinsics::default_rgbd();
    let p = DetectorParams::default();
    let cfg = RenderConfig::default();
    let bound = 0.05 + 2.0 * cfg.depth_noise_sigma;
    let (mut eligible, mut found, mut false_pos) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for seed in 0..SCENES {
        let mut scene = match generate_scene(seed, &SceneParams { rock_count: 0, ..Default::default() }) {
            Ok(s) => s,
            Err(e) => return (false, format!("scene {seed}: {e}")),
        };
        let body = Pose::from_xy_yaw(0.0, 0.0, scene.terrain_height(0.0, 0.0), 0.0);
        let cam = CameraMount::default().camera_in_world(&body);
        let empty = render_depth(&scene, &cam, &k, &cfg, FrameStamp { seq: 1, stamp_ns: 0 });
        match detect_rocks(&empty, &k, &cam, &p, seed) {
            Ok((ds, _)) => false_pos += ds.len(),
            Err(e) => return (false, format!("rock-free scene {seed}: {e}")),
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let range: f64 = rng.random_range(1.2..4.0);
        let bearing: f64 = rng.random_range(-0.4..0.4);
        let r = rng.random_range(0.1..0.35);
        let idx = scene.place_rock(range * bearing.cos(), range * bearing.sin(), r);
        let labels = pixel_surfaces(&scene, &cam, &k, &RenderConfig::noiseless(), p.stride);
        let px = labels.iter().filter(|l| matches!(l, Some(Surface::Rock(_)))).count();
        if px < MIN_PX {
            continue;
        }
        eligible += 1;
        let depth = render_depth(&scene, &cam, &k, &cfg, FrameStamp { seq: 1, stamp_ns: 0 });
        let Ok((ds, _)) = detect_rocks(&depth, &k, &cam, &p, seed) else { continue };
        let truth = scene.rocks[idx].center();
        let err = ds.iter().map(|d| d.centroid_world.horizontal_distance(truth)).fold(f64::INFINITY, f64::min);
        if err < RECALL_GATE {
            found += 1;
            worst = worst.max(err);
        }
    }
    let recall = if eligible == 0 { 0.0 } else { found as f64 / eligible as f64 };
    let elapsed = start.elapsed();
    let ok = eligible > 0 && recall >= 0.95 && worst <= bound && false_pos == 0 && elapsed < Duration::from_secs(60);
    (
        ok,
        format!(
            "recall {found}/{eligible} = {recall:.2}, worst centroid {worst:.3} m (bound {bound:.3}), {false_pos} false positives on {SCENES} rock-free scenes, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn brute_force(lms: &[Vec3], dets: &[Vec3], gate: f64) -> Vec<(usize, usize)> {
    fn rec(li: usize, lms: &[Vec3], dets: &[Vec3], gate: f64, used: &mut [bool], cur: &mut Vec<(usize, usize)>, best: &mut (usize, f64, Vec<(usize, usize)>)) {
        if li == lms.len() {
            let cost: f64 = cur.iter().map(|&(l, d)| lms[l].horizontal_distance(dets[d])).sum();
            if cur.len() > best.0 || (cur.len() == best.0 && cost < best.1) {
                *best = (cur.len(), cost, cur.clone());
            }
            return;
        }
        rec(li + 1, lms, dets, gate, used, cur, best);
        for di in 0..dets.len() {
            if !used[di] && lms[li].horizontal_distance(dets[di]) < gate {
                used[di] = true;
                cur.push((li, di));
                rec(li + 1, lms, dets, gate, used, cur, best);
                cur.pop();
                used[di] = false;
            }
        }
    }
    let mut best = (0, f64::INFINITY, Vec::new());
    rec(0, lms, dets, gate, &mut vec![false; dets.len()], &mut Vec::new(), &mut best);
    best.2
}

fn detection_at(p: Vec3) -> Detection {
    Detection { bbox: BBox::default(), pixel_count: 50, centroid_world: p, radius_est: 0.2, confidence: 1.0, frame_seq: 1 }
}

pub fn tracker() -> (bool, String) {
    let sc = Scenario::parse(TWO_ROCKS).expect("embedded scenario parses");
    let out = match run_scenario(&sc, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return (false, e.to_string()),
    };
    let last = out.publications.iter().rev().find_map(|m| match &m.payload {
        Payload::LandmarkSet { landmarks } => Some(landmarks.clone()),
        _ => None,
    });
    let confirmed: Vec<_> = last.unwrap_or_default().into_iter().filter(|l| l.confirmed).collect();
    let rocks = sc.build_scene().expect("scene builds").rocks;
    let worst = rocks
        .iter()
        .map(|r| confirmed.iter().map(|l| l.position.horizontal_distance(r.center())).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let seq_ok = out.counters.frames_processed == 20 && confirmed.len() == 2 && worst <= 0.05;

    let params = TrackerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ac);
    let (mut instances, mut agree) = (0, 0);
    while instances < 1000 {
        let lms: Vec<Vec3> = (0..3).map(|_| Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.1)).collect();
        if !(0..3).all(|i| (i + 1..3).all(|j| lms[i].horizontal_distance(lms[j]) > 2.0 * params.gate)) {
            continue;
        }
        instances += 1;
        let dets: Vec<Vec3> = lms
            .iter()
            .map(|l| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let r = rng.random_range(0.0..1.2 * params.gate);
                *l + Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        let mut t = LandmarkTracker::new(params);
        t.update(&lms.iter().map(|p| detection_at(*p)).collect::<Vec<_>>(), 1);
        let mut greedy = t.match_pairs(&dets.iter().map(|p| detection_at(*p)).collect::<Vec<_>>());
        greedy.sort_unstable();
        let mut oracle = brute_force(&lms, &dets, params.gate);
        oracle.sort_unstable();
        agree += usize::from(greedy == oracle);
    }
    (
        seq_ok && agree == instances,
        format!(
            "{} frames, {} confirmed, worst {worst:.3} m; greedy = brute force on {agree}/{instances} instances",
            out.counters.frames_processed,
            confirmed.len()
        ),
    )
}

pub fn codec() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut failures = Vec::new();
    for t in MsgType::ALL {
        for _ in 0..1000 {
            let m = random_message(&mut rng, t);
            let bin_ok = encode_message(&m).ok().and_then(|b| decode_frame(&b).ok()).as_ref() == Some(&m);
            let json_ok = from_json(&to_json(&m)).ok().as_ref() == Some(&m);
            if !(bin_ok && json_ok) {
                failures.push(t.name());
                break;
            }
        }
    }

    let (mut lost, mut phantom, mut altered, mut trials) = (0, 0, 0, 0);
    for _ in 0..300 {
        trials += 1;
        let ms: Vec<WireMessage> = (0..10).map(|_| random_any(&mut rng)).collect();
        let mut touched = [false; 10];
        let mut bytes = Vec::new();
        for (i, m) in ms.iter().enumerate() {
            let mut f = encode_message(m).expect("fixtures encode");
            if rng.random_bool(0.3) {
                touched[i] = true;
                for _ in 0..rng.random_range(1..4) {
                    let at = rng.random_range(0..f.len());
                    f[at] ^= 1 << rng.random_range(0..8);
                }
            }
            bytes.extend(f);
        }
        let got = match std::panic::catch_unwind(|| {
            let mut dec = StreamDecoder::new();
            let mut got = dec.push(&bytes);
            got.extend(dec.finish());
            got
        }) {
            Ok(g) => g,
            Err(_) => return (false, "decoder panicked on corrupted stream".into()),
        };
        let mut it = got.iter();
        lost += ms.iter().zip(&touched).filter(|(_, t)| !**t).filter(|(m, _)| !it.any(|g| g == *m)).count();
        // The CRC covers the payload bytes only, so a flipped type, seq or
        // stamp bit can pass; payload bytes that match no sent frame cannot.
        let sent: Vec<Vec<u8>> = ms.iter().map(|m| encode_payload(&m.payload).expect("fixtures encode")).collect();
        phantom += got.iter().filter(|g| !encode_payload(&g.payload).is_ok_and(|b| sent.contains(&b))).count();
        altered += got.iter().filter(|g| !ms.contains(g)).count();
    }
    let check = crc32(b"123456789");
    let ok = failures.is_empty() && lost == 0 && phantom == 0 && check == 0xCBF4_3926;
    (
        ok,
        format!(
            "13x1000 round trips ({} failing types), {trials} corrupted streams: {lost} intact frames lost, {phantom} corrupted payloads delivered, {altered} delivered with altered header fields; crc32(\"123456789\") = {check:#010x}",
            failures.len()
        ),
    )
}

fn topic_bytes(pubs: &[WireMessage], t: MsgType) -> Vec<Vec<u8>> {
    pubs.iter().filter(|m| m.msg_type() == t).map(|m| encode_message(m).expect("publications encode")).collect()
}

pub fn determinism() -> (bool, String) {
    let sc = Scenario::parse(STRAIGHT_INTO_ROCK).expect("embedded scenario parses");
    let opts = RunOptions::default();
    let (a, b) = match (run_scenario(&sc, &opts), run_scenario(&sc, &opts)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (false, e.to_string()),
    };
    let metrics_same = a.metrics.to_json() == b.metrics.to_json();
    let truth_same = a.truth_jsonl() == b.truth_jsonl();

    let mut log = LogWriter::new(Vec::new()).expect("in-memory log");
    for m in &a.rover_stream {
        log.write(m).expect("in-memory write");
    }
    let bytes = log.into_inner().expect("in-memory flush");
    let replayed = match parse_log(&bytes) {
        Ok(l) => l,
        Err(e) => return (false, format!("log parse: {e}")),
    };
    let (pubs, _) = replay_through_pipeline(replayed.messages, &PipelineConfig::default());
    let lm_orig = topic_bytes(&a.publications, MsgType::LandmarkSet);
    let lm_same = !lm_orig.is_empty() && lm_orig == topic_bytes(&pubs, MsgType::LandmarkSet);
    let det_same = topic_bytes(&a.publications, MsgType::DetectionSet) == topic_bytes(&pubs, MsgType::DetectionSet);
    (
        metrics_same && truth_same && lm_same && det_same,
        format!(
            "metrics identical: {metrics_same}, truth logs identical: {truth_same}, replayed LandmarkSet identical: {lm_same} ({} sets), DetectionSet identical: {det_same}",
            lm_orig.len()
        ),
    )
}

pub fn safety() -> (bool, String) {
    let sc = Scenario::parse(STRAIGHT_INTO_ROCK).expect("embedded scenario parses");
    let run = |on: bool| run_scenario(&sc, &RunOptions { safety: Some(on), ..Default::default() });
    let (off, on) = match (run(false), run(true)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (false, e.to_string()),
    };
    let head_on = off.metrics.collisions >= 1 && on.metrics.collisions == 0 && on.metrics.blocked_statuses >= 1;

    let wd = Scenario::parse(WATCHDOG).expect("embedded scenario parses");
    let w = match run_scenario(&wd, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return (false, e.to_string()),
    };
    let timeout_ns = PipelineConfig::default().safety.watchdog_timeout_ms * 1_000_000;
    let tick_ns = (SimConfig::default().tick_s * 1e9).round() as u64;
    // First tick at which the command gap exceeds the timeout.
    let fire = (0..w.truth.len()).find(|&k| w.last_command_ns[k].is_some_and(|l| k as u64 * tick_ns - l > timeout_ns));
    let (wd_ok, wd_detail) = match fire {
        Some(k) => {
            let moving_before = k > 0 && w.truth[k - 1].v > 0.0;
            let stopped = w.truth[k].v == 0.0 || w.truth.get(k + 1).is_some_and(|t| t.v == 0.0);
            (moving_before && stopped && w.metrics.watchdog_stops >= 1, format!("gap exceeded at tick {k}, v {:.2} -> {:.2}", w.truth[k.saturating_sub(1)].v, w.truth[k].v))
        }
        None => (false, "command gap never exceeded the timeout".into()),
    };
    (
        head_on && wd_ok,
        format!(
            "safety off: {} collisions; safety on: {} collisions, {} blocked, min clearance {:.2} m; watchdog: {wd_detail}",
            off.metrics.collisions, on.metrics.collisions, on.metrics.blocked_statuses, on.metrics.min_clearance_m
        ),
    )
}

pub fn throughput() -> (bool, String) {
    let sc = Scenario::parse(THROUGHPUT).expect("embedded scenario parses");
    let start = Instant::now();
    let out = match run_scenario(&sc, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return (false, e.to_string()),
    };
    let wall = start.elapsed();
    let mean = out.mean_frame_latency.unwrap_or(Duration::MAX);
    let ok = out.counters.frames_processed >= (sc.duration_s * 5.0) as u64 - 1 && mean < Duration::from_millis(200) && wall.as_secs_f64() < sc.duration_s;
    (
        ok,
        format!(
            "{} frames over {:.0} s simulated, mean pipeline latency {:.1} ms, wall {:.1} s",
            out.counters.frames_processed,
            sc.duration_s,
            mean.as_secs_f64() * 1e3,
            wall.as_secs_f64()
        ),
    )
}
