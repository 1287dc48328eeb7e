use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvops_core::mapping::{associate_landmarks, LandmarkTracker, TrackerParams};
use rvops_core::perception::{detect_rocks, BBox, Detection, DetectorParams};
use rvops_core::safety::{CommandSource, TwistCommand};
use rvops_core::simkit::{Scene, SimConfig, Simulator};
use rvops_core::Vec3;

fn det(p: Vec3) -> Detection {
    Detection {
        bbox: BBox::default(),
        pixel_count: 50,
        centroid_world: p,
        radius_est: 0.2,
        confidence: 1.0,
        frame_seq: 1,
    }
}

/// Minimum total distance over all injective assignments of detections to
/// landmarks, restricted to in-gate pairs, maximizing the number of matches.
fn brute_force(lms: &[Vec3], dets: &[Vec3], gate: f64) -> Vec<(usize, usize)> {
    fn rec(
        li: usize,
        lms: &[Vec3],
        dets: &[Vec3],
        gate: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
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

#[test]
fn greedy_matches_brute_force_on_separated_instances() {
    let params = TrackerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut instances = 0;
    while instances < 500 {
        let lms: Vec<Vec3> = (0..3)
            .map(|_| Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.1))
            .collect();
        let separated = (0..3).all(|i| (i + 1..3).all(|j| lms[i].horizontal_distance(lms[j]) > 2.0 * params.gate));
        if !separated {
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
        let mut tracker = LandmarkTracker::new(params);
        tracker.update(&lms.iter().map(|p| det(*p)).collect::<Vec<_>>(), 1);
        let detections: Vec<Detection> = dets.iter().map(|p| det(*p)).collect();
        let mut greedy = tracker.match_pairs(&detections);
        greedy.sort_unstable();
        let mut oracle = brute_force(&lms, &dets, params.gate);
        oracle.sort_unstable();
        assert_eq!(greedy, oracle, "landmarks {lms:?} detections {dets:?}");
    }
}

#[test]
fn static_two_rock_sequence_confirms_both() {
    let mut scene = Scene::flat(8.0, 0.1, 17);
    scene.place_rock(2.2, 0.7, 0.25);
    scene.place_rock(2.8, -0.6, 0.2);
    let mut sim = Simulator::new(scene.clone(), SimConfig::default()).unwrap();
    let hold = TwistCommand { v: 0.0, omega: 0.0, stamp_ns: 0, source: CommandSource::Script };
    let mut tracker = LandmarkTracker::new(TrackerParams::default());
    let mut frames = 0;
    while frames < 20 {
        let tick = sim.step(&hold);
        let Some((_, depth)) = tick.frames else { continue };
        frames += 1;
        let cam = sim.config().mount.camera_in_world(&tick.pose_estimate);
        let (ds, _) = detect_rocks(&depth, &sim.config().intrinsics, &cam, &DetectorParams::default(), depth.seq as u64).unwrap();
        associate_landmarks(&mut tracker, &ds, depth.seq);
    }
    let confirmed = tracker.confirmed();
    assert_eq!(confirmed.len(), 2, "{:?}", tracker.landmarks());
    for rock in &scene.rocks {
        let err = confirmed
            .iter()
            .map(|l| l.position.horizontal_distance(rock.center()))
            .fold(f64::INFINITY, f64::min);
        assert!(err < 0.05, "rock at {:?}: {err}", rock.center());
    }
}
