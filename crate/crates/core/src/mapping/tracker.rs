use serde::{Deserialize, Serialize};

use crate::perception::Detection;
use crate::Vec3;

/// A persistent obstacle fused from repeated detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RockLandmark {
    pub id: u32,
    pub position: Vec3,
    pub radius: f64,
    pub hits: u32,
    pub first_seen: u32,
    pub last_seen: u32,
    pub confirmed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Association gate on horizontal distance, meters.
    pub gate: f64,
    pub confirm_hits: u32,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { gate: 0.3, confirm_hits: 3 }
    }
}

/// Landmark table with greedy gated nearest-neighbor association.
/// Landmarks are never removed; ids are dense starting at 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkTracker {
    pub params: TrackerParams,
    landmarks: Vec<RockLandmark>,
}

impl LandmarkTracker {
    pub fn new(params: TrackerParams) -> Self {
        Self { params, landmarks: Vec::new() }
    }

    pub fn landmarks(&self) -> &[RockLandmark] {
        &self.landmarks
    }

    pub fn confirmed(&self) -> Vec<RockLandmark> {
        self.landmarks.iter().copied().filter(|l| l.confirmed).collect()
    }

    /// Greedy matching of detections to landmarks; returns the matched
    /// `(landmark index, detection index)` pairs.
    pub fn match_pairs(&self, detections: &[Detection]) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(f64, u32, usize, usize)> = Vec::new();
        for (li, lm) in self.landmarks.iter().enumerate() {
            for (di, d) in detections.iter().enumerate() {
                let dist = lm.position.horizontal_distance(d.centroid_world);
                if dist < self.params.gate {
                    pairs.push((dist, lm.id, di, li));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut lm_used = vec![false; self.landmarks.len()];
        let mut det_used = vec![false; detections.len()];
        let mut out = Vec::new();
        for (_, _, di, li) in pairs {
            if !lm_used[li] && !det_used[di] {
                lm_used[li] = true;
                det_used[di] = true;
                out.push((li, di));
            }
        }
        out
    }

    pub fn update(&mut self, detections: &[Detection], frame_seq: u32) {
        let matched = self.match_pairs(detections);
        let mut det_used = vec![false; detections.len()];
        for &(li, di) in &matched {
            det_used[di] = true;
            let d = &detections[di];
            let lm = &mut self.landmarks[li];
            let h = lm.hits as f64;
            lm.position = (lm.position * h + d.centroid_world) * (1.0 / (h + 1.0));
            lm.radius = (lm.radius * h + d.radius_est) / (h + 1.0);
            lm.hits += 1;
            lm.last_seen = frame_seq;
        }
        for (di, d) in detections.iter().enumerate() {
            if det_used[di] {
                continue;
            }
            let id = self.landmarks.len() as u32 + 1;
            self.landmarks.push(RockLandmark {
                id,
                position: d.centroid_world,
                radius: d.radius_est,
                hits: 1,
                first_seen: frame_seq,
                last_seen: frame_seq,
                confirmed: false,
            });
        }
        for lm in &mut self.landmarks {
            lm.confirmed = lm.hits >= self.params.confirm_hits;
        }
    }
}

pub fn associate_landmarks(tracker: &mut LandmarkTracker, detections: &[Detection], frame_seq: u32) {
    tracker.update(detections, frame_seq);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::BBox;
    use proptest::prelude::*;

    fn det(x: f64, y: f64) -> Detection {
        Detection {
            bbox: BBox::default(),
            pixel_count: 40,
            centroid_world: Vec3::new(x, y, 0.1),
            radius_est: 0.2,
            confidence: 0.5,
            frame_seq: 0,
        }
    }

    #[test]
    fn first_detection_creates_landmark() {
        let mut t = LandmarkTracker::default();
        associate_landmarks(&mut t, &[det(1.0, 2.0)], 5);
        let l = t.landmarks()[0];
        assert_eq!((l.id, l.hits, l.first_seen, l.last_seen, l.confirmed), (1, 1, 5, 5, false));
    }

    #[test]
    fn running_mean_update() {
        let mut t = LandmarkTracker::default();
        t.update(&[det(1.0, 0.0)], 1);
        t.update(&[det(1.1, 0.0)], 2);
        let l = t.landmarks()[0];
        assert_eq!(t.landmarks().len(), 1);
        assert!((l.position.x - 1.05).abs() < 1e-12 && l.position.y == 0.0);
        assert_eq!((l.hits, l.last_seen), (2, 2));
    }

    #[test]
    fn gate_is_strict() {
        let mut t = LandmarkTracker::default();
        t.update(&[det(0.0, 0.0)], 1);
        t.update(&[det(0.0, 0.3)], 2);
        assert_eq!(t.landmarks().len(), 2);
        assert_eq!(t.landmarks()[1].id, 2);
    }

    #[test]
    fn confirmation_after_three_hits() {
        let mut t = LandmarkTracker::default();
        for seq in 1..=3 {
            assert!(t.confirmed().is_empty());
            t.update(&[det(2.0, 0.01 * seq as f64)], seq);
        }
        assert_eq!(t.confirmed().len(), 1);
    }

    #[test]
    fn ties_prefer_lower_landmark_id() {
        let mut t = LandmarkTracker::default();
        t.update(&[det(0.0, 0.0), det(0.4, 0.0)], 1);
        // Equidistant from both landmarks.
        t.update(&[det(0.2, 0.0)], 2);
        assert_eq!(t.landmarks()[0].hits, 2);
        assert_eq!(t.landmarks()[1].hits, 1);
    }

    proptest! {
        #[test]
        fn replay_is_identical_and_monotone(
            frames in proptest::collection::vec(
                proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 0..5), 1..12)
        ) {
            let run = || {
                let mut t = LandmarkTracker::default();
                let mut history = Vec::new();
                for (seq, f) in frames.iter().enumerate() {
                    let ds: Vec<_> = f.iter().map(|&(x, y)| det(x, y)).collect();
                    t.update(&ds, seq as u32 + 1);
                    history.push(t.landmarks().to_vec());
                }
                history
            };
            let a = run();
            prop_assert_eq!(&a, &run());
            for w in a.windows(2) {
                prop_assert!(w[1].len() >= w[0].len());
                for (old, new) in w[0].iter().zip(&w[1]) {
                    prop_assert_eq!(old.id, new.id);
                    prop_assert!(new.hits >= old.hits);
                }
            }
            if let Some(last) = a.last() {
                for (i, l) in last.iter().enumerate() {
                    prop_assert_eq!(l.id, i as u32 + 1);
                    prop_assert_eq!(l.confirmed, l.hits >= 3);
                }
            }
        }
    }
}
