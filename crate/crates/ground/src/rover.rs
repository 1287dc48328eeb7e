//! Rover side of the link: turns simulator output into wire messages.

use rvops_core::simkit::{DepthFrame, RgbFrame, SimTick};
use rvops_core::Pose;
use rvops_wire::{DepthImage, Payload, RgbImage, WireMessage};

pub fn rgb_message(f: RgbFrame) -> WireMessage {
    let img = RgbImage { width: f.width as u16, height: f.height as u16, data: f.data };
    WireMessage::new(f.seq, f.stamp_ns, Payload::RgbFrame(img))
}

pub fn depth_message(f: DepthFrame) -> WireMessage {
    let img = DepthImage { width: f.width as u16, height: f.height as u16, data: f.data };
    WireMessage::new(f.seq, f.stamp_ns, Payload::DepthFrame(img))
}

/// Sequence state for the rover's outgoing topics. Frames carry their own
/// frame sequence numbers.
#[derive(Debug, Default)]
pub struct RoverPublisher {
    pose_seq: u32,
}

impl RoverPublisher {
    pub fn pose_message(&mut self, stamp_ns: u64, pose: Pose) -> WireMessage {
        self.pose_seq += 1;
        WireMessage::new(self.pose_seq, stamp_ns, Payload::PoseEstimate { pose })
    }

    /// Pose estimate first, then the frame pair if one was rendered.
    pub fn tick_messages(&mut self, tick: SimTick) -> Vec<WireMessage> {
        let mut out = vec![self.pose_message(tick.stamp_ns, tick.pose_estimate)];
        if let Some((rgb, depth)) = tick.frames {
            out.push(rgb_message(rgb));
            out.push(depth_message(depth));
        }
        out
    }
}
