//! Short-horizon path prediction, forward-motion gating against confirmed
//! landmarks, and the command watchdog.

use serde::{Deserialize, Serialize};

use crate::kinematics::arc_step;
use crate::mapping::RockLandmark;
use crate::simkit::RoverState;

/// Clearance reported when there is nothing to collide with.
pub const CLEARANCE_SENTINEL: f64 = 999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    Console,
    Script,
    Safety,
}

impl CommandSource {
    pub fn code(self) -> u8 {
        match self {
            Self::Console => 1,
            Self::Script => 2,
            Self::Safety => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(Self::Console),
            2 => Some(Self::Script),
            3 => Some(Self::Safety),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistCommand {
    pub v: f64,
    pub omega: f64,
    pub stamp_ns: u64,
    pub source: CommandSource,
}

impl TwistCommand {
    pub fn stop(stamp_ns: u64) -> Self {
        Self { v: 0.0, omega: 0.0, stamp_ns, source: CommandSource::Safety }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyState {
    Clear,
    Warning,
    Blocked,
    StaleCommand,
}

impl SafetyState {
    pub fn code(self) -> u8 {
        match self {
            Self::Clear => 0,
            Self::Warning => 1,
            Self::Blocked => 2,
            Self::StaleCommand => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Self::Clear),
            1 => Some(Self::Warning),
            2 => Some(Self::Blocked),
            3 => Some(Self::StaleCommand),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyStatus {
    pub state: SafetyState,
    pub nearest_obstacle_id: Option<u32>,
    /// Minimum predicted clearance over the horizon, never negative.
    pub clearance: f64,
    pub horizon: f64,
}

impl SafetyStatus {
    pub fn clear(horizon: f64) -> Self {
        Self { state: SafetyState::Clear, nearest_obstacle_id: None, clearance: CLEARANCE_SENTINEL, horizon }
    }

    pub fn stale(horizon: f64) -> Self {
        Self { state: SafetyState::StaleCommand, ..Self::clear(horizon) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyParams {
    pub rover_radius: f64,
    pub margin: f64,
    pub warn_clearance: f64,
    pub horizon: f64,
    pub step: f64,
    pub watchdog_timeout_ms: u64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            rover_radius: 0.25,
            margin: 0.10,
            warn_clearance: 0.30,
            horizon: 1.0,
            step: 0.1,
            watchdog_timeout_ms: 500,
        }
    }
}

/// Samples the constant-twist path at `step, 2·step, …, horizon`.
pub fn predict_path(est: &RoverState, cmd: &TwistCommand, horizon: f64, step: f64) -> Vec<RoverState> {
    if !(horizon > 0.0 && step > 0.0) {
        return Vec::new();
    }
    let n = (horizon / step + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n);
    let (mut x, mut y, mut th) = (est.x, est.y, est.theta);
    for _ in 0..n {
        (x, y, th) = arc_step(x, y, th, cmd.v, cmd.omega, step);
        out.push(RoverState { x, y, theta: th, v: cmd.v, omega: cmd.omega });
    }
    out
}

/// Raw (possibly negative) clearance of one sample to one landmark.
fn clearance_to(s: &RoverState, lm: &RockLandmark, rover_radius: f64) -> f64 {
    (s.x - lm.position.x).hypot(s.y - lm.position.y) - lm.radius - rover_radius
}

/// Evaluates `cmd` against `landmarks` (only confirmed ones count).
///
/// The current pose is included alongside the predicted samples. Forward
/// commands whose minimum clearance drops below `margin` are replaced by
/// `v = 0` with the angular rate kept; reverse and pure-rotation commands
/// pass through.
pub fn safety_gate(
    cmd: &TwistCommand,
    landmarks: &[RockLandmark],
    est: &RoverState,
    params: &SafetyParams,
) -> (TwistCommand, SafetyStatus) {
    let mut samples = vec![*est];
    samples.extend(predict_path(est, cmd, params.horizon, params.step));

    let mut min_clear = f64::INFINITY;
    let mut nearest = None;
    for lm in landmarks.iter().filter(|l| l.confirmed) {
        for s in &samples {
            let c = clearance_to(s, lm, params.rover_radius);
            if c < min_clear {
                min_clear = c;
                nearest = Some(lm.id);
            }
        }
    }

    let clearance = if min_clear.is_finite() { min_clear.max(0.0) } else { CLEARANCE_SENTINEL };
    let status = |state| SafetyStatus { state, nearest_obstacle_id: nearest, clearance, horizon: params.horizon };

    if min_clear < params.margin && cmd.v > 0.0 {
        let gated = TwistCommand { v: 0.0, omega: cmd.omega, stamp_ns: cmd.stamp_ns, source: CommandSource::Safety };
        (gated, status(SafetyState::Blocked))
    } else if min_clear < params.warn_clearance {
        (*cmd, status(SafetyState::Warning))
    } else {
        (*cmd, status(SafetyState::Clear))
    }
}

/// Emits a stop command when more than `timeout_ms` has elapsed since the
/// last command.
pub fn watchdog(last_cmd_stamp_ns: u64, now_ns: u64, timeout_ms: u64) -> Option<TwistCommand> {
    let gap = now_ns.saturating_sub(last_cmd_stamp_ns);
    (gap > timeout_ms.saturating_mul(1_000_000)).then(|| TwistCommand::stop(now_ns))
}
