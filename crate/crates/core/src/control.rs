//! Proportional position controller and the waypoint-tracking loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Action, Position, WorldError, WorldState};

pub const DEFAULT_KP: f64 = 2.0;
pub const DEFAULT_EPS_WP: f64 = 0.3;
pub const DEFAULT_TIME_LIMIT: f64 = 15.0;

// slack for accumulated floating-point error in the mission clock
const CLOCK_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("controller parameters must be positive (kp = {kp}, eps_wp = {eps_wp})")]
    InvalidParams { kp: f64, eps_wp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PController {
    kp: f64,
    eps_wp: f64,
}

impl PController {
    pub fn new(kp: f64, eps_wp: f64) -> Result<Self, ControlError> {
        if !(kp > 0.0 && eps_wp > 0.0 && kp.is_finite() && eps_wp.is_finite()) {
            return Err(ControlError::InvalidParams { kp, eps_wp });
        }
        Ok(Self { kp, eps_wp })
    }

    pub fn kp(&self) -> f64 {
        self.kp
    }

    /// Arrival radius around a waypoint.
    pub fn eps_wp(&self) -> f64 {
        self.eps_wp
    }

    /// `clamp(kp · (target − current))`, componentwise.
    pub fn action(&self, current: Position, target: Position) -> Action {
        Action::new(
            self.kp * (target.x - current.x),
            self.kp * (target.y - current.y),
        )
    }

    pub fn arrived(&self, current: Position, target: Position) -> bool {
        current.distance(target) <= self.eps_wp
    }
}

impl Default for PController {
    fn default() -> Self {
        Self {
            kp: DEFAULT_KP,
            eps_wp: DEFAULT_EPS_WP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Fail,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }
}

/// Why the tracking loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    TimedOut,
    Died,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub outcome: Outcome,
    pub termination: Termination,
    /// Agent positions, starting with the position before the first step.
    pub trajectory: Vec<Position>,
    /// Number of waypoints reached.
    pub reached: usize,
}

/// Steers through `waypoints` in order: aim at the current waypoint, step,
/// and advance once within the arrival radius. Succeeds when the last
/// waypoint is reached alive within `time_limit` seconds of mission clock.
pub fn track_waypoints(
    world: &mut WorldState,
    ctl: &PController,
    waypoints: &[Position],
    time_limit: f64,
) -> Tracking {
    let dt = world.dt();
    let mut trajectory = vec![world.pos()];
    let mut i = 0;
    let termination = loop {
        if i == waypoints.len() {
            break Termination::Completed;
        }
        if !world.alive() {
            break Termination::Died;
        }
        if ctl.arrived(world.pos(), waypoints[i]) {
            i += 1;
            continue;
        }
        if world.clock() >= time_limit - CLOCK_EPS {
            break Termination::TimedOut;
        }
        let action = ctl.action(world.pos(), waypoints[i]);
        match world.step(action, dt) {
            Ok(()) => trajectory.push(world.pos()),
            Err(WorldError::DeadAgent) => break Termination::Died,
            Err(e) => unreachable!("step with the map's own dt failed: {e}"),
        }
    };
    let ok = termination == Termination::Completed
        && world.alive()
        && world.clock() <= time_limit + CLOCK_EPS;
    Tracking {
        outcome: if ok { Outcome::Success } else { Outcome::Fail },
        termination,
        trajectory,
        reached: i,
    }
}
