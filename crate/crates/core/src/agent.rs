//! Agents that turn a demonstration video into their own waypoints.
//!
//! * [`run_mission_algorithm2`]: infer every waypoint by teleporting to the
//!   candidates of a local window, restart, then track the waypoints.
//! * [`run_mission_algorithm1`]: same recursion without teleportation; the
//!   agent drives to each candidate with its controller and moves on to the
//!   chosen waypoint before searching for the next one.
//! * [`run_baseline_sweep`]: ignores the video and sweeps every cell.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{track_waypoints, Outcome, PController, Termination};
use crate::demo::Demonstration;
use crate::optimize::{grid_search, image_objective, SearchError, SearchSpec};
use crate::vision::{average, dist, Frame, Kernel, VisionError};
use crate::world::{is_traversable, kinematic_step, Position, TileKind, TileMap, WorldState};

/// Simulated time allowed for reaching one candidate without teleportation.
pub const CANDIDATE_BUDGET_SECS: f64 = 3.0;
/// How close the controller must bring the agent to a candidate before it
/// looks around.
pub const CANDIDATE_ARRIVAL_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("search for waypoint {index} failed")]
    Search {
        index: usize,
        #[source]
        source: SearchError,
    },
    #[error("demonstration has no frames")]
    EmptyDemo,
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error("sweep budget of {0} interactions exhausted")]
    BudgetExhausted(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Teleport,
    Navigate,
    Baseline,
}

/// Everything recorded about one mission run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub algorithm: Algorithm,
    pub map_id: String,
    /// Success when the waypoint loop completed alive within the time limit
    /// and the agent reached the goal.
    pub outcome: Outcome,
    pub termination: Termination,
    /// Whether the agent came within the arrival radius of the goal tile.
    pub reached_goal: bool,
    pub waypoints: Vec<Position>,
    pub agent_trajectory: Vec<Position>,
    pub demo_trajectory: Vec<Position>,
    pub interactions_inference: u64,
    pub interactions_tracking: u64,
    pub interactions_total: u64,
    /// Simulated seconds spent in the tracking phase.
    pub tracking_time: f64,
    /// Candidates the navigating agent could not reach.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unreachable: Vec<Position>,
    /// Host time; not serialized so reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl MissionReport {
    /// `max_i ‖r_i − q*_i‖`, comparing waypoint `i` with demo frame `i`.
    pub fn max_waypoint_error(&self) -> f64 {
        waypoint_errors(&self.waypoints, &self.demo_trajectory)
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// `‖r_i − q*_i‖` for `i = 1..=L`; `waypoints[k]` is `r_{k+1}`.
pub fn waypoint_errors(waypoints: &[Position], demo_positions: &[Position]) -> Vec<f64> {
    waypoints
        .iter()
        .zip(demo_positions.iter().skip(1))
        .map(|(r, q)| r.distance(*q))
        .collect()
}

/// Recovers `r_1..r_L`: starting from the spawn, each waypoint is the
/// best-matching candidate in the window around the previous one.
pub fn infer_waypoints(
    world: &mut WorldState,
    demo: &Demonstration,
    spec: &SearchSpec,
    kernel: &Kernel,
) -> Result<Vec<Position>, AgentError> {
    if demo.frames.is_empty() {
        return Err(AgentError::EmptyDemo);
    }
    world.restart();
    let mut current = world.pos();
    let mut waypoints = Vec::with_capacity(demo.frames.len() - 1);
    for (index, target) in demo.frames.iter().enumerate().skip(1) {
        let mut objective = image_objective(world, spec, target, kernel);
        let found = grid_search(current, spec, &mut objective)
            .map_err(|source| AgentError::Search { index, source })?;
        current = found.best;
        waypoints.push(current);
    }
    Ok(waypoints)
}

pub fn run_mission_algorithm2(
    world: &mut WorldState,
    demo: &Demonstration,
    spec: &SearchSpec,
    kernel: &Kernel,
    ctl: &PController,
    time_limit: f64,
) -> Result<MissionReport, AgentError> {
    let started = Instant::now();
    let before = world.interactions();
    let waypoints = infer_waypoints(world, demo, spec, kernel)?;
    let after_inference = world.interactions();
    world.restart();
    let tracking = track_waypoints(world, ctl, &waypoints, time_limit);
    let after_tracking = world.interactions();
    let reached_goal = touches_goal(world.map(), &tracking.trajectory, ctl.eps_wp());
    Ok(MissionReport {
        algorithm: Algorithm::Teleport,
        map_id: demo.map_id.clone(),
        outcome: mission_outcome(tracking.outcome, reached_goal),
        termination: tracking.termination,
        reached_goal,
        waypoints,
        agent_trajectory: tracking.trajectory,
        demo_trajectory: demo.positions.clone(),
        interactions_inference: after_inference - before,
        interactions_tracking: after_tracking - after_inference,
        interactions_total: after_tracking - before,
        tracking_time: world.clock(),
        unreachable: Vec::new(),
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn mission_outcome(tracking: Outcome, reached_goal: bool) -> Outcome {
    if tracking.is_success() && reached_goal {
        Outcome::Success
    } else {
        Outcome::Fail
    }
}

/// Whether any trajectory point lies within `tol` of the goal tile.
pub fn touches_goal(map: &TileMap, trajectory: &[Position], tol: f64) -> bool {
    let (gx, gy) = map.goal_cell();
    let (gx, gy) = (gx as f64, gy as f64);
    trajectory.iter().any(|p| {
        let dx = (gx - p.x).max(p.x - gx - 1.0).max(0.0);
        let dy = (gy - p.y).max(p.y - gy - 1.0).max(0.0);
        dx.hypot(dy) <= tol
    })
}

enum Drive {
    Arrived,
    Unreachable,
    Died,
}

/// Steers toward `target` until within `tol`, refusing any step whose
/// predicted end lies on lava.
fn drive_to(
    world: &mut WorldState,
    ctl: &PController,
    target: Position,
    tol: f64,
    budget_secs: f64,
    trajectory: &mut Vec<Position>,
) -> Drive {
    let dt = world.dt();
    let deadline = world.clock() + budget_secs - 1e-9;
    loop {
        if !world.alive() {
            return Drive::Died;
        }
        if world.pos().distance(target) <= tol {
            return Drive::Arrived;
        }
        if world.clock() >= deadline {
            return Drive::Unreachable;
        }
        let action = ctl.action(world.pos(), target);
        let next = kinematic_step(world.map(), world.pos(), action, dt);
        if world.map().tile_at(next) == TileKind::Lava {
            return Drive::Unreachable;
        }
        if world.step(action, dt).is_err() {
            return Drive::Died;
        }
        trajectory.push(world.pos());
    }
}

/// Serpentine visiting order over the window, to keep drives short.
fn serpentine(spec: &SearchSpec, center: Position) -> Vec<Position> {
    let n = spec.half_count();
    let mut out = Vec::with_capacity(spec.candidate_count());
    for (col, i) in (-n..=n).enumerate() {
        let js: Vec<i64> = if col % 2 == 0 {
            (-n..=n).collect()
        } else {
            (-n..=n).rev().collect()
        };
        for j in js {
            out.push(center.offset(i as f64 * spec.step, j as f64 * spec.step));
        }
    }
    out
}

fn lex_less(a: Position, b: Position) -> bool {
    a.x < b.x || (a.x == b.x && a.y < b.y)
}

/// Waypoint search without teleportation. The agent physically visits each
/// window candidate, then drives to the chosen waypoint. Candidates it
/// cannot reach within [`CANDIDATE_BUDGET_SECS`] are skipped and reported.
///
/// The mission succeeds when every chosen waypoint is reached alive, the
/// time spent driving between consecutive waypoints (search excluded) stays
/// within `time_limit`, and the agent touched the goal.
pub fn run_mission_algorithm1(
    world: &mut WorldState,
    demo: &Demonstration,
    spec: &SearchSpec,
    kernel: &Kernel,
    ctl: &PController,
    time_limit: f64,
) -> Result<MissionReport, AgentError> {
    if demo.frames.is_empty() {
        return Err(AgentError::EmptyDemo);
    }
    spec.validate().map_err(|source| AgentError::Search { index: 0, source })?;
    let started = Instant::now();
    let before = world.interactions();
    world.restart();
    let mut trajectory = vec![world.pos()];
    let mut waypoints = Vec::new();
    let mut unreachable = Vec::new();
    let mut search_interactions = 0;
    let mut travel_time = 0.0;
    let mut current = world.pos();
    let mut termination = Termination::Completed;

    'frames: for (index, target) in demo.frames.iter().enumerate().skip(1) {
        let search_start = world.interactions();
        let mut best: Option<(Position, f64)> = None;
        for cand in serpentine(spec, current) {
            if !is_traversable(world.map(), cand) {
                continue;
            }
            match drive_to(world, ctl, cand, CANDIDATE_ARRIVAL_TOL, CANDIDATE_BUDGET_SECS, &mut trajectory) {
                Drive::Arrived => {}
                Drive::Unreachable => {
                    unreachable.push(cand);
                    continue;
                }
                Drive::Died => {
                    termination = Termination::Died;
                    break 'frames;
                }
            }
            let frames: Vec<Frame> = (0..spec.n_avg).map(|_| world.render(spec.noise)).collect();
            let value = dist(target, &average(&frames)?, kernel)?;
            let better = match best {
                None => true,
                Some((p, b)) => value < b || (value == b && lex_less(cand, p)),
            };
            if better {
                best = Some((cand, value));
            }
        }
        search_interactions += world.interactions() - search_start;
        let (chosen, _) = best.ok_or(AgentError::Search {
            index,
            source: SearchError::NoFeasibleCandidate(current),
        })?;
        waypoints.push(chosen);
        let clock = world.clock();
        let drive = drive_to(world, ctl, chosen, ctl.eps_wp(), f64::INFINITY, &mut trajectory);
        travel_time += world.clock() - clock;
        match drive {
            Drive::Arrived => current = chosen,
            Drive::Unreachable => {
                termination = Termination::TimedOut;
                break;
            }
            Drive::Died => {
                termination = Termination::Died;
                break;
            }
        }
    }
    if termination == Termination::Completed && travel_time > time_limit + 1e-9 {
        termination = Termination::TimedOut;
    }
    let outcome = if termination == Termination::Completed && world.alive() {
        Outcome::Success
    } else {
        Outcome::Fail
    };
    let reached_goal = touches_goal(world.map(), &trajectory, ctl.eps_wp());
    let total = world.interactions() - before;
    Ok(MissionReport {
        algorithm: Algorithm::Navigate,
        map_id: demo.map_id.clone(),
        outcome: mission_outcome(outcome, reached_goal),
        termination,
        reached_goal,
        waypoints,
        agent_trajectory: trajectory,
        demo_trajectory: demo.positions.clone(),
        interactions_inference: search_interactions,
        interactions_tracking: total - search_interactions,
        interactions_total: total,
        tracking_time: travel_time,
        unreachable,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Uninformed search: teleport to and look at every traversable cell center
/// in serpentine row order until standing on the goal tile.
pub fn run_baseline_sweep(
    world: &mut WorldState,
    max_interactions: u64,
) -> Result<MissionReport, AgentError> {
    let started = Instant::now();
    let before = world.interactions();
    world.restart();
    let (w, h) = (world.map().width(), world.map().height());
    let mut visited = Vec::new();
    let mut found = world.on_goal();
    'rows: for y in 0..h {
        let xs: Vec<usize> = if y % 2 == 0 {
            (0..w).collect()
        } else {
            (0..w).rev().collect()
        };
        for x in xs {
            if found {
                break 'rows;
            }
            let cell = Position::new(x as f64 + 0.5, y as f64 + 0.5);
            if !is_traversable(world.map(), cell) {
                continue;
            }
            if world.interactions() - before + 2 > max_interactions {
                return Err(AgentError::BudgetExhausted(max_interactions));
            }
            world
                .teleport(cell)
                .expect("traversability was checked before teleporting");
            world.render(false);
            visited.push(cell);
            found = world.on_goal();
        }
    }
    let total = world.interactions() - before;
    let outcome = if found { Outcome::Success } else { Outcome::Fail };
    Ok(MissionReport {
        algorithm: Algorithm::Baseline,
        map_id: String::new(),
        outcome,
        termination: if found {
            Termination::Completed
        } else {
            Termination::TimedOut
        },
        reached_goal: found,
        waypoints: Vec::new(),
        agent_trajectory: visited,
        demo_trajectory: Vec::new(),
        interactions_inference: total,
        interactions_tracking: 0,
        interactions_total: total,
        tracking_time: 0.0,
        unreachable: Vec::new(),
        wall_time: started.elapsed().as_secs_f64(),
    })
}

const SVG_SCALE: f64 = 20.0;

fn polyline(points: &[Position], style: &str) -> String {
    let mut pts = String::new();
    for (k, p) in points.iter().enumerate() {
        if k > 0 {
            pts.push(' ');
        }
        let _ = write!(pts, "{:.2},{:.2}", p.x * SVG_SCALE, p.y * SVG_SCALE);
    }
    format!("  <polyline points=\"{pts}\" fill=\"none\" {style}/>\n")
}

/// Top-view overlay: demonstrator in blue dashes, agent in solid red.
pub fn trajectory_svg(map: &TileMap, report: &MissionReport) -> String {
    let (w, h) = (map.width() as f64 * SVG_SCALE, map.height() as f64 * SVG_SCALE);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    for ((x, y), tile) in map.cells() {
        let fill = match tile {
            TileKind::Floor(_) => continue,
            TileKind::Wall(crate::world::REPETITIVE) => "#9a7fb8",
            TileKind::Wall(_) => "#444444",
            TileKind::Lava => "#e4572e",
            TileKind::Web => "#cccccc",
            TileKind::Goal => "#3bb273",
        };
        let _ = writeln!(
            out,
            "  <rect x=\"{}\" y=\"{}\" width=\"{SVG_SCALE}\" height=\"{SVG_SCALE}\" fill=\"{fill}\"/>",
            x as f64 * SVG_SCALE,
            y as f64 * SVG_SCALE
        );
    }
    out.push_str(&polyline(
        &report.demo_trajectory,
        "stroke=\"#1f4fd1\" stroke-width=\"2\" stroke-dasharray=\"6,4\"",
    ));
    out.push_str(&polyline(&report.agent_trajectory, "stroke=\"#d11f1f\" stroke-width=\"2\""));
    for r in &report.waypoints {
        let _ = writeln!(
            out,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#d11f1f\"/>",
            r.x * SVG_SCALE,
            r.y * SVG_SCALE
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{run_demonstrator, DemoConfig};

    fn corridor() -> TileMap {
        TileMap::parse(
            "15 5 4 0.1 11\n###############\n#.............#\n#S........G...#\n#.............#\n###############\nwp 10.5 2.5\n",
        )
        .unwrap()
    }

    fn noiseless_demo(map: &TileMap) -> Demonstration {
        let cfg = DemoConfig {
            noise: false,
            ..DemoConfig::default()
        };
        run_demonstrator(&mut WorldState::new(map.clone()), map.path(), &cfg, "corridor").unwrap()
    }

    #[test]
    fn single_frame_demo_gives_no_waypoints() {
        let map = corridor();
        let mut world = WorldState::new(map);
        let demo = run_demonstrator(&mut world, &[], &DemoConfig::default(), "x").unwrap();
        assert_eq!(demo.len_l(), 0);
        let wps = infer_waypoints(&mut world, &demo, &SearchSpec::default(), &Kernel::default()).unwrap();
        assert!(wps.is_empty());
    }

    #[test]
    fn corridor_waypoints_land_on_nearest_lattice_points() {
        let map = corridor();
        let demo = noiseless_demo(&map);
        let spec = SearchSpec {
            noise: false,
            ..SearchSpec::default()
        };
        let mut world = WorldState::new(map);
        let wps = infer_waypoints(&mut world, &demo, &spec, &Kernel::default()).unwrap();
        let worst = waypoint_errors(&wps, &demo.positions).into_iter().fold(0.0, f64::max);
        assert!(worst <= spec.step / 2f64.sqrt() + 1e-9, "worst {worst}");
    }

    #[test]
    fn algorithm2_counts_and_succeeds_on_corridor() {
        let map = corridor();
        let demo = noiseless_demo(&map);
        let mut world = WorldState::new(map);
        let spec = SearchSpec::default();
        let r = run_mission_algorithm2(&mut world, &demo, &spec, &Kernel::default(), &PController::default(), 15.0)
            .unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.interactions_total, r.interactions_inference + r.interactions_tracking);
        let l = demo.len_l() as u64;
        let per_window = spec.candidate_count() as u64 * (spec.n_avg as u64 + 1);
        assert!(r.interactions_inference <= l * per_window);
        assert_eq!(r.interactions_tracking, r.agent_trajectory.len() as u64 - 1);
    }

    #[test]
    fn algorithm1_matches_algorithm2_and_costs_more() {
        let map = corridor();
        let demo = noiseless_demo(&map);
        let spec = SearchSpec {
            noise: false,
            ..SearchSpec::default()
        };
        let kern = Kernel::default();
        let ctl = PController::default();
        let two = run_mission_algorithm2(&mut WorldState::new(map.clone()), &demo, &spec, &kern, &ctl, 15.0).unwrap();
        let one = run_mission_algorithm1(&mut WorldState::new(map), &demo, &spec, &kern, &ctl, 15.0).unwrap();
        assert_eq!(one.waypoints, two.waypoints);
        assert_eq!(one.outcome, Outcome::Success);
        assert!(one.interactions_total >= two.interactions_total);
    }

    #[test]
    fn baseline_sweep_counts() {
        // goal in the far corner of the sweep
        let map = TileMap::parse("7 7 4 0.1 0\n#######\n#S....#\n#.....#\n#.....#\n#.....#\n#G....#\n#######\n").unwrap();
        let mut world = WorldState::new(map);
        let r = run_baseline_sweep(&mut world, 10_000).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert_eq!(r.agent_trajectory.len(), 25);
        assert_eq!(r.interactions_total, 50);
        assert!(matches!(
            run_baseline_sweep(&mut world, 20),
            Err(AgentError::BudgetExhausted(20))
        ));
    }

    #[test]
    fn baseline_stops_at_first_goal_visit() {
        // row 1 is swept right to left, so the goal is the first cell looked at
        let map = TileMap::parse("7 4 4 0.1 0\n#######\n#S...G#\n#.....#\n#######\n").unwrap();
        let r = run_baseline_sweep(&mut WorldState::new(map), 100).unwrap();
        assert_eq!(r.interactions_total, 2);
    }

    #[test]
    fn goal_touch_uses_distance_to_tile() {
        let map = corridor();
        // goal tile spans x in [10, 11], y in [2, 3]
        assert!(touches_goal(&map, &[Position::new(9.75, 2.5)], 0.3));
        assert!(!touches_goal(&map, &[Position::new(9.6, 2.5)], 0.3));
        assert!(touches_goal(&map, &[Position::new(11.2, 3.2)], 0.3));
        assert!(!touches_goal(&map, &[], 0.3));
    }

    #[test]
    fn report_json_is_stable() {
        let map = corridor();
        let demo = noiseless_demo(&map);
        let run = || {
            run_mission_algorithm2(
                &mut WorldState::new(map.clone()),
                &demo,
                &SearchSpec::default(),
                &Kernel::default(),
                &PController::default(),
                15.0,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.to_json(), b.to_json());
        assert!(!a.to_json().contains("wall_time"));
        let svg = trajectory_svg(&map, &a);
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg, trajectory_svg(&map, &b));
        let back: MissionReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back.waypoints, a.waypoints);
    }
}
