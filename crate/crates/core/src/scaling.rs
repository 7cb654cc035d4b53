//! Interaction cost of the video agent against an exhaustive sweep as the
//! demonstration grows.

use serde::{Deserialize, Serialize};

use crate::agent::{run_baseline_sweep, run_mission_algorithm2, AgentError};
use crate::control::PController;
use crate::demo::{run_demonstrator, DemoConfig, DemoError};
use crate::optimize::SearchSpec;
use crate::vision::Kernel;
use crate::world::{MapError, MapParams, Position, TileMap, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum ScalingError {
    #[error("no square map yields a demonstration of length {0}")]
    NoMapForLength(usize),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Open square room with the spawn in the top-left corner and the goal at
/// `(gx, gy)`; the side is chosen so the goal sits one tile off the far walls.
pub fn square_map(gx: usize, gy: usize, params: MapParams) -> Result<TileMap, MapError> {
    let side = gx.max(gy) + 2;
    let mut rows = Vec::with_capacity(side);
    for y in 0..side {
        let row: String = (0..side)
            .map(|x| {
                if x == 0 || y == 0 || x == side - 1 || y == side - 1 {
                    '#'
                } else if (x, y) == (1, 1) {
                    'S'
                } else if (x, y) == (gx, gy) {
                    'G'
                } else {
                    '.'
                }
            })
            .collect();
        rows.push(row);
    }
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let mut map = TileMap::from_grid(&refs, params)?;
    map.set_path(vec![Position::new(gx as f64 + 0.5, gy as f64 + 0.5)]);
    Ok(map)
}

/// Smallest square map whose straight-line demonstration has exactly
/// `target_l` hops.
pub fn map_for_length(target_l: usize, params: MapParams, demo: &DemoConfig) -> Result<TileMap, ScalingError> {
    let mut g = 2;
    loop {
        for (gx, gy) in [(g, g - 1), (g, g)] {
            let map = square_map(gx, gy, params)?;
            let d = run_demonstrator(&mut WorldState::new(map.clone()), map.path(), demo, "scaling")?;
            match d.len_l().cmp(&target_l) {
                std::cmp::Ordering::Equal => return Ok(map),
                std::cmp::Ordering::Greater => return Err(ScalingError::NoMapForLength(target_l)),
                std::cmp::Ordering::Less => {}
            }
        }
        g += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub l: usize,
    pub side: usize,
    pub agent_interactions: u64,
    pub baseline_interactions: u64,
}

impl ScalingRow {
    pub fn ratio(&self) -> f64 {
        self.baseline_interactions as f64 / self.agent_interactions as f64
    }
}

/// Settings shared by every size in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSetup {
    pub params: MapParams,
    pub demo: DemoConfig,
    pub spec: SearchSpec,
    pub kernel: Kernel,
    pub ctl: PController,
    pub time_limit: f64,
}

pub fn scaling_row(l: usize, setup: &ScalingSetup) -> Result<ScalingRow, ScalingError> {
    let map = map_for_length(l, setup.params, &setup.demo)?;
    let demo = run_demonstrator(&mut WorldState::new(map.clone()), map.path(), &setup.demo, "scaling")?;
    let agent = run_mission_algorithm2(
        &mut WorldState::new(map.clone()),
        &demo,
        &setup.spec,
        &setup.kernel,
        &setup.ctl,
        setup.time_limit,
    )?;
    let side = map.width();
    let budget = 4 * (side * side) as u64;
    let baseline = run_baseline_sweep(&mut WorldState::new(map), budget)?;
    Ok(ScalingRow {
        l,
        side,
        agent_interactions: agent.interactions_total,
        baseline_interactions: baseline.interactions_total,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
