//! Local search over candidate positions.
//!
//! [`GridSearch`] evaluates every point of the square lattice
//! `center + (i·h, j·h)` with `|i·h|, |j·h| ≤ R` and keeps the minimum. Ties
//! go to the lexicographically smallest `(x, y)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vision::{average, dist, Frame, Kernel, VisionError};
use crate::world::{Position, WorldError, WorldState};

pub const DEFAULT_RADIUS: f64 = 2.0;
pub const DEFAULT_STEP: f64 = 0.5;
pub const DEFAULT_N_AVG: usize = 3;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("candidate is not traversable")]
    Untraversable,
    #[error(transparent)]
    World(WorldError),
    #[error(transparent)]
    Vision(#[from] VisionError),
}

impl From<WorldError> for ObjectiveError {
    fn from(e: WorldError) -> Self {
        match e {
            WorldError::Untraversable { .. } => ObjectiveError::Untraversable,
            other => ObjectiveError::World(other),
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no traversable candidate around {0}")]
    NoFeasibleCandidate(Position),
    #[error("invalid search spec: {0}")]
    InvalidSpec(String),
    #[error("objective failed: {0}")]
    Objective(#[source] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    /// Half-width of the search window, in tiles.
    pub radius: f64,
    /// Lattice spacing, in tiles.
    pub step: f64,
    /// Frames averaged per candidate.
    pub n_avg: usize,
    /// Whether candidate renders carry observation noise.
    pub noise: bool,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            step: DEFAULT_STEP,
            n_avg: DEFAULT_N_AVG,
            noise: true,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.step > 0.0 && self.step <= self.radius && self.radius.is_finite()) {
            return Err(SearchError::InvalidSpec(format!(
                "need 0 < step <= radius, got step {} radius {}",
                self.step, self.radius
            )));
        }
        if self.n_avg == 0 {
            return Err(SearchError::InvalidSpec("n_avg must be at least 1".into()));
        }
        Ok(())
    }

    /// Lattice steps from the center to the window edge.
    pub fn half_count(&self) -> i64 {
        (self.radius / self.step + 1e-9).floor() as i64
    }

    /// Number of candidates per window, traversable or not.
    pub fn candidate_count(&self) -> usize {
        let side = 2 * self.half_count() as usize + 1;
        side * side
    }

    /// Window candidates in lexicographic `(x, y)` order.
    pub fn candidates(&self, center: Position) -> Vec<Position> {
        let n = self.half_count();
        let mut out = Vec::with_capacity(self.candidate_count());
        for i in -n..=n {
            for j in -n..=n {
                out.push(center.offset(i as f64 * self.step, j as f64 * self.step));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub best: Position,
    pub value: f64,
    /// Number of successful objective evaluations.
    pub evals: usize,
}

/// A local minimizer around a center point. Objectives report infeasible
/// candidates with [`ObjectiveError::Untraversable`]; those are skipped.
pub trait LocalOptimizer {
    fn minimize(
        &self,
        center: Position,
        objective: &mut dyn FnMut(Position) -> Result<f64, ObjectiveError>,
    ) -> Result<SearchOutcome, SearchError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridSearch {
    pub spec: SearchSpec,
}

impl GridSearch {
    pub fn new(spec: SearchSpec) -> Result<Self, SearchError> {
        spec.validate()?;
        Ok(Self { spec })
    }
}

impl LocalOptimizer for GridSearch {
    fn minimize(
        &self,
        center: Position,
        objective: &mut dyn FnMut(Position) -> Result<f64, ObjectiveError>,
    ) -> Result<SearchOutcome, SearchError> {
        grid_search(center, &self.spec, objective)
    }
}

/// Exhaustive search of the window around `center`.
pub fn grid_search(
    center: Position,
    spec: &SearchSpec,
    objective: &mut dyn FnMut(Position) -> Result<f64, ObjectiveError>,
) -> Result<SearchOutcome, SearchError> {
    spec.validate()?;
    let mut best: Option<(Position, f64)> = None;
    let mut evals = 0;
    // candidates come in lexicographic order, so a strict comparison keeps
    // the smallest position among equal values
    for cand in spec.candidates(center) {
        let value = match objective(cand) {
            Ok(v) => v,
            Err(ObjectiveError::Untraversable) => continue,
            Err(e) => return Err(SearchError::Objective(e)),
        };
        evals += 1;
        let better = match best {
            None => true,
            Some((_, b)) => value < b || (b.is_nan() && !value.is_nan()),
        };
        if better {
            best = Some((cand, value));
        }
    }
    let (best, value) = best.ok_or(SearchError::NoFeasibleCandidate(center))?;
    Ok(SearchOutcome { best, value, evals })
}

/// Image-matching objective: teleport to the candidate, render `n_avg`
/// frames, average them and measure the distance to `target`.
pub fn image_objective<'a>(
    world: &'a mut WorldState,
    spec: &'a SearchSpec,
    target: &'a Frame,
    kernel: &'a Kernel,
) -> impl FnMut(Position) -> Result<f64, ObjectiveError> + 'a {
    move |cand| {
        world.teleport(cand)?;
        let frames: Vec<Frame> = (0..spec.n_avg).map(|_| world.render(spec.noise)).collect();
        Ok(dist(target, &average(&frames)?, kernel)?)
    }
}
