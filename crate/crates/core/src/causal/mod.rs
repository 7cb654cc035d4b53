//! Transfer of a learned mechanism between cars with different engines.
//!
//! Two source cars drive overlapping stretches of a bumpy road. Their logged
//! controls and positions are pooled to learn the road force `f_G(y)`; the
//! learned mechanism is then reused to predict and control a third car that
//! never drove.

pub mod description;
pub mod model;
pub mod sim;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use description::{build_diagram, Dag, Description, MechanismDecl, MechanismForm, DEFAULT_DESCRIPTION};
pub use model::{
    do_intervene, infer_g, predict_accel, transfer_control, BinRow, CausalModel, Prediction, TransferRun,
    DEFAULT_BIN_WIDTH,
};
pub use sim::{simulate_car, CarState, Experience, ExperienceLog, GProfile, HardwareSpec};

/// Controls at which the learned model is queried for the target car.
pub const QUERY_CONTROLS: [f64; 5] = [-0.1, -0.05, 0.0, 0.05, 0.1];

#[derive(Debug, Error)]
pub enum CausalError {
    #[error("description line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("variable `{0}` is the output of more than one mechanism")]
    DuplicateOutput(String),
    #[error("description implies a cycle through {0:?}")]
    CyclicDescription(Vec<String>),
    #[error("`{var}` is declared independent of `{other}` but takes it as an input")]
    ContradictoryIndependence { var: String, other: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("experience log has {0} records, need at least 3")]
    LogTooShort(usize),
    #[error("description does not fit the car model: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CausalConfig {
    pub dt: f64,
    pub bin_width: f64,
    /// Engine scales of the cars that drive and are logged.
    pub source_hp: Vec<f64>,
    /// Engine scale of the car that only receives the learned mechanism.
    pub target_hp: f64,
    pub profile: GProfile,
    /// Seconds driven by each car.
    pub duration: f64,
    /// Stretch of road shared out among the source cars.
    pub source_range: [f64; 2],
    /// Stretch of road the target car must follow.
    pub target_range: [f64; 2],
    /// Position feedback gain of the transfer controller.
    pub k_fb: f64,
}

impl Default for CausalConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            bin_width: DEFAULT_BIN_WIDTH,
            source_hp: vec![60.0, 120.0],
            target_hp: 90.0,
            profile: GProfile::Bumpy,
            duration: 20.0,
            source_range: [0.5, 20.5],
            target_range: [1.0, 19.0],
            k_fb: 0.05,
        }
    }
}

impl CausalConfig {
    pub fn validate(&self) -> Result<(), CausalError> {
        let positive = [
            ("dt", self.dt),
            ("bin_width", self.bin_width),
            ("target_hp", self.target_hp),
            ("duration", self.duration),
            ("k_fb", self.k_fb),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CausalError::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if self.source_hp.is_empty() {
            return Err(CausalError::InvalidParam("at least one source car is needed".into()));
        }
        for &hp in &self.source_hp {
            HardwareSpec::new(hp)?;
        }
        for (name, [lo, hi]) in [("source_range", self.source_range), ("target_range", self.target_range)] {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(CausalError::InvalidParam(format!("{name} must be increasing")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// The stretch of road driven by source car `i`: equal-length,
    /// overlapping segments that together span `source_range`.
    pub fn source_route(&self, i: usize) -> (f64, f64) {
        let n = self.source_hp.len();
        let [lo, hi] = self.source_range;
        let width = hi - lo;
        if n == 1 {
            return (lo, hi);
        }
        let seg = width.min(1.4 * width / n as f64);
        let start = lo + i as f64 * (width - seg) / (n - 1) as f64;
        (start, start + seg)
    }
}

/// Smooth rest-to-rest move from `a` to `b` over `duration`:
/// returns `(y, v, a)` at time `t`.
pub fn cosine_ramp(a: f64, b: f64, duration: f64, t: f64) -> (f64, f64, f64) {
    let half = (b - a) / 2.0;
    let w = PI / duration;
    let t = t.clamp(0.0, duration);
    (
        a + half * (1.0 - (w * t).cos()),
        half * w * (w * t).sin(),
        half * w * w * (w * t).cos(),
    )
}

/// Logs of the source cars, each following its route with a PD driver that
/// knows nothing about the road.
pub fn drive_sources(cfg: &CausalConfig, mass: f64) -> Vec<(HardwareSpec, ExperienceLog)> {
    let g = |y: f64| cfg.profile.eval(y);
    cfg.source_hp
        .iter()
        .enumerate()
        .map(|(i, &hp)| {
            let spec = HardwareSpec { hp };
            let (a, b) = cfg.source_route(i);
            let mut prev = a;
            let mut policy = |t: f64, y: f64| {
                let (yr, vr, ar) = cosine_ramp(a, b, cfg.duration, t);
                let v_est = (y - prev) / cfg.dt;
                prev = y;
                (mass * ar + 16.0 * (yr - y) + 8.0 * (vr - v_est)) / hp
            };
            let log = simulate_car(spec, mass, &g, &mut policy, CarState { y: a, v: 0.0 }, cfg.steps(), cfg.dt);
            (spec, log)
        })
        .collect()
}

fn rel_l2(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (est, truth) in pairs {
        num += (est - truth).powi(2);
        den += truth * truth;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Relative L2 distance between the learned table and the true profile at
/// bin centers.
pub fn recovery_error(model: &CausalModel, profile: GProfile) -> f64 {
    rel_l2(model.rows().into_iter().map(|r| (r.mean, profile.eval((r.y_lo + r.y_hi) / 2.0))))
}

/// Largest pairwise relative L2 difference between per-car tables on the
/// bins they share, with the shared bin count of the worst pair.
pub fn per_car_agreement(models: &[CausalModel]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            let pairs: Vec<(f64, f64)> = a
                .table()
                .iter()
                .filter_map(|(bin, ea)| b.table().get(bin).map(|eb| (ea.mean, eb.mean)))
                .collect();
            let d = rel_l2(pairs.iter().copied());
            if d >= worst.0 {
                worst = (d, pairs.len());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalReport {
    pub config: CausalConfig,
    pub diagram_edges: Vec<(String, String)>,
    pub covered_bins: usize,
    /// Relative L2 error of the pooled road-force table.
    pub recovery_rel_l2: f64,
    /// Worst relative L2 disagreement between single-car tables.
    pub per_car_rel_l2: f64,
    pub per_car_shared_bins: usize,
    /// Relative L2 error of target accelerations predicted under `do(u)`
    /// for the controls in [`QUERY_CONTROLS`] at source-visited positions.
    pub prediction_rel_l2: f64,
    /// Same, for each source control replayed where it was applied.
    pub replay_rel_l2: f64,
    pub prediction_queries: usize,
    /// Queries answered `Uncovered`, including target route steps outside
    /// the visited stretch.
    pub uncovered_queries: usize,
    pub rms_transfer: f64,
    pub rms_naive: f64,
    pub rms_ratio: f64,
    pub bins: Vec<BinRow>,
}

/// Everything produced by one experiment run.
#[derive(Debug, Clone)]
pub struct CausalExperiment {
    pub report: CausalReport,
    pub source_logs: Vec<(HardwareSpec, ExperienceLog)>,
    pub target_log: ExperienceLog,
    pub naive_log: ExperienceLog,
}

/// Learns `f_G` from the source cars, then predicts and controls the
/// target car with and without the learned mechanism.
pub fn run_experiment(description: &Description, cfg: &CausalConfig) -> Result<CausalExperiment, CausalError> {
    cfg.validate()?;
    let prior = CausalModel::new(description.clone(), cfg.bin_width)?;
    let mass = prior.mass();
    let g = |y: f64| cfg.profile.eval(y);
    let sources = drive_sources(cfg, mass);
    let pooled_input: Vec<(HardwareSpec, &ExperienceLog)> = sources.iter().map(|(s, l)| (*s, l)).collect();
    let learned = infer_g(&prior, &pooled_input)?;
    let singles = pooled_input
        .iter()
        .map(|entry| infer_g(&prior, std::slice::from_ref(entry)))
        .collect::<Result<Vec<_>, _>>()?;
    let (per_car_rel_l2, per_car_shared_bins) = per_car_agreement(&singles);

    let target = HardwareSpec::new(cfg.target_hp)?;
    let roles = learned.roles().clone();
    let for_target = do_intervene(&learned, &[(roles.hp.as_str(), target.hp)])?;
    let naive = do_intervene(&for_target, &[(roles.road.as_str(), 0.0)])?;
    let [lo, hi] = cfg.target_range;
    let reference = |t: f64| {
        let (y, _, a) = cosine_ramp(lo, hi, cfg.duration, t);
        (y, a)
    };
    let start = CarState { y: lo, v: 0.0 };
    let steps = cfg.steps();
    let transfer = transfer_control(&for_target, target, &reference, cfg.k_fb, &g, start, steps, cfg.dt);
    let plain = transfer_control(&naive, target, &reference, cfg.k_fb, &g, start, steps, cfg.dt);

    // interventional queries do(u) on a control grid at every position a
    // source car visited, plus a counterfactual replay of the source controls
    let mut pairs = Vec::new();
    let mut replay = Vec::new();
    let mut uncovered_queries = 0;
    for (_, log) in &sources {
        for r in &log.records {
            let mut query = |u: f64, sink: &mut Vec<(f64, f64)>| {
                let truth = (target.hp * u + g(r.y)) / mass;
                match predict_accel(&for_target, u, r.y, target) {
                    Prediction::Accel(a) => sink.push((a, truth)),
                    Prediction::Uncovered => uncovered_queries += 1,
                }
            };
            for u in QUERY_CONTROLS {
                query(u, &mut pairs);
            }
            query(r.u, &mut replay);
        }
    }
    // the target's own route may leave the visited stretch
    uncovered_queries += transfer.uncovered_steps;

    let report = CausalReport {
        config: cfg.clone(),
        diagram_edges: learned.diagram().edges().iter().cloned().collect(),
        covered_bins: learned.table().len(),
        recovery_rel_l2: recovery_error(&learned, cfg.profile),
        per_car_rel_l2,
        per_car_shared_bins,
        prediction_rel_l2: rel_l2(pairs.iter().copied()),
        replay_rel_l2: rel_l2(replay.iter().copied()),
        prediction_queries: pairs.len(),
        uncovered_queries,
        rms_transfer: transfer.rms,
        rms_naive: plain.rms,
        rms_ratio: if plain.rms > 0.0 { transfer.rms / plain.rms } else { 0.0 },
        bins: learned.rows(),
    };
    Ok(CausalExperiment {
        report,
        source_logs: sources,
        target_log: transfer.log,
        naive_log: plain.log,
    })
}
