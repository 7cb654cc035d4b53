//! Causal model of the car: known engine and Newton mechanisms plus a
//! learned, position-binned road force.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::description::{build_diagram, Dag, Description, MechanismForm};
use super::sim::{second_differences, simulate_car, CarState, ExperienceLog, HardwareSpec};
use super::CausalError;

pub const DEFAULT_BIN_WIDTH: f64 = 0.25;

/// Which declared variable plays which role in the car model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub control: String,
    pub hp: String,
    pub force: String,
    pub road: String,
    pub position: String,
    pub accel: String,
}

impl Roles {
    fn from_description(d: &Description) -> Result<Self, CausalError> {
        let find_known = |id: &str| {
            d.mechanisms
                .iter()
                .find(|m| m.form == MechanismForm::Known(id.to_string()))
                .ok_or_else(|| CausalError::Unsupported(format!("no mechanism declared as `known {id}`")))
        };
        let engine = find_known("f_F")?;
        let newton = find_known("newton")?;
        let [control, hp] = engine.inputs.as_slice() else {
            return Err(CausalError::Unsupported("f_F takes exactly (control, hp)".into()));
        };
        let [force, road] = newton.inputs.as_slice() else {
            return Err(CausalError::Unsupported("newton takes exactly (engine force, road force)".into()));
        };
        if *force != engine.output {
            return Err(CausalError::Unsupported("newton's first input must be the f_F output".into()));
        }
        let learned = d
            .mechanisms
            .iter()
            .find(|m| m.output == *road && m.form == MechanismForm::Unknown)
            .ok_or_else(|| CausalError::Unsupported(format!("`{road}` must be an unknown mechanism")))?;
        let [position] = learned.inputs.as_slice() else {
            return Err(CausalError::Unsupported(format!("`{road}` must depend on position only")));
        };
        Ok(Self {
            control: control.clone(),
            hp: hp.clone(),
            force: force.clone(),
            road: road.clone(),
            position: position.clone(),
            accel: newton.output.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEstimate {
    pub mean: f64,
    pub count: usize,
}

/// A row of the learned road-force table, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin: i64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub mean: f64,
    pub count: usize,
}

/// Result of a prediction query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Accel(f64),
    /// The position lies in a bin no car has visited.
    Uncovered,
}

impl Prediction {
    pub fn value(self) -> Option<f64> {
        match self {
            Prediction::Accel(a) => Some(a),
            Prediction::Uncovered => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalModel {
    description: Description,
    diagram: Dag,
    roles: Roles,
    mass: f64,
    bin_width: f64,
    table: BTreeMap<i64, BinEstimate>,
    fixed: BTreeMap<String, f64>,
}

impl CausalModel {
    pub fn new(description: Description, bin_width: f64) -> Result<Self, CausalError> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(CausalError::InvalidParam(format!("bin width must be positive, got {bin_width}")));
        }
        let diagram = build_diagram(&description)?;
        let roles = Roles::from_description(&description)?;
        let mass = description.constants.get("m").copied().unwrap_or(1.0);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(CausalError::InvalidParam(format!("mass must be positive, got {mass}")));
        }
        Ok(Self {
            description,
            diagram,
            roles,
            mass,
            bin_width,
            table: BTreeMap::new(),
            fixed: BTreeMap::new(),
        })
    }

    pub fn description(&self) -> &Description {
        &self.description
    }

    pub fn diagram(&self) -> &Dag {
        &self.diagram
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Values pinned by interventions.
    pub fn fixed(&self) -> &BTreeMap<String, f64> {
        &self.fixed
    }

    pub fn bin_of(&self, y: f64) -> i64 {
        (y / self.bin_width).floor() as i64
    }

    pub fn table(&self) -> &BTreeMap<i64, BinEstimate> {
        &self.table
    }

    pub fn rows(&self) -> Vec<BinRow> {
        self.table
            .iter()
            .map(|(&bin, e)| BinRow {
                bin,
                y_lo: bin as f64 * self.bin_width,
                y_hi: (bin + 1) as f64 * self.bin_width,
                mean: e.mean,
                count: e.count,
            })
            .collect()
    }

    fn engine_force(&self, u: f64, hp: f64) -> f64 {
        hp * u
    }

    /// Learned (or intervened) road force at position `y`.
    pub fn road_force(&self, y: f64) -> Option<f64> {
        if let Some(&g) = self.fixed.get(&self.roles.road) {
            return Some(g);
        }
        let y = self.fixed.get(&self.roles.position).copied().unwrap_or(y);
        self.table.get(&self.bin_of(y)).map(|e| e.mean)
    }
}

/// Pools `m·ÿ − f_F(u, hp)` samples from every log into position bins and
/// replaces the model's road-force table with the per-bin means.
pub fn infer_g(
    model: &CausalModel,
    logs: &[(HardwareSpec, &ExperienceLog)],
) -> Result<CausalModel, CausalError> {
    let mut samples: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (spec, log) in logs {
        if log.len() < 3 {
            return Err(CausalError::LogTooShort(log.len()));
        }
        for (rec, accel) in second_differences(log) {
            let g = model.mass * accel - model.engine_force(rec.u, spec.hp);
            samples.entry(model.bin_of(rec.y)).or_default().push(g);
        }
    }
    let table = samples
        .into_iter()
        .map(|(bin, mut xs)| {
            // a fixed summation order makes the mean independent of log order
            xs.sort_by(f64::total_cmp);
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            (bin, BinEstimate { mean, count: xs.len() })
        })
        .collect();
    Ok(CausalModel {
        table,
        ..model.clone()
    })
}

/// Post-interventional acceleration for a car with hardware `spec` applying
/// control `u` at position `y`. Never extrapolates beyond visited bins.
pub fn predict_accel(model: &CausalModel, u: f64, y: f64, spec: HardwareSpec) -> Prediction {
    let r = &model.roles;
    if let Some(&a) = model.fixed.get(&r.accel) {
        return Prediction::Accel(a);
    }
    let Some(g) = model.road_force(y) else {
        return Prediction::Uncovered;
    };
    let u = model.fixed.get(&r.control).copied().unwrap_or(u);
    let hp = model.fixed.get(&r.hp).copied().unwrap_or(spec.hp);
    let f = model
        .fixed
        .get(&r.force)
        .copied()
        .unwrap_or_else(|| model.engine_force(u, hp));
    Prediction::Accel((f + g) / model.mass)
}

/// `do(X = x, ...)`: cuts the edges into every assigned variable and pins its
/// value.
pub fn do_intervene(model: &CausalModel, assignments: &[(&str, f64)]) -> Result<CausalModel, CausalError> {
    let mut out = model.clone();
    for &(var, value) in assignments {
        if !out.diagram.contains(var) {
            return Err(CausalError::UnknownVariable(var.to_string()));
        }
        out.diagram.cut_incoming(var);
        out.fixed.insert(var.to_string(), value);
    }
    Ok(out)
}

/// Outcome of a reference-tracking run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRun {
    pub log: ExperienceLog,
    pub y_ref: Vec<f64>,
    /// Root-mean-square of `y_ref − y` over all logged steps.
    pub rms: f64,
    /// Steps on which the road force was unknown, so only feedback acted.
    pub uncovered_steps: usize,
}

/// Tracks `reference(t) = (y_ref, a_ref)` on the true plant with
/// `u = clamp((m·a_ref − f̂_G(y))/hp + k_fb·(y_ref − y))`; the feedforward
/// part is dropped where `f̂_G` is unknown.
#[allow(clippy::too_many_arguments)]
pub fn transfer_control(
    model: &CausalModel,
    spec: HardwareSpec,
    reference: &dyn Fn(f64) -> (f64, f64),
    k_fb: f64,
    g_true: &dyn Fn(f64) -> f64,
    start: CarState,
    steps: usize,
    dt: f64,
) -> TransferRun {
    let mut y_ref = Vec::with_capacity(steps);
    let mut uncovered_steps = 0;
    let mut policy = |t: f64, y: f64| {
        let (yr, ar) = reference(t);
        y_ref.push(yr);
        let ff = match model.road_force(y) {
            Some(g) => (model.mass * ar - g) / spec.hp,
            None => {
                uncovered_steps += 1;
                0.0
            }
        };
        ff + k_fb * (yr - y)
    };
    let log = simulate_car(spec, model.mass, g_true, &mut policy, start, steps, dt);
    let sq: f64 = log
        .records
        .iter()
        .zip(&y_ref)
        .map(|(r, yr)| (yr - r.y).powi(2))
        .sum();
    let rms = if log.is_empty() {
        0.0
    } else {
        (sq / log.len() as f64).sqrt()
    };
    TransferRun {
        log,
        y_ref,
        rms,
        uncovered_steps,
    }
}
