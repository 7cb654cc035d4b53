//! One-dimensional car simulator and experience logs.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CausalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    pub hp: f64,
}

impl HardwareSpec {
    pub fn new(hp: f64) -> Result<Self, CausalError> {
        if hp > 0.0 && hp.is_finite() {
            Ok(Self { hp })
        } else {
            Err(CausalError::InvalidParam(format!("hp must be positive, got {hp}")))
        }
    }
}

/// Position-dependent road force profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GProfile {
    /// `−2 + 1.5 sin(0.8 y)`
    Bumpy,
    /// `−2`
    Flat,
    Zero,
}

impl GProfile {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            GProfile::Bumpy => -2.0 + 1.5 * (0.8 * y).sin(),
            GProfile::Flat => -2.0,
            GProfile::Zero => 0.0,
        }
    }
}

impl FromStr for GProfile {
    type Err = CausalError;

    fn from_str(s: &str) -> Result<Self, CausalError> {
        match s {
            "bumpy" => Ok(GProfile::Bumpy),
            "flat" => Ok(GProfile::Flat),
            "zero" => Ok(GProfile::Zero),
            other => Err(CausalError::InvalidParam(format!("unknown g profile `{other}`"))),
        }
    }
}

impl fmt::Display for GProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GProfile::Bumpy => "bumpy",
            GProfile::Flat => "flat",
            GProfile::Zero => "zero",
        })
    }
}

/// One logged time step: the control chosen at position `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub t: u64,
    pub u: f64,
    pub y: f64,
}

/// Controls and positions on a uniform time grid. Forces and accelerations
/// are never logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceLog {
    pub dt: f64,
    pub records: Vec<Experience>,
}

impl ExperienceLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CausalError> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, dt: f64) -> Result<Self, CausalError> {
        let records = csv::Reader::from_reader(r)
            .deserialize()
            .collect::<Result<Vec<Experience>, _>>()?;
        Ok(Self { dt, records })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), CausalError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path, dt: f64) -> Result<Self, CausalError> {
        Self::read_csv(std::fs::File::open(path)?, dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CarState {
    pub y: f64,
    pub v: f64,
}

/// Semi-implicit Euler: `a = (hp·u + g(y))/m`, `v += a·dt`, `y += v·dt`.
/// The policy sees the time and the current position; its output is clamped
/// to `[−1, 1]`. Logs `steps` records.
pub fn simulate_car(
    spec: HardwareSpec,
    mass: f64,
    g_true: &dyn Fn(f64) -> f64,
    policy: &mut dyn FnMut(f64, f64) -> f64,
    start: CarState,
    steps: usize,
    dt: f64,
) -> ExperienceLog {
    assert!(dt > 0.0, "time step must be positive");
    let CarState { mut y, mut v } = start;
    let mut records = Vec::with_capacity(steps);
    for t in 0..steps {
        let u = policy(t as f64 * dt, y).clamp(-1.0, 1.0);
        records.push(Experience { t: t as u64, u, y });
        let a = (spec.hp * u + g_true(y)) / mass;
        v += a * dt;
        y += v * dt;
    }
    ExperienceLog { dt, records }
}

/// Accelerations recovered by central second differences, one per interior
/// record, paired with that record.
pub fn second_differences(log: &ExperienceLog) -> impl Iterator<Item = (&Experience, f64)> {
    let dt2 = log.dt * log.dt;
    log.records
        .windows(3)
        .map(move |w| (&w[1], (w[2].y - 2.0 * w[1].y + w[0].y) / dt2))
}
