//! Noisy multi-sensor readings and scheduled data injections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathkit::RngStream;

/// What a sensor measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    /// Follower speed.
    F,
    /// Spacing.
    D,
    /// Leader speed.
    L,
}

impl SensorKind {
    pub fn letter(self) -> char {
        match self {
            SensorKind::F => 'f',
            SensorKind::D => 'd',
            SensorKind::L => 'l',
        }
    }
}

/// Noise variances of every sensor, grouped by kind. Order is fixed for the
/// run and defines the row order of `H`, `R` and `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorBank {
    pub var_f: Vec<f64>,
    pub var_d: Vec<f64>,
    pub var_l: Vec<f64>,
}

impl Default for SensorBank {
    fn default() -> Self {
        let sq = |s: &[f64]| s.iter().map(|x| x * x).collect::<Vec<_>>();
        Self {
            var_f: sq(&[0.10, 0.15, 0.20, 0.25]),
            var_d: sq(&[0.20, 0.30, 0.40, 0.50]),
            var_l: sq(&[0.15, 0.25, 0.35, 0.45]),
        }
    }
}

impl SensorBank {
    pub fn n_f(&self) -> usize {
        self.var_f.len()
    }

    pub fn n_d(&self) -> usize {
        self.var_d.len()
    }

    pub fn n_l(&self) -> usize {
        self.var_l.len()
    }

    /// Number of sensors with a-priori dynamics (F then D).
    pub fn n_prior(&self) -> usize {
        self.n_f() + self.n_d()
    }

    pub fn variances(&self, kind: SensorKind) -> &[f64] {
        match kind {
            SensorKind::F => &self.var_f,
            SensorKind::D => &self.var_d,
            SensorKind::L => &self.var_l,
        }
    }

    /// Stacked F then D variances, the diagonal of `R`.
    pub fn prior_variances(&self) -> Vec<f64> {
        self.var_f.iter().chain(&self.var_d).copied().collect()
    }

    /// Kind of stacked prior-sensor index `i`.
    pub fn prior_kind(&self, i: usize) -> SensorKind {
        if i < self.n_f() {
            SensorKind::F
        } else {
            SensorKind::D
        }
    }

    /// Same bank with every variance multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * k).collect();
        Self {
            var_f: s(&self.var_f),
            var_d: s(&self.var_d),
            var_l: s(&self.var_l),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for kind in [SensorKind::F, SensorKind::D, SensorKind::L] {
            let v = self.variances(kind);
            if v.is_empty() {
                return Err(Error::config(
                    format!("sensors.{}", kind.letter()),
                    "at least one sensor of each kind is required",
                ));
            }
            if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
                return Err(Error::config(
                    format!("sensors.{}", kind.letter()),
                    format!("variance {bad} must be > 0"),
                ));
            }
        }
        Ok(())
    }
}

/// True values behind a frame, kept for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub v_f: f64,
    pub d: f64,
    pub v_l: f64,
}

/// One time step of (possibly attacked) readings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingFrame {
    pub t: f64,
    pub z_f: Vec<f64>,
    pub z_d: Vec<f64>,
    pub z_l: Vec<f64>,
    pub truth: Truth,
}

impl ReadingFrame {
    /// Stacked F then D readings.
    pub fn prior_readings(&self) -> Vec<f64> {
        self.z_f.iter().chain(&self.z_d).copied().collect()
    }

    fn slot_mut(&mut self, kind: SensorKind, index: usize) -> Option<&mut f64> {
        match kind {
            SensorKind::F => self.z_f.get_mut(index),
            SensorKind::D => self.z_d.get_mut(index),
            SensorKind::L => self.z_l.get_mut(index),
        }
    }
}

/// `z_i = truth_k + e_i` with independent `e_i ~ N(0, σ²_i)`.
///
/// Draw order is F, D, L in bank order, so a fixed stream gives a fixed frame.
pub fn sample_readings(
    t: f64,
    truth: Truth,
    bank: &SensorBank,
    rng: &mut RngStream,
) -> ReadingFrame {
    let mut draw = |value: f64, vars: &[f64]| -> Vec<f64> {
        vars.iter().map(|v| rng.normal(value, *v)).collect()
    };
    let z_f = draw(truth.v_f, &bank.var_f);
    let z_d = draw(truth.d, &bank.var_d);
    let z_l = draw(truth.v_l, &bank.var_l);
    ReadingFrame {
        t,
        z_f,
        z_d,
        z_l,
        truth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    /// Reading plus `magnitude`.
    AdditiveConstant,
    /// Reading times `magnitude`.
    MultiplicativeFactor,
}

/// A single scheduled injection on one sensor, active on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub kind: SensorKind,
    /// Zero-based index within the kind.
    pub index: usize,
    #[serde(rename = "start_s")]
    pub start: f64,
    /// `None` means the injection never ends.
    #[serde(rename = "end_s", default)]
    pub end: Option<f64>,
    pub mode: InjectionMode,
    pub magnitude: f64,
}

impl Injection {
    pub fn end_time(&self) -> f64 {
        self.end.unwrap_or(f64::INFINITY)
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end_time()
    }
}

/// Per-sensor injection schedule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub injections: Vec<Injection>,
}

impl AttackPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.injections.is_empty()
    }

    pub fn validate(&self, bank: &SensorBank) -> Result<()> {
        for (n, inj) in self.injections.iter().enumerate() {
            let field = format!("attack.injections[{n}]");
            let count = bank.variances(inj.kind).len();
            if inj.index >= count {
                return Err(Error::config(
                    field,
                    format!(
                        "sensor {}{} does not exist (bank has {count})",
                        inj.kind.letter(),
                        inj.index
                    ),
                ));
            }
            if !(inj.start < inj.end_time()) {
                return Err(Error::config(field, "start must be before end"));
            }
            if inj.mode == InjectionMode::MultiplicativeFactor && !(inj.magnitude > 0.0) {
                return Err(Error::config(field, "multiplicative factor must be > 0"));
            }
            for other in &self.injections[..n] {
                let same = other.kind == inj.kind && other.index == inj.index;
                if same && other.start < inj.end_time() && inj.start < other.end_time() {
                    return Err(Error::config(
                        field,
                        "overlaps another injection on the same sensor",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Sensors of the given kind under an active injection at `t`.
    pub fn attacked(&self, kind: SensorKind, t: f64) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .injections
            .iter()
            .filter(|i| i.kind == kind && i.is_active(t))
            .map(|i| i.index)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Earliest start time of any injection.
    pub fn first_start(&self) -> Option<f64> {
        self.injections.iter().map(|i| i.start).reduce(f64::min)
    }
}

/// Applies every injection active at `t`. The truth field is untouched.
pub fn apply_attack(frame: &ReadingFrame, plan: &AttackPlan, t: f64) -> ReadingFrame {
    let mut out = frame.clone();
    for inj in plan.injections.iter().filter(|i| i.is_active(t)) {
        if let Some(z) = out.slot_mut(inj.kind, inj.index) {
            match inj.mode {
                InjectionMode::AdditiveConstant => *z += inj.magnitude,
                InjectionMode::MultiplicativeFactor => *z *= inj.magnitude,
            }
        }
    }
    out
}
