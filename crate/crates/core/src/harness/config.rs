//! Scenario files: JSON with the unit in every dimensioned field name.
//!
//! Speeds may be given as `*_mps` or `*_kmh` (never both). Sensor noise is
//! given as standard deviations; sensors are referenced as `f1`, `d2`, `l3`
//! (one-based).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{ControllerKind, Scenario};
use crate::control::{GippsParams, IdmParams};
use crate::dynamics::{kmh_to_ms, LeaderProfile, PlantParams, PlantState};
use crate::error::{Error, Result};
use crate::estimation::FilterConfig;
use crate::fusion_mab::CostScale;
use crate::sensing::{AttackPlan, Injection, InjectionMode, SensorBank, SensorKind};

pub const SEED_ENV: &str = "ACVSIM_SEED";

fn speed(field: &str, mps: Option<f64>, kmh: Option<f64>) -> Result<Option<f64>> {
    match (mps, kmh) {
        (Some(_), Some(_)) => Err(Error::config(
            field,
            "give the speed in m/s or km/h, not both",
        )),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(kmh_to_ms(v))),
        (None, None) => Ok(None),
    }
}

fn required(field: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::config(field, "missing (expected a _mps or _kmh value)"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(rename = "T_s", skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_f_mps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_free_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_free_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_min_mps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_max_mps2: Option<f64>,
    /// Per-step input change limit; absent means unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub du_max_mps2: Option<f64>,
}

impl PlantSection {
    fn resolve(&self) -> Result<PlantParams> {
        let d = PlantParams::default();
        Ok(PlantParams {
            t: self.t_s.unwrap_or(d.t),
            b_f: self.b_f_mps2.unwrap_or(d.b_f),
            v_free: speed("plant.v_free", self.v_free_mps, self.v_free_kmh)?.unwrap_or(d.v_free),
            u_min: self.u_min_mps2.unwrap_or(d.u_min),
            u_max: self.u_max_mps2.unwrap_or(d.u_max),
            du_max: self.du_max_mps2.unwrap_or(d.du_max),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d0_m: Option<f64>,
}

impl InitialSection {
    fn resolve(&self) -> Result<PlantState> {
        Ok(PlantState::new(
            speed("initial.v0", self.v0_mps, self.v0_kmh)?.unwrap_or(kmh_to_ms(90.0)),
            self.d0_m.unwrap_or(100.0),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeaderSection {
    Constant {
        #[serde(skip_serializing_if = "Option::is_none")]
        speed_mps: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        speed_kmh: Option<f64>,
    },
    Sinusoid {
        #[serde(skip_serializing_if = "Option::is_none")]
        base_mps: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        base_kmh: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        amplitude_mps: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        amplitude_kmh: Option<f64>,
        period_s: f64,
    },
    StepDrop {
        #[serde(skip_serializing_if = "Option::is_none")]
        before_mps: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        before_kmh: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        after_mps: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        after_kmh: Option<f64>,
        drop_time_s: f64,
    },
    Trace {
        dt_s: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        speeds_mps: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        speeds_kmh: Option<Vec<f64>>,
    },
}

impl Default for LeaderSection {
    fn default() -> Self {
        LeaderSection::Sinusoid {
            base_mps: Some(20.0),
            base_kmh: None,
            amplitude_mps: Some(2.0),
            amplitude_kmh: None,
            period_s: 60.0,
        }
    }
}

impl LeaderSection {
    fn resolve(&self) -> Result<LeaderProfile> {
        let p = match self {
            LeaderSection::Constant {
                speed_mps,
                speed_kmh,
            } => LeaderProfile::Constant {
                speed: required(
                    "leader.speed",
                    speed("leader.speed", *speed_mps, *speed_kmh)?,
                )?,
            },
            LeaderSection::Sinusoid {
                base_mps,
                base_kmh,
                amplitude_mps,
                amplitude_kmh,
                period_s,
            } => LeaderProfile::Sinusoid {
                base: required("leader.base", speed("leader.base", *base_mps, *base_kmh)?)?,
                amplitude: speed("leader.amplitude", *amplitude_mps, *amplitude_kmh)?
                    .unwrap_or(0.0),
                period: *period_s,
            },
            LeaderSection::StepDrop {
                before_mps,
                before_kmh,
                after_mps,
                after_kmh,
                drop_time_s,
            } => LeaderProfile::StepDrop {
                before: required(
                    "leader.before",
                    speed("leader.before", *before_mps, *before_kmh)?,
                )?,
                after: required(
                    "leader.after",
                    speed("leader.after", *after_mps, *after_kmh)?,
                )?,
                drop_time: *drop_time_s,
            },
            LeaderSection::Trace {
                dt_s,
                speeds_mps,
                speeds_kmh,
            } => {
                let speeds = match (speeds_mps, speeds_kmh) {
                    (Some(_), Some(_)) => {
                        return Err(Error::config("leader.speeds", "give m/s or km/h, not both"))
                    }
                    (Some(v), None) => v.clone(),
                    (None, Some(v)) => v.iter().map(|x| kmh_to_ms(*x)).collect(),
                    (None, None) => return Err(Error::config("leader.speeds", "missing")),
                };
                LeaderProfile::Trace { dt: *dt_s, speeds }
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// Standard deviations of each sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub sigma_f_mps: Vec<f64>,
    pub sigma_d_m: Vec<f64>,
    pub sigma_l_mps: Vec<f64>,
}

impl Default for SensorSection {
    fn default() -> Self {
        let b = SensorBank::default();
        let sd = |v: &[f64]| v.iter().map(|x| x.sqrt()).collect();
        Self {
            sigma_f_mps: sd(&b.var_f),
            sigma_d_m: sd(&b.var_d),
            sigma_l_mps: sd(&b.var_l),
        }
    }
}

impl SensorSection {
    fn resolve(&self) -> Result<SensorBank> {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).collect();
        let bank = SensorBank {
            var_f: sq(&self.sigma_f_mps),
            var_d: sq(&self.sigma_d_m),
            var_l: sq(&self.sigma_l_mps),
        };
        bank.validate()?;
        Ok(bank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub confidence: f64,
    /// Steps a flagged sensor stays excluded after the flag clears.
    pub quarantine_steps: usize,
    pub reacquire_steps: usize,
    pub process_noise: bool,
    pub accel_noise_var_m2ps4: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let f = FilterConfig::default();
        Self {
            confidence: 0.997,
            quarantine_steps: 0,
            reacquire_steps: 5,
            process_noise: f.process_noise,
            accel_noise_var_m2ps4: f.accel_noise_var,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub prior_filter: bool,
    pub mab: bool,
    pub cost_scale: CostScale,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            prior_filter: true,
            mab: true,
            cost_scale: CostScale::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmSection {
    pub v0_mps: Option<f64>,
    pub v0_kmh: Option<f64>,
    pub delta: Option<f64>,
    pub a_mps2: Option<f64>,
    pub b_mps2: Option<f64>,
    pub s0_m: Option<f64>,
    pub headway_s: Option<f64>,
    pub u_min_mps2: Option<f64>,
    pub u_max_mps2: Option<f64>,
}

impl IdmSection {
    fn resolve(&self) -> Result<IdmParams> {
        let d = IdmParams::default();
        let ip = IdmParams {
            v0: speed("idm.v0", self.v0_mps, self.v0_kmh)?,
            delta: self.delta.unwrap_or(d.delta),
            a: self.a_mps2.unwrap_or(d.a),
            b: self.b_mps2.unwrap_or(d.b),
            s0: self.s0_m.unwrap_or(d.s0),
            t_h: self.headway_s.unwrap_or(d.t_h),
            u_min: self.u_min_mps2.unwrap_or(d.u_min),
            u_max: self.u_max_mps2.unwrap_or(d.u_max),
        };
        if !(ip.a > 0.0 && ip.b > 0.0 && ip.delta > 0.0) || ip.u_min > ip.u_max {
            return Err(Error::config(
                "idm",
                "a, b and delta must be > 0 and u_min <= u_max",
            ));
        }
        Ok(ip)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GippsSection {
    pub a_mps2: Option<f64>,
    pub b_mps2: Option<f64>,
    pub b_leader_mps2: Option<f64>,
    pub tau_s: Option<f64>,
    pub v_desired_mps: Option<f64>,
    pub v_desired_kmh: Option<f64>,
    pub u_min_mps2: Option<f64>,
    pub u_max_mps2: Option<f64>,
}

impl GippsSection {
    fn resolve(&self) -> Result<GippsParams> {
        let d = GippsParams::default();
        let gp = GippsParams {
            a: self.a_mps2.unwrap_or(d.a),
            b: self.b_mps2.unwrap_or(d.b),
            b_leader: self.b_leader_mps2.unwrap_or(d.b_leader),
            tau: self.tau_s,
            v_desired: speed("gipps.v_desired", self.v_desired_mps, self.v_desired_kmh)?,
            u_min: self.u_min_mps2.unwrap_or(d.u_min),
            u_max: self.u_max_mps2.unwrap_or(d.u_max),
        };
        if !(gp.b < 0.0 && gp.b_leader < 0.0 && gp.a > 0.0) || gp.u_min > gp.u_max {
            return Err(Error::config(
                "gipps",
                "a must be > 0, braking values < 0 and u_min <= u_max",
            ));
        }
        if gp.tau.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::config("gipps.tau_s", "must be > 0"));
        }
        Ok(gp)
    }
}

/// One injection. Exactly one of the offset fields or `factor` is given;
/// `offset_m` applies to spacing sensors, the speed offsets to `f`/`l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSection {
    pub sensor: String,
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
}

/// Parses `f1`, `D3`, `l12` into a kind and zero-based index.
pub fn parse_sensor_ref(s: &str) -> Result<(SensorKind, usize)> {
    let bad = || {
        Error::config(
            "attack.sensor",
            format!("`{s}` is not a sensor reference like f1, d2 or l3"),
        )
    };
    let mut chars = s.trim().chars();
    let kind = match chars.next().map(|c| c.to_ascii_lowercase()) {
        Some('f') => SensorKind::F,
        Some('d') => SensorKind::D,
        Some('l') => SensorKind::L,
        _ => return Err(bad()),
    };
    let n: usize = chars.as_str().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok((kind, n - 1))
}

impl InjectionSection {
    fn resolve(&self, n: usize) -> Result<Injection> {
        let field = format!("attack[{n}]");
        let (kind, index) = parse_sensor_ref(&self.sensor).map_err(|e| match e {
            Error::Config { message, .. } => Error::config(&field, message),
            other => other,
        })?;
        let given = [self.offset_mps, self.offset_kmh, self.offset_m, self.factor]
            .iter()
            .filter(|v| v.is_some())
            .count();
        if given != 1 {
            return Err(Error::config(
                field,
                "give exactly one of offset_mps, offset_kmh, offset_m or factor",
            ));
        }
        let (mode, magnitude) = if let Some(f) = self.factor {
            (InjectionMode::MultiplicativeFactor, f)
        } else if let Some(m) = self.offset_m {
            if kind != SensorKind::D {
                return Err(Error::config(
                    field,
                    "offset_m applies to spacing sensors only",
                ));
            }
            (InjectionMode::AdditiveConstant, m)
        } else {
            if kind == SensorKind::D {
                return Err(Error::config(field, "spacing sensors take offset_m"));
            }
            let v = speed(&field, self.offset_mps, self.offset_kmh)?.unwrap_or(0.0);
            (InjectionMode::AdditiveConstant, v)
        };
        if !magnitude.is_finite() || !self.start_s.is_finite() {
            return Err(Error::config(field, "values must be finite"));
        }
        Ok(Injection {
            kind,
            index,
            start: self.start_s,
            end: self.end_s,
            mode,
            magnitude,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mab_csv: Option<PathBuf>,
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub leader: LeaderSection,
    #[serde(default)]
    pub sensors: SensorSection,
    #[serde(default)]
    pub controller: ControllerKind,
    #[serde(default)]
    pub idm: IdmSection,
    #[serde(default)]
    pub gipps: GippsSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub detectors: DetectorSection,
    #[serde(default)]
    pub attack: Vec<InjectionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_avg_m: Option<f64>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("scenario", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { field, message } => {
                Error::config(field, format!("{}: {message}", path.display()))
            }
            other => other,
        })
    }

    /// Converts to SI units and validates every field.
    pub fn resolve(&self) -> Result<Scenario> {
        let plant = self.plant.resolve()?;
        let bank = self.sensors.resolve()?;
        let attack = AttackPlan {
            injections: self
                .attack
                .iter()
                .enumerate()
                .map(|(n, a)| a.resolve(n))
                .collect::<Result<_>>()?,
        };
        let filter = FilterConfig {
            process_noise: self.estimator.process_noise,
            accel_noise_var: self.estimator.accel_noise_var_m2ps4,
        };
        if let Some(d) = self.d_avg_m {
            if !(d > 0.0) {
                return Err(Error::config("d_avg_m", "must be > 0"));
            }
        }
        let s = Scenario {
            name: self.name.clone(),
            duration: self.duration_s,
            seed: self.seed,
            plant,
            initial: self.initial.resolve()?,
            leader: self.leader.resolve()?,
            bank,
            controller: self.controller,
            idm: self.idm.resolve()?,
            gipps: self.gipps.resolve()?,
            filter,
            confidence: self.estimator.confidence,
            quarantine_steps: self.estimator.quarantine_steps,
            reacquire_steps: self.estimator.reacquire_steps,
            prior_filter: self.detectors.prior_filter,
            mab: self.detectors.mab,
            cost_scale: self.detectors.cost_scale,
            attack,
            d_avg: self.d_avg_m,
        };
        s.validate()?;
        Ok(s)
    }

    /// [`resolve`](Self::resolve) with the seed taken from `ACVSIM_SEED`
    /// when set.
    pub fn resolve_with_env(&self) -> Result<Scenario> {
        let mut s = self.resolve()?;
        if let Some(seed) = seed_override()? {
            s.seed = seed;
        }
        Ok(s)
    }
}

pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(SEED_ENV, format!("`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::output::trace_csv;
    use crate::harness::run::run_scenario;
    use proptest::prelude::*;

    const BASE: &str = r#"{
        "name": "t",
        "duration_s": 5,
        "seed": 1,
        "leader": { "kind": "constant", "speed_mps": 20 },
        "attack": [ { "sensor": "l2", "start_s": 1, "offset_mps": 1.5 } ]
    }"#;

    fn with(patch: serde_json::Value) -> Result<ScenarioConfig> {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        for (k, x) in patch.as_object().unwrap() {
            v[k] = x.clone();
        }
        ScenarioConfig::from_json(&v.to_string())
    }

    fn field(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn minimal_file_resolves_with_defaults() {
        let s = ScenarioConfig::from_json(BASE).unwrap().resolve().unwrap();
        assert_eq!(s.steps(), 50);
        assert_eq!(s.bank.n_l(), 4);
        assert!((s.initial.v_f - 25.0).abs() < 1e-12);
        assert_eq!(s.attack.injections[0].index, 1);
    }

    #[test]
    fn both_units_rejected() {
        let c = with(serde_json::json!({ "initial": { "v0_mps": 20, "v0_kmh": 72 } })).unwrap();
        assert_eq!(field(c.resolve().unwrap_err()), "initial.v0");
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(with(serde_json::json!({ "speed": 3 })).is_err());
        assert!(with(serde_json::json!({ "plant": { "T": 0.1 } })).is_err());
    }

    #[test]
    fn bad_sensor_refs_rejected() {
        for bad in ["x1", "l0", "l", "lx", "l5"] {
            let c = with(
                serde_json::json!({ "attack": [ { "sensor": bad, "start_s": 0, "offset_mps": 1 } ] }),
            );
            assert!(c.and_then(|c| c.resolve()).is_err(), "{bad}");
        }
        assert_eq!(parse_sensor_ref("d3").unwrap(), (SensorKind::D, 2));
    }

    #[test]
    fn injection_needs_exactly_one_magnitude() {
        let none = with(serde_json::json!({ "attack": [ { "sensor": "l1", "start_s": 0 } ] }));
        assert!(none.and_then(|c| c.resolve()).is_err());
        let two = with(
            serde_json::json!({ "attack": [ { "sensor": "l1", "start_s": 0, "offset_mps": 1, "factor": 2 } ] }),
        );
        assert!(two.and_then(|c| c.resolve()).is_err());
        let metres_on_speed = with(
            serde_json::json!({ "attack": [ { "sensor": "l1", "start_s": 0, "offset_m": 1 } ] }),
        );
        assert!(metres_on_speed.and_then(|c| c.resolve()).is_err());
    }

    #[test]
    fn non_positive_duration_rejected() {
        for d in [0.0, -1.0] {
            let c = with(serde_json::json!({ "duration_s": d })).unwrap();
            assert!(c.resolve().is_err());
        }
    }

    #[test]
    fn load_reports_path() {
        let e = ScenarioConfig::load(Path::new("/nonexistent/scenario.json")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/scenario.json"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, "{ not json").unwrap();
        assert!(ScenarioConfig::load(&p)
            .unwrap_err()
            .to_string()
            .contains("bad.json"));
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = ScenarioConfig::from_json(BASE).unwrap();
        let again = ScenarioConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn kmh_and_mps_give_identical_traces(v in 20u32..130, lead in 20u32..130, seed in 0u64..1000) {
            let (v, lead) = (f64::from(v), f64::from(lead));
            let si = with(serde_json::json!({
                "seed": seed,
                "initial": { "v0_mps": kmh_to_ms(v) },
                "leader": { "kind": "constant", "speed_mps": kmh_to_ms(lead) },
            })).unwrap().resolve().unwrap();
            let kmh = with(serde_json::json!({
                "seed": seed,
                "initial": { "v0_kmh": v },
                "leader": { "kind": "constant", "speed_kmh": lead },
            })).unwrap().resolve().unwrap();
            prop_assert_eq!(si.initial.v_f.to_bits(), kmh.initial.v_f.to_bits());
            prop_assert_eq!(
                trace_csv(&run_scenario(&si).unwrap()),
                trace_csv(&run_scenario(&kmh).unwrap())
            );
        }
    }
}
