//! Follower plant, leader speed profiles, equilibrium and Lyapunov checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathkit::Mat;

/// km/h → m/s.
pub fn kmh_to_ms(v: f64) -> f64 {
    v / 3.6
}

/// Follower speed and inter-vehicle spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Follower speed, m/s.
    pub v_f: f64,
    /// Spacing to the leader, m.
    pub d: f64,
}

impl PlantState {
    pub fn new(v_f: f64, d: f64) -> Self {
        Self { v_f, d }
    }

    pub fn as_vec(&self) -> [f64; 2] {
        [self.v_f, self.d]
    }
}

/// Physical limits of the follower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Sampling period, s.
    pub t: f64,
    /// Maximum braking deceleration, m/s².
    pub b_f: f64,
    /// Free-flow speed, m/s.
    pub v_free: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Maximum change of the control input between steps; `f64::INFINITY`
    /// disables the slew constraint.
    pub du_max: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            t: 0.1,
            b_f: 2.5,
            v_free: 120.0 / 3.6,
            u_min: -0.25,
            u_max: 0.25,
            du_max: f64::INFINITY,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) {
            return Err(Error::config("T_s", "sampling period must be > 0"));
        }
        if !(self.b_f > 0.0) {
            return Err(Error::config("b_f", "braking deceleration must be > 0"));
        }
        if !(self.v_free > 0.0) {
            return Err(Error::config("v_free", "free-flow speed must be > 0"));
        }
        if !(self.u_min < 0.0 && 0.0 < self.u_max) {
            return Err(Error::config("u_min/u_max", "require u_min < 0 < u_max"));
        }
        if !(self.du_max > 0.0) {
            return Err(Error::config("du_max", "slew limit must be > 0"));
        }
        Ok(())
    }

    /// State transition `A`.
    pub fn a(&self) -> Mat {
        Mat::from_rows(&[&[1.0, 0.0], &[-self.t, 1.0]])
    }

    /// Control input matrix `B`.
    pub fn b(&self) -> Mat {
        Mat::col(&[self.t, 0.0])
    }

    /// Leader speed input matrix `F`.
    pub fn f(&self) -> Mat {
        Mat::col(&[0.0, self.t])
    }
}

/// Result of one plant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantStep {
    pub state: PlantState,
    /// The raw spacing reached zero or below.
    pub collision: bool,
}

/// `v_f' = v_f + T u_f`, `d' = d + T v_l − T v_f`.
///
/// Saturation is the controller's business; the plant applies `u_f` as given
/// and only reports whether the new spacing is non-positive.
pub fn step_plant(s: PlantState, u_f: f64, v_l: f64, p: &PlantParams) -> PlantStep {
    let next = PlantState {
        v_f: s.v_f + p.t * u_f,
        d: s.d + p.t * v_l - p.t * s.v_f,
    };
    PlantStep {
        state: next,
        collision: next.d <= 0.0,
    }
}

/// Controllability matrix `[B | AB]` and its numeric rank.
pub fn controllability_rank(t: f64) -> Result<(Mat, usize)> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("sampling period {t} must be > 0")));
    }
    let p = PlantParams {
        t,
        ..PlantParams::default()
    };
    let b = p.b();
    let ab = &p.a() * &b;
    let c = Mat::from_rows(&[&[b[(0, 0)], ab[(0, 0)]], &[b[(1, 0)], ab[(1, 0)]]]);
    let rank = c.rank();
    Ok((c, rank))
}

/// Fixed point of the unsaturated closed loop for a constant leader speed:
/// matched speed at the optimal safe spacing `v_l² / (2 b_f)`.
pub fn equilibrium(v_l: f64, b_f: f64) -> PlantState {
    PlantState {
        v_f: v_l,
        d: v_l * v_l / (2.0 * b_f),
    }
}

/// `(v_f² / (2 b_f) − d)²`, zero exactly on the optimal-spacing manifold.
pub fn lyapunov_value(s: PlantState, b_f: f64) -> f64 {
    let g = s.v_f * s.v_f / (2.0 * b_f) - s.d;
    g * g
}

/// One step of the ideal closed loop: exact state knowledge and the
/// unconstrained optimal input. A negative radicand is clamped to zero.
pub fn closed_loop_map(s: PlantState, v_l: f64, p: &PlantParams) -> PlantState {
    let d_next = s.d + p.t * v_l - p.t * s.v_f;
    PlantState {
        v_f: (2.0 * p.b_f * d_next.max(0.0)).sqrt(),
        d: d_next,
    }
}

/// Leader speed pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeaderProfile {
    Constant {
        speed: f64,
    },
    /// `base + amplitude · sin(2π t / period)`, floored at zero.
    Sinusoid {
        base: f64,
        amplitude: f64,
        period: f64,
    },
    /// `before` until `drop_time`, `after` from then on.
    StepDrop {
        before: f64,
        after: f64,
        drop_time: f64,
    },
    /// Piecewise-constant samples `speeds[i]` on `[i·dt, (i+1)·dt)`; the
    /// last value holds past the end.
    Trace {
        dt: f64,
        speeds: Vec<f64>,
    },
}

impl LeaderProfile {
    /// `20 + 2 sin(2πt/60)` m/s.
    pub fn default_sinusoid() -> Self {
        LeaderProfile::Sinusoid {
            base: 20.0,
            amplitude: 2.0,
            period: 60.0,
        }
    }

    /// 75 km/h dropping to 5 km/h at t = 100 s.
    pub fn default_step_drop() -> Self {
        LeaderProfile::StepDrop {
            before: kmh_to_ms(75.0),
            after: kmh_to_ms(5.0),
            drop_time: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config("leader", m));
        match self {
            LeaderProfile::Constant { speed } if *speed < 0.0 => bad("constant speed must be >= 0"),
            LeaderProfile::Sinusoid { period, .. } if !(*period > 0.0) => bad("period must be > 0"),
            LeaderProfile::StepDrop { before, after, .. } if *before < 0.0 || *after < 0.0 => {
                bad("speeds must be >= 0")
            }
            LeaderProfile::Trace { dt, speeds } => {
                if !(*dt > 0.0) {
                    bad("trace dt must be > 0")
                } else if speeds.is_empty() {
                    bad("trace must contain at least one sample")
                } else if speeds.iter().any(|v| *v < 0.0) {
                    bad("trace speeds must be >= 0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Speed at time `t` (s).
    pub fn speed(&self, t: f64) -> f64 {
        let v = match self {
            LeaderProfile::Constant { speed } => *speed,
            LeaderProfile::Sinusoid {
                base,
                amplitude,
                period,
            } => base + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
            LeaderProfile::StepDrop {
                before,
                after,
                drop_time,
            } => {
                if t < *drop_time {
                    *before
                } else {
                    *after
                }
            }
            LeaderProfile::Trace { dt, speeds } => {
                // small epsilon so t = k·dt lands on sample k despite rounding
                let idx = ((t / dt) + 1e-9).floor().max(0.0) as usize;
                speeds[idx.min(speeds.len() - 1)]
            }
        };
        v.max(0.0)
    }

    /// Nominal (time-averaged) speed, used for default spacing references.
    pub fn nominal_speed(&self) -> f64 {
        match self {
            LeaderProfile::Constant { speed } => *speed,
            LeaderProfile::Sinusoid { base, .. } => base.max(0.0),
            LeaderProfile::StepDrop { before, .. } => *before,
            LeaderProfile::Trace { speeds, .. } => speeds.iter().sum::<f64>() / speeds.len() as f64,
        }
    }
}

/// `leader_speed` as a free function, mirroring the profile method.
pub fn leader_speed(profile: &LeaderProfile, t: f64) -> f64 {
    profile.speed(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PlantParams {
        PlantParams::default()
    }

    #[test]
    fn plant_examples() {
        let s = step_plant(PlantState::new(20.0, 80.0), 0.0, 20.0, &p());
        assert_eq!(s.state, PlantState::new(20.0, 80.0));
        let s = step_plant(PlantState::new(20.0, 80.0), 0.25, 20.0, &p());
        assert!((s.state.v_f - 20.025).abs() < 1e-12 && (s.state.d - 80.0).abs() < 1e-12);

        let s1 = step_plant(PlantState::new(25.0, 1.0), 0.0, 20.0, &p());
        assert!((s1.state.d - 0.5).abs() < 1e-12 && !s1.collision);
        let s2 = step_plant(s1.state, 0.0, 20.0, &p());
        assert!(s2.state.d.abs() < 1e-12 && s2.collision);
    }

    #[test]
    fn controllability() {
        let (c, r) = controllability_rank(0.1).unwrap();
        let expect = Mat::from_rows(&[&[0.1, 0.1], &[0.0, -0.01]]);
        assert!((&c - &expect).frobenius() < 1e-15);
        assert_eq!(r, 2);
        let (c, r) = controllability_rank(1.0).unwrap();
        assert_eq!(c, Mat::from_rows(&[&[1.0, 1.0], &[0.0, -1.0]]));
        assert_eq!(r, 2);
        assert_eq!(controllability_rank(1e-6).unwrap().1, 2);
        assert!(controllability_rank(0.0).is_err());
    }

    #[test]
    fn equilibrium_and_lyapunov() {
        assert_eq!(equilibrium(20.0, 2.5), PlantState::new(20.0, 80.0));
        assert_eq!(equilibrium(0.0, 2.5), PlantState::new(0.0, 0.0));
        assert_eq!(equilibrium(10.0, 2.5), PlantState::new(10.0, 20.0));
        let eq = equilibrium(20.0, 2.5);
        let g = closed_loop_map(eq, 20.0, &p());
        assert!((g.v_f - eq.v_f).abs() < 1e-12 && (g.d - eq.d).abs() < 1e-12);

        assert_eq!(lyapunov_value(eq, 2.5), 0.0);
        assert!((lyapunov_value(PlantState::new(20.0, 70.0), 2.5) - 100.0).abs() < 1e-12);
        assert!((lyapunov_value(PlantState::new(0.0, 5.0), 2.5) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn closed_loop_lands_on_manifold_then_converges() {
        let params = p();
        let mut s = PlantState::new(14.0, 60.0);
        s = closed_loop_map(s, 20.0, &params);
        assert!(lyapunov_value(s, params.b_f) < 1e-18);
        for _ in 0..20_000 {
            s = closed_loop_map(s, 20.0, &params);
        }
        assert!((s.v_f - 20.0).abs() < 1e-9 && (s.d - 80.0).abs() < 1e-9);
    }

    #[test]
    fn leader_profiles() {
        let drop = LeaderProfile::default_step_drop();
        assert!((drop.speed(50.0) - 20.833).abs() < 1e-3);
        assert!((drop.speed(150.0) - 1.389).abs() < 1e-3);
        assert_eq!(LeaderProfile::Constant { speed: 20.0 }.speed(123.4), 20.0);
        let sin = LeaderProfile::default_sinusoid();
        assert!((sin.speed(15.0) - 22.0).abs() < 1e-12);
        let tr = LeaderProfile::Trace {
            dt: 0.1,
            speeds: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(tr.speed(0.1), 2.0);
        assert_eq!(tr.speed(99.0), 3.0);
        let neg = LeaderProfile::Sinusoid {
            base: 1.0,
            amplitude: 5.0,
            period: 10.0,
        };
        assert!((0..100).all(|k| neg.speed(k as f64 * 0.1) >= 0.0));
    }

    proptest::proptest! {
        #[test]
        fn plant_is_affine(
            v1 in 0.0f64..40.0, d1 in 0.0f64..200.0, u1 in -1.0f64..1.0, w1 in 0.0f64..40.0,
            v2 in 0.0f64..40.0, d2 in 0.0f64..200.0, u2 in -1.0f64..1.0, w2 in 0.0f64..40.0,
            alpha in -2.0f64..3.0,
        ) {
            let params = PlantParams::default();
            let beta = 1.0 - alpha;
            let mix = PlantState::new(alpha * v1 + beta * v2, alpha * d1 + beta * d2);
            let lhs = step_plant(mix, alpha * u1 + beta * u2, alpha * w1 + beta * w2, &params).state;
            let a = step_plant(PlantState::new(v1, d1), u1, w1, &params).state;
            let b = step_plant(PlantState::new(v2, d2), u2, w2, &params).state;
            proptest::prop_assert!((lhs.v_f - (alpha * a.v_f + beta * b.v_f)).abs() < 1e-9);
            proptest::prop_assert!((lhs.d - (alpha * a.d + beta * b.d)).abs() < 1e-9);
        }

        #[test]
        fn lyapunov_nonincreasing(v in 0.5f64..35.0, d in 1.0f64..250.0, vl in 0.5f64..35.0) {
            let params = PlantParams::default();
            let mut s = PlantState::new(v, d);
            proptest::prop_assume!(s.d + params.t * vl - params.t * s.v_f >= 0.0);
            for _ in 0..200 {
                let next = closed_loop_map(s, vl, &params);
                proptest::prop_assert!(lyapunov_value(next, params.b_f) <= lyapunov_value(s, params.b_f) + 1e-9);
                s = next;
            }
        }
    }
}
