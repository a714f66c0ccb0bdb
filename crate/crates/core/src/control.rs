//! Optimal safe controller, physical regret, the N-step search oracle and the
//! Gipps / IDM baselines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PlantParams, PlantState};

/// `v² / (2 b_f)`.
pub fn optimal_spacing(v: f64, b_f: f64) -> f64 {
    v * v / (2.0 * b_f)
}

/// `(o(v_f') − d')²` for the state reached after a step.
pub fn physical_regret(next: PlantState, b_f: f64) -> f64 {
    (optimal_spacing(next.v_f, b_f) - next.d).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub u: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    pub saturated: bool,
    pub radicand_clamped: bool,
}

/// Admissible window `[u̲₁, ū₁]` at speed `v_f` after `prev_u`.
pub fn input_window(v_f: f64, prev_u: f64, p: &PlantParams) -> (f64, f64) {
    let lo = (-v_f / p.t).max(p.u_min).max(prev_u - p.du_max);
    let hi = ((p.v_free - v_f) / p.t).min(p.u_max).min(prev_u + p.du_max);
    (lo, hi)
}

/// Unconstrained minimiser of the estimated one-step regret, with the
/// radicand clamped at zero. Returns `(root, clamped)`.
pub fn unconstrained_root(v_f: f64, d: f64, v_l: f64, p: &PlantParams) -> (f64, bool) {
    let rad = d + p.t * v_l - p.t * v_f;
    let clamped = rad < 0.0;
    ((((2.0 * p.b_f * rad.max(0.0)).sqrt()) - v_f) / p.t, clamped)
}

/// One-step optimal safe input from estimated state.
pub fn optimal_controller(
    v_f: f64,
    d: f64,
    v_l: f64,
    prev_u: f64,
    p: &PlantParams,
) -> ControlDecision {
    let (root, radicand_clamped) = unconstrained_root(v_f, d, v_l, p);
    let (lo, hi) = input_window(v_f, prev_u, p);
    if lo > hi {
        log::warn!("constraint conflict: input window [{lo}, {hi}] is empty");
        let u = if (root - lo).abs() <= (root - hi).abs() {
            lo
        } else {
            hi
        };
        return ControlDecision {
            u,
            u_lo: lo,
            u_hi: hi,
            saturated: true,
            radicand_clamped,
        };
    }
    let u = root.clamp(lo, hi);
    ControlDecision {
        u,
        u_lo: lo,
        u_hi: hi,
        saturated: u != root,
        radicand_clamped,
    }
}

fn advance(x: PlantState, u: f64, v_l: f64, t: f64) -> PlantState {
    PlantState::new(x.v_f + t * u, x.d + t * v_l - t * x.v_f)
}

/// The candidate grid over the admissible window at `x`.
fn grid_window(x: PlantState, prev_u: f64, p: &PlantParams) -> (f64, f64) {
    let (lo, hi) = input_window(x.v_f, prev_u, p);
    if lo > hi {
        let mid = 0.5 * (lo + hi);
        (mid, mid)
    } else {
        (lo, hi)
    }
}

fn grid_point(lo: f64, hi: f64, grid: usize, k: usize) -> f64 {
    if k + 1 == grid {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (grid - 1) as f64
    }
}

/// Minimum single-step regret over the grid. `o(v + T u) − d'` is
/// nondecreasing in `u` on the window, so the minimiser sits at its sign
/// change and a bisection over grid indices is exact.
fn best_last(x: PlantState, v_l: f64, prev_u: f64, p: &PlantParams, grid: usize) -> f64 {
    let (lo, hi) = grid_window(x, prev_u, p);
    let gap = |k: usize| {
        let next = advance(x, grid_point(lo, hi, grid, k), v_l, p.t);
        optimal_spacing(next.v_f, p.b_f) - next.d
    };
    let (mut a, mut b) = (0usize, grid - 1);
    if gap(a) >= 0.0 {
        return gap(a).powi(2);
    }
    if gap(b) <= 0.0 {
        return gap(b).powi(2);
    }
    while b - a > 1 {
        let m = (a + b) / 2;
        if gap(m) >= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    gap(a).powi(2).min(gap(b).powi(2))
}

fn cost_to_go(
    x: PlantState,
    forecast: &[f64],
    prev_u: f64,
    p: &PlantParams,
    gamma: f64,
    grid: usize,
) -> f64 {
    if forecast.len() == 1 {
        return best_last(x, forecast[0], prev_u, p, grid);
    }
    let (lo, hi) = grid_window(x, prev_u, p);
    (0..grid)
        .map(|k| {
            let u = grid_point(lo, hi, grid, k);
            let next = advance(x, u, forecast[0], p.t);
            physical_regret(next, p.b_f)
                + gamma * cost_to_go(next, &forecast[1..], u, p, gamma, grid)
        })
        .fold(f64::INFINITY, f64::min)
}

/// First action of the grid-optimal `N`-step input sequence minimising
/// `Σ_τ γ^τ R(τ)` with the plant rolled forward exactly. `N` is the
/// forecast length.
pub fn n_step_oracle(
    state: PlantState,
    v_l_forecast: &[f64],
    prev_u: f64,
    p: &PlantParams,
    gamma: f64,
    grid: usize,
) -> f64 {
    assert!(!v_l_forecast.is_empty(), "N must be at least 1");
    assert!(grid >= 2, "grid needs at least two points");
    let horizon = if gamma == 0.0 {
        &v_l_forecast[..1]
    } else {
        v_l_forecast
    };
    let (lo, hi) = grid_window(state, prev_u, p);
    let (best_k, _) = (0..grid)
        .into_par_iter()
        .map(|k| {
            let u = grid_point(lo, hi, grid, k);
            let next = advance(state, u, horizon[0], p.t);
            let tail = if horizon.len() > 1 {
                gamma * cost_to_go(next, &horizon[1..], u, p, gamma, grid)
            } else {
                0.0
            };
            (k, physical_regret(next, p.b_f) + tail)
        })
        .reduce(
            || (usize::MAX, f64::INFINITY),
            |a, b| {
                if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    grid_point(lo, hi, grid, best_k)
}

/// Width of one oracle grid cell at `state`.
pub fn grid_resolution(state: PlantState, prev_u: f64, p: &PlantParams, grid: usize) -> f64 {
    let (lo, hi) = grid_window(state, prev_u, p);
    (hi - lo) / (grid - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Desired speed in m/s; `None` uses the plant's free-flow speed.
    pub v0: Option<f64>,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub s0: f64,
    pub t_h: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: None,
            delta: 4.0,
            a: 0.73,
            b: 1.67,
            s0: 2.0,
            t_h: 1.5,
            u_min: -9.0,
            u_max: 0.73,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GippsParams {
    pub a: f64,
    /// Own braking, negative.
    pub b: f64,
    /// Assumed leader braking, negative.
    pub b_leader: f64,
    /// Reaction time; `None` uses the sampling period.
    pub tau: Option<f64>,
    /// Desired speed; `None` uses the plant's free-flow speed.
    pub v_desired: Option<f64>,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for GippsParams {
    fn default() -> Self {
        Self {
            a: 1.7,
            b: -3.0,
            b_leader: -3.0,
            tau: None,
            v_desired: None,
            u_min: -3.0,
            u_max: 1.7,
        }
    }
}

/// Intelligent driver model acceleration.
pub fn idm_controller(v_f: f64, d: f64, v_l: f64, ip: &IdmParams, p: &PlantParams) -> f64 {
    let v0 = ip.v0.unwrap_or(p.v_free);
    let d = d.max(0.1);
    let s_star = ip.s0 + (v_f * ip.t_h + v_f * (v_f - v_l) / (2.0 * (ip.a * ip.b).sqrt())).max(0.0);
    let u = ip.a * (1.0 - (v_f / v0).powf(ip.delta) - (s_star / d).powi(2));
    u.clamp(ip.u_min, ip.u_max)
}

/// Gipps car-following acceleration over one reaction step.
pub fn gipps_controller(v_f: f64, d: f64, v_l: f64, gp: &GippsParams, p: &PlantParams) -> f64 {
    let tau = gp.tau.unwrap_or(p.t);
    let vd = gp.v_desired.unwrap_or(p.v_free);
    let ratio = (v_f / vd).max(0.0);
    let v_accel = v_f + 2.5 * gp.a * tau * (1.0 - ratio) * (0.025 + ratio).sqrt();
    let b = gp.b;
    let disc = b * b * tau * tau - b * (2.0 * d - v_f * tau - v_l * v_l / gp.b_leader);
    let v_safe = if disc > 0.0 {
        b * tau + disc.sqrt()
    } else {
        0.0
    };
    let target = v_accel.min(v_safe).max(0.0);
    ((target - v_f) / tau).clamp(gp.u_min, gp.u_max)
}

/// Running physical-regret bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub gap: Vec<f64>,
}

impl RegretTrace {
    /// Records the state reached after a step and returns its regret.
    pub fn record(&mut self, next: PlantState, b_f: f64) -> f64 {
        let gap = optimal_spacing(next.v_f, b_f) - next.d;
        let r = gap * gap;
        let total = self.total() + r;
        self.per_step.push(r);
        self.cumulative.push(total);
        self.gap.push(gap);
        r
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{equilibrium, step_plant};
    use crate::mathkit::RngStream;

    fn p() -> PlantParams {
        PlantParams::default()
    }

    /// Plain exhaustive enumeration, no bisection.
    fn exhaustive(
        x: PlantState,
        f: &[f64],
        prev: f64,
        p: &PlantParams,
        gamma: f64,
        grid: usize,
    ) -> (f64, f64) {
        let (lo, hi) = grid_window(x, prev, p);
        let mut best = (f64::NAN, f64::INFINITY);
        for k in 0..grid {
            let u = grid_point(lo, hi, grid, k);
            let next = advance(x, u, f[0], p.t);
            let mut c = physical_regret(next, p.b_f);
            if f.len() > 1 {
                c += gamma * exhaustive(next, &f[1..], u, p, gamma, grid).1;
            }
            if c < best.1 {
                best = (u, c);
            }
        }
        best
    }

    #[test]
    fn spacing_and_regret_examples() {
        assert_eq!(optimal_spacing(20.0, 2.5), 80.0);
        assert_eq!(optimal_spacing(0.0, 2.5), 0.0);
        assert_eq!(optimal_spacing(10.0, 2.5), 20.0);
        assert_eq!(physical_regret(equilibrium(20.0, 2.5), 2.5), 0.0);
        assert_eq!(physical_regret(PlantState::new(20.0, 70.0), 2.5), 100.0);
        assert_eq!(physical_regret(PlantState::new(0.0, 3.0), 2.5), 9.0);
    }

    #[test]
    fn controller_examples() {
        let c = optimal_controller(20.0, 80.0, 20.0, 0.0, &p());
        assert!(c.u.abs() < 1e-12 && !c.saturated);
        let c = optimal_controller(20.0, 120.0, 20.0, 0.0, &p());
        let (root, _) = unconstrained_root(20.0, 120.0, 20.0, &p());
        assert!((root - (600f64.sqrt() - 20.0) / 0.1).abs() < 1e-9);
        assert!((root - 44.949).abs() < 1e-3);
        assert_eq!(c.u, 0.25);
        assert!(c.saturated);
        let c = optimal_controller(10.0, 0.0, 0.0, 0.0, &p());
        assert!(c.radicand_clamped);
        assert_eq!(c.u, -0.25);
    }

    #[test]
    fn infeasible_window_picks_nearest_bound() {
        let mut pp = p();
        pp.du_max = 0.05;
        // prev far above u_max: window [prev-0.05, 0.25] is empty
        let c = optimal_controller(20.0, 80.0, 20.0, 1.0, &pp);
        assert!(c.u_lo > c.u_hi && c.saturated);
        assert_eq!(c.u, c.u_hi);
    }

    #[test]
    fn slew_limit_respected() {
        let mut pp = p();
        pp.du_max = 0.05;
        let mut prev = 0.0;
        let mut x = PlantState::new(25.0, 100.0);
        for _ in 0..500 {
            let c = optimal_controller(x.v_f, x.d, 20.0, prev, &pp);
            assert!((c.u - prev).abs() <= 0.05 + 1e-12);
            prev = c.u;
            x = step_plant(x, c.u, 20.0, &pp).state;
        }
    }

    #[test]
    fn second_order_condition_positive() {
        let pp = p();
        let (v, d, vl) = (18.0, 70.0, 19.0);
        let (root, _) = unconstrained_root(v, d, vl, &pp);
        let r = |u: f64| physical_regret(advance(PlantState::new(v, d), u, vl, pp.t), pp.b_f);
        let h = 1e-4;
        let d2 = (r(root + h) - 2.0 * r(root) + r(root - h)) / (h * h);
        assert!(d2 > 0.0, "{d2}");
        assert!(r(root) < 1e-18);
    }

    #[test]
    fn deadbeat_with_exact_state() {
        let mut pp = p();
        pp.u_min = -100.0;
        pp.u_max = 100.0;
        let mut x = PlantState::new(20.0, 75.0);
        for step in 0..50 {
            let c = optimal_controller(x.v_f, x.d, 20.0, 0.0, &pp);
            assert!(!c.saturated);
            x = step_plant(x, c.u, 20.0, &pp).state;
            assert!(physical_regret(x, pp.b_f) < 1e-18, "step {step}");
        }
    }

    #[test]
    fn oracle_matches_exhaustive_search() {
        let pp = p();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..5 {
            let x = PlantState::new(rng.uniform(10.0, 25.0), rng.uniform(20.0, 120.0));
            let f = [
                rng.uniform(10.0, 25.0),
                rng.uniform(10.0, 25.0),
                rng.uniform(10.0, 25.0),
            ];
            let fast = n_step_oracle(x, &f, 0.0, &pp, 0.9, 41);
            let (slow, _) = exhaustive(x, &f, 0.0, &pp, 0.9, 41);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn oracle_horizon_one_and_zero_discount() {
        let pp = p();
        let x = PlantState::new(19.0, 70.0);
        let c = optimal_controller(x.v_f, x.d, 19.5, 0.0, &pp);
        let grid = 501;
        let cell = grid_resolution(x, 0.0, &pp, grid);
        let u1 = n_step_oracle(x, &[19.5], 0.0, &pp, 1.0, grid);
        assert!((u1 - c.u).abs() <= cell);
        let u0 = n_step_oracle(x, &[19.5, 25.0, 10.0], 0.0, &pp, 0.0, grid);
        assert_eq!(u0, u1);
    }

    #[test]
    fn idm_free_road_does_not_accelerate() {
        let pp = p();
        let u = idm_controller(pp.v_free, 1e9, pp.v_free, &IdmParams::default(), &pp);
        assert!(u <= 0.0);
    }

    #[test]
    fn gipps_bounded_at_optimal_spacing() {
        let pp = p();
        let g = GippsParams::default();
        let u = gipps_controller(20.0, optimal_spacing(20.0, 2.5), 20.0, &g, &pp);
        let vd = pp.v_free;
        let accel_branch = 2.5 * g.a * (1.0 - 20.0 / vd) * (0.025 + 20.0 / vd).sqrt();
        assert!(u.abs() <= accel_branch + 1e-12, "{u} vs {accel_branch}");
    }

    #[test]
    fn regret_trace_accounting() {
        let mut tr = RegretTrace::default();
        tr.record(PlantState::new(20.0, 70.0), 2.5);
        tr.record(PlantState::new(0.0, 3.0), 2.5);
        assert_eq!(tr.total(), 109.0);
        assert_eq!(tr.gap, vec![10.0, -3.0]);
    }

    proptest::proptest! {
        #[test]
        fn output_within_window(v in 0.0f64..33.0, d in 0.0f64..200.0, vl in 0.0f64..33.0, prev in -0.25f64..0.25) {
            let pp = p();
            let c = optimal_controller(v, d, vl, prev, &pp);
            proptest::prop_assert!(c.u >= c.u_lo && c.u <= c.u_hi);
            let next = step_plant(PlantState::new(v, d), c.u, vl, &pp).state;
            proptest::prop_assert!(next.v_f >= -1e-12 && next.v_f <= pp.v_free + 1e-12);
        }
    }
}
