//! The per-step simulation loop.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{
    gipps_controller, idm_controller, optimal_controller, optimal_spacing, GippsParams, IdmParams,
    RegretTrace,
};
use crate::detection_prior::build_residual_model_with;
use crate::detection_prior::{build_residual_model, detect, ResidualModel};
use crate::dynamics::{step_plant, LeaderProfile, PlantParams, PlantState};
use crate::error::{Error, Result};
use crate::estimation::{
    consensus_ls, predict, process_noise_cov, static_ls, steady_state_gain, update_or_predict,
    EstimatorState, FilterConfig,
};
use crate::fusion_mab::{
    best_arm, build_posterior_model, expected_costs, mahalanobis_sd, mask_string,
    posterior_residual, regret_bound, subset_weights, ucb_select, update_arm, BanditState,
    CostScale, PosteriorModel,
};
use crate::mathkit::RngStream;
use crate::sensing::{
    apply_attack, sample_readings, AttackPlan, InjectionMode, ReadingFrame, SensorBank, SensorKind,
    Truth,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Optimal,
    Gipps,
    Idm,
}

/// A validated scenario with every quantity in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub seed: u64,
    pub plant: PlantParams,
    pub initial: PlantState,
    pub leader: LeaderProfile,
    pub bank: SensorBank,
    pub controller: ControllerKind,
    pub idm: IdmParams,
    pub gipps: GippsParams,
    pub filter: FilterConfig,
    pub confidence: f64,
    pub quarantine_steps: usize,
    /// Consecutive steps with every sensor of one kind excluded before that
    /// state is re-acquired from a consensus estimate; 0 never re-acquires.
    pub reacquire_steps: usize,
    pub prior_filter: bool,
    pub mab: bool,
    pub cost_scale: CostScale,
    pub attack: AttackPlan,
    /// Average spacing for attack analysis; defaults to the equilibrium
    /// spacing at the leader's nominal speed.
    pub d_avg: Option<f64>,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.duration / self.plant.t).round() as usize
    }

    pub fn average_spacing(&self) -> f64 {
        self.d_avg
            .unwrap_or_else(|| optimal_spacing(self.leader.nominal_speed(), self.plant.b_f))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::config("duration_s", "must be > 0"));
        }
        self.plant.validate()?;
        self.leader.validate()?;
        self.bank.validate()?;
        self.filter.validate()?;
        self.attack.validate(&self.bank)?;
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::config("estimator.confidence", "must lie in (0, 1)"));
        }
        if self.initial.d < 0.0 || self.initial.v_f < 0.0 {
            return Err(Error::config("initial", "speed and spacing must be >= 0"));
        }
        if self.mab && self.bank.n_l() > crate::fusion_mab::MAX_L_SENSORS {
            return Err(Error::config(
                "sensors.sigma_l_mps",
                format!(
                    "{} leader sensors is too many arms for the bandit",
                    self.bank.n_l()
                ),
            ));
        }
        Ok(())
    }
}

/// Agreement gate, in combined standard deviations, for re-acquisition.
const REACQUIRE_GATE: f64 = 4.0;

/// One simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub v_f: f64,
    pub d: f64,
    pub v_l: f64,
    pub v_f_hat: f64,
    pub d_hat: f64,
    pub v_l_hat: f64,
    pub u: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub gap: f64,
    /// Bit `i` set when prior sensor `i` was excluded this step.
    pub flags: u64,
    pub arm: Option<u32>,
    pub sm: Option<f64>,
    pub xi: Option<f64>,
    pub xi_star: Option<f64>,
    pub cum_cyber_regret: f64,
    pub bound: Option<f64>,
    pub collision: bool,
}

/// One scored bandit play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabRow {
    pub t: f64,
    pub arm: u32,
    pub d: f64,
    pub xi: f64,
    pub xi_star: f64,
    pub cum_regret: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub steps: usize,
    pub controller: ControllerKind,
    pub final_cum_regret: f64,
    pub collisions: usize,
    pub first_collision_s: Option<f64>,
    pub min_spacing_m: f64,
    /// Smallest `d − o(v_f)` over the run; negative means closer than optimal.
    pub min_spacing_margin_m: f64,
    pub degraded_updates: usize,
    pub reacquisitions: usize,
    pub prior_flag_rate: Vec<f64>,
    pub prior_detection_latency_s: Option<f64>,
    pub mab_detection_latency_s: Option<f64>,
    pub final_cum_cyber_regret: Option<f64>,
    pub modal_arm: Option<String>,
    pub arm_histogram: Option<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub n_prior: usize,
    pub n_l: usize,
    pub rows: Vec<TraceRow>,
    pub mab: Vec<MabRow>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub fn regret(&self) -> RegretTrace {
        RegretTrace {
            per_step: self.rows.iter().map(|r| r.regret).collect(),
            cumulative: self.rows.iter().map(|r| r.cum_regret).collect(),
            gap: self.rows.iter().map(|r| r.gap).collect(),
        }
    }
}

/// Precomputed filter and detector models for a scenario.
pub struct Models {
    pub residual: ResidualModel,
    /// Indexed by `arm mask − 1`.
    pub arms: Vec<PosteriorModel>,
}

pub fn build_models(s: &Scenario) -> Result<Models> {
    let (k, _) = steady_state_gain(&s.bank, &s.plant, &s.filter)?;
    let residual = build_residual_model(&k, &s.bank, &s.plant, s.confidence)?;
    let n_l = s.bank.n_l();
    let mut arms = Vec::new();
    if s.mab {
        for mask in 1u32..1 << n_l {
            let nu = crate::fusion_mab::subset_cost(mask, &s.bank.var_l);
            let rm = build_residual_model_with(&k, &s.bank, &s.plant, s.confidence, nu)?;
            arms.push(build_posterior_model(
                &rm,
                &s.bank.var_l,
                &subset_weights(mask, &s.bank.var_l),
            )?);
        }
    }
    Ok(Models { residual, arms })
}

/// Leader-sensor injection as a constant offset, for expected-cost analysis.
fn leader_offsets(plan: &AttackPlan, n_l: usize, t: f64, v_l_nominal: f64) -> Vec<f64> {
    let mut a = vec![0.0; n_l];
    for inj in plan
        .injections
        .iter()
        .filter(|i| i.kind == SensorKind::L && i.is_active(t))
    {
        a[inj.index] = match inj.mode {
            InjectionMode::AdditiveConstant => inj.magnitude,
            InjectionMode::MultiplicativeFactor => (inj.magnitude - 1.0) * v_l_nominal,
        };
    }
    a
}

struct Scorer {
    cache: BTreeMap<Vec<usize>, (u32, Vec<f64>)>,
    cum: f64,
    bound: f64,
}

impl Scorer {
    fn best_and_expected(
        &mut self,
        s: &Scenario,
        b: &BanditState,
        models: &[PosteriorModel],
        t: f64,
    ) -> Result<(u32, Vec<f64>)> {
        let attacked = s.attack.attacked(SensorKind::L, t);
        if let Some(v) = self.cache.get(&attacked) {
            return Ok(v.clone());
        }
        let a = leader_offsets(&s.attack, b.n_l, t, s.leader.nominal_speed());
        let expected = expected_costs(b, models, &a)?;
        let best = best_arm(b, &attacked, &expected);
        self.cache.insert(attacked, (best, expected.clone()));
        Ok((best, expected))
    }
}

/// Runs a scenario to completion. Deterministic for a fixed seed.
pub fn run_scenario(s: &Scenario) -> Result<RunTrace> {
    s.validate()?;
    let models = build_models(s)?;
    run_with_models(s, &models)
}

/// [`run_scenario`] reusing prebuilt models (for batches over seeds).
pub fn run_with_models(s: &Scenario, models: &Models) -> Result<RunTrace> {
    let p = &s.plant;
    let bank = &s.bank;
    let n_prior = bank.n_prior();
    let n_l = bank.n_l();
    let steps = s.steps();
    let w = process_noise_cov(bank, p, &s.filter);
    let mut rng = RngStream::new(s.seed, 0);

    let mut bandit = if s.mab {
        Some(BanditState::new(&bank.var_l, s.cost_scale)?)
    } else {
        None
    };
    let mut scorer = Scorer {
        cache: BTreeMap::new(),
        cum: 0.0,
        bound: 0.0,
    };
    let full_l = vec![true; n_l];

    let mut x = s.initial;
    let mut rows: Vec<TraceRow> = Vec::with_capacity(steps);
    let mut mab_rows = Vec::new();
    let mut regret = RegretTrace::default();
    let mut quarantine = vec![0usize; n_prior];
    let mut flag_counts = vec![0usize; n_prior];
    let mut degraded = 0usize;
    let mut reacquisitions = 0usize;
    // consecutive fully excluded steps for F and D
    let mut locked = [0usize; 2];
    let mut collisions = 0usize;
    let mut first_collision = None;
    let mut min_spacing = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    let attack_start = s.attack.first_start();
    let mut prior_latency = None;
    let mut mab_latency = None;
    let mut clean_streak = 0usize;

    let mut est: Option<EstimatorState> = None;
    let mut prev_u = 0.0;
    let mut prev_vl_hat = 0.0;
    // (arm, attacked leader readings, v̂_f, d̂) of the previous step
    let mut pending: Option<(u32, Vec<f64>, f64, f64)> = None;

    for k in 0..steps {
        let t = k as f64 * p.t;
        let v_l = s.leader.speed(t);
        let truth = Truth {
            v_f: x.v_f,
            d: x.d,
            v_l,
        };
        let clean = sample_readings(t, truth, bank, &mut rng);
        let frame: ReadingFrame = apply_attack(&clean, &s.attack, t);
        let z = frame.prior_readings();

        let mut flags = 0u64;
        let state = match est.take() {
            None => EstimatorState::initialize(&frame.z_f, &frame.z_d, bank)?,
            Some(prev) => {
                let pred = predict(&prev, prev_u, prev_vl_hat, &w, bank, p);
                let mut mask = vec![true; n_prior];
                if s.prior_filter {
                    let pass = detect(&z, &pred.z_prior, &models.residual);
                    for i in 0..n_prior {
                        if !pass[i] {
                            flag_counts[i] += 1;
                            quarantine[i] = s.quarantine_steps + 1;
                        }
                        if quarantine[i] > 0 {
                            mask[i] = false;
                            flags |= 1 << i;
                            quarantine[i] -= 1;
                        }
                    }
                    if prior_latency.is_none() {
                        if let Some(start) = attack_start {
                            let hit = (0..n_prior).any(|i| {
                                !pass[i] && {
                                    let (kind, idx) = if i < bank.n_f() {
                                        (SensorKind::F, i)
                                    } else {
                                        (SensorKind::D, i - bank.n_f())
                                    };
                                    s.attack.attacked(kind, t).contains(&idx)
                                }
                            });
                            if hit && t >= start {
                                prior_latency = Some(t - start);
                            }
                        }
                    }
                }
                let (mut next, fell_back) = update_or_predict(&pred, &z, &mask, bank)?;
                if fell_back {
                    degraded += 1;
                }
                let nf = bank.n_f();
                for (c, range) in [(0, 0..nf), (1, nf..n_prior)].into_iter() {
                    if mask[range.clone()].iter().any(|m| *m) {
                        locked[c] = 0;
                        continue;
                    }
                    locked[c] += 1;
                    if s.reacquire_steps > 0 && locked[c] >= s.reacquire_steps {
                        let vars = if c == 0 { &bank.var_f } else { &bank.var_d };
                        let e = consensus_ls(&z[range.clone()], vars, REACQUIRE_GATE)?;
                        log::debug!("t={t}: re-acquiring state {c} at {}", e.value);
                        next.x[c] = e.value;
                        next.p[(c, c)] = e.variance;
                        next.p[(c, 1 - c)] = 0.0;
                        next.p[(1 - c, c)] = 0.0;
                        for q in &mut quarantine[range] {
                            *q = 0;
                        }
                        locked[c] = 0;
                        reacquisitions += 1;
                    }
                }
                if let (Some((arm, zl_prev, vf_prev, d_prev)), Some(b)) =
                    (pending.take(), bandit.as_mut())
                {
                    let (_, mu) = posterior_residual(next.d(), d_prev, vf_prev, &zl_prev, p.t);
                    let model = &models.arms[arm as usize - 1];
                    let (d_sm, _) = mahalanobis_sd(&mu, arm, model)?;
                    let t_play = t - p.t;
                    let (best, expected) = scorer.best_and_expected(s, b, &models.arms, t_play)?;
                    let xi = b.cost(arm, d_sm);
                    let xi_star = if arm == best {
                        xi
                    } else {
                        b.cost(best, mahalanobis_sd(&mu, best, model)?.0)
                    };
                    update_arm(b, arm, d_sm);
                    scorer.cum += xi - xi_star;
                    scorer.bound = scorer.bound.max(regret_bound(b.t, &expected, best));
                    let row = &mut rows[k - 1];
                    row.sm = Some(d_sm);
                    row.xi = Some(xi);
                    row.xi_star = Some(xi_star);
                    row.cum_cyber_regret = scorer.cum;
                    row.bound = Some(scorer.bound);
                    mab_rows.push(MabRow {
                        t: t_play,
                        arm,
                        d: d_sm,
                        xi,
                        xi_star,
                        cum_regret: scorer.cum,
                        bound: scorer.bound,
                    });
                    if let Some(start) = attack_start {
                        let bad = s.attack.attacked(SensorKind::L, t_play);
                        if t_play >= start && !bad.is_empty() && mab_latency.is_none() {
                            if bad.iter().all(|i| arm >> i & 1 == 0) {
                                clean_streak += 1;
                                if clean_streak == 10 {
                                    mab_latency = Some(t_play - 9.0 * p.t - start);
                                }
                            } else {
                                clean_streak = 0;
                            }
                        }
                    }
                }
                next
            }
        };

        let (arm, vl_hat) = match bandit.as_ref() {
            Some(b) => {
                let arm = ucb_select(b);
                let mask: Vec<bool> = (0..n_l).map(|i| arm >> i & 1 == 1).collect();
                (Some(arm), static_ls(&frame.z_l, &bank.var_l, &mask)?.value)
            }
            None => (None, static_ls(&frame.z_l, &bank.var_l, &full_l)?.value),
        };
        if let Some(a) = arm {
            pending = Some((a, frame.z_l.clone(), state.v_f(), state.d()));
        }

        let u = match s.controller {
            ControllerKind::Optimal => {
                optimal_controller(state.v_f(), state.d(), vl_hat, prev_u, p).u
            }
            ControllerKind::Gipps => gipps_controller(state.v_f(), state.d(), vl_hat, &s.gipps, p),
            ControllerKind::Idm => idm_controller(state.v_f(), state.d(), vl_hat, &s.idm, p),
        };
        let stepped = step_plant(x, u, v_l, p);
        let mut next = stepped.state;
        if stepped.collision {
            collisions += 1;
            first_collision.get_or_insert(t + p.t);
            next.d = next.d.max(0.0);
        }
        if next.v_f < 0.0 {
            next.v_f = 0.0;
        }
        let r = regret.record(next, p.b_f);
        min_spacing = min_spacing.min(next.d);
        min_margin = min_margin.min(next.d - optimal_spacing(next.v_f, p.b_f));
        rows.push(TraceRow {
            t,
            v_f: x.v_f,
            d: x.d,
            v_l,
            v_f_hat: state.v_f(),
            d_hat: state.d(),
            v_l_hat: vl_hat,
            u,
            regret: r,
            cum_regret: regret.total(),
            gap: *regret.gap.last().unwrap_or(&0.0),
            flags,
            arm,
            sm: None,
            xi: None,
            xi_star: None,
            cum_cyber_regret: scorer.cum,
            bound: None,
            collision: stepped.collision,
        });
        x = next;
        prev_u = u;
        prev_vl_hat = vl_hat;
        est = Some(state);
    }

    let (modal_arm, hist) = match bandit.as_ref() {
        Some(b) => (
            Some(mask_string(b.modal_arm(), n_l)),
            Some(
                b.arms
                    .iter()
                    .map(|a| (mask_string(a.mask, n_l), a.plays))
                    .collect(),
            ),
        ),
        None => (None, None),
    };
    let summary = RunSummary {
        name: s.name.clone(),
        seed: s.seed,
        steps,
        controller: s.controller,
        final_cum_regret: regret.total(),
        collisions,
        first_collision_s: first_collision,
        min_spacing_m: min_spacing,
        min_spacing_margin_m: min_margin,
        degraded_updates: degraded,
        reacquisitions,
        prior_flag_rate: flag_counts
            .iter()
            .map(|c| *c as f64 / steps.saturating_sub(1).max(1) as f64)
            .collect(),
        prior_detection_latency_s: prior_latency,
        mab_detection_latency_s: mab_latency,
        final_cum_cyber_regret: bandit.as_ref().map(|_| scorer.cum),
        modal_arm,
        arm_histogram: hist,
    };
    Ok(RunTrace {
        n_prior,
        n_l,
        rows,
        mab: mab_rows,
        summary,
    })
}
