//! Leader-speed sensor fusion: a-posteriori residuals, squared Mahalanobis
//! scoring and UCB selection over sensor subsets.

use serde::{Deserialize, Serialize};

use crate::detection_prior::ResidualModel;
use crate::error::{Error, Result};
use crate::mathkit::Mat;

/// Largest leader-sensor bank the bandit accepts.
pub const MAX_L_SENSORS: usize = 12;

/// Sensors in a subset bitmask (bit `i` is sensor `i`).
pub fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// Bitmask written most-significant sensor first, e.g. sensors {1,2,4} of 4 → `1011`.
pub fn mask_string(mask: u32, n_l: usize) -> String {
    (0..n_l)
        .rev()
        .map(|i| if mask >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// `v_l⁺ = (d̂(t+1) − d̂(t))/T + v̂_f(t)` and residuals `v_l⁺ − z_{l,i}`.
pub fn posterior_residual(d_next: f64, d: f64, v_f: f64, z_l: &[f64], t: f64) -> (f64, Vec<f64>) {
    let v_plus = (d_next - d) / t + v_f;
    (v_plus, z_l.iter().map(|z| v_plus - z).collect())
}

/// `1 / Σ_{i∈𝓛} 1/σ²_i`.
pub fn subset_cost(mask: u32, variances: &[f64]) -> f64 {
    1.0 / members(mask)
        .iter()
        .map(|i| 1.0 / variances[*i])
        .sum::<f64>()
}

/// LS weights of a subset over the whole bank (zero outside it).
pub fn subset_weights(mask: u32, variances: &[f64]) -> Vec<f64> {
    let nu = subset_cost(mask, variances);
    (0..variances.len())
        .map(|i| {
            if mask >> i & 1 == 1 {
                nu / variances[i]
            } else {
                0.0
            }
        })
        .collect()
}

/// Covariance of the a-posteriori residual when `v̂_l` uses `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorModel {
    pub c_mul: Mat,
    pub upsilon: Mat,
    /// `[0 1] K̃`.
    pub j: Mat,
    pub s1: f64,
    pub s2: f64,
    pub weights: Vec<f64>,
    /// Inverse of every principal submatrix, indexed by subset bitmask.
    inverses: Vec<Option<Mat>>,
}

/// Builds the model from a prior residual model whose `C_r` was computed
/// with the matching leader-speed variance.
pub fn build_posterior_model(
    rm: &ResidualModel,
    var_l: &[f64],
    weights: &[f64],
) -> Result<PosteriorModel> {
    let n_l = var_l.len();
    if n_l == 0 || n_l > MAX_L_SENSORS {
        return Err(Error::Model(format!(
            "{n_l} leader sensors; between 1 and {MAX_L_SENSORS} supported"
        )));
    }
    if weights.len() != n_l {
        return Err(Error::Dimension(format!(
            "{} weights for {n_l} sensors",
            weights.len()
        )));
    }
    let t = rm.t;
    let sel = Mat::row(&[0.0, 1.0]);
    let j = &sel * &rm.k;
    let s1 = (&(&j * &rm.h) * &rm.f)[(0, 0)];
    let s2 = (&(&sel * &rm.q) * &rm.f)[(0, 0)];
    let h_l = Mat::col(&vec![1.0; n_l]);
    let upsilon = &(&h_l * &Mat::row(weights)).scale(s2 / t) - &Mat::identity(n_l);
    let r_l = Mat::diag(var_l);
    let inner = &(&(&(&rm.h * &rm.a) * &rm.c_r) * &(&rm.h * &rm.a).transpose()) + &rm.r;
    let jj = (&(&j * &inner) * &j.transpose())[(0, 0)] / (t * t);
    let c_mul = (&(&(&upsilon * &r_l) * &upsilon.transpose())
        + &(&h_l * &h_l.transpose()).scale(jj))
        .symmetrized();
    let mut inverses = vec![None; 1 << n_l];
    for (mask, slot) in inverses.iter_mut().enumerate().skip(1) {
        let idx = members(mask as u32);
        let sub = c_mul.select(&idx, &idx);
        let inv = sub
            .inverse()
            .map_err(|e| Error::Model(format!("subset {}: {e}", mask_string(mask as u32, n_l))))?;
        *slot = Some(inv);
    }
    Ok(PosteriorModel {
        c_mul,
        upsilon,
        j,
        s1,
        s2,
        weights: weights.to_vec(),
        inverses,
    })
}

impl PosteriorModel {
    pub fn n_l(&self) -> usize {
        self.c_mul.rows()
    }

    pub fn subset_inverse(&self, mask: u32) -> Option<&Mat> {
        self.inverses.get(mask as usize).and_then(|m| m.as_ref())
    }

    pub fn subset_cov(&self, mask: u32) -> Mat {
        let idx = members(mask);
        self.c_mul.select(&idx, &idx)
    }

    /// Mean shift of the residual under a constant additive `a_l`
    /// when the attacked reading also feeds `v̂_l` on the same step.
    pub fn attack_shift(&self, a_l: &[f64]) -> Vec<f64> {
        self.upsilon.mul_vec(a_l)
    }
}

/// `D_𝓛 = μᵀ C(𝓛)⁻¹ μ` over the members of `mask`, and `D_𝓛 / |𝓛|`.
pub fn mahalanobis_sd(mu: &[f64], mask: u32, model: &PosteriorModel) -> Result<(f64, f64)> {
    let inv = model.subset_inverse(mask).ok_or_else(|| {
        Error::EmptyMask(format!("subset bitmask {mask} is empty or out of range"))
    })?;
    let sub: Vec<f64> = members(mask).iter().map(|i| mu[*i]).collect();
    let d = inv.quad_form(&sub);
    Ok((d, d / sub.len() as f64))
}

/// How observed costs enter the UCB exploitation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostScale {
    /// `ν_𝓛 · mean(D)/|𝓛|` as is.
    Raw,
    /// Costs divided by the full bank's `ν`, so the best clean arm costs about 1.
    #[default]
    RelativeToFullSet,
    /// Running min–max normalisation of observed costs to `[0, 1]`.
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub mask: u32,
    pub size: usize,
    pub nu: f64,
    pub plays: u64,
    pub sum_d: f64,
}

impl Arm {
    pub fn mean_d(&self) -> f64 {
        if self.plays == 0 {
            0.0
        } else {
            self.sum_d / self.plays as f64
        }
    }
}

/// Per-arm statistics over all non-empty leader-sensor subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    pub n_l: usize,
    pub arms: Vec<Arm>,
    pub t: u64,
    pub scale: CostScale,
    pub nu_full: f64,
    cost_min: f64,
    cost_max: f64,
}

impl BanditState {
    pub fn new(var_l: &[f64], scale: CostScale) -> Result<Self> {
        let n_l = var_l.len();
        if n_l == 0 || n_l > MAX_L_SENSORS {
            return Err(Error::config(
                "sensors.l",
                format!("{n_l} leader sensors; the bandit handles 1 to {MAX_L_SENSORS}"),
            ));
        }
        let arms = (1u32..1 << n_l)
            .map(|mask| Arm {
                mask,
                size: members(mask).len(),
                nu: subset_cost(mask, var_l),
                plays: 0,
                sum_d: 0.0,
            })
            .collect();
        Ok(Self {
            n_l,
            arms,
            t: 0,
            scale,
            nu_full: subset_cost((1 << n_l) - 1, var_l),
            cost_min: f64::INFINITY,
            cost_max: f64::NEG_INFINITY,
        })
    }

    pub fn arm(&self, mask: u32) -> &Arm {
        &self.arms[mask as usize - 1]
    }

    /// Divisor turning raw costs into reported costs.
    pub fn cost_unit(&self) -> f64 {
        match self.scale {
            CostScale::RelativeToFullSet => self.nu_full,
            CostScale::Raw | CostScale::MinMax => 1.0,
        }
    }

    /// `ν_𝓛 D / |𝓛|` in reported units.
    pub fn cost(&self, mask: u32, d: f64) -> f64 {
        let a = self.arm(mask);
        a.nu * d / a.size as f64 / self.cost_unit()
    }

    /// Exploitation term (negated mean cost) of an arm that has been played.
    pub fn exploitation(&self, arm: &Arm) -> f64 {
        let mean_cost = arm.nu * arm.mean_d() / arm.size as f64;
        match self.scale {
            CostScale::Raw => -mean_cost,
            CostScale::RelativeToFullSet => -mean_cost / self.nu_full,
            CostScale::MinMax => {
                let span = self.cost_max - self.cost_min;
                if span > 0.0 && span.is_finite() {
                    -(mean_cost - self.cost_min) / span
                } else {
                    0.0
                }
            }
        }
    }

    pub fn ucb_index(&self, arm: &Arm) -> f64 {
        let t = self.t.max(1) as f64;
        self.exploitation(arm) + (2.0 * t.ln() / arm.plays as f64).sqrt()
    }

    /// Modal arm by play count (ties to the lower bitmask).
    pub fn modal_arm(&self) -> u32 {
        self.arms
            .iter()
            .fold(
                &self.arms[0],
                |best, a| if a.plays > best.plays { a } else { best },
            )
            .mask
    }
}

fn lexicographic(a: u32, b: u32) -> std::cmp::Ordering {
    members(a).cmp(&members(b))
}

/// Next arm: unplayed arms first, then the UCB argmax. Ties go to the lower
/// `ν`, then to the lexicographically smaller member list.
pub fn ucb_select(b: &BanditState) -> u32 {
    if let Some(a) = b.arms.iter().find(|a| a.plays == 0) {
        return a.mask;
    }
    let mut best = &b.arms[0];
    let mut best_idx = b.ucb_index(best);
    for a in &b.arms[1..] {
        let idx = b.ucb_index(a);
        let better = idx > best_idx
            || (idx == best_idx
                && (a.nu < best.nu
                    || (a.nu == best.nu && lexicographic(a.mask, best.mask).is_lt())));
        if better {
            best = a;
            best_idx = idx;
        }
    }
    best.mask
}

/// Records one observation for the arm just played.
pub fn update_arm(b: &mut BanditState, mask: u32, d: f64) {
    let raw = {
        let a = b.arm(mask);
        a.nu * d / a.size as f64
    };
    b.cost_min = b.cost_min.min(raw);
    b.cost_max = b.cost_max.max(raw);
    let a = &mut b.arms[mask as usize - 1];
    a.plays += 1;
    a.sum_d += d;
    b.t += 1;
}

/// One scored play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Play {
    pub t: f64,
    pub arm: u32,
    pub d: f64,
    /// SM of the oracle-best subset on the same residual vector.
    pub d_star: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CyberRegretTrace {
    pub t: Vec<f64>,
    pub arm: Vec<u32>,
    pub d: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_star: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub bound: Vec<f64>,
}

impl CyberRegretTrace {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Expected reported cost of every arm (indexed by `mask − 1`) under a
/// constant additive leader-sensor attack `a_l`, using each arm's model.
pub fn expected_costs(b: &BanditState, models: &[PosteriorModel], a_l: &[f64]) -> Result<Vec<f64>> {
    b.arms
        .iter()
        .zip(models)
        .map(|(arm, m)| {
            let shift = m.attack_shift(a_l);
            let sub: Vec<f64> = members(arm.mask).iter().map(|i| shift[*i]).collect();
            let inv = m
                .subset_inverse(arm.mask)
                .ok_or_else(|| Error::Model("missing subset inverse".into()))?;
            let e_d = arm.size as f64 + inv.quad_form(&sub);
            Ok(arm.nu * e_d / arm.size as f64 / b.cost_unit())
        })
        .collect()
}

/// Lowest-`ν` subset free of attacked sensors; with every sensor attacked,
/// the arm of lowest expected cost.
pub fn best_arm(b: &BanditState, attacked: &[usize], expected: &[f64]) -> u32 {
    let bad: u32 = attacked.iter().fold(0, |m, i| m | 1 << i);
    let clean = ((1u32 << b.n_l) - 1) & !bad;
    if clean != 0 {
        return clean;
    }
    b.arms
        .iter()
        .zip(expected)
        .fold((0u32, f64::INFINITY), |acc, (a, e)| {
            if *e < acc.1 {
                (a.mask, *e)
            } else {
                acc
            }
        })
        .0
}

/// `8 Σ ln(k)/Δ + (1 + π²/3) Σ Δ` over arms with positive gap.
pub fn regret_bound(plays: u64, expected: &[f64], best: u32) -> f64 {
    let e_star = expected[best as usize - 1];
    let gaps: Vec<f64> = expected
        .iter()
        .map(|e| e - e_star)
        .filter(|g| *g > 0.0)
        .collect();
    let ln = (plays.max(1) as f64).ln();
    8.0 * gaps.iter().map(|g| ln / g).sum::<f64>()
        + (1.0 + std::f64::consts::PI.powi(2) / 3.0) * gaps.iter().sum::<f64>()
}

/// Realised cyber regret of a play sequence against the oracle-best arm.
pub fn cyber_regret(
    plays: &[Play],
    b: &BanditState,
    best: u32,
    expected: &[f64],
) -> CyberRegretTrace {
    let mut tr = CyberRegretTrace::default();
    let mut total = 0.0;
    for (k, p) in plays.iter().enumerate() {
        let xi = b.cost(p.arm, p.d);
        let xi_star = if p.arm == best {
            xi
        } else {
            b.cost(best, p.d_star)
        };
        total += xi - xi_star;
        tr.t.push(p.t);
        tr.arm.push(p.arm);
        tr.d.push(p.d);
        tr.xi.push(xi);
        tr.xi_star.push(xi_star);
        tr.cumulative.push(total);
        tr.bound.push(regret_bound(k as u64 + 1, expected, best));
    }
    tr
}
