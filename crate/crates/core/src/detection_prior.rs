//! Residual thresholding for speed and spacing sensors, stealth analysis and
//! the attacker's stealth-constrained regret maximisation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::PlantParams;
use crate::error::{Error, Result};
use crate::estimation::{ls_variance, noise_matrix, observation_matrix};
use crate::mathkit::{
    fixed_point_solve, gaussian_cdf, normal_quantile, Mat, RngStream, FIXED_POINT_MAX_ITER,
};
use crate::sensing::SensorBank;

/// Analytic statistics of the a-priori residual `μ = z − H x̂⁻` under a
/// steady-state gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualModel {
    pub k: Mat,
    pub h: Mat,
    pub r: Mat,
    pub a: Mat,
    pub f: Mat,
    /// `I − K̃H`.
    pub q: Mat,
    pub qa: Mat,
    pub c_rho: Mat,
    pub c_r: Mat,
    pub c_mu: Mat,
    /// Maps a constant injection to the steady residual mean.
    pub psi: Mat,
    /// Maps a constant injection to the steady estimation bias `r̄`.
    pub bias_map: Mat,
    pub eta: Vec<f64>,
    pub confidence: f64,
    /// Variance of the leader-speed input driving the filter.
    pub var_l: f64,
    pub t: f64,
    pub b_f: f64,
}

/// Builds the model with the full-bank LS variance of `v̂_l` as the input noise.
pub fn build_residual_model(
    k: &Mat,
    bank: &SensorBank,
    p: &PlantParams,
    confidence: f64,
) -> Result<ResidualModel> {
    build_residual_model_with(k, bank, p, confidence, ls_variance(&bank.var_l))
}

/// [`build_residual_model`] with an explicit `σ²_l`.
pub fn build_residual_model_with(
    k: &Mat,
    bank: &SensorBank,
    p: &PlantParams,
    confidence: f64,
    var_l: f64,
) -> Result<ResidualModel> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::config(
            "confidence",
            format!("{confidence} outside (0, 1)"),
        ));
    }
    let h = observation_matrix(bank);
    let r = noise_matrix(bank);
    if k.rows() != 2 || k.cols() != h.rows() {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, bank has {} sensors",
            k.rows(),
            k.cols(),
            h.rows()
        )));
    }
    let a = p.a();
    let f = p.f();
    let i2 = Mat::identity(2);
    let q = &i2 - &(k * &h);
    let qa = &q * &a;
    let rho = qa.spectral_radius();
    if rho >= 1.0 {
        return Err(Error::Model(format!(
            "spectral radius of QA is {rho:.6}, filter is not contractive"
        )));
    }
    let qf = &q * &f;
    let c_rho =
        (&(&qf * &qf.transpose()).scale(var_l) + &(&(k * &r) * &k.transpose())).symmetrized();
    let c_r = fixed_point_solve(
        |c| (&(&(&qa * c) * &qa.transpose()) + &c_rho).symmetrized(),
        c_rho.clone(),
        1e-13,
        FIXED_POINT_MAX_ITER,
    )?;
    let ha = &h * &a;
    let prior_cov = &(&(&a * &c_r) * &a.transpose()) + &(&f * &f.transpose()).scale(var_l);
    let c_mu = (&(&(&h * &prior_cov) * &h.transpose()) + &r).symmetrized();
    let bias_map = -&(&(&i2 - &qa).inverse()? * k);
    let psi = &Mat::identity(h.rows()) + &(&ha * &bias_map);
    let z = normal_quantile(0.5 + confidence / 2.0)?;
    let eta = c_mu.diagonal().iter().map(|v| z * v.sqrt()).collect();
    Ok(ResidualModel {
        k: k.clone(),
        h,
        r,
        a,
        f,
        q,
        qa,
        c_rho,
        c_r,
        c_mu,
        psi,
        bias_map,
        eta,
        confidence,
        var_l,
        t: p.t,
        b_f: p.b_f,
    })
}

impl ResidualModel {
    pub fn n(&self) -> usize {
        self.eta.len()
    }

    /// `‖QA C_r (QA)ᵀ + C_ρ − C_r‖_F`.
    pub fn riccati_residual(&self) -> f64 {
        (&(&(&(&self.qa * &self.c_r) * &self.qa.transpose()) + &self.c_rho) - &self.c_r).frobenius()
    }

    /// Same model with thresholds for another confidence level.
    pub fn with_confidence(&self, confidence: f64) -> Result<Self> {
        let z = normal_quantile(0.5 + confidence / 2.0)?;
        let mut m = self.clone();
        m.confidence = confidence;
        m.eta = self.c_mu.diagonal().iter().map(|v| z * v.sqrt()).collect();
        Ok(m)
    }

    /// Steady residual mean `Ψ ã`.
    pub fn residual_mean(&self, a: &[f64]) -> Vec<f64> {
        self.psi.mul_vec(a)
    }
}

/// `true` where `|z_i − z⁻_i| < η_i`.
pub fn detect(z: &[f64], z_prior: &[f64], model: &ResidualModel) -> Vec<bool> {
    z.iter()
        .zip(z_prior)
        .zip(&model.eta)
        .map(|((z, zp), eta)| (z - zp).abs() < *eta)
        .collect()
}

/// `Pr(|μ_i| ≤ η_i)` with `μ_i ~ N(Ψ_i ã, C_μ(i,i))`.
pub fn stealth_probability(a: &[f64], model: &ResidualModel) -> Vec<f64> {
    let mean = model.residual_mean(a);
    mean.iter()
        .zip(&model.eta)
        .zip(model.c_mu.diagonal())
        .map(|((m, eta), var)| {
            let hi = gaussian_cdf(m + eta, 0.0, var).unwrap_or(f64::NAN);
            let lo = gaussian_cdf(m - eta, 0.0, var).unwrap_or(f64::NAN);
            (hi - lo).clamp(0.0, 1.0)
        })
        .collect()
}

/// `(r̄, θ̄, θ̄²)` for a constant injection `ã` at average spacing `d̃`.
pub fn steady_bias_and_regret(
    a: &[f64],
    model: &ResidualModel,
    d_avg: f64,
) -> Result<([f64; 2], f64, f64)> {
    if !(d_avg > 0.0) {
        return Err(Error::Domain(format!(
            "average spacing {d_avg} must be > 0"
        )));
    }
    if a.len() != model.n() {
        return Err(Error::Dimension(format!(
            "attack has {} entries, model {}",
            a.len(),
            model.n()
        )));
    }
    let rb = model.bias_map.mul_vec(a);
    let r_bar = [rb[0], rb[1]];
    let c = [(2.0 * d_avg / model.b_f).sqrt() + model.t, -1.0];
    let theta = r_bar[0] * r_bar[0] / (2.0 * model.b_f) + c[0] * r_bar[0] + c[1] * r_bar[1];
    Ok((r_bar, theta, theta * theta))
}

/// Outcome of the attack search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackAssessment {
    pub a: Vec<f64>,
    pub stealth_probs: Vec<f64>,
    pub r_bar: [f64; 2],
    pub theta_bar: f64,
    pub objective: f64,
}

/// Search settings for [`optimal_stealthy_attack`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSearch {
    /// Sensors the attacker may touch; `None` means all.
    pub attackable: Option<Vec<bool>>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AttackSearch {
    fn default() -> Self {
        Self {
            attackable: None,
            restarts: 32,
            seed: 0,
        }
    }
}

fn assess(a: Vec<f64>, model: &ResidualModel, d_avg: f64) -> Result<AttackAssessment> {
    let (r_bar, theta_bar, objective) = steady_bias_and_regret(&a, model, d_avg)?;
    Ok(AttackAssessment {
        stealth_probs: stealth_probability(&a, model),
        a,
        r_bar,
        theta_bar,
        objective,
    })
}

/// Largest `|Ψ_i ã|` keeping `p_i ≥ target` (bisection on the monotone
/// stealth curve). `None` when even a zero mean misses the target.
fn max_mean_offset(var: f64, eta: f64, target: f64) -> Option<f64> {
    let prob = |m: f64| {
        gaussian_cdf(m + eta, 0.0, var).unwrap_or(0.0)
            - gaussian_cdf(m - eta, 0.0, var).unwrap_or(0.0)
    };
    if prob(0.0) < target {
        return None;
    }
    let (mut lo, mut hi) = (0.0, eta + 10.0 * var.sqrt());
    while prob(hi) >= target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prob(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Numeric solution of `max θ̄²(ã)` subject to `p(ã) ≥ p_min`.
///
/// Multi-start compass search with step halving; every candidate is
/// checked against [`stealth_probability`]. Returns `ã = 0` when the
/// constraint excludes every attack.
pub fn optimal_stealthy_attack(
    p_min: &[f64],
    model: &ResidualModel,
    d_avg: f64,
    search: &AttackSearch,
) -> Result<AttackAssessment> {
    let n = model.n();
    if p_min.len() != n {
        return Err(Error::Dimension(format!(
            "{} stealth targets for {n} sensors",
            p_min.len()
        )));
    }
    if let Some(bad) = p_min.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::Domain(format!(
            "stealth target {bad} outside (0, 1)"
        )));
    }
    let free: Vec<usize> = match &search.attackable {
        Some(m) if m.len() == n => (0..n).filter(|i| m[*i]).collect(),
        Some(m) => {
            return Err(Error::Dimension(format!(
                "attackable mask of {} for {n} sensors",
                m.len()
            )))
        }
        None => (0..n).collect(),
    };
    let var = model.c_mu.diagonal();
    let limits: Option<Vec<f64>> = (0..n)
        .map(|i| max_mean_offset(var[i], model.eta[i], p_min[i]))
        .collect();
    let zero = vec![0.0; n];
    let (Some(limits), false) = (limits, free.is_empty()) else {
        return assess(zero, model, d_avg);
    };
    let feasible = |a: &[f64]| {
        stealth_probability(a, model)
            .iter()
            .zip(p_min)
            .all(|(p, t)| p >= t)
    };
    let objective = |a: &[f64]| {
        steady_bias_and_regret(a, model, d_avg)
            .map(|x| x.2)
            .unwrap_or(0.0)
    };
    let scale = limits.iter().copied().fold(0.0, f64::max).max(1e-12);

    // scale a random direction back inside the constraint set
    let into_feasible = |dir: &[f64]| -> Vec<f64> {
        let mean = model.residual_mean(dir);
        let s = mean
            .iter()
            .zip(&limits)
            .filter(|(m, _)| m.abs() > 0.0)
            .map(|(m, l)| l / m.abs())
            .fold(f64::INFINITY, f64::min);
        let s = if s.is_finite() { s } else { scale };
        dir.iter().map(|d| d * s).collect()
    };

    let climb = |start: Vec<f64>, rng: &mut RngStream| -> Vec<f64> {
        let mut x = start;
        let mut fx = objective(&x);
        let mut step = scale;
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for &i in &free {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[i] = sign;
                dirs.push(d);
            }
        }
        let base = dirs.len();
        while step > 1e-12 * scale {
            // a few random directions help along slanted faces
            dirs.truncate(base);
            if free.len() > 1 {
                for _ in 0..2 * free.len() {
                    let mut d = vec![0.0; n];
                    for &i in &free {
                        d[i] = rng.standard_normal();
                    }
                    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                    d.iter_mut().for_each(|v| *v /= norm);
                    dirs.push(d);
                }
            }
            let mut improved = false;
            for d in &dirs {
                let cand: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + step * b).collect();
                if feasible(&cand) {
                    let fc = objective(&cand);
                    if fc > fx {
                        x = cand;
                        fx = fc;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        x
    };

    let best = (0..search.restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::new(search.seed, 1000 + k as u64);
            let mut dir = vec![0.0; n];
            for &i in &free {
                dir[i] = rng.standard_normal();
            }
            let frac = rng.uniform(0.05, 1.0);
            let mut start: Vec<f64> = into_feasible(&dir).iter().map(|v| v * frac).collect();
            if !feasible(&start) {
                start = zero.clone();
            }
            let x = climb(start, &mut rng);
            let fx = objective(&x);
            (k, x, fx)
        })
        .reduce(
            || (usize::MAX, vec![0.0; n], f64::NEG_INFINITY),
            |a, b| {
                if b.2 > a.2 || (b.2 == a.2 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    let a = if best.2.is_finite() && best.2 > 0.0 {
        best.1
    } else {
        zero
    };
    assess(a, model, d_avg)
}
