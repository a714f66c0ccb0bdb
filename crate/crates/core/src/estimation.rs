//! Static least-squares fusion and the masked Kalman filter over `(v_f, d)`.

use serde::{Deserialize, Serialize};

use crate::dynamics::PlantParams;
use crate::error::{Error, Result};
use crate::mathkit::{fixed_point_solve, Mat, FIXED_POINT_MAX_ITER};
use crate::sensing::{SensorBank, SensorKind};

/// Inverse-variance weighted estimate over a subset of sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub value: f64,
    /// One weight per sensor, zero outside the mask.
    pub weights: Vec<f64>,
    pub variance: f64,
}

/// `w_i = (1/σ²_i) / Σ_{j∈mask} 1/σ²_j`, value `Σ w_i z_i`, variance `1/Σ 1/σ²_j`.
pub fn static_ls(readings: &[f64], variances: &[f64], mask: &[bool]) -> Result<LsEstimate> {
    if readings.len() != variances.len() || mask.len() != readings.len() {
        return Err(Error::Dimension(format!(
            "static_ls: {} readings, {} variances, mask of {}",
            readings.len(),
            variances.len(),
            mask.len()
        )));
    }
    let info: f64 = variances
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| 1.0 / v)
        .sum();
    if !mask.iter().any(|m| *m) {
        return Err(Error::EmptyMask(
            "static_ls needs at least one sensor".into(),
        ));
    }
    let weights: Vec<f64> = variances
        .iter()
        .zip(mask)
        .map(|(v, m)| if *m { (1.0 / v) / info } else { 0.0 })
        .collect();
    let value = weights.iter().zip(readings).map(|(w, z)| w * z).sum();
    Ok(LsEstimate {
        value,
        weights,
        variance: 1.0 / info,
    })
}

/// Variance of the full-bank LS estimate of one sensor kind.
pub fn ls_variance(variances: &[f64]) -> f64 {
    1.0 / variances.iter().map(|v| 1.0 / v).sum::<f64>()
}

/// Static LS over the readings that agree with the median: sensor `i` is
/// kept when `|z_i − median| ≤ gate · √(σ²_i + σ²_max)`.
pub fn consensus_ls(readings: &[f64], variances: &[f64], gate: f64) -> Result<LsEstimate> {
    let mut sorted = readings.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return Err(Error::EmptyMask("no readings".into()));
    }
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let v_max = variances.iter().copied().fold(0.0, f64::max);
    let mask: Vec<bool> = readings
        .iter()
        .zip(variances)
        .map(|(z, v)| (z - median).abs() <= gate * (v + v_max).sqrt())
        .collect();
    if mask.iter().any(|m| *m) {
        static_ls(readings, variances, &mask)
    } else {
        // no two readings agree; the sensor nearest the median wins
        let best = (0..n)
            .min_by(|a, b| {
                (readings[*a] - median)
                    .abs()
                    .total_cmp(&(readings[*b] - median).abs())
            })
            .unwrap_or(0);
        let mask: Vec<bool> = (0..n).map(|i| i == best).collect();
        static_ls(readings, variances, &mask)
    }
}

/// Filter tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Add `W = F σ²_l Fᵀ + B q_u Bᵀ` to the predicted covariance. Without it
    /// the gain decays to zero and the filter stops listening to its sensors.
    pub process_noise: bool,
    /// `q_u` in (m/s²)², the acceleration uncertainty floor on `v_f`.
    pub accel_noise_var: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            process_noise: true,
            accel_noise_var: 0.01,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.accel_noise_var >= 0.0) || !self.accel_noise_var.is_finite() {
            return Err(Error::config(
                "filter.accel_noise_var",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// Stacked observation matrix `H = blockdiag(h_f, h_d)`, `(n_f+n_d) × 2`.
pub fn observation_matrix(bank: &SensorBank) -> Mat {
    let n = bank.n_prior();
    let mut h = Mat::zeros(n, 2);
    for i in 0..n {
        let col = if bank.prior_kind(i) == SensorKind::F {
            0
        } else {
            1
        };
        h[(i, col)] = 1.0;
    }
    h
}

/// `R = diag(σ²_f, σ²_d)`.
pub fn noise_matrix(bank: &SensorBank) -> Mat {
    Mat::diag(&bank.prior_variances())
}

/// Process noise added in the covariance prediction.
pub fn process_noise_cov(bank: &SensorBank, p: &PlantParams, cfg: &FilterConfig) -> Mat {
    if !cfg.process_noise {
        return Mat::zeros(2, 2);
    }
    let f = p.f();
    let b = p.b();
    let var_l = ls_variance(&bank.var_l);
    &(&f * &f.transpose()).scale(var_l) + &(&b * &b.transpose()).scale(cfg.accel_noise_var)
}

/// Filter state after an update.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// `(v̂_f, d̂)`.
    pub x: [f64; 2],
    pub p: Mat,
    /// Gain of the last update, `2 × (n_f+n_d)`, zero columns for excluded sensors.
    pub k: Mat,
    pub x_prior: [f64; 2],
    /// `H x̂⁻` of the last update.
    pub z_prior: Vec<f64>,
}

impl EstimatorState {
    /// Static LS on the first frame; `P(0) = diag(var(v̂_f), var(d̂))`.
    pub fn initialize(z_f: &[f64], z_d: &[f64], bank: &SensorBank) -> Result<Self> {
        let f = static_ls(z_f, &bank.var_f, &vec![true; z_f.len()])?;
        let d = static_ls(z_d, &bank.var_d, &vec![true; z_d.len()])?;
        let x = [f.value, d.value];
        let z_prior = observation_matrix(bank).mul_vec(&x);
        Ok(Self {
            x,
            p: Mat::diag(&[f.variance, d.variance]),
            k: Mat::zeros(2, bank.n_prior()),
            x_prior: x,
            z_prior,
        })
    }

    pub fn v_f(&self) -> f64 {
        self.x[0]
    }

    pub fn d(&self) -> f64 {
        self.x[1]
    }
}

/// Output of the time update, what the detector checks readings against.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub x_prior: [f64; 2],
    pub p_prior: Mat,
    pub z_prior: Vec<f64>,
}

/// `x̂⁻ = A x̂ + B u + F v̂_l`, `P⁻ = A P Aᵀ + W`.
pub fn predict(
    est: &EstimatorState,
    u_f: f64,
    v_l_hat: f64,
    w: &Mat,
    bank: &SensorBank,
    p: &PlantParams,
) -> Prediction {
    let a = p.a();
    let ax = a.mul_vec(&est.x);
    let x_prior = [ax[0] + p.t * u_f, ax[1] + p.t * v_l_hat];
    let p_prior = &(&(&a * &est.p) * &a.transpose()) + w;
    let z_prior = observation_matrix(bank).mul_vec(&x_prior);
    Prediction {
        x_prior,
        p_prior,
        z_prior,
    }
}

/// Measurement update over the masked rows of `H`, `R`, `z`.
///
/// Fails with [`Error::DegradedUpdate`] when every sensor of one kind is
/// excluded; [`update_or_predict`] applies the fallback.
pub fn update(
    pred: &Prediction,
    z: &[f64],
    mask: &[bool],
    bank: &SensorBank,
) -> Result<EstimatorState> {
    let n = bank.n_prior();
    if z.len() != n || mask.len() != n {
        return Err(Error::Dimension(format!(
            "update: {n} sensors, {} readings, mask of {}",
            z.len(),
            mask.len()
        )));
    }
    for (kind, range) in [
        (SensorKind::F, 0..bank.n_f()),
        (SensorKind::D, bank.n_f()..n),
    ] {
        if !mask[range].iter().any(|m| *m) {
            return Err(Error::DegradedUpdate {
                kind: kind.letter(),
            });
        }
    }
    let rows: Vec<usize> = (0..n).filter(|i| mask[*i]).collect();
    let h_full = observation_matrix(bank);
    let h = h_full.select_rows(&rows);
    let r = noise_matrix(bank).select(&rows, &rows);
    let ht = h.transpose();
    let s = &(&(&h * &pred.p_prior) * &ht) + &r;
    let k = &(&pred.p_prior * &ht) * &s.inverse()?;
    let innov: Vec<f64> = rows.iter().map(|&i| z[i] - pred.z_prior[i]).collect();
    let dx = k.mul_vec(&innov);
    let x = [pred.x_prior[0] + dx[0], pred.x_prior[1] + dx[1]];
    let ikh = &Mat::identity(2) - &(&k * &h);
    let p = (&(&(&ikh * &pred.p_prior) * &ikh.transpose()) + &(&(&k * &r) * &k.transpose()))
        .symmetrized();
    let mut k_full = Mat::zeros(2, n);
    for (c, &i) in rows.iter().enumerate() {
        k_full[(0, i)] = k[(0, c)];
        k_full[(1, i)] = k[(1, c)];
    }
    Ok(EstimatorState {
        x,
        p,
        k: k_full,
        x_prior: pred.x_prior,
        z_prior: pred.z_prior.clone(),
    })
}

/// [`update`], falling back to `x̂ = x̂⁻`, `P = P⁻` on a degraded mask.
/// The flag reports whether the fallback was taken.
pub fn update_or_predict(
    pred: &Prediction,
    z: &[f64],
    mask: &[bool],
    bank: &SensorBank,
) -> Result<(EstimatorState, bool)> {
    match update(pred, z, mask, bank) {
        Ok(s) => Ok((s, false)),
        Err(Error::DegradedUpdate { kind }) => {
            log::debug!("degraded update ({kind}), using prediction only");
            Ok((
                EstimatorState {
                    x: pred.x_prior,
                    p: pred.p_prior.clone(),
                    k: Mat::zeros(2, bank.n_prior()),
                    x_prior: pred.x_prior,
                    z_prior: pred.z_prior.clone(),
                },
                true,
            ))
        }
        Err(e) => Err(e),
    }
}

/// One full filter step: predict then masked update.
#[allow(clippy::too_many_arguments)]
pub fn kalman_step(
    est: &EstimatorState,
    u_f: f64,
    v_l_hat: f64,
    z: &[f64],
    mask: &[bool],
    bank: &SensorBank,
    p: &PlantParams,
    cfg: &FilterConfig,
) -> Result<EstimatorState> {
    let w = process_noise_cov(bank, p, cfg);
    update(&predict(est, u_f, v_l_hat, &w, bank, p), z, mask, bank)
}

/// One covariance recursion over the full bank: returns `(K, P)`.
fn riccati_step(pm: &Mat, a: &Mat, w: &Mat, h: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
    let p_prior = &(&(a * pm) * &a.transpose()) + w;
    let ht = h.transpose();
    let s = &(&(h * &p_prior) * &ht) + r;
    let k = &(&p_prior * &ht) * &s.inverse()?;
    let ikh = &Mat::identity(2) - &(&k * h);
    let p =
        (&(&(&ikh * &p_prior) * &ikh.transpose()) + &(&(&k * r) * &k.transpose())).symmetrized();
    Ok((k, p))
}

/// Limits `(K̃, P̃)` of the full-bank covariance recursion.
pub fn steady_state_gain(
    bank: &SensorBank,
    p: &PlantParams,
    cfg: &FilterConfig,
) -> Result<(Mat, Mat)> {
    steady_state_gain_from(
        bank,
        p,
        cfg,
        Mat::diag(&[ls_variance(&bank.var_f), ls_variance(&bank.var_d)]),
    )
}

/// [`steady_state_gain`] started from an arbitrary PSD `P(0)`.
pub fn steady_state_gain_from(
    bank: &SensorBank,
    p: &PlantParams,
    cfg: &FilterConfig,
    p0: Mat,
) -> Result<(Mat, Mat)> {
    let a = p.a();
    let w = process_noise_cov(bank, p, cfg);
    let h = observation_matrix(bank);
    let r = noise_matrix(bank);
    let failure = std::cell::RefCell::new(None);
    let p_ss = fixed_point_solve(
        |pm| match riccati_step(pm, &a, &w, &h, &r) {
            Ok((_, next)) => next,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                pm.clone()
            }
        },
        p0,
        1e-12,
        FIXED_POINT_MAX_ITER,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let p_ss = p_ss?;
    let (k, p_next) = riccati_step(&p_ss, &a, &w, &h, &r)?;
    Ok((k, p_next))
}
