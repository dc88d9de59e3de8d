//! Leave-one-out model comparison via Pareto-smoothed importance sampling.
//!
//! Importance ratios for dropping one observation are the inverse pointwise
//! likelihoods. The largest ratios are replaced by expected order statistics
//! of a generalized Pareto distribution fitted to the tail, which stabilizes
//! the estimate and yields the shape diagnostic k-hat per observation.

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;

/// Shape threshold above which an observation's estimate is flagged.
pub const KHAT_WARN: f64 = 0.7;

#[derive(Debug, Clone, serde::Serialize)]
pub struct LooResult {
    pub elpd_loo: f64,
    pub loo_ic: f64,
    pub pointwise: Vec<f64>,
    pub pareto_k: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Number of draws assigned to the Pareto tail.
pub fn tail_length(n_draws: usize) -> usize {
    let s = n_draws as f64;
    (0.2 * s).min(3.0 * s.sqrt()).ceil() as usize
}

/// Generalized Pareto quantile for exceedances, shape k and scale sigma.
fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-12 {
        -sigma * (1.0 - p).ln()
    } else {
        sigma / k * ((1.0 - p).powf(-k) - 1.0)
    }
}

/// Profile-likelihood generalized Pareto fit (Zhang-Stephens estimator).
/// Input must be sorted ascending and strictly positive at the top.
/// Returns (k, sigma).
pub fn gpd_fit(y: &[f64]) -> (f64, f64) {
    let n = y.len();
    let ymax = y[n - 1];
    if ymax.is_nan() || ymax <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let m = 30 + (n as f64).sqrt().floor() as usize;
    let quart_idx = ((n as f64 / 4.0 + 0.5).floor() as usize).clamp(1, n) - 1;
    let quart = y[quart_idx].max(ymax * 1e-6);
    let mut theta = Vec::with_capacity(m);
    let mut loglik = Vec::with_capacity(m);
    for j in 1..=m {
        let t = 1.0 / ymax + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / (3.0 * quart);
        let mut k = 0.0;
        for &yi in y {
            k += (-t * yi).ln_1p();
        }
        k = -k / n as f64;
        // The profile shape shares theta's sign, so theta/k > 0 whenever
        // the candidate is admissible.
        let l = if k != 0.0 && t / k > 0.0 {
            n as f64 * ((t / k).ln() + k - 1.0)
        } else {
            f64::NEG_INFINITY
        };
        theta.push(t);
        loglik.push(l);
    }
    let lmax = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lmax.is_finite() {
        return (f64::NAN, f64::NAN);
    }
    let mut wsum = 0.0;
    let mut theta_hat = 0.0;
    for j in 0..m {
        let w = (loglik[j] - lmax).exp();
        wsum += w;
        theta_hat += w * theta[j];
    }
    theta_hat /= wsum;
    let mut k = 0.0;
    for &yi in y {
        k += (-theta_hat * yi).ln_1p();
    }
    k /= n as f64;
    let sigma = -k / theta_hat;
    (k, sigma)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One observation: returns (elpd_i, khat_i, degenerate).
fn process_observation(ll: &[f64]) -> (f64, f64, bool) {
    let s = ll.len();
    let sf = s as f64;
    // Log importance ratios, shifted so the largest is zero.
    let mut lw: Vec<f64> = ll.iter().map(|&v| -v).collect();
    let max_lw = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_lw = lw.iter().cloned().fold(f64::INFINITY, f64::min);
    for v in lw.iter_mut() {
        *v -= max_lw;
    }
    if max_lw - min_lw < 1e-12 {
        // Constant ratios: importance weights are uniform and the estimate
        // reduces to the mean likelihood.
        let elpd = log_sum_exp(ll) - sf.ln();
        return (elpd, f64::NAN, true);
    }

    let m = tail_length(s);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| {
        lw[a]
            .partial_cmp(&lw[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let cutoff = lw[order[s - m - 1]].exp();
    let tail: Vec<f64> = order[s - m..]
        .iter()
        .map(|&i| lw[i].exp() - cutoff)
        .collect();

    let mut khat = f64::NAN;
    if tail[m - 1] > f64::MIN_POSITIVE {
        let (k, sigma) = gpd_fit(&tail);
        if sigma.is_finite() && sigma > 0.0 {
            khat = k;
            for (j, &i) in order[s - m..].iter().enumerate() {
                let p = (j as f64 + 0.5) / m as f64;
                let smoothed = cutoff + gpd_quantile(p, k, sigma);
                // Truncation at the raw maximum ratio (1 after shifting).
                lw[i] = smoothed.clamp(f64::MIN_POSITIVE, 1.0).ln();
            }
        }
    }

    let num: Vec<f64> = lw.iter().zip(ll).map(|(&w, &l)| w + l).collect();
    let elpd = log_sum_exp(&num) - log_sum_exp(&lw);
    (elpd, khat, false)
}

/// PSIS-LOO from a pointwise log-likelihood matrix laid out as one vector
/// per observation across draws.
pub fn psis_loo_columns(columns: &[Vec<f64>]) -> Result<LooResult> {
    if columns.is_empty() {
        return Err(Error::InvalidDesign(
            "log-likelihood matrix has no observations".into(),
        ));
    }
    let s = columns[0].len();
    if s < 400 {
        return Err(Error::InsufficientDraws {
            chains: 1,
            draws: s,
        });
    }
    for (i, col) in columns.iter().enumerate() {
        if col.len() != s {
            return Err(Error::InvalidDesign(format!(
                "log-likelihood column {i} has {} draws, expected {s}",
                col.len()
            )));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "log-likelihood matrix contains non-finite values",
            ));
        }
    }
    let mut pointwise = Vec::with_capacity(columns.len());
    let mut pareto_k = Vec::with_capacity(columns.len());
    let mut warnings = Vec::new();
    for (i, col) in columns.iter().enumerate() {
        let (elpd, khat, degenerate) = process_observation(col);
        if degenerate {
            warnings.push(format!(
                "observation {i}: importance ratios are all equal; estimate equals the mean log-likelihood"
            ));
        } else if khat.is_nan() {
            warnings.push(format!(
                "observation {i}: Pareto tail fit unavailable; raw importance weights used"
            ));
        } else if khat > KHAT_WARN {
            warnings.push(format!(
                "observation {i}: Pareto k {khat:.2} exceeds {KHAT_WARN}; estimate may be unreliable"
            ));
        }
        pointwise.push(elpd);
        pareto_k.push(khat);
    }
    let elpd_loo: f64 = pointwise.iter().sum();
    Ok(LooResult {
        elpd_loo,
        loo_ic: -2.0 * elpd_loo,
        pointwise,
        pareto_k,
        warnings,
    })
}

/// PSIS-LOO from posterior draws carrying a pointwise log-likelihood.
pub fn psis_loo(draws: &PosteriorDraws) -> Result<LooResult> {
    let total = draws.n_total();
    if total < 400 {
        return Err(Error::InsufficientDraws {
            chains: draws.n_chains(),
            draws: draws.draws_per_chain(),
        });
    }
    let n_obs = draws.n_obs();
    let mut columns = vec![Vec::with_capacity(total); n_obs];
    for i in 0..total {
        for (j, &v) in draws.loglik_row(i).iter().enumerate() {
            columns[j].push(v);
        }
    }
    psis_loo_columns(&columns)
}

/// In-sample log pointwise predictive density (no leave-one-out), for
/// comparison against `elpd_loo`.
pub fn in_sample_lpd(columns: &[Vec<f64>]) -> f64 {
    columns
        .iter()
        .map(|col| log_sum_exp(col) - (col.len() as f64).ln())
        .sum()
}
