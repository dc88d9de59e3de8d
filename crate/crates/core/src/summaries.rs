//! Reporting: parameter summary tables, pointwise dose-response curve
//! estimates with equi-tailed intervals, and kernel density estimates of
//! marginal posteriors.

use std::io::Write;

use crate::error::{Error, Result};
use crate::posterior::Posterior;
use crate::sampler::PosteriorDraws;

/// Type-7 quantile (linear interpolation of order statistics) of sorted
/// values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Type-7 quantile of unsorted values.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    quantile_sorted(&v, p)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Summarize one column of draws.
pub fn summarize_column(name: &str, values: &[f64]) -> ParamSummary {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ParamSummary {
        name: name.to_string(),
        mean,
        sd,
        median: quantile_sorted(&sorted, 0.5),
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
    }
}

/// Summaries for every natural-scale parameter, in draw column order.
pub fn summarize_params(draws: &PosteriorDraws) -> Vec<ParamSummary> {
    draws
        .names()
        .iter()
        .enumerate()
        .map(|(p, name)| summarize_column(name, &draws.natural_column(p)))
        .collect()
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CurvePoint {
    pub dose: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Pointwise posterior curve summary for one schedule. Doses are on the
/// schedule's own scale; the 95% interval is equi-tailed.
pub fn curve_summary(
    draws: &PosteriorDraws,
    posterior: &Posterior,
    schedule: usize,
    dose_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    if schedule >= posterior.schedule_labels().len() {
        return Err(Error::InvalidDesign(format!(
            "schedule index {schedule} out of range"
        )));
    }
    let total = draws.n_total();
    let mut e0 = Vec::with_capacity(total);
    let mut emax = Vec::with_capacity(total);
    let mut ed50 = Vec::with_capacity(total);
    for i in 0..total {
        let nat = posterior.curve_params(draws.unconstrained_row(i))?;
        e0.push(nat.e0);
        emax.push(nat.emax_s[schedule]);
        ed50.push(nat.ed50_own[schedule]);
    }
    let mut f = vec![0.0; total];
    let mut out = Vec::with_capacity(dose_grid.len());
    for &d in dose_grid {
        for i in 0..total {
            let g = if d == 0.0 { 0.0 } else { d / (ed50[i] + d) };
            f[i] = e0[i] + emax[i] * g;
        }
        f.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.push(CurvePoint {
            dose: d,
            median: quantile_sorted(&f, 0.5),
            lower: quantile_sorted(&f, 0.025),
            upper: quantile_sorted(&f, 0.975),
        });
    }
    Ok(out)
}

/// `n` equidistant points spanning [lo, hi] inclusive.
pub fn equidistant_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DensityPoint {
    pub x: f64,
    pub density: f64,
}

/// Silverman's rule-of-thumb bandwidth.
fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile(values, 0.75) - quantile(values, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        // Point-mass draws: an arbitrarily narrow kernel keeps the
        // estimate a spike at the common value.
        1e-8 * values[0].abs().max(1.0)
    }
}

/// Gaussian kernel density estimate of one parameter's marginal on `grid`.
pub fn marginal_density(
    draws: &PosteriorDraws,
    param: usize,
    grid: &[f64],
) -> Result<Vec<DensityPoint>> {
    if draws.n_total() < 500 {
        return Err(Error::InsufficientDraws {
            chains: draws.n_chains(),
            draws: draws.draws_per_chain(),
        });
    }
    let xs = draws.natural_column(param);
    Ok(density_estimate(&xs, grid))
}

/// Kernel density estimate over raw values (bandwidth by Silverman's rule).
pub fn density_estimate(values: &[f64], grid: &[f64]) -> Vec<DensityPoint> {
    let h = silverman_bandwidth(values);
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            let mut s = 0.0;
            for &x in values {
                let z = (g - x) / h;
                if z.abs() < 30.0 {
                    s += (-0.5 * z * z).exp();
                }
            }
            DensityPoint {
                x: g,
                density: norm * s,
            }
        })
        .collect()
}

/// Default plotting grid: data span padded by three bandwidths.
pub fn default_density_grid(values: &[f64], n: usize) -> Vec<f64> {
    let h = silverman_bandwidth(values);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    equidistant_grid(lo, hi, n.max(2))
}

/// Tidy CSV with one row per parameter.
pub fn write_params_csv<W: Write>(mut w: W, rows: &[ParamSummary]) -> Result<()> {
    writeln!(w, "parameter,mean,sd,median,q025,q975")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.name, r.mean, r.sd, r.median, r.q025, r.q975
        )?;
    }
    Ok(())
}

/// Curve CSV with one row per grid dose.
pub fn write_curve_csv<W: Write>(mut w: W, rows: &[CurvePoint], method: &str) -> Result<()> {
    writeln!(w, "dose,median,lower,upper,method")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.dose, r.median, r.lower, r.upper, method
        )?;
    }
    Ok(())
}

/// Density CSV with one row per grid point.
pub fn write_density_csv<W: Write>(mut w: W, rows: &[DensityPoint]) -> Result<()> {
    writeln!(w, "value,density")?;
    for r in rows {
        writeln!(w, "{},{}", r.x, r.density)?;
    }
    Ok(())
}
