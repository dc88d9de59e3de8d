//! Maximum-likelihood Emax fit with bounded ED50.
//!
//! The model is partially linear: for fixed ED50 the optimal (E0, Emax) is a
//! two-parameter linear least-squares solution. ED50 is therefore profiled
//! over a log-spaced grid within caller-supplied bounds and the optimum is
//! refined by golden-section search. Standard errors come from the observed
//! information at the optimum.

use crate::error::{Error, Result};
use crate::model::{emax_response, EmaxParams};

const GRID_POINTS: usize = 201;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, serde::Serialize)]
pub struct MleFit {
    pub params: EmaxParams,
    pub sigma_hat: f64,
    /// Covariance of (E0, Emax, ED50).
    pub vcov: [[f64; 3]; 3],
    pub converged: bool,
    /// Residual sum of squares along the ED50 profile grid.
    pub profile: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CurveCi {
    pub dose: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Residual sum of squares after profiling out (E0, Emax) at fixed ED50.
/// Returns (rss, e0, emax).
fn profile_rss(doses: &[f64], responses: &[f64], ed50: f64) -> (f64, f64, f64) {
    let n = doses.len() as f64;
    let mut sg = 0.0;
    let mut sgg = 0.0;
    let mut sy = 0.0;
    let mut sgy = 0.0;
    for (&d, &y) in doses.iter().zip(responses) {
        let g = d / (ed50 + d);
        sg += g;
        sgg += g * g;
        sy += y;
        sgy += g * y;
    }
    let det = n * sgg - sg * sg;
    if det.abs() < 1e-300 {
        let e0 = sy / n;
        let rss = responses.iter().map(|&y| (y - e0) * (y - e0)).sum();
        return (rss, e0, 0.0);
    }
    let e0 = (sgg * sy - sg * sgy) / det;
    let emax = (n * sgy - sg * sy) / det;
    let mut rss = 0.0;
    for (&d, &y) in doses.iter().zip(responses) {
        let r = y - e0 - emax * d / (ed50 + d);
        rss += r * r;
    }
    (rss, e0, emax)
}

/// Gradient of the mean response in (E0, Emax, ED50).
fn response_jacobian(params: &EmaxParams, dose: f64) -> [f64; 3] {
    let denom = params.ed50 + dose;
    [1.0, dose / denom, -params.emax * dose / (denom * denom)]
}

fn invert_symmetric_3x3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let scale = a.iter().flatten().fold(0.0f64, |m, &v| m.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    inv[1][0] = inv[0][1];
    inv[2][0] = inv[0][2];
    inv[2][1] = inv[1][2];
    Some(inv)
}

/// Fit the three-parameter Emax model by profiled least squares. Doses must
/// already be on a common schedule scale; `bounds` constrains ED50.
pub fn fit_mle(doses: &[f64], responses: &[f64], bounds: (f64, f64)) -> Result<MleFit> {
    if doses.len() != responses.len() {
        return Err(Error::InvalidDesign(format!(
            "{} doses but {} responses",
            doses.len(),
            responses.len()
        )));
    }
    let (lower, upper) = bounds;
    if !(lower > 0.0 && upper > lower) {
        return Err(Error::InvalidDesign(format!(
            "ED50 bounds must satisfy 0 < lower < upper, got ({lower}, {upper})"
        )));
    }
    if doses.iter().chain(responses).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("doses and responses must be finite"));
    }
    let mut distinct: Vec<f64> = doses.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewDoses(distinct.len()));
    }

    let ln_lo = lower.ln();
    let ln_hi = upper.ln();
    let mut profile = Vec::with_capacity(GRID_POINTS);
    let mut best_idx = 0;
    let mut best_rss = f64::INFINITY;
    for j in 0..GRID_POINTS {
        let ed50 = (ln_lo + (ln_hi - ln_lo) * j as f64 / (GRID_POINTS - 1) as f64).exp();
        let (rss, _, _) = profile_rss(doses, responses, ed50);
        if rss < best_rss {
            best_rss = rss;
            best_idx = j;
        }
        profile.push((ed50, rss));
    }

    // A profile that is flat to rounding precision means ED50 is not
    // identifiable; the fit is pinned to the upper bound, which is where an
    // unconstrained optimizer would drift.
    let ybar = responses.iter().sum::<f64>() / responses.len() as f64;
    let rss_intercept: f64 = responses.iter().map(|&y| (y - ybar) * (y - ybar)).sum();
    let flat = rss_intercept - best_rss <= 1e-12 * rss_intercept.max(1e-300);

    let ed50 = if flat {
        upper
    } else {
        // Golden-section refinement in log-ED50 around the best grid cell.
        let mut a = profile[best_idx.saturating_sub(1)].0.ln();
        let mut b = profile[(best_idx + 1).min(GRID_POINTS - 1)].0.ln();
        let rss_at = |t: f64| profile_rss(doses, responses, t.exp()).0;
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut fc = rss_at(c);
        let mut fd = rss_at(d);
        while b - a > 1e-6 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = rss_at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = rss_at(d);
            }
        }
        let refined = (0.5 * (a + b)).exp().clamp(lower, upper);
        let (refined_rss, _, _) = profile_rss(doses, responses, refined);
        if refined_rss < best_rss {
            refined
        } else {
            profile[best_idx].0
        }
    };
    let (rss, e0, emax) = profile_rss(doses, responses, ed50);

    let mut warnings = Vec::new();
    let mut converged = true;
    if (ed50 - lower).abs() <= 1e-6 * lower || (upper - ed50).abs() <= 1e-6 * upper {
        warnings.push(format!(
            "ED50 estimate {ed50} lies on a bound of [{lower}, {upper}]"
        ));
        converged = false;
    }

    let n = doses.len() as f64;
    let sigma2 = rss / (n - 3.0);
    let params = EmaxParams { e0, emax, ed50 };

    let mut info = [[0.0; 3]; 3];
    for &dose in doses {
        let j = response_jacobian(&params, dose);
        for r in 0..3 {
            for c in 0..3 {
                info[r][c] += j[r] * j[c];
            }
        }
    }
    let vcov = match invert_symmetric_3x3(&info) {
        Some(inv) => {
            let mut v = inv;
            for row in v.iter_mut() {
                for x in row.iter_mut() {
                    *x *= sigma2;
                }
            }
            v
        }
        None => {
            // ED50 direction carries no curvature; report the linear
            // two-parameter block and zero out the rest.
            converged = false;
            let sg: f64 = doses.iter().map(|&d| d / (ed50 + d)).sum();
            let sgg: f64 = doses.iter().map(|&d| (d / (ed50 + d)).powi(2)).sum();
            let det = n * sgg - sg * sg;
            let mut v = [[0.0; 3]; 3];
            if det.abs() > 1e-300 {
                v[0][0] = sigma2 * sgg / det;
                v[0][1] = -sigma2 * sg / det;
                v[1][0] = v[0][1];
                v[1][1] = sigma2 * n / det;
            }
            v
        }
    };

    Ok(MleFit {
        params,
        sigma_hat: sigma2.max(0.0).sqrt(),
        vcov,
        converged,
        profile,
        warnings,
    })
}

/// Pointwise delta-method 95% confidence band for the fitted curve.
pub fn curve_ci(fit: &MleFit, dose_grid: &[f64]) -> Vec<CurveCi> {
    dose_grid
        .iter()
        .map(|&dose| {
            let j = response_jacobian(&fit.params, dose);
            let mut var = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    var += j[r] * fit.vcov[r][c] * j[c];
                }
            }
            let se = var.max(0.0).sqrt();
            let estimate = emax_response(&fit.params, dose);
            CurveCi {
                dose,
                estimate,
                lower: estimate - 1.96 * se,
                upper: estimate + 1.96 * se,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TRUTH: EmaxParams = EmaxParams {
        e0: -20.0,
        emax: -60.0,
        ed50: 2.0,
    };
    const DOSES: [f64; 6] = [0.0, 0.5, 1.0, 1.5, 3.0, 10.0];

    fn noiseless() -> (Vec<f64>, Vec<f64>) {
        let doses = DOSES.to_vec();
        let responses = doses.iter().map(|&d| emax_response(&TRUTH, d)).collect();
        (doses, responses)
    }

    #[test]
    fn recovers_noiseless_truth() {
        let (doses, responses) = noiseless();
        let fit = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        assert_relative_eq!(fit.params.e0, TRUTH.e0, max_relative = 1e-4);
        assert_relative_eq!(fit.params.emax, TRUTH.emax, max_relative = 1e-4);
        assert_relative_eq!(fit.params.ed50, TRUTH.ed50, max_relative = 1e-4);
        assert!(fit.sigma_hat < 1e-6);
        assert!(fit.converged);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn flat_responses_hit_a_bound() {
        let doses = DOSES.to_vec();
        let responses = vec![5.0; doses.len()];
        let fit = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        assert!(!fit.warnings.is_empty());
        assert!(!fit.converged);
        let on_bound = (fit.params.ed50 - 0.001).abs() <= 1e-6 * 0.001
            || (15.0 - fit.params.ed50).abs() <= 1e-6 * 15.0;
        assert!(on_bound, "ed50 {}", fit.params.ed50);
    }

    #[test]
    fn optimum_beats_every_grid_point() {
        let doses: Vec<f64> = DOSES.iter().cycle().take(30).cloned().collect();
        let responses: Vec<f64> = doses
            .iter()
            .enumerate()
            .map(|(i, &d)| emax_response(&TRUTH, d) + ((i * 37 % 11) as f64 - 5.0))
            .collect();
        let fit = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        let (rss_opt, _, _) = profile_rss(&doses, &responses, fit.params.ed50);
        for &(_, rss) in &fit.profile {
            assert!(rss_opt <= rss + 1e-9);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let params = EmaxParams {
            e0: -18.0,
            emax: -55.0,
            ed50: 3.3,
        };
        for &dose in &[0.0, 0.7, 2.0, 9.5] {
            let j = response_jacobian(&params, dose);
            let h = 1e-6;
            let fd = [
                (emax_response(
                    &EmaxParams {
                        e0: params.e0 + h,
                        ..params
                    },
                    dose,
                ) - emax_response(
                    &EmaxParams {
                        e0: params.e0 - h,
                        ..params
                    },
                    dose,
                )) / (2.0 * h),
                (emax_response(
                    &EmaxParams {
                        emax: params.emax + h,
                        ..params
                    },
                    dose,
                ) - emax_response(
                    &EmaxParams {
                        emax: params.emax - h,
                        ..params
                    },
                    dose,
                )) / (2.0 * h),
                (emax_response(
                    &EmaxParams {
                        ed50: params.ed50 + h,
                        ..params
                    },
                    dose,
                ) - emax_response(
                    &EmaxParams {
                        ed50: params.ed50 - h,
                        ..params
                    },
                    dose,
                )) / (2.0 * h),
            ];
            for k in 0..3 {
                let denom = j[k].abs().max(1e-8);
                assert!(
                    (j[k] - fd[k]).abs() / denom < 1e-6,
                    "dose {dose} component {k}: {} vs {}",
                    j[k],
                    fd[k]
                );
            }
        }
    }

    #[test]
    fn ci_width_at_zero_dose_uses_e0_variance() {
        let doses: Vec<f64> = DOSES.iter().cycle().take(24).cloned().collect();
        let responses: Vec<f64> = doses
            .iter()
            .enumerate()
            .map(|(i, &d)| emax_response(&TRUTH, d) + ((i * 13 % 7) as f64 - 3.0))
            .collect();
        let fit = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        let ci = curve_ci(&fit, &[0.0]);
        let width = ci[0].upper - ci[0].lower;
        assert_relative_eq!(
            width,
            2.0 * 1.96 * fit.vcov[0][0].sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ci_width_at_large_dose_approaches_plateau_variance() {
        let doses: Vec<f64> = DOSES.iter().cycle().take(24).cloned().collect();
        let responses: Vec<f64> = doses
            .iter()
            .enumerate()
            .map(|(i, &d)| emax_response(&TRUTH, d) + ((i * 13 % 7) as f64 - 3.0))
            .collect();
        let fit = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        let ci = curve_ci(&fit, &[1e9]);
        let width = ci[0].upper - ci[0].lower;
        let plateau_var = fit.vcov[0][0] + fit.vcov[1][1] + 2.0 * fit.vcov[0][1];
        let expected = 2.0 * 1.96 * plateau_var.sqrt();
        assert_relative_eq!(width, expected, max_relative = 1e-2);
    }

    #[test]
    fn shift_invariance_of_everything_but_e0() {
        let doses: Vec<f64> = DOSES.iter().cycle().take(30).cloned().collect();
        let responses: Vec<f64> = doses
            .iter()
            .enumerate()
            .map(|(i, &d)| emax_response(&TRUTH, d) + ((i * 37 % 11) as f64 - 5.0))
            .collect();
        let shifted: Vec<f64> = responses.iter().map(|y| y + 123.5).collect();
        let f1 = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        let f2 = fit_mle(&doses, &shifted, (0.001, 15.0)).unwrap();
        assert_relative_eq!(f2.params.e0, f1.params.e0 + 123.5, max_relative = 1e-8);
        assert_relative_eq!(f2.params.emax, f1.params.emax, max_relative = 1e-8);
        assert_relative_eq!(f2.params.ed50, f1.params.ed50, max_relative = 1e-8);
        for r in 1..3 {
            for c in 1..3 {
                assert_relative_eq!(f2.vcov[r][c], f1.vcov[r][c], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn too_few_distinct_doses_is_an_error() {
        let doses = vec![0.0, 0.0, 5.0, 5.0];
        let responses = vec![1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            fit_mle(&doses, &responses, (0.001, 15.0)),
            Err(Error::TooFewDoses(2))
        ));
    }

    #[test]
    fn vcov_is_symmetric_and_psd() {
        let doses: Vec<f64> = DOSES.iter().cycle().take(24).cloned().collect();
        let responses: Vec<f64> = doses
            .iter()
            .enumerate()
            .map(|(i, &d)| emax_response(&TRUTH, d) + ((i * 13 % 7) as f64 - 3.0))
            .collect();
        let fit = fit_mle(&doses, &responses, (0.001, 15.0)).unwrap();
        let v = &fit.vcov;
        for (r, row) in v.iter().enumerate() {
            for (c, &val) in row.iter().enumerate() {
                assert_relative_eq!(val, v[c][r], max_relative = 1e-10);
            }
            assert!(row[r] >= 0.0);
        }
        // Leading principal minors of a PSD matrix are non-negative.
        let m2 = v[0][0] * v[1][1] - v[0][1] * v[0][1];
        let m3 = v[0][0] * (v[1][1] * v[2][2] - v[1][2] * v[2][1])
            - v[0][1] * (v[1][0] * v[2][2] - v[1][2] * v[2][0])
            + v[0][2] * (v[1][0] * v[2][1] - v[1][1] * v[2][0]);
        assert!(m2 >= -1e-9);
        assert!(m3 >= -1e-9);
    }
}
