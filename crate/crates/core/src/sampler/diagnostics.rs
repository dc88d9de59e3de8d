//! Convergence diagnostics: rank-normalized split R-hat and bulk effective
//! sample size with Geyer's initial monotone sequence truncation.

use serde::Serialize;

use crate::error::{Error, Result};

use super::PosteriorDraws;

/// Inverse standard normal CDF (Wichura's PPND16), accurate to double
/// precision over (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = horner(
            r,
            &[
                3.387_132_872_796_366_5,
                1.331_416_678_917_843_8e2,
                1.971_590_950_306_551_3e3,
                1.373_169_376_550_946e4,
                4.592_195_393_154_987e4,
                6.726_577_092_700_87e4,
                3.343_057_558_358_813e4,
                2.509_080_928_730_122_7e3,
            ],
        );
        let den = horner(
            r,
            &[
                1.0,
                4.231_333_070_160_091e1,
                6.871_870_074_920_579e2,
                5.394_196_021_424_751e3,
                2.121_379_430_158_659_7e4,
                3.930_789_580_009_271e4,
                2.872_908_573_572_194_3e4,
                5.226_495_278_852_854e3,
            ],
        );
        return q * num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = horner(
            r,
            &[
                1.423_437_110_749_683_5,
                4.630_337_846_156_546,
                5.769_497_221_460_691,
                3.647_848_324_763_204_5,
                1.270_458_252_452_368_4,
                2.417_807_251_774_506e-1,
                2.272_384_498_926_918_4e-2,
                7.745_450_142_783_414e-4,
            ],
        );
        let den = horner(
            r,
            &[
                1.0,
                2.053_191_626_637_759,
                1.676_384_830_183_803_8,
                6.897_673_349_851e-1,
                1.481_039_764_274_800_8e-1,
                1.519_866_656_361_645_7e-2,
                5.475_938_084_995_345e-4,
                1.050_750_071_644_416_9e-9,
            ],
        );
        num / den
    } else {
        r -= 5.0;
        let num = horner(
            r,
            &[
                6.657_904_643_501_103,
                5.463_784_911_164_114,
                1.784_826_539_917_291_3,
                2.965_605_718_285_048_7e-1,
                2.653_218_952_657_612_4e-2,
                1.242_660_947_388_078_4e-3,
                2.711_555_568_743_487_6e-5,
                2.010_334_399_292_288_1e-7,
            ],
        );
        let den = horner(
            r,
            &[
                1.0,
                5.998_322_065_558_88e-1,
                1.369_298_809_227_358e-1,
                1.487_536_129_085_061_5e-2,
                7.868_691_311_456_133e-4,
                1.846_318_317_510_054_8e-5,
                1.421_511_758_316_446e-7,
                2.044_263_103_389_939_7e-15,
            ],
        );
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn horner(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn check_shape(chains: &[Vec<f64>]) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::InsufficientDraws {
            chains: chains.len(),
            draws: chains.first().map_or(0, |c| c.len()),
        });
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidDesign("chains have unequal lengths".into()));
    }
    if len < 100 {
        return Err(Error::InsufficientDraws {
            chains: chains.len(),
            draws: len,
        });
    }
    Ok(len)
}

/// Split each chain in half and replace values by normal scores of their
/// pooled ranks.
fn split_and_rank_normalize(chains: &[Vec<f64>]) -> (Vec<Vec<f64>>, usize) {
    let half = chains[0].len() / 2;
    let mut split: Vec<Vec<f64>> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        split.push(c[..half].to_vec());
        split.push(c[c.len() - half..].to_vec());
    }
    let pooled: Vec<f64> = split.iter().flatten().copied().collect();
    let total = pooled.len() as f64;
    let r = ranks(&pooled);
    let mut it = r.into_iter();
    for chain in split.iter_mut() {
        for v in chain.iter_mut() {
            let rank = it.next().unwrap();
            *v = inverse_normal_cdf((rank - 0.375) / (total + 0.25));
        }
    }
    (split, half)
}

fn chain_moments(chains: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
        .collect();
    (means, vars)
}

/// Rank-normalized split R-hat. NaN when the pooled draws are constant.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    let (split, half) = split_and_rank_normalize(chains);
    if pooled_constant(chains) {
        return Ok(f64::NAN);
    }
    let n = half as f64;
    let (means, vars) = chain_moments(&split);
    let m = split.len() as f64;
    let w = vars.iter().sum::<f64>() / m;
    let grand = means.iter().sum::<f64>() / m;
    let b_over_n = means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m - 1.0);
    if w <= 0.0 {
        return Ok(f64::NAN);
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Ok((var_plus / w).sqrt())
}

fn pooled_constant(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().all(|c| c.iter().all(|&x| x == first))
}

/// Bulk effective sample size on rank-normalized split chains, using the
/// initial monotone sequence of autocorrelation pair sums.
pub fn bulk_ess(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    if pooled_constant(chains) {
        return Ok(f64::NAN);
    }
    let (split, half) = split_and_rank_normalize(chains);
    let n = half as f64;
    let m = split.len() as f64;
    let (means, vars) = chain_moments(&split);
    let w = vars.iter().sum::<f64>() / m;
    let grand = means.iter().sum::<f64>() / m;
    let b_over_n = means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m - 1.0);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    if var_plus.is_nan() || var_plus <= 0.0 {
        return Ok(f64::NAN);
    }

    // Mean autocovariance across chains at lag t (1/n normalization).
    let acov = |t: usize| -> f64 {
        let mut total = 0.0;
        for (c, mean) in split.iter().zip(&means) {
            let mut s = 0.0;
            for i in 0..(half - t) {
                s += (c[i] - mean) * (c[i + t] - mean);
            }
            total += s / n;
        }
        total / m
    };

    let rho = |t: usize| -> f64 {
        if t == 0 {
            1.0
        } else {
            1.0 - (w - acov(t)) / var_plus
        }
    };

    let mut pair_sums = Vec::new();
    let mut k = 0usize;
    while 2 * k + 1 < half.saturating_sub(3) {
        let p = rho(2 * k) + rho(2 * k + 1);
        if p <= 0.0 {
            break;
        }
        pair_sums.push(p);
        k += 1;
    }
    // Enforce monotone non-increasing pair sums.
    for i in 1..pair_sums.len() {
        if pair_sums[i] > pair_sums[i - 1] {
            pair_sums[i] = pair_sums[i - 1];
        }
    }
    let tau = -1.0 + 2.0 * pair_sums.iter().sum::<f64>();
    let total = m * n;
    if tau.is_nan() || tau <= 0.0 {
        return Ok(total * total.log10());
    }
    Ok((total / tau).min(total * total.log10()))
}

/// Per-parameter convergence summary.
#[derive(Debug, Clone, Serialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub rhat: f64,
    pub ess_bulk: f64,
}

/// Fit-level diagnostics assembled over all natural-scale parameters.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub parameters: Vec<ParamDiagnostics>,
    pub max_rhat: f64,
    pub min_ess_bulk: f64,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub step_sizes: Vec<f64>,
    pub mean_accepts: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitDiagnostics {
    /// Convergence verdict at an R-hat threshold (divergence-free is not
    /// required, matching common practice of warning separately).
    pub fn converged(&self, rhat_threshold: f64) -> bool {
        self.max_rhat.is_finite() && self.max_rhat <= rhat_threshold
    }
}

/// Compute R-hat and bulk ESS for every natural parameter of a fit.
pub fn diagnose(draws: &PosteriorDraws) -> Result<FitDiagnostics> {
    if draws.n_chains() < 2 || draws.draws_per_chain() < 100 {
        return Err(Error::InsufficientDraws {
            chains: draws.n_chains(),
            draws: draws.draws_per_chain(),
        });
    }
    let mut parameters = Vec::with_capacity(draws.names().len());
    let mut warnings = Vec::new();
    let mut max_rhat = f64::NEG_INFINITY;
    let mut min_ess = f64::INFINITY;
    for (p, name) in draws.names().iter().enumerate() {
        let chains: Vec<Vec<f64>> = (0..draws.n_chains())
            .map(|c| draws.chain_natural_column(c, p))
            .collect();
        let rhat = split_rhat(&chains)?;
        let ess = bulk_ess(&chains)?;
        if rhat.is_nan() || ess.is_nan() {
            warnings.push(format!(
                "parameter {name} has zero variance; R-hat undefined"
            ));
        } else {
            max_rhat = max_rhat.max(rhat);
            min_ess = min_ess.min(ess);
        }
        parameters.push(ParamDiagnostics {
            name: name.clone(),
            rhat,
            ess_bulk: ess,
        });
    }
    if !max_rhat.is_finite() {
        max_rhat = f64::NAN;
        min_ess = f64::NAN;
    }
    let divergences = draws.total_divergences();
    if divergences > 0 {
        warnings.push(format!("{divergences} divergent transitions after warmup"));
    }
    let max_depth_hits = draws.chain_stats.iter().map(|s| s.max_depth_hits).sum();
    Ok(FitDiagnostics {
        parameters,
        max_rhat,
        min_ess_bulk: min_ess,
        divergences,
        max_depth_hits,
        step_sizes: draws.chain_stats.iter().map(|s| s.step_size).collect(),
        mean_accepts: draws.chain_stats.iter().map(|s| s.mean_accept).collect(),
        warnings,
    })
}
