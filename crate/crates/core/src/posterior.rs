//! Joint log-posterior and analytic gradient on an unconstrained scale.
//!
//! Pooling menu per curve parameter: `Shared` (one value for all schedules),
//! `FixedEffects` (independent per-schedule values), `RandomEffects`
//! (exchangeable per-schedule values with a non-centered hierarchy).
//!
//! Parametrization:
//! - a shared ED50 lives on the reference-schedule scale inside scaled-logit
//!   bounds and maps to each schedule via the interval ratio;
//! - fixed-effects ED50s live on their own schedule's dose scale, one
//!   scaled-logit transform each;
//! - random-effects ED50s follow log ED50*(i) = mu + u_i * tau with the
//!   bounded median exp(mu), standard-normal deviates u_i, and tau = exp(lt);
//! - random-effects Emax values are exchangeable on the original scale:
//!   Emax(i) = mu_emax + u_i * tau_emax, no transform;
//! - a patient-level noise scale enters as log sigma.
//!
//! Every transform contributes its log-Jacobian, so the density integrates
//! correctly over the unconstrained coordinates. The likelihood keeps its
//! normalizing constants (pointwise log-likelihoods feed model comparison);
//! priors are unnormalized kernels.
//!
//! The prior dose scale D defaults to the largest dose as the model ingests
//! it: pooled-ED50 models convert every dose to the reference schedule
//! first, while per-schedule parametrizations consume doses in their own
//! units. Bounds default to (0, 1.5 * D).

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observations};
use crate::error::{Error, Result};
use crate::model::TrialDesign;
use crate::priors::PriorSpec;

pub const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingMode {
    Shared,
    FixedEffects,
    RandomEffects,
}

/// Prior choices per parameter role. `emax` covers the population mean under
/// random effects; `ed50` applies to the shared ED50, each fixed-effects
/// ED50, or the random-effects median, whichever the model has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub e0: PriorSpec,
    pub emax: PriorSpec,
    pub ed50: PriorSpec,
    pub sigma: PriorSpec,
    pub tau_ed50: PriorSpec,
    pub tau_emax: PriorSpec,
}

impl PriorSet {
    pub fn defaults(prior_dose_scale: f64) -> Self {
        Self {
            e0: PriorSpec::Normal { mu: 0.0, sd: 100.0 },
            emax: PriorSpec::Normal { mu: 0.0, sd: 100.0 },
            ed50: PriorSpec::FunctionalUniformApprox {
                max_dose: prior_dose_scale,
            },
            sigma: PriorSpec::HalfNormal { scale: 100.0 },
            tau_ed50: PriorSpec::HalfNormal { scale: 1.0 },
            tau_emax: PriorSpec::HalfNormal { scale: 10.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub ed50_mode: PoolingMode,
    pub emax_mode: PoolingMode,
    pub reference_schedule_id: usize,
    /// Bounds for the ED50 location parameter on its natural scale.
    pub ed50_bounds: (f64, f64),
    /// Scale D of the functional-uniform approximation.
    pub prior_dose_scale: f64,
    pub priors: PriorSet,
}

impl ModelSpec {
    pub fn new(ed50_mode: PoolingMode, emax_mode: PoolingMode, design: &TrialDesign) -> Self {
        let prior_dose_scale = match ed50_mode {
            PoolingMode::Shared => design.max_dose(),
            _ => design.max_arm_dose(),
        };
        Self {
            ed50_mode,
            emax_mode,
            reference_schedule_id: design.reference_schedule_id,
            ed50_bounds: (0.0, 1.5 * prior_dose_scale),
            prior_dose_scale,
            priors: PriorSet::defaults(prior_dose_scale),
        }
    }

    pub fn complete_pooling(design: &TrialDesign) -> Self {
        Self::new(PoolingMode::Shared, PoolingMode::Shared, design)
    }

    pub fn fixed_effects(design: &TrialDesign) -> Self {
        Self::new(PoolingMode::FixedEffects, PoolingMode::Shared, design)
    }

    pub fn random_effects(design: &TrialDesign) -> Self {
        Self::new(PoolingMode::RandomEffects, PoolingMode::Shared, design)
    }

    pub fn with_ed50_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.ed50_bounds = (lower, upper);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ed50_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidDesign(format!(
                "invalid ED50 bounds ({lo}, {hi})"
            )));
        }
        if !(self.prior_dose_scale.is_finite() && self.prior_dose_scale > 0.0) {
            return Err(Error::InvalidDesign(format!(
                "invalid prior dose scale {}",
                self.prior_dose_scale
            )));
        }
        self.priors.e0.validate()?;
        self.priors.emax.validate()?;
        self.priors.ed50.validate()?;
        self.priors.sigma.validate()?;
        self.priors.tau_ed50.validate()?;
        self.priors.tau_emax.validate()?;
        Ok(())
    }
}

/// Numerically stable logistic helpers.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Monotone map from the real line onto (lo, hi).
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledLogit {
    pub lo: f64,
    pub hi: f64,
}

impl ScaledLogit {
    /// Returns (x, dx/dz, log |dx/dz|, d log|dx/dz| / dz).
    pub fn forward(&self, z: f64) -> (f64, f64, f64, f64) {
        let s = sigmoid(z);
        let width = self.hi - self.lo;
        let x = self.lo + width * s;
        let dxdz = width * s * (1.0 - s);
        let logjac = width.ln() - softplus(-z) - softplus(z);
        (x, dxdz, logjac, 1.0 - 2.0 * s)
    }

    #[cfg(test)]
    pub fn inverse(&self, x: f64) -> f64 {
        let t = (x - self.lo) / (self.hi - self.lo);
        (t / (1.0 - t)).ln()
    }
}

/// Index layout of the unconstrained parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    n_sched: usize,
    emax_mode: PoolingMode,
    ed50_mode: PoolingMode,
    emax_start: usize,
    ed50_start: usize,
    log_sigma: Option<usize>,
    dim: usize,
}

impl Layout {
    fn new(
        emax_mode: PoolingMode,
        ed50_mode: PoolingMode,
        n_sched: usize,
        patient_level: bool,
    ) -> Self {
        let block = |mode: PoolingMode| match mode {
            PoolingMode::Shared => 1,
            PoolingMode::FixedEffects => n_sched,
            PoolingMode::RandomEffects => n_sched + 2,
        };
        let emax_start = 1;
        let ed50_start = emax_start + block(emax_mode);
        let sigma_at = ed50_start + block(ed50_mode);
        let (log_sigma, dim) = if patient_level {
            (Some(sigma_at), sigma_at + 1)
        } else {
            (None, sigma_at)
        };
        Self {
            n_sched,
            emax_mode,
            ed50_mode,
            emax_start,
            ed50_start,
            log_sigma,
            dim,
        }
    }
}

/// One flattened observation unit.
#[derive(Debug, Clone, Copy)]
struct Obs {
    sched: usize,
    dose: f64,
    y: f64,
    /// Fixed noise sd for arm-level rows; ignored for patient-level rows.
    se: f64,
}

/// The bound (model, data) pair: evaluates the joint log-posterior, its
/// gradient, pointwise log-likelihoods, and the natural-scale view.
#[derive(Debug, Clone)]
pub struct Posterior {
    spec: ModelSpec,
    obs: Vec<Obs>,
    /// interval(schedule) / interval(reference) per schedule
    ratio: Vec<f64>,
    labels: Vec<String>,
    layout: Layout,
    patient_level: bool,
    natural_names: Vec<String>,
    transform: ScaledLogit,
}

impl Posterior {
    pub fn new(spec: ModelSpec, dataset: &Dataset) -> Result<Self> {
        spec.validate()?;
        let design = &dataset.design;
        if spec.reference_schedule_id >= design.schedules.len() {
            return Err(Error::InvalidDesign(format!(
                "reference schedule id {} out of range",
                spec.reference_schedule_id
            )));
        }
        let reference = &design.schedules[spec.reference_schedule_id];
        let ratio: Vec<f64> = design
            .schedules
            .iter()
            .map(|s| s.interval_hours / reference.interval_hours)
            .collect();
        let labels: Vec<String> = design.schedules.iter().map(|s| s.label.clone()).collect();
        let (obs, patient_level) = match &dataset.observations {
            Observations::ArmLevel(v) => (
                v.iter()
                    .map(|o| Obs {
                        sched: o.schedule_id,
                        dose: o.dose,
                        y: o.mean,
                        se: o.se,
                    })
                    .collect::<Vec<_>>(),
                false,
            ),
            Observations::PatientLevel(v) => (
                v.iter()
                    .map(|o| Obs {
                        sched: o.schedule_id,
                        dose: o.dose,
                        y: o.response,
                        se: f64::NAN,
                    })
                    .collect::<Vec<_>>(),
                true,
            ),
        };
        if obs.is_empty() {
            return Err(Error::InvalidDesign("no observations".into()));
        }
        let layout = Layout::new(spec.emax_mode, spec.ed50_mode, labels.len(), patient_level);
        let natural_names = natural_names(&spec, &labels, patient_level);
        let transform = ScaledLogit {
            lo: spec.ed50_bounds.0,
            hi: spec.ed50_bounds.1,
        };
        Ok(Self {
            spec,
            obs,
            ratio,
            labels,
            layout,
            patient_level,
            natural_names,
            transform,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn n_observations(&self) -> usize {
        self.obs.len()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn schedule_labels(&self) -> &[String] {
        &self.labels
    }

    /// Names of the natural-scale parameters reported by summaries and
    /// diagnostics, in output order.
    pub fn natural_names(&self) -> &[String] {
        &self.natural_names
    }

    /// Joint log-posterior. Errors on a non-finite result.
    pub fn log_posterior(&self, v: &[f64]) -> Result<f64> {
        let lp = self.eval(v, None);
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(Error::NonFinite("log-posterior"))
        }
    }

    /// Joint log-posterior and its gradient. Errors on a non-finite result.
    pub fn grad_log_posterior(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.layout.dim];
        let lp = self.eval(v, Some(&mut grad));
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Ok((lp, grad))
        } else {
            Err(Error::NonFinite("log-posterior gradient"))
        }
    }

    /// Sampler entry point: a non-finite target is reported as negative
    /// infinity so the trajectory diverges instead of aborting the chain.
    pub(crate) fn eval_for_sampler(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let lp = self.eval(v, Some(grad));
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Data log-likelihood alone (normalized), at unconstrained `v`.
    pub fn data_log_likelihood(&self, v: &[f64]) -> Result<f64> {
        let mut pointwise = vec![0.0; self.obs.len()];
        self.pointwise_loglik(v, &mut pointwise)?;
        Ok(pointwise.iter().sum())
    }

    /// Per-observation log-likelihood contributions at unconstrained `v`.
    pub fn pointwise_loglik(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        assert_eq!(out.len(), self.obs.len());
        let nat = self.decode(v)?;
        for (k, o) in self.obs.iter().enumerate() {
            let f = nat.e0 + nat.emax_s[o.sched] * chunk_g(o.dose, nat.ed50_own[o.sched]);
            let sd = if self.patient_level { nat.sigma } else { o.se };
            let resid = o.y - f;
            out[k] = -0.5 * LN_2PI - sd.ln() - 0.5 * (resid / sd) * (resid / sd);
        }
        if out.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("pointwise log-likelihood"))
        }
    }

    /// Natural-scale values matching [`Self::natural_names`].
    pub fn natural_values(&self, v: &[f64], out: &mut Vec<f64>) -> Result<()> {
        let nat = self.decode(v)?;
        out.clear();
        out.push(nat.e0);
        match self.spec.emax_mode {
            PoolingMode::Shared => out.push(nat.emax_s[0]),
            PoolingMode::FixedEffects => out.extend_from_slice(&nat.emax_s),
            PoolingMode::RandomEffects => {
                out.push(nat.mu_emax);
                out.extend_from_slice(&nat.emax_s);
                out.push(nat.tau_emax);
            }
        }
        out.extend_from_slice(&nat.ed50_own);
        if self.spec.ed50_mode == PoolingMode::RandomEffects {
            out.push(nat.tau_ed50);
        }
        if self.patient_level {
            out.push(nat.sigma);
        }
        Ok(())
    }

    /// Per-schedule (emax, own-scale ed50) plus shared parameters at `v`.
    pub fn curve_params(&self, v: &[f64]) -> Result<NaturalParams> {
        self.decode(v)
    }

    fn decode(&self, v: &[f64]) -> Result<NaturalParams> {
        assert_eq!(v.len(), self.layout.dim);
        let l = &self.layout;
        let s_count = l.n_sched;
        let e0 = v[0];
        let mut emax_s = vec![0.0; s_count];
        let mut mu_emax = f64::NAN;
        let mut tau_emax = f64::NAN;
        match l.emax_mode {
            PoolingMode::Shared => emax_s.fill(v[l.emax_start]),
            PoolingMode::FixedEffects => {
                emax_s.copy_from_slice(&v[l.emax_start..l.emax_start + s_count]);
            }
            PoolingMode::RandomEffects => {
                mu_emax = v[l.emax_start];
                tau_emax = v[l.emax_start + 1 + s_count].exp();
                for i in 0..s_count {
                    emax_s[i] = mu_emax + v[l.emax_start + 1 + i] * tau_emax;
                }
            }
        }
        let mut ed50_own = vec![0.0; s_count];
        let mut tau_ed50 = f64::NAN;
        match l.ed50_mode {
            PoolingMode::Shared => {
                let (x, _, _, _) = self.transform.forward(v[l.ed50_start]);
                for (own, &ratio) in ed50_own.iter_mut().zip(&self.ratio) {
                    *own = x * ratio;
                }
            }
            PoolingMode::FixedEffects => {
                for i in 0..s_count {
                    let (x, _, _, _) = self.transform.forward(v[l.ed50_start + i]);
                    ed50_own[i] = x;
                }
            }
            PoolingMode::RandomEffects => {
                let (x, _, _, _) = self.transform.forward(v[l.ed50_start]);
                let mu = x.ln();
                tau_ed50 = v[l.ed50_start + 1 + s_count].exp();
                for i in 0..s_count {
                    ed50_own[i] = (mu + v[l.ed50_start + 1 + i] * tau_ed50).exp() * self.ratio[i];
                }
            }
        }
        let sigma = match l.log_sigma {
            Some(idx) => v[idx].exp(),
            None => f64::NAN,
        };
        Ok(NaturalParams {
            e0,
            emax_s,
            mu_emax,
            tau_emax,
            ed50_own,
            tau_ed50,
            sigma,
        })
    }

    /// Core evaluation: log-posterior, optionally accumulating the gradient.
    /// Returns negative infinity (never panics) on numeric trouble.
    fn eval(&self, v: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        let s_count = l.n_sched;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }

        // Decode blocks, keeping transform intermediates for the chain rule.
        let e0 = v[0];
        let mut emax_s = vec![0.0; s_count];
        let mut mu_emax = 0.0;
        let mut tau_emax = 0.0;
        match l.emax_mode {
            PoolingMode::Shared => emax_s.fill(v[l.emax_start]),
            PoolingMode::FixedEffects => {
                emax_s.copy_from_slice(&v[l.emax_start..l.emax_start + s_count]);
            }
            PoolingMode::RandomEffects => {
                mu_emax = v[l.emax_start];
                tau_emax = v[l.emax_start + 1 + s_count].exp();
                for i in 0..s_count {
                    emax_s[i] = mu_emax + v[l.emax_start + 1 + i] * tau_emax;
                }
            }
        }

        let mut ed50_own = vec![0.0; s_count];
        // Shared/RE: (x, dxdz, logjac, dlogjac); FE: one tuple per schedule.
        let mut ed_fwd = [0.0f64; 4];
        let mut ed_fwd_fe = vec![
            [0.0f64; 4];
            if l.ed50_mode == PoolingMode::FixedEffects {
                s_count
            } else {
                0
            }
        ];
        let mut tau_ed50 = 0.0;
        match l.ed50_mode {
            PoolingMode::Shared | PoolingMode::RandomEffects => {
                let (x, dxdz, logjac, dlj) = self.transform.forward(v[l.ed50_start]);
                ed_fwd = [x, dxdz, logjac, dlj];
                if l.ed50_mode == PoolingMode::Shared {
                    for (own, &ratio) in ed50_own.iter_mut().zip(&self.ratio) {
                        *own = x * ratio;
                    }
                } else {
                    let mu_ed50 = x.ln();
                    tau_ed50 = v[l.ed50_start + 1 + s_count].exp();
                    for i in 0..s_count {
                        ed50_own[i] =
                            (mu_ed50 + v[l.ed50_start + 1 + i] * tau_ed50).exp() * self.ratio[i];
                    }
                }
            }
            PoolingMode::FixedEffects => {
                for i in 0..s_count {
                    let t = self.transform.forward(v[l.ed50_start + i]);
                    ed_fwd_fe[i] = [t.0, t.1, t.2, t.3];
                    ed50_own[i] = t.0;
                }
            }
        }

        let (sigma, inv_var_pl) = match l.log_sigma {
            Some(idx) => {
                let s = v[idx].exp();
                (s, 1.0 / (s * s))
            }
            None => (f64::NAN, f64::NAN),
        };

        // Likelihood pass with sufficient statistics for the chain rule.
        let mut lp = 0.0;
        let mut sum_r = 0.0; // d ll / d e0
        let mut lg = vec![0.0; s_count]; // d ll / d emax_s
        let mut la = vec![0.0; s_count]; // d ll / d ed50_own_s
        let mut sum_z2 = 0.0; // sum of squared standardized residuals
        for o in &self.obs {
            let ed = ed50_own[o.sched];
            let denom = ed + o.dose;
            let g = if o.dose == 0.0 { 0.0 } else { o.dose / denom };
            let f = e0 + emax_s[o.sched] * g;
            let (sd, inv_var) = if self.patient_level {
                (sigma, inv_var_pl)
            } else {
                (o.se, 1.0 / (o.se * o.se))
            };
            let resid = o.y - f;
            let z2 = resid * resid * inv_var;
            lp += -0.5 * LN_2PI - sd.ln() - 0.5 * z2;
            if grad.is_some() {
                let r = resid * inv_var;
                sum_r += r;
                lg[o.sched] += r * g;
                if o.dose > 0.0 {
                    la[o.sched] -= r * emax_s[o.sched] * o.dose / (denom * denom);
                }
                sum_z2 += z2;
            }
        }

        // Priors and transform Jacobians, with gradient accumulation.
        let pri = &self.spec.priors;
        macro_rules! bail {
            ($e:expr) => {
                match $e {
                    Ok(val) => val,
                    Err(_) => return f64::NEG_INFINITY,
                }
            };
        }

        lp += bail!(pri.e0.log_density(e0));
        if let Some(g) = grad.as_deref_mut() {
            g[0] = sum_r + bail!(pri.e0.grad_log_density(e0));
        }

        match l.emax_mode {
            PoolingMode::Shared => {
                let emax = emax_s[0];
                lp += bail!(pri.emax.log_density(emax));
                if let Some(g) = grad.as_deref_mut() {
                    g[l.emax_start] =
                        lg.iter().sum::<f64>() + bail!(pri.emax.grad_log_density(emax));
                }
            }
            PoolingMode::FixedEffects => {
                for i in 0..s_count {
                    lp += bail!(pri.emax.log_density(emax_s[i]));
                    if let Some(g) = grad.as_deref_mut() {
                        g[l.emax_start + i] = lg[i] + bail!(pri.emax.grad_log_density(emax_s[i]));
                    }
                }
            }
            PoolingMode::RandomEffects => {
                let lt = v[l.emax_start + 1 + s_count];
                lp += bail!(pri.emax.log_density(mu_emax));
                lp += bail!(pri.tau_emax.log_density(tau_emax)) + lt;
                let mut du_sum = 0.0;
                for i in 0..s_count {
                    let u = v[l.emax_start + 1 + i];
                    lp += -0.5 * u * u;
                    if let Some(g) = grad.as_deref_mut() {
                        g[l.emax_start + 1 + i] = -u + lg[i] * tau_emax;
                    }
                    du_sum += lg[i] * u;
                }
                if let Some(g) = grad.as_deref_mut() {
                    g[l.emax_start] =
                        lg.iter().sum::<f64>() + bail!(pri.emax.grad_log_density(mu_emax));
                    g[l.emax_start + 1 + s_count] = du_sum * tau_emax
                        + bail!(pri.tau_emax.grad_log_density(tau_emax)) * tau_emax
                        + 1.0;
                }
            }
        }

        match l.ed50_mode {
            PoolingMode::Shared => {
                let [x, dxdz, logjac, dlj] = ed_fwd;
                lp += bail!(pri.ed50.log_density(x)) + logjac;
                if let Some(g) = grad.as_deref_mut() {
                    let like: f64 = (0..s_count).map(|i| la[i] * self.ratio[i]).sum();
                    g[l.ed50_start] = (like + bail!(pri.ed50.grad_log_density(x))) * dxdz + dlj;
                }
            }
            PoolingMode::FixedEffects => {
                for i in 0..s_count {
                    let [x, dxdz, logjac, dlj] = ed_fwd_fe[i];
                    lp += bail!(pri.ed50.log_density(x)) + logjac;
                    if let Some(g) = grad.as_deref_mut() {
                        g[l.ed50_start + i] =
                            (la[i] + bail!(pri.ed50.grad_log_density(x))) * dxdz + dlj;
                    }
                }
            }
            PoolingMode::RandomEffects => {
                let [x, dxdz, logjac, dlj] = ed_fwd;
                let lt = v[l.ed50_start + 1 + s_count];
                lp += bail!(pri.ed50.log_density(x)) + logjac;
                lp += bail!(pri.tau_ed50.log_density(tau_ed50)) + lt;
                // d ed50_own_i / d mu = ed50_own_i, etc.
                let mut b_sum = 0.0;
                let mut bu_sum = 0.0;
                for i in 0..s_count {
                    let u = v[l.ed50_start + 1 + i];
                    lp += -0.5 * u * u;
                    let b = la[i] * ed50_own[i];
                    b_sum += b;
                    bu_sum += b * u;
                    if let Some(g) = grad.as_deref_mut() {
                        g[l.ed50_start + 1 + i] = -u + b * tau_ed50;
                    }
                }
                if let Some(g) = grad.as_deref_mut() {
                    g[l.ed50_start] =
                        (b_sum / x + bail!(pri.ed50.grad_log_density(x))) * dxdz + dlj;
                    g[l.ed50_start + 1 + s_count] = bu_sum * tau_ed50
                        + bail!(pri.tau_ed50.grad_log_density(tau_ed50)) * tau_ed50
                        + 1.0;
                }
            }
        }

        if let Some(idx) = l.log_sigma {
            let n = self.obs.len() as f64;
            lp += bail!(pri.sigma.log_density(sigma)) + v[idx];
            if let Some(g) = grad {
                g[idx] = (sum_z2 - n) + bail!(pri.sigma.grad_log_density(sigma)) * sigma + 1.0;
            }
        }

        lp
    }
}

fn chunk_g(dose: f64, ed50: f64) -> f64 {
    if dose == 0.0 {
        0.0
    } else {
        dose / (ed50 + dose)
    }
}

/// Natural-scale parameters decoded from an unconstrained draw.
#[derive(Debug, Clone)]
pub struct NaturalParams {
    pub e0: f64,
    /// Per-schedule Emax (identical entries under a shared Emax).
    pub emax_s: Vec<f64>,
    pub mu_emax: f64,
    pub tau_emax: f64,
    /// Per-schedule ED50 on each schedule's own dose scale.
    pub ed50_own: Vec<f64>,
    pub tau_ed50: f64,
    pub sigma: f64,
}

fn natural_names(spec: &ModelSpec, labels: &[String], patient_level: bool) -> Vec<String> {
    let mut names = vec!["e0".to_string()];
    match spec.emax_mode {
        PoolingMode::Shared => names.push("emax".into()),
        PoolingMode::FixedEffects => {
            names.extend(labels.iter().map(|l| format!("emax[{l}]")));
        }
        PoolingMode::RandomEffects => {
            names.push("mu_emax".into());
            names.extend(labels.iter().map(|l| format!("emax[{l}]")));
            names.push("tau_emax".into());
        }
    }
    names.extend(labels.iter().map(|l| format!("ed50[{l}]")));
    if spec.ed50_mode == PoolingMode::RandomEffects {
        names.push("tau_ed50".into());
    }
    if patient_level {
        names.push("sigma".into());
    }
    names
}
