//! Dose-response meta-modeling for trials with multiple administration
//! schedules: pooled and partially pooled Emax models, a gradient-based
//! MCMC engine, posterior summaries, leave-one-out model comparison, a
//! maximum-likelihood comparator, and an operating-characteristics
//! simulation layer.

pub mod data;
pub mod error;
pub mod loo;
pub mod mle;
pub mod model;
pub mod posterior;
pub mod priors;
pub mod sampler;
pub mod simulation;
pub mod summaries;

pub use data::{ArmObs, Dataset, Observations, PatientObs};
pub use error::{Error, Result};
pub use loo::{psis_loo, psis_loo_columns, LooResult};
pub use mle::{curve_ci, fit_mle, CurveCi, MleFit};
pub use model::{
    convert_dose, emax_response, interval_for_label, rescale_ed50, Arm, EmaxParams, Schedule,
    TrialDesign,
};
pub use posterior::{ModelSpec, NaturalParams, PoolingMode, Posterior, PriorSet};
pub use priors::{functional_uniform_exact, wip_range, PriorSpec};
pub use sampler::diagnostics::{diagnose, FitDiagnostics, ParamDiagnostics};
pub use sampler::{sample, ChainStats, PosteriorDraws, SamplerConfig};
pub use simulation::{
    figure2_scenarios, generate_trial, run_study, table4_scenarios, Method, MethodSummary,
    Scenario, ScenarioResult, StudyConfig, StudyFile,
};
pub use summaries::{
    curve_summary, equidistant_grid, marginal_density, quantile, summarize_params, CurvePoint,
    DensityPoint, ParamSummary,
};
