//! Operating-characteristics simulation: scenario grids over the monthly
//! ED50 (and optionally the monthly Emax), patient-level data generation,
//! four fitting methods, and MAE / coverage / interval-length metrics on a
//! fixed biweekly dose grid.
//!
//! Every replication is reproducible from (master seed, scenario id,
//! replication index) alone, so runs are deterministic for any worker count
//! and can resume from a CSV ledger.

use std::collections::HashSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{Dataset, Observations, PatientObs};
use crate::error::{Error, Result};
use crate::mle::{curve_ci, fit_mle};
use crate::model::{convert_dose, emax_response, Arm, EmaxParams, Schedule, TrialDesign};
use crate::posterior::{ModelSpec, PoolingMode, Posterior};
use crate::sampler::{sample, standard_normal, SamplerConfig};
use crate::summaries::{curve_summary, equidistant_grid};

/// ED50 bounds shared by every simulation fit.
pub const SIM_ED50_BOUNDS: (f64, f64) = (0.001, 15.0);
/// Number of evaluation doses on the biweekly grid.
pub const EVAL_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CpFreq,
    CpBayes,
    PpFe,
    PpRe,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::CpFreq, Method::CpBayes, Method::PpFe, Method::PpRe];

    pub fn label(self) -> &'static str {
        match self {
            Method::CpFreq => "cp-freq",
            Method::CpBayes => "cp-bayes",
            Method::PpFe => "pp-fe",
            Method::PpRe => "pp-re",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.label() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One cell of the study grid. Truth parameters are on each schedule's own
/// dose scale; `both_params` additionally makes Emax schedule-specific in
/// the partial-pooling fits.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Scenario {
    pub id: String,
    pub e0: f64,
    pub emax_biweekly: f64,
    pub emax_monthly: f64,
    pub ed50_biweekly: f64,
    pub ed50_monthly: f64,
    pub sigma: f64,
    pub n_per_arm: u32,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub both_params: bool,
}

impl Scenario {
    /// Placebo plus 1, 3, 10 mg/kg on each of the two schedules.
    pub fn design(&self) -> TrialDesign {
        let schedules = vec![
            Schedule::new("biweekly", 336.0),
            Schedule::new("monthly", 672.0),
        ];
        let mut arms = vec![Arm {
            schedule_id: 0,
            dose: 0.0,
            n_planned: self.n_per_arm,
        }];
        for &dose in &[1.0, 3.0, 10.0] {
            arms.push(Arm {
                schedule_id: 0,
                dose,
                n_planned: self.n_per_arm,
            });
        }
        for &dose in &[1.0, 3.0, 10.0] {
            arms.push(Arm {
                schedule_id: 1,
                dose,
                n_planned: self.n_per_arm,
            });
        }
        TrialDesign::new(schedules, arms, 0).expect("static design is valid")
    }

    pub fn truth(&self, schedule_id: usize) -> EmaxParams {
        match schedule_id {
            0 => EmaxParams {
                e0: self.e0,
                emax: self.emax_biweekly,
                ed50: self.ed50_biweekly,
            },
            _ => EmaxParams {
                e0: self.e0,
                emax: self.emax_monthly,
                ed50: self.ed50_monthly,
            },
        }
    }

    /// Evaluation doses: 10 equidistant points on [0, 10], biweekly scale.
    pub fn eval_grid() -> Vec<f64> {
        equidistant_grid(0.0, 10.0, EVAL_POINTS)
    }

    pub fn truth_on_grid(&self) -> Vec<f64> {
        let p = self.truth(0);
        Scenario::eval_grid()
            .iter()
            .map(|&d| emax_response(&p, d))
            .collect()
    }
}

/// Stable seed for one replication, independent of execution order.
pub fn replication_seed(master_seed: u64, scenario_id: &str, rep: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scenario_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(master_seed ^ h ^ (rep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draw a patient-level dataset: n_per_arm responses per arm, normal around
/// each schedule's true curve.
pub fn generate_trial(scenario: &Scenario, seed: u64) -> Result<Dataset> {
    use rand::SeedableRng;
    let design = scenario.design();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::with_capacity(design.arms.len() * scenario.n_per_arm as usize);
    for arm in &design.arms {
        let truth = scenario.truth(arm.schedule_id);
        let mean = emax_response(&truth, arm.dose);
        for _ in 0..scenario.n_per_arm {
            let y = mean + scenario.sigma * standard_normal(&mut rng);
            obs.push(PatientObs {
                schedule_id: arm.schedule_id,
                dose: arm.dose,
                response: y,
            });
        }
    }
    Dataset::new(design, Observations::PatientLevel(obs))
}

/// Per-replication curve metrics on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RepMetrics {
    pub mae: f64,
    pub covered: Vec<bool>,
    pub lengths: Vec<f64>,
}

impl RepMetrics {
    pub fn coverage(&self) -> f64 {
        self.covered.iter().filter(|&&c| c).count() as f64 / self.covered.len() as f64
    }

    pub fn mean_length(&self) -> f64 {
        self.lengths.iter().sum::<f64>() / self.lengths.len() as f64
    }
}

/// Compare a fitted curve (estimate, lower, upper per dose) to the truth.
pub fn evaluate_replication(curve: &[(f64, f64, f64)], truth: &[f64]) -> RepMetrics {
    assert_eq!(curve.len(), truth.len());
    let n = truth.len() as f64;
    let mae = curve
        .iter()
        .zip(truth)
        .map(|(c, t)| (c.0 - t).abs())
        .sum::<f64>()
        / n;
    let covered = curve
        .iter()
        .zip(truth)
        .map(|(c, t)| c.1 <= *t && *t <= c.2)
        .collect();
    let lengths = curve.iter().map(|c| c.2 - c.1).collect();
    RepMetrics {
        mae,
        covered,
        lengths,
    }
}

/// One ledger row: metrics (or failure) for a (scenario, replication,
/// method) triple.
#[derive(Debug, Clone)]
pub struct RepRecord {
    pub scenario: String,
    pub rep: usize,
    pub method: Method,
    pub seed: u64,
    pub status: String,
    pub mae: f64,
    pub coverage: f64,
    pub length: f64,
    pub covered: Vec<bool>,
}

impl RepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn model_spec_for(method: Method, scenario: &Scenario, design: &TrialDesign) -> ModelSpec {
    let spec = match (method, scenario.both_params) {
        (Method::CpBayes, _) => ModelSpec::complete_pooling(design),
        (Method::PpFe, false) => ModelSpec::fixed_effects(design),
        (Method::PpFe, true) => {
            ModelSpec::new(PoolingMode::FixedEffects, PoolingMode::FixedEffects, design)
        }
        (Method::PpRe, false) => ModelSpec::random_effects(design),
        (Method::PpRe, true) => ModelSpec::new(
            PoolingMode::RandomEffects,
            PoolingMode::RandomEffects,
            design,
        ),
        (Method::CpFreq, _) => unreachable!("frequentist fit has no model spec"),
    };
    spec.with_ed50_bounds(SIM_ED50_BOUNDS.0, SIM_ED50_BOUNDS.1)
}

fn fit_curve(
    method: Method,
    scenario: &Scenario,
    dataset: &Dataset,
    grid: &[f64],
    fit_seed: u64,
    sampler: &SamplerConfig,
) -> Result<Vec<(f64, f64, f64)>> {
    if method == Method::CpFreq {
        let reference = dataset.design.reference().clone();
        let (mut doses, mut ys) = (Vec::new(), Vec::new());
        match &dataset.observations {
            Observations::PatientLevel(obs) => {
                for o in obs {
                    let sched = &dataset.design.schedules[o.schedule_id];
                    doses.push(convert_dose(o.dose, sched, &reference));
                    ys.push(o.response);
                }
            }
            Observations::ArmLevel(_) => {
                return Err(Error::FitFailure(
                    "frequentist comparator expects patient-level data".into(),
                ))
            }
        }
        let fit = fit_mle(&doses, &ys, SIM_ED50_BOUNDS)?;
        return Ok(curve_ci(&fit, grid)
            .iter()
            .map(|c| (c.estimate, c.lower, c.upper))
            .collect());
    }
    let spec = model_spec_for(method, scenario, &dataset.design);
    let posterior = Posterior::new(spec, dataset)?;
    let cfg = SamplerConfig {
        seed: fit_seed,
        ..sampler.clone()
    };
    let draws = sample(&posterior, &cfg)?;
    let curve = curve_summary(&draws, &posterior, 0, grid)?;
    Ok(curve.iter().map(|c| (c.median, c.lower, c.upper)).collect())
}

/// Run the requested methods for one replication. Failures are recorded as
/// rows with a failed status, never dropped.
pub fn run_replication(
    scenario: &Scenario,
    rep: usize,
    master_seed: u64,
    sampler: &SamplerConfig,
    methods: &[Method],
) -> Vec<RepRecord> {
    let seed = replication_seed(master_seed, &scenario.id, rep);
    let grid = Scenario::eval_grid();
    let truth = scenario.truth_on_grid();
    let dataset = generate_trial(scenario, seed);
    methods
        .iter()
        .map(|&method| {
            let fit_seed = splitmix(seed ^ (method as u64 + 1));
            let outcome = dataset
                .as_ref()
                .map_err(|e| Error::FitFailure(format!("data generation failed: {e}")));
            let outcome = outcome
                .and_then(|data| fit_curve(method, scenario, data, &grid, fit_seed, sampler));
            match outcome {
                Ok(curve) => {
                    let m = evaluate_replication(&curve, &truth);
                    RepRecord {
                        scenario: scenario.id.clone(),
                        rep,
                        method,
                        seed,
                        status: "ok".into(),
                        mae: m.mae,
                        coverage: m.coverage(),
                        length: m.mean_length(),
                        covered: m.covered,
                    }
                }
                Err(e) => RepRecord {
                    scenario: scenario.id.clone(),
                    rep,
                    method,
                    seed,
                    status: format!("failed: {e}"),
                    mae: f64::NAN,
                    coverage: f64::NAN,
                    length: f64::NAN,
                    covered: Vec::new(),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mae: f64,
    pub coverage: f64,
    pub length: f64,
    pub per_dose_coverage: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub methods: Vec<MethodSummary>,
    pub records: Vec<RepRecord>,
}

impl ScenarioResult {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

/// Aggregate a scenario's records: plain means over successful replications.
pub fn aggregate(scenario: &Scenario, records: Vec<RepRecord>) -> ScenarioResult {
    let mut methods = Vec::new();
    for &method in &scenario.methods {
        let rows: Vec<&RepRecord> = records
            .iter()
            .filter(|r| r.method == method && r.scenario == scenario.id)
            .collect();
        let ok: Vec<&&RepRecord> = rows.iter().filter(|r| r.is_ok()).collect();
        let n_ok = ok.len();
        let n_failed = rows.len() - n_ok;
        let mean = |f: &dyn Fn(&RepRecord) -> f64| {
            if n_ok == 0 {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / n_ok as f64
            }
        };
        let per_dose_coverage = (0..EVAL_POINTS)
            .map(|l| mean(&|r: &RepRecord| if r.covered[l] { 1.0 } else { 0.0 }))
            .collect();
        methods.push(MethodSummary {
            method,
            n_ok,
            n_failed,
            mae: mean(&|r: &RepRecord| r.mae),
            coverage: mean(&|r: &RepRecord| r.coverage),
            length: mean(&|r: &RepRecord| r.length),
            per_dose_coverage,
        });
    }
    ScenarioResult {
        scenario: scenario.clone(),
        methods,
        records,
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub master_seed: u64,
    pub sampler: SamplerConfig,
    /// Append-only per-replication CSV; existing rows are not recomputed.
    pub ledger: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            master_seed: 0,
            sampler: SamplerConfig {
                chains: 2,
                iterations: 1500,
                warmup: 750,
                ..Default::default()
            },
            ledger: None,
        }
    }
}

const LEDGER_HEADER: &str = "scenario,rep,method,seed,status,mae,coverage,length,covered";

fn covered_string(covered: &[bool]) -> String {
    covered.iter().map(|&c| if c { '1' } else { '0' }).collect()
}

/// Load previously computed replication rows.
pub fn load_ledger(path: &Path) -> Result<Vec<RepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("").to_string();
        let method = Method::parse(&get(2)).ok_or_else(|| {
            Error::InvalidDesign(format!("unknown method '{}' in ledger", get(2)))
        })?;
        let parse_f = |i: usize| get(i).parse::<f64>().unwrap_or(f64::NAN);
        out.push(RepRecord {
            scenario: get(0),
            rep: get(1)
                .parse()
                .map_err(|_| Error::InvalidDesign("bad rep in ledger".into()))?,
            method,
            seed: get(3)
                .parse()
                .map_err(|_| Error::InvalidDesign("bad seed in ledger".into()))?,
            status: get(4),
            mae: parse_f(5),
            coverage: parse_f(6),
            length: parse_f(7),
            covered: get(8).chars().map(|c| c == '1').collect(),
        });
    }
    Ok(out)
}

fn append_ledger(path: &Path, records: &[RepRecord], write_header: bool) -> Result<()> {
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut w = std::io::BufWriter::new(file);
    if write_header {
        writeln!(w, "{LEDGER_HEADER}")?;
    }
    for r in records {
        let status = if r.status.contains(',') {
            r.status.replace(',', ";")
        } else {
            r.status.clone()
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.rep,
            r.method.label(),
            r.seed,
            status,
            r.mae,
            r.coverage,
            r.length,
            covered_string(&r.covered)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Run every scenario, parallel over replications, and aggregate. Output is
/// identical for any worker count; with a ledger path, already-recorded
/// (scenario, replication, method) rows are reused.
pub fn run_study(scenarios: &[Scenario], config: &StudyConfig) -> Result<Vec<ScenarioResult>> {
    let mut existing: Vec<RepRecord> = Vec::new();
    let mut ledger_has_rows = false;
    if let Some(path) = &config.ledger {
        if path.exists() {
            existing = load_ledger(path)?;
            ledger_has_rows = true;
        }
    }
    let done: HashSet<(String, usize, Method)> = existing
        .iter()
        .map(|r| (r.scenario.clone(), r.rep, r.method))
        .collect();

    let mut results = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let todo: Vec<(usize, Vec<Method>)> = (0..scenario.replications)
            .map(|rep| {
                let missing: Vec<Method> = scenario
                    .methods
                    .iter()
                    .copied()
                    .filter(|&m| !done.contains(&(scenario.id.clone(), rep, m)))
                    .collect();
                (rep, missing)
            })
            .filter(|(_, m)| !m.is_empty())
            .collect();

        let fresh: Vec<RepRecord> = todo
            .par_iter()
            .map(|(rep, methods)| {
                run_replication(scenario, *rep, config.master_seed, &config.sampler, methods)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();

        if let Some(path) = &config.ledger {
            append_ledger(path, &fresh, !ledger_has_rows)?;
            ledger_has_rows = true;
        }

        let mut records: Vec<RepRecord> = existing
            .iter()
            .filter(|r| r.scenario == scenario.id && r.rep < scenario.replications)
            .cloned()
            .collect();
        records.extend(fresh);
        records.sort_by_key(|a| (a.rep, a.method as usize));
        results.push(aggregate(scenario, records));
    }
    Ok(results)
}

/// Same as [`run_study`], pinned to a fixed worker count. Results are
/// identical either way; the knob only bounds parallelism.
pub fn run_study_with_workers(
    scenarios: &[Scenario],
    config: &StudyConfig,
    workers: Option<usize>,
) -> Result<Vec<ScenarioResult>> {
    match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::FitFailure(format!("worker pool: {e}")))?;
            pool.install(|| run_study(scenarios, config))
        }
        None => run_study(scenarios, config),
    }
}

/// One summary row per (scenario, method).
pub fn write_summary_csv<W: std::io::Write>(mut w: W, results: &[ScenarioResult]) -> Result<()> {
    writeln!(w, "scenario,method,n_ok,n_failed,mae,coverage,length")?;
    for res in results {
        for m in &res.methods {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                res.scenario.id, m.method, m.n_ok, m.n_failed, m.mae, m.coverage, m.length
            )?;
        }
    }
    Ok(())
}

/// Declarative study description, deserializable from TOML or JSON. The
/// scenario set is the cross product of the axes.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub master_seed: u64,
    pub replications: usize,
    pub truth: TruthBlock,
    pub axes: AxesBlock,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub both_params: bool,
    #[serde(default)]
    pub sampler: SamplerBlock,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthBlock {
    pub e0: f64,
    pub emax: f64,
    pub sigma: f64,
    pub ed50_biweekly: f64,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxesBlock {
    pub ed50_monthly: Vec<f64>,
    pub n_per_arm: Vec<u32>,
    #[serde(default)]
    pub emax_monthly: Option<Vec<f64>>,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    pub chains: usize,
    pub iterations: usize,
    pub warmup: usize,
}

impl Default for SamplerBlock {
    fn default() -> Self {
        SamplerBlock {
            chains: 2,
            iterations: 1500,
            warmup: 750,
        }
    }
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl StudyFile {
    pub fn scenarios(&self) -> Vec<Scenario> {
        let emax_axis = match &self.axes.emax_monthly {
            Some(v) => v.clone(),
            None => vec![self.truth.emax],
        };
        let vary_emax = self.axes.emax_monthly.is_some();
        let mut out = Vec::new();
        for &emax_mo in &emax_axis {
            for &ed50_mo in &self.axes.ed50_monthly {
                for &n in &self.axes.n_per_arm {
                    let id = if vary_emax {
                        format!("emaxmo{emax_mo}_ed50mo{ed50_mo}_n{n}")
                    } else {
                        format!("ed50mo{ed50_mo}_n{n}")
                    };
                    out.push(Scenario {
                        id,
                        e0: self.truth.e0,
                        emax_biweekly: self.truth.emax,
                        emax_monthly: emax_mo,
                        ed50_biweekly: self.truth.ed50_biweekly,
                        ed50_monthly: ed50_mo,
                        sigma: self.truth.sigma,
                        n_per_arm: n,
                        replications: self.replications,
                        methods: self.methods.clone(),
                        both_params: self.both_params,
                    });
                }
            }
        }
        out
    }

    pub fn study_config(&self, ledger: Option<PathBuf>) -> StudyConfig {
        StudyConfig {
            master_seed: self.master_seed,
            sampler: SamplerConfig {
                chains: self.sampler.chains,
                iterations: self.sampler.iterations,
                warmup: self.sampler.warmup,
                ..Default::default()
            },
            ledger,
        }
    }
}

/// The 27-scenario main grid: ED50_monthly x sample size.
pub fn figure2_scenarios(replications: usize) -> Vec<Scenario> {
    let file = StudyFile {
        master_seed: 0,
        replications,
        truth: TruthBlock {
            e0: -20.0,
            emax: -60.0,
            sigma: 35.0,
            ed50_biweekly: 2.0,
        },
        axes: AxesBlock {
            ed50_monthly: vec![1.0, 2.0, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 10.0],
            n_per_arm: vec![30, 45, 60],
            emax_monthly: None,
        },
        methods: all_methods(),
        both_params: false,
        sampler: SamplerBlock::default(),
    };
    file.scenarios()
}

/// The Emax-heterogeneity grid: schedule-specific Emax and ED50 in the
/// partial-pooling fits.
pub fn table4_scenarios(replications: usize) -> Vec<Scenario> {
    let file = StudyFile {
        master_seed: 0,
        replications,
        truth: TruthBlock {
            e0: -20.0,
            emax: -60.0,
            sigma: 35.0,
            ed50_biweekly: 2.0,
        },
        axes: AxesBlock {
            ed50_monthly: vec![4.0],
            n_per_arm: vec![45],
            emax_monthly: Some(vec![-70.0, -60.0, -50.0]),
        },
        methods: all_methods(),
        both_params: true,
        sampler: SamplerBlock::default(),
    };
    file.scenarios()
}
