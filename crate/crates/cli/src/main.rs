//! Command-line front end: fit one pooling model, compare the five-model
//! menu by LOO-IC, or drive an operating-characteristics simulation study.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dosepool::data::dupilumab;
use dosepool::simulation::{run_study_with_workers, write_summary_csv, StudyFile};
use dosepool::summaries::{
    default_density_grid, marginal_density, write_curve_csv, write_density_csv, write_params_csv,
};
use dosepool::{
    curve_summary, diagnose, equidistant_grid, psis_loo, sample, summarize_params, Dataset, Error,
    ModelSpec, PoolingMode, Posterior, PosteriorDraws, PriorSpec, Result, SamplerConfig,
};

const RHAT_THRESHOLD: f64 = 1.05;

#[derive(Parser)]
#[command(
    name = "dosepool",
    version,
    about = "Emax dose-response models across administration schedules: pooled and partially \
             pooled Bayesian fits, LOO-IC model comparison, and simulation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and write parameter, curve, and density reports
    Fit(FitArgs),
    /// Fit a model menu on one dataset and rank by LOO-IC
    Compare(CompareArgs),
    /// Run an operating-characteristics simulation study
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV with columns schedule,dose,response[,se][,n][,interval_hours]
    #[arg(long, value_name = "FILE", conflicts_with = "builtin")]
    data: Option<PathBuf>,
    /// Embedded dataset; currently only "dupilumab"
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Require arm-level rows (mean and se); reject patient-level input
    #[arg(long)]
    arm_level: bool,
    /// Reference schedule label for pooling and dose conversion
    #[arg(long, value_name = "LABEL")]
    ref_schedule: Option<String>,
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum ModelKind {
    /// Complete pooling: every parameter shared
    Cp,
    /// Schedule-specific fixed-effects ED50
    PpFe,
    /// Schedule-specific random-effects ED50
    PpRe,
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum PoolArg {
    Shared,
    Fe,
    Re,
}

impl PoolArg {
    fn mode(self) -> PoolingMode {
        match self {
            PoolArg::Shared => PoolingMode::Shared,
            PoolArg::Fe => PoolingMode::FixedEffects,
            PoolArg::Re => PoolingMode::RandomEffects,
        }
    }
}

#[derive(Args)]
struct SamplerArgs {
    /// Number of MCMC chains
    #[arg(long, default_value_t = 3)]
    chains: usize,
    /// Total iterations per chain, warmup included
    #[arg(long = "iter", default_value_t = 4000)]
    iterations: usize,
    /// Warmup (adaptation) iterations per chain
    #[arg(long, default_value_t = 2000)]
    warmup: usize,
    /// RNG seed; when omitted a random seed is drawn, printed, and recorded
    #[arg(long)]
    seed: Option<u64>,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            iterations: self.iterations,
            warmup: self.warmup,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Pooling preset; --ed50/--emax override individual parameters
    #[arg(long, value_enum, default_value_t = ModelKind::Cp)]
    model: ModelKind,
    /// ED50 pooling override
    #[arg(long, value_enum)]
    ed50: Option<PoolArg>,
    /// Emax pooling override
    #[arg(long, value_enum)]
    emax: Option<PoolArg>,
    /// Heterogeneity prior for the ED50 scale, e.g. half-normal:1
    #[arg(long, value_name = "SPEC", default_value = "half-normal:1")]
    tau_prior: String,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Also write every kept draw to draws.csv
    #[arg(long)]
    save_draws: bool,
    /// Points on each dose-response curve grid
    #[arg(long, default_value_t = 30)]
    curve_points: usize,
    /// Upper end of the curve grid (default: largest reference-scale dose)
    #[arg(long)]
    curve_max: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated menu entries from 1-5: 1 CP, 2 FE ED50, 3 RE ED50,
    /// 4 FE ED50+Emax, 5 RE ED50+Emax
    #[arg(long, value_name = "LIST", default_value = "1,2,3,4,5")]
    models: String,
    /// Heterogeneity prior for the ED50 scale, e.g. half-normal:1
    #[arg(long, value_name = "SPEC", default_value = "half-normal:1")]
    tau_prior: String,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study description TOML (axes, truth, methods, sampler settings)
    #[arg(long, value_name = "FILE")]
    scenarios: PathBuf,
    /// Override the file's replication count
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads (default: one per core)
    #[arg(long)]
    workers: Option<usize>,
    /// Override the file's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for summary.csv and ledger.csv
    #[arg(long, value_name = "DIR", default_value = "sim-out")]
    out: PathBuf,
    /// Resume into an existing output directory, reusing its ledger
    #[arg(long, value_name = "DIR")]
    resume: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => run_fit(&args),
        Command::Compare(args) => run_compare(&args),
        Command::Simulate(args) => run_simulate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input, 3 for numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Data { .. }
        | Error::InvalidDesign(_)
        | Error::TooFewDoses(_)
        | Error::Io(_)
        | Error::Csv(_) => 2,
        _ => 3,
    }
}

fn resolve_seed(requested: Option<u64>) -> u64 {
    match requested {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            println!("seed: {s} (chosen at random; pass --seed {s} to reproduce)");
            s
        }
    }
}

fn load_dataset(args: &DataArgs) -> Result<Dataset> {
    let dataset = match (&args.data, &args.builtin) {
        (Some(path), None) => Dataset::from_csv_path(path, args.ref_schedule.as_deref())?,
        (None, Some(name)) => {
            if name != "dupilumab" {
                return Err(Error::InvalidDesign(format!(
                    "unknown builtin dataset '{name}'; available: dupilumab"
                )));
            }
            let mut data = dupilumab();
            if let Some(label) = &args.ref_schedule {
                let id = data.design.schedule_index(label).ok_or_else(|| {
                    Error::InvalidDesign(format!("schedule '{label}' not in the dataset"))
                })?;
                data.design.reference_schedule_id = id;
            }
            data
        }
        (None, None) => {
            return Err(Error::InvalidDesign(
                "provide a data source: --data FILE or --builtin dupilumab".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects --data with --builtin"),
    };
    if args.arm_level && !dataset.observations.is_arm_level() {
        return Err(Error::Data {
            row: 0,
            message: "--arm-level requires an 'se' column with a value on every row".into(),
        });
    }
    dataset.design.validate()?;
    Ok(dataset)
}

fn parse_tau_prior(spec: &str) -> Result<PriorSpec> {
    let scale = spec
        .strip_prefix("half-normal:")
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
        .ok_or_else(|| {
            Error::InvalidDesign(format!(
                "cannot parse heterogeneity prior '{spec}'; expected half-normal:SCALE"
            ))
        })?;
    Ok(PriorSpec::HalfNormal { scale })
}

fn build_spec(
    ed50: PoolingMode,
    emax: PoolingMode,
    dataset: &Dataset,
    tau_prior: &str,
) -> Result<ModelSpec> {
    let mut spec = ModelSpec::new(ed50, emax, &dataset.design);
    spec.priors.tau_ed50 = parse_tau_prior(tau_prior)?;
    Ok(spec)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .filter_map(|c| match c {
            '[' => Some('_'),
            ']' => None,
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' => Some(c),
            _ => Some('_'),
        })
        .collect()
}

fn write_draws_csv(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "chain,draw,{}", draws.names().join(","))?;
    let per_chain = draws.draws_per_chain();
    for i in 0..draws.n_total() {
        let row = draws.natural_row(i);
        let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(
            w,
            "{},{},{}",
            i / per_chain,
            i % per_chain,
            values.join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let seed = resolve_seed(args.sampler.seed);
    let ed50_mode = args.ed50.map(PoolArg::mode).unwrap_or(match args.model {
        ModelKind::Cp => PoolingMode::Shared,
        ModelKind::PpFe => PoolingMode::FixedEffects,
        ModelKind::PpRe => PoolingMode::RandomEffects,
    });
    let emax_mode = args.emax.map(PoolArg::mode).unwrap_or(PoolingMode::Shared);
    let spec = build_spec(ed50_mode, emax_mode, &dataset, &args.tau_prior)?;
    let posterior = Posterior::new(spec, &dataset)?;
    let config = args.sampler.config(seed);
    let draws = sample(&posterior, &config)?;
    let diagnostics = diagnose(&draws)?;
    let converged = diagnostics.converged(RHAT_THRESHOLD);

    fs::create_dir_all(&args.out)?;

    let table = summarize_params(&draws);
    write_params_csv(fs::File::create(args.out.join("params.csv"))?, &table)?;

    let hi = args.curve_max.unwrap_or_else(|| dataset.design.max_dose());
    let grid = equidistant_grid(0.0, hi, args.curve_points.max(2));
    for (s, schedule) in dataset.design.schedules.iter().enumerate() {
        let curve = curve_summary(&draws, &posterior, s, &grid)?;
        let path = args
            .out
            .join(format!("curve_{}.csv", sanitize(&schedule.label)));
        write_curve_csv(fs::File::create(path)?, &curve, "bayes")?;
    }

    let mut warnings = diagnostics.warnings.clone();
    if draws.n_total() >= 500 {
        for (p, name) in draws.names().iter().enumerate() {
            let xs = draws.natural_column(p);
            let dens_grid = default_density_grid(&xs, 256);
            let dens = marginal_density(&draws, p, &dens_grid)?;
            let path = args.out.join(format!("density_{}.csv", sanitize(name)));
            write_density_csv(fs::File::create(path)?, &dens)?;
        }
    } else {
        warnings.push("fewer than 500 draws; density estimates skipped".into());
    }

    if args.save_draws {
        write_draws_csv(&args.out.join("draws.csv"), &draws)?;
    }

    if !converged {
        let msg = format!(
            "WARNING: max R-hat {:.3} exceeds {RHAT_THRESHOLD}; chains have not mixed, \
             treat every estimate below as unreliable",
            diagnostics.max_rhat
        );
        eprintln!("{msg}");
        warnings.push(msg);
    }

    let report = serde_json::json!({
        "seed": seed,
        "chains": draws.n_chains(),
        "draws_per_chain": draws.draws_per_chain(),
        "post_warmup_draws": draws.n_total(),
        "converged": converged,
        "max_rhat": diagnostics.max_rhat,
        "min_ess_bulk": diagnostics.min_ess_bulk,
        "divergences": diagnostics.divergences,
        "max_depth_hits": diagnostics.max_depth_hits,
        "step_sizes": diagnostics.step_sizes,
        "mean_accepts": diagnostics.mean_accepts,
        "parameters": diagnostics.parameters,
        "warnings": warnings,
    });
    fs::write(
        args.out.join("diagnostics.json"),
        serde_json::to_string_pretty(&report)?,
    )?;

    println!(
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "parameter", "mean", "sd", "median", "q025", "q975"
    );
    for r in &table {
        println!(
            "{:<16} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            r.name, r.mean, r.sd, r.median, r.q025, r.q975
        );
    }
    println!(
        "max R-hat {:.4} | min bulk ESS {:.0} | divergences {} | outputs in {}",
        diagnostics.max_rhat,
        diagnostics.min_ess_bulk,
        diagnostics.divergences,
        args.out.display()
    );
    Ok(())
}

/// The five-model menu over (ED50, Emax) pooling.
fn menu_entry(n: u8) -> Option<(&'static str, PoolingMode, PoolingMode)> {
    match n {
        1 => Some(("Model 1 (CP)", PoolingMode::Shared, PoolingMode::Shared)),
        2 => Some((
            "Model 2 (FE ED50)",
            PoolingMode::FixedEffects,
            PoolingMode::Shared,
        )),
        3 => Some((
            "Model 3 (RE ED50)",
            PoolingMode::RandomEffects,
            PoolingMode::Shared,
        )),
        4 => Some((
            "Model 4 (FE ED50+Emax)",
            PoolingMode::FixedEffects,
            PoolingMode::FixedEffects,
        )),
        5 => Some((
            "Model 5 (RE ED50+Emax)",
            PoolingMode::RandomEffects,
            PoolingMode::RandomEffects,
        )),
        _ => None,
    }
}

fn run_compare(args: &CompareArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let seed = resolve_seed(args.sampler.seed);
    let requested: Vec<u8> = args
        .models
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .ok()
                .filter(|n| (1..=5).contains(n))
                .ok_or_else(|| {
                    Error::InvalidDesign(format!("--models entries must be in 1..5, got '{t}'"))
                })
        })
        .collect::<Result<_>>()?;
    if requested.is_empty() {
        return Err(Error::InvalidDesign("--models selected nothing".into()));
    }

    struct Row {
        model: u8,
        label: &'static str,
        outcome: Result<(f64, f64)>,
    }
    let mut rows = Vec::new();
    for (idx, &n) in requested.iter().enumerate() {
        let (label, ed50, emax) = menu_entry(n).expect("validated above");
        // Each menu entry gets its own stream so duplicate entries are
        // independent replicates rather than bit-identical copies.
        let entry_seed = seed.wrapping_add(idx as u64);
        let outcome = build_spec(ed50, emax, &dataset, &args.tau_prior)
            .and_then(|spec| Posterior::new(spec, &dataset))
            .and_then(|posterior| {
                let draws = sample(&posterior, &args.sampler.config(entry_seed))?;
                let loo = psis_loo(&draws)?;
                let max_k = loo.pareto_k.iter().cloned().fold(f64::NAN, f64::max);
                Ok((loo.loo_ic, max_k))
            });
        if let Err(e) = &outcome {
            eprintln!("{label}: fit failed: {e}");
        }
        rows.push(Row {
            model: n,
            label,
            outcome,
        });
    }

    let best = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|(ic, _)| *ic))
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::FitFailure(
            "every requested model failed to fit".into(),
        ));
    }

    fs::create_dir_all(&args.out)?;
    let mut csv = std::io::BufWriter::new(fs::File::create(args.out.join("comparison.csv"))?);
    writeln!(csv, "model,label,loo_ic,delta_loo_ic,max_khat,status")?;
    println!(
        "{:<24} {:>10} {:>12} {:>10}",
        "model", "LOO-IC", "delta", "max k-hat"
    );
    for r in &rows {
        match &r.outcome {
            Ok((ic, k)) => {
                writeln!(csv, "{},{},{},{},{},ok", r.model, r.label, ic, ic - best, k)?;
                println!(
                    "{:<24} {:>10.2} {:>12.2} {:>10.2}",
                    r.label,
                    ic,
                    ic - best,
                    k
                );
            }
            Err(e) => {
                let msg = e.to_string().replace(',', ";");
                writeln!(csv, "{},{},,,,failed: {}", r.model, r.label, msg)?;
                println!(
                    "{:<24} {:>10} {:>12} {:>10}  (failed: {e})",
                    r.label, "-", "-", "-"
                );
            }
        }
    }
    csv.flush()?;
    println!(
        "comparison table written to {}",
        args.out.join("comparison.csv").display()
    );
    Ok(())
}

fn load_study_file(path: &Path) -> Result<StudyFile> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            // Bundled studies resolve by file name when no such file exists.
            let bundled = match path.file_name().and_then(|n| n.to_str()) {
                Some("paper_fig2.toml") => Some(include_str!("../../../scenarios/paper_fig2.toml")),
                Some("paper_table4.toml") => {
                    Some(include_str!("../../../scenarios/paper_table4.toml"))
                }
                _ => None,
            };
            match bundled {
                Some(text) => text.to_string(),
                None => return Err(e.into()),
            }
        }
    };
    toml::from_str(&text)
        .map_err(|e| Error::InvalidDesign(format!("scenario file {}: {e}", path.display())))
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let mut file = load_study_file(&args.scenarios)?;
    if let Some(reps) = args.reps {
        file.replications = reps;
    }
    if let Some(seed) = args.seed {
        file.master_seed = seed;
    }
    let out = args.resume.as_ref().unwrap_or(&args.out).clone();
    fs::create_dir_all(&out)?;
    let ledger = out.join("ledger.csv");
    if args.resume.is_none() && ledger.exists() {
        fs::remove_file(&ledger)?;
    }

    let scenarios = file.scenarios();
    let config = file.study_config(Some(ledger));
    println!(
        "running {} scenarios x {} replications (master seed {})",
        scenarios.len(),
        file.replications,
        config.master_seed
    );
    let results = run_study_with_workers(&scenarios, &config, args.workers)?;

    write_summary_csv(fs::File::create(out.join("summary.csv"))?, &results)?;
    println!(
        "{:<28} {:<10} {:>6} {:>8} {:>10} {:>10}",
        "scenario", "method", "ok", "mae", "coverage", "length"
    );
    for res in &results {
        for m in &res.methods {
            println!(
                "{:<28} {:<10} {:>6} {:>8.3} {:>10.3} {:>10.3}",
                res.scenario.id,
                m.method.label(),
                m.n_ok,
                m.mae,
                m.coverage,
                m.length
            );
        }
    }
    println!("summary written to {}", out.join("summary.csv").display());
    Ok(())
}
