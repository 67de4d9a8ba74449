//! Command-line driver: `simulate`, `sample`, `relabel`, `diagnose`, `rhat`
//! and `compare`, plus the file formats they exchange.
//!
//! A run directory (`--out`) holds:
//!
//! ```text
//! dataset.csv  dataset.meta        observations, truth, generator settings
//! trace.csv    trace.meta          the raw MCMC trace
//! relabel/<method>.csv / .meta     relabelled traces
//! relabel/<method>.perm.csv        one permutation per draw
//! relabel/fs.excluded.csv          draws dropped by the k-means method
//! relabel/timings.csv              wall-clock seconds per method
//! report/*.csv                     diagnostics
//! rhat.csv                         Gelman-Rubin statistics
//! ```
//!
//! Everything except the two `timings.csv` files is a deterministic function
//! of the inputs and the seed.

pub mod experiment;
pub mod files;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use experiment::Experiment;
use files::{
    fmt_f64, meta_path, read_dataset, read_permutations, read_table, read_trace, write_dataset,
    write_permutations, write_table, write_trace, Meta,
};

use crate::diagnostics::{diagnose, gelman_rubin, DiagnosticsReport, KlConfig, RhatReport};
use crate::error::{Error, Result};
use crate::model::{Dataset, MixtureSpec, Permutation, Trace};
use crate::relabel::{
    relabel, relabel_minvar_chains, select_pivot, CeleuxScale, MarinDirection, MarinOptions,
    Method, RelabelConfig, RelabelResult, DEFAULT_M,
};

#[derive(Debug, Parser)]
#[command(name = "labelswitch", version, about = "Undo label switching in mixture-model MCMC output")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset from a built-in experiment.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write a trace.
    Sample(SampleArgs),
    /// Relabel a trace with one or more methods.
    Relabel(RelabelArgs),
    /// Compute diagnostics for relabelled traces.
    Diagnose(DiagnoseArgs),
    /// Relabel several chains and report R-hat per coordinate.
    Rhat(RhatArgs),
    /// simulate, sample, relabel and diagnose in one go.
    Compare(CompareArgs),
}

#[derive(Clone, Debug, Args)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value = "eq7")]
    pub experiment: Experiment,
    /// Number of observations (fixed for galaxy and spatial).
    #[arg(long)]
    pub n: Option<usize>,
    /// Lattice size for the spatial experiment, e.g. `10,10,4`.
    #[arg(long, value_parser = experiment::parse_dims)]
    pub dims: Option<[usize; 3]>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Run directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Clone, Debug, Args)]
pub struct SamplerArgs {
    /// Existing dataset; by default `<out>/dataset.csv`, simulated if absent.
    #[arg(long = "data")]
    pub data_file: Option<PathBuf>,
    /// Number of components (defaults to the experiment's).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Random relabelling moves during sampling (on by default for spatial).
    #[arg(long)]
    pub inject_switching: Option<bool>,
}

#[derive(Clone, Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Clone, Debug, Args)]
pub struct MethodArgs {
    /// A method name, a comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    pub method: String,
    /// Reference window size for celeux and minvar.
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value = "max")]
    pub marin_direction: MarinDirection,
    /// Divisor for celeux residuals: `variance` or `sd`.
    #[arg(long, default_value = "variance")]
    pub celeux_scale: CeleuxScale,
}

impl MethodArgs {
    pub fn methods(&self) -> Result<Vec<Method>> {
        parse_methods(&self.method)
    }

    pub fn config(&self) -> RelabelConfig {
        RelabelConfig {
            m: self.m,
            marin: MarinOptions {
                direction: self.marin_direction,
                ..MarinOptions::default()
            },
            celeux_scale: self.celeux_scale,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct RelabelArgs {
    /// Trace to relabel; by default `<out>/trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Dataset for derived allocations; by default `<out>/dataset.csv` if present.
    #[arg(long = "data")]
    pub data_file: Option<PathBuf>,
    #[command(flatten)]
    pub methods: MethodArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, default_value = "all")]
    pub method: String,
    /// Raw trace, used for the MAP reference when the data has no truth.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long = "data")]
    pub data_file: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct RhatArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Number of chains; chain `j` uses seed `seed + j`.
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
}

#[derive(Clone, Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub methods: MethodArgs,
}

/// `all`, one name or a comma-separated list; unknown names list the registry.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a).map(drop),
        Command::Sample(a) => cmd_sample(&a).map(drop),
        Command::Relabel(a) => cmd_relabel(&a).map(drop),
        Command::Diagnose(a) => cmd_diagnose(&a).map(drop),
        Command::Rhat(a) => cmd_rhat(&a).map(drop),
        Command::Compare(a) => cmd_compare(&a).map(drop),
    }
}

pub fn dataset_path(out: &Path) -> PathBuf {
    out.join("dataset.csv")
}

pub fn trace_path(out: &Path) -> PathBuf {
    out.join("trace.csv")
}

pub fn relabel_dir(out: &Path) -> PathBuf {
    out.join("relabel")
}

pub fn report_dir(out: &Path) -> PathBuf {
    out.join("report")
}

/// Writes `<out>/dataset.csv` and returns its path.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<PathBuf> {
    let a = &args.data;
    let (data, meta) = experiment::simulate(a.experiment, a.n, a.dims, a.seed)?;
    let path = dataset_path(&a.out);
    write_dataset(&path, &data, &meta)?;
    log::info!("simulate: {} observations -> {}", data.n(), path.display());
    Ok(path)
}

/// The dataset named by `--data`, else `<out>/dataset.csv`, simulating it if needed.
fn load_or_simulate(data: &DataArgs, file: Option<&Path>) -> Result<(Dataset, Meta)> {
    if let Some(p) = file {
        return read_dataset(p);
    }
    let path = dataset_path(&data.out);
    if !path.exists() {
        if data.experiment == Experiment::Custom {
            return Err(Error::InvalidConfig(
                "the custom experiment needs --data <csv>".into(),
            ));
        }
        cmd_simulate(&SimulateArgs { data: data.clone() })?;
    }
    read_dataset(&path)
}

/// Sampler settings resolved against the experiment defaults.
fn sampler_settings(data: &DataArgs, s: &SamplerArgs, dataset: &Dataset) -> Result<(usize, usize, usize, bool)> {
    let exp = data.experiment;
    let k = s.k.or(exp.default_k()).ok_or_else(|| {
        Error::InvalidConfig("--k is required for the custom experiment".into())
    })?;
    if let Some(spec) = exp.fixture_spec()? {
        if spec.dim() != dataset.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                actual: dataset.dim(),
            });
        }
    }
    let (iters, burn) = exp.default_iterations();
    let inject = s.inject_switching.unwrap_or(exp == Experiment::Spatial);
    Ok((k, s.iters.unwrap_or(iters), s.burnin.unwrap_or(burn), inject))
}

fn sample_into(data: &DataArgs, s: &SamplerArgs, seed: u64, path: &Path) -> Result<Trace> {
    let (dataset, dmeta) = load_or_simulate(data, s.data_file.as_deref())?;
    let (k, iters, burn, inject) = sampler_settings(data, s, &dataset)?;
    if let Some(kt) = dmeta.parse::<usize>("true_k", Path::new("dataset.meta"))? {
        if kt != k {
            log::info!("fitting K = {k} to data generated with K = {kt}");
        }
    }
    log::info!("sample: {} iterations ({} burn-in), K = {k}, seed {seed}", iters, burn);
    let (trace, mut meta) = experiment::run_sampler(&dataset, &dmeta, k, iters, burn, seed, inject)?;
    meta.set("experiment", data.experiment.name());
    write_trace(path, &trace, &meta)?;
    log::info!("sample: {} draws -> {}", trace.len(), path.display());
    Ok(trace)
}

/// Writes `<out>/trace.csv` and returns its path.
pub fn cmd_sample(args: &SampleArgs) -> Result<PathBuf> {
    let path = trace_path(&args.data.out);
    sample_into(&args.data, &args.sampler, args.data.seed, &path)?;
    Ok(path)
}

fn optional_dataset(file: Option<&Path>, out: &Path) -> Result<Option<Dataset>> {
    match file {
        Some(p) => Ok(Some(read_dataset(p)?.0)),
        None => {
            let p = dataset_path(out);
            if p.exists() {
                Ok(Some(read_dataset(&p)?.0))
            } else {
                Ok(None)
            }
        }
    }
}

/// Relabels the trace with every selected method, in parallel across methods.
pub fn cmd_relabel(args: &RelabelArgs) -> Result<Vec<RelabelResult>> {
    let methods = args.methods.methods()?;
    let trace_file = args.trace.clone().unwrap_or_else(|| trace_path(&args.out));
    let (trace, _) = read_trace(&trace_file)?;
    let data = optional_dataset(args.data_file.as_deref(), &args.out)?;
    let cfg = args.methods.config();
    let dir = relabel_dir(&args.out);
    let results = methods
        .par_iter()
        .map(|&m| {
            let r = relabel(m, &trace, data.as_ref(), &cfg)?;
            write_relabelled(&dir, &trace, &r, &cfg)?;
            log::info!("relabel: {} in {:.3}s", m.name(), r.wall_time);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let timings: Vec<(String, Option<f64>)> = results
        .iter()
        .map(|r| (r.method.name().to_string(), Some(r.wall_time)))
        .collect();
    merge_timings(&dir.join("timings.csv"), &timings)?;
    Ok(results)
}

fn write_relabelled(dir: &Path, trace: &Trace, r: &RelabelResult, cfg: &RelabelConfig) -> Result<()> {
    let name = r.method.name();
    let mut meta = Meta::new();
    meta.set("method", name);
    match r.method {
        Method::Celeux => {
            meta.set("m", cfg.m);
            meta.set("celeux_scale", cfg.celeux_scale);
            meta.set("scale_floor_hits", r.scale_floor_hits);
        }
        Method::MinVar => meta.set("m", cfg.m),
        Method::Marin => meta.set("marin_direction", cfg.marin.direction),
        _ => {}
    }
    meta.set("excluded", r.excluded.len());
    if !r.notes.is_empty() {
        meta.set("notes", r.notes.join(" | "));
    }
    write_trace(&dir.join(format!("{name}.csv")), &r.relabelled, &meta)?;
    write_permutations(&dir.join(format!("{name}.perm.csv")), trace, &r.permutations)?;
    if r.method == Method::FruhwirthSchnatter {
        let rows: Vec<Vec<String>> = r
            .excluded
            .iter()
            .map(|&i| vec![trace.draws()[i].iter.to_string()])
            .collect();
        write_table(&dir.join("fs.excluded.csv"), &["iter".into()], &rows)?;
    }
    Ok(())
}

/// Updates `timings.csv`, keeping rows of methods not rerun.
fn merge_timings(path: &Path, new: &[(String, Option<f64>)]) -> Result<()> {
    let mut all: Vec<(String, Option<f64>)> = Vec::new();
    if path.exists() {
        for row in read_table(path)?.1 {
            all.push((row[0].clone(), row.get(1).and_then(|v| v.parse().ok())));
        }
    }
    for (m, t) in new {
        match all.iter_mut().find(|(n, _)| n == m) {
            Some(e) => e.1 = *t,
            None => all.push((m.clone(), *t)),
        }
    }
    all.sort_by_key(|(m, _)| m.parse::<Method>().map_or(usize::MAX, |m| m as usize));
    report::write_timings(path, &all)
}

/// Loads a relabelled trace written by [`cmd_relabel`] back into a result.
pub fn load_result(out: &Path, method: Method) -> Result<RelabelResult> {
    let dir = relabel_dir(out);
    let name = method.name();
    let path = dir.join(format!("{name}.csv"));
    let (relabelled, meta) = read_trace(&path)?;
    let perms = read_permutations(&dir.join(format!("{name}.perm.csv")))?;
    let excluded: Vec<usize> = if method == Method::FruhwirthSchnatter {
        let dropped: Vec<u64> = read_table(&dir.join("fs.excluded.csv"))?
            .1
            .iter()
            .map(|r| r[0].parse().unwrap_or(u64::MAX))
            .collect();
        perms
            .iter()
            .enumerate()
            .filter(|(_, (it, _))| dropped.contains(it))
            .map(|(i, _)| i)
            .collect()
    } else {
        Vec::new()
    };
    let wall_time = read_table(&dir.join("timings.csv"))
        .ok()
        .and_then(|(_, rows)| {
            rows.into_iter()
                .find(|r| r[0] == name)
                .and_then(|r| r.get(1).and_then(|v| v.parse().ok()))
        })
        .unwrap_or(f64::NAN);
    Ok(RelabelResult {
        method,
        permutations: perms.into_iter().map(|(_, p)| p).collect::<Vec<Permutation>>(),
        relabelled,
        excluded,
        wall_time,
        notes: meta
            .get("notes")
            .map(|n| n.split(" | ").map(String::from).collect())
            .unwrap_or_default(),
        scale_floor_hits: meta.parse("scale_floor_hits", &meta_path(&path))?.unwrap_or(0),
    })
}

/// Reference density for KL: the true mixture, or the MAP draw of the trace.
fn reference_spec(data: Option<&Dataset>, trace_file: &Path) -> Result<Option<(MixtureSpec, &'static str)>> {
    if let Some(spec) = data.and_then(Dataset::true_spec) {
        return Ok(Some((spec.clone(), "truth")));
    }
    if !trace_file.exists() {
        return Ok(None);
    }
    let (trace, _) = read_trace(trace_file)?;
    if !trace.has_log_posterior() {
        return Ok(None);
    }
    Ok(Some((select_pivot(&trace)?.spec.clone(), "map")))
}

/// Writes the report files for every method relabelled in `<out>`.
pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<Vec<DiagnosticsReport>> {
    let methods: Vec<Method> = parse_methods(&args.method)?
        .into_iter()
        .filter(|m| {
            args.method != "all" || relabel_dir(&args.out).join(format!("{}.csv", m.name())).exists()
        })
        .collect();
    if methods.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no relabelled traces in {}; run `relabel` first",
            relabel_dir(&args.out).display()
        )));
    }
    let data = optional_dataset(args.data_file.as_deref(), &args.out)?;
    let trace_file = args.trace.clone().unwrap_or_else(|| trace_path(&args.out));
    let reference = reference_spec(data.as_ref(), &trace_file)?;
    if let Some((_, kind)) = &reference {
        log::info!("diagnose: KL relative to the {kind} density");
    }
    let kl_cfg = KlConfig::default();
    let results = methods
        .iter()
        .map(|&m| load_result(&args.out, m))
        .collect::<Result<Vec<_>>>()?;
    let reports = results
        .par_iter()
        .map(|r| diagnose(r, data.as_ref(), reference.as_ref().map(|x| &x.0), &kl_cfg))
        .collect::<Result<Vec<_>>>()?;
    let dir = report_dir(&args.out);
    report::write_summary(&dir.join("summary.csv"), &reports)?;
    report::write_misclassification(&dir.join("misclassification.csv"), &reports)?;
    report::write_parameters(&dir.join("parameters.csv"), &reports)?;
    let curves = reports
        .iter()
        .map(|r| Ok((r.method.name().to_string(), r.summary.mean_spec()?)))
        .collect::<Result<Vec<_>>>()?;
    report::write_density_curves(
        &dir.join("density.csv"),
        reference.as_ref().map(|x| &x.0),
        &curves,
    )?;
    let timings: Vec<(String, Option<f64>)> = results
        .iter()
        .map(|r| (r.method.name().to_string(), Some(r.wall_time).filter(|t| t.is_finite())))
        .collect();
    report::write_timings(&dir.join("timings.csv"), &timings)?;
    for r in &reports {
        log::info!(
            "diagnose: {:<14} kl {} rate {} total variance {:.4}",
            r.method.name(),
            r.kl.map_or("NA".into(), |v| format!("{v:.4}")),
            r.misclassification_rate().map_or("NA".into(), |v| format!("{v:.3}")),
            r.total_variance()
        );
    }
    Ok(reports)
}

/// Samples `--chains` chains, relabels them jointly with minvar and writes `rhat.csv`.
pub fn cmd_rhat(args: &RhatArgs) -> Result<RhatReport> {
    if args.chains < 2 {
        return Err(Error::InvalidConfig(format!(
            "R-hat needs at least 2 chains, got {}",
            args.chains
        )));
    }
    let out = &args.data.out;
    // make sure every chain sees the same dataset
    load_or_simulate(&args.data, args.sampler.data_file.as_deref())?;
    let sampler = SamplerArgs {
        data_file: Some(args.sampler.data_file.clone().unwrap_or_else(|| dataset_path(out))),
        ..args.sampler.clone()
    };
    let traces = (0..args.chains)
        .into_par_iter()
        .map(|j| {
            let path = out.join("chains").join(format!("chain{}.csv", j + 1));
            sample_into(&args.data, &sampler, args.data.seed + j as u64, &path)
        })
        .collect::<Result<Vec<_>>>()?;
    let relabelled: Vec<Trace> = relabel_minvar_chains(&traces, args.m)?
        .into_iter()
        .map(|r| r.relabelled)
        .collect();
    let report = gelman_rubin(&relabelled)?;
    write_rhat(&out.join("rhat.csv"), &report)?;
    log::info!("rhat: {} chains, max R-hat {:.4}", report.chains, report.max_rhat());
    Ok(report)
}

pub fn write_rhat(path: &Path, r: &RhatReport) -> Result<()> {
    let header: Vec<String> = ["parameter", "within", "between", "pooled", "rhat"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = (0..r.names.len())
        .map(|i| {
            vec![
                r.names[i].clone(),
                fmt_f64(r.within[i]),
                fmt_f64(r.between[i]),
                fmt_f64(r.pooled[i]),
                if r.rhat[i].is_nan() { report::NA.into() } else { fmt_f64(r.rhat[i]) },
            ]
        })
        .collect();
    write_table(path, &header, &rows)
}

/// The whole pipeline into one run directory.
pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<DiagnosticsReport>> {
    let out = &args.data.out;
    let data_file = match &args.sampler.data_file {
        Some(p) => p.clone(),
        None => cmd_simulate(&SimulateArgs { data: args.data.clone() })?,
    };
    cmd_sample(&SampleArgs {
        data: args.data.clone(),
        sampler: SamplerArgs {
            data_file: Some(data_file.clone()),
            ..args.sampler.clone()
        },
    })?;
    cmd_relabel(&RelabelArgs {
        trace: None,
        data_file: Some(data_file.clone()),
        methods: args.methods.clone(),
        out: out.clone(),
    })?;
    cmd_diagnose(&DiagnoseArgs {
        method: args.methods.method.clone(),
        trace: None,
        data_file: Some(data_file),
        out: out.clone(),
    })
}
