use std::fs;
use std::path::{Path, PathBuf};

use matcol::completion::suggested_regularization;
use matcol::harness::{
    run_comparison, run_sweep, threshold_plan, with_pool, ComparisonResult, ComparisonSpec,
    SweepResult, SweepSpec,
};
use matcol::incoherence::coherence_profile;
use matcol::synthetic::{gen_lowrank, gen_noisy, gen_observation, SyntheticSpec};
use matcol::{
    column_space, sample_full_columns, ColumnSamplingDistribution, CompletionConfig,
    CompletionReport, DenseMatrix, ObservationMode, ObservationSet,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{
    read_json, read_matrix, read_observations, write_atomic, write_json, write_matrix,
    write_observations,
};
use crate::manifest::{sha256_hex, Recorder};
use crate::{CompareArgs, CompleteArgs, GenerateArgs, IncoherenceArgs, ObserveArgs, SamplingArgs, SweepArgs};

/// `m.csv` -> `m.<tag>.csv`.
fn sibling(path: &Path, tag: &str, ext: Option<&str>) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = ext
        .map(str::to_string)
        .or_else(|| path.extension().map(|e| e.to_string_lossy().into_owned()));
    let name = match ext {
        Some(ext) => format!("{stem}.{tag}.{ext}"),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn usage_list(violations: Vec<String>) -> CliError {
    let mut msg = String::from("invalid configuration:");
    for v in violations {
        msg.push_str("\n  - ");
        msg.push_str(&v);
    }
    CliError::usage(msg)
}

pub fn generate(a: &GenerateArgs) -> CliResult<()> {
    let mut violations = Vec::new();
    if a.m == 0 || a.n == 0 {
        violations.push(format!("--m and --n must be positive (got {}x{})", a.m, a.n));
    }
    if a.rank == 0 || a.rank > a.m.min(a.n) {
        violations.push(format!(
            "--rank must satisfy 1 <= rank <= min(m, n) = {} (got {})",
            a.m.min(a.n),
            a.rank
        ));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        violations.push(format!("--sigma must be finite and non-negative (got {})", a.sigma));
    }
    if !violations.is_empty() {
        return Err(usage_list(violations));
    }

    let mut rec = Recorder::start("generate", a, Some(a.seed));
    let spec = SyntheticSpec {
        m: a.m,
        n: a.n,
        r: a.rank,
        sigma: a.sigma,
        seed: a.seed,
    };
    if a.sigma == 0.0 {
        write_matrix(&a.out, &gen_lowrank(&spec)?)?;
    } else {
        let inst = gen_noisy(&spec)?;
        write_matrix(&a.out, &inst.observed)?;
        let clean = sibling(&a.out, "clean", None);
        write_matrix(&clean, &inst.clean)?;
        rec.output(&clean);
    }
    rec.output(&a.out);
    rec.finish(&a.out)?;
    println!("wrote {}x{} matrix to {}", a.m, a.n, a.out.display());
    Ok(())
}

/// `(d, s)` from explicit flags or from the theorem thresholds of `matrix`.
fn resolve_sampling(
    sampling: &SamplingArgs,
    matrix: Option<&DenseMatrix>,
    rank: Option<usize>,
) -> CliResult<(usize, usize)> {
    if sampling.auto_thresholds {
        let (Some(m), Some(r)) = (matrix, rank) else {
            return Err(CliError::usage(
                "--auto-thresholds needs the full matrix (--matrix) and --rank",
            ));
        };
        let plan = threshold_plan(m, r, sampling.delta)?;
        log::info!(
            "mu(r) = {:.4}: thresholds d >= {}, s >= {}; using d = {}, s = {}",
            plan.mu_r,
            plan.thresholds.d_min,
            plan.thresholds.s_min,
            plan.d,
            plan.s
        );
        return Ok((plan.d, plan.s));
    }
    match (sampling.d, sampling.s) {
        (Some(d), Some(s)) => Ok((d, s)),
        (d, s) => {
            let mut missing = Vec::new();
            if d.is_none() {
                missing.push("--d is required unless --auto-thresholds is given".to_string());
            }
            if s.is_none() {
                missing.push("--s is required unless --auto-thresholds is given".to_string());
            }
            Err(usage_list(missing))
        }
    }
}

fn observe_matrix(
    m: &DenseMatrix,
    rank: usize,
    sampling: &SamplingArgs,
) -> CliResult<(CompletionConfig, ObservationSet)> {
    let (d, s) = resolve_sampling(sampling, Some(m), Some(rank))?;
    let config = CompletionConfig::uniform(m.ncols(), rank, d, s, sampling.seed);
    let obs = gen_observation(m, &config, sampling.mode)?;
    Ok((config, obs))
}

pub fn observe(a: &ObserveArgs) -> CliResult<()> {
    let mut rec = Recorder::start("observe", a, Some(a.sampling.seed));
    let m = read_matrix(&a.matrix)?;
    rec.input(&a.matrix);
    if a.rank.is_none() && a.sampling.auto_thresholds {
        return Err(CliError::usage("--auto-thresholds needs --rank"));
    }
    // The rank only enters through the thresholds; 1 is always admissible.
    let (_, obs) = observe_matrix(&m, a.rank.unwrap_or(1), &a.sampling)?;
    write_observations(&a.out, &obs)?;
    rec.output(&a.out);
    rec.finish(&a.out)?;
    println!(
        "wrote {} observation set (d = {}, s = {}, {} entries) to {}",
        obs.mode(),
        obs.d(),
        obs.s(),
        obs.observed_entries(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ColumnEigenvalue {
    pub column: usize,
    pub min_eigenvalue: f64,
}

/// JSON report written by `complete`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CompletionSummary {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub mode: ObservationMode,
    pub target_rank: usize,
    pub effective_rank: usize,
    pub observed_entries: usize,
    pub relative_frobenius_error: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub regularization_fallback: Option<f64>,
    pub regularized_columns: Vec<usize>,
    pub per_column_min_eigenvalue: Vec<ColumnEigenvalue>,
}

impl CompletionSummary {
    fn new(obs: &ObservationSet, config: &CompletionConfig, report: &CompletionReport) -> Self {
        Self {
            m: obs.nrows(),
            n: obs.ncols(),
            d: obs.d(),
            s: obs.s(),
            mode: obs.mode(),
            target_rank: config.target_rank,
            effective_rank: report.effective_rank,
            observed_entries: obs.observed_entries(),
            relative_frobenius_error: report.relative_frobenius_error,
            min_eigenvalue: report.min_eigenvalue(),
            regularization_fallback: config.singular_fallback,
            regularized_columns: report.regularized_columns.clone(),
            per_column_min_eigenvalue: report
                .per_column_min_eigenvalue
                .iter()
                .map(|&(column, min_eigenvalue)| ColumnEigenvalue {
                    column,
                    min_eigenvalue,
                })
                .collect(),
        }
    }
}

pub fn complete(a: &CompleteArgs, jobs: Option<usize>) -> CliResult<()> {
    let mut rec = Recorder::start("complete", a, Some(a.sampling.seed));
    let (mut config, obs, mut truth) = match (&a.matrix, &a.observations) {
        (Some(path), _) => {
            let m = read_matrix(path)?;
            rec.input(path);
            let (config, obs) = observe_matrix(&m, a.rank, &a.sampling)?;
            (config, obs, Some(m))
        }
        (None, Some(path)) => {
            if a.sampling.auto_thresholds {
                return Err(CliError::usage("--auto-thresholds needs --matrix"));
            }
            let obs = read_observations(path)?;
            rec.input(path);
            let mut mismatch = Vec::new();
            if a.sampling.d.is_some_and(|d| d != obs.d()) {
                mismatch.push(format!("--d does not match the observation set (d = {})", obs.d()));
            }
            if a.sampling.s.is_some_and(|s| s != obs.s()) {
                mismatch.push(format!("--s does not match the observation set (s = {})", obs.s()));
            }
            if !mismatch.is_empty() {
                return Err(usage_list(mismatch));
            }
            let config = CompletionConfig::uniform(obs.ncols(), a.rank, obs.d(), obs.s(), a.sampling.seed);
            (config, obs, None)
        }
        (None, None) => return Err(CliError::usage("one of --matrix or --observations is required")),
    };
    if let Some(path) = &a.truth {
        truth = Some(read_matrix(path)?);
        rec.input(path);
    }
    config.rank_tolerance = a.rank_tolerance;
    if a.regularize {
        config.singular_fallback = Some(
            a.regularization
                .unwrap_or_else(|| suggested_regularization(obs.s(), obs.nrows())),
        );
    }

    let report = with_pool(jobs, || matcol::complete(&obs, &config))?.map_err(|e| {
        if matches!(e, matcol::Error::SingularSystem { .. }) {
            log::error!("rerun with --regularize to fall back to a regularized solve");
        }
        CliError::from(e)
    })?;
    let report = match &truth {
        Some(t) => report.with_ground_truth(t)?,
        None => report,
    };

    let summary = CompletionSummary::new(&obs, &config, &report);
    let report_path = sibling(&a.out, "report", Some("json"));
    write_matrix(&a.out, &report.recovered)?;
    write_json(&report_path, &summary)?;
    rec.output(&a.out);
    rec.output(&report_path);
    rec.finish(&a.out)?;
    match summary.relative_frobenius_error {
        Some(e) => println!(
            "recovered {}x{} (rank {}), relative error {e:.3e}",
            summary.m, summary.n, summary.effective_rank
        ),
        None => println!(
            "recovered {}x{} (rank {})",
            summary.m, summary.n, summary.effective_rank
        ),
    }
    Ok(())
}

pub fn incoherence(a: &IncoherenceArgs) -> CliResult<()> {
    let mut rec = Recorder::start("incoherence", a, Some(a.seed));
    let m = read_matrix(&a.matrix)?;
    rec.input(&a.matrix);
    let basis = match a.d {
        Some(d) => {
            let dist = ColumnSamplingDistribution::uniform(m.ncols());
            let (_, sample) = sample_full_columns(&m, &dist, d, a.seed)?;
            Some(column_space(&sample, a.rank, matcol::completion::DEFAULT_RANK_TOLERANCE)?)
        }
        None => None,
    };
    let profile = coherence_profile(&m, a.rank, basis.as_ref(), a.per_column)?;
    let json = serde_json::to_string_pretty(&profile)
        .map_err(|e| CliError::usage(format!("cannot encode profile: {e}")))?;
    println!("{json}");
    if let Some(out) = &a.out {
        write_json(out, &profile)?;
        rec.output(out);
        rec.finish(out)?;
    }
    Ok(())
}

/// Short digest identifying an experiment specification.
pub fn spec_hash<T: Serialize>(spec: &T) -> String {
    let bytes = serde_json::to_vec(spec).expect("specifications serialize");
    sha256_hex(&bytes)[..12].to_string()
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::usage(format!("cannot encode CSV: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| CliError::usage(format!("cannot encode CSV: {e}")))
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    r: usize,
    param: &'static str,
    fixed_value: usize,
    value: usize,
    trial: usize,
    seed: u64,
    relative_error: Option<f64>,
    success: bool,
    minimal: Option<usize>,
}

fn sweep_rows(result: &SweepResult) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for cell in &result.cells {
        for (name, search) in [("d", &cell.d_search), ("s", &cell.s_search)] {
            for probe in &search.probes {
                for t in &probe.trials {
                    rows.push(SweepRow {
                        n: cell.n,
                        r: cell.r,
                        param: name,
                        fixed_value: search.fixed_value,
                        value: probe.value,
                        trial: t.trial,
                        seed: t.seed,
                        relative_error: t.relative_error,
                        success: t.success,
                        minimal: search.minimal,
                    });
                }
            }
        }
    }
    rows
}

pub fn exact_recovery(a: &SweepArgs, jobs: Option<usize>) -> CliResult<()> {
    let mut rec = Recorder::start("experiment exact-recovery", a, None);
    let mut spec: SweepSpec = match &a.config {
        Some(path) => {
            rec.input(path);
            read_json(path)?
        }
        None => SweepSpec::default(),
    };
    if let Some(v) = &a.sizes {
        spec.sizes = v.clone();
    }
    if let Some(v) = &a.ranks {
        spec.ranks = v.clone();
    }
    if let Some(v) = a.trials {
        spec.trials = v;
    }
    if let Some(v) = a.seed {
        spec.base_seed = v;
    }
    if let Some(v) = a.threshold {
        spec.success_threshold = v;
    }
    if let Some(v) = a.delta {
        spec.delta = v;
    }
    if let Some(v) = a.mode {
        spec.mode = v;
    }
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(usage_list(violations));
    }

    prepare_dir(&a.out_dir)?;
    let stem = format!("exact-recovery-{}-seed{}", spec_hash(&spec), spec.base_seed);
    let result = with_pool(jobs, || run_sweep(&spec))??;
    let json_path = a.out_dir.join(format!("{stem}.json"));
    let csv_path = a.out_dir.join(format!("{stem}.csv"));
    write_json(&json_path, &result)?;
    write_atomic(&csv_path, &csv_bytes(sweep_rows(&result))?)?;
    rec.output(&json_path);
    rec.output(&csv_path);
    rec = rec.with_seed(spec.base_seed);
    rec.finish(&json_path)?;

    for c in &result.cells {
        println!(
            "n={} r={} mu(r)={:.3} minimal_d={} minimal_s={}",
            c.n,
            c.r,
            c.mu_r,
            fmt_opt(c.minimal_d),
            fmt_opt(c.minimal_s)
        );
    }
    for (name, fit) in [("d", &result.d_fit), ("s", &result.s_fit)] {
        if let Some(f) = fit {
            println!(
                "{name}: R^2 vs r ln r = {:.4} (rss {:.3}), vs r^2 ln r = {:.4} (rss {:.3})",
                f.vs_r_ln_r.r_squared, f.vs_r_ln_r.rss, f.vs_r2_ln_r.r_squared, f.vs_r2_ln_r.rss
            );
        }
    }
    println!("wrote {}", json_path.display());
    Ok(())
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

#[derive(Serialize)]
struct ComparisonRow {
    n: usize,
    r: usize,
    sigma: f64,
    d: usize,
    s: usize,
    trial: usize,
    seed: u64,
    alg1_error: f64,
    nystrom_error: f64,
    nystrom_columns: usize,
    nystrom_rows: usize,
    nystrom_rank: usize,
    regularized_columns: usize,
    best_rank_residual_sq: f64,
    total_energy: f64,
    mu_m: f64,
    epsilon: f64,
    bound_holds: bool,
}

fn comparison_rows(result: &ComparisonResult) -> Vec<ComparisonRow> {
    let spec = &result.spec;
    result
        .cells
        .iter()
        .flat_map(|cell| {
            cell.trials.iter().map(move |t| ComparisonRow {
                n: spec.n,
                r: spec.r,
                sigma: spec.sigma,
                d: t.d,
                s: t.s,
                trial: t.trial,
                seed: t.seed,
                alg1_error: t.completion_error,
                nystrom_error: t.nystrom_error,
                nystrom_columns: cell.budget.config.num_columns,
                nystrom_rows: cell.budget.config.num_rows,
                nystrom_rank: t.nystrom_rank,
                regularized_columns: t.regularized_columns,
                best_rank_residual_sq: t.best_rank_residual_sq,
                total_energy: t.total_energy,
                mu_m: t.mu_m,
                epsilon: t.epsilon,
                bound_holds: t.bound_holds,
            })
        })
        .collect()
}

pub fn lowrank_compare(a: &CompareArgs, jobs: Option<usize>) -> CliResult<()> {
    let mut rec = Recorder::start("experiment lowrank-compare", a, None);
    let from_file = a.config.is_some();
    let mut spec: ComparisonSpec = match &a.config {
        Some(path) => {
            rec.input(path);
            read_json(path)?
        }
        None => ComparisonSpec::default(),
    };
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = a.rank {
        spec.r = v;
    }
    if let Some(v) = a.sigma {
        spec.sigma = v;
    }
    if let Some(v) = a.trials {
        spec.trials = v;
    }
    if let Some(v) = a.seed {
        spec.base_seed = v;
    }
    if let Some(v) = a.delta {
        spec.delta = v;
    }
    match &a.budgets {
        Some(v) => spec.budgets = v.clone(),
        // Defaults follow the shape unless a config file fixed them.
        None if !from_file || a.n.is_some() || a.rank.is_some() => {
            spec.budgets = ComparisonSpec::default_budgets(spec.n, spec.r)
        }
        None => {}
    }
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(usage_list(violations));
    }

    prepare_dir(&a.out_dir)?;
    let stem = format!("lowrank-compare-{}-seed{}", spec_hash(&spec), spec.base_seed);
    let result = with_pool(jobs, || run_comparison(&spec))??;
    let json_path = a.out_dir.join(format!("{stem}.json"));
    let csv_path = a.out_dir.join(format!("{stem}.csv"));
    write_json(&json_path, &result)?;
    write_atomic(&csv_path, &csv_bytes(comparison_rows(&result))?)?;
    rec.output(&json_path);
    rec.output(&csv_path);
    rec = rec.with_seed(spec.base_seed);
    rec.finish(&json_path)?;

    for c in &result.cells {
        println!(
            "d=s={} nystrom {}x{}: alg1 {:.4} +- {:.4}, nystrom {:.4} +- {:.4}, bound held {}/{}",
            c.d,
            c.budget.config.num_columns,
            c.budget.config.num_rows,
            c.completion.mean,
            c.completion.std,
            c.nystrom.mean,
            c.nystrom.std,
            c.bound_holds,
            c.trials.len()
        );
    }
    println!("wrote {}", json_path.display());
    Ok(())
}
