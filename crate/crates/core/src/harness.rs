//! Experiment harness.
//!
//! Two studies are supported:
//!
//! * **Exact recovery sweeps**: for every `(n, r)` cell, the smallest `d`
//!   (with `s` held large) and the smallest `s` (with `d` held large) for
//!   which every trial reaches the success threshold, found by doubling
//!   and then bisection. The minima are regressed against `r ln r` and
//!   `r^2 ln r`.
//! * **Equal-budget comparison** on noisy low-rank matrices: completion with
//!   `s = d` against a Nystrom approximation observing the same budget,
//!   together with the additive Frobenius error bound check.
//!
//! Every trial seed is derived from the base seed and the trial's
//! coordinates, so results do not depend on scheduling or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{match_budget, nystrom_approx, BudgetMatch};
use crate::completion::{complete, rank_r_residual_sq, suggested_regularization, CompletionConfig};
use crate::error::{Error, Result};
use crate::incoherence::{mu_matrix, mu_r, theorem_thresholds, Thresholds};
use crate::matrix::DenseMatrix;
use crate::observation::ObservationMode;
use crate::rng::derive_seed;
use crate::synthetic::{gen_lowrank, gen_noisy, gen_observation, SyntheticSpec};

/// Relative Frobenius error that counts as exact recovery.
pub const EXACT_RECOVERY_THRESHOLD: f64 = 1e-8;
/// Failure probability used for theorem-driven defaults.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Constant in `d >= 64 ln(2/delta) mu(M) r / eps^2`.
pub const ADDITIVE_BOUND_CONSTANT: f64 = 64.0;

/// Runs `f` on a pool of `jobs` workers, or on the global pool for `None`.
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::config("jobs must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}"))),
    }
}

/// Threshold-driven `(d, s)` for a known matrix, with uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPlan {
    pub mu_r: f64,
    pub thresholds: Thresholds,
    /// `min(d_min, n)`: the draw count may not exceed the column count.
    pub d: usize,
    /// `s_min`; may exceed `m` since rows are drawn with replacement.
    pub s: usize,
    pub d_clamped: bool,
}

pub fn threshold_plan(m: &DenseMatrix, r: usize, delta: f64) -> Result<ThresholdPlan> {
    let (rows, cols) = m.shape();
    let mu = mu_r(m, r)?.value;
    let t = theorem_thresholds(rows, cols, r, mu, delta, None)?;
    let d = t.d_min.min(cols);
    if d < t.d_min {
        log::info!("d threshold {} exceeds n = {cols}; using d = {cols}", t.d_min);
    }
    Ok(ThresholdPlan {
        mu_r: mu,
        thresholds: t,
        d,
        s: t.s_min,
        d_clamped: d < t.d_min,
    })
}

/// Outcome of one exact-recovery trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `None` when completion failed numerically.
    pub relative_error: Option<f64>,
    pub success: bool,
    pub failure: Option<String>,
}

/// Generates a square Gaussian-factor rank-`r` matrix from `seed`, observes
/// it with `(d, s)` and returns the relative error, or the numerical
/// failure that prevented completion.
pub fn exact_recovery_trial(
    n: usize,
    r: usize,
    d: usize,
    s: usize,
    mode: ObservationMode,
    seed: u64,
) -> Result<(Option<f64>, Option<String>)> {
    let m = gen_lowrank(&SyntheticSpec::lowrank(n, n, r, seed))?;
    let config = CompletionConfig::uniform(n, r, d, s, seed);
    let obs = gen_observation(&m, &config, mode)?;
    match complete(&obs, &config) {
        Ok(report) => Ok((Some(m.relative_error(&report.recovered)?), None)),
        Err(e) if e.is_numerical() => Ok((None, Some(e.to_string()))),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchStrategy {
    /// First value probed by the doubling phase.
    pub start: usize,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        Self { start: 1 }
    }
}

/// Missing fields take their default values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub sizes: Vec<usize>,
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub success_threshold: f64,
    /// Failure probability for the theorem thresholds that fix the
    /// non-searched parameter.
    pub delta: f64,
    /// The non-searched parameter is held at this multiple of its theorem
    /// threshold (then capped at the matrix dimension).
    pub fixed_multiplier: f64,
    pub mode: ObservationMode,
    pub search: SearchStrategy,
    pub base_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            sizes: vec![200, 400, 600],
            ranks: vec![5, 10, 15, 20],
            trials: 10,
            success_threshold: EXACT_RECOVERY_THRESHOLD,
            delta: DEFAULT_DELTA,
            fixed_multiplier: 2.0,
            mode: ObservationMode::Independent,
            search: SearchStrategy::default(),
            base_seed: 0,
        }
    }
}

impl SweepSpec {
    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.sizes.is_empty() {
            v.push("sizes must not be empty".to_string());
        }
        if self.ranks.is_empty() {
            v.push("ranks must not be empty".to_string());
        }
        if self.sizes.contains(&0) {
            v.push("sizes must be positive".to_string());
        }
        if self.ranks.contains(&0) {
            v.push("ranks must be positive".to_string());
        }
        for &n in &self.sizes {
            for &r in &self.ranks {
                if r > n {
                    v.push(format!("rank {r} exceeds size {n}"));
                }
            }
        }
        if self.trials == 0 {
            v.push("trials must be at least 1".to_string());
        }
        if !(self.success_threshold > 0.0 && self.success_threshold.is_finite()) {
            v.push(format!(
                "success_threshold must be positive, got {}",
                self.success_threshold
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            v.push(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.fixed_multiplier > 0.0 && self.fixed_multiplier.is_finite()) {
            v.push(format!(
                "fixed_multiplier must be positive, got {}",
                self.fixed_multiplier
            ));
        }
        if self.search.start == 0 {
            v.push("search.start must be at least 1".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::config(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchedParam {
    D,
    S,
}

impl SearchedParam {
    fn tag(self) -> u64 {
        match self {
            SearchedParam::D => 1,
            SearchedParam::S => 2,
        }
    }
}

/// All trials run at one probed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub value: usize,
    pub successes: usize,
    pub trials: Vec<TrialRecord>,
}

impl Probe {
    pub fn all_succeeded(&self) -> bool {
        self.successes == self.trials.len()
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials.len() as f64
    }
}

/// `fails_at + 1 == succeeds_at`, with `succeeds_at` the reported minimum.
/// `fails_at == 0` means the minimum is 1 (zero samples never succeed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub fails_at: usize,
    pub succeeds_at: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub param: SearchedParam,
    /// Value the other parameter was held at.
    pub fixed_value: usize,
    /// Largest value the search may probe.
    pub limit: usize,
    pub minimal: Option<usize>,
    pub certificate: Option<Certificate>,
    /// Every probe, in the order it was run.
    pub probes: Vec<Probe>,
}

/// Smallest value in `[1, limit]` for which `probe` reports all trials
/// successful: doubling from `start`, then bisection.
pub fn search_minimal(
    param: SearchedParam,
    fixed_value: usize,
    start: usize,
    limit: usize,
    mut probe: impl FnMut(usize) -> Result<Probe>,
) -> Result<SearchOutcome> {
    let mut probes = Vec::new();
    let mut lo = 0;
    let mut v = start.clamp(1, limit.max(1));
    let hi = loop {
        let p = probe(v)?;
        let ok = p.all_succeeded();
        probes.push(p);
        if ok {
            break Some(v);
        }
        lo = v;
        if v >= limit {
            break None;
        }
        v = (v * 2).min(limit);
    };
    let Some(mut hi) = hi else {
        return Ok(SearchOutcome {
            param,
            fixed_value,
            limit,
            minimal: None,
            certificate: None,
            probes,
        });
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = probe(mid)?;
        if p.all_succeeded() {
            hi = mid;
        } else {
            lo = mid;
        }
        probes.push(p);
    }
    Ok(SearchOutcome {
        param,
        fixed_value,
        limit,
        minimal: Some(hi),
        certificate: Some(Certificate {
            fails_at: lo,
            succeeds_at: hi,
        }),
        probes,
    })
}

fn run_probe(
    n: usize,
    r: usize,
    param: SearchedParam,
    value: usize,
    fixed: usize,
    spec: &SweepSpec,
) -> Result<Probe> {
    let (d, s) = match param {
        SearchedParam::D => (value, fixed),
        SearchedParam::S => (fixed, value),
    };
    let trials: Vec<TrialRecord> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(
                spec.base_seed,
                &[n as u64, r as u64, param.tag(), value as u64, trial as u64],
            );
            let (err, failure) =
                exact_recovery_trial(n, r, d, s, spec.mode, seed)?;
            Ok(TrialRecord {
                trial,
                seed,
                relative_error: err,
                success: err.is_some_and(|e| e <= spec.success_threshold),
                failure,
            })
        })
        .collect::<Result<_>>()?;
    let successes = trials.iter().filter(|t| t.success).count();
    Ok(Probe {
        value,
        successes,
        trials,
    })
}

/// Thresholds of a cell, evaluated on its reference instance.
fn cell_thresholds(n: usize, r: usize, spec: &SweepSpec) -> Result<(f64, Thresholds)> {
    let seed = derive_seed(spec.base_seed, &[n as u64, r as u64, 0]);
    let m = gen_lowrank(&SyntheticSpec::lowrank(n, n, r, seed))?;
    let mu = mu_r(&m, r)?.value;
    Ok((mu, theorem_thresholds(n, n, r, mu, spec.delta, None)?))
}

fn fixed_value(threshold: usize, multiplier: f64, cap: usize) -> usize {
    ((threshold as f64 * multiplier).ceil() as usize).clamp(1, cap)
}

/// Minimal number of full-column draws for an `n x n` rank-`r` cell.
pub fn find_minimal_d(n: usize, r: usize, s_fixed: usize, spec: &SweepSpec) -> Result<SearchOutcome> {
    search_minimal(SearchedParam::D, s_fixed, spec.search.start, n, |d| {
        run_probe(n, r, SearchedParam::D, d, s_fixed, spec)
    })
}

/// Minimal number of entries per partial column for an `n x n` rank-`r` cell.
pub fn find_minimal_s(n: usize, r: usize, d_fixed: usize, spec: &SweepSpec) -> Result<SearchOutcome> {
    search_minimal(SearchedParam::S, d_fixed, spec.search.start, n, |s| {
        run_probe(n, r, SearchedParam::S, s, d_fixed, spec)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub r: usize,
    pub mu_r: f64,
    pub thresholds: Thresholds,
    /// Copies of `d_search.minimal` and `s_search.minimal`.
    pub minimal_d: Option<usize>,
    pub minimal_s: Option<usize>,
    pub d_search: SearchOutcome,
    pub s_search: SearchOutcome,
}

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::config("a line fit needs at least two paired points"));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::degenerate("all regressor values are equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        rss,
    })
}

/// Fits of a minimum against `r ln r` and `r^2 ln r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub vs_r_ln_r: LinearFit,
    pub vs_r2_ln_r: LinearFit,
}

impl ScalingFit {
    fn from_points(points: &[(usize, usize)]) -> Result<Self> {
        let ys: Vec<f64> = points.iter().map(|&(_, y)| y as f64).collect();
        let r_ln_r = |r: usize| r as f64 * (r as f64).ln();
        let x1: Vec<f64> = points.iter().map(|&(r, _)| r_ln_r(r)).collect();
        let x2: Vec<f64> = points.iter().map(|&(r, _)| r as f64 * r_ln_r(r)).collect();
        Ok(Self {
            vs_r_ln_r: fit_line(&x1, &ys)?,
            vs_r2_ln_r: fit_line(&x2, &ys)?,
        })
    }

    /// The `r ln r` line explains the data better than the `r^2 ln r` one.
    pub fn prefers_r_ln_r(&self) -> bool {
        self.vs_r_ln_r.rss < self.vs_r2_ln_r.rss
    }
}

/// Spread of a minimum across sizes at one rank: `(max - min) / min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeVariation {
    pub r: usize,
    pub min: usize,
    pub max: usize,
    pub relative_spread: f64,
}

fn size_variation(cells: &[CellResult], pick: impl Fn(&CellResult) -> Option<usize>) -> Vec<SizeVariation> {
    let mut ranks: Vec<usize> = cells.iter().map(|c| c.r).collect();
    ranks.sort_unstable();
    ranks.dedup();
    ranks
        .into_iter()
        .filter_map(|r| {
            let vals: Vec<usize> = cells.iter().filter(|c| c.r == r).filter_map(&pick).collect();
            let min = *vals.iter().min()?;
            let max = *vals.iter().max()?;
            Some(SizeVariation {
                r,
                min,
                max,
                relative_spread: (max - min) as f64 / min as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<CellResult>,
    /// `None` when fewer than two distinct ranks produced a minimum.
    pub d_fit: Option<ScalingFit>,
    pub s_fit: Option<ScalingFit>,
    pub d_variation: Vec<SizeVariation>,
    pub s_variation: Vec<SizeVariation>,
}

/// Runs both searches for one cell.
pub fn run_cell(n: usize, r: usize, spec: &SweepSpec) -> Result<CellResult> {
    let (mu, thresholds) = cell_thresholds(n, r, spec)?;
    let s_fixed = fixed_value(thresholds.s_min, spec.fixed_multiplier, n);
    let d_fixed = fixed_value(thresholds.d_min, spec.fixed_multiplier, n);
    let d_search = find_minimal_d(n, r, s_fixed, spec)?;
    let s_search = find_minimal_s(n, r, d_fixed, spec)?;
    Ok(CellResult {
        n,
        r,
        mu_r: mu,
        thresholds,
        minimal_d: d_search.minimal,
        minimal_s: s_search.minimal,
        d_search,
        s_search,
    })
}

/// Runs the whole `(n, r)` grid. Cells run concurrently on the current
/// rayon pool; output order follows `sizes x ranks`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let grid: Vec<(usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&n| spec.ranks.iter().map(move |&r| (n, r)))
        .collect();
    let cells: Vec<CellResult> = grid
        .par_iter()
        .map(|&(n, r)| run_cell(n, r, spec))
        .collect::<Result<_>>()?;

    let fit = |pick: &dyn Fn(&CellResult) -> Option<usize>| {
        let pts: Vec<(usize, usize)> = cells.iter().filter_map(|c| pick(c).map(|v| (c.r, v))).collect();
        ScalingFit::from_points(&pts).ok()
    };
    Ok(SweepResult {
        spec: spec.clone(),
        d_fit: fit(&|c| c.minimal_d),
        s_fit: fit(&|c| c.minimal_s),
        d_variation: size_variation(&cells, |c| c.minimal_d),
        s_variation: size_variation(&cells, |c| c.minimal_s),
        cells,
    })
}

/// Missing fields take their default values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonSpec {
    pub n: usize,
    pub r: usize,
    pub sigma: f64,
    /// Values of `d`; the completion run uses `s = d`.
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub delta: f64,
    pub base_seed: u64,
}

impl Default for ComparisonSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            r: 20,
            sigma: 0.1,
            budgets: Self::default_budgets(1000, 20),
            trials: 10,
            delta: DEFAULT_DELTA,
            base_seed: 0,
        }
    }
}

impl ComparisonSpec {
    /// Budgets at `alpha = 1` and `alpha = 2`, capped below `n`.
    pub fn default_budgets(n: usize, r: usize) -> Vec<usize> {
        let mut b: Vec<usize> = [r * (r + 1) / 2, r * (r + 1)]
            .into_iter()
            .map(|d| d.clamp(1, n.saturating_sub(1).max(1)))
            .collect();
        b.dedup();
        b
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n == 0 {
            v.push("n must be positive".to_string());
        }
        if self.r == 0 || self.r > self.n {
            v.push(format!("rank {} must satisfy 1 <= r <= n = {}", self.r, self.n));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            v.push(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if self.budgets.is_empty() {
            v.push("budgets must not be empty".to_string());
        }
        for &d in &self.budgets {
            if d == 0 || d > self.n {
                v.push(format!("budget d = {d} must lie in 1..={}", self.n));
            }
        }
        if self.trials < 2 {
            v.push(format!("trials must be at least 2, got {}", self.trials));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            v.push(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::config(v.join("; ")))
        }
    }
}

/// `eps` such that `d = 64 ln(2/delta) mu(M) r / eps^2`.
pub fn implied_epsilon(d: usize, r: usize, mu_m: f64, delta: f64) -> f64 {
    (ADDITIVE_BOUND_CONSTANT * (2.0 / delta).ln() * mu_m * r as f64 / d as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTrial {
    pub trial: usize,
    pub seed: u64,
    pub d: usize,
    pub s: usize,
    /// `||M - M_hat||_F` of the completion method.
    pub completion_error: f64,
    pub nystrom_error: f64,
    pub nystrom_rank: usize,
    pub regularized_columns: usize,
    /// `||M - M_r||_F^2`.
    pub best_rank_residual_sq: f64,
    /// `||M||_F^2`.
    pub total_energy: f64,
    pub mu_m: f64,
    pub epsilon: f64,
    /// `||M - M_hat||_F^2 <= ||M - M_r||_F^2 + eps ||M||_F^2`.
    pub bound_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation.
    pub fn of(xs: &[f64]) -> Self {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCell {
    pub d: usize,
    pub s: usize,
    pub budget: BudgetMatch,
    pub completion: MeanStd,
    pub nystrom: MeanStd,
    pub bound_holds: usize,
    pub trials: Vec<ComparisonTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub spec: ComparisonSpec,
    pub cells: Vec<BudgetCell>,
}

/// Runs the equal-budget comparison. Each trial draws one instance that is
/// shared by every budget; trials run concurrently.
pub fn run_comparison(spec: &ComparisonSpec) -> Result<ComparisonResult> {
    spec.validate()?;
    let (n, r) = (spec.n, spec.r);
    let budgets: Vec<BudgetMatch> = spec
        .budgets
        .iter()
        .map(|&d| match_budget(d, d, n, n, r))
        .collect::<Result<_>>()?;

    let per_trial: Vec<Vec<ComparisonTrial>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(
                spec.base_seed,
                &[n as u64, r as u64, spec.sigma.to_bits(), trial as u64],
            );
            let synth = SyntheticSpec {
                m: n,
                n,
                r,
                sigma: spec.sigma,
                seed,
            };
            let m = if spec.sigma > 0.0 {
                gen_noisy(&synth)?.observed
            } else {
                gen_lowrank(&synth)?
            };
            let residual = rank_r_residual_sq(&m, r)?;
            let total = m.frobenius_norm_sq();
            let mu_m = mu_matrix(&m)?;
            spec.budgets
                .iter()
                .zip(&budgets)
                .map(|(&d, budget)| {
                    comparison_trial(&m, r, d, budget, trial, seed, residual, total, mu_m, spec.delta)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let cells = spec
        .budgets
        .iter()
        .zip(budgets)
        .enumerate()
        .map(|(k, (&d, budget))| {
            let trials: Vec<ComparisonTrial> = per_trial.iter().map(|t| t[k].clone()).collect();
            let completion: Vec<f64> = trials.iter().map(|t| t.completion_error).collect();
            let nystrom: Vec<f64> = trials.iter().map(|t| t.nystrom_error).collect();
            BudgetCell {
                d,
                s: d,
                budget,
                completion: MeanStd::of(&completion),
                nystrom: MeanStd::of(&nystrom),
                bound_holds: trials.iter().filter(|t| t.bound_holds).count(),
                trials,
            }
        })
        .collect();
    Ok(ComparisonResult {
        spec: spec.clone(),
        cells,
    })
}

#[allow(clippy::too_many_arguments)]
fn comparison_trial(
    m: &DenseMatrix,
    r: usize,
    d: usize,
    budget: &BudgetMatch,
    trial: usize,
    seed: u64,
    residual: f64,
    total: f64,
    mu_m: f64,
    delta: f64,
) -> Result<ComparisonTrial> {
    let (rows, cols) = m.shape();
    let s = d;
    let sample_seed = derive_seed(seed, &[d as u64]);
    let config = CompletionConfig::uniform(cols, r, d, s, sample_seed)
        .with_fallback(suggested_regularization(s, rows));
    let obs = gen_observation(m, &config, ObservationMode::Independent)?;
    let report = complete(&obs, &config)?;
    let completion_error = m.distance(&report.recovered)?;

    let nys = nystrom_approx(m, &budget.config.with_seed(sample_seed))?;
    let nystrom_error = m.distance(&nys.approx)?;

    let epsilon = implied_epsilon(d, r, mu_m, delta);
    Ok(ComparisonTrial {
        trial,
        seed: sample_seed,
        d,
        s,
        completion_error,
        nystrom_error,
        nystrom_rank: nys.effective_rank,
        regularized_columns: report.regularized_columns.len(),
        best_rank_residual_sq: residual,
        total_energy: total,
        mu_m,
        epsilon,
        bound_holds: completion_error.powi(2) <= residual + epsilon * total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_probe(value: usize, ok: bool) -> Probe {
        Probe {
            value,
            successes: usize::from(ok),
            trials: vec![TrialRecord {
                trial: 0,
                seed: 0,
                relative_error: None,
                success: ok,
                failure: None,
            }],
        }
    }

    #[test]
    fn search_finds_threshold_with_certificate() {
        for target in 1..40 {
            let out = search_minimal(SearchedParam::D, 0, 1, 64, |v| Ok(fake_probe(v, v >= target)))
                .unwrap();
            assert_eq!(out.minimal, Some(target));
            let cert = out.certificate.unwrap();
            assert_eq!(cert.fails_at + 1, cert.succeeds_at);
            assert_eq!(cert.succeeds_at, target);
        }
    }

    #[test]
    fn search_from_large_start_bisects_down() {
        let out = search_minimal(SearchedParam::S, 0, 16, 64, |v| Ok(fake_probe(v, v >= 3))).unwrap();
        assert_eq!(out.minimal, Some(3));
        assert_eq!(out.probes[0].value, 16);
    }

    #[test]
    fn search_reports_failure_at_limit() {
        let out = search_minimal(SearchedParam::D, 0, 1, 10, |v| Ok(fake_probe(v, false))).unwrap();
        assert_eq!(out.minimal, None);
        assert_eq!(out.probes.last().unwrap().value, 10);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.rss < 1e-20);
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn mean_std() {
        let ms = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ms.mean, 2.5);
        assert!((ms.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spec_violations_are_listed() {
        let spec = SweepSpec {
            sizes: vec![],
            ranks: vec![0],
            trials: 0,
            ..SweepSpec::default()
        };
        assert_eq!(spec.violations().len(), 3);
        assert!(SweepSpec::default().violations().is_empty());
        let cmp = ComparisonSpec {
            n: 10,
            r: 20,
            sigma: -1.0,
            budgets: vec![11],
            trials: 1,
            delta: 0.1,
            base_seed: 0,
        };
        assert_eq!(cmp.violations().len(), 4);
    }

    #[test]
    fn epsilon_inverts_the_sample_bound() {
        let eps = implied_epsilon(400, 20, 2.5, 0.1);
        let d = ADDITIVE_BOUND_CONSTANT * 20f64.ln() * 2.5 * 20.0 / (eps * eps);
        assert!((d - 400.0).abs() < 1e-9);
    }

    #[test]
    fn rank_one_needs_one_column() {
        let spec = SweepSpec {
            trials: 3,
            ..SweepSpec::default()
        };
        let out = find_minimal_d(40, 1, 40, &spec).unwrap();
        assert_eq!(out.minimal, Some(1));
    }
}
