//! Reproducible parallel Monte-Carlo experiments: supremum-probability and
//! sojourn estimation for order-statistic processes, convergence tables
//! against the closed-form predictions, and the sojourn-excess band check.
//!
//! Batches are mapped over a worker pool; every batch draws from a stream
//! that is a pure function of `(master seed, batch index)` and partial
//! results are folded in batch order, so outputs are byte-identical for any
//! worker count.

use crate::asymptotics::{self, order_tail_asymptotic, order_tail_exact, ThetaEstimate};
use crate::error::{CoreError, Result};
use crate::functionals;
use crate::kernels::{
    gaussian_marginal, skew_marginal, CovarianceKernel, MarginalLaw, ScalingScheme,
};
use crate::pathsim::{kth_largest, plan_sampler, GridSpec, SamplerScratch};
use crate::rng::{stream, Phase};
use rayon::prelude::*;

/// Mean, standard error and 95% confidence interval of one estimand.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    fn new(mean: f64, stderr: f64, n_samples: u64) -> Self {
        McEstimate {
            mean,
            stderr,
            n_samples,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
        }
    }
}

/// Estimand of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// `P(sup over the grid of the order path > u)` per level.
    SupProbability,
    /// Mean sojourn time of the order path above each level, plus the
    /// positive normalized sojourn samples needed by the excess transform.
    Sojourn,
}

/// The process under simulation: a standardized self-similar Gaussian
/// kernel, optionally skewed (`delta > 0`) with `m` chi components.
#[derive(Debug, Clone)]
pub struct ProcessConfig {
    pub kernel: CovarianceKernel,
    pub delta: f64,
    pub m: u32,
}

impl ProcessConfig {
    pub fn gaussian(kernel: CovarianceKernel) -> Self {
        ProcessConfig { kernel, delta: 0.0, m: 1 }
    }

    /// Marginal law of the process at t = 1 (kernel standardized).
    pub fn marginal(&self) -> Result<MarginalLaw> {
        if self.delta == 0.0 {
            Ok(gaussian_marginal())
        } else {
            skew_marginal(self.delta, self.m)
        }
    }

    /// Gaussian component paths needed per process copy.
    fn components(&self) -> usize {
        if self.delta == 0.0 {
            1
        } else {
            self.m as usize + 1
        }
    }
}

/// Full experiment description; `(spec, master_seed)` determines every
/// output byte.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub process: ProcessConfig,
    /// Independent copies feeding the order statistic.
    pub n: u32,
    /// Order index (1 = max).
    pub r: u32,
    /// Levels of interest (on the horizon-T scale).
    pub levels: Vec<f64>,
    pub grid: GridSpec,
    /// Observation horizon; levels are rescaled by `T^{−κ}` internally.
    pub horizon: f64,
    pub functional: FunctionalKind,
    /// Time scale `q` used to normalize sojourns (required for `Sojourn`).
    pub scheme: Option<ScalingScheme>,
    pub batches: u64,
    pub batch_size: u64,
    pub master_seed: u64,
    /// Upper bound on the nominal per-batch ensemble footprint.
    pub memory_bound_bytes: u64,
}

pub const DEFAULT_MEMORY_BOUND: u64 = 4 << 30;

impl ExperimentSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 1 || self.r < 1 || self.r > self.n {
            return Err(CoreError::Config(format!(
                "order index r = {} outside 1..=n = {}",
                self.r, self.n
            )));
        }
        if self.levels.is_empty() {
            return Err(CoreError::Config("no levels requested".into()));
        }
        if self.batches == 0 || self.batch_size == 0 {
            return Err(CoreError::Config("Monte-Carlo budget must be positive".into()));
        }
        if self.functional == FunctionalKind::Sojourn && self.scheme.is_none() {
            return Err(CoreError::Config(
                "sojourn experiments need a scaling scheme for normalization".into(),
            ));
        }
        let per_batch = self.batch_size
            * self.n as u64
            * self.process.components() as u64
            * self.grid.len() as u64
            * 8;
        if per_batch > self.memory_bound_bytes {
            return Err(CoreError::Resource(format!(
                "per-batch ensemble footprint {per_batch} bytes exceeds bound {} \
                 (batch_size {} x n {} x components {} x N {})",
                self.memory_bound_bytes,
                self.batch_size,
                self.n,
                self.process.components(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Levels after horizon rescaling, i.e. on the unit-interval scale.
    pub fn unit_levels(&self) -> Result<Vec<f64>> {
        let kappa = self.process.kernel.kappa();
        self.levels
            .iter()
            .map(|&u| functionals::horizon_rescale(u, self.horizon, kappa))
            .collect()
    }
}

/// Per-level outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct LevelOutcome {
    /// Level on the original (horizon-T) scale.
    pub u: f64,
    pub estimate: McEstimate,
    /// Positive normalized sojourn samples (empty for sup experiments).
    pub positive_sojourns: Vec<f64>,
    /// Paths whose grid sup exceeded the level while the cell rule saw
    /// nothing: a grid-quality counter.
    pub inconsistencies: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub levels: Vec<LevelOutcome>,
    pub sampler: &'static str,
    pub total_paths: u64,
}

struct LevelAccumulator {
    hits: u64,
    sum: f64,
    sumsq: f64,
    inconsistencies: u64,
    positives: Vec<f64>,
}

/// Runs the experiment: per batch, simulate `batch_size` ensembles of `n`
/// process copies, extract the order-statistic path, apply the functional
/// at every level, and fold batch results in index order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let kernel = spec.process.kernel.standardized();
    let plan = plan_sampler(&kernel, &spec.grid)?;
    let levels = spec.unit_levels()?;
    let qs: Vec<f64> = match &spec.scheme {
        Some(s) => levels.iter().map(|&u| s.q(u)).collect(),
        None => vec![1.0; levels.len()],
    };
    let times = spec.grid.times().to_vec();
    let n_copies = spec.n as usize;
    let comp = spec.process.components();
    let delta = spec.process.delta;
    let sig = (1.0 - delta * delta).sqrt();
    let len = times.len();
    let want_sojourn = spec.functional == FunctionalKind::Sojourn;
    // Sojourn over [0, T] = T * sojourn over [0,1] at the rescaled level.
    let horizon_factor = spec.horizon;

    let partials: Vec<Vec<LevelAccumulator>> = (0..spec.batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(spec.master_seed, Phase::Paths, b);
            let mut scratch = SamplerScratch::default();
            let mut comp_buf = vec![0.0; comp * len];
            let mut copies = vec![0.0; n_copies * len];
            let mut order = vec![0.0; len];
            let mut col = vec![0.0; n_copies];
            let mut acc: Vec<LevelAccumulator> = levels
                .iter()
                .map(|_| LevelAccumulator {
                    hits: 0,
                    sum: 0.0,
                    sumsq: 0.0,
                    inconsistencies: 0,
                    positives: Vec::new(),
                })
                .collect();
            for _ in 0..spec.batch_size {
                for copy in 0..n_copies {
                    if delta == 0.0 {
                        plan.sample_into(
                            &mut rng,
                            &mut copies[copy * len..(copy + 1) * len],
                            &mut scratch,
                        );
                    } else {
                        for c in 0..comp {
                            plan.sample_into(
                                &mut rng,
                                &mut comp_buf[c * len..(c + 1) * len],
                                &mut scratch,
                            );
                        }
                        let out = &mut copies[copy * len..(copy + 1) * len];
                        for (j, o) in out.iter_mut().enumerate() {
                            let mut ss = 0.0;
                            for c in 0..comp - 1 {
                                let v = comp_buf[c * len + j];
                                ss += v * v;
                            }
                            *o = delta * ss.sqrt() + sig * comp_buf[(comp - 1) * len + j];
                        }
                    }
                }
                if n_copies == 1 {
                    order.copy_from_slice(&copies[..len]);
                } else {
                    for j in 0..len {
                        for (c, cv) in col.iter_mut().enumerate() {
                            *cv = copies[c * len + j];
                        }
                        order[j] = kth_largest(&mut col, spec.r as usize);
                    }
                }
                let sup = order.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (k, &u) in levels.iter().enumerate() {
                    match spec.functional {
                        FunctionalKind::SupProbability => {
                            if sup > u {
                                acc[k].hits += 1;
                            }
                        }
                        FunctionalKind::Sojourn => {
                            let mut l = 0.0;
                            for j in 1..len {
                                if order[j] > u {
                                    l += times[j] - times[j - 1];
                                }
                            }
                            let l = l * horizon_factor;
                            acc[k].sum += l;
                            acc[k].sumsq += l * l;
                            if l > 0.0 && want_sojourn {
                                acc[k].positives.push(l / qs[k]);
                            }
                            if sup > u && l == 0.0 {
                                acc[k].inconsistencies += 1;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let total = spec.batches * spec.batch_size;
    let mut out = Vec::with_capacity(levels.len());
    for (k, &orig_u) in spec.levels.iter().enumerate() {
        let mut hits = 0u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut inconsistencies = 0u64;
        let mut positives = Vec::new();
        for batch in &partials {
            let a = &batch[k];
            hits += a.hits;
            sum += a.sum;
            sumsq += a.sumsq;
            inconsistencies += a.inconsistencies;
            positives.extend_from_slice(&a.positives);
        }
        let nf = total as f64;
        let estimate = match spec.functional {
            FunctionalKind::SupProbability => {
                let p = hits as f64 / nf;
                McEstimate::new(p, (p * (1.0 - p) / nf).sqrt(), total)
            }
            FunctionalKind::Sojourn => {
                let mean = sum / nf;
                let var = (sumsq / nf - mean * mean).max(0.0);
                McEstimate::new(mean, (var / nf).sqrt(), total)
            }
        };
        out.push(LevelOutcome {
            u: orig_u,
            estimate,
            positive_sojourns: positives,
            inconsistencies,
        });
    }
    Ok(ExperimentOutput {
        levels: out,
        sampler: plan.describe(),
        total_paths: total * spec.n as u64,
    })
}

/// Prediction source for a convergence table.
#[derive(Debug, Clone)]
pub enum PredictionSource {
    /// `−Θ'(0) · E L_r(u) / q(u)` (requires the derivative estimate).
    MeanSojourn { theta_prime: f64, theta_prime_se: f64, scheme: ScalingScheme },
    /// Exact order tail `Ḡ_r(u)`: equivalent to the supremum tail only in
    /// the `β₃ = ∞` regime; rows carry the applicability flag.
    EndpointTail { scheme: ScalingScheme },
    /// Closed-form exact/asymptotic order-tail comparison; no simulation.
    OrderTailRatio,
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub u: f64,
    pub estimate: McEstimate,
    pub prediction: f64,
    pub ratio: f64,
    pub ratio_err: f64,
    pub applicable: bool,
}

/// Builds the headline table: Monte-Carlo estimate vs prediction per level,
/// with the delta-method error for the ratio. The `OrderTailRatio` source is
/// fully closed-form and runs no simulation.
pub fn convergence_table(
    spec: &ExperimentSpec,
    source: &PredictionSource,
) -> Result<Vec<ConvergenceRow>> {
    let marginal = spec.process.marginal()?;
    let kappa = spec.process.kernel.kappa();
    let levels_unit = spec.unit_levels()?;
    if let PredictionSource::OrderTailRatio = source {
        let mut rows = Vec::new();
        for (&orig_u, &u) in spec.levels.iter().zip(&levels_unit) {
            let exact = order_tail_exact(u, spec.n, spec.r, &marginal)?;
            let (asym, _) = order_tail_asymptotic(u, spec.n, spec.r, &marginal)?;
            rows.push(ConvergenceRow {
                u: orig_u,
                estimate: McEstimate::new(exact, 0.0, 0),
                prediction: asym,
                ratio: exact / asym,
                ratio_err: 0.0,
                applicable: true,
            });
        }
        return Ok(rows);
    }

    if spec.functional != FunctionalKind::SupProbability {
        return Err(CoreError::Config(
            "convergence tables compare supremum probabilities; use the sup functional".into(),
        ));
    }
    let output = run_experiment(spec)?;
    let mut rows = Vec::new();
    for (&u, outcome) in levels_unit.iter().zip(&output.levels) {
        let (prediction, applicable, pred_rel_se) = match source {
            PredictionSource::MeanSojourn { theta_prime, theta_prime_se, scheme } => {
                let p = asymptotics::p_prediction_mean_sojourn(
                    u, spec.n, spec.r, &marginal, kappa, scheme, *theta_prime,
                )?;
                (p.value, true, theta_prime_se / theta_prime)
            }
            PredictionSource::EndpointTail { scheme } => {
                let (value, applicable) =
                    asymptotics::p_prediction_endpoint(u, spec.n, spec.r, &marginal, scheme)?;
                (value, applicable, 0.0)
            }
            PredictionSource::OrderTailRatio => unreachable!(),
        };
        let ratio = outcome.estimate.mean / prediction;
        let ratio_err = if outcome.estimate.mean > 0.0 {
            ratio
                * ((outcome.estimate.stderr / outcome.estimate.mean).powi(2) + pred_rel_se.powi(2))
                    .sqrt()
        } else {
            outcome.estimate.stderr / prediction
        };
        rows.push(ConvergenceRow {
            u: outcome.u,
            estimate: outcome.estimate,
            prediction,
            ratio,
            ratio_err,
            applicable,
        });
    }
    Ok(rows)
}

/// Per-`(u, x)` verdict of the sojourn-excess band check.
#[derive(Debug, Clone)]
pub struct ExcessBandRow {
    pub u: f64,
    pub x: f64,
    pub excess: f64,
    pub excess_se: f64,
    pub theta: f64,
    pub theta_se: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
    pub positive_samples: u64,
}

/// Checks that the excess integral of normalized sojourns lies in the band
/// `[Θ(x) − 3ε, Θ(x−) + 3ε]` with `ε` the combined standard error. The left
/// limit `Θ(x−)` is taken equal to `Θ(x)`, which is valid at points where
/// the occupation tail is continuous within Monte-Carlo error (comparisons
/// are restricted to such points).
pub fn excess_band_check(
    spec: &ExperimentSpec,
    x_grid: &[f64],
    theta: &ThetaEstimate,
) -> Result<Vec<ExcessBandRow>> {
    if spec.functional != FunctionalKind::Sojourn {
        return Err(CoreError::Config("the band check needs a sojourn experiment".into()));
    }
    let output = run_experiment(spec)?;
    let total = spec.batches * spec.batch_size;
    let mut rows = Vec::new();
    for outcome in &output.levels {
        if outcome.positive_sojourns.is_empty() {
            return Err(CoreError::UndefinedRatio(format!(
                "no positive sojourns at u = {}; raise the budget or lower the level",
                outcome.u
            )));
        }
        for &x in x_grid {
            let ex = excess_integral_sparse(&outcome.positive_sojourns, total, x)?;
            let (tv, tse) = theta_value_at(theta, x)?;
            let eps = (ex.stderr * ex.stderr + tse * tse).sqrt();
            let lower = tv - 3.0 * eps;
            let upper = tv + 3.0 * eps;
            let pass = ex.ratio >= lower && ex.ratio <= upper;
            rows.push(ExcessBandRow {
                u: outcome.u,
                x,
                excess: ex.ratio,
                excess_se: ex.stderr,
                theta: tv,
                theta_se: tse,
                lower,
                upper,
                pass,
                positive_samples: outcome.positive_sojourns.len() as u64,
            });
        }
    }
    Ok(rows)
}

fn theta_value_at(theta: &ThetaEstimate, x: f64) -> Result<(f64, f64)> {
    theta
        .x_grid
        .iter()
        .position(|&g| (g - x).abs() < 1e-12)
        .map(|i| (theta.theta[i], theta.stderr[i]))
        .ok_or_else(|| CoreError::Config(format!("x = {x} missing from the occupation-tail grid")))
}

/// Excess integral from the positive samples of a mostly-zero population of
/// known total size (zeros contribute nothing to either mean).
pub fn excess_integral_sparse(
    positives: &[f64],
    n_total: u64,
    x: f64,
) -> Result<functionals::ExcessIntegral> {
    if x < 0.0 {
        return Err(CoreError::invalid("x", format!("{x} must be >= 0")));
    }
    if positives.is_empty() || n_total == 0 {
        return Err(CoreError::UndefinedRatio("no positive samples".into()));
    }
    let nf = n_total as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &y in positives {
        let a = (y - x).max(0.0);
        sa += a;
        sb += y;
        saa += a * a;
        sbb += y * y;
        sab += a * y;
    }
    let ma = sa / nf;
    let mb = sb / nf;
    let ratio = ma / mb;
    let va = saa / nf - ma * ma;
    let vb = sbb / nf - mb * mb;
    let cab = sab / nf - ma * mb;
    let stderr = if ma > 0.0 {
        ((va / (ma * ma) + vb / (mb * mb) - 2.0 * cab / (ma * mb)) * ratio * ratio / nf)
            .max(0.0)
            .sqrt()
    } else {
        0.0
    };
    Ok(functionals::ExcessIntegral { x, ratio, stderr })
}

/// Serializes convergence rows with the fixed column schema
/// `(u, estimate, stderr, prediction, ratio, ratio_err, n_samples, grid_N, seed)`.
pub fn convergence_csv(rows: &[ConvergenceRow], grid_n: usize, seed: u64) -> String {
    let mut s =
        String::from("u,estimate,stderr,prediction,ratio,ratio_err,n_samples,grid_N,seed\n");
    for row in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.u,
            row.estimate.mean,
            row.estimate.stderr,
            row.prediction,
            row.ratio,
            row.ratio_err,
            row.estimate.n_samples,
            grid_n,
            seed
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{fbm_kernel, scaling_scheme_for};
    use crate::pathsim::{make_grid, GridLayout};

    fn brownian_sup_spec(levels: Vec<f64>, batches: u64, batch_size: u64) -> ExperimentSpec {
        ExperimentSpec {
            process: ProcessConfig::gaussian(fbm_kernel(0.5).unwrap()),
            n: 1,
            r: 1,
            levels,
            grid: make_grid(GridLayout::LogUniform, 512, Some(1e-3)).unwrap(),
            horizon: 1.0,
            functional: FunctionalKind::SupProbability,
            scheme: None,
            batches,
            batch_size,
            master_seed: 99,
            memory_bound_bytes: DEFAULT_MEMORY_BOUND,
        }
    }

    #[test]
    fn determinism_and_worker_independence() {
        let spec = brownian_sup_spec(vec![1.0, 2.0], 8, 512);
        let run = |workers: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
            pool.install(|| run_experiment(&spec).unwrap())
        };
        let a = run(1);
        let b = run(4);
        let c = run(2);
        for ((x, y), z) in a.levels.iter().zip(&b.levels).zip(&c.levels) {
            assert_eq!(x.estimate.mean.to_bits(), y.estimate.mean.to_bits());
            assert_eq!(x.estimate.mean.to_bits(), z.estimate.mean.to_bits());
        }
    }

    #[test]
    fn sup_probability_brownian_reflection() {
        // P(sup W > u) = 2 Phibar(u); grid bias is negative and modest at
        // this resolution.
        let spec = brownian_sup_spec(vec![1.0], 64, 2048);
        let out = run_experiment(&spec).unwrap();
        let est = out.levels[0].estimate;
        let exact = 2.0 * crate::special::norm_tail(1.0);
        assert!(est.mean < exact + 3.0 * est.stderr, "{} vs {exact}", est.mean);
        assert!(est.mean > 0.85 * exact, "{} vs {exact}", est.mean);
        assert_eq!(out.sampler, "brownian-increments");
    }

    #[test]
    fn memory_bound_guards_before_running() {
        let mut spec = brownian_sup_spec(vec![1.0], 1, 1 << 20);
        spec.memory_bound_bytes = 1 << 20;
        match run_experiment(&spec) {
            Err(CoreError::Resource(_)) => {}
            other => panic!("expected resource error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn estimates_live_in_unit_interval() {
        let spec = brownian_sup_spec(vec![0.5, 1.5, 3.0], 4, 256);
        let out = run_experiment(&spec).unwrap();
        for l in &out.levels {
            assert!(l.estimate.mean >= 0.0 && l.estimate.mean <= 1.0);
            let (lo, hi) = l.estimate.ci95;
            assert!((l.estimate.mean - 0.5 * (lo + hi)).abs() < 1e-12);
        }
    }

    #[test]
    fn horizon_rescaling_matches_unit_run() {
        // P(sup_{[0,4]} W > 2) = P(sup_{[0,1]} W > 1): same streams, same
        // estimates after level rescaling.
        let unit = brownian_sup_spec(vec![1.0], 8, 512);
        let mut horizon = brownian_sup_spec(vec![2.0], 8, 512);
        horizon.horizon = 4.0;
        let a = run_experiment(&unit).unwrap();
        let b = run_experiment(&horizon).unwrap();
        assert_eq!(a.levels[0].estimate.mean.to_bits(), b.levels[0].estimate.mean.to_bits());
    }

    #[test]
    fn sojourn_mean_matches_quadrature() {
        let scheme = scaling_scheme_for(1.0, 0.5).unwrap();
        let mut spec = brownian_sup_spec(vec![1.0], 32, 2048);
        spec.functional = FunctionalKind::Sojourn;
        spec.scheme = Some(scheme);
        spec.grid = make_grid(GridLayout::LogUniform, 2048, Some(1e-3)).unwrap();
        let out = run_experiment(&spec).unwrap();
        let est = out.levels[0].estimate;
        let exact = mean_sojourn_exact(1.0, 1, 1, &gaussian_marginal(), 0.5).unwrap();
        assert!(
            (est.mean - exact).abs() < 3.0 * est.stderr + 0.02 * exact,
            "{} vs {exact} (se {})",
            est.mean,
            est.stderr
        );
        // Positive samples normalized by q(1) = 1.
        assert!(!out.levels[0].positive_sojourns.is_empty());
    }

    #[test]
    fn order_statistics_two_copies() {
        // n = r = 2: sup of the min of two Brownian copies dominates the
        // endpoint tail Phibar(u)^2.
        let mut spec = brownian_sup_spec(vec![1.0], 16, 1024);
        spec.n = 2;
        spec.r = 2;
        let out = run_experiment(&spec).unwrap();
        let p2 = out.levels[0].estimate.mean;
        let endpoint = crate::special::norm_tail(1.0).powi(2);
        assert!(p2 > endpoint, "sup tail must dominate the endpoint tail");
        let p1 = 2.0 * crate::special::norm_tail(1.0);
        assert!(p2 < p1, "min-path tail cannot exceed the single-copy tail");
    }

    #[test]
    fn closed_form_table_needs_no_simulation() {
        let mut spec = brownian_sup_spec(vec![2.0, 3.0, 4.0], 1, 1);
        spec.n = 3;
        spec.r = 2;
        let rows = convergence_table(&spec, &PredictionSource::OrderTailRatio).unwrap();
        assert_eq!(rows.len(), 3);
        let mut last = 0.0;
        for row in &rows {
            assert!(row.ratio > last && row.ratio <= 1.0, "ratio {}", row.ratio);
            assert!(row.ratio_err == 0.0 && row.estimate.n_samples == 0);
            last = row.ratio;
        }
    }

    #[test]
    fn csv_schema_and_determinism() {
        let mut spec = brownian_sup_spec(vec![2.0, 3.0], 1, 1);
        spec.n = 2;
        spec.r = 1;
        let rows = convergence_table(&spec, &PredictionSource::OrderTailRatio).unwrap();
        let a = convergence_csv(&rows, 512, 99);
        let b = convergence_csv(&rows, 512, 99);
        assert_eq!(a, b);
        assert!(
            a.starts_with("u,estimate,stderr,prediction,ratio,ratio_err,n_samples,grid_N,seed\n")
        );
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn excess_band_trivial_at_zero() {
        let scheme = scaling_scheme_for(1.0, 0.5).unwrap();
        let mut spec = brownian_sup_spec(vec![1.5], 16, 1024);
        spec.functional = FunctionalKind::Sojourn;
        spec.scheme = Some(scheme);
        let theta = ThetaEstimate {
            x_grid: vec![0.0, 0.5],
            theta: vec![1.0, 0.7],
            stderr: vec![0.0, 0.01],
            mean_occupation: 1.0,
            horizon: 16.0,
            step: 0.01,
            draws: 1,
        };
        let rows = excess_band_check(&spec, &[0.0], &theta).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].pass);
        assert!((rows[0].excess - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_excess_matches_dense() {
        let dense = vec![0.0, 0.0, 1.0, 2.0, 0.0, 0.5];
        let positives = vec![1.0, 2.0, 0.5];
        for x in [0.0, 0.4, 1.1] {
            let a = functionals::excess_integral(&dense, x).unwrap();
            let b = excess_integral_sparse(&positives, dense.len() as u64, x).unwrap();
            assert!((a.ratio - b.ratio).abs() < 1e-14);
            assert!((a.stderr - b.stderr).abs() < 1e-14);
        }
    }
}
