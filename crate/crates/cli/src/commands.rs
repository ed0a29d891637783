//! Command implementations: each run writes its resolved configuration and
//! a version stamp next to the outputs, and every output file is a pure
//! function of `(config, seed)`.

use crate::config::RunConfig;
use ordex_core::asymptotics::{
    estimate_theta, theta_drift_closed_form, theta_prime_at_zero, ThetaEstimate,
};
use ordex_core::conditions::{
    cond_a_probe, cond_b_tail, cond_c_ratio, cond_cstar_ratio, ConditionReport, LimitParams,
    ProbeConfig, Verdict,
};
use ordex_core::harness::{
    convergence_csv, convergence_table, excess_band_check, run_experiment, FunctionalKind,
    PredictionSource,
};
use ordex_core::kernels::gaussian_marginal;
use ordex_core::pathsim::{plan_sampler, SamplerScratch};
use ordex_core::rng::{stream, Phase};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub strict: bool,
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error + Send + Sync>>;

impl Context {
    fn write(&self, name: &str, content: &str) -> std::io::Result<()> {
        std::fs::write(self.out.join(name), content)
    }

    fn stamp(&self) -> std::io::Result<()> {
        let mut manifest = String::new();
        let _ = writeln!(manifest, "tool = \"ordex {}\"", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(manifest, "seed = {}", self.seed);
        let _ = writeln!(manifest, "workers = {}", self.workers);
        let _ = writeln!(manifest);
        manifest.push_str(&self.config.resolved_toml());
        self.write("resolved.toml", &manifest)
    }
}

/// Dumps raw ensembles (one row per path, comma-separated) or sojourn
/// samples as columnar text.
pub fn simulate(ctx: &Context) -> CmdResult {
    ctx.stamp()?;
    let cfg = &ctx.config;
    match cfg.simulate.dump.as_str() {
        "paths" => {
            let kernel = cfg.kernel()?.standardized();
            let grid = cfg.grid_spec()?;
            let plan = plan_sampler(&kernel, &grid)?;
            let mut rng = stream(ctx.seed, Phase::Paths, 0);
            let mut scratch = SamplerScratch::default();
            let mut row = vec![0.0; grid.len()];
            let mut text = String::new();
            let _ = writeln!(
                text,
                "# t,{}",
                grid.times().iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
            );
            for _ in 0..cfg.simulate.paths {
                plan.sample_into(&mut rng, &mut row, &mut scratch);
                let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
                text.push_str(&line);
                text.push('\n');
            }
            ctx.write("ensembles.csv", &text)?;
        }
        "sojourns" => {
            let mut spec = cfg.experiment_spec(ctx.seed)?;
            spec.functional = FunctionalKind::Sojourn;
            let out = run_experiment(&spec)?;
            let mut text = String::from("u,normalized_sojourn\n");
            for level in &out.levels {
                for y in &level.positive_sojourns {
                    let _ = writeln!(text, "{},{}", level.u, y);
                }
            }
            ctx.write("sojourns.csv", &text)?;
        }
        other => {
            eprintln!("config error: unknown dump kind `{other}` (expected paths | sojourns)");
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Convergence table of Monte-Carlo estimates against a prediction source,
/// plus two-column plot data per curve.
pub fn estimate_p(ctx: &Context) -> CmdResult {
    ctx.stamp()?;
    let cfg = &ctx.config;
    let mut spec = cfg.experiment_spec(ctx.seed)?;
    spec.functional = FunctionalKind::SupProbability;
    let scheme = cfg.scheme()?;
    let source = match cfg.estimate.prediction.as_str() {
        "order-tail-ratio" => PredictionSource::OrderTailRatio,
        "endpoint-tail" => PredictionSource::EndpointTail { scheme },
        "mean-sojourn" => {
            let (r, alpha, d, kappa, beta4, tcfg) = cfg.theta_params(ctx.seed)?;
            if cfg.theta.x_grid.len() < 4 {
                eprintln!(
                    "config error: the mean-sojourn prediction needs [theta] x_grid with at \
                     least 4 points for the derivative fit"
                );
                return Ok(ExitCode::from(2));
            }
            let est = estimate_theta(r, alpha, d, kappa, beta4, &cfg.theta.x_grid, &tcfg)?;
            write_theta_outputs(ctx, &est, alpha, kappa, r, "theta.csv", "theta_prime.csv")?;
            let (tp, tp_se) = theta_prime_at_zero(&est)?;
            PredictionSource::MeanSojourn { theta_prime: tp, theta_prime_se: tp_se, scheme }
        }
        other => {
            eprintln!(
                "config error: unknown prediction `{other}` (expected mean-sojourn | \
                 endpoint-tail | order-tail-ratio)"
            );
            return Ok(ExitCode::from(2));
        }
    };
    let rows = convergence_table(&spec, &source)?;
    ctx.write("estimate_p.csv", &convergence_csv(&rows, spec.grid.len(), ctx.seed))?;

    let mut ratio_dat = String::new();
    let mut cmp_dat = String::new();
    for row in &rows {
        let _ = writeln!(ratio_dat, "{} {}", row.u, row.ratio);
        let _ = writeln!(cmp_dat, "{} {} {}", row.u, row.estimate.mean, row.prediction);
    }
    ctx.write("ratio_vs_u.dat", &ratio_dat)?;
    ctx.write("estimate_vs_prediction.dat", &cmp_dat)?;
    Ok(ExitCode::SUCCESS)
}

fn write_theta_outputs(
    ctx: &Context,
    est: &ThetaEstimate,
    alpha: f64,
    kappa: f64,
    r: u32,
    table_name: &str,
    prime_name: &str,
) -> std::io::Result<()> {
    let closed_form = alpha > 1.0;
    let mut table = String::from(if closed_form {
        "x,theta,stderr,closed_form\n"
    } else {
        "x,theta,stderr\n"
    });
    for (i, &x) in est.x_grid.iter().enumerate() {
        if closed_form {
            let _ = writeln!(
                table,
                "{},{},{},{}",
                x,
                est.theta[i],
                est.stderr[i],
                theta_drift_closed_form(x, kappa, r)
            );
        } else {
            let _ = writeln!(table, "{},{},{}", x, est.theta[i], est.stderr[i]);
        }
    }
    ctx.write(table_name, &table)?;
    let prime = match theta_prime_at_zero(est) {
        Ok((tp, se)) => format!(
            "derivative,stderr,horizon,step,draws,mean_occupation\n{},{},{},{},{},{}\n",
            tp, se, est.horizon, est.step, est.draws, est.mean_occupation
        ),
        Err(e) => format!("# derivative fit failed: {e}\n"),
    };
    ctx.write(prime_name, &prime)
}

/// Occupation-tail table plus the derivative record; `refine = true` doubles
/// the grid density and re-emits with a suffix.
pub fn theta(ctx: &Context) -> CmdResult {
    ctx.stamp()?;
    let cfg = &ctx.config;
    let (r, alpha, d, kappa, beta4, tcfg) = cfg.theta_params(ctx.seed)?;
    let x_grid = &cfg.theta.x_grid;
    if x_grid.first() != Some(&0.0) {
        eprintln!("config error: [theta] x_grid must start at 0");
        return Ok(ExitCode::from(2));
    }
    let est = estimate_theta(r, alpha, d, kappa, beta4, x_grid, &tcfg)?;
    write_theta_outputs(ctx, &est, alpha, kappa, r, "theta.csv", "theta_prime.csv")?;
    if cfg.theta.refine {
        let mut dense = Vec::new();
        for w in x_grid.windows(2) {
            dense.push(w[0]);
            dense.push(0.5 * (w[0] + w[1]));
        }
        dense.push(*x_grid.last().unwrap());
        let est2 = estimate_theta(r, alpha, d, kappa, beta4, &dense, &tcfg)?;
        write_theta_outputs(ctx, &est2, alpha, kappa, r, "theta_refined.csv", "theta_prime_refined.csv")?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Runs the selected hypothesis probes; `--strict` turns any failed verdict
/// into exit code 3.
pub fn check_conditions(ctx: &Context) -> CmdResult {
    ctx.stamp()?;
    let cfg = &ctx.config;
    let kernel = cfg.kernel()?;
    let scheme = cfg.scheme()?;
    let marginal = gaussian_marginal();
    let fitted = ordex_core::kernels::local_expansion(&kernel)?;
    let limit = LimitParams {
        alpha: fitted.alpha,
        d: fitted.d,
        kappa: kernel.kappa(),
        beta4: scheme.beta4,
    };
    let probe_cfg = ProbeConfig {
        draws: cfg.conditions.draws,
        master_seed: ctx.seed,
        sim_grid: cfg.grid.resolution.min(1024),
        t_min: cfg.grid.t_min,
        ..Default::default()
    };
    let rho = cfg.conditions.rho.unwrap_or(fitted.alpha / 2.0);

    let mut summary = String::new();
    let mut any_fail = false;
    for name in &cfg.conditions.run {
        let mut reports: Vec<ConditionReport> = Vec::new();
        match name.as_str() {
            "A" => {
                for &u in &cfg.conditions.u_levels {
                    reports.push(cond_a_probe(
                        &kernel,
                        &scheme,
                        u,
                        &cfg.conditions.lags,
                        limit,
                        &probe_cfg,
                    )?);
                }
            }
            "B" => {
                for &u in &cfg.conditions.u_levels {
                    reports.push(cond_b_tail(&kernel, &scheme, u, cfg.conditions.d, &probe_cfg)?);
                }
            }
            "C" => {
                for &u in &cfg.conditions.u_levels {
                    reports.push(cond_c_ratio(
                        &kernel,
                        &scheme,
                        &marginal,
                        u,
                        cfg.conditions.a,
                        cfg.conditions.sigma,
                        &probe_cfg,
                    )?);
                }
            }
            "C*" => {
                for &u in &cfg.conditions.u_levels {
                    reports.push(cond_cstar_ratio(
                        &kernel,
                        &scheme,
                        u,
                        &cfg.conditions.t_grid,
                        &cfg.conditions.lambda_grid,
                        cfg.conditions.v,
                        rho,
                        cfg.conditions.lambda0,
                    )?);
                }
            }
            other => {
                eprintln!("config error: unknown condition `{other}` (expected A | B | C | C*)");
                return Ok(ExitCode::from(2));
            }
        }
        let tag = reports[0].tag;
        let mut csv = String::from("condition,labels,observed,stderr,reference\n");
        let mut worst = Verdict::Pass;
        for rep in &reports {
            let _ = writeln!(summary, "{}", rep.summary);
            for cell in &rep.cells {
                let labels = cell
                    .labels
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(";");
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    tag.short_name(),
                    labels,
                    cell.observed,
                    cell.stderr,
                    cell.reference.map(|r| r.to_string()).unwrap_or_default()
                );
            }
            worst = match (worst, rep.verdict) {
                (_, Verdict::Fail) | (Verdict::Fail, _) => Verdict::Fail,
                (_, Verdict::Marginal) | (Verdict::Marginal, _) => Verdict::Marginal,
                _ => Verdict::Pass,
            };
        }
        let file = format!("cond_{}.csv", name.replace('*', "star"));
        ctx.write(&file, &csv)?;
        let _ = writeln!(summary, "condition {name}: overall {worst:?}");
        if worst == Verdict::Fail {
            any_fail = true;
        }
    }
    ctx.write("conditions_summary.txt", &summary)?;
    print!("{summary}");
    if any_fail && ctx.strict {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

/// Sojourn excess-integral band check against the occupation tail.
pub fn prop2(ctx: &Context) -> CmdResult {
    ctx.stamp()?;
    let cfg = &ctx.config;
    let mut spec = cfg.experiment_spec(ctx.seed)?;
    spec.functional = FunctionalKind::Sojourn;
    let (r, alpha, d, kappa, beta4, tcfg) = cfg.theta_params(ctx.seed)?;
    let theta = match cfg.prop2.theta_source.as_str() {
        "closed-form" => {
            if alpha <= 1.0 {
                eprintln!(
                    "config error: closed-form occupation tail requires alpha > 1 \
                     (got {alpha}); use theta_source = \"estimate\""
                );
                return Ok(ExitCode::from(2));
            }
            closed_form_theta(&cfg.prop2.x_grid, kappa, r)
        }
        "estimate" => estimate_theta(r, alpha, d, kappa, beta4, &cfg.prop2.x_grid, &tcfg)?,
        other => {
            eprintln!(
                "config error: unknown theta_source `{other}` (expected closed-form | estimate)"
            );
            return Ok(ExitCode::from(2));
        }
    };
    let rows = excess_band_check(&spec, &cfg.prop2.x_grid, &theta)?;
    let mut csv =
        String::from("u,x,excess,excess_se,theta,theta_se,lower,upper,pass,positive_samples\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            row.u,
            row.x,
            row.excess,
            row.excess_se,
            row.theta,
            row.theta_se,
            row.lower,
            row.upper,
            row.pass,
            row.positive_samples
        );
    }
    ctx.write("prop2.csv", &csv)?;
    let all_pass = rows.iter().all(|r| r.pass);
    println!(
        "excess band: {}/{} cells inside the band",
        rows.iter().filter(|r| r.pass).count(),
        rows.len()
    );
    if !all_pass && ctx.strict {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

/// Exact occupation tail packaged as an estimate with zero error bars.
fn closed_form_theta(x_grid: &[f64], kappa: f64, r: u32) -> ThetaEstimate {
    let theta: Vec<f64> = x_grid.iter().map(|&x| theta_drift_closed_form(x, kappa, r)).collect();
    ThetaEstimate {
        x_grid: x_grid.to_vec(),
        stderr: vec![0.0; x_grid.len()],
        theta,
        mean_occupation: 1.0 / (kappa * f64::from(r)),
        horizon: f64::INFINITY,
        step: 0.0,
        draws: 0,
    }
}

#[allow(dead_code)]
fn unused(_: &Path) {}
