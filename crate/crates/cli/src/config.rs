//! Run configuration: a sectioned `key = value` file (TOML) with strict
//! schema validation. Unknown keys are rejected with line-anchored messages,
//! and every run echoes the fully resolved configuration (defaults included)
//! next to its outputs.

use ordex_core::asymptotics::ThetaConfig;
use ordex_core::harness::{
    ExperimentSpec, FunctionalKind, ProcessConfig, DEFAULT_MEMORY_BOUND,
};
use ordex_core::kernels::{
    bifbm_kernel, fbm_kernel, local_expansion, scaling_scheme_for, subfbm_kernel,
    CovarianceKernel, ScalingScheme,
};
use ordex_core::pathsim::{make_grid, GridLayout, GridSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub process: ProcessSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub theta: ThetaSection,
    #[serde(default)]
    pub conditions: ConditionsSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub prop2: Prop2Section,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    /// fbm | bifbm | subfbm
    pub kernel: String,
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_m")]
    pub m: u32,
}

fn default_m() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub n: u32,
    pub r: u32,
    pub levels: Vec<f64>,
    /// sup-probability | sojourn
    pub functional: String,
    pub horizon: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            n: 1,
            r: 1,
            levels: vec![2.0, 2.5, 3.0, 3.5, 4.0],
            functional: "sup-probability".into(),
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// uniform | log-uniform
    pub layout: String,
    pub resolution: usize,
    pub t_min: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { layout: "log-uniform".into(), resolution: 4096, t_min: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub batches: u64,
    pub batch_size: u64,
    pub seed: u64,
    pub memory_bound_mb: u64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            batches: 64,
            batch_size: 4096,
            seed: 0,
            memory_bound_mb: (DEFAULT_MEMORY_BOUND >> 20),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    /// Local exponent driving the time scale; fitted from the kernel when
    /// absent.
    pub alpha: Option<f64>,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection { alpha: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    /// mean-sojourn | endpoint-tail | order-tail-ratio
    pub prediction: String,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection { prediction: "mean-sojourn".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSection {
    pub r: Option<u32>,
    pub alpha: Option<f64>,
    pub d: Option<f64>,
    pub kappa: Option<f64>,
    pub beta4: Option<f64>,
    pub x_grid: Vec<f64>,
    pub draws: u64,
    pub step: Option<f64>,
    /// Re-run with a doubled grid and emit `theta_refined.csv`.
    pub refine: bool,
}

impl Default for ThetaSection {
    fn default() -> Self {
        ThetaSection {
            r: None,
            alpha: None,
            d: None,
            kappa: None,
            beta4: None,
            x_grid: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0],
            draws: 200_000,
            step: None,
            refine: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    /// Subset of ["A", "B", "C", "C*"]; A and B are the cheap defaults.
    pub run: Vec<String>,
    pub u_levels: Vec<f64>,
    pub lags: Vec<f64>,
    pub d: f64,
    pub a: f64,
    pub sigma: f64,
    pub draws: u64,
    pub t_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub v: f64,
    pub rho: Option<f64>,
    pub lambda0: f64,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        ConditionsSection {
            run: vec!["A".into(), "B".into()],
            u_levels: vec![3.0, 4.0],
            lags: vec![0.5, 1.0],
            d: 4.0,
            a: 0.25,
            sigma: 1.0,
            draws: 100_000,
            t_grid: vec![0.1, 0.2, 0.4, 0.7, 1.0],
            lambda_grid: vec![0.4, 0.6, 0.9, 1.4, 2.0],
            v: 0.0,
            rho: None,
            lambda0: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub paths: u64,
    /// paths | sojourns
    pub dump: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { paths: 64, dump: "paths".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prop2Section {
    pub x_grid: Vec<f64>,
    /// closed-form | estimate
    pub theta_source: String,
}

impl Default for Prop2Section {
    fn default() -> Self {
        Prop2Section { x_grid: vec![0.0, 0.2, 0.5, 1.0], theta_source: "closed-form".into() }
    }
}

/// Configuration failure with a message suitable for exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    /// Parses and validates; TOML errors carry line/column anchors.
    pub fn from_str(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("config error: {e}")))?;
        if cfg.schema_version != 1 {
            return Err(ConfigError(format!(
                "config error: unsupported schema_version {} (expected 1)",
                cfg.schema_version
            )));
        }
        cfg.kernel()?;
        cfg.functional()?;
        cfg.grid_spec()?;
        Ok(cfg)
    }

    pub fn kernel(&self) -> Result<CovarianceKernel, ConfigError> {
        let p = &self.process;
        let kernel = match p.kernel.as_str() {
            "fbm" => fbm_kernel(p.h),
            "bifbm" => {
                let k = p.k.ok_or_else(|| {
                    ConfigError("config error: [process] k is required for bifbm".into())
                })?;
                bifbm_kernel(p.h, k)
            }
            "subfbm" => subfbm_kernel(p.h),
            other => {
                return Err(ConfigError(format!(
                    "config error: unknown kernel `{other}` (expected fbm | bifbm | subfbm)"
                )))
            }
        };
        kernel.map_err(|e| ConfigError(format!("config error: {e}")))
    }

    pub fn functional(&self) -> Result<FunctionalKind, ConfigError> {
        match self.experiment.functional.as_str() {
            "sup-probability" => Ok(FunctionalKind::SupProbability),
            "sojourn" => Ok(FunctionalKind::Sojourn),
            other => Err(ConfigError(format!(
                "config error: unknown functional `{other}` (expected sup-probability | sojourn)"
            ))),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let layout = match self.grid.layout.as_str() {
            "uniform" => GridLayout::Uniform,
            "log-uniform" => GridLayout::LogUniform,
            other => {
                return Err(ConfigError(format!(
                    "config error: unknown grid layout `{other}` (expected uniform | log-uniform)"
                )))
            }
        };
        let t_min = (layout == GridLayout::LogUniform).then_some(self.grid.t_min);
        make_grid(layout, self.grid.resolution, t_min)
            .map_err(|e| ConfigError(format!("config error: {e}")))
    }

    /// Local exponent: explicit override or fitted from the kernel.
    pub fn alpha(&self) -> Result<f64, ConfigError> {
        if let Some(a) = self.scheme.alpha {
            return Ok(a);
        }
        let kernel = self.kernel()?;
        local_expansion(&kernel)
            .map(|e| e.alpha)
            .map_err(|e| ConfigError(format!("config error: cannot infer alpha: {e}")))
    }

    pub fn scheme(&self) -> Result<ScalingScheme, ConfigError> {
        let kernel = self.kernel()?;
        scaling_scheme_for(self.alpha()?, kernel.kappa())
            .map_err(|e| ConfigError(format!("config error: {e}")))
    }

    pub fn experiment_spec(&self, seed: u64) -> Result<ExperimentSpec, ConfigError> {
        let kernel = self.kernel()?;
        let functional = self.functional()?;
        let scheme = self.scheme()?;
        Ok(ExperimentSpec {
            process: ProcessConfig {
                kernel,
                delta: self.process.delta,
                m: self.process.m,
            },
            n: self.experiment.n,
            r: self.experiment.r,
            levels: self.experiment.levels.clone(),
            grid: self.grid_spec()?,
            horizon: self.experiment.horizon,
            functional,
            scheme: Some(scheme),
            batches: self.mc.batches,
            batch_size: self.mc.batch_size,
            master_seed: seed,
            memory_bound_bytes: self.mc.memory_bound_mb << 20,
        })
    }

    /// Cluster parameters for the occupation-tail estimate, filled from the
    /// kernel's local expansion where not overridden.
    pub fn theta_params(&self, seed: u64) -> Result<(u32, f64, f64, f64, f64, ThetaConfig), ConfigError> {
        let kernel = self.kernel()?;
        let fitted = local_expansion(&kernel)
            .map_err(|e| ConfigError(format!("config error: cannot fit local expansion: {e}")))?;
        let alpha = self.theta.alpha.unwrap_or(fitted.alpha);
        let d = self.theta.d.unwrap_or(fitted.d);
        let kappa = self.theta.kappa.unwrap_or(kernel.kappa());
        let scheme = scaling_scheme_for(alpha, kappa)
            .map_err(|e| ConfigError(format!("config error: {e}")))?;
        let beta4 = self.theta.beta4.unwrap_or(scheme.beta4);
        let r = self.theta.r.unwrap_or(self.experiment.r);
        let cfg = ThetaConfig {
            draws: self.theta.draws,
            step: self.theta.step,
            master_seed: seed,
            ..Default::default()
        };
        Ok((r, alpha, d, kappa, beta4, cfg))
    }

    /// Serialized fully-resolved configuration (defaults included).
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|e| format!("# serialization error: {e}"))
    }
}
