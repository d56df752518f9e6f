use crate::error::CliError;
use bosonlab::agsp::PipelineConfig;
use bosonlab::fock::FockSpace;
use bosonlab::linalg::Method;
use bosonlab::models::{long_range_bose_hubbard, standard_bose_hubbard, standard_phi4, Boundary, ModelSpec};
use bosonlab::spectra::SolveOptions;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_MEMORY_BYTES: u64 = 4 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    BoseHubbard {
        sites: usize,
        j: f64,
        u: f64,
        #[serde(default)]
        periodic: bool,
    },
    LongRangeBoseHubbard {
        sites: usize,
        alpha: f64,
        j0: f64,
        u: f64,
    },
    Phi4 {
        sites: usize,
        #[serde(default)]
        lambda: f64,
        #[serde(default)]
        gamma: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let spec = match *self {
            ModelConfig::BoseHubbard { sites, j, u, periodic } => {
                standard_bose_hubbard(sites, j, u, if periodic { Boundary::Periodic } else { Boundary::Open })
            }
            ModelConfig::LongRangeBoseHubbard { sites, alpha, j0, u } => long_range_bose_hubbard(sites, alpha, j0, u),
            ModelConfig::Phi4 { sites, lambda, gamma } => standard_phi4(sites, lambda, gamma),
        };
        spec.map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn sites(&self) -> usize {
        match *self {
            ModelConfig::BoseHubbard { sites, .. }
            | ModelConfig::LongRangeBoseHubbard { sites, .. }
            | ModelConfig::Phi4 { sites, .. } => sites,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Uniform cutoff, unless `cutoffs` is given.
    pub cutoff: usize,
    pub cutoffs: Option<Vec<usize>>,
    pub n_eigs: usize,
    pub tol: f64,
    pub dense_threshold: usize,
    pub max_matvecs: usize,
    pub seed: u64,
    /// `auto`, `lanczos` or `davidson`.
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            cutoff: 4,
            cutoffs: None,
            n_eigs: d.n_eigs,
            tol: d.tol,
            dense_threshold: d.dense_threshold,
            max_matvecs: d.max_matvecs,
            seed: d.seed,
            method: d.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailConfig {
    pub site: usize,
    pub floor: f64,
    pub n_min: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self { site: 0, floor: 1e-13, n_min: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub checks: Vec<String>,
    pub max_mn: u32,
    pub lambda_s: u32,
    pub binomial_m: u32,
    pub moment_s: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { checks: vec!["all".into()], max_mn: 5, lambda_s: 8, binomial_m: 30, moment_s: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgspConfig {
    pub eps0: f64,
    pub a: f64,
    pub b: f64,
    pub q: usize,
    pub l: usize,
    pub tau: f64,
    pub alpha_bar: f64,
    pub degrees: Vec<usize>,
}

impl Default for AgspConfig {
    fn default() -> Self {
        Self { eps0: 0.01, a: 1.0, b: 2.0, q: 2, l: 1, tau: 2.0, alpha_bar: 2.0, degrees: vec![2, 4, 8, 16] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntangleConfig {
    pub max_bond: usize,
    pub cut: Option<usize>,
    pub ey_rank: usize,
    pub ey_trials: usize,
    pub c0: f64,
    pub alpha_bar: f64,
}

impl Default for EntangleConfig {
    fn default() -> Self {
        Self { max_bond: 8, cut: None, ey_rank: 2, ey_trials: 50, c0: 1.0, alpha_bar: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub memory_bytes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { memory_bytes: DEFAULT_MEMORY_BYTES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default)]
    pub agsp: AgspConfig,
    #[serde(default)]
    pub entangle: EntangleConfig,
    #[serde(default)]
    pub limits: Limits,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.model.sites();
        if n == 0 {
            return Err(CliError::Config("model.sites must be ≥ 1".into()));
        }
        if let Some(c) = &self.solver.cutoffs {
            if c.len() != n {
                return Err(CliError::Config(format!("solver.cutoffs has {} entries for {n} sites", c.len())));
            }
        }
        if self.tail.site >= n {
            return Err(CliError::Config(format!("tail.site {} out of range", self.tail.site)));
        }
        if self.agsp.degrees.iter().any(|&m| m == 0) {
            return Err(CliError::Config("agsp.degrees must be ≥ 1".into()));
        }
        if self.entangle.max_bond == 0 {
            return Err(CliError::Config("entangle.max_bond must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<FockSpace, CliError> {
        let cut = self.solver.cutoffs.clone().unwrap_or_else(|| vec![self.solver.cutoff; self.model.sites()]);
        FockSpace::new(cut).map_err(|e| CliError::Config(format!("cutoffs: {e}")))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            n_eigs: self.solver.n_eigs,
            tol: self.solver.tol,
            dense_threshold: self.solver.dense_threshold,
            seed: self.solver.seed,
            start: None,
            max_matvecs: self.solver.max_matvecs,
            method: self.solver.method,
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        Ok(PipelineConfig {
            spec: self.model.build()?,
            ambient_cutoff: self.solver.cutoff,
            eps0: self.agsp.eps0,
            a: self.agsp.a,
            b: self.agsp.b,
            q: self.agsp.q,
            l: self.agsp.l,
            tau: self.agsp.tau,
            alpha_bar_default: self.agsp.alpha_bar,
            seed: self.solver.seed,
        })
    }

    /// Sets a dotted key (e.g. `model.j`) from a TOML literal.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, CliError> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).map_err(|e| CliError::Config(e.to_string()))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .map(|mut t| t.remove("v").unwrap())
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().ok_or_else(|| CliError::Config("empty sweep key".into()))?;
        let mut cur = &mut doc;
        for p in path {
            cur = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()))
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{key}: {p} is not a table")))?;
        }
        cur.insert(last.to_string(), parsed);
        let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("sweep {key}={value}: {e}")))
    }
}

/// `key=a:b:n` (n points, inclusive) or `key=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<(String, Vec<String>), CliError> {
    let (key, range) = arg.split_once('=').ok_or_else(|| CliError::Usage(format!("sweep `{arg}` lacks `=`")))?;
    let bad = || CliError::Usage(format!("sweep range `{range}` is neither a:b:n nor a list"));
    let values = if range.contains(':') {
        let p: Vec<&str> = range.split(':').collect();
        if p.len() != 3 {
            return Err(bad());
        }
        let a: f64 = p[0].parse().map_err(|_| bad())?;
        let b: f64 = p[1].parse().map_err(|_| bad())?;
        let n: usize = p[2].parse().map_err(|_| bad())?;
        if n < 2 {
            return Err(bad());
        }
        (0..n).map(|i| format!("{:?}", a + (b - a) * i as f64 / (n - 1) as f64)).collect()
    } else {
        range.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect::<Vec<_>>()
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok((key.to_string(), values))
}
