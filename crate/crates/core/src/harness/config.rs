use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{BoConfig, GlsConfig};
use crate::population::{default_mixture, MixtureComponent};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// L2 discrepancy under the symmetric product kernel, uniform population.
    SymmetricL2,
    /// MMD to the population itself, Gaussian-mixture population.
    MmdMixture,
    /// Exact star discrepancy, uniform population.
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Random,
    Gls,
    BoDs,
    BoDe,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Gls, Method::BoDs, Method::BoDe];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Gls => "gls",
            Method::BoDs => "bo-ds",
            Method::BoDe => "bo-de",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PopulationSource {
    /// Fresh population per seed.
    Generate,
    /// The same population, read from CSV, for every seed.
    File {
        path: PathBuf,
        #[serde(default)]
        header: bool,
    },
}

/// A multi-seed, multi-method experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub budget: usize,
    pub seeds: Vec<RngSeed>,
    pub methods: Vec<Method>,
    /// BO settings shared by both set kernels. `iterations` is replaced by
    /// `budget - n_init` and `seed` by the cell's seed.
    pub bo: BoConfig,
    pub bo_de: Option<BoConfig>,
    pub bo_ds: Option<BoConfig>,
    pub gls: GlsConfig,
    pub population: PopulationSource,
    pub mixture: Vec<MixtureComponent>,
    /// RBF bandwidth of the MMD objective.
    pub mmd_sigma: f64,
    pub memoize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::SymmetricL2,
            n: 1000,
            m: 25,
            d: 2,
            budget: 100,
            seeds: (0..10).map(RngSeed).collect(),
            methods: Method::ALL.to_vec(),
            bo: BoConfig::default(),
            bo_de: None,
            bo_ds: None,
            gls: GlsConfig::default(),
            population: PopulationSource::Generate,
            mixture: default_mixture(),
            mmd_sigma: 0.1,
            memoize: false,
        }
    }
}

impl ExperimentConfig {
    /// `exp1`, `exp2` or `exp3`.
    pub fn preset(name: &str) -> Result<Self> {
        let experiment = match name {
            "exp1" => ExperimentKind::SymmetricL2,
            "exp2" => ExperimentKind::MmdMixture,
            "exp3" => ExperimentKind::Star,
            other => return Err(Error::Config(format!("unknown preset `{other}`"))),
        };
        Ok(ExperimentConfig { experiment, ..ExperimentConfig::default() })
    }

    /// Reads a config file, or the `config` entry of a run manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = match serde_json::from_str::<Manifest>(&text) {
            Ok(manifest) => manifest.config,
            Err(_) => serde_json::from_str(&text)
                .map_err(|source| Error::Json { path: path.to_path_buf(), source })?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::Config(format!("need n >= m >= 1, got n={} m={}", self.n, self.m)));
        }
        if self.d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return Err(Error::Config("method list has duplicates".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_by_key(|s| s.0);
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seed list has duplicates".into()));
        }
        if self.experiment == ExperimentKind::MmdMixture && !(self.mmd_sigma > 0.0) {
            return Err(Error::Config("mmd_sigma must be positive".into()));
        }
        for method in &self.methods {
            match method {
                Method::BoDe | Method::BoDs => self.bo_config(*method, RngSeed(0))?.validate(self.budget)?,
                Method::Gls if self.budget < self.gls.pool_size => {
                    return Err(Error::Config(format!(
                        "budget {} is below the GLS pool size {}",
                        self.budget, self.gls.pool_size
                    )))
                }
                _ if self.budget == 0 => return Err(Error::Config("budget must be positive".into())),
                _ => {}
            }
        }
        Ok(())
    }

    /// Effective BO settings of one cell.
    pub fn bo_config(&self, method: Method, seed: RngSeed) -> Result<BoConfig> {
        let base = match method {
            Method::BoDe => self.bo_de.as_ref().unwrap_or(&self.bo),
            Method::BoDs => self.bo_ds.as_ref().unwrap_or(&self.bo),
            _ => return Err(Error::Config(format!("{method} is not a BO method"))),
        };
        if base.n_init > self.budget {
            return Err(Error::Config(format!(
                "n_init {} exceeds the budget {}",
                base.n_init, self.budget
            )));
        }
        Ok(BoConfig { iterations: self.budget - base.n_init, seed, ..base.clone() })
    }

    pub fn gls_config(&self, seed: RngSeed) -> GlsConfig {
        GlsConfig { seed, ..self.gls.clone() }
    }
}

/// Everything needed to reproduce a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub seeds: Vec<RngSeed>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Manifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: config.seeds.clone(),
            config: config.clone(),
        }
    }
}
