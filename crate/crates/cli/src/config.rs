//! Simulation campaign configuration.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use sbss_core::{CovModel, DomainSpec, DriftModel, Estimator, KernelSpec, Method, Pattern};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, Result};

/// A single value or a list of values in the config file.
#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// A drift given by its number in the study (1 to 4) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftEntry {
    Numbered(u8),
    Model(DriftModel),
}

impl DriftEntry {
    pub fn model(&self) -> Result<DriftModel> {
        match self {
            DriftEntry::Numbered(k) => {
                DriftModel::numbered(*k).ok_or_else(|| CliError::Config(format!("unknown drift number {k}, expected 1 to 4")))
            }
            DriftEntry::Model(m) => Ok(m.clone()),
        }
    }

    /// Column value in the results table.
    pub fn label(&self) -> String {
        match self {
            DriftEntry::Numbered(k) => k.to_string(),
            DriftEntry::Model(DriftModel::Zero) => "zero".into(),
            DriftEntry::Model(DriftModel::RadialLog { .. }) => "radial_log".into(),
            DriftEntry::Model(DriftModel::LinearX { .. }) => "linear_x".into(),
            DriftEntry::Model(DriftModel::BlockCluster { .. }) => "block_cluster".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub label: String,
    pub method: Method,
    #[serde(default)]
    pub kernels: Vec<KernelSpec>,
}

impl EstimatorConfig {
    pub fn new(label: &str, method: Method, kernels: &[&str]) -> Self {
        Self {
            label: label.into(),
            method,
            kernels: kernels.iter().map(|k| k.parse().expect("valid kernel literal")).collect(),
        }
    }

    pub fn estimator(&self) -> Result<Estimator> {
        Estimator::new(self.method, self.kernels.clone()).map_err(|e| CliError::Config(format!("estimator '{}': {e}", self.label)))
    }

    /// The five estimators of the simulation study.
    pub fn study_set() -> Vec<EstimatorConfig> {
        vec![
            EstimatorConfig::new("LCov Ball", Method::LcovSd, &["ball:1"]),
            EstimatorConfig::new("LCov Ring", Method::LcovJd, &["ring:0:1", "ring:1:2", "ring:2:3"]),
            EstimatorConfig::new("LDiff Ball", Method::LdiffSd, &["ball:1"]),
            EstimatorConfig::new("wLDiff Ring", Method::LdiffWhitened, &["ring:0:1", "ring:1:2"]),
            EstimatorConfig::new("FOBI", Method::Fobi, &[]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mixing {
    /// `A = I`.
    #[default]
    Identity,
    /// Standard normal entries, redrawn per replicate.
    Random,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub domains: Vec<f64>,
    #[serde(deserialize_with = "one_or_many", default = "default_pattern")]
    pub pattern: Vec<Pattern>,
    pub cov_models: Vec<CovModel>,
    #[serde(deserialize_with = "one_or_many")]
    pub drift: Vec<DriftEntry>,
    pub estimators: Vec<EstimatorConfig>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub mixing: Mixing,
    /// Fill the `seconds` column; makes `results.csv` differ between runs.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default = "default_true")]
    pub plot: bool,
}

fn default_pattern() -> Vec<Pattern> {
    vec![Pattern::Uniform]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 200 replicates on domains 10 to 40, uniform pattern, all four drifts.
    Desk,
    /// 2000 replicates on domains 10 to 60, both patterns, all four drifts.
    Full,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        })
    }
}

impl Preset {
    pub fn value(&self) -> Value {
        let estimators = serde_json::to_value(EstimatorConfig::study_set()).expect("serializable");
        let cov_models = serde_json::to_value(CovModel::matern_triplet()).expect("serializable");
        match self {
            Preset::Desk => json!({
                "domains": [10, 20, 30, 40],
                "pattern": "uniform",
                "cov_models": cov_models,
                "drift": [1, 2, 3, 4],
                "estimators": estimators,
                "replicates": 200,
                "master_seed": 1,
            }),
            Preset::Full => json!({
                "domains": [10, 20, 30, 40, 50, 60],
                "pattern": ["uniform", "skew"],
                "cov_models": cov_models,
                "drift": [1, 2, 3, 4],
                "estimators": estimators,
                "replicates": 2000,
                "master_seed": 1,
            }),
        }
    }
}

/// Overlays the keys of `top` onto `base`.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                b.insert(k, v);
            }
        }
        (b, t) => *b = t,
    }
}

fn from_value<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))
}

impl CampaignConfig {
    /// Builds a config from an optional preset and an optional JSON file whose
    /// keys override the preset.
    pub fn load(path: Option<&Path>, preset: Option<Preset>) -> Result<Self> {
        let mut value = match preset {
            Some(p) => p.value(),
            None => Value::Object(Default::default()),
        };
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let user: Value = serde_json::from_str(&text).map_err(|e| CliError::Schema {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?;
            if !user.is_object() {
                return Err(CliError::Config("config file must hold a JSON object".into()));
            }
            merge(&mut value, user);
        } else if preset.is_none() {
            return Err(CliError::Usage("simulate needs --config or --preset".into()));
        }
        let cfg: CampaignConfig = from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.domains.is_empty() || self.pattern.is_empty() || self.drift.is_empty() {
            return bad("domains, pattern and drift must not be empty".into());
        }
        for &side in &self.domains {
            DomainSpec::new(side, Pattern::Uniform).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.cov_models.len() < 2 {
            return bad("need at least two covariance models, one per latent column".into());
        }
        for m in &self.cov_models {
            m.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let p = self.cov_models.len();
        for d in &self.drift {
            d.model()?.validate(p).map_err(|e| CliError::Config(format!("drift {}: {e}", d.label())))?;
        }
        if self.estimators.is_empty() {
            return bad("need at least one estimator".into());
        }
        let mut labels = HashSet::new();
        for e in &self.estimators {
            e.estimator()?;
            if !labels.insert(e.label.as_str()) {
                return bad(format!("duplicate estimator label '{}'", e.label));
            }
        }
        let mut drift_labels = HashSet::new();
        for d in &self.drift {
            if !drift_labels.insert(d.label()) {
                return bad(format!("drift '{}' listed twice", d.label()));
            }
        }
        Ok(())
    }
}
