//! Experiment configuration files (TOML), with strict key checking and
//! resolution into models and anchor configurations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expansion::{epsilon_zero, BoxDomain, Density, MCSModel, VelocityLaw};
use crate::points::{PhaseConfiguration, PointSet};
use crate::potential::{ModelParams, PotentialSpec};
use crate::{Error, Result};

/// Box corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Anchor configurations: explicit point lists, or `j` points evenly spaced
/// on the segment from `base` to `base + s eps direction`, one configuration
/// per separation `s` (in units of `eps`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configs: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmcSpec {
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default = "default_bins")]
    pub bins_per_axis: usize,
    #[serde(default = "two")]
    pub j_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(default = "four")]
    pub n_max_particles: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APrimeSpec {
    pub j_max: usize,
    pub n_max: usize,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn default_sweeps() -> u64 {
    100_000
}
fn default_bins() -> usize {
    20
}
fn default_nodes() -> usize {
    8
}
fn default_seed() -> u64 {
    1
}
fn default_samples() -> u64 {
    10_000
}
fn default_beta() -> f64 {
    1.0
}
fn default_n_max() -> usize {
    3
}
fn uniform() -> Density {
    Density::Uniform
}
fn marginal() -> VelocityLaw {
    VelocityLaw::Marginal
}

/// Parsed experiment file. Exactly one of `eps`, `eps_sweep` and
/// `eps_over_eps0` selects the scale parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    pub dim: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_over_eps0: Option<Vec<f64>>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "two")]
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_values: Option<Vec<usize>>,
    pub potential: PotentialSpec,
    #[serde(rename = "box")]
    pub domain: BoxSpec,
    #[serde(default = "uniform")]
    pub density: Density,
    #[serde(default = "marginal")]
    pub velocity: VelocityLaw,
    #[serde(default)]
    pub anchors: AnchorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gcmc: Option<GcmcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_prime: Option<APrimeSpec>,
}

const TOP_KEYS: &[&str] = &[
    "name", "seed", "samples", "dim", "beta", "eps", "eps_sweep", "eps_over_eps0", "n_max", "j", "j_values", "potential", "box",
    "density", "velocity", "anchors", "gcmc", "oracle", "a_prime",
];

fn table_keys(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "potential" => &PotentialSpec::KEYS,
        "box" => &["lo", "hi"],
        "density" => &["kind", "center", "width"],
        "velocity" => &["kind", "beta"],
        "anchors" => &["configs", "base", "separations", "direction"],
        "gcmc" => &["sweeps", "chains", "bins_per_axis", "j_max"],
        "oracle" => &["n_max_particles", "nodes"],
        "a_prime" => &["j_max", "n_max"],
        _ => return None,
    })
}

/// Every key not in the schema, as dotted paths.
pub fn unknown_keys(v: &serde_json::Value) -> Vec<String> {
    let mut out = Vec::new();
    let Some(top) = v.as_object() else {
        return out;
    };
    for (k, sub) in top {
        if !TOP_KEYS.contains(&k.as_str()) {
            out.push(k.clone());
            continue;
        }
        if let (Some(allowed), Some(obj)) = (table_keys(k), sub.as_object()) {
            out.extend(obj.keys().filter(|s| !allowed.contains(&s.as_str())).map(|s| format!("{k}.{s}")));
        }
    }
    out
}

impl ExperimentConfig {
    /// Parses TOML text, rejecting unknown keys (all of them are listed).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let v: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let json = serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(json)
    }

    /// Parses the JSON form (as echoed in run manifests).
    pub fn from_value(json: serde_json::Value) -> Result<Self> {
        let unknown = unknown_keys(&json);
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let c: ExperimentConfig = serde_json::from_value(json).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml_str(&text)?;
        // a relative table path is kept relative to the config file
        if let (Some(tp), Some(dir)) = (c.potential.table_path.as_ref(), path.parent()) {
            if Path::new(tp).is_relative() {
                c.potential.table_path = Some(dir.join(tp).to_string_lossy().into_owned());
            }
        }
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }

    fn validate(&self) -> Result<()> {
        let chosen = [self.eps.is_some(), self.eps_sweep.is_some(), self.eps_over_eps0.is_some()];
        if chosen.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::Config("give exactly one of `eps`, `eps_sweep`, `eps_over_eps0`".into()));
        }
        if self.domain.lo.len() != self.dim || self.domain.hi.len() != self.dim {
            return Err(Error::Config(format!("box corners need {} coordinates", self.dim)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config("beta must be positive".into()));
        }
        Ok(())
    }

    /// Applies command-line overrides; `eps` replaces any sweep.
    pub fn apply_overrides(&mut self, seed: Option<u64>, samples: Option<u64>, eps: Option<f64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(n) = samples {
            self.samples = n;
        }
        if let Some(e) = eps {
            self.eps = Some(e);
            self.eps_sweep = None;
            self.eps_over_eps0 = None;
        }
    }

    /// Model at the first resolved `eps`.
    pub fn model(&self) -> Result<MCSModel> {
        let eps = self.eps_values()?[0];
        self.model_at(eps)
    }

    pub fn model_at(&self, eps: f64) -> Result<MCSModel> {
        let potential = self.potential.build(None).map_err(config_error)?;
        let params = ModelParams::new(self.beta, eps, self.dim).map_err(config_error)?;
        let domain = BoxDomain::new(self.domain.lo.clone(), self.domain.hi.clone()).map_err(config_error)?;
        MCSModel::new(potential, params, domain, self.density.clone(), self.velocity).map_err(config_error)
    }

    /// The `eps` values of the run, resolving multiples of `eps0`.
    pub fn eps_values(&self) -> Result<Vec<f64>> {
        if let Some(e) = self.eps {
            return Ok(vec![e]);
        }
        if let Some(s) = &self.eps_sweep {
            if s.is_empty() {
                return Err(Error::Config("`eps_sweep` is empty".into()));
            }
            return Ok(s.clone());
        }
        let fr = self.eps_over_eps0.as_ref().expect("validated");
        if fr.is_empty() {
            return Err(Error::Config("`eps_over_eps0` is empty".into()));
        }
        // eps0 does not depend on eps
        let eps0 = epsilon_zero(&self.model_at(1.0)?).eps0;
        Ok(fr.iter().map(|f| f * eps0).collect())
    }

    /// Correlation orders of the run.
    pub fn orders(&self) -> Vec<usize> {
        self.j_values.clone().unwrap_or_else(|| vec![self.j])
    }

    /// Anchor configurations for order `j` at scale `eps`, paired with the
    /// separation that generated them (`None` for explicit lists).
    pub fn anchor_configs(&self, j: usize, eps: f64) -> Result<Vec<(Option<f64>, PhaseConfiguration<f64>)>> {
        let a = &self.anchors;
        let mut out = Vec::new();
        if let Some(cfgs) = &a.configs {
            for c in cfgs.iter().filter(|c| c.len() == j) {
                let ps = PointSet::from_rows(self.dim, c).map_err(config_error)?;
                out.push((None, PhaseConfiguration::positions_only(ps)));
            }
        }
        if let Some(seps) = &a.separations {
            let base = a.base.clone().unwrap_or_else(|| self.domain.lo.iter().zip(&self.domain.hi).map(|(l, h)| 0.5 * (l + h)).collect());
            let mut dir = a.direction.clone().unwrap_or_else(|| {
                let mut d = vec![0.0; self.dim];
                d[0] = 1.0;
                d
            });
            if base.len() != self.dim || dir.len() != self.dim {
                return Err(Error::Config("anchor base and direction need the model dimension".into()));
            }
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Config("anchor direction is zero".into()));
            }
            dir.iter_mut().for_each(|x| *x /= norm);
            for &s in seps {
                let mut ps = PointSet::new(self.dim);
                for k in 0..j {
                    let t = if j > 1 { k as f64 / (j - 1) as f64 } else { 0.0 };
                    let p: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * s * eps * d).collect();
                    ps.push(&p);
                }
                out.push((Some(s), PhaseConfiguration::positions_only(ps)));
            }
        }
        let domain = BoxDomain::new(self.domain.lo.clone(), self.domain.hi.clone()).map_err(config_error)?;
        for (_, c) in &out {
            if c.positions.iter().any(|p| !domain.contains(p)) {
                return Err(Error::Config(format!("anchor configuration at eps = {eps} leaves the box")));
            }
        }
        Ok(out)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Invalid(m) => Error::Config(m),
        other => other,
    }
}
