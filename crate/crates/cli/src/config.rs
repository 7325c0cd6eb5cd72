//! Experiment configuration files.
//!
//! ```json
//! {
//!   "protocol": "zh-locc",
//!   "seed": 7,
//!   "mode": "exact",
//!   "trials": 10000,
//!   "strategy": { "kind": "all_zeros" },
//!   "params": { "n": 4 },
//!   "sweep": { "n": [1, 2, 3, 4, 5, 6] }
//! }
//! ```

use std::collections::BTreeMap;

use dqma::adversary::AdversaryFamily;
use dqma::ff::SetEqInstance;
use dqma::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Sgdiv,
    Sgdi,
    Seteq,
    SeteqClassical,
    ZhLocc,
    LoccConvert,
}

impl ProtocolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolName::Sgdiv => "sgdiv",
            ProtocolName::Sgdi => "sgdi",
            ProtocolName::Seteq => "seteq",
            ProtocolName::SeteqClassical => "seteq-classical",
            ProtocolName::ZhLocc => "zh-locc",
            ProtocolName::LoccConvert => "locc-convert",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Exact,
    Sample,
}

fn default_trials() -> usize {
    1000
}

fn honest() -> AdversaryFamily {
    AdversaryFamily::Honest
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub protocol: ProtocolName,
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "honest")]
    pub strategy: AdversaryFamily,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Vec<Value>>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// Typed view of `params`; unknown or mistyped keys name the field.
    pub fn params<T: DeserializeOwned>(&self, known: &[&str]) -> Result<T> {
        if let Some(k) = self.params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "params: unknown field `{k}`, expected one of {}",
                known.join(", ")
            )));
        }
        let obj = Value::Object(self.params.clone().into_iter().collect());
        serde_json::from_value(obj).map_err(|e| Error::Config(format!("params: {e}")))
    }

    /// The single swept axis.
    pub fn axis(&self) -> Result<(String, Vec<Value>)> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing field `sweep`".into()))?;
        if sweep.len() != 1 {
            return Err(Error::Config(format!(
                "sweep needs exactly one axis, got {} ({})",
                sweep.len(),
                sweep.keys().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
        let (k, v) = sweep.iter().next().expect("one axis");
        if v.is_empty() {
            return Err(Error::Config(format!("sweep axis `{k}` has no values")));
        }
        Ok((k.clone(), v.clone()))
    }

    /// Copy with `axis` set to `value`. A bare name refers to `params`, or
    /// to the strategy when it is one of the strategy's fields; `a.b.c` is
    /// a path from the top of the config.
    pub fn with_value(&self, axis: &str, value: &Value) -> Result<Config> {
        let mut root = serde_json::to_value(self)?;
        if let Some(obj) = root.as_object_mut() {
            obj.remove("sweep");
        }
        let path: Vec<String> = if axis.contains('.') {
            axis.split('.').map(String::from).collect()
        } else if self.params.contains_key(axis) {
            vec!["params".into(), axis.into()]
        } else if strategy_has(&root, axis) {
            vec!["strategy".into(), axis.into()]
        } else if ["seed", "trials", "mode"].contains(&axis) {
            vec![axis.into()]
        } else {
            vec!["params".into(), axis.into()]
        };
        let mut node = &mut root;
        for (i, key) in path.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("sweep path `{axis}` does not lead into an object")))?;
            if i + 1 == path.len() {
                obj.insert(key.clone(), value.clone());
                break;
            }
            node = obj.entry(key.clone()).or_insert_with(|| Value::Object(Default::default()));
        }
        let cfg: Config = serde_json::from_value(root).map_err(|e| Error::Config(format!("sweep `{axis}`: {e}")))?;
        Ok(cfg)
    }
}

fn strategy_has(root: &Value, key: &str) -> bool {
    root.get("strategy").and_then(|s| s.get(key)).is_some()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineParams {
    pub r: usize,
    pub n: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub v_r_flips: bool,
    /// Seed for `|ψ⟩` and the unitaries; defaults to the run seed.
    #[serde(default)]
    pub instance_seed: Option<u64>,
}

fn one_usize() -> usize {
    1
}

fn c_tilde() -> f64 {
    4.0
}

fn yes() -> bool {
    true
}

pub const LINE_KEYS: &[&str] = &["r", "n", "k", "m", "v_r_flips", "instance_seed"];
pub const INSTANCE_KEYS: &[&str] = &["instance", "r", "ell", "p", "universe", "c_tilde", "equal", "instance_seed"];
pub const SETEQ_KEYS: &[&str] = &["k", "m", "repetitions"];
pub const CLASSICAL_KEYS: &[&str] = &["variant", "fuzz"];
pub const ZH_KEYS: &[&str] = &["n"];
pub const LOCC_KEYS: &[&str] = &["n", "gamma", "m0", "m1"];

#[derive(Debug, Clone, Deserialize)]
pub struct InstanceParams {
    #[serde(default)]
    pub instance: Option<SetEqInstance>,
    #[serde(default = "one_usize")]
    pub r: usize,
    #[serde(default = "one_usize")]
    pub ell: usize,
    /// Field size; with no `universe`, `|U| = ⌊p/(c̃·ℓ·(r+1))⌋`.
    #[serde(default)]
    pub p: Option<u64>,
    #[serde(default)]
    pub universe: Option<u64>,
    #[serde(default = "c_tilde")]
    pub c_tilde: f64,
    #[serde(default = "yes")]
    pub equal: bool,
    #[serde(default)]
    pub instance_seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SeteqParams {
    #[serde(flatten)]
    pub instance: InstanceParams,
    #[serde(default = "one_usize")]
    pub k: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default = "one_usize")]
    pub repetitions: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalVariant {
    #[default]
    Counting,
    Trivial,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClassicalParams {
    #[serde(flatten)]
    pub instance: InstanceParams,
    #[serde(default)]
    pub variant: ClassicalVariant,
    /// Number of corrupted certificates to try.
    #[serde(default)]
    pub fuzz: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZhParams {
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum QubitSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

fn zero_spec() -> QubitSpec {
    QubitSpec::Named("zero".into())
}

fn plus_spec() -> QubitSpec {
    QubitSpec::Named("plus".into())
}

fn gamma() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoccParams {
    pub n: usize,
    #[serde(default = "gamma")]
    pub gamma: f64,
    #[serde(default = "zero_spec")]
    pub m0: QubitSpec,
    #[serde(default = "plus_spec")]
    pub m1: QubitSpec,
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"protocol":"sgdiv","seed":1,"params":{"r":2,"n":1},
        "strategy":{"kind":"interpolate","t":0.5,"target":{"kind":"orthogonal_at","node":2}}}"#;

    #[test]
    fn seed_is_mandatory() {
        let e = Config::parse(r#"{"protocol":"sgdiv"}"#).unwrap_err();
        assert!(e.to_string().contains("seed"));
    }

    #[test]
    fn unknown_protocol() {
        let e = Config::parse(r#"{"protocol":"bogus","seed":1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn sweep_paths() {
        let cfg = Config::parse(BASE).unwrap();
        let t = cfg.with_value("t", &Value::from(0.25)).unwrap();
        match t.strategy {
            AdversaryFamily::Interpolate { t, .. } => assert_eq!(t, 0.25),
            _ => panic!(),
        }
        let r = cfg.with_value("r", &Value::from(3)).unwrap();
        assert_eq!(r.params["r"], Value::from(3));
        let s = cfg.with_value("seed", &Value::from(9)).unwrap();
        assert_eq!(s.seed, 9);
        let s = cfg.with_value("strategy.target.node", &Value::from(1)).unwrap();
        assert!(matches!(s.strategy, AdversaryFamily::Interpolate { .. }));
    }

    #[test]
    fn one_axis_only() {
        let mut cfg = Config::parse(BASE).unwrap();
        cfg.sweep = Some(BTreeMap::from([
            ("t".to_string(), vec![Value::from(0.0)]),
            ("r".to_string(), vec![Value::from(1)]),
        ]));
        assert!(cfg.axis().is_err());
    }
}
