//! Run configuration: a flat `key = value` document with `#` comments.
//!
//! ```text
//! manifold.model = poincare
//! manifold.curvature = -1
//! manifold.dim = 4
//! model.depth = 4
//! model.activation = relu
//! graph.generator = binary_tree
//! graph.depth = 4
//! protocol.seed = 0
//! output.dir = out
//! ```
//!
//! Relative paths are resolved against the directory holding the config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::graph::GraphKind;
use crate::layers::{Activation, ModelConfig, ReferencePolicy};
use crate::manifold::{ManifoldModel, DEFAULT_CLAMP_MARGIN};
use crate::training::TrainConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value {value:?} for `{key}`: {message}")]
    InvalidValue {
        key: String,
        value: String,
        message: String,
    },
    #[error("`{key}` points to {path}, which does not exist")]
    MissingPath { key: String, path: PathBuf },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN_KEYS: &[&str] = &[
    "manifold.model",
    "manifold.curvature",
    "manifold.dim",
    "model.depth",
    "model.widths",
    "model.activation",
    "model.clamp_margin",
    "model.init_gain",
    "graph.generator",
    "graph.edge_list",
    "graph.n",
    "graph.depth",
    "graph.r",
    "graph.cliques",
    "graph.clique_size",
    "protocol.seed",
    "protocol.distance",
    "protocol.pair_count",
    "protocol.ell",
    "protocol.pairs",
    "train.epochs",
    "train.learning_rate",
    "train.negative_sample_ratio",
    "train.edge_split",
    "train.decoder_r",
    "train.decoder_t",
    "train.sensitivity_every",
    "output.dir",
];

/// Every key a run config may contain.
pub fn known_keys() -> &'static [&'static str] {
    KNOWN_KEYS
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    Generator(GraphKind),
    EdgeList(PathBuf),
}

/// Which pairs `verify-bounds` checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSelection {
    /// Every ordered pair with a nonzero walk weight at layer `ell`.
    All,
    /// A sample at hop distance `protocol.distance`.
    Distance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub seed: u64,
    pub distance: usize,
    pub pair_count: usize,
    pub ell: usize,
    pub pairs: PairSelection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub manifold: ManifoldModel,
    pub model: ModelConfig,
    pub init_gain: f64,
    pub graph: GraphSource,
    pub protocol: Protocol,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

/// Independent seed for a named stream derived from the run seed
/// (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const STREAM_WEIGHTS: u64 = 1;
pub const STREAM_FEATURES: u64 = 2;
pub const STREAM_GRAPH: u64 = 3;
pub const STREAM_SPLIT: u64 = 4;

struct Doc {
    values: BTreeMap<String, String>,
}

impl Doc {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn parse<T: FromStr>(&self, key: &str, value: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            message: e.to_string(),
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key, self.required(key)?)
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some(v) => self.parse(key, v),
            None => Ok(default),
        }
    }

    fn list<T: FromStr>(&self, key: &str, value: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        value.split(',').map(|s| self.parse(key, s.trim())).collect()
    }

    fn invalid(key: &str, value: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            message: message.into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Doc> {
    let mut values = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: line_no })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.into(),
            });
        }
        if values.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.into(),
            });
        }
    }
    Ok(Doc { values })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses a config document; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let doc = tokenize(text)?;

        let model_name = doc.required("manifold.model")?;
        let manifold = match model_name {
            "euclidean" => ManifoldModel::Euclidean,
            "poincare" => ManifoldModel::PoincareBall,
            "sphere" => ManifoldModel::Sphere,
            other => {
                return Err(Doc::invalid("manifold.model", other, "expected euclidean, poincare or sphere"))
            }
        };
        let curvature: f64 = match manifold {
            ManifoldModel::Euclidean => doc.get_or("manifold.curvature", 0.0)?,
            _ => doc.get("manifold.curvature")?,
        };
        let sign_ok = match manifold {
            ManifoldModel::Euclidean => curvature == 0.0,
            ManifoldModel::PoincareBall => curvature < 0.0,
            ManifoldModel::Sphere => curvature > 0.0,
        };
        if !sign_ok || !curvature.is_finite() {
            return Err(Doc::invalid(
                "manifold.curvature",
                &curvature.to_string(),
                format!("curvature sign does not match model {model_name}"),
            ));
        }
        let dim: usize = doc.get("manifold.dim")?;
        let depth: usize = doc.get("model.depth")?;
        let widths = match doc.raw("model.widths") {
            Some(v) => {
                let w: Vec<usize> = doc.list("model.widths", v)?;
                if w.len() != depth + 1 || w[0] != dim {
                    return Err(Doc::invalid(
                        "model.widths",
                        v,
                        "need depth + 1 entries starting with manifold.dim",
                    ));
                }
                w
            }
            None => vec![dim; depth + 1],
        };
        let activation: Activation = doc.get("model.activation")?;
        let model = ModelConfig {
            curvature,
            depth,
            widths,
            activation,
            reference_policy: ReferencePolicy::Origin,
            clamp_margin: doc.get_or("model.clamp_margin", DEFAULT_CLAMP_MARGIN)?,
        };
        model
            .validate()
            .map_err(|e| Doc::invalid("model", &format!("{:?}", model.widths), e.to_string()))?;
        let init_gain: f64 = doc.get_or("model.init_gain", 1.0)?;
        if !(init_gain >= 0.0 && init_gain.is_finite()) {
            return Err(Doc::invalid("model.init_gain", &init_gain.to_string(), "must be non-negative"));
        }

        let seed: u64 = doc.get("protocol.seed")?;
        let graph = match (doc.raw("graph.generator"), doc.raw("graph.edge_list")) {
            (Some(_), Some(_)) => {
                return Err(Doc::invalid("graph.edge_list", "", "give either graph.generator or graph.edge_list"))
            }
            (None, None) => return Err(ConfigError::MissingKey("graph.generator".into())),
            (None, Some(p)) => {
                let path = resolve(base_dir, p);
                if !path.exists() {
                    return Err(ConfigError::MissingPath {
                        key: "graph.edge_list".into(),
                        path,
                    });
                }
                GraphSource::EdgeList(path)
            }
            (Some(name), None) => GraphSource::Generator(match name {
                "binary_tree" => GraphKind::BinaryTree {
                    depth: doc.get("graph.depth")?,
                },
                "rary_tree" => GraphKind::RaryTree {
                    r: doc.get("graph.r")?,
                    depth: doc.get("graph.depth")?,
                },
                "path" => GraphKind::Path { n: doc.get("graph.n")? },
                "cycle" => GraphKind::Cycle { n: doc.get("graph.n")? },
                "ring_of_cliques" => GraphKind::RingOfCliques {
                    cliques: doc.get("graph.cliques")?,
                    size: doc.get("graph.clique_size")?,
                },
                "random_tree" => GraphKind::RandomTree {
                    n: doc.get("graph.n")?,
                    seed: derive_seed(seed, STREAM_GRAPH),
                },
                other => return Err(Doc::invalid("graph.generator", other, "unknown generator")),
            }),
        };

        let distance = doc.get_or("protocol.distance", depth)?;
        let ell = doc.get_or("protocol.ell", depth)?;
        let pairs = match doc.raw("protocol.pairs").unwrap_or("all") {
            "all" => PairSelection::All,
            "distance" => PairSelection::Distance,
            other => return Err(Doc::invalid("protocol.pairs", other, "expected all or distance")),
        };
        let protocol = Protocol {
            seed,
            distance,
            pair_count: doc.get_or("protocol.pair_count", 100)?,
            ell,
            pairs,
        };

        let defaults = TrainConfig::default();
        let edge_split = match doc.raw("train.edge_split") {
            Some(v) => {
                let f: Vec<f64> = doc.list("train.edge_split", v)?;
                if f.len() != 3 {
                    return Err(Doc::invalid("train.edge_split", v, "expected train,val,test fractions"));
                }
                (f[0], f[1], f[2])
            }
            None => defaults.edge_split,
        };
        let train = TrainConfig {
            epochs: doc.get_or("train.epochs", defaults.epochs)?,
            learning_rate: doc.get_or("train.learning_rate", defaults.learning_rate)?,
            negative_sample_ratio: doc.get_or("train.negative_sample_ratio", defaults.negative_sample_ratio)?,
            edge_split,
            decoder_r: doc.get_or("train.decoder_r", defaults.decoder_r)?,
            decoder_t: doc.get_or("train.decoder_t", defaults.decoder_t)?,
            seed: derive_seed(seed, STREAM_SPLIT),
            sensitivity_every: doc.get_or("train.sensitivity_every", defaults.sensitivity_every)?,
            sensitivity_pairs: protocol.pair_count,
            sensitivity_distance: Some(distance),
        };
        train
            .validate()
            .map_err(|e| Doc::invalid("train", "", e.to_string()))?;

        let output_dir = resolve(base_dir, doc.required("output.dir")?);
        Ok(Self {
            manifold,
            model,
            init_gain,
            graph,
            protocol,
            train,
            output_dir,
        })
    }

    pub fn load(path: &Path) -> std::result::Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Ok(Self::parse(&text, base)?)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
