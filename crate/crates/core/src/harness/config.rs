//! Declarative experiment configuration, loaded from TOML.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::synthetic::{sequential_split, SyntheticSpec};
use crate::corpus::{
    load_corpus, load_scheme, make_kfold_splits, scotus_category_scheme, scotus_function_scheme,
    Corpus, LabelScheme, Level,
};
use crate::encoder::BackboneConfig;
use crate::error::{Error, Result};
use crate::optim::AdamConfig;
use crate::pbr::PbrConfig;
use crate::pcm::PcmConfig;

pub const ENV_OUTPUT_DIR: &str = "RRL_OUTPUT_DIR";
pub const ENV_DATA_DIR: &str = "RRL_DATA_DIR";
pub const ENV_DEVICE: &str = "RRL_DEVICE";

/// Learning rates searched by default.
pub const LR_GRID: [f64; 5] = [1e-5, 3e-5, 5e-5, 1e-4, 3e-4];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Baseline,
    Pbr,
    Pcm,
    /// PCM with each sentence given its gold label's prototype (upper bound).
    PcmGold,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Pbr => "pbr",
            Self::Pcm => "pcm",
            Self::PcmGold => "pcm_gold",
        }
    }

    pub fn uses_pcm(self) -> bool {
        matches!(self, Self::Pcm | Self::PcmGold)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Baseline, Self::Pbr, Self::Pcm, Self::PcmGold]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Where documents come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusConfig {
    /// JSON-lines files. `scheme` is `scotus_category`, `scotus_function` or
    /// a path to a scheme file. Relative paths resolve against the data dir.
    Files {
        scheme: String,
        #[serde(default)]
        level: Option<Level>,
        train: PathBuf,
        #[serde(default)]
        dev: Option<PathBuf>,
        #[serde(default)]
        test: Option<PathBuf>,
    },
    /// Generated corpus; the last `dev + test` documents form dev and test.
    Synthetic {
        #[serde(default)]
        spec: SyntheticSpec,
        #[serde(default = "default_synthetic_dev")]
        dev: usize,
        #[serde(default)]
        test: usize,
    },
}

fn default_synthetic_dev() -> usize {
    2
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self::Synthetic {
            spec: SyntheticSpec::default(),
            dev: default_synthetic_dev(),
            test: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitConfig {
    /// Partitions as given by the corpus source.
    #[default]
    Fixed,
    /// All documents pooled and re-split into `k` folds.
    Kfold {
        k: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    MacroF1,
    WeightedF1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: String,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global gradient-norm bound; 0 disables clipping.
    pub grad_clip: f64,
    pub lr_grid: Vec<f64>,
    pub adam: AdamConfig,
    /// Shuffle training documents every epoch.
    pub shuffle: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            name: "adam".into(),
            learning_rate: 1e-4,
            epochs: 40,
            grad_clip: 1.0,
            lr_grid: LR_GRID.to_vec(),
            adam: AdamConfig::default(),
            shuffle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub corpus: CorpusConfig,
    pub split: SplitConfig,
    pub backbone: BackboneConfig,
    pub method: Method,
    pub pbr: Option<PbrConfig>,
    pub pcm: Option<PcmConfig>,
    pub optimizer: OptimizerConfig,
    pub seeds: Vec<u64>,
    pub selection_metric: SelectionMetric,
    pub output_dir: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub device: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            corpus: CorpusConfig::default(),
            split: SplitConfig::Fixed,
            backbone: BackboneConfig::default(),
            method: Method::Baseline,
            pbr: None,
            pcm: None,
            optimizer: OptimizerConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            selection_metric: SelectionMetric::MacroF1,
            output_dir: PathBuf::from("runs"),
            data_dir: None,
            device: "cpu".into(),
        }
    }
}

/// Documents of one run, already partitioned.
#[derive(Clone, Debug)]
pub struct Partition {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub fold: Option<usize>,
}

impl ExperimentConfig {
    /// Parses TOML, applies environment overrides and validates. Relative
    /// corpus paths resolve against `data_dir`, else the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&fs::read_to_string(path).map_err(Error::file(path))?)?;
        if cfg.data_dir.is_none() {
            cfg.data_dir = path.parent().map(Path::to_path_buf);
        }
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without touching the environment or validating.
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(ENV_OUTPUT_DIR) {
            self.output_dir = v.into();
        }
        if let Ok(v) = std::env::var(ENV_DATA_DIR) {
            self.data_dir = Some(v.into());
        }
        if let Ok(v) = std::env::var(ENV_DEVICE) {
            self.device = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        if self.device != "cpu" {
            return Err(Error::config(format!(
                "device `{}` is not available; only `cpu` is supported",
                self.device
            )));
        }
        match (self.method, &self.pbr) {
            (Method::Pbr, None) => return Err(Error::config("method `pbr` needs a [pbr] section")),
            (Method::Pbr, Some(p)) => p.validate()?,
            (m, Some(_)) => {
                return Err(Error::config(format!(
                    "[pbr] section given for method `{m}`"
                )))
            }
            _ => {}
        }
        match (self.method.uses_pcm(), &self.pcm) {
            (true, None) => {
                return Err(Error::config(format!(
                    "method `{}` needs a [pcm] section",
                    self.method
                )))
            }
            (true, Some(p)) => p.validate()?,
            (false, Some(_)) => {
                return Err(Error::config(format!(
                    "[pcm] section given for method `{}`",
                    self.method
                )))
            }
            _ => {}
        }
        let o = &self.optimizer;
        if o.name != "adam" {
            return Err(Error::config(format!("unknown optimizer `{}`", o.name)));
        }
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if o.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if !(o.grad_clip >= 0.0) {
            return Err(Error::config("grad_clip must be non-negative"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if let SplitConfig::Kfold { k, .. } = self.split {
            if k < 2 {
                return Err(Error::config("k-fold needs k >= 2"));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every setting that affects what is
    /// learned; seeds, paths of outputs and the device are excluded.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            for key in ["seeds", "output_dir", "data_dir", "device", "name"] {
                map.remove(key);
            }
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn scheme(&self) -> Result<LabelScheme> {
        match &self.corpus {
            CorpusConfig::Synthetic { spec, .. } => Ok(spec.scheme()),
            CorpusConfig::Files { scheme, level, .. } => {
                let s = match scheme.as_str() {
                    "scotus_category" => scotus_category_scheme(),
                    "scotus_function" => scotus_function_scheme(),
                    path => load_scheme(self.resolve(Path::new(path)))?,
                };
                if let Some(level) = level {
                    if *level != s.level() {
                        return Err(Error::InvalidScheme(format!(
                            "scheme `{}` is at level {}, config asks for {level}",
                            s.name(),
                            s.level()
                        )));
                    }
                }
                Ok(s)
            }
        }
    }

    /// Loads the corpus and returns one partition (fixed split) or one per fold.
    pub fn partitions(&self) -> Result<Vec<Partition>> {
        let scheme = self.scheme()?;
        let (all, fixed) = match &self.corpus {
            CorpusConfig::Synthetic { spec, dev, test } => {
                let c = spec.generate()?;
                if dev + test >= c.len() {
                    return Err(Error::InvalidSplit(
                        "synthetic dev + test leaves no training documents".into(),
                    ));
                }
                let split = sequential_split(&c, *dev, *test);
                (c, split)
            }
            CorpusConfig::Files {
                train, dev, test, ..
            } => {
                let empty = || Corpus::new(Vec::new(), scheme.clone());
                let load = |p: &Option<PathBuf>| match p {
                    Some(p) => load_corpus(self.resolve(p), &scheme),
                    None => empty(),
                };
                let train = load_corpus(self.resolve(train), &scheme)?;
                let dev = load(dev)?;
                let test = load(test)?;
                let split = crate::corpus::fixed_split(&train, &dev, &test)?;
                (Corpus::concat(&[&train, &dev, &test])?, split)
            }
        };
        let splits = match self.split {
            SplitConfig::Fixed => vec![fixed],
            SplitConfig::Kfold { k, seed } => make_kfold_splits(&all, k, seed)?,
        };
        splits
            .into_iter()
            .map(|s| {
                Ok(Partition {
                    train: all.subset(&s.train)?,
                    dev: all.subset(&s.dev)?,
                    test: all.subset(&s.test)?,
                    fold: s.fold_index,
                })
            })
            .collect()
    }
}
