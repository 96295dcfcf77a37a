//! Flat `key = value` run configuration.
//!
//! Precedence, lowest to highest: built-in defaults (some depend on the
//! model), the `--config` file, then command-line flags. The fully resolved
//! configuration is written as `run_config.txt` next to every run's outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use drivernet::data::{AugmentPolicy, SynthConfig};
use drivernet::model::{HeadPooling, ModelConfig, ModelVariant};
use drivernet::train::{OptimizerKind, TrainConfig};

use crate::CliError;

/// Every accepted key, in the order they are written back out.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset_root", "directory holding <class>/<img> files"),
    ("manifest", "subject,classname,img CSV (default <dataset_root>/driver_imgs_list.csv)"),
    ("eval_manifest", "evaluate on every row of this manifest instead of the validation split"),
    ("model", "cnn | cnn-opt | vgg16 | vgg16-opt | resnet50"),
    ("channels", "1 (grayscale) or 3"),
    ("height", "input height in pixels"),
    ("width", "input width in pixels"),
    ("conv_widths", "filters of the four CNN conv layers, comma separated"),
    ("dense_units", "hidden units of the CNN dense layer"),
    ("vgg_hidden", "hidden units of the optimized VGG16 head"),
    ("vgg_head_pooling", "gap | flatten"),
    ("epochs", "training epochs"),
    ("batch_size", "mini-batch size"),
    ("learning_rate", "optimizer step size"),
    ("optimizer", "adam | sgd"),
    ("augment", "true | false"),
    ("rotation_deg_max", "max augmentation rotation in degrees"),
    ("shift_frac_max", "max augmentation shift as a fraction of the side"),
    ("brightness_frac_max", "max augmentation brightness change"),
    ("val_fraction", "share of images (by driver) held out for validation"),
    ("seed", "single seed for splits, initialization, shuffling and augmentation"),
    ("leaky_split", "split by image instead of by driver (leakage demonstration only)"),
    ("output_dir", "where outputs and run_config.txt are written"),
    ("weights", "weight file to read"),
    ("image", "image to predict / benchmark"),
    ("budget_seconds", "latency budget for benchmark"),
    ("warmup", "untimed benchmark iterations"),
    ("iterations", "timed benchmark iterations"),
    ("diff_pairs", "all | comma list like c0:c1,c0:c5"),
    ("members", "ensemble members, comma list of model:weight_file"),
    ("ensemble_weights", "comma list of non-negative member weights (default uniform)"),
    ("synth_drivers", "synth: number of drivers"),
    ("synth_images_per_class", "synth: images per driver and class"),
    ("synth_preset", "synth: clean | leaky"),
];

/// Raw layered key/value pairs before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if raw.values.contains_key(k) {
                return Err(CliError::Config(format!("{origin}:{}: duplicate key {k:?}", n + 1)));
            }
            raw.set(k, v.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Sets one key, rejecting unknown names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(format!("unknown config key {key:?}"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Later layers win.
    pub fn overlay(&mut self, other: RawConfig) {
        self.values.extend(other.values);
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| CliError::Config(format!("bad value {v:?} for {key}: {e}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|p| {
                        p.trim()
                            .parse()
                            .map_err(|e| CliError::Config(format!("bad item {p:?} in {key}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub model: ModelVariant,
    pub weights: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffPairs {
    All,
    Listed(Vec<(String, String)>),
}

/// Fully typed configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub manifest: PathBuf,
    pub eval_manifest: Option<PathBuf>,
    pub model: ModelVariant,
    pub model_config: ModelConfig,
    pub train: TrainConfig,
    pub augment: AugmentPolicy,
    pub val_fraction: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub weights: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub budget_seconds: f64,
    pub warmup: usize,
    pub iterations: usize,
    pub diff_pairs: DiffPairs,
    pub members: Vec<Member>,
    pub ensemble_weights: Option<Vec<f64>>,
    pub synth: SynthConfig,
    /// The layered source values, kept for per-member model settings.
    pub raw: RawConfig,
}

fn parse_pooling(v: &str) -> Result<HeadPooling, CliError> {
    match v {
        "gap" => Ok(HeadPooling::Gap),
        "flatten" => Ok(HeadPooling::Flatten),
        _ => Err(CliError::Config(format!("vgg_head_pooling must be gap or flatten, got {v:?}"))),
    }
}

/// Model settings for `variant`: the configured values when it is the run's
/// own model, defaults otherwise.
pub fn model_config_for(raw: &RawConfig, variant: ModelVariant, own: bool) -> Result<ModelConfig, CliError> {
    let mut mc = ModelConfig::default_for(variant);
    if !own {
        return Ok(mc);
    }
    mc.channels = raw.parse_or("channels", mc.channels)?;
    mc.height = raw.parse_or("height", mc.height)?;
    mc.width = raw.parse_or("width", mc.width)?;
    if let Some(w) = raw.list::<usize>("conv_widths")? {
        mc.conv_widths = w
            .try_into()
            .map_err(|_| CliError::Config("conv_widths needs exactly four values".into()))?;
    }
    mc.dense_units = raw.parse_or("dense_units", mc.dense_units)?;
    mc.vgg_hidden = raw.parse_or("vgg_hidden", mc.vgg_hidden)?;
    if let Some(p) = raw.get("vgg_head_pooling") {
        mc.vgg_head_pooling = parse_pooling(p)?;
    }
    if !matches!(mc.channels, 1 | 3) {
        return Err(CliError::Config(format!("channels must be 1 or 3, got {}", mc.channels)));
    }
    Ok(mc)
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self, CliError> {
        let model: ModelVariant = raw.parse_or("model", ModelVariant::Cnn)?;
        let seed: u64 = raw.parse_or("seed", 0)?;
        let mut model_config = model_config_for(raw, model, true)?;
        model_config.seed = seed;

        let (epochs, batch) = model.default_schedule();
        let train = TrainConfig {
            epochs: raw.parse_or("epochs", epochs)?,
            batch_size: raw.parse_or("batch_size", batch)?,
            learning_rate: raw.parse_or("learning_rate", 0.001)?,
            optimizer: raw.parse_or("optimizer", OptimizerKind::adam())?,
            seed,
            allow_leaky_split: raw.parse_or("leaky_split", false)?,
        };
        train.validate()?;

        let d = AugmentPolicy::default();
        let augment = AugmentPolicy {
            enabled: raw.parse_or("augment", true)?,
            rotation_deg_max: raw.parse_or("rotation_deg_max", d.rotation_deg_max)?,
            shift_frac_max: raw.parse_or("shift_frac_max", d.shift_frac_max)?,
            brightness_frac_max: raw.parse_or("brightness_frac_max", d.brightness_frac_max)?,
        };
        augment.validate()?;

        let val_fraction = raw.parse_or("val_fraction", 0.2)?;
        if !(0.0..1.0).contains(&val_fraction) {
            return Err(CliError::Config(format!("val_fraction must be in [0, 1), got {val_fraction}")));
        }

        let dataset_root = raw.path("dataset_root").unwrap_or_else(|| PathBuf::from("."));
        let manifest = raw
            .path("manifest")
            .unwrap_or_else(|| dataset_root.join(drivernet::data::synth::MANIFEST_NAME));

        let diff_pairs = match raw.get("diff_pairs").unwrap_or("all") {
            "all" => DiffPairs::All,
            list => DiffPairs::Listed(
                list.split(',')
                    .map(|p| {
                        p.trim()
                            .split_once(':')
                            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                            .ok_or_else(|| CliError::Config(format!("diff pair {p:?} is not a:b")))
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };

        let members = raw
            .list::<String>("members")?
            .unwrap_or_default()
            .into_iter()
            .map(|m| {
                let (v, path) = m
                    .split_once(':')
                    .ok_or_else(|| CliError::Config(format!("ensemble member {m:?} is not model:weights")))?;
                Ok(Member {
                    model: v.parse()?,
                    weights: PathBuf::from(path),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        let preset = raw.get("synth_preset").unwrap_or("clean");
        let (drivers, per_class) = (raw.parse_or("synth_drivers", 10)?, raw.parse_or("synth_images_per_class", 30)?);
        let mut synth = match preset {
            "clean" => SynthConfig::new(drivers, per_class, seed),
            "leaky" => SynthConfig::leaky(drivers, per_class, seed),
            _ => return Err(CliError::Config(format!("synth_preset must be clean or leaky, got {preset:?}"))),
        };
        synth.size = model_config.height.max(16);

        Ok(RunConfig {
            dataset_root,
            manifest,
            eval_manifest: raw.path("eval_manifest"),
            model,
            model_config,
            train,
            augment,
            val_fraction,
            seed,
            output_dir: raw.path("output_dir").unwrap_or_else(|| PathBuf::from("out")),
            weights: raw.path("weights"),
            image: raw.path("image"),
            budget_seconds: raw.parse_or("budget_seconds", drivernet::train::DEFAULT_BUDGET_SECONDS)?,
            warmup: raw.parse_or("warmup", drivernet::train::DEFAULT_WARMUP)?,
            iterations: raw.parse_or("iterations", drivernet::train::DEFAULT_ITERATIONS)?,
            diff_pairs,
            members,
            ensemble_weights: raw.list("ensemble_weights")?,
            synth,
            raw: raw.clone(),
        })
    }

    /// Every key with its resolved value, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let join = |v: &[String]| v.join(",");
        let mc = &self.model_config;
        let value = |key: &str| -> String {
            match key {
                "dataset_root" => self.dataset_root.display().to_string(),
                "manifest" => self.manifest.display().to_string(),
                "eval_manifest" => opt(&self.eval_manifest),
                "model" => self.model.to_string(),
                "channels" => mc.channels.to_string(),
                "height" => mc.height.to_string(),
                "width" => mc.width.to_string(),
                "conv_widths" => join(&mc.conv_widths.map(|w| w.to_string())),
                "dense_units" => mc.dense_units.to_string(),
                "vgg_hidden" => mc.vgg_hidden.to_string(),
                "vgg_head_pooling" => match mc.vgg_head_pooling {
                    HeadPooling::Gap => "gap".into(),
                    HeadPooling::Flatten => "flatten".into(),
                },
                "epochs" => self.train.epochs.to_string(),
                "batch_size" => self.train.batch_size.to_string(),
                "learning_rate" => self.train.learning_rate.to_string(),
                "optimizer" => self.train.optimizer.to_string(),
                "augment" => self.augment.enabled.to_string(),
                "rotation_deg_max" => self.augment.rotation_deg_max.to_string(),
                "shift_frac_max" => self.augment.shift_frac_max.to_string(),
                "brightness_frac_max" => self.augment.brightness_frac_max.to_string(),
                "val_fraction" => self.val_fraction.to_string(),
                "seed" => self.seed.to_string(),
                "leaky_split" => self.train.allow_leaky_split.to_string(),
                "output_dir" => self.output_dir.display().to_string(),
                "weights" => opt(&self.weights),
                "image" => opt(&self.image),
                "budget_seconds" => self.budget_seconds.to_string(),
                "warmup" => self.warmup.to_string(),
                "iterations" => self.iterations.to_string(),
                "diff_pairs" => match &self.diff_pairs {
                    DiffPairs::All => "all".into(),
                    DiffPairs::Listed(p) => join(&p.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>()),
                },
                "members" => join(
                    &self
                        .members
                        .iter()
                        .map(|m| format!("{}:{}", m.model, m.weights.display()))
                        .collect::<Vec<_>>(),
                ),
                "ensemble_weights" => self
                    .ensemble_weights
                    .as_ref()
                    .map(|w| join(&w.iter().map(f64::to_string).collect::<Vec<_>>()))
                    .unwrap_or_default(),
                "synth_drivers" => self.synth.num_drivers.to_string(),
                "synth_images_per_class" => self.synth.images_per_class.to_string(),
                "synth_preset" => if self.synth.clutter > 0.0 { "leaky" } else { "clean" }.into(),
                other => unreachable!("unlisted key {other}"),
            }
        };
        let mut out = String::new();
        for (k, _) in KEYS {
            writeln!(out, "{k} = {}", value(k)).unwrap();
        }
        out
    }

    pub fn write_resolved(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.output_dir)?;
        fs::write(self.output_dir.join("run_config.txt"), self.to_text())?;
        Ok(())
    }
}
