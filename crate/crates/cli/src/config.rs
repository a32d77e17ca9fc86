//! Run configuration: a flat TOML file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sta_core::coldstart::{DEFAULT_COLD_THRESHOLD, DEFAULT_PAIR_BUDGET};
use sta_core::embedding::Variant;
use sta_core::ingest::{DiscretizerConfig, RecordFormat, SpaceScheme, SplitSpec, TimeScheme};
use sta_core::pipeline::PipelineConfig;
use sta_core::recsys::experiments::{ColdStartConfig, SPARSITY_RATIOS, SWEEP_DIMENSIONS};
use sta_core::recsys::DEFAULT_KS;
use sta_core::training::{Sampling, TrainConfig};

use crate::error::{CliError, Result};

/// Keys accepted in the config file. Every key is optional; relative paths
/// are resolved against the directory holding the config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub fields: Option<String>,
    pub delimiter: Option<char>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,

    pub time_scheme: Option<String>,
    pub utc_offset_secs: Option<i32>,
    pub regions: Option<usize>,
    pub region_file: Option<PathBuf>,

    pub train_fraction: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub reduction: Option<f64>,

    pub variant: Option<String>,
    pub dim: Option<usize>,
    pub rel_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub margin: Option<f64>,
    pub learning_rate: Option<f64>,
    pub sampling: Option<String>,
    pub negatives: Option<usize>,
    pub checkpoint_every: Option<usize>,

    pub content: Option<bool>,
    pub poi_content: Option<PathBuf>,
    pub cold_threshold: Option<usize>,
    pub pair_budget: Option<usize>,

    pub k: Option<Vec<usize>>,
    pub dimensions: Option<Vec<usize>>,
    pub sparsity_ratios: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.input,
            &mut cfg.output,
            &mut cfg.region_file,
            &mut cfg.poi_content,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Values given on the command line; they win over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub variant: Option<String>,
    /// `d` or `d,m`.
    pub dims: Option<String>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub margin: Option<f64>,
    pub lr: Option<f64>,
    pub time_scheme: Option<String>,
    pub regions: Option<usize>,
    pub k: Option<Vec<usize>>,
}

pub const DEFAULT_OUTPUT: &str = "sta-out";

/// Fully resolved settings for one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: RecordFormat,
    pub output: PathBuf,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub content: bool,
    pub poi_content: Option<PathBuf>,
    pub cold: ColdStartConfig,
    pub ks: Vec<usize>,
    pub dimensions: Vec<usize>,
    pub sparsity_ratios: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(FileConfig::default(), Overrides::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn load(config: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let file = match config {
            Some(p) => FileConfig::read(p)?,
            None => FileConfig::default(),
        };
        Self::resolve(file, overrides)
    }

    pub fn resolve(file: FileConfig, o: Overrides) -> Result<Self> {
        let seed = o.seed.or(file.seed).unwrap_or(0);

        let format = match (&file.fields, file.delimiter) {
            (None, None) => RecordFormat::default(),
            (fields, delimiter) => RecordFormat::with_fields(
                delimiter.unwrap_or(','),
                fields
                    .as_deref()
                    .unwrap_or("user,poi,lat,lon,timestamp,words"),
            )?,
        };

        let time = match o.time_scheme.as_ref().or(file.time_scheme.as_ref()) {
            Some(s) => s.parse::<TimeScheme>()?,
            None => TimeScheme::default(),
        };
        let space = match (o.regions, &file.region_file, file.regions) {
            (Some(regions), _, _) => SpaceScheme::KMeans { regions, seed },
            (None, Some(_), Some(_)) => {
                return Err(usage("set either `regions` or `region_file`, not both"))
            }
            (None, Some(path), None) => SpaceScheme::RegionFile(path.clone()),
            (None, None, regions) => SpaceScheme::KMeans {
                regions: regions.unwrap_or(200),
                seed,
            },
        };
        let pipeline = PipelineConfig {
            discretizer: DiscretizerConfig {
                time,
                utc_offset_secs: file.utc_offset_secs.unwrap_or(0),
                space,
            },
            split: SplitSpec {
                train_fraction: file.train_fraction.unwrap_or(0.8),
                validation_fraction: file.validation_fraction.unwrap_or(0.1),
                reduction: file.reduction.unwrap_or(0.0),
                seed,
            },
        };
        pipeline.split.validate()?;

        let defaults = TrainConfig::default();
        let variant = match o.variant.as_ref().or(file.variant.as_ref()) {
            Some(v) => v.parse::<Variant>()?,
            None => defaults.variant,
        };
        let (dim, rel_dim) = match &o.dims {
            Some(d) => parse_dims(d)?,
            None => {
                let dim = file.dim.unwrap_or(defaults.dim);
                (dim, file.rel_dim.unwrap_or(dim))
            }
        };
        let train = TrainConfig {
            learning_rate: o
                .lr
                .or(file.learning_rate)
                .unwrap_or(defaults.learning_rate),
            margin: o.margin.or(file.margin).unwrap_or(defaults.margin),
            batch_size: o.batch.or(file.batch_size).unwrap_or(defaults.batch_size),
            epochs: o.epochs.or(file.epochs).unwrap_or(defaults.epochs),
            seed,
            variant,
            dim,
            rel_dim,
            sampling: match &file.sampling {
                Some(s) => s.parse::<Sampling>()?,
                None => defaults.sampling,
            },
            negatives: file.negatives.unwrap_or(defaults.negatives),
            checkpoint_every: file.checkpoint_every.unwrap_or(defaults.checkpoint_every),
        };
        train.validate()?;

        let ks = o.k.or(file.k).unwrap_or_else(|| DEFAULT_KS.to_vec());
        if ks.is_empty() || ks.contains(&0) {
            return Err(usage("k values must be positive"));
        }

        Ok(RunConfig {
            input: o.input.or(file.input),
            format,
            output: o
                .output
                .or(file.output)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            seed,
            pipeline,
            train,
            content: file.content.unwrap_or(false),
            poi_content: file.poi_content,
            cold: ColdStartConfig {
                threshold: file.cold_threshold.unwrap_or(DEFAULT_COLD_THRESHOLD),
                pair_budget: file.pair_budget.unwrap_or(DEFAULT_PAIR_BUDGET),
            },
            ks,
            dimensions: file.dimensions.unwrap_or_else(|| SWEEP_DIMENSIONS.to_vec()),
            sparsity_ratios: file
                .sparsity_ratios
                .unwrap_or_else(|| SPARSITY_RATIOS.to_vec()),
        })
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| usage("no input file; pass --input or set `input` in the config"))
    }
}

fn usage(msg: &str) -> CliError {
    CliError::Usage(msg.to_string())
}

/// `"100"` gives `d = m = 100`; `"100,50"` gives `d = 100, m = 50`.
pub fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Usage(format!("invalid --dims {s:?}; expected `d` or `d,m`"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
    match parts[..] {
        [d] => {
            let d = num(d)?;
            Ok((d, d))
        }
        [d, m] => Ok((num(d)?, num(m)?)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_settings() {
        let c = RunConfig::default();
        assert_eq!(c.train.learning_rate, 1e-4);
        assert_eq!(c.train.margin, 2.0);
        assert_eq!(c.train.batch_size, 4800);
        assert_eq!((c.train.dim, c.train.rel_dim), (100, 100));
        assert_eq!(c.train.epochs, 1000);
        assert_eq!(c.pipeline.discretizer.time.slots(), 24);
        assert_eq!(
            c.pipeline.discretizer.space,
            SpaceScheme::KMeans {
                regions: 200,
                seed: 0
            }
        );
        assert_eq!(c.ks, DEFAULT_KS);
    }

    #[test]
    fn flags_win_over_the_file() {
        let file: FileConfig = toml::from_str(
            "seed = 3\nepochs = 7\ndim = 20\nrel_dim = 10\nmargin = 1.5\nk = [1, 3]\n",
        )
        .unwrap();
        let c = RunConfig::resolve(
            file.clone(),
            Overrides {
                epochs: Some(2),
                dims: Some("8".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c.train.epochs, 2);
        assert_eq!((c.train.dim, c.train.rel_dim), (8, 8));
        assert_eq!(c.train.margin, 1.5);
        assert_eq!(c.seed, 3);
        assert_eq!(c.ks, [1, 3]);

        let c = RunConfig::resolve(file, Overrides::default()).unwrap();
        assert_eq!((c.train.dim, c.train.rel_dim), (20, 10));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("epochz = 3\n").is_err());
    }

    #[test]
    fn transe_with_unequal_dims_is_a_config_error() {
        let err = RunConfig::resolve(
            FileConfig::default(),
            Overrides {
                variant: Some("transE".into()),
                dims: Some("10,5".into()),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dims_syntax() {
        assert_eq!(parse_dims("12").unwrap(), (12, 12));
        assert_eq!(parse_dims("12, 4").unwrap(), (12, 4));
        assert!(parse_dims("12,4,2").is_err());
        assert!(parse_dims("x").is_err());
    }
}
