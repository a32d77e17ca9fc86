//! Experiment drivers: variant comparison, dimension and time-scheme sweeps,
//! training-data sparsity and cold-start evaluation. Each returns rows that
//! render as CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::eval::{evaluate, EvalQuery, EvalReport};
use crate::coldstart::{build_content_triples, cold_start_pois, poi_contents, train_coldstart};
use crate::embedding::Variant;
use crate::ingest::{CheckIn, DiscretizerConfig, Split, SplitLabel, TimeScheme, TripleStore};
use crate::pipeline::{prepare, prepare_with_split, reduce_triples, PipelineConfig};
use crate::seed::derive_seed;
use crate::training::{train, TrainConfig};
use crate::{Error, Result};

/// Dimensions of the dimension sweep.
pub const SWEEP_DIMENSIONS: [usize; 6] = [70, 80, 90, 100, 110, 120];

/// Training-data reduction ratios of the sparsity study.
pub const SPARSITY_RATIOS: [f64; 4] = [0.05, 0.10, 0.15, 0.20];

/// A CSV-ready table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn acc_header(first: &[&str], ks: &[usize]) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain(ks.iter().map(|k| format!("acc@{k}")))
        .collect()
}

fn acc_cells<'a>(report: &'a EvalReport, ks: &'a [usize]) -> impl Iterator<Item = String> + 'a {
    ks.iter().map(|k| format!("{:.6}", report.accuracy(*k)))
}

/// Relative change `(new − base) / base` in percent.
pub fn percent_change(base: f64, new: f64) -> f64 {
    (new - base) / base * 100.0
}

/// Percent change rendered with two decimals, e.g. `-19.87%`.
pub fn format_percent(change: f64) -> String {
    format!("{change:.2}%")
}

fn train_and_evaluate(
    train_set: &TripleStore,
    test: &[EvalQuery],
    config: &TrainConfig,
    ks: &[usize],
) -> Result<EvalReport> {
    let (params, _) = train(train_set, config)?;
    evaluate(&params, test, ks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantRow {
    pub variant: Variant,
    pub report: EvalReport,
}

/// Trains every variant with the same seed. TransE and TransH use `m = d`.
pub fn run_variant_sweep(
    train_set: &TripleStore,
    test: &[EvalQuery],
    config: &TrainConfig,
    ks: &[usize],
) -> Result<Vec<VariantRow>> {
    Variant::ALL
        .iter()
        .map(|&variant| {
            let rel_dim = if variant.requires_equal_dims() {
                config.dim
            } else {
                config.rel_dim
            };
            let cfg = TrainConfig {
                variant,
                rel_dim,
                ..config.clone()
            };
            Ok(VariantRow {
                variant,
                report: train_and_evaluate(train_set, test, &cfg, ks)?,
            })
        })
        .collect()
}

pub fn variant_table(rows: &[VariantRow], ks: &[usize]) -> Table {
    Table {
        header: acc_header(&["variant"], ks),
        rows: rows
            .iter()
            .map(|r| {
                std::iter::once(r.variant.to_string())
                    .chain(acc_cells(&r.report, ks))
                    .collect()
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionRow {
    pub dim: usize,
    pub report: EvalReport,
}

/// One run per dimension with `d = m`.
pub fn run_dimension_sweep(
    train_set: &TripleStore,
    test: &[EvalQuery],
    config: &TrainConfig,
    dims: &[usize],
    ks: &[usize],
) -> Result<Vec<DimensionRow>> {
    dims.iter()
        .map(|&dim| {
            let cfg = TrainConfig {
                dim,
                rel_dim: dim,
                ..config.clone()
            };
            Ok(DimensionRow {
                dim,
                report: train_and_evaluate(train_set, test, &cfg, ks)?,
            })
        })
        .collect()
}

pub fn dimension_table(rows: &[DimensionRow], ks: &[usize]) -> Table {
    Table {
        header: acc_header(&["dim"], ks),
        rows: rows
            .iter()
            .map(|r| {
                std::iter::once(r.dim.to_string())
                    .chain(acc_cells(&r.report, ks))
                    .collect()
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSchemeRow {
    pub scheme: TimeScheme,
    pub relations: usize,
    pub report: EvalReport,
}

/// Re-runs the whole pipeline once per time scheme.
pub fn run_time_scheme_sweep(
    checkins: &[CheckIn],
    pipeline: &PipelineConfig,
    config: &TrainConfig,
    ks: &[usize],
) -> Result<Vec<TimeSchemeRow>> {
    TimeScheme::ALL
        .iter()
        .map(|&scheme| {
            let mut p = pipeline.clone();
            p.discretizer.time = scheme;
            let prepared = prepare(checkins, &p)?;
            Ok(TimeSchemeRow {
                scheme,
                relations: prepared.vocab.relations.len(),
                report: train_and_evaluate(&prepared.train, &prepared.test, config, ks)?,
            })
        })
        .collect()
}

pub fn time_scheme_table(rows: &[TimeSchemeRow], ks: &[usize]) -> Table {
    Table {
        header: acc_header(&["time_scheme", "slots", "patterns"], ks),
        rows: rows
            .iter()
            .map(|r| {
                [
                    r.scheme.to_string(),
                    r.scheme.slots().to_string(),
                    r.relations.to_string(),
                ]
                .into_iter()
                .chain(acc_cells(&r.report, ks))
                .collect()
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsityRow {
    pub ratio: f64,
    pub train_triples: usize,
    pub report: EvalReport,
    /// Percent change of each accuracy against the unreduced run.
    pub change: BTreeMap<usize, f64>,
}

/// Retrains on thinned training triples with identical training seeds. The
/// first row is always the unreduced baseline (ratio 0).
pub fn run_sparsity_experiment(
    train_set: &TripleStore,
    test: &[EvalQuery],
    ratios: &[f64],
    config: &TrainConfig,
    ks: &[usize],
) -> Result<Vec<SparsityRow>> {
    let reduction_seed = derive_seed(config.seed, "sparsity");
    let baseline = train_and_evaluate(train_set, test, config, ks)?;
    let mut rows = vec![SparsityRow {
        ratio: 0.0,
        train_triples: train_set.len(),
        change: ks.iter().map(|&k| (k, 0.0)).collect(),
        report: baseline.clone(),
    }];
    for &ratio in ratios.iter().filter(|r| **r != 0.0) {
        let reduced = reduce_triples(train_set, ratio, reduction_seed)?;
        let report = train_and_evaluate(&reduced, test, config, ks)?;
        let change = ks
            .iter()
            .map(|&k| (k, percent_change(baseline.accuracy(k), report.accuracy(k))))
            .collect();
        rows.push(SparsityRow {
            ratio,
            train_triples: reduced.len(),
            report,
            change,
        });
    }
    Ok(rows)
}

pub fn sparsity_table(rows: &[SparsityRow], ks: &[usize]) -> Table {
    let mut header = acc_header(&["ratio", "train_triples"], ks);
    header.extend(ks.iter().map(|k| format!("change@{k}")));
    Table {
        header,
        rows: rows
            .iter()
            .map(|r| {
                let mut row = vec![format!("{:.2}", r.ratio), r.train_triples.to_string()];
                row.extend(acc_cells(&r.report, ks));
                row.extend(ks.iter().map(|k| format_percent(r.change[k])));
                row
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColdStartReport {
    pub cold_pois: usize,
    pub content_triples: usize,
    /// Visit-only model.
    pub plain: EvalReport,
    /// Model trained jointly with content triples.
    pub with_content: EvalReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColdStartConfig {
    pub threshold: usize,
    pub pair_budget: usize,
}

impl Default for ColdStartConfig {
    fn default() -> Self {
        ColdStartConfig {
            threshold: crate::coldstart::DEFAULT_COLD_THRESHOLD,
            pair_budget: crate::coldstart::DEFAULT_PAIR_BUDGET,
        }
    }
}

/// POIs with fewer than `threshold` distinct visitors are cold; every
/// check-in at a cold POI is a test record and all others train. Both models
/// share the training configuration and are scored on the cold records only.
pub fn run_coldstart_experiment(
    checkins: &[CheckIn],
    discretizer: &DiscretizerConfig,
    cold: &ColdStartConfig,
    config: &TrainConfig,
    ks: &[usize],
) -> Result<ColdStartReport> {
    let cold_keys = cold_start_pois(checkins, cold.threshold);
    if cold_keys.is_empty() {
        return Err(Error::NoColdStart {
            threshold: cold.threshold,
        });
    }
    let labels = checkins
        .iter()
        .map(|c| {
            if cold_keys.contains(&c.poi) {
                SplitLabel::Test
            } else {
                SplitLabel::Train
            }
        })
        .collect();
    let prepared = prepare_with_split(checkins, Split { labels }, discretizer)?;
    let contents = poi_contents(checkins, &prepared.vocab, &prepared.discretizer);
    let content = build_content_triples(
        &contents,
        cold.pair_budget,
        derive_seed(config.seed, "content"),
    )?;

    let plain = train_and_evaluate(&prepared.train, &prepared.test, config, ks)?;
    let (params, _) = train_coldstart(&prepared.train, &content.store, config)?;
    let with_content = evaluate(&params, &prepared.test, ks)?;
    Ok(ColdStartReport {
        cold_pois: cold_keys.len(),
        content_triples: content.store.len(),
        plain,
        with_content,
    })
}

pub fn coldstart_table(report: &ColdStartReport, ks: &[usize]) -> Table {
    Table {
        header: acc_header(&["model"], ks),
        rows: [
            ("visits-only", &report.plain),
            ("with-content", &report.with_content),
        ]
        .iter()
        .map(|(name, r)| {
            std::iter::once(name.to_string())
                .chain(acc_cells(r, ks))
                .collect()
        })
        .collect(),
    }
}

/// Human-readable summary line per table row, for logs.
pub fn describe(table: &Table) -> String {
    let mut out = String::new();
    for row in &table.rows {
        let cells: Vec<String> = table
            .header
            .iter()
            .zip(row)
            .map(|(h, c)| format!("{h}={c}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recsys::DEFAULT_KS;
    use crate::synth::{planted_triples, PlantedConfig};

    #[test]
    fn percent_change_fixture() {
        let c = percent_change(0.307, 0.246);
        assert!((c - (-19.869_706_840_390_88)).abs() < 1e-9);
        assert_eq!(format_percent(c), "-19.87%");
        assert_eq!(format_percent(percent_change(0.5, 0.4)), "-20.00%");
    }

    fn small() -> (TripleStore, Vec<EvalQuery>, TrainConfig) {
        let p = planted_triples(&PlantedConfig {
            users: 10,
            pois: 30,
            relations: 4,
            dim: 4,
            train_triples: 200,
            test_queries: 40,
            ..Default::default()
        });
        let cfg = TrainConfig {
            learning_rate: 0.01,
            margin: 1.0,
            batch_size: 50,
            epochs: 3,
            dim: 4,
            rel_dim: 4,
            ..Default::default()
        };
        (p.train, p.test, cfg)
    }

    #[test]
    fn dimension_table_shape() {
        let (train_set, test, cfg) = small();
        let dims = [4, 5, 6, 7, 8, 9];
        let rows = run_dimension_sweep(&train_set, &test, &cfg, &dims, &DEFAULT_KS).unwrap();
        let table = dimension_table(&rows, &DEFAULT_KS);
        assert_eq!(table.rows.len(), 6);
        assert!(table.rows.iter().all(|r| r.len() == 6));
        assert_eq!(
            table.header[1..],
            ["acc@1", "acc@5", "acc@10", "acc@15", "acc@20"]
        );
        assert!(table.to_csv().lines().count() == 7);
    }

    #[test]
    fn sparsity_ratio_zero_reproduces_baseline() {
        let (train_set, test, cfg) = small();
        let rows =
            run_sparsity_experiment(&train_set, &test, &[0.0, 0.2], &cfg, &DEFAULT_KS).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].ratio, 0.0);
        assert_eq!(rows[1].train_triples, 160);
        let again = train_and_evaluate(&train_set, &test, &cfg, &DEFAULT_KS).unwrap();
        assert_eq!(rows[0].report, again);
        let t = sparsity_table(&rows, &DEFAULT_KS);
        assert_eq!(t.rows[0].last().unwrap(), "0.00%");
    }

    #[test]
    fn variant_sweep_is_reproducible() {
        let (train_set, test, cfg) = small();
        let a = run_variant_sweep(&train_set, &test, &cfg, &DEFAULT_KS).unwrap();
        let b = run_variant_sweep(&train_set, &test, &cfg, &DEFAULT_KS).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(variant_table(&a, &DEFAULT_KS).rows[0][0], "transR");
    }
}
