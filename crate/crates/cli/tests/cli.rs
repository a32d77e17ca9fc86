use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sta_core::embedding::{ModelParams, RelationSet, Variant};
use sta_core::ingest::{
    parse_checkins, read_split_manifest, Discretizer, Pattern, RecordFormat, RegionModel,
    SplitLabel, TimeScheme, Vocab,
};
use sta_core::linalg::Matrix;
use sta_core::pipeline::eval_queries;
use sta_core::recsys::{
    query_ranks, rank_pois, read_model_file, translate_query, write_model_file, Model, Resolution,
};
use tempfile::TempDir;

fn sta(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sta"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("run sta")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sta(dir, args);
    assert!(
        out.status.success(),
        "sta {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const CONFIG: &str = "\
input = \"checkins.csv\"
output = \"out\"
regions = 4
epochs = 4
checkpoint_every = 2
batch_size = 64
learning_rate = 0.01
margin = 0.3
dim = 8
seed = 7
";

/// A scratch directory holding the synthetic check-ins and `cfg.toml`.
fn workspace(extra: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--output", ".", "--seed", "3", "generate"]);
    fs::write(dir.path().join("cfg.toml"), format!("{CONFIG}{extra}")).unwrap();
    dir
}

fn read(path: PathBuf) -> Vec<u8> {
    fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const ARTIFACTS: [&str; 5] = [
    "vocab.tsv",
    "triples.tsv",
    "splits.tsv",
    "discretizer.tsv",
    "stats.tsv",
];

#[test]
fn preprocess_writes_the_six_stats_and_is_repeatable() {
    let ws = workspace("");
    let stdout = ok(ws.path(), &["--config", "cfg.toml", "preprocess"]);
    let out = ws.path().join("out");
    let stats = String::from_utf8(read(out.join("stats.tsv"))).unwrap();
    assert_eq!(stdout, stats);
    let fields: Vec<&str> = stats
        .lines()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(
        fields,
        [
            "users",
            "pois",
            "checkins",
            "time_slots",
            "locations",
            "patterns"
        ]
    );
    assert!(stats.contains("time_slots\t24\n") && stats.contains("locations\t4\n"));

    let first: Vec<Vec<u8>> = ARTIFACTS.iter().map(|f| read(out.join(f))).collect();
    ok(ws.path(), &["--config", "cfg.toml", "preprocess"]);
    let second: Vec<Vec<u8>> = ARTIFACTS.iter().map(|f| read(out.join(f))).collect();
    assert_eq!(first, second);
}

#[test]
fn training_log_has_one_line_per_epoch() {
    let ws = workspace("");
    ok(ws.path(), &["--config", "cfg.toml", "preprocess"]);
    ok(
        ws.path(),
        &["--config", "cfg.toml", "--epochs", "2", "train"],
    );
    let log = String::from_utf8(read(ws.path().join("out/train_log.jsonl"))).unwrap();
    assert_eq!(log.lines().count(), 2);
    for (i, line) in log.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["epoch"], i + 1);
        assert!(v["mean_loss"].is_f64() && v["violations"].is_u64() && v["seconds"].is_f64());
    }
}

fn log_without_times(path: PathBuf) -> Vec<serde_json::Value> {
    String::from_utf8(read(path))
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("seconds");
            v
        })
        .collect()
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    for extra in ["", "content = true\n"] {
        let ws = workspace(extra);
        ok(ws.path(), &["--config", "cfg.toml", "preprocess"]);
        ok(ws.path(), &["--config", "cfg.toml", "train"]);
        let out = ws.path().join("out");
        let full = read(out.join("model.sta"));
        let full_log = log_without_times(out.join("train_log.jsonl"));

        ok(
            ws.path(),
            &["--config", "cfg.toml", "--epochs", "2", "train"],
        );
        ok(ws.path(), &["--config", "cfg.toml", "train", "--resume"]);
        assert_eq!(read(out.join("model.sta")), full, "content: {extra:?}");
        assert_eq!(log_without_times(out.join("train_log.jsonl")), full_log);
    }
}

#[test]
fn pipeline_twice_gives_identical_model_and_evaluation() {
    let ws = workspace("");
    let run = |name: &str| {
        let out = format!("run-{name}");
        for cmd in ["preprocess", "train", "evaluate"] {
            ok(ws.path(), &["--config", "cfg.toml", "--output", &out, cmd]);
        }
        let dir = ws.path().join(&out);
        (read(dir.join("model.sta")), read(dir.join("eval.json")))
    };
    let (model_a, eval_a) = run("a");
    let (model_b, eval_b) = run("b");
    assert_eq!(model_a, model_b);
    assert_eq!(eval_a, eval_b);
    let v: serde_json::Value = serde_json::from_slice(&eval_a).unwrap();
    assert_eq!(v["acc"].as_object().unwrap().len(), 5);
}

fn parse_recommendations(stdout: &str) -> Vec<(String, f64)> {
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("rank\tpoi\tdistance"));
    lines
        .enumerate()
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols[0], (i + 1).to_string());
            (cols[1].to_string(), cols[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn recommend_agrees_with_the_evaluation_path() {
    let ws = workspace("");
    for cmd in ["preprocess", "train"] {
        ok(ws.path(), &["--config", "cfg.toml", cmd]);
    }
    let out = ws.path().join("out");
    let model = read_model_file(&out.join("model.sta")).unwrap();
    let disc = model.discretizer.as_ref().unwrap();
    let raw = read(ws.path().join("checkins.csv"));
    let checkins = parse_checkins(raw.as_slice(), &RecordFormat::default())
        .unwrap()
        .checkins;
    let split = read_split_manifest(read(out.join("splits.tsv")).as_slice()).unwrap();
    let test = split.select(&checkins, SplitLabel::Test);
    let queries = eval_queries(test.iter().copied(), &model.vocab, disc).unwrap();
    let ranks = query_ranks(&model.params, &queries).unwrap();
    let n_pois = model.vocab.pois.len().to_string();

    for (i, (record, q)) in test.iter().zip(&queries).enumerate().step_by(50) {
        let stdout = ok(
            ws.path(),
            &[
                "--config",
                "cfg.toml",
                "--k",
                &n_pois,
                "recommend",
                "--user",
                &record.user,
                "--time",
                &record.timestamp.to_string(),
                "--lat",
                &record.lat.to_string(),
                "--lon",
                &record.lon.to_string(),
            ],
        );
        let got = parse_recommendations(&stdout);
        let relation = q.query.resolution.relation().unwrap();
        let vq = translate_query(&model.params, &q.query).unwrap();
        let expect = rank_pois(&model.params, &vq, relation, got.len()).unwrap();
        let expect: Vec<(String, f64)> = expect
            .items
            .iter()
            .map(|&(v, d)| (model.vocab.pois.key(v).unwrap().clone(), d))
            .collect();
        assert_eq!(got, expect, "query {i}");
        let truth_rank = 1 + got.iter().position(|(p, _)| *p == record.poi).unwrap();
        assert_eq!(Some(truth_rank), ranks[i]);
    }
}

/// One user at the origin, three POIs on a line; transE with `d = 1`.
fn line_model(dir: &Path) -> PathBuf {
    let mut vocab = Vocab::default();
    vocab.users.intern("alice".into());
    for poi in ["far", "planted", "near"] {
        vocab.pois.intern(poi.into());
    }
    vocab.relations.intern(Pattern { slot: 9, region: 0 });
    let empty = RelationSet {
        vectors: Matrix::zeros(0, 1),
        projections: vec![],
        normals: Matrix::zeros(0, 1),
    };
    let params = ModelParams::from_parts(
        Variant::TransE,
        Matrix::zeros(1, 1),
        Matrix::from_vec(3, 1, vec![0.9, 0.1, 0.3]),
        RelationSet {
            vectors: Matrix::from_vec(1, 1, vec![0.05]),
            ..empty.clone()
        },
        empty,
    )
    .unwrap();
    let disc = Discretizer::new(
        TimeScheme::Hourly,
        0,
        RegionModel::from_centroids(vec![[0.0, 0.0]]),
        None,
    );
    let path = dir.join("line.sta");
    write_model_file(&path, &Model::new(params, vocab, Some(disc), 1).unwrap()).unwrap();
    path
}

#[test]
fn recommend_top_one_is_the_planted_poi() {
    let dir = tempfile::tempdir().unwrap();
    let model = line_model(dir.path());
    let model = model.to_str().unwrap();
    let args = |k: &'static str| {
        [
            "--k",
            k,
            "recommend",
            "--model",
            model,
            "--user",
            "alice",
            "--time",
            "2024-03-01T09:30:00Z",
            "--lat",
            "0.5",
            "--lon",
            "-0.5",
        ]
    };
    let top = parse_recommendations(&ok(dir.path(), &args("1")));
    assert_eq!(top.len(), 1);
    assert_eq!(top[0].0, "planted");
    assert!((top[0].1 - 0.05).abs() < 1e-7);
    let all = parse_recommendations(&ok(dir.path(), &args("5")));
    let order: Vec<&str> = all.iter().map(|(p, _)| p.as_str()).collect();
    assert_eq!(order, ["planted", "near", "far"]);

    // Hour 14 never occurred, but the region did: fall back to slot 9.
    let out = sta(
        dir.path(),
        &[
            "--k",
            "1",
            "recommend",
            "--model",
            model,
            "--user",
            "alice",
            "--time",
            "2024-03-01T14:00:00Z",
            "--lat",
            "0",
            "--lon",
            "0",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        parse_recommendations(&String::from_utf8(out.stdout).unwrap())[0].0,
        "planted"
    );
}

#[test]
fn exit_codes() {
    let ws = workspace("");
    let dir = ws.path();

    let out = sta(
        dir,
        &["--input", "missing.csv", "--output", "x", "preprocess"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = sta(
        dir,
        &[
            "--config",
            "cfg.toml",
            "--variant",
            "transE",
            "--dims",
            "8,4",
            "train",
        ],
    );
    assert_eq!(code(&out), 2);

    fs::write(dir.join("bad.toml"), "epochz = 3\n").unwrap();
    assert_eq!(code(&sta(dir, &["--config", "bad.toml", "preprocess"])), 2);
    assert_eq!(code(&sta(dir, &["--config", "nope.toml", "preprocess"])), 2);
    assert_eq!(code(&sta(dir, &["frobnicate"])), 2);
    assert_eq!(code(&sta(dir, &["--config", "cfg.toml", "train"])), 2);

    let model = line_model(dir);
    let model = model.to_str().unwrap();
    let out = sta(
        dir,
        &[
            "recommend",
            "--model",
            model,
            "--user",
            "bob",
            "--time",
            "0",
            "--lat",
            "0",
            "--lon",
            "0",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bob"));
}

#[test]
fn unanswerable_query_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Two regions from a file; all check-ins are in region "a" at 09:00.
    let csv: String = (0..30)
        .map(|i| format!("u{},p{},1.0,1.0,{},\n", i % 3, i % 5, 9 * 3600 + i * 86_400))
        .collect();
    fs::write(d.join("checkins.csv"), csv).unwrap();
    let regions: String = (0..5)
        .map(|i| format!("p{i}\ta\n"))
        .chain(["lonely\tb\n".into()])
        .collect();
    fs::write(d.join("regions.tsv"), regions).unwrap();
    fs::write(
        d.join("cfg.toml"),
        "input = \"checkins.csv\"\noutput = \"out\"\nregion_file = \"regions.tsv\"\nepochs = 2\ndim = 4\n",
    )
    .unwrap();
    ok(d, &["--config", "cfg.toml", "preprocess"]);
    ok(d, &["--config", "cfg.toml", "train"]);
    let recommend = |time: &str| {
        sta(
            d,
            &[
                "--config",
                "cfg.toml",
                "recommend",
                "--user",
                "u1",
                "--time",
                time,
                "--lat",
                "5",
                "--lon",
                "5",
                "--place",
                "lonely",
            ],
        )
    };
    // Region "b" and hour 3 never occur in training.
    let out = recommend("10800");
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unanswerable"));
    // Hour 9 does: same slot, nearest trained region.
    assert_eq!(code(&recommend("32400")), 0);

    let model = read_model_file(&d.join("out/model.sta")).unwrap();
    let disc = model.discretizer.unwrap();
    assert_eq!(disc.region(Some("lonely"), 5.0, 5.0), 1);
    assert!(matches!(
        sta_core::recsys::resolve_pattern(
            Pattern { slot: 3, region: 1 },
            &model.vocab.relations,
            &disc
        ),
        Resolution::Unanswerable
    ));
}

fn csv_shape(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text
        .lines()
        .map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

#[test]
fn dimension_sweep_has_six_rows_of_five_accuracies() {
    let ws = workspace("");
    let stdout = ok(
        ws.path(),
        &[
            "--config",
            "cfg.toml",
            "--epochs",
            "1",
            "experiment",
            "dimensions",
        ],
    );
    let written = String::from_utf8(read(ws.path().join("out/dimensions.csv"))).unwrap();
    assert_eq!(stdout, written);
    let (header, rows) = csv_shape(&written);
    assert_eq!(
        header,
        ["dim", "acc@1", "acc@5", "acc@10", "acc@15", "acc@20"]
    );
    assert_eq!(rows.len(), 6);
    let dims: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(dims, ["70", "80", "90", "100", "110", "120"]);
    assert!(rows.iter().all(|r| r.len() == 6));
}

#[test]
fn time_slot_sweep_runs_three_schemes() {
    let ws = workspace("");
    ok(
        ws.path(),
        &[
            "--config",
            "cfg.toml",
            "--epochs",
            "1",
            "experiment",
            "timeslots",
        ],
    );
    let (_, rows) =
        csv_shape(&String::from_utf8(read(ws.path().join("out/timeslots.csv"))).unwrap());
    let slots: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(slots, ["24", "7", "2"]);
}

#[test]
fn baseline_rows_are_reproducible() {
    let ws = workspace("");
    let run = || {
        ok(
            ws.path(),
            &[
                "--config",
                "cfg.toml",
                "--epochs",
                "2",
                "experiment",
                "baselines",
            ],
        )
    };
    let first = run();
    assert_eq!(first, run());
    let (_, rows) = csv_shape(&first);
    let variants: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(variants, ["transR", "transH", "transE"]);
}

#[test]
fn sparsity_and_coldstart_reports() {
    let ws = workspace("sparsity_ratios = [0.1, 0.2]\n");
    ok(
        ws.path(),
        &[
            "--config",
            "cfg.toml",
            "--epochs",
            "2",
            "experiment",
            "sparsity",
        ],
    );
    let (header, rows) =
        csv_shape(&String::from_utf8(read(ws.path().join("out/sparsity.csv"))).unwrap());
    assert_eq!(header.len(), 2 + 5 + 5);
    let ratios: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ratios, ["0.00", "0.10", "0.20"]);
    assert!(rows[0][7..].iter().all(|c| c == "0.00%"));

    ok(
        ws.path(),
        &[
            "--config",
            "cfg.toml",
            "--epochs",
            "2",
            "experiment",
            "coldstart",
        ],
    );
    let (_, rows) =
        csv_shape(&String::from_utf8(read(ws.path().join("out/coldstart.csv"))).unwrap());
    assert_eq!(rows.len(), 2);
}
