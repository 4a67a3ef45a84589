use std::fs;
use std::path::{Path, PathBuf};

use diffetm::cli::commands::{metrics_file, INGEST_REPORT, KL_TEST_FILE, SWEEP_FILE, SWEEP_HEADER};
use diffetm::cli::{run_args, Manifest, Overrides, RunConfig, Status};
use diffetm::corpus::{IngestReport, Split};
use diffetm::metrics::MetricsReport;
use diffetm::synth::{generate_lines, SyntheticSpec};
use diffetm::trainer::{TrainReport, BEST_CHECKPOINT, REPORT_FILE, TRAJECTORY_FILE};
use diffetm::Error;
use serde_json::json;

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    /// A synthetic raw corpus and a small-model config file.
    fn new(extra: serde_json::Value) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let lines = generate_lines(&SyntheticSpec {
            num_docs: 240,
            vocab_size: 120,
            num_topics: 4,
            mean_doc_len: 30.0,
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        fs::write(root.join("raw.txt"), lines.join("\n")).unwrap();
        let mut cfg = json!({
            "input": root.join("raw.txt"),
            "min_df": 2,
            "num_topics": 4,
            "embed_dim": 8,
            "hidden_dim": 16,
            "epochs": 4,
            "batch_size": 64,
            "learning_rate": 0.01,
            "t_values": [0, 3],
            "top_n": 6,
        });
        cfg.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        fs::write(root.join("config.json"), cfg.to_string()).unwrap();
        Self { _tmp: tmp, root }
    }

    fn run(&self, args: &[&str]) -> diffetm::Result<()> {
        let config = self.root.join("config.json");
        let out = self.root.join("runs");
        let mut argv = vec![
            "diffetm".to_string(),
            "--config".into(),
            config.display().to_string(),
            "--out".into(),
            out.display().to_string(),
        ];
        argv.extend(args.iter().map(|s| s.to_string()));
        run_args(argv)
    }

    fn config(&self, args: &[(&str, serde_json::Value)]) -> RunConfig {
        let o = Overrides {
            out: Some(self.root.join("runs")),
            keys: args.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            ..Default::default()
        };
        RunConfig::resolve(Some(&self.root.join("config.json")), &o).unwrap()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn train_twice_gives_identical_artifacts() {
    let a = Workspace::new(json!({}));
    let b = Workspace::new(json!({}));
    // Same config file (same input path), different output root.
    fs::copy(a.root.join("config.json"), b.root.join("config.json")).unwrap();
    for w in [&a, &b] {
        w.run(&["ingest"]).unwrap();
        w.run(&["train"]).unwrap();
    }
    let (ca, cb) = (a.config(&[]), b.config(&[]));
    assert_eq!(ca.run_id(), cb.run_id());
    for f in ["vocab.tsv", "train.bin", "valid.bin", "test.bin", INGEST_REPORT] {
        assert_eq!(
            fs::read(ca.corpus_dir().join(f)).unwrap(),
            fs::read(cb.corpus_dir().join(f)).unwrap(),
            "{f}"
        );
    }
    for f in [REPORT_FILE, TRAJECTORY_FILE, BEST_CHECKPOINT] {
        assert_eq!(fs::read(ca.run_dir().join(f)).unwrap(), fs::read(cb.run_dir().join(f)).unwrap(), "{f}");
    }
    let ma = Manifest::load(&ca.run_dir().join("manifest-train.json")).unwrap();
    let mb = Manifest::load(&cb.run_dir().join("manifest-train.json")).unwrap();
    // config.json records the differing output root; everything else matches.
    let strip = |m: Manifest| m.artifacts.into_iter().filter(|x| x.path != Path::new("config.json")).collect::<Vec<_>>();
    let (ma_status, ma) = (ma.status, strip(ma));
    assert_eq!(ma, strip(mb));
    assert_eq!(ma_status, Status::Ok);
    assert!(ma.iter().any(|x| x.path == Path::new(BEST_CHECKPOINT)));
}

#[test]
fn manifests_hash_what_is_on_disk() {
    let w = Workspace::new(json!({}));
    w.run(&["ingest"]).unwrap();
    let cfg = w.config(&[]);
    let m = Manifest::load(&cfg.corpus_dir().join("manifest-ingest.json")).unwrap();
    assert_eq!(m.command, "ingest");
    assert_eq!(m.seed, cfg.seed);
    assert_eq!(m.config, cfg);
    assert_eq!(m.artifacts.len(), 5);
    for a in &m.artifacts {
        let again = diffetm::cli::Artifact::hash(&cfg.corpus_dir().join(&a.path), &cfg.corpus_dir()).unwrap();
        assert_eq!(&again, a);
    }
    let report: IngestReport = read_json(&cfg.corpus_dir().join(INGEST_REPORT));
    assert_eq!(report.documents_read, 240);
}

#[test]
fn missing_input_fails_before_any_output() {
    let w = Workspace::new(json!({ "input": "/definitely/not/here.txt" }));
    match w.run(&["ingest"]) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "input"),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!w.root.join("runs").exists());

    let w = Workspace::new(json!({}));
    match w.run(&["train"]) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "corpus_dir"),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!w.root.join("runs").exists());
}

#[test]
fn bad_config_keys_are_named() {
    let w = Workspace::new(json!({ "epochs": "many" }));
    match w.run(&["train"]) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "epochs"),
        other => panic!("{other:?}"),
    }
    let w = Workspace::new(json!({}));
    match w.run(&["--preset", "nope", "train"]) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "preset"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(w.run(&["train", "--mode", "sideways"]), Err(Error::Config { .. })));
}

#[test]
fn higher_min_df_gives_smaller_vocabulary() {
    let w = Workspace::new(json!({}));
    let mut sizes = Vec::new();
    for df in ["2", "8", "30"] {
        let dir = w.root.join(format!("corpus-{df}"));
        w.run(&["ingest", "--min-df", df, "--corpus-dir", dir.to_str().unwrap()]).unwrap();
        sizes.push(read_json::<IngestReport>(&dir.join(INGEST_REPORT)).vocab_size);
    }
    assert!(sizes[0] > sizes[1] && sizes[1] > sizes[2], "{sizes:?}");
}

#[test]
fn eval_is_repeatable_and_guards_the_vocabulary() {
    let w = Workspace::new(json!({}));
    w.run(&["ingest"]).unwrap();
    w.run(&["train"]).unwrap();
    let cfg = w.config(&[]);
    let metrics = cfg.run_dir().join(metrics_file(Split::Test));
    w.run(&["eval"]).unwrap();
    let first = fs::read(&metrics).unwrap();
    w.run(&["eval"]).unwrap();
    assert_eq!(fs::read(&metrics).unwrap(), first);
    let r: MetricsReport = read_json(&metrics);
    assert_eq!(r.quality, r.coherence * r.diversity);
    let tsv = fs::read_to_string(cfg.run_dir().join("top_words.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 4 * 6);

    w.run(&["eval", "--split", "valid"]).unwrap();
    assert!(cfg.run_dir().join(metrics_file(Split::Valid)).exists());

    let other = w.root.join("corpus-df20");
    w.run(&["ingest", "--min-df", "20", "--corpus-dir", other.to_str().unwrap()]).unwrap();
    let ckpt = cfg.run_dir().join(BEST_CHECKPOINT);
    let res = w.run(&["eval", "--corpus-dir", other.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(matches!(res, Err(Error::VocabularyMismatch(_))), "{res:?}");
    let res = w.run(&["topics", "--corpus-dir", other.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(matches!(res, Err(Error::VocabularyMismatch(_))), "{res:?}");

    w.run(&["topics", "--top-n", "3"]).unwrap();
    let topics = fs::read_to_string(cfg.run_dir().join("topics.tsv")).unwrap();
    assert_eq!(topics.lines().count(), 1 + 4 * 3);
}

#[test]
fn corrupt_checkpoint_is_reported() {
    let w = Workspace::new(json!({}));
    w.run(&["ingest"]).unwrap();
    let bad = w.root.join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let res = w.run(&["eval", "--checkpoint", bad.to_str().unwrap()]);
    assert!(matches!(res, Err(Error::CorruptCheckpoint { .. })), "{res:?}");
}

#[test]
fn sweep_rows_and_zero_step_equivalence() {
    let w = Workspace::new(json!({}));
    w.run(&["ingest"]).unwrap();
    w.run(&["sweep-t"]).unwrap();
    let cfg = w.config(&[]);
    let csv = fs::read_to_string(diffetm::cli::commands::sweep_dir(&cfg).join(SWEEP_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("3,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));

    w.run(&["train", "--mode", "no_diffusion"]).unwrap();
    let nd = w.config(&[("mode", json!("no_diffusion"))]);
    w.run(&["eval", "--checkpoint", nd.run_dir().join(BEST_CHECKPOINT).to_str().unwrap()]).unwrap();
    let r: MetricsReport = read_json(&nd.run_dir().join(metrics_file(Split::Test)));
    let want = format!("0,{},{},{},{},ok", r.coherence, r.diversity, r.quality, r.perplexity);
    assert_eq!(lines[1], want);

    let t0 = w.config(&[("diffusion_steps", json!(0))]);
    let a: TrainReport = read_json(&t0.run_dir().join(REPORT_FILE));
    let mut b: TrainReport = read_json(&nd.run_dir().join(REPORT_FILE));
    b.mode = a.mode;
    assert_eq!(a, b);
}

#[test]
fn failed_sweep_rows_are_recorded_and_the_sweep_continues() {
    let w = Workspace::new(json!({ "t_values": [0, 2, 4], "epochs": 2 }));
    w.run(&["ingest"]).unwrap();
    // A plain file where the T=2 run directory belongs.
    let blocked = w.config(&[("diffusion_steps", json!(2))]).run_dir();
    fs::create_dir_all(blocked.parent().unwrap()).unwrap();
    fs::write(&blocked, b"").unwrap();
    match w.run(&["sweep-t"]) {
        Err(Error::SweepIncomplete { failed: 1, total: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    let cfg = w.config(&[]);
    let dir = diffetm::cli::commands::sweep_dir(&cfg);
    let csv = fs::read_to_string(dir.join(SWEEP_FILE)).unwrap();
    let status: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(status[0], "ok");
    assert!(status[1].starts_with("error: "));
    assert_eq!(status[2], "ok");
    assert_eq!(Manifest::load(&dir.join("manifest-sweep-t.json")).unwrap().status, Status::Partial);
}

#[test]
fn divergence_keeps_the_partial_report() {
    let w = Workspace::new(json!({ "learning_rate": 1e12, "batch_size": 16 }));
    w.run(&["ingest"]).unwrap();
    let res = w.run(&["train"]);
    assert!(matches!(res, Err(Error::Diverged { .. })), "{res:?}");
    let cfg = w.config(&[]);
    let report: TrainReport = read_json(&cfg.run_dir().join(REPORT_FILE));
    assert!(report.diverged.is_some());
    let m = Manifest::load(&cfg.run_dir().join("manifest-train.json")).unwrap();
    assert_eq!(m.status, Status::Failed);
    assert!(m.error.unwrap().contains("diverged"));
}

#[test]
fn kl_test_trajectory_strictly_improves() {
    let w = Workspace::new(json!({ "max_checkpoints": null, "epochs": 6, "mode": "standard_etm" }));
    assert!(w.run(&["kl-test"]).is_err());
    w.run(&["ingest"]).unwrap();
    w.run(&["train"]).unwrap();
    w.run(&["kl-test"]).unwrap();
    let cfg = w.config(&[]);
    let csv = fs::read_to_string(cfg.run_dir().join(KL_TEST_FILE)).unwrap();
    let ppl: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(!ppl.is_empty());
    assert!(ppl.windows(2).all(|p| p[1] < p[0]), "{ppl:?}");
}
