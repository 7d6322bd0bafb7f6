use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omivae_core::eval::Embedding;
use omivae_core::optim::load_checkpoint;

const SMALL: &[&str] = &[
    "synth.num_classes=3",
    "synth.samples_per_class=20",
    "synth.num_blocks=2",
    "synth.features_per_block=20",
    "synth.expr_features=30",
    "synth.class_signal=0.4",
    "synth.noise_sd=0.05",
    "split.k=5",
    "train.batch_size=16",
    "train.lr=0.005",
    "train.phase1.epochs_max=15",
    "train.phase2.epochs_max=25",
    "train.master_seed=3",
];

fn omivae(args: &[&str], sets: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omivae"));
    cmd.args(args);
    for s in sets {
        cmd.arg("--set").arg(s);
    }
    cmd.env_remove("OMIVAE_THREADS");
    cmd.output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(out: Output, code: i32, kind: &str) {
    assert_eq!(out.status.code(), Some(code), "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{kind}]: ")), "{err}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, sets: &[&str]) -> PathBuf {
    let out = dir.join("syn");
    ok(omivae(&["synth", "--out", p(&out)], sets));
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [SMALL, &["synth.num_blocks=5"]].concat();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(omivae(&["synth", "--out", p(&a)], &sets));
    ok(omivae(&["synth", "--out", p(&b)], &sets));
    for f in ["expression.tsv", "methylation.tsv", "annotation.tsv", "labels.tsv", "dataset.omids"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let annotation = read(&a.join("annotation.tsv"));
    let mut chromosomes: Vec<&str> = annotation.lines().skip(1).filter_map(|l| l.split('\t').nth(1)).collect();
    chromosomes.sort_unstable();
    chromosomes.dedup();
    assert_eq!(chromosomes.len(), 5);
}

#[test]
fn validation_errors_exit_one_with_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    fails(omivae(&["synth", "--out", out], &["synth.samples_per_class=0"]), 1, "validation");
    fails(omivae(&["synth", "--out", out], &["model.width=3"]), 1, "validation");
    fails(omivae(&["synth", "--out", out], &["train.lr=fast"]), 1, "validation");
    fails(omivae(&["synth", "--oops"], &[]), 1, "validation");
    fails(omivae(&["preprocess", "--out", out], &[]), 1, "validation");
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "split.k = 5\nunknown.key = 1\n").unwrap();
    fails(omivae(&["--config", p(&cfg), "synth", "--out", out], &[]), 1, "validation");
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.omids");
    fails(omivae(&["train", "--data", p(&missing), "--out", p(dir.path())], &[]), 2, "runtime");
    let garbage = dir.path().join("garbage.omids");
    std::fs::write(&garbage, b"not a dataset").unwrap();
    fails(omivae(&["train", "--data", p(&garbage), "--out", p(dir.path())], &[]), 1, "validation");
}

#[test]
fn preprocess_reproduces_the_synthetic_cache() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), SMALL);
    let out = dir.path().join("again.omids");
    let report = dir.path().join("report.tsv");
    let stdout = ok(omivae(
        &[
            "preprocess",
            "--expression",
            p(&syn.join("expression.tsv")),
            "--methylation",
            p(&syn.join("methylation.tsv")),
            "--annotation",
            p(&syn.join("annotation.tsv")),
            "--labels",
            p(&syn.join("labels.tsv")),
            "--out",
            p(&out),
            "--report",
            p(&report),
        ],
        SMALL,
    ));
    assert!(stdout.contains("samples.kept\t60"));
    assert_eq!(read(&report), stdout);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(syn.join("dataset.omids")).unwrap());
}

#[test]
fn train_writes_history_checkpoint_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), SMALL);
    let data = syn.join("dataset.omids");
    let run = dir.path().join("run");
    let summary = ok(omivae(&["train", "--data", p(&data), "--out", p(&run)], SMALL));
    assert!(summary.contains("test.accuracy\t"));

    let history = read(&run.join("history.tsv"));
    let mut lines = history.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(header[..2], ["epoch", "phase"]);
    assert_eq!(header.last(), Some(&"val_accuracy"));
    assert!(header.contains(&"train_kl") && header.contains(&"val_classification"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    let ckpt = load_checkpoint(&run.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.metadata.get_str("phase"), Some("supervised"));
    let epochs: usize = summary
        .lines()
        .filter(|l| l.contains(".epochs_run"))
        .map(|l| l.split('\t').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(rows.len(), epochs);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert!(rows.iter().filter(|r| r[1] == "unsupervised").all(|r| r[header.len() - 1] == "NA"));

    let split = read(&run.join("split.tsv"));
    let tests = split.lines().filter(|l| l.ends_with("\ttest")).count();
    assert_eq!(tests, 12);

    let report = dir.path().join("eval.tsv");
    let text = ok(omivae(
        &[
            "evaluate",
            "--checkpoint",
            p(&run.join("model.ckpt")),
            "--data",
            p(&data),
            "--split",
            p(&run.join("split.tsv")),
            "--out",
            p(&report),
        ],
        &[],
    ));
    let acc: f64 = text.lines().find_map(|l| l.strip_prefix("accuracy = ")).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let reported: f64 = summary.lines().find_map(|l| l.strip_prefix("test.accuracy\t")).unwrap().parse().unwrap();
    assert_eq!(acc, reported);
    assert!(text.contains("weighted_f1 = "));
    assert!(dir.path().join("eval.confusion.tsv").exists());
}

#[test]
fn resuming_after_phase_one_matches_a_continuous_run() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), SMALL);
    let data = syn.join("dataset.omids");
    let full = dir.path().join("full");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let continuous = ok(omivae(&["train", "--data", p(&data), "--out", p(&full)], SMALL));
    ok(omivae(&["train", "--data", p(&data), "--out", p(&first), "--phase", "unsupervised-only"], SMALL));
    let ckpt = load_checkpoint(&first.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.metadata.get_str("phase"), Some("unsupervised"));
    let resumed = ok(omivae(
        &["train", "--data", p(&data), "--out", p(&second), "--resume", p(&first.join("model.ckpt"))],
        SMALL,
    ));

    let accuracy = |s: &str| -> f64 { s.lines().find_map(|l| l.strip_prefix("test.accuracy\t")).unwrap().parse().unwrap() };
    assert!((accuracy(&continuous) - accuracy(&resumed)).abs() <= 1e-9);
    let phase2 = |h: String| h.lines().filter(|l| l.contains("\tsupervised\t")).map(str::to_string).collect::<Vec<_>>();
    let a = phase2(read(&full.join("history.tsv")));
    assert!(!a.is_empty());
    assert_eq!(a, phase2(read(&second.join("history.tsv"))));
    assert_eq!(std::fs::read(full.join("model.ckpt")).unwrap().len(), std::fs::read(second.join("model.ckpt")).unwrap().len());

    // A finished checkpoint cannot silently run phase two again, and seeds must agree.
    let done = full.join("model.ckpt");
    fails(omivae(&["train", "--data", p(&data), "--out", p(&second), "--resume", p(&done)], SMALL), 1, "validation");
    let other_seed = [SMALL, &["train.master_seed=4"]].concat();
    let resume = first.join("model.ckpt");
    fails(omivae(&["train", "--data", p(&data), "--out", p(&second), "--resume", p(&resume)], &other_seed), 1, "validation");
}

#[test]
fn crossval_reports_every_fold_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), SMALL);
    let data = syn.join("dataset.omids");
    let sets = [SMALL, &["train.phase1.epochs_max=4", "train.phase2.epochs_max=4"]].concat();
    let a = dir.path().join("a");
    let stdout = ok(omivae(&["crossval", "--data", p(&data), "--out", p(&a), "--k", "10"], &sets));
    assert!(stdout.starts_with("accuracy\t") && stdout.contains(" ± "));
    for fold in 1..=10 {
        let d = a.join(format!("fold_{fold:02}"));
        for f in ["history.tsv", "report.tsv", "confusion.tsv"] {
            assert!(d.join(f).exists(), "{}", d.join(f).display());
        }
    }
    let summary = read(&a.join("summary.tsv"));
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 13);
    assert!(rows[11].starts_with("mean\t") && rows[12].starts_with("sd\t"));

    let b = dir.path().join("b");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omivae"));
    cmd.args(["crossval", "--data", p(&data), "--out", p(&b), "--k", "10"]);
    for s in &sets {
        cmd.arg("--set").arg(s);
    }
    ok(cmd.env("OMIVAE_THREADS", "3").output().unwrap());
    assert_eq!(read(&b.join("summary.tsv")), summary);

    fails(omivae(&["crossval", "--data", p(&data), "--out", p(&b), "--k", "21"], &sets), 1, "validation");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_omivae"));
    cmd.args(["crossval", "--data", p(&data), "--out", p(&b)]);
    fails(cmd.env("OMIVAE_THREADS", "zero").output().unwrap(), 1, "validation");
}

#[test]
fn embed_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), SMALL);
    let data = syn.join("dataset.omids");
    let run = dir.path().join("run");
    let sets = [SMALL, &["model.latent_dim=128", "train.phase1.epochs_max=2", "train.phase2.epochs_max=0"]].concat();
    ok(omivae(&["train", "--data", p(&data), "--out", p(&run), "--phase", "unsupervised-only"], &sets));
    let emb = dir.path().join("emb.tsv");
    ok(omivae(&["embed", "--checkpoint", p(&run.join("model.ckpt")), "--data", p(&data), "--out", p(&emb)], &[]));
    let e = Embedding::load(&emb).unwrap();
    assert_eq!(e.dims(), 128);
    assert_eq!(e.values.rows(), 60);
    assert!(e.classes.is_some());

    let run2 = dir.path().join("run2");
    let sets = [SMALL, &["model.latent_dim=2"]].concat();
    ok(omivae(&["train", "--data", p(&data), "--out", p(&run2), "--phase", "unsupervised-only"], &sets));
    let emb2 = dir.path().join("emb2.tsv");
    ok(omivae(
        &[
            "embed",
            "--checkpoint",
            p(&run2.join("model.ckpt")),
            "--data",
            p(&data),
            "--split",
            p(&run2.join("split.tsv")),
            "--role",
            "test",
            "--out",
            p(&emb2),
        ],
        &[],
    ));
    assert_eq!(Embedding::load(&emb2).unwrap().values.rows(), 12);
    let svg = dir.path().join("plot.svg");
    ok(omivae(&["plot", "--embedding", p(&emb2), "--out", p(&svg), "--title", "latent"], &[]));
    let text = read(&svg);
    assert!(text.starts_with("<?xml") && text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("<circle").count(), 12);
}
