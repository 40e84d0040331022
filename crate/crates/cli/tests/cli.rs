use std::path::Path;
use std::process::{Command, Output};

fn literale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_literale"))
        .args(args)
        .output()
        .expect("failed to spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &Path) {
    let out = literale(&["generate", "--out", dir.to_str().unwrap(), "--entities", "60", "--clusters", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

fn assert_one_line_error(o: &Output) {
    assert!(!o.status.success());
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{:?}", err);
    assert!(err.starts_with("error: "), "{:?}", err);
}

fn train_small(data: &Path, run: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "6",
        "--eval-every",
        "2",
        "--fusion",
        "linear",
    ];
    args.extend_from_slice(extra);
    literale(&args)
}

#[test]
fn evaluate_reproduces_logged_best_validation_mrr() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data);
    let out = train_small(&data, &run, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["config.txt", "train.log", "best.ckpt", "report.txt"] {
        assert!(run.join(f).exists(), "missing {}", f);
    }

    let log = std::fs::read_to_string(run.join("train.log")).unwrap();
    let best = log
        .lines()
        .skip(1)
        .filter_map(|l| l.split('\t').nth(2))
        .filter(|v| *v != "-")
        .map(|v| v.parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);

    let ckpt = run.join("best.ckpt");
    let eval = literale(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--split", "valid"]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    let text = stdout(&eval);
    let line = text.lines().find(|l| l.starts_with("mrr=")).unwrap();
    let mrr: f64 = line["mrr=".len()..].parse().unwrap();
    assert_eq!(mrr.to_bits(), best.to_bits(), "{} vs {}", mrr, best);
}

#[test]
fn rerunning_from_saved_config_is_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    generate(&data);
    assert!(train_small(&data, &a, &["--seed", "4"]).status.success());
    let cfg = a.join("config.txt");
    let out = literale(&["train", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["config.txt", "train.log", "best.ckpt", "report.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{}", f);
    }
}

#[test]
fn multi_seed_run_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data);
    let out = train_small(&data, &run, &["--seeds", "2", "--seed", "7"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(run.join("seed-7/best.ckpt").exists());
    assert!(run.join("seed-8/best.ckpt").exists());
    let summary = std::fs::read_to_string(run.join("summary.txt")).unwrap();
    assert!(summary.contains("val_mrr mean"), "{}", summary);
}

#[test]
fn invalid_fusion_is_a_usage_error() {
    let out = literale(&["train", "--dataset", ".", "--out", "x", "--fusion", "sigmoid"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.txt");
    std::fs::write(&cfg, "dim=8\nlearning-rate=0.1\n").unwrap();
    let out = literale(&["train", "--config", cfg.to_str().unwrap(), "--out", "x"]);
    assert_eq!(out.status.code(), Some(4));
    assert_one_line_error(&out);
    assert!(stderr(&out).contains("c.txt:2:"), "{}", stderr(&out));
}

#[test]
fn missing_dataset_fails_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = literale(&["stats", "--dataset", tmp.path().join("nope").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert_one_line_error(&out);
}

#[test]
fn missing_checkpoint_fails_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data);
    let ckpt = tmp.path().join("none.ckpt");
    let out = literale(&["evaluate", "--dataset", data.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(5) | Some(6)), "{:?}", out.status);
    assert_one_line_error(&out);
}

#[test]
fn zero_threads_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data);
    let out = train_small(&data, &tmp.path().join("run"), &["--threads", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_one_line_error(&out);
}

#[test]
fn stats_prints_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data);
    let out = literale(&["stats", "--dataset", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let field = |k: &str| -> usize {
        text.lines()
            .find_map(|l| l.strip_prefix(k).and_then(|r| r.strip_prefix('\t')))
            .unwrap_or_else(|| panic!("no {} in {}", k, text))
            .parse()
            .unwrap()
    };
    assert_eq!(field("entities"), 60);
    assert_eq!(field("relations"), 2);
    assert_eq!(field("data_relations"), 2);
    assert_eq!(field("literal_triples"), 2 * 57);
    assert!(field("relational_triples") >= 57);
}

#[test]
fn neighbors_prints_ranked_table() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    generate(&data);
    assert!(train_small(&data, &run, &[]).status.success());
    let ckpt = run.join("best.ckpt");
    let table = tmp.path().join("nn.tsv");
    for space in ["embedding", "literal", "enriched"] {
        let out = literale(&[
            "neighbors",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--entity",
            "person0",
            "--space",
            space,
            "--k",
            "4",
            "--out",
            table.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let text = std::fs::read_to_string(&table).unwrap();
        assert_eq!(text, stdout(&out));
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        let sims: Vec<f64> = rows.iter().map(|r| r.split('\t').nth(2).unwrap().parse().unwrap()).collect();
        assert!(sims.windows(2).all(|w| w[0] >= w[1]), "{:?}", sims);
        assert!(rows.iter().all(|r| r.split('\t').nth(1) != Some("person0")));
    }

    let out = literale(&["neighbors", "--checkpoint", ckpt.to_str().unwrap(), "--entity", "nobody"]);
    assert_eq!(out.status.code(), Some(7));
    assert_one_line_error(&out);
}
