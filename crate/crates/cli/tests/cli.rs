use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tfdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfdm"))
        .args(args)
        .env_remove("TFDM_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value<'a>(out: &'a str, key: &str) -> Option<&'a str> {
    out.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

fn synthetic_mnist(n_train: usize, n_test: usize) -> TempDir {
    let dir = TempDir::new().unwrap();
    tfdm::data::write_synthetic_mnist(dir.path(), n_train, n_test, 5).unwrap();
    dir
}

fn train_small(data: &Path, out: &Path, epochs: &str) -> Output {
    tfdm(&[
        "train",
        "--preset",
        "tfdm-lenet",
        "--data-dir",
        data.to_str().unwrap(),
        "--epochs",
        epochs,
        "--batch-size",
        "20",
        "--seed",
        "1",
        "--lr",
        "1e-3",
        "--threads",
        "1",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn presets_listed() {
    let o = tfdm(&["presets"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in ["lenet-cnn", "tfdm-lenet", "vgg-large-tfdm-mixture", "alexnet-tfdm"] {
        assert!(s.contains(&format!("preset={name} ")), "{s}");
    }
    let shown = stdout(&tfdm(&["presets", "--show", "tfdm-lenet"]));
    assert!(shown.contains("kind = \"eml\""), "{shown}");
}

#[test]
fn unknown_preset_exits_2_with_list() {
    let o = tfdm(&["count-ops", "--preset", "resnet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tfdm-lenet"));
}

#[test]
fn unknown_flag_rejected() {
    let o = tfdm(&["verify", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_documents_exit_codes() {
    for sub in ["train", "eval", "verify", "count-ops", "presets"] {
        let o = tfdm(&[sub, "--help"]);
        assert!(o.status.success());
        assert!(stdout(&o).contains("3 numerical divergence"), "{sub}");
    }
    let train_help = stdout(&tfdm(&["train", "--help"]));
    for flag in ["--config", "--preset", "--data-dir", "--epochs", "--batch-size", "--seed", "--lr", "--out"] {
        assert!(train_help.contains(flag), "{flag}");
    }
}

#[test]
fn count_ops_directions() {
    for (a, b) in [
        ("tfdm-lenet", "lenet-cnn"),
        ("alexnet-tfdm", "alexnet-cnn"),
        ("vgg-large-tfdm-mixture", "vgg-large-cnn"),
    ] {
        let o = tfdm(&["count-ops", "--preset", a, "--compare", b]);
        assert!(o.status.success(), "{}", stderr(&o));
        let s = stdout(&o);
        let ratio: f64 = value(&s, "ratio").unwrap().parse().unwrap();
        assert!(ratio < 1.0, "{a} vs {b}: {ratio}");
        assert_eq!(value(&s, "smaller"), Some("true"));
    }
}

#[test]
fn count_ops_writes_report_and_csv() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.txt");
    let csv = dir.path().join("ops.csv");
    let o = tfdm(&[
        "count-ops",
        "--preset",
        "tfdm-lenet",
        "--report",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).is_empty());
    assert!(std::fs::read_to_string(&report).unwrap().contains("total (mult + dft)"));
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert!(csv.contains("layer,kind,domain,mult_ops,dft_ops"));
    let same = stdout(&tfdm(&["count-ops", "--preset", "tfdm-lenet", "--compare", "tfdm-lenet"]));
    assert_eq!(value(&same, "ratio"), Some("1.000000"));
}

#[test]
fn invalid_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "name = \"bad\"\ninput = [8, 8, 1]\nclasses = 2\n[[layers]]\nkind = \"eml\"\nk = 3\nchannels = 2\n",
    )
    .unwrap();
    let o = tfdm(&["count-ops", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("layer 0"), "{}", stderr(&o));
}

#[test]
fn verify_fast_passes_and_negative_control_fails() {
    let o = tfdm(&["verify", "--level", "fast", "--seed", "7"]);
    let s = stdout(&o);
    assert!(o.status.success(), "{s}");
    assert_eq!(value(&s, "failed"), Some("0"));
    let pass_set = |s: &str| -> Vec<String> {
        s.lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .map(|l| l.split_whitespace().take(2).collect::<Vec<_>>().join(" "))
            .collect()
    };
    let other = stdout(&tfdm(&["verify", "--level", "fast", "--seed", "8"]));
    assert_eq!(pass_set(&s), pass_set(&other));

    let neg = tfdm(&["verify", "--seed", "7", "--drop-conjugation"]);
    assert_eq!(neg.status.code(), Some(1));
    assert!(stdout(&neg).lines().any(|l| l.starts_with("FAIL xcorr_theorem")));
}

#[test]
fn missing_data_exits_2() {
    let o = tfdm(&["train", "--preset", "tfdm-lenet", "--data-dir", "/nonexistent/mnist", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/mnist"));
    let o = tfdm(&["train", "--preset", "tfdm-lenet", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_writes_artifacts_deterministically_and_eval_reads_them() {
    let data = synthetic_mnist(200, 100);
    let runs = TempDir::new().unwrap();
    let (a, b) = (runs.path().join("a"), runs.path().join("b"));
    let o = train_small(data.path(), &a, "5");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "epochs"), Some("5"));
    for f in ["manifest.json", "metrics.csv", "config.toml", "checkpoint-best.tfdm", "checkpoint-last.tfdm"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,step,split,loss,error,lr,seconds\n"));
    assert_eq!(metrics.lines().filter(|l| l.contains(",train,")).count(), 5);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);

    assert!(train_small(data.path(), &b, "5").status.success());
    assert_eq!(metrics, std::fs::read_to_string(b.join("metrics.csv")).unwrap());

    let ckpt = a.join("checkpoint-last.tfdm");
    let eval = |p: &Path| tfdm(&["eval", "--checkpoint", p.to_str().unwrap(), "--data-dir", data.path().to_str().unwrap()]);
    let e1 = eval(&ckpt);
    assert!(e1.status.success(), "{}", stderr(&e1));
    let err: f64 = value(&stdout(&e1), "test_error").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&err));
    assert_eq!(stdout(&e1), stdout(&eval(&ckpt)));
    let last_test = metrics.lines().filter(|l| l.contains(",test,")).last().unwrap();
    let logged: f64 = last_test.split(',').nth(4).unwrap().parse().unwrap();
    assert!((logged - err).abs() < 1e-9, "{logged} vs {err}");

    let mut bytes = std::fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    let corrupt = runs.path().join("corrupt.tfdm");
    std::fs::write(&corrupt, &bytes).unwrap();
    let e = eval(&corrupt);
    assert_eq!(e.status.code(), Some(2));
    assert!(stderr(&e).contains("checksum"), "{}", stderr(&e));
}

#[test]
fn divergence_exits_3() {
    let data = synthetic_mnist(100, 20);
    let out = TempDir::new().unwrap();
    let o = tfdm(&[
        "train",
        "--preset",
        "lenet-cnn",
        "--data-dir",
        data.path().to_str().unwrap(),
        "--epochs",
        "3",
        "--batch-size",
        "20",
        "--optimizer",
        "sgd",
        "--lr",
        "1e30",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}\n{}", stdout(&o), stderr(&o));
    assert_eq!(value(&stdout(&o), "diverged"), Some("true"));
}
