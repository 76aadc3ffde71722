use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cqrnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqrnn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CQRNN_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn gen_data_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqrnn(&["gen-data", "--name", "norm_linear", "--seed", "3", "--out", "a"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = dir.path().join("a");
    assert_eq!(lines(&a.join("train.csv")), 501);
    assert_eq!(lines(&a.join("test.csv")), 1001);
    assert_eq!(lines(&a.join("truth.csv")), 1001);
    let header = fs::read_to_string(a.join("truth.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 1 + 9);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["n_train"], 500);
    assert_eq!(m["dim"], 1);

    cqrnn(&["gen-data", "--name", "norm_linear", "--seed", "3", "--out", "b"], dir.path());
    for f in ["train.csv", "test.csv", "truth.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cqrnn(&["gen-data", "--name", "bogus"], dir.path())), 1);
    assert_eq!(code(&cqrnn(&["train", "--method", "nope", "--dataset", "norm_linear"], dir.path())), 1);
    assert_eq!(code(&cqrnn(&["train", "--method", "cqrnn"], dir.path())), 1);
    assert_eq!(code(&cqrnn(&["--version"], dir.path())), 0);
    assert_eq!(
        code(&cqrnn(&["train", "--method", "cqrnn", "--train", "missing.csv"], dir.path())),
        2
    );
    fs::write(dir.path().join("bad.csv"), "x0,y,delta\n1,2,1\nfoo,3,0\n").unwrap();
    assert_eq!(code(&cqrnn(&["train", "--method", "cqrnn", "--train", "bad.csv"], dir.path())), 2);
    fs::write(dir.path().join("m.json"), "{\"method\": \"cqrnn\", \"dataset\": \"norm_linear\", \"typo\": 1}").unwrap();
    assert_eq!(code(&cqrnn(&["benchmark", "--manifest", "m.json"], dir.path())), 1);
    assert_eq!(code(&cqrnn(&["ablate", "grid", "--multiples", "2"], dir.path())), 1);
    assert_eq!(code(&cqrnn(&["ablate", "grid", "--grid-sizes", "4"], dir.path())), 1);
    assert_eq!(
        code(&cqrnn(&["train", "--method", "cqrnn", "--dataset", "norm_linear", "--grid-size", "3"], dir.path())),
        1
    );
}

#[test]
fn train_writes_model_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqrnn(
        &["train", "--method", "cqrnn", "--dataset", "norm_nonlinear", "--epochs", "3", "--out", "t"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = dir.path().join("t");
    assert!(t.join("model.json").exists());
    assert_eq!(lines(&t.join("loss_log.csv")), 1 + 3);
    let metrics = fs::read_to_string(t.join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().ends_with(",ok"));
}

#[test]
fn benchmark_then_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("m.json"),
        r#"{"datasets": ["norm_linear", "norm_light"], "methods": ["cqrnn", "excl"], "seeds": [0, 1], "epochs": 2}"#,
    )
    .unwrap();
    let o = cqrnn(&["benchmark", "--manifest", "m.json", "--out", "runs", "--workers", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let runs = dir.path().join("runs");
    assert_eq!(lines(&runs.join("runs.csv")), 1 + 2 * 2 * 2);
    assert_eq!(lines(&runs.join("summary.csv")), 1 + 2 * 2);
    assert_eq!(fs::read_dir(runs.join("models")).unwrap().count(), 8);

    let o = cqrnn(&["report", "runs"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fan = runs.join("report/fan__norm_linear__cqrnn.csv");
    let text = fs::read_to_string(&fan).unwrap();
    assert_eq!(text.lines().count(), 1 + 201);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 1 + 9 + 9);
    assert!(!runs.join("report/fan__norm_light__cqrnn.csv").exists());
    let first = fs::read(&fan).unwrap();
    cqrnn(&["report", "runs"], dir.path());
    assert_eq!(first, fs::read(&fan).unwrap());

    fs::remove_file(runs.join("models/norm_linear__excl__s0.json")).unwrap();
    assert_eq!(code(&cqrnn(&["report", "runs"], dir.path())), 0);
    let summary = fs::read_to_string(runs.join("report/summary.md")).unwrap();
    assert!(summary.contains("Missing checkpoints"));
    assert_eq!(code(&cqrnn(&["report", "runs", "--strict"], dir.path())), 2);
}

#[test]
fn ablation_writes_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = cqrnn(
        &["ablate", "grid", "--datasets", "norm_linear", "--seeds", "0", "--grid-sizes", "9,19", "--train-sizes", "100", "--out", "ab"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("ab/ablate_grid.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    assert!(csv.contains("M=9") && csv.contains("M=19"));
}
