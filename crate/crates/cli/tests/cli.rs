use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn coxmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coxmi"))
        .args(args)
        .env("COXMI_WORKERS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .expect("run coxmi")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn crossval_on_bundled_sample_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv");
    let o = coxmi(&[
        "crossval", "--input", &data("sample.csv"), "--spec", &data("spec.toml"),
        "--method", "ap1,ap2A", "--k", "3", "--folds", "4", "--output", &s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.csv", "report.json", "predictions_ap1.csv", "predictions_ap2A.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("method,k,horizon,stratum,metric,value"));
    for t in ["ap1,3,12,", "ap1,3,60,", "ap2A,3,12,", "ap2A,3,60,"] {
        assert!(report.contains(t), "no rows for {t}");
    }
}

#[test]
fn k1_prediction_files_coincide_across_methods() {
    let dir = tempfile::tempdir().unwrap();
    let run = |m: &str| {
        let out = dir.path().join(m);
        let o = coxmi(&[
            "crossval", "--input", &data("sample.csv"), "--spec", &data("spec.toml"),
            "--method", m, "--k", "1", "--folds", "5", "--seed", "3", "--output", &s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join(format!("predictions_{m}.csv"))).unwrap()
    };
    assert_eq!(run("ap1"), run("ap2A"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "k = 2\nfolds = 3\nmethods = [\"ap2B\"]\n").unwrap();
    let out = dir.path().join("cv");
    let o = coxmi(&[
        "crossval", "--input", &data("sample.csv"), "--spec", &data("spec.toml"),
        "--method", "ap1", "--k", "7", "--config", &s(&cfg), "--output", &s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"k\": 2"), "{manifest}");
    assert!(out.join("predictions_ap2B.csv").is_file());
    assert!(!out.join("predictions_ap1.csv").exists());
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let o = coxmi(&[
        "simulate", "--scenario", "2", "--mechanism", "mar", "--n", "120", "--simulations", "2",
        "--replicates", "2", "--k", "2", "--folds", "4", "--output", &s(&first),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let second = dir.path().join("b");
    let o = coxmi(&["--workers", "1", "simulate", "--manifest", &s(&first.join("manifest.json")), "--output", &s(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["report.csv", "report.json", "manifest.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn fit_then_predict_complete_rows() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let o = coxmi(&[
        "fit", "--input", &data("sample.csv"), "--spec", &data("spec.toml"),
        "--method", "ap2B", "--k", "3", "--output", &s(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    // complete rows only
    let text = std::fs::read_to_string(data("sample.csv")).unwrap();
    let mut lines = text.lines();
    let mut new = String::from(lines.next().unwrap());
    new.push('\n');
    for l in lines.filter(|l| !l.contains("NA")).take(5) {
        new.push_str(l);
        new.push('\n');
    }
    let input = dir.path().join("new.csv");
    std::fs::write(&input, new).unwrap();
    let pred = dir.path().join("pred.csv");
    let o = coxmi(&["predict", "--model", &s(&model), "--input", &s(&input), "--spec", &data("spec.toml"), "--output", &s(&pred)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(&pred).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "subject,S(12),S(60)");
    assert_eq!(rows.len(), 6);
    for r in &rows[1..] {
        let v: Vec<f64> = r.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!(0.0 <= v[1] && v[1] <= v[0] && v[0] <= 1.0, "{r}");
    }

    // rows with missing predictors need the calibration data
    let o = coxmi(&["predict", "--model", &s(&model), "--input", &data("sample.csv"), "--spec", &data("spec.toml")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing predictors"));
}

#[test]
fn predict_with_calibration_then_assess() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred");
    let o = coxmi(&[
        "predict", "--calibration", &data("sample.csv"), "--input", &data("sample.csv"), "--spec", &data("spec.toml"),
        "--method", "ap1", "--k", "2", "--output", &s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = out.join("predictions_ap1.csv");
    let o = coxmi(&["assess", "--predictions", &s(&preds), "--input", &data("sample.csv"), "--spec", &data("spec.toml")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.starts_with("method,k,horizon,stratum,metric,value"));
    assert!(report.contains("ap1,2,12,all,brier_mean,"));
}

#[test]
fn export_dataset_round_trips_through_crossval() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("exp");
    let o = coxmi(&["simulate", "--scenario", "4", "--mechanism", "mcar", "--n", "80", "--export-dataset", &s(&exp)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = coxmi(&[
        "crossval", "--input", &s(&exp.join("data.csv")), "--spec", &s(&exp.join("spec.toml")),
        "--k", "2", "--folds", "4", "--output", &s(&dir.path().join("cv")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let o = coxmi(&["simulate", "--scenario", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a scenario"));
    let o = coxmi(&["crossval", "--input", &data("sample.csv"), "--spec", &data("spec.toml"), "--horizons", "60,12"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = coxmi(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,status,x1,x2,x3,x4\n5,2,0,0,0,0\n6,1,1,1,1,1\n").unwrap();
    let o = coxmi(&["crossval", "--input", &s(&bad), "--spec", &data("spec.toml"), "--output", &s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("status"), "{}", stderr(&o));
}

#[test]
fn bundled_config_parses() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv");
    let o = Command::new(env!("CARGO_BIN_EXE_coxmi"))
        .current_dir(&root)
        .args(["crossval", "--config", "crates/cli/data/crossval.toml", "--k", "2", "--output", &s(&out)])
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    // the file sets k = 5 and wins over the flag
    assert!(std::fs::read_to_string(out.join("manifest.json")).unwrap().contains("\"k\": 5"));
}
