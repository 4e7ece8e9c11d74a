use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlm_core::{ModelDocument, PredictMode};

fn mlm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlm"))
}

/// Two regions split on `a`, plus a three-level nominal column.
fn write_data(dir: &Path, n: usize, classify: bool) -> PathBuf {
    let mut s = String::from("a,b,grp,y\n");
    let mut state: u64 = 0x2545F4914F6CDD1D;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..n {
        let a = 4.0 * next() - 2.0;
        let b = 4.0 * next() - 2.0;
        let g = ["red", "green", "blue"][(next() * 3.0) as usize % 3];
        let shift = if g == "red" { 0.5 } else { 0.0 };
        let y = if a > 0.0 {
            1.0 + 2.0 * a - b + shift
        } else {
            -1.0 - a + 0.5 * b
        };
        let y = if classify {
            f64::from(u8::from(y > 0.3))
        } else {
            y
        };
        s.push_str(&format!("{a},{b},{g},{y}\n"));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn write_config(dir: &Path, task: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"
seed = 3
out_dir = "out"

[data]
train = "data.csv"
target = "y"
task = "{task}"

[mlp]
widths = [8, 8]
epochs = 40

[cells]
k = 2
m = 20

[interpret]
xi = 0.7
psi = 0.9
eta = 3
{extra}
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    mlm()
        .args(args)
        .arg("--config")
        .arg(config)
        .env("MLM_LOG", "error")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn setup(task: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path(), 300, task == "classification");
    let cfg = write_config(dir.path(), task, "");
    (dir, cfg)
}

#[test]
fn train_writes_reports_and_is_deterministic() {
    let (dir, cfg) = setup("regression");
    let stdout = ok(&run(&["train"], &cfg));
    let rep: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(rep["cells"].as_u64().unwrap() <= 4);
    assert_eq!(rep["epics"].as_u64().unwrap(), 2);
    let out = dir.path().join("out");
    for f in [
        "model.json",
        "train_report.json",
        "coefficients.csv",
        "epic_sizes.svg",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let first = std::fs::read(out.join("model.json")).unwrap();
    ok(&run(&["train"], &cfg));
    assert_eq!(std::fs::read(out.join("model.json")).unwrap(), first);

    let other = dir.path().join("other");
    ok(&run(
        &["train", "--seed", "4", "--out", other.to_str().unwrap()],
        &cfg,
    ));
    assert_ne!(std::fs::read(other.join("model.json")).unwrap(), first);
}

fn parse_predictions(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn predict_matches_library_and_binds_by_name() {
    let (dir, cfg) = setup("regression");
    ok(&run(&["train"], &cfg));
    let data = dir.path().join("data.csv");
    let soft = ok(&run(
        &["predict", "--input", data.to_str().unwrap(), "--posteriors"],
        &cfg,
    ));
    let (header, rows) = parse_predictions(&soft);
    assert_eq!(header, ["row", "prediction", "epic", "gamma_0", "gamma_1"]);
    assert_eq!(rows.len(), 300);

    let doc = ModelDocument::<f64>::load(dir.path().join("out/model.json")).unwrap();
    let table = mlm_core::data::Table::read(&data).unwrap();
    let x = doc.schema.encode::<f64>(&table).unwrap();
    let want = mlm_core::pipeline::mlm_predict(&doc.mlm, x.view(), PredictMode::Soft).unwrap();
    for (r, w) in rows.iter().zip(&want) {
        assert_eq!(r[1].to_bits(), w.to_bits());
    }

    // hard and soft differ only where the top posterior is below one
    let hard = ok(&run(
        &[
            "predict",
            "--input",
            data.to_str().unwrap(),
            "--posteriors",
            "--mode",
            "hard",
        ],
        &cfg,
    ));
    let (_, hard_rows) = parse_predictions(&hard);
    for (s, h) in rows.iter().zip(&hard_rows) {
        if s[1] != h[1] {
            assert!(s[3].max(s[4]) < 1.0);
        }
    }

    // reorder the columns
    let text = std::fs::read_to_string(&data).unwrap();
    let mut shuffled = String::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split(',').collect();
        shuffled.push_str(&format!("{},{},{},{}\n", f[2], f[3], f[0], f[1]));
    }
    let moved = dir.path().join("moved.csv");
    std::fs::write(&moved, shuffled).unwrap();
    let again = ok(&run(
        &[
            "predict",
            "--input",
            moved.to_str().unwrap(),
            "--posteriors",
        ],
        &cfg,
    ));
    assert_eq!(again, soft);
}

#[test]
fn schema_mismatch_exit_code() {
    let (dir, cfg) = setup("regression");
    ok(&run(&["train"], &cfg));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,c,grp\n1,2,red\n").unwrap();
    let out = run(&["predict", "--input", bad.to_str().unwrap()], &cfg);
    assert_eq!(out.status.code(), Some(6));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"b\"") && err.contains("\"c\""), "{err}");
}

#[test]
fn evaluate_reports_train_and_test() {
    let (dir, cfg) = setup("classification");
    ok(&run(&["train"], &cfg));
    let stdout = ok(&run(&["evaluate"], &cfg));
    let rep: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    for part in ["train", "test"] {
        for model in ["mlp", "mlm_cell", "mlm_epic"] {
            let auc = rep[part][model]["auc"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&auc));
            assert!(rep[part][model]["f1"].as_f64().is_some());
        }
    }
    assert_eq!(rep["train"]["mlm_epic"]["n"].as_u64().unwrap(), 240);
    assert_eq!(rep["test"]["mlm_epic"]["n"].as_u64().unwrap(), 60);
    assert!(dir.path().join("out/evaluation.json").exists());
}

#[test]
fn explain_writes_lds_and_pr_reports() {
    let (dir, cfg) = setup("regression");
    ok(&run(&["train"], &cfg));
    let stdout = ok(&run(&["explain"], &cfg));
    assert!(stdout.contains("LDS EPIC 0"));
    let ex = dir.path().join("out/explain");
    let lds: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ex.join("lds.json")).unwrap()).unwrap();
    assert_eq!(lds.as_array().unwrap().len(), 2);
    let pr: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ex.join("pr.json")).unwrap()).unwrap();
    for entry in pr.as_array().unwrap() {
        for c in entry["conditions"].as_array().unwrap() {
            assert!(c["purity"].as_f64().unwrap() >= 0.9);
            assert!(c["covered"].as_u64().unwrap() > 3);
            assert_eq!(
                c["rows"].as_array().unwrap().len() as u64,
                c["covered"].as_u64().unwrap()
            );
        }
    }
    assert!(ex.join("coefficients.csv").exists());
    assert!(ex.join("pr.txt").exists());

    let out = run(&["explain", "--epic", "7"], &cfg);
    assert_eq!(out.status.code(), Some(8));
}

#[test]
fn single_epic_explains_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path(), 200, false);
    let cfg = write_config(dir.path(), "regression", "[mixture]\nj = 1\n");
    ok(&run(&["train"], &cfg));
    ok(&run(&["explain", "--method", "lds"], &cfg));
    let text = std::fs::read_to_string(dir.path().join("out/explain/lds.json")).unwrap();
    let lds: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(lds[0]["trivial"], true);
    assert_eq!(lds[0]["rate"].as_f64().unwrap(), 1.0);
}

#[test]
fn cv_k_single_candidate() {
    let (dir, cfg) = setup("regression");
    let stdout = ok(&run(&["cv-k", "--grid", "1", "--folds", "2"], &cfg));
    let res: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(res["chosen"].as_u64().unwrap(), 1);
    assert_eq!(res["rows"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("out/cv_k.csv").exists());
}

#[test]
fn error_classes_have_distinct_codes() {
    let (dir, cfg) = setup("regression");
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(
        &bad_cfg,
        "[data]\ntrain = \"data.csv\"\ntarget = \"y\"\ntask = \"regression\"\nnonsense = 1\n",
    )
    .unwrap();
    assert_eq!(run(&["train"], &bad_cfg).status.code(), Some(2));

    let missing = write_config(dir.path(), "regression", "");
    std::fs::remove_file(dir.path().join("data.csv")).unwrap();
    assert_eq!(run(&["train"], &missing).status.code(), Some(3));

    write_data(dir.path(), 300, false);
    ok(&run(&["train"], &cfg));
    let model = dir.path().join("out/model.json");
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(&model, &text[..text.len() / 3]).unwrap();
    let out = run(&["evaluate"], &cfg);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));
    std::fs::write(
        &model,
        text.replacen("\"format_version\": 1", "\"format_version\": 99", 1),
    )
    .unwrap();
    let out = run(&["evaluate"], &cfg);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 99"));
}
