use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairsurv_core::synth::generate_synthetic;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairsurv"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Runs a command that must succeed and returns the paths it reported.
fn ok(args: &[&str]) -> Vec<PathBuf> {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap().lines().map(PathBuf::from).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_csv(dir: &Path, n: usize, p: usize, seed: u64) -> PathBuf {
    let beta: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { 0.6 } else { -0.4 }).collect();
    let data = generate_synthetic(n, p, &beta, 0.3, seed).unwrap().data;
    let path = dir.join(format!("d{n}x{p}.csv"));
    fairsurv::dataset::save_csv(&path, &data).unwrap();
    path
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn synth_writes_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["synth", "--n", "2000", "--beta", "0.5,-1", "--seed", "3", "--out", s(dir.path())]);
    assert_eq!(out.len(), 2);
    let csv = read(&dir.path().join("data/synthetic.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2001);
    assert!(lines.iter().all(|l| l.split(',').count() == 4));
    let truth: serde_json::Value = serde_json::from_str(&read(&dir.path().join("data/synthetic.truth.json"))).unwrap();
    assert_eq!(truth["beta_true"], serde_json::json!([0.5, -1.0]));

    ok(&["synth", "--misaligned", "--name", "mis", "--out", s(dir.path())]);
    let truth: serde_json::Value = serde_json::from_str(&read(&dir.path().join("data/mis.truth.json"))).unwrap();
    assert_eq!(truth["generator"], "planted-misalignment");
}

#[test]
fn fit_with_preset_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(300, 7, &[0.3, -0.2, 0.1, 0.0, 0.4, -0.5, 0.2], 0.5, 1).unwrap().data;
    let mut text = String::from("fin,age,race,wexp,mar,paro,prio,week,arrest\n");
    for r in data.records() {
        let f: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        text += &format!("{},{},{}\n", f.join(","), r.time, r.event as u8);
    }
    let csv = dir.path().join("rossi.csv");
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("out");

    let written = ok(&["fit", "--data", s(&csv), "--preset", "rossi", "--variant", "plain", "--epochs", "20", "--out", s(&out)]);
    let model = written.iter().find(|p| p.starts_with(out.join("models"))).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(model)).unwrap();
    assert_eq!(json["beta"].as_array().unwrap().len(), 7);
    assert_eq!(json["feature_names"][6], "prio");

    let written = ok(&["fit", "--data", s(&csv), "--preset", "rossi", "--epochs", "3", "--out", s(&out), "--export-similarity"]);
    let trace = written.iter().find(|p| p.starts_with(out.join("traces"))).unwrap();
    let trace = read(trace);
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "epoch,utility,surrogate,fndcg,grad_norm");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| !r[2].is_empty() && !r[3].is_empty()));
    let sim = written.iter().find(|p| p.extension().is_some_and(|e| e == "bin")).unwrap();
    assert_eq!(fairsurv::formats::read_similarity(sim).unwrap().n(), 300);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = run(&["fit", "--data", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    assert_eq!(run(&["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "x,time,event\n1,2,1\n2,-1,0\n").unwrap();
    let out = run(&["fit", "--data", s(&csv), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    // a model trained on two features cannot score three
    let two = synth_csv(dir.path(), 80, 2, 1);
    let three = synth_csv(dir.path(), 80, 3, 2);
    let written = ok(&["fit", "--data", s(&two), "--variant", "plain", "--epochs", "2", "--out", s(dir.path())]);
    let out = run(&["evaluate", "--data", s(&three), "--model", s(&written[0]), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn evaluate_reports_each_fold_and_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 1000, 2, 4);
    let written = ok(&["evaluate", "--data", s(&csv), "--epochs", "2", "--compare", "plain", "--out", s(dir.path())]);
    let report = written.iter().find(|p| p.extension().is_some_and(|e| e == "csv") && !s(p).contains("compare")).unwrap();
    let text = read(report);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "fold,FNDCG@10%,C-index%,Brier%,tAUC%");
    assert_eq!(lines.len(), 7);
    for l in &lines[1..] {
        for v in l.split(',').skip(1) {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=100.0).contains(&v));
        }
    }
    assert!(written.iter().any(|p| s(p).contains("compare")));
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 150, 2, 5);
    let sweep = |workers: &str, out: &Path| -> String {
        let o = bin()
            .env("FAIRSURV_WORKERS", workers)
            .args(["sweep", "--data", s(&csv), "--gamma-grid", "0.1,1", "--k-grid", "3,5", "--folds", "3", "--epochs", "2", "--out", s(out)])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read(&out.join("sweeps/sweep-fair.csv"))
    };
    let a = sweep("1", &dir.path().join("a"));
    let b = sweep("3", &dir.path().join("b"));
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "variant,gamma,k,fold,metric,value");
    assert_eq!(lines.len() - 1, 2 * 2 * 3 * 4);
}

#[test]
fn ablation_pairs_variants_on_the_same_folds() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 200, 2, 6);
    ok(&["ablation", "--data", s(&csv), "--epochs", "2", "--folds", "3", "--k", "5", "--include-plain", "--out", s(dir.path())]);
    let text = read(&dir.path().join("reports/ablation.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "fold,fndcg@5_fair,fndcg@5_lipschitz,c_index_fair,c_index_lipschitz");
    assert_eq!(lines.len(), 1 + 3 + 1);
    let summary = read(&dir.path().join("reports/ablation_summary.csv"));
    assert_eq!(summary.lines().count(), 1 + 3);
    assert!(summary.contains("\nplain,"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_csv(dir.path(), 100, 2, 7);
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "output = {:?}\n[data]\npath = {:?}\n[train]\ngamma = 2.0\nepochs = 2\nvariant = \"lipschitz\"\n",
            s(&dir.path().join("cfgout")),
            s(&csv)
        ),
    )
    .unwrap();
    let written = ok(&["fit", "--config", s(&cfg), "--gamma", "3"]);
    let model = s(&written[0]);
    assert!(model.contains("cfgout") && model.contains("lipschitz-g3-"), "{model}");

    std::fs::write(&cfg, "[train]\ntemprature = 0.1\n").unwrap();
    assert_eq!(run(&["fit", "--config", s(&cfg)]).status.code(), Some(2));
}
