use std::path::Path;
use std::process::{Command, Output};

fn se3kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_se3kit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluation_commands() {
    let o = se3kit(&["sh", "--l", "0", "--m", "0", "--theta", "1", "--phi", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0.282094791774\n");

    let o = se3kit(&["wigner", "--l", "1", "--alpha", "0", "--beta", "0", "--gamma", "0"]);
    assert_eq!(stdout(&o), "1 0 0\n0 1 0\n0 0 1\n");

    let o = se3kit(&["wigner", "--l", "1", "--alpha", "0.3", "--beta", "-1.1", "--gamma", "2"]);
    let rows: Vec<Vec<f64>> = stdout(&o).lines().map(|l| l.split(' ').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!((rows.len(), rows[0].len()), (3, 3));
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| rows[i][k] * rows[j][k]).sum();
            assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-10);
        }
    }
}

#[test]
fn exit_codes() {
    let o = se3kit(&["sh", "--l", "0", "--m", "0", "--theta", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--phi"), "{}", stderr(&o));

    let o = se3kit(&["basis", "--max-degree", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--max-degree"));

    let o = se3kit(&["predict", "--params", "/nonexistent/params.json", "--data", "/nonexistent/g.json"]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(se3kit(&["--help"]).status.code(), Some(0));
}

#[cfg(not(feature = "sabotage"))]
#[test]
fn negative_control_flag_is_not_in_release_builds() {
    let o = se3kit(&["check-equivariance", "--sabotage"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_equivariance_default_run() {
    let o = se3kit(&["check-equivariance"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = stdout(&o);
    for stage in ["pairwise_conv", "layer0.attention", "layer1.norm", "final_conv", "pooling", "output[0]"] {
        assert!(report.contains(stage), "missing {stage} in\n{report}");
    }
    let o = se3kit(&["check-equivariance", "--model", "tfn", "--degrees", "4", "--trials", "5", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("layer0.conv"));
}

#[test]
fn featurize_train_predict() {
    let dir = tempfile::tempdir().unwrap();
    let xyz = dir.path().join("mols.xyz");
    let mut text = String::new();
    for i in 0..12 {
        let d = 0.7 + 0.05 * i as f64;
        text.push_str(&format!("3\ntarget={:.6}\nO 0 0 0\nH 0 0 {d}\nH {d} 0 0\n", 1.0 / d));
    }
    std::fs::write(&xyz, text).unwrap();
    let graphs = dir.path().join("graphs.json");
    let o = se3kit(&["featurize", "--in", path(&xyz), "--rule", "radius:1.5", "--out", path(&graphs)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": {"num_layers": 1, "channels": 4, "num_degrees": 2, "heads": 2}, "train": {"epochs": 3, "batch_size": 4}}"#).unwrap();
    let params = dir.path().join("params.json");
    let metrics = dir.path().join("metrics.csv");
    let train = |out: &Path| {
        se3kit(&["train", "--data", path(&graphs), "--config", path(&cfg), "--out", path(out), "--metrics", path(&metrics), "--seed", "5"])
    };
    let o = train(&params);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let again = dir.path().join("again.json");
    assert_eq!(train(&again).status.code(), Some(0));
    assert_eq!(std::fs::read(&params).unwrap(), std::fs::read(&again).unwrap());

    let preds = dir.path().join("preds.csv");
    let o = se3kit(&["predict", "--params", path(&params), "--data", path(&graphs), "--out", path(&preds)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(csv.lines().next(), Some("graph,target"));
    assert_eq!(csv.lines().count(), 13);
}
