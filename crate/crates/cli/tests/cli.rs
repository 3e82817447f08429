use std::fs;
use std::path::Path;

use drf_cli::run;

fn drf(args: &[&str]) -> i32 {
    let mut argv = vec!["drf"];
    argv.extend_from_slice(args);
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small dataset written by `gen`.
fn tiny_data(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    let code = drf(&[
        "gen", "--out", s(&data), "--seed", "3", "--image-dim", "4", "--text-dim", "3", "--n-train", "48",
        "--n-val", "12", "--n-test", "24",
    ]);
    assert_eq!(code, 0);
    data
}

#[test]
fn gen_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let p = tmp.path().join(out);
        assert_eq!(drf(&["gen", "--classes", "3", "--seed", "7", "--n-train", "30", "--out", s(&p)]), 0);
    }
    for split in ["train", "val", "test"] {
        let a = fs::read(tmp.path().join("a").join(format!("{split}.txt"))).unwrap();
        let b = fs::read(tmp.path().join("b").join(format!("{split}.txt"))).unwrap();
        assert_eq!(a, b, "{split}");
    }
    let header = fs::read_to_string(tmp.path().join("a/train.txt")).unwrap();
    assert!(header.contains("# seed=7\n"));
    assert!(header.contains("# num_classes=3\n"));
}

#[test]
fn eval_without_checkpoint_is_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tiny_data(tmp.path());
    assert_eq!(drf(&["eval", "--data", s(&data)]), 3);
    assert_eq!(drf(&["eval", "--data", s(&data), "--checkpoint", s(&tmp.path().join("none.txt"))]), 3);
    assert_eq!(drf(&["train", "--data", s(&tmp.path().join("nope"))]), 3);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(drf(&["gen", "--bogus"]), 2);
    assert_eq!(drf(&["frobnicate"]), 2);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[train]\nepochz = 1\n").unwrap();
    assert_eq!(drf(&["--config", s(&bad), "gen", "--out", s(&tmp.path().join("d"))]), 2);
    assert_eq!(drf(&["--config", s(&tmp.path().join("missing.toml")), "gen"]), 3);
    let data = tiny_data(tmp.path());
    assert_eq!(drf(&["train", "--data", s(&data), "--model", "transformer"]), 2);
    assert_eq!(drf(&["train", "--data", s(&data), "--dr", "1.5"]), 2);
    assert_eq!(drf(&["train", "--data", s(&data), "--gate", "median"]), 2);
}

#[test]
fn train_then_eval_writes_echoed_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tiny_data(tmp.path());
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[train]\nepochs = 2\nbatch_size = 8\nn_min = 8\nqueue_capacity = 32\n").unwrap();
    for model in ["drf", "baseline"] {
        let run_dir = tmp.path().join(model);
        let code = drf(&[
            "--config", s(&cfg), "train", "--data", s(&data), "--model", model, "--out", s(&run_dir), "--dr", "0.5",
        ]);
        assert_eq!(code, 0);
        let log = fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
        assert!(log.contains("# epochs=2\n"));
        assert!(log.contains("# data_seed=3\n"));
        assert!(log.contains("# disruption_dr=0.5\n"));
        assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 3);

        let eval_dir = tmp.path().join(format!("{model}-eval"));
        let ckpt = run_dir.join("checkpoint.txt");
        let code = drf(&[
            "eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(&eval_dir), "--setting", "C", "--dr", "1",
        ]);
        assert_eq!(code, 0);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_dir.join("eval.json")).unwrap()).unwrap();
        assert_eq!(json["model"], model);
        let acc = json["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(json["config"]["disruption_setting"], "C");
        assert_eq!(json["config"]["epochs"], "2");
        let total: u64 = json["confusion"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(total, 24);
    }
}

#[test]
fn divergence_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tiny_data(tmp.path());
    let code = drf(&[
        "train", "--data", s(&data), "--model", "baseline", "--epochs", "2", "--lr-rest", "1e300", "--lr-encoders", "1e300",
        "--out", s(&tmp.path().join("r")),
    ]);
    assert_eq!(code, 4);
    assert!(!tmp.path().join("r").join("checkpoint.txt").exists());
}

#[test]
fn sweep_grid_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tiny_data(tmp.path());
    let out = tmp.path().join("sweep");
    let code = drf(&[
        "sweep", "--data", s(&data), "--out", s(&out), "--dr", "0.2,0.4,0.6,0.8,1.0", "--settings", "C,D,C+D",
        "--seeds", "0", "--epochs", "1", "--batch-size", "16", "--n-min", "8", "--queue-capacity", "16",
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.contains("# sweep_drs=0.2,0.4,0.6,0.8,1\n"));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2 * 3 * 5);
    for model in ["drf", "baseline"] {
        for setting in ["C", "D", "C+D"] {
            for dr in ["0.2", "0.4", "0.6", "0.8", "1"] {
                let prefix = format!("{model},random,{setting},-,{dr},0,");
                assert!(rows.iter().any(|r| r.starts_with(&prefix)), "{prefix}");
            }
        }
    }

    let rep = tmp.path().join("report");
    assert_eq!(drf(&["report", "--results", s(&out.join("results.csv")), "--out", s(&rep), "--svg"]), 0);
    let summary = fs::read_to_string(rep.join("summary.txt")).unwrap();
    // No dr = 0 cells in this grid, so every drop is undefined.
    assert!(summary.contains("C+D: drop(drf) < drop(baseline): n/a"));
    assert!(rep.join("series_drf_CD.csv").exists());
    assert!(rep.join("accuracy_C.svg").exists());

    // Same input, same outputs.
    let rep2 = tmp.path().join("report2");
    assert_eq!(drf(&["report", "--results", s(&out.join("results.csv")), "--out", s(&rep2), "--svg"]), 0);
    for entry in fs::read_dir(&rep).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(rep.join(&name)).unwrap(), fs::read(rep2.join(&name)).unwrap());
    }
}

#[test]
fn report_names_malformed_row() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("results.csv");
    fs::write(
        &path,
        "# k=v\nmodel,strategy,setting,target,dr,seed,acc,macro_f1\ndrf,random,C,-,0,0,0.9,0.9\ndrf,random,C,-,zero,0,0.9,0.9\n",
    )
    .unwrap();
    assert_eq!(drf(&["report", "--results", s(&path), "--out", s(&tmp.path().join("r"))]), 2);
    assert_eq!(drf(&["report", "--out", s(&tmp.path().join("r"))]), 3);
}

#[test]
fn report_from_sweep_with_endpoints_has_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("results.csv");
    let mut text = String::from("model,strategy,setting,target,dr,seed,acc,macro_f1\n");
    for (model, a0, a1) in [("drf", 0.95, 0.9), ("baseline", 0.95, 0.8)] {
        text.push_str(&format!("{model},random,C+D,-,0,0,{a0},{a0}\n{model},random,C+D,-,1,0,{a1},{a1}\n"));
    }
    fs::write(&path, text).unwrap();
    let out = tmp.path().join("r");
    assert_eq!(drf(&["report", "--results", s(&path), "--out", s(&out)]), 0);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("C+D: drop(drf) < drop(baseline): yes"), "{summary}");
}
