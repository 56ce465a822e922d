use std::path::Path;
use std::process::{Command, Output};

fn cbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbf"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cbf(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_infer_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    ok(&["synth", "--n", "6", "--seed", "3", "--out", s(&data)]);
    let split = std::fs::read_to_string(data.join("split.txt")).unwrap();
    assert_eq!(split.lines().count(), 6);
    for f in [
        "scene_000.cbft",
        "scene_000.truth.png",
        "scene_000.truth.palette",
        "cbf.toml",
    ] {
        assert!(data.join(f).exists(), "{f}");
    }

    let cfg = data.join("cbf.toml");
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--max-iterations",
        "2",
        "--set",
        "k_target=300",
    ]);
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,stage1_oa,stage1_miou,stage2_oa,stage2_miou,corrections,train_loss")
    );
    assert_eq!(lines.count(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["iterations"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config"]["k_target"], 300);
    assert!(run.join("iter_01/params.json").exists());

    let out = tmp.path().join("pred");
    ok(&[
        "infer",
        "--pipeline",
        s(&run),
        "--image",
        s(&data.join("scene_000.cbft")),
        "--out",
        s(&out),
    ]);
    for f in ["stage1.png", "stage2.png", "corrections.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let truth = data.join("scene_000.truth.png");
    let report = ok(&[
        "eval",
        "--truth",
        s(&truth),
        "--pred",
        s(&out.join("stage1.png")),
        s(&truth),
    ]);
    let text = String::from_utf8(report.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[0].starts_with("prediction,oa,miou,iou_"));
    assert_eq!(rows.len(), 3);
    let perfect: Vec<&str> = rows[2].split(',').collect();
    assert_eq!(perfect[1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn training_output_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--n", "5", "--seed", "8", "--out", s(&data)]);
    let cfg = data.join("cbf.toml");
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let run = tmp.path().join(name);
        ok(&[
            "train",
            "--config",
            s(&cfg),
            "--data",
            s(&data),
            "--out",
            s(&run),
            "--max-iterations",
            "2",
            "--set",
            "k_target=200",
        ]);
        files.push((
            std::fs::read(run.join("metrics.csv")).unwrap(),
            std::fs::read(run.join("pipeline.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn refine_repairs_corrupted_probabilities() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "synth",
        "--n",
        "2",
        "--seed",
        "1",
        "--corrupt",
        "--out",
        s(&data),
    ]);
    let out = tmp.path().join("refined");
    ok(&[
        "refine",
        "--probs",
        s(&data.join("scene_000.corrupt.cbft")),
        "--out",
        s(&out),
    ]);
    let truth = data.join("scene_000.truth.png");
    let report = ok(&[
        "eval",
        "--truth",
        s(&truth),
        "--pred",
        s(&out.join("stage1.png")),
        s(&out.join("refined.png")),
    ]);
    let text = String::from_utf8(report.stdout).unwrap();
    let oa: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(oa[1] > oa[0], "{text}");
    let log = std::fs::read_to_string(out.join("corrections.csv")).unwrap();
    assert!(log.lines().count() > 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| cbf(args).status.code();

    assert_eq!(
        code(&["synth", "--n", "0", "--out", s(tmp.path())]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "train",
            "--config",
            "/nonexistent.toml",
            "--data",
            ".",
            "--out",
            s(tmp.path())
        ]),
        Some(1)
    );
    assert_eq!(code(&["frobnicate"]), Some(1));

    let bad = tmp.path().join("pipeline.json");
    std::fs::write(&bad, "{not json").unwrap();
    let img = tmp.path().join("missing.cbft");
    assert_eq!(
        code(&[
            "infer",
            "--pipeline",
            s(&bad),
            "--image",
            s(&img),
            "--out",
            s(tmp.path())
        ]),
        Some(2)
    );

    let data = tmp.path().join("data");
    ok(&["synth", "--n", "3", "--out", s(&data)]);
    let cfg = data.join("cbf.toml");
    let run = tmp.path().join("run");
    let args = [
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out",
        s(&run),
    ];
    assert_eq!(code(&[&args[..], &["--set", "f_t=2.0"]].concat()), Some(1));
    assert_eq!(
        code(&[&args[..], &["--set", "no_such_key=1"]].concat()),
        Some(1)
    );
    assert_eq!(
        code(
            &[
                &args[..],
                &["--set", "learning_rate=1e308", "--set", "k_target=100"]
            ]
            .concat()
        ),
        Some(3)
    );
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "synth",
            "--n",
            "4",
            "--seed",
            "7",
            "--corrupt",
            "--out",
            s(d),
        ]);
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 10);
    for n in names {
        assert_eq!(
            std::fs::read(a.join(&n)).unwrap(),
            std::fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn manifest_paths_exist_and_stage_flag_limits_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    ok(&["synth", "--n", "5", "--seed", "2", "--out", s(&data)]);
    ok(&[
        "train",
        "--config",
        s(&data.join("cbf.toml")),
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--max-iterations",
        "1",
        "--set",
        "k_target=200",
    ]);
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            run.join(p)
        }
    };
    let mut paths = vec![
        manifest["pipeline"].as_str().unwrap().to_string(),
        manifest["metrics"].as_str().unwrap().to_string(),
        manifest["metrics_by_stage"].as_str().unwrap().to_string(),
    ];
    for it in manifest["iterations"].as_array().unwrap() {
        paths.push(it["checkpoint"].as_str().unwrap().to_string());
        for key in ["label_maps", "extra_channels", "logs"] {
            paths.extend(
                it[key]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_str().unwrap().to_string()),
            );
        }
    }
    for p in &paths {
        assert!(resolve(p).exists(), "{p}");
    }
    assert!(Path::new(manifest["data_dir"].as_str().unwrap()).exists());

    let out = tmp.path().join("only1");
    ok(&[
        "infer",
        "--pipeline",
        s(&run),
        "--image",
        s(&data.join("scene_000.cbft")),
        "--out",
        s(&out),
        "--stage",
        "1",
    ]);
    assert!(out.join("stage1.png").exists());
    assert!(!out.join("stage2.png").exists());
}

#[test]
fn refine_honours_custom_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&[
        "synth",
        "--n",
        "1",
        "--seed",
        "4",
        "--corrupt",
        "--out",
        s(&data),
    ]);
    let rules = tmp.path().join("none.rules");
    std::fs::write(&rules, "# no rules at all\n").unwrap();
    let out = tmp.path().join("out");
    let probs = data.join("scene_000.corrupt.cbft");
    ok(&[
        "refine",
        "--probs",
        s(&probs),
        "--rules",
        s(&rules),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        std::fs::read(out.join("stage1.png")).unwrap(),
        std::fs::read(out.join("refined.png")).unwrap()
    );
    let log = std::fs::read_to_string(out.join("corrections.csv")).unwrap();
    assert_eq!(log.lines().count(), 1, "header only");

    std::fs::write(&rules, "rule x1: mis Nowhere always => adoptMaxClass\n").unwrap();
    let code = cbf(&[
        "refine",
        "--probs",
        s(&probs),
        "--rules",
        s(&rules),
        "--out",
        s(&out),
    ])
    .status
    .code();
    assert_eq!(code, Some(1));
}

#[test]
fn data_errors_exit_2() {
    use cbf_core::io::{write_tensor, Tensor};
    let tmp = tempfile::tempdir().unwrap();
    let probs = tmp.path().join("bad.cbft");
    write_tensor(&probs, &Tensor::f32(vec![2, 2, 8], vec![0.5; 32]).unwrap()).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(
        cbf(&["refine", "--probs", s(&probs), "--out", s(&out)])
            .status
            .code(),
        Some(2)
    );

    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["synth", "--n", "1", "--out", s(&a)]);
    let small = tmp.path().join("small.toml");
    let spec = std::fs::read_to_string(a.join("scene.toml")).unwrap();
    std::fs::write(&small, spec.replacen("width = 96", "width = 80", 1)).unwrap();
    ok(&["synth", "--n", "1", "--spec", s(&small), "--out", s(&b)]);
    let code = cbf(&[
        "eval",
        "--truth",
        s(&a.join("scene_000.truth.png")),
        "--pred",
        s(&b.join("scene_000.truth.png")),
    ])
    .status
    .code();
    assert_eq!(code, Some(2));
}

#[test]
fn missing_config_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("nowhere.toml");
    let out = cbf(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(tmp.path()),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.toml"));
}
