use std::path::Path;
use std::process::{Command, Output};

fn blm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blm-probe")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen(dir: &Path, n: &str) {
    let o = blm(&["gen-synthetic", "--data-dir", "data", "--episodes", n], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn inspect_model_prints_the_layer_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = blm(&["inspect-model", "--model", "Baseline_FFNN"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Total params: 11,800,320"), "{text}");
    let o = blm(&["inspect-model", "--model", "dual_vae_2d", "--reshape", "24x32", "--batch", "7"], dir.path());
    assert!(stdout(&o).contains("[7, 1, 7, 24, 32]"));
}

#[test]
fn train_evaluate_and_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "40");
    for t in ["I", "II", "III"] {
        assert!(d.join(format!("data/type_{t}.jsonl")).exists());
        assert!(d.join(format!("data/type_{t}.blme")).exists());
    }

    let o = blm(
        &[
            "multirun",
            "--model",
            "VAE_2D",
            "--reshape",
            "32x24",
            "--epochs",
            "1",
            "--seed-list",
            "3,4",
            "--data-dir",
            "data",
            "--out-dir",
            "out",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("over 2 seed(s)"));
    let report = d.join("out/reports/VAE_2D_32x24_I-I.json");
    assert!(report.exists());
    assert!(d.join("out/checkpoints/VAE_2D_32x24_I-I_seed4.blmc").exists());

    let o = blm(&["evaluate", "--checkpoint", "out/checkpoints/VAE_2D_32x24_I-I_seed3.blmc", "--data-dir", "data"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["evaluation"]["n"], 4);

    let o = blm(&["error-analysis", report.to_str().unwrap()], d);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("system,f1,Coord,WNA,AE,WN1,WN2\n"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "30");
    std::fs::write(d.join("run.toml"), "model = \"Baseline_CNN_1DxSeq\"\nepochs = 1\nbatch = 10\nseeds = [9]\n")
        .unwrap();
    let o = blm(&["train", "--config", "run.toml", "--data-dir", "data", "--out-dir", "o", "--test-type", "III"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("o/checkpoints/Baseline_CNN_1DxSeq_I-III_seed9.blmc").exists());
    assert!(d.join("o/Baseline_CNN_1DxSeq_I-III_seed9.log.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "20");
    let code = |args: &[&str]| blm(args, d).status.code();

    assert_eq!(code(&["train", "--model", "VAE_2D", "--reshape", "8x96", "--data-dir", "data"]), Some(2));
    assert_eq!(code(&["train", "--data-dir", "data"]), Some(2));
    std::fs::write(d.join("bad.toml"), "model = \"VAE_1DxSeq\"\nbatch = 0\n").unwrap();
    assert_eq!(code(&["train", "--config", "bad.toml", "--data-dir", "data"]), Some(2));
    assert_eq!(code(&["multirun", "--model", "VAE_1DxSeq", "--train-size", "999", "--data-dir", "data"]), Some(2));

    // drop a sentence the manifest needs
    let manifest = std::fs::read_to_string(d.join("data/type_I.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    let missing = first["context"][0].as_str().unwrap().to_string();
    std::fs::create_dir(d.join("broken")).unwrap();
    std::fs::write(d.join("broken/type_I.jsonl"), &manifest).unwrap();
    let store = blm_probe::data::read_store(&d.join("data/type_I.blme")).unwrap();
    let mut pruned = blm_probe::data::EmbeddingStore::new(store.dim());
    for (id, v) in store.iter().filter(|(id, _)| *id != missing) {
        pruned.insert(id, v).unwrap();
    }
    blm_probe::data::write_store(&d.join("broken/type_I.blme"), &pruned).unwrap();
    let o = blm(&["train", "--model", "VAE_1DxSeq", "--epochs", "1", "--data-dir", "broken"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&missing));

    let mut poisoned = blm_probe::data::EmbeddingStore::new(store.dim());
    for id in store.ids() {
        poisoned.insert(id, &vec![f32::NAN; store.dim()]).unwrap();
    }
    blm_probe::data::write_store(&d.join("broken/type_I.blme"), &poisoned).unwrap();
    let o = blm(&["train", "--model", "VAE_1DxSeq", "--epochs", "1", "--batch", "100", "--data-dir", "broken"], d);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch 1, batch 1"));

    std::fs::write(d.join("broken/type_I.blme"), b"BLME").unwrap();
    assert_eq!(code(&["train", "--model", "VAE_1DxSeq", "--data-dir", "broken"]), Some(3));
}
