//! End-to-end checks of the command-line interface: outputs, exit codes,
//! byte determinism, and the config-file/flag precedence.

use std::path::Path;
use std::process::{Command, Output};

fn qrbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn build_dataset(dir: &Path, seed: &str) {
    let out = qrbm(&[
        "dataset", "--source", "synth", "--n", "120", "--side", "16", "--bits", "16", "--seed",
        seed, "--out",
        dir.to_str().unwrap(),
    ]);
    assert_success(&out);
}

#[test]
fn dataset_writes_all_artifacts_and_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    build_dataset(&a, "7");
    build_dataset(&b, "7");
    for name in ["pca.txt", "quantizer.txt", "train.cds", "test.cds", "preview.pgm", "preview.txt", "manifest.txt"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name} differs between runs");
    }
    let c = tmp.path().join("c");
    build_dataset(&c, "8");
    assert_ne!(read(&a.join("train.cds")), read(&c.join("train.cds")));
    let preview = String::from_utf8(read(&a.join("preview.txt"))).unwrap();
    assert!(preview.contains("bit sum"), "caption: {preview}");
}

#[test]
fn dataset_rejects_bits_not_multiple_of_eight() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qrbm(&[
        "dataset", "--source", "synth", "--bits", "63", "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiple of 8"));
}

#[test]
fn train_runs_and_rejects_shape_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    build_dataset(&ds, "3");
    let run = tmp.path().join("run");
    let out = qrbm(&[
        "train", "--data", ds.to_str().unwrap(), "--algo", "discriminative", "--rbm", "17x6",
        "--batch", "20", "--epochs", "4", "--seed", "1", "--out", run.to_str().unwrap(),
    ]);
    assert_success(&out);
    let metrics = String::from_utf8(read(&run.join("metrics.csv"))).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    assert!(run.join("ckpt_00003.rbm").exists());
    assert!(run.join("final.rbm").exists());
    assert!(run.join("manifest.txt").exists());

    let bad = qrbm(&[
        "train", "--data", ds.to_str().unwrap(), "--rbm", "12x12", "--out",
        tmp.path().join("bad").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("12 visible units") && msg.contains("16 feature bits"), "{msg}");
}

#[test]
fn train_is_deterministic_and_annealed_switch_shows_in_the_log() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    build_dataset(&ds, "5");
    let args = |out: &Path| {
        vec![
            "train".to_string(),
            "--data".into(),
            ds.to_str().unwrap().into(),
            "--algo".into(),
            "annealed_hybrid".into(),
            "--switch-epoch".into(),
            "2".into(),
            "--sampler".into(),
            "exact".into(),
            "--rbm".into(),
            "17x5".into(),
            "--batch".into(),
            "20".into(),
            "--epochs".into(),
            "4".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let r1 = tmp.path().join("r1");
    let r2 = tmp.path().join("r2");
    for out in [&r1, &r2] {
        let argv: Vec<String> = args(out);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        assert_success(&qrbm(&argv));
    }
    assert_eq!(read(&r1.join("metrics.csv")), read(&r2.join("metrics.csv")));
    assert_eq!(read(&r1.join("final.rbm")), read(&r2.join("final.rbm")));
    let metrics = String::from_utf8(read(&r1.join("metrics.csv"))).unwrap();
    let algos: Vec<&str> =
        metrics.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(algos, vec!["sampler_generative", "sampler_generative", "discriminative", "discriminative"]);
}

#[test]
fn audit_subcommands_emit_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    build_dataset(&ds, "11");
    let run = tmp.path().join("run");
    assert_success(&qrbm(&[
        "train", "--data", ds.to_str().unwrap(), "--rbm", "17x4", "--batch", "25", "--epochs",
        "3", "--seed", "2", "--out", run.to_str().unwrap(),
    ]));
    let beta = tmp.path().join("beta");
    assert_success(&qrbm(&[
        "audit", "beta", "--checkpoints", run.to_str().unwrap(), "--sampler", "sa",
        "--sa-beta-start", "0.5", "--sa-beta-end", "1.0", "--sa-sweeps", "60", "--beta0", "1.0",
        "--n", "400", "--out", beta.to_str().unwrap(), "--seed", "3",
    ]));
    let beta_csv = String::from_utf8(read(&beta.join("beta.csv"))).unwrap();
    assert!(beta_csv.starts_with("step,epoch,status,beta_eff"));
    assert_eq!(beta_csv.lines().count(), 4);

    let ks = tmp.path().join("ks");
    assert_success(&qrbm(&[
        "audit", "ks", "--checkpoints", run.to_str().unwrap(), "--sampler", "sa", "--n", "300",
        "--out", ks.to_str().unwrap(), "--seed", "3",
    ]));
    let ks_csv = String::from_utf8(read(&ks.join("ks.csv"))).unwrap();
    assert!(ks_csv.starts_with("epoch,mean_abs_coupling,max_abs_coupling,ks_statistic,reference"));

    let steps = tmp.path().join("steps");
    assert_success(&qrbm(&[
        "audit", "steps", "--checkpoints", run.to_str().unwrap(), "--sampler", "random",
        "--max-sweeps", "20", "--n", "200", "--trials", "2", "--out", steps.to_str().unwrap(),
        "--seed", "3",
    ]));
    let steps_csv = String::from_utf8(read(&steps.join("steps.csv"))).unwrap();
    assert!(steps_csv.starts_with("epoch,mean_steps,stderr"));

    let adv = tmp.path().join("adv");
    assert_success(&qrbm(&[
        "audit", "seed-advantage", "--checkpoints", run.to_str().unwrap(), "--sampler-a",
        "exact", "--sampler-b", "zeros", "--n", "200", "--max-sweeps", "20", "--out",
        adv.to_str().unwrap(), "--seed", "3",
    ]));
    assert!(adv.join("seed_advantage.csv").exists());

    // Missing checkpoints directory is a runtime failure.
    let missing = qrbm(&[
        "audit", "ks", "--checkpoints", tmp.path().join("nope").to_str().unwrap(), "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn compare_joins_runs_and_flags_missing_epochs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    let header = "epoch,algorithm,train_accuracy,test_accuracy,mean_abs_coupling,median_quadratic_coupling\n";
    std::fs::write(&a, format!("{header}0,x,0.5,0.5,0,0\n1,x,0.6,0.6,0,0\n")).unwrap();
    std::fs::write(&b, format!("{header}0,y,0.5,0.5,0,0\n1,y,0.8,0.75,0,0\n")).unwrap();
    let out = tmp.path().join("cmp");
    assert_success(&qrbm(&[
        "compare", "--runs", a.to_str().unwrap(), b.to_str().unwrap(), "--out",
        out.to_str().unwrap(),
    ]));
    let joined = String::from_utf8(read(&out.join("compare.csv"))).unwrap();
    let mut lines = joined.lines();
    assert_eq!(lines.next().unwrap(), "epoch,acc_a,acc_b,ratio_a,ratio_b");
    assert_eq!(lines.next().unwrap(), "0,0.5,0.5,1,1");
    assert_eq!(lines.next().unwrap(), "1,0.6,0.75,1,1.25");

    // Identical runs give all-1 ratios.
    let out2 = tmp.path().join("cmp2");
    assert_success(&qrbm(&[
        "compare", "--runs", a.to_str().unwrap(), a.to_str().unwrap(), "--out",
        out2.to_str().unwrap(),
    ]));
    let joined = String::from_utf8(read(&out2.join("compare.csv"))).unwrap();
    for line in joined.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], "1");
        assert_eq!(cols[4], "1");
    }

    // A run missing an epoch fails, naming the epoch.
    let c = tmp.path().join("c.csv");
    std::fs::write(&c, format!("{header}0,z,0.5,0.5,0,0\n")).unwrap();
    let bad = qrbm(&[
        "compare", "--runs", a.to_str().unwrap(), c.to_str().unwrap(), "--out",
        tmp.path().join("cmp3").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("epoch 1"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.conf");
    std::fs::write(
        &config,
        "# experiment defaults\n[dataset]\nsource = synth\nn = 120\nside = 16\nbits = 16\nseed = 21\n",
    )
    .unwrap();
    let from_file = tmp.path().join("from_file");
    assert_success(&qrbm(&[
        "dataset", "--config", config.to_str().unwrap(), "--out", from_file.to_str().unwrap(),
    ]));
    let flags = tmp.path().join("flags");
    build_dataset(&flags, "21");
    assert_eq!(read(&from_file.join("train.cds")), read(&flags.join("train.cds")));

    // A flag overrides the file value.
    let overridden = tmp.path().join("overridden");
    assert_success(&qrbm(&[
        "dataset", "--config", config.to_str().unwrap(), "--seed", "22", "--out",
        overridden.to_str().unwrap(),
    ]));
    assert_ne!(read(&from_file.join("train.cds")), read(&overridden.join("train.cds")));
}
