use std::path::Path;
use std::process::{Command, Output};

fn hw(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwdecode")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, "[train]\nmax_epochs = 3\npatience = 3\n\n[eval]\nfolds = 2\n\n[eval.sweep]\nfractions = [0.5, 1.0]\nseeds = [0]\n").unwrap();
    p.display().to_string()
}

#[test]
fn full_chain_runs_end_to_end() {
    let d = tempfile::tempdir().unwrap();
    let cwd = d.path();
    let cfg = small_config(cwd);
    ok(&hw(&["synth", "--out", "s", "--trials", "40", "--snr", "0.5", "--artifact", "correlated"], cwd));
    for f in ["eeg.rec", "pen.rec", "task.evt", "pen.evt", "artifact.rec", "manifest-synth.json"] {
        assert!(cwd.join("s").join(f).exists(), "{f}");
    }
    ok(&hw(&["sync", "--session", "s"], cwd));
    assert!(cwd.join("s/events.evt").exists());
    ok(&hw(&["preprocess", "--session", "s"], cwd));
    ok(&hw(&["ica", "fit", "--session", "s", "--components", "6"], cwd));
    let rank = hw(&["ica", "rank", "--session", "s"], cwd);
    ok(&rank);
    let top = String::from_utf8_lossy(&rank.stdout).lines().nth(1).unwrap().split('\t').nth(1).unwrap().to_string();
    ok(&hw(&["ica", "apply", "--session", "s", "--reject", &top], cwd));
    ok(&hw(&["epoch", "--session", "s", "--setting", "me-movement"], cwd));
    ok(&hw(&["epoch", "--session", "s", "--setting", "me_cue", "--cleaned"], cwd));

    let ep = "s/epochs/me_movement.rec";
    ok(&hw(&["--config", &cfg, "train", "--epochs", ep, "--out", "m.hwnet"], cwd));
    ok(&hw(&["predict", "--model", "m.hwnet", "--epochs", ep, "--out", "pred.tsv"], cwd));
    let pred = std::fs::read_to_string(cwd.join("pred.tsv")).unwrap();
    assert_eq!(pred.lines().count(), 41);

    let cv = hw(&["--config", &cfg, "eval", "cv", "--epochs", ep, "--out", "cv"], cwd);
    ok(&cv);
    assert!(String::from_utf8_lossy(&cv.stdout).contains("pooled accuracy"));
    assert!(cwd.join("cv/cv.tsv").exists() && cwd.join("cv/manifest-eval-cv.json").exists());

    ok(&hw(&["--config", &cfg, "eval", "avg", "--epochs", ep, "--out", "avg", "--k", "1,2"], cwd));
    ok(&hw(&["--config", &cfg, "eval", "avg", "--epochs", ep, "--out", "avg2", "--model", "m.hwnet", "--k", "1,2"], cwd));
    ok(&hw(&["--config", &cfg, "eval", "probe-channels", "--epochs", ep, "--out", "pc"], cwd));
    ok(&hw(&["--config", &cfg, "eval", "probe-ic", "--session", "s", "--component", &top, "--out", "pic"], cwd));
    ok(&hw(&["--config", &cfg, "eval", "sweep", "--epochs", ep, "--out", "sw", "--test-size", "16"], cwd));
    let sweep = std::fs::read_to_string(cwd.join("sw/sweep.tsv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn reports_are_deterministic_and_free_of_timestamps() {
    let d = tempfile::tempdir().unwrap();
    let cwd = d.path();
    let cfg = small_config(cwd);
    ok(&hw(&["synth", "--out", "s", "--trials", "24", "--snr", "1"], cwd));
    ok(&hw(&["sync", "--session", "s"], cwd));
    ok(&hw(&["preprocess", "--session", "s"], cwd));
    ok(&hw(&["epoch", "--session", "s"], cwd));
    let ep = "s/epochs/me_movement.rec";
    ok(&hw(&["--config", &cfg, "eval", "cv", "--epochs", ep, "--out", "a"], cwd));
    ok(&hw(&["--config", &cfg, "--jobs", "2", "eval", "cv", "--epochs", ep, "--out", "b"], cwd));
    for f in ["cv.txt", "cv.tsv"] {
        let a = std::fs::read(cwd.join("a").join(f)).unwrap();
        let b = std::fs::read(cwd.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let text = std::fs::read_to_string(cwd.join("a/cv.txt")).unwrap();
    assert!(!text.contains("2026") && !text.contains("elapsed"));
}

#[test]
fn sweep_needs_enough_trials_for_default_test_size() {
    let d = tempfile::tempdir().unwrap();
    let cwd = d.path();
    let cfg = small_config(cwd);
    ok(&hw(&["synth", "--out", "s", "--trials", "40"], cwd));
    ok(&hw(&["sync", "--session", "s"], cwd));
    ok(&hw(&["preprocess", "--session", "s"], cwd));
    ok(&hw(&["epoch", "--session", "s"], cwd));
    // default test size is 160, more than the 40 epochs available
    let o = hw(&["--config", &cfg, "eval", "sweep", "--epochs", "s/epochs/me_movement.rec", "--out", "sw"], cwd);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("160"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_config_key_is_named_in_the_error() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.toml");
    std::fs::write(&p, "[train]\neppochs = 10\n").unwrap();
    let o = hw(&["--config", p.to_str().unwrap(), "synth", "--out", "s"], d.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("eppochs"), "{err}");
    assert_eq!(err.trim().lines().count(), 1, "{err}");
}

#[test]
fn missing_inputs_point_at_the_previous_step() {
    let d = tempfile::tempdir().unwrap();
    std::fs::create_dir(d.path().join("s")).unwrap();
    let o = hw(&["preprocess", "--session", "s"], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("synth"));
}

#[test]
fn imagery_sessions_epoch_on_cue_only() {
    let d = tempfile::tempdir().unwrap();
    let cwd = d.path();
    ok(&hw(&["synth", "--out", "s", "--trials", "8", "--imagery"], cwd));
    assert!(!cwd.join("s/pen.rec").exists());
    ok(&hw(&["sync", "--session", "s"], cwd));
    ok(&hw(&["preprocess", "--session", "s"], cwd));
    ok(&hw(&["epoch", "--session", "s", "--setting", "mi_cue"], cwd));
    let o = hw(&["epoch", "--session", "s", "--setting", "me_movement"], cwd);
    assert!(!o.status.success());
}
