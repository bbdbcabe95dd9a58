//! One test per acceptance criterion. Each prints its measured line and
//! fails if the requirement is not met.

use std::process::Command;
use std::sync::OnceLock;

use hwdecode::reproduce::{self, Calibrated, Outcome, Profile};

const SEED: u64 = 0;

fn calibrated() -> &'static Calibrated {
    static DATA: OnceLock<Calibrated> = OnceLock::new();
    DATA.get_or_init(|| reproduce::calibrated(SEED, Profile::Full).expect("calibration"))
}

fn check(o: Outcome) {
    println!("{}", o.line());
    assert!(o.pass, "{}", o.line());
}

#[test]
fn criterion_01_filter_responses() {
    check(reproduce::filter_responses().unwrap());
}

#[test]
fn criterion_02_synchronization() {
    check(reproduce::synchronization(SEED).unwrap());
}

#[test]
fn criterion_03_ica_recovery() {
    check(reproduce::ica_recovery(SEED).unwrap());
}

#[test]
fn criterion_04_gradient_check() {
    check(reproduce::gradient_check(SEED).unwrap());
}

#[test]
fn criterion_05_chance_sanity() {
    check(reproduce::chance_sanity(SEED, Profile::Full).unwrap());
}

#[test]
fn criterion_06_onset_knowledge_trend() {
    check(reproduce::onset_trend(calibrated()).unwrap());
}

#[test]
fn criterion_07_trial_averaging_trend() {
    check(reproduce::averaging_trend(calibrated()).unwrap());
}

#[test]
fn criterion_08_sample_complexity_saturation() {
    check(reproduce::sample_complexity(SEED, calibrated().snr, Profile::Full).unwrap());
}

#[test]
fn criterion_09_confound_reproduction() {
    check(reproduce::confound(SEED, calibrated().snr, Profile::Full).unwrap());
}

#[test]
fn criterion_10_epoch_geometry() {
    check(reproduce::epoch_geometry().unwrap());
}

#[test]
fn criterion_11_reproduce_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = Command::new(env!("CARGO_BIN_EXE_hwdecode"))
            .args(["reproduce", "--profile", "quick", "--seed", "0", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        (std::fs::read(out.join("reproduce.txt")).unwrap(), std::fs::read(out.join("reproduce.tsv")).unwrap())
    };
    let a = run("a");
    let b = run("b");
    let same = a == b;
    check(Outcome {
        id: 11,
        name: "reproduce_determinism".into(),
        measured: format!("table_bytes={} identical={same}", a.0.len()),
        requirement: "byte-identical tables for the same seed".into(),
        pass: same,
    });
}
