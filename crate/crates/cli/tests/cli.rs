use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tristack_core::{load_report, Verdict};

fn tristack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tristack")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn check_wrc_csv_reports_bugs() {
    let o = tristack(&["check", "--suite", "WRC", "--mapping", "base-intuitive", "--model", "nWR", "--mcm", "curr", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("suite,model,mcm,mapping,bugs,overly_strict,equivalent\n"), "{out}");
    assert!(out.contains("WRC,nWR,curr,base-intuitive,108,0,135"), "{out}");
}

#[test]
fn check_refined_is_clean() {
    let o = tristack(&["check", "--suite", "SB", "--mapping", "base-refined", "--model", "all", "--mcm", "ours", "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn input_errors_exit_2() {
    for args in [
        &["check", "--suite", "NOPE", "--mapping", "base-intuitive", "--model", "nWR", "--mcm", "curr"][..],
        &["check", "--suite", "SB", "--mapping", "bogus", "--model", "nWR", "--mcm", "curr"],
        &["check", "--suite", "SB", "--mapping", "base-intuitive", "--model", "zz", "--mcm", "curr"],
        &["check", "--suite", "SB", "--mapping", "base-intuitive", "--model", "nWR", "--mcm", "later"],
        &["check", "--suite", "SB", "--mapping", "power-leading-sync", "--model", "nWR", "--mcm", "curr"],
        &["hll", "/nonexistent.litmus"],
    ] {
        let o = tristack(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "), "{args:?}");
    }
}

#[test]
fn json_report_round_trips() {
    let dir = scratch("json");
    let path = dir.join("mp.json");
    let o = tristack(&[
        "check", "--suite", "MP-LZ", "--mapping", "basea-intuitive", "--model", "nMM,rWR", "--mcm", "curr",
        "--format", "json", "--witnesses", "--out", path.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let results = load_report(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(results.len(), 2 * 81);
    assert!(results.iter().all(|r| r.class != Verdict::Inconclusive));
    assert!(results.iter().all(|r| r.witness.is_some() == (r.observable == Some(true))));
    assert!(results.iter().any(|r| r.witness.is_some()));
}

#[test]
fn gen_hll_compile_uarch_pipeline() {
    let dir = scratch("pipeline");
    let o = tristack(&["gen", "--suite", "WRC", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_dir(&dir).unwrap().count(), 243);

    let litmus = dir.join("WRC_rlx_rlx_rel_acq_rlx.litmus");
    let o = tristack(&["hll", litmus.to_str().unwrap()]);
    assert!(stdout(&o).contains("WRC_rlx_rlx_rel_acq_rlx: forbidden"), "{}", stdout(&o));

    let o = tristack(&["compile", "--mapping", "base-intuitive", litmus.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let isa = dir.join("wrc.isa");
    fs::write(&isa, stdout(&o)).unwrap();

    let o = tristack(&["uarch", "--model", "nWR", "--mcm", "curr", "--witnesses", isa.to_str().unwrap()]);
    let out = stdout(&o);
    assert!(out.contains(": observable"), "{out}");
    assert!(out.contains("witness: "), "{out}");

    let o = tristack(&["uarch", "--model", "WR", "--mcm", "curr", isa.to_str().unwrap()]);
    assert!(stdout(&o).contains(": unobservable"));
}

#[test]
fn power_emission() {
    let dir = scratch("power");
    tristack(&["gen", "--suite", "IRIW", "--out", dir.to_str().unwrap()]);
    let f = dir.join("IRIW_sc_sc_sc_sc_sc_sc.litmus");
    let o = tristack(&["compile", "--mapping", "power-leading-sync", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sync"), "{}", stdout(&o));
}

#[test]
fn custom_model_file() {
    let dir = scratch("model");
    let path = dir.join("mine.cfg");
    fs::write(&path, "# strict except store buffering\nrelax_wr=true\n").unwrap();
    let o = tristack(&["check", "--suite", "SB", "--mapping", "base-intuitive", "--model", path.to_str().unwrap(), "--mcm", "curr", "--format", "csv"]);
    let out = stdout(&o);
    assert!(out.contains("SB,mine,curr,base-intuitive,"), "{out}");

    fs::write(&path, "relax_wr=maybe\n").unwrap();
    let o = tristack(&["check", "--suite", "SB", "--mapping", "base-intuitive", "--model", path.to_str().unwrap(), "--mcm", "curr"]);
    assert_eq!(o.status.code(), Some(2));
}
