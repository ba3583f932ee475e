use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ted(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ted"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = ted(args, dir);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &str = "train_per_class = 60\ntest_per_class = 4\n";

fn setup(dir: &Path) {
    fs::write(dir.join("run.cfg"), SMALL).unwrap();
    ok(&["gen", "--config", "run.cfg", "--out", "data"], dir);
    ok(
        &[
            "fit", "--config", "run.cfg", "--source", "data/source_train.latf",
            "--decoder", "data/decoder.tedm", "--k", "16", "--out", "model.tedm",
        ],
        dir,
    );
}

#[test]
fn gen_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("run.cfg"), SMALL).unwrap();
    ok(&["gen", "--config", "run.cfg", "--seed", "4", "--out", "a"], d.path());
    ok(&["gen", "--config", "run.cfg", "--seed", "4", "--out", "b"], d.path());
    for f in ["source_train.latf", "source_test.latf", "target.latf", "decoder.tedm"] {
        assert_eq!(
            fs::read(d.path().join("a").join(f)).unwrap(),
            fs::read(d.path().join("b").join(f)).unwrap()
        );
    }
    ok(&["gen", "--config", "run.cfg", "--seed", "5", "--out", "c"], d.path());
    assert_ne!(
        fs::read(d.path().join("a/target.latf")).unwrap(),
        fs::read(d.path().join("c/target.latf")).unwrap()
    );
}

#[test]
fn adapt_none_passes_through_and_report_recomputes() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path());
    let out = ok(
        &["adapt", "--artifact", "model.tedm", "--target", "data/target.latf", "--mode", "none", "--out", "none.csv"],
        d.path(),
    );
    assert!(out.contains("mode: none"));
    let csv = fs::read_to_string(d.path().join("none.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], f[4]);
        assert_eq!(f[3], f[5]);
    }
    let summary = ok(&["report", "none.csv"], d.path());
    let a = summary.lines().find(|l| l.starts_with("accuracy no-adapt")).unwrap();
    let b = summary.lines().find(|l| l.starts_with("accuracy adapted")).unwrap();
    assert_eq!(a.split(':').nth(1), b.split(':').nth(1));
}

#[test]
fn fixed_mode_and_flags_override_config() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path());
    fs::write(d.path().join("adapt.cfg"), format!("{SMALL}mode = fixed\nfmt = 16b4\nn = 3\n")).unwrap();
    let out = ok(
        &[
            "adapt", "--config", "adapt.cfg", "--fmt", "8b4", "--artifact", "model.tedm",
            "--target", "data/target.latf", "--out", "fx.csv",
        ],
        d.path(),
    );
    assert!(out.contains("fmt: 8b4"), "{out}");
    assert!(out.contains("n: 3"));
    assert!(out.contains("saturations:"));
    let csv = fs::read_to_string(d.path().join("fx.csv")).unwrap();
    // n·λ + 1 with λ = 12 at k = 16.
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(6) == Some("37")));
    assert!(d.path().join("fx.csv.summary.txt").exists());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path());
    ok(
        &[
            "sweep", "--artifact", "model.tedm", "--target", "data/target.latf", "--k", "4,16",
            "--n", "1,2", "--fmt", "float,8b4", "--out", "sweep.csv",
        ],
        d.path(),
    );
    let csv = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.contains("fixed:8b4"));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    setup(d.path());
    let code = |args: &[&str]| ted(args, d.path()).status.code();
    assert_eq!(code(&["bogus"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(
        code(&["fit", "--source", "data/source_train.latf", "--decoder", "data/decoder.tedm", "--k", "65", "--out", "x"]),
        Some(1)
    );
    assert_eq!(
        code(&["adapt", "--artifact", "model.tedm", "--target", "data/target.latf", "--mode", "fixed", "--out", "x.csv"]),
        Some(1)
    );
    // An artifact where a feature file is expected.
    assert_eq!(
        code(&["adapt", "--artifact", "model.tedm", "--target", "model.tedm", "--out", "x.csv"]),
        Some(2)
    );
    fs::write(d.path().join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(code(&["gen", "--config", "bad.cfg", "--out", "z"]), Some(1));
    assert_eq!(code(&["report", "missing.csv"]), Some(2));
}
