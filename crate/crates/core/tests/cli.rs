use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dlivm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlivm")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_update_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dlivm(&["gen", "ex2", "--n", "5", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (prog, data, change) = (dir.path().join("prog.dl"), dir.path().join("data.facts"), dir.path().join("change.delta"));
    let (dump, stats) = (dir.path().join("result.facts"), dir.path().join("stats.csv"));

    for algo in ["dred", "dredc", "bf", "bfc"] {
        let out = dlivm(&[
            "update", path(&prog), path(&data), path(&change), "--algo", algo, "--verify",
            "--dump", path(&dump), "--stats", path(&stats),
        ]);
        assert_eq!(code(&out), 0, "{algo}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
        let csv = fs::read_to_string(&stats).unwrap();
        assert!(csv.lines().count() > 1);
        assert!(csv.lines().skip(1).all(|l| l.starts_with(algo)));
    }

    let out = dlivm(&["verify", path(&prog), path(&data), path(&change), path(&dump)]);
    assert_eq!(code(&out), 0);

    let mut tampered = fs::read_to_string(&dump).unwrap();
    tampered.push_str("S(zz,zz,1).\n");
    fs::write(&dump, tampered).unwrap();
    let out = dlivm(&["verify", path(&prog), path(&data), path(&change), path(&dump)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn usage_and_parse_errors_exit_one() {
    assert_eq!(code(&dlivm(&[])), 1);
    assert_eq!(code(&dlivm(&["update", "a", "b", "c", "--algo", "nope"])), 1);
    assert_eq!(code(&dlivm(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("bad.dl");
    fs::write(&prog, "A(X) :- B(Y).\n").unwrap();
    let data = dir.path().join("d.facts");
    fs::write(&data, "B(a).\n").unwrap();
    let out = dlivm(&["mat", path(&prog), path(&data)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.dl"));

    let out = dlivm(&["mat", path(&dir.path().join("missing.dl")), path(&data)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn mat_dumps_sorted_facts() {
    let dir = tempfile::tempdir().unwrap();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let dump = dir.path().join("out.facts");
    let out = dlivm(&[
        "mat",
        path(&data.join("reachability.dl")),
        path(&data.join("reachability.facts")),
        "--dump",
        path(&dump),
        "--counters",
        "none",
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&dump).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(&lines[..5], ["A(a).", "A(b).", "A(c).", "A(d).", "A(e)."]);
    assert_eq!(lines.len(), 9);
}
