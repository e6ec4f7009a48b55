use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_centroid-sec"));
    c.env_remove("CENTROID_SEC_THREADS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn help_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    for path in [
        &[][..],
        &["bounds"],
        &["simulate"],
        &["corpus"],
        &["corpus", "generate"],
        &["corpus", "embed"],
        &["corpus", "dim"],
        &["attack"],
    ] {
        let mut args = path.to_vec();
        args.push("--help");
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert!(stdout(&o).contains("Usage"), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bounds", "--variant", "nope"][..],
        &["bounds", "--variant", "infinite", "--bogus"],
        &["bounds", "--variant", "limited", "--nu", "1.5"],
        &["--threads", "0", "bounds", "--variant", "infinite"],
        &["--config", "missing.conf", "bounds", "--variant", "infinite"],
        &[],
    ] {
        assert_eq!(run(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["corpus", "dim", "--input", "absent.txt"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["bounds", "--variant", "infinite", "--i", "10", "--out", "no/such/dir/x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bounds_value_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bounds", "--variant", "finite", "--n", "100", "--i", "250"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "2.5");

    let o = run(&["bounds", "--variant", "infinite", "--n", "10", "--i", "2500", "--out", "b.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,bound");
    assert!(lines[1].starts_with("0,"));
    assert!(lines.last().unwrap().starts_with("2500,"));
}

#[test]
fn config_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.conf"),
        "# test\nthreads = 1\nbounds.variant = finite\nbounds.n = 100\nbounds.i = 250\n",
    )
    .unwrap();
    let o = run(&["--config", "c.conf", "bounds"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "2.5");

    let o = run(&["--config", "c.conf", "bounds", "--i", "50"], dir.path());
    assert_eq!(stdout(&o).trim(), "0.5");

    std::fs::write(dir.path().join("bad.conf"), "bounds.colour = red\n").unwrap();
    let o = run(&["--config", "bad.conf", "bounds", "--variant", "finite"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn env_threads_and_invalid_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["bounds", "--variant", "finite", "--i", "10"])
        .env("CENTROID_SEC_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = bin()
        .args(["bounds", "--variant", "finite", "--i", "10"])
        .env("CENTROID_SEC_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["corpus", "generate", "--size", "50", "--seed", "7", "--out"];
    let mut a = args.to_vec();
    a.push("a.txt");
    let mut b = args.to_vec();
    b.push("b.txt");
    assert_eq!(run(&a, dir.path()).status.code(), Some(0));
    assert_eq!(run(&b, dir.path()).status.code(), Some(0));
    let x = std::fs::read(dir.path().join("a.txt")).unwrap();
    let y = std::fs::read(dir.path().join("b.txt")).unwrap();
    assert_eq!(x, y);
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 51);
}
