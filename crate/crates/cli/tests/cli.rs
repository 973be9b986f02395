use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biascorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/golden")
        .join(name);
    std::fs::read_to_string(p).unwrap()
}

/// Parses a one-row CSV into (header, value) pairs.
fn single_row(text: &str) -> Vec<(String, String)> {
    let mut lines = text.lines();
    let h = lines.next().unwrap().split(',').map(String::from);
    let v = lines.next().unwrap().split(',').map(String::from);
    assert!(lines.next().is_none());
    h.zip(v).collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(h, _)| h == name).unwrap().1
}

#[test]
fn tables_and_figures_to_stdout() {
    for n in 1..=8 {
        let o = run(&["table", &n.to_string()]);
        assert!(o.status.success());
        assert_eq!(stdout(&o), golden(&format!("table-{n}.csv")), "table {n}");
    }
    for n in 1..=2 {
        let o = run(&["figure", &n.to_string()]);
        assert!(o.status.success());
        assert_eq!(stdout(&o), golden(&format!("fig-{n}.csv")));
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t1.csv");
    let o = run(&["table", "1", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(
        std::fs::read_to_string(path).unwrap(),
        golden("table-1.csv")
    );
}

#[test]
fn estimate_defaults_and_flags() {
    let o = run(&["estimate", "--t0", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = single_row(&stdout(&o));
    assert_eq!(field(&row, "d_x0_display"), "-0.0955");
    assert_eq!(field(&row, "d_alpha_display"), "0.0981");

    let o = run(&[
        "estimate",
        "--iterate",
        "--x0",
        "0.3",
        "--alpha",
        "0.8",
        "--n",
        "4",
        "--max-iter",
        "100",
    ]);
    let row = single_row(&stdout(&o));
    assert_eq!(field(&row, "status"), "converged");
    assert_eq!(field(&row, "d_x0_display"), "0.2000");
    assert_eq!(field(&row, "d_alpha_display"), "0.2000");
    assert_eq!(field(&row, "max_iterations"), "100");

    let o = run(&[
        "estimate",
        "--method",
        "tikhonov",
        "--lambda",
        "1e-12",
        "--truth-x0",
        "0.6",
        "--truth-alpha",
        "0.9",
    ]);
    let row = single_row(&stdout(&o));
    assert_eq!(field(&row, "d_x0"), "0");
    assert_eq!(field(&row, "method"), "tikhonov(1e-12)");
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# late window\nt0 = 4\nmethod = pinv\n").unwrap();
    let o = run(&["estimate", "--config", conf.to_str().unwrap()]);
    assert!(o.status.success());
    let row = single_row(&stdout(&o));
    assert_eq!(field(&row, "t0"), "4");
    assert_eq!(field(&row, "method"), "pseudo-inverse");
    assert_eq!(field(&row, "d_x0_display"), "-0.0955");

    // Flags win over the file.
    let o = run(&["estimate", "--config", conf.to_str().unwrap(), "--t0", "0"]);
    assert_eq!(field(&single_row(&stdout(&o)), "t0"), "0");
}

#[test]
fn configuration_errors_exit_1() {
    for args in [
        vec!["table", "9"],
        vec!["figure", "3"],
        vec!["frobnicate"],
        vec!["estimate", "--k", "two"],
        vec!["estimate", "--n", "1"],
        vec!["estimate", "--delta", "0"],
        vec!["estimate", "--x0", "-0.5"],
        vec!["estimate", "--method", "newton"],
        vec!["estimate", "--method", "pinv", "--iterate"],
        vec!["estimate", "--iterate", "--threshold", "0"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "colour = blue\n").unwrap();
    let o = run(&["table", "3", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("no").join("such").join("dir.csv");
    let o = run(&["table", "1", "--out", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("such"));

    let o = run(&["table", "1", "--config", "/no/such/file.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("estimate"));
}
