use std::fs;
use std::process::{Command, Output};

fn riemann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riemann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: [&str; 6] = ["--dx", "0.1", "--points-min", "2", "--points-max", "3"];

#[test]
fn regions_writes_csv_to_stdout() {
    let mut args = vec!["regions", "--type", "I"];
    args.extend(SMALL);
    let o = riemann(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("x,y,line,index,in_region,boundary"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("true")));
    assert!(!out.contains('\r'));
    assert!(String::from_utf8(o.stderr).unwrap().contains("in_region"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.cfg");
    let csv = dir.path().join("out.csv");
    fs::write(&cfg, "# coarse\ntype = S3\ndx = 0.2\npoints_min = 2\npoints_max = 2\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["ellipticity", "--config", cfg.to_str().unwrap(), "--csv", csv.to_str().unwrap()];
        args.extend(extra);
        let o = riemann(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(&csv).unwrap().lines().count() - 1
    };
    let from_file = run(&[]);
    let overridden = run(&["--dx", "0.1"]);
    assert!(overridden > from_file, "{overridden} vs {from_file}");
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["one.csv", "four.csv"].iter().map(|n| dir.path().join(n)).collect();
    for (p, threads) in paths.iter().zip(["1", "4"]) {
        let mut args = vec!["classify", "--type", "III", "--threads", threads, "--csv", p.to_str().unwrap()];
        args.extend(SMALL);
        assert_eq!(code(&riemann(&args)), 0);
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn resonances_report_counts_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    let scan = dir.path().join("scan.csv");
    let svg = dir.path().join("map.svg");
    let o = riemann(&[
        "resonances", "--type", "III", "--dx", "0.05", "--points-min", "3", "--points-max", "6", "--max-order",
        "4", "--curves", curves.to_str().unwrap(), "--csv", scan.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let count: usize = out
        .lines()
        .find_map(|l| l.strip_prefix("resonances "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(count > 0);
    let text = fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("nu,order,x,y\n"));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&riemann(&[])), 1);
    assert_eq!(code(&riemann(&["regions"])), 1);
    assert_eq!(code(&riemann(&["regions", "--type", "IV"])), 1);
    assert_eq!(code(&riemann(&["regions", "--type", "I", "--dx", "-1"])), 1);
    assert_eq!(code(&riemann(&["regions", "--type", "I", "--bogus"])), 1);
    assert_eq!(code(&riemann(&["resonances", "--type", "I", "--max-order", "9"])), 1);
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.cfg");
    assert_eq!(code(&riemann(&["regions", "--config", missing.to_str().unwrap()])), 3);
    let bad = dir.path().join("no/such/dir/out.csv");
    let mut args = vec!["regions", "--type", "I", "--csv", bad.to_str().unwrap()];
    args.extend(SMALL);
    assert_eq!(code(&riemann(&args)), 3);
}

#[test]
fn verify_passes_and_catches_a_wrong_frame() {
    let quick = ["verify", "--samples", "5", "--random-samples", "200"];
    let o = riemann(&quick);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(!table.contains("FAIL"));

    let mut args = quick.to_vec();
    args.push("--wrong-frame-axis");
    let o = riemann(&args);
    assert_eq!(code(&o), 2);
    let table = String::from_utf8(o.stdout).unwrap();
    let blocks = table.lines().find(|l| l.starts_with("Hessian block structure")).unwrap();
    assert!(blocks.contains("FAIL"));
}

#[test]
fn help_exits_zero() {
    let o = riemann(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("classify"));
}
