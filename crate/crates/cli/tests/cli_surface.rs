//! Exercises the process-level contract: argument handling, exit codes and
//! the provenance header.

use std::path::PathBuf;
use std::process::Command;

fn limithit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_limithit")).args(args).output().expect("CLI launches")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("limithit-surface-{}-{}", name, std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_and_usage_errors() {
    let out = limithit(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("usage: limithit"));

    // unknown command and missing arguments are usage errors (exit 1)
    assert_eq!(limithit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(limithit(&["fit"]).status.code(), Some(1));
    assert_eq!(limithit(&["hits", "--set", "nonsense"]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_one() {
    assert_eq!(
        limithit(&["hits", "--set", "threads=0", "--ticks", "x", "--sidecar", "y"]).status.code(),
        Some(1)
    );
    assert_eq!(
        limithit(&["hits", "--set", "open_end=25:00:00", "--ticks", "x", "--sidecar", "y"])
            .status
            .code(),
        Some(1)
    );
    // analytics without inputs configured
    assert_eq!(limithit(&["hits"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = workdir("data");
    let missing = dir.join("nope.csv");
    let out = limithit(&[
        "hits",
        "--ticks",
        missing.to_str().unwrap(),
        "--sidecar",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // a present file with a broken header is also a data error
    let ticks = dir.join("ticks.csv");
    std::fs::write(&ticks, "bogus,header\n").unwrap();
    let sidecar = dir.join("sidecar.csv");
    std::fs::write(
        &sidecar,
        "stock_id,date,prev_close,shares_outstanding,is_ipo_day,is_ex_dividend_day,next_day_open\n",
    )
    .unwrap();
    let out = limithit(&[
        "hits",
        "--ticks",
        ticks.to_str().unwrap(),
        "--sidecar",
        sidecar.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // bad scenario JSON
    let scen = dir.join("scenario.json");
    std::fs::write(&scen, "{").unwrap();
    assert_eq!(
        limithit(&["synth", scen.to_str().unwrap(), "--out", dir.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    // infeasible scenario
    std::fs::write(
        &scen,
        r#"{"seed":1,"stocks":[{"stock_id":"600000","shares_outstanding":1000,"initial_prev_close":1000}],
            "dates":[{"date":"2006-01-04","regime":"bull"}],
            "plans":[{"stock_id":"600000","date":"2006-01-04","plan":{"kind":"hit",
              "hits":[{"direction":"up","segments":[{"start":53900,"duration":500}]}],
              "next_day_open_relation":"halt"}}]}"#,
    )
    .unwrap();
    let out = limithit(&["synth", scen.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn quiet_corpus_produces_empty_but_valid_reports() {
    // a corpus with no planted hits must flow through every command
    let dir = workdir("quiet");
    let scen = dir.join("scenario.json");
    std::fs::write(
        &scen,
        r#"{"seed":5,"tick_seconds":30,
            "stocks":[{"stock_id":"600000","shares_outstanding":1000,"initial_prev_close":1500}],
            "dates":[{"date":"2006-01-04","regime":"bull"},{"date":"2006-01-05","regime":"bull"}],
            "plans":[]}"#,
    )
    .unwrap();
    assert!(limithit(&["synth", scen.to_str().unwrap(), "--out", dir.to_str().unwrap()])
        .status
        .success());
    let reports = dir.join("reports");
    for cmd in ["hits", "summary", "intraday", "prehit"] {
        let out = limithit(&[
            cmd,
            "--ticks",
            dir.join("ticks.csv").to_str().unwrap(),
            "--sidecar",
            dir.join("sidecar.csv").to_str().unwrap(),
            "--out",
            reports.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{cmd} on a quiet corpus");
    }
    let hits = std::fs::read_to_string(reports.join("hits.csv")).unwrap();
    assert_eq!(hits.lines().count(), 2, "comment + header only");
    let table1 = std::fs::read_to_string(reports.join("table1.csv")).unwrap();
    assert!(table1.contains("whole,n,0,0,"));
    // fitting over nothing still reports cleanly instead of crashing
    let out = limithit(&[
        "fit",
        "--target",
        "daily_hits",
        "--ticks",
        dir.join("ticks.csv").to_str().unwrap(),
        "--sidecar",
        dir.join("sidecar.csv").to_str().unwrap(),
        "--out",
        reports.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let fit = std::fs::read_to_string(reports.join("fit_daily_hits_up.json")).unwrap();
    assert!(fit.contains("no positive values"));
}

#[test]
fn reports_carry_version_and_config_hash() {
    let dir = workdir("header");
    let out = limithit(&[
        "synth",
        "--demo",
        "--stocks",
        "2",
        "--days",
        "4",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let reports = dir.join("reports");
    let run = limithit(&[
        "hits",
        "--ticks",
        dir.join("ticks.csv").to_str().unwrap(),
        "--sidecar",
        dir.join("sidecar.csv").to_str().unwrap(),
        "--out",
        reports.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let head = std::fs::read_to_string(reports.join("hits.csv")).unwrap();
    let first = head.lines().next().unwrap();
    assert!(first.starts_with("# limithit "), "{first}");
    assert!(first.contains("config="), "{first}");
    // the hash sticks to analytic settings: a threads change must not move it
    let reports2 = dir.join("reports2");
    let run = limithit(&[
        "hits",
        "--threads",
        "4",
        "--ticks",
        dir.join("ticks.csv").to_str().unwrap(),
        "--sidecar",
        dir.join("sidecar.csv").to_str().unwrap(),
        "--out",
        reports2.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let head2 = std::fs::read_to_string(reports2.join("hits.csv")).unwrap();
    assert_eq!(head.lines().next(), head2.lines().next());
    // but a limit-band change must
    let reports3 = dir.join("reports3");
    let run = limithit(&[
        "hits",
        "--set",
        "limit_bp=500",
        "--ticks",
        dir.join("ticks.csv").to_str().unwrap(),
        "--sidecar",
        dir.join("sidecar.csv").to_str().unwrap(),
        "--out",
        reports3.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let head3 = std::fs::read_to_string(reports3.join("hits.csv")).unwrap();
    assert_ne!(head.lines().next(), head3.lines().next());
}
