use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curvecast::fit::{fit_trend, FitConfig};
use curvecast::observation::read_csv_file;

fn curvecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvecast"))
        .args(args)
        .env_remove("CURVECAST_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/taggers.toml")
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn simulate_then_fit_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("clean.csv");
    let sim = curvecast(&[
        "simulate",
        "--a",
        "204.570017",
        "--b",
        "0.307277",
        "--c",
        "96",
        "--max-words",
        "100000",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    let fit = curvecast(&["fit", csv.to_str().unwrap()]);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let out = stdout(&fit);
    for (key, want) in [("a", 204.570017), ("b", 0.307277), ("c", 96.0)] {
        assert!(((value(&out, key) - want) / want).abs() < 1e-6, "{out}");
    }
    assert!(out.contains("converged true"));
}

#[test]
fn fit_output_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("noisy.csv");
    let sim = curvecast(&[
        "simulate",
        "--a",
        "150",
        "--b",
        "0.4",
        "--c",
        "95",
        "--sigma",
        "0.05",
        "--seed",
        "7",
        "--folds",
        "3",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(sim.status.success());
    let out = stdout(&curvecast(&["fit", csv.to_str().unwrap(), "--level", "40"]));
    let obs = read_csv_file(&csv).unwrap();
    let t = fit_trend(&obs, 40, &FitConfig::default()).unwrap();
    assert_eq!(value(&out, "a"), format!("{:.6}", t.params.a).parse::<f64>().unwrap());
    assert_eq!(value(&out, "c"), format!("{:.6}", t.params.c).parse::<f64>().unwrap());
}

#[test]
fn three_point_file_interpolates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("three.csv");
    fs::write(
        &csv,
        "level,x_words,accuracy\n1,5000,90.0\n2,10000,92.0\n3,15000,93.0\n",
    )
    .unwrap();
    let out = curvecast(&["fit", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(value(&stdout(&out), "rss"), 0.0);
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "level,x_words,accuracy\n1,5000,90\n2,10000,91\n3,lots,92\n").unwrap();
    let out = curvecast(&["fit", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("bad.csv:4"), "{}", stderr(&out));
}

#[test]
fn missing_observation_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "[runs.ghost]\nobservations = \"nowhere.csv\"\n").unwrap();
    let out = curvecast(&["evaluate", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.csv"), "{}", stderr(&out));
}

#[test]
fn table_replay_renders_missing_levels() {
    let out = curvecast(&["evaluate", fixture().to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let tree = text.lines().find(|l| l.starts_with("TreeTagger,")).unwrap();
    assert_eq!(
        tree,
        "TreeTagger,--,2.1,--,93.36,--,93.77,--,94.02,--,94.28,--,94.42,--,--,--,--"
    );
    let stanford = text.lines().find(|l| l.starts_with("Stanford,")).unwrap();
    assert!(stanford.starts_with("Stanford,95015,2.4,125001,94.41,94.43,"));
    assert_eq!(stderr(&out).lines().count(), 9);
}

#[test]
fn config_path_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_curvecast"))
        .args(["evaluate", "--format", "plot-series"])
        .env("CURVECAST_CONFIG", fixture())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("run,series,x_words,accuracy\n"));
    assert!(text.contains("TnT,estimated,300000,94.38\n"));
}

#[test]
fn saved_report_renders_identically() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let direct = curvecast(&[
        "evaluate",
        fixture().to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(direct.status.success());
    let again = curvecast(&["report", json.to_str().unwrap()]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(stdout(&direct), stdout(&again));
}

#[test]
fn flags_override_the_config_file() {
    let out = curvecast(&[
        "evaluate",
        fixture().to_str().unwrap(),
        "--controls",
        "300000:500000:100000",
    ]);
    // Replayed rows carry five values, which no longer fit three controls.
    assert!(!out.status.success());
    assert!(stderr(&out).contains("control"), "{}", stderr(&out));
    let bad_format = curvecast(&["evaluate", fixture().to_str().unwrap(), "--format", "xml"]);
    assert!(!bad_format.status.success());
    assert!(stderr(&bad_format).contains("unknown format"));
}

#[test]
fn levels_of_a_simulated_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let sim = curvecast(&[
        "simulate",
        "--a",
        "204.570017",
        "--b",
        "0.307277",
        "--c",
        "95",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(sim.status.success());
    let out = stdout(&curvecast(&["levels", csv.to_str().unwrap()]));
    let level = |key: &str| -> usize {
        let line = out.lines().find(|l| l.starts_with(key)).unwrap();
        line.split(' ').nth(1).unwrap().parse().unwrap()
    };
    assert!(
        level("wlevel") <= level("plevel") && level("plevel") <= level("clevel"),
        "{out}"
    );
    assert!(out.contains("predictor "));
}
