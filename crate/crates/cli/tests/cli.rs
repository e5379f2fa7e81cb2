use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn msn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msn"))
        .args(args)
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.conf");
    fs::write(
        &path,
        "machine_count = 20\nsteps = 20\nbaseline_degree = 5\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_lists_every_flag() {
    let out = msn(&["sweep", "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in [
        "--config",
        "--out",
        "--seed",
        "--seeds",
        "--thresholds",
        "--time-average",
    ] {
        assert!(text.contains(flag), "{flag} missing from\n{text}");
    }
    let top = String::from_utf8(msn(&["--help"]).stdout).unwrap();
    for cmd in ["sweep", "run", "maze"] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn single_threshold_gives_a_single_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = small_config(tmp.path());
    let o = msn(&[
        "sweep",
        "--config",
        &cfg,
        "--thresholds",
        "0.45",
        "--seeds",
        "1..3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0.45,"));
    assert!(rows[0].contains(",3,"));
    assert!(out.join("sweep.json").is_file());
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn default_grid_gives_twenty_one_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = small_config(tmp.path());
    let o = msn(&[
        "sweep",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("1")));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("crossover c_th:"));
}

#[test]
fn run_writes_a_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = small_config(tmp.path());
    let o = msn(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("run.csv")).unwrap();
    assert!(text.starts_with("step,formed,expired,live_links,mean_connections\n"));
    assert_eq!(text.lines().count(), 21);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(json["steps"], 20);
}

#[test]
fn unsolvable_maze_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("blocked.maze"),
        "5 5\n#####\n#S#.#\n###.#\n#..E#\n#####\n",
    )
    .unwrap();
    fs::write(tmp.path().join("maze.conf"), "maze = blocked.maze\n").unwrap();
    let o = msn(&[
        "maze",
        "--config",
        tmp.path().join("maze.conf").to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("unsolvable"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn bad_config_fails_with_context() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "steps = 10\nbogus = 1\n").unwrap();
    let o = msn(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
}

#[test]
fn missing_output_parent_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("missing/deeper");
    let o = msn(&["maze", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn maze_uses_the_bundled_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = msn(&["maze", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("maze_report.json")).unwrap()).unwrap();
    assert_eq!(json["maze"]["width"], 9);
    assert_eq!(json["seed"], 7);
    for key in ["solo", "cooperative", "archive"] {
        assert!(json[key]["agents"].is_array());
    }
}
