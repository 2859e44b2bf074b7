use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fluxnmr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxnmr"))
        .current_dir(dir)
        .env_remove("FLUXNMR_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Data rows of a CSV written by the tool, split into cells, with the header.
fn csv(path: impl AsRef<Path>) -> (Vec<String>, Vec<Vec<String>>) {
    let text = read(path);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name || h.starts_with(&format!("{name}["))).unwrap_or_else(|| panic!("{name}"))
}

fn config_hash(text: &str) -> String {
    text.lines().find_map(|l| l.strip_prefix("# config sha256 ")).unwrap().to_string()
}

#[test]
fn config_echo_round_trips_through_a_file() {
    let dir = TempDir::new().unwrap();
    let echo =
        fluxnmr(dir.path(), &["config", "--set", "environment.b_ex=1.8e-3", "--convention", "polarization=exact"]);
    assert!(echo.status.success());
    let text = stdout(&echo);
    assert!(text.contains("polarization = \"exact\""));
    std::fs::write(dir.path().join("run.toml"), &text).unwrap();

    let again = fluxnmr(dir.path(), &["config", "--config", "run.toml"]);
    assert!(again.status.success());
    assert_eq!(config_hash(&stdout(&again)), config_hash(&text));

    let via_env = Command::new(env!("CARGO_BIN_EXE_fluxnmr"))
        .current_dir(dir.path())
        .env("FLUXNMR_CONFIG", "run.toml")
        .arg("config")
        .output()
        .unwrap();
    assert_eq!(config_hash(&stdout(&via_env)), config_hash(&text));

    let defaults = fluxnmr(dir.path(), &["config"]);
    assert_ne!(config_hash(&stdout(&defaults)), config_hash(&text));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[environment]\nbex = 1e-3\n").unwrap();
    for args in [
        &["config", "--set", "environment.b_ex=1e-3", "--set", "environment.b_ex=2e-3"][..],
        &["config", "--set", "sample.standoff=-1"],
        &["config", "--set", "nosuch.key=1"],
        &["config", "--config", "bad.toml"],
        &["config", "--config", "missing.toml"],
        &["config", "--convention", "dephasing=sideways"],
        &["config", "--convention", "rf_offset=edge", "--set", "rf.reference=center"],
        &["figure", "fig9"],
        &["query", "min-density", "--set", "query.scheme=hahn"],
    ] {
        let o = fluxnmr(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
}

#[test]
fn solver_failures_exit_with_one() {
    let dir = TempDir::new().unwrap();
    // A fully saturated sample centred on the loop produces no net flux.
    let o = fluxnmr(
        dir.path(),
        &[
            "query",
            "min-number",
            "--set",
            "query.scheme=ramsey",
            "--set",
            "sample.placement=b",
            "--set",
            "sample.size=1e-6",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no measurable signal"));
}

#[test]
fn selfcheck_passes() {
    let dir = TempDir::new().unwrap();
    let o = fluxnmr(dir.path(), &["selfcheck"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}

#[test]
fn undriven_fig4_has_zero_depolarization() {
    let dir = TempDir::new().unwrap();
    let o = fluxnmr(dir.path(), &["figure", "fig4", "--set", "rf.current=0", "--out", "res"]);
    assert!(o.status.success());
    let (header, rows) = csv(dir.path().join("res/fig4.csv"));
    let k = col(&header, "depolarization");
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[k].parse::<f64>().unwrap() == 0.0));
    assert!(dir.path().join("res/resolved_config.toml").exists());
}

#[test]
fn query_writes_a_single_row_and_a_summary() {
    let dir = TempDir::new().unwrap();
    let args = [
        "query",
        "min-density",
        "--set",
        "query.scheme=echo",
        "--set",
        "environment.b_ex=1.8e-3",
        "--resolution",
        "2e-7",
    ];
    let o = fluxnmr(dir.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("out/query_min_density.json"))).unwrap();
    let rho_cm3 = json["result"]["density_cm3"].as_f64().unwrap();
    assert!((1e20..1e22).contains(&rho_cm3), "{rho_cm3}");
    assert_eq!(json["result"]["scheme"], "echo");
    assert!(json["result"]["bisection_iterations"].as_u64().unwrap() > 0);

    let csv_text = read(dir.path().join("out/query_min_density.csv"));
    assert_eq!(json["config_hash"].as_str().unwrap(), config_hash(&csv_text));
    let (header, rows) = csv(dir.path().join("out/query_min_density.csv"));
    assert_eq!(rows.len(), 1);
    let v: f64 = rows[0][col(&header, "rho_min_cm3")].parse().unwrap();
    assert!((v / rho_cm3 - 1.0).abs() < 1e-11);
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = TempDir::new().unwrap();
    let common =
        ["--set", "custom.b_ex=[2e-3, 4e-3]", "--set", "custom.schemes=[\"ramsey\", \"dd4\"]", "--resolution", "2e-7"];
    let mut one = vec!["figure", "custom", "fig4", "--threads", "1", "--out", "t1"];
    one.extend_from_slice(&common);
    let mut four = vec!["figure", "custom", "fig4", "--threads", "4", "--out", "t4"];
    four.extend_from_slice(&common);
    assert!(fluxnmr(dir.path(), &one).status.success());
    assert!(fluxnmr(dir.path(), &four).status.success());
    // run.threads is part of the resolved config, so compare below the header.
    let body = |p: &str| {
        read(dir.path().join(p)).lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n")
    };
    for f in ["custom.csv", "fig4.csv"] {
        assert_eq!(body(&format!("t1/{f}")), body(&format!("t4/{f}")), "{f}");
    }
    assert_eq!(csv(dir.path().join("t1/custom.csv")).1.len(), 4);
}

#[test]
fn fig8_optimum_at_four_millitesla_is_eight_pulses() {
    let dir = TempDir::new().unwrap();
    let o = fluxnmr(dir.path(), &["figure", "fig8"]);
    assert!(o.status.success());
    let (header, rows) = csv(dir.path().join("out/fig8.csv"));
    let (b, n, rho) = (col(&header, "b_ex"), col(&header, "n"), col(&header, "rho_min"));
    let best = rows
        .iter()
        .filter(|r| (r[b].parse::<f64>().unwrap() - 4e-3).abs() < 1e-9)
        .min_by(|x, y| x[rho].parse::<f64>().unwrap().total_cmp(&y[rho].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!(best[n], "8");
}
