use std::fs;
use std::path::Path;
use std::process::{Command as Proc, Output};

use slelab_cli::io::{config_hash, read_csv, write_csv, Header, SCHEMA_VERSION};
use slelab_cli::scenario::{preset, DriverSpec, PRESETS};
use slelab_cli::{run_scenario, CliError, Command, ScenarioConfig};

fn slelab(dir: &Path, args: &[&str]) -> Output {
    Proc::new(env!("CARGO_BIN_EXE_slelab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SLELAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

const DYSON: [&str; 13] =
    ["simulate", "--geometry", "chordal", "--kind", "dyson", "--n", "3", "--kappa", "2", "--T", "1", "--dt", "1e-4"];

#[test]
fn dyson_example_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = DYSON.to_vec();
    args.extend(["--seed", "42", "--out", "a"]);
    let o = slelab(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    args.extend(["--stem", "b"]);
    assert!(slelab(tmp.path(), &args).status.success());

    let a = tmp.path().join("a/simulate.csv");
    let b = tmp.path().join("a/b.csv");
    let (cols, rows) = read_csv(&a).unwrap();
    assert_eq!(cols, ["t", "X1", "X2", "X3"]);
    assert_eq!(rows.len(), 10001);
    assert_eq!(rows[0], [0.0, -1.0, 0.0, 1.0]);
    assert!((rows[10000][0] - 1.0).abs() < 1e-12);
    // ordering is preserved at kappa = 2
    assert!(rows.iter().all(|r| r[1] < r[2] && r[2] < r[3]));
    assert_eq!(data_lines(&a), data_lines(&b));

    let text = fs::read_to_string(&a).unwrap();
    let head: Vec<&str> = text.lines().take(4).collect();
    assert_eq!(head[0], format!("# slelab schema_version={SCHEMA_VERSION}"));
    assert!(head[1].starts_with("# config_hash=") && head[1].len() == "# config_hash=".len() + 64);
    assert_eq!(head[2], "# seed=42");
    assert!(head[3].starts_with("# config={"));
    assert_eq!(text.lines().nth(1), fs::read_to_string(&b).unwrap().lines().nth(1));
    assert!(tmp.path().join("a/simulate.svg").exists());
}

#[test]
fn different_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let mut a = DYSON.to_vec();
    a[12] = "1e-2";
    let mut b = a.clone();
    a.extend(["--seed", "1", "--stem", "s1", "--no-plot"]);
    b.extend(["--seed", "2", "--stem", "s2", "--no-plot"]);
    assert!(slelab(tmp.path(), &a).status.success());
    assert!(slelab(tmp.path(), &b).status.success());
    assert_ne!(data_lines(&tmp.path().join("s1.csv")), data_lines(&tmp.path().join("s2.csv")));
    assert!(!tmp.path().join("s1.svg").exists());
}

#[test]
fn seed_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Proc::new(env!("CARGO_BIN_EXE_slelab"))
        .args(["verify", "1", "--print-config"])
        .current_dir(tmp.path())
        .env("SLELAB_SEED", "77")
        .output()
        .unwrap();
    let c = ScenarioConfig::from_json(&stdout(&o)).unwrap();
    assert_eq!(c.command.seed(), 77);
}

#[test]
fn energy_both_methods_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slelab(
        tmp.path(),
        &["energy", "--rho-chordal", "--method", "both", "--points", "1,-1", "--rho", "2,1", "--driver", "sine:0.5,2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("energy.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    let d = v["result"]["abs_difference"].as_f64().unwrap();
    assert!(d < 1e-6, "{d}");
    let i = v["result"]["integral"]["total"].as_f64().unwrap();
    assert!(i > 0.0);
}

#[test]
fn dirichlet_energy_of_a_line_from_a_csv_driver() {
    let tmp = tempfile::tempdir().unwrap();
    let dt = 1e-3;
    let rows: Vec<Vec<f64>> = (0..=500).map(|k| vec![k as f64 * dt, 2.0 * k as f64 * dt]).collect();
    let h = Header::new(serde_json::json!({}), &serde_json::json!({}), 0);
    write_csv(&tmp.path().join("w.csv"), &h, &["t".into(), "w".into()], &rows).unwrap();
    let o = slelab(
        tmp.path(),
        &["energy", "--dirichlet", "--method", "integral", "--driver", "csv:w.csv", "--dt", "1e-3", "--T", "0.5"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("energy.json")).unwrap()).unwrap();
    // (1/2) * 2^2 * 0.5
    let e = v["result"]["integral"]["total"].as_f64().unwrap();
    assert!((e - 1.0).abs() < 1e-9, "{e}");

    let off: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.5, 1.0]];
    write_csv(&tmp.path().join("off.csv"), &h, &["t".into(), "w".into()], &off).unwrap();
    let o = slelab(tmp.path(), &["energy", "--dirichlet", "--driver", "csv:off.csv", "--dt", "1e-3", "--T", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn partition_reports_small_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slelab(tmp.path(), &["partition", "--geometry", "radial", "--kappa", "1", "--mu", "1", "--point", "0,3.14159"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("max BPZ residual"));
    assert!(tmp.path().join("partition.json").exists());
}

#[test]
fn quick_verification_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slelab(tmp.path(), &["verify", "1", "loop_measure_exactness", "11", "--quick"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains(" PASS ")).count(), 3, "{out}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["result"]["all_pass"], true);
    assert_eq!(v["result"]["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn unknown_check_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slelab(tmp.path(), &["verify", "13"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn trace_writes_three_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slelab(
        tmp.path(),
        &["trace", "--geometry", "radial", "--kappa", "2", "--T", "0.5", "--dt", "0.01", "--s-values", "0.5", "--seed", "3"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (cols, rows) = read_csv(&tmp.path().join("trace.csv")).unwrap();
    assert_eq!(cols, ["t", "x", "y"]);
    assert_eq!(rows.len(), 51);
    // radial traces start on the unit circle
    assert!(((rows[0][1].powi(2) + rows[0][2].powi(2)).sqrt() - 1.0).abs() < 1e-9);
    let svg = fs::read_to_string(tmp.path().join("trace.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("config_hash="));
}

#[test]
fn bad_invocations_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(slelab(tmp.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(slelab(tmp.path(), &[]).status.code(), Some(1));
    assert_eq!(slelab(tmp.path(), &["energy"]).status.code(), Some(1));
    assert_eq!(slelab(tmp.path(), &["simulate", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(slelab(tmp.path(), &["simulate", "--kappa", "-1", "--n", "2"]).status.code(), Some(1));
    assert_eq!(slelab(tmp.path(), &["--help"]).status.code(), Some(0));

    fs::write(tmp.path().join("bad.json"), r#"{"schema_version":1,"command":{"name":"verify","checks":["1"],"extra":1}}"#)
        .unwrap();
    let o = slelab(tmp.path(), &["--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema violation"));
    assert_eq!(slelab(tmp.path(), &["--config", "missing.json"]).status.code(), Some(1));
}

#[test]
fn schema_checks() {
    let good = r#"{"schema_version":1,"command":{"name":"verify","checks":["1"],"quick":true,"seed":0}}"#;
    let c = ScenarioConfig::from_json(good).unwrap();
    assert!(c.plot);
    assert!(matches!(ScenarioConfig::from_json(&good.replace(":1,", ":2,")), Err(CliError::SchemaViolation(_))));
    assert!(matches!(
        ScenarioConfig::from_json(r#"{"schema_version":1,"command":{"name":"nope"}}"#),
        Err(CliError::SchemaViolation(_))
    ));
    assert!(matches!(
        ScenarioConfig::from_json(r#"{"schema_version":1,"command":{"name":"verify","checks":[],"quick":true,"seed":0},"colour":1}"#),
        Err(CliError::SchemaViolation(_))
    ));
}

#[test]
fn config_round_trips_through_a_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = DYSON.to_vec();
    args[12] = "1e-2";
    args.extend(["--seed", "5", "--print-config"]);
    let o = slelab(tmp.path(), &args);
    assert!(o.status.success());
    let text = stdout(&o);
    let c = ScenarioConfig::from_json(&text).unwrap();
    assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
    fs::write(tmp.path().join("s.json"), &text).unwrap();
    assert!(slelab(tmp.path(), &["--config", "s.json", "--stem", "from_file", "--no-plot"]).status.success());
    args.pop();
    args.extend(["--stem", "direct", "--no-plot"]);
    assert!(slelab(tmp.path(), &args).status.success());
    assert_eq!(data_lines(&tmp.path().join("from_file.csv")), data_lines(&tmp.path().join("direct.csv")));
}

#[test]
fn presets_resolve_and_run() {
    for name in PRESETS {
        let c = preset(name, 1).unwrap();
        assert_eq!(c.seed(), 1);
        assert!(matches!(c, Command::Simulate { .. }));
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ScenarioConfig::new(preset("dyson-radial-k2-mu1", 4).unwrap());
    c.output.dir = tmp.path().to_path_buf();
    let out = run_scenario(&c).unwrap();
    assert_eq!(out.exit_code, 0);
    let (cols, rows) = read_csv(&tmp.path().join("simulate.csv")).unwrap();
    assert_eq!(cols.len(), 4);
    assert_eq!(rows.len(), 101);
}

#[test]
fn hash_ignores_key_order_and_output() {
    let a = serde_json::json!({"x": 1, "y": [1.0, 2.0]});
    let b: serde_json::Value = serde_json::from_str(r#"{"y":[1.0,2.0],"x":1}"#).unwrap();
    assert_eq!(config_hash(&a), config_hash(&b));
    assert_ne!(config_hash(&a), config_hash(&serde_json::json!({"x": 2, "y": [1.0, 2.0]})));
    // sha256 of "{}"
    assert_eq!(config_hash(&serde_json::json!({})), "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
}

#[test]
fn driver_specs_parse() {
    assert_eq!("sine:1,2".parse::<DriverSpec>().unwrap(), DriverSpec::Sine { amplitude: 1.0, frequency: 2.0 });
    assert_eq!("poly:0.5,-1".parse::<DriverSpec>().unwrap(), DriverSpec::Poly { coefficients: vec![0.5, -1.0] });
    assert!(matches!("csv:x.csv".parse::<DriverSpec>().unwrap(), DriverSpec::Csv { .. }));
    assert!("sine:1".parse::<DriverSpec>().is_err());
    assert!("cosine:1,2".parse::<DriverSpec>().is_err());
}
