use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hkt_ccd_cli::config::CampaignConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hkt-ccd"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).env("HKT_CCD_OUT", dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("one error record");
    serde_json::from_str(line).expect("error record is JSON")
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn schema_document_matches_config_type() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.schema.json");
    let mut expected = serde_json::to_string_pretty(&CampaignConfig::json_schema()).unwrap();
    expected.push('\n');
    if std::env::var_os("HKT_CCD_WRITE_SCHEMA").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    assert_eq!(read(path), expected, "regenerate with HKT_CCD_WRITE_SCHEMA=1 cargo test -p hkt-ccd-cli");
}

#[test]
fn sample_configs_parse_and_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let c = CampaignConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        c.validate().unwrap();
        n += 1;
    }
    assert!(n >= 4);
}

#[test]
fn unknown_key_is_a_config_error() {
    let err = CampaignConfig::from_toml_str("scenari = 2").unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn hash_ignores_output_dir_only() {
    let a = CampaignConfig::default();
    let mut b = a.clone();
    b.output_dir = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    b.u_max = Some(700.0);
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn bem_curve_files_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["bem-curve", "--name", "golden"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hash = CampaignConfig { name: "golden".into(), ..CampaignConfig::default() }.hash();
    let csv = read(dir.path().join("out/golden_s2_cp_curve.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash={hash}"));
    assert_eq!(lines.next().unwrap(), "tsr,cp");
    assert_eq!(lines.count(), 140);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("out/golden_s2_cp_curve.json"))).unwrap();
    assert_eq!(json["config_hash"], hash.as_str());
    let tsr = json["optimal_tsr"].as_f64().unwrap();
    assert!((5.0..8.0).contains(&tsr), "optimal tsr {tsr}");
}

#[test]
fn simulate_headers_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["simulate", "--law", "linear", "--horizon", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path().join("out/campaign_s2_simulate_trajectory.csv"));
    assert_eq!(csv.lines().nth(1).unwrap(), "t,omega,u,Q,P");
    assert_eq!(csv.lines().count(), 2 + 501);
    let side: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("out/campaign_s2_simulate.json"))).unwrap();
    assert!(side["energy_J"].as_f64().unwrap() > 0.0);
    assert_eq!(side["settings"]["law"], "linear");
    assert!(side["settings"]["gain"].as_f64().unwrap() > 0.0);
}

#[test]
fn freewheeling_from_equilibrium_harvests_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("freewheel.toml");
    let o = run_in(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&read(dir.path().join("out/freewheel_s2_simulate.json"))).unwrap();
    let e = side["energy_J"].as_f64().unwrap();
    assert!(e.abs() < 1e-6, "freewheel energy {e}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["ccd", "--freeze-geometry", "--mode", "oloc", "--mode", "quadratic", "--horizon", "20", "--segments", "20"];
    for d in [&a, &b] {
        let o = run_in(d.path(), &args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for n in names {
        assert_eq!(read(a.path().join("out").join(&n)), read(b.path().join("out").join(&n)), "{n:?} differs");
    }
}

#[test]
fn ccd_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--freeze-geometry", "--horizon", "20", "--segments", "20", "--name", "rep"];
    let o = run_in(dir.path(), &[&["ccd"][..], &args].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_in(dir.path(), &[&["report"][..], &args].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let energy = read(out.join("rep_s2_report_table_energy.csv"));
    let rows: Vec<&str> = energy.lines().collect();
    assert_eq!(rows[1], "controller,energy_J,delta_percent,gain,status,cell");
    assert!(rows[2].starts_with("oloc,") && rows[2].ends_with("(ref)"));
    assert_eq!(rows.len(), 5);
    let geometry = read(out.join("rep_s2_report_fig_geometry.csv"));
    assert_eq!(geometry.lines().nth(1).unwrap(), "controller,r_mid_m,r_over_R,chord_m,twist_deg");
    let traj = read(out.join("rep_s2_report_fig_trajectories.csv"));
    assert_eq!(traj.lines().nth(1).unwrap(), "controller,t,v,omega,u,P,tsr");
    let cp = read(out.join("rep_s2_report_fig_cp.csv"));
    assert_eq!(cp.lines().nth(1).unwrap(), "controller,tsr,cp");
    let doc: serde_json::Value = serde_json::from_str(&read(out.join("rep_s2_report.json"))).unwrap();
    assert_eq!(doc["designs"].as_array().unwrap().len(), 3);
}

#[test]
fn report_refuses_mixed_config_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["bem-curve", "--name", "mix"]);
    assert_eq!(code(&o), 0);
    let o = run_in(dir.path(), &["simulate", "--name", "mix", "--horizon", "2"]);
    assert_eq!(code(&o), 0);
    let o = run_in(dir.path(), &["report", "--name", "mix", "--horizon", "2"]);
    assert_eq!(code(&o), 2);
    let rec = stderr_record(&o);
    assert_eq!(rec["error"], "config");
    assert!(rec["message"].as_str().unwrap().contains("mix_s2_cp_curve"));
}

#[test]
fn report_without_outputs_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["report", "--name", "empty"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bem-curve", "--scenario", "3"][..],
        &["oloc", "--dt", "-1"],
        &["simulate", "--constraint", "700", "--unconstrained"],
        &["frobnicate"],
    ] {
        let o = run_in(dir.path(), args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert_eq!(stderr_record(&o)["exit_code"], 2);
    }
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "u_max = \"lots\"\n").unwrap();
    let o = run_in(dir.path(), &["bem-curve", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_files_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["bem-curve", "--geometry", "no/such/blade.csv"]);
    assert_eq!(code(&o), 4);
    let o = run_in(dir.path(), &["bem-curve", "--config", "no/such/config.toml"]);
    assert_eq!(code(&o), 4);
    assert_eq!(stderr_record(&o)["error"], "io");
}

#[test]
fn unconverged_infeasible_open_loop_solve_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "horizon = 5.0\nn_segments = 5\n[solver]\nmax_iterations = 2\nmax_restarts = 0\n").unwrap();
    let o = run_in(dir.path(), &["oloc", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_record(&o)["error"], "solver");
    assert!(dir.path().join("out/campaign_s2_oloc.json").exists());
}

#[test]
fn help_exits_0() {
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("sensitivity"));
}
