use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn czgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_czgate")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .parse()
        .unwrap()
}

const TABLE1_DEVICE: &str = "[device]
nu_q1_ghz = 6.6
nu_q2_ghz = 6.5
nu_b_ghz = 6.0
eta_1_ghz = 0.2
eta_2_ghz = 0.2
g_b1_mhz = 75.0
g_b2_mhz = 75.0
";

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn missing_config_is_a_config_error() {
    assert_eq!(czgate(&["analytics"]).status.code(), Some(2));
}

#[test]
fn unknown_key_and_bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        format!("{TABLE1_DEVICE}speed_of_light = 1.0\n"),
        format!("{TABLE1_DEVICE}\n[numerics]\ndt = 0.01\n"),
        format!("{TABLE1_DEVICE}\n[numerics]\ndt_ns = -0.01\n"),
        TABLE1_DEVICE.replace("g_b1_mhz = 75.0", "g_b1_mhz = 900.0"),
        "[device\n".to_string(),
    ] {
        let cfg = write_config(dir.path(), &body);
        let o = czgate(&["analytics", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(!o.stderr.is_empty());
    }
    let missing = dir.path().join("absent.toml");
    assert_eq!(czgate(&["spectrum", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn analytics_reports_the_table1_estimates() {
    let o = czgate(&["analytics", "--config", fixture("table1_idle.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!((report_value(&text, "g_eff_200_101_MHz") - 19.2).abs() < 0.1);
    assert!((report_value(&text, "t_2pi_ns") - 26.0).abs() < 0.5);
    let t_cp = report_value(&text, "t_cp_ns");
    assert!((123.0..=137.0).contains(&t_cp), "{t_cp}");
}

#[test]
fn verify_subset_passes_on_table1() {
    let o = czgate(&["verify", "--only", "1,2,3", "--config", fixture("table1_idle.toml").to_str().unwrap()]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for (k, line) in lines[..3].iter().enumerate() {
        assert!(line.starts_with(&format!("criterion={} ", k + 1)), "{line}");
        assert!(line.contains("result=PASS"), "{line}");
    }
    assert_eq!(lines[3], "summary result=PASS");
}

#[test]
fn weak_coupling_fails_as_expected() {
    let o = czgate(&["verify", "--only", "1,2,3", "--config", fixture("weak_coupling.toml").to_str().unwrap()]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("criterion=1 ") && text.lines().next().unwrap().contains("result=XFAIL"), "{text}");
    assert!(text.lines().nth(1).unwrap().contains("result=XFAIL"), "{text}");
    // the ZZ comparison fixes its own couplings and is unaffected
    assert!(text.lines().nth(2).unwrap().contains("result=PASS"), "{text}");
}

#[test]
fn unexpected_failure_exits_nonzero() {
    // the weak device without its expected-failure list
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(fixture("weak_coupling.toml")).unwrap().replace("expected_failures = [1, 2, 4]", "");
    let cfg = write_config(dir.path(), &body);
    let o = czgate(&["verify", "--only", "1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("summary result=FAIL"));
}

#[test]
fn unknown_criterion_is_rejected() {
    let o = czgate(&["verify", "--only", "9", "--config", fixture("table1_idle.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_output_is_deterministic_and_labeled_in_ghz() {
    let cfg = fixture("table1_idle.toml");
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let o = czgate(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0));
            fs::read(dir.path().join("levels.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);

    let text = String::from_utf8(runs[0].clone()).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "t_ns");
    assert!(header.iter().skip(1).filter(|h| *h != "labeling" && *h != "ambiguous").all(|h| h.ends_with("_GHz")));
    let col = header.iter().position(|h| h == "bare_nu_200_GHz").unwrap();
    let first = rdr.records().next().unwrap().unwrap();
    assert_eq!(first[col].parse::<f64>().unwrap(), 13.0);
}

#[test]
fn uncoupled_device_has_bare_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{}\n[pulse]\ntype = \"single-step\"\nundershoot_mhz = 9.59\nt_undershoot_ns = 29.1\n\n[numerics]\nsample_dt_ns = 5.0\n",
        TABLE1_DEVICE.replace("75.0", "0.0")
    );
    let cfg = write_config(dir.path(), &body);
    let o = czgate(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("levels.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let pairs: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let label = h.strip_prefix("nu_")?.strip_suffix("_GHz")?;
            let bare = header.iter().position(|b| b == format!("bare_nu_{label}_GHz"))?;
            Some((i, bare))
        })
        .collect();
    assert_eq!(pairs.len(), 27);
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for &(d, b) in &pairs {
            assert_eq!(rec[d].parse::<f64>().unwrap(), rec[b].parse::<f64>().unwrap());
        }
    }
}

#[test]
fn evolve_scores_the_fig3_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let o = czgate(&[
        "evolve",
        "--config",
        fixture("fig3_optimum.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let total = report_value(&text, "total");
    assert!(total < 1.2e-4, "{total}");
    assert!(report_value(&text, "unitarity_defect") < 1e-9);
    assert!(report_value(&text, "overlap_completeness_defect") < 1e-9);
    for f in ["gate.csv", "report.txt", "trajectory.csv", "overlaps.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let gate = fs::read_to_string(dir.path().join("gate.csv")).unwrap();
    assert!(gate.starts_with("row,col,magnitude,phase_rad\n"));
    assert_eq!(gate.lines().count(), 17);
}

#[test]
fn dt_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = czgate(&[
        "evolve",
        "--config",
        fixture("table1_idle.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--dt",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report_value(&stdout(&o), "dt_ns"), 0.5);
}

#[test]
fn infeasible_optimization_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{TABLE1_DEVICE}\n[pulse]\ntype = \"single-step\"\n\n[numerics]\ndt_ns = 0.05\n\n[optimize]\nmax_evals_per_restart = 4\nmax_restarts = 0\n"
    );
    let cfg = write_config(dir.path(), &body);
    let o = czgate(&["optimize", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    let evals = report_value(&text, "evaluations") as usize;
    assert!((3..=4).contains(&evals));
    let log = fs::read_to_string(dir.path().join("optimization_log.csv")).unwrap();
    assert!(log.starts_with("eval,restart,undershoot_mhz,t_undershoot_ns,error_1,"));
    assert_eq!(log.lines().count(), evals + 1);
}

#[test]
fn optimizing_idle_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = czgate(&[
        "optimize",
        "--config",
        fixture("table1_idle.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
