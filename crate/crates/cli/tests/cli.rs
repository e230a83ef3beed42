use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rydex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydex")).args(args).output().expect("binary runs")
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn chern_writes_tables_report_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rydex(&["chern", "--out", out_dir(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["chern_raw.csv", "checks.csv", "report.json", "config.toml", "chern.svg"] {
        assert!(tmp.path().join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["report"]["id"], "chern");
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = rydex(&["transfer", "--ensemble", "10", "--seed", "3", "--no-plot", "--out", out_dir(d.path())]);
        assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "ensembles.csv"));
    for n in names {
        if n == "report.json" || n == "config.toml" {
            // These echo the output directory.
            continue;
        }
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
    let ens = fs::read_to_string(a.path().join("ensembles.csv")).unwrap();
    assert!(ens.lines().any(|l| l.starts_with("effective_peak_fidelity,") && l.contains(",10,")), "{ens}");
}

#[test]
fn failed_check_sets_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("chern.toml");
    fs::write(&cfg, "experiment = \"chern\"\n[chern]\ngrids = [16]\nexpected = [0, 0, 0]\n").unwrap();
    let o = rydex(&["chern", "--config", cfg.to_str().unwrap(), "--no-plot", "--out", out_dir(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL chern_grid_16"));
}

#[test]
fn config_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"pump\"\n\n[pump]\nperiod = 27.7\n").unwrap();
    let o = rydex(&["pump", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 4") && e.contains("unit"), "{e}");

    let o = rydex(&["bound", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = rydex(&["chern", "--ensemble", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no ensemble"));
}

#[test]
fn printed_config_reparses_to_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pump.toml");
    fs::write(&cfg, "experiment = \"pump\"\n[pump]\nomega = \"5 MHz\"\nperiod = \"27.7 us\"\n").unwrap();
    let first = rydex(&["run", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let text = stdout(&first);
    assert!(text.contains("#   pump.delta") && !text.contains("#   pump.omega"), "{text}");
    let again = tmp.path().join("again.toml");
    fs::write(&again, &text).unwrap();
    let second = rydex(&["run", "--config", again.to_str().unwrap(), "--print-config"]);
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&stdout(&second)), body(&text));
}

#[test]
fn pump_on_a_longer_chain_passes_with_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pump.toml");
    fs::write(&cfg, "experiment = \"pump\"\nengines = [\"effective\"]\n[pump]\nn = 15\ncell = 1\nsamples = 60\n").unwrap();
    let o = rydex(&["pump", "--config", cfg.to_str().unwrap(), "--threads", "1", "--out", out_dir(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("nn_displacement.csv")).unwrap();
    assert!(csv.contains("# seeds:") && csv.contains("# units:"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[1] - 1.0).abs() < 0.05, "{last:?}");
    let svg = fs::read_to_string(tmp.path().join("pump.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("nn_displacement"));
}

#[test]
fn no_plot_leaves_data_untouched() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(rydex(&["derive", "--out", out_dir(a.path())]).status.code(), Some(0));
    assert_eq!(rydex(&["derive", "--no-plot", "--out", out_dir(b.path())]).status.code(), Some(0));
    assert!(fs::read_dir(b.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".svg")));
    for e in fs::read_dir(b.path()).unwrap() {
        let name = e.unwrap().file_name();
        let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        if name == "report.json" || name == "config.toml" {
            // These echo the output directory and format list.
            continue;
        }
        assert_eq!(x, y, "{name:?}");
    }
}
