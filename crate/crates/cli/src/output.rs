//! Data files: one CSV per series, an ensemble table and a JSON report.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rydex::experiments::ExperimentReport;
use rydex::observables::ObservableSeries;
use serde::Serialize;

use crate::config::Resolved;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// 17 significant digits, enough to read back every f64 exactly.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn column_names(shape: &[usize]) -> Vec<String> {
    match shape {
        [n] => (0..*n).map(|i| format!("v{i}")).collect(),
        [r, c] => (0..*r).flat_map(|i| (0..*c).map(move |j| format!("v{i}_{j}"))).collect(),
        _ => (0..shape.iter().product()).map(|i| format!("v{i}")).collect(),
    }
}

fn seed_list(report: &ExperimentReport, fallback: u64) -> String {
    let mut seeds: Vec<u64> = report.ensembles.iter().flat_map(|e| e.seeds.iter().copied()).collect();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.is_empty() {
        seeds.push(fallback);
    }
    if seeds.len() > 8 {
        format!("{}..{} ({} seeds)", seeds[0], seeds[seeds.len() - 1], seeds.len())
    } else {
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
    }
}

fn header(out: &mut String, report: &ExperimentReport, seed: u64) {
    let _ = writeln!(out, "# {VERSION}");
    let _ = writeln!(out, "# experiment: {}", report.id);
    let _ = writeln!(out, "# seeds: {}", seed_list(report, seed));
    let _ = writeln!(out, "# units: time us, rates rad/us, lengths um, positions in sites");
    for p in &report.parameters {
        let _ = writeln!(out, "# parameter {} = {} {}", p.name, num(p.value), p.unit);
    }
}

pub fn series_csv(report: &ExperimentReport, s: &ObservableSeries, seed: u64) -> String {
    let mut out = String::new();
    header(&mut out, report, seed);
    let _ = writeln!(out, "# series: {}", s.name);
    let _ = writeln!(out, "# note: {}", s.note);
    let _ = writeln!(out, "# shape: {:?}", s.shape);
    let mut cols = vec!["t".to_string()];
    cols.extend(column_names(&s.shape));
    let _ = writeln!(out, "{}", cols.join(","));
    for (t, rec) in s.times.iter().zip(&s.values) {
        let mut row = vec![num(*t)];
        row.extend(rec.iter().map(|&x| num(x)));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn ensembles_csv(report: &ExperimentReport, seed: u64) -> String {
    let mut out = String::new();
    header(&mut out, report, seed);
    let _ = writeln!(out, "name,mean,std,count,seeds");
    for e in &report.ensembles {
        let seeds: Vec<String> = e.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{},{},{},{},{}", e.name, num(e.mean), num(e.std), e.count, seeds.join(" "));
    }
    out
}

pub fn checks_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("name,pass,detail\n");
    for c in &report.checks {
        let _ = writeln!(out, "{},{},\"{}\"", c.name, c.pass, c.detail.replace('"', "'"));
    }
    out
}

#[derive(Serialize)]
struct Document<'a> {
    version: &'static str,
    passed: bool,
    defaulted: &'a [String],
    config: &'a crate::config::RunConfig,
    report: &'a ExperimentReport,
}

pub fn report_json(resolved: &Resolved, report: &ExperimentReport) -> String {
    let doc = Document { version: VERSION, passed: report.passed(), defaulted: &resolved.defaulted, config: &resolved.config, report };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// Safe file stem for a series name.
pub fn stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Writes the data files and returns their paths.
pub fn write_data(dir: &Path, resolved: &Resolved, report: &ExperimentReport, csv: bool, json: bool) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let seed = resolved.config.seed;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    if csv {
        for s in &report.series {
            put(format!("{}.csv", stem(&s.name)), series_csv(report, s, seed))?;
        }
        if !report.ensembles.is_empty() {
            put("ensembles.csv".into(), ensembles_csv(report, seed))?;
        }
        put("checks.csv".into(), checks_csv(report))?;
    }
    if json {
        put("report.json".into(), report_json(resolved, report))?;
    }
    put("config.toml".into(), resolved_toml(resolved))?;
    Ok(written)
}

/// The resolved config with a comment naming the defaulted keys.
pub fn resolved_toml(resolved: &Resolved) -> String {
    let mut out = format!("# {VERSION} resolved configuration\n");
    if !resolved.defaulted.is_empty() {
        out.push_str("# taken from defaults:\n");
        for k in &resolved.defaulted {
            let _ = writeln!(out, "#   {k}");
        }
    }
    out.push_str(&resolved.config.to_toml());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        let s = num(x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn series_table_has_header_and_rows() {
        let mut rep = ExperimentReport::new("demo");
        rep.param("omega", 1.5, "rad/us");
        let mut s = ObservableSeries::new("x", "two columns", vec![2]);
        s.push(0.0, vec![1.0, 2.0]).unwrap();
        s.push(0.5, vec![3.0, 4.0]).unwrap();
        let text = series_csv(&rep, &s, 3);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.contains(&"# seeds: 3"));
        assert!(lines.iter().any(|l| l.starts_with("# parameter omega = 1.5000000000000000e0 rad/us")));
        assert_eq!(lines[lines.len() - 3], "t,v0,v1");
        assert_eq!(lines[lines.len() - 1], "5.0000000000000000e-1,3.0000000000000000e0,4.0000000000000000e0");
    }
}
