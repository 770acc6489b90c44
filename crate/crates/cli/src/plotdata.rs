//! Per-curve plot data from `counts.csv` reports.
//!
//! Each curve is one `(family, t, count_kind, eps)` combination. Its x column
//! is the horizon when the curve stays within one stage, the stage when every
//! stage contributes a single row, and otherwise the curve is split per stage.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;

use crate::commands::Outcome;
use crate::output::{header_for, header_value, Writer};
use crate::CliError;

pub const REQUIRED: [&str; 8] = ["stage", "horizon", "eps", "count_kind", "count", "family", "t", "log_ratio"];

/// Which curves to emit; empty lists keep everything.
#[derive(Clone, Debug, Default)]
pub struct CurveFilter {
    pub families: Vec<String>,
    pub t: Vec<f64>,
    pub kinds: Vec<String>,
}

impl CurveFilter {
    fn keeps(&self, family: &str, t: &str, kind: &str) -> bool {
        (self.families.is_empty() || self.families.iter().any(|f| f == family))
            && (self.t.is_empty() || t.parse::<f64>().is_ok_and(|v| self.t.contains(&v)))
            && (self.kinds.is_empty() || self.kinds.iter().any(|k| k == kind))
    }
}

#[derive(Clone, Debug)]
struct Point {
    stage: u32,
    horizon: BigUint,
    log_ratio: String,
}

struct Report {
    path: PathBuf,
    hash: String,
    echo: String,
    curves: BTreeMap<(String, String, String, String), Vec<Point>>,
}

fn read_report(path: &Path, filter: &CurveFilter) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let hash = header_value(&text, "config_sha256").unwrap_or_else(|| "unknown".into());
    let echo = header_value(&text, "config").unwrap_or_default();
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let mut curves: BTreeMap<_, Vec<Point>> = BTreeMap::new();
    let Some(head) = lines.next() else {
        return Ok(Report { path: path.to_path_buf(), hash, echo, curves });
    };
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    let mut idx = [0usize; 8];
    for (i, name) in REQUIRED.iter().enumerate() {
        idx[i] = cols
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::config(format!("{}: missing column {name:?}", path.display())))?;
    }
    for (line_no, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| {
            CliError::config(format!("{}: data row {}: bad {what} in {line:?}", path.display(), line_no + 1))
        };
        if f.len() != cols.len() {
            return Err(bad("field count"));
        }
        let family = f[idx[5]];
        if family.is_empty() {
            continue;
        }
        let (t, kind, eps) = (f[idx[6]], f[idx[3]], f[idx[2]]);
        if !filter.keeps(family, t, kind) {
            continue;
        }
        let stage: u32 = f[idx[0]].parse().map_err(|_| bad("stage"))?;
        let horizon: BigUint = f[idx[1]].parse().map_err(|_| bad("horizon"))?;
        let log_ratio = f[idx[7]].to_string();
        log_ratio.parse::<f64>().map_err(|_| bad("log_ratio"))?;
        curves
            .entry((family.to_string(), t.to_string(), kind.to_string(), eps.to_string()))
            .or_default()
            .push(Point { stage, horizon, log_ratio });
    }
    Ok(Report { path: path.to_path_buf(), hash, echo, curves })
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

/// Writes one two-column CSV per curve and `manifest.csv`.
pub fn cmd_plotdata(reports: &[PathBuf], out: &Path, filter: &CurveFilter) -> Result<Outcome, CliError> {
    let parsed = reports.iter().map(|p| read_report(p, filter)).collect::<Result<Vec<_>, _>>()?;
    let mut w = Writer::new(out);
    let mut manifest = String::new();
    let hashes: Vec<&str> = parsed.iter().map(|r| r.hash.as_str()).collect();
    let _ = writeln!(manifest, "# sources={}", reports.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(manifest, "# config_sha256={}", hashes.join(" "));
    manifest.push_str("file,source,config_sha256,family,t,count_kind,eps,x,rows\n");
    let prefix_needed = parsed.len() > 1;
    for (ri, rep) in parsed.iter().enumerate() {
        for ((family, t, kind, eps), pts) in &rep.curves {
            let mut by_stage: BTreeMap<u32, Vec<&Point>> = BTreeMap::new();
            for p in pts {
                by_stage.entry(p.stage).or_default().push(p);
            }
            let mut groups: Vec<(Option<u32>, &str, Vec<&Point>)> = Vec::new();
            if by_stage.len() == 1 {
                groups.push((None, "horizon", pts.iter().collect()));
            } else if by_stage.values().all(|v| v.len() == 1) {
                groups.push((None, "stage", pts.iter().collect()));
            } else {
                for (s, v) in by_stage {
                    groups.push((Some(s), "horizon", v));
                }
            }
            for (stage, x, mut rows) in groups {
                if x == "stage" {
                    rows.sort_by_key(|p| p.stage);
                } else {
                    rows.sort_by(|a, b| a.horizon.cmp(&b.horizon));
                }
                let mut name = String::new();
                if prefix_needed {
                    let _ = write!(name, "r{ri}_");
                }
                let _ = write!(name, "{}_t{}_{}_eps{}", sanitize(family), sanitize(t), sanitize(kind), sanitize(eps));
                if let Some(s) = stage {
                    let _ = write!(name, "_n{s}");
                }
                name.push_str(".csv");
                let mut body = header_for(
                    &rep.hash,
                    &rep.echo,
                    &[("file", name.clone()), ("source", rep.path.display().to_string())],
                );
                let _ = writeln!(body, "{x},log_ratio");
                for p in &rows {
                    let xv = if x == "stage" { p.stage.to_string() } else { p.horizon.to_string() };
                    let _ = writeln!(body, "{xv},{}", p.log_ratio);
                }
                let _ = writeln!(
                    manifest,
                    "{name},{},{},{family},{t},{kind},{eps},{x},{}",
                    rep.path.display(),
                    rep.hash,
                    rows.len()
                );
                w.add(name, body);
            }
        }
    }
    let n_curves = w.names().count();
    w.add("manifest.csv", manifest);
    let files = w.flush()?;
    Ok(Outcome { stdout: format!("wrote {n_curves} curve files and manifest.csv\n"), files, status: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REPORT: &str = "# config_sha256=abc\n# config={}\n\
stage,horizon,eps,count_kind,count,family,t,log_ratio\n\
2,8,0.125,cover,10,,,\n\
2,8,0.125,cover,10,pol,1,0.1\n\
3,64,0.125,cover,20,pol,1,0.2\n\
4,512,0.125,cover,30,pol,1,0.3\n\
2,8,0.125,cover,10,ln,1,0.5\n";

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn one_row_per_stage_uses_stage_axis() {
        let dir = tempfile::tempdir().unwrap();
        let rep = write(dir.path(), "counts.csv", REPORT);
        let out = dir.path().join("plots");
        let filter = CurveFilter { families: vec!["pol".into()], ..Default::default() };
        cmd_plotdata(&[rep], &out, &filter).unwrap();
        let body = std::fs::read_to_string(out.join("pol_t1_cover_eps0.125.csv")).unwrap();
        let data: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, ["stage,log_ratio", "2,0.1", "3,0.2", "4,0.3"]);
        assert!(body.contains("# config_sha256=abc"));
    }

    #[test]
    fn missing_column_names_file_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let rep = write(dir.path(), "bad.csv", "stage,horizon,eps,count_kind,count,family,t\n");
        let err = cmd_plotdata(&[rep], &dir.path().join("o"), &CurveFilter::default()).unwrap_err();
        assert!(err.message.contains("bad.csv") && err.message.contains("log_ratio"), "{}", err.message);
    }
}
