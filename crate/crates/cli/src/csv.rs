//! Plot-ready CSV: `# key=value` provenance lines, a `t_ps,value` header,
//! then one row per sample. Numbers use the shortest representation that
//! parses back to the same f64, so a file round-trips bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lrlab_core::{TimeSeries, HBAR_MEV_PS};

#[derive(Debug)]
pub struct CsvError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for CsvError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub const HEADER: &str = "t_ps,value";

/// Shortest round-trip form; plain decimals in the readable range,
/// exponent notation outside it.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn render(series: &TimeSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# label={}", one_line(&series.label));
    if !series.provenance.iter().any(|(k, _)| k == "hbar_meV_ps") {
        let _ = writeln!(out, "# hbar_meV_ps={HBAR_MEV_PS}");
    }
    for (k, v) in &series.provenance {
        let _ = writeln!(out, "# {}={}", one_line(k), one_line(v));
    }
    out.push_str(HEADER);
    out.push('\n');
    for (t, v) in series.times.iter().zip(&series.values) {
        let _ = writeln!(out, "{},{}", format_f64(*t), format_f64(*v));
    }
    out
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

pub fn emit_csv(series: &TimeSeries, path: &Path) -> Result<(), CsvError> {
    let wrap = |source| CsvError {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    fs::write(path, render(series)).map_err(wrap)
}

/// Parses a file written by [`render`].
pub fn parse(text: &str) -> Result<TimeSeries, String> {
    let mut label = String::new();
    let mut provenance = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut header_seen = false;
    for (i, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| format!("line {}: provenance without `=`", i + 1))?;
            if k == "label" {
                label = v.to_string();
            } else {
                provenance.push((k.to_string(), v.to_string()));
            }
        } else if line == HEADER {
            header_seen = true;
            break;
        } else {
            return Err(format!("line {}: expected provenance or `{HEADER}`", i + 1));
        }
    }
    if !header_seen {
        return Err(format!("missing `{HEADER}` header"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected two columns", i + 1))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        times.push(num(t)?);
        values.push(num(v)?);
    }
    let mut series = TimeSeries::new(label, times, values).map_err(|e| e.to_string())?;
    series.provenance = provenance;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_series_prints_bare_zeros() {
        let s = TimeSeries::new("z", vec![0.0, 0.5], vec![0.0, 0.0]).unwrap();
        let text = render(&s);
        assert!(text.ends_with("t_ps,value\n0,0\n0.5,0\n"), "{text}");
        assert!(text.contains("# hbar_meV_ps=0.6582119569\n"));
    }

    #[test]
    fn small_and_large_values_use_exponents() {
        assert_eq!(format_f64(1.5e-7), "1.5e-7");
        assert_eq!(format_f64(2.5e20), "2.5e20");
        assert_eq!(format_f64(0.25), "0.25");
    }
}
