//! JSON run reports.

use std::fs;
use std::path::Path;

use lrlab_core::{Arrival, HBAR_MEV_PS};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::run::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct CurveRecord {
    pub label: String,
    pub file: Option<String>,
    /// What the arrival is measured against, e.g. `0.05 x 2s^2`.
    pub threshold: String,
    /// ps; `None` when the threshold is not reached on the grid.
    pub arrival_ps: Option<f64>,
}

impl CurveRecord {
    pub fn new(label: impl Into<String>, threshold: impl Into<String>, arrival: Arrival) -> CurveRecord {
        CurveRecord {
            label: label.into(),
            file: None,
            threshold: threshold.into(),
            arrival_ps: arrival.time(),
        }
    }
}

/// `numerator / denominator`, each an arrival time of a named curve.
#[derive(Debug, Clone, Serialize)]
pub struct Ratio {
    pub name: String,
    pub numerator: String,
    pub numerator_threshold: String,
    pub denominator: String,
    pub denominator_threshold: String,
    pub value: Option<f64>,
}

impl Ratio {
    pub fn of(name: impl Into<String>, num: &CurveRecord, den: &CurveRecord) -> Ratio {
        let value = match (num.arrival_ps, den.arrival_ps) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        Ratio {
            name: name.into(),
            numerator: num.label.clone(),
            numerator_threshold: num.threshold.clone(),
            denominator: den.label.clone(),
            denominator_threshold: den.threshold.clone(),
            value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveError {
    pub curve: String,
    pub message: String,
    pub failure: Failure,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub lrlab: &'static str,
    pub hbar_mev_ps: f64,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            lrlab: env!("CARGO_PKG_VERSION"),
            hbar_mev_ps: HBAR_MEV_PS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: ExperimentConfig,
    pub defaults_applied: Vec<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub curves: Vec<CurveRecord>,
    pub ratios: Vec<Ratio>,
    /// Free-form findings such as earliest-crossing comparisons.
    pub notes: Vec<String>,
    pub errors: Vec<CurveError>,
    pub timings: Vec<Timing>,
    pub versions: Versions,
}

impl RunReport {
    pub fn new(command: impl Into<String>, config: &ExperimentConfig) -> RunReport {
        RunReport {
            command: command.into(),
            config: config.clone(),
            defaults_applied: config.defaults_applied.clone(),
            seed: None,
            threads: None,
            curves: Vec::new(),
            ratios: Vec::new(),
            notes: Vec::new(),
            errors: Vec::new(),
            timings: Vec::new(),
            versions: Versions::default(),
        }
    }

    pub fn curve(&self, label: &str) -> Option<&CurveRecord> {
        self.curves.iter().find(|c| c.label == label)
    }

    pub fn ratio(&self, name: &str) -> Option<&Ratio> {
        self.ratios.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json() + "\n")
    }

    /// Human-readable summary for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.curves {
            let at = c.arrival_ps.map_or("beyond horizon".to_string(), |t| format!("{t:.4} ps"));
            out += &format!("{:<40} arrival {at} ({})\n", c.label, c.threshold);
        }
        for r in &self.ratios {
            let v = r.value.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            out += &format!("{:<40} {v} = {} / {}\n", r.name, r.numerator, r.denominator);
        }
        for n in &self.notes {
            out += &format!("note: {n}\n");
        }
        for e in &self.errors {
            out += &format!("error in {}: {}\n", e.curve, e.message);
        }
        out
    }
}
