//! Sampled curves t ↦ value with provenance, and threshold crossings.

use std::fmt;

use crate::error::{Error, Result};

/// Outcome of a threshold search on a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Arrival {
    /// Crossing time in ps.
    At(f64),
    /// The threshold is not reached within the sampled window.
    BeyondHorizon,
}

impl Arrival {
    pub fn time(self) -> Option<f64> {
        match self {
            Arrival::At(t) => Some(t),
            Arrival::BeyondHorizon => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Arrival::At(_))
    }
}

impl fmt::Display for Arrival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arrival::At(t) => write!(f, "{t:.4} ps"),
            Arrival::BeyondHorizon => f.write_str("beyond horizon"),
        }
    }
}

/// A time grid in ps with one value per point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Ordered key/value provenance record.
    pub provenance: Vec<(String, String)>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<TimeSeries> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        check_grid(&times)?;
        Ok(TimeSeries {
            label: label.into(),
            times,
            values,
            provenance: Vec::new(),
        })
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> TimeSeries {
        self.provenance.push((key.into(), value.to_string()));
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// First time where |value| ≥ `level`, linearly interpolated.
    pub fn first_crossing(&self, level: f64) -> Arrival {
        crossing(&self.times, &self.values, |v| v.abs(), level)
    }
}

/// First time where `f(value) ≥ level`, with linear interpolation between the
/// bracketing samples.
pub(crate) fn crossing(times: &[f64], values: &[f64], f: impl Fn(f64) -> f64, level: f64) -> Arrival {
    let mut prev: Option<(f64, f64)> = None;
    for (&t, &v) in times.iter().zip(values) {
        let y = f(v);
        if y >= level {
            return match prev {
                None => Arrival::At(t),
                Some((tp, yp)) => {
                    let frac = if y > yp { (level - yp) / (y - yp) } else { 1.0 };
                    Arrival::At(tp + frac.clamp(0.0, 1.0) * (t - tp))
                }
            };
        }
        prev = Some((t, y));
    }
    Arrival::BeyondHorizon
}

/// Requires a strictly increasing grid of finite times.
pub fn check_grid(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain("time grid contains non-finite values"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("time grid must be strictly increasing"));
    }
    Ok(())
}

/// `count` evenly spaced times from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        let s = TimeSeries::new("x", vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.5]).unwrap();
        assert_eq!(s.first_crossing(1.0), Arrival::At(1.5));
        assert_eq!(s.first_crossing(0.0), Arrival::At(0.0));
        assert_eq!(s.first_crossing(2.0), Arrival::BeyondHorizon);
    }

    #[test]
    fn grid_must_increase() {
        assert!(TimeSeries::new("x", vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(TimeSeries::new("x", vec![0.0], vec![]).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.0, 3.0, 4);
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(linspace(2.0, 5.0, 1), vec![2.0]);
    }
}
