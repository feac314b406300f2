//! Signal detection on observable series and velocity fits.

use crate::error::{Error, Result};
use crate::model::{SpinSystem, TipParameters};
use crate::series::{crossing, Arrival, TimeSeries};
use crate::spin::{Axis, LocalOperator};
use crate::units::HBAR_MEV_PS;

use super::{Evolution, EvolutionMethod, ThermalState};

/// First time with |value(t) − value(0)| ≥ `epsilon`, linearly interpolated.
pub fn signal_arrival(series: &TimeSeries, epsilon: f64) -> Result<Arrival> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let Some(&v0) = series.values.first() else {
        return Ok(Arrival::BeyondHorizon);
    };
    Ok(crossing(&series.times, &series.values, |v| (v - v0).abs(), epsilon))
}

/// [`signal_arrival`] for several thresholds at once.
pub fn signal_arrivals(series: &TimeSeries, epsilons: &[f64]) -> Result<Vec<Arrival>> {
    epsilons.iter().map(|&e| signal_arrival(series, e)).collect()
}

/// Least-squares fit t = intercept + slope·distance.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFit {
    /// ps per site.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (distance, arrival in ps) pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
}

impl VelocityFit {
    /// Sites per ps.
    pub fn speed(&self) -> f64 {
        1.0 / self.slope
    }

    /// Speed times ħ, in meV·site: the unit the bound velocities are quoted in.
    pub fn speed_mev_site(&self) -> f64 {
        self.speed() * HBAR_MEV_PS
    }
}

/// Fits arrival time against distance over the finite arrivals.
pub fn fit_velocity(distances: &[f64], arrivals: &[Arrival]) -> Result<VelocityFit> {
    if distances.len() != arrivals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} distances vs {} arrivals",
            distances.len(),
            arrivals.len()
        )));
    }
    let points: Vec<(f64, f64)> = distances
        .iter()
        .zip(arrivals)
        .filter_map(|(&d, a)| a.time().map(|t| (d, t)))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "velocity fit needs 3 finite arrivals, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all arrivals at the same distance".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::Numeric(format!(
            "arrival time does not grow with distance (slope {slope:e})"
        )));
    }
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(VelocityFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points,
    })
}

/// Switches the tip on, tracks ⟨S^z_j⟩ at each of `sites` and fits arrival
/// time against distance from the tip.
pub fn estimate_velocity(
    system: &SpinSystem,
    tip: &TipParameters,
    state: &ThermalState,
    sites: &[usize],
    epsilon: f64,
    times_ps: &[f64],
) -> Result<VelocityFit> {
    let space = system.space();
    let p = system.tip_term(tip)?.operator().to_sparse(&space)?;
    let observables = sites
        .iter()
        .map(|&j| {
            if j >= system.sites() {
                return Err(Error::domain(format!("site {j} outside the lattice")));
            }
            LocalOperator::spin_component(j, system.spin(j), Axis::Z).to_sparse(&space)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = observables.iter().collect();
    let evo = Evolution::new(state, Some(&p), &refs, EvolutionMethod::Auto)?;
    let mut distances = Vec::with_capacity(sites.len());
    let mut arrivals = Vec::with_capacity(sites.len());
    for (&j, a) in sites.iter().zip(&observables) {
        let values = evo.observe(a, times_ps)?;
        let series = TimeSeries::new(format!("Sz_{j}"), times_ps.to_vec(), values)?;
        distances.push(system.lattice().distance(tip.site, j) as f64);
        arrivals.push(signal_arrival(&series, epsilon)?);
    }
    fit_velocity(&distances, &arrivals)
}
