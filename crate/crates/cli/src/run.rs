//! The `bounds`, `evolve` and `commutator` experiments.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lrlab_core::dynamics::{fit_velocity, signal_arrivals};
use lrlab_core::{
    arrival_time, commutator_norm_series, gibbs_state, optimize_xi, Arrival, Axis, BoundCurve, BoundKind, BoundSpec,
    Error, Evolution, LocalOperator, OldBound, OneDBound, PathSumBound, PathSumOptions, Spin, SpinSystem,
    TildeBound, TildeConvBound, TimeSeries,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, XiChoice};
use crate::csv::emit_csv;
use crate::report::{CurveError, CurveRecord, Ratio, RunReport, Timing};
use crate::svg;

/// Exit-code class of a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Failure {
    Resource,
    Numeric,
    Other,
}

impl Failure {
    pub fn of(e: &Error) -> Failure {
        if e.is_resource() {
            Failure::Resource
        } else if matches!(e, Error::Numeric(_)) {
            Failure::Numeric
        } else {
            Failure::Other
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Resource => 3,
            Failure::Numeric => 4,
            Failure::Other => 1,
        }
    }
}

/// Most severe failure recorded in a report, if any.
pub fn worst_failure(report: &RunReport) -> Option<Failure> {
    let f = |c: &CurveError| c.failure;
    let all: Vec<Failure> = report.errors.iter().map(f).collect();
    [Failure::Resource, Failure::Numeric, Failure::Other]
        .into_iter()
        .find(|k| all.contains(k))
}

pub(crate) fn record_error(report: &mut RunReport, curve: &str, e: &Error) {
    log::error!("{curve}: {e}");
    report.errors.push(CurveError {
        curve: curve.to_string(),
        message: e.to_string(),
        failure: Failure::of(e),
    });
}

/// Writes one series to `<out>/<label>.csv` and records it.
pub(crate) fn write_series(report: &mut RunReport, out: &Path, series: &TimeSeries, mut record: CurveRecord) {
    let path = out.join(format!("{}.csv", series.label));
    match emit_csv(series, &path) {
        Ok(()) => record.file = Some(path.display().to_string()),
        Err(e) => report.errors.push(CurveError {
            curve: series.label.clone(),
            message: e.to_string(),
            failure: Failure::Other,
        }),
    }
    report.curves.push(record);
}

pub(crate) fn write_svg(report: &mut RunReport, out: &Path, name: &str, series: &[&TimeSeries]) {
    let path = out.join(format!("{name}.svg"));
    let result = std::fs::create_dir_all(out).and_then(|_| std::fs::write(&path, svg::line_plot(name, series)));
    if let Err(e) = result {
        report.errors.push(CurveError {
            curve: name.to_string(),
            message: format!("{}: {e}", path.display()),
            failure: Failure::Other,
        });
    }
}

pub(crate) fn spin_tag(spin: Spin) -> String {
    spin.to_string().replace('/', "_")
}

pub(crate) fn norm_tag(norm: f64) -> String {
    format!("{norm}").replace('.', "p")
}

pub(crate) fn s_z(system: &SpinSystem, site: usize) -> LocalOperator {
    LocalOperator::spin_component(site, system.spin(site), Axis::Z)
}

/// A bound ready to be sampled, with its file label.
pub struct LabeledBound {
    pub label: String,
    pub spec: BoundSpec,
}

/// The bounds selected in `cfg` for one spin value. Perturbation bounds are
/// built once per tip strength and skipped without a `[tip]` section.
pub fn bound_specs(cfg: &ExperimentConfig, system: &SpinSystem, spin: Spin) -> Vec<Result<LabeledBound, (String, Error)>> {
    let b = &cfg.bounds;
    let s = spin.value();
    let tag = spin_tag(spin);
    let mut out = Vec::new();
    for &kind in &b.kinds {
        let label = format!("{}_s{tag}", kind.tag());
        let single = |spec: lrlab_core::Result<BoundSpec>| spec.map(|spec| LabeledBound { label: label.clone(), spec }).map_err(|e| (label.clone(), e));
        match kind {
            BoundKind::OldL => {
                let xi = match b.xi {
                    XiChoice::Fixed(x) => Ok(x),
                    XiChoice::Optimize => optimize_xi(system, b.from, b.to, b.threshold).map(|o| o.xi),
                };
                out.push(single(xi.and_then(|xi| {
                    let mut old = OldBound::new(system, b.from, b.to, xi)?;
                    old.clamp = b.clamp;
                    Ok(BoundSpec::Old(old))
                })));
            }
            BoundKind::NewBPathsum => {
                let opts = PathSumOptions {
                    norm_a: s,
                    norm_b: s,
                    clamp: b.clamp,
                    ..PathSumOptions::default()
                };
                out.push(single(PathSumBound::new(system, &[b.from], &[b.to], opts).map(BoundSpec::PathSum)));
            }
            BoundKind::NewB1d => {
                out.push(single(one_d(system, b.from, b.to, b.clamp).map(BoundSpec::OneD)));
            }
            BoundKind::TildeB | BoundKind::TildeBConv => {
                let Some(tip) = &cfg.tip else {
                    out.push(Err((label, Error::Domain("perturbation bounds need a [tip] section".into()))));
                    continue;
                };
                for norm in tip.norms(spin) {
                    let label = format!("{label}_P{}", norm_tag(norm));
                    let spec = if kind == BoundKind::TildeB {
                        TildeBound::new(norm, s).map(BoundSpec::Tilde)
                    } else {
                        one_d(system, tip.site, b.to, true)
                            .and_then(|inner| TildeConvBound::new(inner, norm, s))
                            .map(BoundSpec::TildeConv)
                    };
                    out.push(spec.map(|spec| LabeledBound { label: label.clone(), spec }).map_err(|e| (label, e)));
                }
            }
        }
    }
    out
}

fn one_d(system: &SpinSystem, x: usize, y: usize, clamp: bool) -> lrlab_core::Result<OneDBound> {
    let mut b = OneDBound::for_system(system, x, y)?;
    b.clamp = clamp;
    Ok(b)
}

pub(crate) fn threshold_text(fraction: f64, spec: &BoundSpec) -> String {
    format!("{fraction} x {}", spec.reference_level())
}

/// Samples every selected bound for every spin and records arrivals.
/// Returns the sampled curves in order.
pub fn run_bounds_into(cfg: &ExperimentConfig, out: &Path, report: &mut RunReport) -> Vec<(String, BoundCurve)> {
    let times = cfg.time.times();
    let mut curves = Vec::new();
    for &spin in &cfg.system.spins {
        let system = match cfg.system.build(spin) {
            Ok(s) => s,
            Err(e) => {
                record_error(report, &format!("system_s{}", spin_tag(spin)), &e);
                continue;
            }
        };
        let specs = bound_specs(cfg, &system, spin);
        let started = Instant::now();
        let sampled: Vec<_> = specs
            .into_par_iter()
            .map(|r| r.and_then(|lb| BoundCurve::sample(lb.spec, &times).map(|c| (lb.label.clone(), c)).map_err(|e| (lb.label, e))))
            .collect();
        for r in sampled {
            match r {
                Ok((label, curve)) => {
                    let arrival = arrival_time(&curve, cfg.bounds.threshold);
                    let arrival = match arrival {
                        Ok(a) => a,
                        Err(e) => {
                            record_error(report, &label, &e);
                            Arrival::BeyondHorizon
                        }
                    };
                    let series = curve.to_series(label.clone()).with("threshold_fraction", cfg.bounds.threshold);
                    let record = CurveRecord::new(&label, threshold_text(cfg.bounds.threshold, &curve.spec), arrival);
                    write_series(report, out, &series, record);
                    curves.push((label, curve));
                }
                Err((label, e)) => record_error(report, &label, &e),
            }
        }
        report.timings.push(Timing {
            label: format!("bounds_s{}", spin_tag(spin)),
            seconds: started.elapsed().as_secs_f64(),
        });
        let tag = spin_tag(spin);
        let old = report.curve(&format!("old_L_s{tag}")).cloned();
        for new in ["new_B_1d", "new_B_pathsum"] {
            if let (Some(o), Some(n)) = (&old, report.curve(&format!("{new}_s{tag}")).cloned()) {
                report.ratios.push(Ratio::of(format!("{new}/old_L_s{tag}"), &n, o));
            }
        }
    }
    if cfg.output.svg && !curves.is_empty() {
        let series: Vec<TimeSeries> = curves.iter().map(|(l, c)| c.to_series(l.clone())).collect();
        let refs: Vec<&TimeSeries> = series.iter().collect();
        write_svg(report, out, "bounds", &refs);
    }
    curves
}

pub fn run_bounds(cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let mut report = RunReport::new("bounds", cfg);
    let started = Instant::now();
    run_bounds_into(cfg, out, &mut report);
    report.timings.push(Timing {
        label: "total".into(),
        seconds: started.elapsed().as_secs_f64(),
    });
    report
}

/// One ⟨S^z_j⟩(t) series after the tip is switched on.
#[derive(Debug, Clone)]
pub struct Response {
    pub norm: f64,
    pub site: usize,
    pub series: TimeSeries,
    pub arrival: Arrival,
}

/// Switches the tip on at each configured strength and tracks ⟨S^z_j⟩ at
/// the observed sites. Strengths run in parallel; results come back in
/// config order.
pub fn run_evolve_into(cfg: &ExperimentConfig, out: &Path, report: &mut RunReport, norms: Option<&[f64]>) -> Vec<Response> {
    let Some(tip) = &cfg.tip else {
        record_error(report, "evolve", &Error::Domain("evolve needs a [tip] section".into()));
        return Vec::new();
    };
    let times = cfg.time.times();
    let mut responses = Vec::new();
    for &spin in &cfg.system.spins {
        let tag = spin_tag(spin);
        let started = Instant::now();
        let prepared = cfg.system.build(spin).and_then(|system| {
            let h = system.sparse_hamiltonian(None)?;
            let state = gibbs_state(&h, cfg.thermal.beta)?;
            Ok((system, state))
        });
        let (system, state) = match prepared {
            Ok(p) => p,
            Err(e) => {
                record_error(report, &format!("thermal_state_s{tag}"), &e);
                continue;
            }
        };
        report.timings.push(Timing {
            label: format!("thermal_state_s{tag}"),
            seconds: started.elapsed().as_secs_f64(),
        });
        let space = system.space();
        let params: Vec<_> = tip
            .parameters(spin)
            .into_iter()
            .filter(|p| norms.map_or(true, |ns| ns.iter().any(|&n| (n - p.prefactor() * spin.value()).abs() < 1e-12)))
            .collect();

        let runs: Vec<_> = params
            .par_iter()
            .map(|p| {
                let norm = p.prefactor() * spin.value();
                let label = format!("evolve_s{tag}_P{}", norm_tag(norm));
                let started = Instant::now();
                let result = (|| {
                    let pm = system.tip_term(p)?.operator().to_sparse(&space)?;
                    let observables = cfg
                        .observe
                        .sites
                        .iter()
                        .map(|&j| s_z(&system, j).to_sparse(&space))
                        .collect::<lrlab_core::Result<Vec<_>>>()?;
                    let refs: Vec<_> = observables.iter().collect();
                    let evo = Evolution::new(&state, Some(&pm), &refs, cfg.observe.method)?;
                    observables
                        .iter()
                        .map(|a| evo.observe(a, &times))
                        .collect::<lrlab_core::Result<Vec<_>>>()
                        .map(|v| (v, evo.is_dense()))
                })();
                (norm, label, result, started.elapsed().as_secs_f64())
            })
            .collect();

        for (norm, label, result, seconds) in runs {
            report.timings.push(Timing { label: label.clone(), seconds });
            let (values, dense) = match result {
                Ok(v) => v,
                Err(e) => {
                    record_error(report, &label, &e);
                    continue;
                }
            };
            let mut distances = Vec::new();
            let mut arrivals = Vec::new();
            for (&site, v) in cfg.observe.sites.iter().zip(values) {
                let curve = format!("Sz{}_s{tag}_P{}", site + 1, norm_tag(norm));
                let series = match TimeSeries::new(&curve, times.clone(), v) {
                    Ok(s) => s
                        .with("observable", format!("Sz_{}", site + 1))
                        .with("tip_site", tip.site + 1)
                        .with("tip_direction", format!("{:?}", tip.direction))
                        .with("normP_meV", norm)
                        .with("s", spin)
                        .with("beta_per_meV", cfg.thermal.beta)
                        .with("method", if dense { "dense" } else { "krylov" }),
                    Err(e) => {
                        record_error(report, &curve, &e);
                        continue;
                    }
                };
                let eps = cfg.observe.epsilon * spin.value();
                let arrival = match lrlab_core::signal_arrival(&series, eps) {
                    Ok(a) => a,
                    Err(e) => {
                        record_error(report, &curve, &e);
                        Arrival::BeyondHorizon
                    }
                };
                let threshold = format!("|dSz| >= {eps}");
                write_series(report, out, &series, CurveRecord::new(&curve, threshold, arrival));
                let scaled: Vec<f64> = cfg.observe.epsilons.iter().map(|e| e * spin.value()).collect();
                if let Ok(all) = signal_arrivals(&series, &scaled) {
                    let text: Vec<String> = scaled.iter().zip(&all).map(|(e, a)| format!("eps={e}: {a}")).collect();
                    report.notes.push(format!("{curve} arrival sensitivity: {}", text.join(", ")));
                }
                distances.push(system.lattice().distance(tip.site, site) as f64);
                arrivals.push(arrival);
                responses.push(Response {
                    norm,
                    site,
                    series,
                    arrival,
                });
            }
            if let Some(fit) = (distances.len() >= 3).then(|| fit_velocity(&distances, &arrivals).ok()).flatten() {
                report.notes.push(format!(
                    "{label}: fitted speed {:.4} sites/ps ({:.4} meV*site), R^2 = {:.4}",
                    fit.speed(),
                    fit.speed_mev_site(),
                    fit.r_squared
                ));
            }
        }
    }
    if cfg.output.svg && !responses.is_empty() {
        let refs: Vec<&TimeSeries> = responses.iter().map(|r| &r.series).collect();
        write_svg(report, out, "evolve", &refs);
    }
    responses
}

pub fn run_evolve(cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let mut report = RunReport::new("evolve", cfg);
    let started = Instant::now();
    run_evolve_into(cfg, out, &mut report, None);
    report.timings.push(Timing {
        label: "total".into(),
        seconds: started.elapsed().as_secs_f64(),
    });
    report
}

/// Exact ‖[S^z_from(t), S^z_to]‖ next to each selected commutator bound,
/// with the smallest slack found.
pub fn run_commutator(cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let mut report = RunReport::new("commutator", cfg);
    let started = Instant::now();
    let times = cfg.time.times();
    let (from, to) = (cfg.bounds.from, cfg.bounds.to);
    let bounds = run_bounds_into(cfg, out, &mut report);
    for &spin in &cfg.system.spins {
        let tag = spin_tag(spin);
        let label = format!("commutator_s{tag}");
        let exact = cfg.system.build(spin).and_then(|system| {
            let h = system.sparse_hamiltonian(None)?;
            commutator_norm_series(&h, &system.space(), &s_z(&system, from), &s_z(&system, to), &times)
        });
        let series = match exact {
            Ok(s) => s.with("x_site", from + 1).with("y_site", to + 1).with("s", spin),
            Err(e) => {
                record_error(&mut report, &label, &e);
                continue;
            }
        };
        let level = cfg.bounds.threshold * 2.0 * spin.value() * spin.value();
        let arrival = series.first_crossing(level);
        let series = TimeSeries { label: label.clone(), ..series };
        for (name, curve) in bounds.iter().filter(|(l, _)| l.ends_with(&format!("_s{tag}"))) {
            if matches!(curve.kind(), BoundKind::TildeB | BoundKind::TildeBConv) {
                continue;
            }
            let slack = curve
                .values
                .iter()
                .zip(&series.values)
                .map(|(b, c)| b - c)
                .fold(f64::INFINITY, f64::min);
            report.notes.push(format!("{name} - {label}: minimum slack {slack:.3e}"));
        }
        let record = CurveRecord::new(&label, format!("{} x {}", cfg.bounds.threshold, 2.0 * spin.value() * spin.value()), arrival);
        write_series(&mut report, out, &series, record);
    }
    report.timings.push(Timing {
        label: "total".into(),
        seconds: started.elapsed().as_secs_f64(),
    });
    report
}

/// `<out>/<name>.json`.
pub fn report_path(out: &Path, name: &str) -> PathBuf {
    out.join(format!("{name}.json"))
}
