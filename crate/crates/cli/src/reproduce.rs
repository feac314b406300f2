//! Figure presets: bound comparison on a long chain (`fig2`), bound against
//! exact tip response (`fig3a`), and perturbation bounds against the
//! closed form (`fig3b`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use lrlab_core::bounds::xi_weight;
use lrlab_core::{BoundKind, Spin};

use crate::config::{parse_config, ConfigError, ExperimentConfig, TipStrength};
use crate::report::{CurveRecord, Ratio, RunReport, Timing};
use crate::run::{norm_tag, run_bounds_into, run_evolve_into, spin_tag};

pub const FIG2_PRESET: &str = include_str!("../presets/fig2.cfg");
pub const FIG3_PRESET: &str = include_str!("../presets/fig3.cfg");

/// Absolute level used to compare when curves first become visible.
pub const RISE_LEVEL: f64 = 1e-3;

/// Tip strengths (meV) of the exact runs in `fig3a`.
pub const FIG3A_NORMS: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3a,
    Fig3b,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
        }
    }

    pub fn preset_text(self) -> &'static str {
        match self {
            Figure::Fig2 => FIG2_PRESET,
            Figure::Fig3a | Figure::Fig3b => FIG3_PRESET,
        }
    }

    pub fn preset(self) -> Result<ExperimentConfig, ConfigError> {
        parse_config(self.preset_text())
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Figure, String> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3a" => Ok(Figure::Fig3a),
            "fig3b" => Ok(Figure::Fig3b),
            other => Err(format!("unknown figure `{other}` (expected fig2, fig3a or fig3b)")),
        }
    }
}

/// Runs `figure` with `cfg` (normally its preset) and writes curves under
/// `out`. Failing curves are listed in the report; the others are still
/// written.
pub fn run_reproduce(figure: Figure, cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let started = Instant::now();
    let mut report = match figure {
        Figure::Fig2 => fig2(cfg, out),
        Figure::Fig3a => fig3a(cfg, out),
        Figure::Fig3b => fig3b(cfg, out),
    };
    report.timings.push(Timing {
        label: "total".into(),
        seconds: started.elapsed().as_secs_f64(),
    });
    report
}

fn fig2(cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let mut report = RunReport::new("reproduce fig2", cfg);
    run_bounds_into(cfg, out, &mut report);
    if let Ok(lattice) = cfg.system.lattice() {
        let spins = vec![Spin::HALF; lattice.sites()];
        if lattice.sites() >= 2 {
            let w = xi_weight(&lattice, &spins, &[0, 1], 1.0);
            report.notes.push(format!("xi-norm weight of one s=1/2 bond at xi=1: {w:.6}"));
        }
    }
    report
}

fn fig3a(cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let mut cfg = cfg.clone();
    cfg.bounds.kinds = vec![BoundKind::NewB1d];
    let mut report = RunReport::new("reproduce fig3a", &cfg);
    run_bounds_into(&cfg, out, &mut report);
    let norms: Vec<f64> = match cfg.tip.as_ref().map(|t| &t.strength) {
        Some(TipStrength::Norms(n)) if FIG3A_NORMS.iter().all(|x| n.contains(x)) => FIG3A_NORMS.to_vec(),
        Some(TipStrength::Norms(n)) => n.clone(),
        _ => Vec::new(),
    };
    let responses = run_evolve_into(&cfg, out, &mut report, (!norms.is_empty()).then_some(&norms[..]));
    for &spin in &cfg.system.spins {
        let tag = spin_tag(spin);
        let Some(bound) = report.curve(&format!("new_B_1d_s{tag}")).cloned() else {
            continue;
        };
        for r in responses.iter().filter(|r| r.site == cfg.bounds.to) {
            let curve = format!("Sz{}_s{tag}_P{}", r.site + 1, norm_tag(r.norm));
            let Some(exact) = report.curve(&curve).cloned() else {
                continue;
            };
            // The bound is "faster" by t_exact / t_bound.
            let ratio = Ratio::of(format!("speedup_bound_vs_exact_s{tag}_P{}", norm_tag(r.norm)), &exact, &bound);
            report.ratios.push(ratio);
        }
    }
    report
}

fn fig3b(cfg: &ExperimentConfig, out: &Path) -> RunReport {
    let mut cfg = cfg.clone();
    cfg.bounds.kinds = vec![BoundKind::NewB1d, BoundKind::TildeB];
    let mut report = RunReport::new("reproduce fig3b", &cfg);
    let curves = run_bounds_into(&cfg, out, &mut report);
    for &spin in &cfg.system.spins {
        let tag = spin_tag(spin);
        let base = format!("new_B_1d_s{tag}");
        let Some((_, closed)) = curves.iter().find(|(l, _)| *l == base) else {
            continue;
        };
        let rise = |c: &lrlab_core::BoundCurve| c.crossing(RISE_LEVEL).unwrap_or(lrlab_core::Arrival::BeyondHorizon);
        let closed_rec = CurveRecord::new(format!("{base}@{RISE_LEVEL:e}"), format!("{RISE_LEVEL:e} absolute"), rise(closed));
        let mut tildes: Vec<_> = curves
            .iter()
            .filter(|(l, c)| c.kind() == BoundKind::TildeB && l.starts_with(&format!("tilde_B_s{tag}_")))
            .collect();
        tildes.sort_by(|a, b| {
            let norm = |c: &lrlab_core::BoundCurve| match &c.spec {
                lrlab_core::BoundSpec::Tilde(t) => t.norm_p,
                _ => 0.0,
            };
            norm(&a.1).total_cmp(&norm(&b.1))
        });
        for (label, curve) in &tildes {
            let rec = CurveRecord::new(format!("{label}@{RISE_LEVEL:e}"), format!("{RISE_LEVEL:e} absolute"), rise(curve));
            let ratio = Ratio::of(format!("rise_{label}_vs_{base}"), &rec, &closed_rec);
            let earlier = matches!((rec.arrival_ps, closed_rec.arrival_ps), (Some(a), Some(b)) if a < b);
            report.notes.push(format!(
                "{label} rises {} than {base} ({} vs {})",
                if earlier { "earlier" } else { "no earlier" },
                fmt_arrival(rec.arrival_ps),
                fmt_arrival(closed_rec.arrival_ps)
            ));
            report.ratios.push(ratio);
        }
        let ordered = tildes.windows(2).all(|w| {
            w[0].1.values.iter().zip(&w[1].1.values).all(|(a, b)| a <= b)
        });
        report.notes.push(format!(
            "tilde_B curves for s={spin} are {}pointwise ordered in the tip strength",
            if ordered { "" } else { "not " }
        ));
    }
    report
}

fn fmt_arrival(t: Option<f64>) -> String {
    t.map_or("beyond horizon".into(), |t| format!("{t:.4} ps"))
}
