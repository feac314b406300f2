//! Lieb-Robinson bound families and their arrival times.
//!
//! * [`OldBound`]: 2‖A‖‖B‖·exp(−ξ·d + 2‖Φ‖_ξ·|t|), with the ξ-weighted
//!   interaction norm of [`interaction_norm_xi`].
//! * [`PathSumBound`]: 2‖A‖‖B‖·Σ_γ |2t|^{L(γ)}/L(γ)!·w(γ) over paths in the
//!   interaction hypergraph, truncated with a rigorous tail estimate.
//! * [`OneDBound`]: the nearest-neighbour closed form s²(v|t|/d)^d with
//!   v = 4e(2D−1)Js².
//! * [`TildeBound`]: ‖A‖·d/dλ[(e^{λt}−1)/λ] at λ = 2‖P‖, which bounds the
//!   change of an expectation value after a perturbation P is switched on.
//!   [`TildeConvBound`] keeps the convolution ‖A‖∫₀ᵗ 𝔅(t′)e^{λ(t−t′)}dt′
//!   instead of collapsing it.
//!
//! Times are in ps and converted to 1/meV with ħ before entering any formula.

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, PathGraph, DEFAULT_NODE_BUDGET};
use crate::model::SpinSystem;
use crate::series::{check_grid, Arrival, TimeSeries};
use crate::spin::Spin;
use crate::units::{natural_time, HBAR_MEV_PS};

/// Default arrival threshold as a fraction of a curve's reference level.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Arrival times are refined by bisection to this width (ps).
pub const ARRIVAL_RESOLUTION_PS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    OldL,
    NewBPathsum,
    NewB1d,
    TildeB,
    TildeBConv,
}

impl BoundKind {
    pub fn tag(self) -> &'static str {
        match self {
            BoundKind::OldL => "old_L",
            BoundKind::NewBPathsum => "new_B_pathsum",
            BoundKind::NewB1d => "new_B_1d",
            BoundKind::TildeB => "tilde_B",
            BoundKind::TildeBConv => "tilde_B_conv",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<BoundKind> {
        Ok(match s.trim() {
            "old_L" | "old" => BoundKind::OldL,
            "new_B_pathsum" | "pathsum" => BoundKind::NewBPathsum,
            "new_B_1d" | "new_1d" | "1d" => BoundKind::NewB1d,
            "tilde_B" | "tilde" => BoundKind::TildeB,
            "tilde_B_conv" | "tilde_conv" => BoundKind::TildeBConv,
            other => return Err(Error::domain(format!("unknown bound kind `{other}`"))),
        })
    }
}

/// |X|·Π_{i∈X}(2s_i+1)²·e^{ξ·D(X)}, the weight each interaction carries in
/// the ξ-norm. For uniform spin this is |X|(2s+1)^{2|X|}e^{ξD(X)}.
pub fn xi_weight(lattice: &Lattice, spins: &[Spin], support: &[usize], xi: f64) -> f64 {
    let local: f64 = support
        .iter()
        .map(|&i| (spins[i].dim() as f64).powi(2))
        .product();
    support.len() as f64 * local * (xi * lattice.diameter(support) as f64).exp()
}

/// ‖Φ‖_ξ = sup_x Σ_{X∋x} |X|(2s+1)^{2|X|}e^{ξD(X)}‖Φ(X)‖ in meV.
pub fn interaction_norm_xi(system: &SpinSystem, xi: f64) -> Result<f64> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::domain(format!("xi must be positive, got {xi}")));
    }
    let mut per_site = vec![0.0; system.sites()];
    for term in system.terms() {
        let w = xi_weight(system.lattice(), system.spins(), term.support(), xi) * term.norm();
        for &x in term.support() {
            per_site[x] += w;
        }
    }
    Ok(per_site.into_iter().fold(0.0, f64::max))
}

/// The original bound on ‖[A(t), B]‖.
#[derive(Debug, Clone, PartialEq)]
pub struct OldBound {
    pub xi: f64,
    pub distance: usize,
    /// ‖Φ‖_ξ in meV.
    pub norm_xi: f64,
    /// 2‖A‖‖B‖.
    pub prefactor: f64,
    pub clamp: bool,
}

impl OldBound {
    /// Bound on ‖[S^z_x(t), S^z_y]‖ in `system`.
    pub fn new(system: &SpinSystem, x: usize, y: usize, xi: f64) -> Result<OldBound> {
        check_sites(system, &[x, y])?;
        if x == y {
            return Err(Error::domain("old bound needs two distinct sites"));
        }
        Ok(OldBound {
            xi,
            distance: system.lattice().distance(x, y),
            norm_xi: interaction_norm_xi(system, xi)?,
            prefactor: 2.0 * system.spin(x).value() * system.spin(y).value(),
            clamp: true,
        })
    }

    pub fn unclamped(mut self) -> OldBound {
        self.clamp = false;
        self
    }

    pub fn eval(&self, t_ps: f64) -> f64 {
        let rate = 2.0 * self.norm_xi * natural_time(t_ps).abs();
        let raw = self.prefactor * (rate - self.xi * self.distance as f64).exp();
        if self.clamp {
            raw.min(self.prefactor)
        } else {
            raw
        }
    }

    /// Closed-form time (ps) at which the bound reaches `fraction` of
    /// 2‖A‖‖B‖; zero if it already starts above.
    pub fn arrival_ps(&self, fraction: f64) -> f64 {
        let t = (self.xi * self.distance as f64 + fraction.ln()) / (2.0 * self.norm_xi);
        t.max(0.0) * HBAR_MEV_PS
    }
}

/// Old bound on ‖[S^z_x(t), S^z_y]‖ at time `t_ps`, clamped at 2s_x s_y.
pub fn old_bound(t_ps: f64, x: usize, y: usize, system: &SpinSystem, xi: f64) -> Result<f64> {
    Ok(OldBound::new(system, x, y, xi)?.eval(t_ps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiSearch {
    GoldenSection,
    GridScan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiOptimum {
    pub xi: f64,
    /// Arrival time of the old bound at the optimum (ps).
    pub arrival_ps: f64,
    pub method: XiSearch,
}

pub const XI_RANGE: (f64, f64) = (0.01, 10.0);
const XI_TOL: f64 = 1e-3;
const XI_PROBES: usize = 21;
const XI_GRID: usize = 200;

/// The ξ that makes the old bound as small as possible, i.e. pushes its
/// arrival time at `threshold_fraction` as late as possible. Golden-section
/// search on [0.01, 10]; a coarse probe that finds more than one local
/// maximum switches to a 200-point grid scan.
pub fn optimize_xi(
    system: &SpinSystem,
    x: usize,
    y: usize,
    threshold_fraction: f64,
) -> Result<XiOptimum> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::domain("threshold fraction must lie in (0, 1)"));
    }
    let objective = |xi: f64| -> Result<f64> {
        Ok(OldBound::new(system, x, y, xi)?.arrival_ps(threshold_fraction))
    };
    let (lo, hi) = XI_RANGE;

    let probes: Vec<f64> = (0..XI_PROBES)
        .map(|k| lo + (hi - lo) * k as f64 / (XI_PROBES - 1) as f64)
        .collect();
    let values: Vec<f64> = probes.iter().map(|&p| objective(p)).collect::<Result<_>>()?;
    let peaks = (1..values.len() - 1)
        .filter(|&k| values[k] > values[k - 1] && values[k] >= values[k + 1])
        .count();

    if peaks > 1 {
        log::debug!("xi objective has {peaks} local maxima, falling back to grid scan");
        let mut best = (lo, f64::NEG_INFINITY);
        for k in 0..XI_GRID {
            let xi = lo + (hi - lo) * k as f64 / (XI_GRID - 1) as f64;
            let v = objective(xi)?;
            if v > best.1 {
                best = (xi, v);
            }
        }
        return Ok(XiOptimum {
            xi: best.0,
            arrival_ps: best.1,
            method: XiSearch::GridScan,
        });
    }

    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > XI_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let xi = 0.5 * (a + b);
    Ok(XiOptimum {
        xi,
        arrival_ps: objective(xi)?,
        method: XiSearch::GoldenSection,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSumOptions {
    pub norm_a: f64,
    pub norm_b: f64,
    /// Absolute tolerance on the truncated tail of the series.
    pub tol: f64,
    /// Cap on transfer-matrix work (edge visits).
    pub budget: u64,
    pub clamp: bool,
}

impl Default for PathSumOptions {
    fn default() -> Self {
        PathSumOptions {
            norm_a: 1.0,
            norm_b: 1.0,
            tol: 1e-12,
            budget: DEFAULT_NODE_BUDGET,
            clamp: true,
        }
    }
}

/// 2‖A‖‖B‖·Σ_γ |2t|^{L(γ)}/L(γ)!·w(γ) over paths from X (support of B) to Y
/// (support of A).
#[derive(Debug, Clone)]
pub struct PathSumBound {
    graph: PathGraph,
    x: Vec<usize>,
    y: Vec<usize>,
    first: Vec<usize>,
    hits: Vec<bool>,
    branching: usize,
    wmax: f64,
    opts: PathSumOptions,
}

impl PathSumBound {
    pub fn new(system: &SpinSystem, x: &[usize], y: &[usize], opts: PathSumOptions) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::domain("path-sum regions must be nonempty"));
        }
        check_sites(system, x)?;
        check_sites(system, y)?;
        if !(opts.tol > 0.0) {
            return Err(Error::domain("path-sum tolerance must be positive"));
        }
        let graph = PathGraph::new(system.terms())?;
        let first = graph.boundary_nodes(x);
        let (branching, wmax) = graph.reach_stats(x);
        let hits = graph.supports().iter().map(|z| z.iter().any(|s| y.contains(s))).collect();
        Ok(PathSumBound {
            graph,
            x: x.to_vec(),
            y: y.to_vec(),
            first,
            hits,
            branching,
            wmax,
            opts,
        })
    }

    pub fn prefactor(&self) -> f64 {
        2.0 * self.opts.norm_a * self.opts.norm_b
    }

    pub fn options(&self) -> &PathSumOptions {
        &self.opts
    }

    pub fn regions(&self) -> (&[usize], &[usize]) {
        (&self.x, &self.y)
    }

    pub fn eval(&self, t_ps: f64) -> Result<f64> {
        let pre = self.prefactor();
        let cap = pre;
        let finish = |v: f64| if self.opts.clamp { v.min(cap) } else { v };

        let tt = 2.0 * natural_time(t_ps).abs();
        let mut sum = if self.x.iter().any(|s| self.y.contains(s)) { 1.0 } else { 0.0 };
        if tt == 0.0 || self.first.is_empty() {
            return Ok(finish(pre * sum));
        }

        let nodes = self.graph.supports().len();
        let mut g = vec![0.0; nodes];
        for &k in &self.first {
            g[k] = tt * self.graph.norms()[k];
        }
        let edges = self.graph.edge_count().max(1) as u64;
        let ln_first = (self.first.len() as f64).ln();
        let ln_b = (self.branching.max(1) as f64).ln();
        let ln_x = (tt * self.wmax).ln();
        let mut ln_fact = 0.0; // ln((len+1)!) maintained below
        let mut work: u64 = 0;
        let mut len = 1usize;
        loop {
            sum += g.iter().zip(&self.hits).filter(|(_, &h)| h).map(|(v, _)| v).sum::<f64>();
            if self.opts.clamp && pre * sum >= cap {
                return Ok(cap);
            }

            // Tail Σ_{L>len} n₁·b^{L−1}·(|2t|·w_max)^L/L!.
            ln_fact += ((len + 1) as f64).ln();
            let tail = if self.branching == 0 || self.wmax == 0.0 {
                0.0
            } else {
                let ln_next = ln_first + len as f64 * ln_b + (len + 1) as f64 * ln_x - ln_fact;
                let ratio = self.branching as f64 * tt * self.wmax / (len + 2) as f64;
                if ratio < 1.0 {
                    ln_next.exp() / (1.0 - ratio)
                } else {
                    f64::INFINITY
                }
            };
            if pre * tail < self.opts.tol || g.iter().all(|&v| v == 0.0) {
                return Ok(finish(pre * sum));
            }

            work += edges;
            if work > self.opts.budget {
                return Err(Error::SeriesBudget {
                    partial_sum: pre * sum,
                    tail: pre * tail,
                    tol: self.opts.tol,
                });
            }
            len += 1;
            g = self.graph.step(&g, tt / len as f64);
        }
    }
}

/// Path-sum bound on ‖[B, A(t)]‖ for B on X and A on Y.
pub fn new_bound_pathsum(
    t_ps: f64,
    x: &[usize],
    y: &[usize],
    system: &SpinSystem,
    opts: PathSumOptions,
) -> Result<f64> {
    PathSumBound::new(system, x, y, opts)?.eval(t_ps)
}

/// v = 4e(2d−1)Js² in meV (times one lattice spacing).
pub fn limit_speed(j: f64, spin: Spin, lattice_dim: usize) -> f64 {
    let s = spin.value();
    4.0 * E * (2.0 * lattice_dim as f64 - 1.0) * j * s * s
}

/// Nearest-neighbour closed form on ‖[S^z_i(t), S^z_j]‖.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDBound {
    pub distance: usize,
    pub j: f64,
    pub spin: Spin,
    pub lattice_dim: usize,
    pub clamp: bool,
}

impl OneDBound {
    pub fn new(distance: usize, j: f64, spin: Spin, lattice_dim: usize) -> Result<OneDBound> {
        if distance == 0 {
            return Err(Error::domain(
                "closed-form bound needs distance ≥ 1; use the trivial bound 2s² at distance 0",
            ));
        }
        if lattice_dim == 0 {
            return Err(Error::domain("lattice dimension must be at least 1"));
        }
        Ok(OneDBound {
            distance,
            j,
            spin,
            lattice_dim,
            clamp: true,
        })
    }

    /// Reads J, s and the lattice dimension off a nearest-neighbour
    /// exchange system: J is the largest |J^α| over all bonds and s the
    /// largest spin. One-body terms play no role.
    pub fn for_system(system: &SpinSystem, x: usize, y: usize) -> Result<OneDBound> {
        check_sites(system, &[x, y])?;
        let lattice = system.lattice();
        let mut j = 0.0_f64;
        for term in system.terms().iter().filter(|t| !t.is_one_body()) {
            let sup = term.support();
            let coupling = term.coupling().filter(|_| sup.len() == 2 && lattice.distance(sup[0], sup[1]) == 1);
            let Some(c) = coupling else {
                return Err(Error::domain(format!(
                    "closed-form bound needs nearest-neighbour exchange only, found {} term on {sup:?}",
                    term.kind()
                )));
            };
            j = c.iter().fold(j, |m, v| m.max(v.abs()));
        }
        let spin = system
            .spins()
            .iter()
            .copied()
            .max_by_key(|s| s.twice())
            .ok_or_else(|| Error::domain("empty system"))?;
        OneDBound::new(lattice.distance(x, y), j, spin, lattice.dim())
    }

    pub fn unclamped(mut self) -> OneDBound {
        self.clamp = false;
        self
    }

    pub fn speed(&self) -> f64 {
        limit_speed(self.j, self.spin, self.lattice_dim)
    }

    /// 2s².
    pub fn cap(&self) -> f64 {
        let s = self.spin.value();
        2.0 * s * s
    }

    pub fn eval(&self, t_ps: f64) -> f64 {
        let s = self.spin.value();
        let d = self.distance as f64;
        let raw = s * s * (self.speed() * natural_time(t_ps).abs() / d).powf(d);
        if self.clamp {
            raw.min(self.cap())
        } else {
            raw
        }
    }
}

/// s²(v|t|/d)^d with v = 4e(2·lattice_dim−1)Js², optionally clamped at 2s².
pub fn new_bound_1d(
    t_ps: f64,
    distance: usize,
    j: f64,
    spin: Spin,
    lattice_dim: usize,
    clamp: bool,
) -> Result<f64> {
    let b = OneDBound::new(distance, j, spin, lattice_dim)?;
    Ok(if clamp { b.eval(t_ps) } else { b.unclamped().eval(t_ps) })
}

/// Below this λt the closed form is replaced by its Taylor series.
const TILDE_SERIES_CUTOFF: f64 = 1e-3;

/// d/dλ[(e^{λt}−1)/λ] = (λt·e^{λt} − e^{λt} + 1)/λ², t and λ in natural
/// units. Equals t²/2 at λ = 0.
fn tilde_kernel(lambda: f64, t: f64) -> f64 {
    let x = lambda * t;
    if x < TILDE_SERIES_CUTOFF {
        // t²/2 + λt³/3 + λ²t⁴/8 + λ³t⁵/30
        t * t * (0.5 + x / 3.0 + x * x / 8.0 + x * x * x / 30.0)
    } else {
        let ex = x.exp();
        (x * ex - ex + 1.0) / (lambda * lambda)
    }
}

/// ‖A‖·d/dλ[(e^{λt}−1)/λ] at λ = 2‖P‖.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeBound {
    pub norm_p: f64,
    pub norm_a: f64,
    pub clamp: bool,
}

impl TildeBound {
    pub fn new(norm_p: f64, norm_a: f64) -> Result<TildeBound> {
        if !(norm_p >= 0.0) || !norm_p.is_finite() {
            return Err(Error::domain(format!("perturbation norm must be ≥ 0, got {norm_p}")));
        }
        if !(norm_a >= 0.0) {
            return Err(Error::domain("observable norm must be ≥ 0"));
        }
        Ok(TildeBound {
            norm_p,
            norm_a,
            clamp: false,
        })
    }

    pub fn lambda(&self) -> f64 {
        2.0 * self.norm_p
    }

    pub fn eval(&self, t_ps: f64) -> Result<f64> {
        if t_ps < 0.0 {
            return Err(Error::domain("tilde bound is defined for t ≥ 0"));
        }
        let raw = self.norm_a * tilde_kernel(self.lambda(), natural_time(t_ps));
        Ok(if self.clamp { raw.min(2.0 * self.norm_a) } else { raw })
    }
}

/// ‖A‖·(λt e^{λt} − e^{λt} + 1)/λ² with λ = 2‖P‖ and t = t_ps/ħ.
pub fn tilde_bound(t_ps: f64, norm_p: f64, norm_a: f64) -> Result<f64> {
    TildeBound::new(norm_p, norm_a)?.eval(t_ps)
}

/// ‖A‖·∫₀ᵗ 𝔅(t′)·e^{λ(t−t′)} dt′ with 𝔅 the nearest-neighbour closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeConvBound {
    pub inner: OneDBound,
    pub norm_p: f64,
    pub norm_a: f64,
    pub rel_tol: f64,
}

impl TildeConvBound {
    pub fn new(inner: OneDBound, norm_p: f64, norm_a: f64) -> Result<TildeConvBound> {
        TildeBound::new(norm_p, norm_a)?;
        Ok(TildeConvBound {
            inner,
            norm_p,
            norm_a,
            rel_tol: 1e-8,
        })
    }

    pub fn eval(&self, t_ps: f64) -> Result<f64> {
        if t_ps < 0.0 {
            return Err(Error::domain("convolution bound is defined for t ≥ 0"));
        }
        let lambda = 2.0 * self.norm_p;
        let t = natural_time(t_ps);
        if t == 0.0 {
            return Ok(0.0);
        }
        let f = |u: f64| self.inner.eval(u * HBAR_MEV_PS) * (lambda * (t - u)).exp();
        Ok(self.norm_a * adaptive_simpson(&f, 0.0, t, self.rel_tol))
    }
}

/// Adaptive Simpson quadrature to relative tolerance `rel_tol`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    // Seed the absolute tolerance from a coarse 64-panel estimate.
    let n = 64;
    let h = (b - a) / n as f64;
    let coarse: f64 = (0..n)
        .map(|k| {
            let x0 = a + k as f64 * h;
            simpson(f(x0), f(x0 + 0.5 * h), f(x0 + h), x0, x0 + h)
        })
        .sum();
    let tol = (rel_tol * coarse.abs()).max(f64::MIN_POSITIVE);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// A bound ready to be evaluated at any time.
#[derive(Debug, Clone)]
pub enum BoundSpec {
    Old(OldBound),
    PathSum(PathSumBound),
    OneD(OneDBound),
    Tilde(TildeBound),
    TildeConv(TildeConvBound),
}

impl BoundSpec {
    pub fn kind(&self) -> BoundKind {
        match self {
            BoundSpec::Old(_) => BoundKind::OldL,
            BoundSpec::PathSum(_) => BoundKind::NewBPathsum,
            BoundSpec::OneD(_) => BoundKind::NewB1d,
            BoundSpec::Tilde(_) => BoundKind::TildeB,
            BoundSpec::TildeConv(_) => BoundKind::TildeBConv,
        }
    }

    pub fn eval(&self, t_ps: f64) -> Result<f64> {
        match self {
            BoundSpec::Old(b) => Ok(b.eval(t_ps)),
            BoundSpec::PathSum(b) => b.eval(t_ps),
            BoundSpec::OneD(b) => Ok(b.eval(t_ps)),
            BoundSpec::Tilde(b) => b.eval(t_ps),
            BoundSpec::TildeConv(b) => b.eval(t_ps),
        }
    }

    /// Level that arrival thresholds are fractions of: 2‖A‖‖B‖ for the
    /// commutator bounds, 2s² for the closed form, ‖A‖ for the
    /// perturbation bounds.
    pub fn reference_level(&self) -> f64 {
        match self {
            BoundSpec::Old(b) => b.prefactor,
            BoundSpec::PathSum(b) => b.prefactor(),
            BoundSpec::OneD(b) => b.cap(),
            BoundSpec::Tilde(b) => b.norm_a,
            BoundSpec::TildeConv(b) => b.norm_a,
        }
    }

    pub fn params(&self) -> Vec<(String, String)> {
        let mut p = vec![
            ("kind".to_string(), self.kind().tag().to_string()),
            ("hbar_meV_ps".to_string(), HBAR_MEV_PS.to_string()),
        ];
        let mut put = |k: &str, v: String| p.push((k.to_string(), v));
        match self {
            BoundSpec::Old(b) => {
                put("xi", b.xi.to_string());
                put("distance", b.distance.to_string());
                put("norm_xi_meV", b.norm_xi.to_string());
                put("prefactor", b.prefactor.to_string());
                put("clamp", b.clamp.to_string());
            }
            BoundSpec::PathSum(b) => {
                let (x, y) = b.regions();
                put("x_sites", format!("{x:?}"));
                put("y_sites", format!("{y:?}"));
                put("norm_a", b.opts.norm_a.to_string());
                put("norm_b", b.opts.norm_b.to_string());
                put("tail_tol", b.opts.tol.to_string());
                put("clamp", b.opts.clamp.to_string());
            }
            BoundSpec::OneD(b) => {
                put("distance", b.distance.to_string());
                put("J_meV", b.j.to_string());
                put("s", b.spin.to_string());
                put("lattice_dim", b.lattice_dim.to_string());
                put("v_meV", b.speed().to_string());
                put("clamp", b.clamp.to_string());
            }
            BoundSpec::Tilde(b) => {
                put("normP_meV", b.norm_p.to_string());
                put("normA", b.norm_a.to_string());
                put("clamp", b.clamp.to_string());
            }
            BoundSpec::TildeConv(b) => {
                put("normP_meV", b.norm_p.to_string());
                put("normA", b.norm_a.to_string());
                put("inner_distance", b.inner.distance.to_string());
                put("inner_J_meV", b.inner.j.to_string());
                put("inner_s", b.inner.spin.to_string());
                put("quad_rel_tol", b.rel_tol.to_string());
            }
        }
        p
    }
}

/// A bound sampled on a time grid (ps).
#[derive(Debug, Clone)]
pub struct BoundCurve {
    pub spec: BoundSpec,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BoundCurve {
    pub fn sample(spec: BoundSpec, times: &[f64]) -> Result<BoundCurve> {
        check_grid(times)?;
        let values = times.iter().map(|&t| spec.eval(t)).collect::<Result<_>>()?;
        Ok(BoundCurve {
            spec,
            times: times.to_vec(),
            values,
        })
    }

    pub fn kind(&self) -> BoundKind {
        self.spec.kind()
    }

    pub fn to_series(&self, label: impl Into<String>) -> TimeSeries {
        TimeSeries {
            label: label.into(),
            times: self.times.clone(),
            values: self.values.clone(),
            provenance: self.spec.params(),
        }
    }

    /// First time the curve reaches `level`, refined by bisection on the
    /// underlying formula to [`ARRIVAL_RESOLUTION_PS`].
    pub fn crossing(&self, level: f64) -> Result<Arrival> {
        let Some(k) = self.values.iter().position(|&v| v >= level) else {
            return Ok(Arrival::BeyondHorizon);
        };
        if k == 0 {
            return Ok(Arrival::At(self.times[0]));
        }
        let (mut lo, mut hi) = (self.times[k - 1], self.times[k]);
        while hi - lo > ARRIVAL_RESOLUTION_PS {
            let mid = 0.5 * (lo + hi);
            if self.spec.eval(mid)? >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Arrival::At(hi))
    }
}

/// First time a bound curve reaches `threshold_fraction` of its reference
/// level (see [`BoundSpec::reference_level`]).
pub fn arrival_time(curve: &BoundCurve, threshold_fraction: f64) -> Result<Arrival> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::domain("threshold fraction must lie in (0, 1)"));
    }
    curve.crossing(threshold_fraction * curve.spec.reference_level())
}

fn check_sites(system: &SpinSystem, sites: &[usize]) -> Result<()> {
    match sites.iter().find(|&&s| s >= system.sites()) {
        Some(s) => Err(Error::domain(format!(
            "site {s} outside a {}-site lattice",
            system.sites()
        ))),
        None => Ok(()),
    }
}
