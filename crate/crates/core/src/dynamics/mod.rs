//! Exact thermal dynamics of finite spin systems.
//!
//! The state is the Gibbs state of the unperturbed Hamiltonian H; at t = 0 a
//! perturbation P is switched on and observables evolve under G = H + P:
//!
//! ⟨A⟩(t) = Tr(ρ_β(H) · e^{iGt/ħ} A e^{−iGt/ħ}).
//!
//! Everything is exact diagonalization, block by block (see
//! [`Spectrum`](crate::linalg::Spectrum)), except the Krylov propagator which
//! exists for systems where a dense decomposition of G is too large.

mod krylov;
mod signal;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CsrMatrix, Spectrum, ZERO};
use crate::series::{check_grid, TimeSeries};
use crate::spin::{check_cap, HilbertSpace, LocalOperator};
use crate::units::natural_time;

pub use krylov::{krylov_propagate, KrylovOptions};
pub use signal::{
    estimate_velocity, fit_velocity, signal_arrival, signal_arrivals, VelocityFit,
};

/// Default largest block handed to the dense eigensolver.
pub const DENSE_MAX_DIM: usize = 8192;

/// Default dimension cap for [`commutator_norm_series`].
pub const COMMUTATOR_MAX_DIM: usize = 4096;

/// Thermal states are truncated to the most populated eigenvectors; the
/// discarded Boltzmann mass stays below this.
pub const DISCARDED_MASS: f64 = 1e-14;

/// Eigenvalues within this distance of the ground energy share the weight at
/// β = ∞.
const GROUND_DEGENERACY_TOL: f64 = 1e-10;

/// Times evaluated per batched matrix product.
const TIME_CHUNK: usize = 256;

/// Gibbs state e^{−βH}/Tr e^{−βH} stored in the eigenbasis of H.
#[derive(Debug, Clone)]
pub struct ThermalState {
    beta: f64,
    spectrum: Spectrum,
    /// weights[b][k] belongs to eigenvector k of block b.
    weights: Vec<Vec<f64>>,
    hamiltonian: CsrMatrix,
}

/// One populated eigenvector of the thermal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Population {
    pub weight: f64,
    pub block: usize,
    pub column: usize,
}

/// Gibbs state of `h` at inverse temperature `beta` (1/meV). `beta = ∞`
/// gives the uniform mixture over the ground space.
pub fn gibbs_state(h: &CsrMatrix, beta: f64) -> Result<ThermalState> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::domain(format!("beta must be ≥ 0, got {beta}")));
    }
    check_cap("thermal state", h.dim(), crate::spin::dimension_cap())?;
    let spectrum = Spectrum::new(h, &[], DENSE_MAX_DIM.max(crate::spin::dimension_cap()))?;
    let e0 = spectrum.min_eigenvalue();
    let mut weights: Vec<Vec<f64>> = spectrum
        .blocks()
        .iter()
        .map(|b| {
            b.values
                .iter()
                .map(|&e| {
                    if beta.is_infinite() {
                        if e - e0 <= GROUND_DEGENERACY_TOL * (1.0 + e0.abs()) {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (-beta * (e - e0)).exp()
                    }
                })
                .collect()
        })
        .collect();
    let z: f64 = weights.iter().flatten().sum();
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Numeric(format!("partition function is {z}")));
    }
    for w in weights.iter_mut().flatten() {
        *w /= z;
    }
    Ok(ThermalState {
        beta,
        spectrum,
        weights,
        hamiltonian: h.clone(),
    })
}

impl ThermalState {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn hamiltonian(&self) -> &CsrMatrix {
        &self.hamiltonian
    }

    /// Boltzmann weights in block order.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().flatten().copied()
    }

    /// Eigenvectors in decreasing weight, truncated once the remaining mass
    /// is at most `mass_tol`.
    pub fn populated(&self, mass_tol: f64) -> Vec<Population> {
        let mut all: Vec<Population> = self
            .weights
            .iter()
            .enumerate()
            .flat_map(|(block, ws)| {
                ws.iter().enumerate().map(move |(column, &weight)| Population {
                    weight,
                    block,
                    column,
                })
            })
            .collect();
        all.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        let mut rest: f64 = all.iter().map(|p| p.weight).sum();
        let mut keep = 0;
        while keep < all.len() && rest > mass_tol {
            rest -= all[keep].weight;
            keep += 1;
        }
        all.truncate(keep.max(1));
        all
    }

    /// Tr(ρ A).
    pub fn expectation(&self, a: &CsrMatrix) -> Result<f64> {
        if a.dim() != self.dim() {
            return Err(dim_mismatch("observable", a.dim(), self.dim()));
        }
        let mut acc = 0.0;
        for p in self.populated(0.0) {
            if p.weight == 0.0 {
                continue;
            }
            acc += p.weight * a.expectation(&self.spectrum.eigenvector(p.block, p.column));
        }
        Ok(acc)
    }

    /// The populated eigenvector as a full-space vector.
    pub fn vector(&self, p: &Population) -> Vec<c64> {
        self.spectrum.eigenvector(p.block, p.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvolutionMethod {
    /// Dense eigendecomposition when dim ≤ [`DENSE_MAX_DIM`], Krylov above.
    Auto,
    Dense,
    Krylov(KrylovOptions),
}

impl Default for EvolutionMethod {
    fn default() -> Self {
        EvolutionMethod::Auto
    }
}

/// Perturbed evolution prepared once and evaluated for any number of
/// observables.
pub struct Evolution<'a> {
    state: &'a ThermalState,
    generator: CsrMatrix,
    kind: Prepared,
    populated: Vec<Population>,
}

enum Prepared {
    Dense(Spectrum),
    Krylov(KrylovOptions),
}

impl<'a> Evolution<'a> {
    /// Evolution under `H + P` of the Gibbs state of H. `observables` only
    /// shape the block structure used by the dense path; any observable may
    /// be evaluated afterwards.
    pub fn new(
        state: &'a ThermalState,
        perturbation: Option<&CsrMatrix>,
        observables: &[&CsrMatrix],
        method: EvolutionMethod,
    ) -> Result<Evolution<'a>> {
        let h = state.hamiltonian();
        let generator = match perturbation {
            Some(p) => {
                if p.dim() != h.dim() {
                    return Err(dim_mismatch("perturbation", p.dim(), h.dim()));
                }
                let defect = p.hermitian_defect();
                if defect > linalg::HERMITIAN_TOL {
                    return Err(Error::domain(format!(
                        "perturbation is not Hermitian (defect {defect:e})"
                    )));
                }
                h.add(p)?
            }
            None => h.clone(),
        };
        for a in observables {
            if a.dim() != h.dim() {
                return Err(dim_mismatch("observable", a.dim(), h.dim()));
            }
        }
        let method = match method {
            EvolutionMethod::Auto if h.dim() > DENSE_MAX_DIM => {
                EvolutionMethod::Krylov(KrylovOptions::default())
            }
            EvolutionMethod::Auto => EvolutionMethod::Dense,
            m => m,
        };
        let kind = match method {
            EvolutionMethod::Krylov(opts) => Prepared::Krylov(opts),
            _ => Prepared::Dense(Spectrum::new(&generator, observables, DENSE_MAX_DIM)?),
        };
        Ok(Evolution {
            state,
            generator,
            kind,
            populated: state.populated(DISCARDED_MASS),
        })
    }

    pub fn generator(&self) -> &CsrMatrix {
        &self.generator
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, Prepared::Dense(_))
    }

    /// ⟨A⟩(t) at every time in `times_ps`.
    pub fn observe(&self, a: &CsrMatrix, times_ps: &[f64]) -> Result<Vec<f64>> {
        check_grid(times_ps)?;
        if a.dim() != self.generator.dim() {
            return Err(dim_mismatch("observable", a.dim(), self.generator.dim()));
        }
        match &self.kind {
            Prepared::Dense(spec) => self.observe_dense(spec, a, times_ps),
            Prepared::Krylov(opts) => {
                let mut acc = vec![0.0; times_ps.len()];
                for p in &self.populated {
                    let psi = self.state.vector(p);
                    let vals = krylov::expectation_series(&self.generator, &psi, a, times_ps, opts)?;
                    for (s, v) in acc.iter_mut().zip(vals) {
                        *s += p.weight * v;
                    }
                }
                Ok(acc)
            }
        }
    }

    fn observe_dense(&self, spec: &Spectrum, a: &CsrMatrix, times_ps: &[f64]) -> Result<Vec<f64>> {
        let dim = spec.dim();
        let mut block_of = vec![0usize; dim];
        let mut pos_in = vec![0usize; dim];
        for (b, blk) in spec.blocks().iter().enumerate() {
            for (k, &g) in blk.indices.iter().enumerate() {
                block_of[g] = b;
                pos_in[g] = k;
            }
        }
        let a_respects_blocks = a.iter().all(|(r, c, _)| block_of[r] == block_of[c]);

        // Populated states expanded in each generator block: C_b = V_b† ψ|_b.
        let k = self.populated.len();
        let weights: Vec<f64> = self.populated.iter().map(|p| p.weight).collect();
        let mut active: Vec<ActiveBlock> = Vec::new();
        for (b, blk) in spec.blocks().iter().enumerate() {
            let n = blk.indices.len();
            let mut psi = Mat::<c64>::zeros(n, k);
            let mut any = false;
            for (col, p) in self.populated.iter().enumerate() {
                let hb = &self.state.spectrum().blocks()[p.block];
                for (r, &g) in hb.indices.iter().enumerate() {
                    if block_of[g] == b {
                        let v = hb.vectors[(r, p.column)];
                        if v != ZERO {
                            psi[(pos_in[g], col)] = v;
                            any = true;
                        }
                    }
                }
            }
            if !any {
                continue;
            }
            let coeffs = blk.vectors.adjoint() * &psi;
            active.push(ActiveBlock { block: b, coeffs });
        }

        let t_count = times_ps.len() as f64;
        let state_cost: f64 = active
            .iter()
            .map(|ab| t_count * k as f64 * (spec.blocks()[ab.block].indices.len() as f64).powi(2))
            .sum();
        let matrix_cost: f64 = active
            .iter()
            .map(|ab| {
                let n = spec.blocks()[ab.block].indices.len() as f64;
                2.0 * n.powi(3) + n * n * k as f64 + t_count * n * n
            })
            .sum();

        if a_respects_blocks && matrix_cost < state_cost {
            self.observe_matrix_path(spec, &active, &weights, a, times_ps)
        } else {
            self.observe_state_path(spec, &active, &weights, a, times_ps)
        }
    }

    /// Rebuilds the populated states at each time and measures A on them.
    fn observe_state_path(
        &self,
        spec: &Spectrum,
        active: &[ActiveBlock],
        weights: &[f64],
        a: &CsrMatrix,
        times_ps: &[f64],
    ) -> Result<Vec<f64>> {
        let dim = spec.dim();
        let k = weights.len();
        let chunks: Vec<&[f64]> = times_ps.chunks(TIME_CHUNK).collect();
        let values = chunks
            .par_iter()
            .map(|chunk| {
                // columns ordered (time, state)
                let cols = chunk.len() * k;
                let mut states = vec![vec![ZERO; dim]; cols];
                for ab in active {
                    let blk = &spec.blocks()[ab.block];
                    let rotated = Mat::<c64>::from_fn(ab.coeffs.nrows(), cols, |m, col| {
                        let t = natural_time(chunk[col / k]);
                        ab.coeffs[(m, col % k)] * phase(-blk.values[m] * t)
                    });
                    let y = &blk.vectors * &rotated;
                    for (col, st) in states.iter_mut().enumerate() {
                        for (r, &g) in blk.indices.iter().enumerate() {
                            st[g] = y[(r, col)];
                        }
                    }
                }
                (0..chunk.len())
                    .map(|c| {
                        (0..k)
                            .map(|j| weights[j] * a.expectation(&states[c * k + j]))
                            .sum::<f64>()
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
            .concat();
        Ok(values)
    }

    /// Σ_{mn} ρ̃_{nm} Ã_{mn} e^{i(E_m−E_n)t} per block.
    fn observe_matrix_path(
        &self,
        spec: &Spectrum,
        active: &[ActiveBlock],
        weights: &[f64],
        a: &CsrMatrix,
        times_ps: &[f64],
    ) -> Result<Vec<f64>> {
        let mut kernels = Vec::with_capacity(active.len());
        for ab in active {
            let blk = &spec.blocks()[ab.block];
            let n = blk.indices.len();
            let weighted = Mat::<c64>::from_fn(n, weights.len(), |m, col| ab.coeffs[(m, col)] * weights[col]);
            let rho = &weighted * ab.coeffs.adjoint();
            let a_block = a.restrict(&blk.indices);
            let a_rot = blk.vectors.adjoint() * (&a_block * &blk.vectors);
            let kernel = Mat::<c64>::from_fn(n, n, |m, nn| rho[(nn, m)] * a_rot[(m, nn)]);
            kernels.push((ab.block, kernel));
        }
        // Q = M·conj(P) over a chunk of times, one matmul per block.
        let chunks: Vec<&[f64]> = times_ps.chunks(TIME_CHUNK).collect();
        let values = chunks
            .par_iter()
            .map(|chunk| {
                let mut acc = vec![0.0; chunk.len()];
                for (b, kernel) in &kernels {
                    let e = &spec.blocks()[*b].values;
                    let ph = Mat::<c64>::from_fn(e.len(), chunk.len(), |m, c| phase(e[m] * natural_time(chunk[c])));
                    let q = kernel * ph.conjugate();
                    for (c, slot) in acc.iter_mut().enumerate() {
                        let mut s = ZERO;
                        for m in 0..e.len() {
                            s += ph[(m, c)] * q[(m, c)];
                        }
                        *slot += s.re;
                    }
                }
                acc
            })
            .collect::<Vec<_>>()
            .concat();
        Ok(values)
    }
}

struct ActiveBlock {
    block: usize,
    /// V_b† ψ_k restricted to the block, one column per populated state.
    coeffs: Mat<c64>,
}

fn phase(x: f64) -> c64 {
    c64::new(x.cos(), x.sin())
}

fn dim_mismatch(what: &str, got: usize, want: usize) -> Error {
    Error::DimensionMismatch(format!("{what} has dim {got}, hamiltonian has dim {want}"))
}

/// ⟨A⟩(t) = Tr(ρ e^{i(H+P)t/ħ} A e^{−i(H+P)t/ħ}) with ρ the Gibbs state of H.
pub fn evolve_observable(
    state: &ThermalState,
    perturbation: Option<&CsrMatrix>,
    a: &CsrMatrix,
    times_ps: &[f64],
    method: EvolutionMethod,
) -> Result<TimeSeries> {
    let evo = Evolution::new(state, perturbation, &[a], method)?;
    let values = evo.observe(a, times_ps)?;
    Ok(TimeSeries::new("observable", times_ps.to_vec(), values)?
        .with("beta_per_meV", state.beta())
        .with("perturbed", perturbation.is_some())
        .with("method", if evo.is_dense() { "dense" } else { "krylov" }))
}

/// Dense propagator e^{−iGt/ħ} built from a block spectrum.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectrum: Spectrum,
}

impl Propagator {
    pub fn new(g: &CsrMatrix) -> Result<Propagator> {
        check_cap("propagator", g.dim(), COMMUTATOR_MAX_DIM)?;
        Ok(Propagator {
            spectrum: Spectrum::new(g, &[], COMMUTATOR_MAX_DIM)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    /// e^{−iGt/ħ} as a dense matrix.
    pub fn unitary(&self, t_ps: f64) -> Mat<c64> {
        let t = natural_time(t_ps);
        let mut u = Mat::<c64>::zeros(self.dim(), self.dim());
        for blk in self.spectrum.blocks() {
            let n = blk.indices.len();
            let scaled = Mat::<c64>::from_fn(n, n, |i, j| blk.vectors[(i, j)] * phase(-blk.values[j] * t));
            let ub = &scaled * blk.vectors.adjoint();
            for (i, &gi) in blk.indices.iter().enumerate() {
                for (j, &gj) in blk.indices.iter().enumerate() {
                    u[(gi, gj)] = ub[(i, j)];
                }
            }
        }
        u
    }

    /// Heisenberg picture e^{iGt/ħ} A e^{−iGt/ħ}.
    pub fn evolve_operator(&self, a: &Mat<c64>, t_ps: f64) -> Result<Mat<c64>> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(dim_mismatch("operator", a.nrows(), self.dim()));
        }
        let u = self.unitary(t_ps);
        Ok(u.adjoint() * (a * &u))
    }
}

/// ‖[e^{iHt/ħ} A e^{−iHt/ħ}, B]‖ at each time, for local operators A and B.
/// Refuses systems above [`COMMUTATOR_MAX_DIM`].
pub fn commutator_norm_series(
    h: &CsrMatrix,
    space: &HilbertSpace,
    a: &LocalOperator,
    b: &LocalOperator,
    times_ps: &[f64],
) -> Result<TimeSeries> {
    check_grid(times_ps)?;
    let dim = space.checked_dim(COMMUTATOR_MAX_DIM)?;
    if h.dim() != dim {
        return Err(dim_mismatch("space", dim, h.dim()));
    }
    let a_sp = a.to_sparse(space)?;
    let b_sp = b.to_sparse(space)?;
    let spec = Spectrum::new(h, &[&a_sp, &b_sp], COMMUTATOR_MAX_DIM)?;

    struct Prep {
        values: Vec<f64>,
        vectors: Mat<c64>,
        a_rot: Mat<c64>,
        b_block: Mat<c64>,
    }
    let preps: Vec<Prep> = spec
        .blocks()
        .iter()
        .filter_map(|blk| {
            let b_block = b_sp.restrict(&blk.indices);
            let a_block = a_sp.restrict(&blk.indices);
            if is_zero(&b_block) || is_zero(&a_block) {
                // [·, B] vanishes identically on this block
                return None;
            }
            let a_rot = blk.vectors.adjoint() * (&a_block * &blk.vectors);
            Some(Prep {
                values: blk.values.clone(),
                vectors: blk.vectors.clone(),
                a_rot,
                b_block,
            })
        })
        .collect();

    let values = times_ps
        .par_iter()
        .map(|&t_ps| -> Result<f64> {
            let t = natural_time(t_ps);
            let mut worst = 0.0_f64;
            for p in &preps {
                let n = p.values.len();
                let ph: Vec<c64> = p.values.iter().map(|&e| phase(e * t)).collect();
                let a_t_eig = Mat::<c64>::from_fn(n, n, |i, j| ph[i] * p.a_rot[(i, j)] * ph[j].conj());
                let a_t = &p.vectors * (&a_t_eig * p.vectors.adjoint());
                let ab = &a_t * &p.b_block;
                // i[A(t), B] = i(AB − (AB)†) is Hermitian.
                let ic = Mat::<c64>::from_fn(n, n, |i, j| {
                    let d = ab[(i, j)] - ab[(j, i)].conj();
                    c64::new(-d.im, d.re)
                });
                worst = worst.max(linalg::hermitian_norm(ic.as_ref())?);
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TimeSeries::new("commutator_norm", times_ps.to_vec(), values)?
        .with("a_support", format!("{:?}", a.support()))
        .with("b_support", format!("{:?}", b.support())))
}

fn is_zero(m: &Mat<c64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| m[(i, j)] == ZERO))
}
