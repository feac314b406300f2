//! Interaction terms and spin systems.
//!
//! A [`SpinSystem`] is a lattice, a spin quantum number per site and a list of
//! [`InteractionTerm`]s. The Hamiltonian of a region Λ is the sum of all
//! terms whose support lies inside Λ.

use std::fmt;

use faer::Mat;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{c64, CsrMatrix, ZERO};
use crate::spin::{
    self, check_cap, dimension_cap, kron, Axis, HilbertSpace, LocalOperator, Spin, SpinMatrices,
};
use crate::units::MU_B_MEV_PER_T;

pub type Vec3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TermKind {
    Heisenberg,
    Anisotropy,
    Zeeman,
    Tip,
    Custom,
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermKind::Heisenberg => "heisenberg",
            TermKind::Anisotropy => "anisotropy",
            TermKind::Zeeman => "zeeman",
            TermKind::Tip => "tip",
            TermKind::Custom => "custom",
        })
    }
}

/// One interaction Φ(X): a Hermitian operator on the sites X, in meV.
#[derive(Debug, Clone)]
pub struct InteractionTerm {
    kind: TermKind,
    op: LocalOperator,
    norm: f64,
    coupling: Option<Vec3>,
}

impl InteractionTerm {
    /// Wraps a Hermitian matrix on `support`; the operator norm is cached.
    pub fn new(kind: TermKind, support: Vec<usize>, matrix: Mat<c64>) -> Result<InteractionTerm> {
        if support.is_empty() {
            return Err(Error::domain("interaction term with empty support"));
        }
        let norm = spin::operator_norm(&matrix)?;
        Ok(InteractionTerm {
            kind,
            op: LocalOperator::new(support, matrix)?,
            norm,
            coupling: None,
        })
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn support(&self) -> &[usize] {
        self.op.support()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        self.op.matrix()
    }

    pub fn operator(&self) -> &LocalOperator {
        &self.op
    }

    /// Cached ‖Φ(X)‖ in meV.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// (J^x, J^y, J^z) for exchange bonds built by
    /// [`SpinSystem::heisenberg_term`].
    pub fn coupling(&self) -> Option<Vec3> {
        self.coupling
    }

    /// |X|.
    pub fn body_count(&self) -> usize {
        self.op.support().len()
    }

    pub fn is_one_body(&self) -> bool {
        self.body_count() == 1
    }
}

/// Raw parameters of the tip coupling
/// `g·I0·P·exp(−2κ·√(h²))·(m̂·S⃗_{i0})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TipParameters {
    pub coupling: f64,
    pub current: f64,
    pub polarization: f64,
    pub kappa: f64,
    pub height: f64,
    pub site: usize,
    pub direction: Vec3,
}

impl TipParameters {
    /// Parameters whose prefactor is exactly `p` (meV).
    pub fn with_prefactor(site: usize, direction: Vec3, p: f64) -> TipParameters {
        TipParameters {
            coupling: p,
            current: 1.0,
            polarization: 1.0,
            kappa: 0.0,
            height: 0.0,
            site,
            direction,
        }
    }

    /// Parameters whose term has operator norm `norm` (meV) on a site of
    /// spin `spin`; the norm of p·(m̂·S⃗) is p·s.
    pub fn with_norm(site: usize, direction: Vec3, norm: f64, spin: Spin) -> TipParameters {
        TipParameters::with_prefactor(site, direction, norm / spin.value())
    }

    /// p = g·I0·P·exp(−2κ·√(h²)).
    pub fn prefactor(&self) -> f64 {
        let decay = if self.height == 0.0 {
            1.0
        } else {
            (-2.0 * self.kappa * self.height.abs()).exp()
        };
        self.coupling * self.current * self.polarization * decay
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "tip magnetization {:?} is not a unit vector (length {len})",
                self.direction
            )));
        }
        if !(-1.0..=1.0).contains(&self.polarization) {
            return Err(Error::domain(format!(
                "polarization {} outside [-1, 1]",
                self.polarization
            )));
        }
        let p = self.prefactor();
        if p.is_nan() || p < 0.0 {
            return Err(Error::domain(format!(
                "tip prefactor {p} is negative; put the sign into the magnetization direction"
            )));
        }
        Ok(())
    }
}

/// Normalizes a 3-vector; fails on the zero vector.
pub fn unit_vector(v: Vec3) -> Result<Vec3> {
    let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if len == 0.0 || !len.is_finite() {
        return Err(Error::domain("direction vector has zero length"));
    }
    Ok([v[0] / len, v[1] / len, v[2] / len])
}

/// Lattice, per-site spins and interaction terms.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    lattice: Lattice,
    spins: Vec<Spin>,
    terms: Vec<InteractionTerm>,
}

impl SpinSystem {
    pub fn new(lattice: Lattice, spins: Vec<Spin>) -> Result<SpinSystem> {
        if spins.len() != lattice.sites() {
            return Err(Error::DimensionMismatch(format!(
                "{} spins for a lattice of {} sites",
                spins.len(),
                lattice.sites()
            )));
        }
        Ok(SpinSystem {
            lattice,
            spins,
            terms: Vec::new(),
        })
    }

    pub fn uniform(lattice: Lattice, spin: Spin) -> SpinSystem {
        let n = lattice.sites();
        SpinSystem {
            lattice,
            spins: vec![spin; n],
            terms: Vec::new(),
        }
    }

    /// Open chain of `n` sites with isotropic nearest-neighbour exchange `j`.
    pub fn heisenberg_chain(n: usize, spin: Spin, j: f64) -> Result<SpinSystem> {
        let mut sys = SpinSystem::uniform(Lattice::chain(n)?, spin);
        sys.add_nearest_neighbor_exchange([j; 3])?;
        Ok(sys)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn spin(&self, site: usize) -> Spin {
        self.spins[site]
    }

    pub fn sites(&self) -> usize {
        self.spins.len()
    }

    pub fn terms(&self) -> &[InteractionTerm] {
        &self.terms
    }

    pub fn space(&self) -> HilbertSpace {
        HilbertSpace::from_spins(&self.spins)
    }

    /// Π (2s_i + 1), or `None` when it overflows `usize`.
    pub fn hilbert_dim(&self) -> Option<usize> {
        self.space().dim()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.sites() {
            Err(Error::domain(format!(
                "site {site} outside a {}-site lattice",
                self.sites()
            )))
        } else {
            Ok(())
        }
    }

    pub fn push(&mut self, term: InteractionTerm) -> Result<()> {
        for &s in term.support() {
            self.check_site(s)?;
        }
        let expected: usize = term.support().iter().map(|&s| self.spins[s].dim()).product();
        if expected != term.matrix().nrows() {
            return Err(Error::DimensionMismatch(format!(
                "term on {:?} has dimension {}, sites require {expected}",
                term.support(),
                term.matrix().nrows()
            )));
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn with_term(mut self, term: InteractionTerm) -> Result<SpinSystem> {
        self.push(term)?;
        Ok(self)
    }

    /// Σ_α J^α S^α_i S^α_j.
    pub fn heisenberg_term(&self, i: usize, j: usize, coupling: Vec3) -> Result<InteractionTerm> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i == j {
            return Err(Error::domain(format!("heisenberg bond needs two sites, got {i} twice")));
        }
        let (a, b) = (i.min(j), i.max(j));
        let ma = SpinMatrices::new(self.spins[a]);
        let mb = SpinMatrices::new(self.spins[b]);
        let dim = ma.spin.dim() * mb.spin.dim();
        let mut m = Mat::<c64>::zeros(dim, dim);
        for (axis, &jc) in Axis::ALL.iter().zip(coupling.iter()) {
            if jc == 0.0 {
                continue;
            }
            let k = kron(ma.component(*axis), mb.component(*axis));
            for c in 0..dim {
                for r in 0..dim {
                    m[(r, c)] += k[(r, c)] * jc;
                }
            }
        }
        let mut term = InteractionTerm::new(TermKind::Heisenberg, vec![a, b], m)?;
        term.coupling = Some(coupling);
        Ok(term)
    }

    /// K (S^z_i)².
    pub fn anisotropy_term(&self, i: usize, k: f64) -> Result<InteractionTerm> {
        self.check_site(i)?;
        let sz = SpinMatrices::new(self.spins[i]).sz;
        let n = sz.nrows();
        let m = Mat::from_fn(n, n, |r, c| if r == c { sz[(r, r)] * sz[(r, r)] * k } else { ZERO });
        InteractionTerm::new(TermKind::Anisotropy, vec![i], m)
    }

    /// g μ_B B⃗·S⃗_i with B in tesla.
    pub fn zeeman_term(&self, i: usize, g_factor: f64, field: Vec3) -> Result<InteractionTerm> {
        self.check_site(i)?;
        let scale = g_factor * MU_B_MEV_PER_T;
        let m = SpinMatrices::new(self.spins[i]).dot([
            scale * field[0],
            scale * field[1],
            scale * field[2],
        ]);
        InteractionTerm::new(TermKind::Zeeman, vec![i], m)
    }

    /// p (m̂·S⃗_{i0}), the tip acting on the atom directly below it.
    pub fn tip_term(&self, params: &TipParameters) -> Result<InteractionTerm> {
        params.validate()?;
        self.check_site(params.site)?;
        let p = params.prefactor();
        let d = params.direction;
        let m = SpinMatrices::new(self.spins[params.site]).dot([p * d[0], p * d[1], p * d[2]]);
        InteractionTerm::new(TermKind::Tip, vec![params.site], m)
    }

    /// Adds an exchange bond for every nearest-neighbour pair of the lattice.
    pub fn add_nearest_neighbor_exchange(&mut self, coupling: Vec3) -> Result<()> {
        for (i, j) in self.lattice.nearest_neighbor_bonds() {
            let t = self.heisenberg_term(i, j, coupling)?;
            self.push(t)?;
        }
        Ok(())
    }

    pub fn add_uniform_anisotropy(&mut self, k: f64) -> Result<()> {
        for i in 0..self.sites() {
            let t = self.anisotropy_term(i, k)?;
            self.push(t)?;
        }
        Ok(())
    }

    pub fn add_uniform_zeeman(&mut self, g_factor: f64, field: Vec3) -> Result<()> {
        for i in 0..self.sites() {
            let t = self.zeeman_term(i, g_factor, field)?;
            self.push(t)?;
        }
        Ok(())
    }

    fn terms_within<'a>(
        &'a self,
        region: Option<&'a [usize]>,
    ) -> Result<impl Iterator<Item = &'a InteractionTerm> + 'a> {
        if let Some(r) = region {
            for &s in r {
                self.check_site(s)?;
            }
        }
        Ok(self.terms.iter().filter(move |t| match region {
            None => true,
            Some(r) => t.support().iter().all(|s| r.contains(s)),
        }))
    }

    /// H_Φ(Λ) as a sparse operator on the full space of the system.
    /// `region = None` means the whole lattice.
    pub fn sparse_hamiltonian(&self, region: Option<&[usize]>) -> Result<CsrMatrix> {
        let space = self.space();
        let dim = space.checked_dim(dimension_cap())?;
        let mut trip = Vec::new();
        for t in self.terms_within(region)? {
            let s = t.operator().to_sparse(&space)?;
            trip.extend(s.iter());
        }
        Ok(CsrMatrix::from_triplets(dim, trip))
    }

    /// H_Φ(Λ) as a dense matrix on the full space of the system.
    pub fn hamiltonian(&self, region: Option<&[usize]>) -> Result<Mat<c64>> {
        let dim = self.space().checked_dim(dimension_cap())?;
        check_cap("dense hamiltonian", dim, dimension_cap())?;
        Ok(self.sparse_hamiltonian(region)?.to_dense())
    }
}

/// Dense H_Φ(Λ) = Σ_{X⊂Λ} Φ(X); `region = None` takes the whole lattice.
pub fn assemble_hamiltonian(system: &SpinSystem, region: Option<&[usize]>) -> Result<Mat<c64>> {
    system.hamiltonian(region)
}
