//! Spin-s matrices, local operators and their embedding into the
//! tensor-product Hilbert space.
//!
//! Local basis is |s, m⟩ with m descending (m = s, s−1, …, −s). The global
//! basis is the Kronecker product in ascending site order, so site 0 is the
//! most significant digit of a basis index.

use std::fmt;
use std::str::FromStr;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CsrMatrix, ONE, ZERO};

/// Default hard cap on the Hilbert-space dimension of dense objects.
pub const DEFAULT_MAX_DIM: usize = 20_000;

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "LRLAB_MAX_DIM";

/// Hilbert-dimension cap, honouring `LRLAB_MAX_DIM`.
pub fn dimension_cap() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub(crate) fn check_cap(what: &str, dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(Error::Resource {
            what: what.to_string(),
            requested: dim as u128,
            cap: cap as u128,
        })
    } else {
        Ok(())
    }
}

/// A spin quantum number s ∈ {1/2, 1, 3/2, …}, stored as 2s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const ONE: Spin = Spin { twice: 2 };
    pub const THREE_HALVES: Spin = Spin { twice: 3 };

    pub fn from_twice(twice: u32) -> Result<Spin> {
        if twice == 0 {
            return Err(Error::domain("spin quantum number must be positive"));
        }
        Ok(Spin { twice })
    }

    /// Accepts any positive real whose double is an integer.
    pub fn new(s: f64) -> Result<Spin> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice <= 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "spin {s} is not a positive half-integer"
            )));
        }
        Spin::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Local Hilbert dimension 2s + 1.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Spin> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad spin `{s}`")))?;
            match den.trim() {
                "2" => Spin::from_twice(num),
                "1" => Spin::from_twice(2 * num),
                _ => Err(Error::domain(format!("bad spin `{s}`"))),
            }
        } else {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::domain(format!("bad spin `{s}`")))?;
            Spin::new(v)
        }
    }
}

/// Cartesian component of a spin operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// The (2s+1)-dimensional angular momentum matrices.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub spin: Spin,
    pub sx: Mat<c64>,
    pub sy: Mat<c64>,
    pub sz: Mat<c64>,
}

impl SpinMatrices {
    pub fn new(spin: Spin) -> SpinMatrices {
        let n = spin.dim();
        let s = spin.value();
        let m = |k: usize| s - k as f64;
        // ⟨m+1|S+|m⟩ sits at (k-1, k) since m decreases with k.
        let mut splus = Mat::<c64>::zeros(n, n);
        for k in 1..n {
            let mk = m(k);
            splus[(k - 1, k)] = c64::new((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
        }
        let sminus = splus.adjoint().to_owned();
        let half = c64::new(0.5, 0.0);
        let minus_half_i = c64::new(0.0, -0.5);
        let sx = Mat::from_fn(n, n, |i, j| half * (splus[(i, j)] + sminus[(i, j)]));
        let sy = Mat::from_fn(n, n, |i, j| minus_half_i * (splus[(i, j)] - sminus[(i, j)]));
        let sz = Mat::from_fn(n, n, |i, j| if i == j { c64::new(m(i), 0.0) } else { ZERO });
        SpinMatrices { spin, sx, sy, sz }
    }

    pub fn component(&self, axis: Axis) -> &Mat<c64> {
        match axis {
            Axis::X => &self.sx,
            Axis::Y => &self.sy,
            Axis::Z => &self.sz,
        }
    }

    /// n⃗ · S⃗ for a real vector n⃗.
    pub fn dot(&self, n: [f64; 3]) -> Mat<c64> {
        let d = self.spin.dim();
        Mat::from_fn(d, d, |i, j| {
            self.sx[(i, j)] * n[0] + self.sy[(i, j)] * n[1] + self.sz[(i, j)] * n[2]
        })
    }
}

/// Angular momentum matrices for spin `s` given as a real number.
pub fn spin_matrices(s: f64) -> Result<SpinMatrices> {
    Ok(SpinMatrices::new(Spin::new(s)?))
}

/// Per-site local dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> HilbertSpace {
        HilbertSpace { dims }
    }

    pub fn from_spins(spins: &[Spin]) -> HilbertSpace {
        HilbertSpace::new(spins.iter().map(|s| s.dim()).collect())
    }

    pub fn sites(&self) -> usize {
        self.dims.len()
    }

    pub fn local_dim(&self, site: usize) -> usize {
        self.dims[site]
    }

    /// Total dimension, or `None` if it does not fit in `usize`.
    pub fn dim(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
    }

    /// Total dimension, failing when it exceeds `cap`.
    pub fn checked_dim(&self, cap: usize) -> Result<usize> {
        match self.dim() {
            Some(d) => {
                check_cap("hilbert space", d, cap)?;
                Ok(d)
            }
            None => Err(Error::Resource {
                what: "hilbert space".into(),
                requested: u128::MAX,
                cap: cap as u128,
            }),
        }
    }

    /// Stride of each site's digit in a global index.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }
}

/// An operator acting on a strictly ordered set of sites.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    support: Vec<usize>,
    matrix: Mat<c64>,
}

impl LocalOperator {
    pub fn new(support: Vec<usize>, matrix: Mat<c64>) -> Result<LocalOperator> {
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(format!(
                "support {support:?} is not strictly increasing"
            )));
        }
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch("local operator matrix is not square".into()));
        }
        Ok(LocalOperator { support, matrix })
    }

    /// S^α on a single site.
    pub fn spin_component(site: usize, spin: Spin, axis: Axis) -> LocalOperator {
        let m = SpinMatrices::new(spin);
        LocalOperator {
            support: vec![site],
            matrix: m.component(axis).clone(),
        }
    }

    pub fn identity(site: usize, dim: usize) -> LocalOperator {
        LocalOperator {
            support: vec![site],
            matrix: Mat::identity(dim, dim),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    /// Checks the operator against a space and returns (strides of support
    /// sites, local dims of support sites).
    fn layout(&self, space: &HilbertSpace) -> Result<(Vec<usize>, Vec<usize>)> {
        if let Some(&bad) = self.support.iter().find(|&&s| s >= space.sites()) {
            return Err(Error::domain(format!(
                "site {bad} outside a {}-site lattice",
                space.sites()
            )));
        }
        let local: Vec<usize> = self.support.iter().map(|&s| space.local_dim(s)).collect();
        let expected: usize = local.iter().product();
        if expected != self.matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "operator on {:?} has dimension {}, sites require {}",
                self.support,
                self.matrix.nrows(),
                expected
            )));
        }
        let strides = space.strides();
        Ok((self.support.iter().map(|&s| strides[s]).collect(), local))
    }

    /// Visits every nonzero matrix element of the embedded operator as
    /// (row, col, value).
    fn for_each_entry(
        &self,
        space: &HilbertSpace,
        dim: usize,
        mut f: impl FnMut(usize, usize, c64),
    ) -> Result<()> {
        let (strides, local) = self.layout(space)?;
        let ldim = self.matrix.nrows();
        // offsets[l] is the global index contribution of local state l.
        let offsets: Vec<usize> = (0..ldim)
            .map(|mut l| {
                let mut off = 0;
                for k in (0..local.len()).rev() {
                    off += (l % local[k]) * strides[k];
                    l /= local[k];
                }
                off
            })
            .collect();
        let mut by_row: Vec<Vec<(usize, c64)>> = vec![Vec::new(); ldim];
        for (r, row) in by_row.iter_mut().enumerate() {
            for c in 0..ldim {
                let v = self.matrix[(r, c)];
                if v != ZERO {
                    row.push((c, v));
                }
            }
        }
        for row in 0..dim {
            let mut lr = 0;
            for (k, &st) in strides.iter().enumerate() {
                lr = lr * local[k] + (row / st) % local[k];
            }
            let base = row - offsets[lr];
            for &(c, v) in &by_row[lr] {
                f(row, base + offsets[c], v);
            }
        }
        Ok(())
    }

    /// The embedded operator as a sparse matrix on the full space.
    pub fn to_sparse(&self, space: &HilbertSpace) -> Result<CsrMatrix> {
        let dim = space.checked_dim(dimension_cap())?;
        let mut trip = Vec::new();
        self.for_each_entry(space, dim, |r, c, v| trip.push((r, c, v)))?;
        Ok(CsrMatrix::from_triplets(dim, trip))
    }

    /// `out += (embedded self) · x` without forming the full matrix.
    pub fn apply(&self, space: &HilbertSpace, x: &[c64], out: &mut [c64]) -> Result<()> {
        let dim = x.len();
        if space.dim() != Some(dim) || out.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {dim} in a space of dim {:?}",
                space.dim()
            )));
        }
        self.for_each_entry(space, dim, |r, c, v| out[r] += v * x[c])
    }

    /// ⟨x| A |x⟩, real part.
    pub fn expectation(&self, space: &HilbertSpace, x: &[c64]) -> Result<f64> {
        let mut ax = vec![ZERO; x.len()];
        self.apply(space, x, &mut ax)?;
        Ok(x.iter().zip(&ax).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Spectral norm of the (Hermitian) local matrix.
    pub fn norm(&self) -> Result<f64> {
        operator_norm(&self.matrix)
    }
}

/// Embeds a local operator into the full tensor-product space as a dense
/// matrix (identity on every site outside the support).
pub fn embed(op: &LocalOperator, space: &HilbertSpace) -> Result<Mat<c64>> {
    let dim = space.checked_dim(dimension_cap())?;
    let mut m = Mat::<c64>::zeros(dim, dim);
    op.for_each_entry(space, dim, |r, c, v| m[(r, c)] += v)?;
    Ok(m)
}

/// Spectral norm of a Hermitian matrix.
pub fn operator_norm(m: &Mat<c64>) -> Result<f64> {
    let defect = linalg::hermitian_defect(m.as_ref());
    if defect > linalg::HERMITIAN_TOL {
        return Err(Error::domain(format!(
            "operator_norm needs a Hermitian matrix (defect {defect:e})"
        )));
    }
    linalg::hermitian_norm(m.as_ref())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}
