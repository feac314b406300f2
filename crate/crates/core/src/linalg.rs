//! Dense and sparse complex linear algebra on top of faer.
//!
//! Everything that touches a Hamiltonian goes through [`CsrMatrix`] first so
//! that exact block structure (conserved quantities, decoupled subsystems)
//! can be found from the sparsity pattern before anything dense is allocated.
//! [`Spectrum`] then diagonalizes each block independently; the result is
//! identical to a full dense decomposition up to the ordering of degenerate
//! eigenvectors.

use faer::{Mat, MatRef, Side};
use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};

pub use faer::c64;

/// Absolute max-entry tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Largest absolute deviation of `m` from its adjoint.
pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    if n != m.ncols() {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in j..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn is_hermitian(m: MatRef<'_, c64>, tol: f64) -> bool {
    m.nrows() == m.ncols() && hermitian_defect(m) <= tol
}

fn is_real(m: MatRef<'_, c64>) -> bool {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)].im != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

/// Hermitian eigendecomposition. Purely real input takes the real symmetric
/// solver, which is several times faster.
pub fn eigh(m: MatRef<'_, c64>) -> Result<Eigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigh of a {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: Mat::zeros(0, 0),
        });
    }
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numeric(format!("real symmetric eigensolver: {e:?}")))?;
        let values = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let vectors = Mat::<c64>::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        Ok(Eigen { values, vectors })
    } else {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numeric(format!("hermitian eigensolver: {e:?}")))?;
        let values = (0..n).map(|k| evd.S()[k].re).collect();
        Ok(Eigen {
            values,
            vectors: evd.U().to_owned(),
        })
    }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        re.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numeric(format!("real symmetric eigensolver: {e:?}")))
    } else {
        m.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numeric(format!("hermitian eigensolver: {e:?}")))
    }
}

/// Spectral norm of a Hermitian matrix: the largest absolute eigenvalue.
pub fn hermitian_norm(m: MatRef<'_, c64>) -> Result<f64> {
    let vals = eigvalsh(m)?;
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Compressed sparse row matrix with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl CsrMatrix {
    pub fn zeros(dim: usize) -> Self {
        CsrMatrix {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// entries that sum to exactly zero are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, c64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<c64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn from_dense(m: MatRef<'_, c64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch("sparse conversion of a non-square matrix".into()));
        }
        let n = m.nrows();
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != ZERO {
                    trip.push((i, j, v));
                }
            }
        }
        Ok(Self::from_triplets(n, trip))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or(ZERO)
    }

    /// `out = self * x`.
    pub fn matvec(&self, x: &[c64], out: &mut [c64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `x† self x`, real part.
    pub fn expectation(&self, x: &[c64]) -> f64 {
        let mut acc = ZERO;
        for r in 0..self.dim {
            let mut row = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += x[r].conj() * row;
        }
        acc.re
    }

    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "adding {}-dim and {}-dim operators",
                self.dim, other.dim
            )));
        }
        let trip = self.iter().chain(other.iter()).collect();
        Ok(Self::from_triplets(self.dim, trip))
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Dense restriction to the rows and columns in `indices`.
    pub fn restrict(&self, indices: &[usize]) -> Mat<c64> {
        let mut local = vec![usize::MAX; self.dim];
        for (k, &g) in indices.iter().enumerate() {
            local[g] = k;
        }
        let n = indices.len();
        let mut m = Mat::<c64>::zeros(n, n);
        for (k, &g) in indices.iter().enumerate() {
            for (c, v) in self.row(g) {
                let lc = local[c];
                if lc != usize::MAX {
                    m[(k, lc)] = v;
                }
            }
        }
        m
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (r, c, v) in self.iter() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    /// Upper bound on the spectral norm (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Partitions `0..dim` into the connected components of the union of the
/// sparsity patterns. Each component is sorted; components are ordered by
/// their smallest index.
pub fn block_partition(dim: usize, patterns: &[&CsrMatrix]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::<usize>::new(dim);
    for m in patterns {
        for (r, c, _) in m.iter() {
            uf.union(r, c);
        }
    }
    let labels = uf.into_labeling();
    let mut slot = vec![usize::MAX; dim];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (i, &root) in labels.iter().enumerate() {
        if slot[root] == usize::MAX {
            slot[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[root]].push(i);
    }
    blocks
}

/// One diagonal block of a block-diagonal eigendecomposition.
#[derive(Debug, Clone)]
pub struct EigenBlock {
    /// Global basis indices spanned by this block, ascending.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Columns are eigenvectors expressed on `indices`.
    pub vectors: Mat<c64>,
}

/// Full eigendecomposition of a Hermitian operator assembled block by block.
#[derive(Debug, Clone)]
pub struct Spectrum {
    dim: usize,
    blocks: Vec<EigenBlock>,
}

impl Spectrum {
    /// Diagonalizes `h`. The block structure is the union of the sparsity
    /// patterns of `h` and `companions`, so the blocks are also invariant
    /// subspaces of every companion operator.
    pub fn new(h: &CsrMatrix, companions: &[&CsrMatrix], max_block: usize) -> Result<Self> {
        for c in companions {
            if c.dim() != h.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "companion operator of dim {} vs hamiltonian of dim {}",
                    c.dim(),
                    h.dim()
                )));
            }
        }
        let defect = h.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::domain(format!(
                "operator is not Hermitian (defect {defect:e})"
            )));
        }
        let mut patterns = vec![h];
        patterns.extend_from_slice(companions);
        let partition = block_partition(h.dim(), &patterns);
        if let Some(big) = partition.iter().map(Vec::len).max() {
            if big > max_block {
                return Err(Error::Resource {
                    what: "dense eigen block".into(),
                    requested: big as u128,
                    cap: max_block as u128,
                });
            }
        }
        let mut blocks = Vec::with_capacity(partition.len());
        for indices in partition {
            let dense = h.restrict(&indices);
            let Eigen { values, vectors } = eigh(dense.as_ref())?;
            blocks.push(EigenBlock {
                indices,
                values,
                vectors,
            });
        }
        Ok(Spectrum { dim: h.dim(), blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[EigenBlock] {
        &self.blocks
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Eigenvector `col` of block `block` as a full-space vector.
    pub fn eigenvector(&self, block: usize, col: usize) -> Vec<c64> {
        let b = &self.blocks[block];
        let mut v = vec![ZERO; self.dim];
        for (k, &g) in b.indices.iter().enumerate() {
            v[g] = b.vectors[(k, col)];
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> Mat<c64> {
        Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO })
    }

    #[test]
    fn eigh_complex_and_real_paths_agree() {
        let y = Mat::<c64>::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c64::new(0.0, -1.0),
            (1, 0) => c64::new(0.0, 1.0),
            _ => ZERO,
        });
        let ey = eigh(y.as_ref()).unwrap();
        let ex = eigh(pauli_x().as_ref()).unwrap();
        assert!((ey.values[0] + 1.0).abs() < 1e-14 && (ey.values[1] - 1.0).abs() < 1e-14);
        assert!((ex.values[0] + 1.0).abs() < 1e-14 && (ex.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn csr_merges_duplicates_and_drops_zeros() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 1, ONE),
                (0, 1, ONE),
                (2, 2, ONE),
                (2, 2, -ONE),
                (1, 0, c64::new(2.0, 0.0)),
            ],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c64::new(2.0, 0.0));
        assert_eq!(m.get(2, 2), ZERO);
    }

    #[test]
    fn partition_finds_disconnected_pieces() {
        let m = CsrMatrix::from_triplets(5, vec![(0, 3, ONE), (3, 0, ONE), (1, 1, ONE)]);
        let p = block_partition(5, &[&m]);
        assert_eq!(p, vec![vec![0, 3], vec![1], vec![2], vec![4]]);
    }

    #[test]
    fn non_hermitian_spectrum_is_rejected() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 1, ONE)]);
        assert!(matches!(Spectrum::new(&m, &[], 10), Err(Error::Domain(_))));
    }
}
