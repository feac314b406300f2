//! Lattice geometry, boundaries of site sets and weighted paths through the
//! interaction hypergraph.
//!
//! A path from X to Y is a sequence of interaction supports Z₁, …, Z_n with
//! Z₁ ∈ ∂X, Z_{k+1} ∈ ∂Z_k and Z_n ∩ Y ≠ ∅, where
//! ∂X = { Z : Z ∩ X ≠ ∅, Z ⊄ X }. Its weight is Π ‖Φ(Z_k)‖.
//!
//! Two routes compute path sums: [`enumerate_paths`] lists every path
//! explicitly (exponential, used for small lengths and as a cross-check), and
//! [`PathGraph`] propagates weights as a transfer matrix, which is what the
//! bound evaluation uses.

use std::collections::BTreeMap;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::c64;
use crate::model::InteractionTerm;
use crate::spin::operator_norm;

/// Default cap on explicit path expansions.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Hypercubic lattice of dimension 1 or 2 with open boundaries. Sites are
/// numbered row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    extents: Vec<usize>,
}

impl Lattice {
    pub fn new(extents: Vec<usize>) -> Result<Lattice> {
        if extents.is_empty() || extents.len() > 2 {
            return Err(Error::domain(format!(
                "lattice dimension {} not supported (1 or 2)",
                extents.len()
            )));
        }
        if extents.contains(&0) {
            return Err(Error::domain("lattice extent must be positive"));
        }
        Ok(Lattice { extents })
    }

    pub fn chain(n: usize) -> Result<Lattice> {
        Lattice::new(vec![n])
    }

    pub fn square(nx: usize, ny: usize) -> Result<Lattice> {
        Lattice::new(vec![nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = vec![0; self.extents.len()];
        let mut rem = site;
        for k in (0..self.extents.len()).rev() {
            c[k] = rem % self.extents[k];
            rem /= self.extents[k];
        }
        c
    }

    /// Manhattan distance.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.coords(a)
            .into_iter()
            .zip(self.coords(b))
            .map(|(x, y)| x.abs_diff(y))
            .sum()
    }

    /// Largest pairwise distance within `set` (0 for fewer than two sites).
    pub fn diameter(&self, set: &[usize]) -> usize {
        let mut d = 0;
        for (k, &a) in set.iter().enumerate() {
            for &b in &set[k + 1..] {
                d = d.max(self.distance(a, b));
            }
        }
        d
    }

    /// All nearest-neighbour pairs (i, j) with i < j.
    pub fn nearest_neighbor_bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds = Vec::new();
        for i in 0..self.sites() {
            let c = self.coords(i);
            let mut stride = 1;
            for k in (0..self.extents.len()).rev() {
                if c[k] + 1 < self.extents[k] {
                    bonds.push((i, i + stride));
                }
                stride *= self.extents[k];
            }
        }
        bonds.sort_unstable();
        bonds
    }
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|x| b.contains(x))
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

/// Z is in ∂X when it meets X without being contained in it.
pub fn in_boundary(z: &[usize], x: &[usize]) -> bool {
    intersects(z, x) && !is_subset(z, x)
}

/// ∂X over the supports of `terms`, one entry per term.
pub fn boundary<'a>(x: &[usize], terms: &'a [InteractionTerm]) -> Vec<&'a [usize]> {
    terms
        .iter()
        .map(|t| t.support())
        .filter(|z| in_boundary(z, x))
        .collect()
}

/// A chain of interaction supports and its weight (meVⁿ).
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub sets: Vec<Vec<usize>>,
    pub weight: f64,
}

impl Path {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Interaction supports with ‖Φ(Z)‖, where Φ(Z) is the sum of all terms
/// sharing the support Z, and the ∂-successor relation between them.
#[derive(Debug, Clone)]
pub struct PathGraph {
    supports: Vec<Vec<usize>>,
    norms: Vec<f64>,
    successors: Vec<Vec<usize>>,
}

impl PathGraph {
    pub fn new(terms: &[InteractionTerm]) -> Result<PathGraph> {
        let mut grouped: BTreeMap<Vec<usize>, Mat<c64>> = BTreeMap::new();
        for t in terms {
            match grouped.get_mut(t.support()) {
                Some(m) => {
                    let add = t.matrix();
                    if add.nrows() != m.nrows() {
                        return Err(Error::DimensionMismatch(format!(
                            "terms on {:?} disagree on dimension",
                            t.support()
                        )));
                    }
                    for j in 0..m.ncols() {
                        for i in 0..m.nrows() {
                            m[(i, j)] += add[(i, j)];
                        }
                    }
                }
                None => {
                    grouped.insert(t.support().to_vec(), t.matrix().clone());
                }
            }
        }
        let mut supports = Vec::with_capacity(grouped.len());
        let mut norms = Vec::with_capacity(grouped.len());
        for (support, m) in grouped {
            // A single term keeps its cached norm bit for bit.
            let single: Vec<&InteractionTerm> =
                terms.iter().filter(|t| t.support() == support.as_slice()).collect();
            let norm = if single.len() == 1 {
                single[0].norm()
            } else {
                operator_norm(&m)?
            };
            supports.push(support);
            norms.push(norm);
        }
        let successors = supports
            .iter()
            .map(|z| {
                (0..supports.len())
                    .filter(|&k| in_boundary(&supports[k], z))
                    .collect()
            })
            .collect();
        Ok(PathGraph {
            supports,
            norms,
            successors,
        })
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Node ids of the supports in ∂X.
    pub fn boundary_nodes(&self, x: &[usize]) -> Vec<usize> {
        (0..self.supports.len())
            .filter(|&k| in_boundary(&self.supports[k], x))
            .collect()
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.successors[node]
    }

    /// Nodes reachable from ∂X (inclusive).
    pub fn reachable(&self, x: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.supports.len()];
        let mut stack = self.boundary_nodes(x);
        while let Some(n) = stack.pop() {
            if seen[n] {
                continue;
            }
            seen[n] = true;
            stack.extend(self.successors[n].iter().copied().filter(|&m| !seen[m]));
        }
        seen
    }

    /// (max out-degree, max norm) over the part of the graph reachable from X.
    pub fn reach_stats(&self, x: &[usize]) -> (usize, f64) {
        let seen = self.reachable(x);
        let mut branching = 0;
        let mut wmax = 0.0_f64;
        for (k, &s) in seen.iter().enumerate() {
            if s {
                branching = branching.max(self.successors[k].len());
                wmax = wmax.max(self.norms[k]);
            }
        }
        (branching, wmax)
    }

    /// Total weight W_L of all paths X → Y of length L, for L = 0..=max_len.
    /// W_0 is 1 when X ∩ Y ≠ ∅.
    pub fn walk_weights(&self, x: &[usize], y: &[usize], max_len: usize) -> Vec<f64> {
        let hits: Vec<bool> = self.supports.iter().map(|z| intersects(z, y)).collect();
        let mut out = Vec::with_capacity(max_len + 1);
        out.push(if intersects(x, y) { 1.0 } else { 0.0 });
        if max_len == 0 {
            return out;
        }
        let mut cur = vec![0.0; self.supports.len()];
        for k in self.boundary_nodes(x) {
            cur[k] = self.norms[k];
        }
        for len in 1..=max_len {
            out.push(
                cur.iter()
                    .zip(&hits)
                    .filter(|(_, &h)| h)
                    .map(|(w, _)| *w)
                    .sum(),
            );
            if len < max_len {
                cur = self.step(&cur, 1.0);
            }
        }
        out
    }

    /// One transfer step: next[z'] = scale·‖Φ(z')‖·Σ_{z: z' ∈ ∂z} cur[z].
    pub(crate) fn step(&self, cur: &[f64], scale: f64) -> Vec<f64> {
        let mut next = vec![0.0; cur.len()];
        for (z, &w) in cur.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &s in &self.successors[z] {
                next[s] += w;
            }
        }
        for (k, v) in next.iter_mut().enumerate() {
            *v *= scale * self.norms[k];
        }
        next
    }

    pub(crate) fn hits(&self, y: &[usize]) -> Vec<bool> {
        self.supports.iter().map(|z| intersects(z, y)).collect()
    }

    /// Number of edges (successor pairs).
    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }
}

/// Every path X → Y of length 1..=max_length, in lexicographic order of node
/// sequences. The boolean is false when the budget ran out first.
pub fn enumerate_paths_partial(
    x: &[usize],
    y: &[usize],
    terms: &[InteractionTerm],
    max_length: usize,
    budget: u64,
) -> Result<(Vec<Path>, bool)> {
    let graph = PathGraph::new(terms)?;
    let hits = graph.hits(y);
    let mut paths = Vec::new();
    let mut expansions: u64 = 0;
    let mut stack: Vec<usize> = Vec::new();

    fn visit(
        node: usize,
        graph: &PathGraph,
        hits: &[bool],
        max_length: usize,
        budget: u64,
        expansions: &mut u64,
        stack: &mut Vec<usize>,
        paths: &mut Vec<Path>,
    ) -> bool {
        *expansions += 1;
        if *expansions > budget {
            return false;
        }
        stack.push(node);
        if hits[node] {
            paths.push(Path {
                sets: stack.iter().map(|&k| graph.supports[k].clone()).collect(),
                weight: stack.iter().map(|&k| graph.norms[k]).product(),
            });
        }
        if stack.len() < max_length {
            for &next in &graph.successors[node] {
                if !visit(next, graph, hits, max_length, budget, expansions, stack, paths) {
                    stack.pop();
                    return false;
                }
            }
        }
        stack.pop();
        true
    }

    if max_length == 0 {
        return Ok((paths, true));
    }
    for first in graph.boundary_nodes(x) {
        if !visit(
            first,
            &graph,
            &hits,
            max_length,
            budget,
            &mut expansions,
            &mut stack,
            &mut paths,
        ) {
            return Ok((paths, false));
        }
    }
    Ok((paths, true))
}

/// Every path X → Y of length 1..=max_length. Running out of `budget`
/// expansions is an error.
pub fn enumerate_paths(
    x: &[usize],
    y: &[usize],
    terms: &[InteractionTerm],
    max_length: usize,
    budget: u64,
) -> Result<Vec<Path>> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::domain("path endpoints must be nonempty site sets"));
    }
    if max_length == 0 {
        return Err(Error::domain("max_length must be at least 1"));
    }
    let (paths, complete) = enumerate_paths_partial(x, y, terms, max_length, budget)?;
    if complete {
        Ok(paths)
    } else {
        Err(Error::PathBudget {
            budget,
            partial_paths: paths.len(),
        })
    }
}

/// Replays the chaining conditions and weight of `path` against `terms`.
pub fn validate_path(path: &Path, x: &[usize], y: &[usize], terms: &[InteractionTerm]) -> bool {
    let Some(first) = path.sets.first() else {
        return false;
    };
    let Some(last) = path.sets.last() else {
        return false;
    };
    if !in_boundary(first, x) || !intersects(last, y) {
        return false;
    }
    if !path.sets.windows(2).all(|w| in_boundary(&w[1], &w[0])) {
        return false;
    }
    let Ok(graph) = PathGraph::new(terms) else {
        return false;
    };
    let mut weight = 1.0;
    for z in &path.sets {
        match graph.supports.iter().position(|s| s == z) {
            Some(k) => weight *= graph.norms[k],
            None => return false,
        }
    }
    (weight - path.weight).abs() <= 1e-12 * weight.abs().max(1.0)
}

/// (2(2d−1))^L, saturating at `u128::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathCount {
    pub value: u128,
    pub saturated: bool,
}

pub fn path_count_bound(d: usize, len: u32) -> Result<PathCount> {
    if d == 0 {
        return Err(Error::domain("lattice dimension must be at least 1"));
    }
    let base = 2 * (2 * d as u128 - 1);
    Ok(match base.checked_pow(len) {
        Some(value) => PathCount {
            value,
            saturated: false,
        },
        None => PathCount {
            value: u128::MAX,
            saturated: true,
        },
    })
}
