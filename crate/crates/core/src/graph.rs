//! Sparse symmetric integer-weighted graphs.
//!
//! Adjacency is stored in compressed sparse row form: every node owns a
//! sorted run of neighbor indices with a parallel run of positive weights.
//! Each unordered pair therefore appears twice, once per endpoint.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Number of unordered pairs among `d` items.
pub fn pair_count(d: u64) -> u64 {
    if d < 2 {
        0
    } else {
        d * (d - 1) / 2
    }
}

/// Undirected graph without self-loops whose edges carry positive integer
/// weights (edge multiplicities). Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<u64>,
}

impl Graph {
    /// Graph on `n` nodes without edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Complete simple graph `K_n`.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1)));
        Self::from_edges(n, edges).expect("complete graph is valid")
    }

    /// Builds a graph from `(u, v, w)` triples. Pairs may be given in either
    /// orientation; repeated pairs are merged by summing their weights and
    /// zero weights are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u64)>,
    {
        let mut pairs: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (u, v, w) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if w == 0 {
                continue;
            }
            *pairs.entry((u.min(v), u.max(v))).or_insert(0) += w;
        }
        Ok(Self::from_sorted_pairs(n, &pairs))
    }

    fn from_sorted_pairs(n: usize, pairs: &BTreeMap<(usize, usize), u64>) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j) in pairs.keys() {
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let total = offsets[n];
        let mut targets = vec![0usize; total];
        let mut weights = vec![0u64; total];
        let mut cursor = offsets[..n].to_vec();
        // Pairs arrive sorted by (i, j) with i < j: visiting them in order
        // fills every row in increasing target order, because all targets
        // below a node are written before the targets above it.
        for (&(i, j), &w) in pairs {
            targets[cursor[j]] = i;
            weights[cursor[j]] = w;
            cursor[j] += 1;
        }
        for (&(i, j), &w) in pairs {
            targets[cursor[i]] = j;
            weights[cursor[i]] = w;
            cursor[i] += 1;
        }
        let g = Graph {
            offsets,
            targets,
            weights,
        };
        debug_assert!((0..n).all(|i| g.row(i).0.windows(2).all(|w| w[0] < w[1])));
        g
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of distinct adjacent pairs.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Total edge weight `M = sum_{i<j} A_ij`.
    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum::<u64>() / 2
    }

    pub fn is_binary(&self) -> bool {
        self.weights.iter().all(|&w| w == 1)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { index: i, n: self.n() })
        }
    }

    #[inline]
    fn row(&self, i: usize) -> (&[usize], &[u64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    /// Weighted degree `d_i = sum_j A_ij`.
    pub fn degree(&self, i: usize) -> Result<u64> {
        self.check(i)?;
        Ok(self.row(i).1.iter().sum())
    }

    /// Sorted neighbors `{j : A_ij > 0}`.
    pub fn neighborhood(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(self.row(i).0)
    }

    /// Edge weights aligned with [`Graph::neighborhood`].
    pub fn neighbor_weights(&self, i: usize) -> Result<&[u64]> {
        self.check(i)?;
        Ok(self.row(i).1)
    }

    pub fn weight(&self, i: usize, j: usize) -> Result<u64> {
        self.check(i)?;
        self.check(j)?;
        let (t, w) = self.row(i);
        Ok(t.binary_search(&j).map(|p| w[p]).unwrap_or(0))
    }

    /// Total weight of edges among the neighbors of `i`, each unordered
    /// neighbor pair counted once.
    pub fn egonet_degree(&self, i: usize) -> Result<u64> {
        self.check(i)?;
        Ok(self.egonet_degree_unchecked(i))
    }

    pub(crate) fn egonet_degree_unchecked(&self, i: usize) -> u64 {
        let ego = self.row(i).0;
        let mut total = 0u64;
        for (pos, &j) in ego.iter().enumerate() {
            // neighbors of i above j, intersected with neighbors of j above j
            let rest = &ego[pos + 1..];
            let (nj, wj) = self.row(j);
            let start = nj.partition_point(|&x| x <= j);
            let (mut a, mut b) = (0, start);
            while a < rest.len() && b < nj.len() {
                match rest[a].cmp(&nj[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        total += wj[b];
                        a += 1;
                        b += 1;
                    }
                }
            }
        }
        total
    }

    /// Unordered edges `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            let (t, w) = self.row(i);
            let start = t.partition_point(|&x| x <= i);
            t[start..].iter().zip(&w[start..]).map(move |(&j, &wt)| (i, j, wt))
        })
    }

    /// Subgraph induced by `nodes`. Returns the subgraph together with the
    /// map from its node indices back to indices in `self` (sorted,
    /// duplicates removed).
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
        let mut keep: Vec<usize> = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &v in &keep {
            self.check(v)?;
        }
        let mut local = vec![usize::MAX; self.n()];
        for (new, &old) in keep.iter().enumerate() {
            local[old] = new;
        }
        let mut edges = Vec::new();
        for (a, &old) in keep.iter().enumerate() {
            let (t, w) = self.row(old);
            for (&j, &wt) in t.iter().zip(w) {
                let b = local[j];
                if b != usize::MAX && a < b {
                    edges.push((a, b, wt));
                }
            }
        }
        Ok((Graph::from_edges(keep.len(), edges)?, keep))
    }

    /// Graph with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n() {
            return Err(Error::invalid("permutation length differs from node count"));
        }
        Graph::from_edges(self.n(), self.edges().map(|(i, j, w)| (perm[i], perm[j], w)))
    }

    /// Dense `n x n` adjacency matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, w) in self.edges() {
            m[(i, j)] = w as f64;
            m[(j, i)] = w as f64;
        }
        m
    }

    /// `y = A x` for a vector of length `n`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (t, w) = self.row(i);
            *yi = t.iter().zip(w).map(|(&j, &wt)| wt as f64 * x[j]).sum();
        }
    }
}
