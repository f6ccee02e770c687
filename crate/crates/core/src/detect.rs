//! The egonet scan test.
//!
//! Every node's egonet degree `e_i` is compared against its null law given
//! the neighborhood: `Binomial(C(|N_i|, 2), p)` under an Erdos-Renyi fit and
//! `Poisson(sum of fitted rates over neighbor pairs)` otherwise. The test
//! statistic is the smallest upper-tail probability; the network is flagged
//! when it falls strictly below `alpha / n`.

use serde::{Deserialize, Serialize};

use crate::fit::FittedModel;
use crate::graph::{pair_count, Graph};
use crate::models::ModelParams;
use crate::par::{self, Execution};
use crate::tail::{binom_sf, poisson_sf};
use crate::{Error, Result};

/// Largest flagged set handed to exact clique search.
pub const MAX_RECOVERY_NODES: usize = 200;

/// Per-node scan result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgonetRecord {
    pub node: usize,
    /// Weighted degree `sum_j A_ij`.
    pub degree: u64,
    /// Number of neighbor pairs, `C(|N_i|, 2)`.
    pub pair_count: u64,
    pub egonet_degree: u64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub alpha: f64,
    /// `alpha / n`.
    pub threshold: f64,
    /// Minimum p-value over all nodes (1 for an empty graph).
    pub t_n: f64,
    pub reject: bool,
    pub flagged: Vec<usize>,
    pub records: Vec<EgonetRecord>,
}

impl DetectionReport {
    /// Nodes whose p-value lies strictly below `alpha / n`.
    pub fn flagged_at(&self, alpha: f64) -> Vec<usize> {
        let threshold = alpha / self.records.len().max(1) as f64;
        self.records
            .iter()
            .filter(|r| r.p_value < threshold)
            .map(|r| r.node)
            .collect()
    }
}

fn record(g: &Graph, fm: &FittedModel, i: usize) -> Result<EgonetRecord> {
    let nbrs = g.neighborhood(i)?;
    let degree = g.neighbor_weights(i)?.iter().sum();
    let pairs = pair_count(nbrs.len() as u64);
    let egonet_degree = g.egonet_degree_unchecked(i);
    let p_value = if nbrs.len() < 2 {
        1.0
    } else {
        match &fm.params {
            ModelParams::ErdosRenyi { p, .. } => binom_sf(egonet_degree, pairs, *p)?,
            params => poisson_sf(egonet_degree, params.pair_rate_sum(nbrs))?,
        }
    };
    Ok(EgonetRecord {
        node: i,
        degree,
        pair_count: pairs,
        egonet_degree,
        p_value,
    })
}

/// Egonet p-values of every node, in node order.
pub fn egonet_pvalues(g: &Graph, fm: &FittedModel) -> Result<Vec<EgonetRecord>> {
    egonet_pvalues_with(g, fm, Execution::default())
}

pub fn egonet_pvalues_with(g: &Graph, fm: &FittedModel, exec: Execution) -> Result<Vec<EgonetRecord>> {
    if g.n() != fm.n() {
        return Err(Error::SizeMismatch {
            graph: g.n(),
            model: fm.n(),
        });
    }
    par::map_range(exec, g.n(), |i| record(g, fm, i)).into_iter().collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Runs the egonet test at level `alpha`.
pub fn detect(g: &Graph, fm: &FittedModel, alpha: f64) -> Result<DetectionReport> {
    detect_with(g, fm, alpha, Execution::default())
}

pub fn detect_with(g: &Graph, fm: &FittedModel, alpha: f64, exec: Execution) -> Result<DetectionReport> {
    check_alpha(alpha)?;
    let records = egonet_pvalues_with(g, fm, exec)?;
    Ok(report_from_records(records, alpha))
}

pub(crate) fn report_from_records(records: Vec<EgonetRecord>, alpha: f64) -> DetectionReport {
    let threshold = alpha / records.len().max(1) as f64;
    let t_n = records.iter().map(|r| r.p_value).fold(1.0, f64::min);
    let flagged: Vec<usize> = records
        .iter()
        .filter(|r| r.p_value < threshold)
        .map(|r| r.node)
        .collect();
    DetectionReport {
        alpha,
        threshold,
        t_n,
        reject: t_n < threshold,
        flagged,
        records,
    }
}

/// Adjacency bitsets over a small vertex set.
struct BitGraph {
    words: usize,
    rows: Vec<Vec<u64>>,
}

impl BitGraph {
    fn new(g: &Graph) -> Self {
        let n = g.n();
        let words = n.div_ceil(64).max(1);
        let mut rows = vec![vec![0u64; words]; n];
        for (i, j, _) in g.edges() {
            rows[i][j / 64] |= 1 << (j % 64);
            rows[j][i / 64] |= 1 << (i % 64);
        }
        BitGraph { words, rows }
    }
}

fn ones(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &bits)| {
        let mut b = bits;
        std::iter::from_fn(move || {
            if b == 0 {
                None
            } else {
                let t = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(w * 64 + t)
            }
        })
    })
}

fn first(set: &[u64]) -> Option<usize> {
    set.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

fn count(set: &[u64]) -> usize {
    set.iter().map(|w| w.count_ones() as usize).sum()
}

/// Greedy coloring bound on the clique number of `cand`.
fn color_bound(bg: &BitGraph, cand: &[u64]) -> usize {
    let mut uncolored = cand.to_vec();
    let mut colors = 0;
    while count(&uncolored) > 0 {
        colors += 1;
        let mut avail = uncolored.clone();
        while let Some(v) = first(&avail) {
            uncolored[v / 64] &= !(1 << (v % 64));
            avail[v / 64] &= !(1 << (v % 64));
            for (a, r) in avail.iter_mut().zip(&bg.rows[v]) {
                *a &= !r;
            }
        }
    }
    colors
}

fn expand(bg: &BitGraph, current: &mut Vec<usize>, cand: &[u64], best: &mut Vec<usize>) {
    if current.len() > best.len() {
        *best = current.clone();
    }
    let remaining = count(cand);
    if current.len() + remaining <= best.len() {
        return;
    }
    if current.len() + color_bound(bg, cand) <= best.len() {
        return;
    }
    // children in increasing vertex order: the first maximum clique found is
    // the lexicographically smallest one
    let mut rest = cand.to_vec();
    let verts: Vec<usize> = ones(cand).collect();
    for v in verts {
        if current.len() + count(&rest) <= best.len() {
            break;
        }
        rest[v / 64] &= !(1 << (v % 64));
        let next: Vec<u64> = rest.iter().zip(&bg.rows[v]).map(|(a, b)| a & b).collect();
        current.push(v);
        expand(bg, current, &next, best);
        current.pop();
    }
}

/// A maximum clique of the subgraph induced by `flagged`, in original node
/// indices. Among maximum cliques the lexicographically smallest sorted index
/// set is returned.
pub fn recover_clique(g: &Graph, flagged: &[usize]) -> Result<Vec<usize>> {
    let (sub, map) = g.induced_subgraph(flagged)?;
    if map.len() > MAX_RECOVERY_NODES {
        return Err(Error::FlaggedSetTooLarge {
            size: map.len(),
            limit: MAX_RECOVERY_NODES,
        });
    }
    if map.is_empty() {
        return Ok(Vec::new());
    }
    let bg = BitGraph::new(&sub);
    let mut all = vec![0u64; bg.words];
    for v in 0..sub.n() {
        all[v / 64] |= 1 << (v % 64);
    }
    let mut best = Vec::new();
    expand(&bg, &mut Vec::new(), &all, &mut best);
    Ok(best.into_iter().map(|v| map[v]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{fit_chunglu, fit_er};

    #[test]
    fn empty_graph_never_rejects() {
        let g = Graph::empty(10);
        let fm = FittedModel {
            params: ModelParams::ErdosRenyi { n: 10, p: 0.1 },
        };
        let rep = detect(&g, &fm, 0.05).unwrap();
        assert!(rep.records.iter().all(|r| r.p_value == 1.0));
        assert!(!rep.reject);
        assert!(rep.flagged.is_empty());
        assert_eq!(rep.t_n, 1.0);
    }

    #[test]
    fn triangle_under_full_density() {
        let g = Graph::complete(3);
        let rep = detect(&g, &fit_er(&g).unwrap(), 0.01).unwrap();
        let r0 = &rep.records[0];
        assert_eq!((r0.egonet_degree, r0.pair_count), (1, 1));
        assert_eq!(r0.p_value, 1.0);
        assert!(!rep.reject);
    }

    #[test]
    fn alpha_and_size_checks() {
        let g = Graph::complete(4);
        let fm = fit_er(&g).unwrap();
        assert!(detect(&g, &fm, 0.0).is_err());
        assert!(detect(&g, &fm, 1.0).is_err());
        let other = fit_er(&Graph::complete(5)).unwrap();
        assert!(matches!(egonet_pvalues(&g, &other), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn poisson_path_uses_pair_rates() {
        let g = Graph::from_edges(5, [(0, 1, 1), (0, 2, 1), (0, 3, 1), (1, 2, 1), (3, 4, 1)]).unwrap();
        let fm = fit_chunglu(&g).unwrap();
        let recs = egonet_pvalues(&g, &fm).unwrap();
        let nbrs = [1, 2, 3];
        let lam: f64 = [(1, 2), (1, 3), (2, 3)]
            .iter()
            .map(|&(a, b)| fm.rate(a, b).unwrap())
            .sum();
        assert_eq!(recs[0].egonet_degree, 1);
        assert!((recs[0].p_value - crate::tail::poisson_sf(1, lam).unwrap()).abs() < 1e-14);
        assert!((fm.pair_rate_sum(&nbrs) - lam).abs() < 1e-14);
        assert_eq!(recs[4].p_value, 1.0);
    }

    #[test]
    fn clique_plus_pendants() {
        let mut edges: Vec<(usize, usize, u64)> = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j, 1))).collect();
        edges.extend([(0, 6, 1), (6, 7, 1)]);
        let g = Graph::from_edges(8, edges).unwrap();
        assert_eq!(
            recover_clique(&g, &(0..8).collect::<Vec<_>>()).unwrap(),
            vec![0, 1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn independent_set_gives_lowest_node() {
        let g = Graph::empty(9);
        assert_eq!(recover_clique(&g, &[7, 3, 5]).unwrap(), vec![3]);
        assert!(recover_clique(&g, &[]).unwrap().is_empty());
    }

    #[test]
    fn recovery_size_guard() {
        let g = Graph::empty(300);
        let all: Vec<usize> = (0..201).collect();
        assert!(matches!(
            recover_clique(&g, &all),
            Err(Error::FlaggedSetTooLarge { size: 201, .. })
        ));
    }
}
