//! Plug-in estimation of the null model from an observed graph.
//!
//! Community-based models first estimate labels with regularized spectral
//! clustering, then compute closed-form block statistics. Fitted rates are
//! stored in the same factorized [`ModelParams`] form used for generation:
//!
//! * ER: `p = M / C(n, 2)`
//! * Chung-Lu: `theta_i = d_i / sqrt(2M)`, so `lambda_ij = d_i d_j / 2M`
//! * SBM: `omega_rs = O_rs / (n_r n_s)`, diagonal blocks `O_rr / (n_r (n_r - 1))`
//! * DCSBM: `omega_rs = O_rs`, `theta_i = d_i / delta_{c_i}`
//! * PABM: `popularity_ir = d_{i -> r} / sqrt(O_{c_i r})`
//!
//! where `O_rs` sums `A_ij` over ordered pairs with `c_i = r, c_j = s`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::linalg::{top_eigenpairs, SymmetricOperator};
use crate::models::{ModelKind, ModelParams};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Settings of regularized spectral clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    /// Regularizer `tau`; `None` uses the mean degree.
    pub regularizer: Option<f64>,
    pub row_normalize: bool,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub eig_tol: f64,
    pub seed: u64,
}

impl ClusteringConfig {
    pub fn new(k: usize) -> Self {
        ClusteringConfig {
            k,
            regularizer: None,
            row_normalize: false,
            kmeans_restarts: 10,
            kmeans_max_iter: 100,
            eig_tol: 1e-8,
            seed: 0,
        }
    }

    pub fn row_normalized(mut self) -> Self {
        self.row_normalize = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Estimated null model: rates in factorized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub params: ModelParams,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// Estimated `lambda_ij` for `i != j`.
    pub fn rate(&self, i: usize, j: usize) -> Result<f64> {
        self.params.rate(i, j)
    }

    pub fn communities(&self) -> Option<&[usize]> {
        self.params.labels()
    }

    /// Sum of estimated rates over unordered pairs of `nodes`.
    pub fn pair_rate_sum(&self, nodes: &[usize]) -> f64 {
        self.params.pair_rate_sum(nodes)
    }
}

/// `p = sum_{i<j} A_ij / C(n, 2)`.
pub fn fit_er(g: &Graph) -> Result<FittedModel> {
    let n = g.n();
    if n < 2 {
        return Err(Error::invalid("ER fit needs at least two nodes"));
    }
    let p = g.total_weight() as f64 / (n * (n - 1) / 2) as f64;
    if p > 1.0 {
        return Err(Error::DegenerateFit(format!(
            "edge density {p} exceeds 1; graph is not binary"
        )));
    }
    Ok(FittedModel {
        params: ModelParams::ErdosRenyi { n, p },
    })
}

fn degrees(g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|i| {
            g.neighbor_weights(i)
                .map(|w| w.iter().sum::<u64>() as f64)
                .unwrap_or(0.0)
        })
        .collect()
}

/// `lambda_ij = d_i d_j / 2M`.
pub fn fit_chunglu(g: &Graph) -> Result<FittedModel> {
    let two_m = 2.0 * g.total_weight() as f64;
    if two_m == 0.0 {
        return Err(Error::DegenerateFit("graph has no edges".into()));
    }
    let root = two_m.sqrt();
    Ok(FittedModel {
        params: ModelParams::ChungLu {
            theta: degrees(g).into_iter().map(|d| d / root).collect(),
        },
    })
}

/// Ordered-pair block sums `O_rs` and the per-node degree into each block.
fn block_sums(g: &Graph, labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut blocks = vec![vec![0.0; k]; k];
    let mut into = vec![vec![0.0; k]; g.n()];
    for (i, row) in into.iter_mut().enumerate() {
        let nbrs = g.neighborhood(i).expect("in range");
        let ws = g.neighbor_weights(i).expect("in range");
        for (&j, &w) in nbrs.iter().zip(ws) {
            row[labels[j]] += w as f64;
        }
        for s in 0..k {
            blocks[labels[i]][s] += row[s];
        }
    }
    (blocks, into)
}

fn check_labels(labels: &[usize], n: usize, k: usize) -> Result<Vec<usize>> {
    if labels.len() != n {
        return Err(Error::SizeMismatch {
            graph: n,
            model: labels.len(),
        });
    }
    let mut sizes = vec![0usize; k];
    for &c in labels {
        if c >= k {
            return Err(Error::invalid(format!("community label {c} outside [0, {k})")));
        }
        sizes[c] += 1;
    }
    if let Some(r) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCommunity(r));
    }
    Ok(sizes)
}

/// SBM plug-in estimates for given community labels.
pub fn fit_sbm_with_labels(g: &Graph, labels: &[usize], k: usize) -> Result<FittedModel> {
    let sizes = check_labels(labels, g.n(), k)?;
    let (blocks, _) = block_sums(g, labels, k);
    let omega = (0..k)
        .map(|r| {
            (0..k)
                .map(|s| {
                    let pairs = if r == s {
                        sizes[r] * (sizes[r] - 1)
                    } else {
                        sizes[r] * sizes[s]
                    };
                    if pairs == 0 {
                        0.0
                    } else {
                        blocks[r][s] / pairs as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(FittedModel {
        params: ModelParams::Sbm {
            labels: labels.to_vec(),
            omega,
        },
    })
}

/// DCSBM plug-in estimates for given community labels.
pub fn fit_dcsbm_with_labels(g: &Graph, labels: &[usize], k: usize) -> Result<FittedModel> {
    check_labels(labels, g.n(), k)?;
    let (blocks, _) = block_sums(g, labels, k);
    let block_degree: Vec<f64> = blocks.iter().map(|row| row.iter().sum()).collect();
    if let Some(r) = block_degree.iter().position(|&d| d == 0.0) {
        return Err(Error::DegenerateFit(format!("community {r} has zero total degree")));
    }
    let theta = degrees(g)
        .into_iter()
        .zip(labels)
        .map(|(d, &c)| d / block_degree[c])
        .collect();
    Ok(FittedModel {
        params: ModelParams::Dcsbm {
            labels: labels.to_vec(),
            omega: blocks,
            theta,
        },
    })
}

/// PABM plug-in estimates for given community labels.
pub fn fit_pabm_with_labels(g: &Graph, labels: &[usize], k: usize) -> Result<FittedModel> {
    check_labels(labels, g.n(), k)?;
    let (blocks, into) = block_sums(g, labels, k);
    let mut popularity = Vec::with_capacity(g.n());
    for (row, &c) in into.iter().zip(labels) {
        let mut out = vec![0.0; k];
        for r in 0..k {
            if row[r] > 0.0 {
                if blocks[c][r] <= 0.0 {
                    return Err(Error::DegenerateFit(format!("block ({c}, {r}) has zero mass")));
                }
                out[r] = row[r] / blocks[c][r].sqrt();
            }
        }
        popularity.push(out);
    }
    Ok(FittedModel {
        params: ModelParams::Pabm {
            labels: labels.to_vec(),
            popularity,
        },
    })
}

pub fn fit_sbm(g: &Graph, k: usize) -> Result<FittedModel> {
    fit_sbm_with(g, &ClusteringConfig::new(k))
}

pub fn fit_sbm_with(g: &Graph, cfg: &ClusteringConfig) -> Result<FittedModel> {
    let labels = spectral_cluster(g, cfg)?;
    fit_sbm_with_labels(g, &labels, cfg.k)
}

pub fn fit_dcsbm(g: &Graph, k: usize) -> Result<FittedModel> {
    fit_dcsbm_with(g, &ClusteringConfig::new(k).row_normalized())
}

pub fn fit_dcsbm_with(g: &Graph, cfg: &ClusteringConfig) -> Result<FittedModel> {
    let labels = spectral_cluster(g, cfg)?;
    fit_dcsbm_with_labels(g, &labels, cfg.k)
}

pub fn fit_pabm(g: &Graph, k: usize) -> Result<FittedModel> {
    fit_pabm_with(g, &ClusteringConfig::new(k).row_normalized())
}

pub fn fit_pabm_with(g: &Graph, cfg: &ClusteringConfig) -> Result<FittedModel> {
    let labels = spectral_cluster(g, cfg)?;
    fit_pabm_with_labels(g, &labels, cfg.k)
}

/// Fits `kind` with `k` communities (ignored by ER and Chung-Lu) using the
/// default clustering settings for that kind and the given clustering seed.
pub fn fit(g: &Graph, kind: ModelKind, k: usize, seed: u64) -> Result<FittedModel> {
    let cfg = ClusteringConfig::new(k).with_seed(seed);
    match kind {
        ModelKind::ErdosRenyi => fit_er(g),
        ModelKind::ChungLu => fit_chunglu(g),
        ModelKind::Sbm => fit_sbm_with(g, &cfg),
        ModelKind::Dcsbm => fit_dcsbm_with(g, &cfg.row_normalized()),
        ModelKind::Pabm => fit_pabm_with(g, &cfg.row_normalized()),
    }
}

/// Dense matrix of fitted rates with zero diagonal.
pub fn expected_adjacency(fm: &FittedModel) -> DMatrix<f64> {
    let n = fm.n();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let r = fm.params.rate_unchecked(i, j);
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    m
}

/// `D^{-1/2} (A + tau/n J) D^{-1/2}` with `D = diag(d_i + tau)`.
struct RegularizedLaplacian<'a> {
    g: &'a Graph,
    inv_sqrt: Vec<f64>,
    tau_over_n: f64,
}

impl SymmetricOperator for RegularizedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.g.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let z: Vec<f64> = x.iter().zip(&self.inv_sqrt).map(|(a, b)| a * b).collect();
        self.g.mul_vec(&z, y);
        let shift = self.tau_over_n * z.iter().sum::<f64>();
        for (yi, s) in y.iter_mut().zip(&self.inv_sqrt) {
            *yi = (*yi + shift) * s;
        }
    }
}

/// Community labels in `[0, k)` from regularized spectral clustering.
pub fn spectral_cluster(g: &Graph, cfg: &ClusteringConfig) -> Result<Vec<usize>> {
    let n = g.n();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::invalid(format!(
            "cannot form {} communities from {n} nodes",
            cfg.k
        )));
    }
    if cfg.k == 1 {
        return Ok(vec![0; n]);
    }
    let deg = degrees(g);
    let tau = match cfg.regularizer {
        Some(t) if t >= 0.0 => t,
        Some(t) => return Err(Error::invalid(format!("regularizer {t} must be >= 0"))),
        None => deg.iter().sum::<f64>() / n as f64,
    };
    let op = RegularizedLaplacian {
        g,
        inv_sqrt: deg
            .iter()
            .map(|d| if d + tau > 0.0 { 1.0 / (d + tau).sqrt() } else { 0.0 })
            .collect(),
        tau_over_n: tau / n as f64,
    };
    let eig = top_eigenpairs(&op, cfg.k, cfg.eig_tol, cfg.seed)?;
    let dim = cfg.k;
    let mut points = vec![0.0; n * dim];
    for (c, v) in eig.vectors.iter().enumerate() {
        for i in 0..n {
            points[i * dim + c] = v[i];
        }
    }
    if cfg.row_normalize {
        for row in points.chunks_mut(dim) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }
    Ok(kmeans(
        &points,
        dim,
        cfg.k,
        cfg.kmeans_restarts.max(1),
        cfg.kmeans_max_iter,
        cfg.seed,
        Execution::Sequential,
    ))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(point: &[f64], centers: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.chunks(dim).enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_once(points: &[f64], dim: usize, k: usize, max_iter: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = points.len() / dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    // k-means++ seeding
    let mut centers: Vec<f64> = Vec::with_capacity(k * dim);
    centers.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centers.len();
        centers.extend_from_slice(row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &centers[start..]));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(row(i), &centers, dim);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous center
            if counts[c] > 0 {
                for d in 0..dim {
                    centers[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
    }
    let objective = (0..n)
        .map(|i| sq_dist(row(i), &centers[labels[i] * dim..(labels[i] + 1) * dim]))
        .sum();
    (labels, objective)
}

/// Lloyd's k-means with k-means++ seeding on `points` (row-major, `dim`
/// columns). The restart with the lowest objective wins, ties going to the
/// earliest restart. Labels are renumbered in order of first appearance.
pub fn kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
    exec: Execution,
) -> Vec<usize> {
    let n = points.len().checked_div(dim).unwrap_or(0);
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let runs = par::map_range(exec, restarts.max(1), |r| {
        kmeans_once(
            points,
            dim,
            k.min(n),
            max_iter,
            seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        )
    });
    let (labels, _) = runs
        .into_iter()
        .reduce(|best, run| if run.1 < best.1 { run } else { best })
        .expect("at least one restart");
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    labels
        .into_iter()
        .map(|c| {
            if remap[c] == usize::MAX {
                remap[c] = next;
                next += 1;
            }
            remap[c]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn two_cliques(m: usize) -> Graph {
        let edges = (0..2).flat_map(|b| (0..m).flat_map(move |i| (i + 1..m).map(move |j| (b * m + i, b * m + j, 1))));
        Graph::from_edges(2 * m, edges).unwrap()
    }

    #[test]
    fn er_fit() {
        let fm = fit_er(&Graph::complete(5)).unwrap();
        assert_eq!(fm.rate(0, 4).unwrap(), 1.0);
        assert_eq!(fit_er(&Graph::empty(5)).unwrap().rate(1, 2).unwrap(), 0.0);
        assert!(fit_er(&Graph::empty(1)).is_err());
    }

    #[test]
    fn chunglu_fit() {
        // 4-regular circulant on 9 nodes
        let edges = (0..9).flat_map(|i| [(i, (i + 1) % 9, 1), (i, (i + 2) % 9, 1)]);
        let g = Graph::from_edges(9, edges).unwrap();
        assert!(rel(fit_chunglu(&g).unwrap().rate(0, 5).unwrap(), 4.0 / 9.0) < 1e-15);

        let star = Graph::from_edges(4, [(0, 1, 1), (0, 2, 1), (0, 3, 1)]).unwrap();
        assert!(rel(fit_chunglu(&star).unwrap().rate(0, 2).unwrap(), 0.5) < 1e-15);
        assert!(matches!(fit_chunglu(&Graph::empty(3)), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn chunglu_total_rate_identity() {
        let g = Graph::from_edges(6, [(0, 1, 1), (1, 2, 2), (2, 3, 1), (0, 3, 1), (4, 5, 1), (1, 4, 1)]).unwrap();
        let fm = fit_chunglu(&g).unwrap();
        let d: Vec<f64> = (0..6).map(|i| g.degree(i).unwrap() as f64).collect();
        let two_m = 2.0 * g.total_weight() as f64;
        let s: f64 = d.iter().sum();
        let q: f64 = d.iter().map(|x| x * x).sum();
        let closed = (s * s - q) / (2.0 * two_m);
        let mut direct = 0.0;
        for i in 0..6 {
            for j in 0..i {
                direct += fm.rate(i, j).unwrap();
            }
        }
        assert!(rel(direct, closed) < 1e-14);
    }

    #[test]
    fn spectral_separates_components() {
        let g = two_cliques(10);
        let labels = spectral_cluster(&g, &ClusteringConfig::new(2)).unwrap();
        assert!(labels[..10].iter().all(|&c| c == labels[0]));
        assert!(labels[10..].iter().all(|&c| c == labels[10]));
        assert_ne!(labels[0], labels[10]);
        assert_eq!(spectral_cluster(&g, &ClusteringConfig::new(1)).unwrap(), vec![0; 20]);
        assert!(spectral_cluster(&g, &ClusteringConfig::new(21)).is_err());
    }

    #[test]
    fn sbm_on_two_cliques() {
        let fm = fit_sbm(&two_cliques(6), 2).unwrap();
        match &fm.params {
            ModelParams::Sbm { omega, .. } => assert_eq!(omega, &vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn pabm_on_two_cliques() {
        let m = 7usize;
        let fm = fit_pabm(&two_cliques(m), 2).unwrap();
        let want_theta = (m - 1) as f64 / ((m * (m - 1)) as f64).sqrt();
        match &fm.params {
            ModelParams::Pabm { labels, popularity } => {
                for (i, row) in popularity.iter().enumerate() {
                    assert!(rel(row[labels[i]], want_theta) < 1e-14);
                    assert_eq!(row[1 - labels[i]], 0.0);
                }
            }
            _ => unreachable!(),
        }
        assert!(rel(fm.rate(0, 1).unwrap(), (m - 1) as f64 / m as f64) < 1e-14);
        assert_eq!(fm.rate(0, m).unwrap(), 0.0);
    }

    #[test]
    fn dcsbm_theta_sums_to_one_per_block() {
        let g = crate::models::generate(
            &crate::models::make_simulation_spec(ModelKind::Dcsbm, 200, 1).unwrap(),
            4,
        )
        .unwrap();
        let fm = fit_dcsbm(&g, 3).unwrap();
        match &fm.params {
            ModelParams::Dcsbm { labels, theta, .. } => {
                for r in 0..3 {
                    let s: f64 = labels.iter().zip(theta).filter(|(&c, _)| c == r).map(|(_, t)| t).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn empty_community_is_an_error() {
        let g = Graph::complete(4);
        assert!(matches!(
            fit_sbm_with_labels(&g, &[0, 0, 0, 0], 2),
            Err(Error::EmptyCommunity(1))
        ));
    }

    #[test]
    fn expected_adjacency_shape() {
        let m = expected_adjacency(&fit_er(&Graph::complete(5)).unwrap());
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn kmeans_restart_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let a = kmeans(&pts, 3, 4, 10, 100, 5, Execution::Sequential);
        let b = kmeans(&pts, 3, 4, 10, 100, 5, Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(a[0], 0);
    }
}
