//! Null random-graph models: edge rates, density calibration, sampling and
//! clique planting.
//!
//! All five models are described by a [`ModelParams`] rate structure. The same
//! structure backs fitted models (see [`crate::fit`]), so generative and
//! estimated rates share one implementation of `rate(i, j)` and of the
//! pair-summed rates used by the detector.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::par::KahanSum;
use crate::{Error, Result};

/// Expected edge density used throughout the simulation configurations.
pub const SIMULATION_DENSITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(rename = "er")]
    ErdosRenyi,
    ChungLu,
    Sbm,
    Dcsbm,
    Pabm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::ErdosRenyi,
        ModelKind::ChungLu,
        ModelKind::Sbm,
        ModelKind::Dcsbm,
        ModelKind::Pabm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ErdosRenyi => "er",
            ModelKind::ChungLu => "chunglu",
            ModelKind::Sbm => "sbm",
            ModelKind::Dcsbm => "dcsbm",
            ModelKind::Pabm => "pabm",
        }
    }

    /// Community count used by the simulation configuration of this kind.
    pub fn simulation_communities(self) -> usize {
        match self {
            ModelKind::ErdosRenyi | ModelKind::ChungLu => 1,
            ModelKind::Sbm | ModelKind::Pabm => 2,
            ModelKind::Dcsbm => 3,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "er" | "erdos-renyi" | "erdosrenyi" => Ok(ModelKind::ErdosRenyi),
            "chunglu" | "chung-lu" | "cl" => Ok(ModelKind::ChungLu),
            "sbm" => Ok(ModelKind::Sbm),
            "dcsbm" => Ok(ModelKind::Dcsbm),
            "pabm" => Ok(ModelKind::Pabm),
            other => Err(Error::invalid(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLaw {
    Bernoulli,
    Poisson,
}

/// Factorized edge-rate structure `lambda_ij` of one of the five models.
///
/// * ER: `lambda_ij = p`
/// * Chung-Lu: `lambda_ij = theta_i theta_j`
/// * SBM: `lambda_ij = omega[c_i][c_j]`
/// * DCSBM: `lambda_ij = theta_i omega[c_i][c_j] theta_j`
/// * PABM: `lambda_ij = popularity[i][c_j] * popularity[j][c_i]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    #[serde(rename = "er")]
    ErdosRenyi {
        n: usize,
        p: f64,
    },
    ChungLu {
        theta: Vec<f64>,
    },
    Sbm {
        labels: Vec<usize>,
        omega: Vec<Vec<f64>>,
    },
    Dcsbm {
        labels: Vec<usize>,
        omega: Vec<Vec<f64>>,
        theta: Vec<f64>,
    },
    Pabm {
        labels: Vec<usize>,
        popularity: Vec<Vec<f64>>,
    },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::ErdosRenyi { .. } => ModelKind::ErdosRenyi,
            ModelParams::ChungLu { .. } => ModelKind::ChungLu,
            ModelParams::Sbm { .. } => ModelKind::Sbm,
            ModelParams::Dcsbm { .. } => ModelKind::Dcsbm,
            ModelParams::Pabm { .. } => ModelKind::Pabm,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelParams::ErdosRenyi { n, .. } => *n,
            ModelParams::ChungLu { theta } => theta.len(),
            ModelParams::Sbm { labels, .. } | ModelParams::Dcsbm { labels, .. } | ModelParams::Pabm { labels, .. } => {
                labels.len()
            }
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match self {
            ModelParams::Sbm { labels, .. } | ModelParams::Dcsbm { labels, .. } | ModelParams::Pabm { labels, .. } => {
                Some(labels)
            }
            _ => None,
        }
    }

    fn communities(&self) -> usize {
        match self {
            ModelParams::Sbm { omega, .. } | ModelParams::Dcsbm { omega, .. } => omega.len(),
            ModelParams::Pabm { popularity, .. } => popularity.first().map_or(0, Vec::len),
            _ => 1,
        }
    }

    /// Checks shapes, label ranges and nonnegativity.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |xs: &[f64], what: &str| -> Result<()> {
            match xs.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                Some(x) => Err(Error::invalid(format!("{what} entry {x} must be finite and >= 0"))),
                None => Ok(()),
            }
        };
        let square = |omega: &[Vec<f64>]| -> Result<()> {
            let k = omega.len();
            if k == 0 || omega.iter().any(|row| row.len() != k) {
                return Err(Error::invalid("omega must be a nonempty square matrix"));
            }
            for r in 0..k {
                nonneg(&omega[r], "omega")?;
                for s in 0..r {
                    if omega[r][s] != omega[s][r] {
                        return Err(Error::invalid("omega must be symmetric"));
                    }
                }
            }
            Ok(())
        };
        let k = self.communities();
        if let Some(labels) = self.labels() {
            if let Some(&c) = labels.iter().find(|&&c| c >= k) {
                return Err(Error::invalid(format!("community label {c} outside [0, {k})")));
            }
        }
        match self {
            ModelParams::ErdosRenyi { p, .. } => nonneg(&[*p], "p"),
            ModelParams::ChungLu { theta } => nonneg(theta, "theta"),
            ModelParams::Sbm { omega, .. } => square(omega),
            ModelParams::Dcsbm { labels, omega, theta } => {
                square(omega)?;
                if theta.len() != labels.len() {
                    return Err(Error::invalid("theta and labels differ in length"));
                }
                nonneg(theta, "theta")
            }
            ModelParams::Pabm { labels, popularity } => {
                if popularity.len() != labels.len() || popularity.iter().any(|r| r.len() != k) || k == 0 {
                    return Err(Error::invalid("popularity must be an n x K matrix"));
                }
                popularity.iter().try_for_each(|r| nonneg(r, "popularity"))
            }
        }
    }

    /// `lambda_ij` without range checks.
    #[inline]
    pub(crate) fn rate_unchecked(&self, i: usize, j: usize) -> f64 {
        match self {
            ModelParams::ErdosRenyi { p, .. } => *p,
            ModelParams::ChungLu { theta } => theta[i] * theta[j],
            ModelParams::Sbm { labels, omega } => omega[labels[i]][labels[j]],
            ModelParams::Dcsbm { labels, omega, theta } => theta[i] * omega[labels[i]][labels[j]] * theta[j],
            ModelParams::Pabm { labels, popularity } => popularity[i][labels[j]] * popularity[j][labels[i]],
        }
    }

    /// Edge rate `lambda_ij` for a pair of distinct nodes.
    pub fn rate(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::NodeOutOfRange { index: idx, n });
            }
        }
        if i == j {
            return Err(Error::invalid("rate is undefined on the diagonal"));
        }
        Ok(self.rate_unchecked(i, j))
    }

    /// `sum_{ {j, j'} subset nodes } lambda_{j j'}` over unordered pairs of
    /// the (distinct) `nodes`, evaluated in closed form from the factorized
    /// parameters in `O(|nodes| K + K^2)`.
    pub fn pair_rate_sum(&self, nodes: &[usize]) -> f64 {
        let s = nodes.len();
        if s < 2 {
            return 0.0;
        }
        match self {
            ModelParams::ErdosRenyi { p, .. } => p * (s * (s - 1) / 2) as f64,
            ModelParams::ChungLu { theta } => {
                let (t, q) = sums(nodes.iter().map(|&j| theta[j]));
                0.5 * (t * t - q)
            }
            ModelParams::Sbm { labels, omega } => {
                let k = omega.len();
                let mut counts = vec![0usize; k];
                for &j in nodes {
                    counts[labels[j]] += 1;
                }
                let mut acc = KahanSum::default();
                for r in 0..k {
                    let cr = counts[r];
                    acc.add(omega[r][r] * (cr * cr.saturating_sub(1) / 2) as f64);
                    for s in r + 1..k {
                        acc.add(omega[r][s] * (cr * counts[s]) as f64);
                    }
                }
                acc.value()
            }
            ModelParams::Dcsbm { labels, omega, theta } => {
                let k = omega.len();
                let mut t = vec![KahanSum::default(); k];
                let mut q = vec![KahanSum::default(); k];
                for &j in nodes {
                    t[labels[j]].add(theta[j]);
                    q[labels[j]].add(theta[j] * theta[j]);
                }
                let t: Vec<f64> = t.iter().map(KahanSum::value).collect();
                let mut acc = KahanSum::default();
                for r in 0..k {
                    acc.add(omega[r][r] * 0.5 * (t[r] * t[r] - q[r].value()));
                    for s in r + 1..k {
                        acc.add(omega[r][s] * t[r] * t[s]);
                    }
                }
                acc.value()
            }
            ModelParams::Pabm { labels, popularity } => {
                let k = self.communities();
                // pop_sum[r][s] = sum over nodes j in community r of popularity[j][s]
                let mut pop_sum = vec![vec![KahanSum::default(); k]; k];
                let mut sq = vec![KahanSum::default(); k];
                for &j in nodes {
                    let r = labels[j];
                    for s in 0..k {
                        pop_sum[r][s].add(popularity[j][s]);
                    }
                    sq[r].add(popularity[j][r] * popularity[j][r]);
                }
                let mut acc = KahanSum::default();
                for r in 0..k {
                    let srr = pop_sum[r][r].value();
                    acc.add(0.5 * (srr * srr - sq[r].value()));
                    for s in r + 1..k {
                        acc.add(pop_sum[r][s].value() * pop_sum[s][r].value());
                    }
                }
                acc.value()
            }
        }
        .max(0.0)
    }

    /// Mean rate over all unordered pairs.
    pub fn expected_density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let all: Vec<usize> = (0..n).collect();
        self.pair_rate_sum(&all) / (n * (n - 1) / 2) as f64
    }

    /// Returns the parameters with every `lambda_ij` multiplied by `factor`.
    /// Parameters entering the rate twice (Chung-Lu thetas, PABM
    /// popularities) absorb `sqrt(factor)`; block matrices absorb `factor`.
    fn scaled(&self, factor: f64) -> ModelParams {
        let scale_matrix = |m: &[Vec<f64>], f: f64| -> Vec<Vec<f64>> {
            m.iter().map(|row| row.iter().map(|x| x * f).collect()).collect()
        };
        let root = factor.sqrt();
        match self {
            ModelParams::ErdosRenyi { n, p } => ModelParams::ErdosRenyi { n: *n, p: p * factor },
            ModelParams::ChungLu { theta } => ModelParams::ChungLu {
                theta: theta.iter().map(|t| t * root).collect(),
            },
            ModelParams::Sbm { labels, omega } => ModelParams::Sbm {
                labels: labels.clone(),
                omega: scale_matrix(omega, factor),
            },
            ModelParams::Dcsbm { labels, omega, theta } => ModelParams::Dcsbm {
                labels: labels.clone(),
                omega: scale_matrix(omega, factor),
                theta: theta.clone(),
            },
            ModelParams::Pabm { labels, popularity } => ModelParams::Pabm {
                labels: labels.clone(),
                popularity: scale_matrix(popularity, root),
            },
        }
    }

    /// Largest `lambda_ij` over distinct pairs.
    pub fn max_rate(&self) -> f64 {
        let n = self.n();
        match self {
            ModelParams::ErdosRenyi { p, .. } if n >= 2 => *p,
            _ => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| self.rate_unchecked(i, j))
                .fold(0.0, f64::max),
        }
    }
}

fn sums(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut t = KahanSum::default();
    let mut q = KahanSum::default();
    for x in xs {
        t.add(x);
        q.add(x * x);
    }
    (t.value(), q.value())
}

/// A generative model: rate structure plus the law of each edge count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub edge_law: EdgeLaw,
}

impl ModelSpec {
    pub fn new(params: ModelParams, edge_law: EdgeLaw) -> Result<Self> {
        params.validate()?;
        Ok(ModelSpec { params, edge_law })
    }

    pub fn erdos_renyi(n: usize, p: f64) -> Result<Self> {
        Self::new(ModelParams::ErdosRenyi { n, p }, EdgeLaw::Bernoulli)
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn rate(&self, i: usize, j: usize) -> Result<f64> {
        self.params.rate(i, j)
    }

    pub fn expected_density(&self) -> f64 {
        self.params.expected_density()
    }

    fn check_bernoulli(&self) -> Result<()> {
        if self.edge_law == EdgeLaw::Bernoulli {
            let max = self.params.max_rate();
            if max > 1.0 {
                return Err(Error::RateAboveOne { rate: max });
            }
        }
        Ok(())
    }
}

/// Rescales every rate so that the expected density equals `target`.
pub fn calibrate_density(spec: &ModelSpec, target: f64) -> Result<ModelSpec> {
    if spec.n() < 2 {
        return Err(Error::invalid("density needs at least two nodes"));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::invalid(format!("target density {target} must be > 0")));
    }
    let current = spec.expected_density();
    if current <= 0.0 {
        return Err(Error::invalid("cannot calibrate a model with zero density"));
    }
    let out = ModelSpec {
        params: spec.params.scaled(target / current),
        edge_law: spec.edge_law,
    };
    out.check_bernoulli()?;
    Ok(out)
}

/// Draws `P[X = k]`-distributed counts by inversion for small rates.
fn sample_poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda > 30.0 {
        return Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(0);
    }
    let u: f64 = rng.random();
    let mut mass = (-lambda).exp();
    let mut cdf = mass;
    let mut k = 0u64;
    while u > cdf && k < 1000 {
        k += 1;
        mass *= lambda / k as f64;
        cdf += mass;
    }
    k
}

/// Samples a graph with every unordered pair drawn independently at its rate.
pub fn generate(spec: &ModelSpec, seed: u64) -> Result<Graph> {
    spec.params.validate()?;
    spec.check_bernoulli()?;
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let lambda = spec.params.rate_unchecked(i, j);
            let w = match spec.edge_law {
                EdgeLaw::Bernoulli => u64::from(rng.random::<f64>() < lambda),
                EdgeLaw::Poisson => sample_poisson(&mut rng, lambda),
            };
            if w > 0 {
                edges.push((i, j, w));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// `n` independent Beta(1, 5) draws.
pub fn sample_chunglu_thetas(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one node"));
    }
    let beta = Beta::new(1.0, 5.0).expect("valid Beta parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| beta.sample(&mut rng)).collect())
}

/// Set of nodes to be made pairwise adjacent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliquePlan {
    members: Vec<usize>,
}

impl CliquePlan {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("clique members must be distinct"));
        }
        if members.len() < 2 {
            return Err(Error::invalid("a clique needs at least two members"));
        }
        Ok(CliquePlan { members })
    }

    /// `m` members drawn uniformly without replacement from `[0, n)`.
    pub fn random<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        if m > n {
            return Err(Error::invalid(format!("clique size {m} exceeds node count {n}")));
        }
        Self::new(index::sample(rng, n, m).into_vec())
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Raises every within-clique pair to weight at least one.
pub fn embed_clique(g: &Graph, plan: &CliquePlan) -> Result<Graph> {
    let n = g.n();
    if let Some(&bad) = plan.members.iter().find(|&&v| v >= n) {
        return Err(Error::NodeOutOfRange { index: bad, n });
    }
    let mut pairs: BTreeMap<(usize, usize), u64> = g.edges().map(|(i, j, w)| ((i, j), w)).collect();
    for (a, &i) in plan.members.iter().enumerate() {
        for &j in &plan.members[a + 1..] {
            let w = pairs.entry((i, j)).or_insert(0);
            *w = (*w).max(1);
        }
    }
    Graph::from_edges(n, pairs.into_iter().map(|((i, j), w)| (i, j, w)))
}

/// Contiguous community labels for the given fractional sizes.
fn block_labels(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut bounds = Vec::with_capacity(fractions.len());
    let mut acc = 0.0;
    for f in fractions {
        acc += f;
        bounds.push((acc * n as f64).round() as usize);
    }
    (0..n)
        .map(|i| bounds.iter().position(|&b| i < b).unwrap_or(fractions.len() - 1))
        .collect()
}

/// The simulation configuration of each model kind, calibrated to density
/// [`SIMULATION_DENSITY`]. `seed` drives the random degree parameters.
pub fn make_simulation_spec(kind: ModelKind, n: usize, seed: u64) -> Result<ModelSpec> {
    let k = kind.simulation_communities();
    if n < 4 * k || n < 2 {
        return Err(Error::invalid(format!(
            "{kind} configuration needs n >= {}",
            (4 * k).max(2)
        )));
    }
    let raw = match kind {
        ModelKind::ErdosRenyi => return ModelSpec::erdos_renyi(n, SIMULATION_DENSITY),
        ModelKind::ChungLu => ModelSpec::new(
            ModelParams::ChungLu {
                theta: sample_chunglu_thetas(n, seed)?,
            },
            EdgeLaw::Poisson,
        )?,
        ModelKind::Sbm => ModelSpec::new(
            ModelParams::Sbm {
                labels: block_labels(n, &[0.5, 0.5]),
                omega: vec![vec![4.0, 1.0], vec![1.0, 4.0]],
            },
            EdgeLaw::Poisson,
        )?,
        ModelKind::Dcsbm => ModelSpec::new(
            ModelParams::Dcsbm {
                labels: block_labels(n, &[0.25, 0.25, 0.5]),
                omega: vec![vec![4.0, 2.0, 1.0], vec![2.0, 4.0, 1.0], vec![1.0, 1.0, 4.0]],
                theta: sample_chunglu_thetas(n, seed)?,
            },
            EdgeLaw::Poisson,
        )?,
        ModelKind::Pabm => {
            let labels = block_labels(n, &[0.5, 0.5]);
            let homophily: f64 = 4.0;
            let within = (homophily / (1.0 + homophily)).sqrt();
            let across = (1.0 / (1.0 + homophily)).sqrt();
            let mut seen = [0usize; 2];
            let sizes = [
                labels.iter().filter(|&&c| c == 0).count(),
                labels.iter().filter(|&&c| c == 1).count(),
            ];
            let popularity = labels
                .iter()
                .map(|&c| {
                    // first half of each community is category 1
                    let first_category = seen[c] < sizes[c] / 2;
                    seen[c] += 1;
                    let (a, b) = if first_category { (0.8, 0.2) } else { (0.2, 0.8) };
                    let mut row = vec![b * across; 2];
                    row[c] = a * within;
                    row
                })
                .collect();
            ModelSpec::new(ModelParams::Pabm { labels, popularity }, EdgeLaw::Poisson)?
        }
    };
    calibrate_density(&raw, SIMULATION_DENSITY)
}
