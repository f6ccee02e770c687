//! Seeded Monte-Carlo harness.
//!
//! A replicate generates a null network, optionally plants a clique of `m`
//! uniformly chosen nodes, refits the generating model kind and runs the
//! selected detectors. Every random stream is seeded from a hash of the base
//! seed and the replicate coordinates, so outcomes do not depend on the order
//! or parallelism in which replicates run. The same replicate index reuses one
//! null network for all clique sizes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chi2::{max_rotated_chi2, residual_pcs};
use crate::detect::egonet_pvalues_with;
use crate::fit::fit;
use crate::models::{embed_clique, generate, make_simulation_spec, CliquePlan, ModelKind};
use crate::par::{self, Execution};
use crate::tail::chi2_1_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Egonet,
    Chi2,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Egonet => "egonet",
            Detector::Chi2 => "chi2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelKind,
    pub n: usize,
    /// Clique sizes; 0 denotes null (clique-free) runs.
    pub clique_sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub detectors: Vec<Detector>,
    /// Worker threads; 0 uses every available core, 1 runs sequentially.
    pub threads: usize,
}

impl SimConfig {
    pub fn new(model: ModelKind, n: usize) -> Self {
        SimConfig {
            model,
            n,
            clique_sizes: vec![0],
            alphas: vec![0.01],
            replicates: 100,
            base_seed: 0,
            detectors: vec![Detector::Egonet],
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("need at least one replicate"));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::invalid("alphas must be nonempty and inside (0, 1)"));
        }
        if let Some(&m) = self.clique_sizes.iter().find(|&&m| m == 1 || m >= self.n) {
            return Err(Error::invalid(format!("clique size {m} must be 0 or in [2, n)")));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("no detector selected"));
        }
        Ok(())
    }

    fn execution(&self) -> Execution {
        if self.threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: a hash of `base` and `coords`.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix(base), |h, &c| splitmix(h ^ splitmix(c)))
}

const STREAM_PARAMS: u64 = 1;
const STREAM_GRAPH: u64 = 2;
const STREAM_CLIQUE: u64 = 3;
const STREAM_FIT: u64 = 4;

fn model_tag(kind: ModelKind) -> u64 {
    ModelKind::ALL.iter().position(|&k| k == kind).unwrap() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaOutcome {
    pub alpha: f64,
    pub reject: bool,
    /// Flagged nodes inside the planted clique.
    pub flagged_in_clique: usize,
    /// Flagged nodes outside the planted clique.
    pub flagged_outside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgonetOutcome {
    pub t_n: f64,
    /// Largest p-value among planted clique members (None for null runs).
    pub t_n_clique: Option<f64>,
    pub per_alpha: Vec<AlphaOutcome>,
    /// Flagged node set at the first alpha of the configuration.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Outcome {
    pub statistic: f64,
    pub rejects: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub model: ModelKind,
    pub n: usize,
    pub m: usize,
    pub replicate: usize,
    pub clique: Vec<usize>,
    pub egonet: Option<EgonetOutcome>,
    pub chi2: Option<Chi2Outcome>,
    pub error: Option<String>,
}

/// Runs one replicate; module errors are recorded in the outcome.
pub fn run_replicate(cfg: &SimConfig, m: usize, replicate: usize) -> ReplicateOutcome {
    let mut out = ReplicateOutcome {
        model: cfg.model,
        n: cfg.n,
        m,
        replicate,
        clique: Vec::new(),
        egonet: None,
        chi2: None,
        error: None,
    };
    if let Err(e) = replicate_inner(cfg, m, replicate, &mut out) {
        out.egonet = None;
        out.chi2 = None;
        out.error = Some(e.to_string());
    }
    out
}

fn replicate_inner(cfg: &SimConfig, m: usize, replicate: usize, out: &mut ReplicateOutcome) -> Result<()> {
    let cell = [model_tag(cfg.model), cfg.n as u64, replicate as u64];
    let seed = |stream: u64, extra: u64| derive_seed(cfg.base_seed, &[cell[0], cell[1], cell[2], stream, extra]);

    let spec = make_simulation_spec(cfg.model, cfg.n, seed(STREAM_PARAMS, 0))?;
    let mut g = generate(&spec, seed(STREAM_GRAPH, 0))?;
    if m > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed(STREAM_CLIQUE, m as u64));
        let plan = CliquePlan::random(cfg.n, m, &mut rng)?;
        g = embed_clique(&g, &plan)?;
        out.clique = plan.members().to_vec();
    }
    let k = cfg.model.simulation_communities();
    let fm = fit(&g, cfg.model, k, seed(STREAM_FIT, m as u64))?;

    // replicates already run in parallel
    let inner = Execution::Sequential;
    if cfg.detectors.contains(&Detector::Egonet) {
        let records = egonet_pvalues_with(&g, &fm, inner)?;
        let t_n = records.iter().map(|r| r.p_value).fold(1.0, f64::min);
        let in_clique = {
            let mut mask = vec![false; cfg.n];
            out.clique.iter().for_each(|&v| mask[v] = true);
            mask
        };
        let t_n_clique = (m > 0).then(|| out.clique.iter().map(|&v| records[v].p_value).fold(0.0, f64::max));
        let per_alpha = cfg
            .alphas
            .iter()
            .map(|&alpha| {
                let threshold = alpha / cfg.n as f64;
                let (mut inside, mut outside) = (0, 0);
                for r in records.iter().filter(|r| r.p_value < threshold) {
                    if in_clique[r.node] {
                        inside += 1;
                    } else {
                        outside += 1;
                    }
                }
                AlphaOutcome {
                    alpha,
                    reject: t_n < threshold,
                    flagged_in_clique: inside,
                    flagged_outside: outside,
                }
            })
            .collect();
        let first = cfg.alphas[0] / cfg.n as f64;
        let flagged = records.iter().filter(|r| r.p_value < first).map(|r| r.node).collect();
        out.egonet = Some(EgonetOutcome {
            t_n,
            t_n_clique,
            per_alpha,
            flagged,
        });
    }
    if cfg.detectors.contains(&Detector::Chi2) {
        let (x1, x2) = residual_pcs(&g, &fm)?;
        let (statistic, _, _) = max_rotated_chi2(&x1, &x2, inner)?;
        let rejects = cfg
            .alphas
            .iter()
            .map(|&a| chi2_1_quantile(1.0 - a).map(|crit| statistic > crit))
            .collect::<Result<Vec<_>>>()?;
        out.chi2 = Some(Chi2Outcome { statistic, rejects });
    }
    Ok(())
}

/// Empirical proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub events: u64,
    pub trials: u64,
    pub value: f64,
    pub se: f64,
}

impl Rate {
    pub fn new(events: u64, trials: u64) -> Option<Rate> {
        (trials > 0).then(|| {
            let value = events as f64 / trials as f64;
            Rate {
                events,
                trials,
                value,
                se: (value * (1.0 - value) / trials as f64).sqrt(),
            }
        })
    }
}

/// Metrics of one (model, n, m, alpha, detector) cell. Rates are `None`
/// when they do not apply to the cell or no replicate succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: ModelKind,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub detector: Detector,
    pub replicates: usize,
    pub failures: usize,
    pub false_alarm_rate: Option<Rate>,
    pub detection_rate: Option<Rate>,
    pub node_false_alarm_rate: Option<Rate>,
    pub node_detection_rate: Option<Rate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub cells: Vec<CellSummary>,
}

impl SimSummary {
    pub fn cell(&self, model: ModelKind, n: usize, m: usize, alpha: f64, detector: Detector) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.n == n && c.m == m && c.alpha == alpha && c.detector == detector)
    }
}

#[derive(Default)]
struct Tally {
    replicates: usize,
    failures: usize,
    rejections: u64,
    successes: u64,
    flagged_in: u64,
    flagged_out: u64,
    clique_nodes: u64,
    null_nodes: u64,
}

/// Folds replicate outcomes into per-cell rates. Cells are keyed by
/// (model, n, m, alpha, detector) and emitted in that order.
pub fn aggregate(outcomes: &[ReplicateOutcome], alphas: &[f64], detectors: &[Detector]) -> SimSummary {
    type Key = (ModelKind, usize, usize, usize, Detector);
    let mut tallies: BTreeMap<Key, Tally> = BTreeMap::new();
    for o in outcomes {
        for (ai, _) in alphas.iter().enumerate() {
            for &det in detectors {
                let t = tallies.entry((o.model, o.n, o.m, ai, det)).or_default();
                t.replicates += 1;
                match det {
                    Detector::Egonet => match &o.egonet {
                        Some(e) => {
                            let a = &e.per_alpha[ai];
                            t.successes += 1;
                            t.rejections += u64::from(a.reject);
                            t.flagged_in += a.flagged_in_clique as u64;
                            t.flagged_out += a.flagged_outside as u64;
                            t.clique_nodes += o.m as u64;
                            t.null_nodes += (o.n - o.m) as u64;
                        }
                        None => t.failures += 1,
                    },
                    Detector::Chi2 => match &o.chi2 {
                        Some(c) => {
                            t.successes += 1;
                            t.rejections += u64::from(c.rejects[ai]);
                        }
                        None => t.failures += 1,
                    },
                }
            }
        }
    }
    let cells = tallies
        .into_iter()
        .map(|((model, n, m, ai, detector), t)| {
            let network = Rate::new(t.rejections, t.successes);
            let egonet = detector == Detector::Egonet;
            CellSummary {
                model,
                n,
                m,
                alpha: alphas[ai],
                detector,
                replicates: t.replicates,
                failures: t.failures,
                false_alarm_rate: if m == 0 { network } else { None },
                detection_rate: if m > 0 { network } else { None },
                node_false_alarm_rate: if egonet {
                    Rate::new(t.flagged_out, t.null_nodes)
                } else {
                    None
                },
                node_detection_rate: if egonet && m > 0 {
                    Rate::new(t.flagged_in, t.clique_nodes)
                } else {
                    None
                },
            }
        })
        .collect();
    SimSummary { cells }
}

/// Every replicate of the configuration, in (m, replicate) order.
pub fn run_outcomes(cfg: &SimConfig) -> Result<Vec<ReplicateOutcome>> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = cfg
        .clique_sizes
        .iter()
        .flat_map(|&m| (0..cfg.replicates).map(move |r| (m, r)))
        .collect();
    let exec = cfg.execution();
    Ok(par::with_threads(cfg.threads, || {
        par::map_slice(exec, &tasks, |&(m, r)| run_replicate(cfg, m, r))
    }))
}

pub fn run(cfg: &SimConfig) -> Result<SimSummary> {
    let outcomes = run_outcomes(cfg)?;
    Ok(aggregate(&outcomes, &cfg.alphas, &cfg.detectors))
}

pub const STUDY_SIZES: [usize; 3] = [500, 1000, 2000];
pub const STUDY_ALPHAS: [f64; 3] = [0.01, 0.02, 0.05];

/// Clique sizes tabulated for each network size.
pub fn study_clique_sizes(n: usize) -> [usize; 2] {
    if n <= 500 {
        [5, 10]
    } else {
        [10, 20]
    }
}

/// Full-scale replicate count of a configuration.
pub fn study_replicates(model: ModelKind, n: usize) -> usize {
    match (model, n) {
        (ModelKind::Sbm | ModelKind::Dcsbm, 2000) => 5000,
        (ModelKind::Pabm, 1000) => 5000,
        (ModelKind::Pabm, 2000) => 500,
        _ => 10_000,
    }
}

/// One configuration per (model, n) of the simulation study, with replicate
/// counts scaled by `scale`.
pub fn study_configs(scale: f64, base_seed: u64, threads: usize, detectors: &[Detector]) -> Result<Vec<SimConfig>> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::invalid(format!("scale {scale} outside (0, 1]")));
    }
    let mut out = Vec::new();
    for model in ModelKind::ALL {
        for n in STUDY_SIZES {
            let [small, large] = study_clique_sizes(n);
            out.push(SimConfig {
                model,
                n,
                clique_sizes: vec![0, small, large],
                alphas: STUDY_ALPHAS.to_vec(),
                replicates: ((study_replicates(model, n) as f64 * scale).round() as usize).max(1),
                base_seed,
                detectors: detectors.to_vec(),
                threads,
            });
        }
    }
    Ok(out)
}

/// Runs the whole simulation study at the given replicate scale.
pub fn study_suite(scale: f64, base_seed: u64, threads: usize, detectors: &[Detector]) -> Result<SimSummary> {
    let mut summary = SimSummary::default();
    for cfg in study_configs(scale, base_seed, threads, detectors)? {
        summary.cells.extend(run(&cfg)?.cells);
    }
    Ok(summary)
}

fn pct(rate: Option<&Rate>) -> String {
    rate.map_or_else(|| "-".to_string(), |r| format!("{:.2}%", 100.0 * r.value))
}

/// Plain-text tables in the layout of the simulation study: one block per
/// model and detector, one row per (n, alpha).
pub fn render_tables(summary: &SimSummary) -> String {
    let mut keys: Vec<(ModelKind, Detector)> = summary.cells.iter().map(|c| (c.model, c.detector)).collect();
    keys.sort();
    keys.dedup();
    let mut out = String::new();
    for (model, det) in keys {
        let _ = writeln!(out, "== {model} / {} ==", det.as_str());
        let _ = writeln!(
            out,
            "{:>6} {:>11} {:>6} {:>6} {:>11} {:>6} {:>11} {:>9} {:>9}",
            "n", "false-alarm", "alpha", "m", "detection", "m", "detection", "node-DR", "node-DR"
        );
        let mut rows: Vec<(usize, f64)> = summary
            .cells
            .iter()
            .filter(|c| c.model == model && c.detector == det)
            .map(|c| (c.n, c.alpha))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        rows.dedup();
        for (n, alpha) in rows {
            let cells: Vec<&CellSummary> = summary
                .cells
                .iter()
                .filter(|c| c.model == model && c.detector == det && c.n == n && c.alpha == alpha)
                .collect();
            let null = cells.iter().find(|c| c.m == 0);
            let mut anomalous: Vec<&&CellSummary> = cells.iter().filter(|c| c.m > 0).collect();
            anomalous.sort_by_key(|c| c.m);
            let mut line = format!(
                "{:>6} {:>11} {:>5.0}%",
                n,
                pct(null.and_then(|c| c.false_alarm_rate.as_ref())),
                alpha * 100.0
            );
            for c in &anomalous {
                let _ = write!(line, " {:>6} {:>11}", c.m, pct(c.detection_rate.as_ref()));
            }
            if det == Detector::Egonet {
                for c in &anomalous {
                    let _ = write!(line, " {:>9}", pct(c.node_detection_rate.as_ref()));
                }
            }
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}
