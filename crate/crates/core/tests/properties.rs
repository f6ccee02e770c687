use egoscan::detect::{detect, egonet_pvalues, recover_clique};
use egoscan::fit::{fit_chunglu, fit_dcsbm_with_labels, fit_er, fit_pabm_with_labels, fit_sbm_with_labels};
use egoscan::graph::{pair_count, Graph};
use egoscan::io::{read_edge_list, read_report, write_edge_list, write_report, LabeledDetection, LabeledGraph};
use egoscan::io::{ReportBody, ReportDocument};
use egoscan::models::{calibrate_density, generate, make_simulation_spec, ModelKind};
use egoscan::tail::{binom_sf, poisson_sf};
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

fn graph_strategy(max_n: usize, max_w: u64) -> impl Strategy<Value = Graph> {
    (1..=max_n)
        .prop_flat_map(move |n| {
            let pairs = n * (n - 1) / 2;
            (
                Just(n),
                prop::collection::vec((0.0..1.0f64, 1..=max_w), pairs),
                0.0..0.7f64,
            )
        })
        .prop_map(|(n, draws, density)| {
            let mut edges = Vec::new();
            let mut it = draws.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let (u, w) = it.next().unwrap();
                    if u < density {
                        edges.push((i, j, w));
                    }
                }
            }
            Graph::from_edges(n, edges).unwrap()
        })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn dense_egonet(g: &Graph, i: usize) -> u64 {
    let a = g.to_dense();
    let n = g.n();
    let mut e = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            if a[(i, j)] > 0.0 && a[(i, k)] > 0.0 {
                e += a[(j, k)];
            }
        }
    }
    e as u64
}

fn binom_sf_oracle(k: u64, n: u64, p: f64) -> f64 {
    let ln_choose = |j: u64| ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
    (k..=n)
        .map(|j| (ln_choose(j) + j as f64 * p.ln() + (n - j) as f64 * (-p).ln_1p()).exp())
        .sum()
}

fn is_clique(g: &Graph, nodes: &[usize]) -> bool {
    nodes
        .iter()
        .enumerate()
        .all(|(x, &i)| nodes[x + 1..].iter().all(|&j| g.weight(i, j).unwrap() > 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn egonet_degree_matches_dense(g in graph_strategy(50, 4)) {
        for i in 0..g.n() {
            prop_assert_eq!(g.egonet_degree(i).unwrap(), dense_egonet(&g, i));
        }
    }

    #[test]
    fn binary_egonet_bounded_by_pairs(g in graph_strategy(40, 1)) {
        for i in 0..g.n() {
            let d = g.degree(i).unwrap();
            prop_assert!(g.egonet_degree(i).unwrap() <= pair_count(d));
        }
    }

    #[test]
    fn relabeling_permutes_degrees(
        (g, perm) in graph_strategy(30, 3).prop_flat_map(|g| { let n = g.n(); (Just(g), permutation(n)) })
    ) {
        let h = g.relabel(&perm).unwrap();
        for (i, &pi) in perm.iter().enumerate() {
            prop_assert_eq!(g.degree(i).unwrap(), h.degree(pi).unwrap());
            prop_assert_eq!(g.egonet_degree(i).unwrap(), h.egonet_degree(pi).unwrap());
        }
    }

    #[test]
    fn binom_sf_monotone(n in 1u64..3000, k in 0u64..3000, p in 1e-4..0.99f64, dp in 0.0..0.01f64) {
        let k = k.min(n);
        let here = binom_sf(k, n, p).unwrap();
        prop_assert!(binom_sf(k + 1, n, p).unwrap() <= here * (1.0 + 1e-12));
        prop_assert!(binom_sf(k, n, (p + dp).min(1.0)).unwrap() >= here * (1.0 - 1e-12));
    }

    #[test]
    fn binom_complement(n in 1u64..2000, k in 1u64..2000, p in 1e-3..0.999f64) {
        let k = k.min(n);
        // P[B >= k] = 1 - P[n - B >= n - k + 1]
        let lhs = binom_sf(k, n, p).unwrap();
        let rhs = 1.0 - binom_sf(n - k + 1, n, 1.0 - p).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn poisson_sf_monotone(k in 0u64..800, lambda in 1e-3..500.0f64, dl in 0.0..1.0f64) {
        let here = poisson_sf(k, lambda).unwrap();
        prop_assert!(poisson_sf(k + 1, lambda).unwrap() <= here * (1.0 + 1e-12));
        prop_assert!(poisson_sf(k, lambda + dl).unwrap() >= here * (1.0 - 1e-12));
    }

    #[test]
    fn binomial_pvalue_is_super_uniform(n in 1u64..60, p in 0.01..0.9f64, t in 1e-4..1.0f64) {
        // exact law of the p-value sf(B; n, p)
        let mass: f64 = (0..=n)
            .filter(|&b| binom_sf(b, n, p).unwrap() <= t)
            .map(|b| binom_sf_oracle(b, n, p) - binom_sf_oracle(b + 1, n, p))
            .sum();
        prop_assert!(mass <= t * (1.0 + 1e-9), "{} > {}", mass, t);
    }

    #[test]
    fn community_renaming_leaves_rates(
        seed in 0u64..1000,
        k in 2usize..4,
        names in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let spec = make_simulation_spec(ModelKind::Dcsbm, 60, seed).unwrap();
        let g = generate(&spec, seed).unwrap();
        let labels: Vec<usize> = (0..60).map(|i| i % k).collect();
        let renamed: Vec<usize> = labels.iter().map(|&c| names.iter().filter(|&&x| x < k).nth(c).copied().unwrap()).collect();
        let fits = [fit_sbm_with_labels, fit_dcsbm_with_labels, fit_pabm_with_labels];
        for f in fits {
            let (a, b) = (f(&g, &labels, k).unwrap(), f(&g, &renamed, k).unwrap());
            for i in 0..60 {
                for j in i + 1..60 {
                    let (x, y) = (a.rate(i, j).unwrap(), b.rate(i, j).unwrap());
                    prop_assert!((x - y).abs() <= 1e-12 * x.max(y).max(1e-300));
                }
            }
        }
    }

    #[test]
    fn flagged_sets_grow_with_alpha(g in graph_strategy(40, 1), a in 1e-4..0.5f64, b in 1e-4..0.5f64) {
        prop_assume!(g.edge_count() > 0 && g.edge_count() < pair_count(g.n() as u64) as usize);
        let fm = fit_er(&g).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let small = detect(&g, &fm, lo).unwrap().flagged;
        let large = detect(&g, &fm, hi).unwrap().flagged;
        prop_assert!(small.iter().all(|v| large.contains(v)));
    }

    #[test]
    fn recovered_set_is_a_maximum_clique(g in graph_strategy(12, 1)) {
        let all: Vec<usize> = (0..g.n()).collect();
        let clique = recover_clique(&g, &all).unwrap();
        prop_assert!(is_clique(&g, &clique));
        let n = g.n();
        let best = (1u32..1 << n)
            .filter(|mask| {
                let nodes: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                is_clique(&g, &nodes)
            })
            .map(u32::count_ones)
            .max()
            .unwrap_or(0);
        prop_assert_eq!(clique.len(), best as usize);
    }

    #[test]
    fn edge_list_round_trip(g in graph_strategy(30, 5)) {
        let lg = LabeledGraph::with_index_labels(g);
        let mut buf = Vec::new();
        write_edge_list(&lg, &mut buf).unwrap();
        prop_assert_eq!(read_edge_list(buf.as_slice()).unwrap(), lg);
    }

    #[test]
    fn calibration_hits_target(seed in 0u64..500, target in 0.001..0.2f64) {
        for kind in ModelKind::ALL {
            let spec = make_simulation_spec(kind, 40, seed).unwrap();
            let scaled = calibrate_density(&spec, target).unwrap();
            prop_assert!((scaled.expected_density() - target).abs() <= 1e-12 * target);
        }
    }
}

#[test]
fn er_pvalues_match_dense_oracle() {
    let spec = make_simulation_spec(ModelKind::ErdosRenyi, 200, 0).unwrap();
    for seed in 0..5 {
        let g = generate(&spec, seed).unwrap();
        let fm = fit_er(&g).unwrap();
        let p = 2.0 * g.edge_count() as f64 / (200.0 * 199.0);
        for r in egonet_pvalues(&g, &fm).unwrap() {
            let d = g.degree(r.node).unwrap();
            let e = dense_egonet(&g, r.node);
            let want = if d < 2 {
                1.0
            } else {
                binom_sf_oracle(e, pair_count(d), p)
            };
            assert_eq!(r.egonet_degree, e);
            assert!(
                (r.p_value - want).abs() <= 1e-9 * want,
                "node {}: {} vs {want}",
                r.node,
                r.p_value
            );
        }
    }
}

#[test]
fn chunglu_pvalues_match_dense_oracle() {
    let spec = make_simulation_spec(ModelKind::ChungLu, 150, 3).unwrap();
    let g = generate(&spec, 3).unwrap();
    let fm = fit_chunglu(&g).unwrap();
    let a = g.to_dense();
    let total: f64 = a.sum();
    for r in egonet_pvalues(&g, &fm).unwrap() {
        let nbrs: Vec<usize> = (0..150).filter(|&j| a[(r.node, j)] > 0.0).collect();
        let deg = |j: usize| a.row(j).sum();
        let mut lam = 0.0;
        for (x, &j) in nbrs.iter().enumerate() {
            for &k in &nbrs[x + 1..] {
                lam += deg(j) * deg(k) / total;
            }
        }
        let e = dense_egonet(&g, r.node);
        let want = if nbrs.len() < 2 {
            1.0
        } else {
            1.0 - (0..e)
                .map(|j| (j as f64 * lam.ln() - lam - ln_gamma(j as f64 + 1.0)).exp())
                .sum::<f64>()
        };
        assert!(
            (r.p_value - want).abs() <= 1e-9 * want.max(1e-3),
            "node {}: {} vs {want}",
            r.node,
            r.p_value
        );
    }
}

#[test]
fn detection_report_round_trip() {
    let spec = make_simulation_spec(ModelKind::ErdosRenyi, 80, 0).unwrap();
    let g = generate(&spec, 11).unwrap();
    let lg = LabeledGraph::with_index_labels(g);
    let rep = detect(&lg.graph, &fit_er(&lg.graph).unwrap(), 0.05).unwrap();
    let doc = ReportDocument::new(ReportBody::Detection(LabeledDetection::new(&rep, &lg.labels, "er")))
        .with_seed(Some(11))
        .with_config("alpha", 0.05);
    let mut buf = Vec::new();
    write_report(&doc, &mut buf).unwrap();
    assert_eq!(read_report(buf.as_slice()).unwrap(), doc);
}
