//! Independent oracles shared by the oracle, gradient and acceptance tests.
//! Each check returns a one-line summary on success.
#![allow(dead_code)]

use std::collections::BTreeMap;

use authorscope::aggregation::AggregationResult;
use authorscope::classifiers::logreg::{logreg_loss_and_grad, train_logreg, LogregParams};
use authorscope::classifiers::ClassifierKind;
use authorscope::clustering::{
    decouple, floyd_closure, louvain_partition, modularity, DecoupleConfig, DistanceMatrix, WeightMatrix,
};
use authorscope::embedding::sgns_loss_and_grad;
use authorscope::evaluation::{generate_corpus, obfuscate_bundle, CorpusConfig};
use authorscope::stylometry::{fit_tfidf, transform_tokens, Category, TfidfParams};
use authorscope::{
    evaluate, train_model, write_bundle, EmbeddingParams, EvaluateOptions, PackageName, PackageRelationGraph,
    PipelineConfig, RelationKind,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        // Negated so that NaN comparisons fail the check.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn node_name(i: usize) -> PackageName {
    PackageName::new(format!("p{i:02}")).unwrap()
}

/// Relabels each group by its smallest member.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut first = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        first.entry(l).or_insert(i);
    }
    labels.iter().map(|l| first[l]).collect()
}

/// Fixpoint of "merge every pair of author groups that reach each other",
/// using boolean transitive closure instead of Tarjan.
pub fn cycle_merge_oracle(n: usize, edges: &[(usize, usize)], phi: &[usize]) -> Vec<usize> {
    let mut group: Vec<usize> = phi.to_vec();
    loop {
        let mut reach = vec![vec![false; n]; n];
        for &(u, v) in edges {
            reach[group[u]][group[v]] = true;
        }
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut next = group.clone();
        for u in 0..n {
            for v in 0..n {
                let (a, b) = (group[u], group[v]);
                if a != b && reach[a][b] && reach[b][a] {
                    let keep = next[u].min(next[v]);
                    let drop = next[u].max(next[v]);
                    for g in next.iter_mut() {
                        if *g == drop {
                            *g = keep;
                        }
                    }
                }
            }
        }
        let canon = canonical(&next);
        if canon == group {
            return group;
        }
        group = canon;
    }
}

/// 200 random graphs of at most 12 nodes, each also visited in a shuffled order.
pub fn aggregation_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut merged = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=12);
        let density = rng.gen_range(0.05..0.35);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.gen_bool(density) {
                    edges.push((u, v));
                }
            }
        }
        // Pre-merged groups stand in for library and component merges.
        let seeds: Vec<usize> =
            (0..n).map(|i| if rng.gen_bool(0.25) { rng.gen_range(0..=i) } else { i }).collect();
        let phi = canonical(&seeds);

        let graph = PackageRelationGraph::from_parts(
            (0..n).map(node_name),
            edges.iter().map(|&(u, v)| (node_name(u), node_name(v), RelationKind::Call, 1)),
        )
        .unwrap()
        .with_phi(phi.clone());

        let mut result = AggregationResult::initial(&graph);
        result.merge_circles(&graph);
        let expected = cycle_merge_oracle(n, &edges, &phi);
        ensure!(result.phi == expected, "case {case}: n={n} edges={edges:?} phi={phi:?}: {:?} vs {expected:?}", result.phi);
        if expected != phi {
            merged += 1;
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut shuffled = AggregationResult::initial(&graph);
        shuffled.merge_circles_in_order(&graph, &order);
        ensure!(shuffled.phi == expected, "case {case}: visiting order {order:?} changed the result");
    }
    Ok(format!("200 graphs agree, {merged} with cycle merges"))
}

fn shortest_simple_path(d: &DistanceMatrix, from: usize, to: usize) -> f64 {
    fn walk(d: &DistanceMatrix, at: usize, to: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if at == to {
            *best = best.min(acc);
            return;
        }
        for next in 0..d.len() {
            let step = d.get(at, next);
            if !seen[next] && step.is_finite() {
                seen[next] = true;
                walk(d, next, to, seen, acc + step, best);
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; d.len()];
    seen[from] = true;
    let mut best = f64::INFINITY;
    walk(d, from, to, &mut seen, 0.0, &mut best);
    best
}

/// 300 random distance matrices of at most 6 nodes.
pub fn floyd_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut pairs = 0;
    for case in 0..300 {
        let n = rng.gen_range(1..=6);
        let mut d = DistanceMatrix::new(n);
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.gen_bool(0.45) {
                    d.set(u, v, rng.gen_range(0.05..3.0));
                }
            }
        }
        let closed = floyd_closure(&d);
        for u in 0..n {
            for v in 0..n {
                let want = shortest_simple_path(&d, u, v);
                let got = closed.get(u, v);
                if want.is_infinite() {
                    ensure!(got.is_infinite(), "case {case}: ({u},{v}) got {got}, expected unreachable");
                } else {
                    ensure!((got - want).abs() <= 1e-12 * want.max(1.0), "case {case}: ({u},{v}) {got} vs {want}");
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("300 matrices, {pairs} pairs agree"))
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max + 1 {
            prefix.push(label);
            grow(prefix, n, max.max(label), out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    grow(&mut vec![0], n, 0, &mut out);
    out
}

/// Two weighted cliques of 2 to 4 nodes each, joined by weak bridges.
pub fn louvain_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut cases = 0;
    for a in 2..=4 {
        for b in 2..=4 {
            for _ in 0..4 {
                let n = a + b;
                let mut w = WeightMatrix::zeros(n);
                for i in 0..n {
                    for j in i + 1..n {
                        if (i < a) == (j < a) {
                            w.set(i, j, rng.gen_range(0.6..1.0));
                        }
                    }
                }
                for _ in 0..rng.gen_range(1..=2) {
                    let (i, j) = (rng.gen_range(0..a), rng.gen_range(a..n));
                    w.set(i, j, rng.gen_range(0.01..0.2));
                }

                let best =
                    set_partitions(n).iter().map(|p| modularity(&w, p)).fold(f64::NEG_INFINITY, f64::max);
                let authors: Vec<usize> = (0..n).collect();
                let result = louvain_partition(&w, &authors, 1e-9);
                ensure!(
                    (result.modularity - best).abs() <= 1e-9,
                    "cliques {a}+{b}: Q={} but optimum is {best}",
                    result.modularity
                );
                let expected: Vec<usize> = (0..n).map(|i| usize::from(i >= a)).collect();
                ensure!(result.communities == expected, "cliques {a}+{b}: got {:?}", result.communities);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} graphs reach the brute-force optimum"))
}

fn direct_count(doc: &[String], gram: &[String]) -> usize {
    if gram.len() > doc.len() {
        return 0;
    }
    (0..=doc.len() - gram.len()).filter(|&s| doc[s..s + gram.len()] == *gram).count()
}

/// 20 random corpora over a four-token alphabet with random parameters.
pub fn tfidf_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let alphabet = ["a", "b", "c", "d"];
    for case in 0..20 {
        let docs: Vec<Vec<String>> = (0..rng.gen_range(3..=9))
            .map(|_| (0..rng.gen_range(0..=25)).map(|_| alphabet.choose(&mut rng).unwrap().to_string()).collect())
            .collect();
        let min_n = rng.gen_range(1..=3);
        let params = TfidfParams {
            min_n,
            max_n: min_n + rng.gen_range(0..=2),
            min_df: rng.gen_range(1..=3),
            max_features: rng.gen_range(1..=40),
        };

        let mut candidates: Vec<Vec<String>> = Vec::new();
        for doc in &docs {
            for n in params.min_n..=params.max_n {
                if n <= doc.len() {
                    candidates.extend(doc.windows(n).map(<[String]>::to_vec));
                }
            }
        }
        candidates.sort();
        candidates.dedup();
        let n_docs = docs.len() as f64;
        let mut scored: Vec<(Vec<String>, f64, f64)> = candidates
            .into_iter()
            .filter_map(|g| {
                let df = docs.iter().filter(|d| direct_count(d, &g) > 0).count();
                if df < params.min_df {
                    return None;
                }
                let idf = ((1.0 + n_docs) / (1.0 + df as f64)).ln() + 1.0;
                let tf: usize = docs.iter().map(|d| direct_count(d, &g)).sum();
                Some((g, tf as f64 * idf, idf))
            })
            .collect();
        scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
        scored.truncate(params.max_features);

        let vocab = fit_tfidf(Category::Instructions, &docs, params);
        let selected: Vec<Vec<String>> = scored.iter().map(|s| s.0.clone()).collect();
        ensure!(vocab.selected == selected, "case {case}: selected n-grams differ");
        for (got, want) in vocab.idf.iter().zip(&scored) {
            ensure!((got - want.2).abs() < 1e-12, "case {case}: idf {got} vs {}", want.2);
        }
        for doc in &docs {
            let row = transform_tokens(&vocab, doc);
            let want: Vec<(usize, f64)> = selected
                .iter()
                .enumerate()
                .filter_map(|(i, g)| match direct_count(doc, g) {
                    0 => None,
                    c => Some((i, c as f64 * scored[i].2)),
                })
                .collect();
            ensure!(row.len() == want.len(), "case {case}: row has {} entries, expected {}", row.len(), want.len());
            for ((gi, gw), (wi, ww)) in row.iter().zip(&want) {
                ensure!(gi == wi && (gw - ww).abs() < 1e-12, "case {case}: weight of n-gram {wi} is {gw}, expected {ww}");
            }
        }
    }
    Ok("20 corpora agree".to_owned())
}

const H: f64 = 1e-5;

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn central_difference(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + H;
            let up = f(&p);
            p[i] = orig - H;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Largest relative error of the skip-gram gradients over 50 random examples.
pub fn sgns_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.gen_range(2..=20);
        let k = rng.gen_range(1..=5);
        let center = random_vec(&mut rng, d, 0.8);
        let positive = random_vec(&mut rng, d, 0.8);
        let negatives: Vec<Vec<f64>> = (0..k).map(|_| random_vec(&mut rng, d, 0.8)).collect();
        let neg_refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
        let g = sgns_loss_and_grad(&center, &positive, &neg_refs);

        let num_center = central_difference(&center, |c| sgns_loss_and_grad(c, &positive, &neg_refs).loss);
        worst = worst.max(relative_error(&g.center, &num_center));
        let num_pos = central_difference(&positive, |p| sgns_loss_and_grad(&center, p, &neg_refs).loss);
        worst = worst.max(relative_error(&g.positive, &num_pos));
        for (j, neg) in negatives.iter().enumerate() {
            let num = central_difference(neg, |u| {
                let mut refs = neg_refs.clone();
                refs[j] = u;
                sgns_loss_and_grad(&center, &positive, &refs).loss
            });
            worst = worst.max(relative_error(&g.negatives[j], &num));
        }
    }
    worst
}

/// Largest relative error of the logistic regression gradients over 30 random problems.
pub fn logreg_gradient_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let (n, d, k) = (rng.gen_range(1..=12), rng.gen_range(1..=6), rng.gen_range(2..=5));
        let x: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, d, 2.0)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let w = random_vec(&mut rng, k * d, 1.0);
        let b = random_vec(&mut rng, k, 1.0);
        let l2 = rng.gen_range(0.0..0.1);
        let (_, gw, gb) = logreg_loss_and_grad(&w, &b, &x, &y, l2);
        let nw = central_difference(&w, |w| logreg_loss_and_grad(w, &b, &x, &y, l2).0);
        let nb = central_difference(&b, |b| logreg_loss_and_grad(&w, b, &x, &y, l2).0);
        worst = worst.max(relative_error(&gw, &nw)).max(relative_error(&gb, &nb));
    }
    worst
}

/// Largest deviation from 1 of a probability row sum, on inputs far outside
/// the training range.
pub fn probability_row_deviation() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..60).map(|_| random_vec(&mut rng, 8, 50.0)).collect();
    let y: Vec<usize> = (0..60).map(|i| i % 4).collect();
    let model = train_logreg(&x, &y, 4, LogregParams::default()).unwrap();
    let probe: Vec<Vec<f64>> = (0..200).map(|_| random_vec(&mut rng, 8, 1e3)).collect();
    model
        .predict_proba(&probe)
        .unwrap()
        .iter()
        .map(|row| {
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            (row.iter().sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn small_pipeline(seed: u64) -> PipelineConfig {
    PipelineConfig {
        embedding: EmbeddingParams { dim: 16, epochs: 2, min_count: 3, ..Default::default() },
        least_apps: 4,
        seed,
        ..Default::default()
    }
}

/// Every serialized output of one seeded run: corpus, partitions, obfuscated
/// bundles, model artifacts and evaluation reports.
pub fn run_outputs(seed: u64) -> Vec<Vec<u8>> {
    let cfg = CorpusConfig { n_authors: 4, apps_per_author: 4, modules_per_app: (2, 4), seed, ..Default::default() };
    let apps = generate_corpus(&cfg).apps;
    let mut out: Vec<Vec<u8>> = apps.iter().map(|a| write_bundle(a).into_bytes()).collect();
    for a in &apps {
        out.push(serde_json::to_vec(&decouple(a, &DecoupleConfig::default()).unwrap()).unwrap());
        out.push(write_bundle(&obfuscate_bundle(a, seed).bundle).into_bytes());
    }
    for kind in ClassifierKind::ALL {
        out.push(train_model(apps.clone(), kind, &small_pipeline(seed)).unwrap().to_bytes().unwrap());
    }
    let options = EvaluateOptions { k: 2, kinds: ClassifierKind::ALL.to_vec(), obfuscate_test: Some(seed) };
    out.push(serde_json::to_vec(&evaluate(apps, &options, &small_pipeline(seed)).unwrap()).unwrap());
    out
}
