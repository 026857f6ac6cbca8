//! Random forest of CART trees split on Gini impurity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{canonical_order, check_training, check_width, ClassifierError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = self.nodes[at] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
    /// Out-of-bag accuracy; `None` without bootstrap or when no row was left out.
    pub oob_accuracy: Option<f64>,
}

pub fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

/// A candidate split and the weighted Gini impurity of its two children.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub child_impurity: f64,
}

/// Best threshold on one feature over `rows`; `None` when the feature is
/// constant on them. Thresholds are midpoints between consecutive distinct
/// values; the lowest one wins ties.
pub fn best_threshold(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    feature: usize,
    n_classes: usize,
) -> Option<SplitCandidate> {
    let mut sorted: Vec<(f64, usize)> = rows.iter().map(|&r| (x[r][feature], y[r])).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = sorted.len();
    let mut right = vec![0usize; n_classes];
    for &(_, c) in &sorted {
        right[c] += 1;
    }
    let mut left = vec![0usize; n_classes];
    let mut best: Option<SplitCandidate> = None;
    for i in 0..n.saturating_sub(1) {
        let c = sorted[i].1;
        left[c] += 1;
        right[c] -= 1;
        let (a, b) = (sorted[i].0, sorted[i + 1].0);
        if a == b {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        let imp = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
        if best.is_none_or(|s| imp < s.child_impurity) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(SplitCandidate { feature, threshold, child_impurity: imp });
        }
    }
    best
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    min_samples_split: usize,
    max_depth: Option<usize>,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let d = self.x[0].len();
        let mut nodes = vec![Node::Leaf { class: 0 }];
        let mut stack = vec![(0usize, rows, 0usize)];
        let mut features: Vec<usize> = (0..d).collect();
        while let Some((at, rows, depth)) = stack.pop() {
            let mut counts = vec![0usize; self.n_classes];
            for &r in &rows {
                counts[self.y[r]] += 1;
            }
            let class = majority(&counts);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.max_depth.is_some_and(|m| depth >= m);
            if pure || rows.len() < self.min_samples_split || depth_capped {
                nodes[at] = Node::Leaf { class };
                continue;
            }

            // Visit features in random order until enough non-constant ones
            // have been evaluated.
            features.shuffle(rng);
            let mut seen = 0;
            let mut best: Option<SplitCandidate> = None;
            for &f in &features {
                if seen >= self.max_features {
                    break;
                }
                if let Some(s) = best_threshold(self.x, self.y, &rows, f, self.n_classes) {
                    seen += 1;
                    if best.is_none_or(|b| s.child_impurity < b.child_impurity) {
                        best = Some(s);
                    }
                }
            }
            let Some(split) = best else {
                nodes[at] = Node::Leaf { class };
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { class });
            nodes.push(Node::Leaf { class });
            nodes[at] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
            stack.push((right, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        DecisionTree { nodes }
    }
}

pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: ForestParams,
) -> Result<RandomForest, ClassifierError> {
    let d = check_training(x, y)?;
    let n_classes = n_classes.max(y.iter().copied().max().unwrap_or(0) + 1);
    let order = canonical_order(x, y);
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let n = xs.len();
    let builder = TreeBuilder {
        x: &xs,
        y: &ys,
        n_classes,
        max_features: params.max_features.resolve(d),
        min_samples_split: params.min_samples_split.max(2),
        max_depth: params.max_depth,
    };

    let grown: Vec<(DecisionTree, Vec<bool>)> = (0..params.trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            let mut in_bag = vec![false; n];
            let rows: Vec<usize> = if params.bootstrap {
                (0..n)
                    .map(|_| {
                        let r = rng.gen_range(0..n);
                        in_bag[r] = true;
                        r
                    })
                    .collect()
            } else {
                in_bag.iter_mut().for_each(|b| *b = true);
                (0..n).collect()
            };
            (builder.build(rows, &mut rng), in_bag)
        })
        .collect();

    let oob_accuracy = if params.bootstrap {
        let mut correct = 0usize;
        let mut scored = 0usize;
        for (i, row) in xs.iter().enumerate() {
            let mut votes = vec![0usize; n_classes];
            for (tree, in_bag) in &grown {
                if !in_bag[i] {
                    votes[tree.predict_row(row)] += 1;
                }
            }
            if votes.iter().any(|&v| v > 0) {
                scored += 1;
                correct += usize::from(majority(&votes) == ys[i]);
            }
        }
        (scored > 0).then(|| correct as f64 / scored as f64)
    } else {
        None
    };

    Ok(RandomForest {
        n_features: d,
        n_classes,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        oob_accuracy,
    })
}

impl RandomForest {
    /// Majority vote over trees; ties go to the lower class index.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>, ClassifierError> {
        check_width(x, self.n_features)?;
        Ok(x.iter()
            .map(|row| {
                let mut votes = vec![0usize; self.n_classes];
                for tree in &self.trees {
                    votes[tree.predict_row(row)] += 1;
                }
                majority(&votes)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_best(x: &[Vec<f64>], y: &[usize], k: usize) -> Option<f64> {
        let n = x.len();
        let mut best: Option<f64> = None;
        for f in 0..x[0].len() {
            let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let mut l = vec![0; k];
                let mut r = vec![0; k];
                for (row, &c) in x.iter().zip(y) {
                    if row[f] <= t {
                        l[c] += 1
                    } else {
                        r[c] += 1
                    }
                }
                let nl: usize = l.iter().sum();
                let nr: usize = r.iter().sum();
                let imp = (nl as f64 * gini(&l, nl) + nr as f64 * gini(&r, nr)) / n as f64;
                best = Some(best.map_or(imp, |b: f64| b.min(imp)));
            }
        }
        best
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0], 5), 0.0);
        assert!((gini(&[2, 2], 4) - 0.5).abs() < 1e-15);
        assert!((gini(&[1, 1, 1], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn split_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(2..14);
            let d = rng.gen_range(1..4);
            let x: Vec<Vec<f64>> =
                (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..5) as f64).collect()).collect();
            let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let rows: Vec<usize> = (0..n).collect();
            let fast = (0..d)
                .filter_map(|f| best_threshold(&x, &y, &rows, f, 3))
                .map(|s| s.child_impurity)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
            match (fast, brute_force_best(&x, &y, 3)) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }

    #[test]
    fn xor_is_learned_with_all_features() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for _ in 0..3 {
                    x.push(vec![a as f64, b as f64]);
                    y.push(a ^ b);
                }
            }
        }
        let params = ForestParams {
            trees: 5,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        let f = train_random_forest(&x, &y, 2, params).unwrap();
        assert_eq!(f.predict(&x).unwrap(), y);
        assert!(f.trees.iter().all(|t| t.depth() == 2));
        assert_eq!(f.oob_accuracy, None);
    }

    #[test]
    fn same_seed_same_forest_and_oob_is_reported() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let p = ForestParams { trees: 20, seed: 9, ..Default::default() };
        let a = train_random_forest(&x, &y, 2, p).unwrap();
        let b = train_random_forest(&x, &y, 2, p).unwrap();
        assert_eq!(a, b);
        assert!(a.oob_accuracy.unwrap() > 0.9);
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(600), 25);
        assert_eq!(MaxFeatures::Sqrt.resolve(10), 4);
        assert_eq!(MaxFeatures::Count(0).resolve(10), 1);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
    }
}
