//! Louvain modularity clustering over a dense symmetric weight matrix.
//!
//! Nodes that already share an author id are contracted into one supernode
//! before the first local-move phase, so they can never be separated. The
//! local-move phase visits nodes in ascending order and keeps a node in its
//! current community on ties; coarsening folds each community into a
//! supernode whose self-loop carries twice its internal weight.

use serde::{Deserialize, Serialize};

/// Dense symmetric matrix; the diagonal holds self-loop weight counted as
/// `A_ii` in the modularity sum.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        WeightMatrix { n, w: vec![0.0; n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.w[i * self.n + j] = value;
        self.w[j * self.n + i] = value;
    }

    fn add(&mut self, i: usize, j: usize, value: f64) {
        self.w[i * self.n + j] += value;
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Weighted degree `k_i` (row sum including the self-loop).
    pub fn strengths(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Sums weights between groups: `out[c][d] = sum A_ij` over `i in c, j in d`.
    pub fn coarsen(&self, assignment: &[usize], groups: usize) -> WeightMatrix {
        let mut out = WeightMatrix::zeros(groups);
        for i in 0..self.n {
            let ci = assignment[i];
            for (j, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    out.add(ci, assignment[j], a);
                }
            }
        }
        out
    }
}

/// Modularity of `assignment` on `a`; zero for a graph without weight.
pub fn modularity(a: &WeightMatrix, assignment: &[usize]) -> f64 {
    let k = a.strengths();
    let two_m: f64 = k.iter().sum();
    if two_m <= 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..a.n {
        for j in 0..a.n {
            if assignment[i] == assignment[j] {
                q += a.get(i, j) - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LouvainResult {
    /// Community of each input node, relabeled by smallest member.
    pub communities: Vec<usize>,
    pub modularity: f64,
    /// Modularity after each completed level, starting with the author-contracted start.
    pub history: Vec<f64>,
}

impl LouvainResult {
    pub fn community_count(&self) -> usize {
        self.communities.iter().copied().max().map_or(0, |m| m + 1)
    }
}

const GAIN_EPSILON: f64 = 1e-12;
const MAX_LOCAL_PASSES: usize = 10_000;

/// One local-move phase. Returns the community of every node, compacted.
fn local_moves(a: &WeightMatrix) -> (Vec<usize>, usize) {
    let n = a.n;
    let k = a.strengths();
    let two_m: f64 = k.iter().sum();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut links = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();

    for _ in 0..MAX_LOCAL_PASSES {
        let mut moved = false;
        for i in 0..n {
            let own = comm[i];
            tot[own] -= k[i];
            for (j, &w) in a.row(i).iter().enumerate() {
                if j != i && w != 0.0 {
                    let c = comm[j];
                    if links[c] == 0.0 {
                        touched.push(c);
                    }
                    links[c] += w;
                }
            }
            let gain = |c: usize, links: &[f64]| links[c] - tot[c] * k[i] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, &links);
            touched.sort_unstable();
            for &c in &touched {
                let g = gain(c, &links);
                if g > best_gain + GAIN_EPSILON {
                    best = c;
                    best_gain = g;
                }
            }
            for &c in &touched {
                links[c] = 0.0;
            }
            touched.clear();
            tot[best] += k[i];
            if best != own {
                comm[i] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    compact(&mut comm)
}

/// Relabels ids to `0..count` in order of first appearance.
fn compact(labels: &mut [usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::BTreeMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    (labels.to_vec(), map.len())
}

/// Clusters `weights` with the Louvain method.
///
/// `authors` forces every pair with equal author id to weight 1 and keeps
/// them in one community. Stops when an outer level no longer raises
/// modularity by more than `tolerance`.
pub fn louvain_partition(weights: &WeightMatrix, authors: &[usize], tolerance: f64) -> LouvainResult {
    let n = weights.len();
    assert_eq!(authors.len(), n, "author map must cover every node");
    if n == 0 {
        return LouvainResult { communities: vec![], modularity: 0.0, history: vec![] };
    }

    let mut forced = weights.clone();
    for i in 0..n {
        for j in i + 1..n {
            if authors[i] == authors[j] {
                forced.set(i, j, 1.0);
            }
        }
    }

    let mut assignment = authors.to_vec();
    let (_, groups) = compact(&mut assignment);
    let mut level = forced.coarsen(&assignment, groups);
    let mut q = modularity(&forced, &assignment);
    let mut history = vec![q];

    loop {
        let (moves, count) = local_moves(&level);
        if count == level.len() {
            break;
        }
        let next: Vec<usize> = assignment.iter().map(|&c| moves[c]).collect();
        let next_q = modularity(&forced, &next);
        if next_q < q {
            break;
        }
        let improved = next_q - q > tolerance;
        assignment = next;
        q = next_q;
        history.push(q);
        if !improved {
            break;
        }
        level = level.coarsen(&moves, count);
    }

    // Canonical ids: communities ordered by smallest member node.
    let mut first = std::collections::BTreeMap::new();
    for (node, &c) in assignment.iter().enumerate() {
        first.entry(c).or_insert(node);
    }
    let mut order: Vec<(usize, usize)> = first.into_iter().map(|(c, node)| (node, c)).collect();
    order.sort_unstable();
    let mut relabel = vec![0; order.len()];
    for (new, &(_, old)) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let communities = assignment.iter().map(|&c| relabel[c]).collect();

    LouvainResult { communities, modularity: q, history }
}
