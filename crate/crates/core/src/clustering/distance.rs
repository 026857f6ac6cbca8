//! Semantic distance between packages and its all-pairs shortest-path closure.

use crate::graph::{EdgeWeights, PackageRelationGraph};

/// Inverse of the total relation count; `+inf` when the pair has no relation.
pub fn semantic_distance(w: EdgeWeights) -> f64 {
    match w.total() {
        0 => f64::INFINITY,
        total => 1.0 / total as f64,
    }
}

/// Dense directed distance matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<f64>,
}

impl DistanceMatrix {
    /// All off-diagonal entries start at `+inf`.
    pub fn new(n: usize) -> Self {
        let mut dist = vec![f64::INFINITY; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        DistanceMatrix { n, dist }
    }

    /// Direct semantic distances for every ordered pair of distinct packages.
    pub fn from_graph(graph: &PackageRelationGraph) -> Self {
        let mut m = DistanceMatrix::new(graph.node_count());
        for ((u, v, _), _) in graph.edges() {
            let d = semantic_distance(graph.weights_between(u, v));
            m.set(u, v, d);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.n + v]
    }

    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        assert!(d >= 0.0, "distances are nonnegative");
        self.dist[u * self.n + v] = d;
    }
}

/// Floyd-Warshall closure: every entry becomes the shortest directed path length.
pub fn floyd_closure(d: &DistanceMatrix) -> DistanceMatrix {
    let n = d.n;
    let mut out = d.clone();
    for k in 0..n {
        for i in 0..n {
            let dik = out.dist[i * n + k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let through = dik + out.dist[k * n + j];
                if through < out.dist[i * n + j] {
                    out.dist[i * n + j] = through;
                }
            }
        }
    }
    out
}

/// `exp(-min(d(u,v), d(v,u)))`; zero when neither direction is reachable.
pub fn correlation(d: &DistanceMatrix, u: usize, v: usize) -> f64 {
    (-d.get(u, v).min(d.get(v, u))).exp()
}
