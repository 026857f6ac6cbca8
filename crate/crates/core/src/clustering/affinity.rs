//! Pairwise package affinities: correlation from semantic distance, structural
//! similarity from the naming tree, and their min-max normalized combination.

use serde::{Deserialize, Serialize};

use super::distance::{correlation, DistanceMatrix};
use super::ClusterError;
use crate::bundle::PackageName;

/// Harmonic number `H_n`; `H_0 = 0`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Depth of the nearest common parent of two packages in the naming tree.
///
/// With `root_depth_one`, the conceptual app root sits at depth 1 and the
/// first name segment at depth 2; otherwise the first segment is depth 1.
pub fn ncp_depth(u: &PackageName, v: &PackageName, root_depth_one: bool) -> usize {
    u.common_segments(v) + usize::from(root_depth_one)
}

/// Harmonic number of the nearest-common-parent depth.
pub fn structural_similarity(u: &PackageName, v: &PackageName, root_depth_one: bool) -> f64 {
    harmonic(ncp_depth(u, v, root_depth_one))
}

/// How normalized correlation and structure combine into one pair weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Max,
    AlphaBlend { alpha: f64 },
}


/// Combines already-normalized correlation and structural values.
pub fn pair_weight(corr: f64, struc: f64, mode: WeightMode) -> Result<f64, ClusterError> {
    match mode {
        WeightMode::Max => Ok(corr.max(struc)),
        WeightMode::AlphaBlend { alpha } => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(ClusterError::AlphaOutOfRange(alpha));
            }
            Ok(alpha * corr + (1.0 - alpha) * struc)
        }
    }
}

/// Min-max scaling to `[0, 1]`; a constant column maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = hi - lo;
    // Also catches NaN and the empty slice.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&x| (x - lo) / span).collect()
}

/// Affinities over all unordered pairs `i < j` of one app's packages.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    pub corr: Vec<f64>,
    pub struc: Vec<f64>,
    pub sim: Vec<f64>,
}

impl AffinityMatrix {
    /// Computes raw correlation and structure for every pair, normalizes each
    /// column over the app's pairs, and combines them per `mode`.
    pub fn compute(
        nodes: &[PackageName],
        closed: &DistanceMatrix,
        mode: WeightMode,
        root_depth_one: bool,
    ) -> Result<Self, ClusterError> {
        let n = nodes.len();
        assert_eq!(closed.len(), n, "distance matrix must cover every node");
        let pairs = n * n.saturating_sub(1) / 2;
        let mut corr = Vec::with_capacity(pairs);
        let mut struc = Vec::with_capacity(pairs);
        for i in 0..n {
            for j in i + 1..n {
                corr.push(correlation(closed, i, j));
                struc.push(structural_similarity(&nodes[i], &nodes[j], root_depth_one));
            }
        }
        let nc = min_max_normalize(&corr);
        let ns = min_max_normalize(&struc);
        let sim = nc
            .iter()
            .zip(&ns)
            .map(|(&c, &s)| pair_weight(c, s, mode))
            .collect::<Result<Vec<_>, _>>()?;
        if let WeightMode::AlphaBlend { alpha } = mode {
            // Validate even for single-node apps with no pairs.
            pair_weight(0.0, 0.0, WeightMode::AlphaBlend { alpha })?;
        }
        Ok(AffinityMatrix { n, corr, struc, sim })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        assert!(i != j && j < self.n, "pair out of range");
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn corr(&self, i: usize, j: usize) -> f64 {
        self.corr[self.pair_index(i, j)]
    }

    pub fn struc(&self, i: usize, j: usize) -> f64 {
        self.struc[self.pair_index(i, j)]
    }

    pub fn sim(&self, i: usize, j: usize) -> f64 {
        self.sim[self.pair_index(i, j)]
    }
}
