//! Authorship decoupling: splits an app's packages into per-author modules
//! and designates the module holding the main activity as primary.

pub mod affinity;
pub mod distance;
pub mod louvain;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{aggregate, AggregationResult};
use crate::bundle::{AppBundle, PackageName};
use crate::config::default_framework_prefixes;
use crate::graph::{build_graph, GraphError, PackageRelationGraph};

pub use affinity::{
    harmonic, min_max_normalize, pair_weight, structural_similarity, AffinityMatrix, WeightMode,
};
pub use distance::{correlation, floyd_closure, semantic_distance, DistanceMatrix};
pub use louvain::{louvain_partition, modularity, LouvainResult, WeightMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("alpha {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("no main activity in an in-scope package")]
    NoMainActivity,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoupleConfig {
    pub framework_prefixes: Vec<String>,
    /// Library prefixes added to the ones the bundle declares.
    pub extra_libraries: Vec<String>,
    pub mode: WeightMode,
    pub root_depth_one: bool,
    pub tolerance: f64,
}

impl Default for DecoupleConfig {
    fn default() -> Self {
        DecoupleConfig {
            framework_prefixes: default_framework_prefixes(),
            extra_libraries: Vec::new(),
            mode: WeightMode::Max,
            root_depth_one: true,
            tolerance: 1e-9,
        }
    }
}

/// Package-to-module assignment of one app.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorshipPartition {
    pub module_of: BTreeMap<PackageName, usize>,
    pub primary_module: usize,
    /// True when no usable main activity existed and the largest module was chosen.
    #[serde(default)]
    pub primary_fallback: bool,
}

impl AuthorshipPartition {
    pub fn module_count(&self) -> usize {
        self.module_of.values().copied().max().map_or(0, |m| m + 1)
    }

    pub fn modules(&self) -> Vec<Vec<PackageName>> {
        let mut out = vec![Vec::new(); self.module_count()];
        for (pkg, &m) in &self.module_of {
            out[m].push(pkg.clone());
        }
        out
    }

    pub fn is_primary_package(&self, pkg: &PackageName) -> bool {
        self.module_of.get(pkg) == Some(&self.primary_module)
    }

    pub fn primary_packages(&self) -> Vec<&PackageName> {
        self.module_of
            .iter()
            .filter(|(_, &m)| m == self.primary_module)
            .map(|(p, _)| p)
            .collect()
    }
}

/// Module containing the main activity's package.
pub fn select_primary_module(
    graph: &PackageRelationGraph,
    modules: &[usize],
    bundle: &AppBundle,
) -> Result<usize, ClusterError> {
    let main = bundle.manifest.main_activity.as_deref().ok_or(ClusterError::NoMainActivity)?;
    let node = bundle
        .package_of(main)
        .and_then(|p| graph.index_of(p))
        .or_else(|| graph.node_of_class(main))
        .ok_or(ClusterError::NoMainActivity)?;
    Ok(modules[node])
}

/// Fallback primary module: the one with the most methods, lowest id on ties.
fn largest_module(graph: &PackageRelationGraph, modules: &[usize], bundle: &AppBundle) -> usize {
    let count = modules.iter().copied().max().map_or(0, |m| m + 1);
    let mut methods = vec![0usize; count];
    for class in &bundle.classes {
        if let Some(i) = graph.index_of(&class.package) {
            methods[modules[i]] += class.method_count();
        }
    }
    let mut best = 0;
    for (m, &c) in methods.iter().enumerate() {
        if c > methods[best] {
            best = m;
        }
    }
    best
}

/// Every intermediate product of one decoupling run.
#[derive(Clone, Debug)]
pub struct Decoupling {
    pub graph: PackageRelationGraph,
    pub aggregation: AggregationResult,
    pub distances: DistanceMatrix,
    pub affinities: AffinityMatrix,
    pub louvain: LouvainResult,
    pub partition: AuthorshipPartition,
}

pub fn decouple_detailed(bundle: &AppBundle, config: &DecoupleConfig) -> Result<Decoupling, ClusterError> {
    let graph = build_graph(bundle, &config.framework_prefixes)?;
    let mut libraries = bundle.libraries.clone();
    libraries.extend(config.extra_libraries.iter().cloned());
    let aggregation = aggregate(&graph, &libraries, &bundle.manifest);

    let distances = floyd_closure(&DistanceMatrix::from_graph(&graph));
    let affinities =
        AffinityMatrix::compute(graph.nodes(), &distances, config.mode, config.root_depth_one)?;

    let n = graph.node_count();
    let mut weights = WeightMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            weights.set(i, j, affinities.sim(i, j));
        }
    }
    let louvain = louvain_partition(&weights, &aggregation.phi, config.tolerance);

    let (primary_module, primary_fallback) =
        match select_primary_module(&graph, &louvain.communities, bundle) {
            Ok(m) => (m, false),
            Err(ClusterError::NoMainActivity) => {
                (largest_module(&graph, &louvain.communities, bundle), true)
            }
            Err(e) => return Err(e),
        };
    let module_of = graph
        .nodes()
        .iter()
        .cloned()
        .zip(louvain.communities.iter().copied())
        .collect();
    let partition = AuthorshipPartition { module_of, primary_module, primary_fallback };
    Ok(Decoupling { graph, aggregation, distances, affinities, louvain, partition })
}

/// Graph, aggregation, affinities, clustering and primary-module selection.
pub fn decouple(bundle: &AppBundle, config: &DecoupleConfig) -> Result<AuthorshipPartition, ClusterError> {
    decouple_detailed(bundle, config).map(|d| d.partition)
}
