//! Package relation graph: a weighted directed multigraph over the app's
//! in-scope packages with call, inheritance and ICC edges, plus the
//! package-to-author map that aggregation refines.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bundle::{AppBundle, PackageName, RelationKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("no in-scope packages remain after framework filtering")]
    EmptyGraph,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// Per-kind relation counts for one ordered package pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeWeights {
    pub n_call: u64,
    pub n_inherit: u64,
    pub n_icc: u64,
}

impl EdgeWeights {
    pub fn new(n_call: u64, n_inherit: u64, n_icc: u64) -> Self {
        EdgeWeights { n_call, n_inherit, n_icc }
    }

    pub fn total(&self) -> u64 {
        self.n_call + self.n_inherit + self.n_icc
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackageRelationGraph {
    nodes: Vec<PackageName>,
    index: BTreeMap<PackageName, usize>,
    edges: BTreeMap<(usize, usize, RelationKind), u64>,
    phi: Vec<usize>,
}

impl PackageRelationGraph {
    /// Builds a graph directly from node names and `(from, to, kind, count)`
    /// edges. Nodes are sorted; self-edges are dropped and parallel edges summed.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = PackageName>,
        edges: impl IntoIterator<Item = (PackageName, PackageName, RelationKind, u64)>,
    ) -> Result<Self, GraphError> {
        let mut nodes: Vec<PackageName> = nodes.into_iter().collect();
        nodes.sort();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let index: BTreeMap<PackageName, usize> =
            nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut graph = PackageRelationGraph {
            phi: (0..nodes.len()).collect(),
            nodes,
            index,
            edges: BTreeMap::new(),
        };
        for (from, to, kind, count) in edges {
            let u = graph.require(&from)?;
            let v = graph.require(&to)?;
            graph.add_edge(u, v, kind, count);
        }
        Ok(graph)
    }

    fn require(&self, name: &PackageName) -> Result<usize, GraphError> {
        self.index_of(name).ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    fn add_edge(&mut self, u: usize, v: usize, kind: RelationKind, count: u64) {
        if u == v || count == 0 {
            return;
        }
        *self.edges.entry((u, v, kind)).or_insert(0) += count;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[PackageName] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &PackageName {
        &self.nodes[i]
    }

    pub fn index_of(&self, name: &PackageName) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Finds the node holding a fully qualified class, by longest package prefix.
    pub fn node_of_class(&self, class_name: &str) -> Option<usize> {
        let mut end = class_name.len();
        while let Some(dot) = class_name[..end].rfind('.') {
            if let Ok(pkg) = PackageName::new(&class_name[..dot]) {
                if let Some(i) = self.index_of(&pkg) {
                    return Some(i);
                }
            }
            end = dot;
        }
        None
    }

    /// All stored edges as `((from, to, kind), count)`, ordered.
    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize, RelationKind), u64)> + '_ {
        self.edges.iter().map(|(k, c)| (*k, *c))
    }

    pub fn edge_weights(&self, u: &PackageName, v: &PackageName) -> Result<EdgeWeights, GraphError> {
        let u = self.require(u)?;
        let v = self.require(v)?;
        Ok(self.weights_between(u, v))
    }

    pub fn weights_between(&self, u: usize, v: usize) -> EdgeWeights {
        let get = |kind| self.edges.get(&(u, v, kind)).copied().unwrap_or(0);
        EdgeWeights {
            n_call: get(RelationKind::Call),
            n_inherit: get(RelationKind::Inherit),
            n_icc: get(RelationKind::Icc),
        }
    }

    /// Distinct successor lists, ignoring edge kind.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(u, v, _) in self.edges.keys() {
            if adj[u].last() != Some(&v) {
                adj[u].push(v);
            }
        }
        for list in &mut adj {
            list.dedup();
        }
        adj
    }

    pub fn phi(&self) -> &[usize] {
        &self.phi
    }

    pub fn phi_of(&self, name: &PackageName) -> Option<usize> {
        self.index_of(name).map(|i| self.phi[i])
    }

    /// Replaces the author map. `phi` must have one entry per node.
    pub fn with_phi(mut self, phi: Vec<usize>) -> Self {
        assert_eq!(phi.len(), self.nodes.len(), "phi must cover every node");
        self.phi = phi;
        self
    }
}

/// Builds the relation graph of one app.
///
/// Framework packages and every relation touching them are dropped, parallel
/// records are summed, and a superclass living in another in-scope package
/// contributes one inheritance edge per subclass.
pub fn build_graph(
    bundle: &AppBundle,
    framework_prefixes: &[String],
) -> Result<PackageRelationGraph, GraphError> {
    let in_scope = |p: &PackageName| !p.is_framework(framework_prefixes);
    let nodes: Vec<PackageName> = bundle.packages.iter().filter(|p| in_scope(p)).cloned().collect();
    let mut graph = PackageRelationGraph::from_parts(nodes, std::iter::empty())?;

    for rel in &bundle.relations {
        if let (Some(u), Some(v)) = (graph.index_of(&rel.from_pkg), graph.index_of(&rel.to_pkg)) {
            graph.add_edge(u, v, rel.kind, rel.count);
        }
    }
    for class in &bundle.classes {
        let Some(sup) = &class.superclass else { continue };
        let Some(sup_pkg) = bundle.package_of(sup) else { continue };
        if let (Some(u), Some(v)) = (graph.index_of(&class.package), graph.index_of(sup_pkg)) {
            graph.add_edge(u, v, RelationKind::Inherit, 1);
        }
    }
    Ok(graph)
}
