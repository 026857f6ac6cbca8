//! Package aggregation: merges author ids of packages that are assumed to
//! share one author before any clustering happens.
//!
//! Three rules apply in order: packages under one known library prefix,
//! packages that host manifest components, and packages lying on a common
//! directed cycle. Cycle merging is computed as strongly connected components
//! of the graph contracted by the current author map, repeated to a fixpoint,
//! so the result is a partition that does not depend on visiting order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bundle::{ManifestInfo, PackageName};
use crate::graph::PackageRelationGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeReason {
    Library,
    Component,
    Circle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedGroup {
    pub reason: MergeReason,
    pub members: Vec<PackageName>,
}

/// Author map after aggregation.
///
/// `phi[i]` is the author id of `graph.nodes()[i]`; ids are canonical, equal
/// to the smallest node index carrying that id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregationResult {
    pub phi: Vec<usize>,
    pub merged_groups: Vec<MergedGroup>,
}

impl AggregationResult {
    /// Starts from the graph's current author map.
    pub fn initial(graph: &PackageRelationGraph) -> Self {
        let mut result = AggregationResult { phi: graph.phi().to_vec(), merged_groups: Vec::new() };
        result.canonicalize();
        result
    }

    pub fn author_of(&self, graph: &PackageRelationGraph, name: &PackageName) -> Option<usize> {
        graph.index_of(name).map(|i| self.phi[i])
    }

    pub fn distinct_authors(&self) -> usize {
        let mut ids = self.phi.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Node groups sharing an author id, ordered by smallest member.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut by_id: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (node, &id) in self.phi.iter().enumerate() {
            by_id.entry(id).or_default().push(node);
        }
        by_id.into_values().collect()
    }

    /// Unions the author groups of all `nodes`. Returns true if anything changed.
    fn union(&mut self, nodes: &[usize]) -> bool {
        let mut ids: Vec<usize> = nodes.iter().map(|&n| self.phi[n]).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() < 2 {
            return false;
        }
        let target = ids[0];
        for id in self.phi.iter_mut() {
            if ids.binary_search(id).is_ok() {
                *id = target;
            }
        }
        self.canonicalize();
        true
    }

    fn canonicalize(&mut self) {
        let mut first: BTreeMap<usize, usize> = BTreeMap::new();
        for (node, &id) in self.phi.iter().enumerate() {
            first.entry(id).or_insert(node);
        }
        for id in self.phi.iter_mut() {
            *id = first[id];
        }
    }

    fn record(&mut self, graph: &PackageRelationGraph, reason: MergeReason, nodes: &[usize]) {
        let mut members: Vec<PackageName> = nodes.iter().map(|&n| graph.node(n).clone()).collect();
        members.sort();
        members.dedup();
        self.merged_groups.push(MergedGroup { reason, members });
    }

    /// Gives all packages under one library prefix a single author id.
    ///
    /// Each package belongs to its longest matching prefix (segment-wise,
    /// case-sensitive); distinct libraries keep distinct ids.
    pub fn merge_library_packages(&mut self, graph: &PackageRelationGraph, libraries: &[String]) {
        let mut by_lib: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, node) in graph.nodes().iter().enumerate() {
            let best = libraries
                .iter()
                .map(|l| l.trim_end_matches('.'))
                .filter(|l| !l.is_empty() && node.has_segment_prefix(l))
                .max_by_key(|l| l.len());
            if let Some(lib) = best {
                by_lib.entry(lib).or_default().push(i);
            }
        }
        for members in by_lib.into_values() {
            if members.len() > 1 {
                self.union(&members);
                self.record(graph, MergeReason::Library, &members);
            }
        }
    }

    /// Gives every package that hosts a manifest component one author id.
    /// Components outside the graph (framework or undeclared) are skipped.
    pub fn merge_component_packages(&mut self, graph: &PackageRelationGraph, manifest: &ManifestInfo) {
        let mut members = Vec::new();
        for comp in &manifest.components {
            match graph.node_of_class(&comp.name) {
                Some(n) => members.push(n),
                None => log::debug!("component `{}` is not in an in-scope package", comp.name),
            }
        }
        members.sort_unstable();
        members.dedup();
        if members.len() > 1 {
            self.union(&members);
            self.record(graph, MergeReason::Component, &members);
        }
    }

    /// Merges every strongly connected component of the author-contracted graph.
    pub fn merge_circles(&mut self, graph: &PackageRelationGraph) {
        let order: Vec<usize> = (0..graph.node_count()).collect();
        self.merge_circles_in_order(graph, &order);
    }

    /// As [`merge_circles`](Self::merge_circles), with DFS roots taken in `order`.
    pub fn merge_circles_in_order(&mut self, graph: &PackageRelationGraph, order: &[usize]) {
        let adjacency = graph.adjacency();
        loop {
            // Contracted graph: vertices are author ids, i.e. representative nodes.
            let n = graph.node_count();
            let mut contracted = vec![Vec::new(); n];
            for (u, succ) in adjacency.iter().enumerate() {
                for &v in succ {
                    let (a, b) = (self.phi[u], self.phi[v]);
                    if a != b {
                        contracted[a].push(b);
                    }
                }
            }
            for list in &mut contracted {
                list.sort_unstable();
                list.dedup();
            }
            let roots: Vec<usize> = order.iter().map(|&i| self.phi[i]).collect();
            let components = strongly_connected_components(&contracted, &roots);

            let mut changed = false;
            for comp in components.into_iter().filter(|c| c.len() > 1) {
                let members: Vec<usize> =
                    (0..n).filter(|&node| comp.contains(&self.phi[node])).collect();
                if self.union(&members) {
                    self.record(graph, MergeReason::Circle, &members);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

/// Iterative Tarjan over the vertices reachable from `roots`.
///
/// Vertices never reached are ignored. Each returned component is sorted.
pub fn strongly_connected_components(adjacency: &[Vec<usize>], roots: &[usize]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut components = Vec::new();
    // (vertex, position in its successor list)
    let mut call_stack: Vec<(usize, usize)> = Vec::new();

    for &root in roots {
        if index[root] != UNVISITED {
            continue;
        }
        call_stack.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, pos)) = call_stack.last() {
            if let Some(&w) = adjacency[v].get(pos) {
                if let Some(top) = call_stack.last_mut() {
                    top.1 += 1;
                }
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call_stack.pop();
            if let Some(&(parent, _)) = call_stack.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// Runs the full aggregation: library, component, then circle merges.
///
/// Starts from the graph's own author map, so applying it to a graph that
/// already carries an aggregated map leaves the partition unchanged.
pub fn aggregate(
    graph: &PackageRelationGraph,
    libraries: &[String],
    manifest: &ManifestInfo,
) -> AggregationResult {
    let mut result = AggregationResult::initial(graph);
    result.merge_library_packages(graph, libraries);
    result.merge_component_packages(graph, manifest);
    result.merge_circles(graph);
    result
}
