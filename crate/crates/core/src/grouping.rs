//! Correlation graph construction and Louvain feature grouping.
//!
//! Features are nodes; an undirected edge joins two features whenever the
//! absolute Pearson correlation reaches the threshold, weighted by that
//! absolute correlation. Louvain community detection over the weighted graph
//! yields the disjoint feature groups the reselection walk operates on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tabular::FeatureTable;

/// Symmetric matrix of Pearson coefficients.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix<T> {
    values: Vec<Vec<T>>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn from_rows(values: Vec<Vec<T>>) -> Result<Self> {
        let n = values.len();
        for row in &values {
            if row.len() != n {
                return Err(Error::Validation("correlation matrix must be square".into()));
            }
        }
        for i in 0..n {
            if (values[i][i] - T::one()).abs().to_f64_lossy() > 1e-12 {
                return Err(Error::Validation("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if (values[i][j] - values[j][i]).abs().to_f64_lossy() > 1e-12 {
                    return Err(Error::Validation("correlation matrix must be symmetric".into()));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i][j]
    }
}

/// Pairwise Pearson coefficients over all feature columns.
///
/// Every column must vary; constant columns should have been dropped by
/// preprocessing and are reported by name here if one slips through.
pub fn pearson_matrix<T: Scalar>(table: &FeatureTable<T>) -> Result<CorrelationMatrix<T>> {
    let n = table.n_features();
    let rows = table.n_rows();
    if rows < 2 {
        return Err(Error::Validation("need at least 2 rows for correlation".into()));
    }
    let denom = T::from_count(rows);

    // Center and scale each column once; pair correlations become dot products.
    let mut centered: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let col = table.column(j);
        let mean = col.iter().copied().sum::<T>() / denom;
        let var = col.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / denom;
        let std = var.sqrt();
        if std.to_f64_lossy() < 1e-12 {
            return Err(Error::ConstantColumn(table.name(j).to_owned()));
        }
        centered.push(col.iter().map(|v| (*v - mean) / std).collect());
    }

    let values: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        T::one()
                    } else {
                        let dot = centered[i]
                            .iter()
                            .zip(&centered[j])
                            .map(|(a, b)| *a * *b)
                            .sum::<T>()
                            / denom;
                        dot.min(T::one()).max(-T::one())
                    }
                })
                .collect()
        })
        .collect();
    CorrelationMatrix::from_rows(values)
}

/// Thresholded absolute-correlation graph.
#[derive(Debug, Clone)]
pub struct CorrelationGraph<T> {
    n: usize,
    adjacency: Vec<Vec<(usize, T)>>,
    tau: T,
}

impl<T: Scalar> CorrelationGraph<T> {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, T)] {
        &self.adjacency[node]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Sum of all edge weights (each undirected edge counted once).
    pub fn total_weight(&self) -> T {
        let two = T::one() + T::one();
        self.adjacency
            .iter()
            .flat_map(|nbrs| nbrs.iter().map(|(_, w)| *w))
            .sum::<T>()
            / two
    }

    pub fn degree(&self, node: usize) -> T {
        self.adjacency[node].iter().map(|(_, w)| *w).sum()
    }

    /// Connected-component id per node (ids are the smallest member index).
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = start;
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.adjacency[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = start;
                        stack.push(u);
                    }
                }
            }
        }
        comp
    }
}

/// Keeps the edge (i, j) iff `|rho_ij| >= tau`, weighted by `|rho_ij|`.
pub fn build_graph<T: Scalar>(matrix: &CorrelationMatrix<T>, tau: T) -> Result<CorrelationGraph<T>> {
    let tau_f = tau.to_f64_lossy();
    if !(0.0..=1.0).contains(&tau_f) {
        return Err(Error::Validation(format!("tau must be in [0,1], got {tau_f}")));
    }
    let n = matrix.size();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = matrix.get(i, j).abs();
            if w >= tau {
                let w = w.min(T::one());
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
    }
    Ok(CorrelationGraph { n, adjacency, tau })
}

/// Disjoint feature groups covering every feature index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    /// Threshold the graph was built with (provenance).
    pub tau: f64,
    /// Seed the partition was produced with (provenance).
    pub seed: u64,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, tau: f64, seed: u64) -> Result<Self> {
        let partition = Self { groups, tau, seed };
        partition.validate()?;
        Ok(partition)
    }

    /// Checks disjointness, full coverage of `0..n`, and no empty group.
    pub fn validate(&self) -> Result<()> {
        let n: usize = self.groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for group in &self.groups {
            if group.is_empty() {
                return Err(Error::Validation("empty feature group".into()));
            }
            for &f in group {
                if f >= n || seen[f] {
                    return Err(Error::Validation(
                        "groups must disjointly cover all features".into(),
                    ));
                }
                seen[f] = true;
            }
        }
        Ok(())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, id: usize) -> &[usize] {
        &self.groups[id]
    }

    pub fn n_features(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Group id containing the feature.
    pub fn group_of(&self, feature: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&feature))
    }

    /// Size histogram as (group size, count), ascending by size.
    pub fn size_histogram(&self) -> Vec<(usize, usize)> {
        let mut hist = std::collections::BTreeMap::new();
        for g in &self.groups {
            *hist.entry(g.len()).or_insert(0usize) += 1;
        }
        hist.into_iter().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    schema_version: String,
    tau: f64,
    seed: u64,
    groups: Vec<Vec<String>>,
}

/// Serializes a partition with feature names resolved.
pub fn partition_to_json(partition: &GroupPartition, names: &[String]) -> Result<String> {
    let doc = PartitionDoc {
        schema_version: "partition-v1".into(),
        tau: partition.tau,
        seed: partition.seed,
        groups: partition
            .groups()
            .iter()
            .map(|g| g.iter().map(|&f| names[f].clone()).collect())
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Louvain community detection at resolution 1.
pub fn louvain_partition<T: Scalar>(graph: &CorrelationGraph<T>, seed: u64) -> GroupPartition {
    louvain_partition_with_resolution(graph, seed, 1.0)
}

/// Louvain with an explicit resolution parameter.
pub fn louvain_partition_with_resolution<T: Scalar>(
    graph: &CorrelationGraph<T>,
    seed: u64,
    resolution: f64,
) -> GroupPartition {
    louvain_with_history(graph, seed, resolution).0
}

/// Louvain returning the modularity of the working partition after each
/// aggregation level, evaluated on the original graph. The sequence is
/// non-decreasing; it exists for diagnostics and tests.
pub fn louvain_with_history<T: Scalar>(
    graph: &CorrelationGraph<T>,
    seed: u64,
    resolution: f64,
) -> (GroupPartition, Vec<f64>) {
    let n = graph.node_count();
    let tau = graph.tau().to_f64_lossy();
    if n == 0 {
        return (GroupPartition { groups: Vec::new(), tau, seed }, Vec::new());
    }

    let mut work = WorkGraph::from_graph(graph);
    let mut history = Vec::new();
    // work node -> original nodes it aggregates
    let mut membership: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0u64;

    loop {
        let mut assignment: Vec<usize> = (0..work.n).collect();
        let moved = work.local_moves(&mut assignment, resolution, &mut rng);
        if !moved {
            break;
        }
        let (aggregated, groups_of_new) = work.aggregate(&assignment);
        membership = groups_of_new
            .iter()
            .map(|old_nodes| {
                let mut members = Vec::new();
                for &old in old_nodes {
                    members.extend_from_slice(&membership[old]);
                }
                members
            })
            .collect();
        work = aggregated;
        history.push(modularity_of_membership(graph, &membership, resolution));
        level += 1;
        if level > 64 {
            break; // cycle guard; Louvain converges long before this
        }
    }

    let mut groups: Vec<Vec<usize>> = membership
        .into_iter()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    groups.sort_by_key(|g| g[0]);
    (GroupPartition { groups, tau, seed }, history)
}

/// Weighted modularity of a partition at the given resolution.
pub fn modularity<T: Scalar>(
    graph: &CorrelationGraph<T>,
    partition: &GroupPartition,
    resolution: f64,
) -> f64 {
    modularity_of_membership(graph, partition.groups(), resolution)
}

fn modularity_of_membership<T: Scalar>(
    graph: &CorrelationGraph<T>,
    groups: &[Vec<usize>],
    resolution: f64,
) -> f64 {
    let two_m = graph
        .adjacency
        .iter()
        .flat_map(|nbrs| nbrs.iter().map(|(_, w)| w.to_f64_lossy()))
        .sum::<f64>();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut community_of = vec![0usize; graph.node_count()];
    for (c, group) in groups.iter().enumerate() {
        for &v in group {
            community_of[v] = c;
        }
    }
    let mut internal = vec![0.0f64; groups.len()];
    let mut total_degree = vec![0.0f64; groups.len()];
    for v in 0..graph.node_count() {
        let cv = community_of[v];
        total_degree[cv] += graph.degree(v).to_f64_lossy();
        for &(u, w) in graph.neighbors(v) {
            if community_of[u] == cv {
                // both directions accumulate -> sum_in counts intra weight twice
                internal[cv] += w.to_f64_lossy();
            }
        }
    }
    let mut q = 0.0;
    for c in 0..groups.len() {
        q += internal[c] / two_m - resolution * (total_degree[c] / two_m).powi(2);
    }
    q
}

/// Working graph for Louvain; aggregation introduces self-loops.
struct WorkGraph {
    n: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    /// Sum of all node degrees (2m), self-loops counting twice.
    two_m: f64,
}

impl WorkGraph {
    fn from_graph<T: Scalar>(graph: &CorrelationGraph<T>) -> Self {
        let n = graph.node_count();
        let adjacency: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|v| {
                graph
                    .neighbors(v)
                    .iter()
                    .map(|&(u, w)| (u, w.to_f64_lossy()))
                    .collect()
            })
            .collect();
        let two_m = adjacency
            .iter()
            .flat_map(|nbrs| nbrs.iter().map(|(_, w)| *w))
            .sum::<f64>();
        Self { n, adjacency, self_loop: vec![0.0; n], two_m }
    }

    fn degree(&self, v: usize) -> f64 {
        self.adjacency[v].iter().map(|(_, w)| *w).sum::<f64>() + 2.0 * self.self_loop[v]
    }

    /// Phase one: greedy modularity-gain moves over seeded node order.
    /// Ties between candidate communities go to the lowest community id;
    /// staying put wins over any non-positive gain.
    fn local_moves(
        &self,
        assignment: &mut [usize],
        resolution: f64,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if self.two_m == 0.0 {
            return false;
        }
        let m2 = self.two_m;
        let mut community_degree = vec![0.0f64; self.n];
        for v in 0..self.n {
            community_degree[assignment[v]] += self.degree(v);
        }
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(rng);

        let mut any_move = false;
        for _pass in 0..64 {
            let mut moves = 0usize;
            for &v in &order {
                let current = assignment[v];
                let k_v = self.degree(v);
                community_degree[current] -= k_v;

                // Weight from v to each adjacent community, in ascending
                // community order for deterministic tie-breaking.
                let mut to_comm: std::collections::BTreeMap<usize, f64> =
                    std::collections::BTreeMap::new();
                for &(u, w) in &self.adjacency[v] {
                    if u != v {
                        *to_comm.entry(assignment[u]).or_insert(0.0) += w;
                    }
                }

                let w_current = to_comm.get(&current).copied().unwrap_or(0.0);
                let removal_cost =
                    -w_current / m2 + resolution * community_degree[current] * k_v / (m2 * m2);

                let mut best = current;
                let mut best_gain = 0.0f64;
                for (&cand, &w_cand) in &to_comm {
                    if cand == current {
                        continue;
                    }
                    let gain = removal_cost + w_cand / m2
                        - resolution * community_degree[cand] * k_v / (m2 * m2);
                    if gain > best_gain {
                        best_gain = gain;
                        best = cand;
                    }
                }

                community_degree[best] += k_v;
                if best != current {
                    assignment[v] = best;
                    moves += 1;
                    any_move = true;
                }
            }
            if moves == 0 {
                break;
            }
        }
        any_move
    }

    /// Phase two: one node per community; returns the new graph and, per new
    /// node, the old nodes it absorbs.
    fn aggregate(&self, assignment: &[usize]) -> (WorkGraph, Vec<Vec<usize>>) {
        let mut ids: Vec<usize> = assignment.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let renumber: std::collections::BTreeMap<usize, usize> =
            ids.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let n_new = ids.len();

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_new];
        for (v, &c) in assignment.iter().enumerate() {
            members[renumber[&c]].push(v);
        }

        let mut weights: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n_new];
        let mut self_loop = vec![0.0f64; n_new];
        for (c_new, member) in members.iter().enumerate() {
            for &v in member {
                self_loop[c_new] += self.self_loop[v];
                for &(u, w) in &self.adjacency[v] {
                    let cu = renumber[&assignment[u]];
                    if cu == c_new {
                        // Each intra edge visited from both endpoints.
                        self_loop[c_new] += w / 2.0;
                    } else {
                        *weights[c_new].entry(cu).or_insert(0.0) += w;
                    }
                }
            }
        }
        let adjacency: Vec<Vec<(usize, f64)>> = weights
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect();
        (
            WorkGraph { n: n_new, adjacency, self_loop, two_m: self.two_m },
            members,
        )
    }
}
