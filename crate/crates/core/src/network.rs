//! Clustered network topology.
//!
//! Nodes are indexed from 0. Edges are undirected and stored without
//! self-loops; every node is implicitly a member of its own neighborhood.

use crate::error::{Error, Result};

/// An undirected graph whose nodes are partitioned into clusters.
///
/// Immutable once built. Each cluster estimates one parameter vector of
/// dimension [`ClusteredNetwork::dim`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredNetwork {
    dim: usize,
    neighbors: Vec<Vec<usize>>,
    clusters: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
}

/// The four neighborhood sets used by the diffusion recursions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodView {
    pub node: usize,
    /// `N_k ∩ C(k)`, contains the node itself.
    pub intra: Vec<usize>,
    /// `N_k^- ∩ C(k)`.
    pub intra_strict: Vec<usize>,
    /// `N_k \ C(k)`.
    pub inter: Vec<usize>,
    /// `N_k \ C(k)^-`, i.e. `inter` plus the node itself.
    pub inter_with_self: Vec<usize>,
}

impl ClusteredNetwork {
    /// Validates and builds a network from an edge list and a cluster partition.
    ///
    /// Duplicate edges are merged. A disconnected graph is accepted with a
    /// logged warning.
    pub fn new(
        nodes: usize,
        dim: usize,
        edges: &[(usize, usize)],
        clusters: &[Vec<usize>],
    ) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParams("network needs at least one node".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidParams("parameter dimension must be positive".into()));
        }
        let mut cluster_of = vec![usize::MAX; nodes];
        for (q, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyCluster(q));
            }
            for &k in members {
                if k >= nodes {
                    return Err(Error::NodeOutOfRange { node: k, nodes });
                }
                if cluster_of[k] != usize::MAX {
                    return Err(Error::OverlappingClusters { node: k });
                }
                cluster_of[k] = q;
            }
        }
        if let Some(k) = cluster_of.iter().position(|&q| q == usize::MAX) {
            return Err(Error::UncoveredNode { node: k });
        }

        let mut neighbors = vec![Vec::new(); nodes];
        for &(a, b) in edges {
            if a >= nodes || b >= nodes || a == b {
                return Err(Error::InvalidEdge(a, b));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }

        let mut sorted_clusters: Vec<Vec<usize>> = clusters.to_vec();
        for members in &mut sorted_clusters {
            members.sort_unstable();
        }

        let net = Self {
            dim,
            neighbors,
            clusters: sorted_clusters,
            cluster_of,
        };
        if !net.is_connected() {
            log::warn!("network with {nodes} nodes is not connected");
        }
        Ok(net)
    }

    pub fn nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// Parameter dimension `L` per node.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_of(&self, k: usize) -> usize {
        self.cluster_of[k]
    }

    /// Neighbors of `k`, excluding `k` itself, in increasing order.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        a == b || self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn neighborhood(&self, k: usize) -> Result<NeighborhoodView> {
        if k >= self.nodes() {
            return Err(Error::NodeOutOfRange {
                node: k,
                nodes: self.nodes(),
            });
        }
        let home = self.cluster_of[k];
        let mut intra = vec![k];
        let mut inter = Vec::new();
        for &l in &self.neighbors[k] {
            if self.cluster_of[l] == home {
                intra.push(l);
            } else {
                inter.push(l);
            }
        }
        intra.sort_unstable();
        let intra_strict = intra.iter().copied().filter(|&l| l != k).collect();
        let mut inter_with_self = inter.clone();
        inter_with_self.push(k);
        inter_with_self.sort_unstable();
        Ok(NeighborhoodView {
            node: k,
            intra,
            intra_strict,
            inter,
            inter_with_self,
        })
    }

    pub fn is_connected(&self) -> bool {
        let n = self.nodes();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(a) = stack.pop() {
            for &b in &self.neighbors[a] {
                if !seen[b] {
                    seen[b] = true;
                    count += 1;
                    stack.push(b);
                }
            }
        }
        count == n
    }
}
