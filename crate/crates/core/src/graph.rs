//! Weighted undirected similarity graph and single-level Louvain clustering.

use std::io::Write;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};

/// Minimum modularity gain for a vertex move.
pub const GAIN_EPS: f64 = 1e-12;

/// Symmetric sparse graph in adjacency-list form, without self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    adj: Vec<Vec<(u32, f64)>>,
    degrees: Vec<f64>,
    /// Sum of all adjacency entries, i.e. twice the total edge weight.
    two_m: f64,
    n_edges: usize,
}

impl SimilarityGraph {
    /// Builds from undirected edges `(i, j, w)`. Each pair may appear once, in
    /// either orientation; weights must be positive and finite.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) out of range for {n} vertices")));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop on vertex {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) has weight {w}")));
            }
            adj[i].push((j as u32, w));
            adj[j].push((i as u32, w));
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable_by_key(|&(u, _)| u);
            if list.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidArgument(format!("duplicate edge at vertex {v}")));
            }
        }
        let degrees: Vec<f64> = adj.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
        let two_m = degrees.iter().sum();
        Ok(Self {
            adj,
            degrees,
            two_m,
            n_edges: edges.len(),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// `2m`, the sum of weighted degrees.
    pub fn total_weight(&self) -> f64 {
        self.two_m
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.adj[v]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[i]
            .binary_search_by_key(&(j as u32), |&(u, _)| u)
            .map(|k| self.adj[i][k].1)
            .unwrap_or(0.0)
    }

    /// Edges with `i < j`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, l)| {
            l.iter()
                .filter(move |&&(j, _)| (j as usize) > i)
                .map(move |&(j, w)| (i, j as usize, w))
        })
    }

    /// `i j weight` per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, j, w) in self.edges() {
            writeln!(out, "{i} {j} {w}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Community per vertex, labeled 0.. in order of first appearance.
    pub communities: Vec<usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn from_labels(g: &SimilarityGraph, labels: &[usize]) -> Result<Self> {
        let communities = relabel(labels);
        let modularity = modularity(g, &communities)?;
        Ok(Self {
            communities,
            modularity,
        })
    }

    pub fn n_communities(&self) -> usize {
        self.communities.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of each community, vertex ids ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.n_communities()];
        for (v, &c) in self.communities.iter().enumerate() {
            g[c].push(v);
        }
        g
    }
}

/// Contiguous relabeling in order of first appearance.
pub fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Newman modularity, `sum_c (in_c / 2m - (tot_c / 2m)^2)` where `in_c` counts
/// both orientations of internal edges.
pub fn modularity(g: &SimilarityGraph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.n_vertices() {
        return Err(Error::LengthMismatch(labels.len(), g.n_vertices()));
    }
    if g.two_m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for v in 0..g.n_vertices() {
        let c = labels[v];
        total[c] += g.degrees[v];
        for &(u, w) in &g.adj[v] {
            if labels[u as usize] == c {
                internal[c] += w;
            }
        }
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(i, t)| i / g.two_m - (t / g.two_m).powi(2))
        .sum())
}

/// Phase one of Louvain only: local vertex moves from singletons until a
/// full sweep moves nothing, without aggregating communities.
///
/// Sweep order is a seeded shuffle fixed for the whole run. Among moves with
/// equal gain the lowest community id wins.
pub fn louvain_single_pass(g: &SimilarityGraph, seed: u64) -> Result<Partition> {
    let n = g.n_vertices();
    if n == 0 || g.two_m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let two_m = g.two_m;
    let mut community: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = g.degrees.clone();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut StdRng::seed_from_u64(seed));

    // scratch: weight from the current vertex into each neighboring community
    let mut link = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();

    loop {
        let mut moved = false;
        for &v in &order {
            let kv = g.degrees[v];
            if kv == 0.0 {
                continue;
            }
            let own = community[v];
            for &(u, w) in &g.adj[v] {
                let c = community[u as usize];
                if link[c] == 0.0 {
                    touched.push(c);
                }
                link[c] += w;
            }
            // gain of joining c after leaving `own`, in units of 1/m
            let tot_own = tot[own] - kv;
            let stay = link[own] - tot_own * kv / two_m;
            let mut best = own;
            let mut best_gain = 0.0;
            touched.sort_unstable();
            for &c in &touched {
                if c == own {
                    continue;
                }
                let gain = (link[c] - tot[c] * kv / two_m) - stay;
                // two_m scales the gain into modularity units
                if gain * 2.0 / two_m > GAIN_EPS && gain > best_gain {
                    best = c;
                    best_gain = gain;
                }
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
            if best != own {
                tot[own] -= kv;
                tot[best] += kv;
                community[v] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Partition::from_labels(g, &community)
}
