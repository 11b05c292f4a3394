//! Superpixel graph, manifold ranking and geodesic distances.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::par;
use crate::superpixel::Segmentation;

pub const DEFAULT_SIGMA_SQ: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 0.99;

/// Form of the color distance in the affinity exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinityExponent {
    /// `w = exp(-d / sigma_sq)`
    #[default]
    Norm,
    /// `w = exp(-d^2 / sigma_sq)`
    NormSq,
}

/// Which distances define the spread of the geodesic refinement weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaCSource {
    /// Standard deviation of the color distances on adjacent pairs.
    #[default]
    EdgeDc,
    /// Standard deviation of all finite pairwise geodesic distances.
    GeodesicAllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    pub sigma_sq: f64,
    pub alpha: f64,
    pub exponent: AffinityExponent,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            sigma_sq: DEFAULT_SIGMA_SQ,
            alpha: DEFAULT_ALPHA,
            exponent: AffinityExponent::Norm,
        }
    }
}

/// One adjacent superpixel pair with the raw LAB distance of its mean colors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub dc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    pub n: usize,
    /// Symmetric `n x n` affinity matrix, zero off the edge set.
    pub weights: DenseMatrix,
    /// Row sums of `weights`.
    pub degree: Vec<f64>,
    /// Adjacent (1-hop) pairs only, `a < b`.
    pub edges: Vec<Edge>,
    pub sigma_sq: f64,
    pub alpha: f64,
}

impl AffinityGraph {
    /// Graph from an explicit weight matrix; degrees are recomputed.
    pub fn from_weights(weights: DenseMatrix, edges: Vec<Edge>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::contract(format!("alpha = {alpha} outside (0, 1)")));
        }
        let n = weights.n;
        for i in 0..n {
            if weights.get(i, i) != 0.0 {
                return Err(Error::contract(format!("nonzero self weight at node {i}")));
            }
            for j in 0..i {
                let w = weights.get(i, j);
                if w != weights.get(j, i) || w < 0.0 || !w.is_finite() {
                    return Err(Error::contract(format!("bad weight at ({i}, {j})")));
                }
            }
        }
        let degree = weights
            .data
            .chunks_exact(n.max(1))
            .map(|row| row.iter().sum())
            .collect();
        Ok(Self {
            n,
            weights,
            degree,
            edges,
            sigma_sq: f64::NAN,
            alpha,
        })
    }

    /// `D - alpha W`.
    pub fn system_matrix(&self) -> DenseMatrix {
        let mut m = self.weights.clone();
        for v in &mut m.data {
            *v *= -self.alpha;
        }
        for i in 0..self.n {
            m.set(i, i, self.degree[i]);
        }
        m
    }
}

/// Seeds for one ranking query.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    /// `1` on strong seeds, `0.5` on weak seeds, `0` elsewhere.
    pub indicator: Vec<f64>,
}

impl SeedSet {
    pub fn new(n: usize, strong: Vec<usize>, weak: Vec<usize>) -> Result<Self> {
        let mut indicator = vec![0.0; n];
        for &i in &strong {
            if i >= n {
                return Err(Error::contract(format!("seed {i} out of range for {n} nodes")));
            }
            indicator[i] = 1.0;
        }
        for &i in &weak {
            if i >= n {
                return Err(Error::contract(format!("seed {i} out of range for {n} nodes")));
            }
            if indicator[i] == 1.0 {
                return Err(Error::contract(format!("node {i} is both a strong and a weak seed")));
            }
            indicator[i] = 0.5;
        }
        Ok(Self {
            strong,
            weak,
            indicator,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            strong: Vec::new(),
            weak: Vec::new(),
            indicator: vec![0.0; n],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.strong.is_empty() && self.weak.is_empty()
    }
}

/// Affinity for a (normalized) color distance.
pub fn affinity(distance: f64, sigma_sq: f64, exponent: AffinityExponent) -> f64 {
    match exponent {
        AffinityExponent::Norm => (-distance / sigma_sq).exp(),
        AffinityExponent::NormSq => (-distance * distance / sigma_sq).exp(),
    }
}

/// Node pairs `(i, j)`, `i < j`, of the ranking graph: adjacent pairs, pairs
/// sharing a neighbor, and every pair of border superpixels.
pub fn ranking_edges(seg: &Segmentation) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    let mut add = |a: usize, b: usize| {
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    };
    for i in 0..seg.count {
        for &j in &seg.adjacency[i] {
            add(i, j);
            for &k in &seg.adjacency[j] {
                add(i, k);
            }
        }
    }
    let border: Vec<usize> = (0..seg.count).filter(|&i| seg.is_border[i]).collect();
    for (x, &a) in border.iter().enumerate() {
        for &b in &border[x + 1..] {
            add(a, b);
        }
    }
    edges
}

/// Builds the ranking graph over superpixels.
///
/// Color distances on the ranking edges are divided by their maximum before
/// the affinity is applied, so `sigma_sq` is scale-free.
pub fn build_graph(seg: &Segmentation, params: &GraphParams) -> Result<AffinityGraph> {
    if !(params.sigma_sq > 0.0) {
        return Err(Error::contract(format!("sigma_sq = {} must be positive", params.sigma_sq)));
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::contract(format!("alpha = {} outside (0, 1)", params.alpha)));
    }
    let n = seg.count;
    let pairs = ranking_edges(seg);
    let dists: Vec<f64> = pairs.iter().map(|&(i, j)| seg.color_distance(i, j)).collect();
    let max = dists.iter().fold(0.0f64, |m, &d| m.max(d));
    let mut weights = DenseMatrix::zeros(n);
    for (&(i, j), &d) in pairs.iter().zip(&dists) {
        let norm = if max > 0.0 { d / max } else { 0.0 };
        let w = affinity(norm, params.sigma_sq, params.exponent);
        weights.set(i, j, w);
        weights.set(j, i, w);
    }
    let degree = weights.data.chunks_exact(n).map(|row| row.iter().sum()).collect();
    let edges = (0..n)
        .flat_map(|i| {
            seg.adjacency[i]
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| Edge {
                    a: i,
                    b: j,
                    dc: seg.color_distance(i, j),
                })
        })
        .collect();
    Ok(AffinityGraph {
        n,
        weights,
        degree,
        edges,
        sigma_sq: params.sigma_sq,
        alpha: params.alpha,
    })
}

/// Manifold ranking: solves `(D - alpha W) g = y` by dense LU.
pub fn rank(g: &AffinityGraph, seeds: &SeedSet) -> Result<Vec<f64>> {
    if seeds.indicator.len() != g.n {
        return Err(Error::contract(format!(
            "indicator has {} entries for {} nodes",
            seeds.indicator.len(),
            g.n
        )));
    }
    if seeds.indicator.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; g.n]);
    }
    linalg::solve(&g.system_matrix(), &seeds.indicator).map_err(|p| Error::SingularSystem {
        pivot: p.0,
        isolated: (0..g.n).filter(|&i| g.degree[i] == 0.0).collect(),
    })
}

/// All-pairs geodesic distances over the adjacency edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub n: usize,
    /// Row-major `n x n` distances.
    pub dist: Vec<f64>,
    pub sigma_c: f64,
}

impl GeodesicField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        cost: 0.0,
        node: source,
    });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                heap.push(HeapEntry { cost: c, node: next });
            }
        }
    }
    dist
}

fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Shortest-path distances between all node pairs over `edges`, with edge
/// cost equal to the color distance.
///
/// Each `(i, j)` entry with `i < j` comes from the search rooted at `i` and is
/// mirrored to `(j, i)`, so the matrix is exactly symmetric. Unreachable
/// pairs get three times the largest finite distance.
pub fn geodesic_from_edges(n: usize, edges: &[Edge], source: SigmaCSource) -> GeodesicField {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push((e.b, e.dc));
        adj[e.b].push((e.a, e.dc));
    }
    let rows = par::map_range(n, |s| dijkstra(&adj, s));
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rows[i][j];
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let finite: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| dist[i * n + j])
        .filter(|d| d.is_finite())
        .collect();
    let sigma_c = match source {
        SigmaCSource::EdgeDc => {
            population_std(&edges.iter().map(|e| e.dc).collect::<Vec<_>>())
        }
        SigmaCSource::GeodesicAllPairs => population_std(&finite),
    };
    let max_finite = finite.iter().fold(0.0f64, |m, &d| m.max(d));
    for d in &mut dist {
        if d.is_infinite() {
            *d = 3.0 * max_finite;
        }
    }
    GeodesicField { n, dist, sigma_c }
}

pub fn geodesic_distances(g: &AffinityGraph, source: SigmaCSource) -> GeodesicField {
    geodesic_from_edges(g.n, &g.edges, source)
}
