//! Viewing graph with one unit direction per undirected edge, and triangle
//! enumeration by sorted-neighbor intersection.

use std::collections::HashMap;

use crate::error::{Result, TripError};
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// Two measurements of the same pair closer than this (radians) are merged.
pub const DUPLICATE_ANGLE_TOL: f64 = 1e-6;

/// Unit direction on the canonical edge `(i, j)`, `i < j`, pointing from `j`
/// toward `i`, i.e. the measurement of `(x_i - x_j) / |x_i - x_j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionMeasurement<T> {
    pub i: usize,
    pub j: usize,
    pub d: Vec3<T>,
}

#[derive(Debug, Clone)]
pub struct ViewingGraph<T> {
    n: usize,
    edges: Vec<DirectionMeasurement<T>>,
    /// Per node, sorted `(neighbor, edge ordinal)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl<T: Real> ViewingGraph<T> {
    /// Builds the graph, renormalizing directions and flipping pairs given as
    /// `(i, j)` with `i > j` so that storage is canonical.
    pub fn build(n: usize, measurements: &[(usize, usize, Vec3<T>)]) -> Result<Self> {
        let mut edges: Vec<DirectionMeasurement<T>> = Vec::with_capacity(measurements.len());
        let mut edge_index = HashMap::with_capacity(measurements.len());
        for &(a, b, v) in measurements {
            for id in [a, b] {
                if id >= n {
                    return Err(TripError::NodeOutOfRange { id, n });
                }
            }
            if a == b {
                return Err(TripError::SelfLoop(a));
            }
            let d = vec3::normalize(v).ok_or(TripError::ZeroDirection(a, b))?;
            let (i, j, d) = if a < b { (a, b, d) } else { (b, a, vec3::neg(d)) };
            match edge_index.get(&(i, j)) {
                Some(&e) => {
                    let prev: &DirectionMeasurement<T> = &edges[e];
                    let angle = vec3::angle(prev.d, d).to_f64_lossy();
                    if angle > DUPLICATE_ANGLE_TOL {
                        return Err(TripError::InconsistentDuplicate { i, j, angle });
                    }
                }
                None => {
                    edge_index.insert((i, j), edges.len());
                    edges.push(DirectionMeasurement { i, j, d });
                }
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, m) in edges.iter().enumerate() {
            adjacency[m.i].push((m.j, e));
            adjacency[m.j].push((m.i, e));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges,
            adjacency,
            edge_index,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[DirectionMeasurement<T>] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &DirectionMeasurement<T> {
        &self.edges[e]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Edge ordinal of the unordered pair, if present.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edge_index.get(&key).copied()
    }

    /// Direction of `x_from - x_to`, negating the stored canonical direction
    /// when needed.
    pub fn direction(&self, from: usize, to: usize) -> Option<Vec3<T>> {
        let e = self.edge_id(from, to)?;
        let m = &self.edges[e];
        Some(if m.i == from { m.d } else { vec3::neg(m.d) })
    }
}

/// A graph triangle `(i, j, k)` with `i < j < k` and its edge ordinals
/// `[e_ij, e_jk, e_ik]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub edges: [usize; 3],
}

#[derive(Debug, Clone, Default)]
pub struct TriangleIndex {
    pub triangles: Vec<Triangle>,
    /// For every edge ordinal, the triangles containing it (ascending).
    pub fibers: Vec<Vec<usize>>,
}

impl TriangleIndex {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Lists every 3-clique once, in lexicographic order.
///
/// For each edge `(i, j)` the neighbors of `i` and `j` above `j` are
/// intersected by walking the shorter list and binary-searching the longer,
/// so the total cost is proportional to the sum over edges of the smaller
/// endpoint degree (times a log factor).
pub fn enumerate_triangles<T: Real>(g: &ViewingGraph<T>) -> TriangleIndex {
    let mut triangles = Vec::new();
    for i in 0..g.node_count() {
        let ni = g.neighbors(i);
        let start_i = ni.partition_point(|&(v, _)| v <= i);
        for &(j, e_ij) in &ni[start_i..] {
            let nj = g.neighbors(j);
            let hi_i = &ni[ni.partition_point(|&(v, _)| v <= j)..];
            let hi_j = &nj[nj.partition_point(|&(v, _)| v <= j)..];
            let (short, long, short_is_i) = if hi_i.len() <= hi_j.len() {
                (hi_i, hi_j, true)
            } else {
                (hi_j, hi_i, false)
            };
            for &(k, e_short) in short {
                if let Ok(pos) = long.binary_search_by_key(&k, |&(v, _)| v) {
                    let e_long = long[pos].1;
                    let (e_ik, e_jk) = if short_is_i {
                        (e_short, e_long)
                    } else {
                        (e_long, e_short)
                    };
                    triangles.push(Triangle {
                        nodes: [i, j, k],
                        edges: [e_ij, e_jk, e_ik],
                    });
                }
            }
        }
    }
    // `short` is walked in ascending k, so triangles are already lexicographic.
    let mut fibers = vec![Vec::new(); g.edge_count()];
    for (t, tri) in triangles.iter().enumerate() {
        for &e in &tri.edges {
            fibers[e].push(t);
        }
    }
    TriangleIndex { triangles, fibers }
}
