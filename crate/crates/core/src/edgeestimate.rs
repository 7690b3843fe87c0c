//! Triangle ranking, coverage-driven prefix selection, and per-edge length
//! aggregation from the synchronized triangle scales.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::graph::UnionFind;
use crate::prefilter::TrianglePool;
use crate::scalar::Real;
use crate::viewgraph::ViewingGraph;

/// Cauchy scale applied to the relative proposal dispersion.
pub const DISPERSION_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Target fraction of cameras in the largest active component.
    pub gamma: f64,
    /// Supporting triangles needed before an edge becomes active.
    pub min_support: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self { gamma: 1.0, min_support: 1 }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(TripError::InvalidParameter(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.min_support == 0 {
            return Err(TripError::InvalidParameter("min_support must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    /// Eligible pool ordinals by ascending `(bar_r, r, triple)`.
    pub order: Vec<usize>,
    /// Prefix length `k`; the selected set is `order[..k]`.
    pub k: usize,
    /// Per camera edge: supporting triangles in the prefix.
    pub support: Vec<usize>,
    pub active: Vec<bool>,
    /// Cameras of the largest active component, ascending.
    pub component: Vec<usize>,
    pub coverage: f64,
    /// Set when the target coverage could not be reached.
    pub shortfall: bool,
}

impl SelectionState {
    pub fn selected(&self) -> &[usize] {
        &self.order[..self.k]
    }
}

fn rank_order<T: Real>(pool: &TrianglePool<T>, bar_r: &[T], eligible: Option<&[bool]>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.len())
        .filter(|&t| eligible.map_or(true, |m| m[t]))
        .collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&pool.records[a], &pool.records[b]);
        bar_r[a]
            .partial_cmp(&bar_r[b])
            .unwrap_or(Ordering::Equal)
            .then(ra.r.partial_cmp(&rb.r).unwrap_or(Ordering::Equal))
            .then(ra.tri.nodes.cmp(&rb.tri.nodes))
    });
    order
}

struct Growth {
    support: Vec<usize>,
    active: Vec<bool>,
    uf: UnionFind,
    largest: usize,
}

impl Growth {
    fn new(n: usize, edges: usize) -> Self {
        Self {
            support: vec![0; edges],
            active: vec![false; edges],
            uf: UnionFind::new(n),
            largest: if n > 0 { 1 } else { 0 },
        }
    }

    fn add<T: Real>(&mut self, pool: &TrianglePool<T>, g: &ViewingGraph<T>, t: usize, min_support: usize) {
        let rec = &pool.records[t];
        for (slot, &e) in rec.tri.edges.iter().enumerate() {
            if !rec.in_fiber[slot] {
                continue;
            }
            self.support[e] += 1;
            if self.support[e] == min_support {
                self.active[e] = true;
                let m = g.edge(e);
                if let Some(root) = self.uf.union(m.i, m.j) {
                    self.largest = self.largest.max(self.uf.set_size(root));
                }
            }
        }
    }
}

/// Smallest prefix of the ranked triangles whose active-edge graph has a
/// component covering at least `gamma` of the cameras. When `gamma` is out of
/// reach, the smallest prefix attaining the best achievable coverage is
/// returned with `shortfall` set. `eligible` optionally masks the pool.
pub fn select_triangle_prefix<T: Real>(
    pool: &TrianglePool<T>,
    bar_r: &[T],
    eligible: Option<&[bool]>,
    g: &ViewingGraph<T>,
    params: &SelectionParams,
) -> Result<SelectionState> {
    params.validate()?;
    let n = g.node_count();
    let order = rank_order(pool, bar_r, eligible);
    let need = ((params.gamma * n as f64) - 1e-9).ceil().max(1.0) as usize;

    let mut growth = Growth::new(n, g.edge_count());
    let mut k_best = 0;
    let mut best = growth.largest;
    for (idx, &t) in order.iter().enumerate() {
        growth.add(pool, g, t, params.min_support);
        if growth.largest > best {
            best = growth.largest;
            k_best = idx + 1;
        }
        if best >= need {
            break;
        }
    }
    let shortfall = best < need;

    // Replay exactly the chosen prefix.
    let mut growth = Growth::new(n, g.edge_count());
    for &t in &order[..k_best] {
        growth.add(pool, g, t, params.min_support);
    }
    let component = if k_best == 0 {
        Vec::new()
    } else {
        let mut root_best = None;
        for v in 0..n {
            let r = growth.uf.find(v);
            if growth.uf.set_size(r) == growth.largest && root_best.is_none() {
                root_best = Some(r);
            }
        }
        let root = root_best.unwrap();
        (0..n).filter(|&v| growth.uf.find(v) == root).collect()
    };
    let coverage = if n == 0 { 0.0 } else { component.len() as f64 / n as f64 };
    Ok(SelectionState {
        order,
        k: k_best,
        support: growth.support,
        active: growth.active,
        component,
        coverage,
        shortfall,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengthEstimate<T> {
    pub edge: usize,
    /// `exp(z_t) h_{t,e}` over selected supporting triangles, in selection order.
    pub proposals: Vec<T>,
    /// Lower median of the proposals.
    pub length: T,
    /// Lower median of `|lambda / length - 1|`.
    pub dispersion: T,
    pub weight: T,
}

/// Lower median (element `(m - 1) / 2` of the sorted values).
pub fn lower_median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Some(v[(v.len() - 1) / 2])
}

/// Median length, dispersion and weight from a proposal set.
pub fn summarize_proposals<T: Real>(edge: usize, proposals: Vec<T>) -> Option<EdgeLengthEstimate<T>> {
    let length = lower_median(&proposals)?;
    let rel: Vec<T> = proposals.iter().map(|&p| (p / length - T::one()).abs()).collect();
    let dispersion = lower_median(&rel)?;
    let m = T::from_count(proposals.len());
    let x = dispersion / T::lit(DISPERSION_SCALE);
    let weight = T::one() / (T::one() + x * x) * (m / (m + T::one()));
    Some(EdgeLengthEstimate { edge, proposals, length, dispersion, weight })
}

/// Length estimates for active edges inside the selected component.
pub fn aggregate_edge_lengths<T: Real>(
    state: &SelectionState,
    z: &[T],
    pool: &TrianglePool<T>,
    g: &ViewingGraph<T>,
) -> Vec<EdgeLengthEstimate<T>> {
    let mut inside = vec![false; g.node_count()];
    for &v in &state.component {
        inside[v] = true;
    }
    let mut proposals: Vec<Vec<T>> = vec![Vec::new(); g.edge_count()];
    for &t in state.selected() {
        let rec = &pool.records[t];
        let s = z[t].exp();
        for (slot, &e) in rec.tri.edges.iter().enumerate() {
            if rec.in_fiber[slot] {
                proposals[e].push(s * rec.h[slot]);
            }
        }
    }
    proposals
        .into_par_iter()
        .enumerate()
        .filter(|(e, p)| {
            let m = g.edge(*e);
            state.active[*e] && inside[m.i] && inside[m.j] && !p.is_empty()
        })
        .filter_map(|(e, p)| summarize_proposals(e, p))
        .collect()
}
