//! Weighted graph-Laplacian least squares: `min sum_c w_c (x[head] - x[tail] - target_c)^2`.
//!
//! Two inner solvers share the same normal equations `L_w x = B^T W target`:
//! Jacobi-preconditioned conjugate gradients on the gauge-projected system,
//! and damped synchronous local averaging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{Components, SignedGraph};
use crate::scalar::Real;

const PAR_MIN_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Preconditioned conjugate gradients.
    #[default]
    Exact,
    /// Damped local averaging sweeps.
    Fast,
}

impl std::str::FromStr for SolverMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Self::Exact),
            "fast" => Ok(Self::Fast),
            other => Err(format!("unknown solver mode `{other}` (expected exact|fast)")),
        }
    }
}

/// `y = L_w x`.
pub fn laplacian_apply<T: Real>(graph: &SignedGraph, w: &[T], x: &[T], y: &mut [T]) {
    y.par_iter_mut()
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .for_each(|(v, yv)| {
            let mut acc = T::zero();
            for inc in graph.incident(v) {
                acc = acc + w[inc.edge] * (x[v] - x[inc.other]);
            }
            *yv = acc;
        });
}

/// Right-hand side `B^T W target`.
pub fn laplacian_rhs<T: Real>(graph: &SignedGraph, w: &[T], target: &[T]) -> Vec<T> {
    (0..graph.node_count())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|v| {
            let mut acc = T::zero();
            for inc in graph.incident(v) {
                let wt = w[inc.edge] * target[inc.edge];
                acc = if inc.is_head { acc + wt } else { acc - wt };
            }
            acc
        })
        .collect()
}

pub fn laplacian_diag<T: Real>(graph: &SignedGraph, w: &[T]) -> Vec<T> {
    (0..graph.node_count())
        .map(|v| graph.incident(v).iter().map(|inc| w[inc.edge]).sum())
        .collect()
}

// Sequential so results do not depend on the thread count.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub rel_tol: f64,
    /// Defaults to `ceil(10 sqrt(n))`.
    pub max_iter: Option<usize>,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves `L_w x = b` in place, starting from the current `x`, with the
/// all-ones direction of every component projected out at each iteration.
/// Nodes whose incident weights are all zero only move with the re-centering.
pub fn pcg_solve<T: Real>(
    graph: &SignedGraph,
    w: &[T],
    comps: &Components,
    b: &[T],
    x: &mut [T],
    opts: &PcgOptions,
) -> PcgReport {
    let n = graph.node_count();
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| (10.0 * (n as f64).sqrt()).ceil() as usize)
        .max(1);
    let inv_diag: Vec<T> = laplacian_diag(graph, w)
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::zero() })
        .collect();
    let mut bp = b.to_vec();
    comps.center(&mut bp);
    let bnorm = dot(&bp, &bp).sqrt();

    let mut q = vec![T::zero(); n];
    laplacian_apply(graph, w, x, &mut q);
    let mut r: Vec<T> = bp.iter().zip(&q).map(|(&bi, &qi)| bi - qi).collect();
    comps.center(&mut r);
    let denom = if bnorm > T::zero() { bnorm } else { T::one() };
    let tol = T::lit(opts.rel_tol);
    let mut rel = dot(&r, &r).sqrt() / denom;
    if rel <= tol {
        comps.center(x);
        return PcgReport { iterations: 0, rel_residual: rel.to_f64_lossy() };
    }
    let precondition = |r: &[T], z: &mut Vec<T>| {
        z.clear();
        z.extend(r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di));
        comps.center(z);
    };
    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        laplacian_apply(graph, w, &p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > T::zero()) {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * q[i];
        }
        comps.center(&mut r);
        rel = dot(&r, &r).sqrt() / denom;
        if rel <= tol {
            break;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !(rz > T::zero()) {
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    comps.center(x);
    PcgReport { iterations, rel_residual: rel.to_f64_lossy() }
}

/// One synchronous damped local-averaging sweep. Writes the update into
/// `out` and returns the largest absolute change.
pub fn averaging_sweep<T: Real>(
    graph: &SignedGraph,
    w: &[T],
    target: &[T],
    x: &[T],
    out: &mut [T],
    damping: T,
) -> T {
    out.par_iter_mut()
        .with_min_len(PAR_MIN_LEN)
        .enumerate()
        .map(|(v, ov)| {
            let mut num = T::zero();
            let mut den = T::zero();
            for inc in graph.incident(v) {
                let wc = w[inc.edge];
                let pred = if inc.is_head {
                    x[inc.other] + target[inc.edge]
                } else {
                    x[inc.other] - target[inc.edge]
                };
                num = num + wc * pred;
                den = den + wc;
            }
            *ov = if den > T::zero() {
                x[v] + damping * (num / den - x[v])
            } else {
                x[v]
            };
            (*ov - x[v]).abs()
        })
        .reduce(T::zero, |a, b| a.max(b))
}

/// Averaging operator with weights and targets laid out in incidence order:
/// the update of `v` is `(bias[v] + sum w x[other]) / den[v]`.
struct PackedAveraging<T> {
    offsets: Vec<usize>,
    other: Vec<u32>,
    w: Vec<T>,
    bias: Vec<T>,
    den: Vec<T>,
}

impl<T: Real> PackedAveraging<T> {
    fn new(graph: &SignedGraph, w: &[T], target: &[T]) -> Self {
        let n = graph.node_count();
        let offsets = graph.offsets().to_vec();
        let total = offsets[n];
        let (mut other, mut wp) = (Vec::with_capacity(total), Vec::with_capacity(total));
        let mut bias = vec![T::zero(); n];
        let mut den = vec![T::zero(); n];
        for v in 0..n {
            for inc in graph.incident(v) {
                let wc = w[inc.edge];
                let t = if inc.is_head { target[inc.edge] } else { -target[inc.edge] };
                other.push(inc.other as u32);
                wp.push(wc);
                bias[v] = bias[v] + wc * t;
                den[v] = den[v] + wc;
            }
        }
        Self { offsets, other, w: wp, bias, den }
    }

    fn sweep(&self, x: &[T], out: &mut [T], damping: T) -> T {
        out.par_iter_mut()
            .with_min_len(PAR_MIN_LEN)
            .enumerate()
            .map(|(v, ov)| {
                let (a, b) = (self.offsets[v], self.offsets[v + 1]);
                let mut num = self.bias[v];
                for (o, &wc) in self.other[a..b].iter().zip(&self.w[a..b]) {
                    num = num + wc * x[*o as usize];
                }
                let den = self.den[v];
                *ov = if den > T::zero() { x[v] + damping * (num / den - x[v]) } else { x[v] };
                (*ov - x[v]).abs()
            })
            .reduce(T::zero, |a, b| a.max(b))
    }
}

/// Runs sweeps until the largest change drops below `tol` or `max_sweeps`
/// is hit; returns the number of sweeps used.
pub fn averaging_solve<T: Real>(
    graph: &SignedGraph,
    w: &[T],
    comps: &Components,
    target: &[T],
    x: &mut Vec<T>,
    damping: T,
    tol: T,
    max_sweeps: usize,
) -> usize {
    let op = PackedAveraging::new(graph, w, target);
    let mut buf = vec![T::zero(); x.len()];
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let change = op.sweep(x, &mut buf, damping);
        std::mem::swap(x, &mut buf);
        if change <= tol {
            break;
        }
    }
    comps.center(x);
    sweeps
}
