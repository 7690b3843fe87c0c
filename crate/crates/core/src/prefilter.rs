//! Triangle scoring: side ratios from cross-product cofactors, closure
//! residuals, collinearity/residual rejection, and a capped per-edge pool of
//! the lowest-residual triangles.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::scalar::Real;
use crate::vec3::{self, Vec3};
use crate::viewgraph::{Triangle, TriangleIndex, ViewingGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefilterParams {
    /// Minimum of the three cross-product norms; smaller means near-collinear.
    pub collinearity_eps: f64,
    /// Triangles with closure residual above this are dropped.
    pub residual_max: f64,
    /// Maximum number of triangles kept per camera edge.
    pub pool_cap: usize,
    /// Residual at which the reliability score falls to 1/2.
    pub reliability_scale: f64,
}

impl Default for PrefilterParams {
    fn default() -> Self {
        Self {
            collinearity_eps: 1e-3,
            residual_max: 0.05,
            pool_cap: 8,
            reliability_scale: 0.05,
        }
    }
}

impl PrefilterParams {
    /// Keeps every nondegenerate triangle (no residual cut, no cap).
    pub fn full() -> Self {
        Self {
            collinearity_eps: 1e-9,
            residual_max: f64::INFINITY,
            pool_cap: usize::MAX,
            reliability_scale: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(TripError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("collinearity_eps", self.collinearity_eps)?;
        positive("residual_max", self.residual_max)?;
        positive("reliability_scale", self.reliability_scale)?;
        if self.pool_cap == 0 {
            return Err(TripError::InvalidParameter("pool_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleRecord<T> {
    pub tri: Triangle,
    /// Side-ratio magnitudes for edges `(i,j)`, `(j,k)`, `(k,i)`.
    pub h: Vec3<T>,
    /// Normalized closure residual.
    pub r: T,
    /// Reliability in (0, 1], strictly decreasing in `r`.
    pub pi: T,
    /// Whether the triangle survived the cap in the fiber of each side.
    pub in_fiber: [bool; 3],
}

impl<T: Real> TriangleRecord<T> {
    /// Side slot (0, 1, 2) of the given edge ordinal.
    pub fn side_of(&self, edge: usize) -> Option<usize> {
        self.tri.edges.iter().position(|&e| e == edge)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrianglePool<T> {
    /// Retained triangles in lexicographic order.
    pub records: Vec<TriangleRecord<T>>,
    /// Per camera edge: retained pool ordinals sorted by ascending residual.
    pub fibers: Vec<Vec<usize>>,
    /// Triangles enumerated before filtering.
    pub enumerated: usize,
    /// Dropped as near-collinear.
    pub rejected_collinear: usize,
    /// Dropped for closure residual above the threshold.
    pub rejected_residual: usize,
}

impl<T> TrianglePool<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Cross-product cofactors `(|b x c|, |c x a|, |a x b|)`. For a clean oriented
/// triangle these are proportional to the side lengths along `a`, `b`, `c`
/// (law of sines).
pub fn side_ratios<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> Vec3<T> {
    [
        vec3::norm(vec3::cross(b, c)),
        vec3::norm(vec3::cross(c, a)),
        vec3::norm(vec3::cross(a, b)),
    ]
}

/// `|h0 a + h1 b + h2 c| / |h|`.
pub fn closure_residual<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>, h: Vec3<T>) -> Result<T> {
    let hn = vec3::norm(h);
    if !(hn > T::zero()) {
        return Err(TripError::DegenerateTriangle);
    }
    let s = vec3::add(vec3::add(vec3::scale(a, h[0]), vec3::scale(b, h[1])), vec3::scale(c, h[2]));
    Ok(vec3::norm(s) / hn)
}

/// Cauchy-shaped reliability `1 / (1 + (r / scale)^2)`.
pub fn reliability<T: Real>(r: T, scale: T) -> T {
    let x = r / scale;
    T::one() / (T::one() + x * x)
}

/// Oriented triangle directions `(d_ij, d_jk, d_ki)`.
pub fn triangle_directions<T: Real>(g: &ViewingGraph<T>, tri: &Triangle) -> [Vec3<T>; 3] {
    let a = g.edge(tri.edges[0]).d;
    let b = g.edge(tri.edges[1]).d;
    let c = vec3::neg(g.edge(tri.edges[2]).d);
    [a, b, c]
}

enum Score<T> {
    Kept(T, Vec3<T>),
    Collinear,
    Residual,
}

fn score_triangle<T: Real>(g: &ViewingGraph<T>, tri: &Triangle, params: &PrefilterParams) -> Score<T> {
    let [a, b, c] = triangle_directions(g, tri);
    let h = side_ratios(a, b, c);
    let hmin = h[0].min(h[1]).min(h[2]);
    if hmin < T::lit(params.collinearity_eps) {
        return Score::Collinear;
    }
    match closure_residual(a, b, c, h) {
        Ok(r) if r <= T::lit(params.residual_max) => Score::Kept(r, h),
        Ok(_) => Score::Residual,
        Err(_) => Score::Collinear,
    }
}

fn by_residual<T: Real>(ra: T, ta: &Triangle, rb: T, tb: &Triangle) -> Ordering {
    ra.partial_cmp(&rb)
        .unwrap_or(Ordering::Equal)
        .then_with(|| ta.nodes.cmp(&tb.nodes))
}

pub fn prefilter_triangles<T: Real>(
    g: &ViewingGraph<T>,
    index: &TriangleIndex,
    params: &PrefilterParams,
) -> Result<TrianglePool<T>> {
    params.validate()?;
    let scores: Vec<Score<T>> = index
        .triangles
        .par_iter()
        .map(|tri| score_triangle(g, tri, params))
        .collect();
    let rejected_collinear = scores.iter().filter(|s| matches!(s, Score::Collinear)).count();
    let rejected_residual = scores.iter().filter(|s| matches!(s, Score::Residual)).count();

    let residual = |t: usize| match scores[t] {
        Score::Kept(r, _) => Some(r),
        _ => None,
    };
    // Per-edge capped fibers over enumeration ordinals.
    let capped: Vec<Vec<usize>> = index
        .fibers
        .par_iter()
        .map(|fiber| {
            let mut kept: Vec<usize> = fiber.iter().copied().filter(|&t| residual(t).is_some()).collect();
            kept.sort_by(|&x, &y| {
                by_residual(
                    residual(x).unwrap(),
                    &index.triangles[x],
                    residual(y).unwrap(),
                    &index.triangles[y],
                )
            });
            kept.truncate(params.pool_cap);
            kept
        })
        .collect();

    let mut membership = vec![[false; 3]; index.len()];
    for (e, fiber) in capped.iter().enumerate() {
        for &t in fiber {
            let slot = index.triangles[t].edges.iter().position(|&x| x == e).unwrap();
            membership[t][slot] = true;
        }
    }
    let scale = T::lit(params.reliability_scale);
    let mut remap = vec![usize::MAX; index.len()];
    let mut records = Vec::new();
    for (t, tri) in index.triangles.iter().enumerate() {
        if let Score::Kept(r, h) = scores[t] {
            if membership[t].iter().any(|&m| m) {
                remap[t] = records.len();
                records.push(TriangleRecord {
                    tri: *tri,
                    h,
                    r,
                    pi: reliability(r, scale),
                    in_fiber: membership[t],
                });
            }
        }
    }
    let fibers = capped
        .into_iter()
        .map(|f| f.into_iter().map(|t| remap[t]).collect())
        .collect();
    Ok(TrianglePool {
        records,
        fibers,
        enumerated: index.len(),
        rejected_collinear,
        rejected_residual,
    })
}
