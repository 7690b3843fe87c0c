//! Similarity alignment of estimated locations to ground truth and
//! translation-error statistics over an evaluated node set.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::vec3::Vec3;

/// Node id → 3D point.
pub type PointSet = BTreeMap<usize, Vec3<f64>>;

/// Residual multiple of the median above which a node is trimmed.
pub const TRIM_FACTOR: f64 = 3.0;

/// `est ≈ s R gt + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub s: f64,
    pub r: [[f64; 3]; 3],
    pub t: Vec3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { s: 1.0, r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], t: [0.0; 3] }
    }

    fn rot(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.r[i][j])
    }

    /// Maps a ground-truth point into the estimate frame.
    pub fn apply(&self, x: Vec3<f64>) -> Vec3<f64> {
        let y = self.rot() * Vector3::from(x) * self.s + Vector3::from(self.t);
        [y[0], y[1], y[2]]
    }

    /// Maps an estimated point back onto ground-truth units.
    pub fn apply_inverse(&self, y: Vec3<f64>) -> Vec3<f64> {
        let x = self.rot().transpose() * (Vector3::from(y) - Vector3::from(self.t)) / self.s;
        [x[0], x[1], x[2]]
    }

    /// `max |RᵀR − I|` entry.
    pub fn orthogonality_error(&self) -> f64 {
        let r = self.rot();
        (r.transpose() * r - Matrix3::identity()).abs().max()
    }
}

/// Closed-form least-squares similarity with reflection correction.
pub fn fit_similarity(est: &[Vec3<f64>], gt: &[Vec3<f64>]) -> Result<SimilarityTransform> {
    if est.len() != gt.len() {
        return Err(TripError::Alignment(format!("{} estimated vs {} reference points", est.len(), gt.len())));
    }
    if est.len() < 3 {
        return Err(TripError::Alignment(format!("need at least 3 common nodes, got {}", est.len())));
    }
    let m = est.len() as f64;
    let ys: Vec<Vector3<f64>> = est.iter().map(|&p| Vector3::from(p)).collect();
    let xs: Vec<Vector3<f64>> = gt.iter().map(|&p| Vector3::from(p)).collect();
    let mx = xs.iter().sum::<Vector3<f64>>() / m;
    let my = ys.iter().sum::<Vector3<f64>>() / m;
    let mut cov = Matrix3::zeros();
    let mut var_x = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - mx;
        cov += (y - my) * dx.transpose();
        var_x += dx.norm_squared();
    }
    cov /= m;
    var_x /= m;
    if !(var_x > 0.0) || !cov.iter().all(|v| v.is_finite()) {
        return Err(TripError::Alignment("reference points are coincident or non-finite".into()));
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    if d[order[1]] <= 1e-12 * d[order[0]].max(f64::MIN_POSITIVE) {
        return Err(TripError::Alignment("covariance is rank-deficient (collinear points)".into()));
    }
    let mut sign = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // Flip the axis of the smallest singular value.
        sign[(order[2], order[2])] = -1.0;
        d[order[2]] = -d[order[2]];
    }
    let r = u * sign * v_t;
    let s = d.sum() / var_x;
    if !(s > 0.0) {
        return Err(TripError::Alignment(format!("non-positive scale {s}")));
    }
    let t = my - r * mx * s;
    Ok(SimilarityTransform {
        s,
        r: [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]],
        t: [t[0], t[1], t[2]],
    })
}

fn residuals(tf: &SimilarityTransform, est: &[Vec3<f64>], gt: &[Vec3<f64>]) -> Vec<f64> {
    est.iter().zip(gt).map(|(&y, &x)| crate::vec3::dist(y, tf.apply(x))).collect()
}

/// Least-squares fit, then a refit on nodes whose residual is at most
/// `TRIM_FACTOR` times the median. Residuals below a tiny fraction of the
/// estimate's spread count as zero so exact data is never trimmed. If the
/// survivors are degenerate the first fit is kept.
pub fn robust_similarity_align(est: &PointSet, gt: &PointSet, nodes: &[usize]) -> Result<SimilarityTransform> {
    let (e, g) = gather(est, gt, nodes)?;
    let first = fit_similarity(&e, &g)?;
    let res = residuals(&first, &e, &g);
    let med = statistics(&res).median;
    let spread = {
        let c = e.iter().fold([0.0; 3], |a, p| crate::vec3::add(a, *p));
        let c = crate::vec3::scale(c, 1.0 / e.len() as f64);
        (e.iter().map(|p| crate::vec3::dist(*p, c).powi(2)).sum::<f64>() / e.len() as f64).sqrt()
    };
    let cut = (TRIM_FACTOR * med).max(1e-12 * spread);
    let keep: Vec<usize> = (0..e.len()).filter(|&k| res[k] <= cut).collect();
    if keep.len() == e.len() {
        return Ok(first);
    }
    let e2: Vec<_> = keep.iter().map(|&k| e[k]).collect();
    let g2: Vec<_> = keep.iter().map(|&k| g[k]).collect();
    Ok(fit_similarity(&e2, &g2).unwrap_or(first))
}

fn gather(est: &PointSet, gt: &PointSet, nodes: &[usize]) -> Result<(Vec<Vec3<f64>>, Vec<Vec3<f64>>)> {
    let mut e = Vec::with_capacity(nodes.len());
    let mut g = Vec::with_capacity(nodes.len());
    for &v in nodes {
        match (est.get(&v), gt.get(&v)) {
            (Some(&a), Some(&b)) => {
                e.push(a);
                g.push(b);
            }
            _ => return Err(TripError::Alignment(format!("node {v} missing from estimate or reference"))),
        }
    }
    Ok((e, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    /// Lower median.
    pub median: f64,
    pub mean: f64,
    /// Nearest-rank 90th percentile.
    pub p90: f64,
    pub max: f64,
}

/// Value at rank `ceil(p N)` (1-based) of the sorted sample.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Order-independent summary; all zeros for an empty sample.
pub fn statistics(values: &[f64]) -> Statistics {
    if values.is_empty() {
        return Statistics { median: 0.0, mean: 0.0, p90: 0.0, max: 0.0 };
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Statistics {
        median: v[(v.len() - 1) / 2],
        mean: v.iter().sum::<f64>() / v.len() as f64,
        p90: nearest_rank(&v, 0.9),
        max: v[v.len() - 1],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Evaluated node set, ascending.
    pub nodes: Vec<usize>,
    /// Requested nodes absent from the estimate or the reference.
    pub missing: Vec<usize>,
    /// Per-node error in ground-truth units, aligned with `nodes`.
    pub errors: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
    pub max: f64,
    pub transform: SimilarityTransform,
    pub runtime_seconds: Option<f64>,
    pub coverage: Option<f64>,
}

/// Aligns `est` to `gt` over the requested nodes (all reference nodes when
/// `nodes` is `None`) that both sets contain, then reports errors in
/// ground-truth units.
pub fn compute_error_report(
    est: &PointSet,
    gt: &PointSet,
    nodes: Option<&[usize]>,
    runtime_seconds: Option<f64>,
    coverage: Option<f64>,
) -> Result<ErrorReport> {
    let mut requested: Vec<usize> = match nodes {
        Some(n) => n.to_vec(),
        None => gt.keys().copied().collect(),
    };
    requested.sort_unstable();
    requested.dedup();
    let (present, missing): (Vec<usize>, Vec<usize>) =
        requested.into_iter().partition(|v| est.contains_key(v) && gt.contains_key(v));
    let transform = robust_similarity_align(est, gt, &present)?;
    let errors: Vec<f64> = present
        .iter()
        .map(|v| crate::vec3::dist(transform.apply_inverse(est[v]), gt[v]))
        .collect();
    let st = statistics(&errors);
    Ok(ErrorReport {
        nodes: present,
        missing,
        errors,
        median: st.median,
        mean: st.mean,
        p90: st.p90,
        max: st.max,
        transform,
        runtime_seconds,
        coverage,
    })
}
