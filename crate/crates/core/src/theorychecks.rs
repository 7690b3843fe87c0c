//! Numerical oracles for the exact-recovery theory: Green function levels
//! of the Johnson graph J(n,3) and the annealed clean-scale decay
//! experiment on complete camera graphs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::graph::Components;
use crate::loss::{LossFamily, LossSpec};
use crate::prefilter::{prefilter_triangles, PrefilterParams};
use crate::scalar::Real;
use crate::scalesync::{annealed_synchronize, build_constraint_graph, spanning_tree_init, StageRecord, SyncOptions};
use crate::synthgen::complete_graph_scene;
use crate::viewgraph::enumerate_triangles;

/// Constants of the exact-recovery theorem. They are reported, never
/// assumed: at desk scale the corruption-degree condition forces zero
/// corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub c_trip: f64,
    pub delta0: f64,
    pub c_j: f64,
    pub threshold: f64,
}

pub const THEORY_CONSTANTS: TheoryConstants =
    TheoryConstants { c_trip: 1e-3, delta0: 1.0 / 200.0, c_j: 16.0, threshold: 1.0 / 194.0 };

pub type Rational = Ratio<i128>;

/// `[N_0, N_1, N_2, N_3]`: triples meeting a fixed triple in `r` points.
pub fn level_sizes(n: u64) -> [u64; 4] {
    let m = n - 3;
    [binom(m, 3), 3 * m * (m - 1) / 2, 3 * m, 1]
}

pub fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Closed-form Green levels `[G_0, G_1, G_2, G_3]` in exact arithmetic.
pub fn closed_form_levels_exact(n: i128) -> [Rational; 4] {
    let d = n * n * (n - 1) * (n - 1) * (n - 2) * (n - 2);
    let p = |c: &[i128]| c.iter().fold(0i128, |acc, &k| acc * n + k);
    [
        Rational::new(-p(&[11, -26, 12]), d),
        Rational::new(p(&[2, -39, 82, -36]), 3 * d),
        Rational::new(p(&[1, 5, -88, 172, -72]), 6 * d),
        Rational::new((n - 3) * p(&[2, 1, 16, -52, 24]), 6 * d),
    ]
}

/// The same closed forms evaluated in floating point.
pub fn closed_form_levels<T: Real>(n: usize) -> [T; 4] {
    let n = T::from_count(n);
    let one = T::one();
    let c = |k: f64| T::lit(k);
    let d = n * n * (n - one) * (n - one) * (n - c(2.0)) * (n - c(2.0));
    let p = |k: &[f64]| k.iter().fold(T::zero(), |acc, &x| acc * n + c(x));
    [
        -p(&[11.0, -26.0, 12.0]) / d,
        p(&[2.0, -39.0, 82.0, -36.0]) / (c(3.0) * d),
        p(&[1.0, 5.0, -88.0, 172.0, -72.0]) / (c(6.0) * d),
        (n - c(3.0)) * p(&[2.0, 1.0, 16.0, -52.0, 24.0]) / (c(6.0) * d),
    ]
}

/// Adjacent-level differences `G_1 − G_0`, `G_2 − G_1`, `G_3 − G_2`.
pub fn closed_form_differences_exact(n: i128) -> [Rational; 3] {
    let q = n * (n - 1) * (n - 2);
    [Rational::new(2, 3 * q), Rational::new(n + 4, 6 * q), Rational::new(n * n + 2, 3 * q)]
}

/// Laplacian eigenvalues of J(n,3) with multiplicities.
pub fn johnson_spectrum(n: u64) -> [(f64, u64); 4] {
    let nf = n as f64;
    [
        (0.0, 1),
        (nf, n - 1),
        (2.0 * (nf - 1.0), binom(n, 2) - n),
        (3.0 * (nf - 2.0), binom(n, 3) - binom(n, 2)),
    ]
}

/// Upper bound on the absolute Green row sum.
pub fn row_sum_bound(n: usize) -> f64 {
    4.0 / (n as f64 - 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnsonGreenLevels {
    pub n: usize,
    /// Numerical `G_r`, indexed by intersection size `r`.
    pub levels: [f64; 4],
    pub closed_form: [f64; 4],
    pub max_level_error: f64,
    /// Largest deviation of a Green row entry from its level value.
    pub level_spread: f64,
    pub level_sizes: [u64; 4],
    pub abs_row_sum: f64,
    pub row_sum_bound: f64,
    /// Computed eigenvalue clusters `(value, multiplicity)`, ascending.
    pub spectrum: Vec<(f64, usize)>,
    pub spectrum_matches: bool,
    /// `Σ_r N_r G_r` of the numerical levels.
    pub zero_mean_residual: f64,
}

impl JohnsonGreenLevels {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_level_error <= tol
            && self.level_spread <= tol
            && self.spectrum_matches
            && self.abs_row_sum <= self.row_sum_bound
            && self.zero_mean_residual.abs() <= 1e-12
    }
}

fn triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn overlap(x: &[usize; 3], y: &[usize; 3]) -> usize {
    x.iter().filter(|v| y.contains(v)).count()
}

/// Builds the J(n,3) Laplacian, solves `(L + J/N) g = e_x − 1/N` for one
/// zero-mean Green row, and compares it with the closed forms.
pub fn johnson_green_levels(n: usize) -> Result<JohnsonGreenLevels> {
    if !(6..=14).contains(&n) {
        return Err(TripError::InvalidParameter(format!("Johnson check needs 6 <= n <= 14, got {n}")));
    }
    let t = triples(n);
    let big = t.len();
    let inv = 1.0 / big as f64;
    let mut lap = DMatrix::<f64>::zeros(big, big);
    for a in 0..big {
        for b in a + 1..big {
            if overlap(&t[a], &t[b]) == 2 {
                lap[(a, b)] = -1.0;
                lap[(b, a)] = -1.0;
                lap[(a, a)] += 1.0;
                lap[(b, b)] += 1.0;
            }
        }
    }
    let shifted = lap.map(|v| v + inv);
    let mut rhs = DVector::from_element(big, -inv);
    rhs[0] += 1.0;
    let g = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| TripError::InvalidParameter("singular shifted Laplacian".into()))?;

    let mut levels = [f64::NAN; 4];
    let mut spread = 0.0f64;
    for (y, ty) in t.iter().enumerate() {
        let r = overlap(&t[0], ty);
        if levels[r].is_nan() {
            levels[r] = g[y];
        }
        spread = spread.max((g[y] - levels[r]).abs());
    }
    let closed = closed_form_levels::<f64>(n);
    let max_level_error = (0..4).map(|r| (levels[r] - closed[r]).abs()).fold(0.0, f64::max);
    let sizes = level_sizes(n as u64);
    let zero_mean_residual: f64 = (0..4).map(|r| sizes[r] as f64 * levels[r]).sum();
    let abs_row_sum = g.iter().map(|v| v.abs()).sum();

    let eig = SymmetricEigen::new(lap);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    let mut spectrum: Vec<(f64, usize)> = Vec::new();
    for v in vals {
        match spectrum.last_mut() {
            Some((c, k)) if (v - *c).abs() < 1e-6 => *k += 1,
            _ => spectrum.push((v, 1)),
        }
    }
    let expected = johnson_spectrum(n as u64);
    let spectrum_matches = spectrum.len() == 4
        && spectrum
            .iter()
            .zip(expected.iter())
            .all(|(&(v, k), &(ev, ek))| (v - ev).abs() < 1e-8 && k as u64 == ek);

    Ok(JohnsonGreenLevels {
        n,
        levels,
        closed_form: closed,
        max_level_error,
        level_spread: spread,
        level_sizes: sizes,
        abs_row_sum,
        row_sum_bound: row_sum_bound(n),
        spectrum,
        spectrum_matches,
        zero_mean_residual,
    })
}

/// `(family, a, m(a), K, h_prof)` at each family's maximizing window.
pub fn loss_profile_table() -> Vec<(LossFamily, f64, f64, f64, f64)> {
    LossFamily::ALL
        .iter()
        .map(|&f| {
            let a = f.default_window();
            (f, a, f.window_slope(a), f.max_score(), f.profile_margin(a))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayStage {
    pub sigma: f64,
    /// `min_α max_{t clean} |z_t − z*_t − α|`.
    pub error: f64,
    /// `error / previous error`; `None` at the first stage or after a zero.
    pub ratio: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub n: usize,
    pub corrupted: Vec<(usize, usize)>,
    /// Maximum corrupted degree of any camera.
    pub delta_e: usize,
    pub total_triangles: usize,
    pub clean_triangles: usize,
    pub stages: Vec<DecayStage>,
    /// Largest relative deviation of clean edge-length predictions
    /// `exp(z_t) h_{t,e}` from the true lengths after one global rescale.
    pub length_rel_error: f64,
    pub constants: TheoryConstants,
}

impl DecayTrace {
    pub fn errors(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.error).collect()
    }

    pub fn final_error(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.error)
    }

    /// Whether `E` never grows by more than `slack`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.stages.windows(2).all(|w| w[1].error <= w[0].error + slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySetup {
    pub family: LossFamily,
    pub tau: f64,
    pub stages: usize,
    pub seed: u64,
}

impl Default for DecaySetup {
    fn default() -> Self {
        Self { family: LossFamily::Cauchy, tau: 0.5, stages: 20, seed: 0 }
    }
}

/// Gauge-aligned sup error `(max(z − z*) − min(z − z*)) / 2` over `set`.
pub fn gauge_sup_error(z: &[f64], z_true: &[f64], set: &[usize]) -> f64 {
    let (lo, hi) = set.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
        let d = z[t] - z_true[t];
        (lo.min(d), hi.max(d))
    });
    if set.is_empty() {
        0.0
    } else {
        (hi - lo) / 2.0
    }
}

/// `count` distinct corrupted pairs spread over disjoint cameras where
/// possible, so the corrupted degree stays at one.
pub fn spread_corruption(n: usize, count: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..count.min(n / 2)).map(|k| (2 * k, 2 * k + 1)).collect();
    let mut extra = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    while out.len() < count {
        match extra.next() {
            Some(p) if !out.contains(&p) => out.push(p),
            Some(_) => {}
            None => break,
        }
    }
    out
}

/// Full-triangle annealed synchronization on a noiseless `K_n` scene with
/// the listed edges replaced by coherent-distractor directions.
pub fn exact_recovery_experiment(n: usize, corrupted: &[(usize, usize)], setup: &DecaySetup) -> Result<DecayTrace> {
    if !(4..=40).contains(&n) {
        return Err(TripError::InvalidParameter(format!("decay experiment needs 4 <= n <= 40, got {n}")));
    }
    let scene = complete_graph_scene(n, corrupted, setup.seed)?;
    let g = scene.viewing_graph()?;
    let index = enumerate_triangles(&g);
    let pool = prefilter_triangles(&g, &index, &PrefilterParams::full())?;
    let corrupt_edge: Vec<bool> = scene.edges.iter().map(|e| e.corrupt).collect();
    // Scene edges and graph edges are both sorted by (i, j), so ids coincide.
    debug_assert!(scene.edges.iter().enumerate().all(|(k, e)| g.edge_id(e.i, e.j) == Some(k)));
    let length = |e: usize| {
        let m = g.edge(e);
        crate::vec3::dist(scene.locations[m.i], scene.locations[m.j])
    };

    let clean: Vec<usize> = (0..pool.len())
        .filter(|&t| pool.records[t].tri.edges.iter().all(|&e| !corrupt_edge[e]))
        .collect();
    let mut z_true = vec![0.0; pool.len()];
    for &t in &clean {
        let rec = &pool.records[t];
        z_true[t] = (length(rec.tri.edges[0]) / rec.h[0]).ln();
    }

    let constraints = build_constraint_graph(&pool);
    let mut is_clean = vec![false; pool.len()];
    for &t in &clean {
        is_clean[t] = true;
    }
    let comps = Components::from_edges(
        pool.len(),
        constraints.iter().filter(|c| is_clean[c.t] && is_clean[c.u]).map(|c| (c.t, c.u)),
    );
    if clean.is_empty() || clean.iter().any(|&t| comps.label[t] != comps.label[clean[0]]) {
        return Err(TripError::InvalidScene("clean triangle-overlap graph is disconnected".into()));
    }

    let z0 = spanning_tree_init(&constraints, &pool);
    let spec = LossSpec::annealed(setup.family, setup.tau, setup.stages);
    let mut stages: Vec<DecayStage> = Vec::new();
    let probe = |rec: StageRecord<'_, f64>| {
        let error = gauge_sup_error(rec.z, &z_true, &clean);
        let ratio = stages.last().and_then(|p: &DecayStage| (p.error > 0.0).then(|| error / p.error));
        stages.push(DecayStage { sigma: rec.sigma, error, ratio, iterations: rec.iterations, converged: rec.converged });
    };
    let sol = annealed_synchronize(&constraints, pool.len(), &z0, &spec, &SyncOptions::default(), probe)?;

    let mut ratios = Vec::new();
    for &t in &clean {
        let rec = &pool.records[t];
        for slot in 0..3 {
            ratios.push(sol.z[t].exp() * rec.h[slot] / length(rec.tri.edges[slot]));
        }
    }
    ratios.sort_by(f64::total_cmp);
    let c = ratios[(ratios.len() - 1) / 2];
    let length_rel_error = ratios.iter().map(|r| (r / c - 1.0).abs()).fold(0.0, f64::max);

    Ok(DecayTrace {
        n,
        corrupted: corrupted.to_vec(),
        delta_e: scene.corrupted_degree(),
        total_triangles: pool.len(),
        clean_triangles: clean.len(),
        stages,
        length_rel_error,
        constants: THEORY_CONSTANTS,
    })
}
