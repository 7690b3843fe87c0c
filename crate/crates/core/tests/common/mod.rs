//! Invariant checks shared by the property suites and the acceptance run.
//!
//! Every check takes plain inputs (seeds, sizes, values) and returns
//! `Err(description)` on violation, so proptest can drive it with generated
//! inputs and the acceptance target can replay it on fixed ones.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{Rotation3, Vector3};
use trip::edgeestimate::{
    lower_median, select_triangle_prefix, summarize_proposals, SelectionParams,
};
use trip::evaluation::{compute_error_report, nearest_rank, statistics, PointSet};
use trip::graph::UnionFind;
use trip::io;
use trip::locrecover::{recover_locations, LocationOptions};
use trip::pipeline::{run_pipeline, PipelineConfig, Report};
use trip::prefilter::{closure_residual, prefilter_triangles, side_ratios, triangle_directions, PrefilterParams};
use trip::rng::{CounterRng, Stream};
use trip::scalesync::{
    annealed_synchronize, build_constraint_graph, incident_residual_scores, spanning_tree_init, synchronize_scales,
    SyncOptions,
};
use trip::synthgen::{generate_scene, Geometry, SceneConfig, SyntheticScene};
use trip::theorychecks::{closed_form_levels_exact, level_sizes, Rational};
use trip::vec3::{self, Vec3};
use trip::viewgraph::{enumerate_triangles, ViewingGraph};
use trip::{EdgeLengthEstimateF64, LossFamily, LossSpec, SolverMode, ViewingGraphF64};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn scene(geometry: Geometry, n: usize, q: f64, sigma: f64, seed: u64) -> SyntheticScene {
    let cfg = SceneConfig { geometry, n, q, sigma, seed, ..SceneConfig::default() };
    generate_scene(&cfg).expect("valid scene")
}

pub fn ground_truth(scene: &SyntheticScene) -> PointSet {
    scene.locations.iter().copied().enumerate().collect()
}

pub fn geometry(seed: u64) -> Geometry {
    if seed % 2 == 0 {
        Geometry::Grid
    } else {
        Geometry::Torus
    }
}

/// Random graph on `n` cameras at random positions, each pair kept with
/// probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> ViewingGraphF64 {
    let mut rng = CounterRng::new(seed, Stream::Scene);
    let pos: Vec<Vec3<f64>> = (0..n).map(|_| [rng.normal(), rng.normal(), rng.normal()]).collect();
    let mut m = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p {
                if let Some(d) = vec3::normalize(vec3::sub(pos[i], pos[j])) {
                    m.push((i, j, d));
                }
            }
        }
    }
    ViewingGraph::build(n, &m).expect("random graph builds")
}

fn rel_spread(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

fn non_increasing(seq: &[f64]) -> Check {
    let top = seq.iter().copied().fold(0.0, f64::max);
    for (k, w) in seq.windows(2).enumerate() {
        let slack = 1e-10 * w[0].abs() + 1e-14 * top + 1e-24;
        ensure!(w[1] <= w[0] + slack, "objective rose at step {}: {} -> {}", k + 1, w[0], w[1]);
    }
    Ok(())
}

// ---------------------------------------------------------------- viewgraph

pub fn enumeration_matches_brute_force(n: usize, p: f64, seed: u64) -> Check {
    let g = random_graph(n, p, seed);
    let idx = enumerate_triangles(&g);
    let mut brute = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if let (Some(a), Some(b), Some(c)) = (g.edge_id(i, j), g.edge_id(j, k), g.edge_id(i, k)) {
                    brute.push(([i, j, k], [a, b, c]));
                }
            }
        }
    }
    let got: Vec<_> = idx.triangles.iter().map(|t| (t.nodes, t.edges)).collect();
    ensure!(got == brute, "enumeration differs from brute force ({} vs {})", got.len(), brute.len());
    let again = enumerate_triangles(&g);
    ensure!(again.triangles == idx.triangles && again.fibers == idx.fibers, "enumeration not deterministic");
    Ok(())
}

// ---------------------------------------------------------------- prefilter

/// Noiseless triangles close exactly and `h` follows the law of sines.
pub fn noiseless_closure(seed: u64) -> Check {
    let sc = scene(geometry(seed), 60, 0.0, 0.0, seed);
    let g = sc.viewing_graph().map_err(|e| e.to_string())?;
    let idx = enumerate_triangles(&g);
    ensure!(!idx.is_empty(), "no triangles");
    for tri in &idx.triangles {
        let [a, b, c] = triangle_directions(&g, tri);
        let h = side_ratios(a, b, c);
        if h[0].min(h[1]).min(h[2]) < 1e-3 {
            continue;
        }
        let r = closure_residual(a, b, c, h).map_err(|e| e.to_string())?;
        ensure!(r <= 1e-9, "triangle {:?}: residual {r:e}", tri.nodes);
        let [i, j, k] = tri.nodes;
        let len = [
            vec3::dist(sc.locations[i], sc.locations[j]),
            vec3::dist(sc.locations[j], sc.locations[k]),
            vec3::dist(sc.locations[i], sc.locations[k]),
        ];
        let ratios: Vec<f64> = (0..3).map(|s| h[s] / len[s]).collect();
        ensure!(rel_spread(&ratios) <= 1e-6, "triangle {:?}: h not proportional to sides", tri.nodes);
    }
    Ok(())
}

/// Reliability strictly decreases with residual across the retained set.
pub fn reliability_monotone(seed: u64) -> Check {
    let sc = scene(geometry(seed), 60, 0.2, 0.01, seed);
    let g = sc.viewing_graph().map_err(|e| e.to_string())?;
    let pool = prefilter_triangles(&g, &enumerate_triangles(&g), &PrefilterParams::default()).map_err(|e| e.to_string())?;
    let mut recs: Vec<(f64, f64)> = pool.records.iter().map(|r| (r.r, r.pi)).collect();
    recs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in recs.windows(2) {
        let rs = PrefilterParams::default().reliability_scale;
        // Strict wherever the two values are distinguishable in floating point.
        ensure!(w[1].1 <= w[0].1, "pi increased");
        if (w[1].0 / rs).powi(2) - (w[0].0 / rs).powi(2) > 1e-12 {
            ensure!(w[1].1 < w[0].1, "pi not decreasing: r {} -> {}, pi {} -> {}", w[0].0, w[1].0, w[0].1, w[1].1);
        }
        ensure!(w[0].1 > 0.0 && w[0].1 <= 1.0, "pi out of (0,1]");
    }
    Ok(())
}

/// The retained pool does not depend on the order measurements arrive in.
pub fn prefilter_order_invariant(seed: u64) -> Check {
    let sc = scene(geometry(seed), 50, 0.2, 0.01, seed);
    let mut m = sc.measurements();
    let g1 = ViewingGraph::build(sc.locations.len(), &m).map_err(|e| e.to_string())?;
    CounterRng::new(seed, Stream::Theory).shuffle(&mut m);
    // Reverse half the pairs: (j, i, -d) is the same measurement.
    for (k, item) in m.iter_mut().enumerate() {
        if k % 2 == 1 {
            *item = (item.1, item.0, vec3::neg(item.2));
        }
    }
    let g2 = ViewingGraph::build(sc.locations.len(), &m).map_err(|e| e.to_string())?;
    let p = PrefilterParams::default();
    let a = prefilter_triangles(&g1, &enumerate_triangles(&g1), &p).map_err(|e| e.to_string())?;
    let b = prefilter_triangles(&g2, &enumerate_triangles(&g2), &p).map_err(|e| e.to_string())?;
    // Edge ordinals follow input order, so compare by camera ids.
    let canon = |g: &ViewingGraphF64, pool: &trip::TrianglePoolF64| {
        let recs: Vec<_> = pool.records.iter().map(|r| (r.tri.nodes, r.h, r.r, r.pi, r.in_fiber)).collect();
        let mut fibers: Vec<_> = pool
            .fibers
            .iter()
            .enumerate()
            .map(|(e, f)| {
                let m = g.edge(e);
                ((m.i, m.j), f.iter().map(|&t| pool.records[t].tri.nodes).collect::<Vec<_>>())
            })
            .collect();
        fibers.sort();
        (recs, fibers)
    };
    ensure!(canon(&g1, &a) == canon(&g2, &b), "pool changed under input permutation");
    Ok(())
}

// ---------------------------------------------------------------- scalesync

struct SyncInstance {
    scene: SyntheticScene,
    g: ViewingGraphF64,
    pool: trip::TrianglePoolF64,
    constraints: Vec<trip::ScaleConstraintF64>,
    z0: Vec<f64>,
}

fn sync_instance(sc: SyntheticScene, params: &PrefilterParams) -> Result<SyncInstance, String> {
    let g = sc.viewing_graph().map_err(|e| e.to_string())?;
    let pool = prefilter_triangles(&g, &enumerate_triangles(&g), params).map_err(|e| e.to_string())?;
    let constraints = build_constraint_graph(&pool);
    let z0 = spanning_tree_init(&constraints, &pool);
    Ok(SyncInstance { scene: sc, g, pool, constraints, z0 })
}

/// Shifting every log-scale by `alpha` leaves residuals and scores unchanged.
pub fn sync_gauge_invariance(seed: u64, alpha: f64) -> Check {
    let inst = sync_instance(scene(geometry(seed), 50, 0.3, 0.0, seed), &PrefilterParams::default())?;
    let sol = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &LossSpec::default(), &SyncOptions::default())
        .map_err(|e| e.to_string())?;
    let shifted: Vec<f64> = sol.z.iter().map(|z| z + alpha).collect();
    for (c, &r) in inst.constraints.iter().zip(&sol.residuals) {
        ensure!((c.residual(&shifted).abs() - r).abs() <= 1e-9 * (1.0 + alpha.abs()), "residual moved with gauge");
    }
    let a = incident_residual_scores(&sol.z, &inst.constraints);
    let b = incident_residual_scores(&shifted, &inst.constraints);
    for (x, y) in a.iter().zip(&b) {
        ensure!(x == y || (x - y).abs() <= 1e-9 * (1.0 + alpha.abs()), "bar_r moved with gauge: {x} vs {y}");
    }
    Ok(())
}

/// Exact-mode fixed-Cauchy IRLS never increases the robust objective.
pub fn sync_objective_monotone(seed: u64, q: f64) -> Check {
    let inst = sync_instance(scene(geometry(seed), 60, q, 0.0, seed), &PrefilterParams::default())?;
    let opts = SyncOptions { pcg_rel_tol: 1e-13, ..SyncOptions::default() };
    let sol = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &LossSpec::default(), &opts)
        .map_err(|e| e.to_string())?;
    non_increasing(&sol.objective)
}

/// On noiseless clean scenes the residuals vanish and `exp(z) h` gives the
/// true lengths up to one global scale.
pub fn sync_clean_exact(seed: u64, mode: SolverMode) -> Check {
    let inst = sync_instance(scene(geometry(seed), 50, 0.0, 0.0, seed), &PrefilterParams::default())?;
    let opts = SyncOptions { solver: mode, max_inner: 2000, ..SyncOptions::default() };
    let sol = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &LossSpec::default(), &opts)
        .map_err(|e| e.to_string())?;
    let worst = sol.residuals.iter().copied().fold(0.0, f64::max);
    ensure!(worst <= 1e-9, "clean residual {worst:e}");
    let mut ratios = Vec::new();
    for (t, rec) in inst.pool.records.iter().enumerate() {
        for slot in 0..3 {
            let e = inst.g.edge(rec.tri.edges[slot]);
            let truth = vec3::dist(inst.scene.locations[e.i], inst.scene.locations[e.j]);
            ratios.push(sol.z[t].exp() * rec.h[slot] / truth);
        }
    }
    ensure!(rel_spread(&ratios) <= 1e-6, "length ratios spread {:e}", rel_spread(&ratios));
    Ok(())
}

fn gauge_aligned_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / 2.0
}

/// Swapping the roles of every constraint's triangles changes nothing.
pub fn sync_antisymmetry(seed: u64) -> Check {
    let inst = sync_instance(scene(geometry(seed), 50, 0.2, 0.0, seed), &PrefilterParams::default())?;
    let swapped: Vec<_> = inst.constraints.iter().map(|c| c.swapped()).collect();
    let opts = SyncOptions { pcg_rel_tol: 1e-13, ..SyncOptions::default() };
    let spec = LossSpec::default();
    let a = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &spec, &opts).map_err(|e| e.to_string())?;
    let b = synchronize_scales(&swapped, inst.pool.len(), &inst.z0, &spec, &opts).map_err(|e| e.to_string())?;
    let d = gauge_aligned_diff(&a.z, &b.z);
    ensure!(d <= 1e-8, "swapped constraints moved z by {d:e}");
    Ok(())
}

/// Largest gauge-aligned log-scale gap between the two backends on a clean
/// scene, with the triangle count.
pub fn fast_exact_gap(seed: u64, n: usize) -> Result<(f64, usize), String> {
    let inst = sync_instance(scene(geometry(seed), n, 0.0, 0.0, seed), &PrefilterParams::default())?;
    let spec = LossSpec::default();
    let exact = SyncOptions::default();
    let fast = SyncOptions { solver: SolverMode::Fast, ..SyncOptions::default() };
    let a = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &spec, &exact).map_err(|e| e.to_string())?;
    let b = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &spec, &fast).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for comp in 0..=a.component.iter().copied().max().unwrap_or(0) {
        let members: Vec<usize> = (0..a.z.len()).filter(|&t| a.component[t] == comp).collect();
        let za: Vec<f64> = members.iter().map(|&t| a.z[t]).collect();
        let zb: Vec<f64> = members.iter().map(|&t| b.z[t]).collect();
        worst = worst.max(gauge_aligned_diff(&za, &zb));
    }
    Ok((worst, inst.pool.len()))
}

pub fn sync_fast_matches_exact(seed: u64, n: usize) -> Check {
    let (gap, tris) = fast_exact_gap(seed, n)?;
    ensure!(tris <= 200, "instance has {tris} triangles");
    ensure!(gap <= 1e-5, "fast/exact gap {gap:e} on {tris} triangles");
    Ok(())
}

// ------------------------------------------------------------- edgeestimate

/// Coverage of the prefix `order[..k]`, recomputed from scratch.
fn prefix_coverage(pool: &trip::TrianglePoolF64, order: &[usize], g: &ViewingGraphF64, min_support: usize) -> f64 {
    let mut support = vec![0usize; g.edge_count()];
    let mut uf = UnionFind::new(g.node_count());
    for &t in order {
        let rec = &pool.records[t];
        for slot in 0..3 {
            if rec.in_fiber[slot] {
                support[rec.tri.edges[slot]] += 1;
            }
        }
    }
    for (e, &s) in support.iter().enumerate() {
        if s >= min_support {
            uf.union(g.edge(e).i, g.edge(e).j);
        }
    }
    let best = (0..g.node_count()).map(|v| uf.set_size(v)).max().unwrap_or(0);
    best as f64 / g.node_count() as f64
}

/// Coverage grows with the prefix and the returned `k` is the smallest one
/// reaching the target (or the best achievable coverage).
pub fn selection_minimal(seed: u64, gamma: f64, min_support: usize) -> Check {
    let inst = sync_instance(scene(geometry(seed), 30, 0.2, 0.0, seed), &PrefilterParams::default())?;
    let sol = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &LossSpec::default(), &SyncOptions::default())
        .map_err(|e| e.to_string())?;
    let params = SelectionParams { gamma, min_support };
    let st = select_triangle_prefix(&inst.pool, &sol.bar_r, None, &inst.g, &params).map_err(|e| e.to_string())?;
    let cov: Vec<f64> = (0..=st.order.len())
        .map(|k| prefix_coverage(&inst.pool, &st.order[..k], &inst.g, min_support))
        .collect();
    for w in cov.windows(2) {
        ensure!(w[1] >= w[0], "coverage decreased along the prefix");
    }
    ensure!((cov[st.k] - st.coverage).abs() < 1e-12, "reported coverage {} vs recomputed {}", st.coverage, cov[st.k]);
    let n = inst.g.node_count() as f64;
    let need = (gamma * n - 1e-9).ceil() / n;
    let best = cov.last().copied().unwrap_or(0.0);
    let goal = if best >= need { need } else { best };
    let first = cov.iter().position(|&c| c >= goal - 1e-12).unwrap();
    ensure!(st.k == first, "k = {} but the smallest prefix reaching {goal} is {first}", st.k);
    ensure!(st.shortfall == (best < need), "shortfall flag wrong");
    Ok(())
}

/// Noiseless scenes with full coverage: every estimate is the true length
/// times one constant.
pub fn clean_lengths_exact(seed: u64) -> Check {
    let sc = scene(geometry(seed), 60, 0.0, 0.0, seed);
    let g = sc.viewing_graph().map_err(|e| e.to_string())?;
    let out = run_pipeline(&g, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    ensure!(out.coverage.achieved == 1.0, "coverage {}", out.coverage.achieved);
    let ratios: Vec<f64> = out
        .edge_estimates
        .iter()
        .map(|e| {
            let m = g.edge(e.edge);
            e.length / vec3::dist(sc.locations[m.i], sc.locations[m.j])
        })
        .collect();
    ensure!(rel_spread(&ratios) <= 1e-6, "length spread {:e}", rel_spread(&ratios));
    Ok(())
}

/// Weight range, zero-dispersion limit and permutation invariance of the
/// proposal summary.
pub fn proposal_summary_laws(proposals: &[f64], perm_seed: u64) -> Check {
    let e = summarize_proposals(0, proposals.to_vec()).ok_or("empty proposals")?;
    ensure!(e.weight > 0.0 && e.weight < 1.0, "weight {} outside (0,1)", e.weight);
    let mut sorted = proposals.to_vec();
    sorted.sort_by(f64::total_cmp);
    ensure!(e.length == sorted[(sorted.len() - 1) / 2], "length is not the lower median");
    let mut shuffled = proposals.to_vec();
    CounterRng::new(perm_seed, Stream::Theory).shuffle(&mut shuffled);
    let f = summarize_proposals(0, shuffled).unwrap();
    ensure!(
        (e.length, e.dispersion, e.weight) == (f.length, f.dispersion, f.weight),
        "summary depends on proposal order"
    );
    let m = proposals.len() as f64;
    let same = summarize_proposals(0, vec![proposals[0]; proposals.len()]).unwrap();
    ensure!(same.dispersion == 0.0 && (same.weight - m / (m + 1.0)).abs() < 1e-15, "zero-dispersion weight");
    Ok(())
}

// ---------------------------------------------------------------- locrecover

/// Estimates from a full pipeline run plus the graph they index.
fn location_inputs(seed: u64, q: f64) -> Result<(SyntheticScene, ViewingGraphF64, Vec<EdgeLengthEstimateF64>), String> {
    let sc = scene(geometry(seed), 60, q, 0.0, seed);
    let g = sc.viewing_graph().map_err(|e| e.to_string())?;
    let out = run_pipeline(&g, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    Ok((sc, g, out.edge_estimates))
}

fn tight_location_opts() -> LocationOptions {
    LocationOptions { pcg_rel_tol: 1e-13, tol: 1e-11, max_outer: 300, ..LocationOptions::default() }
}

fn max_gap(a: &[Vec3<f64>], b: &[Vec3<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, q)| vec3::dist(*p, *q)).fold(0.0, f64::max)
}

pub fn location_laws(seed: u64, q: f64, axis: [f64; 3], angle: f64, s: f64) -> Check {
    let (sc, g, est) = location_inputs(seed, q)?;
    let opts = tight_location_opts();
    let base = recover_locations(&g, &est, &opts).map_err(|e| e.to_string())?;
    let extent = base.positions.iter().map(|p| vec3::norm(*p)).fold(0.0, f64::max);

    // Gauge: zero mean.
    let mut mean = [0.0; 3];
    for p in &base.positions {
        mean = vec3::add(mean, *p);
    }
    let mean = vec3::scale(mean, 1.0 / base.positions.len() as f64);
    ensure!(vec3::norm(mean) <= 1e-12 * extent.max(1.0), "output mean {:e}", vec3::norm(mean));
    // No collapse.
    ensure!(extent > 0.0, "collapsed output");
    non_increasing(&base.objective)?;

    // Rotation equivariance.
    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
    let apply = |v: Vec3<f64>| {
        let r = rot * Vector3::from(v);
        [r.x, r.y, r.z]
    };
    let rotated: Vec<_> = sc.measurements().into_iter().map(|(i, j, d)| (i, j, apply(d))).collect();
    let g_rot = ViewingGraph::build(g.node_count(), &rotated).map_err(|e| e.to_string())?;
    let out_rot = recover_locations(&g_rot, &est, &opts).map_err(|e| e.to_string())?;
    ensure!(out_rot.nodes == base.nodes, "node set changed under rotation");
    let expect: Vec<_> = base.positions.iter().map(|&p| apply(p)).collect();
    let gap = max_gap(&out_rot.positions, &expect);
    ensure!(gap <= 1e-6 * extent, "rotation equivariance gap {gap:e}");

    // Scale covariance.
    let scaled: Vec<_> = est
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.length *= s;
            e.proposals.iter_mut().for_each(|p| *p *= s);
            e
        })
        .collect();
    let out_s = recover_locations(&g, &scaled, &opts).map_err(|e| e.to_string())?;
    let expect: Vec<_> = base.positions.iter().map(|&p| vec3::scale(p, s)).collect();
    let gap = max_gap(&out_s.positions, &expect);
    ensure!(gap <= 1e-6 * extent * s, "scale covariance gap {gap:e}");
    Ok(())
}

// ---------------------------------------------------------------- synthgen

pub fn scene_laws(geometry: Geometry, n: usize, q: f64, seed: u64) -> Check {
    let cfg = SceneConfig { geometry, n, q, seed, ..SceneConfig::default() };
    let a = generate_scene(&cfg).map_err(|e| e.to_string())?;
    let b = generate_scene(&cfg).map_err(|e| e.to_string())?;
    ensure!(a == b, "scene is not a pure function of its configuration");

    let total = a.edges.len() as f64;
    let bad = a.corrupt_count() as f64;
    ensure!((bad - q * total).abs() <= 1.0, "{bad} corrupt edges, target {}", q * total);

    let g = a.viewing_graph().map_err(|e| e.to_string())?;
    let idx = enumerate_triangles(&g);
    let mut witnessed = vec![false; a.edges.len()];
    for tri in &idx.triangles {
        if tri.edges.iter().all(|&e| !a.edges[e].corrupt) {
            for &e in &tri.edges {
                witnessed[e] = true;
            }
        }
    }
    for (e, edge) in a.edges.iter().enumerate() {
        ensure!(edge.corrupt || witnessed[e], "clean edge ({}, {}) has no clean triangle", edge.i, edge.j);
    }
    Ok(())
}

// ---------------------------------------------------------------- evaluation

/// Errors are unchanged when the estimate is first moved by a similarity.
pub fn alignment_absorbs_similarity(seed: u64, axis: [f64; 3], angle: f64, s: f64, t: [f64; 3]) -> Check {
    let sc = scene(geometry(seed), 40, 0.0, 0.0, seed);
    let gt = ground_truth(&sc);
    let mut rng = CounterRng::new(seed, Stream::Noise);
    let est: PointSet = gt
        .iter()
        .map(|(&v, &p)| (v, vec3::add(p, [0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal()])))
        .collect();
    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
    let moved: PointSet = est
        .iter()
        .map(|(&v, &p)| {
            let r = rot * Vector3::from(p) * s;
            (v, [r.x + t[0], r.y + t[1], r.z + t[2]])
        })
        .collect();
    let a = compute_error_report(&est, &gt, None, None, None).map_err(|e| e.to_string())?;
    let b = compute_error_report(&moved, &gt, None, None, None).map_err(|e| e.to_string())?;
    ensure!(a.nodes == b.nodes, "node sets differ");
    for (x, y) in a.errors.iter().zip(&b.errors) {
        ensure!((x - y).abs() <= 1e-9, "error changed {x} -> {y}");
    }
    let orth = b.transform.orthogonality_error();
    ensure!(orth <= 1e-10 && b.transform.s > 0.0, "transform not a similarity ({orth:e})");
    Ok(())
}

/// Lower median, mean, nearest-rank p90 and max, independent of order.
pub fn statistic_conventions(values: &[f64], perm_seed: u64) -> Check {
    let st = statistics(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    ensure!(st.median == sorted[(m - 1) / 2], "median is not the lower median");
    let rank = ((0.9 * m as f64).ceil() as usize).clamp(1, m);
    ensure!(st.p90 == sorted[rank - 1], "p90 is not nearest-rank");
    ensure!(nearest_rank(&sorted, 0.9) == st.p90, "nearest_rank disagrees");
    ensure!(st.max == sorted[m - 1], "max");
    let mean = values.iter().sum::<f64>() / m as f64;
    ensure!((st.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0), "mean");
    ensure!(lower_median(values) == Some(st.median), "lower_median disagrees");
    let mut shuffled = values.to_vec();
    CounterRng::new(perm_seed, Stream::Theory).shuffle(&mut shuffled);
    ensure!(statistics(&shuffled) == st, "statistics depend on order");
    Ok(())
}

/// Error reports do not depend on the order nodes are listed in.
pub fn report_permutation_invariant(seed: u64) -> Check {
    let sc = scene(geometry(seed), 40, 0.0, 0.0, seed);
    let gt = ground_truth(&sc);
    let mut rng = CounterRng::new(seed, Stream::Noise);
    let est: PointSet = gt.iter().map(|(&v, &p)| (v, vec3::add(p, [0.1 * rng.normal(), 0.0, 0.1 * rng.normal()]))).collect();
    let mut nodes: Vec<usize> = gt.keys().copied().collect();
    let a = compute_error_report(&est, &gt, Some(&nodes), None, None).map_err(|e| e.to_string())?;
    CounterRng::new(seed, Stream::Theory).shuffle(&mut nodes);
    let b = compute_error_report(&est, &gt, Some(&nodes), None, None).map_err(|e| e.to_string())?;
    ensure!(a == b, "report depends on node order");
    Ok(())
}

// ---------------------------------------------------------------- io

pub fn file_round_trips(seed: u64) -> Check {
    let sc = scene(geometry(seed), 30, 0.3, 0.01, seed);
    let m = sc.measurements();
    let back = io::parse_measurements(&io::format_measurements(&m), "m").map_err(|e| e.to_string())?;
    ensure!(back == m, "measurements round-trip");
    let p = ground_truth(&sc);
    let back = io::parse_points(&io::format_points(&p), "p").map_err(|e| e.to_string())?;
    ensure!(back == p, "points round-trip");
    let l: Vec<_> = sc.edges.iter().map(|e| (e.i, e.j, e.corrupt)).collect();
    let back = io::parse_labels(&io::format_labels(&l), "l").map_err(|e| e.to_string())?;
    ensure!(back == l, "labels round-trip");
    let nodes: Vec<usize> = (0..sc.locations.len()).filter(|v| v % 3 != 1).collect();
    let back = io::parse_node_set(&io::format_node_set(&nodes), "s").map_err(|e| e.to_string())?;
    ensure!(back == nodes, "node set round-trip");

    // Reports embed the resolved configuration and the version.
    let cfg = PipelineConfig { seed, ..PipelineConfig::default() };
    let report = Report::new(cfg.clone());
    let json = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    ensure!(keys == ["config", "coverage", "errors", "stages", "timings"], "report keys {keys:?}");
    ensure!(json["config"]["version"] == trip::VERSION, "version missing");
    let back: Report<PipelineConfig> = serde_json::from_value(json).map_err(|e| e.to_string())?;
    ensure!(back == report, "report round-trip");
    Ok(())
}

// ---------------------------------------------------------------- theory

pub fn level_identities(n: i128) -> Check {
    let sizes = level_sizes(n as u64);
    let g = closed_form_levels_exact(n);
    let total: Rational = sizes.iter().zip(&g).map(|(&s, &v)| Rational::from_integer(s as i128) * v).sum();
    ensure!(total == Rational::from_integer(0), "zero-mean identity fails for n = {n}");
    let choose = (n * (n - 1) * (n - 2) / 6) as u64;
    ensure!(sizes.iter().sum::<u64>() == choose, "partition identity fails for n = {n}");
    let gf: Vec<f64> = g.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect();
    let total_f: f64 = sizes.iter().zip(&gf).map(|(&s, v)| s as f64 * v).sum();
    ensure!(total_f.abs() <= 1e-12, "floating zero-mean residual {total_f:e}");
    Ok(())
}

/// On clean complete graphs the annealed and fixed-Cauchy solutions agree.
pub fn annealed_matches_fixed_on_clean(n: usize, seed: u64) -> Check {
    let sc = trip::synthgen::complete_graph_scene(n, &[], seed).map_err(|e| e.to_string())?;
    let inst = sync_instance(sc, &PrefilterParams::full())?;
    let opts = SyncOptions::default();
    let fixed = synchronize_scales(&inst.constraints, inst.pool.len(), &inst.z0, &LossSpec::default(), &opts)
        .map_err(|e| e.to_string())?;
    let spec = LossSpec::annealed(LossFamily::Cauchy, 0.5, 10);
    let annealed = annealed_synchronize(&inst.constraints, inst.pool.len(), &inst.z0, &spec, &opts, |_| {})
        .map_err(|e| e.to_string())?;
    let d = gauge_aligned_diff(&fixed.z, &annealed.z);
    ensure!(d <= 1e-8, "annealed vs fixed gap {d:e}");
    Ok(())
}

/// Runs every invariant once on fixed inputs; returns failures by name.
pub fn fixed_invariant_sweep() -> BTreeMap<&'static str, Check> {
    let mut out = BTreeMap::new();
    let all = |f: &dyn Fn(u64) -> Check| (0..3).try_for_each(f);
    out.insert("enumeration", all(&|s| enumeration_matches_brute_force(12 + 6 * s as usize, 0.4, s)));
    out.insert("noiseless closure", all(&noiseless_closure));
    out.insert("reliability monotone", all(&reliability_monotone));
    out.insert("prefilter order", all(&prefilter_order_invariant));
    out.insert("sync gauge", all(&|s| sync_gauge_invariance(s, 3.7)));
    out.insert("sync objective", all(&|s| sync_objective_monotone(s, 0.3)));
    out.insert("sync clean", all(&|s| sync_clean_exact(s, SolverMode::Exact)));
    out.insert("sync antisymmetry", all(&sync_antisymmetry));
    out.insert("selection minimal", all(&|s| selection_minimal(s, 0.9, 1 + s as usize)));
    out.insert("clean lengths", all(&clean_lengths_exact));
    out.insert("proposal summary", all(&|s| proposal_summary_laws(&[1.0, 1.3, 0.7, 2.0 + s as f64, 1.1], s)));
    out.insert("location laws", all(&|s| location_laws(s, 0.2, [1.0, 2.0, -0.5], 0.9, 3.5)));
    out.insert("scene laws", all(&|s| scene_laws(geometry(s), 80, 0.3, s)));
    out.insert("alignment", all(&|s| alignment_absorbs_similarity(s, [0.3, -1.0, 0.2], 2.0, 0.4, [5.0, -1.0, 2.0])));
    out.insert("statistics", all(&|s| statistic_conventions(&[0.3, 0.1, 0.7, 0.7, 0.2, 1.5, s as f64], s)));
    out.insert("report order", all(&report_permutation_invariant));
    out.insert("round trips", all(&file_round_trips));
    out.insert("level identities", (6..=14).try_for_each(level_identities));
    out.insert("annealed vs fixed", annealed_matches_fixed_on_clean(10, 0));
    out
}
