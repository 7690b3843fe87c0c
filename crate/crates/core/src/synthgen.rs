//! Structured synthetic benchmarks: grid and torus camera layouts, symmetric
//! kNN viewing graphs with clean-triangle witnesses, tangent-plane direction
//! noise, and coherent corruption from a shared wrong planar layout.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::graph::Components;
use crate::rng::{CounterRng, Stream};
use crate::vec3::{self, Vec3};
use crate::viewgraph::ViewingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Grid,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionModel {
    /// Corrupted edges spread over local non-clean kNN pairs and far pairs.
    Uniform,
    /// Corrupted edges incident to a small set of bad cameras.
    Clustered,
}

impl std::str::FromStr for Geometry {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "grid" => Ok(Self::Grid),
            "torus" => Ok(Self::Torus),
            o => Err(format!("unknown geometry `{o}` (expected grid|torus)")),
        }
    }
}

impl std::str::FromStr for CorruptionModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "clustered" => Ok(Self::Clustered),
            o => Err(format!("unknown corruption model `{o}` (expected uniform|clustered)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub geometry: Geometry,
    pub n: usize,
    pub k_good: usize,
    /// Target fraction of corrupted edges among all edges.
    pub q: f64,
    /// Tangent-plane noise level on clean directions.
    pub sigma: f64,
    pub model: CorruptionModel,
    pub seed: u64,
    pub grid_spacing: f64,
    /// Half-width of the uniform vertical jitter on the grid.
    pub grid_z_jitter: f64,
    pub torus_major: f64,
    pub torus_minor: f64,
    /// Azimuth jitter as a fraction of the azimuth spacing.
    pub torus_angle_jitter: f64,
    /// Fraction of cameras marked bad in the clustered model.
    pub bad_node_fraction: f64,
    /// Share of far-range pairs among uniform-model corruptions.
    pub far_share: f64,
    /// Distance percentile above which a pair counts as far-range.
    pub far_percentile: f64,
    /// Local corruption candidates come from the `local_k_factor * k_good`
    /// nearest neighbors.
    pub local_k_factor: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::Grid,
            n: 100,
            k_good: 8,
            q: 0.0,
            sigma: 0.0,
            model: CorruptionModel::Uniform,
            seed: 0,
            grid_spacing: 1.0,
            grid_z_jitter: 0.05,
            torus_major: 2.0,
            torus_minor: 0.5,
            torus_angle_jitter: 0.25,
            bad_node_fraction: 0.1,
            far_share: 0.5,
            far_percentile: 0.8,
            local_k_factor: 3,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TripError::InvalidScene(m));
        if self.n < 4 {
            return bad(format!("need at least 4 cameras, got {}", self.n));
        }
        if self.k_good < 3 {
            return bad(format!("k_good must be at least 3, got {}", self.k_good));
        }
        if self.n < self.k_good + 1 {
            return bad(format!("n = {} is too small for k_good = {}", self.n, self.k_good));
        }
        if !(0.0..1.0).contains(&self.q) {
            return bad(format!("q must lie in [0, 1), got {}", self.q));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.far_share) || !(0.0..1.0).contains(&self.far_percentile) {
            return bad("far_share must lie in [0,1] and far_percentile in [0,1)".into());
        }
        if !(self.bad_node_fraction > 0.0 && self.bad_node_fraction <= 1.0) {
            return bad(format!("bad_node_fraction must lie in (0,1], got {}", self.bad_node_fraction));
        }
        if self.local_k_factor < 1 || !(self.grid_spacing > 0.0) || !(self.torus_major > self.torus_minor && self.torus_minor > 0.0) {
            return bad("invalid geometry parameters".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneEdge {
    pub i: usize,
    pub j: usize,
    pub corrupt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    /// Ground-truth camera centers.
    pub locations: Vec<Vec3<f64>>,
    /// Edges sorted by `(i, j)` with `i < j`.
    pub edges: Vec<SceneEdge>,
    /// Measured direction per edge, pointing from `j` toward `i`.
    pub directions: Vec<Vec3<f64>>,
    /// Wrong planar layout `(a_i, b_i, 0)` behind corrupted directions.
    pub layout: Vec<Vec3<f64>>,
}

impl SyntheticScene {
    pub fn corrupt_count(&self) -> usize {
        self.edges.iter().filter(|e| e.corrupt).count()
    }

    /// `(x_i - x_j) / |x_i - x_j|`.
    pub fn true_direction(&self, i: usize, j: usize) -> Vec3<f64> {
        vec3::normalize(vec3::sub(self.locations[i], self.locations[j])).expect("distinct cameras")
    }

    pub fn measurements(&self) -> Vec<(usize, usize, Vec3<f64>)> {
        self.edges
            .iter()
            .zip(&self.directions)
            .map(|(e, &d)| (e.i, e.j, d))
            .collect()
    }

    pub fn viewing_graph(&self) -> Result<ViewingGraph<f64>> {
        ViewingGraph::build(self.locations.len(), &self.measurements())
    }

    /// Maximum number of corrupted edges at any camera.
    pub fn corrupted_degree(&self) -> usize {
        let mut deg = vec![0usize; self.locations.len()];
        for e in self.edges.iter().filter(|e| e.corrupt) {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

fn locations(cfg: &SceneConfig) -> Vec<Vec3<f64>> {
    let mut rng = CounterRng::new(cfg.seed, Stream::Scene);
    match cfg.geometry {
        Geometry::Grid => {
            let side = (cfg.n as f64).sqrt().ceil() as usize;
            (0..cfg.n)
                .map(|i| {
                    let z = rng.uniform_in(-cfg.grid_z_jitter, cfg.grid_z_jitter);
                    [
                        (i % side) as f64 * cfg.grid_spacing,
                        (i / side) as f64 * cfg.grid_spacing,
                        z,
                    ]
                })
                .collect()
        }
        Geometry::Torus => {
            let step = std::f64::consts::TAU / cfg.n as f64;
            (0..cfg.n)
                .map(|i| {
                    let theta = step * (i as f64 + cfg.torus_angle_jitter * rng.uniform_in(-0.5, 0.5));
                    let phi = rng.uniform_in(0.0, std::f64::consts::TAU);
                    let rho = cfg.torus_major + cfg.torus_minor * phi.cos();
                    [rho * theta.cos(), rho * theta.sin(), cfg.torus_minor * phi.sin()]
                })
                .collect()
        }
    }
}

/// `k` nearest neighbors of every point (ties by index).
fn knn(points: &[Vec3<f64>], k: usize) -> Vec<Vec<usize>> {
    use rayon::prelude::*;
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (vec3::dist(points[i], points[j]), j))
                .collect();
            let k = k.min(cand.len());
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

struct CleanGraph<'a> {
    pts: &'a [Vec3<f64>],
    edges: HashSet<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl<'a> CleanGraph<'a> {
    fn add(&mut self, a: usize, b: usize) -> bool {
        if a == b || !self.edges.insert(key(a, b)) {
            return false;
        }
        self.adj[a].push(b);
        self.adj[b].push(a);
        true
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&key(a, b))
    }

    fn has_witness(&self, a: usize, b: usize) -> bool {
        let (s, l) = if self.adj[a].len() <= self.adj[b].len() { (a, b) } else { (b, a) };
        self.adj[s].iter().any(|&k| k != l && self.has(k, l))
    }

    /// Adds the cheapest apex (by `d(a,k) + d(b,k)`) among the neighbors of
    /// either endpoint, closing a clean triangle on `(a, b)`.
    fn add_witness(&mut self, a: usize, b: usize, near: &[Vec<usize>]) {
        let mut best: Option<(f64, usize)> = None;
        for &k in near[a].iter().chain(&near[b]).chain(&self.adj[a]).chain(&self.adj[b]) {
            if k == a || k == b {
                continue;
            }
            let c = vec3::dist(self.pts[a], self.pts[k]) + vec3::dist(self.pts[b], self.pts[k]);
            if best.map_or(true, |(bc, bk)| c < bc || (c == bc && k < bk)) {
                best = Some((c, k));
            }
        }
        if let Some((_, k)) = best {
            self.add(a, k);
            self.add(b, k);
        }
    }
}

/// Clean symmetric kNN graph, repaired for connectivity and witnesses.
fn clean_edges(pts: &[Vec3<f64>], k_good: usize, near: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let n = pts.len();
    let mut g = CleanGraph { pts, edges: HashSet::new(), adj: vec![Vec::new(); n] };
    for (i, list) in near.iter().enumerate() {
        for &j in list.iter().take(k_good) {
            g.add(i, j);
        }
    }
    loop {
        let comps = Components::from_edges(n, g.edges.iter().copied());
        if comps.count() == 1 {
            break;
        }
        // Join the smallest component to the rest by its shortest outgoing pair.
        let members = comps.members();
        let small = (0..members.len()).min_by_key(|&c| (members[c].len(), c)).unwrap();
        let mut best: Option<(f64, usize, usize)> = None;
        for &a in &members[small] {
            for b in 0..n {
                if comps.label[b] == small {
                    continue;
                }
                let d = vec3::dist(pts[a], pts[b]);
                if best.map_or(true, |(bd, ba, bb)| d < bd || (d == bd && (a, b) < (ba, bb))) {
                    best = Some((d, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        g.add(a, b);
    }
    loop {
        let mut sorted: Vec<(usize, usize)> = g.edges.iter().copied().collect();
        sorted.sort_unstable();
        let mut changed = false;
        for (a, b) in sorted {
            if !g.has_witness(a, b) {
                g.add_witness(a, b, near);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<(usize, usize)> = g.edges.into_iter().collect();
    out.sort_unstable();
    out
}

fn far_threshold(pts: &[Vec3<f64>], percentile: f64, rng: &mut CounterRng) -> f64 {
    let n = pts.len();
    let total = n * (n - 1) / 2;
    let mut d: Vec<f64> = if total <= 500_000 {
        let mut v = Vec::with_capacity(total);
        for i in 0..n {
            for j in i + 1..n {
                v.push(vec3::dist(pts[i], pts[j]));
            }
        }
        v
    } else {
        (0..200_000)
            .map(|_| {
                let i = rng.below(n);
                let mut j = rng.below(n - 1);
                if j >= i {
                    j += 1;
                }
                vec3::dist(pts[i], pts[j])
            })
            .collect()
    };
    d.sort_by(f64::total_cmp);
    let rank = ((percentile * d.len() as f64).ceil() as usize).clamp(1, d.len());
    d[rank - 1]
}

fn corrupted_edges(
    cfg: &SceneConfig,
    pts: &[Vec3<f64>],
    near: &[Vec<usize>],
    clean: &[(usize, usize)],
) -> Result<Vec<(usize, usize)>> {
    let target = (cfg.q * clean.len() as f64 / (1.0 - cfg.q)).round() as usize;
    if target == 0 {
        return Ok(Vec::new());
    }
    let n = pts.len();
    let mut rng = CounterRng::new(cfg.seed, Stream::Corruption);
    let mut taken: HashSet<(usize, usize)> = clean.iter().copied().collect();
    let mut out = Vec::with_capacity(target);
    match cfg.model {
        CorruptionModel::Uniform => {
            let mut local: Vec<(usize, usize)> = near
                .iter()
                .enumerate()
                .flat_map(|(i, list)| list.iter().map(move |&j| key(i, j)))
                .filter(|p| !taken.contains(p))
                .collect();
            local.sort_unstable();
            local.dedup();
            rng.shuffle(&mut local);
            let want_local = ((1.0 - cfg.far_share) * target as f64).round() as usize;
            for p in local.into_iter().take(want_local.min(target)) {
                taken.insert(p);
                out.push(p);
            }
            let threshold = far_threshold(pts, cfg.far_percentile, &mut rng);
            let mut attempts = 0usize;
            while out.len() < target {
                attempts += 1;
                if attempts > 1000 * target + 100_000 {
                    return Err(TripError::InvalidScene(format!(
                        "could not place {target} corrupted edges (placed {})",
                        out.len()
                    )));
                }
                let i = rng.below(n);
                let j = rng.below(n);
                let p = key(i, j);
                if i == j || taken.contains(&p) || vec3::dist(pts[i], pts[j]) <= threshold {
                    continue;
                }
                taken.insert(p);
                out.push(p);
            }
        }
        CorruptionModel::Clustered => {
            let mut nodes: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut nodes);
            let mut bad_count = ((cfg.bad_node_fraction * n as f64).ceil() as usize).clamp(1, n);
            loop {
                let bad = &nodes[..bad_count];
                let mut cand: Vec<(usize, usize)> = bad
                    .iter()
                    .flat_map(|&b| (0..n).filter(move |&v| v != b).map(move |v| key(b, v)))
                    .filter(|p| !taken.contains(p))
                    .collect();
                cand.sort_unstable();
                cand.dedup();
                if cand.len() >= target {
                    rng.shuffle(&mut cand);
                    out.extend(cand.into_iter().take(target));
                    break;
                }
                if bad_count == n {
                    return Err(TripError::InvalidScene(format!("cannot place {target} corrupted edges")));
                }
                bad_count += 1;
            }
            for &p in &out {
                taken.insert(p);
            }
        }
    }
    Ok(out)
}

/// Builds the ground truth, the labelled edge set and the measured directions.
pub fn generate_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let pts = locations(cfg);
    let near = knn(&pts, cfg.k_good * cfg.local_k_factor);
    let clean = clean_edges(&pts, cfg.k_good, &near);
    let bad = corrupted_edges(cfg, &pts, &near, &clean)?;
    let mut edges: Vec<SceneEdge> = clean
        .iter()
        .map(|&(i, j)| SceneEdge { i, j, corrupt: false })
        .chain(bad.iter().map(|&(i, j)| SceneEdge { i, j, corrupt: true }))
        .collect();
    edges.sort_unstable_by_key(|e| (e.i, e.j));

    let mut layout_rng = CounterRng::new(cfg.seed, Stream::Layout);
    let layout: Vec<Vec3<f64>> = (0..cfg.n)
        .map(|_| {
            let a = layout_rng.normal();
            let b = layout_rng.normal();
            [a, b, 0.0]
        })
        .collect();
    let mut scene = SyntheticScene {
        config: *cfg,
        locations: pts,
        edges,
        directions: Vec::new(),
        layout,
    };
    scene.directions = render_measurements(&mut scene, cfg);
    Ok(scene)
}

/// Orthonormal tangent basis of a unit vector, completed from the coordinate
/// axis least aligned with it.
pub fn tangent_basis(d: Vec3<f64>) -> (Vec3<f64>, Vec3<f64>) {
    let axis = (0..3)
        .min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()))
        .unwrap();
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let u = vec3::normalize(vec3::cross(d, e)).unwrap();
    let v = vec3::cross(d, u);
    (u, v)
}

/// Clean edges: `normalize(d* + sigma eps)` with `eps` a standard Gaussian
/// in the tangent plane of `d*`. Corrupted edges: direction between the
/// shared wrong layout points. Two noise normals are drawn for every edge in
/// order, whatever its label. A coincident layout pair (probability zero)
/// has its second point redrawn from the layout stream.
pub fn render_measurements(scene: &mut SyntheticScene, cfg: &SceneConfig) -> Vec<Vec3<f64>> {
    let mut noise = CounterRng::new(cfg.seed, Stream::Noise);
    let mut redraw = CounterRng::new(cfg.seed ^ 0x5EED, Stream::Layout);
    let mut out = Vec::with_capacity(scene.edges.len());
    for k in 0..scene.edges.len() {
        let SceneEdge { i, j, corrupt } = scene.edges[k];
        let (g1, g2) = (noise.normal(), noise.normal());
        if corrupt {
            while vec3::normalize(vec3::sub(scene.layout[i], scene.layout[j])).is_none() {
                scene.layout[j] = [redraw.normal(), redraw.normal(), 0.0];
            }
            out.push(vec3::normalize(vec3::sub(scene.layout[i], scene.layout[j])).unwrap());
        } else {
            let d = scene.true_direction(i, j);
            if cfg.sigma == 0.0 {
                out.push(d);
            } else {
                let (u, v) = tangent_basis(d);
                let eps = vec3::add(vec3::scale(u, g1), vec3::scale(v, g2));
                out.push(vec3::normalize(vec3::add(d, vec3::scale(eps, cfg.sigma))).unwrap());
            }
        }
    }
    out
}

/// Noiseless scene on the complete graph `K_n` with Gaussian camera centers.
/// The listed pairs get directions from the shared wrong layout.
pub fn complete_graph_scene(n: usize, corrupted: &[(usize, usize)], seed: u64) -> Result<SyntheticScene> {
    if n < 4 {
        return Err(TripError::InvalidScene(format!("need at least 4 cameras, got {n}")));
    }
    let mut rng = CounterRng::new(seed, Stream::Theory);
    let locations: Vec<Vec3<f64>> = (0..n).map(|_| [rng.normal(), rng.normal(), rng.normal()]).collect();
    let bad: HashSet<(usize, usize)> = corrupted.iter().map(|&(a, b)| key(a, b)).collect();
    if bad.iter().any(|&(a, b)| a == b || b >= n) {
        return Err(TripError::InvalidScene("corrupted pair out of range".into()));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push(SceneEdge { i, j, corrupt: bad.contains(&(i, j)) });
        }
    }
    let cfg = SceneConfig { n, k_good: 3, seed, ..Default::default() };
    let mut layout_rng = CounterRng::new(seed, Stream::Layout);
    let layout = (0..n).map(|_| [layout_rng.normal(), layout_rng.normal(), 0.0]).collect();
    let mut scene = SyntheticScene { config: cfg, locations, edges, directions: Vec::new(), layout };
    scene.directions = render_measurements(&mut scene, &cfg);
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_witnesses(scene: &SyntheticScene) {
        let clean: HashSet<(usize, usize)> = scene
            .edges
            .iter()
            .filter(|e| !e.corrupt)
            .map(|e| (e.i, e.j))
            .collect();
        let n = scene.locations.len();
        for &(i, j) in &clean {
            assert!(
                (0..n).any(|k| k != i && k != j && clean.contains(&key(i, k)) && clean.contains(&key(j, k))),
                "edge ({i},{j}) has no clean witness"
            );
        }
        let comps = Components::from_edges(n, clean.iter().copied());
        assert_eq!(comps.count(), 1);
    }

    #[test]
    fn small_grid_is_all_clean() {
        let cfg = SceneConfig { n: 9, k_good: 3, ..Default::default() };
        let s = generate_scene(&cfg).unwrap();
        assert_eq!(s.locations.len(), 9);
        assert_eq!(s.locations[4][0], 1.0);
        assert_eq!(s.locations[4][1], 1.0);
        assert_eq!(s.corrupt_count(), 0);
        check_witnesses(&s);
        for (e, d) in s.edges.iter().zip(&s.directions) {
            assert_eq!(*d, s.true_direction(e.i, e.j));
        }
    }

    #[test]
    fn corruption_fraction_and_planarity() {
        for (geometry, model) in [
            (Geometry::Grid, CorruptionModel::Uniform),
            (Geometry::Torus, CorruptionModel::Uniform),
            (Geometry::Grid, CorruptionModel::Clustered),
            (Geometry::Torus, CorruptionModel::Clustered),
        ] {
            for q in [0.0, 0.1, 0.4] {
                let cfg = SceneConfig { geometry, model, q, seed: 3, ..Default::default() };
                let s = generate_scene(&cfg).unwrap();
                check_witnesses(&s);
                let bad = s.corrupt_count() as f64;
                assert!((bad - q * s.edges.len() as f64).abs() <= 1.0, "{geometry:?} {model:?} {q}");
                for (e, d) in s.edges.iter().zip(&s.directions) {
                    assert!((vec3::norm(*d) - 1.0).abs() < 1e-12);
                    if e.corrupt {
                        assert_eq!(d[2], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SceneConfig { geometry: Geometry::Torus, q: 0.3, sigma: 0.01, seed: 11, ..Default::default() };
        let a = generate_scene(&cfg).unwrap();
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&SceneConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.locations, c.locations);
    }

    #[test]
    fn rejects_infeasible_configs() {
        assert!(generate_scene(&SceneConfig { n: 3, ..Default::default() }).is_err());
        assert!(generate_scene(&SceneConfig { n: 8, k_good: 8, ..Default::default() }).is_err());
        assert!(generate_scene(&SceneConfig { k_good: 2, ..Default::default() }).is_err());
        assert!(generate_scene(&SceneConfig { q: 1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn tangent_noise_matches_monte_carlo() {
        // For small sigma the angular error is sigma * |eps| with eps a 2D
        // standard Gaussian (Rayleigh), whose median is sigma * sqrt(2 ln 2).
        // The exact angle is atan(sigma |eps|).
        let sigma = 0.01;
        let d = vec3::normalize([0.3, -0.2, 0.9]).unwrap();
        let (u, v) = tangent_basis(d);
        assert!(vec3::dot(u, d).abs() < 1e-15 && vec3::dot(v, d).abs() < 1e-15);
        assert!((vec3::norm(u) - 1.0).abs() < 1e-15 && vec3::dot(u, v).abs() < 1e-15);
        let mut rng = CounterRng::new(0, Stream::Noise);
        let mut angles: Vec<f64> = (0..100_000)
            .map(|_| {
                let eps = vec3::add(vec3::scale(u, rng.normal()), vec3::scale(v, rng.normal()));
                let m = vec3::normalize(vec3::add(d, vec3::scale(eps, sigma))).unwrap();
                vec3::angle(m, d)
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        let median = angles[angles.len() / 2];
        let expected = (sigma * (2.0 * 2f64.ln()).sqrt()).atan();
        assert!((median / expected - 1.0).abs() < 0.02, "{median} vs {expected}");
        let mean = angles.iter().sum::<f64>() / angles.len() as f64;
        assert!((mean / (sigma * (std::f64::consts::PI / 2.0).sqrt()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn complete_graph_scene_labels() {
        let s = complete_graph_scene(6, &[(1, 0), (2, 5)], 1).unwrap();
        assert_eq!(s.edges.len(), 15);
        assert_eq!(s.corrupt_count(), 2);
        assert_eq!(s.corrupted_degree(), 1);
    }
}
