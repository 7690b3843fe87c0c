//! Log-scale synchronization on the shared-edge triangle graph.
//!
//! Each retained triangle `t` gets a log-scale `z_t`; two triangles sharing a
//! camera edge `e` must predict the same length, giving the additive
//! constraint `z_u - z_t ≈ log(h_{t,e} / h_{u,e})`. The robust problem
//! `min sum w0 rho(|z_u - z_t - g|)` is solved by IRLS with either a PCG or a
//! local-averaging inner solver.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TripError};
use crate::graph::{propagate_along_forest, spanning_forest, Components, SignedGraph};
use crate::loss::{LossFamily, LossSpec};
use crate::prefilter::TrianglePool;
use crate::scalar::Real;
use crate::solver::{averaging_solve, laplacian_rhs, pcg_solve, PcgOptions, SolverMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConstraint<T> {
    pub t: usize,
    pub u: usize,
    /// Shared camera edge.
    pub e: usize,
    /// `log(h_{t,e} / h_{u,e})`.
    pub g: T,
    /// `sqrt(pi_t pi_u)`.
    pub w0: T,
}

impl<T: Real> ScaleConstraint<T> {
    /// Signed residual `z_u - z_t - g`.
    #[inline]
    pub fn residual(&self, z: &[T]) -> T {
        z[self.u] - z[self.t] - self.g
    }

    /// The same constraint with the triangle roles exchanged.
    pub fn swapped(&self) -> Self {
        Self { t: self.u, u: self.t, e: self.e, g: -self.g, w0: self.w0 }
    }
}

/// One constraint per unordered pair of triangles co-resident in an edge
/// fiber, generated fiber by fiber in edge order.
pub fn build_constraint_graph<T: Real>(pool: &TrianglePool<T>) -> Vec<ScaleConstraint<T>> {
    let mut out = Vec::new();
    for (e, fiber) in pool.fibers.iter().enumerate() {
        for (a, &p) in fiber.iter().enumerate() {
            for &q in &fiber[a + 1..] {
                let (t, u) = if p < q { (p, q) } else { (q, p) };
                let (rt, ru) = (&pool.records[t], &pool.records[u]);
                let ht = rt.h[rt.side_of(e).expect("fiber member contains edge")];
                let hu = ru.h[ru.side_of(e).expect("fiber member contains edge")];
                out.push(ScaleConstraint {
                    t,
                    u,
                    e,
                    g: (ht / hu).ln(),
                    w0: (rt.pi * ru.pi).sqrt(),
                });
            }
        }
    }
    out
}

fn constraint_graph<T: Real>(constraints: &[ScaleConstraint<T>], n: usize) -> SignedGraph {
    SignedGraph::new(n, constraints.iter().map(|c| (c.t, c.u)).collect())
}

/// Spanning-forest initialization: Kruskal on cost `sqrt(r_t r_u)` (ties to
/// the smaller constraint ordinal), roots at the smallest triangle of each
/// component with `z = 0`, and exact propagation of `g` along tree edges.
pub fn spanning_tree_init<T: Real>(constraints: &[ScaleConstraint<T>], pool: &TrianglePool<T>) -> Vec<T> {
    let residual: Vec<T> = pool.records.iter().map(|r| r.r).collect();
    tree_init_with_residuals(constraints, &residual)
}

pub(crate) fn tree_init_with_residuals<T: Real>(constraints: &[ScaleConstraint<T>], residual: &[T]) -> Vec<T> {
    let graph = constraint_graph(constraints, residual.len());
    let cost: Vec<T> = constraints
        .iter()
        .map(|c| (residual[c.t] * residual[c.u]).sqrt())
        .collect();
    let mut order: Vec<usize> = (0..constraints.len()).collect();
    order.sort_by(|&a, &b| cost[a].partial_cmp(&cost[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let tree = spanning_forest(&graph, order);
    propagate_along_forest(&graph, &tree, T::zero(), |base, c, forward| {
        if forward {
            base + constraints[c].g
        } else {
            base - constraints[c].g
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncOptions {
    pub solver: SolverMode,
    pub max_outer: usize,
    /// Local-averaging sweeps per outer iteration (fast mode).
    pub max_inner: usize,
    /// Stop when the largest log-scale change falls below this.
    pub tol: f64,
    pub damping: f64,
    pub pcg_rel_tol: f64,
    /// Overrides the default `ceil(10 sqrt(n))` PCG iteration cap.
    pub pcg_max_iter: Option<usize>,
    /// Outer-iteration cap for annealing stages before the last; `None`
    /// runs every stage to `max_outer`. Capped stages only need to hand a
    /// good warm start to the next scale, so they do not count towards
    /// convergence.
    pub stage_max_outer: Option<usize>,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self {
            solver: SolverMode::Exact,
            max_outer: 50,
            max_inner: 100,
            tol: 1e-8,
            damping: 0.7,
            pcg_rel_tol: 1e-10,
            pcg_max_iter: None,
            stage_max_outer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSolution<T> {
    /// Per-triangle log-scale, mean-zero within each constraint component.
    pub z: Vec<T>,
    /// `|z_u - z_t - g|` per constraint.
    pub residuals: Vec<T>,
    /// Mean incident residual per triangle; `+inf` for unconstrained triangles.
    pub bar_r: Vec<T>,
    /// Constraint-graph component label per triangle.
    pub component: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Robust objective `sum w0 rho(residual)` before each outer step and at the end.
    pub objective: Vec<f64>,
}

impl<T: Real> ScaleSolution<T> {
    pub fn scale(&self, t: usize) -> T {
        self.z[t].exp()
    }
}

/// Robust objective `sum_c w0_c rho(|z_u - z_t - g_c|)`.
pub fn robust_objective<T: Real>(constraints: &[ScaleConstraint<T>], z: &[T], family: LossFamily, scale: T) -> T {
    constraints
        .iter()
        .map(|c| c.w0 * family.rho(c.residual(z).abs(), scale))
        .sum()
}

struct Problem<'a, T> {
    constraints: &'a [ScaleConstraint<T>],
    graph: SignedGraph,
    comps: Components,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(constraints: &'a [ScaleConstraint<T>], n: usize) -> Self {
        let graph = constraint_graph(constraints, n);
        let comps = graph.components();
        Self { constraints, graph, comps }
    }

    /// IRLS at a fixed scale. Returns (outer iterations, converged).
    fn irls(
        &self,
        z: &mut Vec<T>,
        family: LossFamily,
        scale: T,
        opts: &SyncOptions,
        objective: &mut Vec<f64>,
    ) -> Result<(usize, bool)> {
        let cons = self.constraints;
        let target: Vec<T> = cons.iter().map(|c| c.g).collect();
        let pcg = PcgOptions { rel_tol: opts.pcg_rel_tol, max_iter: opts.pcg_max_iter };
        let floor = T::lit(1e-12);
        let tol = T::lit(opts.tol);
        let mut weights = vec![T::zero(); cons.len()];
        for outer in 1..=opts.max_outer {
            objective.push(robust_objective(cons, z, family, scale).to_f64_lossy());
            for (w, c) in weights.iter_mut().zip(cons) {
                let r = c.residual(z).abs().max(floor);
                *w = c.w0 * family.weight(r, scale);
            }
            let prev = z.clone();
            match opts.solver {
                SolverMode::Exact => {
                    let b = laplacian_rhs(&self.graph, &weights, &target);
                    pcg_solve(&self.graph, &weights, &self.comps, &b, z, &pcg);
                }
                SolverMode::Fast => {
                    averaging_solve(
                        &self.graph,
                        &weights,
                        &self.comps,
                        &target,
                        z,
                        T::lit(opts.damping),
                        tol * T::lit(0.1),
                        opts.max_inner,
                    );
                }
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(TripError::NonFinite { stage: "scale synchronization", iteration: outer });
            }
            let change = z
                .iter()
                .zip(&prev)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max);
            if change <= tol {
                return Ok((outer, true));
            }
        }
        Ok((opts.max_outer, false))
    }

    fn finish(&self, z: Vec<T>, iterations: usize, converged: bool, objective: Vec<f64>) -> ScaleSolution<T> {
        let residuals: Vec<T> = self.constraints.iter().map(|c| c.residual(&z).abs()).collect();
        let bar_r = mean_incident(self.constraints, &residuals, z.len());
        ScaleSolution {
            z,
            residuals,
            bar_r,
            component: self.comps.label.clone(),
            iterations,
            converged,
            objective,
        }
    }
}

fn check_init<T: Real>(z0: &[T], n: usize) -> Result<()> {
    if z0.len() != n {
        return Err(TripError::InvalidParameter(format!(
            "initial log-scales have length {}, expected {n}",
            z0.len()
        )));
    }
    Ok(())
}

/// Fixed-scale robust synchronization of `n_triangles` log-scales.
pub fn synchronize_scales<T: Real>(
    constraints: &[ScaleConstraint<T>],
    n_triangles: usize,
    z0: &[T],
    spec: &LossSpec,
    opts: &SyncOptions,
) -> Result<ScaleSolution<T>> {
    spec.validate()?;
    check_init(z0, n_triangles)?;
    let problem = Problem::new(constraints, n_triangles);
    let mut z = z0.to_vec();
    problem.comps.center(&mut z);
    let scale = T::lit(spec.scale);
    let mut objective = Vec::new();
    let (iterations, converged) = problem.irls(&mut z, spec.family, scale, opts, &mut objective)?;
    objective.push(robust_objective(constraints, &z, spec.family, scale).to_f64_lossy());
    Ok(problem.finish(z, iterations, converged, objective))
}

/// State after one annealing stage, handed to the caller's probe.
#[derive(Debug, Clone, Copy)]
pub struct StageRecord<'a, T> {
    pub stage: usize,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub z: &'a [T],
}

/// Annealed redescending synchronization: IRLS to stationarity at each
/// `sigma_k = sigma_0 tau^k`, warm-starting every stage from the previous one.
pub fn annealed_synchronize<T: Real>(
    constraints: &[ScaleConstraint<T>],
    n_triangles: usize,
    z0: &[T],
    spec: &LossSpec,
    opts: &SyncOptions,
    mut probe: impl FnMut(StageRecord<'_, T>),
) -> Result<ScaleSolution<T>> {
    spec.validate()?;
    check_init(z0, n_triangles)?;
    let schedule = spec
        .schedule
        .ok_or_else(|| TripError::InvalidParameter("annealed synchronization needs a schedule".into()))?;
    let problem = Problem::new(constraints, n_triangles);
    let mut z = z0.to_vec();
    problem.comps.center(&mut z);
    let max_res = constraints
        .iter()
        .map(|c| c.residual(&z).abs().to_f64_lossy())
        .fold(0.0, f64::max);
    let sigma0 = match schedule.sigma0 {
        Some(s) if s < max_res => {
            return Err(TripError::InvalidParameter(format!(
                "sigma0 = {s} is below the largest initial residual {max_res}"
            )))
        }
        Some(s) => s,
        None if max_res > 0.0 => max_res,
        None => spec.scale,
    };
    let mut objective = Vec::new();
    let mut total = 0;
    let mut converged = true;
    let scales = schedule.scales(sigma0);
    let capped = opts.stage_max_outer.map(|m| SyncOptions { max_outer: m.max(1), ..*opts });
    for (stage, &sigma) in scales.iter().enumerate() {
        let last = stage + 1 == scales.len();
        let stage_opts = match &capped {
            Some(c) if !last => c,
            _ => opts,
        };
        let (it, ok) = problem.irls(&mut z, spec.family, T::lit(sigma), stage_opts, &mut objective)?;
        total += it;
        if capped.is_none() || last {
            converged &= ok;
        }
        probe(StageRecord { stage, sigma, iterations: it, converged: ok, z: &z });
    }
    let last_sigma = *scales.last().unwrap_or(&sigma0);
    objective.push(robust_objective(constraints, &z, spec.family, T::lit(last_sigma)).to_f64_lossy());
    Ok(problem.finish(z, total, converged, objective))
}

fn mean_incident<T: Real>(constraints: &[ScaleConstraint<T>], residuals: &[T], n: usize) -> Vec<T> {
    let mut sum = vec![T::zero(); n];
    let mut count = vec![0usize; n];
    for (c, &r) in constraints.iter().zip(residuals) {
        for v in [c.t, c.u] {
            sum[v] = sum[v] + r;
            count[v] += 1;
        }
    }
    sum.into_iter()
        .zip(count)
        .map(|(s, k)| if k == 0 { T::infinity() } else { s / T::from_count(k) })
        .collect()
}

/// Mean of `|z_u - z_t - g|` over the constraints incident to each triangle;
/// `+inf` where a triangle has none.
pub fn incident_residual_scores<T: Real>(z: &[T], constraints: &[ScaleConstraint<T>]) -> Vec<T> {
    let residuals: Vec<T> = constraints.iter().map(|c| c.residual(z).abs()).collect();
    mean_incident(constraints, &residuals, z.len())
}
