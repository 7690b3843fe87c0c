//! Robust displacement averaging: camera locations from length-resolved,
//! weighted edge displacements `v_e = length_e * d_e`.

use serde::{Deserialize, Serialize};

use crate::edgeestimate::{lower_median, EdgeLengthEstimate};
use crate::error::{Result, TripError};
use crate::graph::{propagate_along_forest, spanning_forest, Components, SignedGraph};
use crate::loss::{AnnealSchedule, LossFamily, LossSpec};
use crate::scalar::Real;
use crate::solver::{averaging_solve, laplacian_rhs, pcg_solve, PcgOptions, SolverMode};
use crate::vec3::{self, Vec3};
use crate::viewgraph::ViewingGraph;

/// Starting point of the location IRLS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocationInit {
    /// Displacements propagated along a maximum-weight spanning tree.
    Tree,
    /// The tree layout refined by one prior-weighted least-squares solve.
    #[default]
    TreeLeastSquares,
}

impl std::str::FromStr for LocationInit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tree" => Ok(Self::Tree),
            "tree-least-squares" => Ok(Self::TreeLeastSquares),
            o => Err(format!("unknown location init `{o}` (expected tree|tree-least-squares)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationOptions {
    pub solver: SolverMode,
    pub init: LocationInit,
    /// Robust loss; its scale (and any annealing `sigma0`) is relative to the
    /// median estimated edge length, which keeps the solve scale-covariant.
    pub loss: LossSpec,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Convergence threshold on the largest coordinate change, relative to
    /// the median edge length.
    pub tol: f64,
    pub damping: f64,
    pub pcg_rel_tol: f64,
    pub pcg_max_iter: Option<usize>,
}

impl Default for LocationOptions {
    fn default() -> Self {
        Self {
            solver: SolverMode::Exact,
            init: LocationInit::default(),
            loss: LossSpec::default(),
            max_outer: 100,
            max_inner: 100,
            tol: 1e-9,
            damping: 0.7,
            pcg_rel_tol: 1e-10,
            pcg_max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationEstimate<T> {
    /// Camera ids with an estimate, ascending.
    pub nodes: Vec<usize>,
    /// Zero-mean positions aligned with `nodes`.
    pub positions: Vec<Vec3<T>>,
    pub iterations: usize,
    pub converged: bool,
    /// Robust objective before each outer step and at the end.
    pub objective: Vec<f64>,
}

impl<T: Real> LocationEstimate<T> {
    pub fn position(&self, node: usize) -> Option<Vec3<T>> {
        self.nodes.binary_search(&node).ok().map(|k| self.positions[k])
    }
}

struct Problem<T> {
    graph: SignedGraph,
    comps: Components,
    /// Per coordinate, per edge displacement.
    target: [Vec<T>; 3],
    prior: Vec<T>,
}

impl<T: Real> Problem<T> {
    fn residual_norms(&self, x: &[Vec<T>; 3]) -> Vec<T> {
        self.graph
            .ends()
            .iter()
            .enumerate()
            .map(|(e, &(t, h))| {
                let r = [0, 1, 2].map(|a| x[a][h] - x[a][t] - self.target[a][e]);
                vec3::norm(r)
            })
            .collect()
    }

    fn objective(&self, x: &[Vec<T>; 3], family: LossFamily, scale: T) -> f64 {
        self.residual_norms(x)
            .iter()
            .zip(&self.prior)
            .map(|(&r, &w)| w * family.rho(r, scale))
            .sum::<T>()
            .to_f64_lossy()
    }

    /// One weighted least-squares step per coordinate; returns the largest
    /// coordinate change.
    fn solve_weighted(&self, x: &mut [Vec<T>; 3], weights: &[T], tol: T, opts: &LocationOptions) -> T {
        let pcg = PcgOptions { rel_tol: opts.pcg_rel_tol, max_iter: opts.pcg_max_iter };
        let mut change = T::zero();
        for a in 0..3 {
            let prev = x[a].clone();
            match opts.solver {
                SolverMode::Exact => {
                    let b = laplacian_rhs(&self.graph, weights, &self.target[a]);
                    pcg_solve(&self.graph, weights, &self.comps, &b, &mut x[a], &pcg);
                }
                SolverMode::Fast => {
                    averaging_solve(
                        &self.graph,
                        weights,
                        &self.comps,
                        &self.target[a],
                        &mut x[a],
                        T::lit(opts.damping),
                        tol * T::lit(0.1),
                        opts.max_inner,
                    );
                }
            }
            change = x[a]
                .iter()
                .zip(&prev)
                .map(|(p, q)| (*p - *q).abs())
                .fold(change, T::max);
        }
        change
    }

    fn irls(
        &self,
        x: &mut [Vec<T>; 3],
        family: LossFamily,
        scale: T,
        tol: T,
        opts: &LocationOptions,
        objective: &mut Vec<f64>,
    ) -> Result<(usize, bool)> {
        let floor = T::lit(1e-12);
        for outer in 1..=opts.max_outer {
            objective.push(self.objective(x, family, scale));
            let weights: Vec<T> = self
                .residual_norms(x)
                .into_iter()
                .zip(&self.prior)
                .map(|(r, &w)| w * family.weight(r.max(floor), scale))
                .collect();
            let change = self.solve_weighted(x, &weights, tol, opts);
            if x.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
                return Err(TripError::NonFinite { stage: "location recovery", iteration: outer });
            }
            if change <= tol {
                return Ok((outer, true));
            }
        }
        Ok((opts.max_outer, false))
    }
}

/// Minimizes `sum_e w_e rho(|x_i - x_j - length_e d_e|)` by IRLS over the
/// cameras touched by `estimates`, which must form one connected set.
/// Initialization propagates displacements along a maximum-weight spanning
/// tree; the output is re-centred to zero mean.
pub fn recover_locations<T: Real>(
    g: &ViewingGraph<T>,
    estimates: &[EdgeLengthEstimate<T>],
    opts: &LocationOptions,
) -> Result<LocationEstimate<T>> {
    opts.loss.validate()?;
    if estimates.is_empty() {
        return Err(TripError::InvalidParameter("no edge estimates to average".into()));
    }
    let mut nodes: Vec<usize> = estimates
        .iter()
        .flat_map(|e| {
            let m = g.edge(e.edge);
            [m.i, m.j]
        })
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let local = |v: usize| nodes.binary_search(&v).unwrap();
    // Edge (i, j) models x_i - x_j = v, so j is the tail and i the head.
    let ends: Vec<(usize, usize)> = estimates
        .iter()
        .map(|e| {
            let m = g.edge(e.edge);
            (local(m.j), local(m.i))
        })
        .collect();
    let graph = SignedGraph::new(nodes.len(), ends);
    let comps = graph.components();
    if comps.count() > 1 {
        let members = comps
            .members()
            .into_iter()
            .map(|c| c.into_iter().map(|v| nodes[v]).collect())
            .collect();
        return Err(TripError::Disconnected(members));
    }
    let disp: Vec<Vec3<T>> = estimates
        .iter()
        .map(|e| vec3::scale(g.edge(e.edge).d, e.length))
        .collect();
    let target = [0, 1, 2].map(|a| disp.iter().map(|v| v[a]).collect::<Vec<T>>());
    let prior: Vec<T> = estimates.iter().map(|e| e.weight).collect();
    let problem = Problem { graph, comps, target, prior };

    let lengths: Vec<T> = estimates.iter().map(|e| e.length).collect();
    let unit = lower_median(&lengths).unwrap();
    if !(unit > T::zero() && unit.is_finite()) {
        return Err(TripError::InvalidParameter("edge lengths must be positive".into()));
    }

    let mut order: Vec<usize> = (0..estimates.len()).collect();
    order.sort_by(|&a, &b| {
        problem.prior[b]
            .partial_cmp(&problem.prior[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let tree = spanning_forest(&problem.graph, order);
    let init = propagate_along_forest(&problem.graph, &tree, [T::zero(); 3], |base, e, forward| {
        if forward {
            vec3::add(base, disp[e])
        } else {
            vec3::sub(base, disp[e])
        }
    });
    let mut x = [0, 1, 2].map(|a| init.iter().map(|p| p[a]).collect::<Vec<T>>());
    for coord in &mut x {
        problem.comps.center(coord);
    }

    let family = opts.loss.family;
    let tol = T::lit(opts.tol) * unit;
    if opts.init == LocationInit::TreeLeastSquares {
        problem.solve_weighted(&mut x, &problem.prior, tol, opts);
    }
    let mut objective = Vec::new();
    let (iterations, converged, last_scale) = match opts.loss.schedule {
        None => {
            let scale = T::lit(opts.loss.scale) * unit;
            let (it, ok) = problem.irls(&mut x, family, scale, tol, opts, &mut objective)?;
            (it, ok, scale)
        }
        Some(schedule) => {
            let max_res = problem
                .residual_norms(&x)
                .into_iter()
                .fold(T::zero(), T::max);
            let sigma0 = match schedule.sigma0 {
                Some(s) => T::lit(s) * unit,
                None if max_res > T::zero() => max_res,
                None => T::lit(opts.loss.scale) * unit,
            };
            // The floor is relative to the length unit, like the fixed scale.
            let relative = AnnealSchedule { floor: schedule.floor.map(|f| f * unit.to_f64_lossy()), ..schedule };
            let (mut total, mut all_ok) = (0, true);
            let mut last = sigma0;
            for sigma in relative.scales(sigma0.to_f64_lossy()) {
                last = T::lit(sigma);
                let (it, ok) = problem.irls(&mut x, family, last, tol, opts, &mut objective)?;
                total += it;
                all_ok &= ok;
            }
            (total, all_ok, last)
        }
    };
    objective.push(problem.objective(&x, family, last_scale));
    let positions = (0..nodes.len()).map(|v| [x[0][v], x[1][v], x[2][v]]).collect();
    Ok(LocationEstimate { nodes, positions, iterations, converged, objective })
}
