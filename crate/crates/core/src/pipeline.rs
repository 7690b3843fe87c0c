//! End-to-end orchestration: prefilter → scale synchronization → selection
//! and length aggregation → location recovery, with per-stage diagnostics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::edgeestimate::{aggregate_edge_lengths, select_triangle_prefix, EdgeLengthEstimate, SelectionParams};
use crate::error::{Result, TripError};
use crate::evaluation::{ErrorReport, PointSet};
use crate::graph::Components;
use crate::locrecover::{recover_locations, LocationEstimate, LocationOptions};
use crate::loss::LossSpec;
use crate::prefilter::{prefilter_triangles, PrefilterParams};
use crate::scalar::Real;
use crate::scalesync::{annealed_synchronize, build_constraint_graph, spanning_tree_init, synchronize_scales, SyncOptions};
use crate::solver::SolverMode;
use crate::vec3;
use crate::viewgraph::{enumerate_triangles, ViewingGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub measurements: Option<String>,
    pub ground_truth: Option<String>,
    pub locations_out: Option<String>,
    pub report_out: Option<String>,
    pub prefilter: PrefilterParams,
    pub selection: SelectionParams,
    pub scale_loss: LossSpec,
    pub scale_sync: SyncOptions,
    pub location: LocationOptions,
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

/// Cauchy continuation from the largest initial residual down to 0.03.
/// Under coherent corruption a fixed Cauchy scale lets nearly-closing
/// mixed triangles pull clean log-scales; shrinking the scale below the
/// clean residual level removes most of that pull, while the floor keeps
/// noisy clean constraints inside the basin.
pub fn default_scale_loss() -> LossSpec {
    let mut loss = LossSpec::annealed(crate::loss::LossFamily::Cauchy, 0.5, 30);
    if let Some(s) = loss.schedule.as_mut() {
        s.floor = Some(0.03);
    }
    loss
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            measurements: None,
            ground_truth: None,
            locations_out: None,
            report_out: None,
            prefilter: PrefilterParams::default(),
            selection: SelectionParams { min_support: 3, ..SelectionParams::default() },
            scale_loss: default_scale_loss(),
            scale_sync: SyncOptions { stage_max_outer: Some(3), ..SyncOptions::default() },
            location: LocationOptions::default(),
            seed: 0,
            threads: None,
        }
    }
}

impl PipelineConfig {
    /// Same solver backend for both least-squares stages.
    pub fn with_solver(mut self, mode: SolverMode) -> Self {
        self.scale_sync.solver = mode;
        self.location.solver = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.prefilter.validate()?;
        self.selection.validate()?;
        self.scale_loss.validate()?;
        self.location.loss.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TripError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("scale tolerance", self.scale_sync.tol)?;
        positive("location tolerance", self.location.tol)?;
        positive("pcg tolerance", self.scale_sync.pcg_rel_tol)?;
        positive("pcg tolerance", self.location.pcg_rel_tol)?;
        for d in [self.scale_sync.damping, self.location.damping] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(TripError::InvalidParameter(format!("damping must lie in (0, 1], got {d}")));
            }
        }
        if self.scale_sync.max_outer == 0 || self.location.max_outer == 0 {
            return Err(TripError::InvalidParameter("iteration caps must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(TripError::InvalidParameter("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefilterStage {
    pub enumerated: usize,
    pub rejected_collinear: usize,
    pub rejected_residual: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStage {
    pub triangles: usize,
    pub constraints: usize,
    pub components: usize,
    /// Triangles in the component used for selection.
    pub component_triangles: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionStage {
    pub eligible: usize,
    pub selected: usize,
    pub active_edges: usize,
    pub estimated_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationStage {
    pub nodes: usize,
    pub edges: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageReports {
    pub prefilter: PrefilterStage,
    pub scale_sync: ScaleStage,
    pub selection: SelectionStage,
    pub locations: LocationStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub target: f64,
    pub achieved: f64,
    pub shortfall: bool,
    pub cameras: usize,
    pub estimated: usize,
    /// Cameras without an output location.
    pub missing: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub prefilter: f64,
    pub scale_sync: f64,
    pub selection: f64,
    pub locations: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T> {
    pub locations: LocationEstimate<T>,
    pub edge_estimates: Vec<EdgeLengthEstimate<T>>,
    pub stages: StageReports,
    pub coverage: Coverage,
    pub timings: Timings,
}

impl<T: Real> PipelineOutput<T> {
    pub fn point_set(&self) -> PointSet {
        self.locations
            .nodes
            .iter()
            .zip(&self.locations.positions)
            .map(|(&v, &p)| (v, vec3::to_f64(p)))
            .collect()
    }

    /// Whether every iterative stage met its tolerance.
    pub fn converged(&self) -> bool {
        self.stages.scale_sync.converged && self.stages.locations.converged
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs all stages on a built viewing graph.
pub fn run_pipeline<T: Real>(g: &ViewingGraph<T>, cfg: &PipelineConfig) -> Result<PipelineOutput<T>> {
    cfg.validate()?;
    let start = Instant::now();

    let t0 = Instant::now();
    let index = enumerate_triangles(g);
    let pool = prefilter_triangles(g, &index, &cfg.prefilter)?;
    if pool.is_empty() {
        return Err(TripError::NoUsableTriangles);
    }
    let prefilter = PrefilterStage {
        enumerated: pool.enumerated,
        rejected_collinear: pool.rejected_collinear,
        rejected_residual: pool.rejected_residual,
        retained: pool.len(),
    };
    let t_prefilter = secs(t0);

    let t0 = Instant::now();
    let constraints = build_constraint_graph(&pool);
    let z0 = spanning_tree_init(&constraints, &pool);
    let sol = if cfg.scale_loss.schedule.is_some() {
        annealed_synchronize(&constraints, pool.len(), &z0, &cfg.scale_loss, &cfg.scale_sync, |_| {})?
    } else {
        synchronize_scales(&constraints, pool.len(), &z0, &cfg.scale_loss, &cfg.scale_sync)?
    };
    // Log-scales of different constraint components carry independent
    // gauges, so selection draws from the largest one only.
    let gauge = Components::from_edges(pool.len(), constraints.iter().map(|c| (c.t, c.u)));
    let n_comp = gauge.count();
    let main = gauge.largest().unwrap_or(0);
    let comp_size = gauge.sizes.clone();
    let eligible: Vec<bool> = gauge.label.iter().map(|&c| c == main).collect();
    let scale_sync = ScaleStage {
        triangles: pool.len(),
        constraints: constraints.len(),
        components: n_comp,
        component_triangles: comp_size.get(main).copied().unwrap_or(0),
        iterations: sol.iterations,
        converged: sol.converged,
    };
    let t_scale = secs(t0);

    let t0 = Instant::now();
    let state = select_triangle_prefix(&pool, &sol.bar_r, Some(&eligible), g, &cfg.selection)?;
    let estimates = aggregate_edge_lengths(&state, &sol.z, &pool, g);
    if estimates.is_empty() {
        return Err(TripError::NoUsableTriangles);
    }
    let selection = SelectionStage {
        eligible: state.order.len(),
        selected: state.k,
        active_edges: state.active.iter().filter(|&&a| a).count(),
        estimated_edges: estimates.len(),
    };
    let t_selection = secs(t0);

    let t0 = Instant::now();
    let locations = recover_locations(g, &estimates, &cfg.location)?;
    let loc = LocationStage {
        nodes: locations.nodes.len(),
        edges: estimates.len(),
        iterations: locations.iterations,
        converged: locations.converged,
    };
    let t_locations = secs(t0);

    let n = g.node_count();
    let missing: Vec<usize> = (0..n).filter(|v| locations.nodes.binary_search(v).is_err()).collect();
    let coverage = Coverage {
        target: cfg.selection.gamma,
        achieved: state.coverage,
        shortfall: state.shortfall,
        cameras: n,
        estimated: locations.nodes.len(),
        missing,
    };
    Ok(PipelineOutput {
        locations,
        edge_estimates: estimates,
        stages: StageReports { prefilter, scale_sync, selection, locations: loc },
        coverage,
        timings: Timings {
            prefilter: t_prefilter,
            scale_sync: t_scale,
            selection: t_selection,
            locations: t_locations,
            total: secs(start),
        },
    })
}

/// Report with the fixed top-level keys `config`, `stages`, `coverage`,
/// `errors`, `timings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<C> {
    pub config: ReportConfig<C>,
    pub stages: Option<StageReports>,
    pub coverage: Option<Coverage>,
    pub errors: Option<ErrorReport>,
    pub timings: Option<Timings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig<C> {
    pub version: String,
    #[serde(flatten)]
    pub resolved: C,
}

impl<C> Report<C> {
    pub fn new(config: C) -> Self {
        Self {
            config: ReportConfig { version: crate::VERSION.to_string(), resolved: config },
            stages: None,
            coverage: None,
            errors: None,
            timings: None,
        }
    }

    pub fn with_output<T: Real>(mut self, out: &PipelineOutput<T>) -> Self {
        self.stages = Some(out.stages);
        self.coverage = Some(out.coverage.clone());
        self.timings = Some(out.timings);
        self
    }
}
