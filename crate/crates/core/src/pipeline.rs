//! Single-point evaluation: node parameters → filtered node matrices →
//! Bell-like detection → correlation measures.

use serde::{Deserialize, Serialize};

use crate::bell::{assemble_two_node, bell_condition, BellConfig};
use crate::error::{Error, Result};
use crate::gaussian::{validate, CovarianceMatrix};
use crate::measures::{evaluate, MeasureResult, MeasuredMode};
use crate::node::{build_linear_model, derive_node, DerivedNode, LinearModel, NodeParams};
use crate::spectral::{filtered_node_cm, FilterSpec, NodeCm, DEFAULT_TOL};

/// Filter bandwidth, either through `ε = |Ω| τ` or as `τ` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Epsilon(f64),
    Tau(f64),
}

/// Output filter of one node, with its center relative to that node's ω_B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub center_ratio: f64,
    pub bandwidth: Bandwidth,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            center_ratio: -1.0,
            bandwidth: Bandwidth::Epsilon(8.0),
        }
    }
}

impl FilterConfig {
    pub fn resolve(&self, node: &DerivedNode) -> Result<FilterSpec> {
        if !self.center_ratio.is_finite() {
            return Err(Error::Domain(format!(
                "filter center ratio {}",
                self.center_ratio
            )));
        }
        let center = self.center_ratio * node.omega_b;
        match self.bandwidth {
            Bandwidth::Epsilon(eps) => FilterSpec::from_epsilon(center, eps),
            Bandwidth::Tau(tau) => FilterSpec::new(center, tau),
        }
    }
}

/// Everything needed to evaluate one point of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub node_a: NodeParams,
    pub node_b: NodeParams,
    pub filter_a: FilterConfig,
    pub filter_b: FilterConfig,
    pub detection: BellConfig,
    /// Absolute quadrature tolerance in units of the vacuum variance scale.
    pub tolerance: f64,
    pub measured_mode: MeasuredMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            node_a: NodeParams::default(),
            node_b: NodeParams::default(),
            filter_a: FilterConfig::default(),
            filter_b: FilterConfig::default(),
            detection: BellConfig::default(),
            tolerance: DEFAULT_TOL,
            measured_mode: MeasuredMode::First,
        }
    }
}

/// A node reduced to the inputs of the spectral integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedNode {
    pub derived: DerivedNode,
    pub model: LinearModel,
    pub filter: FilterSpec,
}

impl ResolvedNode {
    /// Bit pattern of everything the filtered matrix depends on.
    pub fn cache_key(&self, tol: f64) -> Vec<u64> {
        self.model
            .drift
            .iter()
            .chain(self.model.diffusion.iter())
            .chain(self.model.port.iter())
            .chain([self.model.kappa, self.filter.center, self.filter.tau, tol].iter())
            .map(|x| x.to_bits())
            .collect()
    }

    pub fn node_cm(&self, tol: f64) -> Result<NodeCm> {
        filtered_node_cm(&self.model, &self.filter, tol)
    }
}

pub fn resolve_node(params: &NodeParams, filter: &FilterConfig) -> Result<ResolvedNode> {
    let derived = derive_node(params)?;
    let model = build_linear_model(&derived);
    model.ensure_stable()?;
    let filter = filter.resolve(&derived)?;
    Ok(ResolvedNode {
        derived,
        model,
        filter,
    })
}

/// Full output of one pipeline evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub node_a: NodeCm,
    pub node_b: NodeCm,
    pub conditional: CovarianceMatrix,
    pub measures: MeasureResult,
}

impl PointResult {
    /// Smallest eigenvalue of `V + iΩ/2` over every matrix produced.
    pub fn physicality_margin(&self) -> f64 {
        [&self.node_a.cm, &self.node_b.cm, &self.conditional]
            .into_iter()
            .map(|cm| validate(cm).min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Joint state, conditioning and measures from already computed node matrices.
pub fn combine(
    node_a: NodeCm,
    node_b: NodeCm,
    detection: &BellConfig,
    measured: MeasuredMode,
) -> Result<PointResult> {
    let state = assemble_two_node(&node_a, &node_b)?;
    let conditional = bell_condition(&state, detection)?;
    let measures = evaluate(&conditional, measured)?;
    Ok(PointResult {
        node_a,
        node_b,
        conditional,
        measures,
    })
}

pub fn evaluate_point(cfg: &PipelineConfig) -> Result<PointResult> {
    cfg.detection.check()?;
    let a = resolve_node(&cfg.node_a, &cfg.filter_a)?;
    let b = resolve_node(&cfg.node_b, &cfg.filter_b)?;
    combine(
        a.node_cm(cfg.tolerance)?,
        b.node_cm(cfg.tolerance)?,
        &cfg.detection,
        cfg.measured_mode,
    )
}
