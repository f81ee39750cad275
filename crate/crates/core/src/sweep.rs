//! Parameter sweeps over one or two knobs of the pipeline.
//!
//! Grid points are numbered in row-major order (last axis fastest) and every
//! result is stored at its index, so the output does not depend on how the
//! worker pool schedules the work. Filtered node matrices are computed once
//! per distinct `(model, filter, tolerance)` and shared between points.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{Coupling, Drive};
use crate::pipeline::{combine, resolve_node, Bandwidth, PipelineConfig, ResolvedNode};
use crate::spectral::NodeCm;

/// A scalar of [`PipelineConfig`] that a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Knob {
    /// `ε₁`; τ₁ follows as `ε₁/|Ω₁|` with Ω₁ unchanged.
    Epsilon1,
    Epsilon2,
    /// `Ω₁/ω_B`.
    Center1,
    Center2,
    /// `η₁ = η₂`.
    Efficiency,
    /// `ω_sw/ω_R` on both nodes.
    CollisionRatio,
    Transmissivity,
    /// `G / 4ω_R` on both nodes.
    Coupling,
    /// `E_d/κ` on both nodes.
    Drive,
}

impl Knob {
    pub const ALL: [Knob; 9] = [
        Knob::Epsilon1,
        Knob::Epsilon2,
        Knob::Center1,
        Knob::Center2,
        Knob::Efficiency,
        Knob::CollisionRatio,
        Knob::Transmissivity,
        Knob::Coupling,
        Knob::Drive,
    ];

    /// Column name used in CSV output and config files.
    pub fn name(self) -> &'static str {
        match self {
            Knob::Epsilon1 => "epsilon_1",
            Knob::Epsilon2 => "epsilon_2",
            Knob::Center1 => "center_1_over_omega_b",
            Knob::Center2 => "center_2_over_omega_b",
            Knob::Efficiency => "efficiency",
            Knob::CollisionRatio => "collision_over_recoil",
            Knob::Transmissivity => "transmissivity",
            Knob::Coupling => "coupling_over_omega_b0",
            Knob::Drive => "drive_over_kappa",
        }
    }

    fn admits(self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            Knob::Epsilon1 | Knob::Epsilon2 => v > 0.0,
            Knob::Center1 | Knob::Center2 => true,
            Knob::Efficiency => v > 0.0 && v <= 1.0,
            Knob::Transmissivity => v > 0.0 && v < 1.0,
            Knob::CollisionRatio | Knob::Coupling | Knob::Drive => v >= 0.0,
        }
    }

    pub fn apply(self, cfg: &mut PipelineConfig, v: f64) {
        match self {
            Knob::Epsilon1 => cfg.filter_a.bandwidth = Bandwidth::Epsilon(v),
            Knob::Epsilon2 => cfg.filter_b.bandwidth = Bandwidth::Epsilon(v),
            Knob::Center1 => cfg.filter_a.center_ratio = v,
            Knob::Center2 => cfg.filter_b.center_ratio = v,
            Knob::Efficiency => {
                cfg.detection.efficiency_1 = v;
                cfg.detection.efficiency_2 = v;
            }
            Knob::Transmissivity => cfg.detection.transmissivity = v,
            Knob::CollisionRatio => {
                cfg.node_a.collision_ratio = v;
                cfg.node_b.collision_ratio = v;
            }
            Knob::Coupling => {
                cfg.node_a.coupling = Coupling::CollisionlessOmegaBMultiple(v);
                cfg.node_b.coupling = Coupling::CollisionlessOmegaBMultiple(v);
            }
            Knob::Drive => {
                cfg.node_a.drive = Drive::KappaMultiple(v);
                cfg.node_b.drive = Drive::KappaMultiple(v);
            }
        }
    }
}

impl fmt::Display for Knob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Knob {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Knob::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Structural(format!("unknown sweep knob `{s}`")))
    }
}

/// Evenly spaced values `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub knob: Knob,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(knob: Knob, min: f64, max: f64, count: usize) -> Result<Self> {
        let axis = Self {
            knob,
            min,
            max,
            count,
        };
        axis.check()?;
        Ok(axis)
    }

    pub fn check(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::Structural(format!(
                "axis {} needs at least 2 points, got {}",
                self.knob, self.count
            )));
        }
        for v in [self.min, self.max] {
            if !self.knob.admits(v) {
                return Err(Error::Domain(format!(
                    "axis {} value {v} out of range",
                    self.knob
                )));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + (self.max - self.min) * (i as f64 / last)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Output {
    Discord,
    LogNegativity,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::Discord => "discord",
            Output::LogNegativity => "log_negativity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: PipelineConfig,
    pub axes: Vec<Axis>,
    pub outputs: Vec<Output>,
}

impl SweepSpec {
    pub fn new(base: PipelineConfig, axes: Vec<Axis>) -> Self {
        Self {
            base,
            axes,
            outputs: vec![Output::Discord, Output::LogNegativity],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Structural(format!(
                "a sweep has one or two axes, got {}",
                self.axes.len()
            )));
        }
        if self.axes.len() == 2 && self.axes[0].knob == self.axes[1].knob {
            return Err(Error::Structural(format!(
                "axis {} given twice",
                self.axes[0].knob
            )));
        }
        if self.outputs.is_empty() {
            return Err(Error::Structural(
                "a sweep needs at least one output".into(),
            ));
        }
        if !(self.base.tolerance > 0.0 && self.base.tolerance.is_finite()) {
            return Err(Error::Domain(format!("tolerance {}", self.base.tolerance)));
        }
        self.axes.iter().try_for_each(Axis::check)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of grid point `index`, last axis fastest.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let i = rest % axis.count;
            rest /= axis.count;
            out[k] = axis.values()[i];
        }
        out
    }

    pub fn config_at(&self, coords: &[f64]) -> PipelineConfig {
        let mut cfg = self.base;
        for (axis, &v) in self.axes.iter().zip(coords) {
            axis.knob.apply(&mut cfg, v);
        }
        cfg
    }
}

/// Measures of one successful point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub discord: f64,
    pub log_negativity: f64,
    /// Least symplectic eigenvalue of the partial transpose.
    pub eta_minus: f64,
    /// Smallest eigenvalue of `V + iΩ/2` over every matrix of the point.
    pub physicality_margin: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub code: String,
    pub message: String,
}

impl From<&Error> for PointFailure {
    fn from(e: &Error) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    /// Both linearized nodes are stable.
    pub stable: bool,
    pub outcome: std::result::Result<PointSummary, PointFailure>,
}

impl SweepRow {
    pub fn summary(&self) -> Option<&PointSummary> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub tolerance: f64,
    pub points: usize,
    pub distinct_nodes: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    /// Values of `output` per row; `None` where the point failed.
    pub fn column(&self, output: Output) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r.summary().map(|s| match output {
                    Output::Discord => s.discord,
                    Output::LogNegativity => s.log_negativity,
                })
            })
            .collect()
    }

    /// Row index of the largest successful value of `output`; ties go to the lowest index.
    pub fn argmax(&self, output: Output) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.column(output).into_iter().enumerate() {
            if let Some(v) = v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

struct Plan {
    nodes: std::result::Result<(usize, usize), (Error, bool)>,
}

/// Evaluates every grid point of `spec` on `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.check()?;
    if workers == 0 {
        return Err(Error::Domain("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let tol = spec.base.tolerance;
    let coords: Vec<Vec<f64>> = (0..spec.len()).map(|i| spec.coords(i)).collect();

    // Distinct nodes, numbered in order of first appearance.
    let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut distinct: Vec<ResolvedNode> = Vec::new();
    let mut intern = |node: ResolvedNode| {
        *keys.entry(node.cache_key(tol)).or_insert_with(|| {
            distinct.push(node);
            distinct.len() - 1
        })
    };
    let plans: Vec<Plan> = coords
        .iter()
        .map(|c| {
            let cfg = spec.config_at(c);
            let resolved = cfg.detection.check().and_then(|_| {
                let a = resolve_node(&cfg.node_a, &cfg.filter_a)?;
                let b = resolve_node(&cfg.node_b, &cfg.filter_b)?;
                Ok((a, b))
            });
            match resolved {
                Ok((a, b)) => Plan {
                    nodes: Ok((intern(a), intern(b))),
                },
                Err(e) => {
                    let stable = !matches!(e, Error::Unstable { .. });
                    Plan {
                        nodes: Err((e, stable)),
                    }
                }
            }
        })
        .collect();

    let node_cms: Vec<Result<NodeCm>> =
        pool.install(|| distinct.par_iter().map(|n| n.node_cm(tol)).collect());

    let rows: Vec<SweepRow> = pool.install(|| {
        plans
            .par_iter()
            .zip(coords.par_iter())
            .map(|(plan, c)| {
                let cfg = spec.config_at(c);
                let outcome = match &plan.nodes {
                    Err((e, stable)) => {
                        return SweepRow {
                            coords: c.clone(),
                            stable: *stable,
                            outcome: Err(e.into()),
                        }
                    }
                    Ok((ia, ib)) => match (&node_cms[*ia], &node_cms[*ib]) {
                        (Ok(a), Ok(b)) => {
                            combine(a.clone(), b.clone(), &cfg.detection, cfg.measured_mode)
                        }
                        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                    },
                };
                let outcome = outcome
                    .map(|p| PointSummary {
                        discord: p.measures.discord.discord,
                        log_negativity: p.measures.negativity.log_negativity,
                        eta_minus: p.measures.negativity.eta_minus,
                        physicality_margin: p.physicality_margin(),
                        quadrature_error: p.node_a.quadrature_error.max(p.node_b.quadrature_error),
                    })
                    .map_err(|e| PointFailure::from(&e));
                SweepRow {
                    coords: c.clone(),
                    stable: true,
                    outcome,
                }
            })
            .collect()
    });

    Ok(SweepResult {
        spec: spec.clone(),
        metadata: SweepMetadata {
            tolerance: tol,
            points: rows.len(),
            distinct_nodes: distinct.len(),
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps_grid(n: usize) -> SweepSpec {
        SweepSpec::new(
            PipelineConfig::default(),
            vec![
                Axis::new(Knob::Epsilon1, 2.0, 12.0, n).unwrap(),
                Axis::new(Knob::Epsilon2, 2.0, 12.0, n).unwrap(),
            ],
        )
    }

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::new(Knob::Efficiency, 1.0, 0.2, 9).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[8], 0.2);
        assert!((v[4] - 0.6).abs() < 1e-15);
        assert!(Axis::new(Knob::Efficiency, 1.0, 0.0, 3).is_err());
        assert!(Axis::new(Knob::Epsilon1, 1.0, 2.0, 1).is_err());
        assert!(Axis::new(Knob::Transmissivity, 0.1, 1.0, 3).is_err());
    }

    #[test]
    fn knob_names_round_trip() {
        for k in Knob::ALL {
            assert_eq!(k.name().parse::<Knob>().unwrap(), k);
        }
        assert!("omega".parse::<Knob>().is_err());
    }

    #[test]
    fn row_major_coordinates() {
        let spec = eps_grid(3);
        assert_eq!(spec.len(), 9);
        assert_eq!(spec.coords(0), vec![2.0, 2.0]);
        assert_eq!(spec.coords(1), vec![2.0, 7.0]);
        assert_eq!(spec.coords(3), vec![7.0, 2.0]);
        assert_eq!(spec.coords(8), vec![12.0, 12.0]);
    }

    #[test]
    fn small_grid_is_stable_and_positive() {
        let r = run_sweep(&eps_grid(2), 2).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.metadata.distinct_nodes, 2);
        for row in &r.rows {
            assert!(row.stable);
            let s = row.summary().expect("point evaluates");
            assert!(s.discord >= 0.0);
            assert!(s.physicality_margin >= -1e-9);
        }
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let spec = eps_grid(4);
        let one = run_sweep(&spec, 1).unwrap();
        let many = run_sweep(&spec, 8).unwrap();
        assert_eq!(one.rows, many.rows);
    }

    #[test]
    fn swapping_identical_nodes_swaps_the_measured_mode() {
        let first = run_sweep(&eps_grid(4), 4).unwrap();
        let mut spec = eps_grid(4);
        spec.base.measured_mode = crate::measures::MeasuredMode::Second;
        let second = run_sweep(&spec, 4).unwrap();
        let (d1, d2) = (
            first.column(Output::Discord),
            second.column(Output::Discord),
        );
        let e = first.column(Output::LogNegativity);
        let mut off_diagonal_gap = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                assert!((d1[4 * i + j].unwrap() - d2[4 * j + i].unwrap()).abs() < 1e-8);
                assert!((e[4 * i + j].unwrap() - e[4 * j + i].unwrap()).abs() < 1e-8);
                off_diagonal_gap =
                    off_diagonal_gap.max((d1[4 * i + j].unwrap() - d1[4 * j + i].unwrap()).abs());
            }
        }
        // One-way discord itself is not symmetric away from ε₁ = ε₂.
        assert!(off_diagonal_gap > 1e-4);
    }

    #[test]
    fn failures_stay_in_their_row() {
        let spec = SweepSpec::new(
            PipelineConfig::default(),
            vec![Axis::new(Knob::Center1, -1.0, 0.0, 3).unwrap()],
        );
        let r = run_sweep(&spec, 2).unwrap();
        assert!(r.rows[0].summary().is_some());
        assert!(r.rows[1].summary().is_some());
        let fail = r.rows[2].outcome.as_ref().unwrap_err();
        assert_eq!(fail.code, "domain");
        assert!(r.rows[2].stable);
    }

    #[test]
    fn unstable_points_are_flagged() {
        let mut base = PipelineConfig::default();
        base.node_a.bec_damping_ratio = 0.0;
        base.node_b.bec_damping_ratio = 0.0;
        let spec = SweepSpec::new(
            base,
            vec![Axis::new(Knob::Coupling, 0.5, 5000.0, 2).unwrap()],
        );
        let r = run_sweep(&spec, 1).unwrap();
        assert!(!r.rows[1].stable);
        assert_eq!(r.rows[1].outcome.as_ref().unwrap_err().code, "unstable");
    }

    #[test]
    fn invalid_specs() {
        let mut spec = eps_grid(2);
        spec.axes.push(Axis::new(Knob::Drive, 1.0, 2.0, 2).unwrap());
        assert!(run_sweep(&spec, 1).is_err());
        let mut spec = eps_grid(2);
        spec.axes[1].knob = Knob::Epsilon1;
        assert!(run_sweep(&spec, 1).is_err());
        assert!(run_sweep(&eps_grid(2), 0).is_err());
    }
}
