//! Self-validation suites comparing the main pipeline against independent
//! constructions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bell::{
    conditioned_block, general_dyne_oracle, BellConfig, ConditioningKernel, TwoNodeState,
};
use crate::gaussian::CovarianceMatrix;
use crate::measures::{gaussian_discord, log_negativity, MeasuredMode};
use crate::node::{build_linear_model, derive_node, Coupling, NodeParams};
use crate::oracles::{
    highprec_discord, make_tmsv, random_physical_cm, random_stable_model, RandomStateSpec,
};
use crate::spectral::{
    filtered_node_cm, lyapunov_steady_cm, spectral_intracavity_cm, FilterSpec, DEFAULT_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    /// Worst deviation found.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
}

impl SuiteReport {
    fn new(name: &str, metric: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: metric <= threshold,
            metric,
            threshold,
            detail,
        }
    }

    fn failed(name: &str, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            metric: f64::INFINITY,
            threshold,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Quadrature tolerance used wherever a spectral integral is involved.
    pub tolerance: f64,
    pub kernel: ConditioningKernel,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOL,
            kernel: ConditioningKernel::Consistent,
        }
    }
}

pub fn run_all(opts: &ValidationOptions) -> Vec<SuiteReport> {
    vec![
        lyapunov_residuals(50),
        calibration_uncoupled(opts.tolerance),
        calibration_lyapunov(50, opts.tolerance),
        bell_oracle(200, 20, opts.kernel),
        measure_sanity(500),
    ]
}

/// `‖AV + VAᵀ + D‖_max` of the direct Lyapunov solution on random stable models.
pub fn lyapunov_residuals(models: u64) -> SuiteReport {
    let mut worst = 0.0f64;
    let mut at = 0;
    for seed in 0..models {
        let model = random_stable_model(seed);
        let v = match lyapunov_steady_cm(&model) {
            Ok(v) => v,
            Err(e) => {
                return SuiteReport::failed(
                    "lyapunov_residuals",
                    1e-10,
                    format!("model {seed}: {e}"),
                )
            }
        };
        let a = DMatrix::from_column_slice(4, 4, model.drift.as_slice());
        let d = DMatrix::from_column_slice(4, 4, model.diffusion.as_slice());
        let residual = &a * v.matrix() + v.matrix() * a.transpose() + &d;
        let scale = a.amax() * v.matrix().amax() + d.amax();
        let r = residual.amax() / scale;
        if r > worst {
            worst = r;
            at = seed;
        }
    }
    SuiteReport::new(
        "lyapunov_residuals",
        worst,
        1e-12,
        format!("{models} random stable models, worst relative residual at model {at}"),
    )
}

/// Filter centers and bandwidths of the uncoupled calibration grid.
///
/// The center range includes Ω = 0, where `ε = |Ω|τ` cannot fix τ; the grid
/// therefore uses `τ = ε/ω_B` at every center.
pub fn calibration_grid(omega_b: f64) -> Vec<FilterSpec> {
    let centers: Vec<f64> = (0..5).map(|i| -2.0 + 0.5 * i as f64).collect();
    let epsilons: Vec<f64> = (0..5)
        .map(|i| 0.5 + (30.0 - 0.5) * i as f64 / 4.0)
        .collect();
    let mut out = Vec::new();
    for &c in &centers {
        for &e in &epsilons {
            out.push(FilterSpec {
                center: c * omega_b,
                tau: e / omega_b,
            });
        }
    }
    out
}

/// With G = 0 the filtered node is the thermal BEC mode next to an optical vacuum.
pub fn calibration_uncoupled(tol: f64) -> SuiteReport {
    const NAME: &str = "calibration_uncoupled";
    let params = NodeParams {
        coupling: Coupling::CollisionlessOmegaBMultiple(0.0),
        ..Default::default()
    };
    let derived = match derive_node(&params) {
        Ok(d) => d,
        Err(e) => return SuiteReport::failed(NAME, 1e-6, e.to_string()),
    };
    let model = build_linear_model(&derived);
    let thermal = derived.n_c + 0.5;
    let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![thermal, thermal, 0.5, 0.5]));
    let mut worst = 0.0f64;
    let mut at = String::new();
    for filter in calibration_grid(derived.omega_b) {
        match filtered_node_cm(&model, &filter, tol) {
            Ok(node) => {
                let diff = (node.cm.matrix() - &expected).amax();
                if diff >= worst {
                    worst = diff;
                    at = format!(
                        "Ω/ω_B = {:.2}, ε = {:.3}",
                        filter.center / derived.omega_b,
                        filter.tau * derived.omega_b
                    );
                }
            }
            Err(e) => return SuiteReport::failed(NAME, 1e-6, format!("filter {filter:?}: {e}")),
        }
    }
    SuiteReport::new(
        NAME,
        worst,
        1e-6,
        format!("5×5 filter grid, n_c = {:.6e}, worst at {at}", derived.n_c),
    )
}

/// Unfiltered frequency integral against the direct Lyapunov solution.
pub fn calibration_lyapunov(models: u64, tol: f64) -> SuiteReport {
    const NAME: &str = "calibration_lyapunov";
    let threshold = 10.0 * tol;
    let mut worst = 0.0f64;
    let mut at = 0;
    for seed in 0..models {
        let model = random_stable_model(seed);
        let pair =
            lyapunov_steady_cm(&model).and_then(|l| Ok((l, spectral_intracavity_cm(&model, tol)?)));
        match pair {
            Ok((direct, spectral)) => {
                let diff = direct.max_abs_diff(&spectral.cm);
                if diff > worst {
                    worst = diff;
                    at = seed;
                }
            }
            Err(e) => return SuiteReport::failed(NAME, threshold, format!("model {seed}: {e}")),
        }
    }
    SuiteReport::new(
        NAME,
        worst,
        threshold,
        format!("{models} random stable models, worst at model {at}"),
    )
}

/// Random detection settings with `T ∈ [0.1, 0.9]` and `η ∈ [0.3, 1]`.
pub fn random_bell_configs(seed: u64, count: usize) -> Vec<BellConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| BellConfig {
            transmissivity: rng.random_range(0.1..=0.9),
            efficiency_1: rng.random_range(0.3..=1.0),
            efficiency_2: rng.random_range(0.3..=1.0),
        })
        .collect()
}

fn random_two_node_state(seed: u64) -> TwoNodeState {
    let cm = random_physical_cm(&RandomStateSpec {
        seed,
        n_modes: 4,
        ..Default::default()
    });
    TwoNodeState::from_cm(cm).expect("four-mode state")
}

/// Closed-form conditioning against the explicit general-dyne construction.
pub fn bell_oracle(states: u64, configs: usize, kernel: ConditioningKernel) -> SuiteReport {
    const NAME: &str = "bell_oracle";
    let threshold = 1e-9;
    let configs = random_bell_configs(0x5eed, configs);
    let mut worst = 0.0f64;
    let mut at = String::new();
    for seed in 0..states {
        let state = random_two_node_state(1_000 + seed);
        for (k, cfg) in configs.iter().enumerate() {
            let oracle = match general_dyne_oracle(&state, cfg) {
                Ok(v) => v,
                Err(e) => {
                    return SuiteReport::failed(
                        NAME,
                        threshold,
                        format!("oracle, state {seed}, config {k}: {e}"),
                    )
                }
            };
            let closed = match conditioned_block(&state, cfg, kernel) {
                Ok(v) => v,
                Err(e) => {
                    return SuiteReport::failed(
                        NAME,
                        threshold,
                        format!("state {seed}, config {k}: {e}"),
                    )
                }
            };
            let diff = closed.matrix() - oracle.matrix();
            let (r, c) = argmax_abs(&diff);
            let d = diff[(r, c)].abs();
            if d > worst {
                worst = d;
                at = format!(
                    "state {seed}, config {k} (T = {:.3}, η = {:.3}/{:.3}), entry ({r}, {c})",
                    cfg.transmissivity, cfg.efficiency_1, cfg.efficiency_2
                );
            }
        }
    }
    SuiteReport::new(
        NAME,
        worst,
        threshold,
        format!("{states} states × {} configs, worst at {at}", configs.len()),
    )
}

fn argmax_abs(m: &DMatrix<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)].abs() > m[best].abs() {
                best = (r, c);
            }
        }
    }
    best
}

/// Random local state of one mode, for product-state checks.
fn random_single_mode(seed: u64) -> CovarianceMatrix {
    random_physical_cm(&RandomStateSpec {
        seed,
        n_modes: 1,
        ..Default::default()
    })
}

/// Product states, two-mode squeezed vacua and the high-precision discord oracle.
pub fn measure_sanity(random_states: u64) -> SuiteReport {
    const NAME: &str = "measure_sanity";
    let threshold = 1e-10;
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut record = |diff: f64, what: String| {
        if diff > worst {
            worst = diff;
            at = what;
        }
    };

    for seed in 0..20 {
        let a = random_single_mode(2 * seed);
        let b = random_single_mode(2 * seed + 1);
        let product = a.direct_sum(&b);
        match (
            gaussian_discord(&product, MeasuredMode::First),
            log_negativity(&product),
        ) {
            (Ok(d), Ok(n)) => {
                record(d.discord.abs(), format!("product state {seed}, discord"));
                record(
                    n.log_negativity,
                    format!("product state {seed}, log negativity"),
                );
            }
            (Err(e), _) | (_, Err(e)) => {
                return SuiteReport::failed(NAME, threshold, format!("product {seed}: {e}"))
            }
        }
    }
    for r in [0.1, 0.3, 0.5, 1.0] {
        match log_negativity(&make_tmsv(r)) {
            Ok(n) => record(
                (n.log_negativity - 2.0 * r).abs(),
                format!("TMSV r = {r}, log negativity"),
            ),
            Err(e) => return SuiteReport::failed(NAME, threshold, format!("TMSV r = {r}: {e}")),
        }
    }
    for seed in 0..random_states {
        let cm = random_physical_cm(&RandomStateSpec {
            seed: 50_000 + seed,
            n_modes: 2,
            ..Default::default()
        });
        match gaussian_discord(&cm, MeasuredMode::First) {
            Ok(d) => record(
                (d.discord - highprec_discord(&cm)).abs(),
                format!("random state {seed}, discord"),
            ),
            Err(e) => {
                return SuiteReport::failed(NAME, threshold, format!("random state {seed}: {e}"))
            }
        }
    }
    SuiteReport::new(
        NAME,
        worst,
        threshold,
        format!(
            "20 products, 4 TMSV, {random_states} random states vs 200-bit oracle; worst: {at}"
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_grid_shape() {
        let grid = calibration_grid(2.0);
        assert_eq!(grid.len(), 25);
        assert_eq!(grid[0].center, -4.0);
        assert_eq!(grid[24].center, 0.0);
        assert_eq!(grid[0].tau, 0.25);
        assert_eq!(grid[4].tau, 15.0);
    }

    #[test]
    fn fast_suites_pass() {
        for report in [
            lyapunov_residuals(10),
            calibration_lyapunov(5, 1e-8),
            measure_sanity(20),
        ] {
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn oracle_suite_localizes_a_flipped_kernel() {
        let good = bell_oracle(5, 3, ConditioningKernel::Consistent);
        assert!(good.passed, "{good:?}");
        let bad = bell_oracle(5, 3, ConditioningKernel::FlippedK12);
        assert!(!bad.passed);
        assert!(
            bad.detail.contains("state") && bad.detail.contains("entry ("),
            "{}",
            bad.detail
        );
    }

    #[test]
    fn configs_cover_requested_ranges() {
        for cfg in random_bell_configs(1, 200) {
            assert!((0.1..=0.9).contains(&cfg.transmissivity));
            assert!((0.3..=1.0).contains(&cfg.efficiency_1));
            assert!((0.3..=1.0).contains(&cfg.efficiency_2));
        }
    }
}
