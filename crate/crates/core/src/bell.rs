//! Two-node state assembly and the conditional BEC-BEC covariance after a
//! Bell-like detection of the two optical output modes.
//!
//! The optical modes are mixed on a beam splitter of transmissivity `T`,
//! `X₁ = √T X_B - √(1-T) X_A` and `X₂ = √T X_A + √(1-T) X_B` (same for `Y`),
//! then `X₁` and `Y₂` are read out by homodyne detectors of efficiency
//! `η₁`, `η₂`. Inefficiency is modelled as a vacuum-admixing beam splitter
//! before a perfect detector.

use nalgebra::{DMatrix, Matrix2, Matrix4, Matrix4x2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{ensure_physical, permute_modes, CovarianceMatrix};
use crate::spectral::NodeCm;

/// Four-mode state ordered `(BEC_A, BEC_B, opt_A, opt_B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoNodeState {
    cm: CovarianceMatrix,
}

/// Direct sum of two `(BEC, optics)` node matrices, reordered so the BEC
/// modes come first.
pub fn assemble_two_node(node_a: &NodeCm, node_b: &NodeCm) -> Result<TwoNodeState> {
    for (name, node) in [("A", node_a), ("B", node_b)] {
        if node.cm.n_modes() != 2 {
            return Err(Error::Structural(format!(
                "node {name} must have two modes"
            )));
        }
    }
    let joint = node_a.cm.direct_sum(&node_b.cm);
    TwoNodeState::from_cm(permute_modes(&joint, &[0, 2, 1, 3])?)
}

impl TwoNodeState {
    /// Wraps an arbitrary four-mode matrix already in `(BEC_A, BEC_B, opt_A, opt_B)` order.
    pub fn from_cm(cm: CovarianceMatrix) -> Result<Self> {
        if cm.n_modes() != 4 {
            return Err(Error::Structural(format!(
                "two-node state needs 4 modes, got {}",
                cm.n_modes()
            )));
        }
        Ok(Self { cm })
    }

    pub fn cm(&self) -> &CovarianceMatrix {
        &self.cm
    }

    fn block4(&self, r: usize, c: usize) -> Matrix4<f64> {
        self.cm.matrix().fixed_view::<4, 4>(r, c).into_owned()
    }

    /// Reduced BEC-pair covariance `A'`.
    pub fn bec_block(&self) -> Matrix4<f64> {
        self.block4(0, 0)
    }

    /// BEC-optics correlations `C = (C₁ C₂)`.
    pub fn correlations(&self) -> Matrix4<f64> {
        self.block4(0, 4)
    }

    /// `C_i`: BEC pair against optical mode `i` (1 = A, 2 = B).
    pub fn correlation_with(&self, optical: usize) -> Matrix4x2<f64> {
        self.cm
            .matrix()
            .fixed_view::<4, 2>(0, 2 + 2 * optical)
            .into_owned()
    }

    /// Reduced optical covariance `B'`.
    pub fn optical_block(&self) -> Matrix4<f64> {
        self.block4(4, 4)
    }

    pub fn b1(&self) -> Matrix2<f64> {
        self.cm.mode_block(2, 2)
    }

    pub fn b2(&self) -> Matrix2<f64> {
        self.cm.mode_block(3, 3)
    }

    /// Optical cross block `W`, rows opt_A, columns opt_B.
    pub fn w(&self) -> Matrix2<f64> {
        self.cm.mode_block(2, 3)
    }
}

/// Beam splitter and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellConfig {
    pub transmissivity: f64,
    pub efficiency_1: f64,
    pub efficiency_2: f64,
}

impl Default for BellConfig {
    fn default() -> Self {
        Self {
            transmissivity: 0.5,
            efficiency_1: 1.0,
            efficiency_2: 1.0,
        }
    }
}

impl BellConfig {
    pub fn new(transmissivity: f64, efficiency_1: f64, efficiency_2: f64) -> Result<Self> {
        let cfg = Self {
            transmissivity,
            efficiency_1,
            efficiency_2,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.transmissivity > 0.0 && self.transmissivity < 1.0) {
            return Err(Error::Domain(format!(
                "transmissivity must lie in (0, 1), got {}",
                self.transmissivity
            )));
        }
        for eta in [self.efficiency_1, self.efficiency_2] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Domain(format!(
                    "efficiency must lie in (0, 1], got {eta}"
                )));
            }
        }
        Ok(())
    }

    fn mixing(&self) -> (f64, f64, f64) {
        let t = self.transmissivity;
        (t, 1.0 - t, (t * (1.0 - t)).sqrt())
    }
}

/// Noise-augmented covariance of the measured pair `(X₁, Y₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl Gamma {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.gamma1, self.gamma3, self.gamma3, self.gamma2)
    }

    pub fn determinant(&self) -> f64 {
        self.gamma1 * self.gamma2 - self.gamma3 * self.gamma3
    }
}

/// Detector noise added to a measured quadrature after rescaling the
/// outcome by `1/√η`: `(1-η)/(2η)` in vacuum-1/2 units.
pub fn detector_noise(eta: f64) -> f64 {
    (1.0 - eta) / (2.0 * eta)
}

pub fn gamma_matrix(state: &TwoNodeState, cfg: &BellConfig) -> Result<Gamma> {
    cfg.check()?;
    let (t, r, mix) = cfg.mixing();
    let (b1, b2, w) = (state.b1(), state.b2(), state.w());
    let (alpha1, alpha2, alpha3) = (b1[(0, 0)], b1[(1, 1)], b1[(0, 1)]);
    let (alpha1p, alpha2p, alpha3p) = (b2[(0, 0)], b2[(1, 1)], b2[(0, 1)]);
    // β₁ = ⟨X_A X_B⟩, β₂ = ⟨Y_A Y_B⟩, β₃ = ⟨X_A Y_B⟩, β₄ = ⟨Y_A X_B⟩.
    let (beta1, beta2, beta3, beta4) = (w[(0, 0)], w[(1, 1)], w[(0, 1)], w[(1, 0)]);

    let gamma = Gamma {
        gamma1: r * alpha1 + t * alpha1p - 2.0 * mix * beta1 + detector_noise(cfg.efficiency_1),
        gamma2: t * alpha2 + r * alpha2p + 2.0 * mix * beta2 + detector_noise(cfg.efficiency_2),
        gamma3: mix * (alpha3p - alpha3) - r * beta3 + t * beta4,
    };
    let det = gamma.determinant();
    let scale = gamma.gamma1 * gamma.gamma2 + gamma.gamma3 * gamma.gamma3;
    if det.is_nan() || det <= 1e-12 * scale {
        return Err(Error::DegenerateMeasurement { det });
    }
    Ok(gamma)
}

/// Sign choice for the `(2,2)` entry of `K₁₂`.
///
/// Only [`ConditioningKernel::Consistent`] is a valid Gaussian conditioning;
/// the other variant flips that one sign and exists so validation runs can
/// show that the oracle comparison catches it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditioningKernel {
    #[default]
    Consistent,
    FlippedK12,
}

/// The four 2×2 kernels `K₁₁, K₁₂, K₂₁, K₂₂` (`K_ij = L_i adj(Γ) L_jᵀ`).
pub fn kernels(
    gamma: &Gamma,
    cfg: &BellConfig,
    variant: ConditioningKernel,
) -> [[Matrix2<f64>; 2]; 2] {
    let (t, r, mix) = cfg.mixing();
    let Gamma {
        gamma1: g1,
        gamma2: g2,
        gamma3: g3,
    } = *gamma;
    let k12_corner = match variant {
        ConditioningKernel::Consistent => mix * g1,
        ConditioningKernel::FlippedK12 => -mix * g1,
    };
    let k11 = Matrix2::new(r * g2, mix * g3, mix * g3, t * g1);
    let k22 = Matrix2::new(t * g2, -mix * g3, -mix * g3, r * g1);
    let k12 = Matrix2::new(-mix * g2, r * g3, -t * g3, k12_corner);
    [[k11, k12], [k12.transpose(), k22]]
}

/// Conditional covariance of the two BEC modes after the Bell-like detection.
pub fn bell_condition(state: &TwoNodeState, cfg: &BellConfig) -> Result<CovarianceMatrix> {
    bell_condition_with_kernel(state, cfg, ConditioningKernel::Consistent)
}

pub fn bell_condition_with_kernel(
    state: &TwoNodeState,
    cfg: &BellConfig,
    variant: ConditioningKernel,
) -> Result<CovarianceMatrix> {
    ensure_physical(
        conditioned_block(state, cfg, variant)?,
        "conditional BEC covariance",
    )
}

/// The conditional BEC block before the uncertainty-relation check.
pub fn conditioned_block(
    state: &TwoNodeState,
    cfg: &BellConfig,
    variant: ConditioningKernel,
) -> Result<CovarianceMatrix> {
    let gamma = gamma_matrix(state, cfg)?;
    let k = kernels(&gamma, cfg, variant);
    let c = [state.correlation_with(1), state.correlation_with(2)];
    let mut update = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            update += c[i] * k[i][j] * c[j].transpose();
        }
    }
    let v = state.bec_block() - update / gamma.determinant();
    Ok(
        CovarianceMatrix::from_matrix(DMatrix::from_column_slice(4, 4, v.as_slice()))?
            .symmetrized(),
    )
}

/// Order of the two homodyne conditionings in [`general_dyne_oracle_ordered`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementOrder {
    XFirst,
    YFirst,
}

/// Conditional BEC covariance built by explicit composition: beam-splitter
/// symplectic, loss channels, then two sequential homodyne updates with a
/// pseudo-inverse.
pub fn general_dyne_oracle(state: &TwoNodeState, cfg: &BellConfig) -> Result<CovarianceMatrix> {
    general_dyne_oracle_ordered(state, cfg, MeasurementOrder::XFirst)
}

pub fn general_dyne_oracle_ordered(
    state: &TwoNodeState,
    cfg: &BellConfig,
    order: MeasurementOrder,
) -> Result<CovarianceMatrix> {
    cfg.check()?;
    let t = cfg.transmissivity;
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());

    // Modes 2, 3 become outputs 1, 2 of the beam splitter.
    let mut s = DMatrix::<f64>::identity(8, 8);
    for q in 0..2 {
        let (a, b) = (4 + q, 6 + q);
        s[(a, a)] = -sr;
        s[(a, b)] = st;
        s[(b, a)] = st;
        s[(b, b)] = sr;
    }
    let mut v = &s * state.cm().matrix() * s.transpose();

    for (mode, eta) in [(2usize, cfg.efficiency_1), (3usize, cfg.efficiency_2)] {
        let mut loss = DMatrix::<f64>::identity(8, 8);
        loss[(2 * mode, 2 * mode)] = eta.sqrt();
        loss[(2 * mode + 1, 2 * mode + 1)] = eta.sqrt();
        v = &loss * v * loss.transpose();
        v[(2 * mode, 2 * mode)] += (1.0 - eta) / 2.0;
        v[(2 * mode + 1, 2 * mode + 1)] += (1.0 - eta) / 2.0;
    }

    // Quadrature x (0) of output 1, quadrature p (1) of output 2.
    let steps: [(usize, usize); 2] = match order {
        MeasurementOrder::XFirst => [(2, 0), (3, 1)],
        MeasurementOrder::YFirst => [(3, 1), (2, 0)],
    };
    let mut modes: Vec<usize> = vec![0, 1, 2, 3];
    for (mode, quadrature) in steps {
        let pos = modes
            .iter()
            .position(|&m| m == mode)
            .expect("mode still present");
        v = homodyne_update(&v, pos, quadrature)?;
        modes.remove(pos);
    }
    let cm = CovarianceMatrix::from_matrix(v)?.symmetrized();
    ensure_physical(cm, "oracle conditional covariance")
}

/// `V_kept - C (Π V_m Π)⁺ Cᵀ` for a homodyne measurement of one quadrature
/// of mode `pos`.
fn homodyne_update(v: &DMatrix<f64>, pos: usize, quadrature: usize) -> Result<DMatrix<f64>> {
    let n = v.nrows();
    let measured = [2 * pos, 2 * pos + 1];
    let kept: Vec<usize> = (0..n).filter(|i| !measured.contains(i)).collect();
    let v_kept = DMatrix::from_fn(kept.len(), kept.len(), |r, c| v[(kept[r], kept[c])]);
    let coupling = DMatrix::from_fn(kept.len(), 2, |r, c| v[(kept[r], measured[c])]);
    let mut projected = DMatrix::from_fn(2, 2, |r, c| v[(measured[r], measured[c])]);
    for r in 0..2 {
        for c in 0..2 {
            if r != quadrature || c != quadrature {
                projected[(r, c)] = 0.0;
            }
        }
    }
    let sigma_max = projected.singular_values().max();
    let pinv = projected
        .pseudo_inverse(1e-12 * sigma_max)
        .map_err(|e| Error::Numerical(format!("pseudo-inverse failed: {e}")))?;
    Ok(v_kept - &coupling * pinv * coupling.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{make_tmsv, random_physical_cm, RandomStateSpec};

    fn node(cm: CovarianceMatrix) -> NodeCm {
        NodeCm {
            cm,
            quadrature_error: 0.0,
        }
    }

    fn random_state(seed: u64) -> TwoNodeState {
        TwoNodeState::from_cm(random_physical_cm(&RandomStateSpec {
            seed,
            n_modes: 4,
            ..Default::default()
        }))
        .unwrap()
    }

    #[test]
    fn vacuum_nodes() {
        let v = node(CovarianceMatrix::vacuum(2));
        let state = assemble_two_node(&v, &v).unwrap();
        assert_eq!(state.cm(), &CovarianceMatrix::vacuum(4));
        for cfg in [
            BellConfig::default(),
            BellConfig::new(0.2, 0.4, 0.9).unwrap(),
        ] {
            let out = bell_condition(&state, &cfg).unwrap();
            assert!(out.max_abs_diff(&CovarianceMatrix::vacuum(2)) < 1e-15);
        }
        let gamma = gamma_matrix(&state, &BellConfig::default()).unwrap();
        assert!((gamma.matrix() - Matrix2::identity() * 0.5).amax() < 1e-15);
    }

    #[test]
    fn assembly_layout() {
        let a = random_physical_cm(&RandomStateSpec {
            seed: 1,
            ..Default::default()
        });
        let b = random_physical_cm(&RandomStateSpec {
            seed: 2,
            ..Default::default()
        });
        let state = assemble_two_node(&node(a.clone()), &node(b.clone())).unwrap();
        assert_eq!(state.cm().mode_block(0, 0), a.mode_block(0, 0));
        assert_eq!(state.cm().mode_block(2, 2), a.mode_block(1, 1));
        assert_eq!(state.cm().mode_block(0, 2), a.mode_block(0, 1));
        assert_eq!(state.cm().mode_block(1, 3), b.mode_block(0, 1));
        for (i, j) in [(0, 1), (0, 3), (1, 2), (2, 3)] {
            assert_eq!(state.cm().mode_block(i, j), Matrix2::zeros());
        }
        assert_eq!(state.w(), Matrix2::zeros());

        let same = assemble_two_node(&node(a.clone()), &node(a.clone())).unwrap();
        assert_eq!(same.b1(), same.b2());
        let c1 = same.correlation_with(1);
        let c2 = same.correlation_with(2);
        assert_eq!(c1.fixed_view::<2, 2>(0, 0), c2.fixed_view::<2, 2>(2, 0));
        assert_eq!(c1.fixed_view::<2, 2>(2, 0), Matrix2::zeros());

        let rebuilt = TwoNodeState::from_cm(state.cm().clone()).unwrap();
        assert_eq!(rebuilt, state);
        assert!(TwoNodeState::from_cm(a).is_err());
    }

    #[test]
    fn gamma_collapses_for_independent_nodes() {
        let a = random_physical_cm(&RandomStateSpec {
            seed: 3,
            ..Default::default()
        });
        let b = random_physical_cm(&RandomStateSpec {
            seed: 4,
            ..Default::default()
        });
        let state = assemble_two_node(&node(a), &node(b)).unwrap();
        let gamma = gamma_matrix(&state, &BellConfig::default()).unwrap();
        let expected = (state.b2()[(0, 1)] - state.b1()[(0, 1)]) / 2.0;
        assert!((gamma.gamma3 - expected).abs() < 1e-15);

        let weak = BellConfig::new(0.5, 1e-9, 1e-9).unwrap();
        let g = gamma_matrix(&state, &weak).unwrap();
        assert!(g.gamma1 > 1e8 && g.gamma2 > 1e8);
    }

    #[test]
    fn uncorrelated_optics_change_nothing() {
        let bec = random_physical_cm(&RandomStateSpec {
            seed: 9,
            ..Default::default()
        });
        let cm = permute_modes(&bec.direct_sum(&make_tmsv(0.7)), &[0, 1, 2, 3]).unwrap();
        let state = TwoNodeState::from_cm(cm).unwrap();
        let cfg = BellConfig::default();
        let out = bell_condition(&state, &cfg).unwrap();
        assert!(out.max_abs_diff(&bec) < 1e-14);
        let oracle = general_dyne_oracle(&state, &cfg).unwrap();
        assert!(oracle.max_abs_diff(&bec) < 1e-14);
    }

    #[test]
    fn matches_oracle_on_random_states() {
        let cfg = BellConfig::new(0.5, 0.9, 0.8).unwrap();
        for seed in 0..50 {
            let state = random_state(seed);
            let a = bell_condition(&state, &cfg).unwrap();
            let b = general_dyne_oracle(&state, &cfg).unwrap();
            assert!(
                a.max_abs_diff(&b) < 1e-9,
                "seed {seed}: {}",
                a.max_abs_diff(&b)
            );
        }
    }

    #[test]
    fn flipped_kernel_disagrees_with_oracle() {
        let cfg = BellConfig::new(0.3, 0.9, 0.8).unwrap();
        let state = random_state(11);
        let oracle = general_dyne_oracle(&state, &cfg).unwrap();
        match bell_condition_with_kernel(&state, &cfg, ConditioningKernel::FlippedK12) {
            Ok(flipped) => assert!(flipped.max_abs_diff(&oracle) > 1e-6),
            Err(e) => assert_eq!(e.code(), "non_physical"),
        }
    }

    #[test]
    fn measurement_order_is_irrelevant() {
        let cfg = BellConfig::new(0.35, 0.7, 0.95).unwrap();
        for seed in 20..30 {
            let state = random_state(seed);
            let a = general_dyne_oracle_ordered(&state, &cfg, MeasurementOrder::XFirst).unwrap();
            let b = general_dyne_oracle_ordered(&state, &cfg, MeasurementOrder::YFirst).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn no_information_limit() {
        let state = TwoNodeState::from_cm(random_physical_cm(&RandomStateSpec {
            seed: 5,
            n_modes: 4,
            thermal: (0.0, 0.5),
            squeezing: (0.0, 0.3),
            layers: 2,
        }))
        .unwrap();
        let cfg = BellConfig::new(0.5, 1e-6, 1e-6).unwrap();
        let out = bell_condition(&state, &cfg).unwrap();
        let a_prime = CovarianceMatrix::from_matrix(DMatrix::from_column_slice(
            4,
            4,
            state.bec_block().as_slice(),
        ))
        .unwrap();
        assert!(out.max_abs_diff(&a_prime) < 1e-6);
    }

    #[test]
    fn invalid_configs() {
        assert!(BellConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(BellConfig::new(1.0, 1.0, 1.0).is_err());
        assert!(BellConfig::new(0.5, 0.0, 1.0).is_err());
        assert!(BellConfig::new(0.5, 1.0, 1.1).is_err());
    }

    #[test]
    fn degenerate_measurement() {
        // Infinitely squeezed measured quadratures give det Γ -> 0.
        let mut m = DMatrix::from_diagonal_element(8, 8, 0.5);
        m[(4, 4)] = 0.0;
        m[(6, 6)] = 0.0;
        m[(5, 5)] = 0.0;
        m[(7, 7)] = 0.0;
        let state = TwoNodeState::from_cm(CovarianceMatrix::from_matrix(m).unwrap()).unwrap();
        assert!(matches!(
            gamma_matrix(&state, &BellConfig::default()),
            Err(Error::DegenerateMeasurement { .. })
        ));
    }
}
