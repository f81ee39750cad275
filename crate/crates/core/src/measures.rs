//! Gaussian quantum discord and logarithmic negativity of two-mode states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    entropy_f, extract_blocks, permute_modes, symplectic_eigenvalues, CovarianceMatrix,
};

/// Tolerance for small negative values of discriminants and of the discord.
pub const MEASURE_TOL: f64 = 1e-9;

/// Which mode of the pair is measured in the discord's conditioning step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeasuredMode {
    #[default]
    First,
    Second,
}

impl MeasuredMode {
    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1 => Some(Self::First),
            2 => Some(Self::Second),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::First => 1,
            Self::Second => 2,
        }
    }
}

/// Which closed form the optimal conditional determinant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscordBranch {
    /// Heterodyne-like optimum, selected when `(s4 - s1 s2)² ≤ (1 + s1) s3² (s2 + s4)`.
    Branch1,
    /// Homodyne-like optimum.
    Branch2,
}

/// Local symplectic invariants of a two-mode matrix, scaled so that the
/// vacuum maps to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl Invariants {
    pub fn of(cm: &CovarianceMatrix) -> Result<Self> {
        let (v1, v2, v3) = extract_blocks(cm)?;
        let det_ab = cm.matrix().determinant();
        Ok(Self {
            s1: 4.0 * v1.determinant(),
            s2: 4.0 * v2.determinant(),
            s3: 4.0 * v3.determinant(),
            s4: 16.0 * det_ab,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscordReport {
    pub discord: f64,
    pub invariants: Invariants,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Minimised conditional determinant of the unmeasured mode (scaled).
    pub epsilon: f64,
    pub branch: DiscordBranch,
}

fn sqrt_checked(x: f64, what: &str) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else if x >= -MEASURE_TOL {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("{what} = {x:e} is negative")))
    }
}

/// Square root of a radicand that is a difference of terms of total size
/// `scale`. Anything within rounding of zero is zero: pure states make the
/// radicands vanish exactly, and `√(1e-16)` noise would otherwise leak into ε.
fn cancelled_sqrt(x: f64, scale: f64, what: &str) -> Result<f64> {
    if x.abs() <= 64.0 * f64::EPSILON * scale {
        Ok(0.0)
    } else {
        sqrt_checked(x, what)
    }
}

/// Gaussian discord with the chosen mode measured.
pub fn gaussian_discord(cm: &CovarianceMatrix, measured: MeasuredMode) -> Result<DiscordReport> {
    let oriented;
    let cm = match measured {
        MeasuredMode::First => cm,
        MeasuredMode::Second => {
            oriented = permute_modes(cm, &[1, 0])?;
            &oriented
        }
    };
    let inv = Invariants::of(cm)?;
    let Invariants { s1, s2, s3, s4 } = inv;

    // λ± = 2ν± equals the invariant form 2^{-1/2}[s_Δ ± √(s_Δ² - 4s₄)]^{1/2},
    // but the square root of the discriminant turns 1e-16 rounding into 1e-8
    // errors when λ₊ ≈ λ₋ (pure states), so the spectrum is taken directly.
    let spectrum = symplectic_eigenvalues(cm)?;
    let lambda_minus = 2.0 * spectrum.values[0];
    let lambda_plus = 2.0 * spectrum.values[1];

    let s3_sq = s3 * s3;
    let gap = s4 - s2 * s1;
    // A pure measured mode (s1 = 1) makes the first closed form 0/0; the
    // state is then a product and the second form is exact.
    let pure_measured = (s1 - 1.0).abs() < 1e-12;
    let (epsilon, branch) = if gap * gap <= (1.0 + s1) * s3_sq * (s2 + s4) && !pure_measured {
        // [2s₃² + (s₁-1)(s₄-s₂) + 2|s₃|√I]/(s₁-1)² with I = s₃² + (s₁-1)(s₄-s₂),
        // written as a square so that a vanishing I (pure states) cannot
        // push ε below its true value.
        let cross = (s1 - 1.0) * (s4 - s2);
        let inner = cancelled_sqrt(s3_sq + cross, s3_sq + cross.abs(), "branch-1 radicand")?;
        let root_eps = (s3.abs() + inner) / (s1 - 1.0).abs();
        (root_eps * root_eps, DiscordBranch::Branch1)
    } else {
        let mixed = 2.0 * s3_sq * (s4 + s2 * s1);
        let inner = cancelled_sqrt(
            s3_sq * s3_sq + gap * gap - mixed,
            s3_sq * s3_sq + gap * gap + mixed.abs(),
            "branch-2 radicand",
        )?;
        (
            (s2 * s1 - s3_sq + s4 - inner) / (2.0 * s1),
            DiscordBranch::Branch2,
        )
    };

    let raw = entropy_f(s1.sqrt())? - entropy_f(lambda_minus)? - entropy_f(lambda_plus)?
        + entropy_f(sqrt_checked(epsilon, "epsilon")?)?;
    let discord = if raw >= 0.0 {
        raw
    } else if raw >= -MEASURE_TOL {
        0.0
    } else {
        return Err(Error::Numerical(format!("discord evaluated to {raw:e}")));
    };

    Ok(DiscordReport {
        discord,
        invariants: inv,
        lambda_plus,
        lambda_minus,
        epsilon,
        branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub log_negativity: f64,
    /// Least symplectic eigenvalue of the partially transposed matrix.
    pub eta_minus: f64,
    pub sigma: f64,
}

/// Logarithmic negativity `max(0, -ln 2η₋)`.
pub fn log_negativity(cm: &CovarianceMatrix) -> Result<NegativityReport> {
    let (v1, v2, v3) = extract_blocks(cm)?;
    let sigma = v1.determinant() + v2.determinant() - 2.0 * v3.determinant();
    let det_ab = cm.matrix().determinant();
    let root = sqrt_checked(sigma * sigma - 4.0 * det_ab, "sigma^2 - 4 det V")?;
    let eta_minus = sqrt_checked((sigma - root) / 2.0, "eta_minus^2")?;
    if eta_minus <= 0.0 {
        return Err(Error::Numerical(
            "least partially transposed symplectic eigenvalue is zero".into(),
        ));
    }
    Ok(NegativityReport {
        log_negativity: (-(2.0 * eta_minus).ln()).max(0.0),
        eta_minus,
        sigma,
    })
}

/// Both measures of a two-mode state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub discord: DiscordReport,
    pub negativity: NegativityReport,
}

pub fn evaluate(cm: &CovarianceMatrix, measured: MeasuredMode) -> Result<MeasureResult> {
    Ok(MeasureResult {
        discord: gaussian_discord(cm, measured)?,
        negativity: log_negativity(cm)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{highprec_discord, make_tmsv, random_physical_cm, RandomStateSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, Matrix2};
    use proptest::prelude::*;

    fn two_mode(seed: u64) -> CovarianceMatrix {
        random_physical_cm(&RandomStateSpec {
            seed,
            ..Default::default()
        })
    }

    #[test]
    fn product_vacuum() {
        let cm = CovarianceMatrix::vacuum(2);
        let d = gaussian_discord(&cm, MeasuredMode::First).unwrap();
        assert_eq!(d.discord, 0.0);
        assert_eq!(
            d.invariants,
            Invariants {
                s1: 1.0,
                s2: 1.0,
                s3: 0.0,
                s4: 1.0
            }
        );
        assert_abs_diff_eq!(d.lambda_plus, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.lambda_minus, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.epsilon, 1.0, epsilon = 1e-15);
        let n = log_negativity(&cm).unwrap();
        assert_abs_diff_eq!(n.sigma, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(n.eta_minus, 0.5, epsilon = 1e-15);
        assert_eq!(n.log_negativity, 0.0);
    }

    #[test]
    fn product_thermal_has_no_discord() {
        let cm = CovarianceMatrix::thermal(2, 1.0);
        let d = gaussian_discord(&cm, MeasuredMode::First).unwrap();
        assert!(d.discord.abs() < 1e-12);
        let mixed =
            CovarianceMatrix::thermal(1, 0.3).direct_sum(&CovarianceMatrix::thermal(1, 2.0));
        for mode in [MeasuredMode::First, MeasuredMode::Second] {
            assert!(gaussian_discord(&mixed, mode).unwrap().discord < 1e-12);
        }
        assert_eq!(log_negativity(&mixed).unwrap().log_negativity, 0.0);
    }

    #[test]
    fn tmsv_negativity_is_twice_squeezing() {
        for r in [0.1, 0.3, 0.5, 1.0] {
            let n = log_negativity(&make_tmsv(r)).unwrap();
            assert_abs_diff_eq!(n.log_negativity, 2.0 * r, epsilon = 1e-10);
            assert_abs_diff_eq!(n.eta_minus, (-2.0 * r).exp() / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tmsv_discord_matches_high_precision() {
        let cm = make_tmsv(0.5);
        let d = gaussian_discord(&cm, MeasuredMode::First).unwrap().discord;
        assert!(d > 0.0);
        assert_abs_diff_eq!(d, highprec_discord(&cm), epsilon = 1e-12);
    }

    #[test]
    fn random_states_match_high_precision() {
        for seed in 0..100 {
            let cm = two_mode(seed);
            let d = gaussian_discord(&cm, MeasuredMode::First).unwrap().discord;
            assert_abs_diff_eq!(d, highprec_discord(&cm), epsilon = 1e-10);
        }
    }

    #[test]
    fn second_mode_switch_swaps_roles() {
        let cm = two_mode(3);
        let swapped = permute_modes(&cm, &[1, 0]).unwrap();
        let a = gaussian_discord(&cm, MeasuredMode::Second).unwrap();
        let b = gaussian_discord(&swapped, MeasuredMode::First).unwrap();
        assert_eq!(a, b);
        assert_eq!(MeasuredMode::from_index(2), Some(MeasuredMode::Second));
        assert_eq!(MeasuredMode::from_index(3), None);
    }

    #[test]
    fn non_two_mode_input_is_structural_error() {
        let cm = CovarianceMatrix::vacuum(3);
        assert!(matches!(
            gaussian_discord(&cm, MeasuredMode::First),
            Err(Error::Structural(_))
        ));
        assert!(matches!(log_negativity(&cm), Err(Error::Structural(_))));
    }

    fn local_symplectic(theta: f64, r: f64) -> Matrix2<f64> {
        let (s, c) = theta.sin_cos();
        Matrix2::new(c, -s, s, c) * Matrix2::new((-r).exp(), 0.0, 0.0, r.exp())
    }

    proptest! {
        #[test]
        fn measures_are_non_negative(seed in any::<u64>()) {
            let m = evaluate(&two_mode(seed), MeasuredMode::First).unwrap();
            prop_assert!(m.discord.discord >= 0.0);
            prop_assert!(m.negativity.log_negativity >= 0.0);
            prop_assert!(m.discord.lambda_plus >= m.discord.lambda_minus);
            prop_assert!(m.discord.lambda_minus >= 1.0 - 1e-9);
        }

        #[test]
        fn local_symplectic_invariance(
            seed in any::<u64>(),
            t1 in 0.0f64..6.3, r1 in -0.8f64..0.8,
            t2 in 0.0f64..6.3, r2 in -0.8f64..0.8,
        ) {
            let cm = two_mode(seed);
            let mut s = DMatrix::zeros(4, 4);
            s.view_mut((0, 0), (2, 2)).copy_from(&local_symplectic(t1, r1));
            s.view_mut((2, 2), (2, 2)).copy_from(&local_symplectic(t2, r2));
            let moved = CovarianceMatrix::from_matrix(&s * cm.matrix() * s.transpose()).unwrap();
            let a = evaluate(&cm, MeasuredMode::First).unwrap();
            let b = evaluate(&moved, MeasuredMode::First).unwrap();
            prop_assert!((a.negativity.log_negativity - b.negativity.log_negativity).abs() < 1e-9);
            prop_assert!((a.discord.discord - b.discord.discord).abs() < 1e-9);
        }

        #[test]
        fn discord_is_continuous_across_the_branch_boundary(start in 0u64..1_000_000) {
            let branch_of = |cm: &CovarianceMatrix| gaussian_discord(cm, MeasuredMode::First).unwrap().branch;
            let find = |want: DiscordBranch, from: u64| {
                (from..).map(two_mode).find(|cm| branch_of(cm) == want).unwrap()
            };
            let a = find(DiscordBranch::Branch1, start);
            let b = find(DiscordBranch::Branch2, start);
            // Convex mixtures of physical matrices stay physical.
            let mix = |t: f64| {
                CovarianceMatrix::from_matrix(a.matrix() * (1.0 - t) + b.matrix() * t).unwrap()
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if branch_of(&mix(mid)) == DiscordBranch::Branch1 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let d_lo = gaussian_discord(&mix(lo), MeasuredMode::First).unwrap();
            let d_hi = gaussian_discord(&mix(hi), MeasuredMode::First).unwrap();
            prop_assert_ne!(d_lo.branch, d_hi.branch);
            prop_assert!((d_lo.discord - d_hi.discord).abs() < 1e-6,
                "jump {:e} at t = {lo}", (d_lo.discord - d_hi.discord).abs());
        }
    }
}
