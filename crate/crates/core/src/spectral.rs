//! Stationary covariance of (BEC mode, filtered cavity output mode) from the
//! frequency-domain solution of the linearized Langevin equations.
//!
//! Fourier convention: `f(ω) = ∫ dt e^{iωt} f(t)`. The fluctuations then obey
//! `u(ω) = M(ω) n(ω)` with `M(ω) = (-iω I - A)⁻¹`, the output field is
//! `√(2κ) (M(ω) - P) n(ω)` on the optical rows, and a causal filter
//! `F(t) = √(2/τ) e^{-(1/τ + iΩ)t} Θ(t)` acts on the complex output amplitude
//! as the real 2×2 matrix `[[Re F, -Im F], [Im F, Re F]]`. With these
//! choices the stationary covariance is
//!
//! `V = (1/2π) ∫ dω Υ(ω) Σ(ω) D Σ(ω)† Υ(ω)†`,
//!
//! which maps the vacuum input of an uncoupled cavity onto a vacuum filtered
//! mode for every `(Ω, τ)`.

use nalgebra::{Complex, DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{ensure_physical, CovarianceMatrix};
use crate::node::LinearModel;
use crate::quadrature::{integrate_real_line, QuadratureOptions};

type C64 = Complex<f64>;

/// Default absolute quadrature tolerance, in units where κ = 1.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Causal exponential filter selecting one travelling output mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Central frequency Ω (rad/s, relative to the pump). `Ω = -ω_B` picks
    /// the lower motional sideband.
    pub center: f64,
    /// Inverse bandwidth τ in s.
    pub tau: f64,
}

impl FilterSpec {
    pub fn new(center: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !center.is_finite() {
            return Err(Error::Domain(format!(
                "invalid filter: center {center}, tau {tau}"
            )));
        }
        Ok(Self { center, tau })
    }

    /// Filter with `τ = ε / |Ω|`.
    pub fn from_epsilon(center: f64, epsilon: f64) -> Result<Self> {
        if center == 0.0 {
            return Err(Error::Domain("ε = Ωτ cannot fix τ when Ω = 0".into()));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
        }
        Self::new(center, epsilon / center.abs())
    }

    /// Dimensionless product `Ω τ`.
    pub fn epsilon(&self) -> f64 {
        self.center * self.tau
    }
}

/// Covariance of one node over `(Q, P, X_filt, Y_filt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCm {
    pub cm: CovarianceMatrix,
    pub quadrature_error: f64,
}

/// Solves `A V + V Aᵀ = -D` through the vectorized 16×16 system.
pub fn lyapunov_steady_cm(model: &LinearModel) -> Result<CovarianceMatrix> {
    model.ensure_stable()?;
    let v = solve_lyapunov(&model.drift, &model.diffusion)?;
    Ok(CovarianceMatrix::from_matrix(v)?.symmetrized())
}

/// Solution of `A V + V Aᵀ = -D` regardless of the stability of A.
pub fn solve_lyapunov(drift: &Matrix4<f64>, diffusion: &Matrix4<f64>) -> Result<DMatrix<f64>> {
    let a = DMatrix::from_column_slice(4, 4, drift.as_slice());
    let eye = DMatrix::<f64>::identity(4, 4);
    let system = eye.kronecker(&a) + a.kronecker(&eye);
    let rhs = -DVector::from_column_slice(diffusion.as_slice());
    let vec_v = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    Ok(DMatrix::from_column_slice(4, 4, vec_v.as_slice()))
}

// Rescales rates by the model's κ so that the integrand is O(1).
struct Scaled {
    drift: Matrix4<C64>,
    diffusion: Matrix4<C64>,
    port: [f64; 4],
    output_gain: f64,
    breakpoints: Vec<f64>,
    spectral_radius: f64,
}

impl Scaled {
    fn new(model: &LinearModel) -> Self {
        let k = model.kappa;
        let drift = model.drift.map(|x| C64::new(x / k, 0.0));
        let diffusion = model.diffusion.map(|x| C64::new(x / k, 0.0));
        let port = std::array::from_fn(|i| model.port[(i, i)] * k);
        let eigen = (model.drift / k).complex_eigenvalues();
        let mut breakpoints = vec![0.0];
        let mut spectral_radius = 1.0f64;
        for z in eigen.iter() {
            breakpoints.push(z.im);
            breakpoints.push(-z.im);
            spectral_radius = spectral_radius.max(z.norm());
        }
        Self {
            drift,
            diffusion,
            port,
            output_gain: 2f64.sqrt(),
            breakpoints,
            spectral_radius,
        }
    }

    fn response(&self, omega: f64) -> Option<Matrix4<C64>> {
        (Matrix4::from_diagonal_element(C64::new(0.0, -omega)) - self.drift).try_inverse()
    }

    // Real part of T D T† / 2π, flattened column-major.
    fn second_moment(&self, t: &Matrix4<C64>) -> [f64; 16] {
        let td = t * self.diffusion;
        let mut out = [0.0; 16];
        for c in 0..4 {
            for r in c..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += (td[(r, k)] * t[(c, k)].conj()).re;
                }
                let v = acc / std::f64::consts::TAU;
                out[4 * c + r] = v;
                out[4 * r + c] = v;
            }
        }
        out
    }
}

fn to_node_cm(values: [f64; 16], error: f64, tol: f64) -> Result<NodeCm> {
    let raw = Matrix4::from_column_slice(&values);
    let asym = (raw - raw.transpose()).amax();
    if asym > 10.0 * tol {
        return Err(Error::Numerical(format!(
            "spectral covariance asymmetric by {asym:e}"
        )));
    }
    let cm =
        CovarianceMatrix::from_matrix(DMatrix::from_column_slice(4, 4, &values))?.symmetrized();
    Ok(NodeCm {
        cm,
        quadrature_error: error,
    })
}

fn check_tol(tol: f64) -> Result<QuadratureOptions> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(QuadratureOptions {
        abs_tol: tol,
        ..Default::default()
    })
}

/// Intracavity covariance `(1/2π) ∫ dω M D M†` by quadrature; equal to
/// [`lyapunov_steady_cm`] up to the quadrature error.
pub fn spectral_intracavity_cm(model: &LinearModel, tol: f64) -> Result<NodeCm> {
    model.ensure_stable()?;
    let opts = check_tol(tol)?;
    let s = Scaled::new(model);
    let window = 20.0 * s.spectral_radius;
    let integrand = |omega: f64| match s.response(omega) {
        Some(m) => s.second_moment(&m),
        None => [f64::NAN; 16],
    };
    let est = integrate_real_line(integrand, &s.breakpoints, window, &opts)?;
    check_finite(&est.value)?;
    to_node_cm(est.value, est.error, tol)
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite spectral integrand".into()))
    }
}

/// Stationary covariance of the BEC quadratures and the filtered output mode.
pub fn filtered_node_cm(model: &LinearModel, filter: &FilterSpec, tol: f64) -> Result<NodeCm> {
    model.ensure_stable()?;
    let opts = check_tol(tol)?;
    let s = Scaled::new(model);
    let center = filter.center / model.kappa;
    let tau = filter.tau * model.kappa;
    let rate = 1.0 / tau;
    let amplitude = (2.0 / tau).sqrt();
    // F(ω) = √(2/τ) / (1/τ + iΩ - iω)
    let transfer = |omega: f64| C64::new(amplitude, 0.0) / C64::new(rate, center - omega);

    let integrand = |omega: f64| {
        let Some(m) = s.response(omega) else {
            return [f64::NAN; 16];
        };
        // Σ: BEC rows pass through, optical rows become the output field.
        let mut sigma = m;
        for r in 2..4 {
            for c in 0..4 {
                sigma[(r, c)] *= s.output_gain;
            }
            sigma[(r, r)] -= C64::new(s.output_gain * s.port[r], 0.0);
        }
        let f_pos = transfer(omega);
        let f_neg = transfer(-omega).conj();
        let re = (f_pos + f_neg) * 0.5;
        let im = (f_pos - f_neg) * C64::new(0.0, -0.5);
        let mut t = sigma;
        for c in 0..4 {
            let (x, y) = (sigma[(2, c)], sigma[(3, c)]);
            t[(2, c)] = re * x - im * y;
            t[(3, c)] = im * x + re * y;
        }
        s.second_moment(&t)
    };

    let mut breakpoints = s.breakpoints.clone();
    breakpoints.extend([center, -center]);
    let window = 20.0 * s.spectral_radius.max(center.abs() + 10.0 * rate);
    let est = integrate_real_line(integrand, &breakpoints, window, &opts)?;
    check_finite(&est.value)?;
    let node = to_node_cm(est.value, est.error, tol)?;
    let cm = ensure_physical(node.cm, "filtered node covariance")?;
    Ok(NodeCm {
        cm,
        quadrature_error: node.quadrature_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::{build_linear_model, derive_node, Coupling, NodeParams};
    use crate::oracles::random_stable_model;
    use nalgebra::Vector4;

    fn model(coupling: f64) -> (LinearModel, crate::node::DerivedNode) {
        let p = NodeParams {
            coupling: Coupling::CollisionlessOmegaBMultiple(coupling),
            ..Default::default()
        };
        let d = derive_node(&p).unwrap();
        (build_linear_model(&d), d)
    }

    #[test]
    fn scalar_balance() {
        let k = 3.0;
        let m = LinearModel::from_matrices(
            Matrix4::identity() * -k,
            Matrix4::identity() * (2.0 * k * 0.5),
            k,
        );
        let v = lyapunov_steady_cm(&m).unwrap();
        assert!(v.max_abs_diff(&CovarianceMatrix::vacuum(2)) < 1e-14);
    }

    #[test]
    fn decoupled_intracavity_state() {
        let (m, d) = model(0.0);
        let v = lyapunov_steady_cm(&m).unwrap();
        let nb = d.n_c + 0.5;
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![nb, nb, 0.5, 0.5]));
        assert!((v.matrix() - expected).amax() < 1e-12);
    }

    #[test]
    fn lyapunov_residual_on_random_models() {
        for seed in 0..40 {
            let m = random_stable_model(seed);
            let v = lyapunov_steady_cm(&m).unwrap();
            let vm = Matrix4::from_column_slice(v.matrix().as_slice());
            let residual = m.drift * vm + vm * m.drift.transpose() + m.diffusion;
            assert!(
                residual.amax() < 1e-10 * m.diffusion.amax().max(1e-300),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn unstable_model_is_rejected() {
        let m = LinearModel::from_matrices(
            Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, -1.0)),
            Matrix4::identity(),
            1.0,
        );
        assert!(matches!(
            lyapunov_steady_cm(&m),
            Err(Error::Unstable { .. })
        ));
        let f = FilterSpec::new(-1.0, 1.0).unwrap();
        assert!(matches!(
            filtered_node_cm(&m, &f, 1e-8),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn filter_construction() {
        let f = FilterSpec::from_epsilon(-2.0, 8.0).unwrap();
        assert_eq!(f.tau, 4.0);
        assert_eq!(f.epsilon(), -8.0);
        assert!(FilterSpec::from_epsilon(0.0, 8.0).is_err());
        assert!(FilterSpec::new(1.0, 0.0).is_err());
        let (m, _) = model(0.5);
        assert!(filtered_node_cm(&m, &FilterSpec::new(1.0, 1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn decoupled_filtered_mode_is_vacuum() {
        let (m, d) = model(0.0);
        for (ratio, eps) in [(-1.0, 8.0), (-0.3, 0.5), (-2.0, 30.0)] {
            let f = FilterSpec::from_epsilon(ratio * d.omega_b, eps).unwrap();
            let v = filtered_node_cm(&m, &f, 1e-9).unwrap();
            let nb = d.n_c + 0.5;
            let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![nb, nb, 0.5, 0.5]));
            assert!(
                (v.cm.matrix() - expected).amax() < 1e-7,
                "{ratio} {eps}: {}",
                v.cm.matrix()
            );
        }
    }

    #[test]
    fn coupled_node_correlates_bec_and_light() {
        let (m, d) = model(0.5);
        let f = FilterSpec::from_epsilon(-d.omega_b, 8.0).unwrap();
        let v = filtered_node_cm(&m, &f, DEFAULT_TOL).unwrap();
        let cross = v.cm.matrix().view((0, 2), (2, 2)).amax();
        assert!(cross > 1e-2);
        assert!(crate::gaussian::validate(&v.cm).is_valid());
        assert!(v.quadrature_error <= DEFAULT_TOL);
    }

    #[test]
    fn spectral_integral_matches_lyapunov() {
        let (m, _) = model(0.5);
        let tol = 1e-9;
        let a = spectral_intracavity_cm(&m, tol).unwrap();
        let b = lyapunov_steady_cm(&m).unwrap();
        assert!(a.cm.max_abs_diff(&b) < 10.0 * tol);
    }

    #[test]
    fn stability_iff_positive_lyapunov_solution() {
        use nalgebra::Cholesky;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        use rand_distr::StandardNormal;

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (mut stable, mut unstable) = (0, 0);
        while stable < 100 || unstable < 100 {
            let a = Matrix4::<f64>::from_fn(|_, _| rng.sample(StandardNormal))
                - Matrix4::identity() * rng.random_range(-1.0..3.0);
            let b = Matrix4::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
            let d = b * b.transpose() + Matrix4::identity() * 0.1;
            let model = LinearModel::from_matrices(a, d, 1.0);
            if model.max_real_part().abs() < 1e-3 {
                continue;
            }
            let positive = solve_lyapunov(&a, &d)
                .ok()
                .map(|v| Matrix4::from_column_slice(v.as_slice()))
                .is_some_and(|v| Cholesky::new((v + v.transpose()) * 0.5).is_some());
            assert_eq!(model.is_stable(), positive, "{a}");
            if positive {
                stable += 1;
            } else {
                unstable += 1;
            }
        }
    }

    #[test]
    fn full_diffusion_matrix_is_honoured() {
        let base = random_stable_model(7);
        let b = Matrix4::from_fn(|r, c| ((r + 2 * c) as f64).sin());
        let model = LinearModel::from_matrices(base.drift, b * b.transpose(), 1.0);
        let tol = 1e-9;
        let a = spectral_intracavity_cm(&model, tol).unwrap();
        let l = lyapunov_steady_cm(&model).unwrap();
        assert!(a.cm.max_abs_diff(&l) < 10.0 * tol);
    }

    #[test]
    fn filtered_matrix_converges_with_tolerance() {
        let (m, d) = model(0.5);
        let f = FilterSpec::from_epsilon(-d.omega_b, 8.0).unwrap();
        let coarse = filtered_node_cm(&m, &f, 1e-6).unwrap().cm;
        let fine = filtered_node_cm(&m, &f, 1e-8).unwrap().cm;
        let finest = filtered_node_cm(&m, &f, 1e-11).unwrap().cm;
        assert!(coarse.max_abs_diff(&finest) < 1e-5);
        assert!(fine.max_abs_diff(&finest) < 1e-7);
    }

    #[test]
    fn filtered_matrix_is_continuous_in_bandwidth() {
        let (m, d) = model(0.5);
        let at = |eps: f64| {
            let f = FilterSpec::from_epsilon(-d.omega_b, eps).unwrap();
            filtered_node_cm(&m, &f, 1e-10).unwrap().cm
        };
        let h = 1e-6;
        let step = at(8.0).max_abs_diff(&at(8.0 + h));
        assert!(step < 1e-4 * h.sqrt(), "{step:e}");
    }
}
