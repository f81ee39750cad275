//! Reference constructions used by the validation suites.
//!
//! Nothing here shares numerical kernels with the main pipeline: block
//! determinants are written out by hand and the discord closed form is
//! re-evaluated in 200-bit binary floating point.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use nalgebra::{DMatrix, Matrix2, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gaussian::CovarianceMatrix;
use crate::node::LinearModel;

pub use crate::bell::general_dyne_oracle;

/// Two-mode squeezed vacuum with squeezing parameter `r`.
pub fn make_tmsv(r: f64) -> CovarianceMatrix {
    let c = (2.0 * r).cosh() / 2.0;
    let s = (2.0 * r).sinh() / 2.0;
    CovarianceMatrix::from_blocks(
        &Matrix2::from_diagonal_element(c),
        &Matrix2::from_diagonal_element(c),
        &Matrix2::new(s, 0.0, 0.0, -s),
    )
}

/// Recipe for a random physical covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomStateSpec {
    pub seed: u64,
    pub n_modes: usize,
    /// Range of the thermal occupation of each symplectic eigenmode.
    pub thermal: (f64, f64),
    /// Range of single-mode squeezing parameters.
    pub squeezing: (f64, f64),
    /// Number of (local rotation + squeezer, nearest-neighbour beam splitter) layers.
    pub layers: usize,
}

impl Default for RandomStateSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_modes: 2,
            thermal: (0.0, 1.0),
            squeezing: (0.0, 0.8),
            layers: 2,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// `S · diag(ν) · Sᵀ` with `ν_k = n_k + 1/2` and `S` a product of random
/// rotations, squeezers and beam splitters. Deterministic in `spec.seed`.
pub fn random_physical_cm(spec: &RandomStateSpec) -> CovarianceMatrix {
    let n = spec.n_modes.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cm = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let nu = uniform(&mut rng, spec.thermal) + 0.5;
        cm[(2 * k, 2 * k)] = nu;
        cm[(2 * k + 1, 2 * k + 1)] = nu;
    }
    for _ in 0..spec.layers {
        let mut s = DMatrix::<f64>::identity(2 * n, 2 * n);
        for k in 0..n {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let r = uniform(&mut rng, spec.squeezing);
            let (sin, cos) = theta.sin_cos();
            let local =
                Matrix2::new(cos, -sin, sin, cos) * Matrix2::new((-r).exp(), 0.0, 0.0, r.exp());
            s.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&local);
        }
        cm = &s * cm * s.transpose();
        for k in 0..n.saturating_sub(1) {
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let (sin, cos) = phi.sin_cos();
            let mut bs = DMatrix::<f64>::identity(2 * n, 2 * n);
            for q in 0..2 {
                let (a, b) = (2 * k + q, 2 * k + 2 + q);
                bs[(a, a)] = cos;
                bs[(a, b)] = sin;
                bs[(b, a)] = -sin;
                bs[(b, b)] = cos;
            }
            cm = &bs * cm * bs.transpose();
        }
    }
    let cm = (&cm + cm.transpose()) * 0.5;
    CovarianceMatrix::from_matrix(cm).expect("even dimension by construction")
}

/// Random drift/diffusion pair whose slowest mode decays at a rate in
/// `[0.05, 1]`. The diffusion is diagonal and non-negative.
pub fn random_stable_model(seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = nalgebra::Matrix4::<f64>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let max_re = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = rng.random_range(0.05..1.0);
    a -= nalgebra::Matrix4::identity() * (max_re + margin);
    let d = nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::from_fn(|_, _| {
        rng.random_range(0.0..2.0)
    }));
    LinearModel::from_matrices(a, d, 1.0)
}

type Big = FBig<HalfEven, 2>;

const PRECISION_BITS: usize = 200;

fn big(x: f64) -> Big {
    Big::try_from(x)
        .expect("finite covariance entry")
        .with_precision(PRECISION_BITS)
        .value()
}

fn big_abs(x: &Big) -> Big {
    if *x < Big::ZERO {
        -x.clone()
    } else {
        x.clone()
    }
}

fn det2(a: &Big, b: &Big, c: &Big, d: &Big) -> Big {
    a.clone() * d.clone() - b.clone() * c.clone()
}

fn det3(m: &[[Big; 3]; 3]) -> Big {
    m[0][0].clone() * det2(&m[1][1], &m[1][2], &m[2][1], &m[2][2])
        - m[0][1].clone() * det2(&m[1][0], &m[1][2], &m[2][0], &m[2][2])
        + m[0][2].clone() * det2(&m[1][0], &m[1][1], &m[2][0], &m[2][1])
}

fn det4(m: &[[Big; 4]; 4]) -> Big {
    let mut total = big(0.0);
    for col in 0..4 {
        let minor: [[Big; 3]; 3] = std::array::from_fn(|r| {
            let cols: Vec<usize> = (0..4).filter(|&c| c != col).collect();
            std::array::from_fn(|c| m[r + 1][cols[c]].clone())
        });
        let term = m[0][col].clone() * det3(&minor);
        total = if col % 2 == 0 {
            total + term
        } else {
            total - term
        };
    }
    total
}

fn big_f(x: &Big, ln2: &Big) -> Big {
    let one = big(1.0);
    if *x <= one {
        return big(0.0);
    }
    let half = big(0.5);
    let plus = (x.clone() + one.clone()) * half.clone();
    let minus = (x.clone() - one) * half;
    (plus.clone() * plus.ln() - minus.clone() * minus.ln()) / ln2.clone()
}

/// Gaussian discord of a two-mode state (mode 0 measured) evaluated from the
/// closed form in 200-bit arithmetic.
pub fn highprec_discord(cm: &CovarianceMatrix) -> f64 {
    assert_eq!(cm.n_modes(), 2, "highprec_discord needs a two-mode state");
    let m: Matrix4<f64> = cm.matrix().fixed_view::<4, 4>(0, 0).into_owned();
    let e: [[Big; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| big(m[(r, c)])));
    let four = big(4.0);
    let s1 = four.clone() * det2(&e[0][0], &e[0][1], &e[1][0], &e[1][1]);
    let s2 = four.clone() * det2(&e[2][2], &e[2][3], &e[3][2], &e[3][3]);
    let s3 = four * det2(&e[0][2], &e[0][3], &e[1][2], &e[1][3]);
    let s4 = big(16.0) * det4(&e);

    let one = big(1.0);
    let two = big(2.0);
    let ln2 = two.ln();
    let s_delta = s1.clone() + s2.clone() + two.clone() * s3.clone();
    let disc = s_delta.clone() * s_delta.clone() - big(4.0) * s4.clone();
    let root = if disc < Big::ZERO {
        big(0.0)
    } else {
        disc.sqrt()
    };
    let lambda_plus = ((s_delta.clone() + root.clone()) / two.clone()).sqrt();
    let lambda_minus_sq = (s_delta - root) / two.clone();
    let lambda_minus = if lambda_minus_sq < Big::ZERO {
        big(0.0)
    } else {
        lambda_minus_sq.sqrt()
    };

    let s3_sq = s3.clone() * s3.clone();
    let gap = s4.clone() - s2.clone() * s1.clone();
    let lhs = gap.clone() * gap.clone();
    let rhs = (one.clone() + s1.clone()) * s3_sq.clone() * (s2.clone() + s4.clone());
    let s1m = s1.clone() - one.clone();
    let pure_measured = big_abs(&s1m) < big(1e-12);
    let epsilon = if lhs <= rhs && !pure_measured {
        let inner = s3_sq.clone() + s1m.clone() * (s4.clone() - s2.clone());
        let inner_root = if inner < Big::ZERO {
            big(0.0)
        } else {
            inner.sqrt()
        };
        (two.clone() * s3_sq.clone()
            + s1m.clone() * (s4.clone() - s2.clone())
            + two.clone() * big_abs(&s3) * inner_root)
            / (s1m.clone() * s1m)
    } else {
        let inner = s3_sq.clone() * s3_sq.clone() + lhs
            - two.clone() * s3_sq.clone() * (s4.clone() + s2.clone() * s1.clone());
        let inner_root = if inner < Big::ZERO {
            big(0.0)
        } else {
            inner.sqrt()
        };
        (s2 * s1.clone() - s3_sq + s4 - inner_root) / (two * s1.clone())
    };

    let discord = big_f(&s1.sqrt(), &ln2) - big_f(&lambda_minus, &ln2) - big_f(&lambda_plus, &ln2)
        + big_f(&epsilon.sqrt(), &ln2);
    discord.to_f64().value()
}
