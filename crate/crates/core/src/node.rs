//! One BEC-cavity node: physical parameters, derived frequencies, the
//! semiclassical steady state and the linearized fluctuation dynamics.
//!
//! All frequencies are angular (rad/s). The fluctuation vector is ordered
//! `(δQ, δP, δX, δY)`: Bogoliubov side-mode quadratures first, then the
//! intracavity field quadratures.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// How the cavity linewidth is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CavityDamping {
    /// κ = πc / (L 𝓕).
    Finesse(f64),
    /// κ directly, in s⁻¹.
    Rate(f64),
}

/// How the pump amplitude `E_d` is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Drive {
    /// `E_d` as a multiple of κ.
    KappaMultiple(f64),
    /// Input laser power in W, `E_d = √(2𝒫κ / ħω_c)`.
    Power(f64),
}

/// How the effective cavity detuning Δ is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Detuning {
    /// Δ as a multiple of the effective BEC detuning Ω_c.
    OmegaCMultiple(f64),
    /// Δ directly, in rad/s.
    Rate(f64),
}

/// How the atom-cavity coupling G is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    /// G as a multiple of the collisionless Bogoliubov frequency `4ω_R`.
    ///
    /// G is a property of the cavity and the atomic cloud and does not
    /// change with the s-wave collision rate, so the reference frequency
    /// is the one at `ω_sw = 0`.
    CollisionlessOmegaBMultiple(f64),
    /// G directly, in rad/s.
    Rate(f64),
    /// G from the microscopic atomic parameters of [`NodeParams::atomic`].
    FromAtoms,
}

/// Microscopic atomic parameters; only needed to derive G from first principles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicParams {
    pub atom_number: f64,
    /// Atomic mass in kg.
    pub atom_mass: f64,
    /// Pump-atom detuning Δ_a in rad/s.
    pub atomic_detuning: f64,
    /// Vacuum Rabi frequency g₀ in rad/s.
    pub vacuum_rabi: f64,
    /// s-wave scattering length in m.
    pub scattering_length: f64,
    /// Waist of the optical potential in m.
    pub beam_waist: f64,
}

impl AtomicParams {
    /// Optical lattice depth per photon, `U₀ = g₀² / Δ_a`.
    pub fn lattice_depth_per_photon(&self) -> f64 {
        self.vacuum_rabi * self.vacuum_rabi / self.atomic_detuning
    }

    /// Two-body interaction strength `U_s = 4πħ² a_s / m_a` (J·m).
    pub fn interaction_strength(&self) -> f64 {
        4.0 * std::f64::consts::PI * HBAR * HBAR * self.scattering_length / self.atom_mass
    }

    /// `ω_R = ħk² / 2m_a` for wavenumber `k`.
    pub fn recoil_frequency(&self, wavenumber: f64) -> f64 {
        HBAR * wavenumber * wavenumber / (2.0 * self.atom_mass)
    }

    /// Effective mass of the side mode, `m_s = ħω_c² / (L² N U₀² ω_R)`.
    pub fn side_mode_mass(&self, cavity_frequency: f64, cavity_length: f64, recoil: f64) -> f64 {
        let u0 = self.lattice_depth_per_photon();
        HBAR * cavity_frequency * cavity_frequency
            / (cavity_length * cavity_length * self.atom_number * u0 * u0 * recoil)
    }

    /// `G = (ω_c / L) √(ħ / 4ω_R m_s)`.
    pub fn coupling(&self, cavity_frequency: f64, cavity_length: f64, recoil: f64) -> f64 {
        let m_s = self.side_mode_mass(cavity_frequency, cavity_length, recoil);
        cavity_frequency / cavity_length * (HBAR / (4.0 * recoil * m_s)).sqrt()
    }

    /// Whether the pump is far enough from the atomic line for the excited
    /// state to be eliminated (|Δ_a| ≥ 10 g₀).
    pub fn is_dispersive(&self) -> bool {
        self.atomic_detuning.abs() >= 10.0 * self.vacuum_rabi.abs()
    }
}

/// Physical inputs of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    /// Cavity length L in m.
    pub cavity_length: f64,
    /// Pump wavelength λ in m.
    pub wavelength: f64,
    pub damping: CavityDamping,
    pub drive: Drive,
    pub detuning: Detuning,
    /// Recoil frequency ω_R in rad/s.
    pub recoil: f64,
    /// s-wave collision frequency as a multiple of ω_R.
    pub collision_ratio: f64,
    /// BEC side-mode damping γ_c as a multiple of κ.
    pub bec_damping_ratio: f64,
    pub coupling: Coupling,
    /// Condensate temperature T_c in K.
    pub temperature: f64,
    pub atomic: Option<AtomicParams>,
}

impl Default for NodeParams {
    /// The operating point used throughout the reproduced figures.
    fn default() -> Self {
        Self {
            cavity_length: 1e-3,
            wavelength: 1046e-9,
            damping: CavityDamping::Finesse(1.15e5),
            drive: Drive::KappaMultiple(3.0),
            detuning: Detuning::OmegaCMultiple(1.0),
            recoil: 2.0 * std::f64::consts::PI * 3.57e3,
            collision_ratio: 0.0,
            bec_damping_ratio: 1e-3,
            coupling: Coupling::CollisionlessOmegaBMultiple(0.5),
            temperature: 0.1e-6,
            atomic: None,
        }
    }
}

/// Semiclassical mean values of the linearized expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub q: f64,
    pub p: f64,
    /// Intracavity mean field, taken real and non-negative.
    pub alpha: f64,
}

/// Rates and occupations derived from [`NodeParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedNode {
    pub kappa: f64,
    /// Effective BEC detuning Ω_c = 4ω_R + ω_sw/2.
    pub omega_c: f64,
    /// Bogoliubov frequency ω_B = √(Ω_c (Ω_c + ω_sw)).
    pub omega_b: f64,
    pub omega_sw: f64,
    /// Thermal occupation of the Bogoliubov mode.
    pub n_c: f64,
    pub delta: f64,
    pub coupling: f64,
    pub gamma_c: f64,
    pub drive: f64,
    /// Cavity (≈ pump) angular frequency 2πc/λ.
    pub cavity_frequency: f64,
    pub steady: SteadyState,
    /// G recomputed from atomic parameters, when those are present.
    pub coupling_from_atoms: Option<f64>,
}

fn require(cond: bool, what: &str, value: f64) -> Result<()> {
    if cond && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} out of range: {value}")))
    }
}

/// Bose occupation `1 / (exp(ħω / k_B T) - 1)`; zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (BOLTZMANN * temperature)).exp_m1()
}

pub fn derive_node(params: &NodeParams) -> Result<DerivedNode> {
    require(
        params.cavity_length > 0.0,
        "cavity length",
        params.cavity_length,
    )?;
    require(params.wavelength > 0.0, "wavelength", params.wavelength)?;
    require(params.recoil > 0.0, "recoil frequency", params.recoil)?;
    require(
        params.collision_ratio >= 0.0,
        "collision ratio",
        params.collision_ratio,
    )?;
    require(
        params.bec_damping_ratio >= 0.0,
        "BEC damping ratio",
        params.bec_damping_ratio,
    )?;
    require(
        params.temperature >= 0.0,
        "condensate temperature",
        params.temperature,
    )?;

    let kappa = match params.damping {
        CavityDamping::Finesse(f) => {
            require(f > 0.0, "finesse", f)?;
            std::f64::consts::PI * SPEED_OF_LIGHT / (params.cavity_length * f)
        }
        CavityDamping::Rate(k) => {
            require(k > 0.0, "cavity damping", k)?;
            k
        }
    };
    let cavity_frequency = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / params.wavelength;

    let omega_sw = params.collision_ratio * params.recoil;
    let omega_c = 4.0 * params.recoil + omega_sw / 2.0;
    let omega_b = (omega_c * (omega_c + omega_sw)).sqrt();
    let n_c = bose_occupation(omega_b, params.temperature);

    let drive = match params.drive {
        Drive::KappaMultiple(m) => {
            require(m >= 0.0, "drive multiple", m)?;
            m * kappa
        }
        Drive::Power(p) => {
            require(p >= 0.0, "laser power", p)?;
            (2.0 * p * kappa / (HBAR * cavity_frequency)).sqrt()
        }
    };
    let delta = match params.detuning {
        Detuning::OmegaCMultiple(m) => m * omega_c,
        Detuning::Rate(d) => d,
    };
    require(delta.is_finite(), "detuning", delta)?;

    let coupling_from_atoms = params
        .atomic
        .map(|a| a.coupling(cavity_frequency, params.cavity_length, params.recoil));
    let coupling = match params.coupling {
        Coupling::CollisionlessOmegaBMultiple(m) => m * 4.0 * params.recoil,
        Coupling::Rate(g) => g,
        Coupling::FromAtoms => coupling_from_atoms.ok_or_else(|| {
            Error::Domain("coupling derived from atoms, but no atomic parameters given".into())
        })?,
    };
    require(coupling >= 0.0, "coupling", coupling)?;

    let mut node = DerivedNode {
        kappa,
        omega_c,
        omega_b,
        omega_sw,
        n_c,
        delta,
        coupling,
        gamma_c: params.bec_damping_ratio * kappa,
        drive,
        cavity_frequency,
        steady: SteadyState {
            q: 0.0,
            p: 0.0,
            alpha: 0.0,
        },
        coupling_from_atoms,
    };
    node.steady = steady_state(&node)?;
    Ok(node)
}

/// Mean values with the time derivatives of the Langevin equations set to zero.
pub fn steady_state(d: &DerivedNode) -> Result<SteadyState> {
    if d.omega_c == 0.0 {
        return Err(Error::Domain("steady state undefined for Ω_c = 0".into()));
    }
    let alpha = d.drive / d.delta.hypot(d.kappa);
    let q =
        -d.coupling * alpha * alpha / (d.omega_c + d.omega_sw + d.gamma_c * d.gamma_c / d.omega_c);
    Ok(SteadyState {
        q,
        p: d.gamma_c / d.omega_c * q,
        alpha,
    })
}

/// Effective detuning Δ solving `Δ = δ_c + G Q_s(Δ)` for a bare detuning δ_c.
///
/// `Δ - δ_c - G Q_s(Δ)` is positive at `δ_c` and non-positive at
/// `δ_c - G²E_d²/(κ² (Ω_c + ω_sw + γ_c²/Ω_c))`, so bisection on that bracket
/// always returns a root. In the bistable regime it is one of several.
pub fn solve_effective_detuning(d: &DerivedNode, bare_detuning: f64) -> Result<f64> {
    if d.omega_c == 0.0 {
        return Err(Error::Domain("steady state undefined for Ω_c = 0".into()));
    }
    let stiffness = d.omega_c + d.omega_sw + d.gamma_c * d.gamma_c / d.omega_c;
    let k = d.coupling * d.coupling * d.drive * d.drive / stiffness;
    let residual = |delta: f64| delta - bare_detuning + k / (delta * delta + d.kappa * d.kappa);
    let (mut lo, mut hi) = (bare_detuning - k / (d.kappa * d.kappa), bare_detuning);
    if k == 0.0 {
        return Ok(bare_detuning);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(d.kappa) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which diffusion coefficient is used for the optical quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiffusionConvention {
    /// `κ`: with vacuum variance 1/2 the empty cavity relaxes to the vacuum.
    #[default]
    VacuumHalf,
    /// `2κ`, the coefficient for unit vacuum variance.
    UnitVacuum,
}

/// Drift matrix A, diffusion D and output-port matrix of the linearized dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub drift: Matrix4<f64>,
    pub diffusion: Matrix4<f64>,
    /// `diag(0, 0, 1/2κ, 1/2κ)`, in s.
    pub port: Matrix4<f64>,
    pub kappa: f64,
}

impl LinearModel {
    /// Wraps arbitrary drift and diffusion matrices; `kappa` sets the output
    /// coupling of the last two quadratures and the rate unit used in quadrature.
    pub fn from_matrices(drift: Matrix4<f64>, diffusion: Matrix4<f64>, kappa: f64) -> Self {
        let p = 1.0 / (2.0 * kappa);
        Self {
            drift,
            diffusion,
            port: Matrix4::from_diagonal(&Vector4::new(0.0, 0.0, p, p)),
            kappa,
        }
    }

    /// Largest real part among the eigenvalues of the drift matrix.
    pub fn max_real_part(&self) -> f64 {
        self.drift
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every eigenvalue of A lies strictly in the left half-plane, by a
    /// margin of `1e-12 ‖A‖`.
    pub fn is_stable(&self) -> bool {
        self.max_real_part() < -1e-12 * self.drift.norm()
    }

    pub fn ensure_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                max_real_part: self.max_real_part(),
            })
        }
    }
}

pub fn build_linear_model(d: &DerivedNode) -> LinearModel {
    build_linear_model_with(d, DiffusionConvention::VacuumHalf)
}

pub fn build_linear_model_with(d: &DerivedNode, convention: DiffusionConvention) -> LinearModel {
    let g = std::f64::consts::SQRT_2 * d.coupling * d.steady.alpha;
    #[rustfmt::skip]
    let drift = Matrix4::new(
        -d.gamma_c,                 d.omega_c,  0.0,       0.0,
        -(d.omega_c + d.omega_sw),  -d.gamma_c, -g,        0.0,
        0.0,                        0.0,        -d.kappa,  d.delta,
        -g,                         0.0,        -d.delta,  -d.kappa,
    );
    let bec = d.gamma_c * (2.0 * d.n_c + 1.0);
    let optical = match convention {
        DiffusionConvention::VacuumHalf => d.kappa,
        DiffusionConvention::UnitVacuum => 2.0 * d.kappa,
    };
    let diffusion = Matrix4::from_diagonal(&Vector4::new(bec, bec, optical, optical));
    LinearModel::from_matrices(drift, diffusion, d.kappa)
}

/// Convenience: parameters straight to the stability verdict.
pub fn is_stable(model: &LinearModel) -> bool {
    model.is_stable()
}
