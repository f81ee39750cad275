//! Run configuration: TOML with unit-bearing key names.
//!
//! Node and filter tables come in three layers, `both`, then `a` / `b`,
//! with the more specific layer winning per quantity. Everything is
//! resolved into [`RunConfig`], which stays in file units so that its
//! echo ([`RunConfig::to_toml`]) re-parses to an identical value.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::Range;

use becbell::bell::BellConfig;
use becbell::measures::MeasuredMode;
use becbell::node::{AtomicParams, CavityDamping, Coupling, Detuning, Drive, NodeParams};
use becbell::pipeline::{Bandwidth, FilterConfig, PipelineConfig};
use becbell::spectral::DEFAULT_TOL;
use becbell::sweep::{Axis, Knob, Output, SweepSpec};
use serde::Deserialize;
use toml::Spanned;

const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// A configuration problem, anchored to a line of the input when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

type Sf = Option<Spanned<f64>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    nodes: RawLayers<RawNode>,
    #[serde(default)]
    filters: RawLayers<RawFilter>,
    #[serde(default)]
    detection: RawDetection,
    #[serde(default)]
    solver: RawSolver,
    sweep: Option<Spanned<RawSweep>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayers<T> {
    both: Option<T>,
    a: Option<T>,
    b: Option<T>,
}

impl<T> Default for RawLayers<T> {
    fn default() -> Self {
        Self {
            both: None,
            a: None,
            b: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    cavity_length_mm: Sf,
    wavelength_nm: Sf,
    finesse: Sf,
    kappa_per_s: Sf,
    drive_over_kappa: Sf,
    laser_power_mw: Sf,
    detuning_over_omega_c: Sf,
    detuning_per_s: Sf,
    recoil_frequency_khz: Sf,
    collision_over_recoil: Sf,
    bec_damping_over_kappa: Sf,
    coupling_over_omega_b0: Sf,
    coupling_per_s: Sf,
    coupling_from_atoms: Option<Spanned<bool>>,
    temperature_uk: Sf,
    atomic: Option<RawAtomic>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtomic {
    atom_number: Sf,
    atom_mass_amu: Sf,
    atomic_detuning_per_s: Sf,
    vacuum_rabi_per_s: Sf,
    scattering_length_nm: Sf,
    beam_waist_um: Sf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    center_over_omega_b: Sf,
    epsilon: Sf,
    tau_us: Sf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    transmissivity: Sf,
    efficiency_1: Sf,
    efficiency_2: Sf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Sf,
    measured_mode: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axes: Vec<Spanned<RawAxis>>,
    outputs: Option<Vec<Spanned<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    knob: Spanned<String>,
    min: Spanned<f64>,
    max: Spanned<f64>,
    count: Spanned<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingKey {
    Finesse(f64),
    KappaPerS(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveKey {
    OverKappa(f64),
    LaserPowerMw(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetuningKey {
    OverOmegaC(f64),
    PerS(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingKey {
    OverOmegaB0(f64),
    PerS(f64),
    FromAtoms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicConfig {
    pub atom_number: f64,
    pub atom_mass_amu: f64,
    pub atomic_detuning_per_s: f64,
    pub vacuum_rabi_per_s: f64,
    pub scattering_length_nm: f64,
    pub beam_waist_um: f64,
}

/// One node in file units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeConfig {
    pub cavity_length_mm: f64,
    pub wavelength_nm: f64,
    pub damping: DampingKey,
    pub drive: DriveKey,
    pub detuning: DetuningKey,
    pub recoil_frequency_khz: f64,
    pub collision_over_recoil: f64,
    pub bec_damping_over_kappa: f64,
    pub coupling: CouplingKey,
    pub temperature_uk: f64,
    pub atomic: Option<AtomicConfig>,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            cavity_length_mm: 1.0,
            wavelength_nm: 1046.0,
            damping: DampingKey::Finesse(1.15e5),
            drive: DriveKey::OverKappa(3.0),
            detuning: DetuningKey::OverOmegaC(1.0),
            recoil_frequency_khz: 3.57,
            collision_over_recoil: 0.0,
            bec_damping_over_kappa: 1e-3,
            coupling: CouplingKey::OverOmegaB0(0.5),
            temperature_uk: 0.1,
            atomic: None,
        }
    }
}

impl NodeConfig {
    pub fn to_params(&self) -> NodeParams {
        NodeParams {
            cavity_length: self.cavity_length_mm * 1e-3,
            wavelength: self.wavelength_nm * 1e-9,
            damping: match self.damping {
                DampingKey::Finesse(f) => CavityDamping::Finesse(f),
                DampingKey::KappaPerS(k) => CavityDamping::Rate(k),
            },
            drive: match self.drive {
                DriveKey::OverKappa(m) => Drive::KappaMultiple(m),
                DriveKey::LaserPowerMw(p) => Drive::Power(p * 1e-3),
            },
            detuning: match self.detuning {
                DetuningKey::OverOmegaC(m) => Detuning::OmegaCMultiple(m),
                DetuningKey::PerS(d) => Detuning::Rate(d),
            },
            recoil: TAU * self.recoil_frequency_khz * 1e3,
            collision_ratio: self.collision_over_recoil,
            bec_damping_ratio: self.bec_damping_over_kappa,
            coupling: match self.coupling {
                CouplingKey::OverOmegaB0(m) => Coupling::CollisionlessOmegaBMultiple(m),
                CouplingKey::PerS(g) => Coupling::Rate(g),
                CouplingKey::FromAtoms => Coupling::FromAtoms,
            },
            temperature: self.temperature_uk * 1e-6,
            atomic: self.atomic.map(|a| AtomicParams {
                atom_number: a.atom_number,
                atom_mass: a.atom_mass_amu * ATOMIC_MASS_UNIT,
                atomic_detuning: a.atomic_detuning_per_s,
                vacuum_rabi: a.vacuum_rabi_per_s,
                scattering_length: a.scattering_length_nm * 1e-9,
                beam_waist: a.beam_waist_um * 1e-6,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthKey {
    Epsilon(f64),
    TauUs(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSettings {
    pub center_over_omega_b: f64,
    pub bandwidth: BandwidthKey,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            center_over_omega_b: -1.0,
            bandwidth: BandwidthKey::Epsilon(8.0),
        }
    }
}

impl FilterSettings {
    pub fn to_filter(&self) -> FilterConfig {
        FilterConfig {
            center_ratio: self.center_over_omega_b,
            bandwidth: match self.bandwidth {
                BandwidthKey::Epsilon(e) => Bandwidth::Epsilon(e),
                BandwidthKey::TauUs(t) => Bandwidth::Tau(t * 1e-6),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub axes: Vec<Axis>,
    pub outputs: Vec<Output>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub node_a: NodeConfig,
    pub node_b: NodeConfig,
    pub filter_a: FilterSettings,
    pub filter_b: FilterSettings,
    pub detection: BellConfig,
    pub tolerance: f64,
    pub measured_mode: MeasuredMode,
    pub sweep: Option<SweepSettings>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            node_a: NodeConfig::default(),
            node_b: NodeConfig::default(),
            filter_a: FilterSettings::default(),
            filter_b: FilterSettings::default(),
            detection: BellConfig::default(),
            tolerance: DEFAULT_TOL,
            measured_mode: MeasuredMode::First,
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            node_a: self.node_a.to_params(),
            node_b: self.node_b.to_params(),
            filter_a: self.filter_a.to_filter(),
            filter_b: self.filter_b.to_filter(),
            detection: self.detection,
            tolerance: self.tolerance,
            measured_mode: self.measured_mode,
        }
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            base: self.pipeline(),
            axes: s.axes.clone(),
            outputs: s.outputs.clone(),
        })
    }

    /// Explicit TOML form: every quantity of both nodes and filters spelled out.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for (name, node) in [("a", &self.node_a), ("b", &self.node_b)] {
            write_node(&mut out, name, node);
        }
        for (name, filter) in [("a", &self.filter_a), ("b", &self.filter_b)] {
            out.push_str(&format!("[filters.{name}]\n"));
            kv(&mut out, "center_over_omega_b", filter.center_over_omega_b);
            match filter.bandwidth {
                BandwidthKey::Epsilon(e) => kv(&mut out, "epsilon", e),
                BandwidthKey::TauUs(t) => kv(&mut out, "tau_us", t),
            }
            out.push('\n');
        }
        out.push_str("[detection]\n");
        kv(&mut out, "transmissivity", self.detection.transmissivity);
        kv(&mut out, "efficiency_1", self.detection.efficiency_1);
        kv(&mut out, "efficiency_2", self.detection.efficiency_2);
        out.push_str("\n[solver]\n");
        kv(&mut out, "tolerance", self.tolerance);
        out.push_str(&format!("measured_mode = {}\n", self.measured_mode.index()));
        if let Some(sweep) = &self.sweep {
            out.push_str("\n[sweep]\naxes = [\n");
            for axis in &sweep.axes {
                out.push_str(&format!(
                    "    {{ knob = \"{}\", min = {:?}, max = {:?}, count = {} }},\n",
                    axis.knob, axis.min, axis.max, axis.count
                ));
            }
            out.push_str("]\noutputs = [");
            let names: Vec<String> = sweep
                .outputs
                .iter()
                .map(|o| format!("\"{}\"", o.name()))
                .collect();
            out.push_str(&names.join(", "));
            out.push_str("]\n");
        }
        out
    }
}

fn kv(out: &mut String, key: &str, value: f64) {
    out.push_str(&format!("{key} = {value:?}\n"));
}

fn write_node(out: &mut String, name: &str, n: &NodeConfig) {
    out.push_str(&format!("[nodes.{name}]\n"));
    kv(out, "cavity_length_mm", n.cavity_length_mm);
    kv(out, "wavelength_nm", n.wavelength_nm);
    match n.damping {
        DampingKey::Finesse(v) => kv(out, "finesse", v),
        DampingKey::KappaPerS(v) => kv(out, "kappa_per_s", v),
    }
    match n.drive {
        DriveKey::OverKappa(v) => kv(out, "drive_over_kappa", v),
        DriveKey::LaserPowerMw(v) => kv(out, "laser_power_mw", v),
    }
    match n.detuning {
        DetuningKey::OverOmegaC(v) => kv(out, "detuning_over_omega_c", v),
        DetuningKey::PerS(v) => kv(out, "detuning_per_s", v),
    }
    kv(out, "recoil_frequency_khz", n.recoil_frequency_khz);
    kv(out, "collision_over_recoil", n.collision_over_recoil);
    kv(out, "bec_damping_over_kappa", n.bec_damping_over_kappa);
    match n.coupling {
        CouplingKey::OverOmegaB0(v) => kv(out, "coupling_over_omega_b0", v),
        CouplingKey::PerS(v) => kv(out, "coupling_per_s", v),
        CouplingKey::FromAtoms => out.push_str("coupling_from_atoms = true\n"),
    }
    kv(out, "temperature_uk", n.temperature_uk);
    if let Some(a) = n.atomic {
        out.push_str(&format!("\n[nodes.{name}.atomic]\n"));
        kv(out, "atom_number", a.atom_number);
        kv(out, "atom_mass_amu", a.atom_mass_amu);
        kv(out, "atomic_detuning_per_s", a.atomic_detuning_per_s);
        kv(out, "vacuum_rabi_per_s", a.vacuum_rabi_per_s);
        kv(out, "scattering_length_nm", a.scattering_length_nm);
        kv(out, "beam_waist_um", a.beam_waist_um);
    }
    out.push('\n');
}

/// Parses and resolves a configuration file.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    Resolver { text }.resolve(raw)
}

struct Resolver<'a> {
    text: &'a str,
}

#[derive(Clone, Copy)]
enum Domain {
    Positive,
    NonNegative,
    Any,
    Open01,
    Efficiency,
}

impl Domain {
    fn admits(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Domain::Positive => v > 0.0,
                Domain::NonNegative => v >= 0.0,
                Domain::Any => true,
                Domain::Open01 => v > 0.0 && v < 1.0,
                Domain::Efficiency => v > 0.0 && v <= 1.0,
            }
    }

    fn describe(self) -> &'static str {
        match self {
            Domain::Positive => "a positive number",
            Domain::NonNegative => "a non-negative number",
            Domain::Any => "a finite number",
            Domain::Open01 => "strictly between 0 and 1",
            Domain::Efficiency => "in (0, 1]",
        }
    }
}

impl Resolver<'_> {
    fn err(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: Some(line_of(self.text, span.start)),
            message: message.into(),
        }
    }

    fn value(&self, key: &str, v: &Sf, domain: Domain) -> Result<Option<f64>, ConfigError> {
        match v {
            None => Ok(None),
            Some(s) if domain.admits(*s.get_ref()) => Ok(Some(*s.get_ref())),
            Some(s) => Err(self.err(
                s.span(),
                format!("`{key}` must be {}, got {}", domain.describe(), s.get_ref()),
            )),
        }
    }

    /// At most one of several alternative keys may be given in one table.
    fn exclusive(&self, keys: &[(&str, Option<Range<usize>>)]) -> Result<(), ConfigError> {
        let present: Vec<_> = keys
            .iter()
            .filter_map(|(k, s)| s.clone().map(|s| (*k, s)))
            .collect();
        if present.len() > 1 {
            let names: Vec<&str> = present.iter().map(|(k, _)| *k).collect();
            return Err(self.err(
                present[1].1.clone(),
                format!("give only one of {}", names.join(", ")),
            ));
        }
        Ok(())
    }

    fn apply_node(&self, node: &mut NodeConfig, raw: &RawNode) -> Result<(), ConfigError> {
        use Domain::*;
        let span = |s: &Sf| s.as_ref().map(|x| x.span());
        self.exclusive(&[
            ("finesse", span(&raw.finesse)),
            ("kappa_per_s", span(&raw.kappa_per_s)),
        ])?;
        self.exclusive(&[
            ("drive_over_kappa", span(&raw.drive_over_kappa)),
            ("laser_power_mw", span(&raw.laser_power_mw)),
        ])?;
        self.exclusive(&[
            ("detuning_over_omega_c", span(&raw.detuning_over_omega_c)),
            ("detuning_per_s", span(&raw.detuning_per_s)),
        ])?;
        self.exclusive(&[
            ("coupling_over_omega_b0", span(&raw.coupling_over_omega_b0)),
            ("coupling_per_s", span(&raw.coupling_per_s)),
            (
                "coupling_from_atoms",
                raw.coupling_from_atoms.as_ref().map(|x| x.span()),
            ),
        ])?;

        if let Some(v) = self.value("cavity_length_mm", &raw.cavity_length_mm, Positive)? {
            node.cavity_length_mm = v;
        }
        if let Some(v) = self.value("wavelength_nm", &raw.wavelength_nm, Positive)? {
            node.wavelength_nm = v;
        }
        if let Some(v) = self.value("finesse", &raw.finesse, Positive)? {
            node.damping = DampingKey::Finesse(v);
        }
        if let Some(v) = self.value("kappa_per_s", &raw.kappa_per_s, Positive)? {
            node.damping = DampingKey::KappaPerS(v);
        }
        if let Some(v) = self.value("drive_over_kappa", &raw.drive_over_kappa, NonNegative)? {
            node.drive = DriveKey::OverKappa(v);
        }
        if let Some(v) = self.value("laser_power_mw", &raw.laser_power_mw, NonNegative)? {
            node.drive = DriveKey::LaserPowerMw(v);
        }
        if let Some(v) = self.value("detuning_over_omega_c", &raw.detuning_over_omega_c, Any)? {
            node.detuning = DetuningKey::OverOmegaC(v);
        }
        if let Some(v) = self.value("detuning_per_s", &raw.detuning_per_s, Any)? {
            node.detuning = DetuningKey::PerS(v);
        }
        if let Some(v) = self.value("recoil_frequency_khz", &raw.recoil_frequency_khz, Positive)? {
            node.recoil_frequency_khz = v;
        }
        if let Some(v) = self.value(
            "collision_over_recoil",
            &raw.collision_over_recoil,
            NonNegative,
        )? {
            node.collision_over_recoil = v;
        }
        if let Some(v) = self.value(
            "bec_damping_over_kappa",
            &raw.bec_damping_over_kappa,
            NonNegative,
        )? {
            node.bec_damping_over_kappa = v;
        }
        if let Some(v) = self.value(
            "coupling_over_omega_b0",
            &raw.coupling_over_omega_b0,
            NonNegative,
        )? {
            node.coupling = CouplingKey::OverOmegaB0(v);
        }
        if let Some(v) = self.value("coupling_per_s", &raw.coupling_per_s, NonNegative)? {
            node.coupling = CouplingKey::PerS(v);
        }
        if let Some(flag) = &raw.coupling_from_atoms {
            if !*flag.get_ref() {
                return Err(self.err(flag.span(), "`coupling_from_atoms` can only be set to true"));
            }
            node.coupling = CouplingKey::FromAtoms;
        }
        if let Some(v) = self.value("temperature_uk", &raw.temperature_uk, NonNegative)? {
            node.temperature_uk = v;
        }
        if let Some(atomic) = &raw.atomic {
            node.atomic = Some(self.atomic(atomic, node.atomic)?);
        }
        Ok(())
    }

    fn atomic(
        &self,
        raw: &RawAtomic,
        previous: Option<AtomicConfig>,
    ) -> Result<AtomicConfig, ConfigError> {
        use Domain::*;
        let fields = [
            ("atom_number", &raw.atom_number, Positive),
            ("atom_mass_amu", &raw.atom_mass_amu, Positive),
            ("atomic_detuning_per_s", &raw.atomic_detuning_per_s, Any),
            ("vacuum_rabi_per_s", &raw.vacuum_rabi_per_s, Positive),
            ("scattering_length_nm", &raw.scattering_length_nm, Any),
            ("beam_waist_um", &raw.beam_waist_um, Positive),
        ];
        let prev = previous.map(|a| {
            [
                a.atom_number,
                a.atom_mass_amu,
                a.atomic_detuning_per_s,
                a.vacuum_rabi_per_s,
                a.scattering_length_nm,
                a.beam_waist_um,
            ]
        });
        let mut v = [0.0; 6];
        for (i, (key, value, domain)) in fields.into_iter().enumerate() {
            v[i] = match (self.value(key, value, domain)?, prev) {
                (Some(x), _) => x,
                (None, Some(p)) => p[i],
                (None, None) => {
                    return Err(ConfigError {
                        line: None,
                        message: format!("atomic table is missing `{key}`"),
                    })
                }
            };
        }
        Ok(AtomicConfig {
            atom_number: v[0],
            atom_mass_amu: v[1],
            atomic_detuning_per_s: v[2],
            vacuum_rabi_per_s: v[3],
            scattering_length_nm: v[4],
            beam_waist_um: v[5],
        })
    }

    fn apply_filter(
        &self,
        filter: &mut FilterSettings,
        raw: &RawFilter,
    ) -> Result<(), ConfigError> {
        let span = |s: &Sf| s.as_ref().map(|x| x.span());
        self.exclusive(&[
            ("epsilon", span(&raw.epsilon)),
            ("tau_us", span(&raw.tau_us)),
        ])?;
        if let Some(v) = self.value("center_over_omega_b", &raw.center_over_omega_b, Domain::Any)? {
            filter.center_over_omega_b = v;
        }
        if let Some(v) = self.value("epsilon", &raw.epsilon, Domain::Positive)? {
            filter.bandwidth = BandwidthKey::Epsilon(v);
        }
        if let Some(v) = self.value("tau_us", &raw.tau_us, Domain::Positive)? {
            filter.bandwidth = BandwidthKey::TauUs(v);
        }
        Ok(())
    }

    fn sweep(&self, raw: &Spanned<RawSweep>) -> Result<SweepSettings, ConfigError> {
        let sweep = raw.get_ref();
        if sweep.axes.is_empty() || sweep.axes.len() > 2 {
            return Err(self.err(
                raw.span(),
                format!("a sweep has one or two axes, got {}", sweep.axes.len()),
            ));
        }
        let mut axes = Vec::new();
        for entry in &sweep.axes {
            let a = entry.get_ref();
            let knob: Knob = a.knob.get_ref().parse().map_err(|_| {
                self.err(
                    a.knob.span(),
                    format!("unknown sweep knob `{}`", a.knob.get_ref()),
                )
            })?;
            if axes.iter().any(|x: &Axis| x.knob == knob) {
                return Err(self.err(a.knob.span(), format!("axis `{knob}` given twice")));
            }
            let count = usize::try_from(*a.count.get_ref())
                .map_err(|_| self.err(a.count.span(), "axis count must be at least 2"))?;
            let axis = Axis::new(knob, *a.min.get_ref(), *a.max.get_ref(), count)
                .map_err(|e| self.err(entry.span(), e.to_string()))?;
            axes.push(axis);
        }
        let outputs = match &sweep.outputs {
            None => vec![Output::Discord, Output::LogNegativity],
            Some(list) => {
                let mut outputs = Vec::new();
                for name in list {
                    let o = match name.get_ref().as_str() {
                        "discord" => Output::Discord,
                        "log_negativity" => Output::LogNegativity,
                        other => {
                            return Err(self.err(name.span(), format!("unknown output `{other}`")))
                        }
                    };
                    if outputs.contains(&o) {
                        return Err(
                            self.err(name.span(), format!("output `{}` listed twice", o.name()))
                        );
                    }
                    outputs.push(o);
                }
                if outputs.is_empty() {
                    return Err(self.err(raw.span(), "a sweep needs at least one output"));
                }
                outputs
            }
        };
        Ok(SweepSettings { axes, outputs })
    }

    fn resolve(&self, raw: RawConfig) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (target, specific) in [
            (&mut cfg.node_a, &raw.nodes.a),
            (&mut cfg.node_b, &raw.nodes.b),
        ] {
            if let Some(both) = &raw.nodes.both {
                self.apply_node(target, both)?;
            }
            if let Some(own) = specific {
                self.apply_node(target, own)?;
            }
        }
        for (target, specific) in [
            (&mut cfg.filter_a, &raw.filters.a),
            (&mut cfg.filter_b, &raw.filters.b),
        ] {
            if let Some(both) = &raw.filters.both {
                self.apply_filter(target, both)?;
            }
            if let Some(own) = specific {
                self.apply_filter(target, own)?;
            }
        }
        for node in [&cfg.node_a, &cfg.node_b] {
            if node.coupling == CouplingKey::FromAtoms && node.atomic.is_none() {
                return Err(ConfigError {
                    line: None,
                    message: "`coupling_from_atoms = true` needs an atomic table".into(),
                });
            }
        }

        let d = &raw.detection;
        if let Some(v) = self.value("transmissivity", &d.transmissivity, Domain::Open01)? {
            cfg.detection.transmissivity = v;
        }
        if let Some(v) = self.value("efficiency_1", &d.efficiency_1, Domain::Efficiency)? {
            cfg.detection.efficiency_1 = v;
        }
        if let Some(v) = self.value("efficiency_2", &d.efficiency_2, Domain::Efficiency)? {
            cfg.detection.efficiency_2 = v;
        }
        if let Some(v) = self.value("tolerance", &raw.solver.tolerance, Domain::Positive)? {
            cfg.tolerance = v;
        }
        if let Some(m) = &raw.solver.measured_mode {
            cfg.measured_mode = u8::try_from(*m.get_ref())
                .ok()
                .and_then(MeasuredMode::from_index)
                .ok_or_else(|| {
                    self.err(
                        m.span(),
                        format!("`measured_mode` must be 1 or 2, got {}", m.get_ref()),
                    )
                })?;
        }
        if let Some(sweep) = &raw.sweep {
            cfg.sweep = Some(self.sweep(sweep)?);
        }
        Ok(cfg)
    }
}
