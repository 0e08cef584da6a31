//! Physical constants, device parameters and run configuration.
//!
//! Everything is SI. Energies are stored in joules, angles in radians and
//! frequencies in rad/s. Derived quantities (moment of inertia, magnetic
//! moment, the transverse gradient `zeta`) are recomputed on every
//! construction path, including deserialization, so they can never drift
//! from the inputs they are derived from.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contrast::WavePacketWidths;
use crate::error::{Error, Result};
use crate::spin_model;

/// Mass of the reference nanodiamond used to anchor constant-density sweeps.
pub const ANCHOR_MASS: f64 = 1e-17;
/// Radius of the reference nanodiamond.
pub const ANCHOR_RADIUS: f64 = 50e-9;
/// Axial zero-field splitting of the NV ground state, D/h = 2.87 GHz.
pub const NV_ZFS_HZ: f64 = 2.87e9;
/// Trap frequency used for the zero-point estimate of `y0`, sqrt(12.08) rad/s.
pub const Y0_TRAP_FREQUENCY: f64 = 3.475_629_439_396_553;

/// Steps per fast libration period used when no explicit `dt` is given.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 200.0;
/// Minimum number of steps that must resolve the fastest mode.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Vacuum permeability, T m / A.
    pub mu0: f64,
    /// Bohr magneton, J / T.
    pub mu_b: f64,
    /// Electron g-factor.
    pub g_e: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            mu0: 4.0 * PI * 1e-7,
            mu_b: 9.274_010_078_3e-24,
            g_e: 2.0,
        }
    }
}

impl PhysicalConstants {
    /// Planck constant h = 2 pi hbar.
    pub fn h(&self) -> f64 {
        TAU * self.hbar
    }

    /// NV magnetic moment g_e mu_B.
    pub fn nv_moment(&self) -> f64 {
        self.g_e * self.mu_b
    }
}

/// Serialized form of [`NanodiamondParams`]; derived fields are not accepted.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NanodiamondRaw {
    mass: f64,
    radius: f64,
    chi_rho: f64,
    d_zfs: f64,
    #[serde(default)]
    e_strain: f64,
    #[serde(default)]
    nv_offset: f64,
    #[serde(default)]
    nv_offset_angle: f64,
}

/// A spherical nanodiamond hosting a single NV centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NanodiamondRaw", into = "NanodiamondRaw")]
pub struct NanodiamondParams {
    mass: f64,
    radius: f64,
    moment_of_inertia: f64,
    /// Mass magnetic susceptibility, m^3/kg (negative for diamond).
    pub chi_rho: f64,
    /// Axial zero-field splitting D, J.
    pub d_zfs: f64,
    /// Transverse (strain) zero-field splitting E, J.
    pub e_strain: f64,
    /// Distance of the NV centre from the centre of mass, m.
    pub nv_offset: f64,
    /// Fixed tilt of the NV axis relative to its offset vector, rad.
    pub nv_offset_angle: f64,
}

impl NanodiamondParams {
    pub fn new(mass: f64, radius: f64, chi_rho: f64, d_zfs: f64, e_strain: f64) -> Self {
        Self {
            mass,
            radius,
            moment_of_inertia: sphere_inertia(mass, radius),
            chi_rho,
            d_zfs,
            e_strain,
            nv_offset: 0.0,
            nv_offset_angle: 0.0,
        }
    }

    /// Same material, different mass: the radius scales as m^(1/3) through
    /// the (1e-17 kg, 50 nm) anchor.
    pub fn with_constant_density_mass(&self, mass: f64) -> Self {
        let mut out = *self;
        out.mass = mass;
        out.radius = constant_density_radius(mass);
        out.moment_of_inertia = sphere_inertia(mass, out.radius);
        out
    }

    pub fn with_mass_and_radius(&self, mass: f64, radius: f64) -> Self {
        let mut out = *self;
        out.mass = mass;
        out.radius = radius;
        out.moment_of_inertia = sphere_inertia(mass, radius);
        out
    }

    pub fn with_nv_offset(mut self, offset: f64, angle: f64) -> Self {
        self.nv_offset = offset;
        self.nv_offset_angle = angle;
        self
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// I = (2/5) m R^2; the three principal moments coincide.
    pub fn moment_of_inertia(&self) -> f64 {
        self.moment_of_inertia
    }
}

impl TryFrom<NanodiamondRaw> for NanodiamondParams {
    type Error = String;

    fn try_from(raw: NanodiamondRaw) -> std::result::Result<Self, String> {
        let finite = [
            raw.mass,
            raw.radius,
            raw.chi_rho,
            raw.d_zfs,
            raw.e_strain,
            raw.nv_offset,
            raw.nv_offset_angle,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("nanodiamond parameters must be finite".into());
        }
        Ok(Self::new(raw.mass, raw.radius, raw.chi_rho, raw.d_zfs, raw.e_strain)
            .with_nv_offset(raw.nv_offset, raw.nv_offset_angle))
    }
}

impl From<NanodiamondParams> for NanodiamondRaw {
    fn from(p: NanodiamondParams) -> Self {
        Self {
            mass: p.mass,
            radius: p.radius,
            chi_rho: p.chi_rho,
            d_zfs: p.d_zfs,
            e_strain: p.e_strain,
            nv_offset: p.nv_offset,
            nv_offset_angle: p.nv_offset_angle,
        }
    }
}

pub fn sphere_inertia(mass: f64, radius: f64) -> f64 {
    0.4 * mass * radius * radius
}

pub fn constant_density_radius(mass: f64) -> f64 {
    ANCHOR_RADIUS * (mass / ANCHOR_MASS).cbrt()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldRaw {
    b0: f64,
    eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zeta: Option<f64>,
}

/// Linear field B = (B0 + eta x, zeta y, 0) with zeta = -eta (div B = 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRaw", into = "FieldRaw")]
pub struct FieldParams {
    b0: f64,
    eta: f64,
}

impl FieldParams {
    pub fn new(b0: f64, eta: f64) -> Self {
        Self { b0, eta }
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn zeta(&self) -> f64 {
        -self.eta
    }

    /// Lab-frame field at a centre-of-mass position.
    pub fn at(&self, x: f64, y: f64) -> (f64, f64) {
        (self.b0 + self.eta * x, self.zeta() * y)
    }
}

impl TryFrom<FieldRaw> for FieldParams {
    type Error = String;

    fn try_from(raw: FieldRaw) -> std::result::Result<Self, String> {
        if !raw.b0.is_finite() || !raw.eta.is_finite() {
            return Err("field parameters must be finite".into());
        }
        if let Some(zeta) = raw.zeta {
            let tol = 1e-12 * raw.eta.abs().max(f64::MIN_POSITIVE);
            if (zeta + raw.eta).abs() > tol {
                return Err(format!(
                    "Maxwell constraint violated: zeta = {zeta} but eta = {} requires zeta = {}",
                    raw.eta, -raw.eta
                ));
            }
        }
        Ok(Self::new(raw.b0, raw.eta))
    }
}

impl From<FieldParams> for FieldRaw {
    fn from(f: FieldParams) -> Self {
        Self {
            b0: f.b0,
            eta: f.eta,
            zeta: Some(f.zeta()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    pub x0: f64,
    pub y0: f64,
    pub vx0: f64,
    pub vy0: f64,
    pub beta0: f64,
    pub beta_dot0: f64,
    pub alpha0: f64,
    pub gamma0: f64,
    /// Initial spin rate about the NV axis, gamma_dot(0).
    pub omega0: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            x0: 0.0,
            y0: 1e-9,
            vx0: 0.0,
            vy0: 0.0,
            beta0: 1e-3,
            beta_dot0: 0.0,
            alpha0: 0.0,
            gamma0: 0.0,
            omega0: TAU * 1e4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSetup {
    #[serde(default)]
    pub constants: PhysicalConstants,
    pub nanodiamond: NanodiamondParams,
    pub field: FieldParams,
}

impl Default for PhysicalSetup {
    fn default() -> Self {
        let constants = PhysicalConstants::default();
        Self {
            constants,
            nanodiamond: NanodiamondParams::new(
                ANCHOR_MASS,
                ANCHOR_RADIUS,
                -6.2e-9,
                constants.h() * NV_ZFS_HZ,
                0.0,
            ),
            field: FieldParams::new(0.14, -7000.0),
        }
    }
}

impl PhysicalSetup {
    pub fn mu(&self) -> f64 {
        self.constants.nv_moment()
    }

    pub fn mass(&self) -> f64 {
        self.nanodiamond.mass()
    }

    pub fn inertia(&self) -> f64 {
        self.nanodiamond.moment_of_inertia()
    }

    /// Omega^2 = |chi_rho| eta^2 / mu0.
    pub fn trap_frequency_squared(&self) -> f64 {
        self.nanodiamond.chi_rho.abs() * self.field.eta().powi(2) / self.constants.mu0
    }

    pub fn with_constant_density_mass(&self, mass: f64) -> Self {
        let mut out = *self;
        out.nanodiamond = self.nanodiamond.with_constant_density_mass(mass);
        out
    }
}

/// Diamagnetic trap frequency Omega = sqrt(|chi_rho| eta^2 / mu0).
pub fn derived_trap_frequency(setup: &PhysicalSetup) -> Result<f64> {
    if setup.field.eta() == 0.0 {
        return Err(Error::DegenerateField);
    }
    Ok(setup.trap_frequency_squared().sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputControls {
    /// Record one sample every `stride` integrator steps.
    pub stride: usize,
}

impl Default for OutputControls {
    fn default() -> Self {
        Self { stride: 100 }
    }
}

fn default_margin() -> f64 {
    spin_model::DEFAULT_ADIABATIC_MARGIN
}

fn default_y0_trap() -> f64 {
    Y0_TRAP_FREQUENCY
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub setup: PhysicalSetup,
    #[serde(default)]
    pub initial: InitialConditions,
    /// Explicit closure time; derived as 2 pi / Omega when absent.
    #[serde(default)]
    pub t_close: Option<f64>,
    /// Explicit step; defaults to (2 pi / omega0) / 200.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub output: OutputControls,
    #[serde(default)]
    pub widths: WavePacketWidths,
    #[serde(default = "default_margin")]
    pub adiabatic_margin: f64,
    /// Trap frequency entering the zero-point estimate of y0 only.
    #[serde(default = "default_y0_trap")]
    pub y0_trap_frequency: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            setup: PhysicalSetup::default(),
            initial: InitialConditions::default(),
            t_close: None,
            dt: None,
            output: OutputControls::default(),
            widths: WavePacketWidths::default(),
            adiabatic_margin: default_margin(),
            y0_trap_frequency: default_y0_trap(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn t_close(&self) -> Result<f64> {
        match self.t_close {
            Some(t) => Ok(t),
            None => Ok(TAU / derived_trap_frequency(&self.setup)?),
        }
    }

    /// Upper bound on the step: the fastest of the libration and trap
    /// periods divided by [`MIN_STEPS_PER_PERIOD`].
    pub fn max_dt(&self) -> f64 {
        let mut period = f64::INFINITY;
        if self.initial.omega0 > 0.0 {
            period = period.min(TAU / self.initial.omega0);
        }
        let omega_sq = self.setup.trap_frequency_squared();
        if omega_sq > 0.0 {
            period = period.min(TAU / omega_sq.sqrt());
        }
        period / MIN_STEPS_PER_PERIOD
    }

    /// Requested step, before it is shrunk to divide `t_close` evenly.
    pub fn dt(&self) -> Result<f64> {
        if let Some(dt) = self.dt {
            return Ok(dt);
        }
        let fast = if self.initial.omega0 > 0.0 {
            TAU / self.initial.omega0
        } else {
            TAU / derived_trap_frequency(&self.setup)?
        };
        Ok(fast / DEFAULT_STEPS_PER_PERIOD)
    }

    /// SHA-256 of the canonical JSON form. Keys are emitted sorted, so the
    /// hash does not depend on key order in the source file.
    pub fn hash_hex(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "configuration valid");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Collect every violated invariant. Never fails; an empty report means valid.
pub fn validate(config: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let c = &config.setup.constants;
    let nd = &config.setup.nanodiamond;
    let ic = &config.initial;

    for (name, v) in [("hbar", c.hbar), ("mu0", c.mu0), ("mu_b", c.mu_b), ("g_e", c.g_e)] {
        if !(v > 0.0) {
            report.push(format!("constant {name} must be strictly positive"));
        }
    }
    if !(nd.mass() > 0.0) {
        report.push("mass must be strictly positive");
    }
    if !(nd.radius() > 0.0) {
        report.push("radius must be strictly positive");
    }
    if !(nd.d_zfs > 0.0) {
        report.push("zero-field splitting D must be strictly positive");
    }
    if !(nd.e_strain >= 0.0) {
        report.push("strain splitting E must be non-negative");
    }
    if !(nd.nv_offset >= 0.0) {
        report.push("NV offset distance must be non-negative");
    }

    let ic_values = [
        ic.x0, ic.y0, ic.vx0, ic.vy0, ic.beta0, ic.beta_dot0, ic.alpha0, ic.gamma0, ic.omega0,
    ];
    if ic_values.iter().any(|v| !v.is_finite()) {
        report.push("initial conditions must be finite");
    }
    if !(ic.beta0 > 0.0) {
        report.push("beta0 must be strictly positive");
    } else if !(ic.beta0 < PI) {
        report.push("beta0 must be strictly less than pi");
    }
    if !(ic.omega0 >= 0.0) {
        report.push("omega0 must be non-negative");
    }

    match config.t_close {
        Some(t) if !(t > 0.0) => report.push("t_close must be strictly positive"),
        Some(_) => {}
        None => {
            if config.setup.field.eta() == 0.0 {
                report.push("eta = 0 gives no trap; supply an explicit t_close");
            }
        }
    }

    match config.dt() {
        Ok(dt) if !(dt > 0.0) => report.push("dt must be strictly positive"),
        Ok(dt) => {
            if dt > config.max_dt() * (1.0 + 1e-12) {
                report.push(format!(
                    "step too coarse: dt = {dt:e} s exceeds fastest period / {MIN_STEPS_PER_PERIOD} = {:e} s",
                    config.max_dt()
                ));
            }
        }
        Err(e) => report.push(format!("cannot derive dt: {e}")),
    }

    if config.output.stride == 0 {
        report.push("output stride must be at least 1");
    }
    if !config.widths.is_valid() {
        report.push("wave-packet widths must be strictly positive");
    }
    if !(config.adiabatic_margin > 1.0) {
        report.push("adiabatic margin must exceed 1");
    }
    if !(config.y0_trap_frequency > 0.0) {
        report.push("y0 trap frequency must be strictly positive");
    }

    if report.is_valid() {
        let (bx, by) = config.setup.field.at(ic.x0, ic.y0);
        let field = spin_model::project_field(bx, by, ic.beta0, ic.gamma0);
        let ok = spin_model::check_adiabaticity(
            ic.omega0,
            field.b_par,
            nd.d_zfs,
            config.setup.mu(),
            c.hbar,
            config.adiabatic_margin,
        );
        if !ok {
            report.push(format!(
                "adiabaticity violated: omega0 = {:e} rad/s is not {}x below the spin precession frequencies",
                ic.omega0, config.adiabatic_margin
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trap_frequency_from_susceptibility() {
        let setup = PhysicalSetup::default();
        let omega = derived_trap_frequency(&setup).unwrap();
        let omega_sq = 6.2e-9 * 7000.0f64.powi(2) / (4.0 * PI * 1e-7);
        assert!((omega * omega - omega_sq).abs() < 1e-9 * omega_sq);
        assert!((omega_sq - 2.4176e5).abs() < 1e1);
        assert!((omega - 491.7).abs() < 0.05);
    }

    #[test]
    fn trap_frequency_scales_with_gradient() {
        let mut setup = PhysicalSetup::default();
        let omega = derived_trap_frequency(&setup).unwrap();
        setup.field = FieldParams::new(0.14, -14000.0);
        let doubled = derived_trap_frequency(&setup).unwrap();
        assert!((doubled - 2.0 * omega).abs() < 1e-12 * omega);
        setup.field = FieldParams::new(0.14, 7000.0);
        assert_eq!(derived_trap_frequency(&setup).unwrap(), omega);
    }

    #[test]
    fn closure_time_matches_reference() {
        let t = RunConfig::default().t_close().unwrap();
        assert!((t - 0.01278).abs() < 1e-5);
        assert!((t - 0.01275).abs() / 0.01275 < 3e-3);
    }

    #[test]
    fn zero_gradient_is_degenerate() {
        let mut setup = PhysicalSetup::default();
        setup.field = FieldParams::new(0.14, 0.0);
        assert!(matches!(derived_trap_frequency(&setup), Err(Error::DegenerateField)));
    }

    #[test]
    fn default_config_is_valid() {
        let report = validate(&RunConfig::default());
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn zero_tilt_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.initial.beta0 = 0.0;
        let report = validate(&cfg);
        assert!(report
            .violations
            .iter()
            .any(|v| v == "beta0 must be strictly positive"));
    }

    #[test]
    fn coarse_step_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.dt = Some(TAU / cfg.initial.omega0 / 40.0);
        let report = validate(&cfg);
        assert!(report.violations.iter().any(|v| v.starts_with("step too coarse")));
    }

    #[test]
    fn inertia_matches_sphere() {
        let nd = PhysicalSetup::default().nanodiamond;
        assert_eq!(nd.moment_of_inertia(), 0.4 * nd.mass() * nd.radius() * nd.radius());
        assert!((nd.moment_of_inertia() - 1e-32).abs() < 1e-45);
        let heavy = nd.with_constant_density_mass(1e-16);
        assert!((heavy.radius() - 107.72e-9).abs() < 0.01e-9);
        assert_eq!(heavy.moment_of_inertia(), sphere_inertia(1e-16, heavy.radius()));
    }

    #[test]
    fn maxwell_constraint_on_load() {
        let mut value = serde_json::to_value(RunConfig::default()).unwrap();
        assert_eq!(value["setup"]["field"]["zeta"], 7000.0);
        value["setup"]["field"]["zeta"] = serde_json::json!(100.0);
        let err = serde_json::from_value::<RunConfig>(value.clone()).unwrap_err();
        assert!(err.to_string().contains("Maxwell"));
        value["setup"]["field"]
            .as_object_mut()
            .unwrap()
            .remove("zeta");
        let cfg: RunConfig = serde_json::from_value(value).unwrap();
        assert_eq!(cfg.setup.field.zeta(), 7000.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value = serde_json::to_value(RunConfig::default()).unwrap();
        value["setup"]["nanodiamond"]["moment_of_inertia"] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<RunConfig>(value).is_err());
        let mut value = serde_json::to_value(RunConfig::default()).unwrap();
        value["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<RunConfig>(value).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let cfg = RunConfig::default();
        let text = cfg.to_json_pretty();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        // Rebuild the top-level object in reverse key order.
        let obj = value.as_object_mut().unwrap();
        let mut entries: Vec<_> = obj.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        entries.reverse();
        let reversed = entries
            .iter()
            .map(|(k, v)| format!("{}:{}", serde_json::to_string(k).unwrap(), v))
            .collect::<Vec<_>>()
            .join(",");
        let reloaded = RunConfig::from_json(&format!("{{{reversed}}}")).unwrap();
        assert_eq!(reloaded.hash_hex(), cfg.hash_hex());
    }
}
