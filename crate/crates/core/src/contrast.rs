//! Spin-contrast lower bound from the Euler-angle and libration mismatches
//! at recombination.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::run_interferometer;
use crate::error::{Error, Result};
use crate::params::{PhysicalSetup, RunConfig};

/// Momentum widths of the precession and rotation wave packets, in units of hbar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavePacketWidths {
    pub dp_alpha: f64,
    pub dp_gamma: f64,
}

impl Default for WavePacketWidths {
    fn default() -> Self {
        Self {
            dp_alpha: 5.0,
            dp_gamma: 5.0,
        }
    }
}

impl WavePacketWidths {
    pub fn is_valid(&self) -> bool {
        self.dp_alpha > 0.0 && self.dp_gamma > 0.0 && self.dp_alpha.is_finite() && self.dp_gamma.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContrastReport {
    pub contrast: f64,
    pub term_alpha: f64,
    pub term_gamma: f64,
    pub term_libration: f64,
    pub kappa0: f64,
}

impl ContrastReport {
    pub fn exponent(&self) -> f64 {
        self.term_alpha + self.term_gamma + self.term_libration
    }
}

fn lever(setup: &PhysicalSetup, beta0: f64, y0: f64) -> f64 {
    setup.field.b0() * beta0 + setup.field.eta() * y0
}

/// |kappa(0)| = sqrt(I omega0 / 2 hbar) * mu (B0 beta0 + eta y0) / (I omega0^2).
pub fn coherent_amplitude(setup: &PhysicalSetup, beta0: f64, y0: f64, omega0: f64) -> f64 {
    let i = setup.inertia();
    let zpf = (i * omega0 / (2.0 * setup.constants.hbar)).sqrt();
    (zpf * setup.mu() * lever(setup, beta0, y0) / (i * omega0 * omega0)).abs()
}

/// C = exp(-(da^2 dpa^2 + dg^2 dpg^2 + 8 mu^2 X^2 / (I hbar omega0^3)) / 2)
/// with X = B0 beta0 + eta y0 and widths in units of hbar.
pub fn contrast_lower_bound(
    delta_alpha: f64,
    delta_gamma: f64,
    widths: WavePacketWidths,
    setup: &PhysicalSetup,
    beta0: f64,
    y0: f64,
    omega0: f64,
) -> ContrastReport {
    let term_alpha = (delta_alpha * widths.dp_alpha).powi(2);
    let term_gamma = (delta_gamma * widths.dp_gamma).powi(2);
    let x = lever(setup, beta0, y0);
    let term_libration =
        8.0 * (setup.mu() * x).powi(2) / (setup.inertia() * setup.constants.hbar * omega0.powi(3));
    let contrast = (-0.5 * (term_alpha + term_gamma + term_libration)).exp();
    ContrastReport {
        contrast,
        term_alpha,
        term_gamma,
        term_libration,
        kappa0: coherent_amplitude(setup, beta0, y0, omega0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Negligibility {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// |B0 beta0 + eta y0| against sqrt(I hbar omega0^3) / (2 mu).
pub fn libration_negligibility(setup: &PhysicalSetup, beta0: f64, y0: f64, omega0: f64) -> Negligibility {
    let lhs = lever(setup, beta0, y0).abs();
    let rhs = (setup.inertia() * setup.constants.hbar * omega0.max(0.0).powi(3)).sqrt() / (2.0 * setup.mu());
    Negligibility {
        lhs,
        rhs,
        satisfied: lhs < rhs,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContrastRow {
    pub mass: f64,
    pub omega0: f64,
    pub delta_alpha: f64,
    pub delta_gamma: f64,
    pub kappa0: f64,
    pub contrast: f64,
}

/// Configuration for one sweep point: constant-density mass, given spin
/// rate, default step for that rate.
pub fn sweep_point_config(config: &RunConfig, mass: f64, omega0: f64) -> RunConfig {
    let mut cfg = *config;
    cfg.setup = config.setup.with_constant_density_mass(mass);
    cfg.initial.omega0 = omega0;
    cfg.dt = None;
    cfg.output.stride = usize::MAX;
    cfg
}

pub fn contrast_point(config: &RunConfig, mass: f64, omega0: f64) -> Result<ContrastRow> {
    let cfg = sweep_point_config(config, mass, omega0);
    let run = run_interferometer(&cfg)?;
    let da = run.mismatches.delta_alpha_close;
    let dg = run.mismatches.delta_gamma_close;
    let report = contrast_lower_bound(da, dg, cfg.widths, &cfg.setup, cfg.initial.beta0, cfg.initial.y0, omega0);
    Ok(ContrastRow {
        mass,
        omega0,
        delta_alpha: da,
        delta_gamma: dg,
        kappa0: report.kappa0,
        contrast: report.contrast,
    })
}

/// Full pipeline over every (mass, omega0) pair, rows sorted by (mass, omega0).
pub fn contrast_sweep(omega0_grid: &[f64], masses: &[f64], config: &RunConfig) -> Result<Vec<ContrastRow>> {
    if omega0_grid.is_empty() || masses.is_empty() {
        return Err(Error::InvalidArgument("contrast sweep needs non-empty grids".into()));
    }
    let mut points: Vec<(f64, f64)> = masses
        .iter()
        .flat_map(|&m| omega0_grid.iter().map(move |&w| (m, w)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points
        .par_iter()
        .map(|&(m, w)| contrast_point(config, m, w))
        .collect()
}
