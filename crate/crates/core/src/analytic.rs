//! Closed-form small-angle results. They are physics outputs in their own
//! right and the reference solutions the integrator is checked against.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{derived_trap_frequency, InitialConditions, PhysicalSetup};

/// Centre-of-mass position and velocity of one branch with beta frozen at beta0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticCom {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
}

/// Harmonic solution starting from rest at (0, y0):
/// x = (s mu eta / m Omega^2 + B0/eta)(cos Omega t - 1),
/// y = y0 cos Omega t - (s mu eta / m Omega^2) beta0 (cos Omega t - 1).
pub fn analytic_com_state(t: f64, s: f64, setup: &PhysicalSetup, ics: &InitialConditions) -> Result<AnalyticCom> {
    let omega = derived_trap_frequency(setup)?;
    let eta = setup.field.eta();
    let push = s * setup.mu() * eta / (setup.mass() * omega * omega);
    let x_amp = push + setup.field.b0() / eta;
    let y_amp = -push * ics.beta0;
    let (sin, cos) = (omega * t).sin_cos();
    Ok(AnalyticCom {
        x: x_amp * (cos - 1.0),
        vx: -x_amp * omega * sin,
        y: ics.y0 * cos + y_amp * (cos - 1.0),
        vy: -(ics.y0 + y_amp) * omega * sin,
    })
}

pub fn analytic_com(t: f64, s: f64, setup: &PhysicalSetup, ics: &InitialConditions) -> Result<(f64, f64)> {
    let st = analytic_com_state(t, s, setup, ics)?;
    Ok((st.x, st.y))
}

/// Largest branch separation, reached at half the loop:
/// 4 mu |eta| / (m Omega^2) * sqrt(1 + beta0^2).
pub fn max_superposition(setup: &PhysicalSetup, beta0: f64) -> Result<f64> {
    let omega_sq = setup.trap_frequency_squared();
    if !(omega_sq > 0.0) {
        return Err(Error::UnboundedTrajectory);
    }
    let dx = 4.0 * setup.mu() * setup.field.eta().abs() / (setup.mass() * omega_sq);
    Ok(dx * (1.0 + beta0 * beta0).sqrt())
}

/// beta(t) = a_beta cos(omega_eff t) + beta_bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallAngleLibration {
    pub a_beta: f64,
    pub beta_bar: f64,
    pub omega_eff: f64,
}

impl SmallAngleLibration {
    pub fn at(&self, t: f64) -> f64 {
        self.a_beta * (self.omega_eff * t).cos() + self.beta_bar
    }
}

/// Torque lever B_x beta0 - B_y that sets the spin-dependent tilt shift.
pub fn torque_lever(field: (f64, f64), beta0: f64) -> f64 {
    field.0 * beta0 - field.1
}

/// Leading-order libration: oscillation at omega0 about
/// beta_bar = beta0 + s mu (Bx beta0 - By) / (I omega0^2), with the
/// amplitude chosen so that beta(0) = beta0.
pub fn libration_parameters(
    s: f64,
    setup: &PhysicalSetup,
    ics: &InitialConditions,
    field: (f64, f64),
) -> SmallAngleLibration {
    let shift = s * setup.mu() * torque_lever(field, ics.beta0) / (setup.inertia() * ics.omega0.powi(2));
    SmallAngleLibration {
        a_beta: -shift,
        beta_bar: ics.beta0 + shift,
        omega_eff: ics.omega0,
    }
}

/// Linearized libration keeping the spin-dependent stiffness
/// omega^2 = omega0^2 - s mu (Bx + By beta0) / I in both the frequency and
/// the equilibrium shift.
pub fn linearized_libration_parameters(
    s: f64,
    setup: &PhysicalSetup,
    ics: &InitialConditions,
    field: (f64, f64),
) -> SmallAngleLibration {
    let i = setup.inertia();
    let stiffness = i * ics.omega0.powi(2) - s * setup.mu() * (field.0 + field.1 * ics.beta0);
    let shift = s * setup.mu() * torque_lever(field, ics.beta0) / stiffness;
    SmallAngleLibration {
        a_beta: -shift,
        beta_bar: ics.beta0 + shift,
        omega_eff: (stiffness / i).sqrt(),
    }
}

pub fn small_angle_libration(
    t: f64,
    s: f64,
    setup: &PhysicalSetup,
    ics: &InitialConditions,
    field: (f64, f64),
) -> f64 {
    libration_parameters(s, setup, ics, field).at(t)
}

/// Libration parameters with the field taken from the analytic
/// centre-of-mass path at time t (the oracle route).
pub fn libration_on_analytic_path(
    t: f64,
    s: f64,
    setup: &PhysicalSetup,
    ics: &InitialConditions,
) -> Result<SmallAngleLibration> {
    let (x, y) = analytic_com(t, s, setup, ics)?;
    Ok(libration_parameters(s, setup, ics, setup.field.at(x, y)))
}

/// Branch tilt mismatch at the start, 4 mu (B0 beta0 + eta y0) / (I omega0^2), signed.
pub fn delta_beta_initial(setup: &PhysicalSetup, ics: &InitialConditions) -> f64 {
    let lever = setup.field.b0() * ics.beta0 + setup.field.eta() * ics.y0;
    4.0 * setup.mu() * lever / (setup.inertia() * ics.omega0.powi(2))
}

/// Precession and spin mismatches from the branch tilts,
/// delta_alpha(t) = (omega0 / beta0) * integral of (beta_plus - beta_minus),
/// delta_gamma = -delta_alpha. Trapezoidal rule on the shared grid.
pub fn delta_alpha_gamma(
    beta_plus: &[(f64, f64)],
    beta_minus: &[(f64, f64)],
    beta0: f64,
    omega0: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if beta_plus.len() != beta_minus.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} samples",
            beta_plus.len(),
            beta_minus.len()
        )));
    }
    if let Some(((tp, _), (tm, _))) = beta_plus.iter().zip(beta_minus).find(|(p, m)| p.0 != m.0) {
        return Err(Error::GridMismatch(format!("t = {tp:e} vs t = {tm:e}")));
    }
    let scale = omega0 / beta0;
    let mut alpha = Vec::with_capacity(beta_plus.len());
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (p, m) in beta_plus.iter().zip(beta_minus) {
        let diff = p.1 - m.1;
        if let Some((t_prev, d_prev)) = prev {
            acc += 0.5 * (p.0 - t_prev) * (diff + d_prev);
        }
        prev = Some((p.0, diff));
        alpha.push(scale * acc);
    }
    let gamma = alpha.iter().map(|a| -a).collect();
    Ok((alpha, gamma))
}

/// Position spread of the n-th oscillator level, sqrt(hbar (n + 1/2) / (m omega)).
pub fn zero_point_y0(hbar: f64, mass: f64, omega_trap: f64, n: f64) -> Result<f64> {
    if !(omega_trap > 0.0) || !(mass > 0.0) || !(n >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zero-point estimate needs omega > 0, m > 0, n >= 0 (got {omega_trap}, {mass}, {n})"
        )));
    }
    Ok((hbar / (mass * omega_trap) * (n + 0.5)).sqrt())
}
