//! Coupled centre-of-mass and Euler-angle dynamics of one spin branch.
//!
//! The state vector is (x, vx, y, vy, beta, beta_dot, alpha, gamma). The
//! tilt beta obeys a second-order equation driven by the gyroscopic
//! (inertial) term and the spin torque; alpha and gamma are quadratures of
//! the rates fixed by the conserved momenta p_alpha, p_gamma. Everything is
//! advanced together by fixed-step classical RK4 so that the two branches
//! of an interferometer share one time grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{PhysicalSetup, RunConfig};
use crate::spin_model::nv_site_field;

/// Below this |sin beta| the inertial term and the Euler rates switch to
/// their third-order expansion about beta0.
pub const SIN_GUARD: f64 = 1e-6;

const STATE_DIM: usize = 8;
type State = [f64; STATE_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Plus, Spin::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Spin::Plus => 1.0,
            Spin::Minus => -1.0,
        }
    }

    pub fn label(self) -> i8 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BranchState {
    pub t: f64,
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
    pub beta: f64,
    pub beta_dot: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl BranchState {
    fn from_vec(t: f64, u: &State) -> Self {
        Self {
            t,
            x: u[0],
            vx: u[1],
            y: u[2],
            vy: u[3],
            beta: u[4],
            beta_dot: u[5],
            alpha: u[6],
            gamma: u[7],
        }
    }

    fn to_vec(self) -> State {
        [
            self.x,
            self.vx,
            self.y,
            self.vy,
            self.beta,
            self.beta_dot,
            self.alpha,
            self.gamma,
        ]
    }

    pub fn initial(config: &RunConfig) -> Self {
        let ic = &config.initial;
        Self {
            t: 0.0,
            x: ic.x0,
            vx: ic.vx0,
            y: ic.y0,
            vy: ic.vy0,
            beta: ic.beta0,
            beta_dot: ic.beta_dot0,
            alpha: ic.alpha0,
            gamma: ic.gamma0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite()) && self.t.is_finite()
    }
}

/// How the tilt angle is treated during integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Libration {
    #[default]
    Coupled,
    /// beta held at beta0 (small-angle centre-of-mass oracle).
    Frozen,
}

/// Which field drives the spin torque on beta.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum FieldSource {
    /// B evaluated at the branch's own centre of mass.
    #[default]
    AtCom,
    /// Constant lab-frame (Bx, By), independent of position.
    Fixed { bx: f64, by: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BranchOptions {
    pub libration: Libration,
    pub field: FieldSource,
}

/// Rotor constants shared by every step of a branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotor {
    pub beta0: f64,
    pub omega0: f64,
    pub inertia: f64,
}

impl Rotor {
    pub fn from_config(config: &RunConfig) -> Self {
        Self {
            beta0: config.initial.beta0,
            omega0: config.initial.omega0,
            inertia: config.setup.inertia(),
        }
    }

    pub fn conserved(&self) -> ConservedMomenta {
        ConservedMomenta {
            p_alpha: self.inertia * self.omega0 * self.beta0.cos(),
            p_gamma: self.inertia * self.omega0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConservedMomenta {
    pub p_alpha: f64,
    pub p_gamma: f64,
}

/// Lab-frame field that exerts the torque on the NV axis.
pub fn torque_field(state: &BranchState, setup: &PhysicalSetup, source: FieldSource) -> (f64, f64) {
    match source {
        FieldSource::Fixed { bx, by } => (bx, by),
        FieldSource::AtCom => {
            let (bx, by) = setup.field.at(state.x, state.y);
            let nd = &setup.nanodiamond;
            let bx = if nd.nv_offset != 0.0 {
                nv_site_field(bx, setup.field.eta(), nd.nv_offset, nd.nv_offset_angle, state.beta)
            } else {
                bx
            };
            (bx, by)
        }
    }
}

/// Centre-of-mass acceleration: diamagnetic restoring force about the
/// shifted origin plus the spin-dependent Zeeman gradient force.
pub fn com_acceleration(state: &BranchState, s: f64, setup: &PhysicalSetup) -> (f64, f64) {
    let omega_sq = setup.trap_frequency_squared();
    let eta = setup.field.eta();
    let shift = if eta != 0.0 { setup.field.b0() / eta } else { 0.0 };
    let zeeman = s * setup.mu() * eta / setup.mass();
    let (sb, cb) = state.beta.sin_cos();
    (
        -omega_sq * (state.x + shift) - zeeman * cb,
        -omega_sq * state.y + zeeman * sb,
    )
}

/// (cos b0 - cos b)(cos b0 cos b - 1) / sin^3 b, i.e. the gyroscopic
/// acceleration divided by omega0^2.
fn inertial_shape(beta: f64, beta0: f64) -> f64 {
    let (sb, cb) = beta.sin_cos();
    if sb.abs() >= SIN_GUARD {
        let c0 = beta0.cos();
        (c0 - cb) * (c0 * cb - 1.0) / (sb * sb * sb)
    } else {
        let d = beta - beta0;
        let (s0, c0) = beta0.sin_cos();
        -d + 1.5 * (c0 / s0) * d * d + (7.0 - 15.0 / (s0 * s0)) * d * d * d / 6.0
    }
}

/// (cos b0 - cos b) / sin^2 b, i.e. alpha_dot / omega0.
fn precession_shape(beta: f64, beta0: f64) -> f64 {
    let (sb, cb) = beta.sin_cos();
    if sb.abs() >= SIN_GUARD {
        (beta0.cos() - cb) / (sb * sb)
    } else {
        let d = beta - beta0;
        let (s0, c0) = beta0.sin_cos();
        d / s0 - 1.5 * c0 / (s0 * s0) * d * d + (12.0 / (s0 * s0) - 7.0) / s0 * d * d * d / 6.0
    }
}

/// beta_ddot from the gyroscopic term and the spin torque s mu (Bx sin b - By cos b) / I.
pub fn beta_acceleration(
    state: &BranchState,
    s: f64,
    setup: &PhysicalSetup,
    rotor: &Rotor,
    field: (f64, f64),
) -> f64 {
    let (bx, by) = field;
    let (sb, cb) = state.beta.sin_cos();
    let torque = s * setup.mu() / rotor.inertia * (bx * sb - by * cb);
    rotor.omega0 * rotor.omega0 * inertial_shape(state.beta, rotor.beta0) + torque
}

/// (alpha_dot, gamma_dot) fixed by the conserved momenta.
pub fn euler_rates(beta: f64, beta0: f64, omega0: f64) -> (f64, f64) {
    let alpha_dot = omega0 * precession_shape(beta, beta0);
    (alpha_dot, omega0 - alpha_dot * beta.cos())
}

/// Rotational energy with a frozen field; conserved when B does not move.
pub fn rotational_energy(state: &BranchState, s: f64, setup: &PhysicalSetup, rotor: &Rotor, field: (f64, f64)) -> f64 {
    let i = rotor.inertia;
    let p = rotor.conserved();
    let (sb, cb) = state.beta.sin_cos();
    let (bx, by) = field;
    0.5 * i * state.beta_dot * state.beta_dot
        + (p.p_alpha - p.p_gamma * cb).powi(2) / (2.0 * i * sb * sb)
        + p.p_gamma * p.p_gamma / (2.0 * i)
        + s * setup.mu() * (bx * cb + by * sb)
}

struct BranchSystem<'a> {
    setup: &'a PhysicalSetup,
    rotor: Rotor,
    s: f64,
    opts: BranchOptions,
}

impl BranchSystem<'_> {
    fn derivative(&self, u: &State) -> State {
        let state = BranchState::from_vec(0.0, u);
        let (ax, ay) = com_acceleration(&state, self.s, self.setup);
        let (beta_dot, beta_ddot, alpha_dot, gamma_dot) = match self.opts.libration {
            Libration::Frozen => (0.0, 0.0, 0.0, self.rotor.omega0),
            Libration::Coupled => {
                let field = torque_field(&state, self.setup, self.opts.field);
                let acc = beta_acceleration(&state, self.s, self.setup, &self.rotor, field);
                let (ad, gd) = euler_rates(state.beta, self.rotor.beta0, self.rotor.omega0);
                (state.beta_dot, acc, ad, gd)
            }
        };
        [u[1], ax, u[3], ay, beta_dot, beta_ddot, alpha_dot, gamma_dot]
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], u: &[f64; N], h: f64) -> [f64; N] {
    let add = |a: f64, k: &[f64; N]| {
        let mut out = *u;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += a * ki;
        }
        out
    };
    let k1 = f(u);
    let k2 = f(&add(0.5 * h, &k1));
    let k3 = f(&add(0.5 * h, &k2));
    let k4 = f(&add(h, &k3));
    let mut out = *u;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integration grid: `steps` equal steps of `h` ending exactly at t_close.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_close: f64,
    pub steps: usize,
    pub h: f64,
    pub stride: usize,
}

impl TimeGrid {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let t_close = config.t_close()?;
        let dt = config.dt()?;
        if !(t_close > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_close = {t_close:e} and dt = {dt:e} must be positive"
            )));
        }
        let steps = ((t_close / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self {
            t_close,
            steps,
            h: t_close / steps as f64,
            stride: config.output.stride.max(1),
        })
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.steps {
            self.t_close
        } else {
            step as f64 * self.h
        }
    }

    fn records(&self, step: usize) -> bool {
        step % self.stride == 0 || step == self.steps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub spin: Spin,
    pub samples: Vec<BranchState>,
    pub conserved: ConservedMomenta,
}

impl Trajectory {
    pub fn last(&self) -> &BranchState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Lab-frame (Bx, By) at each sampled centre of mass.
    pub fn field_along_path(&self, setup: &PhysicalSetup) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| setup.field.at(s.x, s.y)).collect()
    }

    /// Largest relative residual of the two conserved-momentum identities
    /// I (alpha_dot cos b + gamma_dot) = p_gamma and
    /// I alpha_dot sin^2 b + p_gamma cos b = p_alpha over all samples.
    pub fn momentum_residual(&self, rotor: &Rotor) -> f64 {
        let p = self.conserved;
        let i = rotor.inertia;
        self.samples
            .iter()
            .map(|st| {
                let (ad, gd) = euler_rates(st.beta, rotor.beta0, rotor.omega0);
                let (sb, cb) = st.beta.sin_cos();
                let r_gamma = (i * (ad * cb + gd) - p.p_gamma).abs() / p.p_gamma.abs();
                let r_alpha = (i * ad * sb * sb + p.p_gamma * cb - p.p_alpha).abs() / p.p_alpha.abs();
                r_gamma.max(r_alpha)
            })
            .fold(0.0, f64::max)
    }
}

pub fn integrate_branch(config: &RunConfig, spin: Spin) -> Result<Trajectory> {
    integrate_branch_with(config, spin, BranchOptions::default())
}

pub fn integrate_branch_with(config: &RunConfig, spin: Spin, opts: BranchOptions) -> Result<Trajectory> {
    let grid = TimeGrid::from_config(config)?;
    let rotor = Rotor::from_config(config);
    let system = BranchSystem {
        setup: &config.setup,
        rotor,
        s: spin.sign(),
        opts,
    };
    let start = BranchState::initial(config);
    let mut u = start.to_vec();
    if opts.libration == Libration::Frozen {
        u[4] = rotor.beta0;
        u[5] = 0.0;
    }
    let mut samples = Vec::with_capacity(grid.steps / grid.stride + 2);
    samples.push(BranchState::from_vec(0.0, &u));
    for step in 1..=grid.steps {
        let next = rk4_step(|v| system.derivative(v), &u, grid.h);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                last_good_time: grid.time(step - 1),
            });
        }
        u = next;
        if grid.records(step) {
            samples.push(BranchState::from_vec(grid.time(step), &u));
        }
    }
    Ok(Trajectory {
        spin,
        samples,
        conserved: rotor.conserved(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Closure {
    pub dx: f64,
    pub dy: f64,
    pub dvx: f64,
    pub dvy: f64,
    /// Largest speed reached by either branch; the scale for dvx, dvy.
    pub v_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatches {
    /// beta_plus(t) - beta_minus(t) at every sample.
    pub delta_beta: Vec<f64>,
    pub delta_alpha_close: f64,
    pub delta_gamma_close: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterferometerResult {
    pub plus: Trajectory,
    pub minus: Trajectory,
    pub delta_r_max: f64,
    pub t_of_max: f64,
    pub t_close: f64,
    pub closure: Closure,
    pub mismatches: Mismatches,
}

impl InterferometerResult {
    pub fn separation(&self) -> Vec<(f64, f64)> {
        self.plus
            .samples
            .iter()
            .zip(&self.minus.samples)
            .map(|(p, m)| (p.t, (p.x - m.x).hypot(p.y - m.y)))
            .collect()
    }

    /// alpha_plus - alpha_minus and gamma_plus - gamma_minus at every sample.
    pub fn euler_mismatch_series(&self) -> Vec<(f64, f64, f64)> {
        self.plus
            .samples
            .iter()
            .zip(&self.minus.samples)
            .map(|(p, m)| (p.t, p.alpha - m.alpha, p.gamma - m.gamma))
            .collect()
    }
}

/// Maximum of a sampled curve, refined by the parabola through the largest
/// sample and its two neighbours.
pub fn refined_maximum(series: &[(f64, f64)]) -> (f64, f64) {
    let (imax, &(t_best, v_best)) = series
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty series");
    if imax == 0 || imax + 1 >= series.len() {
        return (t_best, v_best);
    }
    let (t0, f0) = series[imax - 1];
    let (t1, f1) = series[imax];
    let (t2, f2) = series[imax + 1];
    // Lagrange form of the interpolating parabola.
    let d01 = (f1 - f0) / (t1 - t0);
    let d12 = (f2 - f1) / (t2 - t1);
    let curvature = (d12 - d01) / (t2 - t0);
    if !(curvature < 0.0) {
        return (t_best, v_best);
    }
    let t_star = 0.5 * (t0 + t1) - d01 / (2.0 * curvature);
    let t_star = t_star.clamp(t0, t2);
    let value = f0 + d01 * (t_star - t0) + curvature * (t_star - t0) * (t_star - t1);
    (t_star, value.max(v_best))
}

pub fn run_interferometer(config: &RunConfig) -> Result<InterferometerResult> {
    run_interferometer_with(config, BranchOptions::default())
}

pub fn run_interferometer_with(config: &RunConfig, opts: BranchOptions) -> Result<InterferometerResult> {
    let (plus, minus) = rayon::join(
        || integrate_branch_with(config, Spin::Plus, opts),
        || integrate_branch_with(config, Spin::Minus, opts),
    );
    assemble_result(plus?, minus?)
}

/// Pair two branch trajectories on a shared grid into closure and
/// mismatch metrics.
pub fn assemble_result(plus: Trajectory, minus: Trajectory) -> Result<InterferometerResult> {
    if plus.samples.len() != minus.samples.len()
        || plus.samples.iter().zip(&minus.samples).any(|(a, b)| a.t != b.t)
    {
        return Err(Error::GridMismatch("branch trajectories sampled differently".into()));
    }
    let separation: Vec<(f64, f64)> = plus
        .samples
        .iter()
        .zip(&minus.samples)
        .map(|(p, m)| (p.t, (p.x - m.x).hypot(p.y - m.y)))
        .collect();
    let (t_of_max, delta_r_max) = refined_maximum(&separation);
    let (p_end, m_end) = (plus.last(), minus.last());
    let v_scale = plus
        .samples
        .iter()
        .chain(&minus.samples)
        .map(|s| s.vx.hypot(s.vy))
        .fold(0.0, f64::max);
    let closure = Closure {
        dx: p_end.x - m_end.x,
        dy: p_end.y - m_end.y,
        dvx: p_end.vx - m_end.vx,
        dvy: p_end.vy - m_end.vy,
        v_scale,
    };
    let mismatches = Mismatches {
        delta_beta: plus
            .samples
            .iter()
            .zip(&minus.samples)
            .map(|(p, m)| p.beta - m.beta)
            .collect(),
        delta_alpha_close: p_end.alpha - m_end.alpha,
        delta_gamma_close: p_end.gamma - m_end.gamma,
    };
    let t_close = p_end.t;
    Ok(InterferometerResult {
        plus,
        minus,
        delta_r_max,
        t_of_max,
        t_close,
        closure,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{FieldParams, RunConfig};
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn baseline() -> RunConfig {
        RunConfig::default()
    }

    #[test]
    fn com_force_balance_at_shifted_origin() {
        let cfg = baseline();
        let setup = &cfg.setup;
        let state = BranchState {
            x: -setup.field.b0() / setup.field.eta(),
            beta: FRAC_PI_2,
            ..Default::default()
        };
        let (ax, _) = com_acceleration(&state, 1.0, setup);
        assert!(ax.abs() < 1e-12);
    }

    #[test]
    fn com_spin_flip_negates_zeeman_part() {
        let cfg = baseline();
        let state = BranchState { x: 3e-6, y: -2e-7, beta: 0.3, ..Default::default() };
        let (px, py) = com_acceleration(&state, 1.0, &cfg.setup);
        let (mx, my) = com_acceleration(&state, -1.0, &cfg.setup);
        let omega_sq = cfg.setup.trap_frequency_squared();
        let trap_x = -omega_sq * (state.x + cfg.setup.field.b0() / cfg.setup.field.eta());
        let trap_y = -omega_sq * state.y;
        assert!(((px + mx) / 2.0 - trap_x).abs() < 1e-12 * trap_x.abs());
        assert!(((py + my) / 2.0 - trap_y).abs() < 1e-12 * trap_y.abs());
        assert!(((px - trap_x) + (mx - trap_x)).abs() < 1e-12 * trap_x.abs());
    }

    #[test]
    fn com_acceleration_at_start() {
        let cfg = baseline();
        let state = BranchState { beta: 1e-3, ..Default::default() };
        let (ax, _) = com_acceleration(&state, 1.0, &cfg.setup);
        // Omega^2 B0/|eta| = 4.835 m/s^2 and mu |eta| / m = 0.01298 m/s^2.
        let trap = cfg.setup.trap_frequency_squared() * 0.14 / 7000.0;
        let zeeman = cfg.setup.mu() * 7000.0 / 1e-17 * 1e-3f64.cos();
        assert!((trap - 4.835).abs() < 1e-3);
        assert!((zeeman - 0.01298).abs() < 1e-5);
        assert!((ax - (trap + zeeman)).abs() < 1e-12 * ax);
    }

    #[test]
    fn beta_acceleration_cases() {
        let cfg = baseline();
        let rotor = Rotor::from_config(&cfg);
        let state = BranchState { beta: rotor.beta0, ..Default::default() };
        assert_eq!(beta_acceleration(&state, 1.0, &cfg.setup, &rotor, (0.0, 0.0)), 0.0);
        let acc = beta_acceleration(&state, 1.0, &cfg.setup, &rotor, (0.14, 0.0));
        let expected = cfg.setup.mu() * 0.14 / 1e-32 * 1e-3f64.sin();
        assert!((acc - expected).abs() < 1e-12 * expected);
        assert!((acc - 2.597e5).abs() < 1e2);
        let flipped = beta_acceleration(&state, -1.0, &cfg.setup, &rotor, (0.14, 0.0));
        assert_eq!(flipped, -acc);
    }

    #[test]
    fn euler_rates_at_rest_tilt() {
        let omega0 = TAU * 1e4;
        assert_eq!(euler_rates(1e-3, 1e-3, omega0), (0.0, omega0));
        let delta = 1e-6;
        let (ad, _) = euler_rates(1e-3 + delta, 1e-3, omega0);
        let linear = omega0 / 1e-3 * delta;
        assert!((ad - linear).abs() < 2e-3 * linear);
    }

    #[test]
    fn euler_rate_momentum_identity() {
        let omega0 = 1234.5;
        let beta0 = 0.4;
        for beta in [0.05, 0.3, 0.4, 0.9, 2.0, 3.0] {
            let (ad, gd) = euler_rates(beta, beta0, omega0);
            let p_gamma = ad * beta.cos() + gd;
            assert!((p_gamma - omega0).abs() < 1e-12 * omega0);
            let p_alpha = ad * beta.sin().powi(2) + omega0 * beta.cos();
            assert!((p_alpha - omega0 * beta0.cos()).abs() < 1e-12 * omega0);
        }
    }

    #[test]
    fn guard_expansion_is_continuous() {
        // Series and closed form must agree where both are valid.
        let beta0: f64 = 1e-3;
        for d in [-1e-5, 2e-5, 5e-5] {
            let beta = beta0 + d;
            let (sb, cb) = beta.sin_cos();
            let c0 = beta0.cos();
            let exact = (c0 - cb) * (c0 * cb - 1.0) / sb.powi(3);
            let d_ = beta - beta0;
            let (s0, c0_) = beta0.sin_cos();
            let series = -d_ + 1.5 * (c0_ / s0) * d_ * d_ + (7.0 - 15.0 / (s0 * s0)) * d_.powi(3) / 6.0;
            assert!((exact - series).abs() < 0.05 * exact.abs(), "{exact} vs {series}");
            let exact_a = (c0 - cb) / sb.powi(2);
            let series_a = d_ / s0 - 1.5 * c0_ / (s0 * s0) * d_ * d_ + (12.0 / (s0 * s0) - 7.0) / s0 * d_.powi(3) / 6.0;
            assert!((exact_a - series_a).abs() < 0.05 * exact_a.abs());
        }
    }

    #[test]
    fn guard_keeps_state_finite_near_zero_tilt() {
        let omega0 = TAU * 1e4;
        let acc = inertial_shape(1e-9, 1e-3) * omega0 * omega0;
        assert!(acc.is_finite());
        let (ad, gd) = euler_rates(0.0, 1e-3, omega0);
        assert!(ad.is_finite() && gd.is_finite());
    }

    #[test]
    fn decoupled_spin_follows_harmonic_solution() {
        let mut cfg = baseline();
        cfg.setup.constants.mu_b = 0.0;
        let traj = integrate_branch(&cfg, Spin::Plus).unwrap();
        let omega = cfg.setup.trap_frequency_squared().sqrt();
        let amp = cfg.setup.field.b0() / cfg.setup.field.eta();
        for s in &traj.samples {
            let exact = amp * ((omega * s.t).cos() - 1.0);
            assert!((s.x - exact).abs() < 1e-9 * amp.abs(), "t = {}", s.t);
        }
        assert!(traj.last().x.abs() < 1e-9 * amp.abs());
    }

    #[test]
    fn torque_free_rotor_keeps_tilt() {
        let mut cfg = baseline();
        cfg.initial.omega0 = 0.0;
        cfg.setup.field = FieldParams::new(0.0, 0.0);
        cfg.t_close = Some(1e-3);
        cfg.dt = Some(1e-6);
        let traj = integrate_branch(&cfg, Spin::Minus).unwrap();
        assert!(traj.samples.iter().all(|s| s.beta == cfg.initial.beta0));
    }

    #[test]
    fn first_sample_is_initial_condition_and_times_increase() {
        let cfg = baseline();
        let traj = integrate_branch(&cfg, Spin::Plus).unwrap();
        assert_eq!(traj.samples[0], BranchState::initial(&cfg));
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.last().t, cfg.t_close().unwrap());
    }

    #[test]
    fn rk4_fourth_order_on_decoupled_case() {
        let mut cfg = baseline();
        cfg.setup.constants.mu_b = 0.0;
        cfg.output.stride = usize::MAX;
        let omega = cfg.setup.trap_frequency_squared().sqrt();
        let t_close = TAU / omega;
        let amp = cfg.setup.field.b0() / cfg.setup.field.eta();
        let quarter = 0.3 * t_close;
        cfg.t_close = Some(quarter);
        let exact = amp * ((omega * quarter).cos() - 1.0);
        let err = |n: f64| {
            let mut c = cfg;
            c.dt = Some(quarter / n);
            (integrate_branch(&c, Spin::Plus).unwrap().last().x - exact).abs()
        };
        let (e1, e2) = (err(20.0), err(40.0));
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = baseline();
        cfg.initial.vx0 = f64::NAN;
        assert!(matches!(
            integrate_branch(&cfg, Spin::Plus),
            Err(Error::Diverged { last_good_time }) if last_good_time == 0.0
        ));
    }

    #[test]
    fn refined_maximum_recovers_parabola_peak() {
        let series: Vec<(f64, f64)> = (0..11)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, 2.0 - (t - 0.437).powi(2))
            })
            .collect();
        let (t, v) = refined_maximum(&series);
        assert!((t - 0.437).abs() < 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let cfg = baseline();
        let plus = integrate_branch(&cfg, Spin::Plus).unwrap();
        let mut other = cfg;
        other.output.stride = 7;
        let minus = integrate_branch(&other, Spin::Minus).unwrap();
        assert!(matches!(assemble_result(plus, minus), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn baseline_run_metrics() {
        let cfg = baseline();
        let res = run_interferometer(&cfg).unwrap();
        let omega = cfg.setup.trap_frequency_squared().sqrt();
        assert!((res.delta_r_max - 2.148e-7).abs() < 0.002e-7, "{}", res.delta_r_max);
        assert!((res.t_of_max - std::f64::consts::PI / omega).abs() < 0.01 * res.t_close);
        assert_eq!(res.mismatches.delta_beta.len(), res.plus.samples.len());
        assert!(res.closure.dx.abs() < 1e-3 * res.delta_r_max);
        assert!(res.closure.dy.abs() < 1e-3 * res.delta_r_max);
        assert!(res.closure.dvx.abs() < 1e-3 * res.closure.v_scale);
        assert!(res.closure.dvy.abs() < 1e-3 * res.closure.v_scale);
        let confined = res
            .plus
            .samples
            .iter()
            .chain(&res.minus.samples)
            .all(|s| (s.beta - cfg.initial.beta0).abs() < 6e-4);
        assert!(confined);
    }
}
