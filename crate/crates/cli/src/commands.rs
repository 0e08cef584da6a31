use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use nvsgi::analytic::{analytic_com_state, delta_beta_initial, libration_on_analytic_path, max_superposition, zero_point_y0};
use nvsgi::contrast::{contrast_lower_bound, contrast_sweep, libration_negligibility, sweep_point_config, ContrastRow};
use nvsgi::dynamics::{
    assemble_result, euler_rates, run_interferometer, BranchState, InterferometerResult, Rotor, Spin, TimeGrid,
    Trajectory,
};
use nvsgi::export::{contrast_csv, table_csv, trajectory_csv};
use nvsgi::params::{validate as validate_config, FieldParams, RunConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::output::OutputDir;
use crate::reference::{self, Reference};
use crate::GlobalOpts;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid input.
    Config(String),
    /// The physics pipeline failed.
    Numeric(String),
    /// Results could not be written.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Output(m) => f.write_str(m),
        }
    }
}

impl From<nvsgi::Error> for CliError {
    fn from(e: nvsgi::Error) -> Self {
        use nvsgi::Error as E;
        match e {
            E::InvalidConfig(_) | E::Json(_) | E::InvalidArgument(_) | E::DegenerateField | E::Io(_) => {
                CliError::Config(e.to_string())
            }
            E::UnboundedTrajectory | E::ProjectionInvalid | E::Diverged { .. } | E::GridMismatch(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

fn checked(config: RunConfig) -> Result<RunConfig, CliError> {
    let report = validate_config(&config);
    if report.is_valid() {
        Ok(config)
    } else {
        Err(nvsgi::Error::InvalidConfig(report).into())
    }
}

pub fn load_config(global: &GlobalOpts) -> Result<RunConfig, CliError> {
    let config = match &global.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
    };
    checked(config)
}

fn nonempty(name: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config(format!("--{name} needs at least one value")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("--{name}: {v} is not a finite number")));
    }
    Ok(())
}

/// Closed-form branch pair on the integrator's grid: analytic centre of
/// mass, small-angle libration about the shifted tilt, and Euler angles
/// accumulated from that tilt by the trapezoidal rule.
pub fn analytic_result(config: &RunConfig) -> Result<InterferometerResult, CliError> {
    let ic = &config.initial;
    if ic.x0 != 0.0 || ic.vx0 != 0.0 || ic.vy0 != 0.0 || ic.beta_dot0 != 0.0 {
        return Err(CliError::Config(
            "analytic mode needs x0 = vx0 = vy0 = beta_dot0 = 0".to_string(),
        ));
    }
    let grid = TimeGrid::from_config(config)?;
    let rotor = Rotor::from_config(config);
    let branch = |spin: Spin| -> Result<Trajectory, CliError> {
        let s = spin.sign();
        let mut samples = Vec::new();
        let (mut alpha, mut gamma) = (ic.alpha0, ic.gamma0);
        let mut prev: Option<(f64, f64, f64)> = None;
        for step in 0..=grid.steps {
            let t = grid.time(step);
            let com = analytic_com_state(t, s, &config.setup, ic)?;
            let lib = libration_on_analytic_path(t, s, &config.setup, ic)?;
            let beta = lib.at(t);
            let (ad, gd) = euler_rates(beta, rotor.beta0, rotor.omega0);
            if let Some((t_prev, ad_prev, gd_prev)) = prev {
                alpha += 0.5 * (t - t_prev) * (ad + ad_prev);
                gamma += 0.5 * (t - t_prev) * (gd + gd_prev);
            }
            prev = Some((t, ad, gd));
            if step % grid.stride == 0 || step == grid.steps {
                samples.push(BranchState {
                    t,
                    x: com.x,
                    vx: com.vx,
                    y: com.y,
                    vy: com.vy,
                    beta,
                    beta_dot: -lib.a_beta * lib.omega_eff * (lib.omega_eff * t).sin(),
                    alpha,
                    gamma,
                });
            }
        }
        Ok(Trajectory {
            spin,
            samples,
            conserved: rotor.conserved(),
        })
    };
    Ok(assemble_result(branch(Spin::Plus)?, branch(Spin::Minus)?)?)
}

#[derive(Debug, Serialize)]
pub struct ClosureMetrics {
    pub dx_m: f64,
    pub dy_m: f64,
    pub dvx_m_s: f64,
    pub dvy_m_s: f64,
    pub v_scale_m_s: f64,
}

#[derive(Debug, Serialize)]
pub struct DeltaBetaSummary {
    pub max_abs_rad: f64,
    pub rms_rad: f64,
    pub at_close_rad: f64,
    pub closed_form_initial_rad: f64,
}

#[derive(Debug, Serialize)]
pub struct RunMetrics {
    pub mass_kg: f64,
    pub radius_m: f64,
    pub omega0_rad_s: f64,
    pub t_close_s: f64,
    pub delta_r_max_m: f64,
    pub t_of_max_s: f64,
    pub delta_r_max_closed_form_m: f64,
    pub closure: ClosureMetrics,
    pub delta_beta: DeltaBetaSummary,
    pub delta_alpha_close_rad: f64,
    pub delta_gamma_close_rad: f64,
    pub kappa0: f64,
    pub term_alpha: f64,
    pub term_gamma: f64,
    pub term_libration: f64,
    pub contrast: f64,
    pub libration_negligible: bool,
}

impl RunMetrics {
    fn from_result(config: &RunConfig, r: &InterferometerResult) -> Result<Self, CliError> {
        let (setup, ic) = (&config.setup, &config.initial);
        let db = &r.mismatches.delta_beta;
        let da = r.mismatches.delta_alpha_close;
        let dg = r.mismatches.delta_gamma_close;
        let report = contrast_lower_bound(da, dg, config.widths, setup, ic.beta0, ic.y0, ic.omega0);
        Ok(Self {
            mass_kg: setup.mass(),
            radius_m: setup.nanodiamond.radius(),
            omega0_rad_s: ic.omega0,
            t_close_s: r.t_close,
            delta_r_max_m: r.delta_r_max,
            t_of_max_s: r.t_of_max,
            delta_r_max_closed_form_m: max_superposition(setup, ic.beta0)?,
            closure: ClosureMetrics {
                dx_m: r.closure.dx,
                dy_m: r.closure.dy,
                dvx_m_s: r.closure.dvx,
                dvy_m_s: r.closure.dvy,
                v_scale_m_s: r.closure.v_scale,
            },
            delta_beta: DeltaBetaSummary {
                max_abs_rad: db.iter().map(|d| d.abs()).fold(0.0, f64::max),
                rms_rad: (db.iter().map(|d| d * d).sum::<f64>() / db.len() as f64).sqrt(),
                at_close_rad: *db.last().unwrap_or(&0.0),
                closed_form_initial_rad: delta_beta_initial(setup, ic),
            },
            delta_alpha_close_rad: da,
            delta_gamma_close_rad: dg,
            kappa0: report.kappa0,
            term_alpha: report.term_alpha,
            term_gamma: report.term_gamma,
            term_libration: report.term_libration,
            contrast: report.contrast,
            libration_negligible: libration_negligibility(setup, ic.beta0, ic.y0, ic.omega0).satisfied,
        })
    }
}

#[derive(Debug, Serialize)]
struct SimulateMetrics {
    kind: &'static str,
    mode: &'static str,
    config_hash: String,
    runs: Vec<RunMetrics>,
}

fn mode(analytic: bool) -> &'static str {
    if analytic {
        "analytic"
    } else {
        "numeric"
    }
}

pub fn simulate(global: &GlobalOpts, masses: Option<&[f64]>) -> Result<(), CliError> {
    let config = load_config(global)?;
    let configs: Vec<(Option<f64>, RunConfig)> = match masses {
        None => vec![(None, config)],
        Some(ms) => {
            nonempty("masses", ms)?;
            ms.iter()
                .map(|&m| {
                    let mut c = config;
                    c.setup = config.setup.with_constant_density_mass(m);
                    checked(c).map(|c| (Some(m), c))
                })
                .collect::<Result<_, _>>()?
        }
    };
    let results: Vec<(InterferometerResult, RunMetrics)> = configs
        .par_iter()
        .map(|(_, c)| {
            let r = if global.analytic {
                analytic_result(c)?
            } else {
                run_interferometer(c)?
            };
            let m = RunMetrics::from_result(c, &r)?;
            Ok((r, m))
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = OutputDir::create(&global.out)?;
    let mut runs = Vec::new();
    for ((mass, _), (result, metrics)) in configs.iter().zip(results) {
        let suffix = mass.map(|m| format!("_m{m:e}")).unwrap_or_default();
        out.write(&format!("trajectory_plus{suffix}.csv"), &trajectory_csv(&[&result.plus]))?;
        out.write(&format!("trajectory_minus{suffix}.csv"), &trajectory_csv(&[&result.minus]))?;
        runs.push(metrics);
    }
    let hash = config.hash_hex();
    out.write_json(
        "metrics.json",
        &SimulateMetrics {
            kind: "simulate",
            mode: mode(global.analytic),
            config_hash: hash.clone(),
            runs,
        },
    )?;
    out.finish("simulate", hash, global.seed, global.analytic)
}

pub fn sweep_superposition(global: &GlobalOpts, masses: &[f64], etas: &[f64]) -> Result<(), CliError> {
    let config = load_config(global)?;
    nonempty("masses", masses)?;
    nonempty("etas", etas)?;
    let mut rows = Vec::with_capacity(masses.len() * etas.len());
    for &m in masses {
        for &eta in etas {
            let mut setup = config.setup.with_constant_density_mass(m);
            setup.field = FieldParams::new(setup.field.b0(), eta);
            rows.push(vec![m, eta, max_superposition(&setup, config.initial.beta0)?]);
        }
    }
    let mut out = OutputDir::create(&global.out)?;
    out.write("superposition_map.csv", &table_csv("mass_kg,eta_t_per_m,delta_r_max_m", &rows))?;
    out.finish("sweep-superposition", config.hash_hex(), global.seed, global.analytic)
}

#[derive(Debug, Serialize)]
struct DashedPoint {
    mass_kg: f64,
    delta_alpha_rad: f64,
    delta_gamma_rad: f64,
    kappa0: f64,
    contrast: f64,
}

#[derive(Debug, Serialize)]
struct DashedLine {
    kind: &'static str,
    mode: &'static str,
    omega0_rad_s: f64,
    points: Vec<DashedPoint>,
}

fn default_omega0_grid() -> Vec<f64> {
    let (lo, hi, n) = (5e3f64, 1e5f64, 20);
    (0..n)
        .map(|i| TAU * lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn contrast_rows(config: &RunConfig, omega0: &[f64], masses: &[f64], analytic: bool) -> Result<Vec<ContrastRow>, CliError> {
    if !analytic {
        return Ok(contrast_sweep(omega0, masses, config)?);
    }
    let mut points: Vec<(f64, f64)> = masses
        .iter()
        .flat_map(|&m| omega0.iter().map(move |&w| (m, w)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points
        .par_iter()
        .map(|&(m, w)| {
            let c = sweep_point_config(config, m, w);
            let r = analytic_result(&c)?;
            let (da, dg) = (r.mismatches.delta_alpha_close, r.mismatches.delta_gamma_close);
            let report = contrast_lower_bound(da, dg, c.widths, &c.setup, c.initial.beta0, c.initial.y0, w);
            Ok(ContrastRow {
                mass: m,
                omega0: w,
                delta_alpha: da,
                delta_gamma: dg,
                kappa0: report.kappa0,
                contrast: report.contrast,
            })
        })
        .collect()
}

pub fn contrast(global: &GlobalOpts, masses: &[f64], omega0: Option<&[f64]>) -> Result<(), CliError> {
    let config = load_config(global)?;
    nonempty("masses", masses)?;
    let grid = omega0.map(<[f64]>::to_vec).unwrap_or_else(default_omega0_grid);
    nonempty("omega0", &grid)?;
    if let Some(w) = grid.iter().find(|w| **w <= 0.0) {
        return Err(CliError::Config(format!("--omega0: {w} must be positive")));
    }
    if let Some(m) = masses.iter().find(|m| **m <= 0.0) {
        return Err(CliError::Config(format!("--masses: {m} must be positive")));
    }
    let rows = contrast_rows(&config, &grid, masses, global.analytic)?;
    let dashed = contrast_rows(&config, &[reference::DASHED_OMEGA0], masses, global.analytic)?;

    let mut out = OutputDir::create(&global.out)?;
    out.write("contrast_curve.csv", &contrast_csv(&rows))?;
    out.write_json(
        "dashed_line.json",
        &DashedLine {
            kind: "contrast",
            mode: mode(global.analytic),
            omega0_rad_s: reference::DASHED_OMEGA0,
            points: dashed
                .iter()
                .map(|r| DashedPoint {
                    mass_kg: r.mass,
                    delta_alpha_rad: r.delta_alpha,
                    delta_gamma_rad: r.delta_gamma,
                    kappa0: r.kappa0,
                    contrast: r.contrast,
                })
                .collect(),
        },
    )?;
    out.finish("contrast", config.hash_hex(), global.seed, global.analytic)
}

/// Numbers pulled out of metrics and dashed-line files.
#[derive(Debug, Default)]
struct Collected {
    /// (mass, omega0, t_close, delta_r_max, delta_alpha, contrast)
    runs: Vec<[f64; 6]>,
    /// (mass, delta_alpha, contrast) at the dashed-line spin rate
    dashed: Vec<[f64; 3]>,
}

fn number(v: &Value, key: &str, path: &PathBuf) -> Result<f64, CliError> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Config(format!("{}: missing numeric field `{key}`", path.display())))
}

fn collect(paths: &[PathBuf]) -> Result<Collected, CliError> {
    let mut c = Collected::default();
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match value.get("kind").and_then(Value::as_str) {
            Some("simulate") => {
                for run in value.get("runs").and_then(Value::as_array).into_iter().flatten() {
                    c.runs.push([
                        number(run, "mass_kg", path)?,
                        number(run, "omega0_rad_s", path)?,
                        number(run, "t_close_s", path)?,
                        number(run, "delta_r_max_m", path)?,
                        number(run, "delta_alpha_close_rad", path)?,
                        number(run, "contrast", path)?,
                    ]);
                }
            }
            Some("contrast") => {
                for p in value.get("points").and_then(Value::as_array).into_iter().flatten() {
                    c.dashed.push([
                        number(p, "mass_kg", path)?,
                        number(p, "delta_alpha_rad", path)?,
                        number(p, "contrast", path)?,
                    ]);
                }
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{}: not a metrics or dashed-line file",
                    path.display()
                )))
            }
        }
    }
    Ok(c)
}

pub struct ReportRow {
    pub reference: Reference,
    pub computed: Option<f64>,
}

impl ReportRow {
    pub fn status(&self) -> &'static str {
        match self.computed {
            None => "n/a",
            Some(v) if self.reference.tolerance.accepts(v, self.reference.value) => "PASS",
            Some(_) => "FAIL",
        }
    }
}

fn report_rows(c: &Collected) -> Vec<ReportRow> {
    let dashed_run = |mass: f64| {
        c.runs
            .iter()
            .find(|r| reference::same_mass(r[0], mass) && (r[1] - reference::DASHED_OMEGA0).abs() < 1e-9 * r[1])
    };
    let mut rows = vec![
        ReportRow {
            reference: reference::DELTA_R_MAX,
            computed: c.runs.iter().find(|r| reference::same_mass(r[0], 1e-17)).map(|r| r[3]),
        },
        ReportRow {
            reference: reference::T_CLOSE,
            computed: c.runs.first().map(|r| r[2]),
        },
    ];
    for (mass, reference) in reference::DELTA_ALPHA {
        let computed = c
            .dashed
            .iter()
            .find(|p| reference::same_mass(p[0], mass))
            .map(|p| p[1].abs())
            .or_else(|| dashed_run(mass).map(|r| r[4].abs()));
        rows.push(ReportRow { reference, computed });
    }
    let hbar = RunConfig::default().setup.constants.hbar;
    for (n, reference) in reference::Y0 {
        rows.push(ReportRow {
            reference,
            computed: zero_point_y0(hbar, 1e-17, nvsgi::params::Y0_TRAP_FREQUENCY, n).ok(),
        });
    }
    let (mass, reference) = reference::CONTRAST_HEAVY;
    let computed = c
        .dashed
        .iter()
        .find(|p| reference::same_mass(p[0], mass))
        .map(|p| p[2])
        .or_else(|| dashed_run(mass).map(|r| r[5]));
    rows.push(ReportRow { reference, computed });
    rows
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let mut out = format!("{:<38} {:>12} {:>12} {:>10}  {}\n", "quantity", "reference", "computed", "tolerance", "status");
    for r in rows {
        let computed = r.computed.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<38} {:>12.4e} {:>12} {:>10}  {}\n",
            r.reference.quantity,
            r.reference.value,
            computed,
            r.reference.tolerance.describe(),
            r.status()
        ));
    }
    out
}

pub fn report(paths: &[PathBuf]) -> Result<(), CliError> {
    let collected = collect(paths)?;
    print!("{}", render_report(&report_rows(&collected)));
    Ok(())
}

pub fn defaults() -> Result<(), CliError> {
    println!("{}", RunConfig::default().to_json_pretty());
    Ok(())
}

pub fn validate(global: &GlobalOpts) -> Result<(), CliError> {
    let config = load_config(global)?;
    println!("valid");
    println!("config hash: {}", config.hash_hex());
    Ok(())
}
