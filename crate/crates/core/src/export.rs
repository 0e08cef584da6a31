//! CSV writers. Every float is printed with 17 significant digits so that
//! identical runs produce byte-identical files.

use std::fmt::Write as _;

use crate::contrast::ContrastRow;
use crate::dynamics::{BranchState, Trajectory};

pub const TRAJECTORY_HEADER: &str = "t,x,vx,y,vy,beta,beta_dot,alpha,gamma,s";
pub const CONTRAST_HEADER: &str = "mass_kg,omega0_rad_s,delta_alpha_rad,delta_gamma_rad,kappa0,contrast";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
}

fn state_values(s: &BranchState) -> [f64; 9] {
    [s.t, s.x, s.vx, s.y, s.vy, s.beta, s.beta_dot, s.alpha, s.gamma]
}

/// Both branches in one table, the spin label in the last column.
pub fn trajectory_csv(branches: &[&Trajectory]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for traj in branches {
        for s in &traj.samples {
            push_row(&mut out, &state_values(s));
            let _ = writeln!(out, ",{}", traj.spin.label());
        }
    }
    out
}

pub fn contrast_csv(rows: &[ContrastRow]) -> String {
    let mut out = String::from(CONTRAST_HEADER);
    out.push('\n');
    for r in rows {
        push_row(&mut out, &[r.mass, r.omega0, r.delta_alpha, r.delta_gamma, r.kappa0, r.contrast]);
        out.push('\n');
    }
    out
}

/// Generic table with a caller-supplied header.
pub fn table_csv(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        push_row(&mut out, r);
        out.push('\n');
    }
    out
}
