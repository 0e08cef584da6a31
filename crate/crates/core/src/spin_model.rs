//! NV ground-state spin Hamiltonian.
//!
//! Lab-frame 3x3 matrix in the basis {|+1>, |0>, |-1>}, its Feshbach
//! projection onto the {|+1>, |-1>} doublet, the adiabatic branch energies,
//! and the adiabaticity conditions on the spin rate omega0.

use num_complex::Complex64;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_ADIABATIC_MARGIN: f64 = 100.0;

/// Ratio mu B_perp / D above which the second-order projection is flagged.
pub const PROJECTION_WARN_RATIO: f64 = 0.1;

/// Magnetic field resolved against the NV axis.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FieldAtNV {
    pub b_par: f64,
    /// Always non-negative; the sign of the transverse projection is folded
    /// into `gamma_az`.
    pub b_perp: f64,
    pub gamma_az: f64,
}

impl FieldAtNV {
    /// Transverse components (B2, B3) = B_perp (sin gamma, cos gamma).
    pub fn transverse(&self) -> (f64, f64) {
        let (s, c) = self.gamma_az.sin_cos();
        (self.b_perp * s, self.b_perp * c)
    }

    pub fn magnitude(&self) -> f64 {
        self.b_par.hypot(self.b_perp)
    }
}

/// Project a lab-frame field (Bx, By) onto an NV axis tilted by `beta`
/// from the x axis. A negative transverse projection is returned as a
/// positive magnitude with the azimuth advanced by pi.
pub fn project_field(bx: f64, by: f64, beta: f64, gamma: f64) -> FieldAtNV {
    let (sb, cb) = beta.sin_cos();
    let b_par = bx * cb + by * sb;
    let signed_perp = bx * sb - by * cb;
    let gamma_az = if signed_perp < 0.0 {
        (gamma + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
    } else {
        gamma
    };
    FieldAtNV {
        b_par,
        b_perp: signed_perp.abs(),
        gamma_az,
    }
}

/// NV-site field: adds the gradient seen across an off-centre NV,
/// eta d cos(beta + alpha'), to the centre-of-mass value.
pub fn nv_site_field(b_com: f64, eta: f64, offset: f64, offset_angle: f64, beta: f64) -> f64 {
    b_com + eta * offset * (beta + offset_angle).cos()
}

fn complex_entries<const N: usize>(rows: &[[Complex64; N]; N]) -> Vec<[f64; 2]> {
    rows.iter()
        .flat_map(|row| row.iter().map(|z| [z.re, z.im]))
        .collect()
}

/// Lab-frame spin Hamiltonian, basis {|+1>, |0>, |-1>}, joules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinMatrix3(pub [[Complex64; 3]; 3]);

impl SpinMatrix3 {
    pub fn is_hermitian(&self) -> bool {
        let m = &self.0;
        (0..3).all(|i| (0..3).all(|j| m[i][j] == m[j][i].conj()))
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = crate::hermitian::eigh3(&self.0);
        [e[0].value, e[1].value, e[2].value]
    }
}

impl Serialize for SpinMatrix3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SpinMatrix3", 2)?;
        s.serialize_field("dim", &3)?;
        s.serialize_field("entries", &complex_entries(&self.0))?;
        s.end()
    }
}

pub fn build_spin_matrix(field: &FieldAtNV, d_zfs: f64, e_strain: f64, mu: f64) -> SpinMatrix3 {
    let zeeman = mu * field.b_par;
    let t = mu * field.b_perp / std::f64::consts::SQRT_2;
    let down = Complex64::from_polar(t, -field.gamma_az);
    let up = down.conj();
    let shift = d_zfs / 3.0;
    let re = |v: f64| Complex64::new(v, 0.0);
    SpinMatrix3([
        [re(zeeman + shift), down, re(e_strain)],
        [up, re(-d_zfs + shift), down],
        [re(e_strain), up, re(-zeeman + shift)],
    ])
}

/// Projected doublet Hamiltonian in {|+1>, |-1>} including the scalar
/// offset D/3 + mu^2 B_perp^2 / 2D on the diagonal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveMatrix2 {
    pub matrix: [[Complex64; 2]; 2],
    pub offset: f64,
}

impl EffectiveMatrix2 {
    pub fn trace(&self) -> f64 {
        self.matrix[0][0].re + self.matrix[1][1].re
    }

    pub fn is_hermitian(&self) -> bool {
        let m = &self.matrix;
        m[0][0].im == 0.0 && m[1][1].im == 0.0 && m[0][1] == m[1][0].conj()
    }

    /// Closed-form eigenvalues, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.matrix;
        let mean = 0.5 * (m[0][0].re + m[1][1].re);
        let half = 0.5 * (m[0][0].re - m[1][1].re);
        let r = half.hypot(m[0][1].norm());
        [mean - r, mean + r]
    }
}

impl Serialize for EffectiveMatrix2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("EffectiveMatrix2", 3)?;
        s.serialize_field("dim", &2)?;
        s.serialize_field("entries", &complex_entries(&self.matrix))?;
        s.serialize_field("offset", &self.offset)?;
        s.end()
    }
}

/// Body-frame doublet Hamiltonian after eliminating |0>, with the
/// rotational shift -hbar omega0 on the Zeeman diagonal. Strain is absent
/// in this frame.
pub fn build_effective_matrix(
    field: &FieldAtNV,
    d_zfs: f64,
    mu: f64,
    omega0: f64,
    hbar: f64,
) -> Result<EffectiveMatrix2> {
    if d_zfs == 0.0 {
        return Err(Error::ProjectionInvalid);
    }
    let ratio = (mu * field.b_perp / d_zfs).abs();
    if ratio > PROJECTION_WARN_RATIO {
        log::warn!("mu B_perp / D = {ratio:.3} exceeds {PROJECTION_WARN_RATIO}; projection is unreliable");
    }
    let second_order = (mu * field.b_perp).powi(2) / (2.0 * d_zfs);
    let offset = d_zfs / 3.0 + second_order;
    let diag = mu * field.b_par - hbar * omega0;
    let coupling = Complex64::from_polar(second_order, -2.0 * field.gamma_az);
    let re = |v: f64| Complex64::new(v, 0.0);
    Ok(EffectiveMatrix2 {
        matrix: [
            [re(diag + offset), coupling],
            [coupling.conj(), re(-diag + offset)],
        ],
        offset,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyForm {
    /// Keeps the second-order transverse terms.
    Full,
    /// Drops B_perp entirely.
    Simplified,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BranchEnergies {
    pub v_plus: f64,
    pub v_minus: f64,
}

impl BranchEnergies {
    pub fn for_spin(&self, s: f64) -> f64 {
        if s > 0.0 {
            self.v_plus
        } else {
            self.v_minus
        }
    }
}

/// Transverse coupling epsilon(B_perp) = E + mu^2 B_perp^2 e^{2 i gamma} / 2D.
pub fn transverse_coupling(field: &FieldAtNV, d_zfs: f64, e_strain: f64, mu: f64) -> Complex64 {
    let second_order = (mu * field.b_perp).powi(2) / (2.0 * d_zfs);
    Complex64::new(e_strain, 0.0) + Complex64::from_polar(second_order, 2.0 * field.gamma_az)
}

pub fn adiabatic_energies(
    field: &FieldAtNV,
    d_zfs: f64,
    e_strain: f64,
    mu: f64,
    form: EnergyForm,
) -> BranchEnergies {
    let zeeman = mu * field.b_par;
    let (split, offset) = match form {
        EnergyForm::Full => {
            let eps = transverse_coupling(field, d_zfs, e_strain, mu);
            (
                zeeman.hypot(eps.norm()),
                d_zfs / 3.0 + (mu * field.b_perp).powi(2) / (2.0 * d_zfs),
            )
        }
        EnergyForm::Simplified => (zeeman.hypot(e_strain), d_zfs / 3.0),
    };
    BranchEnergies {
        v_plus: offset + split,
        v_minus: offset - split,
    }
}

/// omega0 must sit `margin` times below mu B_par / hbar and |D +- mu B_par| / hbar.
pub fn check_adiabaticity(
    omega0: f64,
    b_par: f64,
    d_zfs: f64,
    mu: f64,
    hbar: f64,
    margin: f64,
) -> bool {
    let scaled = omega0.abs() * margin;
    let zeeman = mu * b_par.abs();
    let limits = [zeeman, (d_zfs + zeeman).abs(), (d_zfs - zeeman).abs()];
    limits.iter().all(|&e| scaled < e / hbar)
}

/// Field in the co-moving frame for a rotor held at tilt beta0 and
/// spin angle gamma.
pub fn body_frame_field(bx: f64, by: f64, beta0: f64, gamma: f64) -> (f64, f64, f64) {
    let (sb, cb) = beta0.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let transverse = bx * sb - by * cb;
    (bx * cb + by * sb, transverse * sg, -transverse * cg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::eigh3;
    use crate::params::PhysicalSetup;
    use proptest::prelude::*;

    fn defaults() -> (f64, f64, f64) {
        let s = PhysicalSetup::default();
        (s.nanodiamond.d_zfs, s.mu(), s.constants.hbar)
    }

    #[test]
    fn aligned_field_has_no_transverse_part() {
        let f = project_field(0.14, 0.0, 0.0, 0.3);
        assert_eq!((f.b_par, f.b_perp), (0.14, 0.0));
        let f = project_field(0.0, 1.0, std::f64::consts::FRAC_PI_2, 0.0);
        assert!((f.b_par - 1.0).abs() < 1e-15);
        assert!(f.b_perp < 1e-15);
    }

    #[test]
    fn small_tilt_projection() {
        let f = project_field(0.14, 0.0, 1e-3, 0.0);
        assert!((f.b_par - 0.14 * 1e-3f64.cos()).abs() < 1e-16);
        assert!((f.b_perp - 0.14 * 1e-3f64.sin()).abs() < 1e-19);
        assert!((f.b_perp - 1.4e-4).abs() < 1e-10);
        assert!((f.magnitude() - 0.14).abs() < 1e-15);
    }

    #[test]
    fn negative_transverse_folds_into_azimuth() {
        let f = project_field(0.0, 0.5, 0.2, 0.7);
        let (b2, b3) = f.transverse();
        let signed = -0.5 * 0.2f64.cos();
        assert!((b2 - signed * 0.7f64.sin()).abs() < 1e-15);
        assert!((b3 - signed * 0.7f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_spin_matrix() {
        let (d, mu, _) = defaults();
        let f = FieldAtNV { b_par: 0.1, b_perp: 0.0, gamma_az: 0.4 };
        let m = build_spin_matrix(&f, d, 0.0, mu);
        let expected = [mu * 0.1 + d / 3.0, -d + d / 3.0, -mu * 0.1 + d / 3.0];
        for i in 0..3 {
            assert_eq!(m.0[i][i].re, expected[i]);
            for j in 0..3 {
                if i != j {
                    assert_eq!(m.0[i][j].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn spin_matrix_eigenvalues_against_oracle() {
        let (d, mu, _) = defaults();
        let f = FieldAtNV { b_par: 0.14, b_perp: 1.4e-4, gamma_az: 0.0 };
        let m = build_spin_matrix(&f, d, 0.0, mu);
        let oracle = eigh3(&m.0);
        // Independent route: real characteristic cubic for gamma = 0.
        let a = m.0.map(|row| row.map(|z| z.re));
        let tr = a[0][0] + a[1][1] + a[2][2];
        let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2]
            - a[0][2] * a[2][0]
            + a[1][1] * a[2][2]
            - a[1][2] * a[2][1];
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        for p in oracle {
            let l = p.value;
            let poly = -l * l * l + tr * l * l - minors * l + det;
            let scale = d * d * d;
            assert!(poly.abs() < 1e-12 * scale, "residual {poly:e}");
        }
        let (v, vals) = (m.eigenvalues(), oracle.map(|p| p.value));
        for i in 0..3 {
            assert!((v[i] - vals[i]).abs() <= 1e-12 * vals[i].abs());
        }
    }

    #[test]
    fn effective_matrix_reduces_to_simplified_energies() {
        let (d, mu, hbar) = defaults();
        let f = FieldAtNV { b_par: 0.05, b_perp: 0.0, gamma_az: 0.0 };
        let eff = build_effective_matrix(&f, d, mu, 0.0, hbar).unwrap();
        assert_eq!(eff.matrix[0][0].re, mu * 0.05 + d / 3.0);
        assert_eq!(eff.matrix[1][1].re, -mu * 0.05 + d / 3.0);
        assert_eq!(eff.matrix[0][1].norm(), 0.0);
        let e = adiabatic_energies(&f, d, 0.0, mu, EnergyForm::Simplified);
        assert_eq!(eff.eigenvalues(), [e.v_minus, e.v_plus]);
    }

    #[test]
    fn effective_matrix_rejects_zero_splitting() {
        let f = FieldAtNV { b_par: 0.05, b_perp: 0.01, gamma_az: 0.0 };
        assert!(matches!(
            build_effective_matrix(&f, 0.0, 1.0, 0.0, 1.0),
            Err(Error::ProjectionInvalid)
        ));
    }

    #[test]
    fn zeeman_dominates_rotation_shift() {
        let (d, mu, hbar) = defaults();
        let omega0 = std::f64::consts::TAU * 1e4;
        let f = project_field(0.14, 7e-6, 1e-3, 0.0);
        let eff = build_effective_matrix(&f, d, mu, omega0, hbar).unwrap();
        assert!((mu * f.b_par - 2.60e-24).abs() < 0.01e-24);
        assert!((hbar * omega0 - 6.626e-30).abs() < 0.001e-30);
        assert!(mu * f.b_par / (hbar * omega0) > 1e5);
        assert!((eff.trace() - 2.0 * eff.offset).abs() <= 1e-15 * eff.offset);
    }

    #[test]
    fn effective_eigenvalues_match_closed_form() {
        let (d, mu, hbar) = defaults();
        let f = FieldAtNV { b_par: 0.03, b_perp: 0.02, gamma_az: 0.9 };
        let eff = build_effective_matrix(&f, d, mu, 0.0, hbar).unwrap();
        let e = adiabatic_energies(&f, d, 0.0, mu, EnergyForm::Full);
        let [lo, hi] = eff.eigenvalues();
        assert!((lo - e.v_minus).abs() <= 1e-12 * e.v_minus.abs());
        assert!((hi - e.v_plus).abs() <= 1e-12 * e.v_plus.abs());
    }

    #[test]
    fn adiabaticity() {
        let (d, mu, hbar) = defaults();
        let omega0 = std::f64::consts::TAU * 1e4;
        assert!((mu * 0.14 / hbar - 2.46e10).abs() < 0.01e10);
        assert!(check_adiabaticity(omega0, 0.14, d, mu, hbar, 100.0));
        assert!(!check_adiabaticity(mu * 0.14 / hbar, 0.14, d, mu, hbar, 1.0001));
        assert!(!check_adiabaticity(omega0, 0.0, d, mu, hbar, 100.0));
    }

    #[test]
    fn body_frame_at_zero_tilt() {
        let (b1, b2, b3) = body_frame_field(0.1, 0.2, 0.0, 0.7);
        assert_eq!(b1, 0.1);
        assert!((b2 + 0.2 * 0.7f64.sin()).abs() < 1e-16);
        assert!((b3 - 0.2 * 0.7f64.cos()).abs() < 1e-16);
        let (_, b2, b3) = body_frame_field(0.1, 0.2, 0.3, 0.0);
        assert_eq!(b2, 0.0);
        assert!((b3 - (-0.1 * 0.3f64.sin() + 0.2 * 0.3f64.cos())).abs() < 1e-16);
    }

    #[test]
    fn nv_site_correction_defaults_to_com_field() {
        assert_eq!(nv_site_field(0.14, -7000.0, 0.0, 0.3, 1e-3), 0.14);
        let b = nv_site_field(0.14, -7000.0, 10e-9, 0.0, 0.0);
        assert!((b - (0.14 - 7e-5)).abs() < 1e-15);
    }

    #[test]
    fn matrices_serialize_row_major() {
        let (d, mu, hbar) = defaults();
        let f = FieldAtNV { b_par: 0.01, b_perp: 0.002, gamma_az: 0.5 };
        let json = serde_json::to_value(build_spin_matrix(&f, d, 0.0, mu)).unwrap();
        assert_eq!(json["entries"].as_array().unwrap().len(), 9);
        let eff = build_effective_matrix(&f, d, mu, 1.0, hbar).unwrap();
        let json = serde_json::to_value(eff).unwrap();
        assert_eq!(json["entries"].as_array().unwrap().len(), 4);
        assert_eq!(json["entries"][1][1], eff.matrix[0][1].im);
    }

    proptest! {
        #[test]
        fn projection_preserves_magnitude(bx in -1.0f64..1.0, by in -1.0f64..1.0,
                                          beta in 0.0f64..3.14, gamma in -6.0f64..6.0) {
            let f = project_field(bx, by, beta, gamma);
            let lab = bx.hypot(by);
            prop_assert!(f.b_perp >= 0.0);
            prop_assert!((f.magnitude() - lab).abs() <= 1e-14 * lab.max(1e-300));
        }

        #[test]
        fn body_frame_preserves_norm(bx in -1.0f64..1.0, by in -1.0f64..1.0,
                                     beta in -3.2f64..3.2, gamma in -7.0f64..7.0) {
            let (b1, b2, b3) = body_frame_field(bx, by, beta, gamma);
            let lab = bx * bx + by * by;
            prop_assert!((b1 * b1 + b2 * b2 + b3 * b3 - lab).abs() <= 1e-13 * lab.max(1e-300));
        }

        #[test]
        fn spin_matrix_is_hermitian(bp in -0.2f64..0.2, bt in 0.0f64..0.2,
                                    g in -7.0f64..7.0, e in 0.0f64..1e-26) {
            let (d, mu, hbar) = defaults();
            let f = FieldAtNV { b_par: bp, b_perp: bt, gamma_az: g };
            prop_assert!(build_spin_matrix(&f, d, e, mu).is_hermitian());
            prop_assert!(build_effective_matrix(&f, d, mu, 1e4, hbar).unwrap().is_hermitian());
        }

        #[test]
        fn branch_splitting_identity(bp in -0.1f64..0.1, bt in 0.0f64..0.1,
                                     g in -7.0f64..7.0, e in 0.0f64..1e-26) {
            let (d, mu, _) = defaults();
            let f = FieldAtNV { b_par: bp, b_perp: bt, gamma_az: g };
            let v = adiabatic_energies(&f, d, e, mu, EnergyForm::Full);
            let eps = transverse_coupling(&f, d, e, mu);
            let expected = 2.0 * ((mu * bp).powi(2) + eps.norm_sqr()).sqrt();
            prop_assert!(v.v_plus >= v.v_minus);
            prop_assert!(((v.v_plus - v.v_minus) - expected).abs() <= 1e-12 * expected.max(1e-40));
            let offset = d / 3.0 + (mu * bt).powi(2) / (2.0 * d);
            prop_assert!((v.v_plus + v.v_minus - 2.0 * offset).abs() <= 1e-12 * offset);
        }

        #[test]
        fn energies_parity(bp in -0.1f64..0.1, bt in 0.0f64..0.1, g in -7.0f64..7.0) {
            let (d, mu, _) = defaults();
            let f = FieldAtNV { b_par: bp, b_perp: bt, gamma_az: g };
            let flipped = FieldAtNV { b_par: -bp, ..f };
            let perp_flipped = FieldAtNV { gamma_az: g + 1.0, ..f };
            let v = adiabatic_energies(&f, d, 0.0, mu, EnergyForm::Full);
            let w = adiabatic_energies(&flipped, d, 0.0, mu, EnergyForm::Full);
            let offset = d / 3.0 + (mu * bt).powi(2) / (2.0 * d);
            let tol = 1e-12 * d;
            prop_assert!((w.v_plus - (-v.v_minus + 2.0 * offset)).abs() <= tol);
            prop_assert!((w.v_minus - (-v.v_plus + 2.0 * offset)).abs() <= tol);
            // E = 0: energies depend on B_perp only through its magnitude.
            let u = adiabatic_energies(&perp_flipped, d, 0.0, mu, EnergyForm::Full);
            prop_assert!((u.v_plus - v.v_plus).abs() <= tol);
        }
    }
}
