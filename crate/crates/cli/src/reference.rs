//! Published headline numbers and the tolerance each is checked to.

use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug)]
pub enum Tolerance {
    Relative(f64),
    Absolute(f64),
    /// One unit in the given significant figure.
    SigFigs(u32),
}

impl Tolerance {
    pub fn accepts(self, computed: f64, reference: f64) -> bool {
        let diff = (computed - reference).abs();
        match self {
            Tolerance::Relative(r) => diff <= r * reference.abs(),
            Tolerance::Absolute(a) => diff <= a,
            Tolerance::SigFigs(n) => {
                let unit = 10f64.powf(reference.abs().log10().floor() - (n as f64 - 1.0));
                diff <= unit
            }
        }
    }

    pub fn describe(self) -> String {
        match self {
            Tolerance::Relative(r) => format!("{}%", r * 100.0),
            Tolerance::Absolute(a) => format!("+-{a}"),
            Tolerance::SigFigs(n) => format!("{n} s.f."),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Reference {
    pub quantity: &'static str,
    pub value: f64,
    pub tolerance: Tolerance,
}

pub const DELTA_R_MAX: Reference = Reference {
    quantity: "delta_r_max (m), m = 1e-17 kg",
    value: 0.215e-6,
    tolerance: Tolerance::Relative(0.02),
};

pub const T_CLOSE: Reference = Reference {
    quantity: "t_close (s)",
    value: 0.01275,
    tolerance: Tolerance::Relative(0.005),
};

/// |delta alpha| = |delta gamma| at recombination, omega0 = 2 pi x 10 kHz.
pub const DELTA_ALPHA: [(f64, Reference); 3] = [
    (
        1e-16,
        Reference {
            quantity: "|delta_alpha| (rad), m = 1e-16 kg",
            value: 0.00168,
            tolerance: Tolerance::Relative(0.1),
        },
    ),
    (
        1e-17,
        Reference {
            quantity: "|delta_alpha| (rad), m = 1e-17 kg",
            value: 0.09058,
            tolerance: Tolerance::Relative(0.1),
        },
    ),
    (
        5e-18,
        Reference {
            quantity: "|delta_alpha| (rad), m = 5e-18 kg",
            value: 0.22073,
            tolerance: Tolerance::Relative(0.1),
        },
    ),
];

/// Zero-point spreads for m = 1e-17 kg at omega = sqrt(12.08) rad/s.
pub const Y0: [(f64, Reference); 3] = [
    (
        0.0,
        Reference {
            quantity: "y0 (m), n = 0",
            value: 1.23e-9,
            tolerance: Tolerance::SigFigs(3),
        },
    ),
    (
        10.0,
        Reference {
            quantity: "y0 (m), n = 10",
            value: 5.64e-9,
            tolerance: Tolerance::SigFigs(3),
        },
    ),
    (
        100.0,
        Reference {
            quantity: "y0 (m), n = 100",
            value: 1.74e-8,
            tolerance: Tolerance::SigFigs(3),
        },
    ),
];

pub const CONTRAST_HEAVY: (f64, Reference) = (
    1e-16,
    Reference {
        quantity: "contrast, m = 1e-16 kg",
        value: 0.996,
        tolerance: Tolerance::Absolute(0.004),
    },
);

pub const DASHED_OMEGA0: f64 = TAU * 1e4;

pub fn same_mass(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}
