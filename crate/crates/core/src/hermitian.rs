//! Brute-force diagonalization of small complex Hermitian matrices.
//!
//! A Hermitian `A + iB` is embedded as the real symmetric block matrix
//! `[[A, -B], [B, A]]`, which carries every eigenvalue twice. Cyclic Jacobi
//! rotations on that block converge unconditionally, so this serves as an
//! oracle that shares no algebra with the closed-form projected energies.

use num_complex::Complex64;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi.
/// Returns eigenvalues and column eigenvectors, unsorted.
pub fn jacobi_symmetric<const N: usize>(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|p| ((p + 1)..N).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        let scale: f64 = (0..N).map(|p| a[p][p] * a[p][p]).sum::<f64>() + off;
        if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut w = [0.0; N];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = a[i][i];
    }
    (w, v)
}

/// Eigenpair of a 3x3 Hermitian matrix.
#[derive(Clone, Copy, Debug)]
pub struct Eigenpair3 {
    pub value: f64,
    pub vector: [Complex64; 3],
}

/// Ascending eigenpairs of a 3x3 complex Hermitian matrix.
pub fn eigh3(m: &[[Complex64; 3]; 3]) -> [Eigenpair3; 3] {
    let mut real = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            let (re, im) = (m[i][j].re, m[i][j].im);
            real[i][j] = re;
            real[i + 3][j + 3] = re;
            real[i][j + 3] = -im;
            real[i + 3][j] = im;
        }
    }
    let (w, v) = jacobi_symmetric(real);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]));

    // Each eigenvalue appears twice; keep one representative per pair.
    let mut out = [Eigenpair3 {
        value: 0.0,
        vector: [Complex64::new(0.0, 0.0); 3],
    }; 3];
    for (slot, pair) in out.iter_mut().zip(order.chunks(2)) {
        let k = pair[0];
        let value = 0.5 * (w[pair[0]] + w[pair[1]]);
        let mut vector = [Complex64::new(0.0, 0.0); 3];
        for (i, c) in vector.iter_mut().enumerate() {
            *c = Complex64::new(v[i][k], v[i + 3][k]);
        }
        *slot = Eigenpair3 { value, vector };
    }
    out
}
