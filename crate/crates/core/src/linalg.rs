//! Small dense linear-algebra helpers shared by the backends.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Maximum absolute entry of a complex matrix.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Maximum absolute entrywise difference between two complex matrices.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Deviation of `m` from unitarity: max entry of |m†m − I|.
pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let d = m.nrows();
    let gram = m.adjoint() * m;
    let mut dev = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            dev = dev.max((gram[(i, j)] - target).norm());
        }
    }
    dev
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by Padé(13) approximation with scaling and squaring.
///
/// Accurate for the bounded anti-Hermitian generators used here; the caller
/// is expected to verify unitarity of the result where it matters.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    const THETA_13: f64 = 5.371_920_351_148_152;
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];

    let d = a.nrows();
    assert_eq!(d, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / Complex64::new(2.0_f64.powi(squarings as i32), 0.0);

    let c = |v: f64| Complex64::new(v, 0.0);
    let eye = DMatrix::<Complex64>::identity(d, d);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (&a6 * c(B[13]) + &a4 * c(B[11]) + &a2 * c(B[9]))
        + &a6 * c(B[7])
        + &a4 * c(B[5])
        + &a2 * c(B[3])
        + &eye * c(B[1]);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * c(B[12]) + &a4 * c(B[10]) + &a2 * c(B[8]))
        + &a6 * c(B[6])
        + &a4 * c(B[4])
        + &a2 * c(B[2])
        + &eye * c(B[0]);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let lu = lhs.lu();
    let mut result = lu.solve(&rhs).expect("Padé denominator is singular");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Eigenvalues of a complex Hermitian matrix, via the real symmetric
/// embedding [[Re, −Im], [Im, Re]]. Each eigenvalue appears twice in the
/// returned (ascending) vector.
pub fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let d = h.nrows();
    let mut e = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            e[(i, j)] = z.re;
            e[(i + d, j + d)] = z.re;
            e[(i, j + d)] = -z.im;
            e[(i + d, j)] = z.im;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(e);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Multiply a complex matrix by a real vector of Hermite-function values.
pub fn quadratic_form(rho: &DMatrix<Complex64>, h: &DVector<f64>) -> f64 {
    let d = rho.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += rho[(i, j)] * h[i] * h[j];
        }
    }
    acc.re
}
