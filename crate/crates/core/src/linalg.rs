//! Fixed-size dense helpers for 2x2 and 4x4 complex matrices.

use num_complex::Complex64;
#[allow(unused_imports)] // std provides inherent float methods when it is linked
use num_traits::Float;

pub type Matrix2 = [[Complex64; 2]; 2];
pub type Matrix4 = [[Complex64; 4]; 4];

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn outer2(v: &[Complex64; 2]) -> Matrix2 {
    let mut m = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = v[i] * v[j].conj();
        }
    }
    m
}

pub fn kron2(a: &Matrix2, b: &Matrix2) -> Matrix4 {
    let mut m = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    m
}

pub fn mul4(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    let mut m = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = ZERO;
            for k in 0..4 {
                acc += a[i][k] * b[k][j];
            }
            m[i][j] = acc;
        }
    }
    m
}

pub fn trace4(a: &Matrix4) -> Complex64 {
    (0..4).map(|i| a[i][i]).sum()
}

pub fn identity4() -> Matrix4 {
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Quadratic form `<v|m|v>` for a 4-vector.
pub fn expectation4(m: &Matrix4, v: &[Complex64; 4]) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..4 {
        let mut row = ZERO;
        for j in 0..4 {
            row += m[i][j] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc
}

/// Quadratic form `<v|m|v>` for a 2-vector.
pub fn expectation2(m: &Matrix2, v: &[Complex64; 2]) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..2 {
        acc += v[i].conj() * (m[i][0] * v[0] + m[i][1] * v[1]);
    }
    acc
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// returned in ascending order. Only the upper triangle is assumed symmetric;
/// the input is symmetrized first.
pub fn symmetric_eigenvalues<const N: usize>(input: &[[f64; N]; N]) -> [f64; N] {
    let mut a = *input;
    for i in 0..N {
        for j in (i + 1)..N {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| ((i + 1)..N).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..N).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
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
            }
        }
    }
    let mut eig = [0.0; N];
    for (i, e) in eig.iter_mut().enumerate() {
        *e = a[i][i];
    }
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

/// Eigenvalues of a 4x4 Hermitian matrix, ascending.
///
/// `H = A + iB` is embedded as the real symmetric `[[A, -B], [B, A]]`, whose
/// spectrum is that of `H` with every eigenvalue doubled.
pub fn hermitian_eigenvalues4(h: &Matrix4) -> [f64; 4] {
    let mut big = [[0.0; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            let re = h[i][j].re;
            let im = h[i][j].im;
            big[i][j] = re;
            big[i + 4][j + 4] = re;
            big[i][j + 4] = -im;
            big[i + 4][j] = im;
        }
    }
    let all = symmetric_eigenvalues(&big);
    [all[0], all[2], all[4], all[6]]
}
