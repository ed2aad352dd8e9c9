//! Dense Hermitian eigenvalues via cyclic Jacobi rotations.
//!
//! Written for oracle duty at <= 10 qubits: correctness and zero
//! dependencies over speed.

use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix given in row-major order.
/// The input is consumed; eigenvalues are returned sorted ascending.
pub fn hermitian_eigenvalues(mut a: Vec<Complex64>, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    if n == 1 {
        return vec![a[0].re];
    }
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-14 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off.sqrt() < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let b = apq.norm();
                if b < tol * 1e-2 {
                    continue;
                }
                let phase = apq / b; // e^{i alpha}
                let bpp = a[p * n + p].re;
                let bqq = a[q * n + q].re;
                let theta = 0.5 * (2.0 * b).atan2(bqq - bpp);
                let (s, c) = theta.sin_cos();
                let sp = phase * s; // s * e^{i alpha}
                // columns: col_p <- c col_p - conj(sp) col_q ; col_q <- sp col_p + c col_q
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sp.conj() * akq;
                    a[k * n + q] = sp * akp + c * akq;
                }
                // rows: row_p <- c row_p - sp row_q ; row_q <- conj(sp) row_p + c row_q
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sp * aqk;
                    a[q * n + k] = sp.conj() * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_x_spectrum() {
        let a = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let e = hermitian_eigenvalues(a, 2);
        assert!((e[0] + 1.0).abs() < 1e-12);
        assert!((e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_y_spectrum() {
        let a = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ];
        let e = hermitian_eigenvalues(a, 2);
        assert!((e[0] + 1.0).abs() < 1e-12);
        assert!((e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_3x3() {
        // diag(1,2,3) conjugated by a permutation stays {1,2,3}
        let z = Complex64::new(0.0, 0.0);
        let a = vec![
            Complex64::new(2.0, 0.0), z, z,
            z, Complex64::new(3.0, 0.0), z,
            z, z, Complex64::new(1.0, 0.0),
        ];
        let e = hermitian_eigenvalues(a, 3);
        assert_eq!(e, vec![1.0, 2.0, 3.0]);
    }
}
