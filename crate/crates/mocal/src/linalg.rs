//! Dense symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Only used for the Gaussian-Fréchet distance, where matrices are small
//! (feature dimension squared), so the O(n^3)-per-sweep cost is irrelevant.

use ndarray::Array2;

/// Eigendecomposition of a symmetric matrix: returns `(eigenvalues, V)` with
/// `a = V diag(eigenvalues) V^T` and eigenvectors in the columns of `V`.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.shape()[0];
    assert_eq!(n, a.shape()[1], "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::eye(n);

    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += m[[p, q]] * m[[p, q]];
                }
            }
        }
        s
    };

    // `off` is a squared norm: bound it by the square of the entry tolerance.
    let scale = 1.0 + m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (1e-14 * scale) * (1e-14 * scale);
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues = (0..n).map(|i| m[[i, i]]).collect();
    (eigenvalues, v)
}

/// Symmetric positive-semidefinite square root: eigenvalues clamped at zero
/// before the root.
pub fn psd_sqrt(a: &Array2<f64>) -> Array2<f64> {
    let n = a.shape()[0];
    let (vals, v) = symmetric_eigen(a);
    let mut out = Array2::zeros((n, n));
    for (k, lam) in vals.iter().enumerate() {
        let r = lam.max(0.0).sqrt();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += r * v[[i, k]] * v[[j, k]];
            }
        }
    }
    out
}
