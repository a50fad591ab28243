use alloc::vec::Vec;

use num_traits::{Float, Zero};

use super::ComplexMatrix;
use crate::{Error, Result, C64};

const MAX_SWEEPS: usize = 64;

/// Cyclic complex Jacobi. Returns eigenvalues ascending and the eigenvector matrix
/// (columns). The input is read through its Hermitian part.
pub fn eig_hermitian_raw(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = a.dim();
    let mut m = a.hermitized();
    let mut v = ComplexMatrix::identity(n);
    if n == 0 {
        return Ok((Vec::new(), v));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let scale = m.hs_norm();
    if scale == 0.0 {
        return Ok((alloc::vec![0.0; n], v));
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = off_diag_sq(&m);
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q, scale);
            }
        }
    }
    if !converged && off_diag_sq(&m).sqrt() > 1e-12 * scale {
        return Err(Error::NoConvergence("Hermitian Jacobi eigensolver"));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    idx.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap().then(i.cmp(&j)));
    let vals = idx.iter().map(|&i| diag[i]).collect();
    let vecs = ComplexMatrix::from_fn(n, |r, c| v[(r, idx[c])]);
    Ok((vals, vecs))
}

fn off_diag_sq(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s
}

fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, scale: f64) {
    let n = m.dim();
    let b = m[(p, q)];
    let babs = b.norm();
    if babs <= 1e-300 || babs <= f64::EPSILON * 1e-3 * scale {
        m[(p, q)] = C64::zero();
        m[(q, p)] = C64::zero();
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    // phase e^{-iα} with b = |b| e^{iα}
    let ph = (b / babs).conj();
    let theta = (aqq - app) / (2.0 * babs);
    let t = if theta.is_infinite() {
        0.0
    } else {
        let s = if theta >= 0.0 { 1.0 } else { -1.0 };
        s / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // W = diag(1, e^{-iα}) · [[c, s], [-s, c]]
    let w00 = C64::new(c, 0.0);
    let w01 = C64::new(s, 0.0);
    let w10 = ph * (-s);
    let w11 = ph * c;

    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * w00 + akq * w10;
        m[(k, q)] = akp * w01 + akq * w11;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = w00.conj() * apk + w10.conj() * aqk;
        m[(q, k)] = w01.conj() * apk + w11.conj() * aqk;
    }
    m[(p, q)] = C64::zero();
    m[(q, p)] = C64::zero();
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * w00 + vkq * w10;
        v[(k, q)] = vkp * w01 + vkq * w11;
    }
}
