use num_traits::{Float, Zero};

use super::ComplexMatrix;
use crate::{Error, Result, C64};

const MAX_ITER_PER_EIG: usize = 60;

/// Complex Schur form A = Q T Q† (Householder Hessenberg reduction followed by shifted QR
/// with Givens rotations). For normal input T is diagonal up to roundoff, so the columns
/// of Q are eigenvectors. Returns (T, Q).
pub fn schur_normal(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = a.dim();
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut t = a.clone();
    let mut q = ComplexMatrix::identity(n);
    if n <= 1 {
        return Ok((t, q));
    }
    hessenberg(&mut t, &mut q);

    let scale = t.max_abs().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        // locate the start of the unreduced block ending at `hi`
        let mut l = hi;
        while l > 0 {
            let sub = t[(l, l - 1)].norm();
            let d = t[(l - 1, l - 1)].norm() + t[(l, l)].norm();
            let d = if d == 0.0 { scale } else { d };
            if sub <= f64::EPSILON * d {
                t[(l, l - 1)] = C64::zero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if iter > MAX_ITER_PER_EIG || total > MAX_ITER_PER_EIG * n * 4 {
            return Err(Error::NoConvergence("complex Schur QR"));
        }
        let mu = if iter % 11 == 10 {
            // exceptional shift
            let s = t[(hi, hi - 1)].norm() + if hi >= 2 { t[(hi - 1, hi - 2)].norm() } else { 0.0 };
            t[(hi, hi)] + C64::new(0.75 * s, 0.4375 * s)
        } else {
            wilkinson(&t, hi)
        };
        qr_step(&mut t, &mut q, l, hi, mu);
    }
    Ok((t, q))
}

fn wilkinson(t: &ComplexMatrix, hi: usize) -> C64 {
    let a = t[(hi - 1, hi - 1)];
    let b = t[(hi - 1, hi)];
    let c = t[(hi, hi - 1)];
    let d = t[(hi, hi)];
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5) * ((a - d) * 0.5) + b * c;
    let r = disc.sqrt();
    let e1 = half_tr + r;
    let e2 = half_tr - r;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

fn hessenberg(t: &mut ComplexMatrix, q: &mut ComplexMatrix) {
    let n = t.dim();
    for k in 0..n.saturating_sub(2) {
        let mut v: alloc::vec::Vec<C64> = (k + 1..n).map(|i| t[(i, k)]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        // v = x + e^{i arg x0} ‖x‖ e1
        v[0] = x0 + phase * xnorm;
        let vnorm2 = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // left: T[k+1.., :] -= beta v (v† T[k+1.., :])
        for j in 0..n {
            let mut s = C64::zero();
            for (i, vi) in v.iter().enumerate() {
                s += vi.conj() * t[(k + 1 + i, j)];
            }
            s *= beta;
            for (i, vi) in v.iter().enumerate() {
                t[(k + 1 + i, j)] -= vi * s;
            }
        }
        // right: T[:, k+1..] -= beta (T[:, k+1..] v) v†, and the same on Q
        for mat in [&mut *t, &mut *q] {
            for i in 0..n {
                let mut s = C64::zero();
                for (j, vj) in v.iter().enumerate() {
                    s += mat[(i, k + 1 + j)] * vj;
                }
                s *= beta;
                for (j, vj) in v.iter().enumerate() {
                    mat[(i, k + 1 + j)] -= s * vj.conj();
                }
            }
        }
        for i in k + 2..n {
            t[(i, k)] = C64::zero();
        }
    }
}

/// Givens rotation (c real, s complex) with G† [a; b] = [r; 0], G = [[c, -s̄], [s, c]].
fn givens(a: C64, b: C64) -> (f64, C64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C64::zero());
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let r = an.hypot(bn);
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s.conj())
}

fn qr_step(t: &mut ComplexMatrix, q: &mut ComplexMatrix, l: usize, hi: usize, mu: C64) {
    let n = t.dim();
    for i in l..=hi {
        t[(i, i)] -= mu;
    }
    let mut rots: alloc::vec::Vec<(f64, C64)> = alloc::vec::Vec::with_capacity(hi - l);
    for k in l..hi {
        let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
        rots.push((c, s));
        // rows k, k+1 ← G† rows
        for j in k..n {
            let x = t[(k, j)];
            let y = t[(k + 1, j)];
            t[(k, j)] = x * c + s.conj() * y;
            t[(k + 1, j)] = -s * x + y * c;
        }
        t[(k + 1, k)] = C64::zero();
    }
    for (off, &(c, s)) in rots.iter().enumerate() {
        let k = l + off;
        let top = (k + 1).min(hi);
        for i in 0..=top {
            let x = t[(i, k)];
            let y = t[(i, k + 1)];
            t[(i, k)] = x * c + y * s;
            t[(i, k + 1)] = -x * s.conj() + y * c;
        }
        for i in 0..n {
            let x = q[(i, k)];
            let y = q[(i, k + 1)];
            q[(i, k)] = x * c + y * s;
            q[(i, k + 1)] = -x * s.conj() + y * c;
        }
    }
    for i in l..=hi {
        t[(i, i)] += mu;
    }
}
