//! Small deterministic generators for unit tests, independent of the `ensembles` module.

use alloc::vec::Vec;
use num_traits::Float;

use crate::matcore::{ComplexMatrix, HermitianOperator, UnitaryMatrix};
use crate::C64;

pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed ^ 0x9E37_79B9_7F4A_7C15)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
    }

    pub fn cnormal(&mut self) -> C64 {
        C64::new(self.normal(), self.normal())
    }
}

pub fn rand_matrix(g: &mut Lcg, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| g.cnormal())
}

pub fn rand_hermitian(g: &mut Lcg, n: usize) -> HermitianOperator {
    HermitianOperator::hermitize(&rand_matrix(g, n))
}

/// Modified Gram-Schmidt on the columns of a Gaussian matrix.
pub fn rand_unitary(g: &mut Lcg, n: usize) -> UnitaryMatrix {
    let a = rand_matrix(g, n);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.column(j)).collect();
    for j in 0..n {
        for k in 0..j {
            let (head, tail) = cols.split_at_mut(j);
            let p: C64 = head[k].iter().zip(tail[0].iter()).map(|(x, y)| x.conj() * y).sum();
            for (y, x) in tail[0].iter_mut().zip(head[k].iter()) {
                *y -= p * x;
            }
        }
        let nrm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for y in cols[j].iter_mut() {
            *y /= nrm;
        }
    }
    UnitaryMatrix::new(ComplexMatrix::from_fn(n, |i, j| cols[j][i])).unwrap()
}

pub fn rand_state_vec(g: &mut Lcg, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| g.cnormal()).collect();
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / nrm).collect()
}
