//! Dense complex square matrices and the handful of spectral routines the rest
//! of the crate is built on.

mod eig;
mod schur;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{Float, Zero};

use crate::error::{domain, shape};
use crate::{Error, Result, C64};

pub use eig::eig_hermitian_raw;
pub use schur::schur_normal;

/// Default relative tolerance for the Hermiticity check.
pub const HERM_TOL: f64 = 1e-10;
/// Default tolerance for the unitarity check (scaled by √dim).
pub const UNIT_TOL: f64 = 1e-10;
/// Default tolerance for negative eigenvalues of PSD inputs.
pub const PSD_TOL: f64 = 1e-10;
/// Distance from −π below which an eigenphase is flagged as branch-ambiguous.
pub const BRANCH_GAP: f64 = 1e-8;

const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries; fails on non-square length or non-finite values.
    pub fn from_vec(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(shape(alloc::format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = C64::new(x, 0.0);
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    /// |a⟩⟨b|
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |i, j| a[i] * b[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dagger(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// (A + A†)/2
    pub fn hermitized(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5)
    }

    /// [A, B] = AB − BA
    pub fn commutator(&self, b: &Self) -> Self {
        &(self * b) - &(b * self)
    }

    /// tr[A B] without forming the product.
    pub fn trace_product(&self, b: &Self) -> C64 {
        assert_eq!(self.n, b.n);
        let n = self.n;
        let mut acc = C64::zero();
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * b.data[k * n + i];
            }
        }
        acc
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n);
        let n = self.n;
        (0..n).map(|i| (0..n).map(|k| self.data[i * n + k] * v[k]).sum()).collect()
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖A − A†‖_HS / ‖A‖_HS (0 for the zero matrix).
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n;
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                num += (self.data[i * n + j] - self.data[j * n + i].conj()).norm_sqr();
            }
        }
        let den = self.hs_norm();
        if den == 0.0 {
            0.0
        } else {
            num.sqrt() / den
        }
    }

    /// ‖A†A − 𝟙‖_HS
    pub fn unitarity_defect(&self) -> f64 {
        (&(&self.dagger() * self) - &Self::identity(self.n)).hs_norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol * (self.n as f64).sqrt()
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.is_hermitian(1e-13) {
            let (vals, _) = eig_hermitian_raw(&self.hermitized()).expect("Jacobi on Hermitian input");
            let mut s: Vec<f64> = vals.iter().map(|x| x.abs()).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            return s;
        }
        let ata = (&self.dagger() * self).hermitized();
        let (vals, _) = eig_hermitian_raw(&ata).expect("Jacobi on Gram matrix");
        let mut s: Vec<f64> = vals.iter().map(|x| x.max(0.0).sqrt()).collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }

    /// (Hilbert-Schmidt, operator, trace) norms.
    pub fn norms(&self) -> Norms {
        let s = self.singular_values();
        Norms { hs: self.hs_norm(), op: s.first().copied().unwrap_or(0.0), trace_norm: s.iter().sum() }
    }

    pub fn op_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }
}

/// The three norms reported by [`norms`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub hs: f64,
    pub op: f64,
    pub trace_norm: f64,
}

pub fn norms(a: &ComplexMatrix) -> Norms {
    a.norms()
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, b: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, b.n, "dimension mismatch in product");
        let n = self.n;
        let mut out = vec![C64::zero(); n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &b.data[k * n..(k + 1) * n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
        ComplexMatrix { n, data: out }
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, b: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, b.n, "dimension mismatch in sum");
        ComplexMatrix { n: self.n, data: self.data.iter().zip(&b.data).map(|(x, y)| x + y).collect() }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, b: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, b.n, "dimension mismatch in difference");
        ComplexMatrix { n: self.n, data: self.data.iter().zip(&b.data).map(|(x, y)| x - y).collect() }
    }
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (na, nb) = (a.n, b.n);
    let n = na * nb;
    ComplexMatrix::from_fn(n, |i, j| a[(i / nb, j / nb)] * b[(i % nb, j % nb)])
}

/// ⊗ of a list of factors, left to right.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f);
    }
    acc
}

/// N-fold tensor power.
pub fn kron_power(a: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let mut acc = ComplexMatrix::identity(1);
    for _ in 0..n {
        acc = kron(&acc, a);
    }
    acc
}

/// Traces out every subsystem not listed in `keep`. Subsystems are ordered as in `dims`
/// (first factor most significant); the kept factors stay in their original order.
pub fn partial_trace(a: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if total != a.n {
        return Err(shape(alloc::format!("dims {dims:?} do not multiply to {}", a.n)));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(shape("kept subsystem index out of range"));
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep_sorted.contains(i)).collect();
    let kd: Vec<usize> = keep_sorted.iter().map(|&i| dims[i]).collect();
    let td: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let nk: usize = kd.iter().product();
    let nt: usize = td.iter().product();

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let compose = |kidx: usize, tidx: usize| -> usize {
        let mut idx = 0;
        let mut r = kidx;
        for (pos, &s) in keep_sorted.iter().enumerate().rev() {
            idx += (r % kd[pos]) * strides[s];
            r /= kd[pos];
        }
        let mut r = tidx;
        for (pos, &s) in traced.iter().enumerate().rev() {
            idx += (r % td[pos]) * strides[s];
            r /= td[pos];
        }
        idx
    };

    let mut out = ComplexMatrix::zeros(nk);
    for i in 0..nk {
        for j in 0..nk {
            let mut acc = C64::zero();
            for t in 0..nt {
                acc += a[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Hermitian operator, stored as a Hermitized matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity within [`HERM_TOL`] and stores the Hermitized matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tol(m, HERM_TOL)
    }

    pub fn with_tol(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = m.hermiticity_defect();
        if defect > tol {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { matrix: m.hermitized() })
    }

    /// Projects onto the Hermitian part without checking.
    pub fn hermitize(m: &ComplexMatrix) -> Self {
        Self { matrix: m.hermitized() }
    }

    pub fn zeros(n: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(n) }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        Self { matrix: ComplexMatrix::from_real_diag(d) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale_re(s) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { matrix: &self.matrix + &o.matrix }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { matrix: &self.matrix - &o.matrix }
    }

    /// tr[A B] for Hermitian A, B (real).
    pub fn trace_with(&self, b: &ComplexMatrix) -> f64 {
        self.matrix.trace_product(b).re
    }

    /// U A U†
    pub fn conjugate_by(&self, u: &UnitaryMatrix) -> Self {
        Self::hermitize(&(&(&u.matrix * &self.matrix) * &u.matrix.dagger()))
    }

    pub fn eig(&self) -> Result<(Vec<f64>, UnitaryMatrix)> {
        eig_hermitian(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eig_hermitian(self)?.0)
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.hs_norm()
    }

    pub fn op_norm(&self) -> f64 {
        self.matrix.op_norm()
    }
}

/// Unitary matrix; the check is done at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    matrix: ComplexMatrix,
}

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tol(m, UNIT_TOL)
    }

    pub fn with_tol(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let defect = m.unitarity_defect();
        if defect > tol * (m.n as f64).sqrt() {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { matrix: m })
    }

    /// Wraps a matrix known to be unitary by construction.
    pub(crate) fn trusted(m: ComplexMatrix) -> Self {
        Self { matrix: m }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self { matrix: self.matrix.dagger() }
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self { matrix: &self.matrix * &o.matrix }
    }

    /// Eigenvalues (unit-modulus) and eigenvectors of the unitary, via a complex Schur form.
    pub fn eig(&self) -> Result<(Vec<C64>, UnitaryMatrix)> {
        let (t, q) = schur_normal(&self.matrix)?;
        Ok((t.diagonal(), UnitaryMatrix::trusted(q)))
    }
}

/// A = V diag(λ) V† with λ ascending.
pub fn eig_hermitian(a: &HermitianOperator) -> Result<(Vec<f64>, UnitaryMatrix)> {
    let (vals, vecs) = eig_hermitian_raw(&a.matrix)?;
    Ok((vals, UnitaryMatrix::trusted(vecs)))
}

/// V diag(f(λ)) V†
pub fn spectral_apply(vals: &[f64], vecs: &ComplexMatrix, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let n = vals.len();
    let fv: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::zero();
            for k in 0..n {
                acc += vecs[(i, k)] * fv[k] * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn spectral_apply_complex(vals: &[C64], vecs: &ComplexMatrix, f: impl Fn(C64) -> C64) -> ComplexMatrix {
    let n = vals.len();
    let fv: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::zero();
            for k in 0..n {
                acc += vecs[(i, k)] * fv[k] * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Result of [`matrix_log_unitary`].
#[derive(Clone, Debug)]
pub struct UnitaryLog {
    pub h: HermitianOperator,
    /// Set when some eigenphase lies within [`BRANCH_GAP`] of −π, where the principal
    /// branch flips between ±π.
    pub branch_ambiguous: bool,
    /// Eigenphases of U in (−π, π], in the order of the Schur decomposition.
    pub phases: Vec<f64>,
}

/// H = i log U on the principal branch: eigenphases θ ∈ (−π, π] of U give eigenvalues −θ of H,
/// so that exp(−iH) = U.
pub fn matrix_log_unitary(u: &UnitaryMatrix) -> Result<UnitaryLog> {
    let (vals, vecs) = u.eig()?;
    let phases: Vec<f64> = vals.iter().map(|z| principal_arg(*z)).collect();
    let branch_ambiguous = phases.iter().any(|&t| t + core::f64::consts::PI <= BRANCH_GAP);
    let lookup: Vec<C64> = phases.iter().map(|&t| C64::new(t, 0.0)).collect();
    let h = spectral_apply_complex(&lookup, vecs.matrix(), |t| C64::new(-t.re, 0.0));
    Ok(UnitaryLog { h: HermitianOperator::hermitize(&h), branch_ambiguous, phases })
}

/// arg z in (−π, π].
pub fn principal_arg(z: C64) -> f64 {
    let t = z.im.atan2(z.re);
    if t <= -core::f64::consts::PI {
        t + 2.0 * core::f64::consts::PI
    } else {
        t
    }
}

/// U = exp(−iHt).
pub fn matrix_exp_skewh(h: &HermitianOperator, t: f64) -> UnitaryMatrix {
    let (vals, vecs) = eig_hermitian_raw(&h.matrix).expect("Jacobi eigensolver on Hermitian input");
    UnitaryMatrix::trusted(spectral_apply(&vals, &vecs, |x| (-I * (x * t)).exp()))
}

/// Principal square root of a PSD operator; eigenvalues down to −[`PSD_TOL`]·max(1, ‖A‖) are clamped.
pub fn matrix_sqrt_psd(a: &HermitianOperator) -> Result<HermitianOperator> {
    let (vals, vecs) = eig_hermitian_raw(&a.matrix)?;
    let scale = vals.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if let Some(&min) = vals.first() {
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd(min));
        }
    }
    Ok(HermitianOperator::hermitize(&spectral_apply(&vals, &vecs, |x| C64::new(x.max(0.0).sqrt(), 0.0))))
}

/// f(A) for Hermitian A and real f.
pub fn hermitian_function(a: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
    let (vals, vecs) = eig_hermitian_raw(&a.matrix)?;
    Ok(HermitianOperator::hermitize(&spectral_apply(&vals, &vecs, |x| C64::new(f(x), 0.0))))
}

pub(crate) fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(shape(alloc::format!("dimensions {a} and {b} differ")));
    }
    Ok(())
}

pub(crate) fn check_finite_real(x: f64, what: &str) -> Result<()> {
    if !x.is_finite() {
        return Err(domain(alloc::format!("{what} must be finite")));
    }
    Ok(())
}

/// Inner product ⟨a|b⟩.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
