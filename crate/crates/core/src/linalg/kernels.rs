//! Sequential kernels with flop accounting.
//!
//! Charges follow the classic counts: `MM(m,n,k) = 2mnk`, `Syrk(m,n) = mn^2`,
//! `Chol(n) = 2n^3/3`, `axpy(m,n) = mn`. A product with one triangular
//! operand is charged half of `MM`, and a product of two triangular operands a
//! quarter. With that convention the recursive Cholesky-inverse below costs
//! exactly `2n^3/3` for power-of-two `n`.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::Rational;

/// Accumulates floating point operations (γ units).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlopCounter {
    flops: Rational,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn flops(&self) -> Rational {
        self.flops
    }

    pub fn add(&mut self, flops: Rational) {
        self.flops += flops;
    }
}

/// Declared structure of a multiplication operand, used only for flop charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Structure {
    #[default]
    General,
    Triangular,
}

/// Flops charged for an `m x n` by `n x k` product with the given operand structures.
pub fn mm_flops(m: usize, n: usize, k: usize, a: Structure, b: Structure) -> Rational {
    let full = Rational::from_integer(2 * (m * n * k) as i64);
    let halvings = [a, b].iter().filter(|s| **s == Structure::Triangular).count();
    full / Rational::from_integer(1 << halvings)
}

fn cube_flops(n: usize, num: i64, den: i64) -> Rational {
    Rational::new(num * (n * n * n) as i64, den)
}

fn check_inner(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a.1 != b.0 {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

fn raw_mm<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (m, n, k) = (a.rows(), a.cols(), b.cols());
    let mut c = DenseMatrix::zeros(m, k);
    for i in 0..m {
        for p in 0..n {
            let aip = a[(i, p)];
            if aip == T::zero() {
                continue;
            }
            for j in 0..k {
                c[(i, j)] = c[(i, j)] + aip * b[(p, j)];
            }
        }
    }
    c
}

/// `C = AB`; charges `2mnk`.
pub fn mm<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<DenseMatrix<T>> {
    mm_structured(a, b, Structure::General, Structure::General, counter)
}

/// `C = AB` with flop charge reduced according to the declared operand structure.
pub fn mm_structured<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    sa: Structure,
    sb: Structure,
    counter: &mut FlopCounter,
) -> Result<DenseMatrix<T>> {
    check_inner(a.shape(), b.shape())?;
    counter.add(mm_flops(a.rows(), a.cols(), b.cols(), sa, sb));
    Ok(raw_mm(a, b))
}

/// `C = A^T B` for `A: k x m`, `B: k x n`; charges `2mnk`.
///
/// Each entry is accumulated over the shared row index in ascending order, so
/// `mm_tn(A, B)` and `mm_tn(B, A)` are exact transposes of each other.
pub fn mm_tn<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<DenseMatrix<T>> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "cannot form A^T B for A {}x{} and B {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (k, m, n) = (a.rows(), a.cols(), b.cols());
    counter.add(mm_flops(m, k, n, Structure::General, Structure::General));
    Ok(DenseMatrix::from_fn(m, n, |i, j| {
        let mut s = T::zero();
        for r in 0..k {
            s = s + a[(r, i)] * b[(r, j)];
        }
        s
    }))
}

/// `C = A^T A`, exactly symmetric; charges `mn^2` for `A: m x n`.
pub fn syrk<T: Scalar>(a: &DenseMatrix<T>, counter: &mut FlopCounter) -> DenseMatrix<T> {
    let (m, n) = a.shape();
    counter.add(Rational::from_integer((m * n * n) as i64));
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = T::zero();
            for r in 0..m {
                s = s + a[(r, i)] * a[(r, j)];
            }
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    c
}

/// `C - B B^T` for square `C` (`p x p`) and `B: p x q`, with the subtraction
/// fused into the symmetric update; charges `Syrk(q, p) = q p^2`.
pub fn syrk_sub<T: Scalar>(c: &DenseMatrix<T>, b: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<DenseMatrix<T>> {
    let (p, q) = b.shape();
    if c.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "symmetric update of {}x{} by {}x{} factor",
            c.rows(),
            c.cols(),
            p,
            q
        )));
    }
    counter.add(Rational::from_integer((q * p * p) as i64));
    let mut out = DenseMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut s = T::zero();
            for r in 0..q {
                s = s + b[(i, r)] * b[(j, r)];
            }
            let v = c[(i, j)] - s;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// `alpha X + Y`; charges `mn`.
pub fn axpy<T: Scalar>(alpha: T, x: &DenseMatrix<T>, y: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<DenseMatrix<T>> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension(format!(
            "axpy of {}x{} into {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    counter.add(Rational::from_integer(x.len() as i64));
    Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| alpha * x[(i, j)] + y[(i, j)]))
}

fn check_square<T: Scalar>(a: &DenseMatrix<T>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

fn breakdown<T: Scalar>(pivot: usize, value: T) -> Error {
    Error::Breakdown {
        pivot,
        value: value.to_f64().unwrap_or(f64::NAN),
    }
}

/// Lower-triangular Cholesky factor `L` with `LL^T = A`; charges `2n^3/3`.
///
/// Only the lower triangle of `A` is read. A nonpositive or non-finite pivot
/// aborts with [`Error::Breakdown`].
pub fn chol<T: Scalar>(a: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<DenseMatrix<T>> {
    check_square(a, "chol")?;
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(breakdown(j, d));
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    counter.add(cube_flops(n, 2, 3));
    Ok(l)
}

/// Recursive Cholesky factorization with triangular inverse: returns `(L, Y)`
/// with `LL^T = A` and `Y = L^{-1}`.
///
/// Splits at `n/2` down to `1x1` blocks, so `n` must be a power of two.
/// Charges `2n^3/3` flops in total.
pub fn cholinv<T: Scalar>(a: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    check_square(a, "cholinv")?;
    let n = a.rows();
    if !n.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "cholinv needs a power-of-two dimension, got {n}"
        )));
    }
    cholinv_rec(a, 0, counter)
}

fn cholinv_rec<T: Scalar>(
    a: &DenseMatrix<T>,
    offset: usize,
    counter: &mut FlopCounter,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let n = a.rows();
    if n == 1 {
        let v = a[(0, 0)];
        if !(v > T::zero()) || !v.is_finite() {
            return Err(breakdown(offset, v));
        }
        counter.add(cube_flops(1, 2, 3));
        let l = v.sqrt();
        return Ok((
            DenseMatrix::from_vec(1, 1, vec![l])?,
            DenseMatrix::from_vec(1, 1, vec![T::one() / l])?,
        ));
    }
    let h = n / 2;
    let a11 = a.submatrix(0, 0, h, h);
    let a21 = a.submatrix(h, 0, h, h);
    let a22 = a.submatrix(h, h, h, h);

    let (l11, y11) = cholinv_rec(&a11, offset, counter)?;
    let l21 = mm_structured(&a21, &y11.transpose(), Structure::General, Structure::Triangular, counter)?;
    let s = syrk_sub(&a22, &l21, counter)?;
    let (l22, y22) = cholinv_rec(&s, offset + h, counter)?;
    let t = mm_structured(&l21, &y11, Structure::General, Structure::Triangular, counter)?;
    let y21 = mm_structured(&y22, &t, Structure::Triangular, Structure::General, counter)?.neg();

    let mut l = DenseMatrix::zeros(n, n);
    l.set_submatrix(0, 0, &l11);
    l.set_submatrix(h, 0, &l21);
    l.set_submatrix(h, h, &l22);
    let mut y = DenseMatrix::zeros(n, n);
    y.set_submatrix(0, 0, &y11);
    y.set_submatrix(h, 0, &y21);
    y.set_submatrix(h, h, &y22);
    Ok((l, y))
}

/// Solves `X R = B` for upper-triangular nonsingular `R`; charges `mn^2`.
pub fn trsm_right_upper<T: Scalar>(
    b: &DenseMatrix<T>,
    r: &DenseMatrix<T>,
    counter: &mut FlopCounter,
) -> Result<DenseMatrix<T>> {
    check_square(r, "trsm")?;
    let (m, n) = b.shape();
    if r.rows() != n {
        return Err(Error::Dimension(format!(
            "trsm: B is {m}x{n} but R is {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    if let Some(j) = (0..n).find(|&j| r[(j, j)] == T::zero()) {
        return Err(Error::Singular(j));
    }
    counter.add(Rational::from_integer((m * n * n) as i64));
    let mut x = DenseMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let mut s = b[(i, j)];
            for k in 0..j {
                s = s - x[(i, k)] * r[(k, j)];
            }
            x[(i, j)] = s / r[(j, j)];
        }
    }
    Ok(x)
}
