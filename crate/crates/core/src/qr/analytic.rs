//! Closed-form critical-path costs and the grid tuner.
//!
//! These evaluate the per-line cost tables directly, without touching any
//! data, so they serve as an independent check on the measured ledgers.
//! Charges follow the same conventions as the algorithms: Gram blocks on the
//! block diagonal travel packed, distributed transposes of triangular
//! factors count half their block, and flops of products with triangular
//! operands are halved per triangular operand.

use crate::cost::{t_allgather, t_allreduce, t_bcast, t_reduce, t_transpose, CostVector};
use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::linalg::{mm_flops, Structure};
use crate::Rational;

use super::driver::{resolve_n_o, PaddedShape};
use super::{Algorithm, QrVariant};

use Structure::{General, Triangular};

fn r(v: usize) -> Rational {
    Rational::from_integer(v as i64)
}

fn flops(g: Rational) -> CostVector {
    CostVector::flops(g)
}

/// MM3D with local operand blocks `ml x nl` and `nl x kl` on cubes of side `c`.
fn mm3d_local(ml: usize, nl: usize, kl: usize, c: usize, sa: Structure, sb: Structure) -> Result<CostVector> {
    Ok(t_bcast(r(ml * nl), c)? + t_bcast(r(nl * kl), c)? + t_allreduce(r(ml * kl), c)? + flops(mm_flops(ml, nl, kl, sa, sb)))
}

/// MM3D of an `m x n` by an `n x k` matrix on a cube of side `c`.
pub fn mm3d_cost(m: usize, n: usize, k: usize, c: usize) -> Result<CostVector> {
    if c == 0 || !m.is_multiple_of(c) || !n.is_multiple_of(c) || !k.is_multiple_of(c) {
        return Err(Error::Dimension(format!("{m}x{n}x{k} does not divide over a cube of side {c}")));
    }
    mm3d_local(m / c, n / c, k / c, c, General, General)
}

/// CFR3D of order `n` with base case `n_o` on a cube of side `c`, unrolled
/// level by level.
pub fn cfr3d_cost(n: usize, n_o: usize, c: usize, want_inverse: bool) -> Result<CostVector> {
    if n == n_o {
        return Ok(t_allgather(r(n_o * n_o), c * c)? + flops(Rational::new(2 * (n_o * n_o * n_o) as i64, 3)));
    }
    if n < n_o || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("cannot recurse from {n} down to {n_o}")));
    }
    let b = n / 2 / c;
    let mut cost = cfr3d_cost(n / 2, n_o, c, true)?.scale(2);
    cost += t_transpose(r(b * b) / 2, c * c) + t_transpose(r(b * b), c * c);
    cost += mm3d_local(b, b, b, c, General, General)?.scale(2) + flops(r(b * b));
    if want_inverse {
        cost += mm3d_local(b, b, b, c, General, General)?.scale(2);
    }
    Ok(cost)
}

fn gram_words(nl: usize, c: usize) -> Rational {
    if c == 1 {
        r(nl * (nl + 1) / 2)
    } else {
        r(nl * nl)
    }
}

/// One CholeskyQR pass on a `c x d x c` grid (`cubic` selects the
/// column-Reduce route of the cubic algorithm).
fn pass_cost(m: usize, n: usize, c: usize, d: usize, n_o: usize, variant: QrVariant, cubic: bool) -> Result<CostVector> {
    let (ml, nl) = (m / d, n / c);
    let w = gram_words(nl, c);
    let mut cost = t_bcast(r(ml * nl), c)?;
    cost += flops(if c == 1 { r(ml * nl * nl) } else { r(2 * ml * nl * nl) });
    if cubic {
        cost += t_reduce(w, d)? + t_bcast(w, c)?;
    } else {
        cost += t_reduce(w, c)? + t_allreduce(w, d / c)? + t_bcast(w, c)?;
    }
    let split = variant == QrVariant::InvertSplit && n > n_o;
    cost += cfr3d_cost(n, n_o, c, !split)?;
    let tri = |words: usize| t_transpose(r(words) / 2, c * c);
    if split {
        let hl = nl / 2;
        cost += tri(hl * hl) + t_transpose(r(hl * hl), c * c) + tri(hl * hl);
        cost += mm3d_local(ml, hl, hl, c, General, Triangular)?.scale(2);
        cost += mm3d_local(ml, hl, hl, c, General, General)? + flops(r(ml * hl));
    } else {
        cost += tri(nl * nl) + mm3d_local(ml, nl, nl, c, General, Triangular)?;
    }
    Ok(cost + tri(nl * nl))
}

fn pass_cost_1d(m: usize, n: usize, p: usize) -> Result<CostVector> {
    let ml = m / p;
    Ok(flops(r(ml * n * n)) + t_allreduce(r(n * (n + 1) / 2), p)? + flops(Rational::new(2 * (n * n * n) as i64, 3)) + flops(r(ml * n * n)))
}

/// Critical-path cost of `alg` on an `m x n` matrix over grid `(c, d)`,
/// after the same padding the algorithms apply.
pub fn analytic_cost(
    alg: Algorithm,
    m: usize,
    n: usize,
    c: usize,
    d: usize,
    n_o: Option<usize>,
    variant: QrVariant,
) -> Result<CostVector> {
    let grid = GridShape::new(c, d)?;
    grid.require_power_of_two()?;
    grid.require_subcubes()?;
    if m < n || n == 0 {
        return Err(Error::Dimension(format!("need m >= n >= 1, got {m}x{n}")));
    }
    let s = PaddedShape::new(m, n, &grid);
    let (m, n, p) = (s.m_padded, s.n_padded, grid.p());
    let one_d = matches!(alg, Algorithm::Cqr1d | Algorithm::Cqr2_1d);
    let three_d = matches!(alg, Algorithm::Cqr3d | Algorithm::Cqr2_3d);
    if one_d && c != 1 {
        return Err(Error::GridShape(format!("{alg} needs c = 1")));
    }
    if three_d && c != d {
        return Err(Error::GridShape(format!("{alg} needs a cubic grid")));
    }
    let pass = || -> Result<CostVector> {
        if one_d {
            pass_cost_1d(m, n, p)
        } else {
            pass_cost(m, n, c, d, resolve_n_o(n, c, n_o)?, variant, three_d)
        }
    };
    if !alg.is_two_pass() {
        return pass();
    }
    let combine = if one_d {
        flops(mm_flops(n, n, n, Triangular, Triangular))
    } else {
        let nl = n / c;
        mm3d_local(nl, nl, nl, c, Triangular, Triangular)?
    };
    Ok(pass()?.scale(2) + combine)
}

/// Every `(c, d)` with `c` a power of two, `P = c^2 d`, `d >= c` and `c | d`.
pub fn valid_shapes(p: usize) -> Vec<GridShape> {
    let mut out = Vec::new();
    let mut c = 1;
    while c * c * c <= p {
        if p.is_multiple_of(c * c) {
            let d = p / (c * c);
            if d.is_multiple_of(c) {
                if let Ok(g) = GridShape::new(c, d) {
                    out.push(g);
                }
            }
        }
        c *= 2;
    }
    out
}

/// Grid for CA-CQR2 on an `m x n` matrix over `P` ranks.
///
/// The continuous optimum is `c* = (Pn/m)^(1/3)`. Of the valid shapes whose
/// `c` is one of the two powers of two bracketing `c*` (all valid shapes if
/// neither qualifies), the one with the fewest analytic words wins; ties go
/// to the smaller `c`.
pub fn tune_grid(m: usize, n: usize, p: usize) -> Result<GridShape> {
    if p == 0 || !p.is_power_of_two() {
        return Err(Error::GridShape(format!("P = {p} must be a power of two")));
    }
    if m < n || n == 0 {
        return Err(Error::Dimension(format!("need m >= n >= 1, got {m}x{n}")));
    }
    // Bracket c* with exact integer comparisons of c^3 m against P n.
    let target = (p as u128) * (n as u128);
    let cube = |c: usize| (c as u128).pow(3) * m as u128;
    let mut lo = 1;
    while cube(lo * 2) <= target {
        lo *= 2;
    }
    let hi = if cube(lo) >= target { lo } else { lo * 2 };

    let shapes = valid_shapes(p);
    let near: Vec<_> = shapes.iter().copied().filter(|g| g.c() == lo || g.c() == hi).collect();
    let pool = if near.is_empty() { shapes } else { near };
    let mut best: Option<(Rational, GridShape)> = None;
    for g in pool {
        let beta = analytic_cost(Algorithm::Cacqr2, m, n, g.c(), g.d(), None, QrVariant::InvertAll)?.beta;
        if best.as_ref().is_none_or(|(b, _)| beta < *b) {
            best = Some((beta, g));
        }
    }
    best.map(|(_, g)| g)
        .ok_or_else(|| Error::GridShape(format!("no valid grid for P = {p}")))
}
