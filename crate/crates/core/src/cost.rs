//! α-β-γ cost bookkeeping: the collective cost table and the critical-path
//! ledger.
//!
//! All quantities are exact rationals. Communicator sizes that enter a
//! `log2` must be powers of two.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rational;

/// Counts of messages (α), words (β) and flops (γ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostVector {
    pub alpha: Rational,
    pub beta: Rational,
    pub gamma: Rational,
}

impl CostVector {
    pub const ZERO: Self = Self {
        alpha: Rational::ZERO,
        beta: Rational::ZERO,
        gamma: Rational::ZERO,
    };

    pub fn new(alpha: Rational, beta: Rational, gamma: Rational) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn flops(gamma: Rational) -> Self {
        Self {
            gamma,
            ..Self::ZERO
        }
    }

    /// Componentwise maximum.
    pub fn max(self, other: Self) -> Self {
        Self {
            alpha: self.alpha.max(other.alpha),
            beta: self.beta.max(other.beta),
            gamma: self.gamma.max(other.gamma),
        }
    }

    pub fn scale(self, k: i64) -> Self {
        let k = Rational::from_integer(k);
        Self {
            alpha: self.alpha * k,
            beta: self.beta * k,
            gamma: self.gamma * k,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.alpha >= Rational::ZERO && self.beta >= Rational::ZERO && self.gamma >= Rational::ZERO
    }

    pub fn as_f64(&self) -> CostTriple {
        CostTriple {
            alpha: ratio_to_f64(self.alpha),
            beta: ratio_to_f64(self.beta),
            gamma: ratio_to_f64(self.gamma),
        }
    }
}

impl Add for CostVector {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            alpha: self.alpha + o.alpha,
            beta: self.beta + o.beta,
            gamma: self.gamma + o.gamma,
        }
    }
}

impl AddAssign for CostVector {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for CostVector {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for CostVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} α + {} β + {} γ", self.alpha, self.beta, self.gamma)
    }
}

/// Floating-point view of a [`CostVector`] for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Unit step: 0 for `p <= 1`, 1 otherwise.
pub fn delta(p: usize) -> Rational {
    if p > 1 {
        Rational::ONE
    } else {
        Rational::ZERO
    }
}

/// Exact `log2 p` for a power of two.
pub fn log2(p: usize) -> Result<Rational> {
    if !p.is_power_of_two() {
        return Err(Error::Collective(format!(
            "communicator size {p} is not a power of two"
        )));
    }
    Ok(Rational::from_integer(p.trailing_zeros() as i64))
}

fn comm(alpha: Rational, beta: Rational) -> CostVector {
    CostVector::new(alpha, beta, Rational::ZERO)
}

/// `δ(p) (α + n β)`.
pub fn t_transpose(n: Rational, p: usize) -> CostVector {
    let d = delta(p);
    comm(d, n * d)
}

/// `2 log2(p) α + 2 n δ(p) β`.
pub fn t_bcast(n: Rational, p: usize) -> Result<CostVector> {
    let two = Rational::from_integer(2);
    Ok(comm(two * log2(p)?, two * n * delta(p)))
}

/// `log2(p) α + n δ(p) β`.
pub fn t_reduce(n: Rational, p: usize) -> Result<CostVector> {
    Ok(comm(log2(p)?, n * delta(p)))
}

/// `2 log2(p) α + 2 n δ(p) β`.
pub fn t_allreduce(n: Rational, p: usize) -> Result<CostVector> {
    let two = Rational::from_integer(2);
    Ok(comm(two * log2(p)?, two * n * delta(p)))
}

/// `log2(p) α + n δ(p) β`, `n` being the total gathered words.
pub fn t_allgather(n: Rational, p: usize) -> Result<CostVector> {
    Ok(comm(log2(p)?, n * delta(p)))
}

/// One labelled entry of a [`CostLedger`].
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub label: String,
    pub cost: CostVector,
}

/// Critical-path accumulator of messages, words and flops.
///
/// One collective over a communicator is charged once, not per member.
/// Logically concurrent work on disjoint groups (or ranks) is charged the
/// componentwise maximum over the groups through
/// [`charge_concurrent`](Self::charge_concurrent).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    total: CostVector,
    phases: Vec<Phase>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, label: &str, cost: CostVector) {
        debug_assert!(cost.is_nonnegative());
        self.total += cost;
        self.phases.push(Phase {
            label: label.to_string(),
            cost,
        });
    }

    /// Charges the componentwise maximum of concurrent costs.
    pub fn charge_concurrent(&mut self, label: &str, costs: impl IntoIterator<Item = CostVector>) {
        let worst = costs.into_iter().fold(CostVector::ZERO, CostVector::max);
        self.charge(label, worst);
    }

    pub fn total(&self) -> CostVector {
        self.total
    }

    pub fn messages(&self) -> Rational {
        self.total.alpha
    }

    pub fn words(&self) -> Rational {
        self.total.beta
    }

    pub fn flops(&self) -> Rational {
        self.total.gamma
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Sum of all phases whose label starts with `prefix`.
    pub fn sum_by_prefix(&self, prefix: &str) -> CostVector {
        self.phases
            .iter()
            .filter(|p| p.label.starts_with(prefix))
            .map(|p| p.cost)
            .sum()
    }

    /// Appends every phase of `other` under `prefix/`.
    pub fn absorb(&mut self, prefix: &str, other: CostLedger) {
        for p in other.phases {
            self.charge(&format!("{prefix}/{}", p.label), p.cost);
        }
    }
}
