//! Delay differential algebraic systems
//!
//! ```text
//! E x'(t) = A0 x(t) + sum_i A_i x(t - tau_i) + B w(t)
//!    z(t) = C x(t)
//! ```
//!
//! together with the nullspace bases of `E` that govern their high-frequency
//! (asymptotic) behaviour.

use ndarray::Array2;
use ndarray_linalg::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default threshold on `sigma_min(U^T A0 V)` for the causality check.
pub const CAUSALITY_TOL: f64 = 1e-10;

/// Positive delays in the order the system matrices refer to them.
///
/// Equal values are kept as separate entries: delay `i` always tags `A[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DelayVector {
    taus: Vec<f64>,
    ascending: Vec<usize>,
}

impl DelayVector {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidDelay(bad));
        }
        let mut ascending: Vec<usize> = (0..taus.len()).collect();
        // stable: equal delays keep their original relative order
        ascending.sort_by(|&i, &j| taus[i].total_cmp(&taus[j]));
        Ok(Self { taus, ascending })
    }

    pub fn empty() -> Self {
        Self { taus: Vec::new(), ascending: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.taus
    }

    pub fn max(&self) -> Option<f64> {
        self.ascending.last().map(|&i| self.taus[i])
    }

    /// Original indices ordered by ascending delay value.
    pub fn ascending_indices(&self) -> &[usize] {
        &self.ascending
    }

    pub fn sorted(&self) -> Vec<f64> {
        self.ascending.iter().map(|&i| self.taus[i]).collect()
    }

    /// The same delays multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.taus.iter().map(|t| t * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for DelayVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DelayVector> for Vec<f64> {
    fn from(d: DelayVector) -> Self {
        d.taus
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdaeSystem {
    e: Array2<f64>,
    a: Vec<Array2<f64>>,
    b: Array2<f64>,
    c: Array2<f64>,
    delays: DelayVector,
}

impl DdaeSystem {
    /// `a[0]` is the undelayed matrix, `a[i]` pairs with `delays[i - 1]`.
    pub fn new(
        e: Array2<f64>,
        a: Vec<Array2<f64>>,
        b: Array2<f64>,
        c: Array2<f64>,
        delays: DelayVector,
    ) -> Result<Self> {
        let n = e.nrows();
        if e.ncols() != n {
            return Err(Error::Dimension(format!("E is {}x{}, must be square", n, e.ncols())));
        }
        if a.len() != delays.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} A matrices for {} delays (need m + 1)",
                a.len(),
                delays.len()
            )));
        }
        for (i, ai) in a.iter().enumerate() {
            if ai.dim() != (n, n) {
                return Err(Error::Dimension(format!("A{} is {:?}, expected ({n}, {n})", i, ai.dim())));
            }
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        Ok(Self { e, a, b, c, delays })
    }

    /// Delay-free system `E x' = A x + B w, z = C x`.
    pub fn ode(e: Array2<f64>, a: Array2<f64>, b: Array2<f64>, c: Array2<f64>) -> Result<Self> {
        Self::new(e, vec![a], b, c, DelayVector::empty())
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }
    pub fn n_w(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_z(&self) -> usize {
        self.c.nrows()
    }
    pub fn m(&self) -> usize {
        self.delays.len()
    }
    pub fn e(&self) -> &Array2<f64> {
        &self.e
    }
    pub fn a(&self) -> &[Array2<f64>] {
        &self.a
    }
    pub fn b(&self) -> &Array2<f64> {
        &self.b
    }
    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }
    pub fn delays(&self) -> &DelayVector {
        &self.delays
    }

    pub fn tau_max(&self) -> f64 {
        self.delays.max().unwrap_or(0.0)
    }

    /// Same matrices, different delay values.
    pub fn with_delays(&self, delays: DelayVector) -> Result<Self> {
        Self::new(self.e.clone(), self.a.clone(), self.b.clone(), self.c.clone(), delays)
    }

    pub fn with_matrices(&self, a: Vec<Array2<f64>>) -> Result<Self> {
        Self::new(self.e.clone(), a, self.b.clone(), self.c.clone(), self.delays.clone())
    }
}

/// Orthonormal bases of the left (`U^T E = 0`) and right (`E V = 0`)
/// nullspaces of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceBases {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl NullspaceBases {
    pub fn nullity(&self) -> usize {
        self.u.ncols()
    }
}

pub fn compute_nullspaces(sys: &DdaeSystem) -> NullspaceBases {
    // SVD of a finite real matrix does not fail in practice; an empty basis
    // is the conservative fallback.
    let (u, v) = linalg::nullspaces(sys.e()).unwrap_or_else(|_| {
        let n = sys.n();
        (Array2::zeros((n, 0)), Array2::zeros((n, 0)))
    });
    NullspaceBases { u, v }
}

/// Smallest singular value of `U^T A0 V`, or `+inf` when `E` is nonsingular.
pub fn causality_margin(sys: &DdaeSystem, bases: &NullspaceBases) -> f64 {
    if bases.nullity() == 0 {
        return f64::INFINITY;
    }
    let block = bases.u.t().dot(&sys.a()[0]).dot(&bases.v);
    block
        .svd(false, false)
        .map(|(_, s, _)| s.iter().copied().fold(f64::INFINITY, f64::min))
        .unwrap_or(0.0)
}

pub fn check_causality(sys: &DdaeSystem, bases: &NullspaceBases) -> bool {
    causality_margin(sys, bases) > CAUSALITY_TOL
}

/// The projected blocks that define the asymptotic transfer function.
#[derive(Debug, Clone)]
pub struct AsymptoticBlocks {
    /// `U^T A_i V`, i = 0..m.
    pub a: Vec<Array2<f64>>,
    /// `U^T B`
    pub b: Array2<f64>,
    /// `C V`
    pub c: Array2<f64>,
    /// Indices `i >= 1` (into `a`) whose block is numerically nonzero.
    pub effective: Vec<usize>,
}

impl AsymptoticBlocks {
    pub fn new(sys: &DdaeSystem, bases: &NullspaceBases) -> Self {
        let ut = bases.u.t();
        let a: Vec<Array2<f64>> = sys.a().iter().map(|ai| ut.dot(ai).dot(&bases.v)).collect();
        let scale = sys
            .a()
            .iter()
            .map(|ai| linalg::frobenius(ai.view()))
            .fold(1.0, f64::max);
        let effective = (1..a.len())
            .filter(|&i| linalg::frobenius(a[i].view()) > 1e-13 * scale)
            .collect();
        Self { a, b: ut.dot(sys.b()), c: sys.c().dot(&bases.v), effective }
    }

    pub fn nullity(&self) -> usize {
        self.b.nrows()
    }
}
