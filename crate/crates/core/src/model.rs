//! Problem data, B&B nodes, objective evaluation and pivot values.
//!
//! The problem is
//!
//! ```text
//! min_x  ½‖y − Ax‖² + λ‖x‖₀   s.t.  ‖x‖∞ ≤ M
//! ```
//!
//! All indices are 0-based.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Entries with `|x_i| > ZERO_THRESHOLD` count as nonzero in `‖x‖₀`.
pub const ZERO_THRESHOLD: f64 = 1e-10;

/// Slack allowed on the box and on `x_{S0} = 0` before a point is rejected.
/// Largest `n` for which [`Instance::gram`] is cached (32 MiB of `f64`).
pub const GRAM_CACHE_MAX_COLS: usize = 2048;

pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

const POWER_ITERATION_TOLERANCE: f64 = 1e-6;
const POWER_ITERATION_MAX_ITER: usize = 500;

/// Data of one problem: dictionary `A` (m × n), observation `y`, penalty
/// `λ` and box radius `M`.
#[derive(Debug, Clone)]
pub struct Instance {
    a: DMatrix<f64>,
    y: DVector<f64>,
    lambda: f64,
    big_m: f64,
    lipschitz: OnceLock<f64>,
    column_sq_norms: OnceLock<Vec<f64>>,
    gram: OnceLock<Option<DMatrix<f64>>>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.y == other.y
            && self.lambda == other.lambda
            && self.big_m == other.big_m
    }
}

impl Instance {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, lambda: f64, big_m: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidInstance(format!(
                "dictionary must be non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "dictionary has {} rows but y has {} entries",
                a.nrows(),
                y.len()
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if !(big_m.is_finite() && big_m > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "M must be positive and finite, got {big_m}"
            )));
        }
        if a.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite entry in A or y".into()));
        }
        Ok(Self {
            a,
            y,
            lambda,
            big_m,
            lipschitz: OnceLock::new(),
            column_sq_norms: OnceLock::new(),
            gram: OnceLock::new(),
        })
    }

    /// Builds an instance from a row-major list of rows.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64], lambda: f64, big_m: f64) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "row {r} has {} values, expected {n}",
                row.len()
            )));
        }
        let a = DMatrix::from_fn(m, n, |r, c| rows[r][c]);
        Self::new(a, DVector::from_column_slice(y), lambda, big_m)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Number of rows `m`.
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of atoms `n`.
    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// `λ / M`, the ℓ1 weight of the relaxation.
    pub fn l1_weight(&self) -> f64 {
        self.lambda / self.big_m
    }

    /// `a_iᵀ u`, an O(m) inner product.
    #[inline]
    pub fn correlation(&self, i: usize, u: &DVector<f64>) -> f64 {
        dot(self.column(i), u.as_slice())
    }

    /// Column `i` of `A` as a contiguous slice (storage is column-major).
    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        let m = self.a.nrows();
        &self.a.as_slice()[i * m..(i + 1) * m]
    }

    /// `Aᵀ u`.
    pub fn correlations(&self, u: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(u)
    }

    /// `A x`, skipping zero entries of `x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows());
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.column(i), out.as_mut_slice());
            }
        }
        out
    }

    /// `y − A x`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.y - self.apply(x)
    }

    /// Largest eigenvalue of `AᵀA`, estimated once by power iteration and
    /// cached. Used as the Lipschitz constant of the least-squares gradient.
    pub fn lipschitz(&self) -> f64 {
        *self.lipschitz.get_or_init(|| largest_gram_eigenvalue(&self.a))
    }

    /// `AᵀA`, computed once, when `n ≤ GRAM_CACHE_MAX_COLS`.
    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        self.gram
            .get_or_init(|| (self.cols() <= GRAM_CACHE_MAX_COLS).then(|| self.a.tr_mul(&self.a)))
            .as_ref()
    }

    /// `‖a_i‖²` for every column, computed once.
    pub fn column_sq_norms(&self) -> &[f64] {
        self.column_sq_norms
            .get_or_init(|| self.a.column_iter().map(|c| c.norm_squared()).collect())
    }

    fn check_len(&self, what: &str, v: &DVector<f64>, expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {}, expected {expected}",
                v.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_primal_len(&self, x: &DVector<f64>) -> Result<()> {
        self.check_len("x", x, self.cols())
    }

    pub(crate) fn check_dual_len(&self, u: &DVector<f64>) -> Result<()> {
        self.check_len("u", u, self.rows())
    }

    pub(crate) fn check_box(&self, x: &DVector<f64>) -> Result<()> {
        let limit = self.big_m + FEASIBILITY_TOLERANCE;
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| v.abs() > limit) {
            return Err(Error::Infeasible(format!(
                "|x[{i}]| = {} exceeds M = {}",
                v.abs(),
                self.big_m
            )));
        }
        Ok(())
    }

    /// Pivot values of atom `i` at the dual point `u`.
    pub fn pivot(&self, u: &DVector<f64>, i: usize) -> Result<PivotValues> {
        self.check_dual_len(u)?;
        if i >= self.cols() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.cols(),
            });
        }
        Ok(PivotValues::from_correlation(
            self.correlation(i, u),
            self.lambda,
            self.big_m,
        ))
    }

    /// `½‖y − Ax‖² + λ‖x‖₀` for a box-feasible `x`.
    pub fn full_objective(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_primal_len(x)?;
        self.check_box(x)?;
        let fit = 0.5 * self.residual(x).norm_squared();
        Ok(fit + self.lambda * l0_count(x) as f64)
    }
}

/// Number of entries with magnitude above [`ZERO_THRESHOLD`].
pub fn l0_count(x: &DVector<f64>) -> usize {
    x.iter().filter(|v| v.abs() > ZERO_THRESHOLD).count()
}

/// Indices of the entries counted by [`l0_count`].
pub fn support(x: &DVector<f64>) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > ZERO_THRESHOLD)
        .map(|(i, _)| i)
        .collect()
}

/// `aᵀb` with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, ra) = a.as_chunks::<4>();
    let (cb, rb) = b.as_chunks::<4>();
    for (x, y) in ca.iter().zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha·x`.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn largest_gram_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATION_MAX_ITER {
        let w = a.tr_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return f64::MIN_POSITIVE;
        }
        let next = v.dot(&w);
        v = w / norm;
        let converged = (next - estimate).abs() <= POWER_ITERATION_TOLERANCE * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    // Rayleigh quotients approach the top eigenvalue from below; pad so that
    // 1/L stays a safe step.
    estimate * 1.01
}

/// The three pivot families of one atom at one dual point:
/// `raw = M(|aᵢᵀu| − λ/M)`, `at_zero = max(0, raw)`, `at_one = max(0, −raw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotValues {
    pub raw: f64,
    pub at_zero: f64,
    pub at_one: f64,
}

impl PivotValues {
    #[inline]
    pub fn from_correlation(correlation: f64, lambda: f64, big_m: f64) -> Self {
        let excess = correlation.abs() - lambda / big_m;
        Self {
            raw: big_m * excess,
            at_zero: big_m * excess.max(0.0),
            at_one: big_m * (-excess).max(0.0),
        }
    }
}

/// Decision status of one variable at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// In `S0`: forced to zero.
    Zero,
    /// In `S1`: forced nonzero.
    One,
    /// In `S̄`: undecided.
    Free,
}

/// A B&B node `(S0, S1, S̄)`. The three sets partition `{0, …, n−1}` by
/// construction since every index carries exactly one [`Status`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    status: Vec<Status>,
}

impl Node {
    /// The root node `(∅, ∅, {0, …, n−1})`.
    pub fn root(n: usize) -> Self {
        Self {
            status: vec![Status::Free; n],
        }
    }

    /// Builds a node from explicit `S0` and `S1`; everything else is free.
    pub fn from_sets(n: usize, s_zero: &[usize], s_one: &[usize]) -> Result<Self> {
        let mut node = Self::root(n);
        for (&i, status) in s_zero
            .iter()
            .map(|i| (i, Status::Zero))
            .chain(s_one.iter().map(|i| (i, Status::One)))
        {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if node.status[i] != Status::Free {
                return Err(Error::InvalidNode(format!(
                    "index {i} listed more than once"
                )));
            }
            node.status[i] = status;
        }
        Ok(node)
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn status(&self, i: usize) -> Status {
        self.status[i]
    }

    pub fn statuses(&self) -> &[Status] {
        &self.status
    }

    fn indices(&self, wanted: Status) -> impl Iterator<Item = usize> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == wanted)
            .map(|(i, _)| i)
    }

    pub fn s_zero(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices(Status::Zero)
    }

    pub fn s_one(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices(Status::One)
    }

    pub fn s_bar(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices(Status::Free)
    }

    pub fn count(&self, wanted: Status) -> usize {
        self.status.iter().filter(|s| **s == wanted).count()
    }

    pub fn is_leaf(&self) -> bool {
        !self.status.contains(&Status::Free)
    }

    fn check_free(&self, l: usize) -> Result<()> {
        match self.status.get(l) {
            None => Err(Error::IndexOutOfRange {
                index: l,
                n: self.len(),
            }),
            Some(Status::Free) => Ok(()),
            Some(_) => Err(Error::NotUndecided(l)),
        }
    }

    fn with_status(&self, l: usize, status: Status) -> Result<Self> {
        self.check_free(l)?;
        let mut child = self.clone();
        child.status[l] = status;
        Ok(child)
    }

    /// The sub-node where `x_l = 0` is imposed.
    pub fn child_zero(&self, l: usize) -> Result<Self> {
        self.with_status(l, Status::Zero)
    }

    /// The sub-node where `x_l ≠ 0` is imposed.
    pub fn child_one(&self, l: usize) -> Result<Self> {
        self.with_status(l, Status::One)
    }

    /// Moves several free indices at once. All indices are checked before
    /// anything is changed.
    pub(crate) fn with_fixed(&self, zeros: &[usize], ones: &[usize]) -> Result<Self> {
        for &l in zeros.iter().chain(ones) {
            self.check_free(l)?;
        }
        let mut child = self.clone();
        for &l in zeros {
            child.status[l] = Status::Zero;
        }
        for &l in ones {
            if child.status[l] != Status::Free {
                return Err(Error::InvalidNode(format!(
                    "index {l} fixed to zero and to nonzero"
                )));
            }
            child.status[l] = Status::One;
        }
        Ok(child)
    }

    /// True if `other` is this node or one of its descendants.
    pub fn contains(&self, other: &Node) -> bool {
        self.len() == other.len()
            && self
                .status
                .iter()
                .zip(&other.status)
                .all(|(mine, theirs)| *mine == Status::Free || mine == theirs)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_set = |f: &mut fmt::Formatter<'_>, it: &mut dyn Iterator<Item = usize>| {
            let items: Vec<String> = it.map(|i| (i + 1).to_string()).collect();
            write!(f, "{{{}}}", items.join(","))
        };
        write!(f, "S0=")?;
        fmt_set(f, &mut self.s_zero())?;
        write!(f, " S1=")?;
        fmt_set(f, &mut self.s_one())?;
        write!(f, " |S̄|={}", self.count(Status::Free))
    }
}
