//! Brute-force reference solver: enumerate every support, solve the
//! box-constrained least-squares problem on it, keep the best objective.
//! Only meant for small `n`; it is the ground truth of the test suites.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{largest_gram_eigenvalue, Instance};

/// Largest `n` accepted by [`exhaustive_solve`].
pub const MAX_ORACLE_N: usize = 20;

const BOX_LS_MAX_ITER: usize = 1_000_000;
const OPTIMALITY_CHECK_PERIOD: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Largest support size enumerated; `None` means all of them.
    pub max_support_size: Option<usize>,
    /// Stop when the projected-gradient map has ∞-norm below this value.
    pub ls_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_support_size: None,
            ls_tolerance: 1e-10,
        }
    }
}

fn gradient(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    -a.tr_mul(&(y - a * x))
}

/// ∞-norm of `L (x − clip(x − ∇f(x)/L))`, zero exactly at box-KKT points.
fn gradient_map_norm(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, big_m: f64, lipschitz: f64) -> f64 {
    let g = gradient(a, y, x);
    x.iter()
        .zip(g.iter())
        .map(|(&xi, &gi)| (lipschitz * (xi - (xi - gi / lipschitz).clamp(-big_m, big_m))).abs())
        .fold(0.0, f64::max)
}

/// Unconstrained least squares through a thin QR factorization; `None` if
/// `a` has fewer rows than columns or is numerically rank deficient.
fn least_squares_qr(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() < a.ncols() {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return None;
    }
    let rhs = qr.q().tr_mul(y);
    r.solve_upper_triangular(&rhs)
}

/// Minimizer of `½‖y − A_T x_T‖²` over `‖x_T‖∞ ≤ M`, zero outside `support`.
///
/// The unconstrained least-squares solution (via QR) is returned when it is
/// inside the box and passes the optimality check; otherwise accelerated
/// projected gradient with step `1/L_T` runs until the gradient map is below
/// `ls_tolerance`.
pub fn box_ls(instance: &Instance, support: &[usize], ls_tolerance: f64) -> Result<DVector<f64>> {
    let n = instance.cols();
    if let Some(&bad) = support.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }
    let mut out = DVector::zeros(n);
    if support.is_empty() {
        return Ok(out);
    }
    let big_m = instance.big_m();
    let a = instance.a().select_columns(support);
    let y = instance.y();
    let lipschitz = largest_gram_eigenvalue(&a);

    let unconstrained = least_squares_qr(&a, y);
    let mut x = match unconstrained {
        Some(x) if x.iter().all(|v| v.is_finite() && v.abs() <= big_m) => {
            if gradient_map_norm(&a, y, &x, big_m, lipschitz) <= ls_tolerance {
                for (k, &i) in support.iter().enumerate() {
                    out[i] = x[k];
                }
                return Ok(out);
            }
            x
        }
        Some(x) if x.iter().all(|v| v.is_finite()) => x.map(|v| v.clamp(-big_m, big_m)),
        _ => DVector::zeros(support.len()),
    };

    let step = 1.0 / lipschitz;
    let mut z = x.clone();
    let mut momentum = 1.0f64;
    for iteration in 0..BOX_LS_MAX_ITER {
        if iteration % OPTIMALITY_CHECK_PERIOD == 0
            && gradient_map_norm(&a, y, &x, big_m, lipschitz) <= ls_tolerance
        {
            break;
        }
        let g = gradient(&a, y, &z);
        let next = (&z - g * step).map(|v| v.clamp(-big_m, big_m));
        if (&z - &next).dot(&(&next - &x)) > 0.0 {
            momentum = 1.0;
            z.copy_from(&next);
        } else {
            let t = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / t;
            momentum = t;
            z = &next + (&next - &x) * beta;
        }
        x = next;
    }
    for (k, &i) in support.iter().enumerate() {
        out[i] = x[k];
    }
    Ok(out)
}

/// Enumerates supports by size, lexicographically within a size.
pub fn enumerate_supports(n: usize, max_size: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=max_size.min(n)).flat_map(move |size| (0..n).combinations(size))
}

/// Global minimizer of the problem by exhaustive enumeration. Ties go to the
/// first support in enumeration order, independently of thread scheduling.
pub fn exhaustive_solve(instance: &Instance, config: &OracleConfig) -> Result<(DVector<f64>, f64)> {
    let n = instance.cols();
    if n > MAX_ORACLE_N {
        return Err(Error::EnumerationTooLarge {
            n,
            limit: MAX_ORACLE_N,
        });
    }
    let max_size = config.max_support_size.unwrap_or(n);
    let supports: Vec<Vec<usize>> = enumerate_supports(n, max_size).collect();
    let values = supports
        .par_iter()
        .map(|t| {
            let x = box_ls(instance, t, config.ls_tolerance)?;
            instance.full_objective(&x)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    let x = box_ls(instance, &supports[best], config.ls_tolerance)?;
    Ok((x, values[best]))
}
