//! Node relaxation: a box-constrained LASSO where the ℓ0 term on undecided
//! entries is replaced by `(λ/M)‖x_S̄‖₁`, together with its Fenchel dual
//!
//! ```text
//! D(u) = ½‖y‖² − ½‖y − u‖² − Σ_{i∈S̄} π⁰ᵢ(u) − Σ_{i∈S1} πᵢ(u)
//! ```
//!
//! The dual is unconstrained, so `D(u)` is a valid lower bound on the node
//! relaxation (and thus on every feasible point of the node) for any `u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{axpy, dot, Instance, Node, PivotValues, Status, FEASIBILITY_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationConfig {
    /// Absolute duality-gap threshold.
    pub gap_tolerance: f64,
    pub max_iterations: usize,
    /// Iterations between two evaluations of the gap and the callback.
    pub screening_check_period: usize,
    pub algorithm: RelaxationAlgorithm,
}

/// Inner solver for the node relaxation. Both stop on the same certified
/// duality gap; they differ only in speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelaxationAlgorithm {
    /// Cyclic coordinate descent alternating full and active-set sweeps.
    #[default]
    CoordinateDescent,
    /// Accelerated proximal gradient (FISTA) with step `1/L`.
    ProximalGradient,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-8,
            max_iterations: 200_000,
            screening_check_period: 5,
            algorithm: RelaxationAlgorithm::default(),
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tolerance > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "gap_tolerance must be positive, got {}",
                self.gap_tolerance
            )));
        }
        if self.max_iterations == 0 || self.screening_check_period == 0 {
            return Err(Error::InvalidInstance(
                "max_iterations and screening_check_period must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gap below tolerance.
    Converged,
    /// The callback asked to stop.
    Interrupted,
    /// `max_iterations` reached. `dual_value` is still a certified bound.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct RelaxationResult {
    pub x: DVector<f64>,
    /// `y − A x`.
    pub u: DVector<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub termination: Termination,
    pub iterations: usize,
}

impl RelaxationResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// What the periodic callback sees. `correlations[i] = a_iᵀu` is only
/// filled for `i ∉ S0`.
#[derive(Debug)]
pub struct Iterate<'a> {
    pub x: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
    pub correlations: &'a DVector<f64>,
    pub dual_value: f64,
    pub iteration: usize,
}

fn check_node(instance: &Instance, node: &Node) -> Result<()> {
    if node.len() != instance.cols() {
        return Err(Error::DimensionMismatch(format!(
            "node has {} indices, instance has n = {}",
            node.len(),
            instance.cols()
        )));
    }
    Ok(())
}

/// `½‖y − Ax‖² + (λ/M)‖x_S̄‖₁ + λ|S1|` for `x` feasible at `node`.
pub fn relaxed_primal(instance: &Instance, node: &Node, x: &DVector<f64>) -> Result<f64> {
    check_node(instance, node)?;
    instance.check_primal_len(x)?;
    instance.check_box(x)?;
    if let Some(i) = node.s_zero().find(|&i| x[i].abs() > FEASIBILITY_TOLERANCE) {
        return Err(Error::Infeasible(format!(
            "x[{i}] = {} but index {i} is in S0",
            x[i]
        )));
    }
    let u = instance.residual(x);
    Ok(primal_value_with(instance, node, x, &u))
}

fn primal_value_with(instance: &Instance, node: &Node, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
    let mut l1 = 0.0;
    let mut ones = 0usize;
    for (i, s) in node.statuses().iter().enumerate() {
        match s {
            Status::Free => l1 += x[i].abs(),
            Status::One => ones += 1,
            Status::Zero => {}
        }
    }
    0.5 * u.norm_squared() + instance.l1_weight() * l1 + instance.lambda() * ones as f64
}

/// Dual objective of the node relaxation at `u`.
pub fn dual_objective(instance: &Instance, node: &Node, u: &DVector<f64>) -> Result<f64> {
    check_node(instance, node)?;
    instance.check_dual_len(u)?;
    let correlations = instance.correlations(u);
    Ok(dual_value_with(instance, node, u, &correlations))
}

/// Same as [`dual_objective`] with `Aᵀu` supplied (entries on `S0` unused).
pub(crate) fn dual_value_with(
    instance: &Instance,
    node: &Node,
    u: &DVector<f64>,
    correlations: &DVector<f64>,
) -> f64 {
    let (lambda, big_m) = (instance.lambda(), instance.big_m());
    let mut pivots = 0.0;
    for (i, s) in node.statuses().iter().enumerate() {
        match s {
            Status::Free => pivots += PivotValues::from_correlation(correlations[i], lambda, big_m).at_zero,
            Status::One => pivots += PivotValues::from_correlation(correlations[i], lambda, big_m).raw,
            Status::Zero => {}
        }
    }
    let y = instance.y();
    0.5 * y.norm_squared() - 0.5 * (y - u).norm_squared() - pivots
}

/// The dual candidate `u = y − A x` associated with a primal point.
pub fn dual_from_primal(instance: &Instance, x: &DVector<f64>) -> Result<DVector<f64>> {
    instance.check_primal_len(x)?;
    Ok(instance.residual(x))
}

/// Closed-form Fenchel conjugate of the relaxed penalty
/// `g(x) = (λ/M)‖x_S‖₁ + ι{‖x‖∞ ≤ M}`, where `S` is the set of entries with
/// `penalized[i]`:
///
/// ```text
/// g*(v) = Σ_{i∈S} M·max(0, |vᵢ| − λ/M) + Σ_{i∉S} M|vᵢ|
/// ```
///
/// Summing it over `S̄` (penalized) and `S1` (not penalized) gives the pivot
/// terms of the dual.
pub fn penalty_conjugate(v: &[f64], penalized: &[bool], lambda: f64, big_m: f64) -> Result<f64> {
    if v.len() != penalized.len() {
        return Err(Error::DimensionMismatch(format!(
            "v has {} entries, penalized mask has {}",
            v.len(),
            penalized.len()
        )));
    }
    let weight = lambda / big_m;
    Ok(v.iter()
        .zip(penalized)
        .map(|(&vi, &pen)| {
            if pen {
                big_m * (vi.abs() - weight).max(0.0)
            } else {
                big_m * vi.abs()
            }
        })
        .sum())
}

#[inline]
fn prox(status: Status, v: f64, shrink: f64, big_m: f64) -> f64 {
    match status {
        Status::Zero => 0.0,
        Status::One => v.clamp(-big_m, big_m),
        Status::Free => (v.abs() - shrink).max(0.0).copysign(v).clamp(-big_m, big_m),
    }
}

struct Evaluation {
    u: DVector<f64>,
    correlations: DVector<f64>,
    primal: f64,
    dual: f64,
}

fn evaluate(instance: &Instance, node: &Node, free: &[usize], x: &DVector<f64>, ax: &DVector<f64>) -> Evaluation {
    let u = instance.y() - ax;
    let mut correlations = DVector::zeros(instance.cols());
    for &i in free {
        correlations[i] = instance.correlation(i, &u);
    }
    let primal = primal_value_with(instance, node, x, &u);
    let dual = dual_value_with(instance, node, &u, &correlations);
    Evaluation {
        u,
        correlations,
        primal,
        dual,
    }
}

/// Outcome of a checkpoint: either keep iterating or stop with a result.
fn checkpoint(
    instance: &Instance,
    node: &Node,
    free: &[usize],
    x: &DVector<f64>,
    ax: &DVector<f64>,
    iteration: usize,
    config: &RelaxationConfig,
    callback: &mut Option<&mut dyn FnMut(&Iterate<'_>) -> bool>,
) -> Option<RelaxationResult> {
    let eval = evaluate(instance, node, free, x, ax);
    let gap = eval.primal - eval.dual;
    let termination = if gap <= config.gap_tolerance {
        Some(Termination::Converged)
    } else if iteration >= config.max_iterations {
        Some(Termination::IterationLimit)
    } else {
        let iterate = Iterate {
            x,
            u: &eval.u,
            correlations: &eval.correlations,
            dual_value: eval.dual,
            iteration,
        };
        let stop = callback.as_mut().is_some_and(|cb| cb(&iterate));
        stop.then_some(Termination::Interrupted)
    };
    termination.map(|termination| RelaxationResult {
        x: x.clone(),
        u: eval.u,
        primal_value: eval.primal,
        dual_value: eval.dual,
        gap,
        termination,
        iterations: iteration,
    })
}

/// Solves the node relaxation with the algorithm chosen in `config`.
///
/// Every `screening_check_period` iterations the duality gap at the current
/// iterate is evaluated and `callback` (if any) is invoked; returning `true`
/// from the callback stops the solver with [`Termination::Interrupted`].
/// The warm start, if given, is projected onto the node's feasible set.
pub fn solve_relaxation(
    instance: &Instance,
    node: &Node,
    warm_start: Option<&DVector<f64>>,
    config: &RelaxationConfig,
    callback: Option<&mut dyn FnMut(&Iterate<'_>) -> bool>,
) -> Result<RelaxationResult> {
    check_node(instance, node)?;
    config.validate()?;
    let n = instance.cols();
    let big_m = instance.big_m();
    let statuses = node.statuses();
    let x = match warm_start {
        Some(w) => {
            instance.check_primal_len(w)?;
            DVector::from_fn(n, |i, _| match statuses[i] {
                Status::Zero => 0.0,
                _ => w[i].clamp(-big_m, big_m),
            })
        }
        None => DVector::zeros(n),
    };
    Ok(match config.algorithm {
        RelaxationAlgorithm::CoordinateDescent => coordinate_descent(instance, node, x, config, callback),
        RelaxationAlgorithm::ProximalGradient => proximal_gradient(instance, node, x, config, callback),
    })
}

/// Accelerated proximal gradient with adaptive momentum restart. One
/// iteration is one gradient step on all entries outside `S0`.
fn proximal_gradient(
    instance: &Instance,
    node: &Node,
    mut x: DVector<f64>,
    config: &RelaxationConfig,
    mut callback: Option<&mut dyn FnMut(&Iterate<'_>) -> bool>,
) -> RelaxationResult {
    let n = instance.cols();
    let big_m = instance.big_m();
    let step = 1.0 / instance.lipschitz();
    let shrink = step * instance.l1_weight();
    let statuses = node.statuses();
    let free: Vec<usize> = (0..n).filter(|&i| statuses[i] != Status::Zero).collect();

    let mut ax = instance.apply(&x);
    let mut z = x.clone();
    let mut az = ax.clone();
    let mut momentum = 1.0f64;
    let mut x_next = DVector::zeros(n);

    let mut iteration = 0usize;
    loop {
        if iteration % config.screening_check_period == 0 || iteration == config.max_iterations {
            if let Some(res) = checkpoint(instance, node, &free, &x, &ax, iteration, config, &mut callback) {
                return res;
            }
        }

        let r = instance.y() - &az;
        x_next.fill(0.0);
        for &i in &free {
            let grad = -instance.correlation(i, &r);
            x_next[i] = prox(statuses[i], z[i] - step * grad, shrink, big_m);
        }
        let ax_next = instance.apply(&x_next);

        // Restart momentum when the step opposes the last move.
        let mut restart_dot = 0.0;
        for &i in &free {
            restart_dot += (z[i] - x_next[i]) * (x_next[i] - x[i]);
        }
        if restart_dot > 0.0 {
            momentum = 1.0;
            z.copy_from(&x_next);
            az.copy_from(&ax_next);
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            for &i in &free {
                z[i] = x_next[i] + beta * (x_next[i] - x[i]);
            }
            az.copy_from(&ax_next);
            az.axpy(-beta, &ax, 1.0 + beta);
        }
        std::mem::swap(&mut x, &mut x_next);
        ax = ax_next;
        iteration += 1;
    }
}

/// Cyclic coordinate descent with exact per-coordinate minimization. One
/// iteration is one sweep: over every entry outside `S0` right after a
/// checkpoint, and over the current nonzeros in between. When the sign and
/// box pattern is unchanged between two checkpoints, a [`polish`] step jumps
/// toward the minimizer on that pattern.
fn coordinate_descent(
    instance: &Instance,
    node: &Node,
    mut x: DVector<f64>,
    config: &RelaxationConfig,
    mut callback: Option<&mut dyn FnMut(&Iterate<'_>) -> bool>,
) -> RelaxationResult {
    let n = instance.cols();
    let big_m = instance.big_m();
    let weight = instance.l1_weight();
    let sq_norms = instance.column_sq_norms();
    let statuses = node.statuses();
    let free: Vec<usize> = (0..n).filter(|&i| statuses[i] != Status::Zero).collect();

    let mut ax;
    let mut r = instance.residual(&x);
    let mut active: Vec<usize> = Vec::with_capacity(free.len());
    let mut last_pattern: Vec<i8> = Vec::new();
    let mut iteration = 0usize;
    loop {
        let at_checkpoint = iteration % config.screening_check_period == 0;
        if at_checkpoint || iteration == config.max_iterations {
            let pattern = sign_pattern(&x, &free, big_m);
            if iteration > 0 && pattern == last_pattern {
                polish(instance, statuses, &free, &mut x);
            }
            last_pattern = pattern;
            // Recompute the residual exactly so the certificate carries no drift.
            ax = instance.apply(&x);
            if let Some(res) = checkpoint(instance, node, &free, &x, &ax, iteration, config, &mut callback) {
                return res;
            }
            r = instance.y() - &ax;
        }

        let sweep: &[usize] = if at_checkpoint {
            &free
        } else {
            active.clear();
            active.extend(free.iter().copied().filter(|&i| x[i] != 0.0));
            &active
        };
        for &i in sweep {
            let c = sq_norms[i];
            let old = x[i];
            let col = instance.column(i);
            let new = if c > 0.0 {
                let rho = dot(col, r.as_slice()) + c * old;
                let v = match statuses[i] {
                    Status::Free => (rho.abs() - weight).max(0.0).copysign(rho),
                    _ => rho,
                };
                (v / c).clamp(-big_m, big_m)
            } else {
                0.0
            };
            if new != old {
                axpy(old - new, col, r.as_mut_slice());
                x[i] = new;
            }
        }
        iteration += 1;
    }
}

/// Per-entry state over `free`: 0 for zero, ±1 for interior sign, ±2 at the box.
fn sign_pattern(x: &DVector<f64>, free: &[usize], big_m: f64) -> Vec<i8> {
    free.iter()
        .map(|&i| {
            let v = x[i];
            let s = if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            };
            if v.abs() >= big_m {
                2 * s
            } else {
                s
            }
        })
        .collect()
}

/// Moves `x` toward the minimizer of the relaxation restricted to its current
/// pattern: zeros on `S̄` stay zero, entries at ±M stay there, and the rest
/// solve the normal equations with the ℓ1 term linearized by its sign. The
/// relaxation is a convex quadratic on that face, so the step is clipped to
/// the face and never increases the objective. Returns whether `x` moved.
fn polish(instance: &Instance, statuses: &[Status], free: &[usize], x: &mut DVector<f64>) -> bool {
    let big_m = instance.big_m();
    let weight = instance.l1_weight();
    let interior: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&i| x[i].abs() < big_m && (x[i] != 0.0 || statuses[i] == Status::One))
        .collect();
    if interior.is_empty() || interior.len() > instance.rows() {
        return false;
    }
    let mut target = instance.y().clone_owned();
    for &i in free {
        if x[i].abs() >= big_m {
            axpy(-x[i], instance.column(i), target.as_mut_slice());
        }
    }
    let p = interior.len();
    let mut rhs = DVector::from_fn(p, |k, _| {
        let i = interior[k];
        let c = dot(instance.column(i), target.as_slice());
        if statuses[i] == Status::Free {
            c - weight * x[i].signum()
        } else {
            c
        }
    });
    let gram = match instance.gram() {
        Some(full) => DMatrix::from_fn(p, p, |k, l| full[(interior[k], interior[l])]),
        None => {
            let mut g = DMatrix::zeros(p, p);
            for (k, &i) in interior.iter().enumerate() {
                for (l, &j) in interior.iter().enumerate().take(k + 1) {
                    let v = dot(instance.column(i), instance.column(j));
                    g[(k, l)] = v;
                    g[(l, k)] = v;
                }
            }
            g
        }
    };
    let Some(chol) = gram.cholesky() else {
        return false;
    };
    chol.solve_mut(&mut rhs);
    let z = rhs;
    if z.iter().any(|v| !v.is_finite()) {
        return false;
    }

    let mut t = 1.0f64;
    for (k, &i) in interior.iter().enumerate() {
        let (from, to) = (x[i], z[k]);
        let d = to - from;
        if d == 0.0 {
            continue;
        }
        if statuses[i] == Status::Free && to * from <= 0.0 {
            t = t.min(from / (from - to));
        }
        if to.abs() > big_m {
            t = t.min((big_m.copysign(d) - from) / d);
        }
    }
    if !(t > 0.0) {
        return false;
    }
    for (k, &i) in interior.iter().enumerate() {
        let (from, to) = (x[i], z[k]);
        let mut v = from + t * (to - from);
        if statuses[i] == Status::Free && (v * from <= 0.0) {
            v = 0.0;
        }
        x[i] = v.clamp(-big_m, big_m);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn scalar(big_m: f64) -> Instance {
        Instance::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 2.0),
            1.0,
            big_m,
        )
        .unwrap()
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn relaxed_primal_examples() {
        let inst = Instance::new(
            DMatrix::identity(3, 3),
            dv(&[1.0, 2.0, 3.0]),
            0.7,
            5.0,
        )
        .unwrap();
        let half_y2 = 0.5 * 14.0;
        let root = Node::root(3);
        assert_eq!(relaxed_primal(&inst, &root, &DVector::zeros(3)).unwrap(), half_y2);
        let node = Node::from_sets(3, &[], &[0, 1]).unwrap();
        let v = relaxed_primal(&inst, &node, &DVector::zeros(3)).unwrap();
        assert!((v - (half_y2 + 1.4)).abs() < 1e-15);

        let s = scalar(2.0);
        let v = relaxed_primal(&s, &Node::root(1), &dv(&[1.5])).unwrap();
        assert!((v - 0.875).abs() < 1e-15);
    }

    #[test]
    fn relaxed_primal_rejects_infeasible() {
        let s = scalar(2.0);
        let node = Node::root(1).child_zero(0).unwrap();
        assert!(relaxed_primal(&s, &node, &dv(&[0.1])).is_err());
        assert!(relaxed_primal(&s, &Node::root(1), &dv(&[2.1])).is_err());
    }

    #[test]
    fn dual_objective_at_zero() {
        let inst = Instance::new(
            DMatrix::identity(3, 3),
            dv(&[1.0, 2.0, 3.0]),
            0.7,
            5.0,
        )
        .unwrap();
        let u = DVector::zeros(3);
        assert_eq!(dual_objective(&inst, &Node::root(3), &u).unwrap(), 0.0);
        let node = Node::from_sets(3, &[2], &[]).unwrap();
        assert_eq!(dual_objective(&inst, &node, &u).unwrap(), 0.0);
        let node = Node::from_sets(3, &[], &[0, 1]).unwrap();
        assert!((dual_objective(&inst, &node, &u).unwrap() - 1.4).abs() < 1e-15);
    }

    // The scalar instance A=[1], y=[2], λ=1, M=2: a grid maximization of D
    // over u ∈ [−5, 5] (step 1e−4) and a grid minimization of the relaxed
    // primal over x ∈ [−2, 2] (step 1e−5) both give 0.875, attained at
    // u = 0.5 and x = 1.5. This pins the sign convention of D.
    #[test]
    fn scalar_strong_duality_grid() {
        let s = scalar(2.0);
        let root = Node::root(1);
        let d = dual_objective(&s, &root, &dv(&[0.5])).unwrap();
        assert!((d - 0.875).abs() < 1e-15, "{d}");

        let best_dual = (0..=100_000)
            .map(|k| -5.0 + 1e-4 * k as f64)
            .map(|u| dual_objective(&s, &root, &dv(&[u])).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let best_primal = (0..=400_000)
            .map(|k| -2.0 + 1e-5 * k as f64)
            .map(|x| relaxed_primal(&s, &root, &dv(&[x])).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((best_dual - 0.875).abs() < 1e-7);
        assert!((best_primal - 0.875).abs() < 1e-9);
    }

    #[test]
    fn dual_from_primal_examples() {
        let s = scalar(2.0);
        assert_eq!(dual_from_primal(&s, &dv(&[0.0])).unwrap(), dv(&[2.0]));
        assert_eq!(dual_from_primal(&s, &dv(&[1.5])).unwrap(), dv(&[0.5]));
        let id = Instance::new(DMatrix::identity(2, 2), dv(&[3.0, -1.0]), 1.0, 5.0).unwrap();
        assert_eq!(dual_from_primal(&id, &dv(&[3.0, -1.0])).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn solve_fully_constrained_node() {
        let inst = Instance::new(DMatrix::identity(2, 2), dv(&[3.0, 1.0]), 1.0, 5.0).unwrap();
        let node = Node::from_sets(2, &[0, 1], &[]).unwrap();
        let res = solve_relaxation(&inst, &node, None, &RelaxationConfig::default(), None).unwrap();
        assert!(res.converged());
        assert_eq!(res.x, DVector::zeros(2));
        assert_eq!(res.primal_value, 5.0);
        assert_eq!(res.gap, 0.0);
    }

    #[test]
    fn solve_scalar_instances() {
        // Grid search over x ∈ [−2, 2] gives x* = 1.5 for M = 2, and over
        // x ∈ [−1, 1] gives x* = 1.0 (value 1.5) for M = 1.
        for (big_m, x_star, value) in [(2.0, 1.5, 0.875), (1.0, 1.0, 1.5)] {
            let s = scalar(big_m);
            let res = solve_relaxation(&s, &Node::root(1), None, &RelaxationConfig::default(), None).unwrap();
            assert!(res.converged());
            assert!((res.x[0] - x_star).abs() < 1e-6, "{}", res.x[0]);
            assert!((res.primal_value - value).abs() < 1e-8);
            assert!(res.gap <= 1e-8 && res.gap >= -1e-9);
        }
    }

    #[test]
    fn warm_start_is_projected() {
        let inst = Instance::new(DMatrix::identity(2, 2), dv(&[3.0, 1.0]), 0.1, 2.0).unwrap();
        let node = Node::from_sets(2, &[1], &[]).unwrap();
        let res = solve_relaxation(&inst, &node, Some(&dv(&[50.0, 50.0])), &RelaxationConfig::default(), None).unwrap();
        assert_eq!(res.x[1], 0.0);
        assert!((res.x[0] - 2.0).abs() < 1e-9);
    }

    fn random_instance(m: usize, n: usize, lambda: f64, big_m: f64, seed: u64) -> Instance {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        Instance::new(a, y, lambda, big_m).unwrap()
    }

    const ALGORITHMS: [RelaxationAlgorithm; 2] = [
        RelaxationAlgorithm::CoordinateDescent,
        RelaxationAlgorithm::ProximalGradient,
    ];

    #[test]
    fn callback_interrupts() {
        let inst = random_instance(40, 80, 0.05, 10.0, 3);
        for algorithm in ALGORITHMS {
            let config = RelaxationConfig {
                gap_tolerance: 1e-14,
                algorithm,
                ..RelaxationConfig::default()
            };
            let mut calls = 0;
            let mut cb = |it: &Iterate<'_>| {
                calls += 1;
                it.iteration >= 10
            };
            let res = solve_relaxation(&inst, &Node::root(80), None, &config, Some(&mut cb)).unwrap();
            assert_eq!(res.termination, Termination::Interrupted, "{algorithm:?}");
            assert_eq!(res.iterations, 10);
            assert_eq!(calls, 3);
            assert!((res.u.clone() - inst.residual(&res.x)).amax() == 0.0);
        }
    }

    #[test]
    fn iteration_limit_reported() {
        let inst = random_instance(40, 80, 0.05, 10.0, 4);
        for algorithm in ALGORITHMS {
            let config = RelaxationConfig {
                gap_tolerance: 1e-14,
                max_iterations: 3,
                screening_check_period: 5,
                algorithm,
            };
            let res = solve_relaxation(&inst, &Node::root(80), None, &config, None).unwrap();
            assert_eq!(res.termination, Termination::IterationLimit);
            assert_eq!(res.iterations, 3);
            assert!(res.dual_value <= res.primal_value);
        }
    }

    #[test]
    fn algorithms_agree_on_random_nodes() {
        for seed in 0..20u64 {
            let (m, n) = (10 + (seed as usize % 7), 6 + (seed as usize % 11));
            let inst = random_instance(m, n, 0.3, 1.5, 100 + seed);
            let zeros: Vec<usize> = (0..n).filter(|i| (i + seed as usize) % 5 == 0).collect();
            let ones: Vec<usize> = (0..n).filter(|i| (i + seed as usize) % 5 == 1).collect();
            let node = Node::from_sets(n, &zeros, &ones).unwrap();
            let results: Vec<RelaxationResult> = ALGORITHMS
                .iter()
                .map(|&algorithm| {
                    let config = RelaxationConfig {
                        algorithm,
                        ..RelaxationConfig::default()
                    };
                    solve_relaxation(&inst, &node, None, &config, None).unwrap()
                })
                .collect();
            for r in &results {
                assert!(r.converged());
                assert!(r.gap <= 1e-8);
                assert!(r.x.amax() <= inst.big_m());
                for &i in &zeros {
                    assert_eq!(r.x[i], 0.0);
                }
                let check = relaxed_primal(&inst, &node, &r.x).unwrap();
                assert!((check - r.primal_value).abs() < 1e-12);
            }
            assert!((results[0].primal_value - results[1].primal_value).abs() < 2e-8);
        }
    }

    #[test]
    fn polish_never_increases_the_objective() {
        for seed in 0..30u64 {
            let inst = random_instance(12, 20, 0.2, 1.0, 200 + seed);
            let node = Node::from_sets(20, &[0, 1], &[2, 3]).unwrap();
            let free: Vec<usize> = (2..20).collect();
            let mut x = DVector::from_fn(20, |i, _| if i < 2 { 0.0 } else { ((i * 7 + seed as usize) % 5) as f64 * 0.3 - 0.6 });
            let before = relaxed_primal(&inst, &node, &x).unwrap();
            polish(&inst, node.statuses(), &free, &mut x);
            let after = relaxed_primal(&inst, &node, &x).unwrap();
            assert!(after <= before + 1e-12, "{before} -> {after}");
        }
    }

    #[test]
    fn penalty_conjugate_matches_scalar_grid() {
        let (lambda, big_m) = (0.8, 2.0);
        let step = big_m / 2000.0;
        for v in [-3.0, -0.41, -0.2, 0.0, 0.25, 0.4, 1.7] {
            for pen in [true, false] {
                let closed = penalty_conjugate(&[v], &[pen], lambda, big_m).unwrap();
                let grid = (0..=4000)
                    .map(|k| -big_m + step * k as f64)
                    .map(|x| v * x - if pen { lambda / big_m * x.abs() } else { 0.0 })
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((closed - grid).abs() <= 2.0 * big_m * step, "v={v} pen={pen}: {closed} vs {grid}");
            }
        }
        assert!(penalty_conjugate(&[1.0], &[], 1.0, 1.0).is_err());
    }
}
