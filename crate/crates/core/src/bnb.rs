//! Branch-and-bound engine with optional node screening.
//!
//! Each node is bounded by the dual value of its relaxation, which is a
//! certified lower bound whether or not the relaxation solver converged.
//! A feasible point is built at every processed node to tighten the
//! incumbent. With screening enabled, the tests of [`crate::screening`] run
//! when a node is popped (with the parent's dual point) and periodically
//! while its relaxation is being solved; any fixed index restarts the
//! relaxation on the restricted node, and a double pass discards the node.
//!
//! Node selection and the branching rule are not prescribed by the method
//! itself: the defaults here are depth-first search (nonzero branch first)
//! and branching on the undecided entry of largest relaxed magnitude.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::rc::Rc;
use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{Instance, Node, Status};
use crate::relaxation::{solve_relaxation, Iterate, RelaxationConfig, Termination};
use crate::screening::{apply_screening, node_screen, screen_with_correlations, ScreeningResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exploration {
    /// Depth-first, `x_l ≠ 0` child explored before `x_l = 0`.
    DepthFirst,
    /// Lowest parent bound first.
    BestBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub exploration: Exploration,
    pub screening_enabled: bool,
    pub time_limit_seconds: f64,
    /// Absolute optimality tolerance on objective values.
    pub gap_tolerance: f64,
    pub relaxation: RelaxationConfig,
    /// Relaxed entries above this magnitude enter the heuristic support.
    /// `None` means `1e-6 · M`.
    pub support_threshold: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            exploration: Exploration::DepthFirst,
            screening_enabled: true,
            time_limit_seconds: 1000.0,
            gap_tolerance: 1e-6,
            relaxation: RelaxationConfig::default(),
            support_threshold: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit_seconds > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "time limit must be positive, got {}",
                self.time_limit_seconds
            )));
        }
        if !(self.gap_tolerance > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "gap tolerance must be positive, got {}",
                self.gap_tolerance
            )));
        }
        if let Some(t) = self.support_threshold {
            if !(t > 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "support threshold must be positive, got {t}"
                )));
            }
        }
        self.relaxation.validate()
    }

    fn threshold_for(&self, instance: &Instance) -> f64 {
        self.support_threshold.unwrap_or(1e-6 * instance.big_m())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// False when the time limit stopped the search.
    pub optimal: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Relaxations solved to completion.
    pub nodes_processed: usize,
    /// Subtrees discarded by screening: one per fixed index plus one per
    /// node pruned outright.
    pub nodes_screened_out: usize,
    pub variables_fixed_by_screening: usize,
    pub wall_time_seconds: f64,
    pub timed_out: bool,
    pub relaxation_iterations: usize,
    pub incumbent_updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOutcome {
    /// Discarded by a screening double pass before its bound was known.
    ScreenedOut,
    /// Bound not below the incumbent.
    Pruned,
    /// No undecided index left.
    Leaf,
    /// Split on the given index.
    Branched(usize),
    /// Time limit hit while processing.
    Abandoned,
}

/// One line of the per-node trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTrace {
    pub id: usize,
    pub depth: usize,
    /// `|S0|` and `|S1|` after screening.
    pub s_zero: usize,
    pub s_one: usize,
    /// Certified lower bound used for the decision (`-inf` if none).
    pub dual_bound: f64,
    /// Incumbent value once the node was handled.
    pub incumbent: f64,
    pub fixed_to_zero: usize,
    pub fixed_to_one: usize,
    pub outcome: NodeOutcome,
}

impl fmt::Display for NodeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node {} depth {} |S0|={} |S1|={} bound={:.10e} incumbent={:.10e} fixed0={} fixed1={} ",
            self.id,
            self.depth,
            self.s_zero,
            self.s_one,
            self.dual_bound,
            self.incumbent,
            self.fixed_to_zero,
            self.fixed_to_one
        )?;
        match self.outcome {
            NodeOutcome::ScreenedOut => write!(f, "screened-out"),
            NodeOutcome::Pruned => write!(f, "pruned"),
            NodeOutcome::Leaf => write!(f, "leaf"),
            NodeOutcome::Branched(l) => write!(f, "branch x{}", l + 1),
            NodeOutcome::Abandoned => write!(f, "abandoned"),
        }
    }
}

/// Picks `argmax_{i∈S̄} |x_relax[i]|` (smallest index on ties) and returns
/// it with the `x_l = 0` and `x_l ≠ 0` children.
pub fn branch(node: &Node, x_relax: &DVector<f64>) -> Result<(usize, Node, Node)> {
    if x_relax.len() != node.len() {
        return Err(Error::DimensionMismatch(format!(
            "relaxed point has length {}, node has {} indices",
            x_relax.len(),
            node.len()
        )));
    }
    let mut chosen: Option<usize> = None;
    for i in node.s_bar() {
        if chosen.is_none_or(|c| x_relax[i].abs() > x_relax[c].abs()) {
            chosen = Some(i);
        }
    }
    let l = chosen.ok_or(Error::NothingToBranch)?;
    Ok((l, node.child_zero(l)?, node.child_one(l)?))
}

/// Box-constrained least squares restricted to `support`, solved through the
/// normal equations when that solution lies in the box, and otherwise by the
/// relaxation solver on the node `(complement, support, ∅)`.
fn restricted_least_squares(instance: &Instance, support: &[usize]) -> Result<DVector<f64>> {
    let n = instance.cols();
    let mut x = DVector::zeros(n);
    if support.is_empty() {
        return Ok(x);
    }
    let big_m = instance.big_m();
    let a_t = instance.a().select_columns(support);
    let gram = a_t.tr_mul(&a_t);
    let rhs = a_t.tr_mul(instance.y());
    if let Some(chol) = gram.cholesky() {
        let sol = chol.solve(&rhs);
        if sol.iter().all(|v| v.is_finite() && v.abs() <= big_m) {
            for (k, &i) in support.iter().enumerate() {
                x[i] = sol[k];
            }
            return Ok(x);
        }
    }
    let complement: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
    let node = Node::from_sets(n, &complement, support)?;
    let config = RelaxationConfig {
        gap_tolerance: 1e-12,
        max_iterations: 100_000,
        screening_check_period: 10,
        ..RelaxationConfig::default()
    };
    Ok(solve_relaxation(instance, &node, None, &config, None)?.x)
}

/// Builds a feasible point of the node from its relaxed solution: keep `S1`
/// and the undecided entries above `support_threshold`, then refit by
/// box-constrained least squares. A second candidate keeps only the
/// undecided entries above the ℓ0 hard-threshold level `√(2λ)/‖a_i‖`; the
/// better of the two is returned with its objective.
pub fn upper_bound_heuristic(
    instance: &Instance,
    node: &Node,
    x_relax: &DVector<f64>,
    support_threshold: f64,
) -> Result<(DVector<f64>, f64)> {
    let found = improve_upper_bound(instance, node, x_relax, support_threshold, f64::INFINITY)?;
    Ok(found.expect("an infinite incumbent is always improved"))
}

/// Candidate supports of [`upper_bound_heuristic`]: the rounded one first,
/// then the hard-thresholded one when it differs.
fn heuristic_supports(
    instance: &Instance,
    node: &Node,
    x_relax: &DVector<f64>,
    support_threshold: f64,
) -> Vec<Vec<usize>> {
    let hard_level = (2.0 * instance.lambda()).sqrt();
    let norms = instance.column_sq_norms();
    let pick = |keep: &dyn Fn(usize) -> bool| -> Vec<usize> {
        node.statuses()
            .iter()
            .enumerate()
            .filter(|(i, s)| match s {
                Status::One => true,
                Status::Free => keep(*i),
                Status::Zero => false,
            })
            .map(|(i, _)| i)
            .collect()
    };
    let rounded = pick(&|i| x_relax[i].abs() > support_threshold);
    let hard = pick(&|i| x_relax[i].abs() * norms[i].sqrt() > hard_level);
    if hard == rounded {
        vec![rounded]
    } else {
        vec![rounded, hard]
    }
}

/// Runs the heuristic but returns only a point strictly better than
/// `incumbent`. Supports with `λ|T| ≥ incumbent` cannot win and are not refit.
fn improve_upper_bound(
    instance: &Instance,
    node: &Node,
    x_relax: &DVector<f64>,
    support_threshold: f64,
    incumbent: f64,
) -> Result<Option<(DVector<f64>, f64)>> {
    instance.check_primal_len(x_relax)?;
    let mut best: Option<(DVector<f64>, f64)> = None;
    for support in heuristic_supports(instance, node, x_relax, support_threshold) {
        let bar = best.as_ref().map_or(incumbent, |b| b.1);
        if instance.lambda() * support.len() as f64 >= bar {
            continue;
        }
        let x = restricted_least_squares(instance, &support)?;
        let value = instance.full_objective(&x)?;
        if value < bar {
            best = Some((x, value));
        }
    }
    Ok(best)
}

fn record_fixes(stats: &mut SolveStats, r: &ScreeningResult, trace: &mut NodeTrace) {
    stats.variables_fixed_by_screening += r.fixed_count();
    stats.nodes_screened_out += r.fixed_count();
    trace.fixed_to_zero += r.fix_to_zero.len();
    trace.fixed_to_one += r.fix_to_one.len();
}

struct Pending {
    id: usize,
    depth: usize,
    node: Node,
    warm: DVector<f64>,
    parent_u: Option<Rc<DVector<f64>>>,
    parent_bound: f64,
}

struct ByBound(Pending);

impl PartialEq for ByBound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ByBound {}

impl PartialOrd for ByBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByBound {
    // max-heap: lowest bound, then lowest id, comes out first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .parent_bound
            .total_cmp(&self.0.parent_bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

enum Frontier {
    Stack(Vec<Pending>),
    Heap(BinaryHeap<ByBound>),
}

impl Frontier {
    fn push(&mut self, p: Pending) {
        match self {
            Frontier::Stack(s) => s.push(p),
            Frontier::Heap(h) => h.push(ByBound(p)),
        }
    }

    fn pop(&mut self) -> Option<Pending> {
        match self {
            Frontier::Stack(s) => s.pop(),
            Frontier::Heap(h) => h.pop().map(|b| b.0),
        }
    }
}

enum Bounding {
    Done(crate::relaxation::RelaxationResult),
    ScreenedOut,
    TimedOut,
}

/// Solves the problem to global optimality (within `gap_tolerance`) unless
/// the time limit is hit.
pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<(Solution, SolveStats)> {
    solve_with_trace(instance, config, &mut |_| {})
}

/// [`solve`], reporting every popped node to `observer`.
pub fn solve_with_trace(
    instance: &Instance,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&NodeTrace),
) -> Result<(Solution, SolveStats)> {
    config.validate()?;
    let start = Instant::now();
    let time_limit = config.time_limit_seconds;
    let n = instance.cols();
    let tol = config.gap_tolerance;
    let threshold = config.threshold_for(instance);
    let mut stats = SolveStats::default();

    let mut best_x = DVector::zeros(n);
    let mut best_value = instance.full_objective(&best_x)?;

    let mut frontier = match config.exploration {
        Exploration::DepthFirst => Frontier::Stack(Vec::new()),
        Exploration::BestBound => Frontier::Heap(BinaryHeap::new()),
    };
    frontier.push(Pending {
        id: 0,
        depth: 0,
        node: Node::root(n),
        warm: DVector::zeros(n),
        parent_u: None,
        parent_bound: f64::NEG_INFINITY,
    });
    let mut next_id = 1;

    while let Some(pending) = frontier.pop() {
        if start.elapsed().as_secs_f64() > time_limit {
            stats.timed_out = true;
            break;
        }
        let Pending {
            id,
            depth,
            mut node,
            mut warm,
            parent_u,
            parent_bound,
        } = pending;
        let mut trace = NodeTrace {
            id,
            depth,
            s_zero: 0,
            s_one: 0,
            dual_bound: parent_bound,
            incumbent: best_value,
            fixed_to_zero: 0,
            fixed_to_one: 0,
            outcome: NodeOutcome::Pruned,
        };
        let mut emit = |trace: &mut NodeTrace, node: &Node, outcome: NodeOutcome, incumbent: f64| {
            trace.s_zero = node.count(Status::Zero);
            trace.s_one = node.count(Status::One);
            trace.outcome = outcome;
            trace.incumbent = incumbent;
            observer(trace);
        };

        if parent_bound >= best_value - tol {
            emit(&mut trace, &node, NodeOutcome::Pruned, best_value);
            continue;
        }

        if config.screening_enabled {
            if let Some(u) = parent_u.as_deref() {
                let r = node_screen(instance, &node, u, best_value)?;
                if r.prune_node {
                    stats.nodes_screened_out += 1;
                    emit(&mut trace, &node, NodeOutcome::ScreenedOut, best_value);
                    continue;
                }
                if !r.is_empty() {
                    record_fixes(&mut stats, &r, &mut trace);
                    node = apply_screening(&node, &r)?;
                }
            }
        }

        let bounding = loop {
            let mut found: Option<ScreeningResult> = None;
            let mut out_of_time = false;
            let mut dominated = false;
            let res = {
                let node_ref = &node;
                let incumbent = best_value;
                let screening = config.screening_enabled;
                let mut callback = |it: &Iterate<'_>| {
                    if start.elapsed().as_secs_f64() > time_limit {
                        out_of_time = true;
                        return true;
                    }
                    // Any dual point certifies a lower bound, so a converging
                    // relaxation can stop as soon as it proves the node useless.
                    if it.dual_value >= incumbent - tol {
                        dominated = true;
                        return true;
                    }
                    if !screening {
                        return false;
                    }
                    let r = screen_with_correlations(instance, node_ref, it.u, it.correlations, incumbent);
                    if r.is_empty() {
                        false
                    } else {
                        found = Some(r);
                        true
                    }
                };
                solve_relaxation(instance, &node, Some(&warm), &config.relaxation, Some(&mut callback))?
            };
            stats.relaxation_iterations += res.iterations;
            if out_of_time {
                break Bounding::TimedOut;
            }
            if dominated {
                break Bounding::Done(res);
            }
            match found {
                Some(r) if r.prune_node => {
                    stats.nodes_screened_out += 1;
                    break Bounding::ScreenedOut;
                }
                Some(r) => {
                    record_fixes(&mut stats, &r, &mut trace);
                    node = apply_screening(&node, &r)?;
                    warm = res.x;
                }
                None => {
                    debug_assert!(res.termination != Termination::Interrupted);
                    break Bounding::Done(res);
                }
            }
        };

        let res = match bounding {
            Bounding::Done(res) => res,
            Bounding::ScreenedOut => {
                emit(&mut trace, &node, NodeOutcome::ScreenedOut, best_value);
                continue;
            }
            Bounding::TimedOut => {
                stats.timed_out = true;
                emit(&mut trace, &node, NodeOutcome::Abandoned, best_value);
                break;
            }
        };
        stats.nodes_processed += 1;
        let bound = res.dual_value;
        trace.dual_bound = bound;
        if bound >= best_value - tol {
            emit(&mut trace, &node, NodeOutcome::Pruned, best_value);
            continue;
        }

        if let Some((x_feasible, value)) = improve_upper_bound(instance, &node, &res.x, threshold, best_value)? {
            best_value = value;
            best_x = x_feasible;
            stats.incumbent_updates += 1;
        }
        if bound >= best_value - tol {
            emit(&mut trace, &node, NodeOutcome::Pruned, best_value);
            continue;
        }
        if node.is_leaf() {
            emit(&mut trace, &node, NodeOutcome::Leaf, best_value);
            continue;
        }

        let (l, child_zero, child_one) = branch(&node, &res.x)?;
        emit(&mut trace, &node, NodeOutcome::Branched(l), best_value);
        let u = Rc::new(res.u);
        let mut warm_zero = res.x.clone();
        warm_zero[l] = 0.0;
        frontier.push(Pending {
            id: next_id,
            depth: depth + 1,
            node: child_zero,
            warm: warm_zero,
            parent_u: Some(Rc::clone(&u)),
            parent_bound: bound,
        });
        frontier.push(Pending {
            id: next_id + 1,
            depth: depth + 1,
            node: child_one,
            warm: res.x,
            parent_u: Some(u),
            parent_bound: bound,
        });
        next_id += 2;
    }

    stats.wall_time_seconds = start.elapsed().as_secs_f64();
    let solution = Solution {
        x: best_x,
        objective: best_value,
        optimal: !stats.timed_out,
    };
    Ok((solution, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn branch_examples() {
        let root = Node::root(3);
        let (l, c0, c1) = branch(&root, &dv(&[0.0, 5.0, -7.0])).unwrap();
        assert_eq!(l, 2);
        assert_eq!(c0, root.child_zero(2).unwrap());
        assert_eq!(c1, root.child_one(2).unwrap());
        assert_eq!(branch(&Node::root(2), &dv(&[2.0, 2.0])).unwrap().0, 0);
        let single = Node::from_sets(3, &[0], &[2]).unwrap();
        assert_eq!(branch(&single, &dv(&[9.0, 0.0, 9.0])).unwrap().0, 1);
        let leaf = Node::from_sets(2, &[0], &[1]).unwrap();
        assert!(matches!(branch(&leaf, &dv(&[1.0, 1.0])), Err(Error::NothingToBranch)));
    }

    #[test]
    fn heuristic_examples() {
        let inst = Instance::new(DMatrix::identity(2, 2), dv(&[3.0, 0.0]), 1.0, 10.0).unwrap();
        let (x, v) = upper_bound_heuristic(&inst, &Node::root(2), &DVector::zeros(2), 1e-5).unwrap();
        assert_eq!(x, DVector::zeros(2));
        assert_eq!(v, 4.5);
        let (x, v) = upper_bound_heuristic(&inst, &Node::root(2), &dv(&[2.5, 0.0]), 0.1).unwrap();
        assert!((x - dv(&[3.0, 0.0])).amax() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heuristic_respects_box_and_node() {
        let inst = Instance::new(DMatrix::identity(3, 3), dv(&[30.0, 2.0, 1.0]), 1.0, 10.0).unwrap();
        let node = Node::from_sets(3, &[1], &[2]).unwrap();
        let (x, v) = upper_bound_heuristic(&inst, &node, &dv(&[5.0, 5.0, 0.0]), 0.1).unwrap();
        assert!((x[0] - 10.0).abs() < 1e-6);
        assert_eq!(x[1], 0.0);
        assert!((x[2] - 1.0).abs() < 1e-6);
        assert!((v - (0.5 * 400.0 + 0.5 * 4.0 + 2.0)).abs() < 1e-5);
    }

    #[test]
    fn zero_observation_solves_at_root() {
        let inst = Instance::new(DMatrix::identity(3, 3), DVector::zeros(3), 1.0, 1.0).unwrap();
        let (sol, stats) = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.x, DVector::zeros(3));
        assert!(sol.optimal);
        assert_eq!(stats.nodes_processed, 1);
    }

    #[test]
    fn identity_example() {
        // Exhaustive check over the 8 supports gives p* = 1.005 at x = (10, 0, 0).
        let inst = Instance::new(DMatrix::identity(3, 3), dv(&[10.0, 0.1, 0.0]), 1.0, 20.0).unwrap();
        for screening_enabled in [false, true] {
            for exploration in [Exploration::DepthFirst, Exploration::BestBound] {
                let config = SolverConfig {
                    screening_enabled,
                    exploration,
                    ..SolverConfig::default()
                };
                let (sol, _) = solve(&inst, &config).unwrap();
                assert!((sol.objective - 1.005).abs() < 1e-9, "{}", sol.objective);
                assert!((sol.x.clone() - dv(&[10.0, 0.0, 0.0])).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let inst = Instance::new(DMatrix::identity(2, 2), dv(&[1.0, 1.0]), 1.0, 2.0).unwrap();
        let config = SolverConfig {
            time_limit_seconds: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve(&inst, &config).is_err());
    }
}
