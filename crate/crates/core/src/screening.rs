//! Node-screening tests.
//!
//! For a node `ν`, an index `ℓ ∈ S̄`, any dual point `u` and an upper bound
//! `p̄` on the optimal value:
//!
//! - `D(u) + π⁰_ℓ(u) > p̄` proves the `x_ℓ = 0` child holds no minimizer, so
//!   `ℓ` can be moved to `S1`;
//! - `D(u) + π¹_ℓ(u) > p̄` proves the `x_ℓ ≠ 0` child holds no minimizer, so
//!   `ℓ` can be moved to `S0`.
//!
//! Since pivot values are nonnegative, a test that passes at `ν` passes at
//! every descendant still containing `ℓ` in `S̄`, which is what makes it
//! valid to apply all passing tests in one step.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{Instance, Node, PivotValues};
use crate::relaxation::dual_value_with;

/// Margin added to the upper bound before a test counts as passed.
pub const SCREENING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScreeningResult {
    /// Indices whose `x ≠ 0` branch is discarded (moved to `S0`).
    pub fix_to_zero: Vec<usize>,
    /// Indices whose `x = 0` branch is discarded (moved to `S1`).
    pub fix_to_one: Vec<usize>,
    /// Some index passed both tests: the whole node can be discarded.
    pub prune_node: bool,
}

impl ScreeningResult {
    pub fn is_empty(&self) -> bool {
        self.fix_to_zero.is_empty() && self.fix_to_one.is_empty() && !self.prune_node
    }

    pub fn fixed_count(&self) -> usize {
        self.fix_to_zero.len() + self.fix_to_one.len()
    }
}

/// Runs both tests on every undecided index of `node`.
pub fn node_screen(
    instance: &Instance,
    node: &Node,
    u: &DVector<f64>,
    upper_bound: f64,
) -> Result<ScreeningResult> {
    if node.len() != instance.cols() {
        return Err(Error::DimensionMismatch(format!(
            "node has {} indices, instance has n = {}",
            node.len(),
            instance.cols()
        )));
    }
    instance.check_dual_len(u)?;
    let correlations = instance.correlations(u);
    Ok(screen_with_correlations(instance, node, u, &correlations, upper_bound))
}

/// [`node_screen`] with `Aᵀu` already available; O(1) per index on top of
/// one dual evaluation.
pub fn screen_with_correlations(
    instance: &Instance,
    node: &Node,
    u: &DVector<f64>,
    correlations: &DVector<f64>,
    upper_bound: f64,
) -> ScreeningResult {
    let mut result = ScreeningResult::default();
    if !upper_bound.is_finite() {
        return result;
    }
    let base = dual_value_with(instance, node, u, correlations);
    let threshold = upper_bound + SCREENING_SLACK;
    let (lambda, big_m) = (instance.lambda(), instance.big_m());
    for l in node.s_bar() {
        let pivot = PivotValues::from_correlation(correlations[l], lambda, big_m);
        let zero_branch_dead = base + pivot.at_zero > threshold;
        let one_branch_dead = base + pivot.at_one > threshold;
        if zero_branch_dead {
            result.fix_to_one.push(l);
        }
        if one_branch_dead {
            result.fix_to_zero.push(l);
        }
        if zero_branch_dead && one_branch_dead {
            result.prune_node = true;
        }
    }
    result
}

/// Moves every fixed index of `result` out of `S̄` in one step.
pub fn apply_screening(node: &Node, result: &ScreeningResult) -> Result<Node> {
    if result.prune_node {
        return Err(Error::NodePruned);
    }
    node.with_fixed(&result.fix_to_zero, &result.fix_to_one)
}
