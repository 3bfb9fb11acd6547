//! Discounted dynamic programming on a lattice for order-up-to models.
//!
//! The models handled here have one-step cost `K·1{a>0} + c̄·a + g(x+a)` and
//! transitions `x' = x + a - D` with `D ≥ 0` drawn from a lattice-aligned pmf.
//! Every Bellman sweep is then a minimization of the order-up-to objective
//! `W(y) = c̄y + g(y) + α·E v(y - D)`:
//!
//! ```text
//! (T v)(x) = min{ W(x), K + min_{y > x} W(y) } - c̄x
//! ```
//!
//! which costs `O(n·|D|)` per sweep instead of `O(n²·|D|)`.
//!
//! Levels below the lattice are represented exactly by a linear tail. Far
//! enough to the left the minimizing action no longer changes, so `T v` is
//! affine there; the sweep checks that the branch chosen at `x_min` stays
//! optimal on the whole ray and reports truncation underflow otherwise.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{BelowGrid, Lattice, LinearTail, TabularPolicy, ValueTable};

const PAR_MIN_POINTS: usize = 4096;

pub trait OrderingModel: Sync {
    fn lattice(&self) -> &Lattice;

    /// Demand distribution as `(grid steps, probability)` pairs.
    fn demand_steps(&self) -> &[(usize, f64)];

    fn fixed_cost(&self) -> f64;

    fn unit_cost(&self) -> f64;

    /// `E[h(y - D)]` at lattice index `j`.
    fn expected_holding(&self, j: usize) -> f64;

    /// `E[h(y - D)]` is affine for `y ≤ x_min`; this is that affine piece.
    fn expected_holding_tail(&self) -> LinearTail;

    fn mean_demand(&self) -> f64 {
        let step = self.lattice().step();
        self.demand_steps()
            .iter()
            .map(|&(d, p)| p * d as f64 * step)
            .sum()
    }

    /// One-step cost at lattice index `i` when ordering `a` grid steps.
    fn cost(&self, i: usize, a: usize) -> f64 {
        let fixed = if a > 0 { self.fixed_cost() } else { 0.0 };
        fixed + self.unit_cost() * a as f64 * self.lattice().step() + self.expected_holding(i + a)
    }
}

/// `E v(y_j - D)`, summed in demand order.
pub fn expect_after_demand<M: OrderingModel + ?Sized>(
    model: &M,
    v: &ValueTable,
    j: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    for &(d, p) in model.demand_steps() {
        acc += p * v.at_offset(j as isize - d as isize)?;
    }
    Ok(acc)
}

/// Linear piece of `E v(x - D)` below the lattice, given v's tail.
fn expect_tail<M: OrderingModel + ?Sized>(model: &M, tail: LinearTail) -> LinearTail {
    LinearTail {
        intercept: tail.intercept - tail.slope * model.mean_demand(),
        slope: tail.slope,
    }
}

/// Order-up-to objective `W(y_j) = c̄y_j + h̃(y_j) + α·E v(y_j - D)` on the lattice.
pub fn order_up_to_objective<M: OrderingModel + ?Sized>(
    model: &M,
    v: &ValueTable,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_lattice(model, v)?;
    let lattice = *model.lattice();
    let point = |j: usize| -> Result<f64> {
        let base = model.unit_cost() * lattice.level(j as isize) + model.expected_holding(j);
        if alpha == 0.0 {
            Ok(base)
        } else {
            Ok(base + alpha * expect_after_demand(model, v, j)?)
        }
    };
    if lattice.len() >= PAR_MIN_POINTS {
        (0..lattice.len()).into_par_iter().map(point).collect()
    } else {
        (0..lattice.len()).map(point).collect()
    }
}

fn check_lattice<M: OrderingModel + ?Sized>(model: &M, v: &ValueTable) -> Result<()> {
    if v.lattice() != model.lattice() {
        return Err(Error::Domain(
            "table and model use different lattices".into(),
        ));
    }
    Ok(())
}

fn check_discount(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Precondition(format!(
            "discount factor must lie in [0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Result of one Bellman sweep: `T v` and the minimizing actions.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub value: ValueTable,
    pub policy: TabularPolicy,
}

/// One application of the discounted Bellman operator. Ties between actions
/// go to the smallest order quantity.
pub fn bellman_discounted<M: OrderingModel + ?Sized>(
    model: &M,
    v: &ValueTable,
    alpha: f64,
) -> Result<Sweep> {
    check_discount(alpha)?;
    let lattice = *model.lattice();
    let n = lattice.len();
    if n < 2 {
        return Err(Error::Configuration(
            "lattice needs at least two points".into(),
        ));
    }
    let k = model.fixed_cost();
    let c = model.unit_cost();
    let w = order_up_to_objective(model, v, alpha)?;

    // best_after[i] = (min_{j > i} W[j], smallest such j)
    let mut best_after = vec![(f64::INFINITY, usize::MAX); n];
    let mut cur = (f64::INFINITY, usize::MAX);
    for j in (0..n).rev() {
        best_after[j] = cur;
        if w[j] <= cur.0 {
            cur = (w[j], j);
        }
    }
    let best_all = cur;

    let mut values = Vec::with_capacity(n);
    let mut orders = Vec::with_capacity(n);
    for i in 0..n {
        let x = lattice.level(i as isize);
        let (b, j) = best_after[i];
        if j != usize::MAX && k + b < w[i] {
            values.push(k + b - c * x);
            orders.push(j - i);
        } else {
            values.push(w[i] - c * x);
            orders.push(0);
        }
    }

    let (tail, below) = below_grid_branch(model, v, alpha, best_all, orders[0] > 0)?;
    Ok(Sweep {
        value: ValueTable::new(lattice, values, Some(tail))?,
        policy: TabularPolicy::new(lattice, orders, below)?,
    })
}

/// Linear form of `T v` below the lattice and the action taken there.
fn below_grid_branch<M: OrderingModel + ?Sized>(
    model: &M,
    v: &ValueTable,
    alpha: f64,
    best_all: (f64, usize),
    orders_at_min: bool,
) -> Result<(LinearTail, BelowGrid)> {
    let lattice = model.lattice();
    let x0 = lattice.x_min();
    let c = model.unit_cost();
    let h_tail = model.expected_holding_tail();

    let order = LinearTail {
        intercept: model.fixed_cost() + best_all.0,
        slope: -c,
    };
    let hold = if alpha == 0.0 {
        h_tail
    } else {
        let vt = v.below_grid().ok_or_else(|| {
            Error::TruncationUnderflow(
                "continuation table has no linear extension below the lattice".into(),
            )
        })?;
        let ev = expect_tail(model, vt);
        LinearTail {
            intercept: h_tail.intercept + alpha * ev.intercept,
            slope: h_tail.slope + alpha * ev.slope,
        }
    };

    // Ordering to a level that is itself below the lattice is never needed: if
    // W rises to the left, holding dominates it; otherwise ordering to x_min does.
    if orders_at_min && order.slope >= hold.slope {
        Ok((order, BelowGrid::OrderUpTo(best_all.1)))
    } else if !orders_at_min && hold.slope >= order.slope && hold.at(x0) <= order.at(x0) {
        Ok((hold, BelowGrid::Hold))
    } else {
        Err(Error::TruncationUnderflow(format!(
            "optimal action changes below x_min = {x0}; lower the lattice minimum"
        )))
    }
}

/// Iterates a monotone, translation-equivariant `alpha`-contraction from zero
/// until the span of successive changes certifies `‖v - v*‖∞ ≤ tol / 4`.
///
/// Internally the iterate is kept as `u + g` with `min u = 0`, so the span is
/// measured at the scale of the relative values rather than of `v ≈ w/(1-α)`.
/// On exit the midpoint of the MacQueen–Porteus bounds is returned.
pub(crate) fn certified_fixed_point(
    lattice: Lattice,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    mut apply: impl FnMut(&ValueTable) -> Result<ValueTable>,
) -> Result<(ValueTable, usize, f64)> {
    check_discount(alpha)?;
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be positive".into()));
    }
    let zero = ValueTable::constant(lattice, 0.0);
    if alpha == 0.0 {
        return Ok((apply(&zero)?, 1, 0.0));
    }
    let threshold = tol * (1.0 - alpha) / (2.0 * alpha);

    let mut u = zero;
    let mut g = 0.0;
    let mut span = f64::INFINITY;
    for it in 1..=max_iter {
        let y = apply(&u)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in y.values().iter().zip(u.values()) {
            let d = a - b;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        span = hi - lo;
        let shift = y.min().1;
        let next_u = y.shifted(-shift);
        let next_g = alpha * g + shift;
        if span <= threshold {
            // change of the full iterate is (y - u) - (1-α)g
            let mid = 0.5 * (lo + hi) - (1.0 - alpha) * g;
            let offset = next_g + alpha / (1.0 - alpha) * mid;
            return Ok((next_u.shifted(offset), it, span));
        }
        u = next_u;
        g = next_g;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: span,
    })
}

#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub value: ValueTable,
    /// Greedy with respect to `value`.
    pub policy: TabularPolicy,
    pub iterations: usize,
    /// Span of the last change between iterates.
    pub last_span: f64,
}

/// Value iteration from `v ≡ 0`; the returned table is within `tol` of `v_α`
/// in sup-norm.
pub fn value_iteration<M: OrderingModel + ?Sized>(
    model: &M,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ValueIteration> {
    let (value, iterations, last_span) =
        certified_fixed_point(*model.lattice(), alpha, tol, max_iter, |u| {
            bellman_discounted(model, u, alpha).map(|s| s.value)
        })?;
    let policy = bellman_discounted(model, &value, alpha)?.policy;
    Ok(ValueIteration {
        value,
        policy,
        iterations,
        last_span,
    })
}

/// Splits `v` into its minimum over the lattice and the nonnegative remainder.
pub fn relative_value(v: &ValueTable) -> (f64, ValueTable) {
    let m = v.min().1;
    (m, v.shifted(-m))
}
