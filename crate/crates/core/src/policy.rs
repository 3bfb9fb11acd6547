//! (s,S) policies, K-convexity checks and exact policy evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{certified_fixed_point, expect_after_demand, OrderingModel};
use crate::error::{Error, Result};
use crate::lattice::{BelowGrid, Lattice, LinearTail, TabularPolicy, ValueTable};

/// Order up to `S` when the level is below `s`; otherwise do not order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SSPolicy {
    pub s: f64,
    #[serde(rename = "S")]
    pub order_up_to: f64,
}

impl SSPolicy {
    pub fn new(s: f64, order_up_to: f64) -> Result<Self> {
        if !(s.is_finite() && order_up_to.is_finite()) || s > order_up_to {
            return Err(Error::Domain(format!(
                "(s,S) policy needs s <= S, got ({s}, {order_up_to})"
            )));
        }
        Ok(SSPolicy { s, order_up_to })
    }

    /// Order quantity at any level, on or off the lattice.
    pub fn order_at(&self, x: f64) -> f64 {
        if x < self.s {
            self.order_up_to - x
        } else {
            0.0
        }
    }

    fn indices(&self, lattice: &Lattice) -> Result<(usize, usize)> {
        let idx = |x: f64| {
            lattice
                .index_of(x)
                .ok_or_else(|| Error::Domain(format!("policy level {x} is not a lattice point")))
        };
        Ok((idx(self.s)?, idx(self.order_up_to)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KConvexWitness {
    pub x: f64,
    pub y: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KConvexityReport {
    pub is_k_convex: bool,
    pub worst_violation: f64,
    pub witness: Option<KConvexWitness>,
}

/// Checks `f((1-λ)x + λy) ≤ (1-λ)f(x) + λf(y) + λK` over all lattice triples.
pub fn check_k_convex(f: &ValueTable, k: f64, tol: f64) -> KConvexityReport {
    let v = f.values();
    let n = v.len();
    let lattice = f.lattice();
    // worst (violation, i, j, l) per left endpoint; reduced in index order
    let per_left: Vec<(f64, usize, usize, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = (f64::NEG_INFINITY, i, i, i);
            for l in i + 2..n {
                let width = (l - i) as f64;
                for j in i + 1..l {
                    let lambda = (j - i) as f64 / width;
                    let bound = (1.0 - lambda) * v[i] + lambda * v[l] + lambda * k;
                    let viol = v[j] - bound;
                    if viol > worst.0 {
                        worst = (viol, i, j, l);
                    }
                }
            }
            worst
        })
        .collect();
    let worst =
        per_left.into_iter().fold(
            (f64::NEG_INFINITY, 0, 0, 0),
            |a, b| if b.0 > a.0 { b } else { a },
        );
    let worst_violation = worst.0.max(0.0);
    let is_k_convex = worst_violation <= tol;
    let witness = (!is_k_convex).then(|| KConvexWitness {
        x: lattice.level(worst.1 as isize),
        y: lattice.level(worst.3 as isize),
        lambda: (worst.2 - worst.1) as f64 / (worst.3 - worst.1) as f64,
    });
    KConvexityReport {
        is_k_convex,
        worst_violation,
        witness,
    }
}

/// `S` = smallest lattice argmin of `f`; `s` = smallest `x ≤ S` with `f(x) ≤ K + f(S)`.
pub fn extract_ss(f: &ValueTable, k: f64) -> Result<SSPolicy> {
    let lattice = f.lattice();
    let (si, fs) = f.min();
    if si == 0 || si + 1 == lattice.len() {
        return Err(Error::TruncationTooTight(format!(
            "minimizer {} sits on the lattice boundary [{}, {}]",
            lattice.level(si as isize),
            lattice.x_min(),
            lattice.x_max()
        )));
    }
    let threshold = k + fs;
    let s_idx = f.values()[..=si]
        .iter()
        .position(|&v| v <= threshold)
        .unwrap_or(si);
    SSPolicy::new(lattice.level(s_idx as isize), lattice.level(si as isize))
}

/// Tabular form of an (s,S) policy; below the lattice it orders up to `S`.
pub fn policy_to_tabular(pol: &SSPolicy, lattice: &Lattice) -> Result<TabularPolicy> {
    let (s, big_s) = pol.indices(lattice)?;
    let orders = (0..lattice.len())
        .map(|i| if i < s { big_s - i } else { 0 })
        .collect();
    TabularPolicy::new(*lattice, orders, BelowGrid::OrderUpTo(big_s))
}

/// Like [`policy_to_tabular`] but also orders up to `S` at `x = s`.
pub fn modified_policy_at_s(pol: &SSPolicy, lattice: &Lattice) -> Result<TabularPolicy> {
    let (s, big_s) = pol.indices(lattice)?;
    let orders = (0..lattice.len())
        .map(|i| if i <= s { big_s - i } else { 0 })
        .collect();
    TabularPolicy::new(*lattice, orders, BelowGrid::OrderUpTo(big_s))
}

/// Applies the policy operator `c_π + α P_π v` once.
pub fn policy_operator<M: OrderingModel + ?Sized>(
    model: &M,
    pol: &TabularPolicy,
    v: &ValueTable,
    alpha: f64,
) -> Result<ValueTable> {
    let lattice = *model.lattice();
    if pol.lattice() != &lattice || v.lattice() != &lattice {
        return Err(Error::Domain(
            "policy, table and model use different lattices".into(),
        ));
    }
    let cont = |j: usize| -> Result<f64> {
        if alpha == 0.0 {
            Ok(0.0)
        } else {
            Ok(alpha * expect_after_demand(model, v, j)?)
        }
    };
    let mut values = Vec::with_capacity(lattice.len());
    for (i, &a) in pol.order_steps().iter().enumerate() {
        values.push(model.cost(i, a) + cont(i + a)?);
    }
    let tail = match pol.below_grid() {
        BelowGrid::OrderUpTo(t) => LinearTail {
            intercept: model.fixed_cost()
                + model.unit_cost() * lattice.level(t as isize)
                + model.expected_holding(t)
                + cont(t)?,
            slope: -model.unit_cost(),
        },
        BelowGrid::Hold => {
            let h = model.expected_holding_tail();
            if alpha == 0.0 {
                h
            } else {
                let vt = v.below_grid().ok_or_else(|| {
                    Error::TruncationUnderflow(
                        "table has no linear extension below the lattice".into(),
                    )
                })?;
                LinearTail {
                    intercept: h.intercept
                        + alpha * (vt.intercept - vt.slope * model.mean_demand()),
                    slope: h.slope + alpha * vt.slope,
                }
            }
        }
    };
    ValueTable::new(lattice, values, Some(tail))
}

/// Discounted value of a stationary policy, within `tol` in sup-norm.
pub fn evaluate_policy_discounted<M: OrderingModel + ?Sized>(
    model: &M,
    pol: &TabularPolicy,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ValueTable> {
    certified_fixed_point(*model.lattice(), alpha, tol, max_iter, |v| {
        policy_operator(model, pol, v, alpha)
    })
    .map(|(v, _, _)| v)
}

/// Serialized policy: `{"type": "sS", "s", "S"}` or
/// `{"type": "tabular", "lattice", "orders", "below_grid"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum PolicyFile {
    #[serde(rename = "sS")]
    SS {
        s: f64,
        #[serde(rename = "S")]
        order_up_to: f64,
    },
    #[serde(rename = "tabular")]
    Tabular {
        lattice: LatticeSpec,
        orders: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        below_grid_order_up_to: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
}

impl From<&Lattice> for LatticeSpec {
    fn from(l: &Lattice) -> Self {
        LatticeSpec {
            x_min: l.x_min(),
            x_max: l.x_max(),
            step: l.step(),
        }
    }
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        Lattice::new(self.x_min, self.x_max, self.step)
    }
}

impl From<&SSPolicy> for PolicyFile {
    fn from(p: &SSPolicy) -> Self {
        PolicyFile::SS {
            s: p.s,
            order_up_to: p.order_up_to,
        }
    }
}

impl From<&TabularPolicy> for PolicyFile {
    fn from(p: &TabularPolicy) -> Self {
        let lattice = p.lattice();
        PolicyFile::Tabular {
            lattice: lattice.into(),
            orders: p.order_quantities(),
            below_grid_order_up_to: match p.below_grid() {
                BelowGrid::OrderUpTo(t) => Some(lattice.level(t as isize)),
                BelowGrid::Hold => None,
            },
        }
    }
}

impl PolicyFile {
    /// Converts a tabular entry back, checking it matches `expected`.
    pub fn to_tabular(&self, expected: &Lattice) -> Result<TabularPolicy> {
        match self {
            PolicyFile::SS { s, order_up_to } => {
                policy_to_tabular(&SSPolicy::new(*s, *order_up_to)?, expected)
            }
            PolicyFile::Tabular {
                lattice,
                orders,
                below_grid_order_up_to,
            } => {
                let l = lattice.build()?;
                if &l != expected {
                    return Err(Error::Domain(format!(
                        "policy lattice [{}, {}] step {} differs from instance lattice [{}, {}] step {}",
                        l.x_min(),
                        l.x_max(),
                        l.step(),
                        expected.x_min(),
                        expected.x_max(),
                        expected.step()
                    )));
                }
                let steps = orders
                    .iter()
                    .map(|&q| {
                        l.steps_in(q).ok_or_else(|| {
                            Error::Domain(format!(
                                "order {q} is not a nonnegative lattice multiple"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let below = match below_grid_order_up_to {
                    Some(t) => BelowGrid::OrderUpTo(l.index_of(*t).ok_or_else(|| {
                        Error::Domain(format!("below-grid target {t} is off the lattice"))
                    })?),
                    None => BelowGrid::Hold,
                };
                TabularPolicy::new(l, steps, below)
            }
        }
    }
}
