//! Average-cost optimality through vanishing discount factors.
//!
//! For an increasing schedule `α_n ↑ 1` the discounted problems are solved,
//! `w ≈ (1-α_N)·m_{α_N}` and `ũ ≈ u_{α_N}` are read off the last one, and the
//! average-cost optimality equation
//!
//! ```text
//! w + ũ(x) = min{ min_{a≥0} [K + H(x+a)], H(x) } - c̄x,
//! H(x) = c̄x + E[h(x-D)] + E[ũ(x-D)]
//! ```
//!
//! is checked on the lattice interior.

use std::ops::Range;

use rayon::prelude::*;

use crate::dp::{expect_after_demand, relative_value, value_iteration, OrderingModel};
use crate::error::{Error, Result};
use crate::lattice::{LinearTail, TabularPolicy, ValueTable};
use crate::model::{alpha_star, g_alpha, InventoryParams};
use crate::policy::{extract_ss, SSPolicy};

/// Sweep budget for each inner value iteration.
pub const MAX_SWEEPS: usize = 2_000_000;

/// Increasing discount factors in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingSchedule {
    alphas: Vec<f64>,
}

impl VanishingSchedule {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Precondition("discount schedule is empty".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::Precondition(format!(
                "discount factor must lie in [0,1), got {a}"
            )));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "discount schedule must be strictly increasing".into(),
            ));
        }
        Ok(VanishingSchedule { alphas })
    }

    /// `α_n = 1 - 2^{-n-1}` for `n = 1..=terms`.
    pub fn geometric(terms: usize) -> Result<Self> {
        Self::new(
            (1..=terms)
                .map(|n| 1.0 - 0.5f64.powi(n as i32 + 1))
                .collect(),
        )
    }

    /// Geometric schedule with six terms, each raised to at least `α* + 0.05`.
    pub fn default_for(params: &InventoryParams) -> Result<Self> {
        let floor = alpha_star(params) + 0.05;
        let mut alphas: Vec<f64> = Self::geometric(6)?
            .alphas
            .into_iter()
            .map(|a| a.max(floor))
            .collect();
        alphas.dedup();
        alphas.retain(|&a| a < 1.0);
        Self::new(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn last(&self) -> f64 {
        *self.alphas.last().expect("schedule is nonempty")
    }

    pub fn extended(&self, alpha: f64) -> Result<Self> {
        let mut alphas = self.alphas.clone();
        alphas.push(alpha);
        Self::new(alphas)
    }

    /// The first discount factor must exceed `α*`.
    pub fn check_threshold(&self, params: &InventoryParams) -> Result<()> {
        let a_star = alpha_star(params);
        if self.alphas[0] <= a_star {
            return Err(Error::DiscountBelowThreshold {
                alpha: self.alphas[0],
                alpha_star: a_star,
            });
        }
        Ok(())
    }
}

/// Everything computed for one discount factor.
#[derive(Debug, Clone)]
pub struct DiscountedRun {
    pub alpha: f64,
    pub iterations: usize,
    pub value: ValueTable,
    pub m_alpha: f64,
    pub u: ValueTable,
    pub g: ValueTable,
    pub policy: SSPolicy,
    pub greedy: TabularPolicy,
}

/// Solves the discounted problem at `alpha` to sup-norm accuracy `tol` and
/// extracts `(s_α, S_α)` from `G_α`.
pub fn solve_discounted(
    params: &InventoryParams,
    alpha: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<DiscountedRun> {
    let vi = value_iteration(params, alpha, tol, max_sweeps)?;
    let (m_alpha, u) = relative_value(&vi.value);
    let g = g_alpha(params, &vi.value, alpha)?;
    let policy = extract_ss(&g, params.fixed_cost())?;
    Ok(DiscountedRun {
        alpha,
        iterations: vi.iterations,
        value: vi.value,
        m_alpha,
        u,
        g,
        policy,
        greedy: vi.policy,
    })
}

#[derive(Debug, Clone)]
pub struct AverageSolution {
    pub w: f64,
    pub u_tilde: ValueTable,
    pub h: ValueTable,
    pub policy: SSPolicy,
    pub acoe_residual: f64,
    /// Interior state where the residual is attained.
    pub acoe_argmax: f64,
    /// A-priori bound on the residual from the finite discount and solver accuracy.
    pub acoe_bound: f64,
    pub w_sequence: Vec<f64>,
    pub ss_sequence: Vec<SSPolicy>,
    pub runs: Vec<DiscountedRun>,
    pub warnings: Vec<String>,
    pub dp_tol: f64,
}

/// Runs the vanishing-discount procedure. `dp_tol` bounds the error of each
/// `(1-α_n)·v_{α_n}`, so every inner solve is accurate to `dp_tol / (1-α_n)`.
pub fn vanishing_discount(
    params: &InventoryParams,
    schedule: &VanishingSchedule,
    dp_tol: f64,
) -> Result<AverageSolution> {
    schedule.check_threshold(params)?;
    if !(dp_tol > 0.0) {
        return Err(Error::Precondition(format!(
            "dp_tol must be positive, got {dp_tol}"
        )));
    }
    let runs: Vec<DiscountedRun> = schedule
        .alphas()
        .par_iter()
        .map(|&a| solve_discounted(params, a, dp_tol / (1.0 - a), MAX_SWEEPS))
        .collect::<Result<_>>()?;

    let last = runs.last().expect("schedule is nonempty");
    let alpha_n = last.alpha;
    let w = (1.0 - alpha_n) * last.m_alpha;
    let u_tilde = last.u.clone();
    let policy = last.policy;
    let w_sequence = runs.iter().map(|r| (1.0 - r.alpha) * r.m_alpha).collect();
    let ss_sequence: Vec<SSPolicy> = runs.iter().map(|r| r.policy).collect();

    let mut warnings = Vec::new();
    if runs.len() < 2 {
        warnings.push("schedule has a single discount factor; no convergence sequence".to_string());
    } else {
        let a = ss_sequence[ss_sequence.len() - 2];
        let step = params.lattice().step();
        if (a.s - policy.s).abs() > step * 1.5
            || (a.order_up_to - policy.order_up_to).abs() > step * 1.5
        {
            warnings.push(format!(
                "(s,S) not settled: ({}, {}) then ({}, {})",
                a.s, a.order_up_to, policy.s, policy.order_up_to
            ));
        }
    }

    let h = h_function(
        params,
        &u_tilde,
        Some(AcoeAnchor {
            w,
            order_up_to: policy.order_up_to,
        }),
    )?;
    let (acoe_residual, acoe_argmax) = acoe_residual(params, w, &u_tilde, &h)?;
    let acoe_bound = residual_bound(params, &u_tilde, alpha_n, dp_tol)?;

    Ok(AverageSolution {
        w,
        u_tilde,
        h,
        policy,
        acoe_residual,
        acoe_argmax,
        acoe_bound,
        w_sequence,
        ss_sequence,
        runs,
        warnings,
        dp_tol,
    })
}

/// Data fixing `ũ` below `s*`: `ũ(x) = K + H(S*) - c̄x - w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcoeAnchor {
    pub w: f64,
    pub order_up_to: f64,
}

/// `H(x) = c̄x + E[h(x-D)] + E[ũ(x-D)]` on the lattice.
///
/// Below the lattice `ũ` is taken from the anchor when one is given, otherwise
/// from the table's own linear tail.
pub fn h_function(
    params: &InventoryParams,
    u_tilde: &ValueTable,
    anchor: Option<AcoeAnchor>,
) -> Result<ValueTable> {
    let lattice = *params.lattice();
    if u_tilde.lattice() != &lattice {
        return Err(Error::Domain(
            "relative value table and instance use different lattices".into(),
        ));
    }
    let c = params.unit_cost();
    let raw = |u: &ValueTable, j: usize| -> Result<f64> {
        Ok(c * lattice.level(j as isize)
            + params.expected_holding(j)
            + expect_after_demand(params, u, j)?)
    };
    let u = match anchor {
        Some(a) => {
            let j = lattice.index_of(a.order_up_to).ok_or_else(|| {
                Error::Domain(format!("S* = {} is not a lattice point", a.order_up_to))
            })?;
            if j < params.demand_reach() {
                return Err(Error::TruncationUnderflow(format!(
                    "H(S*) at S* = {} needs relative values below the lattice",
                    a.order_up_to
                )));
            }
            let h_s = raw(u_tilde, j)?;
            u_tilde.clone().with_below_grid(Some(LinearTail {
                intercept: params.fixed_cost() + h_s - a.w,
                slope: -c,
            }))
        }
        None => u_tilde.clone(),
    };
    let values = (0..lattice.len())
        .map(|j| raw(&u, j))
        .collect::<Result<Vec<_>>>()?;
    ValueTable::new(lattice, values, None)
}

/// Lattice indices whose one-period demand reach stays on the lattice at both ends.
pub fn interior(params: &InventoryParams) -> Range<usize> {
    let r = params.demand_reach();
    let n = params.lattice().len();
    r.min(n)..n.saturating_sub(r)
}

/// `min{ K + min_{y≥x} H(y), H(x) } - c̄x` on the lattice.
pub fn acoe_right_side(params: &InventoryParams, h: &ValueTable) -> Vec<f64> {
    let lattice = params.lattice();
    let vals = h.values();
    let n = vals.len();
    let mut out = vec![0.0; n];
    let mut suffix = f64::INFINITY;
    for i in (0..n).rev() {
        suffix = suffix.min(vals[i]);
        out[i] = (params.fixed_cost() + suffix).min(vals[i])
            - params.unit_cost() * lattice.level(i as isize);
    }
    out
}

/// Sup over the interior of `|w + ũ(x) - (min{K + min_{y≥x} H(y), H(x)} - c̄x)|`
/// and the state attaining it.
pub fn acoe_residual(
    params: &InventoryParams,
    w: f64,
    u_tilde: &ValueTable,
    h: &ValueTable,
) -> Result<(f64, f64)> {
    let lattice = params.lattice();
    if u_tilde.lattice() != lattice || h.lattice() != lattice {
        return Err(Error::Domain("tables use different lattices".into()));
    }
    let rhs = acoe_right_side(params, h);
    let mut worst = (0.0, lattice.level(interior(params).start as isize));
    for i in interior(params) {
        let r = (w + u_tilde.values()[i] - rhs[i]).abs();
        if r > worst.0 {
            worst = (r, lattice.level(i as isize));
        }
    }
    Ok(worst)
}

/// Residual the finite schedule alone can explain: replacing `α_N·E u` by `E u`
/// in `G` moves it by `(1-α_N)·E u(·-D)`, plus the inner solver's tolerance.
pub fn residual_bound(
    params: &InventoryParams,
    u_tilde: &ValueTable,
    alpha_n: f64,
    dp_tol: f64,
) -> Result<f64> {
    let start = interior(params).start;
    let mut sup: f64 = 0.0;
    for j in start..params.lattice().len() {
        sup = sup.max(expect_after_demand(params, u_tilde, j)?);
    }
    Ok((1.0 - alpha_n) * sup + 4.0 * dp_tol / (1.0 - alpha_n) + dp_tol)
}

/// Worst one-sided violation `[c(x,π(x)) + E ũ(x+π(x)-D) - w - ũ(x)]⁺` over the interior.
pub fn verify_acoi(
    params: &InventoryParams,
    w: f64,
    u_tilde: &ValueTable,
    pol: &TabularPolicy,
) -> Result<f64> {
    if pol.lattice() != params.lattice() || u_tilde.lattice() != params.lattice() {
        return Err(Error::Domain(
            "policy, table and instance use different lattices".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for i in interior(params) {
        let a = pol.order_steps()[i];
        let lhs = params.cost(i, a) + expect_after_demand(params, u_tilde, i + a)?;
        worst = worst.max(lhs - w - u_tilde.values()[i]);
    }
    Ok(worst)
}

/// `max_n max_{|x-y| ≤ delta} |u_n(x) - u_n(y)|` over lattice pairs.
pub fn equicontinuity_modulus(tables: &[ValueTable], delta: f64) -> Result<f64> {
    let Some(first) = tables.first() else {
        return Ok(0.0);
    };
    let lattice = *first.lattice();
    if tables.iter().any(|t| t.lattice() != &lattice) {
        return Err(Error::Domain("tables use different lattices".into()));
    }
    let k = lattice.steps_in(delta).filter(|&k| k > 0).ok_or_else(|| {
        Error::Domain(format!("delta {delta} is not a positive lattice multiple"))
    })?;
    let mut modulus: f64 = 0.0;
    for t in tables {
        let v = t.values();
        for i in 0..v.len() {
            for j in i + 1..=(i + k).min(v.len() - 1) {
                modulus = modulus.max((v[j] - v[i]).abs());
            }
        }
    }
    Ok(modulus)
}

/// `|K + H(S) - H(s)|`: at `x = s` ordering and not ordering cost the same in the limit.
pub fn two_actions_at_s(h: &ValueTable, pol: &SSPolicy, k: f64) -> Result<f64> {
    Ok((k + h.eval(pol.order_up_to)? - h.eval(pol.s)?).abs())
}

/// Largest adjacent difference quotient of `f` on the two grid cells touching `x`.
pub fn slope_near(f: &ValueTable, x: f64) -> Result<f64> {
    let lattice = f.lattice();
    let i = lattice
        .index_of(x)
        .ok_or_else(|| Error::Domain(format!("level {x} is not a lattice point")))?;
    let v = f.values();
    let mut slope: f64 = 0.0;
    if i > 0 {
        slope = slope.max((v[i] - v[i - 1]).abs());
    }
    if i + 1 < v.len() {
        slope = slope.max((v[i + 1] - v[i]).abs());
    }
    Ok(slope / lattice.step())
}
