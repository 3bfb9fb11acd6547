//! The periodic-review inventory problem with fixed ordering cost and backlogging.

use rand::Rng;

use crate::dp::{order_up_to_objective, OrderingModel};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LinearTail, ValueTable};

const PROB_SUM_TOL: f64 = 1e-12;
const RENEWAL_TAIL: f64 = 1e-10;

/// Convex piecewise-linear holding/backorder cost, normalized so `h(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Holding {
    left_slope: f64,
    breakpoints: Vec<(f64, f64)>,
    raw_at_breaks: Vec<f64>,
    raw_at_zero: f64,
}

impl Holding {
    /// `left_slope` applies left of the first breakpoint; each `(x, slope)`
    /// pair gives the slope to the right of `x`.
    pub fn new(left_slope: f64, breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::invalid(
                "h has at least one breakpoint",
                "no breakpoints given",
            ));
        }
        let finite = left_slope.is_finite()
            && breakpoints
                .iter()
                .all(|(x, s)| x.is_finite() && s.is_finite());
        if !finite {
            return Err(Error::invalid(
                "h breakpoints and slopes finite",
                "non-finite entry",
            ));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(
                    "h breakpoints strictly increasing",
                    format!("{} follows {}", w[1].0, w[0].0),
                ));
            }
        }
        let mut prev = left_slope;
        for &(x, s) in &breakpoints {
            if s < prev {
                return Err(Error::invalid(
                    "h convex (slopes nondecreasing)",
                    format!("slope drops from {prev} to {s} at x = {x}"),
                ));
            }
            prev = s;
        }
        let right_slope = breakpoints.last().map(|b| b.1).unwrap_or(left_slope);
        if !(left_slope < 0.0 && right_slope > 0.0) {
            return Err(Error::invalid(
                "h(x) -> infinity as |x| -> infinity (leftmost slope < 0 < rightmost slope)",
                format!("slopes {left_slope} and {right_slope}"),
            ));
        }

        let mut raw_at_breaks = vec![0.0; breakpoints.len()];
        for k in 1..breakpoints.len() {
            let (x0, s0) = breakpoints[k - 1];
            raw_at_breaks[k] = raw_at_breaks[k - 1] + s0 * (breakpoints[k].0 - x0);
        }
        let mut h = Holding {
            left_slope,
            breakpoints,
            raw_at_breaks,
            raw_at_zero: 0.0,
        };
        h.raw_at_zero = h.raw(0.0);
        for &(x, _) in &h.breakpoints {
            let v = h.eval(x);
            if v < -1e-12 {
                return Err(Error::invalid(
                    "h nonnegative with h(0) = 0",
                    format!("h({x}) = {v}"),
                ));
            }
        }
        Ok(h)
    }

    /// `h(x) = p·x⁺ + b·x⁻`.
    pub fn holding_backorder(holding: f64, backorder: f64) -> Result<Self> {
        Holding::new(-backorder, vec![(0.0, holding)])
    }

    fn raw(&self, x: f64) -> f64 {
        let (b0, _) = self.breakpoints[0];
        if x <= b0 {
            return self.left_slope * (x - b0);
        }
        let k = self.breakpoints.partition_point(|&(b, _)| b <= x) - 1;
        let (bk, sk) = self.breakpoints[k];
        self.raw_at_breaks[k] + sk * (x - bk)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.raw(x) - self.raw_at_zero
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.breakpoints
            .last()
            .map(|b| b.1)
            .unwrap_or(self.left_slope)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn min_breakpoint(&self) -> f64 {
        self.breakpoints[0].0
    }
}

/// Finite demand distribution with nonnegative support.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPmf {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DemandPmf {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::invalid(
                "demand support and probs have equal nonzero length",
                format!(
                    "{} support values, {} probabilities",
                    support.len(),
                    probs.len()
                ),
            ));
        }
        if support.iter().chain(&probs).any(|v| !v.is_finite()) {
            return Err(Error::invalid("demand values finite", "non-finite entry"));
        }
        if let Some(d) = support.iter().find(|&&d| d < 0.0) {
            return Err(Error::invalid(
                "demand support nonnegative",
                format!("value {d}"),
            ));
        }
        if let Some(p) = probs.iter().find(|&&p| p < 0.0) {
            return Err(Error::invalid(
                "demand probabilities nonnegative",
                format!("value {p}"),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(
                "demand probabilities sum to 1",
                format!("sum is {total}"),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = support.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(
                "demand support values distinct",
                format!("{} repeated", w[0].0),
            ));
        }
        if !pairs.iter().any(|&(d, p)| d > 0.0 && p > 0.0) {
            return Err(Error::invalid(
                "P(D > 0) > 0",
                "all demand mass sits at zero",
            ));
        }
        let (support, probs) = pairs.into_iter().unzip();
        Ok(DemandPmf { support, probs })
    }

    /// Point mass at `d > 0`.
    pub fn deterministic(d: f64) -> Result<Self> {
        DemandPmf::new(vec![d], vec![1.0])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(d, p)| d * p).sum()
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        self.iter()
            .map(|(d, p)| p * (d - m) * (d - m))
            .sum::<f64>()
            .sqrt()
    }

    /// Expresses the distribution in multiples of `step`.
    pub fn on_grid(&self, step: f64) -> Result<DiscreteDemand> {
        let lattice = Lattice::new(0.0, step, step)?;
        let mut steps = Vec::new();
        for (d, p) in self.iter() {
            let k = lattice.steps_in(d).ok_or_else(|| {
                Error::invalid(
                    "demand support lattice-aligned",
                    format!("demand {d} is not a multiple of step {step}"),
                )
            })?;
            if p > 0.0 {
                steps.push((k, p));
            }
        }
        let mut cdf = Vec::with_capacity(steps.len());
        let mut acc = 0.0;
        for &(_, p) in &steps {
            acc += p;
            cdf.push(acc);
        }
        Ok(DiscreteDemand { step, steps, cdf })
    }
}

/// Demand in grid steps; zero-probability values dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDemand {
    step: f64,
    steps: Vec<(usize, f64)>,
    cdf: Vec<f64>,
}

impl DiscreteDemand {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> &[(usize, f64)] {
        &self.steps
    }

    pub fn max_steps(&self) -> usize {
        self.steps.iter().map(|s| s.0).max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.steps
            .iter()
            .map(|&(k, p)| p * k as f64 * self.step)
            .sum()
    }

    /// Inverse-CDF draw, in grid steps.
    pub fn sample_steps<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.steps.len() - 1);
        self.steps[i].0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_steps(rng) as f64 * self.step
    }
}

/// Expected number of renewals `E[N(t)] = Σ_{n≥1} P(S_n ≤ t)` of the demand
/// partial sums, by iterated convolution until a term drops below `1e-10`.
pub fn renewal_function(demand: &DiscreteDemand, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let horizon = (t / demand.step + 1e-9).floor() as usize;
    let mut law = vec![0.0; horizon + 1];
    law[0] = 1.0;
    let mut total = 0.0;
    loop {
        let mut next = vec![0.0; horizon + 1];
        for (z, &q) in law.iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            for &(d, p) in &demand.steps {
                if z + d <= horizon {
                    next[z + d] += q * p;
                }
            }
        }
        let term: f64 = next.iter().sum();
        total += term;
        if term < RENEWAL_TAIL {
            return total;
        }
        law = next;
    }
}

/// Parameters of an inventory instance together with the tabulated `h̃`.
#[derive(Debug, Clone)]
pub struct InventoryParams {
    fixed_cost: f64,
    unit_cost: f64,
    holding: Holding,
    demand: DemandPmf,
    lattice: Lattice,
    discrete: DiscreteDemand,
    h_tilde: Vec<f64>,
    h_tilde_tail: LinearTail,
}

impl InventoryParams {
    pub fn new(
        fixed_cost: f64,
        unit_cost: f64,
        holding: Holding,
        demand: DemandPmf,
        lattice: Lattice,
    ) -> Result<Self> {
        if !(fixed_cost.is_finite() && fixed_cost >= 0.0) {
            return Err(Error::invalid("K >= 0", format!("K = {fixed_cost}")));
        }
        if !(unit_cost.is_finite() && unit_cost > 0.0) {
            return Err(Error::invalid("c_bar > 0", format!("c_bar = {unit_cost}")));
        }
        if lattice.x_min() > holding.min_breakpoint() {
            return Err(Error::invalid(
                "lattice x_min at or below every h breakpoint",
                format!(
                    "x_min = {} > breakpoint {}",
                    lattice.x_min(),
                    holding.min_breakpoint()
                ),
            ));
        }
        let discrete = demand.on_grid(lattice.step())?;
        let mean = demand.mean();
        let b0 = holding.min_breakpoint();
        let h_tilde_tail = LinearTail {
            intercept: holding.eval(b0) - holding.left_slope() * (b0 + mean),
            slope: holding.left_slope(),
        };
        let mut params = InventoryParams {
            fixed_cost,
            unit_cost,
            holding,
            demand,
            lattice,
            discrete,
            h_tilde: Vec::new(),
            h_tilde_tail,
        };
        params.h_tilde = lattice.levels().map(|x| params.expected_h_at(x)).collect();
        Ok(params)
    }

    pub fn holding(&self) -> &Holding {
        &self.holding
    }

    pub fn demand(&self) -> &DemandPmf {
        &self.demand
    }

    pub fn discrete_demand(&self) -> &DiscreteDemand {
        &self.discrete
    }

    /// `h̃(x) = E[h(x - D)]` evaluated analytically at any level.
    pub fn expected_h_at(&self, x: f64) -> f64 {
        self.demand
            .iter()
            .map(|(d, p)| p * self.holding.eval(x - d))
            .sum()
    }

    /// One-step cost at arbitrary (possibly off-lattice) `x` and `a ≥ 0`.
    pub fn cost_at(&self, x: f64, a: f64) -> f64 {
        let fixed = if a > 0.0 { self.fixed_cost } else { 0.0 };
        fixed + self.unit_cost * a + self.expected_h_at(x + a)
    }

    /// Number of grid steps demand can move the state in one period.
    pub fn demand_reach(&self) -> usize {
        self.discrete.max_steps()
    }

    pub fn with_fixed_cost(&self, k: f64) -> Result<Self> {
        InventoryParams::new(
            k,
            self.unit_cost,
            self.holding.clone(),
            self.demand.clone(),
            self.lattice,
        )
    }

    pub fn with_unit_cost(&self, c: f64) -> Result<Self> {
        InventoryParams::new(
            self.fixed_cost,
            c,
            self.holding.clone(),
            self.demand.clone(),
            self.lattice,
        )
    }

    pub fn with_lattice(&self, lattice: Lattice) -> Result<Self> {
        InventoryParams::new(
            self.fixed_cost,
            self.unit_cost,
            self.holding.clone(),
            self.demand.clone(),
            lattice,
        )
    }
}

impl OrderingModel for InventoryParams {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn demand_steps(&self) -> &[(usize, f64)] {
        self.discrete.steps()
    }

    fn fixed_cost(&self) -> f64 {
        self.fixed_cost
    }

    fn unit_cost(&self) -> f64 {
        self.unit_cost
    }

    fn expected_holding(&self, j: usize) -> f64 {
        self.h_tilde[j]
    }

    fn expected_holding_tail(&self) -> LinearTail {
        self.h_tilde_tail
    }
}

/// `c(x, a) = K·1{a>0} + c̄a + E[h(x + a - D)]` for on-lattice `x` and `x + a`.
pub fn one_step_cost(params: &InventoryParams, x: f64, a: f64) -> Result<f64> {
    let lattice = params.lattice();
    if a < 0.0 {
        return Err(Error::Domain(format!("order amount {a} is negative")));
    }
    let a_steps = lattice.steps_in(a).ok_or_else(|| {
        Error::Domain(format!(
            "order amount {a} is not a multiple of step {}",
            lattice.step()
        ))
    })?;
    let i = lattice
        .index_of(x)
        .ok_or_else(|| Error::Domain(format!("level {x} is not a lattice point")))?;
    if i + a_steps >= lattice.len() {
        return Err(Error::Domain(format!(
            "post-order level {} is off the lattice",
            x + a
        )));
    }
    Ok(params.cost(i, a_steps))
}

/// `h̃(x) = Σ_d p(d)·h(x - d)`.
pub fn expected_h(params: &InventoryParams, x: f64) -> f64 {
    params.expected_h_at(x)
}

/// `G_α(x) = c̄x + E[h(x - D)] + α·E[v_α(x - D)]` on the lattice.
pub fn g_alpha(params: &InventoryParams, v_alpha: &ValueTable, alpha: f64) -> Result<ValueTable> {
    let w = order_up_to_objective(params, v_alpha, alpha)?;
    ValueTable::new(*params.lattice(), w, None)
}

/// `α* = 1 + lim_{x→-∞} h(x)/(c̄x)`; for piecewise-linear `h` the limit is the
/// leftmost slope over `c̄`.
pub fn alpha_star(params: &InventoryParams) -> f64 {
    1.0 + params.holding.left_slope() / params.unit_cost
}
