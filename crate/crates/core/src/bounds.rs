//! Upper bound `U` on the discounted relative values `u_α`.
//!
//! ```text
//! U(x) = K + c̄(x*_U - x)                                          x < x*_L
//! U(x) = K + c̄(x*_U - x*_L) + (E(x) + c̄·E[D])·(1 + E[N(x - x*_L)])   x ≥ x*_L
//! E(x) = h(x) + E[h(x - S_{N(x - x*_L)+1})]
//! ```
//!
//! where `S_n` are demand partial sums and `N(t)` counts those not exceeding `t`.
//! The stopped-sum term is estimated by Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::OrderingModel;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, ValueTable};
use crate::model::{renewal_function, InventoryParams};

/// Interval `[x*_L, x*_U]` containing every minimizer of every `v_α` considered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: f64,
    pub upper: f64,
}

impl BoundingBox {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::Precondition(format!(
                "bounding box [{lower}, {upper}] is empty"
            )));
        }
        Ok(BoundingBox { lower, upper })
    }

    /// Hull of `argmins`, widened by `widen` grid steps on each side and clipped to the lattice.
    pub fn around(lattice: &Lattice, argmins: &[f64], widen: usize) -> Result<Self> {
        if argmins.is_empty() {
            return Err(Error::Precondition("no minimizers to enclose".into()));
        }
        let lo = argmins.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = argmins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = widen as f64 * lattice.step();
        Self::new(
            (lo - pad).max(lattice.x_min()),
            (hi + pad).min(lattice.x_max()),
        )
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn check_contains(&self, argmins: &[f64]) -> Result<()> {
        match argmins.iter().find(|&&x| !self.contains(x)) {
            Some(&x) => Err(Error::BoundingBox {
                lower: self.lower,
                upper: self.upper,
                argmin: x,
            }),
            None => Ok(()),
        }
    }
}

/// Lattice levels where `v` is within `tol` of its minimum.
pub fn argmin_set(v: &ValueTable, tol: f64) -> Vec<f64> {
    let (_, m) = v.min();
    let lattice = v.lattice();
    v.values()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x <= m + tol)
        .map(|(i, _)| lattice.level(i as isize))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub paths: usize,
    pub seed: u64,
    /// Standard errors added to the stopped-sum estimate.
    pub se_inflation: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            paths: 100_000,
            seed: 0x5eed,
            se_inflation: 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UpperBound {
    pub bbox: BoundingBox,
    /// `U` with the Monte Carlo term at its point estimate.
    pub point: ValueTable,
    /// `U` with the Monte Carlo term raised by `se_inflation` standard errors.
    pub inflated: ValueTable,
    /// Standard error of the stopped-sum estimate per lattice point (0 below `x*_L`).
    pub std_error: Vec<f64>,
}

impl UpperBound {
    /// Largest `u(x) - U(x)` over the lattice using the inflated bound; `≤ 0` means `u ≤ U`.
    pub fn max_excess(&self, u: &ValueTable) -> f64 {
        u.values()
            .iter()
            .zip(self.inflated.values())
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `E[h(x - S_{N(x - x*_L)+1})]` for every lattice index at or above `x*_L`,
/// with standard errors. One demand path serves all `x`: the first-passage
/// index over `y = x - x*_L` only moves forward as `y` grows.
pub fn stopped_sum_holding(
    params: &InventoryParams,
    lower: f64,
    mc: &MonteCarloConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let lattice = params.lattice();
    let start = lattice
        .index_of(lower)
        .ok_or_else(|| Error::Domain(format!("x*_L = {lower} is not a lattice point")))?;
    if mc.paths < 2 {
        return Err(Error::Configuration(
            "Monte Carlo needs at least two paths".into(),
        ));
    }
    let n = lattice.len() - start;
    let demand = params.discrete_demand();
    let h = params.holding();
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..mc.paths {
        // partial sum in grid steps
        let mut s = demand.sample_steps(&mut rng);
        for k in 0..n {
            while s <= k {
                s += demand.sample_steps(&mut rng);
            }
            let x = lattice.level((start + k) as isize);
            let v = h.eval(x - s as f64 * lattice.step());
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let m = mc.paths as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let se = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, mu)| ((q / m - mu * mu).max(0.0) * m / (m - 1.0) / m).sqrt())
        .collect();
    Ok((mean, se))
}

/// The bound `U` on `params`' lattice for the box `bbox`.
pub fn upper_bound_u(
    params: &InventoryParams,
    bbox: BoundingBox,
    mc: &MonteCarloConfig,
) -> Result<UpperBound> {
    let lattice = *params.lattice();
    let start = lattice
        .index_of(bbox.lower)
        .ok_or_else(|| Error::Domain(format!("x*_L = {} is not a lattice point", bbox.lower)))?;
    lattice
        .index_of(bbox.upper)
        .ok_or_else(|| Error::Domain(format!("x*_U = {} is not a lattice point", bbox.upper)))?;
    let (stopped, se) = stopped_sum_holding(params, bbox.lower, mc)?;
    let k = params.fixed_cost();
    let c = params.unit_cost();
    let ed = params.demand().mean();
    let demand = params.discrete_demand();

    let mut point = Vec::with_capacity(lattice.len());
    let mut inflated = Vec::with_capacity(lattice.len());
    let mut std_error = vec![0.0; lattice.len()];
    for (i, x) in lattice.levels().enumerate() {
        if i < start {
            let u = k + c * (bbox.upper - x);
            point.push(u);
            inflated.push(u);
        } else {
            let j = i - start;
            let renewal = 1.0 + renewal_function(demand, x - bbox.lower);
            let base = k + c * (bbox.upper - bbox.lower);
            let hx = params.holding().eval(x);
            point.push(base + (hx + stopped[j] + c * ed) * renewal);
            inflated.push(base + (hx + stopped[j] + mc.se_inflation * se[j] + c * ed) * renewal);
            std_error[i] = se[j];
        }
    }
    Ok(UpperBound {
        bbox,
        point: ValueTable::new(lattice, point, None)?,
        inflated: ValueTable::new(lattice, inflated, None)?,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DemandPmf, Holding};

    fn params(demand: DemandPmf) -> InventoryParams {
        InventoryParams::new(
            10.0,
            1.0,
            Holding::holding_backorder(2.0, 3.0).unwrap(),
            demand,
            Lattice::new(-10.0, 10.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn linear_branch_below_box() {
        let p = params(DemandPmf::new(vec![0.0, 1.0, 2.0], vec![0.3, 0.4, 0.3]).unwrap());
        let mc = MonteCarloConfig {
            paths: 100,
            ..Default::default()
        };
        let u = upper_bound_u(&p, BoundingBox::new(0.0, 5.0).unwrap(), &mc).unwrap();
        assert_eq!(u.point.eval(-3.0).unwrap(), 18.0);
        assert_eq!(u.inflated.eval(-3.0).unwrap(), 18.0);
    }

    #[test]
    fn deterministic_demand_at_lower_end() {
        let p = params(DemandPmf::deterministic(1.0).unwrap());
        let mc = MonteCarloConfig {
            paths: 10,
            ..Default::default()
        };
        let u = upper_bound_u(&p, BoundingBox::new(-2.0, 3.0).unwrap(), &mc).unwrap();
        // N(0) = 0 and S_1 = 1: U = K + c̄·5 + (h(-2) + h(-3) + c̄)
        let expected = 10.0 + 5.0 + (6.0 + 9.0 + 1.0);
        assert!((u.point.eval(-2.0).unwrap() - expected).abs() < 1e-12);
        assert!(u.std_error.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn box_containment() {
        let l = Lattice::new(-10.0, 10.0, 1.0).unwrap();
        let b = BoundingBox::around(&l, &[1.0, 3.0], 2).unwrap();
        assert_eq!((b.lower, b.upper), (-1.0, 5.0));
        assert!(b.check_contains(&[0.0, 5.0]).is_ok());
        assert!(matches!(
            b.check_contains(&[6.0]),
            Err(Error::BoundingBox { .. })
        ));
        let edge = BoundingBox::around(&l, &[9.0], 3).unwrap();
        assert_eq!(edge.upper, 10.0);
        assert!(BoundingBox::new(1.0, 0.0).is_err());
    }

    #[test]
    fn argmins_with_ties() {
        let l = Lattice::new(0.0, 4.0, 1.0).unwrap();
        let v = ValueTable::new(l, vec![3.0, 1.0, 1.0, 2.0, 5.0], None).unwrap();
        assert_eq!(argmin_set(&v, 0.0), vec![1.0, 2.0]);
    }
}
