//! Instances and brute-force oracles shared by the integration tests. The
//! oracles work from the raw model (h, pmf, K, c̄) and never call the solver.

#![allow(dead_code)]

use acoe_lab::lattice::Lattice;
use acoe_lab::model::{DemandPmf, Holding, InventoryParams};
use nalgebra::{DMatrix, DVector};

/// Raw integer-lattice model used by the oracles.
#[derive(Debug, Clone)]
pub struct Raw {
    pub k: f64,
    pub c: f64,
    pub hold: f64,
    pub back: f64,
    pub demand: Vec<(i64, f64)>,
}

impl Raw {
    pub fn h(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.hold * x
        } else {
            -self.back * x
        }
    }

    /// `E h(y - D)`.
    pub fn eh(&self, y: i64) -> f64 {
        self.demand
            .iter()
            .map(|&(d, p)| p * self.h((y - d) as f64))
            .sum()
    }

    pub fn max_demand(&self) -> i64 {
        self.demand.iter().map(|&(d, _)| d).max().unwrap()
    }

    pub fn params(&self, x_min: f64, x_max: f64) -> InventoryParams {
        InventoryParams::new(
            self.k,
            self.c,
            Holding::holding_backorder(self.hold, self.back).unwrap(),
            DemandPmf::new(
                self.demand.iter().map(|&(d, _)| d as f64).collect(),
                self.demand.iter().map(|&(_, p)| p).collect(),
            )
            .unwrap(),
            Lattice::new(x_min, x_max, 1.0).unwrap(),
        )
        .unwrap()
    }
}

/// K=10, c̄=1, h = 2x⁺ + 3x⁻, D ∈ {0,1,2} w.p. {.3,.4,.3}.
pub fn raw_a() -> Raw {
    Raw {
        k: 10.0,
        c: 1.0,
        hold: 2.0,
        back: 3.0,
        demand: vec![(0, 0.3), (1, 0.4), (2, 0.3)],
    }
}

pub fn instance_a() -> InventoryParams {
    raw_a().params(-30.0, 40.0)
}

/// K=2, c̄=1, h = 2x⁺ + 3x⁻, D ∈ {0,1} w.p. {.4,.6}.
pub fn raw_tiny() -> Raw {
    Raw {
        k: 2.0,
        c: 1.0,
        hold: 2.0,
        back: 3.0,
        demand: vec![(0, 0.4), (1, 0.6)],
    }
}

/// Relative value iteration for the average-cost problem on the integer
/// states `lo..=hi`. Holding (or ordering up to `y`) is admissible only when
/// `y - max D ≥ lo`, so the chain stays on the grid.
pub struct Rvi {
    pub lo: i64,
    pub gain: f64,
    /// Relative values, normalized to minimum 0.
    pub u: Vec<f64>,
    pub sweeps: usize,
}

impl Rvi {
    pub fn at(&self, x: i64) -> f64 {
        self.u[(x - self.lo) as usize]
    }
}

pub fn relative_value_iteration(
    raw: &Raw,
    lo: i64,
    hi: i64,
    span_tol: f64,
    max_sweeps: usize,
) -> Rvi {
    let n = (hi - lo + 1) as usize;
    let dmax = raw.max_demand();
    // cost of ending the period at y, before the continuation
    let stage: Vec<f64> = (lo..=hi).map(|y| raw.eh(y)).collect();
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    for sweep in 1..=max_sweeps {
        let cont: Vec<f64> = (0..n)
            .map(|j| {
                let y = lo + j as i64;
                if y - dmax < lo {
                    f64::INFINITY
                } else {
                    stage[j]
                        + raw
                            .demand
                            .iter()
                            .map(|&(d, p)| p * u[(y - d - lo) as usize])
                            .sum::<f64>()
                }
            })
            .collect();
        for i in 0..n {
            let x = lo + i as i64;
            let mut best = cont[i];
            for j in i + 1..n {
                let y = lo + j as i64;
                best = best.min(raw.k + raw.c * (y - x) as f64 + cont[j]);
            }
            next[i] = best;
        }
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let hi_d = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo_d = diff.iter().cloned().fold(f64::INFINITY, f64::min);
        let m = next.iter().cloned().fold(f64::INFINITY, f64::min);
        for (a, b) in u.iter_mut().zip(&next) {
            *a = b - m;
        }
        if hi_d - lo_d <= span_tol {
            return Rvi {
                lo,
                gain: 0.5 * (hi_d + lo_d),
                u,
                sweeps: sweep,
            };
        }
    }
    panic!("relative value iteration did not converge in {max_sweeps} sweeps");
}

/// Exact discounted value of every policy on `lo..=hi`, minimized state by
/// state. Each policy is an order-up-to level per lattice state plus one
/// shared target used by the states below `lo` that holding can reach.
pub fn enumerate_policies(raw: &Raw, lo: i64, hi: i64, alpha: f64) -> Vec<f64> {
    let dmax = raw.max_demand();
    let below = dmax as usize;
    let n = (hi - lo + 1) as usize;
    let dim = n + below;
    // state index: below-grid levels lo-dmax..lo-1 first, then the lattice
    let idx = |x: i64| (x - (lo - dmax)) as usize;
    let mut best = vec![f64::INFINITY; n];
    let mut choice = vec![0usize; n];
    loop {
        for target in 0..n {
            let mut a = DMatrix::<f64>::identity(dim, dim);
            let mut b = DVector::<f64>::zeros(dim);
            let mut row = |x: i64, y: i64| {
                let r = idx(x);
                b[r] = raw.eh(y)
                    + if y > x {
                        raw.k + raw.c * (y - x) as f64
                    } else {
                        0.0
                    };
                for &(d, p) in &raw.demand {
                    a[(r, idx(y - d))] -= alpha * p;
                }
            };
            for x in lo - dmax..lo {
                row(x, lo + target as i64);
            }
            for i in 0..n {
                row(lo + i as i64, lo + (i + choice[i]) as i64);
            }
            let v = a.lu().solve(&b).expect("policy system is nonsingular");
            for i in 0..n {
                best[i] = best[i].min(v[below + i]);
            }
        }
        // next policy in mixed radix: state i orders 0..n-1-i steps
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            choice[i] += 1;
            if i + choice[i] < n {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Exact discounted value of the (s,S) policy at every lattice state, with
/// `v(x) = K + c̄(S - x) + v(S)` below `s` (on or off the lattice).
pub fn evaluate_ss_exact(raw: &Raw, lo: i64, hi: i64, s: i64, big_s: i64, alpha: f64) -> Vec<f64> {
    let n = (hi - lo + 1) as usize;
    let i_s = (big_s - lo) as usize;
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        let x = lo + i as i64;
        if x < s {
            a[(i, i_s)] -= 1.0;
            b[i] = raw.k + raw.c * (big_s - x) as f64;
        } else {
            b[i] = raw.eh(x);
            for &(d, p) in &raw.demand {
                let y = x - d;
                if y >= lo {
                    a[(i, (y - lo) as usize)] -= alpha * p;
                } else {
                    // below the lattice, and below s since s ≥ lo
                    a[(i, i_s)] -= alpha * p;
                    b[i] += alpha * p * (raw.k + raw.c * (big_s - y) as f64);
                }
            }
        }
    }
    let v = a.lu().solve(&b).expect("(s,S) system is nonsingular");
    v.iter().copied().collect()
}

/// Law of the first partial sum exceeding `y` via the renewal mass of every
/// level `≤ y`; returns `E h(x - S_{N(y)+1})`.
pub fn stopped_sum_exact(raw: &Raw, x: i64, y: i64) -> f64 {
    let p0 = raw
        .demand
        .iter()
        .find(|&&(d, _)| d == 0)
        .map(|&(_, p)| p)
        .unwrap_or(0.0);
    let mut mass = vec![0.0; (y + 1) as usize];
    for s in 0..=y {
        let mut m = if s == 0 { 1.0 } else { 0.0 };
        for &(d, p) in &raw.demand {
            if d > 0 && d <= s {
                m += p * mass[(s - d) as usize];
            }
        }
        // zero demand revisits the same level geometrically often
        mass[s as usize] = m / (1.0 - p0);
    }
    let mut e = 0.0;
    for s in 0..=y {
        for &(d, p) in &raw.demand {
            if s + d > y {
                e += mass[s as usize] * p * raw.h((x - s - d) as f64);
            }
        }
    }
    e
}
