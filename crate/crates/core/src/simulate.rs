//! Monte Carlo trajectories of `x_{t+1} = x_t + a_t - D_{t+1}`.
//!
//! The per-period cost is the expected one-step cost `c(x_t, a_t)`, so the
//! demand draw only drives the state. States are not clamped to any lattice.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BelowGrid, TabularPolicy};
use crate::model::InventoryParams;
use crate::policy::SSPolicy;

const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub replications: usize,
    pub seed: u64,
    pub initial_state: f64,
    pub burn_in: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.replications == 0 {
            return Err(Error::Configuration(
                "horizon and replications must be positive".into(),
            ));
        }
        if self.burn_in >= self.horizon {
            return Err(Error::Configuration(format!(
                "burn-in {} must be shorter than the horizon {}",
                self.burn_in, self.horizon
            )));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::Configuration("initial state must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub replications: usize,
}

impl SimEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let half_width_95 = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
            Z_95 * (var / r).sqrt()
        };
        SimEstimate {
            mean,
            half_width_95,
            replications: xs.len(),
        }
    }
}

/// A stationary ordering rule defined at every level.
pub trait OrderRule: Sync {
    fn order(&self, x: f64) -> f64;
}

impl OrderRule for SSPolicy {
    fn order(&self, x: f64) -> f64 {
        self.order_at(x)
    }
}

/// Lattice points follow the table; levels below the lattice follow the
/// below-grid rule; anything else (above the lattice or off the grid) holds.
impl OrderRule for TabularPolicy {
    fn order(&self, x: f64) -> f64 {
        let lattice = self.lattice();
        match lattice.offset_of(x) {
            Some(k) if k >= 0 && (k as usize) < lattice.len() => self.order_quantity(k as usize),
            Some(k) if k < 0 => match self.below_grid() {
                BelowGrid::OrderUpTo(t) => lattice.level(t as isize) - x,
                BelowGrid::Hold => 0.0,
            },
            _ => 0.0,
        }
    }
}

pub fn step(x: f64, a: f64, d: f64) -> f64 {
    x + a - d
}

fn rng_for(seed: u64, replication: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ replication as u64)
}

/// One replication, calling `visit(t, x, a, d, cost)` every period.
fn run<P: OrderRule + ?Sized>(
    params: &InventoryParams,
    pol: &P,
    cfg: &SimConfig,
    replication: usize,
    mut visit: impl FnMut(usize, f64, f64, f64, f64),
) {
    let demand = params.discrete_demand();
    let mut rng = rng_for(cfg.seed, replication);
    let mut x = cfg.initial_state;
    for t in 0..cfg.horizon {
        let a = pol.order(x);
        let cost = params.cost_at(x, a);
        let d = demand.sample(&mut rng);
        visit(t, x, a, d, cost);
        x = step(x, a, d);
    }
}

/// Long-run average cost: per replication, the mean one-step cost after burn-in.
pub fn simulate_average<P: OrderRule + ?Sized>(
    params: &InventoryParams,
    pol: &P,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    cfg.validate()?;
    let counted = (cfg.horizon - cfg.burn_in) as f64;
    let per_rep: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut total = 0.0;
            run(params, pol, cfg, r, |t, _, _, _, c| {
                if t >= cfg.burn_in {
                    total += c;
                }
            });
            total / counted
        })
        .collect();
    Ok(SimEstimate::from_samples(&per_rep))
}

/// Total discounted cost over the horizon. Burn-in is ignored.
pub fn simulate_discounted<P: OrderRule + ?Sized>(
    params: &InventoryParams,
    pol: &P,
    alpha: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Precondition(format!(
            "discount factor must lie in [0,1), got {alpha}"
        )));
    }
    let per_rep: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut total = 0.0;
            let mut weight = 1.0;
            run(params, pol, cfg, r, |_, _, _, _, c| {
                total += weight * c;
                weight *= alpha;
            });
            total
        })
        .collect();
    Ok(SimEstimate::from_samples(&per_rep))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub x: f64,
    pub a: f64,
    pub d: f64,
    pub cost: f64,
}

/// The first replication's path.
pub fn trajectory<P: OrderRule + ?Sized>(
    params: &InventoryParams,
    pol: &P,
    cfg: &SimConfig,
) -> Result<Vec<TrajectoryRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.horizon);
    run(params, pol, cfg, 0, |t, x, a, d, cost| {
        rows.push(TrajectoryRow { t, x, a, d, cost })
    });
    Ok(rows)
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(["t", "x", "a", "d", "cost"])
        .map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            format!("{:.16e}", r.x),
            format!("{:.16e}", r.a),
            format!("{:.16e}", r.d),
            format!("{:.16e}", r.cost),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
