//! JSON instance files.
//!
//! ```json
//! {
//!   "K": 10, "c_bar": 1,
//!   "h_slope_left": -3, "h_breakpoints": [[0, 2]],
//!   "demand": {"support": [0, 1, 2], "probs": [0.3, 0.4, 0.3]},
//!   "lattice": {"x_min": -30, "x_max": 40, "step": 1}
//! }
//! ```
//!
//! `h_breakpoints` lists `[x, slope to the right of x]`; `h_slope_left` is the
//! slope left of the first breakpoint. `lattice` may be omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::{DemandPmf, Holding, InventoryParams};
use crate::policy::LatticeSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "K")]
    pub fixed_cost: f64,
    pub c_bar: f64,
    pub h_slope_left: f64,
    pub h_breakpoints: Vec<(f64, f64)>,
    pub demand: DemandSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance JSON: {e}")))
    }

    pub fn build(&self) -> Result<InventoryParams> {
        let holding = Holding::new(self.h_slope_left, self.h_breakpoints.clone())?;
        let demand = DemandPmf::new(self.demand.support.clone(), self.demand.probs.clone())?;
        let lattice = match &self.lattice {
            Some(l) => l.build()?,
            None => default_lattice(self.c_bar, &holding, &demand)?,
        };
        InventoryParams::new(self.fixed_cost, self.c_bar, holding, demand, lattice)
    }

    pub fn from_params(p: &InventoryParams) -> Self {
        use crate::dp::OrderingModel;
        InstanceFile {
            fixed_cost: p.fixed_cost(),
            c_bar: p.unit_cost(),
            h_slope_left: p.holding().left_slope(),
            h_breakpoints: p.holding().breakpoints().to_vec(),
            demand: DemandSpec {
                support: p.demand().support().to_vec(),
                probs: p.demand().probs().to_vec(),
            },
            lattice: Some(p.lattice().into()),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<InventoryParams> {
    InstanceFile::parse(text)?.build()
}

pub fn load_instance(path: &Path) -> Result<InventoryParams> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

/// Largest step dividing every positive demand value, tried from 1 downward by halving.
fn demand_step(demand: &DemandPmf) -> Result<f64> {
    let mut step = 1.0;
    for _ in 0..20 {
        if demand.on_grid(step).is_ok() {
            return Ok(step);
        }
        step /= 2.0;
    }
    Err(Error::invalid(
        "demand support on a dyadic lattice when no lattice is given",
        format!("support {:?}", demand.support()),
    ))
}

/// Lattice around the myopic minimizer of `c̄y + E[h(y-D)]`, spanning
/// `±40·max(σ_D, step)` and reaching down to the lowest breakpoint of `h`.
pub fn default_lattice(c_bar: f64, holding: &Holding, demand: &DemandPmf) -> Result<Lattice> {
    let step = demand_step(demand)?;
    let g0 = |y: f64| {
        c_bar * y
            + demand
                .iter()
                .map(|(d, p)| p * holding.eval(y - d))
                .sum::<f64>()
    };
    // the objective is convex piecewise linear with kinks at b + d
    let myopic = holding
        .breakpoints()
        .iter()
        .flat_map(|&(b, _)| demand.support().iter().map(move |d| b + d))
        .min_by(|a, b| g0(*a).total_cmp(&g0(*b)))
        .expect("holding has a breakpoint");
    let scale = 40.0 * demand.std_dev().max(step);
    let lo = ((myopic - scale) / step)
        .floor()
        .min((holding.min_breakpoint() / step).floor())
        * step;
    let hi = ((myopic + scale) / step).ceil() * step;
    Lattice::new(lo, hi, step)
}
