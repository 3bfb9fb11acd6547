//! Uniform inventory-level grids and the tables and policies tabulated on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ALIGN_EPS: f64 = 1e-9;

/// A finite, uniformly spaced grid of inventory levels `x_min + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    x_min: f64,
    x_max: f64,
    step: f64,
    n_points: usize,
}

impl Lattice {
    pub fn new(x_min: f64, x_max: f64, step: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && step.is_finite()) {
            return Err(Error::invalid(
                "lattice bounds finite",
                format!("{x_min}, {x_max}, {step}"),
            ));
        }
        if step <= 0.0 {
            return Err(Error::invalid("lattice step > 0", format!("step = {step}")));
        }
        if x_min >= x_max {
            return Err(Error::invalid(
                "lattice x_min < x_max",
                format!("[{x_min}, {x_max}]"),
            ));
        }
        let span = (x_max - x_min) / step;
        let cells = span.round();
        if (span - cells).abs() > ALIGN_EPS * span.max(1.0) {
            return Err(Error::invalid(
                "lattice closure x_max = x_min + (n-1)*step",
                format!("({x_max} - {x_min}) / {step} = {span} is not an integer"),
            ));
        }
        Ok(Lattice {
            x_min,
            x_max,
            step,
            n_points: cells as usize + 1,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Level of the grid point with (possibly negative) offset `i` from `x_min`.
    pub fn level(&self, i: isize) -> f64 {
        self.x_min + i as f64 * self.step
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.level(i as isize))
    }

    /// Offset of `x` from `x_min` in grid steps, if `x` is aligned with the grid.
    /// The result may lie outside `0..len()`.
    pub fn offset_of(&self, x: f64) -> Option<isize> {
        let k = (x - self.x_min) / self.step;
        let r = k.round();
        ((k - r).abs() <= ALIGN_EPS * k.abs().max(1.0)).then_some(r as isize)
    }

    /// Index of `x` when it is a grid point.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.offset_of(x)
            .filter(|&k| k >= 0 && (k as usize) < self.n_points)
            .map(|k| k as usize)
    }

    /// Number of grid steps in a nonnegative amount, if it is a multiple of `step`.
    pub fn steps_in(&self, amount: f64) -> Option<usize> {
        if amount < 0.0 {
            return None;
        }
        let k = amount / self.step;
        let r = k.round();
        ((k - r).abs() <= ALIGN_EPS * k.max(1.0)).then_some(r as usize)
    }
}

/// Affine function `intercept + slope * x`, used to extend a table below `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTail {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearTail {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    pub fn shifted(&self, c: f64) -> Self {
        LinearTail {
            intercept: self.intercept + c,
            slope: self.slope,
        }
    }
}

/// A real function tabulated on a lattice, with an optional linear extension
/// below the lattice. Evaluation below `x_min` without an extension is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    lattice: Lattice,
    values: Vec<f64>,
    below_grid: Option<LinearTail>,
}

impl ValueTable {
    pub fn new(lattice: Lattice, values: Vec<f64>, below_grid: Option<LinearTail>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::Domain(format!(
                "table has {} values for a lattice of {} points",
                values.len(),
                lattice.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "table value at x = {} is not finite",
                lattice.level(i as isize)
            )));
        }
        if let Some(t) = below_grid {
            if !(t.intercept.is_finite() && t.slope.is_finite()) {
                return Err(Error::Domain("linear tail is not finite".into()));
            }
        }
        Ok(ValueTable {
            lattice,
            values,
            below_grid,
        })
    }

    /// Constant table, extended by the same constant below the lattice.
    pub fn constant(lattice: Lattice, c: f64) -> Self {
        ValueTable {
            lattice,
            values: vec![c; lattice.len()],
            below_grid: Some(LinearTail {
                intercept: c,
                slope: 0.0,
            }),
        }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(lattice, lattice.levels().map(f).collect(), None)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn below_grid(&self) -> Option<LinearTail> {
        self.below_grid
    }

    pub fn with_below_grid(mut self, tail: Option<LinearTail>) -> Self {
        self.below_grid = tail;
        self
    }

    /// Value at grid offset `k` from `x_min`; negative offsets use the tail.
    pub fn at_offset(&self, k: isize) -> Result<f64> {
        if k >= 0 {
            self.values.get(k as usize).copied().ok_or_else(|| {
                Error::Domain(format!(
                    "level {} lies above the lattice maximum {}",
                    self.lattice.level(k),
                    self.lattice.x_max()
                ))
            })
        } else {
            let x = self.lattice.level(k);
            self.below_grid.map(|t| t.at(x)).ok_or_else(|| {
                Error::TruncationUnderflow(format!(
                    "level {x} lies below the lattice minimum {} and the table has no linear extension",
                    self.lattice.x_min()
                ))
            })
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let k = self
            .lattice
            .offset_of(x)
            .ok_or_else(|| Error::Domain(format!("level {x} is not aligned with the lattice")))?;
        self.at_offset(k)
    }

    /// Table plus a constant, tail included.
    pub fn shifted(&self, c: f64) -> Self {
        ValueTable {
            lattice: self.lattice,
            values: self.values.iter().map(|v| v + c).collect(),
            below_grid: self.below_grid.map(|t| t.shifted(c)),
        }
    }

    /// Smallest value and the first index attaining it.
    pub fn min(&self) -> (usize, f64) {
        let mut best = (0, self.values[0]);
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// Sup-norm distance on the lattice points.
    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// What a tabular policy does at levels below the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BelowGrid {
    /// Order up to the lattice point with this index.
    OrderUpTo(usize),
    /// Never order.
    Hold,
}

/// Deterministic stationary policy: order quantity (in grid steps) per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    lattice: Lattice,
    order_steps: Vec<usize>,
    below_grid: BelowGrid,
}

impl TabularPolicy {
    pub fn new(lattice: Lattice, order_steps: Vec<usize>, below_grid: BelowGrid) -> Result<Self> {
        if order_steps.len() != lattice.len() {
            return Err(Error::Domain(format!(
                "policy has {} entries for a lattice of {} points",
                order_steps.len(),
                lattice.len()
            )));
        }
        if let Some(i) = order_steps
            .iter()
            .enumerate()
            .position(|(i, &a)| i + a >= lattice.len())
        {
            return Err(Error::Domain(format!(
                "order at x = {} leaves the lattice",
                lattice.level(i as isize)
            )));
        }
        if let BelowGrid::OrderUpTo(t) = below_grid {
            if t >= lattice.len() {
                return Err(Error::Domain(format!(
                    "below-grid target index {t} is off the lattice"
                )));
            }
        }
        Ok(TabularPolicy {
            lattice,
            order_steps,
            below_grid,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn order_steps(&self) -> &[usize] {
        &self.order_steps
    }

    pub fn below_grid(&self) -> BelowGrid {
        self.below_grid
    }

    /// Order quantity in inventory units at lattice index `i`.
    pub fn order_quantity(&self, i: usize) -> f64 {
        self.order_steps[i] as f64 * self.lattice.step()
    }

    pub fn order_quantities(&self) -> Vec<f64> {
        (0..self.lattice.len())
            .map(|i| self.order_quantity(i))
            .collect()
    }
}
