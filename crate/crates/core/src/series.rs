//! Uniform time grids and sampled scalar series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_k = start + k * step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl TimeGrid {
    /// Grid of `n_points` samples covering `[0, t_end]` inclusive.
    pub fn new(t_end: f64, n_points: usize) -> Result<Self> {
        Self::span(0.0, t_end, n_points)
    }

    pub fn span(start: f64, end: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidGrid(format!("empty span [{start}, {end}]")));
        }
        Ok(Self {
            start,
            step: (end - start) / (n_points - 1) as f64,
            len: n_points,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.at(k))
    }

    /// Index of the grid point within `1e-9 * step` of `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let u = (t - self.start) / self.step;
        let k = u.round();
        if k < 0.0 || k as usize >= self.len || (u - k).abs() > 1e-9 {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Same grid with the step halved (`2 * len - 1` points).
    pub fn refined(&self) -> Self {
        Self {
            start: self.start,
            step: self.step / 2.0,
            len: 2 * self.len - 1,
        }
    }
}

/// A named scalar quantity sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub units: String,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, units: impl Into<String>, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            units: units.into(),
            grid,
            values,
        })
    }

    pub fn from_fn(name: impl Into<String>, units: impl Into<String>, grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.times().map(f).collect();
        Self {
            name: name.into(),
            units: units.into(),
            grid,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.times().zip(self.values.iter().copied())
    }

    /// Linear interpolation; `None` outside the sampled span.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let u = (t - self.grid.start()) / self.grid.step();
        if !(u >= 0.0) || u > (self.len() - 1) as f64 {
            return None;
        }
        let k = (u.floor() as usize).min(self.len() - 2);
        let w = u - k as f64;
        Some(self.values[k] * (1.0 - w) + self.values[k + 1] * w)
    }

    /// Finite-difference derivative: central inside, one-sided at the ends.
    pub fn derivative(&self) -> Vec<f64> {
        central_differences(&self.values, self.grid.step())
    }
}

pub(crate) fn central_differences(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            if k == 0 {
                (values[1] - values[0]) / step
            } else if k == n - 1 {
                (values[n - 1] - values[n - 2]) / step
            } else {
                (values[k + 1] - values[k - 1]) / (2.0 * step)
            }
        })
        .collect()
}
