use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform sample points `x_min, …, x_max` (both ends included).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "grid needs n >= 3 and x_min < x_max (got [{x_min}, {x_max}], n = {n})"
            )));
        }
        Ok(Grid { x_min, x_max, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.x_max
        } else {
            self.x_min + self.spacing() * k as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }
}
