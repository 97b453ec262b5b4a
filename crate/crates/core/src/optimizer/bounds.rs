use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NonlinearParams;
use crate::timeseries::Window;

pub const M_RANGE: (f64, f64) = (0.001, 1.999);
pub const OMEGA_RANGE: (f64, f64) = (0.01, 40.0);
pub const PHI_RANGE: (f64, f64) = (0.001, 2.0 * PI - 0.001);
/// Upper limit of t_c as a fraction of the window length past t2.
pub const TC_HORIZON_FRACTION: f64 = 0.375;

/// Axis-aligned box over `(tc, m, omega, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    lo: [f64; 4],
    hi: [f64; 4],
}

impl SearchBounds {
    /// Standard box for a fitting window: t_c in `[t2, t2 + 0.375 (t2 - t1)]`.
    pub fn for_window(window: &Window) -> Self {
        let tc_hi = window.t2 + TC_HORIZON_FRACTION * (window.t2 - window.t1);
        Self {
            lo: [window.t2, M_RANGE.0, OMEGA_RANGE.0, PHI_RANGE.0],
            hi: [tc_hi, M_RANGE.1, OMEGA_RANGE.1, PHI_RANGE.1],
        }
    }

    /// Arbitrary box; each range must satisfy `lo <= hi`.
    pub fn from_ranges(ranges: [(f64, f64); 4]) -> Result<Self> {
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for (j, &(a, b)) in ranges.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::Config(format!("empty search range [{a}, {b}] for dimension {j}")));
            }
            lo[j] = a;
            hi[j] = b;
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> [f64; 4] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 4] {
        self.hi
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn contains(&self, nl: &NonlinearParams) -> bool {
        nl.to_array()
            .iter()
            .enumerate()
            .all(|(j, &p)| p >= self.lo[j] && p <= self.hi[j])
    }

    pub fn clamp(&self, p: [f64; 4]) -> [f64; 4] {
        let mut out = p;
        for j in 0..4 {
            out[j] = p[j].clamp(self.lo[j], self.hi[j]);
        }
        out
    }

    /// Maps a point of the unit hypercube into the box.
    pub fn from_unit(&self, u: [f64; 4]) -> NonlinearParams {
        let mut p = [0.0; 4];
        for j in 0..4 {
            p[j] = if self.width(j) > 0.0 {
                (self.lo[j] + u[j].clamp(0.0, 1.0) * self.width(j)).min(self.hi[j])
            } else {
                self.lo[j]
            };
        }
        NonlinearParams::from_array(p)
    }

    pub fn to_unit(&self, nl: &NonlinearParams) -> [f64; 4] {
        let p = nl.to_array();
        let mut u = [0.0; 4];
        for j in 0..4 {
            if self.width(j) > 0.0 {
                u[j] = (p[j] - self.lo[j]) / self.width(j);
            }
        }
        u
    }

    /// Euclidean norm of a parameter displacement measured in box widths.
    /// Collapsed dimensions are ignored.
    pub fn unit_norm(&self, delta: [f64; 4]) -> f64 {
        (0..4)
            .filter(|&j| self.width(j) > 0.0)
            .map(|j| (delta[j] / self.width(j)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
