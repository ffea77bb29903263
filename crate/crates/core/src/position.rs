//! Current-position estimation: the lane midpoint at the ROI ceiling and
//! the past-accumulated-average (PAA) smoother.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lane_detect::{LaneError, LanePair};

/// Frame width in pixels; positions live in `[0, FRAME_WIDTH]`.
pub const FRAME_WIDTH: f64 = 320.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PositionError {
    #[error("position {0} outside [0, 320]")]
    OutOfRange(f64),
    #[error(transparent)]
    Lane(#[from] LaneError),
    #[error("PAA capacity must be at least 1")]
    ZeroCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoother {
    Paa,
    Kalman,
}

impl fmt::Display for Smoother {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoother::Paa => "paa",
            Smoother::Kalman => "kalman",
        })
    }
}

impl FromStr for Smoother {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paa" => Ok(Smoother::Paa),
            "kalman" => Ok(Smoother::Kalman),
            other => Err(format!(
                "unknown smoother {other:?}, expected paa or kalman"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub x: f64,
    pub y: f64,
}

impl Default for Setpoint {
    fn default() -> Self {
        Self { x: 160.0, y: 120.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub raw: Option<f64>,
    pub paa: Option<f64>,
    pub kalman: Option<f64>,
    /// Output of the configured smoother.
    pub smoothed: Option<f64>,
    pub method: Smoother,
    pub lanes_detected: usize,
}

/// Average of the two lanes' crossings with row `ceiling_y`, clamped to the
/// frame. Absent unless both lanes are present.
pub fn lane_midpoint(lanes: &LanePair, ceiling_y: f64) -> Result<Option<f64>, PositionError> {
    let left = lanes.left.map(|l| l.x_at(ceiling_y)).transpose()?;
    let right = lanes.right.map(|l| l.x_at(ceiling_y)).transpose()?;
    Ok(match (left, right) {
        (Some(l), Some(r)) => Some(((l + r) / 2.0).clamp(0.0, FRAME_WIDTH)),
        _ => None,
    })
}

fn check_range(x: f64) -> Result<f64, PositionError> {
    if (0.0..=FRAME_WIDTH).contains(&x) {
        Ok(x)
    } else {
        Err(PositionError::OutOfRange(x))
    }
}

/// Sliding window over the last `capacity` raw positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PaaBuffer {
    capacity: usize,
    values: VecDeque<f64>,
}

impl Default for PaaBuffer {
    fn default() -> Self {
        Self::new(8).expect("non-zero")
    }
}

impl PaaBuffer {
    pub fn new(capacity: usize) -> Result<Self, PositionError> {
        if capacity == 0 {
            return Err(PositionError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            values: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
        }
    }

    /// Pushes `raw`, evicting the oldest value when full, and returns the
    /// window mean.
    pub fn update(&mut self, raw: f64) -> Result<f64, PositionError> {
        check_range(raw)?;
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(raw);
        Ok(self.mean().expect("just pushed"))
    }

    /// Mean of the window without modifying it, for frames with no raw
    /// position.
    pub fn peek_on_miss(&self) -> Option<f64> {
        self.mean()
    }
}
