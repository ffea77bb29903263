//! Hough line extraction and lane fitting.
//!
//! Angles follow the lane convention used throughout the crate: `theta` is
//! the line's angle from the vertical image axis in degrees, in (−90°, 90°].
//! Lines leaning like `/` (left lane markers seen from the vehicle) have
//! negative `theta`, lines leaning like `\` positive. A line is the set
//! `x·cos(−θ) + y·sin(−θ) = ρ` in image coordinates (y down), so `rho` is a
//! signed perpendicular distance from the top-left origin.

mod annotate;

pub use annotate::{annotate, draw_lane, draw_marker};

use thiserror::Error;

use crate::imaging::EdgeMap;

/// Left lane markers have `theta` in this closed window (degrees).
pub const LEFT_WINDOW: (f64, f64) = (-50.0, -25.0);
/// Right lane markers have `theta` in this closed window (degrees).
pub const RIGHT_WINDOW: (f64, f64) = (25.0, 55.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaneError {
    #[error("vertical line (theta = {theta}°) has no slope/intercept form")]
    Vertical { theta: f64 },
    #[error("horizontal lane has no unique crossing with a row")]
    Horizontal,
    #[error("hough parameters must be strictly positive")]
    HoughParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarLine {
    pub rho: f64,
    pub theta: f64,
    pub votes: u32,
}

impl PolarLine {
    /// Builds a line from the standard Hough normal angle `theta_n` in
    /// [0°, 180°) measured from the x axis towards +y.
    pub fn from_normal(rho: f64, theta_n: f64, votes: u32) -> Self {
        // The same line has normal (−ρ, θn − 180°); fold into (−90°, 90°]
        // and flip the sign to get the lane convention.
        let (rho, folded) = if theta_n < 90.0 {
            (rho, theta_n)
        } else {
            (-rho, theta_n - 180.0)
        };
        Self {
            rho,
            theta: if folded == 0.0 { 0.0 } else { -folded },
            votes,
        }
    }
}

/// Line in slope/intercept form, `y = m·x + b` with y growing downwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub m: f64,
    pub b: f64,
}

impl Lane {
    /// Column where the lane crosses `row`.
    pub fn x_at(&self, row: f64) -> Result<f64, LaneError> {
        if self.m == 0.0 {
            return Err(LaneError::Horizontal);
        }
        Ok((row - self.b) / self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LanePair {
    pub left: Option<Lane>,
    pub right: Option<Lane>,
}

impl LanePair {
    pub fn detected(&self) -> usize {
        usize::from(self.left.is_some()) + usize::from(self.right.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughParams {
    pub rho_resolution: f64,
    pub theta_resolution: f64,
    pub vote_threshold: u32,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            rho_resolution: 1.0,
            theta_resolution: 1.0,
            vote_threshold: 30,
        }
    }
}

impl HoughParams {
    pub fn validate(&self) -> Result<(), LaneError> {
        let ok = self.rho_resolution > 0.0
            && self.rho_resolution.is_finite()
            && self.theta_resolution > 0.0
            && self.theta_resolution.is_finite()
            && self.vote_threshold > 0;
        if ok {
            Ok(())
        } else {
            Err(LaneError::HoughParams)
        }
    }

    /// Number of normal-angle bins covering [0°, 180°).
    pub fn theta_bins(&self) -> usize {
        (180.0 / self.theta_resolution).ceil() as usize
    }

    /// Normal angle in degrees of bin `k`.
    pub fn theta_of_bin(&self, k: usize) -> f64 {
        k as f64 * self.theta_resolution
    }

    /// ρ-bin index of a continuous distance.
    pub fn rho_bin(&self, rho: f64) -> i64 {
        (rho / self.rho_resolution).round() as i64
    }
}

/// An edge pixel carrying an integer vote weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedPoint {
    pub x: usize,
    pub y: usize,
    pub weight: u32,
}

/// Standard Hough transform over the set pixels of `edges`.
pub fn hough_lines(edges: &EdgeMap, params: &HoughParams) -> Result<Vec<PolarLine>, LaneError> {
    let points: Vec<WeightedPoint> = edges
        .points()
        .map(|(x, y)| WeightedPoint { x, y, weight: 1 })
        .collect();
    hough_lines_weighted(&points, edges.width(), edges.height(), params)
}

/// Hough transform where each point adds `weight` votes.
///
/// Cells are `(ρ-bin, θ-bin)` with ρ = x·cos θn + y·sin θn. A cell is a peak
/// when its votes reach the threshold and it beats each of its 8 neighbours,
/// where equal counts are won by the lexicographically smaller
/// `(ρ-bin, θ-bin)`. The θ axis does not wrap. Peaks come back sorted by
/// votes descending, then by cell index.
pub fn hough_lines_weighted(
    points: &[WeightedPoint],
    width: usize,
    height: usize,
    params: &HoughParams,
) -> Result<Vec<PolarLine>, LaneError> {
    params.validate()?;
    let n_theta = params.theta_bins();
    let diag = ((width * width + height * height) as f64).sqrt().ceil();
    let max_bin = params.rho_bin(diag).abs() + 1;
    let n_rho = (2 * max_bin + 1) as usize;

    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|k| {
            let t = params.theta_of_bin(k).to_radians();
            (t.cos(), t.sin())
        })
        .collect();

    // accumulator laid out [rho][theta]
    let mut acc = vec![0u32; n_rho * n_theta];
    for p in points {
        let (x, y) = (p.x as f64, p.y as f64);
        for (k, &(c, s)) in trig.iter().enumerate() {
            let r = params.rho_bin(x * c + y * s) + max_bin;
            acc[r as usize * n_theta + k] += p.weight;
        }
    }

    let mut peaks = Vec::new();
    for r in 0..n_rho {
        for k in 0..n_theta {
            let votes = acc[r * n_theta + k];
            if votes < params.vote_threshold {
                continue;
            }
            let mut is_peak = true;
            'scan: for dr in -1isize..=1 {
                for dk in -1isize..=1 {
                    if dr == 0 && dk == 0 {
                        continue;
                    }
                    let (nr, nk) = (r as isize + dr, k as isize + dk);
                    if nr < 0 || nk < 0 || nr >= n_rho as isize || nk >= n_theta as isize {
                        continue;
                    }
                    let other = acc[nr as usize * n_theta + nk as usize];
                    // neighbour wins on more votes, or on a tie with a smaller index
                    if other > votes || (other == votes && (dr, dk) < (0, 0)) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push((votes, r, k));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    Ok(peaks
        .into_iter()
        .map(|(votes, r, k)| {
            let rho = (r as i64 - max_bin) as f64 * params.rho_resolution;
            PolarLine::from_normal(rho, params.theta_of_bin(k), votes)
        })
        .collect())
}

/// Slope/intercept form of a polar line: `m = cot θ`, `b = −ρ / sin θ`.
pub fn polar_to_lane(line: &PolarLine) -> Result<Lane, LaneError> {
    let t = line.theta.to_radians();
    let s = t.sin();
    if line.theta == 0.0 || s.abs() < 1e-12 {
        return Err(LaneError::Vertical { theta: line.theta });
    }
    let m = t.cos() / s;
    // cos 90° is not exactly zero in floating point
    let m = if m.abs() < 1e-12 { 0.0 } else { m };
    Ok(Lane {
        m,
        b: -line.rho / s,
    })
}

/// Inverse of [`polar_to_lane`] for non-horizontal lanes.
pub fn lane_to_polar(lane: &Lane, votes: u32) -> Result<PolarLine, LaneError> {
    if lane.m == 0.0 {
        return Err(LaneError::Horizontal);
    }
    let theta = (1.0 / lane.m).atan();
    Ok(PolarLine {
        rho: -lane.b * theta.sin(),
        theta: theta.to_degrees(),
        votes,
    })
}

fn in_window(theta: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&theta)
}

/// Splits lines into left/right groups by angle window and averages each
/// group's slope and intercept into a single lane.
pub fn classify_and_fit(lines: &[PolarLine]) -> LanePair {
    let fit = |window: (f64, f64)| -> Option<Lane> {
        let lanes: Vec<Lane> = lines
            .iter()
            .filter(|l| in_window(l.theta, window))
            .filter_map(|l| polar_to_lane(l).ok())
            .collect();
        if lanes.is_empty() {
            return None;
        }
        let n = lanes.len() as f64;
        Some(Lane {
            m: lanes.iter().map(|l| l.m).sum::<f64>() / n,
            b: lanes.iter().map(|l| l.b).sum::<f64>() / n,
        })
    };
    LanePair {
        left: fit(LEFT_WINDOW),
        right: fit(RIGHT_WINDOW),
    }
}
