use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("track has no segments")]
    Empty,
    #[error("segment {index}: length must be positive, got {length}")]
    Length { index: usize, length: f64 },
    #[error("lane width must be positive, got {0}")]
    LaneWidth(f64),
    #[error("segment {index}: |curvature| * lane_width must be below 1, got {curvature}")]
    Curvature { index: usize, curvature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub length: f64,
    pub curvature: f64,
}

/// Centerline as a sequence of constant-curvature segments starting at the
/// origin with heading 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub segments: Vec<Segment>,
    pub lane_width: f64,
}

impl TrackSpec {
    pub fn new(segments: Vec<Segment>, lane_width: f64) -> Result<Self, TrackError> {
        let spec = Self {
            segments,
            lane_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        if !(self.lane_width > 0.0 && self.lane_width.is_finite()) {
            return Err(TrackError::LaneWidth(self.lane_width));
        }
        if self.segments.is_empty() {
            return Err(TrackError::Empty);
        }
        for (index, seg) in self.segments.iter().enumerate() {
            if !(seg.length > 0.0 && seg.length.is_finite()) {
                return Err(TrackError::Length {
                    index,
                    length: seg.length,
                });
            }
            if !(seg.curvature.abs() * self.lane_width < 1.0) {
                return Err(TrackError::Curvature {
                    index,
                    curvature: seg.curvature,
                });
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// A single straight segment.
    pub fn straight(length: f64, lane_width: f64) -> Result<Self, TrackError> {
        Self::new(
            vec![Segment {
                length,
                curvature: 0.0,
            }],
            lane_width,
        )
    }
}

impl FromStr for TrackSpec {
    type Err = TrackError;

    /// Header `lane_width <w>`, then one `length curvature` pair per line.
    /// Blank lines and `#` comments are ignored.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lane_width = None;
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |message: String| TrackError::Parse { line, message };
            let number = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("invalid number {s:?}")))
            };
            match lane_width {
                None => {
                    if fields.len() != 2 || fields[0] != "lane_width" {
                        return Err(err(format!(
                            "expected `lane_width <w>` header, got {content:?}"
                        )));
                    }
                    lane_width = Some(number(fields[1])?);
                }
                Some(_) => {
                    if fields.len() != 2 {
                        return Err(err(format!("expected `length curvature`, got {content:?}")));
                    }
                    segments.push(Segment {
                        length: number(fields[0])?,
                        curvature: number(fields[1])?,
                    });
                }
            }
        }
        let lane_width = lane_width.ok_or(TrackError::Parse {
            line: text.lines().count().max(1),
            message: "missing `lane_width` header".into(),
        })?;
        Self::new(segments, lane_width)
    }
}

impl fmt::Display for TrackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lane_width {}", self.lane_width)?;
        for s in &self.segments {
            writeln!(f, "{} {}", s.length, s.curvature)?;
        }
        Ok(())
    }
}

/// A point on the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterPoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl CenterPoint {
    /// Lateral offset along the left normal.
    pub fn offset(&self, lateral: f64) -> (f64, f64) {
        (
            self.x - lateral * self.heading.sin(),
            self.y + lateral * self.heading.cos(),
        )
    }
}

/// Position of a pose relative to the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frenet {
    /// Arc length of the closest centerline point.
    pub s: f64,
    /// Signed distance, positive to the left of the direction of travel.
    pub lateral: f64,
    pub heading_error: f64,
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Sampled centerline geometry of a [`TrackSpec`].
#[derive(Debug, Clone)]
pub struct Track {
    spec: TrackSpec,
    step: f64,
    // samples cover [-lead_in, length + run_out]
    samples: Vec<CenterPoint>,
}

impl Track {
    pub const SAMPLE_STEP: f64 = 0.005;
    pub const LEAD_IN: f64 = 0.5;
    pub const RUN_OUT: f64 = 3.0;

    pub fn new(spec: &TrackSpec) -> Self {
        let step = Self::SAMPLE_STEP;
        let total = Self::LEAD_IN + spec.length() + Self::RUN_OUT;
        let n = (total / step).ceil() as usize + 1;
        let samples = (0..n)
            .map(|i| Self::evaluate(spec, -Self::LEAD_IN + i as f64 * step))
            .collect();
        Self {
            spec: spec.clone(),
            step,
            samples,
        }
    }

    pub fn spec(&self) -> &TrackSpec {
        &self.spec
    }

    pub fn length(&self) -> f64 {
        self.spec.length()
    }

    pub fn lane_width(&self) -> f64 {
        self.spec.lane_width
    }

    pub fn samples(&self) -> &[CenterPoint] {
        &self.samples
    }

    /// Closed-form centerline point at arc length `s`. Before the start the
    /// first segment is extended backwards, past the end the last segment
    /// continues.
    pub fn evaluate(spec: &TrackSpec, s: f64) -> CenterPoint {
        let (mut x, mut y, mut h) = (0.0f64, 0.0f64, 0.0f64);
        let mut remaining = s;
        let last = spec.segments.len() - 1;
        for (i, seg) in spec.segments.iter().enumerate() {
            let run = if i == last || remaining < seg.length {
                remaining
            } else {
                seg.length
            };
            let k = seg.curvature;
            if k.abs() < 1e-12 {
                x += run * h.cos();
                y += run * h.sin();
            } else {
                x += ((h + k * run).sin() - h.sin()) / k;
                y -= ((h + k * run).cos() - h.cos()) / k;
            }
            h += k * run;
            remaining -= run;
            if i == last || remaining <= 0.0 {
                break;
            }
        }
        CenterPoint {
            s,
            x,
            y,
            heading: normalize_angle(h),
        }
    }

    pub fn point_at(&self, s: f64) -> CenterPoint {
        Self::evaluate(&self.spec, s)
    }

    /// Projects `(x, y)` onto the centerline, searching samples within
    /// `window` metres of `hint_s`.
    pub fn project(&self, x: f64, y: f64, heading: f64, hint_s: f64, window: f64) -> Frenet {
        let idx = |s: f64| {
            (((s + Self::LEAD_IN) / self.step).round().max(0.0) as usize)
                .min(self.samples.len() - 1)
        };
        let (lo, hi) = (idx(hint_s - window), idx(hint_s + window));
        let best = self.samples[lo..=hi]
            .iter()
            .min_by(|a, b| {
                let da = (a.x - x).powi(2) + (a.y - y).powi(2);
                let db = (b.x - x).powi(2) + (b.y - y).powi(2);
                da.total_cmp(&db)
            })
            .expect("non-empty window");
        let (dx, dy) = (x - best.x, y - best.y);
        let (c, s) = (best.heading.cos(), best.heading.sin());
        let along = dx * c + dy * s;
        let refined = self.point_at(best.s + along);
        let (rx, ry) = (x - refined.x, y - refined.y);
        Frenet {
            s: refined.s,
            lateral: -rx * refined.heading.sin() + ry * refined.heading.cos(),
            heading_error: normalize_angle(heading - refined.heading),
        }
    }
}
