//! Per-frame detection chain: preprocessing → Hough → lane fit → lane
//! tracking → midpoint → PAA and Kalman smoothing.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::imaging::{self, CannyParams, GrayFrame, ImagingError, RgbFrame};
use crate::lane_detect::{self, HoughParams, LaneError, LanePair, PolarLine};
use crate::position::{self, PaaBuffer, PositionError, PositionEstimate, Setpoint, Smoother};
use crate::tracking::{
    KalmanError, LaneTrackConfig, LaneTracker, PositionTrackConfig, PositionTracker,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Lane(#[from] LaneError),
    #[error(transparent)]
    Kalman(#[from] KalmanError),
    #[error(transparent)]
    Position(#[from] PositionError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub canny: CannyParams,
    pub hough: HoughParams,
    pub lane_track: LaneTrackConfig,
    pub position_track: PositionTrackConfig,
    pub paa_capacity: usize,
    pub setpoint: Setpoint,
    pub smoother: Smoother,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            hough: HoughParams::default(),
            lane_track: LaneTrackConfig::default(),
            position_track: PositionTrackConfig::default(),
            paa_capacity: 8,
            setpoint: Setpoint::default(),
            smoother: Smoother::Kalman,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    /// Lanes fitted from this frame's Hough lines alone.
    pub detected: LanePair,
    pub tracked_left: Option<PolarLine>,
    pub tracked_right: Option<PolarLine>,
    /// Tracked lanes in slope/intercept form; these feed the midpoint.
    pub tracked: LanePair,
    pub estimate: PositionEstimate,
}

/// Accumulated wall time per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub grayscale: Duration,
    pub resize: Duration,
    pub blur: Duration,
    pub canny: Duration,
    pub roi: Duration,
    pub hough: Duration,
    pub fit: Duration,
    pub tracking: Duration,
    pub position: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.stages().iter().map(|(_, d)| *d).sum()
    }

    pub fn stages(&self) -> [(&'static str, Duration); 9] {
        [
            ("grayscale", self.grayscale),
            ("resize", self.resize),
            ("blur", self.blur),
            ("canny", self.canny),
            ("roi", self.roi),
            ("hough", self.hough),
            ("fit", self.fit),
            ("tracking", self.tracking),
            ("position", self.position),
        ]
    }
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanePipeline {
    config: PipelineConfig,
    left: LaneTracker,
    right: LaneTracker,
    paa: PaaBuffer,
    kalman: PositionTracker,
}

impl LanePipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.canny.validate()?;
        config.hough.validate()?;
        Ok(Self {
            left: LaneTracker::new(config.lane_track),
            right: LaneTracker::new(config.lane_track),
            paa: PaaBuffer::new(config.paa_capacity)?,
            kalman: PositionTracker::new(config.position_track),
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn process(&mut self, frame: &RgbFrame) -> Result<FrameReport, PipelineError> {
        self.process_timed(frame, &mut StageTimes::default())
    }

    pub fn process_timed(
        &mut self,
        frame: &RgbFrame,
        times: &mut StageTimes,
    ) -> Result<FrameReport, PipelineError> {
        let gray = timed(&mut times.grayscale, || imaging::to_grayscale(frame));
        self.process_gray_timed(&gray, times)
    }

    pub fn process_gray(&mut self, gray: &GrayFrame) -> Result<FrameReport, PipelineError> {
        self.process_gray_timed(gray, &mut StageTimes::default())
    }

    pub fn process_gray_timed(
        &mut self,
        gray: &GrayFrame,
        times: &mut StageTimes,
    ) -> Result<FrameReport, PipelineError> {
        let cfg = self.config;
        let working = timed(&mut times.resize, || imaging::to_working_gray(gray))?;
        let blurred = timed(&mut times.blur, || {
            imaging::gaussian_blur(&working, cfg.canny.blur_kernel, cfg.canny.blur_sigma)
        })?;
        let edges = timed(&mut times.canny, || imaging::canny(&blurred, &cfg.canny));
        let roi = timed(&mut times.roi, || imaging::roi_mask(&edges));
        let lines = timed(&mut times.hough, || {
            lane_detect::hough_lines(&roi, &cfg.hough)
        })?;
        let detected = timed(&mut times.fit, || lane_detect::classify_and_fit(&lines));

        let (tracked_left, tracked_right, tracked) = timed(&mut times.tracking, || {
            let measure = |lane: Option<lane_detect::Lane>| {
                lane.and_then(|l| lane_detect::lane_to_polar(&l, 0).ok())
            };
            let left = self.left.step(measure(detected.left).as_ref());
            let right = self.right.step(measure(detected.right).as_ref());
            let to_lane =
                |p: Option<PolarLine>| p.and_then(|p| lane_detect::polar_to_lane(&p).ok());
            (
                left,
                right,
                LanePair {
                    left: to_lane(left),
                    right: to_lane(right),
                },
            )
        });

        let estimate = timed(&mut times.position, || -> Result<_, PipelineError> {
            // a degenerate tracked lane simply yields no midpoint
            let raw = position::lane_midpoint(&tracked, cfg.setpoint.y).unwrap_or(None);
            let paa = match raw {
                Some(x) => Some(self.paa.update(x)?),
                None => self.paa.peek_on_miss(),
            };
            let kalman = self.kalman.step(raw)?;
            let smoothed = match cfg.smoother {
                Smoother::Paa => paa,
                Smoother::Kalman => kalman,
            };
            Ok(PositionEstimate {
                raw,
                paa,
                kalman,
                smoothed,
                method: cfg.smoother,
                lanes_detected: detected.detected(),
            })
        })?;

        Ok(FrameReport {
            detected,
            tracked_left,
            tracked_right,
            tracked,
            estimate,
        })
    }
}
