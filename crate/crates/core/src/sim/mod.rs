//! Closed-loop plant: a road renderer, differential-drive kinematics and the
//! perception → wire → control → plant loop.

mod render;
mod run;
mod track;

use thiserror::Error;

use crate::control::DriveCommand;

pub use render::{marker_pixels, render_scene, CameraModel, MARKER_COLOR, ROAD_COLOR};
pub use run::{
    run_closed_loop, run_closed_loop_observed, Outcome, TelemetryLog, TelemetryRow,
    TELEMETRY_COLUMNS,
};
pub use track::{normalize_angle, CenterPoint, Frenet, Segment, Track, TrackError, TrackSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("wheel base must be positive, got {0}")]
    WheelBase(f64),
    #[error("pwm_to_speed must be positive, got {0}")]
    PwmToSpeed(f64),
    #[error("frame_dt must be positive, got {0}")]
    FrameDt(f64),
    #[error("noise probability must be in [0, 1], got {0}")]
    Noise(f64),
    #[error("wire loss probability must be in [0, 1], got {0}")]
    WireLoss(f64),
    #[error("dropout range {0}-{1} is reversed")]
    Dropout(u64, u64),
    #[error("invalid camera model")]
    Camera,
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Control(#[from] crate::control::ControlError),
    #[error(transparent)]
    Wire(#[from] crate::wire::WireError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VehiclePose {
    pub x: f64,
    pub y: f64,
    /// Counter-clockwise from the world x axis, in (−π, π].
    pub heading: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub wheel_base: f64,
    /// Wheel speed in m/s per duty unit.
    pub pwm_to_speed: f64,
    pub frame_dt: f64,
    /// Inclusive frame ranges rendered without lane markers.
    pub dropouts: Vec<(u64, u64)>,
    /// Per-pixel inversion probability.
    pub noise: f64,
    pub seed: u64,
    pub camera: CameraModel,
    /// `None` picks a limit from the track length.
    pub max_frames: Option<u64>,
    /// Per-byte loss probability on the serial link.
    pub wire_loss: f64,
    /// End the run when the watchdog halts the vehicle.
    pub stop_on_halt: bool,
    /// Starting offset from the centerline, positive to the left.
    pub initial_offset: f64,
    pub initial_heading: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            wheel_base: 0.3,
            pwm_to_speed: 0.004,
            frame_dt: 1.0 / 6.0,
            dropouts: Vec::new(),
            noise: 0.0,
            seed: 0,
            camera: CameraModel::default(),
            max_frames: None,
            wire_loss: 0.0,
            stop_on_halt: true,
            initial_offset: 0.0,
            initial_heading: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.wheel_base > 0.0) {
            return Err(SimError::WheelBase(self.wheel_base));
        }
        if !(self.pwm_to_speed > 0.0) {
            return Err(SimError::PwmToSpeed(self.pwm_to_speed));
        }
        if !(self.frame_dt > 0.0) {
            return Err(SimError::FrameDt(self.frame_dt));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(SimError::Noise(self.noise));
        }
        if !(0.0..=1.0).contains(&self.wire_loss) {
            return Err(SimError::WireLoss(self.wire_loss));
        }
        if let Some(&(a, b)) = self.dropouts.iter().find(|(a, b)| a > b) {
            return Err(SimError::Dropout(a, b));
        }
        if !self.camera.is_valid() {
            return Err(SimError::Camera);
        }
        Ok(())
    }

    pub fn in_dropout(&self, frame_index: u64) -> bool {
        self.dropouts
            .iter()
            .any(|&(a, b)| (a..=b).contains(&frame_index))
    }
}

/// One Euler step of differential-drive kinematics over `cfg.frame_dt`.
pub fn vehicle_step(pose: &VehiclePose, cmd: &DriveCommand, cfg: &SimConfig) -> VehiclePose {
    let dt = cfg.frame_dt;
    if cmd.halted {
        return VehiclePose {
            t: pose.t + dt,
            ..*pose
        };
    }
    let vl = cfg.pwm_to_speed * cmd.left_pwm;
    let vr = cfg.pwm_to_speed * cmd.right_pwm;
    let v = (vl + vr) / 2.0;
    let omega = (vr - vl) / cfg.wheel_base;
    let heading = normalize_angle(pose.heading + omega * dt);
    VehiclePose {
        x: pose.x + v * heading.cos() * dt,
        y: pose.y + v * heading.sin() * dt,
        heading,
        t: pose.t + dt,
    }
}
