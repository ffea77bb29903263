use std::fmt;
use std::io::{self, Write};

use super::{render_scene, vehicle_step, SimConfig, SimError, Track, VehiclePose};
use crate::control::{Controller, ControllerConfig, SerialReceiver, Verdict};
use crate::imaging::RgbFrame;
use crate::pipeline::{FrameReport, LanePipeline, PipelineConfig};
use crate::position::FRAME_WIDTH;
use crate::wire::{self, ByteLink, Encoder};

pub const TELEMETRY_COLUMNS: [&str; 19] = [
    "frame",
    "t",
    "x",
    "y",
    "heading",
    "s",
    "lateral_offset",
    "heading_error",
    "lanes_detected",
    "raw_midpoint",
    "paa",
    "kf",
    "smoothed",
    "wire_value",
    "wire_bytes_hex",
    "decoded",
    "left_pwm",
    "right_pwm",
    "halted",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    WatchdogStop,
    LaneDeparture,
    FrameLimit,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "completed",
            Outcome::WatchdogStop => "stopped(watchdog)",
            Outcome::LaneDeparture => "departed",
            Outcome::FrameLimit => "frame_limit",
        })
    }
}

/// One frame of the loop. Pose fields describe the vehicle when the frame
/// was captured.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    pub frame: u64,
    pub pose: VehiclePose,
    pub s: f64,
    pub lateral_offset: f64,
    pub heading_error: f64,
    pub lanes_detected: usize,
    pub raw_midpoint: Option<f64>,
    pub paa: Option<f64>,
    pub kf: Option<f64>,
    pub smoothed: Option<f64>,
    pub wire_value: Option<u8>,
    pub wire_bytes: Vec<u8>,
    pub decoded: Option<u8>,
    pub left_pwm: f64,
    pub right_pwm: f64,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryLog {
    pub rows: Vec<TelemetryRow>,
    pub outcome: Outcome,
    pub final_pose: VehiclePose,
    pub final_lateral_offset: f64,
    pub lane_width: f64,
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TelemetryLog {
    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }

    /// Largest |lateral offset| over the logged frames and the final pose.
    pub fn max_abs_offset(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.lateral_offset.abs())
            .fold(self.final_lateral_offset.abs(), f64::max)
    }

    pub fn halted_frames(&self) -> usize {
        self.rows.iter().filter(|r| r.halted).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", TELEMETRY_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.4},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5},{},{},{},{},{},{},{},{},{:.3},{:.3},{}",
                r.frame,
                r.pose.t,
                r.pose.x,
                r.pose.y,
                r.pose.heading,
                r.s,
                r.lateral_offset,
                r.heading_error,
                r.lanes_detected,
                opt(r.raw_midpoint.map(|v| format!("{v:.3}"))),
                opt(r.paa.map(|v| format!("{v:.3}"))),
                opt(r.kf.map(|v| format!("{v:.3}"))),
                opt(r.smoothed.map(|v| format!("{v:.3}"))),
                opt(r.wire_value),
                wire::to_hex(&r.wire_bytes),
                opt(r.decoded),
                r.left_pwm,
                r.right_pwm,
                u8::from(r.halted),
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "frames={} outcome={} max_abs_offset={:.4} lane_width={}",
            self.rows.len(),
            self.outcome,
            self.max_abs_offset(),
            self.lane_width
        )
    }
}

fn auto_frame_limit(track: &Track, sim: &SimConfig, ctrl: &ControllerConfig) -> u64 {
    let speed = (sim.pwm_to_speed * ctrl.base_pwm).max(1e-3);
    (3.0 * track.length() / (speed * sim.frame_dt)).ceil() as u64 + 60
}

pub fn run_closed_loop(
    track: &Track,
    sim: &SimConfig,
    pipeline: &PipelineConfig,
    controller: &ControllerConfig,
) -> Result<TelemetryLog, SimError> {
    run_closed_loop_observed(track, sim, pipeline, controller, |_, _, _| {})
}

/// Like [`run_closed_loop`], calling `observe` with every rendered frame and
/// its pipeline report.
pub fn run_closed_loop_observed<F>(
    track: &Track,
    sim: &SimConfig,
    pipeline: &PipelineConfig,
    controller: &ControllerConfig,
    mut observe: F,
) -> Result<TelemetryLog, SimError>
where
    F: FnMut(u64, &RgbFrame, &FrameReport),
{
    sim.validate()?;
    track.spec().validate()?;
    let mut chain = LanePipeline::new(*pipeline)?;
    let mut ctrl = Controller::new(*controller)?;
    let mut encoder = Encoder::new();
    let mut link = ByteLink::new(sim.wire_loss, sim.seed ^ 0x5EED_11E5);
    let mut receiver = SerialReceiver::new();

    let start = track.point_at(0.0);
    let (x, y) = start.offset(sim.initial_offset);
    let mut pose = VehiclePose {
        x,
        y,
        heading: super::normalize_angle(start.heading + sim.initial_heading),
        t: 0.0,
    };
    let limit = sim
        .max_frames
        .unwrap_or_else(|| auto_frame_limit(track, sim, controller));
    let half_width = track.lane_width() / 2.0;
    let window = 1.0 + controller.max_pwm * sim.pwm_to_speed * sim.frame_dt;

    let mut rows = Vec::new();
    let mut hint = 0.0;
    let mut outcome = Outcome::FrameLimit;
    let mut frenet = track.project(pose.x, pose.y, pose.heading, hint, window);
    for frame in 0..limit {
        if frenet.s >= track.length() {
            outcome = Outcome::Completed;
            break;
        }
        if frenet.lateral.abs() > half_width {
            outcome = Outcome::LaneDeparture;
            break;
        }

        let image = render_scene(&pose, track, &sim.camera, frame, sim);
        let report = chain.process(&image)?;
        observe(frame, &image, &report);
        let est = &report.estimate;

        let (wire_value, bytes) = match est.smoothed {
            Some(x) if est.lanes_detected > 0 => {
                let v = wire::map_position(x.clamp(0.0, FRAME_WIDTH))?;
                (Some(v), encoder.encode_frame(v)?)
            }
            _ => (None, encoder.encode_no_lane()),
        };
        link.send(&bytes);
        let decoded = receiver.poll(&link.drain());
        let tick = ctrl.tick(decoded, sim.frame_dt)?;

        rows.push(TelemetryRow {
            frame,
            pose,
            s: frenet.s,
            lateral_offset: frenet.lateral,
            heading_error: frenet.heading_error,
            lanes_detected: est.lanes_detected,
            raw_midpoint: est.raw,
            paa: est.paa,
            kf: est.kalman,
            smoothed: est.smoothed,
            wire_value,
            wire_bytes: bytes,
            decoded,
            left_pwm: tick.command.left_pwm,
            right_pwm: tick.command.right_pwm,
            halted: tick.command.halted,
        });

        pose = vehicle_step(&pose, &tick.command, sim);
        hint = frenet.s;
        frenet = track.project(pose.x, pose.y, pose.heading, hint, window);
        if tick.verdict == Verdict::Stop && sim.stop_on_halt {
            outcome = Outcome::WatchdogStop;
            break;
        }
    }

    Ok(TelemetryLog {
        rows,
        outcome,
        final_pose: pose,
        final_lateral_offset: frenet.lateral,
        lane_width: track.lane_width(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TrackSpec;

    fn straight() -> Track {
        Track::new(&TrackSpec::straight(3.0, 0.2).unwrap())
    }

    #[test]
    fn zero_frames_gives_empty_log() {
        let mut sim = SimConfig::default();
        sim.max_frames = Some(0);
        let log = run_closed_loop(
            &straight(),
            &sim,
            &PipelineConfig::default(),
            &ControllerConfig::default(),
        )
        .unwrap();
        assert!(log.rows.is_empty());
        assert_eq!(log.outcome, Outcome::FrameLimit);
    }

    #[test]
    fn straight_run_completes() {
        let log = run_closed_loop(
            &straight(),
            &SimConfig::default(),
            &PipelineConfig::default(),
            &ControllerConfig::default(),
        )
        .unwrap();
        assert_eq!(log.outcome, Outcome::Completed, "{}", log.summary());
        assert!(log.max_abs_offset() < 0.05);
    }

    #[test]
    fn csv_has_fixed_columns() {
        let mut sim = SimConfig::default();
        sim.max_frames = Some(3);
        let log = run_closed_loop(
            &straight(),
            &sim,
            &PipelineConfig::default(),
            &ControllerConfig::default(),
        )
        .unwrap();
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], TELEMETRY_COLUMNS.join(","));
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), TELEMETRY_COLUMNS.len());
        }
    }
}
