//! Flat `key = value` run configuration.

use std::collections::HashSet;
use std::fmt::{self, Display};
use std::str::FromStr;

use thiserror::Error;

use crate::control::ControllerConfig;
use crate::pipeline::PipelineConfig;
use crate::sim::SimConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for `{key}`")]
    Value {
        line: usize,
        key: String,
        value: String,
    },
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
}

fn parse<T: FromStr>(value: &str) -> Option<T> {
    value.parse().ok()
}

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn parse_dropouts(value: &str) -> Option<Vec<(u64, u64)>> {
    if value.is_empty() || value == "none" {
        return Some(Vec::new());
    }
    value
        .split(',')
        .map(|r| {
            let r = r.trim();
            match r.split_once('-') {
                Some((a, b)) => Some((a.trim().parse().ok()?, b.trim().parse().ok()?)),
                None => {
                    let v = r.parse().ok()?;
                    Some((v, v))
                }
            }
        })
        .collect()
}

fn format_dropouts(d: &[(u64, u64)]) -> String {
    if d.is_empty() {
        return "none".into();
    }
    d.iter()
        .map(|(a, b)| format!("{a}-{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn s<T: Display>(v: T) -> String {
    v.to_string()
}

impl RunConfig {
    /// Every key with its current value, in documentation order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.pipeline;
        let c = &self.controller;
        let m = &self.sim;
        vec![
            ("seed", s(m.seed)),
            ("canny.low_threshold", s(p.canny.low_threshold)),
            ("canny.high_threshold", s(p.canny.high_threshold)),
            ("blur.kernel", s(p.canny.blur_kernel)),
            ("blur.sigma", s(p.canny.blur_sigma)),
            ("hough.rho_resolution", s(p.hough.rho_resolution)),
            ("hough.theta_resolution", s(p.hough.theta_resolution)),
            ("hough.vote_threshold", s(p.hough.vote_threshold)),
            ("lane_kf.q_rho", s(p.lane_track.q[0])),
            ("lane_kf.q_theta", s(p.lane_track.q[1])),
            ("lane_kf.q_rho_rate", s(p.lane_track.q[2])),
            ("lane_kf.q_theta_rate", s(p.lane_track.q[3])),
            ("lane_kf.r_rho", s(p.lane_track.r[0])),
            ("lane_kf.r_theta", s(p.lane_track.r[1])),
            ("lane_kf.initial_variance", s(p.lane_track.initial_variance)),
            ("lane_kf.miss_limit", s(p.lane_track.miss_limit)),
            ("position_kf.q_x", s(p.position_track.q[0])),
            ("position_kf.q_rate", s(p.position_track.q[1])),
            ("position_kf.r", s(p.position_track.r)),
            (
                "position_kf.initial_variance",
                s(p.position_track.initial_variance),
            ),
            ("position_kf.miss_limit", s(p.position_track.miss_limit)),
            ("paa.capacity", s(p.paa_capacity)),
            ("smoother", s(p.smoother)),
            ("setpoint.x", s(c.setpoint_x)),
            ("setpoint.y", s(p.setpoint.y)),
            ("pid.kp", s(c.gains.kp)),
            ("pid.ki", s(c.gains.ki)),
            ("pid.kd", s(c.gains.kd)),
            ("pid.integral_limit", s(c.integral_limit)),
            ("drive.base_pwm", s(c.base_pwm)),
            ("drive.max_pwm", s(c.max_pwm)),
            ("drive.steer_polarity", s(c.steer_polarity)),
            ("watchdog.miss_limit", s(c.miss_limit)),
            ("sim.wheel_base", s(m.wheel_base)),
            ("sim.pwm_to_speed", s(m.pwm_to_speed)),
            ("sim.frame_dt", s(m.frame_dt)),
            ("sim.dropouts", format_dropouts(&m.dropouts)),
            ("sim.noise", s(m.noise)),
            ("sim.wire_loss", s(m.wire_loss)),
            (
                "sim.max_frames",
                m.max_frames.map_or_else(|| "auto".into(), s),
            ),
            ("sim.stop_on_halt", s(m.stop_on_halt)),
            ("sim.initial_offset", s(m.initial_offset)),
            ("sim.initial_heading", s(m.initial_heading)),
            ("camera.height", s(m.camera.height)),
            ("camera.tilt", s(m.camera.tilt)),
            ("camera.focal", s(m.camera.focal)),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        RunConfig::default()
            .entries()
            .into_iter()
            .map(|(k, _)| k)
            .collect()
    }

    /// Sets one key. `Ok(false)` for an unknown key, `Err(())` for a bad value.
    fn set(&mut self, key: &str, value: &str) -> Result<bool, ()> {
        let p = &mut self.pipeline;
        let c = &mut self.controller;
        let m = &mut self.sim;
        macro_rules! put {
            ($slot:expr) => {
                $slot = parse(value).ok_or(())?
            };
        }
        match key {
            "seed" => put!(m.seed),
            "canny.low_threshold" => put!(p.canny.low_threshold),
            "canny.high_threshold" => put!(p.canny.high_threshold),
            "blur.kernel" => put!(p.canny.blur_kernel),
            "blur.sigma" => put!(p.canny.blur_sigma),
            "hough.rho_resolution" => put!(p.hough.rho_resolution),
            "hough.theta_resolution" => put!(p.hough.theta_resolution),
            "hough.vote_threshold" => put!(p.hough.vote_threshold),
            "lane_kf.q_rho" => put!(p.lane_track.q[0]),
            "lane_kf.q_theta" => put!(p.lane_track.q[1]),
            "lane_kf.q_rho_rate" => put!(p.lane_track.q[2]),
            "lane_kf.q_theta_rate" => put!(p.lane_track.q[3]),
            "lane_kf.r_rho" => put!(p.lane_track.r[0]),
            "lane_kf.r_theta" => put!(p.lane_track.r[1]),
            "lane_kf.initial_variance" => put!(p.lane_track.initial_variance),
            "lane_kf.miss_limit" => put!(p.lane_track.miss_limit),
            "position_kf.q_x" => put!(p.position_track.q[0]),
            "position_kf.q_rate" => put!(p.position_track.q[1]),
            "position_kf.r" => put!(p.position_track.r),
            "position_kf.initial_variance" => put!(p.position_track.initial_variance),
            "position_kf.miss_limit" => put!(p.position_track.miss_limit),
            "paa.capacity" => put!(p.paa_capacity),
            "smoother" => put!(p.smoother),
            "setpoint.x" => {
                put!(c.setpoint_x);
                p.setpoint.x = c.setpoint_x;
            }
            "setpoint.y" => put!(p.setpoint.y),
            "pid.kp" => put!(c.gains.kp),
            "pid.ki" => put!(c.gains.ki),
            "pid.kd" => put!(c.gains.kd),
            "pid.integral_limit" => put!(c.integral_limit),
            "drive.base_pwm" => put!(c.base_pwm),
            "drive.max_pwm" => put!(c.max_pwm),
            "drive.steer_polarity" => put!(c.steer_polarity),
            "watchdog.miss_limit" => put!(c.miss_limit),
            "sim.wheel_base" => put!(m.wheel_base),
            "sim.pwm_to_speed" => put!(m.pwm_to_speed),
            "sim.frame_dt" => put!(m.frame_dt),
            "sim.dropouts" => m.dropouts = parse_dropouts(value).ok_or(())?,
            "sim.noise" => put!(m.noise),
            "sim.wire_loss" => put!(m.wire_loss),
            "sim.max_frames" => {
                m.max_frames = if value == "auto" {
                    None
                } else {
                    Some(parse(value).ok_or(())?)
                }
            }
            "sim.stop_on_halt" => m.stop_on_halt = parse_bool(value).ok_or(())?,
            "sim.initial_offset" => put!(m.initial_offset),
            "sim.initial_heading" => put!(m.initial_heading),
            "camera.height" => put!(m.camera.height),
            "camera.tilt" => put!(m.camera.tilt),
            "camera.focal" => put!(m.camera.focal),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Applies a `key = value` document over the current values.
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            let bad_value = || ConfigError::Value {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            match self.set(key, value) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
                Err(()) => return Err(bad_value()),
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(())
    }

    /// The effective configuration as a document [`FromStr`] accepts.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }
}

impl Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
