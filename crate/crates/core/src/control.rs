//! Controller side: PID on the position error, differential PWM mixing,
//! the no-lane watchdog and the serial receiver feeding them.

use thiserror::Error;

use crate::wire::{self, Decoder, WireError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("PID gains must be finite and non-negative")]
    Gains,
    #[error("base duty {base} outside [0, {max}]")]
    BaseDuty { base: f64, max: f64 },
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 1.2,
            ki: 0.0,
            kd: 0.3,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = [self.kp, self.ki, self.kd]
            .iter()
            .all(|g| g.is_finite() && *g >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(ControlError::Gains)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
    pub integral_limit: f64,
}

impl PidState {
    pub fn new(integral_limit: f64) -> Self {
        Self {
            integral: 0.0,
            prev_error: 0.0,
            initialized: false,
            integral_limit,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.integral_limit);
    }

    /// One PID evaluation. The derivative term is zero on the first call.
    pub fn step(&mut self, gains: &PidGains, error: f64, dt: f64) -> Result<f64, ControlError> {
        if !(dt > 0.0) {
            return Err(ControlError::TimeStep(dt));
        }
        self.integral =
            (self.integral + error * dt).clamp(-self.integral_limit, self.integral_limit);
        let derivative = if self.initialized {
            (error - self.prev_error) / dt
        } else {
            0.0
        };
        self.prev_error = error;
        self.initialized = true;
        Ok(gains.kp * error + gains.ki * self.integral + gains.kd * derivative)
    }
}

/// `setpoint − current`.
pub fn compute_error(setpoint_x: f64, current_x: f64) -> f64 {
    setpoint_x - current_x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCommand {
    pub left_pwm: f64,
    pub right_pwm: f64,
    pub halted: bool,
}

impl DriveCommand {
    pub const HALT: DriveCommand = DriveCommand {
        left_pwm: 0.0,
        right_pwm: 0.0,
        halted: true,
    };
}

/// Adds `u` to the left duty and subtracts it from the right, clamping both
/// to `[0, max_pwm]`.
pub fn mix_drive(u: f64, base: f64, max_pwm: f64) -> Result<DriveCommand, ControlError> {
    if !(0.0..=max_pwm).contains(&base) {
        return Err(ControlError::BaseDuty { base, max: max_pwm });
    }
    Ok(DriveCommand {
        left_pwm: (base + u).clamp(0.0, max_pwm),
        right_pwm: (base - u).clamp(0.0, max_pwm),
        halted: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Run,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Watchdog {
    consecutive_misses: u32,
    miss_limit: u32,
}

impl Default for Watchdog {
    fn default() -> Self {
        Self::new(8)
    }
}

impl Watchdog {
    pub fn new(miss_limit: u32) -> Self {
        Self {
            consecutive_misses: 0,
            miss_limit,
        }
    }

    pub fn consecutive_misses(&self) -> u32 {
        self.consecutive_misses
    }

    pub fn step(&mut self, lanes_detected: bool) -> Verdict {
        if lanes_detected {
            self.consecutive_misses = 0;
        } else {
            self.consecutive_misses = (self.consecutive_misses + 1).min(self.miss_limit);
        }
        if self.consecutive_misses >= self.miss_limit {
            Verdict::Stop
        } else {
            Verdict::Run
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub gains: PidGains,
    pub setpoint_x: f64,
    pub base_pwm: f64,
    pub max_pwm: f64,
    pub integral_limit: f64,
    /// +1 adds the PID output to the left motor, −1 to the right motor.
    pub steer_polarity: f64,
    pub miss_limit: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gains: PidGains::default(),
            setpoint_x: 160.0,
            base_pwm: 100.0,
            max_pwm: 255.0,
            integral_limit: 500.0,
            steer_polarity: -1.0,
            miss_limit: 8,
        }
    }
}

/// Per-tick output of the controller, for telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickReport {
    pub command: DriveCommand,
    pub verdict: Verdict,
    /// Position error used this tick, absent when halted or nothing was
    /// ever received.
    pub error: Option<f64>,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    config: ControllerConfig,
    pid: PidState,
    watchdog: Watchdog,
    last_error: Option<f64>,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self, ControlError> {
        config.gains.validate()?;
        if !(0.0..=config.max_pwm).contains(&config.base_pwm) {
            return Err(ControlError::BaseDuty {
                base: config.base_pwm,
                max: config.max_pwm,
            });
        }
        Ok(Self {
            pid: PidState::new(config.integral_limit),
            watchdog: Watchdog::new(config.miss_limit),
            last_error: None,
            config,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn watchdog(&self) -> &Watchdog {
        &self.watchdog
    }

    /// One control cycle. An absent value counts as a missed frame; until the
    /// watchdog trips the previous error keeps steering.
    pub fn tick(&mut self, decoded: Option<u8>, dt: f64) -> Result<TickReport, ControlError> {
        if !(dt > 0.0) {
            return Err(ControlError::TimeStep(dt));
        }
        let error = decoded
            .map(wire::unmap_position)
            .transpose()?
            .map(|x| compute_error(self.config.setpoint_x, x));
        let verdict = self.watchdog.step(error.is_some());
        if verdict == Verdict::Stop {
            self.pid.reset();
            self.last_error = None;
            return Ok(TickReport {
                command: DriveCommand::HALT,
                verdict,
                error: None,
                output: 0.0,
            });
        }
        if error.is_some() {
            self.last_error = error;
        }
        let Some(e) = self.last_error else {
            // nothing received yet: drive straight
            return Ok(TickReport {
                command: mix_drive(0.0, self.config.base_pwm, self.config.max_pwm)?,
                verdict,
                error: None,
                output: 0.0,
            });
        };
        let u = self.pid.step(&self.config.gains, e, dt)?;
        let command = mix_drive(
            self.config.steer_polarity * u,
            self.config.base_pwm,
            self.config.max_pwm,
        )?;
        Ok(TickReport {
            command,
            verdict,
            error: Some(e),
            output: u,
        })
    }
}

/// Serial front end of the controller. Collects the bytes of one tick and
/// yields the value the controller should act on: the newest decoded value,
/// the held value when the line was silent (the sender suppressed an
/// unchanged value), or nothing after a no-lane frame or framing error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SerialReceiver {
    decoder: Decoder,
    held: Option<u8>,
    framing_errors: u64,
}

impl SerialReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn framing_errors(&self) -> u64 {
        self.framing_errors
    }

    pub fn poll(&mut self, bytes: &[u8]) -> Option<u8> {
        for &b in bytes {
            match self.decoder.decode_byte(b) {
                Ok(Some(v)) => self.held = Some(v),
                Ok(None) => {}
                Err(_) => {
                    self.framing_errors += 1;
                    self.held = None;
                }
            }
        }
        self.held
    }
}
