//! Vision-to-controller serial framing.
//!
//! A position in `[0, 320]` px is compressed to `1..=99` and sent as one or
//! two ASCII decimal digits followed by [`TERMINATOR`]. Unchanged values are
//! not resent. The receiver shifts an accumulator one decimal place per
//! digit and emits it on the terminator.
//!
//! A frame with no digits (a bare terminator) carries the reserved value 0.
//! The decoder reports it as a framing error; the vision side uses it on
//! frames where no lane was detected (see [`NO_LANE_FRAME`]).

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const TERMINATOR: u8 = b'\n';
pub const MIN_VALUE: u8 = 1;
pub const MAX_VALUE: u8 = 99;
const MAX_PIXEL: f64 = 320.0;

/// Bare terminator, decoded as the reserved value 0.
pub const NO_LANE_FRAME: [u8; 1] = [TERMINATOR];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("pixel position {0} outside [0, 320]")]
    PixelRange(f64),
    #[error("wire value {0} outside [1, 99]")]
    ValueRange(u32),
    #[error("framing error: decoded value {0} outside [1, 99]")]
    Framing(u32),
}

/// `1 + round(98·x / 320)`.
pub fn map_position(x: f64) -> Result<u8, WireError> {
    if !(0.0..=MAX_PIXEL).contains(&x) {
        return Err(WireError::PixelRange(x));
    }
    Ok(1 + (98.0 * x / MAX_PIXEL).round() as u8)
}

/// `round((v − 1)·320 / 98)`.
pub fn unmap_position(v: u8) -> Result<f64, WireError> {
    if !(MIN_VALUE..=MAX_VALUE).contains(&v) {
        return Err(WireError::ValueRange(u32::from(v)));
    }
    Ok((f64::from(v - 1) * MAX_PIXEL / 98.0).round())
}

/// Send-on-change encoder.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Encoder {
    last_sent: Option<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_sent(&self) -> Option<u8> {
        self.last_sent
    }

    /// Bytes for `v`, empty when `v` equals the last value sent.
    pub fn encode_frame(&mut self, v: u8) -> Result<Vec<u8>, WireError> {
        if !(MIN_VALUE..=MAX_VALUE).contains(&v) {
            return Err(WireError::ValueRange(u32::from(v)));
        }
        if self.last_sent == Some(v) {
            return Ok(Vec::new());
        }
        self.last_sent = Some(v);
        let mut bytes = v.to_string().into_bytes();
        bytes.push(TERMINATOR);
        Ok(bytes)
    }

    /// Marks a frame without a position. Forgets the last value so the next
    /// position is always transmitted.
    pub fn encode_no_lane(&mut self) -> Vec<u8> {
        self.last_sent = None;
        NO_LANE_FRAME.to_vec()
    }
}

/// Byte-at-a-time receiver.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decoder {
    accumulator: u32,
    in_progress: bool,
    overflowed: bool,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulator(&self) -> u32 {
        self.accumulator
    }

    pub fn in_progress(&self) -> bool {
        self.in_progress
    }

    fn reset(&mut self) {
        self.accumulator = 0;
        self.in_progress = false;
        self.overflowed = false;
    }

    /// Feeds one byte. Returns the frame value on a terminator.
    pub fn decode_byte(&mut self, byte: u8) -> Result<Option<u8>, WireError> {
        match byte {
            b'0'..=b'9' => {
                let next = self.accumulator * 10 + u32::from(byte - b'0');
                if next > u32::from(MAX_VALUE) {
                    // the frame is already invalid; keep the accumulator bounded
                    // and report at the terminator
                    self.overflowed = true;
                } else {
                    self.accumulator = next;
                }
                self.in_progress = true;
                Ok(None)
            }
            TERMINATOR => {
                let value = self.accumulator;
                let overflowed = self.overflowed;
                self.reset();
                if overflowed {
                    Err(WireError::Framing(value))
                } else if (u32::from(MIN_VALUE)..=u32::from(MAX_VALUE)).contains(&value) {
                    Ok(Some(value as u8))
                } else {
                    Err(WireError::Framing(value))
                }
            }
            _ => {
                self.reset();
                Ok(None)
            }
        }
    }
}

/// Ordered in-memory byte link with optional random byte loss.
#[derive(Debug, Clone)]
pub struct ByteLink {
    queue: VecDeque<u8>,
    loss_probability: f64,
    rng: ChaCha8Rng,
}

impl ByteLink {
    pub fn new(loss_probability: f64, seed: u64) -> Self {
        Self {
            queue: VecDeque::new(),
            loss_probability: loss_probability.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn send(&mut self, bytes: &[u8]) {
        for &b in bytes {
            if self.loss_probability > 0.0 && self.rng.gen_bool(self.loss_probability) {
                continue;
            }
            self.queue.push_back(b);
        }
    }

    /// Everything queued so far.
    pub fn drain(&mut self) -> Vec<u8> {
        self.queue.drain(..).collect()
    }
}

/// Lowercase hex, one byte per pair, no separators.
pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
