use super::{Lane, LanePair};
use crate::imaging::{RgbFrame, WORKING_HEIGHT, WORKING_WIDTH};

pub const LANE_COLOR: [u8; 3] = [255, 0, 0];
pub const MIDPOINT_COLOR: [u8; 3] = [0, 255, 0];
pub const SETPOINT_COLOR: [u8; 3] = [0, 0, 255];

/// Draws `lane` (working-resolution coordinates) between rows `from_row` and
/// the bottom of the frame, scaled to the frame's resolution.
pub fn draw_lane(frame: &mut RgbFrame, lane: &Lane, from_row: f64, color: [u8; 3]) {
    let scale = frame.width() as f64 / WORKING_WIDTH as f64;
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let start = (from_row * scale).floor().max(0.0) as i64;
    for py in start..h {
        let row = (py as f64 + 0.5) / scale;
        let Ok(x) = lane.x_at(row) else { return };
        let px = (x * scale).floor() as i64;
        for dx in -1..=1 {
            let xx = px + dx;
            if (0..w).contains(&xx) {
                frame.set_pixel(xx as usize, py as usize, color);
            }
        }
    }
}

/// Small cross centred at working-resolution coordinates `(x, y)`.
pub fn draw_marker(frame: &mut RgbFrame, x: f64, y: f64, color: [u8; 3]) {
    let scale = frame.width() as f64 / WORKING_WIDTH as f64;
    let (cx, cy) = ((x * scale).floor() as i64, (y * scale).floor() as i64);
    let arm = (3.0 * scale) as i64;
    for d in -arm..=arm {
        for (px, py) in [(cx + d, cy), (cx, cy + d)] {
            if px >= 0 && py >= 0 && (px as usize) < frame.width() && (py as usize) < frame.height()
            {
                frame.set_pixel(px as usize, py as usize, color);
            }
        }
    }
}

/// Copy of `frame` with the fitted lanes in red from the ROI ceiling down,
/// the current position marker in green and the setpoint in blue.
pub fn annotate(
    frame: &RgbFrame,
    lanes: &LanePair,
    ceiling_y: f64,
    position: Option<f64>,
    setpoint_x: f64,
) -> RgbFrame {
    let mut out = frame.clone();
    for lane in [lanes.left, lanes.right].into_iter().flatten() {
        draw_lane(&mut out, &lane, ceiling_y, LANE_COLOR);
    }
    draw_marker(&mut out, setpoint_x, ceiling_y, SETPOINT_COLOR);
    if let Some(x) = position {
        draw_marker(&mut out, x, ceiling_y, MIDPOINT_COLOR);
    }
    debug_assert!(ceiling_y <= WORKING_HEIGHT as f64);
    out
}
