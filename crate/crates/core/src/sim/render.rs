use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SimConfig, Track, VehiclePose};
use crate::imaging::{RgbFrame, WORKING_HEIGHT, WORKING_WIDTH};

pub const ROAD_COLOR: [u8; 3] = [0, 0, 0];
pub const MARKER_COLOR: [u8; 3] = [255, 255, 255];

/// Forward-looking pinhole camera mounted on the vehicle's centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Mounting height above ground, metres.
    pub height: f64,
    /// Pitch below the horizon, radians.
    pub tilt: f64,
    /// Focal length, pixels.
    pub focal: f64,
    pub width: usize,
    pub image_height: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            height: 0.12,
            tilt: 15f64.to_radians(),
            focal: 250.0,
            width: WORKING_WIDTH,
            image_height: WORKING_HEIGHT,
        }
    }
}

impl CameraModel {
    pub fn is_valid(&self) -> bool {
        self.height > 0.0
            && self.tilt > 0.0
            && self.tilt < std::f64::consts::FRAC_PI_2
            && self.focal > 0.0
            && self.width > 0
            && self.image_height > 0
            && self.horizon_row() < self.image_height as f64
    }

    fn cx(&self) -> f64 {
        self.width as f64 / 2.0
    }

    fn cy(&self) -> f64 {
        self.image_height as f64 / 2.0
    }

    /// Image row of the horizon.
    pub fn horizon_row(&self) -> f64 {
        self.cy() - self.focal * self.tilt.tan()
    }

    /// Projects a ground point given in the vehicle frame (`forward`, `left`)
    /// to continuous image coordinates. `None` when the point is behind the
    /// image plane.
    pub fn project(&self, forward: f64, left: f64) -> Option<(f64, f64)> {
        let (s, c) = self.tilt.sin_cos();
        let depth = forward * c + self.height * s;
        if depth <= 1e-3 {
            return None;
        }
        let down = self.height * c - forward * s;
        Some((
            self.cx() - self.focal * left / depth,
            self.cy() + self.focal * down / depth,
        ))
    }
}

fn seed_for(seed: u64, frame_index: u64) -> u64 {
    seed ^ frame_index
        .wrapping_add(1)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn stamp(frame: &mut RgbFrame, u: f64, v: f64) {
    let (px, py) = (u.floor() as i64, v.floor() as i64);
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (x, y) = (px + dx, py + dy);
            if (0..w).contains(&x) && (0..h).contains(&y) {
                frame.set_pixel(x as usize, y as usize, MARKER_COLOR);
            }
        }
    }
}

fn draw_segment(frame: &mut RgbFrame, a: (f64, f64), b: (f64, f64)) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        stamp(frame, a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
    }
}

/// Renders what the camera sees from `pose`: both lane boundaries as bright
/// 3-px lines on a dark road. Frames in the dropout schedule carry no
/// markers. Pixel noise inverts a `cfg.noise` fraction of pixels, seeded by
/// `(cfg.seed, frame_index)`.
pub fn render_scene(
    pose: &VehiclePose,
    track: &Track,
    cam: &CameraModel,
    frame_index: u64,
    cfg: &SimConfig,
) -> RgbFrame {
    let mut frame =
        RgbFrame::filled(cam.width, cam.image_height, ROAD_COLOR).expect("valid camera size");
    if !cfg.in_dropout(frame_index) {
        let (w, h) = (cam.width as f64, cam.image_height as f64);
        let visible = |p: (f64, f64)| p.0 > -w && p.0 < 2.0 * w && p.1 > -h && p.1 < 2.0 * h;
        let (sin_h, cos_h) = pose.heading.sin_cos();
        for side in [0.5, -0.5] {
            let lateral = side * track.lane_width();
            let mut prev: Option<(f64, f64)> = None;
            for c in track.samples() {
                let (bx, by) = c.offset(lateral);
                let (dx, dy) = (bx - pose.x, by - pose.y);
                let forward = dx * cos_h + dy * sin_h;
                let left = -dx * sin_h + dy * cos_h;
                let p = if forward > 0.0 && forward < 6.0 {
                    cam.project(forward, left).filter(|&p| visible(p))
                } else {
                    None
                };
                if let (Some(a), Some(b)) = (prev, p) {
                    draw_segment(&mut frame, a, b);
                }
                prev = p;
            }
        }
    }
    if cfg.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg.seed, frame_index));
        for y in 0..cam.image_height {
            for x in 0..cam.width {
                if rng.gen_bool(cfg.noise.min(1.0)) {
                    let p = frame.pixel(x, y);
                    frame.set_pixel(x, y, [255 - p[0], 255 - p[1], 255 - p[2]]);
                }
            }
        }
    }
    frame
}

/// Number of marker-colored pixels.
pub fn marker_pixels(frame: &RgbFrame) -> usize {
    frame
        .data()
        .chunks_exact(3)
        .filter(|p| *p == MARKER_COLOR)
        .count()
}
