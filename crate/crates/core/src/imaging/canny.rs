use super::{CannyParams, EdgeMap, GrayFrame};

/// Sobel gradient magnitude scaled by 1/4, so a full 0→255 step reads 255.
/// The one-pixel border is left at zero.
pub fn sobel_magnitude(frame: &GrayFrame) -> Vec<f32> {
    let (mag, _) = sobel(frame);
    mag
}

// Quantized gradient orientation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Direction {
    Horizontal,
    Diagonal,
    Vertical,
    AntiDiagonal,
}

impl Direction {
    /// Quantizes `atan2(gy, gx)` into 4 bins centred on 0°, 45°, 90°, 135°.
    /// An angle exactly on a bin boundary falls into the lower bin.
    fn quantize(gx: f32, gy: f32) -> Self {
        let mut angle = gy.atan2(gx).to_degrees();
        if angle < 0.0 {
            angle += 180.0;
        }
        if angle >= 180.0 {
            angle -= 180.0;
        }
        if angle <= 22.5 || angle > 157.5 {
            Direction::Horizontal
        } else if angle <= 67.5 {
            Direction::Diagonal
        } else if angle <= 112.5 {
            Direction::Vertical
        } else {
            Direction::AntiDiagonal
        }
    }

    // Neighbour offsets behind and ahead along the gradient (y grows down).
    fn offsets(self) -> ((isize, isize), (isize, isize)) {
        match self {
            Direction::Horizontal => ((-1, 0), (1, 0)),
            Direction::Diagonal => ((-1, -1), (1, 1)),
            Direction::Vertical => ((0, -1), (0, 1)),
            Direction::AntiDiagonal => ((1, -1), (-1, 1)),
        }
    }
}

fn sobel(frame: &GrayFrame) -> (Vec<f32>, Vec<Direction>) {
    let (w, h) = (frame.width(), frame.height());
    let mut mag = vec![0f32; w * h];
    let mut dir = vec![Direction::Horizontal; w * h];
    if w < 3 || h < 3 {
        return (mag, dir);
    }
    let px = |x: usize, y: usize| i32::from(frame.get(x, y));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
            let (gx, gy) = (gx as f32, gy as f32);
            mag[y * w + x] = (gx * gx + gy * gy).sqrt() / 4.0;
            dir[y * w + x] = Direction::quantize(gx, gy);
        }
    }
    (mag, dir)
}

/// Canny edge detection on an already blurred frame: Sobel gradients,
/// 4-direction non-maximum suppression and double-threshold hysteresis with
/// 8-connectivity. Border pixels are never edges.
///
/// Along the gradient a pixel survives suppression when it is strictly
/// greater than the neighbour behind it and at least equal to the one ahead,
/// so a plateau of two equal magnitudes keeps only one pixel.
pub fn canny(frame: &GrayFrame, params: &CannyParams) -> EdgeMap {
    let (w, h) = (frame.width(), frame.height());
    let (mag, dir) = sobel(frame);
    let mut out = EdgeMap::empty(w, h).expect("dimensions come from a valid frame");
    if w < 3 || h < 3 {
        return out;
    }

    // 0 = suppressed, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    let mut stack = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < params.low_threshold {
                continue;
            }
            let ((bx, by), (ax, ay)) = dir[i].offsets();
            let behind = mag[(y as isize + by) as usize * w + (x as isize + bx) as usize];
            let ahead = mag[(y as isize + ay) as usize * w + (x as isize + ax) as usize];
            if !(m > behind && m >= ahead) {
                continue;
            }
            if m >= params.high_threshold {
                class[i] = 2;
                stack.push(i);
            } else {
                class[i] = 1;
            }
        }
    }

    while let Some(i) = stack.pop() {
        let (x, y) = (i % w, i / w);
        out.set(x, y, true);
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx <= 0 || ny <= 0 || nx >= w as isize - 1 || ny >= h as isize - 1 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if class[j] == 1 {
                    class[j] = 2;
                    stack.push(j);
                }
            }
        }
    }
    out
}
