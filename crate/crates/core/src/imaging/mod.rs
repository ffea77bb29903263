//! Frame preprocessing: grayscale conversion, half-resolution downsampling,
//! Gaussian blur, Canny edge detection and region-of-interest masking.
//!
//! Every operation here is a pure function of its inputs. Frames are
//! row-major and immutable once built.

mod canny;
pub mod pnm;

pub use canny::{canny, sobel_magnitude};

use thiserror::Error;

/// Working resolution of the detection chain.
pub const WORKING_WIDTH: usize = 320;
pub const WORKING_HEIGHT: usize = 240;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("frame dimensions must be non-zero, got {width}x{height}")]
    EmptyFrame { width: usize, height: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("frame {width}x{height} cannot be halved: both dimensions must be even")]
    OddDimension { width: usize, height: usize },
    #[error("gaussian kernel size must be odd and at least 3, got {0}")]
    KernelSize(usize),
    #[error("gaussian sigma must be positive and finite, got {0}")]
    Sigma(f64),
    #[error("canny thresholds must satisfy 0 < low <= high, got low={low} high={high}")]
    Thresholds { low: f32, high: f32 },
    #[error("unsupported frame size {width}x{height}; expected 320x240 or 640x480")]
    UnsupportedSize { width: usize, height: usize },
}

fn check_dims(
    width: usize,
    height: usize,
    len: usize,
    channels: usize,
) -> Result<(), ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyFrame { width, height });
    }
    let expected = width * height * channels;
    if len != expected {
        return Err(ImagingError::BufferSize {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Interleaved 8-bit RGB frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        check_dims(width, height, data.len(), 3)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A frame filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Replicates a gray frame into all three channels.
    pub fn from_gray(gray: &GrayFrame) -> Self {
        let data = gray.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            width: gray.width,
            height: gray.height,
            data,
        }
    }
}

/// 8-bit single channel frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        check_dims(width, height, data.len(), 1)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }
}

/// Binary edge raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImagingError> {
        check_dims(width, height, data.len(), 1)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, edge: bool) {
        self.data[y * self.width + x] = edge;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&e| e).count()
    }

    /// Coordinates of set pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Renders the map as a gray frame with values {0, 255}.
    pub fn to_gray(&self) -> GrayFrame {
        GrayFrame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&e| if e { 255 } else { 0 }).collect(),
        }
    }

    /// Any non-zero pixel is an edge.
    pub fn from_gray(gray: &GrayFrame) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| v != 0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub low_threshold: f32,
    pub high_threshold: f32,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            low_threshold: 50.0,
            high_threshold: 150.0,
            blur_kernel: 5,
            blur_sigma: 1.0,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), ImagingError> {
        let (low, high) = (self.low_threshold, self.high_threshold);
        if !(low > 0.0 && low <= high && high.is_finite()) {
            return Err(ImagingError::Thresholds { low, high });
        }
        check_kernel(self.blur_kernel, self.blur_sigma)
    }
}

fn check_kernel(kernel: usize, sigma: f64) -> Result<(), ImagingError> {
    if kernel < 3 || kernel.is_multiple_of(2) {
        return Err(ImagingError::KernelSize(kernel));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ImagingError::Sigma(sigma));
    }
    Ok(())
}

/// BT.601 luma: `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(frame: &RgbFrame) -> GrayFrame {
    let data = frame
        .data
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayFrame {
        width: frame.width,
        height: frame.height,
        data,
    }
}

/// Halves both dimensions by averaging each 2x2 block (rounded half up).
pub fn downsample_half(frame: &GrayFrame) -> Result<GrayFrame, ImagingError> {
    let (w, h) = (frame.width, frame.height);
    if w % 2 != 0 || h % 2 != 0 {
        return Err(ImagingError::OddDimension {
            width: w,
            height: h,
        });
    }
    let (ow, oh) = (w / 2, h / 2);
    let mut data = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        let top = &frame.data[2 * y * w..(2 * y + 1) * w];
        let bottom = &frame.data[(2 * y + 1) * w..(2 * y + 2) * w];
        for x in 0..ow {
            let sum = u32::from(top[2 * x])
                + u32::from(top[2 * x + 1])
                + u32::from(bottom[2 * x])
                + u32::from(bottom[2 * x + 1]);
            data.push(((sum + 2) / 4) as u8);
        }
    }
    GrayFrame::new(ow, oh, data)
}

/// Normalized 1-D Gaussian weights, `g(i) ∝ exp(-i²/2σ²)` for `i` in `-k/2..=k/2`.
pub fn gaussian_kernel(kernel: usize, sigma: f64) -> Result<Vec<f64>, ImagingError> {
    check_kernel(kernel, sigma)?;
    let half = (kernel / 2) as i64;
    let raw: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|g| g / total).collect())
}

/// Separable Gaussian blur with replicated borders. Both passes run in
/// floating point and the result is rounded once.
pub fn gaussian_blur(
    frame: &GrayFrame,
    kernel: usize,
    sigma: f64,
) -> Result<GrayFrame, ImagingError> {
    let weights = gaussian_kernel(kernel, sigma)?;
    let half = (kernel / 2) as isize;
    let (w, h) = (frame.width, frame.height);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![0f64; w * h];
    for y in 0..h {
        let row = &frame.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, g) in weights.iter().enumerate() {
                let sx = clamp(x as isize + k as isize - half, w);
                acc += g * f64::from(row[sx]);
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut data = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, g) in weights.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - half, h);
                acc += g * horizontal[sy * w + x];
            }
            data[y * w + x] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    GrayFrame::new(w, h, data)
}

/// Clears every row above `height / 2`; the bottom half is the region of
/// interest and row `height / 2` is its ceiling.
pub fn roi_mask(edges: &EdgeMap) -> EdgeMap {
    let mut out = edges.clone();
    let ceiling = roi_ceiling(edges.height);
    out.data[..ceiling * edges.width].fill(false);
    out
}

/// First row of the region of interest.
pub fn roi_ceiling(height: usize) -> usize {
    height / 2
}

/// Converts any source frame to the 320x240 working resolution.
pub fn to_working_gray(frame: &GrayFrame) -> Result<GrayFrame, ImagingError> {
    match (frame.width, frame.height) {
        (WORKING_WIDTH, WORKING_HEIGHT) => Ok(frame.clone()),
        (w, h) if w == 2 * WORKING_WIDTH && h == 2 * WORKING_HEIGHT => downsample_half(frame),
        (width, height) => Err(ImagingError::UnsupportedSize { width, height }),
    }
}

/// The whole preprocessing chain: grayscale, resize to working resolution,
/// blur, Canny, ROI mask.
pub fn preprocess(frame: &RgbFrame, params: &CannyParams) -> Result<EdgeMap, ImagingError> {
    preprocess_gray(&to_grayscale(frame), params)
}

pub fn preprocess_gray(gray: &GrayFrame, params: &CannyParams) -> Result<EdgeMap, ImagingError> {
    params.validate()?;
    let working = to_working_gray(gray)?;
    let blurred = gaussian_blur(&working, params.blur_kernel, params.blur_sigma)?;
    Ok(roi_mask(&canny(&blurred, params)))
}
