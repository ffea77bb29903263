//! Binary netpbm I/O: P5 (PGM) and P6 (PPM), maxval 255 only.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{EdgeMap, GrayFrame, ImagingError, RgbFrame};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported magic number {0:?}, expected P5 or P6")]
    Magic(String),
    #[error("malformed header: {0}")]
    Header(&'static str),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    MaxVal(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Frame(#[from] ImagingError),
}

/// A decoded netpbm image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayFrame),
    Rgb(RgbFrame),
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::Header("file too short"));
    }
    let magic = [bytes[0], bytes[1]];
    if &magic != b"P5" && &magic != b"P6" {
        return Err(PnmError::Magic(
            String::from_utf8_lossy(&magic).into_owned(),
        ));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(PnmError::Header("unexpected end of header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(PnmError::Header("expected a decimal number"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| PnmError::Header("number out of range"))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PnmError::Header("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(PnmError::MaxVal(maxval));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        data_start: pos,
    })
}

pub fn decode(bytes: &[u8]) -> Result<Image, PnmError> {
    let header = parse_header(bytes)?;
    let channels = if &header.magic == b"P5" { 1 } else { 3 };
    let expected = header.width * header.height * channels;
    let raster = &bytes[header.data_start..];
    if raster.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            actual: raster.len(),
        });
    }
    let data = raster[..expected].to_vec();
    Ok(if channels == 1 {
        Image::Gray(GrayFrame::new(header.width, header.height, data)?)
    } else {
        Image::Rgb(RgbFrame::new(header.width, header.height, data)?)
    })
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    out
}

pub fn encode_ppm(frame: &RgbFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<Image, PnmError> {
    decode(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, frame: &GrayFrame) -> Result<(), PnmError> {
    fs::File::create(path)?.write_all(&encode_pgm(frame))?;
    Ok(())
}

pub fn write_ppm(path: impl AsRef<Path>, frame: &RgbFrame) -> Result<(), PnmError> {
    fs::File::create(path)?.write_all(&encode_ppm(frame))?;
    Ok(())
}

/// Edge maps are stored as PGM with values {0, 255}.
pub fn write_edges(path: impl AsRef<Path>, edges: &EdgeMap) -> Result<(), PnmError> {
    write_pgm(path, &edges.to_gray())
}
