//! On-disk raster formats.
//!
//! * Label maps: 8-bit single-channel PNG.
//! * Depth maps: 16-bit single-channel PNG, `depth = raw / scale`; raw 0 is
//!   "no measurement" and raw 65535 is "too far", both invalid.
//! * Logits: `LGT1` binary. The header is the 4 magic bytes followed by
//!   little-endian `u32` height, width and channel count; the payload is
//!   `height * width * channels` little-endian `f32` in (row, column,
//!   channel) order.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, Luma, Rgb};

use crate::classes::ClassTable;
use crate::error::{Error, Result};
use crate::raster::{DepthMap, ImageBuffer, LabelMap, LogitTensor};

pub const DEFAULT_DEPTH_SCALE: f64 = 256.0;
pub const DEPTH_NONE: u16 = 0;
pub const DEPTH_TOO_FAR: u16 = u16::MAX;

pub const LOGITS_MAGIC: [u8; 4] = *b"LGT1";
const LOGITS_HEADER: usize = 16;

fn describe(color: ColorType) -> String {
    format!(
        "{} channel(s) at {} bits",
        color.channel_count(),
        color.bits_per_pixel() / color.channel_count() as u16
    )
}

fn open(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    Ok(reader.decode()?)
}

fn dims(img: &DynamicImage) -> (usize, usize) {
    (img.width() as usize, img.height() as usize)
}

/// Reads an 8-bit gray label PNG and checks every value against `table`.
pub fn read_label_png(path: &Path, table: &ClassTable) -> Result<LabelMap> {
    let img = open(path)?;
    let (w, h) = dims(&img);
    let DynamicImage::ImageLuma8(buf) = img else {
        return Err(Error::format(
            path,
            format!(
                "label map must be 1 channel at 8 bits, found {}",
                describe(img.color())
            ),
        ));
    };
    let map = LabelMap::new(w, h, buf.into_raw())?;
    if let Some(i) = map
        .as_slice()
        .iter()
        .position(|&v| !table.is_valid_label(v))
    {
        return Err(Error::LabelOutOfRange {
            x: i % w,
            y: i / w,
            value: map.as_slice()[i],
        });
    }
    Ok(map)
}

pub fn write_label_png(path: &Path, map: &LabelMap) -> Result<()> {
    let buf = image::ImageBuffer::<Luma<u8>, _>::from_raw(
        map.width() as u32,
        map.height() as u32,
        map.as_slice().to_vec(),
    )
    .expect("buffer sized by LabelMap");
    buf.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "depth scale must be positive, got {scale}"
        )))
    }
}

/// Reads a 16-bit gray depth PNG. Invalid pixels decode to 0 (no measurement)
/// or +inf (too far) so that writing them back restores the original code.
pub fn read_depth_png(path: &Path, scale: f64) -> Result<DepthMap> {
    check_scale(scale)?;
    let img = open(path)?;
    let (w, h) = dims(&img);
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::format(
            path,
            format!(
                "depth map must be 1 channel at 16 bits, found {}",
                describe(img.color())
            ),
        ));
    };
    let raw = buf.into_raw();
    let valid = raw
        .iter()
        .map(|&r| r != DEPTH_NONE && r != DEPTH_TOO_FAR)
        .collect();
    let values = raw
        .iter()
        .map(|&r| match r {
            DEPTH_NONE => 0.0,
            DEPTH_TOO_FAR => f32::INFINITY,
            r => (r as f64 / scale) as f32,
        })
        .collect();
    DepthMap::new(w, h, values, valid)
}

/// Encodes valid depths as `round(depth * scale)`, which must land in
/// `1..=65534`. Invalid pixels become 65535 when their value is infinite and
/// 0 otherwise.
pub fn encode_depth(depth: &DepthMap, scale: f64) -> Result<Vec<u16>> {
    check_scale(scale)?;
    let w = depth.width();
    depth
        .values()
        .iter()
        .zip(depth.valid())
        .enumerate()
        .map(|(i, (&v, &ok))| {
            if !ok {
                return Ok(if v == f32::INFINITY {
                    DEPTH_TOO_FAR
                } else {
                    DEPTH_NONE
                });
            }
            let raw = (v as f64 * scale).round();
            if (1.0..=65534.0).contains(&raw) {
                Ok(raw as u16)
            } else {
                Err(Error::Domain(format!(
                    "depth {v} at pixel ({}, {}) is not representable at scale {scale}",
                    i % w,
                    i / w
                )))
            }
        })
        .collect()
}

pub fn write_depth_png(path: &Path, depth: &DepthMap, scale: f64) -> Result<()> {
    let raw = encode_depth(depth, scale)?;
    let buf = image::ImageBuffer::<Luma<u16>, _>::from_raw(
        depth.width() as u32,
        depth.height() as u32,
        raw,
    )
    .expect("buffer sized by DepthMap");
    buf.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Reads a color image, converting any PNG color layout to 8-bit RGB.
pub fn read_image_png(path: &Path) -> Result<ImageBuffer> {
    let img = open(path)?;
    let (w, h) = dims(&img);
    let rgb = img.into_rgb8().into_raw();
    ImageBuffer::new(
        w,
        h,
        rgb.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    )
}

pub fn write_image_png(path: &Path, image: &ImageBuffer) -> Result<()> {
    let buf = image::ImageBuffer::<Rgb<u8>, _>::from_raw(
        image.width() as u32,
        image.height() as u32,
        image.to_bytes(),
    )
    .expect("buffer sized by ImageBuffer");
    buf.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

pub fn encode_logits(t: &LogitTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(LOGITS_HEADER + t.as_slice().len() * 4);
    out.extend_from_slice(&LOGITS_MAGIC);
    for d in [t.height(), t.width(), t.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_logits(bytes: &[u8]) -> Result<LogitTensor> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: LOGITS_HEADER,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != LOGITS_MAGIC {
        return Err(if &magic[..3] == b"LGT" {
            Error::UnsupportedVersion(magic)
        } else {
            Error::BadMagic(magic)
        });
    }
    if bytes.len() < LOGITS_HEADER {
        return Err(Error::Truncated {
            expected: LOGITS_HEADER,
            found: bytes.len(),
        });
    }
    let field =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (field(0), field(1), field(2));
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Domain(format!("logits header {h}x{w}x{c} overflows")))?;
    let payload = &bytes[LOGITS_HEADER..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Domain(format!(
            "logits file has {} bytes beyond the promised payload",
            payload.len() - expected
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let t = LogitTensor::new(w, h, c, data)?;
    if let Some((x, y, channel)) = t.first_non_finite() {
        return Err(Error::NonFinite { x, y, channel });
    }
    Ok(t)
}

pub fn read_logits(path: &Path) -> Result<LogitTensor> {
    decode_logits(&fs::read(path)?)
}

pub fn write_logits(path: &Path, t: &LogitTensor) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_logits(t))?;
    Ok(())
}
