//! Row-major rasters: labels, depth, color images and per-class logits.

use crate::error::{Error, Result};

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::BufferLength { expected, found })
    }
}

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            found_w: found.0,
            found_h: found.1,
        })
    }
}

/// One class id (or the ignore id) per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_len(width * height, data.len())?;
        Ok(LabelMap {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        LabelMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }
}

/// Per-pixel depth (larger is farther) with a validity mask.
///
/// Only the ordering of depth values matters to the algorithms in this crate,
/// so the unit is arbitrary.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        check_len(width * height, values.len())?;
        check_len(width * height, valid.len())?;
        Ok(DepthMap {
            width,
            height,
            values,
            valid,
        })
    }

    /// Marks a pixel valid iff its value is finite and strictly positive.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        let valid = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        DepthMap::new(width, height, values, valid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.values[i])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Applies `f` to every valid depth value; the mask is unchanged.
    pub fn map_valid(&self, mut f: impl FnMut(f32) -> f32) -> DepthMap {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(&v, &ok)| if ok { f(v) } else { v })
            .collect();
        DepthMap {
            width: self.width,
            height: self.height,
            values,
            valid: self.valid.clone(),
        }
    }
}

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        check_len(width * height, data.len())?;
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        ImageBuffer {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.data[y * self.width + x] = rgb;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().flatten().copied().collect()
    }
}

/// Per-pixel class scores, stored row-major as (row, column, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTensor {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl LogitTensor {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_len(width * height * channels, data.len())?;
        Ok(LogitTensor {
            width,
            height,
            channels,
            data,
        })
    }

    /// Logit `magnitude` on the labelled class and zero elsewhere. Pixels whose
    /// label is not a class id get all-zero logits.
    pub fn one_hot(labels: &LabelMap, channels: usize, magnitude: f32) -> Self {
        let mut data = vec![0.0; labels.as_slice().len() * channels];
        for (px, &l) in data.chunks_exact_mut(channels).zip(labels.as_slice()) {
            if (l as usize) < channels {
                px[l as usize] = magnitude;
            }
        }
        LogitTensor {
            width: labels.width(),
            height: labels.height(),
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// First non-finite score as (x, y, channel).
    pub fn first_non_finite(&self) -> Option<(usize, usize, usize)> {
        let i = self.data.iter().position(|v| !v.is_finite())?;
        let c = i % self.channels;
        let p = i / self.channels;
        Some((p % self.width, p / self.width, c))
    }

    /// Per-pixel argmax, lowest channel on ties.
    pub fn argmax(&self) -> LabelMap {
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| argmax_lowest(px.iter().copied()) as u8)
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

pub(crate) fn argmax_lowest<T: PartialOrd>(values: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match &best {
            Some((_, b)) if v.partial_cmp(b) != Some(std::cmp::Ordering::Greater) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// A scene with its color image, depth map and optional labels and logits.
#[derive(Debug, Clone)]
pub struct SceneSample {
    pub id: String,
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub label: Option<LabelMap>,
    pub logits_dep: Option<LogitTensor>,
    pub logits_uda: Option<LogitTensor>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_length_checked() {
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
        assert!(LogitTensor::new(2, 1, 3, vec![0.0; 6]).is_ok());
        assert!(DepthMap::new(1, 1, vec![1.0], vec![]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax_lowest([0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax_lowest([0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax_lowest([3, 1, 4, 1, 5, 9, 9]), 5);
    }

    #[test]
    fn depth_validity_from_values() {
        let d = DepthMap::from_values(4, 1, vec![1.0, 0.0, f32::NAN, -2.0]).unwrap();
        assert_eq!(d.valid(), &[true, false, false, false]);
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(1, 0), None);
    }

    #[test]
    fn one_hot_argmax_recovers_labels() {
        let l = LabelMap::new(3, 1, vec![2, 0, 1]).unwrap();
        assert_eq!(LogitTensor::one_hot(&l, 3, 6.0).argmax(), l);
    }
}
