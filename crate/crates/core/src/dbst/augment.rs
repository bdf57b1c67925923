//! Random scaling, random cropping and color jitter for synthesized samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{check_dims, ImageBuffer, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    /// Maximum hue rotation as a fraction of a full turn.
    pub hue: f64,
}

impl JitterConfig {
    pub const NONE: JitterConfig = JitterConfig {
        brightness: 0.0,
        contrast: 0.0,
        saturation: 0.0,
        hue: 0.0,
    };
}

impl Default for JitterConfig {
    fn default() -> Self {
        JitterConfig {
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
            hue: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub scale_range: (f64, f64),
    /// Output (width, height).
    pub crop: (usize, usize),
    pub jitter: JitterConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            scale_range: (0.75, 1.5),
            crop: (1024, 512),
            jitter: JitterConfig::default(),
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Domain(format!("bad scale range [{lo}, {hi}]")));
        }
        if self.crop.0 == 0 || self.crop.1 == 0 {
            return Err(Error::Domain("crop dimensions must be at least 1".into()));
        }
        let j = &self.jitter;
        for (name, v, max) in [
            ("brightness", j.brightness, 1.0),
            ("contrast", j.contrast, 1.0),
            ("saturation", j.saturation, 1.0),
            ("hue", j.hue, 0.5),
        ] {
            if !(0.0..=max).contains(&v) {
                return Err(Error::Domain(format!(
                    "{name} jitter {v} outside [0, {max}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterParams {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl JitterParams {
    pub const IDENTITY: JitterParams = JitterParams {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
        hue: 0.0,
    };
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Size after scaling, before cropping.
    pub scaled: (usize, usize),
    /// Top-left corner of the crop in the scaled image.
    pub origin: (usize, usize),
    pub crop: (usize, usize),
    pub jitter: JitterParams,
}

impl AugmentParams {
    /// Draws parameters for an image of `dims`. The scale factor is raised as
    /// needed so the scaled image covers the crop.
    pub fn sample<R: Rng + ?Sized>(
        cfg: &AugmentConfig,
        dims: (usize, usize),
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = dims;
        if w == 0 || h == 0 {
            return Err(Error::CropTooLarge {
                crop_w: cfg.crop.0,
                crop_h: cfg.crop.1,
                width: w,
                height: h,
            });
        }
        let (lo, hi) = cfg.scale_range;
        let drawn = rng.random_range(lo..=hi);
        let needed = (cfg.crop.0 as f64 / w as f64).max(cfg.crop.1 as f64 / h as f64);
        let scale = drawn.max(needed);
        let scaled = if scale == 1.0 {
            dims
        } else {
            (
                ((w as f64 * scale).round() as usize).max(cfg.crop.0),
                ((h as f64 * scale).round() as usize).max(cfg.crop.1),
            )
        };
        let origin = (
            rng.random_range(0..=scaled.0 - cfg.crop.0),
            rng.random_range(0..=scaled.1 - cfg.crop.1),
        );
        let mut factor = |s: f64| rng.random_range(1.0 - s..=1.0 + s);
        let j = &cfg.jitter;
        let jitter = JitterParams {
            brightness: factor(j.brightness),
            contrast: factor(j.contrast),
            saturation: factor(j.saturation),
            hue: rng.random_range(-j.hue..=j.hue),
        };
        Ok(AugmentParams {
            scaled,
            origin,
            crop: cfg.crop,
            jitter,
        })
    }
}

/// Draws parameters from `rng` and applies them.
pub fn augment<R: Rng + ?Sized>(
    image: &ImageBuffer,
    label: &LabelMap,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(ImageBuffer, LabelMap)> {
    check_dims(image.dims(), label.dims())?;
    let params = AugmentParams::sample(cfg, image.dims(), rng)?;
    apply_augment(image, label, &params)
}

/// Scales (bilinear for color, nearest for labels), crops, then jitters the
/// color image.
pub fn apply_augment(
    image: &ImageBuffer,
    label: &LabelMap,
    params: &AugmentParams,
) -> Result<(ImageBuffer, LabelMap)> {
    check_dims(image.dims(), label.dims())?;
    let (cw, ch) = params.crop;
    let (sw, sh) = params.scaled;
    let (ox, oy) = params.origin;
    if cw == 0 || ch == 0 || ox + cw > sw || oy + ch > sh {
        return Err(Error::CropTooLarge {
            crop_w: cw,
            crop_h: ch,
            width: sw.saturating_sub(ox),
            height: sh.saturating_sub(oy),
        });
    }
    let mut out_img = resize_crop_bilinear(image, params);
    let out_lbl = resize_crop_nearest(label, params);
    jitter(&mut out_img, &params.jitter);
    Ok((out_img, out_lbl))
}

// Source coordinate of output pixel center `o` when mapping `src` samples to `dst`.
#[inline]
fn src_coord(o: usize, src: usize, dst: usize) -> f64 {
    (o as f64 + 0.5) * src as f64 / dst as f64 - 0.5
}

fn resize_crop_bilinear(image: &ImageBuffer, params: &AugmentParams) -> ImageBuffer {
    let (w, h) = image.dims();
    let (sw, sh) = params.scaled;
    let (ox, oy) = params.origin;
    let (cw, ch) = params.crop;
    if (sw, sh) == (w, h) {
        let mut out = Vec::with_capacity(cw * ch);
        for y in oy..oy + ch {
            out.extend_from_slice(&image.pixels()[y * w + ox..y * w + ox + cw]);
        }
        return ImageBuffer::new(cw, ch, out).unwrap();
    }
    let axis = |o: usize, src: usize, dst: usize| {
        let u = src_coord(o, src, dst).clamp(0.0, (src - 1) as f64);
        let i0 = u.floor() as usize;
        let i1 = (i0 + 1).min(src - 1);
        (i0, i1, u - i0 as f64)
    };
    let xs: Vec<_> = (ox..ox + cw).map(|x| axis(x, w, sw)).collect();
    let mut out = Vec::with_capacity(cw * ch);
    for y in oy..oy + ch {
        let (y0, y1, fy) = axis(y, h, sh);
        for &(x0, x1, fx) in &xs {
            let p = |x, y| image.get(x, y);
            let (a, b, c, d) = (p(x0, y0), p(x1, y0), p(x0, y1), p(x1, y1));
            let mut px = [0u8; 3];
            for k in 0..3 {
                let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
                let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
                px[k] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.push(px);
        }
    }
    ImageBuffer::new(cw, ch, out).unwrap()
}

fn resize_crop_nearest(label: &LabelMap, params: &AugmentParams) -> LabelMap {
    let (w, h) = label.dims();
    let (sw, sh) = params.scaled;
    let (ox, oy) = params.origin;
    let (cw, ch) = params.crop;
    let near = |o: usize, src: usize, dst: usize| {
        (((o as f64 + 0.5) * src as f64 / dst as f64).floor() as usize).min(src - 1)
    };
    let xs: Vec<usize> = (ox..ox + cw).map(|x| near(x, w, sw)).collect();
    let mut out = Vec::with_capacity(cw * ch);
    for y in oy..oy + ch {
        let sy = near(y, h, sh);
        out.extend(xs.iter().map(|&sx| label.get(sx, sy)));
    }
    LabelMap::new(cw, ch, out).unwrap()
}

fn luma(c: [f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    } / 6.0;
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Brightness, contrast, saturation, then hue. Identity factors are skipped
/// so a zero-strength jitter leaves the image untouched.
fn jitter(image: &mut ImageBuffer, j: &JitterParams) {
    if *j == JitterParams::IDENTITY {
        return;
    }
    let mut px: Vec<[f64; 3]> = image
        .pixels()
        .iter()
        .map(|p| p.map(|c| c as f64 / 255.0))
        .collect();
    let clamp = |c: &mut [f64; 3]| c.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    if j.brightness != 1.0 {
        for c in &mut px {
            c.iter_mut().for_each(|v| *v *= j.brightness);
            clamp(c);
        }
    }
    if j.contrast != 1.0 && !px.is_empty() {
        let mean = px.iter().map(|&c| luma(c)).sum::<f64>() / px.len() as f64;
        for c in &mut px {
            c.iter_mut()
                .for_each(|v| *v = (*v - mean) * j.contrast + mean);
            clamp(c);
        }
    }
    if j.saturation != 1.0 {
        for c in &mut px {
            let g = luma(*c);
            c.iter_mut().for_each(|v| *v = (*v - g) * j.saturation + g);
            clamp(c);
        }
    }
    if j.hue != 0.0 {
        for c in &mut px {
            let [h, s, v] = rgb_to_hsv(*c);
            *c = hsv_to_rgb([h + j.hue, s, v]);
            clamp(c);
        }
    }
    for (dst, c) in image.pixels_mut().iter_mut().zip(px) {
        *dst = c.map(|v| (v * 255.0).round() as u8);
    }
}
