//! Per-pixel fusion of two branches' temperature softmaxes with per-class
//! weights, and the final argmax decision.

use crate::classweights::ClassWeights;
use crate::error::{Error, Result};
use crate::raster::{argmax_lowest, check_dims, LabelMap, LogitTensor};

pub const DEFAULT_TEMPERATURE: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct FusionConfig {
    pub temperature: f64,
    pub weights: ClassWeights,
}

impl FusionConfig {
    pub fn new(temperature: f64, weights: ClassWeights) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(FusionConfig {
            temperature,
            weights,
        })
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "temperature must be positive, got {t}"
        )))
    }
}

/// Per-pixel class scores in double precision.
///
/// Fused scores are a per-class convex combination of two distributions and
/// are not renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ScoreTensor {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::BufferLength {
                expected: width * height * channels,
                found: data.len(),
            });
        }
        Ok(ScoreTensor {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Narrows to single precision for storage in the logits file format.
    pub fn to_logit_tensor(&self) -> LogitTensor {
        LogitTensor::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("same shape")
    }
}

/// Softmax of `logits / temperature` at one pixel, written into `out`.
#[inline]
fn softmax_pixel(logits: &[f32], inv_t: f64, out: &mut [f64]) {
    let max = logits
        .iter()
        .fold(f64::NEG_INFINITY, |m, &z| m.max(z as f64));
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = ((z as f64 - max) * inv_t).exp();
        *o = e;
        sum += e;
    }
    let inv_sum = 1.0 / sum;
    for o in out.iter_mut() {
        *o *= inv_sum;
    }
}

fn ensure_finite(logits: &LogitTensor) -> Result<()> {
    match logits.first_non_finite() {
        Some((x, y, channel)) => Err(Error::NonFinite { x, y, channel }),
        None => Ok(()),
    }
}

/// Temperature softmax over the channel axis of every pixel.
pub fn softmax_t(logits: &LogitTensor, temperature: f64) -> Result<ScoreTensor> {
    check_temperature(temperature)?;
    ensure_finite(logits)?;
    let c = logits.channels();
    let mut data = vec![0.0; logits.as_slice().len()];
    if c > 0 {
        for (out, px) in data
            .chunks_exact_mut(c)
            .zip(logits.as_slice().chunks_exact(c))
        {
            softmax_pixel(px, 1.0 / temperature, out);
        }
    }
    ScoreTensor::new(logits.width(), logits.height(), c, data)
}

fn check_pair(dep: &LogitTensor, uda: &LogitTensor, weights: &ClassWeights) -> Result<()> {
    check_dims(dep.dims(), uda.dims())?;
    for found in [dep.channels(), uda.channels()] {
        if found != weights.len() {
            return Err(Error::ChannelMismatch {
                expected: weights.len(),
                found,
            });
        }
    }
    ensure_finite(dep)?;
    ensure_finite(uda)
}

/// `w_dep * softmax_T(dep) + w_uda * softmax_T(uda)`, class by class.
pub fn fuse(dep: &LogitTensor, uda: &LogitTensor, cfg: &FusionConfig) -> Result<ScoreTensor> {
    check_temperature(cfg.temperature)?;
    check_pair(dep, uda, &cfg.weights)?;
    let c = dep.channels();
    let inv_t = 1.0 / cfg.temperature;
    let (w_dep, w_uda) = (&cfg.weights.w_dep, &cfg.weights.w_uda);
    let mut data = vec![0.0; dep.as_slice().len()];
    let mut p_dep = vec![0.0; c];
    let mut p_uda = vec![0.0; c];
    for ((out, zd), zu) in data
        .chunks_exact_mut(c)
        .zip(dep.as_slice().chunks_exact(c))
        .zip(uda.as_slice().chunks_exact(c))
    {
        softmax_pixel(zd, inv_t, &mut p_dep);
        softmax_pixel(zu, inv_t, &mut p_uda);
        for i in 0..c {
            out[i] = w_dep[i] * p_dep[i] + w_uda[i] * p_uda[i];
        }
    }
    ScoreTensor::new(dep.width(), dep.height(), c, data)
}

/// Per-pixel argmax; ties go to the lowest class id.
pub fn decide_labels(scores: &ScoreTensor) -> LabelMap {
    let c = scores.channels.max(1);
    let data = if scores.channels == 0 {
        vec![0; scores.width * scores.height]
    } else {
        scores
            .data
            .chunks_exact(c)
            .map(|px| argmax_lowest(px.iter().copied()) as u8)
            .collect()
    };
    LabelMap::new(scores.width, scores.height, data).expect("same shape")
}

/// [`fuse`] followed by [`decide_labels`] without materializing the scores.
pub fn fuse_labels(dep: &LogitTensor, uda: &LogitTensor, cfg: &FusionConfig) -> Result<LabelMap> {
    check_temperature(cfg.temperature)?;
    check_pair(dep, uda, &cfg.weights)?;
    let c = dep.channels();
    let inv_t = 1.0 / cfg.temperature;
    let (w_dep, w_uda) = (&cfg.weights.w_dep, &cfg.weights.w_uda);
    let mut p_dep = vec![0.0; c];
    let mut p_uda = vec![0.0; c];
    let data = dep
        .as_slice()
        .chunks_exact(c)
        .zip(uda.as_slice().chunks_exact(c))
        .map(|(zd, zu)| {
            softmax_pixel(zd, inv_t, &mut p_dep);
            softmax_pixel(zu, inv_t, &mut p_uda);
            argmax_lowest((0..c).map(|i| w_dep[i] * p_dep[i] + w_uda[i] * p_uda[i])) as u8
        })
        .collect();
    LabelMap::new(dep.width(), dep.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(channels: usize, px: &[f32]) -> LogitTensor {
        LogitTensor::new(px.len() / channels, 1, channels, px.to_vec()).unwrap()
    }

    fn cfg(w_uda: Vec<f64>) -> FusionConfig {
        FusionConfig::new(DEFAULT_TEMPERATURE, ClassWeights::from_uda(w_uda)).unwrap()
    }

    #[test]
    fn softmax_uniform() {
        let s = softmax_t(&tensor(3, &[0.0, 0.0, 0.0]), 2.5).unwrap();
        for &p in s.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_closed_form() {
        let s = softmax_t(&tensor(2, &[6.0, 0.0]), 6.0).unwrap();
        // e/(e+1), 1/(e+1)
        assert!((s.as_slice()[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((s.as_slice()[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn softmax_overflow_safe() {
        let s = softmax_t(&tensor(2, &[3.0e38, 2.9e38]), 1.0).unwrap();
        assert!(s.as_slice().iter().all(|p| p.is_finite()));
        assert_eq!(s.as_slice()[0], 1.0);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(
            softmax_t(&tensor(2, &[0.0, f32::NAN]), 1.0),
            Err(Error::NonFinite {
                x: 0,
                y: 0,
                channel: 1
            })
        ));
        assert!(softmax_t(&tensor(2, &[0.0, 0.0]), 0.0).is_err());
        assert!(FusionConfig::new(-1.0, ClassWeights::from_uda(vec![1.0])).is_err());
    }

    #[test]
    fn fuse_hand_example() {
        // Logits whose T=1 softmax is (0.9, 0.1) and (0.2, 0.8).
        let dep = tensor(2, &[(9.0f32).ln(), 0.0]);
        let uda = tensor(2, &[0.0, (4.0f32).ln()]);
        let mut c = cfg(vec![0.03, 1.0]);
        c.temperature = 1.0;
        let out = fuse(&dep, &uda, &c).unwrap();
        assert!(
            (out.as_slice()[0] - 0.879).abs() < 1e-6,
            "{:?}",
            out.as_slice()
        );
        assert!((out.as_slice()[1] - 0.8).abs() < 1e-6);
        assert_eq!(decide_labels(&out).as_slice(), &[0]);
        assert_eq!(fuse_labels(&dep, &uda, &c).unwrap().as_slice(), &[0]);
    }

    #[test]
    fn fuse_uda_only_weights() {
        let dep = tensor(3, &[1.0, 5.0, -2.0, 0.5, 0.5, 0.0]);
        let uda = tensor(3, &[0.0, 2.0, 7.0, 3.0, -1.0, 0.25]);
        let out = fuse(&dep, &uda, &cfg(vec![1.0; 3])).unwrap();
        assert_eq!(out, softmax_t(&uda, DEFAULT_TEMPERATURE).unwrap());
    }

    #[test]
    fn fuse_shape_errors() {
        let a = tensor(3, &[0.0; 6]);
        let b = tensor(3, &[0.0; 3]);
        assert!(matches!(
            fuse(&a, &b, &cfg(vec![0.5; 3])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            fuse(&a, &a, &cfg(vec![0.5; 2])),
            Err(Error::ChannelMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn decide_ties_and_one_hot() {
        let s =
            ScoreTensor::new(3, 1, 3, vec![0.2, 0.2, 0.2, 0.0, 0.0, 1.0, 0.1, 0.7, 0.7]).unwrap();
        assert_eq!(decide_labels(&s).as_slice(), &[0, 2, 1]);
    }

    fn pixels(c: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-20.0f32..20.0, c * 6)
    }

    proptest! {
        #[test]
        fn fixed_point_when_branches_agree(z in pixels(5), w in prop::collection::vec(0.0f64..=1.0, 5)) {
            let t = LogitTensor::new(3, 2, 5, z).unwrap();
            let out = fuse(&t, &t, &cfg(w)).unwrap();
            let p = softmax_t(&t, DEFAULT_TEMPERATURE).unwrap();
            for (a, b) in out.as_slice().iter().zip(p.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn shift_invariance(zd in pixels(4), zu in pixels(4), shift in -50.0f32..50.0, w in prop::collection::vec(0.0f64..=1.0, 4)) {
            let dep = LogitTensor::new(2, 3, 4, zd.clone()).unwrap();
            let uda = LogitTensor::new(2, 3, 4, zu).unwrap();
            let shifted = LogitTensor::new(2, 3, 4, zd.iter().map(|z| z + shift).collect()).unwrap();
            let c = cfg(w);
            let a = fuse(&dep, &uda, &c).unwrap();
            let b = fuse(&shifted, &uda, &c).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn per_class_convexity(zd in pixels(4), zu in pixels(4), w in prop::collection::vec(0.0f64..=1.0, 4)) {
            let dep = LogitTensor::new(2, 3, 4, zd).unwrap();
            let uda = LogitTensor::new(2, 3, 4, zu).unwrap();
            let out = fuse(&dep, &uda, &cfg(w)).unwrap();
            let pd = softmax_t(&dep, DEFAULT_TEMPERATURE).unwrap();
            let pu = softmax_t(&uda, DEFAULT_TEMPERATURE).unwrap();
            for i in 0..out.as_slice().len() {
                let (a, b) = (pd.as_slice()[i], pu.as_slice()[i]);
                let v = out.as_slice()[i];
                prop_assert!(v >= a.min(b) - 1e-15 && v <= a.max(b) + 1e-15);
            }
        }

        #[test]
        fn fuse_labels_matches_decide(zd in pixels(4), zu in pixels(4), w in prop::collection::vec(0.0f64..=1.0, 4)) {
            let dep = LogitTensor::new(3, 2, 4, zd).unwrap();
            let uda = LogitTensor::new(3, 2, 4, zu).unwrap();
            let c = cfg(w);
            prop_assert_eq!(decide_labels(&fuse(&dep, &uda, &c).unwrap()), fuse_labels(&dep, &uda, &c).unwrap());
        }
    }
}
