//! Depth-ordered compositing of things pixels across a group of images.
//!
//! Image 0 of a group is the base. At every pixel, a sample is a candidate if
//! its depth there is valid, strictly below that sample's own percentile
//! threshold, and its label is a thing. The nearest candidate wins (lowest
//! index on equal depth); pixels without candidates keep the base.

use crate::classes::ThingSet;
use crate::error::{Error, Result};
use crate::raster::{check_dims, DepthMap, ImageBuffer, LabelMap};

pub const DEFAULT_PERCENTILE: f64 = 0.8;

fn check_percentile(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "percentile must lie in (0, 1), got {q}"
        )))
    }
}

/// 1-based nearest rank `ceil(q * n)`, clamped to `1..=n`.
pub(crate) fn nearest_rank(q: f64, n: usize) -> usize {
    // Guard against q * n landing a hair above an integer through rounding.
    let r = (q * n as f64 * (1.0 - 1e-12)).ceil() as usize;
    r.clamp(1, n)
}

/// Nearest-rank percentile of the valid depths: the `ceil(q * V)`-th smallest
/// of `V` valid values.
pub fn depth_threshold(depth: &DepthMap, q: f64) -> Result<f32> {
    check_percentile(q)?;
    let mut values: Vec<f32> = depth
        .values()
        .iter()
        .zip(depth.valid())
        .filter_map(|(&v, &ok)| ok.then_some(v))
        .collect();
    if values.is_empty() {
        return Err(Error::NoValidDepth);
    }
    let k = nearest_rank(q, values.len()) - 1;
    let (_, kth, _) = values.select_nth_unstable_by(k, f32::total_cmp);
    Ok(*kth)
}

/// Candidates at pixel `(x, y)` as `(sample index, depth)`, in index order.
/// A `None` threshold marks a sample without valid depth; it never qualifies.
pub fn candidate_depths(
    samples: &[(&LabelMap, &DepthMap)],
    thresholds: &[Option<f32>],
    things: &ThingSet,
    (x, y): (usize, usize),
) -> Result<Vec<(usize, f32)>> {
    if thresholds.len() != samples.len() {
        return Err(Error::Domain(format!(
            "{} thresholds for {} samples",
            thresholds.len(),
            samples.len()
        )));
    }
    if let Some((label, _)) = samples.first() {
        let dims = label.dims();
        for (l, d) in samples {
            check_dims(dims, l.dims())?;
            check_dims(dims, d.dims())?;
        }
        if x >= dims.0 || y >= dims.1 {
            return Err(Error::Domain(format!(
                "pixel ({x}, {y}) outside {}x{}",
                dims.0, dims.1
            )));
        }
    }
    Ok(samples
        .iter()
        .zip(thresholds)
        .enumerate()
        .filter_map(|(n, ((label, depth), t))| {
            let t = (*t)?;
            let d = depth.get(x, y)?;
            (d < t && things.contains(label.get(x, y))).then_some((n, d))
        })
        .collect())
}

/// One member of a compositing group.
#[derive(Debug, Clone, Copy)]
pub struct Layer<'a> {
    pub image: &'a ImageBuffer,
    pub depth: &'a DepthMap,
    pub label: &'a LabelMap,
}

#[derive(Debug, Clone)]
pub struct CompositeConfig {
    pub percentile: f64,
    pub things: ThingSet,
    /// Whether the base image's own pixels compete as candidates.
    pub include_base: bool,
}

impl CompositeConfig {
    pub fn new(things: ThingSet) -> Self {
        CompositeConfig {
            percentile: DEFAULT_PERCENTILE,
            things,
            include_base: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composite {
    pub image: ImageBuffer,
    pub label: LabelMap,
    /// Index of the layer each output pixel was copied from.
    pub source: Vec<u8>,
}

/// Composites `layers` onto `layers[0]`.
pub fn composite(layers: &[Layer<'_>], cfg: &CompositeConfig) -> Result<Composite> {
    check_percentile(cfg.percentile)?;
    let base = layers
        .first()
        .ok_or_else(|| Error::Domain("compositing needs at least one image".into()))?;
    if layers.len() > u8::MAX as usize {
        return Err(Error::Domain("at most 255 images per group".into()));
    }
    let dims = base.image.dims();
    for l in layers {
        check_dims(dims, l.image.dims())?;
        check_dims(dims, l.depth.dims())?;
        check_dims(dims, l.label.dims())?;
    }

    let thresholds: Vec<Option<f32>> = layers
        .iter()
        .enumerate()
        .map(|(n, l)| {
            if n == 0 && !cfg.include_base {
                return Ok(None);
            }
            match depth_threshold(l.depth, cfg.percentile) {
                Ok(t) => Ok(Some(t)),
                Err(Error::NoValidDepth) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let npx = dims.0 * dims.1;
    let mut source = vec![0u8; npx];
    for (p, src) in source.iter_mut().enumerate() {
        let mut best: Option<(f32, usize)> = None;
        for (n, (l, t)) in layers.iter().zip(&thresholds).enumerate() {
            let Some(t) = *t else { continue };
            if !l.depth.valid()[p] {
                continue;
            }
            let d = l.depth.values()[p];
            if d < t && cfg.things.contains(l.label.as_slice()[p]) {
                // strict comparison keeps the lowest index on ties
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, n));
                }
            }
        }
        if let Some((_, n)) = best {
            *src = n as u8;
        }
    }

    let mut image = base.image.clone();
    let mut label = base.label.clone();
    for (p, &n) in source.iter().enumerate() {
        if n != 0 {
            let l = &layers[n as usize];
            image.pixels_mut()[p] = l.image.pixels()[p];
            label.as_mut_slice()[p] = l.label.as_slice()[p];
        }
    }
    Ok(Composite {
        image,
        label,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROAD: u8 = 0;
    const CAR: u8 = 13;
    const PERSON: u8 = 11;

    fn things() -> ThingSet {
        crate::classes::ClassTable::preset("cityscapes19")
            .unwrap()
            .things()
    }

    #[test]
    fn threshold_nearest_rank() {
        let d = DepthMap::from_values(10, 1, (1..=10).map(|v| v as f32).rev().collect()).unwrap();
        assert_eq!(depth_threshold(&d, 0.8).unwrap(), 8.0);
        assert_eq!(depth_threshold(&d, 0.05).unwrap(), 1.0);
        assert_eq!(depth_threshold(&d, 0.99).unwrap(), 10.0);
    }

    #[test]
    fn threshold_ignores_invalid() {
        let d = DepthMap::new(
            4,
            1,
            vec![100.0, 3.0, 0.5, 7.0],
            vec![false, true, false, true],
        )
        .unwrap();
        assert_eq!(depth_threshold(&d, 0.3).unwrap(), 3.0);
        assert_eq!(depth_threshold(&d, 0.8).unwrap(), 7.0);
    }

    #[test]
    fn threshold_degenerate() {
        let one = DepthMap::new(2, 1, vec![4.5, 9.0], vec![true, false]).unwrap();
        for q in [0.01, 0.5, 0.99] {
            assert_eq!(depth_threshold(&one, q).unwrap(), 4.5);
        }
        let none = DepthMap::new(1, 1, vec![1.0], vec![false]).unwrap();
        assert!(matches!(
            depth_threshold(&none, 0.8),
            Err(Error::NoValidDepth)
        ));
        assert!(depth_threshold(&one, 1.0).is_err());
        assert!(depth_threshold(&one, 0.0).is_err());
    }

    #[test]
    fn constant_depth_rejects_everything() {
        let d = DepthMap::from_values(2, 2, vec![3.0; 4]).unwrap();
        let l = LabelMap::filled(2, 2, CAR);
        let t = depth_threshold(&d, 0.8).unwrap();
        assert_eq!(t, 3.0);
        for y in 0..2 {
            for x in 0..2 {
                assert!(candidate_depths(&[(&l, &d)], &[Some(t)], &things(), (x, y))
                    .unwrap()
                    .is_empty());
            }
        }
    }

    #[test]
    fn candidates_filter() {
        let base_l = LabelMap::filled(1, 1, ROAD);
        let base_d = DepthMap::from_values(1, 1, vec![1.0]).unwrap();
        let near = DepthMap::from_values(1, 1, vec![2.0]).unwrap();
        let far = DepthMap::from_values(1, 1, vec![9.0]).unwrap();
        let bad = DepthMap::new(1, 1, vec![2.0], vec![false]).unwrap();
        let person = LabelMap::filled(1, 1, PERSON);
        let t = [Some(8.0), Some(8.0)];
        let got = |d| {
            candidate_depths(&[(&base_l, &base_d), (&person, d)], &t, &things(), (0, 0)).unwrap()
        };
        assert_eq!(got(&near), vec![(1, 2.0)]);
        assert!(got(&far).is_empty());
        assert!(got(&bad).is_empty());
    }

    fn layer_data(
        labels: [u8; 4],
        depth: [f32; 4],
        color: u8,
    ) -> (ImageBuffer, DepthMap, LabelMap) {
        (
            ImageBuffer::new(2, 2, (0..4).map(|i| [color, i as u8, 0]).collect()).unwrap(),
            DepthMap::from_values(2, 2, depth.to_vec()).unwrap(),
            LabelMap::new(2, 2, labels.to_vec()).unwrap(),
        )
    }

    fn layers(data: &[(ImageBuffer, DepthMap, LabelMap)]) -> Vec<Layer<'_>> {
        data.iter()
            .map(|(image, depth, label)| Layer {
                image,
                depth,
                label,
            })
            .collect()
    }

    #[test]
    fn single_image_is_identity() {
        let data = [layer_data(
            [CAR, ROAD, PERSON, ROAD],
            [1.0, 2.0, 3.0, 4.0],
            10,
        )];
        let out = composite(&layers(&data), &CompositeConfig::new(things())).unwrap();
        assert_eq!(out.image, data[0].0);
        assert_eq!(out.label, data[0].2);
    }

    #[test]
    fn person_pasted_onto_road() {
        // Base: all road at depth 5 (threshold 5, nothing qualifies anyway).
        // Source: person at (0,0) depth 2, stuff elsewhere; threshold 10.
        let data = [
            layer_data([ROAD; 4], [5.0; 4], 10),
            layer_data([PERSON, ROAD, ROAD, ROAD], [2.0, 10.0, 10.0, 10.0], 20),
        ];
        let out = composite(&layers(&data), &CompositeConfig::new(things())).unwrap();
        assert_eq!(out.label.as_slice(), &[PERSON, ROAD, ROAD, ROAD]);
        assert_eq!(out.image.get(0, 0), [20, 0, 0]);
        assert_eq!(&out.image.pixels()[1..], &data[0].0.pixels()[1..]);
        assert_eq!(out.source, vec![1, 0, 0, 0]);
    }

    #[test]
    fn nearest_thing_wins() {
        let data = [
            layer_data([CAR, ROAD, ROAD, ROAD], [4.0, 9.0, 9.0, 9.0], 10),
            layer_data([PERSON, ROAD, ROAD, ROAD], [2.0, 9.0, 9.0, 9.0], 20),
        ];
        let out = composite(&layers(&data), &CompositeConfig::new(things())).unwrap();
        assert_eq!(out.label.get(0, 0), PERSON);

        // Base excluded: the source still wins where it qualifies, and a base
        // car with no competition stays (it is the fallback).
        let mut cfg = CompositeConfig::new(things());
        cfg.include_base = false;
        let data = [
            layer_data([CAR, ROAD, ROAD, ROAD], [1.0, 9.0, 9.0, 9.0], 10),
            layer_data([PERSON, ROAD, ROAD, ROAD], [2.0, 9.0, 9.0, 9.0], 20),
        ];
        let out = composite(&layers(&data), &cfg).unwrap();
        assert_eq!(out.label.get(0, 0), PERSON);
        let out = composite(&layers(&data), &CompositeConfig::new(things())).unwrap();
        assert_eq!(out.label.get(0, 0), CAR);
    }

    #[test]
    fn equal_depth_prefers_lower_index() {
        let data = [
            layer_data([ROAD; 4], [5.0; 4], 10),
            layer_data([CAR, ROAD, ROAD, ROAD], [2.0, 9.0, 9.0, 9.0], 20),
            layer_data([PERSON, ROAD, ROAD, ROAD], [2.0, 9.0, 9.0, 9.0], 30),
        ];
        let out = composite(&layers(&data), &CompositeConfig::new(things())).unwrap();
        assert_eq!(out.label.get(0, 0), CAR);
        assert_eq!(out.source[0], 1);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let a = layer_data([ROAD; 4], [5.0; 4], 10);
        let img = ImageBuffer::filled(1, 4, [0; 3]);
        let l = [
            Layer {
                image: &a.0,
                depth: &a.1,
                label: &a.2,
            },
            Layer {
                image: &img,
                depth: &a.1,
                label: &a.2,
            },
        ];
        assert!(matches!(
            composite(&l, &CompositeConfig::new(things())),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(composite(&[], &CompositeConfig::new(things())).is_err());
    }
}
