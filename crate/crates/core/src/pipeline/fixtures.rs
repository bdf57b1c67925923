//! Synthetic street scenes with ground truth, depth and two deliberately
//! complementary prediction branches.
//!
//! Each scene has horizontal stuff bands (sky, building, then a road flanked
//! by sidewalk below the horizon) over a ground-plane depth gradient, plus
//! rectangular things sprites standing on the ground and sized by their
//! depth. Sky depth is encoded as "too far". The depth branch mislabels
//! things pixels at `dep_corruption`, substituting another things class; the
//! UDA branch mislabels stuff pixels at `uda_corruption`, substituting another
//! band class. Both branches are one-hot logits of `logit_magnitude`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::ClassTable;
use crate::error::{Error, Result};
use crate::raster::{DepthMap, ImageBuffer, LabelMap, LogitTensor, SceneSample};
use crate::rng::{sample_rng, SampleRng};

use super::palette::class_color;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub width: usize,
    pub height: usize,
    pub scenes: usize,
    pub seed: u64,
    pub dep_corruption: f64,
    pub uda_corruption: f64,
    pub logit_magnitude: f32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            width: 256,
            height: 128,
            scenes: 50,
            seed: 0,
            dep_corruption: 0.5,
            uda_corruption: 0.5,
            logit_magnitude: 6.0,
        }
    }
}

const BAND_NAMES: [&str; 4] = ["sky", "building", "sidewalk", "road"];
const MAX_DEPTH: f64 = 200.0;
const DEPTH_GRID: f64 = super::io::DEFAULT_DEPTH_SCALE;

struct Vocabulary {
    sky: u8,
    building: u8,
    sidewalk: u8,
    road: u8,
    stuff: Vec<u8>,
    things: Vec<u8>,
}

impl Vocabulary {
    fn new(table: &ClassTable) -> Result<Self> {
        let id = |n: &str| {
            table
                .id_of(n)
                .ok_or_else(|| Error::Domain(format!("fixtures need a `{n}` class")))
        };
        let stuff = BAND_NAMES
            .iter()
            .map(|n| id(n))
            .collect::<Result<Vec<_>>>()?;
        let things = table.things().ids();
        if things.is_empty() {
            return Err(Error::Domain(
                "fixtures need at least one things class".into(),
            ));
        }
        Ok(Vocabulary {
            sky: stuff[0],
            building: stuff[1],
            sidewalk: stuff[2],
            road: stuff[3],
            stuff,
            things,
        })
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Domain("fixture images must be at least 8x8".into()));
        }
        if self.scenes == 0 {
            return Err(Error::Domain("at least one scene".into()));
        }
        for r in [self.dep_corruption, self.uda_corruption] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Domain(format!("corruption rate {r} outside [0, 1]")));
            }
        }
        if !(self.logit_magnitude > 0.0 && self.logit_magnitude.is_finite()) {
            return Err(Error::Domain("logit magnitude must be positive".into()));
        }
        Ok(())
    }
}

pub fn scene_id(index: usize) -> String {
    format!("scene_{index:04}")
}

/// Generates scene `index`; each scene has its own random stream.
pub fn generate_scene(spec: &FixtureSpec, table: &ClassTable, index: usize) -> Result<SceneSample> {
    spec.validate()?;
    let vocab = Vocabulary::new(table)?;
    if spec.dep_corruption > 0.0 && vocab.things.len() < 2 {
        return Err(Error::Domain(
            "things corruption needs two things classes".into(),
        ));
    }
    let mut rng = sample_rng(spec.seed, index, 0);
    let (w, h) = (spec.width, spec.height);

    let horizon = ((h as f64) * rng.random_range(0.40..0.50)).round() as usize;
    let sky_end = ((horizon as f64) * rng.random_range(0.3..0.6)).round() as usize;
    let ground_depth = |y: usize| (2.0 * h as f64 / (y + 1 - horizon) as f64).min(MAX_DEPTH);
    let building_depth = (h as f64).min(MAX_DEPTH * 0.8);

    let mut label = LabelMap::filled(w, h, vocab.sky);
    let mut depth = vec![f32::INFINITY; w * h];
    let mut valid = vec![false; w * h];
    let road_center = w as f64 * rng.random_range(0.4..0.6);
    for y in sky_end..h {
        for x in 0..w {
            let i = y * w + x;
            if y < horizon {
                label.set(x, y, vocab.building);
                depth[i] = (building_depth * (1.0 - 0.1 * (x as f64 / w as f64))) as f32;
            } else {
                let t = (y - horizon) as f64 / (h - horizon) as f64;
                let half = w as f64 * (0.08 + 0.4 * t);
                let on_road = (x as f64 + 0.5 - road_center).abs() < half;
                label.set(x, y, if on_road { vocab.road } else { vocab.sidewalk });
                depth[i] = ground_depth(y) as f32;
            }
            valid[i] = true;
        }
    }

    // Sprites stand on the ground; paint far to near so nearer ones occlude.
    let n_sprites = rng.random_range(3..=6);
    let mut sprites: Vec<(f64, u8, usize, usize, usize, usize)> = (0..n_sprites)
        .map(|_| {
            let class = vocab.things[rng.random_range(0..vocab.things.len())];
            let foot = rng.random_range(horizon + 2..h);
            let d = ground_depth(foot) - 0.05;
            let sh = ((h as f64 * 0.8 / d) * rng.random_range(0.7..1.3)).clamp(2.0, h as f64 * 0.4)
                as usize;
            let sw = ((sh as f64) * rng.random_range(0.4..1.6)).max(2.0) as usize;
            let cx = rng.random_range(0..w);
            let x0 = cx.saturating_sub(sw / 2);
            let x1 = (x0 + sw).min(w);
            let y0 = (foot + 1).saturating_sub(sh);
            (d, class, x0, x1, y0, foot + 1)
        })
        .collect();
    sprites.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(d, class, x0, x1, y0, y1) in &sprites {
        for y in y0..y1 {
            for x in x0..x1 {
                label.set(x, y, class);
                depth[y * w + x] = d as f32;
                valid[y * w + x] = true;
            }
        }
    }

    let image = paint(&label, table, &mut rng);
    let dep_labels = corrupt(&label, &vocab.things, spec.dep_corruption, &mut rng);
    let uda_labels = corrupt(&label, &vocab.stuff, spec.uda_corruption, &mut rng);
    let c = table.len();
    Ok(SceneSample {
        id: scene_id(index),
        image,
        // quantized to the depth PNG grid so fixtures survive a file round trip
        depth: DepthMap::new(w, h, depth, valid)?
            .map_valid(|d| ((d as f64 * DEPTH_GRID).round() / DEPTH_GRID) as f32),
        logits_dep: Some(LogitTensor::one_hot(&dep_labels, c, spec.logit_magnitude)),
        logits_uda: Some(LogitTensor::one_hot(&uda_labels, c, spec.logit_magnitude)),
        label: Some(label),
    })
}

fn paint(label: &LabelMap, table: &ClassTable, rng: &mut SampleRng) -> ImageBuffer {
    let offsets: Vec<[i16; 3]> = (0..=255)
        .map(|_| [0; 3].map(|_: i16| rng.random_range(-20..=20)))
        .collect();
    let px = label
        .as_slice()
        .iter()
        .map(|&l| {
            let base = class_color(table, l);
            let noise: i16 = rng.random_range(-8..=8);
            let mut out = [0u8; 3];
            for k in 0..3 {
                out[k] = (base[k] as i16 + offsets[l as usize][k] + noise).clamp(0, 255) as u8;
            }
            out
        })
        .collect();
    ImageBuffer::new(label.width(), label.height(), px).expect("same size")
}

/// Replaces labels from `group` with a different member of `group` at `rate`.
fn corrupt(label: &LabelMap, group: &[u8], rate: f64, rng: &mut SampleRng) -> LabelMap {
    let mut out = label.clone();
    if rate == 0.0 || group.len() < 2 {
        return out;
    }
    for v in out.as_mut_slice() {
        if let Some(pos) = group.iter().position(|g| g == v) {
            if rng.random_bool(rate) {
                let k = rng.random_range(0..group.len() - 1);
                *v = group[if k >= pos { k + 1 } else { k }];
            }
        }
    }
    out
}

pub fn generate_fixtures(spec: &FixtureSpec, table: &ClassTable) -> Result<Vec<SceneSample>> {
    (0..spec.scenes)
        .map(|i| generate_scene(spec, table, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> FixtureSpec {
        FixtureSpec {
            width: 64,
            height: 32,
            scenes: 4,
            seed: 3,
            ..FixtureSpec::default()
        }
    }

    #[test]
    fn clean_branches_match_ground_truth() {
        let table = ClassTable::preset("cityscapes19").unwrap();
        let s = FixtureSpec {
            dep_corruption: 0.0,
            uda_corruption: 0.0,
            ..spec()
        };
        for scene in generate_fixtures(&s, &table).unwrap() {
            let gt = scene.label.as_ref().unwrap();
            assert_eq!(&scene.logits_dep.as_ref().unwrap().argmax(), gt);
            assert_eq!(&scene.logits_uda.as_ref().unwrap().argmax(), gt);
            assert!(crate::validate::validate_sample(&scene, &table).is_empty());
        }
    }

    #[test]
    fn corruption_respects_groups() {
        let table = ClassTable::preset("cityscapes19").unwrap();
        let things = table.things();
        for scene in generate_fixtures(&spec(), &table).unwrap() {
            let gt = scene.label.unwrap();
            let dep = scene.logits_dep.unwrap().argmax();
            let uda = scene.logits_uda.unwrap().argmax();
            for i in 0..gt.as_slice().len() {
                let g = gt.as_slice()[i];
                if things.contains(g) {
                    assert_eq!(uda.as_slice()[i], g);
                    assert!(things.contains(dep.as_slice()[i]));
                } else {
                    assert_eq!(dep.as_slice()[i], g);
                    assert!(!things.contains(uda.as_slice()[i]));
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let table = ClassTable::preset("cityscapes19").unwrap();
        let a = generate_scene(&spec(), &table, 2).unwrap();
        let b = generate_scene(&spec(), &table, 2).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.depth, b.depth);
        assert_eq!(a.logits_dep, b.logits_dep);
        let c = generate_scene(&FixtureSpec { seed: 4, ..spec() }, &table, 2).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn sky_is_too_far() {
        let table = ClassTable::preset("cityscapes19").unwrap();
        let s = generate_scene(&spec(), &table, 0).unwrap();
        assert_eq!(s.label.as_ref().unwrap().get(10, 0), 10);
        assert_eq!(s.depth.get(10, 0), None);
        assert_eq!(s.depth.values()[10], f32::INFINITY);
    }

    #[test]
    fn needs_band_classes() {
        let t = ClassTable::new(
            vec![crate::classes::ClassEntry {
                id: 0,
                name: "x".into(),
                is_thing: true,
            }],
            255,
        )
        .unwrap();
        assert!(generate_scene(&spec(), &t, 0).is_err());
    }
}
