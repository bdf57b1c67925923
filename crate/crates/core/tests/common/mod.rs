#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segfuse::{DepthMap, ImageBuffer, LabelMap, ThingSet};

/// A random compositing group.
pub struct Instance {
    pub images: Vec<ImageBuffer>,
    pub depths: Vec<DepthMap>,
    pub labels: Vec<LabelMap>,
    pub things: ThingSet,
    /// Percentile as an exact fraction `num / den`.
    pub q: (usize, usize),
    pub include_base: bool,
}

pub const NUM_CLASSES: u8 = 6;
const FRACTIONS: [(usize, usize); 6] = [(1, 2), (4, 5), (9, 10), (1, 3), (2, 3), (1, 7)];

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let w = rng.random_range(1..=16);
    let h = rng.random_range(1..=16);
    let n = rng.random_range(1..=5);
    let things = ThingSet::from_ids((0..NUM_CLASSES).filter(|_| rng.random_bool(0.5)));
    let mut images = Vec::new();
    let mut depths = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let p_valid: f64 = [0.0, 0.3, 0.8, 1.0][rng.random_range(0..4)];
        // few distinct depths so ties are common
        let levels = rng.random_range(1..=12);
        let values: Vec<f32> = (0..w * h)
            .map(|_| rng.random_range(1..=levels) as f32 * 0.75)
            .collect();
        let valid: Vec<bool> = (0..w * h).map(|_| rng.random_bool(p_valid)).collect();
        let values = values
            .into_iter()
            .zip(&valid)
            .map(|(v, &ok)| {
                if ok {
                    v
                } else {
                    [0.0, f32::INFINITY][rng.random_range(0..2)]
                }
            })
            .collect();
        depths.push(DepthMap::new(w, h, values, valid).unwrap());
        let lbl: Vec<u8> = (0..w * h)
            .map(|_| {
                if rng.random_bool(0.05) {
                    255
                } else {
                    rng.random_range(0..NUM_CLASSES)
                }
            })
            .collect();
        labels.push(LabelMap::new(w, h, lbl).unwrap());
        let px = (0..w * h).map(|_| rng.random::<[u8; 3]>()).collect();
        images.push(ImageBuffer::new(w, h, px).unwrap());
    }
    Instance {
        images,
        depths,
        labels,
        things,
        q: FRACTIONS[rng.random_range(0..FRACTIONS.len())],
        include_base: rng.random_bool(0.8),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Straight per-pixel evaluation of the compositing rule. Thresholds use
/// integer rank arithmetic and a full sort; the winner is found by scanning
/// all images for the minimum depth.
pub fn brute_force(inst: &Instance) -> (Vec<[u8; 3]>, Vec<u8>, Vec<u8>) {
    let n = inst.images.len();
    let (num, den) = inst.q;
    let thresholds: Vec<Option<f32>> = inst
        .depths
        .iter()
        .map(|d| {
            let mut v: Vec<f32> = (0..d.values().len())
                .filter(|&i| d.valid()[i])
                .map(|i| d.values()[i])
                .collect();
            if v.is_empty() {
                return None;
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let rank = (num * v.len()).div_ceil(den).max(1);
            Some(v[rank - 1])
        })
        .collect();
    let npx = inst.images[0].pixels().len();
    let mut img = Vec::with_capacity(npx);
    let mut lbl = Vec::with_capacity(npx);
    let mut src = Vec::with_capacity(npx);
    for p in 0..npx {
        let first = if inst.include_base { 0 } else { 1 };
        let eligible: Vec<(usize, f32)> = (first..n)
            .filter_map(|k| {
                let t = thresholds[k]?;
                let d = inst.depths[k].values()[p];
                let ok = inst.depths[k].valid()[p]
                    && d < t
                    && inst.things.contains(inst.labels[k].as_slice()[p]);
                ok.then_some((k, d))
            })
            .collect();
        let winner = eligible
            .iter()
            .map(|&(_, d)| d)
            .fold(None, |m: Option<f32>, d| Some(m.map_or(d, |m| m.min(d))))
            .map(|dmin| eligible.iter().find(|&&(_, d)| d == dmin).unwrap().0)
            .unwrap_or(0);
        img.push(inst.images[winner].pixels()[p]);
        lbl.push(inst.labels[winner].as_slice()[p]);
        src.push(winner as u8);
    }
    (img, lbl, src)
}

pub fn run_composite(inst: &Instance) -> segfuse::dbst::Composite {
    use segfuse::dbst::{composite, CompositeConfig, Layer};
    let layers: Vec<Layer> = (0..inst.images.len())
        .map(|k| Layer {
            image: &inst.images[k],
            depth: &inst.depths[k],
            label: &inst.labels[k],
        })
        .collect();
    let cfg = CompositeConfig {
        percentile: inst.q.0 as f64 / inst.q.1 as f64,
        things: inst.things.clone(),
        include_base: inst.include_base,
    };
    composite(&layers, &cfg).unwrap()
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
