//! Pixel-frequency class statistics and the per-branch fusion weights derived
//! from them.
//!
//! The weight given to the UDA branch for class `i` is the bounded
//! inverse-log-frequency `1 / ln(delta + f_i)`, and the depth branch receives
//! the complement `1 - w_uda`. Because `1 / ln(delta + f) > 1` for every
//! frequency when `delta` is near one, the raw values are divided by their
//! maximum before taking the complement ([`WeightMode::Normalized`]); the
//! rarest class then trusts the UDA branch fully. [`WeightMode::Raw`] keeps
//! the unnormalized values for experimentation.

use serde::{Deserialize, Serialize};

use crate::classes::ClassTable;
use crate::error::{Error, Result};
use crate::raster::LabelMap;

pub const DEFAULT_DELTA: f64 = 1.02;

/// Mergeable per-class pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyCounter {
    counts: Vec<u64>,
}

impl FrequencyCounter {
    pub fn new(num_classes: usize) -> Self {
        FrequencyCounter {
            counts: vec![0; num_classes],
        }
    }

    /// Adds one label map. Ignore pixels are skipped; any other value outside
    /// the table is an error and leaves the counter untouched.
    pub fn add(&mut self, labels: &LabelMap, table: &ClassTable) -> Result<()> {
        let mut local = vec![0u64; 256];
        for &v in labels.as_slice() {
            local[v as usize] += 1;
        }
        for (value, &n) in local.iter().enumerate() {
            if n > 0 && !table.is_valid_label(value as u8) {
                let i = labels
                    .as_slice()
                    .iter()
                    .position(|&v| v as usize == value)
                    .unwrap();
                return Err(Error::LabelOutOfRange {
                    x: i % labels.width(),
                    y: i / labels.width(),
                    value: value as u8,
                });
            }
        }
        for (c, count) in self.counts.iter_mut().enumerate() {
            *count += local[c];
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &FrequencyCounter) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn finish(self) -> Result<FrequencyStats> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return Err(Error::NoLabelledPixels);
        }
        let freqs = self
            .counts
            .iter()
            .map(|&n| n as f64 / total as f64)
            .collect();
        Ok(FrequencyStats {
            counts: self.counts,
            total,
            freqs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    pub counts: Vec<u64>,
    pub total: u64,
    pub freqs: Vec<f64>,
}

/// Aggregates class pixel frequencies over a stream of label maps.
pub fn compute_frequencies<'a, I>(labels: I, table: &ClassTable) -> Result<FrequencyStats>
where
    I: IntoIterator<Item = &'a LabelMap>,
{
    let mut counter = FrequencyCounter::new(table.len());
    for map in labels {
        counter.add(map, table)?;
    }
    counter.finish()
}

/// `1 / ln(delta + f_i)` for every class.
pub fn uda_weights_raw(stats: &FrequencyStats, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 1.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta must be > 1, got {delta}")));
    }
    Ok(stats
        .freqs
        .iter()
        .map(|&f| 1.0 / (delta + f).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Divide raw UDA weights by their maximum before taking the complement.
    #[default]
    Normalized,
    /// Use raw UDA weights as they are; depth weights may be negative.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub mode: WeightMode,
    pub w_uda_raw: Vec<f64>,
    pub w_uda: Vec<f64>,
    pub w_dep: Vec<f64>,
}

impl ClassWeights {
    /// Weights given directly as UDA-branch values; depth weights are the
    /// complement.
    pub fn from_uda(w_uda: Vec<f64>) -> Self {
        ClassWeights {
            mode: WeightMode::Raw,
            w_uda_raw: w_uda.clone(),
            w_dep: w_uda.iter().map(|w| 1.0 - w).collect(),
            w_uda,
        }
    }

    pub fn from_stats(stats: &FrequencyStats, delta: f64, mode: WeightMode) -> Result<Self> {
        finalize_weights(&uda_weights_raw(stats, delta)?, mode)
    }

    pub fn len(&self) -> usize {
        self.w_uda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_uda.is_empty()
    }
}

/// Turns raw UDA weights into the pair of per-class branch weights.
pub fn finalize_weights(raw: &[f64], mode: WeightMode) -> Result<ClassWeights> {
    if raw.is_empty() {
        return Err(Error::Domain("no raw weights".into()));
    }
    if let Some(bad) = raw.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Domain(format!(
            "raw weights must be positive and finite, got {bad}"
        )));
    }
    let w_uda: Vec<f64> = match mode {
        WeightMode::Normalized => {
            let max = raw.iter().copied().fold(f64::MIN, f64::max);
            raw.iter().map(|w| w / max).collect()
        }
        WeightMode::Raw => raw.to_vec(),
    };
    Ok(ClassWeights {
        mode,
        w_uda_raw: raw.to_vec(),
        w_dep: w_uda.iter().map(|w| 1.0 - w).collect(),
        w_uda,
    })
}
