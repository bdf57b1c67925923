//! Confusion-matrix based segmentation metrics: per-class IoU, mIoU and
//! overall pixel accuracy.

use crate::classes::ClassTable;
use crate::error::{Error, Result};
use crate::raster::{check_dims, LabelMap};

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(Error::BufferLength {
                expected: num_classes * num_classes,
                found: counts.len(),
            });
        }
        Ok(ConfusionMatrix {
            num_classes,
            counts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one image. Pixels whose ground truth is the ignore id are skipped;
    /// on error the matrix is unchanged.
    pub fn accumulate(&mut self, gt: &LabelMap, pred: &LabelMap, table: &ClassTable) -> Result<()> {
        check_dims(gt.dims(), pred.dims())?;
        if table.len() != self.num_classes {
            return Err(Error::ChannelMismatch {
                expected: self.num_classes,
                found: table.len(),
            });
        }
        let w = gt.width();
        let c = self.num_classes;
        let mut local = vec![0u64; c * c];
        for (i, (&g, &p)) in gt.as_slice().iter().zip(pred.as_slice()).enumerate() {
            let (x, y) = (i % w, i / w);
            if p == table.ignore_id() {
                return Err(Error::IgnoreInPrediction { x, y });
            }
            if !table.is_class(p) {
                return Err(Error::LabelOutOfRange { x, y, value: p });
            }
            if g == table.ignore_id() {
                continue;
            }
            if !table.is_class(g) {
                return Err(Error::LabelOutOfRange { x, y, value: g });
            }
            local[g as usize * c + p as usize] += 1;
        }
        self.add(&local);
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::ChannelMismatch {
                expected: self.num_classes,
                found: other.num_classes,
            });
        }
        self.add(&other.counts);
        Ok(())
    }

    fn add(&mut self, counts: &[u64]) {
        for (a, b) in self.counts.iter_mut().zip(counts) {
            *a += b;
        }
    }

    /// `tp / (row + col - tp)`; `None` when the class never occurs in either
    /// ground truth or prediction.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        let c = self.num_classes;
        (0..c)
            .map(|k| {
                let tp = self.get(k, k);
                let row: u64 = (0..c).map(|j| self.get(k, j)).sum();
                let col: u64 = (0..c).map(|j| self.get(j, k)).sum();
                let union = row + col - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IoU over classes with a defined IoU, and overall pixel accuracy.
    pub fn miou_and_acc(&self) -> Result<(f64, f64)> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyConfusion);
        }
        let ious: Vec<f64> = self.iou_per_class().into_iter().flatten().collect();
        let miou = ious.iter().sum::<f64>() / ious.len() as f64;
        let trace: u64 = (0..self.num_classes).map(|k| self.get(k, k)).sum();
        Ok((miou, trace as f64 / total as f64))
    }
}
