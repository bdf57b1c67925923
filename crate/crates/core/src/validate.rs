//! Structural checks of a [`SceneSample`] against a [`ClassTable`].

use std::fmt;

use crate::classes::ClassTable;
use crate::raster::{LabelMap, LogitTensor, SceneSample};

/// Which raster of a sample a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Depth,
    Label,
    LogitsDep,
    LogitsUda,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Depth => "depth",
            Field::Label => "label",
            Field::LogitsDep => "logits_dep",
            Field::LogitsUda => "logits_uda",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Raster size differs from the image's.
    Dimensions {
        field: Field,
        expected: (usize, usize),
        found: (usize, usize),
    },
    LabelOutOfRange {
        x: usize,
        y: usize,
        value: u8,
    },
    ChannelCount {
        field: Field,
        expected: usize,
        found: usize,
    },
    NonFiniteLogit {
        field: Field,
        x: usize,
        y: usize,
        channel: usize,
    },
    /// A pixel flagged valid whose depth is not finite and positive.
    InvalidDepth {
        x: usize,
        y: usize,
        value: f32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimensions {
                field,
                expected,
                found,
            } => write!(
                f,
                "{field}: size {}x{} differs from image size {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Violation::LabelOutOfRange { x, y, value } => {
                write!(
                    f,
                    "label: value {value} at pixel ({x}, {y}) is not in the class table"
                )
            }
            Violation::ChannelCount {
                field,
                expected,
                found,
            } => write!(f, "{field}: {found} channels, class table has {expected}"),
            Violation::NonFiniteLogit {
                field,
                x,
                y,
                channel,
            } => write!(
                f,
                "{field}: non-finite score at pixel ({x}, {y}), channel {channel}"
            ),
            Violation::InvalidDepth { x, y, value } => {
                write!(f, "depth: valid pixel ({x}, {y}) has value {value}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every violated invariant of `sample`. Pixel-level checks are skipped
/// for rasters whose size is already wrong.
pub fn validate_sample(sample: &SceneSample, table: &ClassTable) -> ValidationReport {
    let mut out = Vec::new();
    let dims = sample.image.dims();
    let dims_ok = |field, found: (usize, usize), out: &mut Vec<Violation>| {
        if found != dims {
            out.push(Violation::Dimensions {
                field,
                expected: dims,
                found,
            });
            false
        } else {
            true
        }
    };

    if dims_ok(Field::Depth, sample.depth.dims(), &mut out) {
        let w = sample.depth.width();
        for (i, (&v, &ok)) in sample
            .depth
            .values()
            .iter()
            .zip(sample.depth.valid())
            .enumerate()
        {
            if ok && !(v.is_finite() && v > 0.0) {
                out.push(Violation::InvalidDepth {
                    x: i % w,
                    y: i / w,
                    value: v,
                });
            }
        }
    }
    if let Some(label) = &sample.label {
        if dims_ok(Field::Label, label.dims(), &mut out) {
            label_violations(label, table, &mut out);
        }
    }
    for (field, logits) in [
        (Field::LogitsDep, &sample.logits_dep),
        (Field::LogitsUda, &sample.logits_uda),
    ] {
        if let Some(logits) = logits {
            let sized = dims_ok(field, logits.dims(), &mut out);
            logit_violations(field, logits, table, sized, &mut out);
        }
    }
    ValidationReport { violations: out }
}

fn label_violations(label: &LabelMap, table: &ClassTable, out: &mut Vec<Violation>) {
    let w = label.width();
    for (i, &value) in label.as_slice().iter().enumerate() {
        if !table.is_valid_label(value) {
            out.push(Violation::LabelOutOfRange {
                x: i % w,
                y: i / w,
                value,
            });
        }
    }
}

fn logit_violations(
    field: Field,
    logits: &LogitTensor,
    table: &ClassTable,
    sized: bool,
    out: &mut Vec<Violation>,
) {
    if logits.channels() != table.len() {
        out.push(Violation::ChannelCount {
            field,
            expected: table.len(),
            found: logits.channels(),
        });
    }
    if !sized || logits.channels() == 0 {
        return;
    }
    let c = logits.channels();
    let w = logits.width();
    for (i, v) in logits.as_slice().iter().enumerate() {
        if !v.is_finite() {
            let p = i / c;
            out.push(Violation::NonFiniteLogit {
                field,
                x: p % w,
                y: p / w,
                channel: i % c,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{DepthMap, ImageBuffer};

    fn sample(w: usize, h: usize, channels: usize) -> SceneSample {
        let label = LabelMap::filled(w, h, 0);
        SceneSample {
            id: "s".into(),
            image: ImageBuffer::filled(w, h, [1, 2, 3]),
            depth: DepthMap::from_values(w, h, vec![1.0; w * h]).unwrap(),
            logits_dep: Some(LogitTensor::one_hot(&label, channels, 6.0)),
            logits_uda: Some(LogitTensor::one_hot(&label, channels, 6.0)),
            label: Some(label),
        }
    }

    fn cs() -> ClassTable {
        ClassTable::preset("cityscapes19").unwrap()
    }

    #[test]
    fn well_formed_sample_is_clean() {
        assert!(validate_sample(&sample(3, 2, 19), &cs()).is_empty());
    }

    #[test]
    fn out_of_range_label_named() {
        let mut s = sample(3, 2, 19);
        s.label.as_mut().unwrap().set(2, 1, 200);
        let r = validate_sample(&s, &cs());
        assert_eq!(
            r.violations,
            vec![Violation::LabelOutOfRange {
                x: 2,
                y: 1,
                value: 200
            }]
        );
        assert!(r.to_string().contains("200"));
    }

    #[test]
    fn ignore_label_is_fine() {
        let mut s = sample(2, 2, 19);
        s.label.as_mut().unwrap().set(0, 0, 255);
        assert!(validate_sample(&s, &cs()).is_empty());
    }

    #[test]
    fn channel_count_mismatch() {
        let mut s = sample(2, 2, 19);
        s.logits_uda = Some(LogitTensor::new(2, 2, 12, vec![0.0; 48]).unwrap());
        let r = validate_sample(&s, &cs());
        assert_eq!(
            r.violations,
            vec![Violation::ChannelCount {
                field: Field::LogitsUda,
                expected: 19,
                found: 12
            }]
        );
    }

    #[test]
    fn non_finite_and_dimension_violations() {
        let mut s = sample(2, 2, 19);
        s.logits_dep.as_mut().unwrap().pixel_mut(1, 0)[4] = f32::INFINITY;
        s.depth = DepthMap::new(2, 2, vec![1.0, f32::NAN, 1.0, 1.0], vec![true; 4]).unwrap();
        s.label = Some(LabelMap::filled(3, 2, 0));
        let r = validate_sample(&s, &cs());
        assert_eq!(r.len(), 3, "{r}");
        assert!(r.violations.contains(&Violation::NonFiniteLogit {
            field: Field::LogitsDep,
            x: 1,
            y: 0,
            channel: 4
        }));
        assert!(matches!(
            r.violations[0],
            Violation::InvalidDepth { x: 1, y: 0, .. }
        ));
    }
}
