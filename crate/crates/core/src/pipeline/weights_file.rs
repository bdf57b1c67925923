//! TOML document holding class frequencies and both branches' weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classes::ClassTable;
use crate::classweights::{ClassWeights, FrequencyStats, WeightMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub id: u8,
    pub name: String,
    pub pixels: u64,
    pub freq: f64,
    pub w_uda_raw: f64,
    pub w_uda: f64,
    pub w_dep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub delta: f64,
    pub mode: WeightMode,
    pub total_pixels: u64,
    #[serde(rename = "class")]
    pub classes: Vec<WeightRow>,
}

impl WeightsFile {
    pub fn new(
        table: &ClassTable,
        stats: &FrequencyStats,
        delta: f64,
        weights: &ClassWeights,
    ) -> Self {
        let classes = table
            .classes()
            .iter()
            .map(|c| {
                let i = c.id as usize;
                WeightRow {
                    id: c.id,
                    name: c.name.clone(),
                    pixels: stats.counts[i],
                    freq: stats.freqs[i],
                    w_uda_raw: weights.w_uda_raw[i],
                    w_uda: weights.w_uda[i],
                    w_dep: weights.w_dep[i],
                }
            })
            .collect();
        WeightsFile {
            delta,
            mode: weights.mode,
            total_pixels: stats.total,
            classes,
        }
    }

    pub fn weights(&self) -> ClassWeights {
        ClassWeights {
            mode: self.mode,
            w_uda_raw: self.classes.iter().map(|r| r.w_uda_raw).collect(),
            w_uda: self.classes.iter().map(|r| r.w_uda).collect(),
            w_dep: self.classes.iter().map(|r| r.w_dep).collect(),
        }
    }

    /// Checks that rows line up with `table` by id and name.
    pub fn check_against(&self, table: &ClassTable) -> Result<()> {
        if self.classes.len() != table.len() {
            return Err(Error::ChannelMismatch {
                expected: table.len(),
                found: self.classes.len(),
            });
        }
        for (row, c) in self.classes.iter().zip(table.classes()) {
            if row.id != c.id || row.name != c.name {
                return Err(Error::ClassTable(format!(
                    "weights row {} `{}` does not match class {} `{}`",
                    row.id, row.name, c.id, c.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("weights serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Domain(format!("weights file: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        WeightsFile::from_toml(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}
