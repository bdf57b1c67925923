//! Class vocabularies: train ids, names, the things subset and the ignore id.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value marking pixels that carry no class.
pub const IGNORE_ID: u8 = 255;

const CITYSCAPES19: [(&str, bool); 19] = [
    ("road", false),
    ("sidewalk", false),
    ("building", false),
    ("wall", false),
    ("fence", false),
    ("pole", false),
    ("traffic light", true),
    ("traffic sign", true),
    ("vegetation", false),
    ("terrain", false),
    ("sky", false),
    ("person", true),
    ("rider", true),
    ("car", true),
    ("truck", true),
    ("bus", true),
    ("train", true),
    ("motorcycle", true),
    ("bicycle", true),
];

// Column order of the SYNTHIA-SEQ benchmark tables. Things are the classes
// that are also things under cityscapes19.
const SYNSEQ12: [(&str, bool); 12] = [
    ("sky", false),
    ("building", false),
    ("road", false),
    ("sidewalk", false),
    ("fence", false),
    ("vegetation", false),
    ("pole", false),
    ("car", true),
    ("traffic sign", true),
    ("person", true),
    ("bicycle", true),
    ("traffic light", true),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    #[serde(default, rename = "thing")]
    pub is_thing: bool,
}

/// An ordered class vocabulary with contiguous ids `0..C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTable {
    #[serde(rename = "class")]
    classes: Vec<ClassEntry>,
    #[serde(default = "default_ignore")]
    ignore_id: u8,
}

fn default_ignore() -> u8 {
    IGNORE_ID
}

impl ClassTable {
    /// Builds a table, checking that ids are exactly `0..C` (in any order)
    /// and that the ignore id is not one of them.
    pub fn new(mut classes: Vec<ClassEntry>, ignore_id: u8) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::ClassTable("no classes".into()));
        }
        classes.sort_by_key(|c| c.id);
        for (expected, entry) in classes.iter().enumerate() {
            if entry.id as usize != expected {
                return Err(Error::ClassTable(format!(
                    "class ids must be exactly 0..{}; found id {} at position {}",
                    classes.len(),
                    entry.id,
                    expected
                )));
            }
        }
        if (ignore_id as usize) < classes.len() {
            return Err(Error::ClassTable(format!(
                "ignore id {ignore_id} collides with a class id"
            )));
        }
        for (i, a) in classes.iter().enumerate() {
            if classes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::ClassTable(format!(
                    "duplicate class name `{}`",
                    a.name
                )));
            }
        }
        Ok(ClassTable { classes, ignore_id })
    }

    /// One of the built-in vocabularies: `cityscapes19` or `synseq12`.
    pub fn preset(name: &str) -> Result<Self> {
        let entries: &[(&str, bool)] = match name {
            "cityscapes19" => &CITYSCAPES19,
            "synseq12" => &SYNSEQ12,
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        let classes = entries
            .iter()
            .enumerate()
            .map(|(id, &(name, is_thing))| ClassEntry {
                id: id as u8,
                name: name.to_string(),
                is_thing,
            })
            .collect();
        ClassTable::new(classes, IGNORE_ID)
    }

    /// Parses a TOML class table (`ignore_id` plus `[[class]]` entries).
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: ClassTable = toml::from_str(text).map_err(|e| Error::ClassTable(e.to_string()))?;
        ClassTable::new(raw.classes, raw.ignore_id)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("class table serializes")
    }

    /// Resolves a `--classes` argument: a preset name, or a path to a TOML table.
    pub fn resolve(spec: &str) -> Result<Self> {
        match ClassTable::preset(spec) {
            Ok(t) => Ok(t),
            Err(Error::UnknownPreset(_)) if Path::new(spec).is_file() => {
                let text = std::fs::read_to_string(spec)?;
                ClassTable::from_toml(&text)
            }
            Err(e) => Err(e),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn ignore_id(&self) -> u8 {
        self.ignore_id
    }

    pub fn classes(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn name(&self, id: u8) -> Option<&str> {
        self.classes.get(id as usize).map(|c| c.name.as_str())
    }

    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn is_thing(&self, id: u8) -> bool {
        self.classes.get(id as usize).is_some_and(|c| c.is_thing)
    }

    pub fn is_class(&self, value: u8) -> bool {
        (value as usize) < self.classes.len()
    }

    /// True for class ids and the ignore id.
    pub fn is_valid_label(&self, value: u8) -> bool {
        self.is_class(value) || value == self.ignore_id
    }

    pub fn things(&self) -> ThingSet {
        ThingSet::from_ids(self.classes.iter().filter(|c| c.is_thing).map(|c| c.id))
    }

    /// Replaces the things subset. Each item is a class name or a numeric id.
    pub fn with_things<S: AsRef<str>>(&self, items: &[S]) -> Result<Self> {
        let mut ids = Vec::with_capacity(items.len());
        for item in items {
            let item = item.as_ref().trim();
            if item.is_empty() {
                continue;
            }
            let id = match item.parse::<u8>() {
                Ok(id) if self.is_class(id) => id,
                _ => self
                    .id_of(item)
                    .ok_or_else(|| Error::UnknownClass(item.to_string()))?,
            };
            ids.push(id);
        }
        let mut table = self.clone();
        for c in &mut table.classes {
            c.is_thing = ids.contains(&c.id);
        }
        Ok(table)
    }
}

/// Membership set over 8-bit class ids.
#[derive(Clone, PartialEq, Eq)]
pub struct ThingSet([bool; 256]);

impl ThingSet {
    pub fn empty() -> Self {
        ThingSet([false; 256])
    }

    pub fn from_ids(ids: impl IntoIterator<Item = u8>) -> Self {
        let mut set = ThingSet::empty();
        for id in ids {
            set.0[id as usize] = true;
        }
        set
    }

    #[inline]
    pub fn contains(&self, id: u8) -> bool {
        self.0[id as usize]
    }

    pub fn ids(&self) -> Vec<u8> {
        (0..=255u8).filter(|&i| self.0[i as usize]).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }
}

impl std::fmt::Debug for ThingSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.ids()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cityscapes19_layout() {
        let t = ClassTable::preset("cityscapes19").unwrap();
        assert_eq!(t.len(), 19);
        assert_eq!(t.name(0), Some("road"));
        assert!(!t.is_thing(0));
        assert!(t.is_thing(t.id_of("traffic light").unwrap()));
        assert_eq!(t.ignore_id(), 255);
        let things: Vec<&str> = t
            .things()
            .ids()
            .into_iter()
            .map(|i| t.name(i).unwrap())
            .collect();
        assert_eq!(
            things,
            [
                "traffic light",
                "traffic sign",
                "person",
                "rider",
                "car",
                "truck",
                "bus",
                "train",
                "motorcycle",
                "bicycle"
            ]
        );
    }

    #[test]
    fn synseq12_layout() {
        let t = ClassTable::preset("synseq12").unwrap();
        assert_eq!(t.len(), 12);
        assert_eq!(t.name(0), Some("sky"));
        let cs = ClassTable::preset("cityscapes19").unwrap();
        for c in t.classes() {
            let cs_id = cs
                .id_of(&c.name)
                .expect("synseq names are cityscapes names");
            assert_eq!(c.is_thing, cs.is_thing(cs_id), "{}", c.name);
        }
    }

    #[test]
    fn presets_are_pure() {
        assert_eq!(
            ClassTable::preset("cityscapes19").unwrap(),
            ClassTable::preset("cityscapes19").unwrap()
        );
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            ClassTable::preset("ade20k"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn rejects_gaps_and_ignore_collision() {
        let e = |id| ClassEntry {
            id,
            name: format!("c{id}"),
            is_thing: false,
        };
        assert!(ClassTable::new(vec![e(0), e(2)], 255).is_err());
        assert!(ClassTable::new(vec![e(0), e(1)], 1).is_err());
        assert!(ClassTable::new(vec![e(1), e(0)], 255).is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let t = ClassTable::preset("synseq12").unwrap();
        assert_eq!(ClassTable::from_toml(&t.to_toml()).unwrap(), t);
    }

    #[test]
    fn thing_override() {
        let t = ClassTable::preset("cityscapes19").unwrap();
        let o = t.with_things(&["car", "11"]).unwrap();
        assert_eq!(o.things().ids(), vec![11, 13]);
        assert!(t.with_things(&["unicorn"]).is_err());
    }
}
