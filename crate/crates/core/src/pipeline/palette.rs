use crate::classes::ClassTable;
use crate::raster::{ImageBuffer, LabelMap};

const NAMED: [(&str, [u8; 3]); 19] = [
    ("road", [128, 64, 128]),
    ("sidewalk", [244, 35, 232]),
    ("building", [70, 70, 70]),
    ("wall", [102, 102, 156]),
    ("fence", [190, 153, 153]),
    ("pole", [153, 153, 153]),
    ("traffic light", [250, 170, 30]),
    ("traffic sign", [220, 220, 0]),
    ("vegetation", [107, 142, 35]),
    ("terrain", [152, 251, 152]),
    ("sky", [70, 130, 180]),
    ("person", [220, 20, 60]),
    ("rider", [255, 0, 0]),
    ("car", [0, 0, 142]),
    ("truck", [0, 0, 70]),
    ("bus", [0, 60, 100]),
    ("train", [0, 80, 100]),
    ("motorcycle", [0, 0, 230]),
    ("bicycle", [119, 11, 32]),
];

/// Display color of a class: the Cityscapes color for known names, otherwise
/// a color derived from the id.
pub fn class_color(table: &ClassTable, id: u8) -> [u8; 3] {
    if id == table.ignore_id() {
        return [0, 0, 0];
    }
    let name = table.name(id).unwrap_or("");
    NAMED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| *c)
        .unwrap_or_else(|| {
            let h = crate::rng::splitmix64(id as u64 + 1);
            [h as u8, (h >> 8) as u8, (h >> 16) as u8]
        })
}

pub fn colorize(labels: &LabelMap, table: &ClassTable) -> ImageBuffer {
    let lut: Vec<[u8; 3]> = (0..=255u8).map(|i| class_color(table, i)).collect();
    ImageBuffer::new(
        labels.width(),
        labels.height(),
        labels.as_slice().iter().map(|&l| lut[l as usize]).collect(),
    )
    .expect("same size")
}
