use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MaskLabel {
    Other = 0,
    Ground = 1,
    Building = 2,
}

impl MaskLabel {
    pub fn from_index(value: u8) -> Option<Self> {
        match value {
            0 => Some(MaskLabel::Other),
            1 => Some(MaskLabel::Ground),
            2 => Some(MaskLabel::Building),
            _ => None,
        }
    }
}

/// RGB palette for label PNGs: Other, Ground, Building, then Sky for
/// rendered debug images.
pub const MASK_PALETTE: [[u8; 3]; 4] = [[0, 0, 0], [128, 64, 128], [220, 20, 60], [70, 130, 180]];

/// Per-pixel segmentation of an equirectangular frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: usize,
    height: usize,
    labels: Vec<MaskLabel>,
}

impl SegMask {
    pub fn new(width: usize, height: usize, labels: Vec<MaskLabel>) -> Result<Self, IngestError> {
        if height == 0 || width != 2 * height {
            return Err(IngestError::MaskAspect { width, height });
        }
        assert_eq!(labels.len(), width * height, "label buffer does not match dimensions");
        Ok(SegMask { width, height, labels })
    }

    pub fn from_indices(width: usize, height: usize, indices: &[u8]) -> Result<Self, IngestError> {
        let labels = indices
            .iter()
            .map(|&v| MaskLabel::from_index(v).ok_or(IngestError::MaskLabel { value: v }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(width, height, labels)
    }

    pub fn filled(width: usize, height: usize, label: MaskLabel) -> Result<Self, IngestError> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[MaskLabel] {
        &self.labels
    }

    pub fn get(&self, u: usize, v: usize) -> MaskLabel {
        self.labels[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, label: MaskLabel) {
        self.labels[v * self.width + u] = label;
    }

    /// Pixel counts indexed by label value.
    pub fn histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Resample to `width x height`.
    ///
    /// Integer reductions take the majority label of each block, resolving
    /// ties with the label of the pixel nearest the block center. Any other
    /// ratio samples the nearest source pixel.
    pub fn resample(&self, width: usize, height: usize) -> Result<SegMask, IngestError> {
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let mut labels = Vec::with_capacity(width * height);
        let integer = self.width.is_multiple_of(width) && self.height.is_multiple_of(height) && self.width / width == self.height / height;
        if integer {
            let f = self.width / width;
            for v in 0..height {
                for u in 0..width {
                    let mut counts = [0usize; 3];
                    for dv in 0..f {
                        for du in 0..f {
                            counts[self.get(u * f + du, v * f + dv) as usize] += 1;
                        }
                    }
                    let best = *counts.iter().max().unwrap();
                    let center = self.get(u * f + f / 2, v * f + f / 2);
                    let label = if counts[center as usize] == best {
                        center
                    } else {
                        let idx = counts.iter().position(|&c| c == best).unwrap();
                        MaskLabel::from_index(idx as u8).unwrap()
                    };
                    labels.push(label);
                }
            }
        } else {
            for v in 0..height {
                let sv = (((v as f64 + 0.5) * self.height as f64 / height as f64) as usize).min(self.height - 1);
                for u in 0..width {
                    let su = (((u as f64 + 0.5) * self.width as f64 / width as f64) as usize).min(self.width - 1);
                    labels.push(self.get(su, sv));
                }
            }
        }
        SegMask::new(width, height, labels)
    }
}

/// Read an 8-bit indexed (or 8-bit grayscale) PNG as a mask.
pub fn load_mask(path: &Path) -> Result<SegMask, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| IngestError::MaskFormat(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| IngestError::MaskFormat(format!("{}: {e}", path.display())))?;
    if info.bit_depth != png::BitDepth::Eight
        || !matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale)
    {
        return Err(IngestError::MaskFormat(format!(
            "{}: {:?} {:?}, expected 8-bit indexed",
            path.display(),
            info.color_type,
            info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if width != 2 * height {
        return Err(IngestError::MaskAspect { width, height });
    }
    let pixels: Vec<u8> = buf
        .chunks(info.line_size)
        .take(height)
        .flat_map(|row| row[..width].iter().copied())
        .collect();
    SegMask::from_indices(width, height, &pixels)
}

/// Load `mask_<id>.png` for every requested keyframe.
pub fn load_masks(dir: &Path, keyframe_ids: &[u64]) -> Result<BTreeMap<u64, SegMask>, IngestError> {
    let mut out = BTreeMap::new();
    let mut dims = None;
    for &id in keyframe_ids {
        let path = dir.join(format!("mask_{id}.png"));
        if !path.is_file() {
            return Err(IngestError::MaskMissing { id, path });
        }
        let mask = load_mask(&path)?;
        let found = (mask.width(), mask.height());
        match dims {
            None => dims = Some(found),
            Some(expected) if expected != found => {
                return Err(IngestError::MaskSizeMismatch { id, expected, found });
            }
            _ => {}
        }
        out.insert(id, mask);
    }
    Ok(out)
}

pub fn write_indexed_png(
    path: &Path,
    width: usize,
    height: usize,
    indices: &[u8],
    palette: &[[u8; 3]],
) -> Result<(), crate::Error> {
    let file = File::create(path).map_err(|e| crate::Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(palette.iter().flatten().copied().collect::<Vec<u8>>());
    let to_io = |e: png::EncodingError| crate::Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(indices).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

pub fn write_mask(path: &Path, mask: &SegMask) -> Result<(), crate::Error> {
    let indices: Vec<u8> = mask.labels.iter().map(|&l| l as u8).collect();
    write_indexed_png(path, mask.width, mask.height, &indices, &MASK_PALETTE[..3])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_png(path: &Path, width: u32, height: u32, data: &[u8]) {
        let file = File::create(path).unwrap();
        let mut enc = png::Encoder::new(file, width, height);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(vec![0; 12]);
        enc.write_header().unwrap().write_image_data(data).unwrap();
    }

    #[test]
    fn all_ground_mask() {
        let dir = tempfile::tempdir().unwrap();
        let mask = SegMask::filled(1024, 512, MaskLabel::Ground).unwrap();
        write_mask(&dir.path().join("mask_4.png"), &mask).unwrap();
        let loaded = load_masks(dir.path(), &[4]).unwrap();
        assert_eq!(loaded[&4].histogram(), [0, 524_288, 0]);
    }

    #[test]
    fn square_mask_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask_0.png");
        raw_png(&path, 512, 512, &vec![1; 512 * 512]);
        assert!(matches!(
            load_mask(&path),
            Err(IngestError::MaskAspect { width: 512, height: 512 })
        ));
    }

    #[test]
    fn unknown_palette_index_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask_0.png");
        let mut data = vec![0; 8 * 4];
        data[5] = 3;
        raw_png(&path, 8, 4, &data);
        assert!(matches!(load_mask(&path), Err(IngestError::MaskLabel { value: 3 })));
    }

    #[test]
    fn missing_file_named() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_masks(dir.path(), &[7]),
            Err(IngestError::MaskMissing { id: 7, .. })
        ));
    }

    #[test]
    fn inconsistent_sizes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_mask(&dir.path().join("mask_0.png"), &SegMask::filled(8, 4, MaskLabel::Other).unwrap()).unwrap();
        write_mask(&dir.path().join("mask_1.png"), &SegMask::filled(16, 8, MaskLabel::Other).unwrap()).unwrap();
        assert!(matches!(
            load_masks(dir.path(), &[0, 1]),
            Err(IngestError::MaskSizeMismatch { id: 1, .. })
        ));
    }

    #[test]
    fn majority_downsample() {
        // 2x2 blocks: three Ground and one Building collapse to Ground.
        let mut mask = SegMask::filled(4, 2, MaskLabel::Ground).unwrap();
        mask.set(0, 0, MaskLabel::Building);
        mask.set(2, 0, MaskLabel::Building);
        mask.set(3, 1, MaskLabel::Building);
        mask.set(2, 1, MaskLabel::Building);
        let small = mask.resample(2, 1).unwrap();
        assert_eq!(small.labels(), &[MaskLabel::Ground, MaskLabel::Building]);
    }
}
