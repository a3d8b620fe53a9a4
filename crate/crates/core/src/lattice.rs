//! Grayscale images, seed masks and the 8-connected pixel lattice.
//!
//! Pixels are addressed row-major: node `r * width + c` is the pixel in row
//! `r`, column `c`. Intensities are stored normalized to `[0, 1]`.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Index of a pixel node in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn from_row_col(row: usize, col: usize, width: usize) -> Self {
        NodeId(row * width + col)
    }

    pub fn row_col(self, width: usize) -> (usize, usize) {
        (self.0 / width, self.0 % width)
    }
}

/// Offsets of the 8-neighborhood as `(drow, dcol)`, ordered so that the
/// resulting neighbor indices ascend.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Geometry of a `width × height` 8-connected grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub width: usize,
    pub height: usize,
}

impl Lattice {
    pub fn new(width: usize, height: usize) -> Self {
        Lattice { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of undirected lattice edges, `4wh - 3w - 3h + 2`.
    pub fn edge_count(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        let (w, h) = (self.width, self.height);
        4 * w * h + 2 - 3 * w - 3 * h
    }

    /// Offset `(drow, dcol)` applied to `node`, if it stays inside the grid.
    #[inline]
    pub fn offset(&self, node: NodeId, drow: isize, dcol: isize) -> Option<NodeId> {
        let (r, c) = node.row_col(self.width);
        let r = r as isize + drow;
        let c = c as isize + dcol;
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            None
        } else {
            Some(NodeId(r as usize * self.width + c as usize))
        }
    }

    /// In-bounds 8-neighbors of `node` with their edge lengths (1 axial,
    /// √2 diagonal), ascending by neighbor index.
    pub fn neighbors(&self, node: NodeId) -> Vec<(NodeId, f64)> {
        NEIGHBOR_OFFSETS
            .iter()
            .filter_map(|&(dr, dc)| {
                self.offset(node, dr, dc)
                    .map(|j| (j, offset_length(dr, dc)))
            })
            .collect()
    }
}

/// Free-function form of [`Lattice::neighbors`].
pub fn neighbors(node: NodeId, width: usize, height: usize) -> Vec<(NodeId, f64)> {
    Lattice::new(width, height).neighbors(node)
}

#[inline]
pub(crate) fn offset_length(drow: isize, dcol: isize) -> f64 {
    if drow != 0 && dcol != 0 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidGeometry(format!(
                "{} intensity values for a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, node: NodeId) -> f64 {
        self.values[node.0]
    }

    /// Intensities quantized back to 8 bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Seed state of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SeedLabel {
    Foreground,
    Background,
    #[default]
    None,
}

/// Per-pixel user seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedMask {
    width: usize,
    height: usize,
    labels: Vec<SeedLabel>,
}

impl SeedMask {
    pub fn empty(width: usize, height: usize) -> Self {
        SeedMask {
            width,
            height,
            labels: vec![SeedLabel::None; width * height],
        }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<SeedLabel>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::InvalidGeometry(format!(
                "{} seed labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        Ok(SeedMask {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[SeedLabel] {
        &self.labels
    }

    pub fn get(&self, node: NodeId) -> SeedLabel {
        self.labels[node.0]
    }

    /// Marks a pixel; painting the opposite class over an existing seed is
    /// rejected.
    pub fn set(&mut self, node: NodeId, label: SeedLabel) -> Result<()> {
        let slot = &mut self.labels[node.0];
        match (*slot, label) {
            (SeedLabel::Foreground, SeedLabel::Background)
            | (SeedLabel::Background, SeedLabel::Foreground) => Err(Error::ConflictingSeed(node.0)),
            _ => {
                if label != SeedLabel::None {
                    *slot = label;
                }
                Ok(())
            }
        }
    }

    /// Paints every pixel whose center lies within `radius` of `(x, y)`.
    pub fn paint_disk(&mut self, x: f64, y: f64, radius: f64, label: SeedLabel) -> Result<()> {
        let r = radius.max(0.0);
        let r0 = ((y - r).floor().max(0.0)) as usize;
        let r1 = ((y + r).ceil().max(0.0) as usize).min(self.height.saturating_sub(1));
        let c0 = ((x - r).floor().max(0.0)) as usize;
        let c1 = ((x + r).ceil().max(0.0) as usize).min(self.width.saturating_sub(1));
        for row in r0..=r1 {
            for col in c0..=c1 {
                let dx = col as f64 - x;
                let dy = row as f64 - y;
                if dx * dx + dy * dy <= r * r {
                    self.set(NodeId::from_row_col(row, col, self.width), label)?;
                }
            }
        }
        Ok(())
    }

    /// Overlays `other` onto `self`, failing if any pixel would carry both
    /// classes.
    pub fn merge(&mut self, other: &SeedMask) -> Result<()> {
        self.check_dims(other.width, other.height)?;
        for (i, &l) in other.labels.iter().enumerate() {
            self.set(NodeId(i), l)?;
        }
        Ok(())
    }

    pub fn count(&self, label: SeedLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (self.width, self.height),
            });
        }
        Ok(())
    }

    /// Sentinel PGM encoding: 255 foreground, 0 background, 128 unseeded.
    pub fn to_sentinel_bytes(&self) -> Vec<u8> {
        self.labels
            .iter()
            .map(|l| match l {
                SeedLabel::Foreground => 255,
                SeedLabel::Background => 0,
                SeedLabel::None => 128,
            })
            .collect()
    }
}

/// Binary segmentation mask, 1 = object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidGeometry(format!(
                "{} mask values for a {width}x{height} mask",
                values.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            values: values.into_iter().map(|v| u8::from(v != 0)).collect(),
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(u8::from(f(row, col)));
            }
        }
        Mask {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.width + col] != 0
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// Dice overlap `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
    pub fn dice(&self, other: &Mask) -> f64 {
        let inter = self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| **a != 0 && **b != 0)
            .count();
        let total = self.count() + other.count();
        if total == 0 {
            1.0
        } else {
            2.0 * inter as f64 / total as f64
        }
    }

    /// Number of 8-connected components of object pixels.
    pub fn component_count(&self) -> usize {
        let lattice = Lattice::new(self.width, self.height);
        let mut seen = vec![false; self.values.len()];
        let mut stack = Vec::new();
        let mut components = 0;
        for start in 0..self.values.len() {
            if self.values[start] == 0 || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(NodeId(start));
            while let Some(node) = stack.pop() {
                for &(dr, dc) in &NEIGHBOR_OFFSETS {
                    if let Some(j) = lattice.offset(node, dr, dc) {
                        if self.values[j.0] != 0 && !seen[j.0] {
                            seen[j.0] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        components
    }

    /// 0/255 bytes for 8-bit export.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect()
    }
}

// ---------------------------------------------------------------------------
// File formats

/// Raw decoded 8-bit raster as found on disk.
enum Raster {
    Gray { width: usize, height: usize, data: Vec<u8>, maxval: u16 },
    Rgb { width: usize, height: usize, data: Vec<u8> },
    Luma { width: usize, height: usize, data: Vec<u8> },
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

fn decode_raster(bytes: &[u8]) -> Result<Raster> {
    if bytes.starts_with(b"P5") {
        let (width, height, maxval, data) = parse_pgm(bytes)?;
        Ok(Raster::Gray {
            width,
            height,
            data,
            maxval,
        })
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::UnsupportedFormat(format!(
            "netpbm variant P{} (only binary P5 is supported)",
            bytes[1] as char
        )))
    } else {
        Err(Error::UnsupportedFormat(
            "expected a binary PGM (P5) or PNG file".into(),
        ))
    }
}

fn decode_png(bytes: &[u8]) -> Result<Raster> {
    use image::{ColorType, ImageReader};
    let reader = ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Png);
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(ref io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::TruncatedImage
        }
        other => {
            let msg = other.to_string();
            if msg.contains("end of") || msg.contains("EOF") || msg.contains("eof") {
                Error::TruncatedImage
            } else {
                Error::UnsupportedFormat(msg)
            }
        }
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 | ColorType::La8 => Ok(Raster::Luma {
            width,
            height,
            data: img.to_luma8().into_raw(),
        }),
        ColorType::Rgb8 | ColorType::Rgba8 => Ok(Raster::Rgb {
            width,
            height,
            data: img.to_rgb8().into_raw(),
        }),
        other => Err(Error::UnsupportedBitDepth(format!("{other:?}"))),
    }
}

/// Parses a binary (P5) PGM header and payload.
fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, u16, Vec<u8>)> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                None => return Err(Error::TruncatedImage),
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return match bytes.get(pos) {
                None => Err(Error::TruncatedImage),
                Some(_) => Err(Error::UnsupportedFormat("malformed PGM header".into())),
            };
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::UnsupportedFormat("PGM header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        None => return Err(Error::TruncatedImage),
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(Error::UnsupportedFormat("malformed PGM header".into())),
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedBitDepth(format!("PGM maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidGeometry(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::InvalidGeometry("PGM dimensions overflow".into()))?;
    let data = bytes.get(pos..pos + n).ok_or(Error::TruncatedImage)?;
    Ok((width, height, maxval as u16, data.to_vec()))
}

/// Decodes an in-memory PGM/PNG into a normalized grayscale image. Color PNGs
/// are converted by luminance.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    match decode_raster(bytes)? {
        Raster::Gray {
            width,
            height,
            data,
            maxval,
        } => {
            let scale = f64::from(maxval);
            GrayImage::new(
                width,
                height,
                data.iter().map(|&b| (f64::from(b) / scale).min(1.0)).collect(),
            )
        }
        Raster::Luma {
            width,
            height,
            data,
        } => GrayImage::from_bytes(width, height, &data),
        Raster::Rgb {
            width,
            height,
            data,
        } => {
            let luma: Vec<u8> = data
                .chunks_exact(3)
                .map(|px| {
                    let y = 0.299 * f64::from(px[0])
                        + 0.587 * f64::from(px[1])
                        + 0.114 * f64::from(px[2]);
                    y.round().clamp(0.0, 255.0) as u8
                })
                .collect();
            GrayImage::from_bytes(width, height, &luma)
        }
    }
}

/// Loads an 8-bit binary PGM or PNG image, normalizing intensities by 1/255.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_image(&read_file(path.as_ref())?)
}

/// Decodes a seed file. PNG: pure red is foreground, pure blue background,
/// anything else unseeded. PGM: 255 foreground, 0 background, 128 unseeded.
pub fn decode_seeds(bytes: &[u8]) -> Result<SeedMask> {
    match decode_raster(bytes)? {
        Raster::Gray {
            width,
            height,
            data,
            maxval,
        } => {
            if maxval != 255 {
                return Err(Error::UnsupportedBitDepth(format!(
                    "seed PGM maxval {maxval} (expected 255)"
                )));
            }
            let labels = data
                .iter()
                .enumerate()
                .map(|(index, &value)| match value {
                    255 => Ok(SeedLabel::Foreground),
                    0 => Ok(SeedLabel::Background),
                    128 => Ok(SeedLabel::None),
                    value => Err(Error::AmbiguousSeed { value, index }),
                })
                .collect::<Result<Vec<_>>>()?;
            SeedMask::from_labels(width, height, labels)
        }
        Raster::Rgb {
            width,
            height,
            data,
        } => {
            let labels = data
                .chunks_exact(3)
                .map(|px| match (px[0], px[1], px[2]) {
                    (255, 0, 0) => SeedLabel::Foreground,
                    (0, 0, 255) => SeedLabel::Background,
                    _ => SeedLabel::None,
                })
                .collect();
            SeedMask::from_labels(width, height, labels)
        }
        Raster::Luma { width, height, .. } => Ok(SeedMask::empty(width, height)),
    }
}

pub fn load_seeds(path: impl AsRef<Path>) -> Result<SeedMask> {
    decode_seeds(&read_file(path.as_ref())?)
}

/// Binary PGM (P5) bytes for an 8-bit raster.
pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// 8-bit grayscale PNG bytes.
pub fn encode_png_gray(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(data, width as u32, height as u32, image::ExtendedColorType::L8)
        .map_err(|e| Error::Internal(format!("png encoding failed: {e}")))?;
    Ok(out)
}

pub fn save_image_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(
        path.as_ref(),
        &encode_pgm(image.width, image.height, &image.to_bytes()),
    )
}

pub fn save_image_png(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(
        path.as_ref(),
        &encode_png_gray(image.width, image.height, &image.to_bytes())?,
    )
}

pub fn save_seeds_pgm(seeds: &SeedMask, path: impl AsRef<Path>) -> Result<()> {
    write_file(
        path.as_ref(),
        &encode_pgm(seeds.width, seeds.height, &seeds.to_sentinel_bytes()),
    )
}

pub fn save_mask_pgm(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_file(
        path.as_ref(),
        &encode_pgm(mask.width, mask.height, &mask.to_bytes()),
    )
}

pub fn save_mask_png(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask_png(mask)?)
}

pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    encode_png_gray(mask.width, mask.height, &mask.to_bytes())
}

/// Reads a mask written by [`save_mask_png`] / [`save_mask_pgm`]; any nonzero
/// pixel is object.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let img = decode_image(bytes)?;
    Mask::new(
        img.width,
        img.height,
        img.values.iter().map(|&v| u8::from(v > 0.5)).collect(),
    )
}
