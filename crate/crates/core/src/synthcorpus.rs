//! Procedural control images with pixel-exact ground truth, plus the
//! exhaustive oracle used by the tests.
//!
//! Pixel `(row, col)` has its center at `(x, y) = (col, row)`; a pixel belongs
//! to a disk iff its center is within the radius.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::path::Path;

use crate::energy::{Coeff, Energy};
use crate::error::{Error, Result};
use crate::lattice::{
    load_image, load_mask, load_seeds, save_image_pgm, save_mask_pgm, save_seeds_pgm, GrayImage,
    Mask, NodeId, SeedLabel, SeedMask,
};
use crate::qpbo::Labeling;

pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Half-width of a drawn outline; keeps diagonal runs 8-connected.
const STROKE: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone)]
pub struct ControlCase {
    pub name: String,
    pub image: GrayImage,
    pub ground_truth: Mask,
    pub seeds: SeedMask,
    pub description: String,
    /// `(row, col)` pixels that must match the ground truth exactly.
    pub key_pixels: Vec<(usize, usize)>,
}

impl ControlCase {
    fn new(name: &str, image: GrayImage, ground_truth: Mask, seeds: SeedMask, description: &str) -> Self {
        ControlCase {
            name: name.to_string(),
            image,
            ground_truth,
            seeds,
            description: description.to_string(),
            key_pixels: Vec::new(),
        }
    }
}

fn image_from_mask(mask: &Mask, fg: f64, bg: f64) -> GrayImage {
    let values = mask.values().iter().map(|&v| if v != 0 { fg } else { bg }).collect();
    GrayImage::new(mask.width(), mask.height(), values).expect("intensities in range")
}

/// One-pixel background frame around the canvas, skipping object pixels.
fn frame_seeds(seeds: &mut SeedMask, truth: &Mask) -> Result<()> {
    let (w, h) = (truth.width(), truth.height());
    for row in 0..h {
        for col in 0..w {
            let border = row == 0 || col == 0 || row + 1 == h || col + 1 == w;
            if border && !truth.get(row, col) {
                seeds.set(NodeId::from_row_col(row, col, w), SeedLabel::Background)?;
            }
        }
    }
    Ok(())
}

fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Mask {
    Mask::from_fn(w, h, |row, col| {
        let (dx, dy) = (col as f64 - cx, row as f64 - cy);
        dx * dx + dy * dy <= r * r
    })
}

/// White `bar_len` x `bar_thickness` bar on black, vertically centered and
/// horizontally centered. A small foreground seed sits at the left end.
pub fn gen_bar(width: usize, height: usize, bar_len: usize, bar_thickness: usize) -> Result<ControlCase> {
    if bar_len == 0 || bar_thickness == 0 {
        return Err(Error::InvalidGeometry("bar must be non-empty".into()));
    }
    if bar_len > width || bar_thickness > height {
        return Err(Error::InvalidGeometry(format!(
            "{bar_len}x{bar_thickness} bar does not fit in {width}x{height}"
        )));
    }
    if bar_len + 2 > width || bar_thickness + 2 > height {
        return Err(Error::InvalidGeometry(format!(
            "{bar_len}x{bar_thickness} bar leaves no background margin in {width}x{height}"
        )));
    }
    let c0 = (width - bar_len) / 2;
    let r0 = (height - bar_thickness) / 2;
    let truth = Mask::from_fn(width, height, |row, col| {
        (r0..r0 + bar_thickness).contains(&row) && (c0..c0 + bar_len).contains(&col)
    });
    let image = image_from_mask(&truth, 1.0, 0.0);
    let mut seeds = SeedMask::empty(width, height);
    let seed_len = (bar_len / 10).max(1);
    for row in r0..r0 + bar_thickness {
        for col in c0..c0 + seed_len {
            seeds.set(NodeId::from_row_col(row, col, width), SeedLabel::Foreground)?;
        }
    }
    frame_seeds(&mut seeds, &truth)?;
    Ok(ControlCase::new(
        "bar",
        image,
        truth,
        seeds,
        "white bar on black, seeded only at its left end",
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle { cx: f64, cy: f64, r: f64 },
    /// Closed polygon through the vertices `(x, y)`.
    Polygon(Vec<(f64, f64)>),
}

impl Shape {
    /// Distance from `(x, y)` to the outline and the arc-length position of
    /// the nearest outline point. Polygon positions restart at every vertex.
    fn nearest(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Shape::Circle { cx, cy, r } => {
                let (dx, dy) = (x - cx, y - cy);
                let theta = dy.atan2(dx).rem_euclid(TAU);
                ((dx.hypot(dy) - r).abs(), theta * r)
            }
            Shape::Polygon(v) => {
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..v.len() {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    let (ex, ey) = (b.0 - a.0, b.1 - a.1);
                    let len = ex.hypot(ey);
                    let t = (((x - a.0) * ex + (y - a.1) * ey) / (len * len)).clamp(0.0, 1.0);
                    let d = (x - a.0 - t * ex).hypot(y - a.1 - t * ey);
                    if d < best.0 {
                        best = (d, t * len);
                    }
                }
                best
            }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Circle { cx, cy, r } => (x - cx).hypot(y - cy) <= *r,
            Shape::Polygon(v) => {
                let mut inside = false;
                for i in 0..v.len() {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    if (a.1 > y) != (b.1 > y) && x < a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1) {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }

    fn center(&self) -> (f64, f64) {
        match self {
            Shape::Circle { cx, cy, .. } => (*cx, *cy),
            Shape::Polygon(v) => {
                let n = v.len() as f64;
                (v.iter().map(|p| p.0).sum::<f64>() / n, v.iter().map(|p| p.1).sum::<f64>() / n)
            }
        }
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let fits = |x: f64, y: f64| x >= 1.0 && y >= 1.0 && x <= width as f64 - 2.0 && y <= height as f64 - 2.0;
        match self {
            Shape::Circle { cx, cy, r } => {
                if !(*r >= 3.0) || !fits(cx - r, cy - r) || !fits(cx + r, cy + r) {
                    return Err(Error::InvalidGeometry(format!(
                        "circle ({cx}, {cy}) r={r} must have r >= 3 and fit in {width}x{height}"
                    )));
                }
            }
            Shape::Polygon(v) => {
                if v.len() < 3 || v.iter().any(|&(x, y)| !fits(x, y)) {
                    return Err(Error::InvalidGeometry(format!(
                        "polygon needs >= 3 vertices inside {width}x{height}"
                    )));
                }
                let (cx, cy) = self.center();
                if !self.contains(cx, cy) || self.nearest(cx, cy).0 < 3.0 {
                    return Err(Error::InvalidGeometry(
                        "polygon must contain its vertex centroid with room for a seed".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Outline of `shape` drawn white on black as dashes `dot_len` long
/// separated by `gap_len` (arc length in pixels; polygon edges each start
/// with a dash). Inside and outside share
/// one intensity; the ground truth is the region bounded by the outline's
/// center line.
pub fn gen_dotted_outline(
    width: usize,
    height: usize,
    shape: &Shape,
    gap_len: f64,
    dot_len: f64,
) -> Result<ControlCase> {
    shape.validate(width, height)?;
    if !(gap_len >= 0.0) || !(dot_len > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "need gap_len >= 0 and dot_len > 0, got {gap_len} and {dot_len}"
        )));
    }
    let period = dot_len + gap_len;
    let outline = Mask::from_fn(width, height, |row, col| {
        let (d, s) = shape.nearest(col as f64, row as f64);
        d <= STROKE && s.rem_euclid(period) < dot_len
    });
    let truth = Mask::from_fn(width, height, |row, col| shape.contains(col as f64, row as f64));
    let image = image_from_mask(&outline, 1.0, 0.0);
    let mut seeds = SeedMask::empty(width, height);
    let (cx, cy) = shape.center();
    let seed_r = (0.6 * shape.nearest(cx, cy).0).max(1.0);
    seeds.paint_disk(cx, cy, seed_r, SeedLabel::Foreground)?;
    frame_seeds(&mut seeds, &truth)?;
    let name = match shape {
        Shape::Circle { .. } => "dotted_circle",
        Shape::Polygon(_) => "dotted_polygon",
    };
    Ok(ControlCase::new(
        name,
        image,
        truth,
        seeds,
        "dashed outline with zero contrast between inside and outside",
    ))
}

/// Disk of radius `big` with a smaller disk of radius `small` attached on
/// its right, both white on black. Only the large disk is the object.
pub fn gen_circle_bump(big: f64, small: f64) -> Result<ControlCase> {
    if !(small >= 1.0) || !(big > small) {
        return Err(Error::InvalidGeometry(format!(
            "need 1 <= r < R, got R={big} r={small}"
        )));
    }
    let size = (2.0 * big + 2.0 * small).ceil() as usize + 8;
    let dist = big + small / 2.0;
    let cy = (size / 2) as f64;
    let cx = ((size as f64 - (big + dist + small)) / 2.0 + big).floor();
    let large = disk(size, size, cx, cy, big);
    let bump = disk(size, size, cx + dist, cy, small);
    let union = Mask::from_fn(size, size, |r, c| large.get(r, c) || bump.get(r, c));
    let image = image_from_mask(&union, 1.0, 0.0);
    let mut seeds = SeedMask::empty(size, size);
    seeds.paint_disk(cx, cy, (big / 3.0).floor(), SeedLabel::Foreground)?;
    frame_seeds(&mut seeds, &union)?;
    Ok(ControlCase::new(
        "circle_bump",
        image,
        large,
        seeds,
        "large disk with a same-intensity bump; the bump is background",
    ))
}

/// Bright wedge on black whose apex has the given opening angle, clipped to
/// a box on the open side. Key pixels: the apex and, on each side of the
/// axis, the wedge pixel nearest to it.
pub fn gen_corner_shape(angle_deg: f64) -> Result<ControlCase> {
    if !(15.0..=165.0).contains(&angle_deg) {
        return Err(Error::InvalidGeometry(format!(
            "corner angle must be in [15, 165] degrees, got {angle_deg}"
        )));
    }
    let (w, h) = (40usize, 40usize);
    let (ar, ac) = (20usize, 5usize);
    let half = angle_deg.to_radians() / 2.0;
    let inside = |row: usize, col: usize| {
        let dx = col as f64 - ac as f64;
        let dy = row as f64 - ar as f64;
        if (row, col) == (ar, ac) {
            return true;
        }
        dx > 0.0 && dy.abs().atan2(dx) <= half + 1e-12 && col <= 34 && (4..=36).contains(&row)
    };
    let truth = Mask::from_fn(w, h, inside);
    let image = image_from_mask(&truth, 1.0, 0.0);
    let mut seeds = SeedMask::empty(w, h);
    seeds.paint_disk(29.0, ar as f64, 2.0, SeedLabel::Foreground)?;
    frame_seeds(&mut seeds, &truth)?;

    let mut key = vec![(ar, ac)];
    for above in [true, false] {
        let nearest = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| truth.get(r, c) && if above { r < ar } else { r > ar })
            .min_by(|a, b| {
                let d = |p: &(usize, usize)| {
                    (p.0 as f64 - ar as f64).hypot(p.1 as f64 - ac as f64)
                };
                d(a).total_cmp(&d(b)).then(a.cmp(b))
            })
            .expect("wedge has pixels on both sides");
        key.push(nearest);
    }
    let mut case = ControlCase::new(
        &format!("corner_{}", angle_deg.round()),
        image,
        truth,
        seeds,
        "bright wedge; the apex must survive",
    );
    case.key_pixels = key;
    Ok(case)
}

/// The bundled control corpus, sorted by name.
pub fn control_corpus() -> Vec<ControlCase> {
    let mut cases = vec![
        gen_bar(40, 20, 30, 4).expect("valid bar"),
        gen_dotted_outline(40, 40, &Shape::Circle { cx: 20.0, cy: 20.0, r: 12.0 }, 3.0, 4.0)
            .expect("valid circle"),
        gen_dotted_outline(
            40,
            40,
            &Shape::Polygon(vec![(8.0, 8.0), (31.0, 8.0), (31.0, 31.0), (8.0, 31.0)]),
            3.0,
            4.0,
        )
        .expect("valid polygon"),
        gen_circle_bump(15.0, 5.0).expect("valid bump"),
        gen_corner_shape(90.0).expect("valid corner"),
        gen_corner_shape(45.0).expect("valid corner"),
    ];
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    cases
}

pub fn find_case(name: &str) -> Option<ControlCase> {
    control_corpus().into_iter().find(|c| c.name == name)
}

/// Writes every case to `dir/<name>/{image,seeds,truth}.pgm`.
pub fn export_corpus(cases: &[ControlCase], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for case in cases {
        let sub = dir.join(&case.name);
        std::fs::create_dir_all(&sub).map_err(|source| Error::Write {
            path: sub.clone(),
            source,
        })?;
        save_image_pgm(&case.image, sub.join("image.pgm"))?;
        save_seeds_pgm(&case.seeds, sub.join("seeds.pgm"))?;
        save_mask_pgm(&case.ground_truth, sub.join("truth.pgm"))?;
    }
    Ok(())
}

/// Reads back every case directory under `dir` (those holding an
/// `image.pgm`), sorted by name.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<ControlCase>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut cases = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Error::Read {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if !path.join("image.pgm").is_file() {
            continue;
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let image = load_image(path.join("image.pgm"))?;
        let seeds = load_seeds(path.join("seeds.pgm"))?;
        seeds.check_dims(image.width(), image.height())?;
        let truth = load_mask(path.join("truth.pgm"))?;
        if (truth.width(), truth.height()) != (image.width(), image.height()) {
            return Err(Error::DimensionMismatch {
                expected: (image.width(), image.height()),
                found: (truth.width(), truth.height()),
            });
        }
        cases.push(ControlCase::new(&name, image, truth, seeds, ""));
    }
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

/// Exhaustive minimum over all `2^n` labelings. Ties go to the
/// lexicographically smallest labeling (variable 0 most significant).
pub fn brute_force_optimum<T: Coeff>(energy: &Energy<T>) -> Result<(Labeling, T)> {
    let n = energy.num_vars();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyVariables(n));
    }
    let mut bits = vec![false; n];
    let mut best_bits = bits.clone();
    let mut best = energy.evaluate_bits(&bits);
    for m in 1u64..(1u64 << n) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = m >> (n - 1 - i) & 1 == 1;
        }
        let v = energy.evaluate_bits(&bits);
        if v < best {
            best = v;
            best_bits.clone_from(&bits);
        }
    }
    Ok((Labeling::from_bits(&best_bits), best))
}
