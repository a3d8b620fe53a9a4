//! Build seeds from brush strokes instead of a seed image.

use curvseg::lattice::{GrayImage, SeedLabel, SeedMask};
use curvseg::segmenter::{segment, SegmentationParams};

fn main() -> curvseg::Result<()> {
    // bright square on a dark ramp
    let (w, h) = (32, 24);
    let values = (0..w * h)
        .map(|i| {
            let (row, col) = (i / w, i % w);
            if (6..18).contains(&row) && (8..22).contains(&col) {
                0.85
            } else {
                0.1 + 0.2 * col as f64 / w as f64
            }
        })
        .collect();
    let image = GrayImage::new(w, h, values)?;

    let mut seeds = SeedMask::empty(w, h);
    for x in [11.0, 14.0, 17.0] {
        seeds.paint_disk(x, 12.0, 1.5, SeedLabel::Foreground)?;
    }
    for (x, y) in [(2.0, 2.0), (29.0, 21.0), (2.0, 21.0)] {
        seeds.paint_disk(x, y, 2.0, SeedLabel::Background)?;
    }

    let r = segment(&image, &seeds, &SegmentationParams::default())?;
    for row in 0..h {
        let line: String = (0..w)
            .map(|col| if r.mask.get(row, col) { '#' } else { '.' })
            .collect();
        println!("{line}");
    }
    println!("{}", r.summary());
    Ok(())
}
