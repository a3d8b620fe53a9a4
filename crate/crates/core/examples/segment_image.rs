//! Segment an image from a seed file.
//!
//! cargo run --release --example segment_image -- IMAGE SEEDS OUT.png
//!
//! Without arguments the bar control case is used and the mask is written to
//! the system temp directory.

use curvseg::lattice::{load_image, load_seeds};
use curvseg::segmenter::{save_result, segment, SegmentationParams};
use curvseg::synthcorpus::find_case;

fn main() -> curvseg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (image, seeds, out) = match args.as_slice() {
        [image, seeds, out] => (load_image(image)?, load_seeds(seeds)?, out.into()),
        _ => {
            let case = find_case("bar").expect("bundled case");
            (case.image, case.seeds, std::env::temp_dir().join("bar_mask.png"))
        }
    };
    let result = segment(&image, &seeds, &SegmentationParams::default())?;
    let report = save_result(&result, &out)?;
    println!("{}", result.summary());
    println!("mask {}\nreport {}", out.display(), report.display());
    Ok(())
}
