//! Generate the control corpus, segment each case and score it.
//!
//! cargo run --release --example control_corpus -- [EXPORT_DIR]

use curvseg::segmenter::{segment, SegmentationParams};
use curvseg::synthcorpus::{control_corpus, export_corpus};

fn main() -> curvseg::Result<()> {
    let cases = control_corpus();
    if let Some(dir) = std::env::args().nth(1) {
        export_corpus(&cases, &dir)?;
        println!("exported to {dir}");
    }
    let params = SegmentationParams::default();
    for case in &cases {
        let r = segment(&case.image, &case.seeds, &params)?;
        println!(
            "{:<15} {}x{}  dice {:.4}  unlabeled {}  components {}  {:.1} ms",
            case.name,
            case.image.width(),
            case.image.height(),
            r.mask.dice(&case.ground_truth),
            r.report.unlabeled_count,
            r.mask.component_count(),
            r.report.runtime_ms
        );
    }
    Ok(())
}
