//! Assemble the seeded energy of a control case and round-trip it through
//! the text dump format.

use curvseg::energy::QpbEnergy;
use curvseg::segmenter::{assemble_energy, SegmentationParams};
use curvseg::synthcorpus::find_case;

fn main() -> curvseg::Result<()> {
    let case = find_case("corner_90").expect("bundled case");
    let (energy, k) = assemble_energy(&case.image, &case.seeds, &SegmentationParams::default())?;
    println!(
        "{} variables, {} pairwise terms, {} nonsubmodular, seed penalty {k:.3}",
        energy.num_vars(),
        energy.pairs().len(),
        energy.pairs().iter().filter(|p| !p.is_submodular()).count()
    );

    let mut dump = Vec::new();
    energy.write_dump(&mut dump).map_err(|e| curvseg::Error::Internal(e.to_string()))?;
    let back = QpbEnergy::read_dump(dump.as_slice())?;
    let truth: Vec<bool> = case.ground_truth.values().iter().map(|&v| v != 0).collect();
    println!("E(truth) = {:.6}", energy.evaluate_bits(&truth));
    println!("after round trip = {:.6}", back.evaluate_bits(&truth));
    for line in String::from_utf8_lossy(&dump).lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
