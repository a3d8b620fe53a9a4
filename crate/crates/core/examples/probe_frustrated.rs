//! Roof duality leaves a frustrated cycle unlabeled; probing finishes it.

use curvseg::energy::IntEnergy;
use curvseg::qpbo::{minimize, solve_qpbo, SolverOptions};
use curvseg::synthcorpus::brute_force_optimum;

fn main() -> curvseg::Result<()> {
    // three variables that each want to disagree with both others
    let mut e = IntEnergy::new(3);
    for (u, v) in [(0, 1), (1, 2), (0, 2)] {
        e.add_pairwise(u, v, [4, 0, 0, 4]);
    }
    e.add_unary(0, 0, 1);

    let roof = solve_qpbo(&e);
    println!("roof dual: {:?}, bound {}", roof.labeling.values(), roof.lower_bound());

    let probed = minimize(&e, &SolverOptions::default());
    println!("with probing: {:?}", probed.labeling.values());
    for ev in &probed.events {
        println!("  {ev:?}");
    }
    let (best, value) = brute_force_optimum(&e)?;
    println!(
        "energy {} (exhaustive optimum {value} at {:?})",
        probed.energy_of_completion,
        best.to_bits()?
    );
    Ok(())
}
