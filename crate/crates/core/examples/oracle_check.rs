//! Compare the solver against exhaustive search on random small energies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use curvseg::energy::IntEnergy;
use curvseg::qpbo::{minimize, solve_qpbo, SolverOptions};
use curvseg::synthcorpus::brute_force_optimum;

fn main() -> curvseg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut roof_complete, mut probe_complete, mut exact) = (0, 0, 0);
    let trials = 300;
    for _ in 0..trials {
        let n = rng.random_range(4..=14);
        let mut e = IntEnergy::new(n);
        for i in 0..n {
            e.add_unary(i, rng.random_range(-10..10), rng.random_range(-10..10));
        }
        for _ in 0..2 * n {
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            if u != v {
                e.add_pairwise(u, v, std::array::from_fn(|_| rng.random_range(-10..10)));
            }
        }
        let (_, best) = brute_force_optimum(&e)?;
        roof_complete += usize::from(solve_qpbo(&e).labeling.is_complete());
        let s = minimize(&e, &SolverOptions::default());
        probe_complete += usize::from(s.unlabeled_count() == 0);
        exact += usize::from(s.energy_of_completion == best);
        assert!(s.lower_bound_x2 <= 2 * i128::from(best));
    }
    println!("{trials} energies");
    println!("complete after roof duality: {roof_complete}");
    println!("complete after probing:      {probe_complete}");
    println!("completion is optimal:       {exact}");
    Ok(())
}
