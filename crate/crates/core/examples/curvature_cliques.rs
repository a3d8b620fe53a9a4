//! Curvature cliques of a tiny lattice and the signed edges they reduce to.

use curvseg::curvature::{
    accumulate_edges, apply_contrast, decompose_clique, effective_edges, enumerate_cliques,
    write_edge_dump, CurvatureParams,
};
use curvseg::lattice::GrayImage;

fn main() -> curvseg::Result<()> {
    let params = CurvatureParams::default();
    let image = GrayImage::new(3, 3, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0])?;

    let mut cliques = enumerate_cliques(3, 3, &params);
    apply_contrast(&mut cliques, &image, params.beta)?;
    println!("{} cliques", cliques.len());
    for c in cliques.iter().filter(|c| c.center.0 == 4).take(6) {
        println!(
            "center {} arms ({}, {})  alpha {:.3}  base {:.4}  weighted {:.3e}",
            c.center.0,
            c.arms.0 .0,
            c.arms.1 .0,
            c.alpha,
            c.base_weight,
            c.weight()
        );
        for e in decompose_clique(c) {
            println!("    ({}, {}) {:+.3e}", e.u.0, e.v.0, e.weight);
        }
    }

    let edges = effective_edges(&image, &params);
    assert_eq!(edges, accumulate_edges(cliques.iter().flat_map(decompose_clique)));
    println!("\n{} effective edges (u v weight):", edges.len());
    write_edge_dump(&edges, std::io::stdout().lock()).map_err(|e| curvseg::Error::Internal(e.to_string()))?;
    Ok(())
}
