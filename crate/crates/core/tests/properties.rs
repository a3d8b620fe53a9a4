use std::collections::HashSet;

use proptest::prelude::*;

use curvseg::curvature::{
    accumulate_edges, apply_contrast, decompose_clique, effective_edges, enumerate_cliques, CurvatureClique,
    CurvatureParams,
};
use curvseg::energy::{add_seeds, build_energy, curvature_value, AttractionMode, IntEnergy, QpbEnergy};
use curvseg::lattice::{decode_image, encode_pgm, encode_png_gray, GrayImage, Lattice, Mask, NodeId, SeedLabel, SeedMask};
use curvseg::qpbo::{build_network, minimize, solve_qpbo, SolverOptions};
use curvseg::segmenter::{assemble_energy, segment, SegmentationParams};
use curvseg::synthcorpus::brute_force_optimum;

fn image_strategy(max_w: usize, max_h: usize) -> impl Strategy<Value = GrayImage> {
    (2..=max_w, 2..=max_h).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h)
            .prop_map(move |bytes| GrayImage::from_bytes(w, h, &bytes).unwrap())
    })
}

fn bits(m: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| m >> i & 1 == 1).collect()
}

fn argmin_set(n: usize, f: impl Fn(&[bool]) -> f64, tol: f64) -> HashSet<u64> {
    let values: Vec<f64> = (0..1u64 << n).map(|m| f(&bits(m, n))).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    (0..1u64 << n).filter(|&m| values[m as usize] <= best + tol).collect()
}

fn int_energy(n: usize, unary: &[(i64, i64)], pairs: &[(usize, usize, [i64; 4])]) -> IntEnergy {
    let mut e = IntEnergy::new(n);
    for (i, &(a, b)) in unary.iter().enumerate().take(n) {
        e.add_unary(i, a, b);
    }
    for &(u, v, t) in pairs {
        let (u, v) = (u % n, v % n);
        if u != v {
            e.add_pairwise(u, v, t);
        }
    }
    e
}

fn energy_strategy(max_n: usize) -> impl Strategy<Value = IntEnergy> {
    (2..=max_n).prop_flat_map(|n| {
        (
            proptest::collection::vec((-20i64..20, -20i64..20), n),
            proptest::collection::vec((0..n, 0..n, proptest::array::uniform4(-20i64..20)), 0..3 * n),
        )
            .prop_map(move |(u, p)| int_energy(n, &u, &p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbor_relation_is_symmetric(w in 1usize..9, h in 1usize..9) {
        let lattice = Lattice::new(w, h);
        let mut total = 0;
        for i in 0..lattice.len() {
            let ns = lattice.neighbors(NodeId(i));
            total += ns.len();
            for (j, len) in ns {
                let back = lattice.neighbors(j);
                prop_assert!(back.iter().any(|&(k, l)| k == NodeId(i) && l == len));
            }
        }
        prop_assert_eq!(total, 2 * lattice.edge_count());
        if w >= 2 && h >= 2 {
            prop_assert_eq!(lattice.edge_count(), 4 * w * h - 3 * w - 3 * h + 2);
        }
    }

    #[test]
    fn image_round_trips_through_lossless_formats(img in image_strategy(9, 9)) {
        let bytes = img.to_bytes();
        let pgm = decode_image(&encode_pgm(img.width(), img.height(), &bytes)).unwrap();
        let png = decode_image(&encode_png_gray(img.width(), img.height(), &bytes).unwrap()).unwrap();
        prop_assert_eq!(&pgm, &img);
        prop_assert_eq!(&png, &img);
    }

    #[test]
    fn decomposition_reproduces_clique_penalty(
        weight in 0.0f64..10.0,
        alpha in 0.1f64..std::f64::consts::PI,
    ) {
        let c = CurvatureClique {
            center: NodeId(0),
            arms: (NodeId(1), NodeId(2)),
            alpha,
            base_weight: weight,
            contrast_weight: None,
        };
        let edges = decompose_clique(&c);
        for m in 0..8u64 {
            let x = bits(m, 3);
            let sum: f64 = edges.iter().filter(|e| x[e.u.0] != x[e.v.0]).map(|e| e.weight).sum();
            let want = if x[0] != x[1] && x[0] != x[2] { weight } else { 0.0 };
            prop_assert!((sum - want).abs() <= 1e-12 * weight.max(1.0));
        }
    }

    #[test]
    fn clique_count_matches_degrees(w in 1usize..8, h in 1usize..8) {
        let lattice = Lattice::new(w, h);
        let want: usize = (0..lattice.len())
            .map(|i| {
                let d = lattice.neighbors(NodeId(i)).len();
                d * d.saturating_sub(1) / 2
            })
            .sum();
        prop_assert_eq!(enumerate_cliques(w, h, &CurvatureParams::default()).len(), want);
    }

    #[test]
    fn contrast_weights_behave(img in image_strategy(6, 6), p in 1.0f64..3.0, beta in 0.0f64..40.0) {
        let params = CurvatureParams { p, beta };
        let base = enumerate_cliques(img.width(), img.height(), &params);
        prop_assert!(base.iter().all(|c| c.base_weight >= 0.0));

        let mut flat = base.clone();
        apply_contrast(&mut flat, &img, 0.0).unwrap();
        prop_assert!(flat.iter().all(|c| c.contrast_weight == Some(c.base_weight)));

        let mut weighted = base.clone();
        apply_contrast(&mut weighted, &img, beta).unwrap();
        prop_assert!(weighted.iter().all(|c| c.weight() >= 0.0 && c.weight() <= c.base_weight));

        // a constant shift leaves every intensity difference unchanged
        let shifted_values: Vec<f64> = img.values().iter().map(|v| v * 0.5 + 0.25).collect();
        let halved_values: Vec<f64> = img.values().iter().map(|v| v * 0.5).collect();
        let shifted = GrayImage::new(img.width(), img.height(), shifted_values).unwrap();
        let halved = GrayImage::new(img.width(), img.height(), halved_values).unwrap();
        let mut a = base.clone();
        let mut b = base.clone();
        apply_contrast(&mut a, &shifted, beta).unwrap();
        apply_contrast(&mut b, &halved, beta).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.weight() - y.weight()).abs() <= 1e-12 * x.weight().max(1e-300));
        }
        prop_assert_eq!(enumerate_cliques(img.width(), img.height(), &params), base);
    }

    #[test]
    fn negative_weights_only_between_arms(img in image_strategy(6, 6)) {
        let params = CurvatureParams::default();
        let mut cliques = enumerate_cliques(img.width(), img.height(), &params);
        apply_contrast(&mut cliques, &img, params.beta).unwrap();
        for c in &cliques {
            let [a, b, jk] = decompose_clique(c);
            prop_assert!(a.weight >= 0.0 && b.weight >= 0.0 && jk.weight <= 0.0);
        }
    }

    #[test]
    fn fused_edge_builder_matches_reference(img in image_strategy(7, 7), beta in 0.0f64..40.0) {
        let params = CurvatureParams { p: 2.0, beta };
        let mut cliques = enumerate_cliques(img.width(), img.height(), &params);
        apply_contrast(&mut cliques, &img, beta).unwrap();
        let reference = accumulate_edges(cliques.iter().flat_map(decompose_clique));
        prop_assert_eq!(effective_edges(&img, &params), reference);
    }

    #[test]
    fn energy_matches_clique_level_sum(
        img in image_strategy(5, 5),
        lambda in 0.1f64..4.0,
        signed in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let params = CurvatureParams::default();
        let mode = if signed { AttractionMode::Signed } else { AttractionMode::Magnitude };
        let mut cliques = enumerate_cliques(img.width(), img.height(), &params);
        apply_contrast(&mut cliques, &img, params.beta).unwrap();
        let edges = effective_edges(&img, &params);
        let n = img.width() * img.height();
        let energy = build_energy(&edges, n, lambda, mode).unwrap();
        let x = bits(seed, n.min(64));
        let x: Vec<bool> = (0..n).map(|i| x[i % x.len()] ^ (i % 3 == 0)).collect();
        let curvature: f64 = cliques
            .iter()
            .filter(|c| x[c.center.0] != x[c.arms.0 .0] && x[c.center.0] != x[c.arms.1 .0])
            .map(|c| c.weight())
            .sum();
        let attraction: f64 = edges
            .iter()
            .filter(|e| x[e.u.0] == x[e.v.0])
            .map(|e| if signed { e.weight } else { e.weight.abs() } / 2.0)
            .sum();
        let direct = curvature - lambda * attraction;
        let got = energy.evaluate_bits(&x);
        let scale = direct.abs().max(curvature).max(1.0);
        prop_assert!((got - direct).abs() <= 1e-9 * scale, "{} vs {}", got, direct);
    }

    #[test]
    fn magnitude_attraction_repairs_negative_edges(w in 0.001f64..5.0, lambda in 0.1f64..4.0) {
        let edge = curvseg::curvature::EffectiveEdge::new(NodeId(0), NodeId(1), -w);
        let e = build_energy(&[edge], 2, lambda, AttractionMode::Magnitude).unwrap();
        let [a, b, c, d] = e.pair(0, 1).unwrap().table;
        let excess = a + d - b - c;
        if lambda >= 2.0 {
            prop_assert!(excess <= 1e-12);
        } else {
            prop_assert!(excess > 0.0 && excess < 2.0 * w + 1e-12);
        }
    }

    #[test]
    fn seeds_shift_all_agreeing_labelings_equally(img in image_strategy(4, 4), s1 in any::<u64>(), s2 in any::<u64>()) {
        let n = img.width() * img.height();
        let edges = effective_edges(&img, &CurvatureParams::default());
        let e = build_energy(&edges, n, 2.0, AttractionMode::Magnitude).unwrap();
        let mut seeds = SeedMask::empty(img.width(), img.height());
        seeds.set(NodeId(0), SeedLabel::Foreground).unwrap();
        seeds.set(NodeId(n - 1), SeedLabel::Background).unwrap();
        let k = 1.0 + e.total_range();
        let seeded = add_seeds(&e, &seeds, k).unwrap();
        let pin = |m: u64| {
            let mut x = bits(m, n);
            x[0] = true;
            x[n - 1] = false;
            x
        };
        let (x, y) = (pin(s1), pin(s2));
        let before = e.evaluate_bits(&x) - e.evaluate_bits(&y);
        let after = seeded.evaluate_bits(&x) - seeded.evaluate_bits(&y);
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before.abs()));
    }

    #[test]
    fn network_is_symmetric_after_construction(e in energy_strategy(8)) {
        let normal = e.to_normal_form();
        let n = normal.num_vars();
        let net = build_network(&normal);
        let mirror = |i: usize| if i < n { i + n } else { i - n };
        let arcs: Vec<(usize, usize, i64)> = net.arcs().filter(|a| a.2 > 0).collect();
        for &(i, j, cap) in &arcs {
            prop_assert!(arcs.contains(&(mirror(j), mirror(i), cap)), "({}, {}, {}) has no mirror", i, j, cap);
        }
        for i in 0..n {
            prop_assert_eq!(net.terminal_residual(i), -net.terminal_residual(n + i));
        }
    }

    #[test]
    fn roof_dual_bounds_and_persistency(e in energy_strategy(10), ys in proptest::collection::vec(any::<u64>(), 8)) {
        let (_, best) = brute_force_optimum(&e).unwrap();
        let sol = solve_qpbo(&e);
        prop_assert!(sol.lower_bound_x2 <= 2 * i128::from(best));
        for y in ys {
            let y = bits(y, e.num_vars());
            prop_assert!(e.evaluate_bits(&sol.labeling.fuse(&y)) <= e.evaluate_bits(&y));
        }
        if sol.labeling.is_complete() {
            prop_assert_eq!(e.evaluate_bits(&sol.labeling.to_bits().unwrap()), best);
            prop_assert_eq!(sol.lower_bound_x2, 2 * i128::from(best));
        }
        let again = minimize(&e, &SolverOptions::default());
        let twice = minimize(&e, &SolverOptions::default());
        prop_assert_eq!(again.completed, twice.completed);
        prop_assert_eq!(again.labeling, twice.labeling);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn signed_mode_keeps_curvature_minimizers(img in image_strategy(4, 3), lambda in 0.1f64..4.0) {
        let n = img.width() * img.height();
        let edges = effective_edges(&img, &CurvatureParams::default());
        let signed: QpbEnergy = build_energy(&edges, n, lambda, AttractionMode::Signed).unwrap();
        let total: f64 = edges.iter().map(|e| e.weight).sum();
        let scale = edges.iter().map(|e| e.weight.abs()).sum::<f64>().max(1.0);
        for m in (0..1u64 << n).step_by(7) {
            let x = bits(m, n);
            let want = (1.0 + lambda / 2.0) * curvature_value(&edges, &x) - lambda / 2.0 * total;
            prop_assert!((signed.evaluate_bits(&x) - want).abs() <= 1e-9 * scale);
        }
        let tol = 1e-9 * scale;
        prop_assert_eq!(
            argmin_set(n, |x| signed.evaluate_bits(x), tol * (1.0 + lambda)),
            argmin_set(n, |x| curvature_value(&edges, x), tol)
        );
    }

    #[test]
    fn segmentation_respects_seeds_and_reports_its_energy(
        img in image_strategy(10, 10),
        fg in any::<(u8, u8)>(),
        bg in any::<(u8, u8)>(),
        lambda in prop_oneof![Just(1.0), Just(2.0), Just(3.0)],
    ) {
        let (w, h) = (img.width(), img.height());
        let f = NodeId::from_row_col(fg.0 as usize % h, fg.1 as usize % w, w);
        let b = NodeId::from_row_col(bg.0 as usize % h, bg.1 as usize % w, w);
        prop_assume!(f != b);
        let mut seeds = SeedMask::empty(w, h);
        seeds.set(f, SeedLabel::Foreground).unwrap();
        seeds.set(b, SeedLabel::Background).unwrap();
        let params = SegmentationParams { lambda, ..Default::default() };
        let r = segment(&img, &seeds, &params).unwrap();
        let (fr, fc) = f.row_col(w);
        let (br, bc) = b.row_col(w);
        prop_assert!(r.mask.get(fr, fc));
        prop_assert!(!r.mask.get(br, bc));
        let (energy, _) = assemble_energy(&img, &seeds, &params).unwrap();
        let x: Vec<bool> = r.mask.values().iter().map(|&v| v != 0).collect();
        let e = energy.evaluate_bits(&x);
        prop_assert!((e - r.report.energy).abs() <= 1e-6 * (1.0 + e.abs()));
        prop_assert!(r.report.lower_bound <= r.report.energy + 1e-6 * (1.0 + e.abs()) + quantization_slack(w * h));
    }

    #[test]
    fn submodular_energies_are_completed(e in energy_strategy(10)) {
        // drop the frustrated part of every pair so the energy is submodular
        let mut sub = IntEnergy::new(e.num_vars());
        for (i, u) in e.unary().iter().enumerate() {
            sub.add_unary(i, u[0], u[1]);
        }
        for p in e.pairs() {
            let [a, b, c, d] = p.table;
            let d = d.min(b + c - a);
            sub.add_pairwise(p.u, p.v, [a, b, c, d]);
        }
        prop_assert!(sub.is_submodular());
        let (_, best) = brute_force_optimum(&sub).unwrap();
        let sol = minimize(&sub, &SolverOptions::default());
        prop_assert_eq!(sol.energy_of_completion, best);
        prop_assert_eq!(sol.lower_bound_x2, 2 * i128::from(best));
    }
}

/// Quantization slack for the lower bound, in energy units.
fn quantization_slack(pixels: usize) -> f64 {
    pixels as f64 * 40.0 * 1e-6
}

#[test]
fn step_edge_boundary_is_stable_in_beta() {
    let (w, h) = (16usize, 12usize);
    let truth = Mask::from_fn(w, h, |_, col| col < 7);
    let values = truth.values().iter().map(|&v| if v != 0 { 0.9 } else { 0.1 }).collect();
    let img = GrayImage::new(w, h, values).unwrap();
    let mut seeds = SeedMask::empty(w, h);
    seeds.paint_disk(2.0, 6.0, 1.5, SeedLabel::Foreground).unwrap();
    seeds.paint_disk(13.0, 6.0, 1.5, SeedLabel::Background).unwrap();
    let boundary = |m: &Mask| -> Vec<(usize, usize)> {
        (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| m.get(r, c) && c + 1 < w && !m.get(r, c + 1))
            .collect()
    };
    let masks: Vec<Mask> = [10.0, 20.0, 40.0]
        .iter()
        .map(|&beta| {
            let params = SegmentationParams { beta, ..Default::default() };
            segment(&img, &seeds, &params).unwrap().mask
        })
        .collect();
    assert_eq!(masks[0], truth);
    for m in &masks[1..] {
        assert_eq!(boundary(m), boundary(&masks[0]));
    }
}
