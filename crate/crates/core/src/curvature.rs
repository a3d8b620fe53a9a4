//! Curvature cliques on the 8-connected lattice.
//!
//! A clique is a center pixel `i` with two distinct neighbors `j < k`. When
//! both lattice edges `(i, j)` and `(i, k)` are cut the boundary pays
//! `alpha^p / min(|e_ij|, |e_ik|)`, where `alpha` is the angle between the two
//! edge vectors. The contrast-weighted variant multiplies this by
//! `exp(-beta (g_i - g_j)^2) * exp(-beta (g_i - g_k)^2)`.
//!
//! Each clique penalty is exactly representable by three pairwise terms:
//! `+wc/2` on `(i, j)` and `(i, k)` and `-wc/2` on `(j, k)`.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::{offset_length, GrayImage, Lattice, NodeId, NEIGHBOR_OFFSETS};

pub const DEFAULT_EXPONENT: f64 = 2.0;
pub const DEFAULT_BETA: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureParams {
    /// Angle exponent `p >= 1`.
    pub p: f64,
    /// Contrast strength `beta >= 0` on `[0, 1]` intensities.
    pub beta: f64,
}

impl Default for CurvatureParams {
    fn default() -> Self {
        CurvatureParams {
            p: DEFAULT_EXPONENT,
            beta: DEFAULT_BETA,
        }
    }
}

impl CurvatureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "exponent p must be >= 1, got {}",
                self.p
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureClique {
    pub center: NodeId,
    /// Arms ordered by index, `arms.0 < arms.1`.
    pub arms: (NodeId, NodeId),
    /// Angle between the two edge vectors, in `(0, pi]`.
    pub alpha: f64,
    pub base_weight: f64,
    /// Set by [`apply_contrast`].
    pub contrast_weight: Option<f64>,
}

impl CurvatureClique {
    /// Contrast weight if set, otherwise the unweighted penalty.
    pub fn weight(&self) -> f64 {
        self.contrast_weight.unwrap_or(self.base_weight)
    }
}

/// Signed pairwise weight between two nodes, `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
}

impl EffectiveEdge {
    /// Builds an edge with endpoints put in ascending order.
    pub fn new(a: NodeId, b: NodeId, weight: f64) -> Self {
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        EffectiveEdge { u, v, weight }
    }
}

/// Index of an offset in `NEIGHBOR_OFFSETS` order, as an angle multiple of
/// pi/4 measured counter-clockwise from east (rows grow downward).
fn direction_octant(drow: isize, dcol: isize) -> i32 {
    match (drow, dcol) {
        (0, 1) => 0,
        (-1, 1) => 1,
        (-1, 0) => 2,
        (-1, -1) => 3,
        (0, -1) => 4,
        (1, -1) => 5,
        (1, 0) => 6,
        (1, 1) => 7,
        _ => unreachable!("not an 8-neighbor offset"),
    }
}

/// Interior angle between two 8-neighbor offsets, snapped to multiples of
/// pi/4.
pub fn offset_angle(a: (isize, isize), b: (isize, isize)) -> f64 {
    let d = (direction_octant(a.0, a.1) - direction_octant(b.0, b.1)).rem_euclid(8);
    f64::from(d.min(8 - d)) * FRAC_PI_4
}

fn clique_base_weight(alpha: f64, len_j: f64, len_k: f64, p: f64) -> f64 {
    alpha.powf(p) / len_j.min(len_k)
}

/// One entry per pair of neighbor offsets: `(offset_a, offset_b, alpha, base_weight)`
/// with `offset_a` preceding `offset_b` in `NEIGHBOR_OFFSETS` order.
fn offset_pairs(p: f64) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::with_capacity(28);
    for a in 0..8 {
        for b in a + 1..8 {
            let oa = NEIGHBOR_OFFSETS[a];
            let ob = NEIGHBOR_OFFSETS[b];
            let alpha = offset_angle(oa, ob);
            let w = clique_base_weight(
                alpha,
                offset_length(oa.0, oa.1),
                offset_length(ob.0, ob.1),
                p,
            );
            out.push((a, b, alpha, w));
        }
    }
    out
}

/// All curvature cliques of a `width × height` lattice, ordered by center and
/// then by arm indices. Contrast weights are left unset.
pub fn enumerate_cliques(
    width: usize,
    height: usize,
    params: &CurvatureParams,
) -> Vec<CurvatureClique> {
    let lattice = Lattice::new(width, height);
    let pairs = offset_pairs(params.p);
    let mut out = Vec::with_capacity(lattice.len() * 28);
    for i in 0..lattice.len() {
        let center = NodeId(i);
        let arms: [Option<NodeId>; 8] =
            std::array::from_fn(|d| lattice.offset(center, NEIGHBOR_OFFSETS[d].0, NEIGHBOR_OFFSETS[d].1));
        for &(a, b, alpha, base_weight) in &pairs {
            if let (Some(j), Some(k)) = (arms[a], arms[b]) {
                out.push(CurvatureClique {
                    center,
                    arms: (j, k),
                    alpha,
                    base_weight,
                    contrast_weight: None,
                });
            }
        }
    }
    out
}

#[inline]
fn contrast_factor(gi: f64, gj: f64, beta: f64) -> f64 {
    let d = gi - gj;
    (-beta * d * d).exp()
}

/// Sets `contrast_weight` on every clique from the image intensities.
pub fn apply_contrast(
    cliques: &mut [CurvatureClique],
    image: &GrayImage,
    beta: f64,
) -> Result<()> {
    let n = image.width() * image.height();
    if let Some(c) = cliques
        .iter()
        .find(|c| c.center.0 >= n || c.arms.0 .0 >= n || c.arms.1 .0 >= n)
    {
        return Err(Error::DimensionMismatch {
            expected: (image.width(), image.height()),
            found: (c.center.0.max(c.arms.1 .0) + 1, 1),
        });
    }
    for c in cliques.iter_mut() {
        let gi = image.get(c.center);
        let f = contrast_factor(gi, image.get(c.arms.0), beta)
            * contrast_factor(gi, image.get(c.arms.1), beta);
        c.contrast_weight = Some(c.base_weight * f);
    }
    Ok(())
}

/// The three signed pairwise terms equivalent to one clique penalty:
/// `(i, j, +wc/2)`, `(i, k, +wc/2)`, `(j, k, -wc/2)`.
pub fn decompose_clique(c: &CurvatureClique) -> [EffectiveEdge; 3] {
    let half = c.weight() / 2.0;
    [
        EffectiveEdge::new(c.center, c.arms.0, half),
        EffectiveEdge::new(c.center, c.arms.1, half),
        EffectiveEdge::new(c.arms.0, c.arms.1, -half),
    ]
}

/// Sums contributions per unordered pair in input order and drops pairs whose
/// total is exactly zero. Output is sorted by `(u, v)`.
pub fn accumulate_edges(edges: impl IntoIterator<Item = EffectiveEdge>) -> Vec<EffectiveEdge> {
    let mut all: Vec<EffectiveEdge> = edges
        .into_iter()
        .map(|e| EffectiveEdge::new(e.u, e.v, e.weight))
        .collect();
    all.sort_by_key(|e| (e.u, e.v)); // stable: keeps input order within a pair
    let mut out: Vec<EffectiveEdge> = Vec::new();
    let mut iter = all.into_iter().peekable();
    while let Some(first) = iter.next() {
        let mut sum = first.weight;
        while let Some(next) = iter.next_if(|e| (e.u, e.v) == (first.u, first.v)) {
            sum += next.weight;
        }
        if sum != 0.0 {
            out.push(EffectiveEdge::new(first.u, first.v, sum));
        }
    }
    out
}

/// Forward offsets `(drow, dcol)` from `u` to a partner `v > u` within
/// Chebyshev distance 2; every decomposed edge falls in this window.
const FORWARD_WINDOW: [(isize, isize); 12] = [
    (0, 1),
    (0, 2),
    (1, -2),
    (1, -1),
    (1, 0),
    (1, 1),
    (1, 2),
    (2, -2),
    (2, -1),
    (2, 0),
    (2, 1),
    (2, 2),
];

fn window_slot(drow: isize, dcol: isize) -> usize {
    FORWARD_WINDOW
        .iter()
        .position(|&o| o == (drow, dcol))
        .expect("pair outside the 5x5 window")
}

/// Contrast-weighted effective edges of an image without materializing the
/// cliques. Produces exactly the same values (bit for bit) as
/// `accumulate_edges` over `decompose_clique` of every enumerated,
/// contrast-weighted clique.
pub fn effective_edges(image: &GrayImage, params: &CurvatureParams) -> Vec<EffectiveEdge> {
    let lattice = image.lattice();
    let (w, h) = (lattice.width as isize, lattice.height as isize);
    let n = lattice.len();
    let pairs = offset_pairs(params.p);
    // slot lookup for (offset a -> offset b) arm pairs and center->arm edges
    let arm_slot: Vec<usize> = pairs
        .iter()
        .map(|&(a, b, _, _)| {
            let oa = NEIGHBOR_OFFSETS[a];
            let ob = NEIGHBOR_OFFSETS[b];
            window_slot(ob.0 - oa.0, ob.1 - oa.1)
        })
        .collect();
    let mut acc = vec![0.0f64; n * FORWARD_WINDOW.len()];
    // (dr, dc) is the offset from a to b
    fn add(acc: &mut [f64], a: usize, b: usize, (dr, dc): (isize, isize), wgt: f64) {
        let (u, slot) = if b > a {
            (a, window_slot(dr, dc))
        } else {
            (b, window_slot(-dr, -dc))
        };
        acc[u * FORWARD_WINDOW.len() + slot] += wgt;
    }
    let values = image.values();
    for i in 0..n {
        let (r, c) = ((i / lattice.width) as isize, (i % lattice.width) as isize);
        let arms: [Option<usize>; 8] = std::array::from_fn(|d| {
            let (dr, dc) = NEIGHBOR_OFFSETS[d];
            let (rr, cc) = (r + dr, c + dc);
            (rr >= 0 && cc >= 0 && rr < h && cc < w).then(|| (rr * w + cc) as usize)
        });
        let gi = values[i];
        for (pi, &(a, b, _, base)) in pairs.iter().enumerate() {
            let (Some(j), Some(k)) = (arms[a], arms[b]) else {
                continue;
            };
            let wc = base
                * (contrast_factor(gi, values[j], params.beta)
                    * contrast_factor(gi, values[k], params.beta));
            let half = wc / 2.0;
            add(&mut acc, i, j, NEIGHBOR_OFFSETS[a], half);
            add(&mut acc, i, k, NEIGHBOR_OFFSETS[b], half);
            // j < k always, so the arm edge lands directly in j's window
            acc[j * FORWARD_WINDOW.len() + arm_slot[pi]] += -half;
        }
    }
    let mut out = Vec::new();
    for u in 0..n {
        let (r, c) = ((u / lattice.width) as isize, (u % lattice.width) as isize);
        // collect this node's partners in ascending index order
        let mut row: Vec<(usize, f64)> = FORWARD_WINDOW
            .iter()
            .enumerate()
            .filter_map(|(s, &(dr, dc))| {
                let wgt = acc[u * FORWARD_WINDOW.len() + s];
                let (rr, cc) = (r + dr, c + dc);
                (wgt != 0.0 && rr >= 0 && cc >= 0 && rr < h && cc < w)
                    .then(|| ((rr * w + cc) as usize, wgt))
            })
            .collect();
        row.sort_by_key(|&(v, _)| v);
        out.extend(
            row.into_iter()
                .map(|(v, wgt)| EffectiveEdge::new(NodeId(u), NodeId(v), wgt)),
        );
    }
    out
}

/// Writes one `u v weight` line per edge, weights with 12 significant digits.
pub fn write_edge_dump(edges: &[EffectiveEdge], mut out: impl Write) -> std::io::Result<()> {
    for e in edges {
        writeln!(out, "{} {} {:.11e}", e.u.0, e.v.0, e.weight)?;
    }
    Ok(())
}
