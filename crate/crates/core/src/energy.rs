//! Quadratic pseudo-Boolean energies.
//!
//! An [`Energy`] is `constant + Σ_i θ_i(x_i) + Σ_(u,v) θ_uv(x_u, x_v)` over
//! binary variables. Pairwise tables are stored as `[θ00, θ01, θ10, θ11]`
//! with the first index belonging to the lower-numbered variable.
//!
//! The segmentation objective is curvature minus `λ` times attraction, both
//! expressed on the accumulated effective edges: each edge of weight `w`
//! contributes `w |x_u - x_v|` and `-(λ a / 2) [x_u = x_v]`, where `a` is
//! `|w|` or `w` depending on [`AttractionMode`].

use std::collections::HashMap;
use std::fmt::{Debug, Display};
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use crate::curvature::EffectiveEdge;
use crate::error::{Error, Result};
use crate::lattice::{SeedLabel, SeedMask};
use crate::qpbo::Labeling;

/// Scalar type usable as an energy coefficient.
pub trait Coeff:
    Copy
    + Debug
    + Display
    + Default
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + FromStr
{
    fn zero() -> Self {
        Self::default()
    }
}

impl Coeff for f64 {}
impl Coeff for i64 {}

fn min2<T: Coeff>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

fn max2<T: Coeff>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm<T> {
    pub u: usize,
    pub v: usize,
    /// `[θ(0,0), θ(0,1), θ(1,0), θ(1,1)]`, first index is `x_u`.
    pub table: [T; 4],
}

impl<T: Coeff> PairTerm<T> {
    #[inline]
    pub fn value(&self, xu: bool, xv: bool) -> T {
        self.table[(usize::from(xu) << 1) | usize::from(xv)]
    }

    /// `θ00 + θ11 <= θ01 + θ10`.
    pub fn is_submodular(&self) -> bool {
        let [a, b, c, d] = self.table;
        a + d <= b + c
    }

    fn range(&self) -> T {
        let [a, b, c, d] = self.table;
        max2(max2(a, b), max2(c, d)) - min2(min2(a, b), min2(c, d))
    }
}

/// Quadratic pseudo-Boolean energy with coefficients of type `T`.
#[derive(Debug, Clone)]
pub struct Energy<T> {
    unary: Vec<[T; 2]>,
    pairs: Vec<PairTerm<T>>,
    index: HashMap<(usize, usize), usize>,
    constant: T,
}

/// Real-valued energy used during assembly.
pub type QpbEnergy = Energy<f64>;
/// Integer energy handed to the max-flow solver.
pub type IntEnergy = Energy<i64>;

impl<T: Coeff> PartialEq for Energy<T> {
    fn eq(&self, other: &Self) -> bool {
        self.unary == other.unary && self.pairs == other.pairs && self.constant == other.constant
    }
}

impl<T: Coeff> Energy<T> {
    pub fn new(n: usize) -> Self {
        Energy {
            unary: vec![[T::zero(); 2]; n],
            pairs: Vec::new(),
            index: HashMap::new(),
            constant: T::zero(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.unary.len()
    }

    pub fn unary(&self) -> &[[T; 2]] {
        &self.unary
    }

    pub fn pairs(&self) -> &[PairTerm<T>] {
        &self.pairs
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant += c;
    }

    pub fn add_unary(&mut self, i: usize, theta0: T, theta1: T) {
        self.unary[i][0] += theta0;
        self.unary[i][1] += theta1;
    }

    /// Adds a pairwise table; repeated pairs accumulate into one entry and a
    /// self-pair folds into the unary term.
    pub fn add_pairwise(&mut self, u: usize, v: usize, table: [T; 4]) {
        assert!(u < self.num_vars() && v < self.num_vars(), "variable out of range");
        if u == v {
            self.add_unary(u, table[0], table[3]);
            return;
        }
        let (u, v, table) = if u < v {
            (u, v, table)
        } else {
            (v, u, [table[0], table[2], table[1], table[3]])
        };
        match self.index.get(&(u, v)) {
            Some(&k) => {
                for (dst, src) in self.pairs[k].table.iter_mut().zip(table) {
                    *dst += src;
                }
            }
            None => {
                self.index.insert((u, v), self.pairs.len());
                self.pairs.push(PairTerm { u, v, table });
            }
        }
    }

    pub fn pair(&self, u: usize, v: usize) -> Option<&PairTerm<T>> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.index.get(&key).map(|&k| &self.pairs[k])
    }

    /// Energy of a complete boolean assignment.
    pub fn evaluate_bits(&self, x: &[bool]) -> T {
        assert_eq!(x.len(), self.num_vars(), "labeling length");
        let mut e = self.constant;
        for (u, &xi) in self.unary.iter().zip(x) {
            e += u[usize::from(xi)];
        }
        for p in &self.pairs {
            e += p.value(x[p.u], x[p.v]);
        }
        e
    }

    /// Energy of a labeling; every variable must be labeled.
    pub fn evaluate(&self, x: &Labeling) -> Result<T> {
        Ok(self.evaluate_bits(&x.to_bits()?))
    }

    /// Reparameterizes so every pairwise row and column has minimum zero and
    /// every unary has minimum zero. Values of all labelings are preserved.
    pub fn to_normal_form(&self) -> Self {
        let mut out = self.clone();
        for k in 0..out.pairs.len() {
            let PairTerm { u, v, mut table } = out.pairs[k];
            let r0 = min2(table[0], table[1]);
            let r1 = min2(table[2], table[3]);
            table[0] -= r0;
            table[1] -= r0;
            table[2] -= r1;
            table[3] -= r1;
            out.unary[u][0] += r0;
            out.unary[u][1] += r1;
            let c0 = min2(table[0], table[2]);
            let c1 = min2(table[1], table[3]);
            table[0] -= c0;
            table[2] -= c0;
            table[1] -= c1;
            table[3] -= c1;
            out.unary[v][0] += c0;
            out.unary[v][1] += c1;
            out.pairs[k].table = table;
        }
        for u in out.unary.iter_mut() {
            let m = min2(u[0], u[1]);
            u[0] -= m;
            u[1] -= m;
            out.constant += m;
        }
        out
    }

    pub fn is_normal_form(&self) -> bool {
        let z = T::zero();
        self.unary
            .iter()
            .all(|u| min2(u[0], u[1]) == z)
            && self.pairs.iter().all(|p| {
                let [a, b, c, d] = p.table;
                min2(a, b) == z && min2(c, d) == z && min2(a, c) == z && min2(b, d) == z
            })
    }

    pub fn is_submodular(&self) -> bool {
        self.pairs.iter().all(PairTerm::is_submodular)
    }

    /// Sum over pairwise tables of `max - min` plus unary spreads; an upper
    /// bound on how much any set of variable flips can save.
    pub fn total_range(&self) -> T {
        let mut total = T::zero();
        for p in &self.pairs {
            total += p.range();
        }
        for u in &self.unary {
            total += max2(u[0], u[1]) - min2(u[0], u[1]);
        }
        total
    }

    pub fn map_coeffs<U: Coeff>(&self, mut f: impl FnMut(T) -> Result<U>) -> Result<Energy<U>> {
        let unary = self
            .unary
            .iter()
            .map(|u| Ok([f(u[0])?, f(u[1])?]))
            .collect::<Result<Vec<_>>>()?;
        let pairs = self
            .pairs
            .iter()
            .map(|p| {
                Ok(PairTerm {
                    u: p.u,
                    v: p.v,
                    table: [f(p.table[0])?, f(p.table[1])?, f(p.table[2])?, f(p.table[3])?],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Energy {
            unary,
            pairs,
            index: self.index.clone(),
            constant: f(self.constant)?,
        })
    }

    /// Text dump: `p qpbe n m`, an optional `c constant` line, one
    /// `u θ0 θ1` line per variable and one `e u v θ00 θ01 θ10 θ11` line per
    /// pairwise term.
    pub fn write_dump(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "p qpbe {} {}", self.num_vars(), self.pairs.len())?;
        writeln!(out, "c {}", self.constant)?;
        for (i, u) in self.unary.iter().enumerate() {
            writeln!(out, "{i} {} {}", u[0], u[1])?;
        }
        for p in &self.pairs {
            let [a, b, c, d] = p.table;
            writeln!(out, "e {} {} {a} {b} {c} {d}", p.u, p.v)?;
        }
        Ok(())
    }

    pub fn read_dump(input: impl BufRead) -> Result<Self> {
        let bad = |line: usize, what: &str| {
            Error::UnsupportedFormat(format!("energy dump line {line}: {what}"))
        };
        let mut energy: Option<Self> = None;
        for (no, line) in input.lines().enumerate() {
            let line = line.map_err(|e| bad(no + 1, &e.to_string()))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let num = |s: &str| s.parse::<T>().map_err(|_| bad(no + 1, "bad number"));
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad(no + 1, "bad index"));
            match toks[0] {
                "p" => {
                    if toks.len() != 4 || toks[1] != "qpbe" {
                        return Err(bad(no + 1, "bad header"));
                    }
                    energy = Some(Energy::new(idx(toks[2])?));
                }
                "c" => {
                    let e = energy.as_mut().ok_or_else(|| bad(no + 1, "missing header"))?;
                    e.add_constant(num(toks.get(1).copied().unwrap_or(""))?);
                }
                "e" => {
                    let e = energy.as_mut().ok_or_else(|| bad(no + 1, "missing header"))?;
                    if toks.len() != 7 {
                        return Err(bad(no + 1, "expected 6 fields after 'e'"));
                    }
                    let (u, v) = (idx(toks[1])?, idx(toks[2])?);
                    if u >= e.num_vars() || v >= e.num_vars() {
                        return Err(bad(no + 1, "variable out of range"));
                    }
                    e.add_pairwise(u, v, [num(toks[3])?, num(toks[4])?, num(toks[5])?, num(toks[6])?]);
                }
                _ => {
                    let e = energy.as_mut().ok_or_else(|| bad(no + 1, "missing header"))?;
                    if toks.len() != 3 {
                        return Err(bad(no + 1, "expected 'u θ0 θ1'"));
                    }
                    let u = idx(toks[0])?;
                    if u >= e.num_vars() {
                        return Err(bad(no + 1, "variable out of range"));
                    }
                    e.add_unary(u, num(toks[1])?, num(toks[2])?);
                }
            }
        }
        energy.ok_or_else(|| bad(0, "empty dump"))
    }
}

/// How the attraction weight of an effective edge is derived from its signed
/// curvature weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttractionMode {
    /// `a = |w|`; turns negative edges toward submodularity.
    #[default]
    Magnitude,
    /// `a = w`; only rescales the curvature objective.
    Signed,
}

impl FromStr for AttractionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "magnitude" => Ok(AttractionMode::Magnitude),
            "signed" => Ok(AttractionMode::Signed),
            other => Err(Error::InvalidParameter(format!(
                "attraction mode must be 'magnitude' or 'signed', got '{other}'"
            ))),
        }
    }
}

impl Display for AttractionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttractionMode::Magnitude => "magnitude",
            AttractionMode::Signed => "signed",
        })
    }
}

pub const DEFAULT_LAMBDA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub lambda: f64,
    pub mode: AttractionMode,
    /// Seed penalty; `None` derives it from the energy (see [`seed_penalty`]).
    pub seed_penalty: Option<f64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            lambda: DEFAULT_LAMBDA,
            mode: AttractionMode::Magnitude,
            seed_penalty: None,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if let Some(k) = self.seed_penalty {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "seed penalty must be > 0, got {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Curvature-minus-attraction energy over `n` variables.
pub fn build_energy(
    edges: &[EffectiveEdge],
    n: usize,
    lambda: f64,
    mode: AttractionMode,
) -> Result<QpbEnergy> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    let mut energy = QpbEnergy::new(n);
    for e in edges {
        if e.u.0 >= n || e.v.0 >= n {
            return Err(Error::InvalidParameter(format!(
                "edge ({}, {}) outside {n} variables",
                e.u.0, e.v.0
            )));
        }
        let a = match mode {
            AttractionMode::Magnitude => e.weight.abs(),
            AttractionMode::Signed => e.weight,
        };
        let agree = -lambda * a / 2.0;
        energy.add_pairwise(e.u.0, e.v.0, [agree, e.weight, e.weight, agree]);
    }
    Ok(energy)
}

/// Default seed penalty: one more than the largest possible saving from
/// violating seeds.
pub fn seed_penalty(energy: &QpbEnergy) -> f64 {
    1.0 + energy.total_range()
}

/// Adds hard-constraint unaries for seeds: a foreground pixel pays `k` for
/// label 0, a background pixel pays `k` for label 1.
pub fn add_seeds(energy: &QpbEnergy, seeds: &SeedMask, k: f64) -> Result<QpbEnergy> {
    if seeds.labels().len() != energy.num_vars() {
        return Err(Error::InvalidGeometry(format!(
            "{} seed labels for {} variables",
            seeds.labels().len(),
            energy.num_vars()
        )));
    }
    if seeds.count(SeedLabel::Foreground) == 0 || seeds.count(SeedLabel::Background) == 0 {
        return Err(Error::MissingSeedClass);
    }
    let needed = energy.total_range();
    if !(k > needed) {
        return Err(Error::InvalidParameter(format!(
            "seed penalty {k} does not exceed total energy range {needed}"
        )));
    }
    let mut out = energy.clone();
    for (i, label) in seeds.labels().iter().enumerate() {
        match label {
            SeedLabel::Foreground => out.add_unary(i, k, 0.0),
            SeedLabel::Background => out.add_unary(i, 0.0, k),
            SeedLabel::None => {}
        }
    }
    Ok(out)
}

/// Pure curvature value of a labeling, `Σ_edges w |x_u - x_v|`.
pub fn curvature_value(edges: &[EffectiveEdge], x: &[bool]) -> f64 {
    edges
        .iter()
        .filter(|e| x[e.u.0] != x[e.v.0])
        .map(|e| e.weight)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::NodeId;

    fn edge(u: usize, v: usize, w: f64) -> EffectiveEdge {
        EffectiveEdge::new(NodeId(u), NodeId(v), w)
    }

    fn bits(mask: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| mask >> i & 1 == 1).collect()
    }

    #[test]
    fn magnitude_table() {
        let e = build_energy(&[edge(0, 1, 2.0)], 2, 1.0, AttractionMode::Magnitude).unwrap();
        assert_eq!(e.pairs()[0].table, [-1.0, 2.0, 2.0, -1.0]);
        assert_eq!(e.evaluate_bits(&[false, true]), 2.0);
        assert_eq!(e.evaluate_bits(&[false, false]), -1.0);
    }

    #[test]
    fn signed_table() {
        let e = build_energy(&[edge(0, 1, -1.0)], 2, 1.0, AttractionMode::Signed).unwrap();
        assert_eq!(e.pairs()[0].table, [0.5, -1.0, -1.0, 0.5]);
    }

    #[test]
    fn empty_energy_is_zero() {
        let e = build_energy(&[], 3, 1.0, AttractionMode::Magnitude).unwrap();
        for m in 0..8 {
            assert_eq!(e.evaluate_bits(&bits(m, 3)), 0.0);
        }
        assert!(build_energy(&[], 3, 0.0, AttractionMode::Magnitude).is_err());
    }

    #[test]
    fn reversed_pair_is_transposed() {
        let mut e = QpbEnergy::new(2);
        e.add_pairwise(1, 0, [1.0, 2.0, 3.0, 4.0]);
        // x1=0, x0=1 is table entry θ(0,1) of the (1,0) orientation
        assert_eq!(e.evaluate_bits(&[true, false]), 2.0);
        assert_eq!(e.pairs().len(), 1);
        e.add_pairwise(0, 1, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(e.pairs().len(), 1);
        assert_eq!(e.pairs()[0].table, [2.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn seeds_force_labels() {
        let e = QpbEnergy::new(2);
        let mut seeds = SeedMask::empty(2, 1);
        seeds.set(NodeId(0), SeedLabel::Foreground).unwrap();
        assert!(matches!(add_seeds(&e, &seeds, 10.0), Err(Error::MissingSeedClass)));
        seeds.set(NodeId(1), SeedLabel::Background).unwrap();
        let s = add_seeds(&e, &seeds, 10.0).unwrap();
        let best = (0..4)
            .min_by(|&a, &b| s.evaluate_bits(&bits(a, 2)).total_cmp(&s.evaluate_bits(&bits(b, 2))))
            .unwrap();
        assert_eq!(bits(best, 2), vec![true, false]);
    }

    #[test]
    fn two_node_seeded_optimum() {
        let e = build_energy(&[edge(0, 1, 1.0)], 2, 1.0, AttractionMode::Magnitude).unwrap();
        let mut seeds = SeedMask::empty(2, 1);
        seeds.set(NodeId(0), SeedLabel::Foreground).unwrap();
        seeds.set(NodeId(1), SeedLabel::Background).unwrap();
        let s = add_seeds(&e, &seeds, 100.0).unwrap();
        let values: Vec<f64> = (0..4).map(|m| s.evaluate_bits(&bits(m, 2))).collect();
        // (x0, x1) = (1, 0) is mask 0b01
        assert_eq!(values[0b01], 1.0);
        assert!(values.iter().enumerate().all(|(m, &v)| m == 0b01 || v > 1.0));
    }

    #[test]
    fn seed_penalty_must_dominate() {
        let e = build_energy(&[edge(0, 1, 1.0)], 2, 1.0, AttractionMode::Magnitude).unwrap();
        let mut seeds = SeedMask::empty(2, 1);
        seeds.set(NodeId(0), SeedLabel::Foreground).unwrap();
        seeds.set(NodeId(1), SeedLabel::Background).unwrap();
        assert!(add_seeds(&e, &seeds, 1.0).is_err());
        assert!(add_seeds(&e, &seeds, seed_penalty(&e)).is_ok());
    }

    #[test]
    fn normal_form_of_magnitude_table() {
        let e = build_energy(&[edge(0, 1, 2.0)], 2, 1.0, AttractionMode::Magnitude).unwrap();
        let nf = e.to_normal_form();
        assert!(nf.is_normal_form());
        for m in 0..4 {
            assert_eq!(e.evaluate_bits(&bits(m, 2)), nf.evaluate_bits(&bits(m, 2)));
        }
        assert_eq!(nf.to_normal_form(), nf);
    }

    #[test]
    fn dump_roundtrip() {
        let mut e = IntEnergy::new(3);
        e.add_unary(0, 4, -1);
        e.add_pairwise(0, 2, [1, -2, 3, 0]);
        e.add_constant(7);
        let mut buf = Vec::new();
        e.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p qpbe 3 1\n"));
        assert!(text.contains("e 0 2 1 -2 3 0\n"));
        let back = IntEnergy::read_dump(buf.as_slice()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Signed".parse::<AttractionMode>().unwrap(), AttractionMode::Signed);
        assert!("both".parse::<AttractionMode>().is_err());
    }
}
