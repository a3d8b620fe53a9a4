//! Roof-duality (QPBO) minimization of quadratic pseudo-Boolean energies,
//! with probing to extend partial labelings.
//!
//! Every variable `i` gets two nodes in a flow network, one for `x_i` and one
//! for its complement. A node on the source side of the cut means the literal
//! is 0. Minimum cuts of this doubled network give the roof-dual lower bound
//! and a partial labeling with the weak persistency property: overwriting
//! any labeling with the labeled variables never increases its energy.

pub mod maxflow;
mod probe;

use std::time::{Duration, Instant};

use crate::energy::{IntEnergy, QpbEnergy};
use crate::error::{Error, Result};

pub use maxflow::{FlowNetwork, Terminal};
pub use probe::{probe, probe_with_budget, ProbeEvent, ProbeOutcome, DEFAULT_PROBE_BUDGET};

pub const DEFAULT_SCALE: i64 = 1_000_000;
pub const DEFAULT_MAX_ROUNDS: usize = 10;

/// Largest magnitude any single quantized coefficient (or the sum of all of
/// them) may reach.
const COEFF_LIMIT: i64 = 1 << 62;

/// Per-variable label: `Some(false)` = 0, `Some(true)` = 1, `None` unlabeled.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(Vec<Option<bool>>);

impl Labeling {
    pub fn unlabeled(n: usize) -> Self {
        Labeling(vec![None; n])
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Labeling(bits.iter().map(|&b| Some(b)).collect())
    }

    pub fn from_options(values: Vec<Option<bool>>) -> Self {
        Labeling(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: Option<bool>) {
        self.0[i] = value;
    }

    pub fn values(&self) -> &[Option<bool>] {
        &self.0
    }

    pub fn unlabeled_count(&self) -> usize {
        self.0.iter().filter(|v| v.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn to_bits(&self) -> Result<Vec<bool>> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(Error::UnlabeledVariable(i)))
            .collect()
    }

    /// `y` overwritten by every labeled entry of `self`.
    pub fn fuse(&self, y: &[bool]) -> Vec<bool> {
        self.0.iter().zip(y).map(|(l, &b)| l.unwrap_or(b)).collect()
    }
}

/// Value given to variables left unlabeled by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Unlabeled pixels become background (0).
    #[default]
    Bg,
    /// Unlabeled pixels become object (1).
    Fg,
}

impl FillPolicy {
    pub fn value(self) -> bool {
        matches!(self, FillPolicy::Fg)
    }
}

impl std::str::FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bg" => Ok(FillPolicy::Bg),
            "fg" => Ok(FillPolicy::Fg),
            other => Err(Error::InvalidParameter(format!(
                "fallback must be 'bg' or 'fg', got '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for FillPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FillPolicy::Bg => "bg",
            FillPolicy::Fg => "fg",
        })
    }
}

/// Replaces unlabeled entries according to `policy`.
pub fn complete_labeling(labeling: &Labeling, policy: FillPolicy) -> Vec<bool> {
    labeling
        .values()
        .iter()
        .map(|v| v.unwrap_or(policy.value()))
        .collect()
}

/// Rounds every coefficient of `energy` times `scale` to an integer.
pub fn quantize(energy: &QpbEnergy, scale: i64) -> Result<IntEnergy> {
    if scale < 1 {
        return Err(Error::InvalidParameter(format!(
            "quantization scale must be >= 1, got {scale}"
        )));
    }
    let limit = (COEFF_LIMIT / scale) as f64;
    let scalef = scale as f64;
    let mut total: i64 = 0;
    let q = energy.map_coeffs(|c| {
        if !c.is_finite() || c.abs() > limit {
            return Err(Error::ScaleTooLarge);
        }
        let v = (c * scalef).round() as i64;
        total = total
            .checked_add(v.abs())
            .filter(|t| *t < COEFF_LIMIT)
            .ok_or(Error::ScaleTooLarge)?;
        Ok(v)
    })?;
    Ok(q)
}

/// Roof-dual solution of an integer energy.
#[derive(Debug, Clone, PartialEq)]
pub struct QpboSolution {
    pub labeling: Labeling,
    /// Twice the roof-dual lower bound (exact; the bound may be half-integral).
    pub lower_bound_x2: i128,
}

impl QpboSolution {
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound_x2 as f64 / 2.0
    }
}

/// Builds the doubled network for an energy in normal form. Node `i` is the
/// literal `x_i`, node `n + i` its complement.
pub fn build_network(energy: &IntEnergy) -> FlowNetwork {
    let n = energy.num_vars();
    let mut net = FlowNetwork::with_capacity(2 * n, 2 * energy.pairs().len());
    for (i, u) in energy.unary().iter().enumerate() {
        let [t0, t1] = *u;
        if t1 > 0 {
            net.add_tweights(i, t1, 0);
            net.add_tweights(n + i, 0, t1);
        }
        if t0 > 0 {
            net.add_tweights(i, 0, t0);
            net.add_tweights(n + i, t0, 0);
        }
    }
    for p in energy.pairs() {
        let [a, b, c, d] = p.table;
        let (x, y) = (p.u, p.v);
        let (xn, yn) = (n + p.u, n + p.v);
        if b > 0 || c > 0 {
            net.add_edge(x, y, b, c);
            net.add_edge(yn, xn, b, c);
        }
        if a > 0 || d > 0 {
            net.add_edge(x, yn, a, d);
            net.add_edge(y, xn, a, d);
        }
    }
    net
}

/// Roof-dual minimization. The energy is brought to normal form first.
pub fn solve_qpbo(energy: &IntEnergy) -> QpboSolution {
    let normal = if energy.is_normal_form() {
        energy.clone()
    } else {
        energy.to_normal_form()
    };
    let n = normal.num_vars();
    let mut net = build_network(&normal);
    let flow = net.maxflow();
    let labels = (0..n)
        .map(|i| match (net.in_source_set(i), net.in_source_set(n + i)) {
            (true, false) => Some(false),
            (false, true) => Some(true),
            _ => None,
        })
        .collect();
    QpboSolution {
        labeling: Labeling(labels),
        lower_bound_x2: 2 * i128::from(normal.constant()) + i128::from(flow),
    }
}

/// Options for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub probing: bool,
    pub max_rounds: usize,
    pub fallback: FillPolicy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            probing: true,
            max_rounds: DEFAULT_MAX_ROUNDS,
            fallback: FillPolicy::Bg,
        }
    }
}

/// Outcome of [`minimize`] on an integer energy.
#[derive(Debug, Clone)]
pub struct IntSolve {
    /// Labeling after roof duality and probing, before any fallback.
    pub labeling: Labeling,
    /// Complete labeling handed back to callers.
    pub completed: Vec<bool>,
    pub lower_bound_x2: i128,
    pub energy_of_completion: i64,
    pub probes_run: usize,
    pub events: Vec<ProbeEvent>,
    pub runtime: Duration,
}

impl IntSolve {
    pub fn unlabeled_count(&self) -> usize {
        self.labeling.unlabeled_count()
    }
}

/// Roof duality, optional probing, then completion of whatever remains.
pub fn minimize(energy: &IntEnergy, options: &SolverOptions) -> IntSolve {
    let start = Instant::now();
    let normal = energy.to_normal_form();
    let first = solve_qpbo(&normal);
    let (labeling, completed, probes_run, events) = if options.probing && !first.labeling.is_complete() {
        let outcome = probe(&normal, &first.labeling, options.max_rounds);
        let completed = outcome.complete(options.fallback);
        (outcome.labeling, completed, outcome.probes_run, outcome.events)
    } else {
        let completed = complete_labeling(&first.labeling, options.fallback);
        (first.labeling, completed, 0, Vec::new())
    };
    let energy_of_completion = energy.evaluate_bits(&completed);
    IntSolve {
        labeling,
        completed,
        lower_bound_x2: first.lower_bound_x2,
        energy_of_completion,
        probes_run,
        events,
        runtime: start.elapsed(),
    }
}

/// Solver summary in energy units.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub labeling: Labeling,
    pub unlabeled_count: usize,
    pub lower_bound: f64,
    pub energy_of_completion: f64,
    pub probes_run: usize,
    pub runtime_ms: f64,
}

impl SolveReport {
    pub fn from_int(solve: &IntSolve, scale: i64) -> Self {
        let s = scale as f64;
        SolveReport {
            labeling: solve.labeling.clone(),
            unlabeled_count: solve.unlabeled_count(),
            lower_bound: solve.lower_bound_x2 as f64 / (2.0 * s),
            energy_of_completion: solve.energy_of_completion as f64 / s,
            probes_run: solve.probes_run,
            runtime_ms: solve.runtime.as_secs_f64() * 1e3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_variable_submodular() {
        let mut e = IntEnergy::new(2);
        e.add_unary(0, 0, 5);
        e.add_unary(1, 3, 0);
        e.add_pairwise(0, 1, [0, 1, 1, 0]);
        let sol = solve_qpbo(&e);
        assert_eq!(sol.labeling, Labeling::from_bits(&[false, true]));
        assert_eq!(e.evaluate(&sol.labeling).unwrap(), 1);
        assert_eq!(sol.lower_bound_x2, 2);
    }

    #[test]
    fn zero_energy_is_all_unlabeled() {
        let mut e = IntEnergy::new(4);
        e.add_pairwise(0, 1, [0, 0, 0, 0]);
        let sol = solve_qpbo(&e);
        assert_eq!(sol.labeling.unlabeled_count(), 4);
        assert_eq!(sol.lower_bound_x2, 0);
    }

    #[test]
    fn strong_unaries_label_everything() {
        let mut e = IntEnergy::new(5);
        for i in 0..5 {
            e.add_unary(i, 1, 0);
        }
        let sol = solve_qpbo(&e);
        assert_eq!(sol.labeling, Labeling::from_bits(&[true; 5]));
    }

    #[test]
    fn frustrated_triangle_stays_unlabeled() {
        // three mutually repelling variables: every table prefers disagreement
        let mut e = IntEnergy::new(3);
        for (u, v) in [(0, 1), (1, 2), (0, 2)] {
            e.add_pairwise(u, v, [2, 0, 0, 2]);
        }
        let sol = solve_qpbo(&e);
        assert_eq!(sol.labeling.unlabeled_count(), 3);
        // the relaxation is half-integral with value 0, optimum is 2
        assert_eq!(sol.lower_bound_x2, 0);
    }

    #[test]
    fn quantize_examples() {
        let mut e = QpbEnergy::new(1);
        e.add_unary(0, 0.5, std::f64::consts::PI.powi(2) / 2.0);
        let q = quantize(&e, DEFAULT_SCALE).unwrap();
        assert_eq!(q.unary()[0], [500_000, 4_934_802]);

        let mut big = QpbEnergy::new(1);
        big.add_unary(0, (1u64 << 62) as f64 / 1e6 * 1.01, 0.0);
        assert!(matches!(quantize(&big, DEFAULT_SCALE), Err(Error::ScaleTooLarge)));
        assert!(quantize(&e, 0).is_err());
    }

    #[test]
    fn completion_policies() {
        let l = Labeling::from_options(vec![Some(true), None, Some(false), None]);
        assert_eq!(complete_labeling(&l, FillPolicy::Bg), vec![true, false, false, false]);
        assert_eq!(complete_labeling(&l, FillPolicy::Fg), vec![true, true, false, true]);
        let full = Labeling::from_bits(&[true, false]);
        assert_eq!(complete_labeling(&full, FillPolicy::Fg), vec![true, false]);
        assert_eq!(
            complete_labeling(&Labeling::unlabeled(3), FillPolicy::Bg),
            vec![false; 3]
        );
    }

    #[test]
    fn network_is_symmetric() {
        let mut e = IntEnergy::new(3);
        e.add_unary(0, 0, 4);
        e.add_unary(2, 3, 0);
        e.add_pairwise(0, 1, [0, 2, 5, 0]);
        e.add_pairwise(1, 2, [3, 0, 0, 1]);
        let e = e.to_normal_form();
        let net = build_network(&e);
        let n = 3;
        let swap = |i: usize| if i < n { i + n } else { i - n };
        let mut arcs: Vec<(usize, usize, i64)> = net.arcs().filter(|a| a.2 > 0).collect();
        let mut mirrored: Vec<(usize, usize, i64)> =
            arcs.iter().map(|&(a, b, c)| (swap(b), swap(a), c)).collect();
        arcs.sort();
        mirrored.sort();
        assert_eq!(arcs, mirrored);
        for i in 0..n {
            assert_eq!(net.terminal_residual(i), -net.terminal_residual(n + i));
        }
    }
}
