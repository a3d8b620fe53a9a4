//! Probing (QPBOP): condition each unlabeled variable on both values, solve
//! the roof dual of each branch and combine the two partial labelings.
//!
//! Deductions from probing variable `v`:
//! - `u` labeled `c` in both branches: fix `u = c`;
//! - `u` labeled `a` in branch 0 and `1 - a` in branch 1: contract `u` to `v`
//!   (or to its negation);
//! - a branch whose lower bound is no better than a complete labeling found
//!   in the other branch can be discarded, fixing `v` and everything the
//!   surviving branch labeled.
//!
//! Each rule preserves at least one global minimizer, so the final partial
//! labeling (with contractions) is consistent with a global optimum.

use rayon::prelude::*;

use super::{build_network, FillPolicy, FlowNetwork, Labeling};
use crate::energy::IntEnergy;

/// Default probing work per component, in variables of conditioned problems
/// solved.
pub const DEFAULT_PROBE_BUDGET: usize = 4_000_000;

/// One deduction made while probing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeEvent {
    /// `var` fixed to `value`, while probing `probe` (or by re-running roof
    /// duality on the reduced energy when `probe` is `None`).
    Fixed {
        var: usize,
        value: bool,
        probe: Option<usize>,
    },
    /// `var` is tied to `to`: `x_var = x_to` (or `1 - x_to` when negated).
    Contracted {
        var: usize,
        to: usize,
        negated: bool,
    },
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub labeling: Labeling,
    pub events: Vec<ProbeEvent>,
    pub probes_run: usize,
    pub rounds: usize,
    state: State,
}

impl ProbeOutcome {
    /// Completes the labeling: free representatives take the policy value
    /// and contracted variables follow their representative.
    pub fn complete(&self, policy: FillPolicy) -> Vec<bool> {
        (0..self.labeling.len())
            .map(|u| match self.state.resolve(u) {
                Resolved::Fixed(b) => b,
                Resolved::Var(_, neg) => policy.value() ^ neg,
            })
            .collect()
    }

    /// `(var, representative, negated)` for every contracted variable whose
    /// representative is still unlabeled.
    pub fn contractions(&self) -> Vec<(usize, usize, bool)> {
        (0..self.labeling.len())
            .filter_map(|u| match self.state.resolve(u) {
                Resolved::Var(r, neg) if r != u => Some((u, r, neg)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolved {
    Fixed(bool),
    /// Representative variable and whether this variable is its negation.
    Var(usize, bool),
}

#[derive(Debug, Clone)]
struct State {
    fixed: Vec<Option<bool>>,
    alias: Vec<Option<(usize, bool)>>,
}

impl State {
    fn new(n: usize) -> Self {
        State {
            fixed: vec![None; n],
            alias: vec![None; n],
        }
    }

    fn resolve(&self, mut u: usize) -> Resolved {
        let mut neg = false;
        while let Some((r, n)) = self.alias[u] {
            neg ^= n;
            u = r;
        }
        match self.fixed[u] {
            Some(b) => Resolved::Fixed(b ^ neg),
            None => Resolved::Var(u, neg),
        }
    }

    fn is_free_root(&self, u: usize) -> bool {
        self.alias[u].is_none() && self.fixed[u].is_none()
    }

    fn labeling(&self) -> Labeling {
        Labeling::from_options(
            (0..self.fixed.len())
                .map(|u| match self.resolve(u) {
                    Resolved::Fixed(b) => Some(b),
                    Resolved::Var(..) => None,
                })
                .collect(),
        )
    }

    fn apply(&mut self, event: &ProbeEvent) {
        match *event {
            ProbeEvent::Fixed { var, value, .. } => self.fixed[var] = Some(value),
            ProbeEvent::Contracted { var, to, negated } => self.alias[var] = Some((to, negated)),
        }
    }
}

/// Energy over the free representatives of `state`, with `extra` fixed on
/// top. `vars[k]` is the original index of reduced variable `k`.
struct Reduced {
    energy: IntEnergy,
    vars: Vec<usize>,
}

fn reduce(energy: &IntEnergy, state: &State, extra: Option<(usize, bool)>) -> Reduced {
    let n = energy.num_vars();
    let resolve = |u: usize| -> Resolved {
        match state.resolve(u) {
            Resolved::Var(r, neg) => match extra {
                Some((v, b)) if v == r => Resolved::Fixed(b ^ neg),
                _ => Resolved::Var(r, neg),
            },
            fixed => fixed,
        }
    };
    let mut local = vec![usize::MAX; n];
    let mut vars = Vec::new();
    for u in 0..n {
        if state.is_free_root(u) && extra.is_none_or(|(v, _)| v != u) {
            local[u] = vars.len();
            vars.push(u);
        }
    }
    let mut out = IntEnergy::new(vars.len());
    out.add_constant(energy.constant());
    for (u, th) in energy.unary().iter().enumerate() {
        match resolve(u) {
            Resolved::Fixed(b) => out.add_constant(th[usize::from(b)]),
            Resolved::Var(r, neg) => {
                let (t0, t1) = if neg { (th[1], th[0]) } else { (th[0], th[1]) };
                out.add_unary(local[r], t0, t1);
            }
        }
    }
    for p in energy.pairs() {
        let t = |a: bool, b: bool| p.table[(usize::from(a) << 1) | usize::from(b)];
        match (resolve(p.u), resolve(p.v)) {
            (Resolved::Fixed(a), Resolved::Fixed(b)) => out.add_constant(t(a, b)),
            (Resolved::Fixed(a), Resolved::Var(r, nb)) => {
                out.add_unary(local[r], t(a, nb), t(a, !nb));
            }
            (Resolved::Var(r, na), Resolved::Fixed(b)) => {
                out.add_unary(local[r], t(na, b), t(!na, b));
            }
            (Resolved::Var(ru, na), Resolved::Var(rv, nb)) => {
                let table = [
                    t(na, nb),
                    t(na, !nb),
                    t(!na, nb),
                    t(!na, !nb),
                ];
                out.add_pairwise(local[ru], local[rv], table);
            }
        }
    }
    Reduced {
        energy: out.to_normal_form(),
        vars,
    }
}

/// Connected components of the interaction graph (pairs with a nonzero
/// table), in order of their smallest variable.
fn components(energy: &IntEnergy) -> Vec<Vec<usize>> {
    let n = energy.num_vars();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for p in energy.pairs() {
        if p.table.iter().any(|&c| c != 0) {
            let (a, b) = (find(&mut parent, p.u), find(&mut parent, p.v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for u in 0..n {
        let r = find(&mut parent, u);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Vec::new());
        }
        out[slot[r]].push(u);
    }
    out
}

/// Restriction of a normal-form energy to one interaction component.
fn sub_energy(energy: &IntEnergy, members: &[usize]) -> IntEnergy {
    let mut local = vec![usize::MAX; energy.num_vars()];
    let mut out = IntEnergy::new(members.len());
    for (k, &u) in members.iter().enumerate() {
        local[u] = k;
        let th = energy.unary()[u];
        out.add_unary(k, th[0], th[1]);
    }
    for p in energy.pairs() {
        let (lu, lv) = (local[p.u], local[p.v]);
        if lu != usize::MAX && lv != usize::MAX && p.table.iter().any(|&c| c != 0) {
            out.add_pairwise(lu, lv, p.table);
        }
    }
    out
}

struct ComponentResult {
    events: Vec<ProbeEvent>,
    probes: usize,
    rounds: usize,
}

/// Branch of a probe: roof-dual labels on the conditioned energy plus bounds.
struct Branch {
    labels: Vec<Option<bool>>, // indexed by original (component) variable
    lower_x2: i128,
    upper: i64,
}

/// Reduced energy of the current probing state with its roof dual already
/// solved. Branches reuse the solved residual network: conditioning on
/// `x_v = b` is a terminal clamp too heavy for any minimum cut to sever.
struct Base {
    red: Reduced,
    local: Vec<usize>,
    net: FlowNetwork,
    labels: Vec<Option<bool>>,
    clamp: Option<i64>,
}

impl Base {
    fn new(energy: &IntEnergy, state: &State) -> Self {
        let red = reduce(energy, state, None);
        let mut local = vec![usize::MAX; energy.num_vars()];
        for (k, &u) in red.vars.iter().enumerate() {
            local[u] = k;
        }
        let mut net = build_network(&red.energy);
        net.maxflow();
        let k = red.vars.len();
        let labels = (0..k).map(|i| literal_label(&net, k, i)).collect();
        // every literal table entry appears on two arcs and a normal-form
        // table sums to at most twice its maximum, so no cut exceeds 4x range
        let range = i128::from(red.energy.total_range());
        let clamp = (range < i128::from(i64::MAX / 16)).then(|| 4 * range as i64 + 1);
        Base {
            red,
            local,
            net,
            labels,
            clamp,
        }
    }

    fn branch(&self, v: usize, value: bool) -> Option<Branch> {
        let k = self.red.vars.len();
        let lv = self.local[v];
        let m = self.clamp?;
        let mut net = self.net.clone();
        // forbid the other value of x_v
        if value {
            net.add_tweights(lv, 0, m);
            net.add_tweights(k + lv, m, 0);
        } else {
            net.add_tweights(lv, m, 0);
            net.add_tweights(k + lv, 0, m);
        }
        let flow = net.maxflow();
        let mut labels = vec![None; self.local.len()];
        let mut completion = vec![false; k];
        for (i, &u) in self.red.vars.iter().enumerate() {
            let l = literal_label(&net, k, i);
            labels[u] = l;
            completion[i] = l.unwrap_or(false);
        }
        if labels[v] != Some(value) {
            return None;
        }
        Some(Branch {
            labels,
            lower_x2: 2 * i128::from(self.red.energy.constant()) + i128::from(flow),
            upper: self.red.energy.evaluate_bits(&completion),
        })
    }
}

fn literal_label(net: &FlowNetwork, n: usize, i: usize) -> Option<bool> {
    match (net.in_source_set(i), net.in_source_set(n + i)) {
        (true, false) => Some(false),
        (false, true) => Some(true),
        _ => None,
    }
}

fn probe_component(energy: &IntEnergy, max_rounds: usize, budget: usize) -> ComponentResult {
    let m = energy.num_vars();
    let mut state = State::new(m);
    let mut events = Vec::new();
    let mut probes = 0;
    let mut rounds = 0;
    let mut spent = 0usize;
    let mut base = Base::new(energy, &state);
    'rounds: while rounds < max_rounds {
        rounds += 1;
        let mut changed = false;
        for v in 0..m {
            if !state.is_free_root(v) {
                continue;
            }
            spent = spent.saturating_add(2 * base.red.vars.len());
            if spent > budget {
                break 'rounds;
            }
            probes += 1;
            let (Some(b0), Some(b1)) = (base.branch(v, false), base.branch(v, true)) else {
                continue;
            };
            let mut found = Vec::new();
            // a branch that cannot beat the other one is dropped; everything
            // the survivor labeled is then persistent
            let survivor = if b1.lower_x2 >= 2 * i128::from(b0.upper) {
                Some(&b0)
            } else if b0.lower_x2 >= 2 * i128::from(b1.upper) {
                Some(&b1)
            } else {
                None
            };
            if let Some(b) = survivor {
                for u in 0..m {
                    if let (true, Some(value)) = (state.is_free_root(u), b.labels[u]) {
                        found.push(ProbeEvent::Fixed {
                            var: u,
                            value,
                            probe: Some(v),
                        });
                    }
                }
            } else {
                for u in 0..m {
                    if u == v || !state.is_free_root(u) {
                        continue;
                    }
                    match (b0.labels[u], b1.labels[u]) {
                        (Some(a), Some(b)) if a == b => found.push(ProbeEvent::Fixed {
                            var: u,
                            value: a,
                            probe: Some(v),
                        }),
                        (Some(a), Some(_)) => found.push(ProbeEvent::Contracted {
                            var: u,
                            to: v,
                            negated: a,
                        }),
                        _ => {}
                    }
                }
            }
            if found.is_empty() {
                continue;
            }
            changed = true;
            for e in &found {
                state.apply(e);
            }
            events.extend(found);
            // roof duality on what is left may now label more
            loop {
                base = Base::new(energy, &state);
                let fixed: Vec<ProbeEvent> = base
                    .red
                    .vars
                    .iter()
                    .zip(&base.labels)
                    .filter_map(|(&u, l)| {
                        l.map(|value| ProbeEvent::Fixed {
                            var: u,
                            value,
                            probe: None,
                        })
                    })
                    .collect();
                if fixed.is_empty() {
                    break;
                }
                for e in &fixed {
                    state.apply(e);
                }
                events.extend(fixed);
            }
        }
        if !changed || (0..m).all(|u| !state.is_free_root(u)) {
            break;
        }
    }
    ComponentResult {
        events,
        probes,
        rounds,
    }
}

/// Extends `current` (a roof-dual labeling of `energy`) by probing, for at
/// most `max_rounds` passes over the unlabeled variables of each
/// independent component, within the default work budget.
pub fn probe(energy: &IntEnergy, current: &Labeling, max_rounds: usize) -> ProbeOutcome {
    probe_with_budget(energy, current, max_rounds, DEFAULT_PROBE_BUDGET)
}

/// [`probe`] with an explicit budget: each component stops probing once the
/// summed size of the conditioned problems it solved would exceed `budget`.
pub fn probe_with_budget(
    energy: &IntEnergy,
    current: &Labeling,
    max_rounds: usize,
    budget: usize,
) -> ProbeOutcome {
    let n = energy.num_vars();
    assert_eq!(current.len(), n, "labeling length");
    let mut state = State::new(n);
    state.fixed.clone_from_slice(current.values());

    let reduced = reduce(energy, &state, None);
    let comps = components(&reduced.energy);
    let results: Vec<ComponentResult> = comps
        .par_iter()
        .map(|comp| probe_component(&sub_energy(&reduced.energy, comp), max_rounds, budget))
        .collect();

    let mut events = Vec::new();
    let mut probes_run = 0;
    let mut rounds = 0;
    for (comp, res) in comps.iter().zip(results) {
        probes_run += res.probes;
        rounds = rounds.max(res.rounds);
        let global = |k: usize| reduced.vars[comp[k]];
        for e in res.events {
            let e = match e {
                ProbeEvent::Fixed { var, value, probe } => ProbeEvent::Fixed {
                    var: global(var),
                    value,
                    probe: probe.map(global),
                },
                ProbeEvent::Contracted { var, to, negated } => ProbeEvent::Contracted {
                    var: global(var),
                    to: global(to),
                    negated,
                },
            };
            state.apply(&e);
            events.push(e);
        }
    }
    ProbeOutcome {
        labeling: state.labeling(),
        events,
        probes_run,
        rounds,
        state,
    }
}
