//! Boykov-Kolmogorov augmenting-path max-flow with integer capacities.
//!
//! Terminal arcs are stored as a signed residual per node (`tr_cap > 0` is
//! residual from the source, `< 0` residual to the sink). Arcs come in
//! sister pairs `2k`/`2k+1`. The minimum cut reported is the set of nodes
//! reachable from the source in the final residual graph.

use std::collections::VecDeque;

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const INFINITE_D: u32 = u32::MAX;

/// Endpoint of an arc given to [`FlowNetwork::add_arc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Source,
    Sink,
    Node(usize),
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    first: Vec<u32>,
    tr_cap: Vec<i64>,
    head: Vec<u32>,
    next: Vec<u32>,
    r_cap: Vec<i64>,
    /// Flow already routed through source->node->sink shortcuts and direct
    /// source->sink arcs.
    base_flow: i64,
    /// Flow found by augmenting paths, summed over all `maxflow` calls.
    grown: i64,
    flow: i64,
    source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            first: vec![NONE; nodes],
            tr_cap: vec![0; nodes],
            head: Vec::new(),
            next: Vec::new(),
            r_cap: Vec::new(),
            base_flow: 0,
            grown: 0,
            flow: 0,
            source_side: Vec::new(),
        }
    }

    pub fn with_capacity(nodes: usize, arc_pairs: usize) -> Self {
        let mut net = Self::new(nodes);
        net.head.reserve(2 * arc_pairs);
        net.next.reserve(2 * arc_pairs);
        net.r_cap.reserve(2 * arc_pairs);
        net
    }

    pub fn num_nodes(&self) -> usize {
        self.first.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.head.len()
    }

    /// Adds `i -> j` with capacity `cap` and `j -> i` with `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: i64, rev_cap: i64) {
        debug_assert!(cap >= 0 && rev_cap >= 0, "negative capacity");
        debug_assert!(i != j, "self loop");
        let a = self.head.len() as u32;
        self.head.push(j as u32);
        self.next.push(self.first[i]);
        self.r_cap.push(cap);
        self.first[i] = a;
        self.head.push(i as u32);
        self.next.push(self.first[j]);
        self.r_cap.push(rev_cap);
        self.first[j] = a + 1;
    }

    /// Adds source->i with `cap_source` and i->sink with `cap_sink`.
    pub fn add_tweights(&mut self, i: usize, cap_source: i64, cap_sink: i64) {
        debug_assert!(cap_source >= 0 && cap_sink >= 0, "negative capacity");
        let (mut cs, mut ck) = (cap_source, cap_sink);
        let delta = self.tr_cap[i];
        if delta > 0 {
            cs += delta;
        } else {
            ck -= delta;
        }
        self.base_flow += cs.min(ck);
        self.tr_cap[i] = cs - ck;
    }

    /// General arc insertion including terminals.
    pub fn add_arc(&mut self, from: Terminal, to: Terminal, cap: i64) {
        match (from, to) {
            (Terminal::Source, Terminal::Sink) => self.base_flow += cap,
            (Terminal::Source, Terminal::Node(j)) => self.add_tweights(j, cap, 0),
            (Terminal::Node(i), Terminal::Sink) => self.add_tweights(i, 0, cap),
            (Terminal::Node(i), Terminal::Node(j)) if i != j => self.add_edge(i, j, cap, 0),
            // arcs into the source, out of the sink, or self loops never carry flow
            _ => {}
        }
    }

    /// Computes the maximum flow; afterwards [`Self::in_source_set`] reports
    /// the source-reachable side of a minimum cut. Capacities may be raised
    /// after a call and `maxflow` called again; it resumes from the current
    /// residual network.
    pub fn maxflow(&mut self) -> i64 {
        self.grown += Bk::new(self).run();
        self.flow = self.base_flow + self.grown;
        self.source_side = self.residual_reachable();
        self.flow
    }

    pub fn flow(&self) -> i64 {
        self.flow
    }

    pub fn in_source_set(&self, i: usize) -> bool {
        self.source_side[i]
    }

    /// Residual capacity of every arc and terminal link, for inspection.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        (0..self.head.len()).map(move |a| (self.head[a ^ 1] as usize, self.head[a] as usize, self.r_cap[a]))
    }

    pub fn terminal_residual(&self, i: usize) -> i64 {
        self.tr_cap[i]
    }

    fn residual_reachable(&self) -> Vec<bool> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for i in 0..n {
            if self.tr_cap[i] > 0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            let mut a = self.first[i];
            while a != NONE {
                let j = self.head[a as usize] as usize;
                if self.r_cap[a as usize] > 0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
                a = self.next[a as usize];
            }
        }
        seen
    }
}

/// Search-tree state of one max-flow run.
struct Bk<'a> {
    net: &'a mut FlowNetwork,
    parent: Vec<u32>,
    is_sink: Vec<bool>,
    ts: Vec<u32>,
    dist: Vec<u32>,
    in_queue: Vec<bool>,
    active: VecDeque<u32>,
    orphans: VecDeque<u32>,
    time: u32,
}

impl<'a> Bk<'a> {
    fn new(net: &'a mut FlowNetwork) -> Self {
        let n = net.num_nodes();
        Bk {
            net,
            parent: vec![NONE; n],
            is_sink: vec![false; n],
            ts: vec![0; n],
            dist: vec![0; n],
            in_queue: vec![false; n],
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
        }
    }

    #[inline]
    fn set_active(&mut self, i: usize) {
        if !self.in_queue[i] {
            self.in_queue[i] = true;
            self.active.push_back(i as u32);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.active.pop_front() {
            let i = i as usize;
            self.in_queue[i] = false;
            if self.parent[i] != NONE {
                return Some(i);
            }
        }
        None
    }

    fn run(mut self) -> i64 {
        let n = self.net.num_nodes();
        for i in 0..n {
            let t = self.net.tr_cap[i];
            if t != 0 {
                self.is_sink[i] = t < 0;
                self.parent[i] = TERMINAL;
                self.dist[i] = 1;
                self.set_active(i);
            }
        }
        let mut flow = 0i64;
        let mut current: Option<usize> = None;
        loop {
            let i = match current.take() {
                Some(i) if self.parent[i] != NONE => i,
                _ => match self.next_active() {
                    Some(i) => i,
                    None => break,
                },
            };
            let middle = self.grow(i);
            self.time += 1;
            if let Some(a) = middle {
                current = Some(i);
                flow += self.augment(a);
                self.adopt_orphans();
            }
        }
        flow
    }

    /// Expands the tree from `i`; returns an arc from the source tree into
    /// the sink tree if the trees touch.
    fn grow(&mut self, i: usize) -> Option<usize> {
        let net = &*self.net;
        let mut a = net.first[i];
        if !self.is_sink[i] {
            while a != NONE {
                let au = a as usize;
                if net.r_cap[au] > 0 {
                    let j = net.head[au] as usize;
                    if self.parent[j] == NONE {
                        self.is_sink[j] = false;
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                        if !self.in_queue[j] {
                            self.in_queue[j] = true;
                            self.active.push_back(j as u32);
                        }
                    } else if self.is_sink[j] {
                        return Some(au);
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
                a = net.next[au];
            }
        } else {
            while a != NONE {
                let au = a as usize;
                if net.r_cap[au ^ 1] > 0 {
                    let j = net.head[au] as usize;
                    if self.parent[j] == NONE {
                        self.is_sink[j] = true;
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                        if !self.in_queue[j] {
                            self.in_queue[j] = true;
                            self.active.push_back(j as u32);
                        }
                    } else if !self.is_sink[j] {
                        return Some(au ^ 1);
                    } else if self.ts[j] <= self.ts[i] && self.dist[j] > self.dist[i] {
                        self.parent[j] = a ^ 1;
                        self.ts[j] = self.ts[i];
                        self.dist[j] = self.dist[i] + 1;
                    }
                }
                a = net.next[au];
            }
        }
        None
    }

    fn augment(&mut self, middle: usize) -> i64 {
        let net = &mut *self.net;
        let mut bottleneck = net.r_cap[middle];
        // source side
        let mut i = net.head[middle ^ 1] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(net.r_cap[(a ^ 1) as usize]);
            i = net.head[a as usize] as usize;
        }
        bottleneck = bottleneck.min(net.tr_cap[i]);
        // sink side
        let mut i = net.head[middle] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(net.r_cap[a as usize]);
            i = net.head[a as usize] as usize;
        }
        bottleneck = bottleneck.min(-net.tr_cap[i]);

        net.r_cap[middle ^ 1] += bottleneck;
        net.r_cap[middle] -= bottleneck;

        let mut i = net.head[middle ^ 1] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let au = a as usize;
            net.r_cap[au] += bottleneck;
            net.r_cap[au ^ 1] -= bottleneck;
            if net.r_cap[au ^ 1] == 0 {
                self.parent[i] = ORPHAN;
                self.orphans.push_front(i as u32);
            }
            i = net.head[au] as usize;
        }
        net.tr_cap[i] -= bottleneck;
        if net.tr_cap[i] == 0 {
            self.parent[i] = ORPHAN;
            self.orphans.push_front(i as u32);
        }

        let mut i = net.head[middle] as usize;
        loop {
            let a = self.parent[i];
            if a == TERMINAL {
                break;
            }
            let au = a as usize;
            net.r_cap[au ^ 1] += bottleneck;
            net.r_cap[au] -= bottleneck;
            if net.r_cap[au] == 0 {
                self.parent[i] = ORPHAN;
                self.orphans.push_front(i as u32);
            }
            i = net.head[au] as usize;
        }
        net.tr_cap[i] += bottleneck;
        if net.tr_cap[i] == 0 {
            self.parent[i] = ORPHAN;
            self.orphans.push_front(i as u32);
        }
        bottleneck
    }

    fn adopt_orphans(&mut self) {
        while let Some(i) = self.orphans.pop_front() {
            self.adopt(i as usize);
        }
    }

    /// Distance of `j` to its terminal through valid parents, marking the
    /// visited path; `INFINITE_D` if the chain ends at an orphan.
    fn origin_distance(&mut self, start: usize) -> u32 {
        let net = &*self.net;
        let mut j = start;
        let mut d: u32 = 0;
        loop {
            if self.ts[j] == self.time {
                d += self.dist[j];
                break;
            }
            let a = self.parent[j];
            d += 1;
            if a == TERMINAL {
                self.ts[j] = self.time;
                self.dist[j] = 1;
                break;
            }
            if a == ORPHAN {
                return INFINITE_D;
            }
            j = net.head[a as usize] as usize;
        }
        // mark the path so later searches stop early
        let mut j = start;
        let mut dd = d;
        while self.ts[j] != self.time {
            self.ts[j] = self.time;
            self.dist[j] = dd;
            dd -= 1;
            j = net.head[self.parent[j] as usize] as usize;
        }
        d
    }

    fn adopt(&mut self, i: usize) {
        let sink_tree = self.is_sink[i];
        let mut best_arc = NONE;
        let mut best_d = INFINITE_D;
        let mut a = self.net.first[i];
        while a != NONE {
            let au = a as usize;
            // a candidate parent j must be able to push flow toward i (source
            // tree) or receive flow from i (sink tree)
            let cap = if sink_tree {
                self.net.r_cap[au]
            } else {
                self.net.r_cap[au ^ 1]
            };
            if cap > 0 {
                let j = self.net.head[au] as usize;
                if self.is_sink[j] == sink_tree && self.parent[j] != NONE {
                    let d = self.origin_distance(j);
                    if d < best_d {
                        best_d = d;
                        best_arc = a;
                    }
                }
            }
            a = self.net.next[au];
        }
        if best_arc != NONE {
            self.parent[i] = best_arc;
            self.ts[i] = self.time;
            self.dist[i] = best_d + 1;
            return;
        }
        // no valid parent: i becomes free
        let mut a = self.net.first[i];
        while a != NONE {
            let au = a as usize;
            let j = self.net.head[au] as usize;
            let pj = self.parent[j];
            if self.is_sink[j] == sink_tree && pj != NONE {
                let cap = if sink_tree {
                    self.net.r_cap[au]
                } else {
                    self.net.r_cap[au ^ 1]
                };
                if cap > 0 {
                    self.set_active(j);
                }
                if pj != TERMINAL && pj != ORPHAN && self.net.head[pj as usize] as usize == i {
                    self.parent[j] = ORPHAN;
                    self.orphans.push_back(j as u32);
                }
            }
            a = self.net.next[au];
        }
        self.parent[i] = NONE;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_source_sink_arc() {
        let mut net = FlowNetwork::new(0);
        net.add_arc(Terminal::Source, Terminal::Sink, 7);
        assert_eq!(net.maxflow(), 7);
    }

    #[test]
    fn two_disjoint_paths() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(Terminal::Source, Terminal::Node(0), 3);
        net.add_arc(Terminal::Node(0), Terminal::Sink, 4);
        net.add_arc(Terminal::Source, Terminal::Node(1), 5);
        net.add_arc(Terminal::Node(1), Terminal::Sink, 2);
        assert_eq!(net.maxflow(), 5);
    }

    #[test]
    fn zero_capacity_network() {
        let mut net = FlowNetwork::new(3);
        net.add_edge(0, 1, 0, 0);
        net.add_edge(1, 2, 0, 0);
        assert_eq!(net.maxflow(), 0);
        assert!((0..3).all(|i| !net.in_source_set(i)));
    }

    #[test]
    fn chain_bottleneck_and_cut() {
        // S -5-> 0 -2-> 1 -9-> T, plus 0 -1-> 2 -1-> T
        let mut net = FlowNetwork::new(3);
        net.add_tweights(0, 5, 0);
        net.add_edge(0, 1, 2, 0);
        net.add_tweights(1, 0, 9);
        net.add_edge(0, 2, 1, 0);
        net.add_tweights(2, 0, 1);
        assert_eq!(net.maxflow(), 3);
        assert!(net.in_source_set(0));
        assert!(!net.in_source_set(1));
        assert!(!net.in_source_set(2));
    }

    #[test]
    fn reverse_capacity_is_used() {
        // S -> 1 -> 0 -> T only through the reverse capacity of edge (0, 1)
        let mut net = FlowNetwork::new(2);
        net.add_tweights(1, 4, 0);
        net.add_tweights(0, 0, 4);
        net.add_edge(0, 1, 0, 3);
        assert_eq!(net.maxflow(), 3);
    }

    #[test]
    fn resumed_flow_matches_fresh_solve() {
        let build = |extra: i64| {
            let mut net = FlowNetwork::new(3);
            net.add_tweights(0, 5, 0);
            net.add_edge(0, 1, 2, 0);
            net.add_tweights(1, 0, 9);
            net.add_edge(0, 2, 4, 0);
            net.add_tweights(2, extra, 1);
            net
        };
        let mut resumed = build(0);
        assert_eq!(resumed.maxflow(), 3);
        resumed.add_tweights(2, 0, 6);
        resumed.add_tweights(1, 3, 0);
        let mut fresh = build(0);
        fresh.add_tweights(2, 0, 6);
        fresh.add_tweights(1, 3, 0);
        assert_eq!(resumed.maxflow(), fresh.maxflow());
        assert_eq!(resumed.flow(), 8);
    }
}
