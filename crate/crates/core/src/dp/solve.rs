//! Configuration dynamic program over the binary split tree.
//!
//! Bottom-up, every node collects the distinct vectors of portal-to-nearest
//! inside-center distances (`ell`) that some set of at most `k` inside centers
//! realizes. Top-down, for a vector of portal-to-nearest outside-center
//! distances (`s`) the node returns, per `ell` state and per number of opened
//! centers, the cheapest tilde-cost of the clients it contains. Tables are
//! memoized on `s`.
//!
//! In exact mode vectors are keyed by their bit patterns. In quantized mode
//! `ell` is rounded down and `s` rounded up to multiples of `eps * D` (`D` the
//! node diameter), with geometric buckets past `D / eps + 1`, the number of
//! states per node is capped, and client-only subtrees whose outside centers
//! are all at least `D / eps` away are evaluated as if every client sat at the
//! box center.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use super::binary::BinaryTree;
use super::quantize::Scale;
use crate::baseline::binomial;
use crate::error::{Error, Result};
use crate::geometry::{dist, CompensatedSum};
use crate::model::{Instance, Objective, Solution};

const INF: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpMode {
    /// Exact for small candidate sets, quantized otherwise.
    Auto,
    Exact,
    Quantized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpParams {
    pub eps: f64,
    pub mode: DpMode,
    /// Quantized mode: inside states kept per center count.
    pub max_inside_per_count: usize,
    /// Quantized mode: memoized outside vectors per node.
    pub max_outside_states: usize,
    /// Recompute the returned solution's portal-respecting cost exactly.
    /// Without it `tilde_cost_pr` reports the program's own value.
    pub recompute: bool,
}

impl DpParams {
    pub fn new(eps: f64) -> Self {
        DpParams {
            eps,
            mode: DpMode::Auto,
            max_inside_per_count: 3,
            max_outside_states: 4,
            recompute: true,
        }
    }

    pub fn exact(eps: f64) -> Self {
        DpParams {
            mode: DpMode::Exact,
            ..DpParams::new(eps)
        }
    }

    /// Whether `Auto` resolves to the exact program for this instance size.
    pub fn resolves_exact(&self, n: usize, m: usize, k: usize) -> bool {
        match self.mode {
            DpMode::Exact => true,
            DpMode::Quantized => false,
            DpMode::Auto => {
                let subsets: u128 = (0..=k.min(m)).map(|c| binomial(m, c)).sum();
                n <= 64 && subsets <= 4096
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DpStats {
    pub nodes_visited: usize,
    pub inside_states: usize,
    pub outside_states: usize,
    /// Largest `inside states * outside states * (k + 1)` over all nodes.
    pub max_node_entries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpOutcome {
    pub solution: Solution,
    /// Portal-respecting tilde-cost of `solution`, recomputed exactly.
    pub tilde_cost_pr: f64,
    /// Optimum of the program itself; equals `tilde_cost_pr` up to rounding in
    /// exact mode.
    pub dp_value: f64,
    /// Cheapest root cost per number of opened centers.
    pub root_costs: Vec<f64>,
    pub exact: bool,
    pub stats: DpStats,
    trace: Vec<(usize, usize, usize, f64)>,
}

impl DpOutcome {
    /// Fewest centers whose cheapest cost fits within `bucket`.
    pub fn min_centers_within(&self, bucket: f64) -> Option<usize> {
        self.root_costs.iter().position(|&c| c <= bucket)
    }

    /// One line per visited node: `node inside-states outside-states best`.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for (node, inside, outside, best) in &self.trace {
            let _ = writeln!(out, "{node} {inside} {outside} {best}");
        }
        out
    }
}

struct State {
    ell: Vec<f64>,
    count: usize,
}

struct Inside {
    states: Vec<State>,
    /// `(ia, ib, iv)`; `ib` is unused for single-child nodes.
    pairs: Vec<(u32, u32, u32)>,
    /// Per state of the second child: distances it offers the first child.
    x_to_a: Vec<Vec<f64>>,
    /// Per state of the first child: distances it offers the second child.
    x_to_b: Vec<Vec<f64>>,
}

struct Entry {
    key: Vec<u64>,
    s: Vec<f64>,
    /// `states * (k + 1)` costs.
    table: Vec<f64>,
}

#[derive(Default)]
struct Memo {
    index: HashMap<Vec<u64>, usize>,
    entries: Vec<Entry>,
}

#[derive(Clone, Copy, Default)]
struct Agg {
    clients: f64,
    sum: f64,
    sum_sq: f64,
    has_client: bool,
    /// Lowest candidate index in a leaf.
    candidate: Option<usize>,
    has_candidate: bool,
}

struct Dp<'a> {
    bt: &'a BinaryTree,
    z: Objective,
    k: usize,
    n: usize,
    exact: bool,
    eps: f64,
    params: DpParams,
    offsets: &'a [f64],
    agg: Vec<Agg>,
    portals: Vec<Option<Rc<Vec<f64>>>>,
    mats: HashMap<(usize, usize), Rc<Vec<f64>>>,
    inside: Vec<Option<Inside>>,
    memo: Vec<Memo>,
}

/// Runs the program on a binary tree whose points are the `n` relocated
/// clients followed by the candidates of `instance`.
pub fn solve_dp(bt: &BinaryTree, instance: &Instance, offsets: &[f64], params: &DpParams) -> Result<DpOutcome> {
    let n = instance.n();
    if offsets.len() != n || bt.points().len() != n + instance.m() {
        return Err(Error::InvalidInstance("tree points do not match the instance".into()));
    }
    if !(params.eps > 0.0 && params.eps < 1.0) {
        return Err(Error::param("eps must lie in (0, 1)"));
    }
    let k = instance.k();
    let exact = params.resolves_exact(n, instance.m(), k);
    let mut dp = Dp {
        bt,
        z: instance.objective(),
        k,
        n,
        exact,
        eps: params.eps,
        params: *params,
        offsets,
        agg: vec![Agg::default(); bt.len()],
        portals: vec![None; bt.len()],
        mats: HashMap::new(),
        inside: (0..bt.len()).map(|_| None).collect(),
        memo: (0..bt.len()).map(|_| Memo::default()).collect(),
    };
    dp.aggregate();
    dp.build_inside();
    let root = bt.root();
    let top = vec![INF; dp.portals(root).len() / bt.dim()];
    let e = dp.query(root, top);
    let states = dp.state_count(root);
    let width = k + 1;
    let mut best = (INF, usize::MAX, usize::MAX);
    let mut root_costs = vec![INF; width];
    {
        let table = &dp.memo[root].entries[e].table;
        for c in 0..width {
            for iv in 0..states {
                let v = table[iv * width + c];
                root_costs[c] = root_costs[c].min(v);
                if v < best.0 {
                    best = (v, iv, c);
                }
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Infeasible("no configuration with at most k centers".into()));
    }
    let mut centers = Vec::new();
    dp.backtrack(root, e, best.1, best.2, &mut centers);
    let solution = Solution::new(centers);
    let tilde_cost_pr = if params.recompute {
        portal_tilde_cost(bt, instance, offsets, &solution)?
    } else {
        best.0
    };
    let stats = dp.stats();
    let trace = dp.trace_rows();
    Ok(DpOutcome {
        solution,
        tilde_cost_pr,
        dp_value: best.0,
        root_costs,
        exact,
        stats,
        trace,
    })
}

/// `out[r] = min_c mat[r][c] + src[c]`.
fn relay_rows(mat: &[f64], rows: usize, cols: usize, src: &[f64]) -> Vec<f64> {
    let mut out = vec![INF; rows];
    if src.iter().all(|v| v.is_infinite()) {
        return out;
    }
    for (r, o) in out.iter_mut().enumerate() {
        let row = &mat[r * cols..(r + 1) * cols];
        for (m, s) in row.iter().zip(src) {
            let v = m + s;
            if v < *o {
                *o = v;
            }
        }
    }
    out
}

/// `out[c] = min_r mat[r][c] + src[r]`.
fn relay_cols(mat: &[f64], rows: usize, cols: usize, src: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mat.len(), rows * cols);
    let mut out = vec![INF; cols];
    for (r, s) in src.iter().enumerate() {
        if s.is_infinite() {
            continue;
        }
        let row = &mat[r * cols..(r + 1) * cols];
        for (o, m) in out.iter_mut().zip(row) {
            let v = m + s;
            if v < *o {
                *o = v;
            }
        }
    }
    out
}

fn pointwise_min(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).collect()
}

impl<'a> Dp<'a> {
    fn portals(&mut self, v: usize) -> Rc<Vec<f64>> {
        if let Some(p) = &self.portals[v] {
            return p.clone();
        }
        let p = Rc::new(self.bt.portals(v));
        self.portals[v] = Some(p.clone());
        p
    }

    fn np(&mut self, v: usize) -> usize {
        self.portals(v).len() / self.bt.dim()
    }

    /// Portal distance matrix, rows for `x`, columns for `y`.
    fn mat(&mut self, x: usize, y: usize) -> Rc<Vec<f64>> {
        if let Some(m) = self.mats.get(&(x, y)) {
            return m.clone();
        }
        let d = self.bt.dim();
        let (px, py) = (self.portals(x), self.portals(y));
        let mut m = Vec::with_capacity(px.len() / d * py.len() / d);
        for a in px.chunks(d) {
            for b in py.chunks(d) {
                m.push(dist(a, b));
            }
        }
        let m = Rc::new(m);
        self.mats.insert((x, y), m.clone());
        m
    }

    fn aggregate(&mut self) {
        let bt = self.bt;
        for v in (0..bt.len()).rev() {
            let node = bt.node(v);
            let mut a = Agg::default();
            if node.is_leaf() {
                for &p in bt.leaf_points(v) {
                    if p < self.n {
                        let o = self.offsets[p];
                        a.clients += 1.0;
                        a.sum += o;
                        a.sum_sq += o * o;
                        a.has_client = true;
                    } else {
                        let j = p - self.n;
                        a.candidate = Some(a.candidate.map_or(j, |c: usize| c.min(j)));
                        a.has_candidate = true;
                    }
                }
            } else {
                for &c in node.children() {
                    let ca = self.agg[c];
                    a.clients += ca.clients;
                    a.sum += ca.sum;
                    a.sum_sq += ca.sum_sq;
                    a.has_client |= ca.has_client;
                    a.has_candidate |= ca.has_candidate;
                }
            }
            self.agg[v] = a;
        }
    }

    fn state_count(&self, v: usize) -> usize {
        self.inside[v].as_ref().map_or(1, |i| i.states.len())
    }

    fn state_ell(&self, v: usize, i: usize) -> Option<&[f64]> {
        self.inside[v].as_ref().map(|s| s.states[i].ell.as_slice())
    }

    fn state_cnt(&self, v: usize, i: usize) -> usize {
        self.inside[v].as_ref().map_or(0, |s| s.states[i].count)
    }

    fn scale(&self, v: usize) -> Scale {
        Scale::for_node(self.bt.diameter(v), self.eps)
    }

    fn ell_key(&self, v: usize, ell: &[f64]) -> Vec<u64> {
        if self.exact {
            ell.iter().map(|x| x.to_bits()).collect()
        } else {
            let s = self.scale(v);
            ell.iter().map(|&x| s.down(x) as u64).collect()
        }
    }

    fn s_key(&self, v: usize, s: &[f64]) -> Vec<u64> {
        if self.exact {
            s.iter().map(|x| x.to_bits()).collect()
        } else {
            let sc = self.scale(v);
            s.iter().map(|&x| sc.up(x) as u64).collect()
        }
    }

    fn build_inside(&mut self) {
        let bt = self.bt;
        let d = bt.dim();
        for v in (0..bt.len()).rev() {
            if !self.agg[v].has_candidate {
                continue;
            }
            let node = bt.node(v);
            let inside = if node.is_leaf() {
                let pv = self.portals(v);
                let j = self.agg[v].candidate.expect("leaf with candidate");
                let loc = bt.points()[self.n + j].coords();
                let ell: Vec<f64> = pv.chunks(d).map(|p| dist(p, loc)).collect();
                let none = vec![INF; ell.len()];
                Inside {
                    states: vec![State { ell: none, count: 0 }, State { ell, count: 1 }],
                    pairs: Vec::new(),
                    x_to_a: Vec::new(),
                    x_to_b: Vec::new(),
                }
            } else {
                self.combine(v)
            };
            self.inside[v] = Some(inside);
        }
    }

    /// Inside-state ell vectors of child `c` lifted onto the portals of `v`.
    fn lifted(&mut self, v: usize, c: usize) -> Vec<Vec<f64>> {
        let pv = self.np(v);
        let pc = self.np(c);
        let m = self.mat(v, c);
        (0..self.state_count(c))
            .map(|i| match self.state_ell(c, i) {
                Some(ell) => relay_rows(&m, pv, pc, ell),
                None => vec![INF; pv],
            })
            .collect()
    }

    fn combine(&mut self, v: usize) -> Inside {
        let kids: Vec<usize> = self.bt.node(v).children().to_vec();
        let a = kids[0];
        let ua = self.lifted(v, a);
        let (ub, b) = match kids.get(1) {
            Some(&b) => (Some(self.lifted(v, b)), Some(b)),
            None => (None, None),
        };
        let mut index: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut states: Vec<State> = Vec::new();
        let mut pairs = Vec::new();
        let mut add = |this: &Self, ell: Vec<f64>, count: usize, ia: usize, ib: usize, states: &mut Vec<State>| {
            let key = this.ell_key(v, &ell);
            let iv = *index.entry(key.clone()).or_insert_with(|| {
                let ell = if this.exact {
                    ell
                } else {
                    let s = this.scale(v);
                    key.iter().map(|&q| s.value(q as u32)).collect()
                };
                states.push(State { ell, count });
                (states.len() - 1) as u32
            });
            let st = &mut states[iv as usize];
            st.count = st.count.min(count);
            (ia as u32, ib as u32, iv)
        };
        for (ia, la) in ua.iter().enumerate() {
            let ca = self.state_cnt(a, ia);
            match (&ub, b) {
                (Some(ub), Some(b)) => {
                    for (ib, lb) in ub.iter().enumerate() {
                        let cb = self.state_cnt(b, ib);
                        if ca + cb > self.k {
                            continue;
                        }
                        pairs.push(add(self, pointwise_min(la, lb), ca + cb, ia, ib, &mut states));
                    }
                }
                _ => pairs.push(add(self, la.clone(), ca, ia, 0, &mut states)),
            }
        }
        if !self.exact {
            self.prune(&mut states, &mut pairs);
        }
        let (x_to_a, x_to_b) = match b {
            Some(b) => {
                let (pa, pb) = (self.np(a), self.np(b));
                let m = self.mat(a, b);
                let xa = (0..self.state_count(b))
                    .map(|ib| match self.state_ell(b, ib) {
                        Some(ell) => relay_rows(&m, pa, pb, ell),
                        None => vec![INF; pa],
                    })
                    .collect();
                let xb = (0..self.state_count(a))
                    .map(|ia| match self.state_ell(a, ia) {
                        Some(ell) => relay_cols(&m, pa, pb, ell),
                        None => vec![INF; pb],
                    })
                    .collect();
                (xa, xb)
            }
            None => (Vec::new(), Vec::new()),
        };
        Inside {
            states,
            pairs,
            x_to_a,
            x_to_b,
        }
    }

    /// Keeps the `max_inside_per_count` states with the smallest total
    /// distance for every center count.
    fn prune(&self, states: &mut Vec<State>, pairs: &mut Vec<(u32, u32, u32)>) {
        let cap = self.params.max_inside_per_count.max(1);
        let weight = |s: &State| s.ell.iter().map(|x| x.min(1e300)).sum::<f64>();
        let mut order: Vec<usize> = (0..states.len()).collect();
        order.sort_by(|&x, &y| {
            (states[x].count, weight(&states[x]))
                .partial_cmp(&(states[y].count, weight(&states[y])))
                .unwrap()
                .then(x.cmp(&y))
        });
        let mut keep = vec![false; states.len()];
        let mut per_count = vec![0usize; self.k + 1];
        for &i in &order {
            let c = states[i].count;
            if per_count[c] < cap {
                per_count[c] += 1;
                keep[i] = true;
            }
        }
        let mut remap = vec![u32::MAX; states.len()];
        let mut kept = Vec::new();
        for (i, s) in std::mem::take(states).into_iter().enumerate() {
            if keep[i] {
                remap[i] = kept.len() as u32;
                kept.push(s);
            }
        }
        *states = kept;
        pairs.retain_mut(|p| {
            p.2 = remap[p.2 as usize];
            p.2 != u32::MAX
        });
    }

    /// Index of the memo entry of `v` for outside vector `s`.
    fn query(&mut self, v: usize, s: Vec<f64>) -> usize {
        let key = self.s_key(v, &s);
        if let Some(&e) = self.memo[v].index.get(&key) {
            return e;
        }
        if !self.exact && self.memo[v].entries.len() >= self.params.max_outside_states.max(1) {
            let far = |k: &[u64]| -> u64 {
                k.iter()
                    .zip(&key)
                    .map(|(a, b)| a.abs_diff(*b))
                    .max()
                    .unwrap_or(0)
            };
            let mut best = (u64::MAX, 0);
            for (i, e) in self.memo[v].entries.iter().enumerate() {
                let d = far(&e.key);
                if d < best.0 {
                    best = (d, i);
                }
            }
            return best.1;
        }
        let s = if self.exact {
            s
        } else {
            let sc = self.scale(v);
            key.iter().map(|&q| sc.value(q as u32)).collect()
        };
        let table = self.compute(v, &s);
        let memo = &mut self.memo[v];
        memo.entries.push(Entry {
            key: key.clone(),
            s,
            table,
        });
        let e = memo.entries.len() - 1;
        memo.index.insert(key, e);
        e
    }

    /// `Σ (δ + t)^z` over the clients of `v` if all of them are at distance
    /// `t` from their server.
    fn spread(&self, v: usize, t: f64) -> f64 {
        let a = &self.agg[v];
        if !a.has_client {
            return 0.0;
        }
        if t.is_infinite() {
            return INF;
        }
        match self.z {
            Objective::Median => a.sum + a.clients * t,
            Objective::Means => a.sum_sq + 2.0 * t * a.sum + a.clients * t * t,
        }
    }

    fn exit_cost(&mut self, v: usize, x: &[f64], s: &[f64]) -> f64 {
        let d = self.bt.dim();
        let pv = self.portals(v);
        pv.chunks(d)
            .zip(s)
            .map(|(p, sv)| dist(p, x) + sv)
            .fold(INF, f64::min)
    }

    fn leaf_location(&self, v: usize) -> &'a [f64] {
        let p = self.bt.leaf_points(v)[0];
        self.bt.points()[p].coords()
    }

    /// Tilde-cost of the clients of a candidate-free node.
    fn client_cost(&mut self, v: usize, s: &[f64]) -> f64 {
        if !self.agg[v].has_client {
            return 0.0;
        }
        let bt = self.bt;
        if bt.node(v).is_leaf() {
            let t = self.exit_cost(v, self.leaf_location(v), s);
            return self.spread(v, t);
        }
        if !self.exact {
            let threshold = bt.diameter(v) / self.eps;
            if s.iter().all(|&x| x >= threshold) {
                let center: Vec<f64> = bt.lo(v).iter().zip(bt.hi(v)).map(|(l, h)| 0.5 * (l + h)).collect();
                let t = self.exit_cost(v, &center, s);
                return self.spread(v, t);
            }
        }
        let mut total = 0.0;
        for &c in bt.node(v).children() {
            if !self.agg[c].has_client {
                continue;
            }
            let down = self.down(v, c, s);
            let e = self.query(c, down);
            total += self.memo[c].entries[e].table[0];
        }
        total
    }

    /// Outside distances that `v`'s outside offers child `c`.
    fn down(&mut self, v: usize, c: usize, s: &[f64]) -> Vec<f64> {
        let (pc, pv) = (self.np(c), self.np(v));
        let m = self.mat(c, v);
        relay_rows(&m, pc, pv, s)
    }

    fn compute(&mut self, v: usize, s: &[f64]) -> Vec<f64> {
        let width = self.k + 1;
        if !self.agg[v].has_candidate {
            let mut t = vec![INF; width];
            t[0] = self.client_cost(v, s);
            return t;
        }
        let bt = self.bt;
        let node = bt.node(v);
        if node.is_leaf() {
            let mut t = vec![INF; 2 * width];
            t[0] = if self.agg[v].has_client {
                let x = self.exit_cost(v, self.leaf_location(v), s);
                self.spread(v, x)
            } else {
                0.0
            };
            t[width + 1] = self.spread(v, 0.0);
            return t;
        }
        let kids = node.children().to_vec();
        let states = self.state_count(v);
        let mut table = vec![INF; states * width];
        let a = kids[0];
        let down_a = self.down(v, a, s);
        if kids.len() == 1 {
            let ea = self.query(a, down_a);
            let inside = self.inside[v].take().expect("inside states");
            {
                let ta = &self.memo[a].entries[ea].table;
                for &(ia, _, iv) in &inside.pairs {
                    for c in 0..width {
                        let val = ta[ia as usize * width + c];
                        let slot = &mut table[iv as usize * width + c];
                        if val < *slot {
                            *slot = val;
                        }
                    }
                }
            }
            self.inside[v] = Some(inside);
            return table;
        }
        let b = kids[1];
        let down_b = self.down(v, b, s);
        let inside = self.inside[v].take().expect("inside states");
        let ea: Vec<usize> = inside
            .x_to_a
            .iter()
            .map(|x| self.query(a, pointwise_min(&down_a, x)))
            .collect();
        let eb: Vec<usize> = inside
            .x_to_b
            .iter()
            .map(|x| self.query(b, pointwise_min(&down_b, x)))
            .collect();
        for &(ia, ib, iv) in &inside.pairs {
            let (ia, ib, iv) = (ia as usize, ib as usize, iv as usize);
            let ta = &self.memo[a].entries[ea[ib]].table[ia * width..(ia + 1) * width];
            let tb = &self.memo[b].entries[eb[ia]].table[ib * width..(ib + 1) * width];
            for (ca, &va) in ta.iter().enumerate() {
                if va.is_infinite() {
                    continue;
                }
                for (cb, &vb) in tb[..width - ca].iter().enumerate() {
                    let val = va + vb;
                    let slot = &mut table[iv * width + ca + cb];
                    if val < *slot {
                        *slot = val;
                    }
                }
            }
        }
        self.inside[v] = Some(inside);
        table
    }

    fn backtrack(&mut self, v: usize, e: usize, iv: usize, c: usize, out: &mut Vec<usize>) {
        if !self.agg[v].has_candidate {
            return;
        }
        let width = self.k + 1;
        let bt = self.bt;
        let node = bt.node(v);
        if node.is_leaf() {
            if iv == 1 {
                out.push(self.agg[v].candidate.expect("candidate leaf"));
            }
            return;
        }
        let target = self.memo[v].entries[e].table[iv * width + c];
        let s = self.memo[v].entries[e].s.clone();
        let kids = node.children().to_vec();
        let a = kids[0];
        let down_a = self.down(v, a, &s);
        let inside = self.inside[v].take().expect("inside states");
        if kids.len() == 1 {
            let ea = self.query(a, down_a);
            let found = inside
                .pairs
                .iter()
                .find(|p| p.2 as usize == iv && self.memo[a].entries[ea].table[p.0 as usize * width + c] == target)
                .copied();
            self.inside[v] = Some(inside);
            let (ia, _, _) = found.expect("backtrack finds the recorded optimum");
            self.backtrack(a, ea, ia as usize, c, out);
            return;
        }
        let b = kids[1];
        let down_b = self.down(v, b, &s);
        let mut found = None;
        'search: for &(ia, ib, pv) in &inside.pairs {
            if pv as usize != iv {
                continue;
            }
            let (ia, ib) = (ia as usize, ib as usize);
            let ea = self.query(a, pointwise_min(&down_a, &inside.x_to_a[ib]));
            let eb = self.query(b, pointwise_min(&down_b, &inside.x_to_b[ia]));
            for ca in 0..=c {
                let va = self.memo[a].entries[ea].table[ia * width + ca];
                let vb = self.memo[b].entries[eb].table[ib * width + c - ca];
                if va + vb == target {
                    found = Some((ia, ib, ea, eb, ca));
                    break 'search;
                }
            }
        }
        self.inside[v] = Some(inside);
        let (ia, ib, ea, eb, ca) = found.expect("backtrack finds the recorded optimum");
        self.backtrack(a, ea, ia, ca, out);
        self.backtrack(b, eb, ib, c - ca, out);
    }

    fn stats(&self) -> DpStats {
        let mut st = DpStats::default();
        for v in 0..self.bt.len() {
            let outside = self.memo[v].entries.len();
            if outside == 0 {
                continue;
            }
            let inside = self.state_count(v);
            st.nodes_visited += 1;
            st.inside_states += inside;
            st.outside_states += outside;
            st.max_node_entries = st.max_node_entries.max(inside * outside * (self.k + 1));
        }
        st
    }

    fn trace_rows(&self) -> Vec<(usize, usize, usize, f64)> {
        (0..self.bt.len())
            .filter(|&v| !self.memo[v].entries.is_empty())
            .map(|v| {
                let best = self.memo[v]
                    .entries
                    .iter()
                    .flat_map(|e| e.table.iter().copied())
                    .fold(INF, f64::min);
                (v, self.state_count(v), self.memo[v].entries.len(), best)
            })
            .collect()
    }
}

/// Portal-respecting tilde-cost `Σ (δ_p + d_pr(p̃, S))^z` of a fixed center
/// set, where `δ_p = dist(p, p̃)` is given by `offsets`.
pub fn portal_tilde_cost(bt: &BinaryTree, instance: &Instance, offsets: &[f64], solution: &Solution) -> Result<f64> {
    if solution.is_empty() {
        return Err(Error::EmptySolution);
    }
    let n = instance.n();
    let d = bt.dim();
    let z = instance.objective();
    let len = bt.len();
    let mut open_leaf = vec![false; len];
    for &j in solution.centers() {
        open_leaf[bt.leaf_of(n + j)] = true;
    }
    let portals: Vec<Vec<f64>> = (0..len).map(|v| bt.portals(v)).collect();
    let mat = |x: usize, y: usize| -> Vec<f64> {
        let mut m = Vec::new();
        for a in portals[x].chunks(d) {
            for b in portals[y].chunks(d) {
                m.push(dist(a, b));
            }
        }
        m
    };
    let np = |v: usize| portals[v].len() / d;
    let mut ell: Vec<Option<Vec<f64>>> = vec![None; len];
    for v in (0..len).rev() {
        let node = bt.node(v);
        if node.is_leaf() {
            if open_leaf[v] {
                let loc = bt.points()[bt.leaf_points(v)[0]].coords();
                ell[v] = Some(portals[v].chunks(d).map(|p| dist(p, loc)).collect());
            }
            continue;
        }
        let mut acc: Option<Vec<f64>> = None;
        for &c in node.children() {
            if let Some(e) = &ell[c] {
                let up = relay_rows(&mat(v, c), np(v), np(c), e);
                acc = Some(match acc {
                    Some(prev) => pointwise_min(&prev, &up),
                    None => up,
                });
            }
        }
        ell[v] = acc;
    }
    let mut has_client = vec![false; len];
    for p in 0..n {
        let mut v = bt.leaf_of(p);
        while !has_client[v] {
            has_client[v] = true;
            match bt.node(v).parent {
                Some(u) => v = u,
                None => break,
            }
        }
    }
    let mut s: Vec<Option<Vec<f64>>> = vec![None; len];
    s[bt.root()] = Some(vec![INF; np(bt.root())]);
    for v in 0..len {
        if !has_client[v] || bt.node(v).is_leaf() {
            continue;
        }
        let sv = s[v].clone().expect("parents first");
        let kids = bt.node(v).children().to_vec();
        for (i, &c) in kids.iter().enumerate() {
            if !has_client[c] {
                continue;
            }
            let mut out = relay_rows(&mat(c, v), np(c), np(v), &sv);
            if let Some(&sib) = kids.get(1 - i) {
                if let Some(e) = &ell[sib] {
                    out = pointwise_min(&out, &relay_rows(&mat(c, sib), np(c), np(sib), e));
                }
            }
            s[c] = Some(out);
        }
    }
    let mut sum = CompensatedSum::new();
    for (p, off) in offsets.iter().enumerate().take(n) {
        let leaf = bt.leaf_of(p);
        let to_center = if open_leaf[leaf] {
            0.0
        } else {
            let x = bt.points()[p].coords();
            let sl = s[leaf].as_ref().expect("client leaves are reached");
            portals[leaf]
                .chunks(d)
                .zip(sl)
                .map(|(q, sv)| dist(q, x) + sv)
                .fold(INF, f64::min)
        };
        sum.add(z.pow(off + to_center));
    }
    Ok(sum.value())
}
