//! Labeled `(m,n)`-graphs.
//!
//! An `(m,n)`-graph is an oriented graph whose vertices carry labels in
//! `{1, 2, ...} ∪ {∞}` subject to two arithmetic constraints:
//!
//! 1. a vertex labeled `N` has at most `N ∧ n` outgoing and at most `N ∧ m`
//!    incoming positive edges (with the convention `∞ ∧ k = |k|`);
//! 2. every positive edge from a vertex labeled `N` to a vertex labeled `M`
//!    satisfies the Transfer Equation `N/(N ∧ n) = M/(M ∧ m)`.
//!
//! A graph is saturated when every vertex meets both caps with equality.
//! Only positive edges are stored; negative edges are their reversals.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::words::Params;

/// Vertex label: a positive integer (the cardinality of a `b`-orbit) or `∞`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Fin(BigUint),
    Inf,
}

impl Label {
    pub fn fin(n: u64) -> Label {
        Label::Fin(BigUint::from(n))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Label::Inf)
    }

    /// `N ∧ k` where `∞ ∧ k = |k|`. Always finite and at most `|k|`.
    pub fn meet(&self, k: i64) -> u64 {
        let k = k.unsigned_abs();
        match self {
            Label::Inf => k,
            Label::Fin(n) => n
                .gcd(&BigUint::from(k))
                .to_u64()
                .expect("gcd bounded by |k|"),
        }
    }

    /// The coset count `N/(N ∧ k)`, infinite when `N` is.
    pub fn transfer_count(&self, k: i64) -> Label {
        match self {
            Label::Inf => Label::Inf,
            Label::Fin(n) => Label::Fin(n / BigUint::from(self.meet(k))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Inf => write!(f, "inf"),
            Label::Fin(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Label {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(Label::Inf);
        }
        let n: BigUint = s
            .parse()
            .map_err(|_| GraphError::Parse(format!("bad label {s:?}")))?;
        if n.is_zero() {
            return Err(GraphError::Parse("label must be positive".into()));
        }
        Ok(Label::Fin(n))
    }
}

/// Direction of a forest extension relative to an existing vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Outgoing,
    Incoming,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("NotConnected")]
    NotConnected,
    #[error("PhenotypeMismatch: labels {0} and {1} have different phenotypes")]
    PhenotypeMismatch(Label, Label),
    #[error("MissingRoot")]
    MissingRoot,
    #[error("ParseError: {0}")]
    Parse(String),
}

/// A finite `(m,n)`-graph with positive edges only and an optional root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnGraph {
    labels: Vec<Label>,
    edges: Vec<(usize, usize)>,
    root: Option<usize>,
}

impl MnGraph {
    pub fn new() -> Self {
        MnGraph {
            labels: Vec::new(),
            edges: Vec::new(),
            root: None,
        }
    }

    pub fn single_vertex(label: Label) -> Self {
        MnGraph {
            labels: vec![label],
            edges: Vec::new(),
            root: Some(0),
        }
    }

    /// The one-vertex graph labeled `∞` with a positive self-loop.
    pub fn infinite_self_loop() -> Self {
        let mut g = MnGraph::single_vertex(Label::Inf);
        g.add_edge(0, 0);
        g
    }

    pub fn add_vertex(&mut self, label: Label) -> usize {
        self.labels.push(label);
        self.labels.len() - 1
    }

    pub fn add_edge(&mut self, src: usize, trg: usize) -> usize {
        assert!(src < self.labels.len() && trg < self.labels.len());
        self.edges.push((src, trg));
        self.edges.len() - 1
    }

    pub fn set_root(&mut self, v: usize) {
        assert!(v < self.labels.len());
        self.root = Some(v);
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, v: usize) -> &Label {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(s, _)| *s == v).count()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(_, t)| *t == v).count()
    }

    /// Undirected BFS distances from `v`; `None` for unreachable vertices.
    pub fn distances_from(&self, v: usize) -> Vec<Option<u32>> {
        let mut adj = vec![Vec::new(); self.labels.len()];
        for &(s, t) in &self.edges {
            adj[s].push(t);
            adj[t].push(s);
        }
        let mut dist = vec![None; self.labels.len()];
        let mut queue = VecDeque::new();
        dist[v] = Some(0);
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &w in &adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        if self.labels.is_empty() {
            return true;
        }
        self.distances_from(0).iter().all(|d| d.is_some())
    }

    /// Line-oriented text serialization; round-trips bit-exactly.
    pub fn to_text(&self, p: &Params) -> String {
        let mut out = String::new();
        out.push_str(&format!("mn-graph {} {}\n", p.m(), p.n()));
        for (i, label) in self.labels.iter().enumerate() {
            out.push_str(&format!("v {i} {label}\n"));
        }
        for (s, t) in &self.edges {
            out.push_str(&format!("e {s} {t}\n"));
        }
        if let Some(r) = self.root {
            out.push_str(&format!("root {r}\n"));
        }
        out
    }

    /// Parses the text format, returning the graph and the `(m,n)` header.
    pub fn from_text(text: &str) -> Result<(Params, MnGraph), GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GraphError::Parse("empty graph file".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("mn-graph") {
            return Err(GraphError::Parse("expected mn-graph header".into()));
        }
        let m: i64 = parse_field(parts.next(), "m")?;
        let n: i64 = parse_field(parts.next(), "n")?;
        let params =
            Params::new(m, n).map_err(|e| GraphError::Parse(e.to_string()))?;
        let mut g = MnGraph::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let id: usize = parse_field(parts.next(), "vertex id")?;
                    let label: Label = parts
                        .next()
                        .ok_or_else(|| GraphError::Parse("missing label".into()))?
                        .parse()?;
                    if id != g.labels.len() {
                        return Err(GraphError::Parse(format!(
                            "vertex ids must be consecutive, got {id}"
                        )));
                    }
                    g.add_vertex(label);
                }
                Some("e") => {
                    let s: usize = parse_field(parts.next(), "edge source")?;
                    let t: usize = parse_field(parts.next(), "edge target")?;
                    if s >= g.labels.len() || t >= g.labels.len() {
                        return Err(GraphError::Parse("edge endpoint out of range".into()));
                    }
                    g.add_edge(s, t);
                }
                Some("root") => {
                    let r: usize = parse_field(parts.next(), "root")?;
                    if r >= g.labels.len() {
                        return Err(GraphError::Parse("root out of range".into()));
                    }
                    g.set_root(r);
                }
                Some(other) => {
                    return Err(GraphError::Parse(format!("unknown line kind {other:?}")))
                }
                None => {}
            }
        }
        Ok((params, g))
    }
}

impl Default for MnGraph {
    fn default() -> Self {
        MnGraph::new()
    }
}

fn parse_field<T: FromStr>(field: Option<&str>, what: &str) -> Result<T, GraphError> {
    field
        .ok_or_else(|| GraphError::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| GraphError::Parse(format!("bad {what}")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DegreeViolation {
    OutCapExceeded { vertex: usize, used: usize, cap: u64 },
    InCapExceeded { vertex: usize, used: usize, cap: u64 },
    DuplicateOutResidue { orbit: usize, residue: u64 },
    DuplicateInResidue { orbit: usize, residue: u64 },
    ResidueOutOfRange { edge: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransferViolation {
    /// `N/(N ∧ n) != M/(M ∧ m)` on a positive edge.
    Equation {
        edge: usize,
        src_side: Label,
        trg_side: Label,
    },
    /// An anchor offset that is not in the residue class its edge declares.
    AnchorClass { edge: usize },
}

/// Diagnostics from validating a graph or preaction; violations are data,
/// not errors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub degree_violations: Vec<DegreeViolation>,
    pub transfer_violations: Vec<TransferViolation>,
    pub saturated: bool,
    pub connected: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.degree_violations.is_empty() && self.transfer_violations.is_empty()
    }
}

/// Checks the degree caps and the Transfer Equation on every vertex and
/// edge, and reports saturation and connectivity.
pub fn validate(p: &Params, g: &MnGraph) -> ValidationReport {
    let mut report = ValidationReport {
        saturated: !g.labels.is_empty(),
        connected: g.is_connected(),
        ..Default::default()
    };
    for v in 0..g.vertex_count() {
        let out_cap = g.label(v).meet(p.n());
        let in_cap = g.label(v).meet(p.m());
        let out_used = g.out_degree(v);
        let in_used = g.in_degree(v);
        if out_used as u64 > out_cap {
            report.degree_violations.push(DegreeViolation::OutCapExceeded {
                vertex: v,
                used: out_used,
                cap: out_cap,
            });
        }
        if in_used as u64 > in_cap {
            report.degree_violations.push(DegreeViolation::InCapExceeded {
                vertex: v,
                used: in_used,
                cap: in_cap,
            });
        }
        if out_used as u64 != out_cap || in_used as u64 != in_cap {
            report.saturated = false;
        }
    }
    for (i, &(s, t)) in g.edges.iter().enumerate() {
        let lhs = g.label(s).transfer_count(p.n());
        let rhs = g.label(t).transfer_count(p.m());
        if lhs != rhs {
            report.transfer_violations.push(TransferViolation::Equation {
                edge: i,
                src_side: g.label(s).clone(),
                trg_side: g.label(t).clone(),
            });
        }
    }
    report
}

/// The phenotype of a label: the product of `p^{v_p(N)}` over the primes `p`
/// with `v_p(m) = v_p(n)` and `v_p(N) > v_p(n)`, and `∞` for the label `∞`.
/// Constant along the edges of any valid connected graph.
pub fn phenotype(p: &Params, label: &Label) -> Label {
    let n_val = match label {
        Label::Inf => return Label::Inf,
        Label::Fin(n) => n.clone(),
    };
    // Primes not dividing mn have v_p(m) = v_p(n) = 0 < v_p(N) whenever they
    // divide N, so the cofactor of N coprime to mn goes in wholesale. Only
    // the primes of mn need individual treatment.
    let mut result = BigUint::one();
    let mut cofactor = n_val;
    let mut mn_primes = prime_factors(p.abs_m());
    mn_primes.extend(prime_factors(p.abs_n()));
    mn_primes.sort_unstable();
    mn_primes.dedup();
    for q in mn_primes {
        let vq_n = valuation_u64(p.abs_n(), q);
        let vq_m = valuation_u64(p.abs_m(), q);
        let (val, reduced) = valuation_big(&cofactor, q);
        cofactor = reduced;
        if vq_m == vq_n && val > vq_n {
            result *= BigUint::from(q).pow(val as u32);
        }
    }
    Label::Fin(result * cofactor)
}

fn prime_factors(mut k: u64) -> Vec<u64> {
    let mut primes = Vec::new();
    let mut q = 2;
    while q * q <= k {
        if k % q == 0 {
            primes.push(q);
            while k % q == 0 {
                k /= q;
            }
        }
        q += 1;
    }
    if k > 1 {
        primes.push(k);
    }
    primes
}

fn valuation_u64(mut k: u64, q: u64) -> u64 {
    let mut v = 0;
    while k % q == 0 {
        k /= q;
        v += 1;
    }
    v
}

/// `(v_q(n), n / q^{v_q(n)})`.
fn valuation_big(n: &BigUint, q: u64) -> (u64, BigUint) {
    let q = BigUint::from(q);
    let mut v = 0;
    let mut n = n.clone();
    loop {
        let (quot, rem) = n.div_rem(&q);
        if rem.is_zero() {
            v += 1;
            n = quot;
        } else {
            return (v, n);
        }
    }
}

/// The common phenotype of a valid connected graph's labels. Errors if the
/// graph is disconnected, or if the labels disagree (which certifies the
/// graph invalid).
pub fn graph_phenotype(p: &Params, g: &MnGraph) -> Result<Label, GraphError> {
    if !g.is_connected() {
        return Err(GraphError::NotConnected);
    }
    let mut labels = g.labels.iter();
    let first = labels.next().ok_or(GraphError::NotConnected)?;
    let ph = phenotype(p, first);
    for label in labels {
        let other = phenotype(p, label);
        if other != ph {
            return Err(GraphError::PhenotypeMismatch(first.clone(), label.clone()));
        }
    }
    Ok(ph)
}

/// The label of the fresh vertex grafted onto a vertex labeled `N` by the
/// maximal forest saturation: `N|m|/(N ∧ n)` along a new outgoing edge, and
/// the mirror `N|n|/(N ∧ m)` along a new incoming edge.
pub fn forest_label(p: &Params, label: &Label, direction: Direction) -> Label {
    let (factor, meet) = match direction {
        Direction::Outgoing => (p.abs_m(), label.meet(p.n())),
        Direction::Incoming => (p.abs_n(), label.meet(p.m())),
    };
    match label {
        Label::Inf => Label::Inf,
        Label::Fin(n) => Label::Fin(n * BigUint::from(factor) / BigUint::from(meet)),
    }
}

/// For `|m| = |n|`, every vertex the saturation grafts carries this constant
/// label `Ph(N) * prod_{v_p(Ph(N)) = 0} p^{v_p(n)}`, which also equals
/// `N|n|/(N ∧ n)` for any label `N` of the graph.
pub fn unimodular_forest_label(p: &Params, label: &Label) -> Label {
    assert_eq!(p.abs_m(), p.abs_n(), "constant forest label needs |m| = |n|");
    let ph = match phenotype(p, label) {
        Label::Inf => return Label::Inf,
        Label::Fin(ph) => ph,
    };
    let mut result = ph.clone();
    for q in prime_factors(p.abs_n()) {
        let (v_ph, _) = valuation_big(&ph, q);
        if v_ph == 0 {
            result *= BigUint::from(q).pow(valuation_u64(p.abs_n(), q) as u32);
        }
    }
    Label::Fin(result)
}

/// The induced labeled subgraph on the vertices at graph distance at most
/// `radius` from `v`, rooted at `v`. Vertices are renumbered in BFS order.
pub fn rooted_ball(g: &MnGraph, v: usize, radius: u32) -> MnGraph {
    assert!(v < g.vertex_count(), "ball center not in graph");
    let dist = g.distances_from(v);
    let mut keep: Vec<usize> = (0..g.vertex_count())
        .filter(|&u| matches!(dist[u], Some(d) if d <= radius))
        .collect();
    keep.sort_by_key(|&u| (dist[u].unwrap(), u));
    let mut index = vec![usize::MAX; g.vertex_count()];
    let mut ball = MnGraph::new();
    for &u in &keep {
        index[u] = ball.add_vertex(g.label(u).clone());
    }
    for &(s, t) in &g.edges {
        if index[s] != usize::MAX && index[t] != usize::MAX {
            ball.add_edge(index[s], index[t]);
        }
    }
    ball.set_root(index[v]);
    ball
}

/// Root-preserving, orientation-preserving, label-preserving isomorphism of
/// finite rooted graphs, multiplicities included. Backtracking with
/// degree/label pruning; degrees here are capped by `|m| + |n|`, so the
/// search stays small.
pub fn rooted_isomorphic(g1: &MnGraph, g2: &MnGraph) -> Result<bool, GraphError> {
    let (r1, r2) = match (g1.root, g2.root) {
        (Some(r1), Some(r2)) => (r1, r2),
        _ => return Err(GraphError::MissingRoot),
    };
    if g1.vertex_count() != g2.vertex_count() || g1.edge_count() != g2.edge_count() {
        return Ok(false);
    }
    let n = g1.vertex_count();
    if n == 0 {
        return Ok(true);
    }
    let sig1 = signatures(g1);
    let sig2 = signatures(g2);
    let adj1 = multi_adjacency(g1);
    let adj2 = multi_adjacency(g2);

    // Order g1's vertices root-first, preferring vertices adjacent to the
    // already-ordered region so the partial map is constrained early.
    let order = matching_order(g1, r1);

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[r1] = r2;
    used[r2] = true;
    if sig1[r1] != sig2[r2] {
        return Ok(false);
    }
    let ok = extend_iso(&order, 1, &mut map, &mut used, &sig1, &sig2, &adj1, &adj2);
    Ok(ok)
}

type Adjacency = Vec<Vec<(usize, usize)>>;

/// Per-vertex sorted list of `(neighbor, multiplicity)` for out-edges and
/// in-edges, concatenated with a direction tag folded into the tuple.
fn multi_adjacency(g: &MnGraph) -> (Adjacency, Adjacency) {
    let n = g.vertex_count();
    let mut out = vec![std::collections::BTreeMap::new(); n];
    let mut inc = vec![std::collections::BTreeMap::new(); n];
    for &(s, t) in g.edges() {
        *out[s].entry(t).or_insert(0usize) += 1;
        *inc[t].entry(s).or_insert(0usize) += 1;
    }
    let flatten = |maps: Vec<std::collections::BTreeMap<usize, usize>>| {
        maps.into_iter()
            .map(|m| m.into_iter().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    (flatten(out), flatten(inc))
}

fn signatures(g: &MnGraph) -> Vec<(Label, usize, usize)> {
    (0..g.vertex_count())
        .map(|v| (g.label(v).clone(), g.out_degree(v), g.in_degree(v)))
        .collect()
}

fn matching_order(g: &MnGraph, root: usize) -> Vec<usize> {
    let n = g.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for &(s, t) in g.edges() {
        adj[s].push(t);
        adj[t].push(s);
    }
    let mut order = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                order.push(w);
            }
        }
    }
    // Disconnected remainder in index order.
    for v in 0..n {
        if !seen[v] {
            order.push(v);
        }
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn extend_iso(
    order: &[usize],
    depth: usize,
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
    sig1: &[(Label, usize, usize)],
    sig2: &[(Label, usize, usize)],
    adj1: &(Adjacency, Adjacency),
    adj2: &(Adjacency, Adjacency),
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    'candidates: for w in 0..sig2.len() {
        if used[w] || sig1[v] != sig2[w] {
            continue;
        }
        // Every already-mapped neighbor of v must match w's corresponding
        // neighbor with equal multiplicity, in both directions.
        for &(nb, mult) in &adj1.0[v] {
            if map[nb] != usize::MAX
                && adj2.0[w]
                    .iter()
                    .find(|(x, _)| *x == map[nb])
                    .map(|(_, c)| *c)
                    != Some(mult)
            {
                continue 'candidates;
            }
        }
        for &(nb, mult) in &adj1.1[v] {
            if map[nb] != usize::MAX
                && adj2.1[w]
                    .iter()
                    .find(|(x, _)| *x == map[nb])
                    .map(|(_, c)| *c)
                    != Some(mult)
            {
                continue 'candidates;
            }
        }
        map[v] = w;
        used[w] = true;
        if extend_iso(order, depth + 1, map, used, sig1, sig2, adj1, adj2) {
            return true;
        }
        map[v] = usize::MAX;
        used[w] = false;
    }
    false
}

/// `{phenotype(N) : 1 <= N <= bound} ∪ {∞}`; nondecreasing in `bound`.
pub fn enumerate_phenotypes(p: &Params, bound: u64) -> BTreeSet<Label> {
    assert!(bound >= 1);
    let mut set: BTreeSet<Label> = (1..=bound)
        .map(|n| phenotype(p, &Label::fin(n)))
        .collect();
    set.insert(Label::Inf);
    set
}
