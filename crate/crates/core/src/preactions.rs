//! Preactions: pairs `(beta, tau)` where `beta` is a total bijection of a
//! countable pointed set (the `b`-action, one cycle per orbit) and `tau` is a
//! partial bijection (the `t`-action) whose domain is `beta^n`-invariant,
//! whose range is `beta^m`-invariant, and which intertwines them:
//! `x tau beta^m = x beta^n tau`.
//!
//! Orbits are stored by cardinality only; a point is an orbit id plus an
//! offset (reduced mod the cardinality for finite orbits, an arbitrary
//! integer for infinite ones). Each `tau`-edge covers one `beta^n`-coset of
//! its source orbit — a residue class mod `N ∧ n` — and maps it onto one
//! `beta^m`-coset of its target, pinned by a single anchor: the image of the
//! canonical source representative. The commutation law then determines the
//! whole coset map, and its well-definedness on finite orbits is exactly the
//! Transfer Equation `N/(N ∧ n) = M/(M ∧ m)`.
//!
//! The quotient by `beta`-orbits is an [`MnGraph`]; saturation grafts the
//! maximal forest onto it, either level by level ([`saturate`]) or lazily
//! along a word ([`apply_saturating`]). Both use the same labels and anchor
//! conventions, so lazily grown structures are sub-preactions of the level
//! saturation.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::graphs::{
    self, DegreeViolation, Direction, GraphError, Label, MnGraph, TransferViolation,
    ValidationReport,
};
use crate::words::{Letter, Params, TSign, Word};

/// A point of the underlying countable set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    pub orbit: usize,
    pub offset: BigInt,
}

impl Point {
    pub fn new(orbit: usize, offset: impl Into<BigInt>) -> Self {
        Point {
            orbit,
            offset: offset.into(),
        }
    }
}

/// One positive `tau`-edge: the `beta^n`-coset `src_res (mod N ∧ n)` of the
/// source orbit maps onto the `beta^m`-coset `trg_res (mod M ∧ m)` of the
/// target; `anchor` is the image offset of the canonical representative
/// `src_res` itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauEdge {
    pub src: usize,
    pub src_res: u64,
    pub trg: usize,
    pub trg_res: u64,
    pub anchor: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct OrbitData {
    card: Label,
    /// Graph distance from the original (level-0) subgraph; forest vertices
    /// grafted by saturation sit at their genealogy depth.
    level: u32,
    parent: Option<(usize, Direction)>,
    out_edges: Vec<usize>,
    in_edges: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PreactionError {
    #[error("Undefined: word leaves the preaction domain at prefix length {prefix_len}")]
    Undefined { prefix_len: usize },
    #[error("AlreadySaturated")]
    AlreadySaturated,
    #[error("InvalidGraph: {0}")]
    InvalidGraph(String),
    #[error("ParseError: {0}")]
    Parse(String),
}

/// A preaction with a distinguished basepoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preaction {
    orbits: Vec<OrbitData>,
    edges: Vec<TauEdge>,
    basepoint: Point,
}

impl Preaction {
    /// A single orbit of the given cardinality with empty `tau`, based at
    /// offset 0.
    pub fn single_orbit(card: Label) -> Self {
        Preaction {
            orbits: vec![OrbitData {
                card,
                level: 0,
                parent: None,
                out_edges: Vec::new(),
                in_edges: Vec::new(),
            }],
            edges: Vec::new(),
            basepoint: Point::new(0, 0),
        }
    }

    /// The one-orbit preaction of an infinite orbit whose `tau` maps the
    /// residue class `0 mod (∞ ∧ n)` onto the class `0 mod (∞ ∧ m)` of the
    /// same orbit with anchor 0. Its quotient graph is one vertex labeled `∞`
    /// with a positive self-loop.
    pub fn infinite_self_loop() -> Self {
        let mut pre = Preaction::single_orbit(Label::Inf);
        pre.add_edge(TauEdge {
            src: 0,
            src_res: 0,
            trg: 0,
            trg_res: 0,
            anchor: BigInt::zero(),
        });
        pre
    }

    pub fn orbit_count(&self) -> usize {
        self.orbits.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn card(&self, orbit: usize) -> &Label {
        &self.orbits[orbit].card
    }

    /// Distance of the orbit from the level-0 core.
    pub fn level(&self, orbit: usize) -> u32 {
        self.orbits[orbit].level
    }

    pub fn parent(&self, orbit: usize) -> Option<(usize, Direction)> {
        self.orbits[orbit].parent
    }

    pub fn basepoint(&self) -> &Point {
        &self.basepoint
    }

    pub fn set_basepoint(&mut self, point: Point) {
        let point = self.normalize(point);
        self.basepoint = point;
    }

    pub fn edges(&self) -> &[TauEdge] {
        &self.edges
    }

    pub fn add_orbit(&mut self, card: Label, level: u32, parent: Option<(usize, Direction)>) -> usize {
        self.orbits.push(OrbitData {
            card,
            level,
            parent,
            out_edges: Vec::new(),
            in_edges: Vec::new(),
        });
        self.orbits.len() - 1
    }

    pub fn add_edge(&mut self, edge: TauEdge) -> usize {
        let id = self.edges.len();
        self.orbits[edge.src].out_edges.push(id);
        self.orbits[edge.trg].in_edges.push(id);
        self.edges.push(edge);
        id
    }

    /// Adds a `tau`-edge that maps the specific point `src_offset` of `src`
    /// to the point `trg_offset` of `trg`, deriving residues and anchor.
    pub fn add_edge_mapping(
        &mut self,
        p: &Params,
        src: usize,
        src_offset: &BigInt,
        trg: usize,
        trg_offset: &BigInt,
    ) -> usize {
        let g = self.card(src).meet(p.n());
        let src_res = residue(src_offset, g);
        let gm = self.card(trg).meet(p.m());
        let trg_res = residue(trg_offset, gm);
        // anchor = image of the representative src_res: walk back from
        // src_offset = src_res + k n to trg_offset - k m.
        let anchor = match self.card(src) {
            Label::Inf => {
                let k = (src_offset - BigInt::from(src_res)) / BigInt::from(p.n());
                trg_offset - k * BigInt::from(p.m())
            }
            Label::Fin(_) => {
                let k = self.coset_index(p, src, src_offset, src_res);
                let raw = trg_offset - k * BigInt::from(p.m());
                match self.card(trg) {
                    Label::Fin(card) => raw.mod_floor(&BigInt::from(card.clone())),
                    Label::Inf => raw,
                }
            }
        };
        self.add_edge(TauEdge {
            src,
            src_res,
            trg,
            trg_res,
            anchor,
        })
    }

    /// Declares the whole current point set to be the core: levels reset to
    /// 0 and forest genealogy is forgotten. Used when an extension becomes a
    /// finite preaction in its own right.
    pub fn rebase_as_core(&mut self) {
        for orbit in &mut self.orbits {
            orbit.level = 0;
            orbit.parent = None;
        }
    }

    pub fn find_out_edge(&self, orbit: usize, res: u64) -> Option<usize> {
        self.orbits[orbit]
            .out_edges
            .iter()
            .copied()
            .find(|&e| self.edges[e].src_res == res)
    }

    pub fn find_in_edge(&self, orbit: usize, res: u64) -> Option<usize> {
        self.orbits[orbit]
            .in_edges
            .iter()
            .copied()
            .find(|&e| self.edges[e].trg_res == res)
    }

    fn normalize(&self, point: Point) -> Point {
        match self.card(point.orbit) {
            Label::Inf => point,
            Label::Fin(card) => Point {
                orbit: point.orbit,
                offset: point.offset.mod_floor(&BigInt::from(card.clone())),
            },
        }
    }

    /// Index `k (mod N/(N ∧ n))` of `offset` within its `beta^n`-coset, i.e.
    /// the solution of `res + k n = offset (mod N)`.
    fn coset_index(&self, p: &Params, orbit: usize, offset: &BigInt, res: u64) -> BigInt {
        let g = self.card(orbit).meet(p.n());
        match self.card(orbit) {
            Label::Inf => (offset - BigInt::from(res)) / BigInt::from(p.n()),
            Label::Fin(card) => {
                let cosets = BigInt::from(card / BigUint::from(g));
                if cosets.is_one() {
                    return BigInt::zero();
                }
                let steps = (offset - BigInt::from(res)) / BigInt::from(g);
                let n_prime = BigInt::from(p.n() / g as i64).mod_floor(&cosets);
                (steps * mod_inverse(&n_prime, &cosets)).mod_floor(&cosets)
            }
        }
    }

    /// Index `k (mod M/(M ∧ m))` of `offset` within the image coset of an
    /// edge, i.e. the solution of `anchor + k m = offset (mod M)`.
    fn image_coset_index(&self, p: &Params, edge: &TauEdge, offset: &BigInt) -> BigInt {
        match self.card(edge.trg) {
            Label::Inf => (offset - &edge.anchor) / BigInt::from(p.m()),
            Label::Fin(card) => {
                let gm = self.card(edge.trg).meet(p.m());
                let cosets = BigInt::from(card / BigUint::from(gm));
                if cosets.is_one() {
                    return BigInt::zero();
                }
                let steps = (offset - &edge.anchor).mod_floor(&BigInt::from(card.clone()))
                    / BigInt::from(gm);
                let m_prime = BigInt::from(p.m() / gm as i64).mod_floor(&cosets);
                (steps * mod_inverse(&m_prime, &cosets)).mod_floor(&cosets)
            }
        }
    }

    /// `tau` along a given edge: `src_res + k n  |->  anchor + k m`.
    fn edge_forward(&self, p: &Params, edge_id: usize, x: &Point) -> Point {
        let edge = &self.edges[edge_id];
        let k = self.coset_index(p, edge.src, &x.offset, edge.src_res);
        self.normalize(Point {
            orbit: edge.trg,
            offset: &edge.anchor + k * BigInt::from(p.m()),
        })
    }

    /// `tau^-1` along a given edge.
    fn edge_backward(&self, p: &Params, edge_id: usize, x: &Point) -> Point {
        let edge = &self.edges[edge_id];
        let k = self.image_coset_index(p, edge, &x.offset);
        self.normalize(Point {
            orbit: edge.src,
            offset: BigInt::from(edge.src_res) + k * BigInt::from(p.n()),
        })
    }

    fn beta_step(&self, x: &Point, delta: i64) -> Point {
        self.normalize(Point {
            orbit: x.orbit,
            offset: &x.offset + BigInt::from(delta),
        })
    }

    /// One letter of the action; `Err` carries what is missing.
    fn step(&self, p: &Params, x: &Point, letter: Letter) -> Result<(Point, Option<(usize, TSign)>), Miss> {
        match letter {
            Letter::B => Ok((self.beta_step(x, 1), None)),
            Letter::BInv => Ok((self.beta_step(x, -1), None)),
            Letter::T => {
                let res = residue(&x.offset, self.card(x.orbit).meet(p.n()));
                match self.find_out_edge(x.orbit, res) {
                    Some(e) => Ok((self.edge_forward(p, e, x), Some((e, TSign::Pos)))),
                    None => Err(Miss {
                        orbit: x.orbit,
                        res,
                        direction: Direction::Outgoing,
                    }),
                }
            }
            Letter::TInv => {
                let res = residue(&x.offset, self.card(x.orbit).meet(p.m()));
                match self.find_in_edge(x.orbit, res) {
                    Some(e) => Ok((self.edge_backward(p, e, x), Some((e, TSign::Neg)))),
                    None => Err(Miss {
                        orbit: x.orbit,
                        res,
                        direction: Direction::Incoming,
                    }),
                }
            }
        }
    }

    fn graft(&mut self, p: &Params, miss: &Miss) -> usize {
        let card = self.card(miss.orbit).clone();
        let level = self.level(miss.orbit) + 1;
        match miss.direction {
            Direction::Outgoing => {
                let label = graphs::forest_label(p, &card, Direction::Outgoing);
                let fresh = self.add_orbit(label, level, Some((miss.orbit, Direction::Outgoing)));
                self.add_edge(TauEdge {
                    src: miss.orbit,
                    src_res: miss.res,
                    trg: fresh,
                    trg_res: 0,
                    anchor: BigInt::zero(),
                })
            }
            Direction::Incoming => {
                let label = graphs::forest_label(p, &card, Direction::Incoming);
                let fresh = self.add_orbit(label, level, Some((miss.orbit, Direction::Incoming)));
                self.add_edge(TauEdge {
                    src: fresh,
                    src_res: 0,
                    trg: miss.orbit,
                    trg_res: miss.res,
                    anchor: BigInt::from(miss.res),
                })
            }
        }
    }

    fn missing_slots(&self, p: &Params, orbit: usize) -> Vec<Miss> {
        let mut misses = Vec::new();
        let out_cap = self.card(orbit).meet(p.n());
        for res in 0..out_cap {
            if self.find_out_edge(orbit, res).is_none() {
                misses.push(Miss {
                    orbit,
                    res,
                    direction: Direction::Outgoing,
                });
            }
        }
        let in_cap = self.card(orbit).meet(p.m());
        for res in 0..in_cap {
            if self.find_in_edge(orbit, res).is_none() {
                misses.push(Miss {
                    orbit,
                    res,
                    direction: Direction::Incoming,
                });
            }
        }
        misses
    }

    pub fn is_saturated(&self, p: &Params) -> bool {
        (0..self.orbits.len()).all(|o| self.missing_slots(p, o).is_empty())
    }

    /// Serializes to the line-oriented text format: the quotient graph's
    /// lines plus `orbit`, `tau`, and `basepoint` lines.
    pub fn to_text(&self, p: &Params) -> String {
        let graph = mn_graph_of(self);
        let mut out = graph.to_text(p);
        for (i, orbit) in self.orbits.iter().enumerate() {
            writeln!(out, "orbit {} {}", i, orbit.card).unwrap();
        }
        for (i, e) in self.edges.iter().enumerate() {
            writeln!(out, "tau {} {} {} {}", i, e.src_res, e.trg_res, e.anchor).unwrap();
        }
        writeln!(out, "basepoint {} {}", self.basepoint.orbit, self.basepoint.offset).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<(Params, Preaction), PreactionError> {
        let graph_lines: String = text
            .lines()
            .filter(|l| {
                let kind = l.split_whitespace().next();
                matches!(kind, Some("mn-graph") | Some("v") | Some("e") | Some("root"))
            })
            .map(|l| format!("{l}\n"))
            .collect();
        let (params, graph) =
            MnGraph::from_text(&graph_lines).map_err(|e| PreactionError::Parse(e.to_string()))?;
        if graph.vertex_count() == 0 {
            return Err(PreactionError::Parse("preaction needs at least one orbit".into()));
        }
        let mut pre = Preaction {
            orbits: graph
                .labels()
                .iter()
                .map(|card| OrbitData {
                    card: card.clone(),
                    level: 0,
                    parent: None,
                    out_edges: Vec::new(),
                    in_edges: Vec::new(),
                })
                .collect(),
            edges: Vec::new(),
            basepoint: Point::new(graph.root().unwrap_or(0), 0),
        };
        let mut tau_lines = 0usize;
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("orbit") => {
                    let id: usize = parse_num(parts.next(), "orbit id")?;
                    let card: Label = parts
                        .next()
                        .ok_or_else(|| PreactionError::Parse("missing orbit cardinality".into()))?
                        .parse()
                        .map_err(|e: GraphError| PreactionError::Parse(e.to_string()))?;
                    if id >= pre.orbits.len() || pre.orbits[id].card != card {
                        return Err(PreactionError::Parse(format!(
                            "orbit {id} disagrees with vertex label"
                        )));
                    }
                }
                Some("tau") => {
                    let id: usize = parse_num(parts.next(), "tau edge id")?;
                    if id != tau_lines || id >= graph.edge_count() {
                        return Err(PreactionError::Parse("tau lines must follow edge order".into()));
                    }
                    let (src, trg) = graph.edges()[id];
                    let src_res: u64 = parse_num(parts.next(), "src residue")?;
                    let trg_res: u64 = parse_num(parts.next(), "trg residue")?;
                    let anchor: BigInt = parse_num(parts.next(), "anchor")?;
                    pre.add_edge(TauEdge {
                        src,
                        src_res,
                        trg,
                        trg_res,
                        anchor,
                    });
                    tau_lines += 1;
                }
                Some("basepoint") => {
                    let orbit: usize = parse_num(parts.next(), "basepoint orbit")?;
                    let offset: BigInt = parse_num(parts.next(), "basepoint offset")?;
                    if orbit >= pre.orbits.len() {
                        return Err(PreactionError::Parse("basepoint out of range".into()));
                    }
                    pre.basepoint = pre.normalize(Point::new(orbit, offset));
                }
                _ => {}
            }
        }
        if tau_lines != graph.edge_count() {
            return Err(PreactionError::Parse("missing tau line for some edge".into()));
        }
        Ok((params, pre))
    }
}

#[derive(Debug, Clone, Copy)]
struct Miss {
    orbit: usize,
    res: u64,
    direction: Direction,
}

fn residue(offset: &BigInt, modulus: u64) -> u64 {
    offset
        .mod_floor(&BigInt::from(modulus))
        .to_u64()
        .expect("residue bounded by modulus")
}

fn parse_num<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T, PreactionError> {
    field
        .ok_or_else(|| PreactionError::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| PreactionError::Parse(format!("bad {what}")))
}

/// Inverse of `a` mod `modulus`; `a` must be coprime to `modulus`.
fn mod_inverse(a: &BigInt, modulus: &BigInt) -> BigInt {
    let egcd = a.extended_gcd(modulus);
    debug_assert!(egcd.gcd.is_one(), "residue step not invertible");
    egcd.x.mod_floor(modulus)
}

/// The projected edge path of a word from a point: one `(edge, sign)` step
/// per `t`-letter.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgePath {
    pub steps: Vec<(usize, TSign)>,
}

impl EdgePath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// No step immediately undone: never the same edge with opposite signs
    /// in consecutive positions.
    pub fn is_reduced(&self) -> bool {
        self.steps
            .windows(2)
            .all(|w| !(w[0].0 == w[1].0 && w[0].1 == w[1].1.opposite()))
    }
}

/// Applies a word letter by letter. `b`-letters always act; a `t`-letter
/// needs a `tau`-edge at the current residue class and fails with the
/// 1-based length of the failing prefix otherwise.
pub fn apply(p: &Params, a: &Preaction, x: &Point, w: &Word) -> Result<Point, PreactionError> {
    let mut cur = a.normalize(x.clone());
    for (i, &letter) in w.letters().iter().enumerate() {
        match a.step(p, &cur, letter) {
            Ok((next, _)) => cur = next,
            Err(_) => return Err(PreactionError::Undefined { prefix_len: i + 1 }),
        }
    }
    Ok(cur)
}

/// Applies a word, grafting the maximal-forest extension on demand whenever a
/// `t`-letter is undefined; total. The grafted labels and anchors follow the
/// same canonical rules as [`saturate`], so the result is a sub-preaction of
/// the level saturation.
pub fn apply_saturating(p: &Params, a: &mut Preaction, x: &Point, w: &Word) -> Point {
    let mut cur = a.normalize(x.clone());
    for &letter in w.letters() {
        cur = match a.step(p, &cur, letter) {
            Ok((next, _)) => next,
            Err(miss) => {
                a.graft(p, &miss);
                let (next, _) = a.step(p, &cur, letter).expect("graft fills the slot");
                next
            }
        };
    }
    cur
}

/// Like [`apply_saturating`] but records the orbit visited after every
/// letter (the projected vertex path at letter granularity).
pub fn apply_saturating_traced(
    p: &Params,
    a: &mut Preaction,
    x: &Point,
    w: &Word,
) -> (Point, Vec<usize>) {
    let mut cur = a.normalize(x.clone());
    let mut orbits = Vec::with_capacity(w.len());
    for &letter in w.letters() {
        cur = match a.step(p, &cur, letter) {
            Ok((next, _)) => next,
            Err(miss) => {
                a.graft(p, &miss);
                let (next, _) = a.step(p, &cur, letter).expect("graft fills the slot");
                next
            }
        };
        orbits.push(cur.orbit);
    }
    (cur, orbits)
}

/// The edge path in the quotient graph derived from `(x, w)`; its length is
/// the number of `t`-letters of `w` and its endpoint is the projection of
/// `apply(a, x, w)`.
pub fn derive_edge_path(
    p: &Params,
    a: &Preaction,
    x: &Point,
    w: &Word,
) -> Result<EdgePath, PreactionError> {
    let mut cur = a.normalize(x.clone());
    let mut path = EdgePath::default();
    for (i, &letter) in w.letters().iter().enumerate() {
        match a.step(p, &cur, letter) {
            Ok((next, traversed)) => {
                if let Some(step) = traversed {
                    path.steps.push(step);
                }
                cur = next;
            }
            Err(_) => return Err(PreactionError::Undefined { prefix_len: i + 1 }),
        }
    }
    Ok(path)
}

/// The quotient `(m,n)`-graph: one vertex per orbit labeled by its
/// cardinality, one positive edge per `tau`-edge, rooted at the basepoint's
/// orbit.
pub fn mn_graph_of(a: &Preaction) -> MnGraph {
    let mut g = MnGraph::new();
    for orbit in &a.orbits {
        g.add_vertex(orbit.card.clone());
    }
    for e in &a.edges {
        g.add_edge(e.src, e.trg);
    }
    g.set_root(a.basepoint.orbit);
    g
}

/// Verifies the preaction invariants: residues in range and pairwise
/// distinct per orbit and direction, anchors in the declared residue class,
/// and the Transfer Equation (coset-count equality) on every edge.
pub fn validate_preaction(p: &Params, a: &Preaction) -> ValidationReport {
    let mut report = ValidationReport {
        saturated: a.is_saturated(p),
        connected: mn_graph_of(a).is_connected(),
        ..Default::default()
    };
    for (i, e) in a.edges.iter().enumerate() {
        let out_cap = a.card(e.src).meet(p.n());
        let in_cap = a.card(e.trg).meet(p.m());
        if e.src_res >= out_cap || e.trg_res >= in_cap {
            report
                .degree_violations
                .push(DegreeViolation::ResidueOutOfRange { edge: i });
        }
        if residue(&e.anchor, in_cap) != e.trg_res % in_cap.max(1) {
            report
                .transfer_violations
                .push(TransferViolation::AnchorClass { edge: i });
        }
        if let Label::Fin(card) = a.card(e.trg) {
            if e.anchor.is_negative() || e.anchor >= BigInt::from(card.clone()) {
                report
                    .transfer_violations
                    .push(TransferViolation::AnchorClass { edge: i });
            }
        }
        let lhs = a.card(e.src).transfer_count(p.n());
        let rhs = a.card(e.trg).transfer_count(p.m());
        if lhs != rhs {
            report.transfer_violations.push(TransferViolation::Equation {
                edge: i,
                src_side: a.card(e.src).clone(),
                trg_side: a.card(e.trg).clone(),
            });
        }
    }
    for (o, orbit) in a.orbits.iter().enumerate() {
        let mut out_res: Vec<u64> = orbit.out_edges.iter().map(|&e| a.edges[e].src_res).collect();
        out_res.sort_unstable();
        for w in out_res.windows(2) {
            if w[0] == w[1] {
                report
                    .degree_violations
                    .push(DegreeViolation::DuplicateOutResidue { orbit: o, residue: w[0] });
            }
        }
        let mut in_res: Vec<u64> = orbit.in_edges.iter().map(|&e| a.edges[e].trg_res).collect();
        in_res.sort_unstable();
        for w in in_res.windows(2) {
            if w[0] == w[1] {
                report
                    .degree_violations
                    .push(DegreeViolation::DuplicateInResidue { orbit: o, residue: w[0] });
            }
        }
        let out_cap = orbit.card.meet(p.n());
        if orbit.out_edges.len() as u64 > out_cap {
            report.degree_violations.push(DegreeViolation::OutCapExceeded {
                vertex: o,
                used: orbit.out_edges.len(),
                cap: out_cap,
            });
        }
        let in_cap = orbit.card.meet(p.m());
        if orbit.in_edges.len() as u64 > in_cap {
            report.degree_violations.push(DegreeViolation::InCapExceeded {
                vertex: o,
                used: orbit.in_edges.len(),
                cap: in_cap,
            });
        }
    }
    report
}

/// Grafts the maximal forest out to graph distance `depth` from the current
/// graph: `depth` rounds, each filling every missing degree slot of every
/// orbit present at the start of the round with a fresh forest orbit labeled
/// by [`graphs::forest_label`]. The induced structure on pre-existing orbits
/// is untouched, and `saturate(saturate(a, 1), 1) == saturate(a, 2)`.
pub fn saturate(p: &Params, a: &Preaction, depth: u32) -> Result<Preaction, PreactionError> {
    if a.is_saturated(p) {
        return Err(PreactionError::AlreadySaturated);
    }
    let mut out = a.clone();
    for _ in 0..depth {
        let frontier = out.orbits.len();
        for orbit in 0..frontier {
            for miss in out.missing_slots(p, orbit) {
                out.graft(p, &miss);
            }
        }
    }
    Ok(out)
}

/// Fills every missing slot of every orbit within distance `radius - 1` of
/// `center`, so the rooted ball of that radius around `center` in the
/// quotient graph carries the full saturated structure.
pub fn ensure_ball_saturated(p: &Params, a: &mut Preaction, center: usize, radius: u32) {
    if radius == 0 {
        return;
    }
    loop {
        let dist = mn_graph_of(a).distances_from(center);
        let mut misses = Vec::new();
        for orbit in 0..a.orbits.len() {
            if matches!(dist[orbit], Some(d) if d < radius) {
                misses.extend(a.missing_slots(p, orbit));
            }
        }
        if misses.is_empty() {
            return;
        }
        for miss in misses {
            a.graft(p, &miss);
        }
    }
}

/// Whether the element spelled by `w` stabilizes the basepoint: the word is
/// applied in the maximal-forest saturation (grown lazily as far as the word
/// needs, at most its `t`-count) and compared with the basepoint. Saturation
/// does not change the stabilizer, so this is well-defined.
pub fn stabilizer_contains(p: &Params, a: &Preaction, w: &Word) -> bool {
    let mut grown = a.clone();
    let base = grown.basepoint().clone();
    let end = apply_saturating(p, &mut grown, &base, w);
    end == *a.basepoint()
}

/// Builds a preaction whose quotient graph is `g`: one cycle per vertex with
/// cardinality its label, one `tau`-edge per positive edge with residues
/// assigned greedily in increasing order and anchors equal to the target
/// residue, based at the root with offset 0.
pub fn realize(p: &Params, g: &MnGraph) -> Result<Preaction, PreactionError> {
    let report = graphs::validate(p, g);
    if !report.is_valid() {
        return Err(PreactionError::InvalidGraph(format!(
            "{} degree and {} transfer violations",
            report.degree_violations.len(),
            report.transfer_violations.len()
        )));
    }
    if !report.connected {
        return Err(PreactionError::InvalidGraph("graph not connected".into()));
    }
    let Some(root) = g.root() else {
        return Err(PreactionError::InvalidGraph("graph has no root".into()));
    };
    let mut pre = Preaction {
        orbits: g
            .labels()
            .iter()
            .map(|card| OrbitData {
                card: card.clone(),
                level: 0,
                parent: None,
                out_edges: Vec::new(),
                in_edges: Vec::new(),
            })
            .collect(),
        edges: Vec::new(),
        basepoint: Point::new(root, 0),
    };
    let mut next_out = vec![0u64; g.vertex_count()];
    let mut next_in = vec![0u64; g.vertex_count()];
    for &(src, trg) in g.edges() {
        let src_res = next_out[src];
        next_out[src] += 1;
        let trg_res = next_in[trg];
        next_in[trg] += 1;
        pre.add_edge(TauEdge {
            src,
            src_res,
            trg,
            trg_res,
            anchor: BigInt::from(trg_res),
        });
    }
    Ok(pre)
}
