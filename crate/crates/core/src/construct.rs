//! Step-by-step construction of perfectly controllable graphs over "double
//! node sets": nodes `1..=2k` split into `Ω₁ = {1..k}` and `Ω₂ = {k+1..2k}`,
//! with pair `p = (p, k+p)`.
//!
//! Edges added by construction are drawn in a fixed two-row schematic
//! (`Ω₁` member of pair `p` at `(p, 1)`, `Ω₂` member at `(p, 0)`, satellites
//! placed off the rows), and the "does not intersect with any other edge"
//! rule is decided on straight segments in that drawing. Violations are
//! reported, never fatal: crossing designs can still be perfectly
//! controllable.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::exact::check_perfect_exact;
use crate::graph::{Edge, Graph, GraphError, Node};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error("a pair scheme needs at least one pair")]
    ZeroPairs,
    #[error("base graph has {got} nodes but the scheme needs {expected}")]
    BaseSize { expected: usize, got: usize },
    #[error("pair {p} out of range 1..={k}")]
    PairOutOfRange { p: usize, k: usize },
    #[error("pair {0} already has its intra-pair edge")]
    DuplicateIntra(usize),
    #[error("node {node} is not a pair node (1..={max})")]
    NotPairNode { node: Node, max: Node },
    #[error("node {node} does not exist (the design has {n} nodes)")]
    DanglingNode { node: Node, n: usize },
    #[error("a satellite needs at least one attachment")]
    EmptyAttach,
    #[error("edge {0}-{1} already exists")]
    DuplicateEdge(Node, Node),
    #[error("edge {0}-{0} would be a self-loop")]
    SelfLoop(Node),
    #[error("stage {stage} is not applicable: {reason}")]
    Inapplicable { stage: Stage, reason: &'static str },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("op {op} (line {line}): {source}")]
    Op { op: usize, line: usize, source: Box<ConstructError> },
}

impl From<GraphError> for ConstructError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::SelfLoop(v) => Self::SelfLoop(v),
            GraphError::DuplicateEdge(u, v) => Self::DuplicateEdge(u, v),
            GraphError::NodeOutOfRange { node, n } => Self::DanglingNode { node, n },
            GraphError::NoNodes => Self::ZeroPairs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn same(self, o: Point) -> bool {
        (self.x - o.x).abs() <= EPS && (self.y - o.y).abs() <= EPS
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// `p` on the closed segment `ab`.
fn on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p).abs() <= EPS
        && p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// A drawn edge: endpoint labels and positions.
#[derive(Clone, Copy, Debug)]
struct Segment {
    u: Node,
    v: Node,
    a: Point,
    b: Point,
}

impl Segment {
    fn has(&self, w: Node) -> bool {
        self.u == w || self.v == w
    }
}

/// Two drawn edges conflict when their closed segments share any point that
/// is not a common endpoint node: proper crossings, T-junctions and
/// collinear overlaps all count.
fn conflict(s: &Segment, t: &Segment) -> bool {
    if (s.u == t.u && s.v == t.v) || (s.u == t.v && s.v == t.u) {
        return true;
    }
    let shared_point =
        |p: Point| -> bool { [s.u, s.v].into_iter().zip([s.a, s.b]).any(|(w, q)| t.has(w) && q.same(p)) };
    let o1 = orient(s.a, s.b, t.a);
    let o2 = orient(s.a, s.b, t.b);
    let o3 = orient(t.a, t.b, s.a);
    let o4 = orient(t.a, t.b, s.b);
    if o1.abs() <= EPS && o2.abs() <= EPS {
        // collinear: project onto the dominant axis of s
        let horizontal = (s.b.x - s.a.x).abs() >= (s.b.y - s.a.y).abs();
        let key = |p: Point| if horizontal { p.x } else { p.y };
        let (s0, s1) = (key(s.a).min(key(s.b)), key(s.a).max(key(s.b)));
        let (t0, t1) = (key(t.a).min(key(t.b)), key(t.a).max(key(t.b)));
        let lo = s0.max(t0);
        let hi = s1.min(t1);
        if hi < lo - EPS {
            return false;
        }
        if hi - lo > EPS {
            return true;
        }
        // touching at a single point
        let touch = [s.a, s.b, t.a, t.b].into_iter().find(|p| (key(*p) - lo).abs() <= EPS).expect("touch point");
        return !shared_point(touch);
    }
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 && o1.abs() > EPS && o2.abs() > EPS && o3.abs() > EPS && o4.abs() > EPS {
        return true;
    }
    let touches = [
        (t.a, on_segment(t.a, s.a, s.b)),
        (t.b, on_segment(t.b, s.a, s.b)),
        (s.a, on_segment(s.a, t.a, t.b)),
        (s.b, on_segment(s.b, t.a, t.b)),
    ];
    touches.into_iter().any(|(p, on)| on && !shared_point(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Omega {
    One,
    Two,
}

/// Pair layout, fixed flags and satellite positions.
#[derive(Clone, Debug, PartialEq)]
pub struct PairScheme {
    k: usize,
    fixed: Vec<bool>,
    satellites: Vec<Point>,
}

impl PairScheme {
    pub fn new(k: usize) -> Result<Self, ConstructError> {
        if k == 0 {
            return Err(ConstructError::ZeroPairs);
        }
        Ok(Self { k, fixed: vec![false; k], satellites: Vec::new() })
    }

    pub fn pair_count(&self) -> usize {
        self.k
    }

    /// `2k` plus the satellites.
    pub fn node_count(&self) -> usize {
        2 * self.k + self.satellites.len()
    }

    pub fn omega1(&self) -> Vec<Node> {
        (1..=self.k).collect()
    }

    pub fn omega2(&self) -> Vec<Node> {
        (self.k + 1..=2 * self.k).collect()
    }

    /// `(Ω₁ member, Ω₂ member)` of pair `p`.
    pub fn pair(&self, p: usize) -> (Node, Node) {
        (p, self.k + p)
    }

    pub fn pairs(&self) -> Vec<(Node, Node)> {
        (1..=self.k).map(|p| self.pair(p)).collect()
    }

    fn member(&self, p: usize, w: Omega) -> Node {
        match w {
            Omega::One => p,
            Omega::Two => self.k + p,
        }
    }

    /// `None` for satellites.
    pub fn omega_of(&self, v: Node) -> Option<Omega> {
        if (1..=self.k).contains(&v) {
            Some(Omega::One)
        } else if (self.k + 1..=2 * self.k).contains(&v) {
            Some(Omega::Two)
        } else {
            None
        }
    }

    /// `None` for satellites.
    pub fn pair_of(&self, v: Node) -> Option<usize> {
        self.omega_of(v).map(|_| if v <= self.k { v } else { v - self.k })
    }

    pub fn is_fixed(&self, p: usize) -> bool {
        self.fixed[p - 1]
    }

    pub fn fixed_pairs(&self) -> Vec<usize> {
        (1..=self.k).filter(|&p| self.is_fixed(p)).collect()
    }

    pub fn unfixed_pairs(&self) -> Vec<usize> {
        (1..=self.k).filter(|&p| !self.is_fixed(p)).collect()
    }

    pub fn satellites(&self) -> Vec<(Node, Point)> {
        self.satellites.iter().enumerate().map(|(i, p)| (2 * self.k + 1 + i, *p)).collect()
    }

    pub fn coord(&self, v: Node) -> Point {
        match self.omega_of(v) {
            Some(Omega::One) => Point::new(v as f64, 1.0),
            Some(Omega::Two) => Point::new((v - self.k) as f64, 0.0),
            None => self.satellites[v - 2 * self.k - 1],
        }
    }

    fn check_pair(&self, p: usize) -> Result<(), ConstructError> {
        if p == 0 || p > self.k {
            return Err(ConstructError::PairOutOfRange { p, k: self.k });
        }
        Ok(())
    }
}

/// Which construction rule a new edge breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Both ends in the same group.
    SameGroup,
    /// Both ends in the same double node set.
    SamePair,
    /// The edge meets the drawn edge `blocking` away from a shared endpoint.
    Crossing { blocking: Edge },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SameGroup => f.write_str("violation:i"),
            Violation::SamePair => f.write_str("violation:ii"),
            Violation::Crossing { blocking: (u, v) } => write!(f, "violation:iii blocking={u}-{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstructionOp {
    /// Join both members of each listed pair.
    Intra(Vec<usize>),
    /// Edge between two pair nodes, checked against rules i–iii.
    Cross(Node, Node),
    /// New node joined to every attachment; placed automatically unless
    /// `at` is given.
    Satellite {
        attach: Vec<Node>,
        at: Option<Point>,
    },
    /// Extra edges from an existing node, checked against rule iii.
    Link {
        node: Node,
        attach: Vec<Node>,
    },
    MarkFixed(usize),
}

impl fmt::Display for ConstructionOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        match self {
            ConstructionOp::Intra(ps) => write!(f, "intra {}", join(ps)),
            ConstructionOp::Cross(u, v) => write!(f, "cross {u} {v}"),
            ConstructionOp::Satellite { attach, at: None } => write!(f, "sat {}", join(attach)),
            ConstructionOp::Satellite { attach, at: Some(p) } => write!(f, "sat {} at={p}", join(attach)),
            ConstructionOp::Link { node, attach } => write!(f, "link {node} {}", join(attach)),
            ConstructionOp::MarkFixed(p) => write!(f, "fix {p}"),
        }
    }
}

/// A graph under construction together with its schematic.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    scheme: PairScheme,
    graph: Graph,
    /// Edges added by construction ops, in order; the base graph's own edges
    /// are not part of the schematic.
    drawn: Vec<Edge>,
}

fn norm(u: Node, v: Node) -> Edge {
    (u.min(v), u.max(v))
}

impl Design {
    pub fn new(scheme: PairScheme, base: Graph) -> Result<Self, ConstructError> {
        if base.node_count() != scheme.node_count() {
            return Err(ConstructError::BaseSize { expected: scheme.node_count(), got: base.node_count() });
        }
        Ok(Self { scheme, graph: base, drawn: Vec::new() })
    }

    pub fn scheme(&self) -> &PairScheme {
        &self.scheme
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn drawn(&self) -> &[Edge] {
        &self.drawn
    }

    fn segment(&self, u: Node, v: Node) -> Segment {
        Segment { u, v, a: self.scheme.coord(u), b: self.scheme.coord(v) }
    }

    fn check_node(&self, v: Node) -> Result<(), ConstructError> {
        if v == 0 || v > self.graph.node_count() {
            return Err(ConstructError::DanglingNode { node: v, n: self.graph.node_count() });
        }
        Ok(())
    }

    fn check_pair_node(&self, v: Node) -> Result<(), ConstructError> {
        if self.scheme.omega_of(v).is_none() {
            return Err(ConstructError::NotPairNode { node: v, max: 2 * self.scheme.k });
        }
        Ok(())
    }

    /// First drawn edge that the segment `u–v` runs into.
    fn blocking(&self, u: Node, v: Node) -> Option<Edge> {
        let s = self.segment(u, v);
        self.drawn.iter().copied().find(|&(a, b)| conflict(&s, &self.segment(a, b)))
    }

    /// Rules i–iii for a prospective edge between two pair nodes; `None`
    /// means the edge is admissible.
    pub fn validate_cross_edge(&self, u: Node, v: Node) -> Result<Option<Violation>, ConstructError> {
        self.check_pair_node(u)?;
        self.check_pair_node(v)?;
        if self.scheme.omega_of(u) == self.scheme.omega_of(v) {
            return Ok(Some(Violation::SameGroup));
        }
        if self.scheme.pair_of(u) == self.scheme.pair_of(v) {
            return Ok(Some(Violation::SamePair));
        }
        Ok(self.blocking(u, v).map(|blocking| Violation::Crossing { blocking }))
    }

    fn with_edge(&self, u: Node, v: Node) -> Result<Self, ConstructError> {
        let mut next = self.clone();
        next.graph = self.graph.add_edge(u, v)?;
        next.drawn.push(norm(u, v));
        Ok(next)
    }

    pub fn add_intra(&self, pairs: &[usize]) -> Result<Self, ConstructError> {
        let mut next = self.clone();
        for &p in pairs {
            self.scheme.check_pair(p)?;
            let (a, b) = self.scheme.pair(p);
            if next.graph.has_edge(a, b) {
                return Err(ConstructError::DuplicateIntra(p));
            }
            next = next.with_edge(a, b)?;
        }
        Ok(next)
    }

    /// Adds `u–v` even when a rule is violated. The first cross edge of a
    /// design fixes the two pairs it joins.
    pub fn add_cross(&self, u: Node, v: Node) -> Result<(Self, Option<Violation>), ConstructError> {
        let violation = self.validate_cross_edge(u, v)?;
        let mut next = self.with_edge(u, v)?;
        let (pu, pv) = (self.scheme.pair_of(u).expect("pair node"), self.scheme.pair_of(v).expect("pair node"));
        if violation.is_none() && self.scheme.fixed_pairs().is_empty() {
            next.scheme.fixed[pu - 1] = true;
            next.scheme.fixed[pv - 1] = true;
        }
        Ok((next, violation))
    }

    pub fn mark_fixed(&self, p: usize) -> Result<Self, ConstructError> {
        self.scheme.check_pair(p)?;
        let mut next = self.clone();
        next.scheme.fixed[p - 1] = true;
        Ok(next)
    }

    /// Number of schematic conflicts if a satellite at `at` were joined to
    /// `attach`.
    fn placement_cost(&self, at: Point, attach: &[Node]) -> usize {
        let sat = self.graph.node_count() + 1;
        let segs: Vec<Segment> =
            attach.iter().map(|&a| Segment { u: sat, v: a, a: at, b: self.scheme.coord(a) }).collect();
        let mut cost = 0;
        for s in &segs {
            cost += self.drawn.iter().filter(|&&(a, b)| conflict(s, &self.segment(a, b))).count();
            cost += self.graph.nodes().filter(|&w| w != s.v && on_segment(self.scheme.coord(w), s.a, s.b)).count();
        }
        for (i, s) in segs.iter().enumerate() {
            cost += segs[i + 1..].iter().filter(|t| conflict(s, t)).count();
        }
        cost
    }

    /// Above or below the row when every attachment sits on one row,
    /// otherwise the centroid or a half-unit offset from it; the first
    /// candidate with the fewest conflicts wins.
    fn place_satellite(&self, attach: &[Node]) -> Point {
        let pts: Vec<Point> = attach.iter().map(|&a| self.scheme.coord(a)).collect();
        let m = Point::new(
            pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64,
            pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64,
        );
        let mut candidates = Vec::new();
        if pts.iter().all(|p| (p.y - 1.0).abs() <= EPS) {
            candidates.push(Point::new(m.x, 1.5));
        } else if pts.iter().all(|p| p.y.abs() <= EPS) {
            candidates.push(Point::new(m.x, -0.5));
        }
        candidates.push(m);
        for (dx, dy) in [(-0.5, 0.0), (0.5, 0.0), (0.0, 0.5), (0.0, -0.5), (0.25, 0.25), (-0.25, -0.25)] {
            candidates.push(Point::new(m.x + dx, m.y + dy));
        }
        let occupied: Vec<Point> = self.graph.nodes().map(|v| self.scheme.coord(v)).collect();
        candidates
            .into_iter()
            .filter(|c| !occupied.iter().any(|o| o.same(*c)))
            .map(|c| (self.placement_cost(c, attach), c))
            .min_by_key(|(cost, _)| *cost)
            .map(|(_, c)| c)
            .unwrap_or(Point::new(m.x + 0.125, m.y + 0.375))
    }

    /// Appends node `2k + s + 1` joined to each attachment. Returns the new
    /// label and the first drawn edge its edges run into, if any.
    pub fn add_satellite(
        &self,
        attach: &[Node],
        at: Option<Point>,
    ) -> Result<(Self, Node, Option<Violation>), ConstructError> {
        if attach.is_empty() {
            return Err(ConstructError::EmptyAttach);
        }
        for (i, &a) in attach.iter().enumerate() {
            self.check_node(a)?;
            if attach[..i].contains(&a) {
                return Err(ConstructError::DuplicateEdge(a, self.graph.node_count() + 1));
            }
        }
        let pos = at.unwrap_or_else(|| self.place_satellite(attach));
        let mut next = self.clone();
        next.graph = self.graph.add_node();
        next.scheme.satellites.push(pos);
        let sat = next.graph.node_count();
        let mut violation = None;
        for &a in attach {
            if violation.is_none() {
                violation = self.blocking_from(&next, sat, a);
            }
        }
        for &a in attach {
            next = next.with_edge(a, sat)?;
        }
        Ok((next, sat, violation))
    }

    fn blocking_from(&self, next: &Design, sat: Node, a: Node) -> Option<Violation> {
        let s = next.segment(sat, a);
        self.drawn
            .iter()
            .copied()
            .find(|&(x, y)| conflict(&s, &next.segment(x, y)))
            .map(|blocking| Violation::Crossing { blocking })
    }

    /// Adds `node–a` for each attachment; only rule iii is checked.
    pub fn link(&self, node: Node, attach: &[Node]) -> Result<(Self, Option<Violation>), ConstructError> {
        self.check_node(node)?;
        if attach.is_empty() {
            return Err(ConstructError::EmptyAttach);
        }
        let mut next = self.clone();
        let mut violation = None;
        for &a in attach {
            self.check_node(a)?;
            if violation.is_none() {
                violation = next.blocking(node, a).map(|blocking| Violation::Crossing { blocking });
            }
            next = next.with_edge(node, a)?;
        }
        Ok((next, violation))
    }

    /// Applies one op; violations are returned, structural problems are errors.
    pub fn apply(&self, op: &ConstructionOp) -> Result<(Self, Option<Violation>), ConstructError> {
        match op {
            ConstructionOp::Intra(ps) => Ok((self.add_intra(ps)?, None)),
            ConstructionOp::Cross(u, v) => self.add_cross(*u, *v),
            ConstructionOp::Satellite { attach, at } => {
                let (d, _, v) = self.add_satellite(attach, *at)?;
                Ok((d, v))
            }
            ConstructionOp::Link { node, attach } => self.link(*node, attach),
            ConstructionOp::MarkFixed(p) => Ok((self.mark_fixed(*p)?, None)),
        }
    }

    /// Every pair of drawn edges that meet away from a shared endpoint.
    pub fn crossings(&self) -> Vec<(Edge, Edge)> {
        let mut out = Vec::new();
        for (i, &(a, b)) in self.drawn.iter().enumerate() {
            let s = self.segment(a, b);
            for &(c, d) in &self.drawn[i + 1..] {
                if conflict(&s, &self.segment(c, d)) {
                    out.push(((a, b), (c, d)));
                }
            }
        }
        out
    }
}

/// A parsed construction script: `pairs k=<k>` followed by ops, each
/// remembered with its source line.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionScript {
    pub k: usize,
    pub ops: Vec<(usize, ConstructionOp)>,
}

fn parse_nodes(line: usize, toks: &[&str]) -> Result<Vec<usize>, ConstructError> {
    toks.iter()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| ConstructError::Syntax { line, message: format!("expected a number, got `{t}`") })
        })
        .collect()
}

fn parse_point(line: usize, text: &str) -> Result<Point, ConstructError> {
    let bad = || ConstructError::Syntax { line, message: format!("expected at=<x>,<y>, got `at={text}`") };
    let (x, y) = text.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(bad());
    }
    Ok(Point::new(x, y))
}

impl ConstructionScript {
    pub fn parse(text: &str) -> Result<Self, ConstructError> {
        let mut k = None;
        let mut ops = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            let syntax = |message: String| ConstructError::Syntax { line, message };
            let (head, args) = (toks[0], &toks[1..]);
            if k.is_none() {
                let value = match (head, args) {
                    ("pairs", [arg]) => arg.strip_prefix("k=").and_then(|v| v.parse::<usize>().ok()),
                    _ => None,
                };
                match value {
                    Some(v) => k = Some(v),
                    None => return Err(syntax(format!("expected `pairs k=<count>` first, got `{body}`"))),
                }
                continue;
            }
            let op = match head {
                "pairs" => return Err(syntax("`pairs` may appear only once".into())),
                "intra" if !args.is_empty() => ConstructionOp::Intra(parse_nodes(line, args)?),
                "cross" if args.len() == 2 => {
                    let v = parse_nodes(line, args)?;
                    ConstructionOp::Cross(v[0], v[1])
                }
                "sat" if !args.is_empty() => {
                    let (at, nodes): (Vec<&str>, Vec<&str>) = args.iter().partition(|t| t.starts_with("at="));
                    if at.len() > 1 {
                        return Err(syntax("`at=` given more than once".into()));
                    }
                    let at = at.first().map(|t| parse_point(line, &t[3..])).transpose()?;
                    ConstructionOp::Satellite { attach: parse_nodes(line, &nodes)?, at }
                }
                "link" if args.len() >= 2 => {
                    let v = parse_nodes(line, args)?;
                    ConstructionOp::Link { node: v[0], attach: v[1..].to_vec() }
                }
                "fix" if args.len() == 1 => ConstructionOp::MarkFixed(parse_nodes(line, args)?[0]),
                "intra" | "cross" | "sat" | "link" | "fix" => {
                    return Err(syntax(format!("wrong number of arguments in `{body}`")))
                }
                _ => return Err(syntax(format!("unknown op `{head}`"))),
            };
            ops.push((line, op));
        }
        let k =
            k.ok_or(ConstructError::Syntax { line: 1, message: "empty script: expected `pairs k=<count>`".into() })?;
        PairScheme::new(k)?;
        Ok(Self { k, ops })
    }
}

/// Outcome of an op in a script run.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    /// 1-based; op 1 is the `pairs` header.
    pub op: usize,
    pub violation: Option<Violation>,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "{} ok", self.op),
            Some(v) => write!(f, "{} {v}", self.op),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptRun {
    pub design: Design,
    pub log: Vec<LogEntry>,
}

impl ScriptRun {
    pub fn render_log(&self) -> String {
        self.log.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Replays `script` on `base`; violations are logged and execution goes on.
pub fn run_script(script: &ConstructionScript, base: &Graph) -> Result<ScriptRun, ConstructError> {
    let mut design = Design::new(PairScheme::new(script.k)?, base.clone())?;
    let mut log = vec![LogEntry { op: 1, violation: None }];
    for (i, (line, op)) in script.ops.iter().enumerate() {
        let opno = i + 2;
        let (next, violation) =
            design.apply(op).map_err(|e| ConstructError::Op { op: opno, line: *line, source: Box::new(e) })?;
        design = next;
        log.push(LogEntry { op: opno, violation });
    }
    Ok(ScriptRun { design, log })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Cross edge at the pair without an intra-pair edge.
    Step3,
    /// Cross edge between unfixed pairs.
    Step4a,
    /// Satellite on two nodes of the unfixed pairs.
    Step4b,
    /// Satellite on a whole unfixed pair plus one node of another.
    Step4c,
    /// Every Step-4b satellite combined with every Step-4a edge.
    Step5,
    /// Cross edge between unfixed pairs of a satellite design.
    Step6,
    /// Satellite on same-group fixed nodes, with third-edge extensions.
    Step7,
}

pub const ALL_STAGES: [Stage; 7] =
    [Stage::Step3, Stage::Step4a, Stage::Step4b, Stage::Step4c, Stage::Step5, Stage::Step6, Stage::Step7];

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Step3 => "step3",
            Stage::Step4a => "step4a",
            Stage::Step4b => "step4b",
            Stage::Step4c => "step4c",
            Stage::Step5 => "step5",
            Stage::Step6 => "step6",
            Stage::Step7 => "step7",
        })
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ALL_STAGES.into_iter().find(|st| st.to_string() == s.to_ascii_lowercase()).ok_or_else(|| {
            format!("unknown stage `{s}` (expected one of step3, step4a, step4b, step4c, step5, step6, step7)")
        })
    }
}

/// One legal completion of a stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    /// `(a)`, `(b)`, ... in enumeration order.
    pub label: String,
    pub ops: Vec<ConstructionOp>,
    pub design: Design,
    /// Rule violations reported by the ops (only possible where a stage
    /// does not filter, e.g. Step-5 satellites).
    pub violations: Vec<Violation>,
    /// Exact perfect-controllability verdict of the resulting graph.
    pub perfect: bool,
}

impl Variant {
    pub fn crossings(&self) -> Vec<(Edge, Edge)> {
        self.design.crossings()
    }
}

fn label(i: usize) -> String {
    let mut s = String::new();
    let mut i = i;
    loop {
        s.insert(0, (b'a' + (i % 26) as u8) as char);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    format!("({s})")
}

struct Draft {
    ops: Vec<ConstructionOp>,
    design: Design,
    violations: Vec<Violation>,
}

impl Draft {
    fn start(d: &Design) -> Self {
        Self { ops: Vec::new(), design: d.clone(), violations: Vec::new() }
    }

    fn then(&self, op: ConstructionOp) -> Result<Self, ConstructError> {
        let (design, v) = self.design.apply(&op)?;
        let mut ops = self.ops.clone();
        ops.push(op);
        let mut violations = self.violations.clone();
        violations.extend(v);
        Ok(Self { ops, design, violations })
    }
}

/// Admissible cross edges `(Ω₁ of a, Ω₂ of b)` and `(Ω₁ of b, Ω₂ of a)` for
/// unfixed pairs `a < b`.
fn unfixed_cross_edges(d: &Design) -> Result<Vec<Edge>, ConstructError> {
    let s = d.scheme();
    let free = s.unfixed_pairs();
    let mut out = Vec::new();
    for (i, &a) in free.iter().enumerate() {
        for &b in &free[i + 1..] {
            for (u, v) in
                [(s.member(a, Omega::One), s.member(b, Omega::Two)), (s.member(b, Omega::One), s.member(a, Omega::Two))]
            {
                if !d.graph().has_edge(u, v) && d.validate_cross_edge(u, v)?.is_none() {
                    out.push((u, v));
                }
            }
        }
    }
    Ok(out)
}

/// Two-node satellite attachments on unfixed pairs `a < b`: same Ω₁, same
/// Ω₂, the two cross-group non-pair choices, then each whole pair.
fn unfixed_pair_attachments(s: &PairScheme) -> Vec<Vec<Node>> {
    let free = s.unfixed_pairs();
    let mut out: Vec<Vec<Node>> = Vec::new();
    for (i, &a) in free.iter().enumerate() {
        for &b in &free[i + 1..] {
            let (a1, a2) = s.pair(a);
            let (b1, b2) = s.pair(b);
            for set in [vec![a1, b1], vec![a2, b2], vec![a1, b2], vec![b1, a2], vec![a1, a2], vec![b1, b2]] {
                if !out.contains(&set) {
                    out.push(set);
                }
            }
        }
    }
    out
}

fn require(stage: Stage, ok: bool, reason: &'static str) -> Result<(), ConstructError> {
    if ok {
        Ok(())
    } else {
        Err(ConstructError::Inapplicable { stage, reason })
    }
}

/// Every design reachable from `d` by one legal choice at `stage`,
/// deduplicated by resulting graph, each with its exact verdict.
pub fn enumerate_variants(d: &Design, stage: Stage) -> Result<Vec<Variant>, ConstructError> {
    let s = d.scheme();
    let has_fixed = !s.fixed_pairs().is_empty();
    let two_free = s.unfixed_pairs().len() >= 2;
    let root = Draft::start(d);
    let mut drafts = Vec::new();
    match stage {
        Stage::Step3 => {
            require(stage, !has_fixed, "pairs are already fixed")?;
            let loose: Vec<usize> = (1..=s.k).filter(|&p| !d.graph().has_edge(p, s.k + p)).collect();
            require(stage, !loose.is_empty(), "every pair already has its intra-pair edge")?;
            for p in loose {
                for w in [Omega::Two, Omega::One] {
                    let u = s.member(p, w);
                    let other = if w == Omega::One { s.omega2() } else { s.omega1() };
                    for v in other {
                        if s.pair_of(v) != Some(p)
                            && !d.graph().has_edge(u, v)
                            && d.validate_cross_edge(u, v)?.is_none()
                        {
                            drafts.push(root.then(ConstructionOp::Cross(u.min(v), u.max(v)))?);
                        }
                    }
                }
            }
        }
        Stage::Step4a | Stage::Step6 => {
            require(stage, has_fixed, "no fixed pairs yet")?;
            require(stage, two_free, "fewer than two unfixed pairs")?;
            if stage == Stage::Step6 {
                require(stage, !s.satellites.is_empty(), "needs a satellite design")?;
            }
            for (u, v) in unfixed_cross_edges(d)? {
                drafts.push(root.then(ConstructionOp::Cross(u, v))?);
            }
        }
        Stage::Step4b => {
            require(stage, has_fixed, "no fixed pairs yet")?;
            require(stage, two_free, "fewer than two unfixed pairs")?;
            for attach in unfixed_pair_attachments(s) {
                drafts.push(root.then(ConstructionOp::Satellite { attach, at: None })?);
            }
        }
        Stage::Step4c => {
            require(stage, has_fixed, "no fixed pairs yet")?;
            require(stage, two_free, "fewer than two unfixed pairs")?;
            let free = s.unfixed_pairs();
            for &p in &free {
                for &q in free.iter().filter(|&&q| q != p) {
                    let (p1, p2) = s.pair(p);
                    let (q1, q2) = s.pair(q);
                    for third in [q1, q2] {
                        drafts.push(root.then(ConstructionOp::Satellite { attach: vec![p1, p2, third], at: None })?);
                    }
                }
            }
        }
        Stage::Step5 => {
            require(stage, has_fixed, "no fixed pairs yet")?;
            require(stage, two_free, "fewer than two unfixed pairs")?;
            let edges = unfixed_cross_edges(d)?;
            for attach in unfixed_pair_attachments(s) {
                for &(u, v) in &edges {
                    let with_edge = root.then(ConstructionOp::Cross(u, v))?;
                    drafts.push(with_edge.then(ConstructionOp::Satellite { attach: attach.clone(), at: None })?);
                }
            }
        }
        Stage::Step7 => {
            let fixed = s.fixed_pairs();
            require(stage, fixed.len() >= 2, "needs two fixed pairs")?;
            let free = s.unfixed_pairs();
            let sat = d.graph().node_count() + 1;
            let mut bases = Vec::new();
            let mut thirds = Vec::new();
            let mut extras = Vec::new();
            for w in [Omega::One, Omega::Two] {
                let other = if w == Omega::One { Omega::Two } else { Omega::One };
                let attach: Vec<Node> = fixed.iter().map(|&p| s.member(p, w)).collect();
                let base = root.then(ConstructionOp::Satellite { attach, at: None })?;
                for &p in &free {
                    thirds.push(base.then(ConstructionOp::Link { node: sat, attach: vec![s.member(p, w)] })?);
                }
                for &p in &fixed {
                    let target = s.member(p, other);
                    if base.design.blocking(sat, target).is_none() {
                        extras.push(base.then(ConstructionOp::Link { node: sat, attach: vec![target] })?);
                    }
                }
                bases.push(base);
            }
            // (a) Ω₁ base, its third edges, (d) Ω₂ base, its third edges,
            // then the rule-iii extensions of each base
            let per = free.len();
            let mut thirds = thirds.into_iter();
            for base in bases {
                drafts.push(base);
                drafts.extend(thirds.by_ref().take(per));
            }
            drafts.extend(extras);
        }
    }

    let mut seen = HashSet::new();
    let unique: Vec<Draft> = drafts.into_iter().filter(|dr| seen.insert(dr.design.graph.clone())).collect();
    let verdicts: Vec<bool> = unique.par_iter().map(|dr| check_perfect_exact(&dr.design.graph).is_perfect()).collect();
    Ok(unique
        .into_iter()
        .zip(verdicts)
        .enumerate()
        .map(|(i, (dr, perfect))| Variant {
            label: label(i),
            ops: dr.ops,
            design: dr.design,
            violations: dr.violations,
            perfect,
        })
        .collect())
}
