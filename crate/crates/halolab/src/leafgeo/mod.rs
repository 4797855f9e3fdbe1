//! The graph of leaves restricted to a working ball: exact edge distances
//! and angles, obtuse cubes, ladders with validation, and ladder transport.
//!
//! Distances between nearby leaves reduce to costs of small lamps (a leaf
//! difference can be translated so its support sits next to the identity),
//! so one small BFS ball of the halo product answers every adjacency and
//! angle query exactly.

pub mod builders;

use crate::basegroup::{BaseSubset, Point};
use crate::halocore::{HaloElement, Leaf};
use crate::lampkit::{Halo, Lamp};
use crate::{Caps, Error, Result};
use std::collections::HashMap;

/// Shared exact-distance oracle for leaf geometry at scales up to `radius`.
pub struct LeafMetric<'a> {
    halo: &'a Halo,
    caps: &'a Caps,
    radius: u32,
    costs: HashMap<Lamp, (u32, Point)>,
    ball: BaseSubset,
}

impl<'a> LeafMetric<'a> {
    pub fn new(halo: &'a Halo, radius: u32, caps: &'a Caps) -> Result<LeafMetric<'a>> {
        let costs = halo.lamp_costs(radius, caps)?;
        let ball = halo
            .base()
            .ball(&halo.base().identity(), radius + halo.r0(), caps)?;
        Ok(LeafMetric { halo, caps, radius, costs, ball })
    }

    pub fn halo(&self) -> &Halo {
        self.halo
    }

    /// Translations `k` with `k · supp(e)` inside the cost ball.
    fn aligned(&self, e: &Lamp) -> Vec<Point> {
        let supp = self.halo.support(e);
        let g = self.halo.base();
        let Some(s0) = supp.min_point() else {
            return vec![g.identity()];
        };
        let s0_inv = g.inv(s0);
        let mut out = Vec::new();
        let bound = (self.radius + self.halo.r0()) as u64;
        for b in self.ball.iter() {
            let k = g.mul(b, &s0_inv);
            if supp.iter().all(|s| g.mul(&k, s).weight() <= bound) {
                out.push(k);
            }
        }
        out
    }

    /// Exact leaf distance if it is ≤ the metric radius.
    pub fn leaf_dist(&self, p: &Leaf, q: &Leaf) -> Result<Option<u32>> {
        let e = self
            .halo
            .lamp_mul(&self.halo.lamp_inv(&p.label)?, &q.label)?;
        if e.is_identity() {
            return Ok(Some(0));
        }
        let mut best = None;
        for k in self.aligned(&e) {
            let cand = self.halo.act(&k, &e);
            if let Some((d, _)) = self.costs.get(&cand) {
                if best.map_or(true, |b| *d < b) {
                    best = Some(*d);
                }
            }
        }
        Ok(best)
    }

    /// Arrows on `p` at distance exactly `d(p, q)` from `q` (the minimising
    /// projections), exact for distances within the metric radius.
    pub fn minimiser_arrows(&self, p: &Leaf, q: &Leaf) -> Result<(u32, Vec<Point>)> {
        let e = self
            .halo
            .lamp_mul(&self.halo.lamp_inv(&p.label)?, &q.label)?;
        if e.is_identity() {
            return Err(Error::PreconditionViolated("leaves coincide".into()));
        }
        let g = self.halo.base();
        let mut best: Option<u32> = None;
        let mut arrows: Vec<Point> = Vec::new();
        for k in self.aligned(&e) {
            let cand = self.halo.act(&k, &e);
            if let Some((d, _)) = self.costs.get(&cand) {
                match best {
                    Some(b) if *d > b => {}
                    Some(b) if *d == b => arrows.push(g.inv(&k)),
                    _ => {
                        best = Some(*d);
                        arrows = vec![g.inv(&k)];
                    }
                }
            }
        }
        let dist = best.ok_or(Error::Unreachable { cap: self.radius })?;
        arrows.sort();
        arrows.dedup();
        Ok((dist, arrows))
    }

    /// The angle at `o` between adjacent leaves `p` and `q`: the smallest
    /// base distance between minimising projections, minimised over all
    /// minimiser pairs.
    pub fn angle(&self, o: &Leaf, p: &Leaf, q: &Leaf) -> Result<u64> {
        let (_, wp) = self.minimiser_arrows(o, p)?;
        let (_, wq) = self.minimiser_arrows(o, q)?;
        let g = self.halo.base();
        let mut best = u64::MAX;
        for a in &wp {
            for b in &wq {
                best = best.min(g.dist(a, b));
            }
        }
        Ok(best)
    }

    pub fn caps(&self) -> &Caps {
        self.caps
    }
}

/// The graph of leaves meeting a working ball, with exact edge distances
/// and an angle table over adjacent pairs.
pub struct LeafGraph {
    pub eps: u32,
    pub radius: u32,
    pub leaves: Vec<Leaf>,
    pub edges: Vec<(usize, usize, u32)>,
    adjacency: Vec<Vec<usize>>,
    pub angles: HashMap<(usize, usize, usize), u64>,
}

impl LeafGraph {
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn angle(&self, o: usize, p: usize, q: usize) -> Option<u64> {
        self.angles
            .get(&(o, p.min(q), p.max(q)))
            .copied()
    }

    /// All 3-cycles whose six angles are all ≥ r.
    pub fn obtuse_three_cycles(&self, r: u64) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        let n = self.leaves.len();
        for a in 0..n {
            for &b in &self.adjacency[a] {
                if b <= a {
                    continue;
                }
                for &c in &self.adjacency[b] {
                    if c <= b || !self.adjacency[a].contains(&c) {
                        continue;
                    }
                    let angles = [
                        self.angle(a, b, c),
                        self.angle(b, a, c),
                        self.angle(c, a, b),
                    ];
                    if angles.iter().all(|x| x.is_some_and(|v| v >= r)) {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out
    }

    /// Export as DOT for external rendering.
    pub fn to_dot(&self, halo: &Halo) -> String {
        let mut s = String::from("graph leaves {\n");
        for (i, leaf) in self.leaves.iter().enumerate() {
            s.push_str(&format!(
                "  v{} [label=\"{}\"];\n",
                i,
                halo.lamp_to_json(&leaf.label)["payload"]
            ));
        }
        for (a, b, d) in &self.edges {
            s.push_str(&format!("  v{a} -- v{b} [label=\"{d}\"];\n"));
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self, halo: &Halo) -> serde_json::Value {
        serde_json::json!({
            "eps": self.eps,
            "radius": self.radius,
            "vertices": self.leaves.iter().map(|l| halo.lamp_to_json(&l.label)).collect::<Vec<_>>(),
            "edges": self.edges,
            "angles": self.angles.iter()
                .map(|((o, p, q), v)| serde_json::json!([o, p, q, v]))
                .collect::<Vec<_>>(),
        })
    }
}

/// Build the graph of leaves meeting the halo ball of the given radius,
/// with edges at leaf distance ≤ ε.
pub fn build_leaf_graph(halo: &Halo, eps: u32, radius: u32, caps: &Caps) -> Result<LeafGraph> {
    let ball = halo.halo_ball(radius, caps)?;
    let mut leaves: Vec<Leaf> = ball
        .keys()
        .map(|x| Leaf { label: x.lamp.clone() })
        .collect::<std::collections::HashSet<_>>()
        .into_iter()
        .collect();
    leaves.sort_by_key(|l| format!("{:?}", l.label));
    let metric = LeafMetric::new(halo, eps, caps)?;
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); leaves.len()];
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            if let Some(d) = metric.leaf_dist(&leaves[i], &leaves[j])? {
                if d <= eps {
                    edges.push((i, j, d));
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
    }
    let mut angles = HashMap::new();
    for o in 0..leaves.len() {
        let nb = adjacency[o].clone();
        for (ai, &p) in nb.iter().enumerate() {
            for &q in nb.iter().skip(ai + 1) {
                let v = metric.angle(&leaves[o], &leaves[p], &leaves[q])?;
                angles.insert((o, p.min(q), p.max(q)), v);
            }
        }
    }
    Ok(LeafGraph { eps, radius, leaves, edges, adjacency, angles })
}

/// Span the obtuse cube over `o` and adjacent leaves `l_1, …, l_k`: the
/// leaves `o · e_{i_1} ⋯ e_{i_s}` for all index subsets. Requires pairwise
/// angles ≥ `q_threshold` at `o` and commuting differences; every 2-face is
/// certified obtuse at `face_threshold`.
pub fn span_obtuse_cube(
    metric: &LeafMetric,
    o: &Leaf,
    ls: &[Leaf],
    q_threshold: u64,
    face_threshold: u64,
) -> Result<Vec<Leaf>> {
    let halo = metric.halo();
    let diffs: Vec<Lamp> = ls
        .iter()
        .map(|l| halo.lamp_mul(&halo.lamp_inv(&o.label)?, &l.label))
        .collect::<Result<_>>()?;
    for (i, a) in diffs.iter().enumerate() {
        for b in diffs.iter().skip(i + 1) {
            let ab = halo.lamp_mul(a, b)?;
            let ba = halo.lamp_mul(b, a)?;
            if ab != ba {
                return Err(Error::NotCommutative(format!(
                    "edge differences {i} and a later edge do not commute"
                )));
            }
        }
    }
    for (i, a) in ls.iter().enumerate() {
        for (j, b) in ls.iter().enumerate().skip(i + 1) {
            let ang = metric.angle(o, a, b)?;
            if ang < q_threshold {
                return Err(Error::AngleTooSmall(format!(
                    "angle at base between edges {i} and {j} is {ang} < {q_threshold}"
                )));
            }
        }
    }
    // the cube: subsets in binary-counter order
    let k = ls.len();
    let mut cube = Vec::with_capacity(1 << k);
    for mask in 0..(1u32 << k) {
        let mut label = o.label.clone();
        for (i, d) in diffs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                label = halo.lamp_mul(&label, d)?;
            }
        }
        cube.push(Leaf { label });
    }
    // certify the 2-faces
    for i in 0..k {
        for j in i + 1..k {
            for mask in 0..(1u32 << k) {
                if mask & (1 << i) != 0 || mask & (1 << j) != 0 {
                    continue;
                }
                let corners = [
                    &cube[mask as usize],
                    &cube[(mask | 1 << i) as usize],
                    &cube[(mask | 1 << i | 1 << j) as usize],
                    &cube[(mask | 1 << j) as usize],
                ];
                check_square_obtuse(metric, &corners, face_threshold)?;
            }
        }
    }
    Ok(cube)
}

fn check_square_obtuse(metric: &LeafMetric, corners: &[&Leaf; 4], r: u64) -> Result<()> {
    for i in 0..4usize {
        let prev = corners[(i + 3) % 4];
        let next = corners[(i + 1) % 4];
        let ang = metric.angle(corners[i], prev, next)?;
        if ang < r {
            return Err(Error::AngleTooSmall(format!(
                "face angle {ang} below threshold {r} at corner {i}"
            )));
        }
    }
    Ok(())
}

/// An (ε,R)-ladder: paired rungs of leaves with obtuse squares between
/// consecutive rungs.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub rungs: Vec<(Leaf, Leaf)>,
    pub eps: u32,
    pub r: u64,
}

#[derive(Debug, Clone)]
pub struct LadderVerdict {
    pub valid: bool,
    pub squares: usize,
    pub offending: Option<(usize, String)>,
}

/// Validate a ladder: every adjacency at distance ≤ ε and every square of
/// consecutive rungs R-obtuse, all through the exact leaf metric.
pub fn validate_ladder(metric: &LeafMetric, ladder: &Ladder) -> Result<LadderVerdict> {
    let k = ladder.rungs.len();
    let fail = |i: usize, why: String| {
        Ok(LadderVerdict { valid: false, squares: i, offending: Some((i, why)) })
    };
    for i in 0..k {
        let (p, q) = &ladder.rungs[i];
        match metric.leaf_dist(p, q)? {
            Some(d) if d <= ladder.eps => {}
            d => return fail(i, format!("rung pair distance {d:?} exceeds ε")),
        }
        if i + 1 < k {
            let (p2, q2) = &ladder.rungs[i + 1];
            match metric.leaf_dist(p, p2)? {
                Some(d) if d <= ladder.eps => {}
                d => return fail(i, format!("P-side step distance {d:?} exceeds ε")),
            }
            match metric.leaf_dist(q, q2)? {
                Some(d) if d <= ladder.eps => {}
                d => return fail(i, format!("Q-side step distance {d:?} exceeds ε")),
            }
            let corners = [p, p2, q2, q];
            if let Err(e) = check_square_obtuse(metric, &corners, ladder.r) {
                return fail(i, e.to_string());
            }
        }
    }
    Ok(LadderVerdict { valid: true, squares: k.saturating_sub(1), offending: None })
}

/// A witness word: a sequence of halo generators.
#[derive(Clone, Debug, Default)]
pub struct GeneratorWord(pub Vec<HaloElement>);

impl GeneratorWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, halo: &Halo, from: &HaloElement) -> Result<HaloElement> {
        let mut x = from.clone();
        for g in &self.0 {
            x = halo.mul(&x, g)?;
        }
        Ok(x)
    }
}

/// Witness words connecting a point to both leaves of a rung.
#[derive(Clone, Debug, Default)]
pub struct Connection {
    pub to_p: GeneratorWord,
    pub to_q: GeneratorWord,
}

/// Verify that `x` is η-connected to the rung `(p, q)` through the witness
/// words: both words are generator sequences of length ≤ η landing on the
/// respective leaves.
pub fn check_eta_connection(
    halo: &Halo,
    x: &HaloElement,
    rung: &(Leaf, Leaf),
    eta: u32,
    conn: &Connection,
) -> Result<()> {
    let gens: std::collections::HashSet<HaloElement> =
        halo.halo_generators().into_iter().collect();
    for (word, leaf, side) in
        [(&conn.to_p, &rung.0, "P"), (&conn.to_q, &rung.1, "Q")]
    {
        if word.len() as u32 > eta {
            return Err(Error::PreconditionViolated(format!(
                "witness word to {side} has length {} > η = {eta}",
                word.len()
            )));
        }
        for g in &word.0 {
            if !gens.contains(g) {
                return Err(Error::PreconditionViolated(
                    "witness word contains a non-generator".into(),
                ));
            }
        }
        let end = word.apply(halo, x)?;
        if end.lamp != leaf.label {
            return Err(Error::PreconditionViolated(format!(
                "witness word to {side} does not land on the leaf"
            )));
        }
    }
    Ok(())
}

/// Assert the ladder transport bound: if `x` is η-connected to the first
/// rung and `y` to the last, then `d(arrow(x), arrow(y)) ≤ 6η + ε`.
pub fn ladder_transport_check(
    halo: &Halo,
    ladder: &Ladder,
    x: &HaloElement,
    y: &HaloElement,
    eta: u32,
    conn_x: &Connection,
    conn_y: &Connection,
) -> Result<()> {
    let first = ladder.rungs.first().ok_or_else(|| {
        Error::PreconditionViolated("ladder has no rungs".into())
    })?;
    let last = ladder.rungs.last().unwrap();
    check_eta_connection(halo, x, first, eta, conn_x)?;
    check_eta_connection(halo, y, last, eta, conn_y)?;
    let d = halo.base().dist(&x.arrow, &y.arrow);
    let bound = 6 * eta as u64 + ladder.eps as u64;
    if d > bound {
        return Err(Error::PreconditionViolated(format!(
            "transport bound violated: base distance {d} > 6η+ε = {bound}"
        )));
    }
    Ok(())
}

/// A chain of ladders from a point down to the base leaf, with witness
/// connections at every stop.
#[derive(Clone, Debug)]
pub struct LadderChain {
    pub stops: Vec<HaloElement>,
    pub ladders: Vec<Ladder>,
    /// Per ladder: connections at its start stop and its end stop.
    pub conns: Vec<(Connection, Connection)>,
    pub eta: u32,
}

impl LadderChain {
    pub fn trivial(x: HaloElement) -> LadderChain {
        LadderChain { stops: vec![x], ladders: Vec::new(), conns: Vec::new(), eta: 0 }
    }

    /// Full validation: every ladder valid, every stop honestly connected,
    /// every transport bound satisfied, final stop on the base leaf.
    pub fn validate(&self, metric: &LeafMetric) -> Result<()> {
        let halo = metric.halo();
        if self.stops.len() != self.ladders.len() + 1 || self.conns.len() != self.ladders.len() {
            return Err(Error::PreconditionViolated("chain shape mismatch".into()));
        }
        let last = self.stops.last().unwrap();
        if !last.lamp.is_identity() {
            return Err(Error::PreconditionViolated("chain does not reach the base leaf".into()));
        }
        for (i, ladder) in self.ladders.iter().enumerate() {
            let verdict = validate_ladder(metric, ladder)?;
            if !verdict.valid {
                return Err(Error::PreconditionViolated(format!(
                    "ladder {i} invalid: {:?}",
                    verdict.offending
                )));
            }
            ladder_transport_check(
                halo,
                ladder,
                &self.stops[i],
                &self.stops[i + 1],
                self.eta,
                &self.conns[i].0,
                &self.conns[i].1,
            )?;
        }
        Ok(())
    }
}

/// Chain of obtuse cubes joining two leaves of a lamplighter: partition the
/// difference support into classes pairwise ≥ R apart, factor along the
/// classes, and connect consecutive prefixes inside the cube spanned by a
/// class's single-point pieces.
pub fn lighter_cube_chain(
    metric: &LeafMetric,
    from: &Leaf,
    to: &Leaf,
    r: u64,
) -> Result<Vec<Vec<Leaf>>> {
    let halo = metric.halo();
    let e = halo.lamp_mul(&halo.lamp_inv(&from.label)?, &to.label)?;
    let Lamp::Lighter(entries) = &e else {
        return Err(Error::BackendMismatch("cube chains are built for lighter lamps".into()));
    };
    if entries.is_empty() {
        return Ok(Vec::new());
    }
    let g = halo.base();
    // greedy partition into classes with pairwise distance ≥ r
    let mut classes: Vec<Vec<(Point, u8)>> = Vec::new();
    for (p, v) in entries {
        let slot = classes.iter_mut().find(|class| {
            class.iter().all(|(q, _)| g.dist(p, q) >= r)
        });
        match slot {
            Some(class) => class.push((p.clone(), *v)),
            None => classes.push(vec![(p.clone(), *v)]),
        }
    }
    let mut cubes = Vec::new();
    let mut prefix = from.label.clone();
    for class in &classes {
        let base = Leaf { label: prefix.clone() };
        let pieces: Vec<Leaf> = class
            .iter()
            .map(|(p, v)| {
                let piece = Lamp::Lighter(std::collections::BTreeMap::from([(p.clone(), *v)]));
                Ok(Leaf { label: halo.lamp_mul(&prefix, &piece)? })
            })
            .collect::<Result<_>>()?;
        let cube = span_obtuse_cube(metric, &base, &pieces, r, r)?;
        prefix = cube.last().unwrap().label.clone();
        cubes.push(cube);
    }
    if prefix != to.label {
        return Err(Error::PreconditionViolated("cube chain does not land on target".into()));
    }
    Ok(cubes)
}

/// Check the thin-leaf projection bound on a pair of leaves: for the
/// minimiser `y` on `p` and sample points `x` on `p`,
/// `d(x, y) ≤ d(x, q) + 2·d(p, q) + 4·r0`.
pub fn thin_projection_check(
    halo: &Halo,
    p: &Leaf,
    q: &Leaf,
    sample_radius: u32,
    cost_radius: u32,
    caps: &Caps,
) -> Result<bool> {
    let ld = halo.leaf_distance(p, q, cost_radius, caps)?;
    let y = &ld.witness_p;
    let costs = halo.lamp_costs(cost_radius, caps)?;
    let g = halo.base();
    let e = halo.lamp_mul(&halo.lamp_inv(&p.label)?, &q.label)?;
    let window = g.ball(&y.arrow, sample_radius, caps)?;
    for h in window.iter() {
        let moved = halo.act(&g.inv(h), &e);
        let Some((d_x_q, _)) = costs.get(&moved) else {
            continue; // outside the exact window; skipped, not assumed
        };
        let d_x_y = g.dist(h, &y.arrow);
        let bound = *d_x_q as u64 + 2 * ld.dist as u64 + 4 * halo.r0() as u64;
        if d_x_y > bound {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn caps() -> Caps {
        Caps::default()
    }

    fn delta(halo: &Halo, at: &str) -> Lamp {
        Lamp::Lighter(BTreeMap::from([(halo.base().parse_point(at).unwrap(), 1)]))
    }

    #[test]
    fn leaf_graph_of_lamplighter_over_z() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let graph = build_leaf_graph(&halo, 1, 4, &caps()).unwrap();
        // leaves are labelled by lamps supported in the reachable window
        assert!(graph.leaves.len() > 4);
        assert!(graph
            .leaves
            .iter()
            .any(|l| l.label == halo.identity_lamp()));
        // single-lamp leaves adjacent to the base leaf at distance 1
        let base = graph
            .leaves
            .iter()
            .position(|l| l.label == halo.identity_lamp())
            .unwrap();
        let d0 = graph
            .leaves
            .iter()
            .position(|l| l.label == delta(&halo, "0"))
            .unwrap();
        assert!(graph.edges.iter().any(|(a, b, d)| {
            (*a == base && *b == d0 || *a == d0 && *b == base) && *d == 1
        }));
        // no obtuse 3-cycle beyond the theoretical threshold 3ε + 2r0
        assert!(graph.obtuse_three_cycles(3 + 2 + 1).is_empty());
    }

    #[test]
    fn radius_zero_graph_is_a_point() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let graph = build_leaf_graph(&halo, 1, 0, &caps()).unwrap();
        assert_eq!(graph.leaves.len(), 1);
        assert!(graph.edges.is_empty());
    }

    #[test]
    fn span_square_over_z2() {
        let halo = Halo::parse("lighter:2", "Z2").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let o = Leaf { label: halo.identity_lamp() };
        let a = Leaf { label: delta(&halo, "0,0") };
        let b = Leaf { label: delta(&halo, "8,0") };
        let cube = span_obtuse_cube(&metric, &o, &[a.clone(), b.clone()], 6, 6).unwrap();
        assert_eq!(cube.len(), 4);
        // k = 1: the edge itself
        let edge = span_obtuse_cube(&metric, &o, &[a.clone()], 6, 6).unwrap();
        assert_eq!(edge.len(), 2);
        // angle too small when supports are close
        let c = Leaf { label: delta(&halo, "1,0") };
        assert!(matches!(
            span_obtuse_cube(&metric, &o, &[a, c], 6, 6),
            Err(Error::AngleTooSmall(_))
        ));
    }

    #[test]
    fn nil2_refuses_cubes() {
        let halo = Halo::parse("nil2:2", "Z").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let o = Leaf { label: halo.identity_lamp() };
        let mk = |at: &str| Leaf {
            label: Lamp::Nil2 {
                f: BTreeMap::from([(halo.base().parse_point(at).unwrap(), 1)]),
                z: BTreeMap::new(),
            },
        };
        assert!(matches!(
            span_obtuse_cube(&metric, &o, &[mk("0"), mk("9")], 5, 5),
            Err(Error::NotCommutative(_))
        ));
    }

    #[test]
    fn hand_built_ladder_validates_and_perturbation_fails() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        // rung mate at 0, steps at 10, 20: obtuse with threshold 8
        let c = delta(&halo, "0");
        let z1 = delta(&halo, "10");
        let z2 = delta(&halo, "20");
        let l1 = halo.identity_lamp();
        let l2 = halo.lamp_mul(&l1, &z1).unwrap();
        let l3 = halo.lamp_mul(&l2, &z2).unwrap();
        let rungs: Vec<(Leaf, Leaf)> = [l1, l2, l3]
            .into_iter()
            .map(|l| {
                let q = halo.lamp_mul(&l, &c).unwrap();
                (Leaf { label: l }, Leaf { label: q })
            })
            .collect();
        let ladder = Ladder { rungs, eps: 1, r: 8 };
        let verdict = validate_ladder(&metric, &ladder).unwrap();
        assert!(verdict.valid, "{verdict:?}");
        // perturbed ladder: a near square (mate support close to the step)
        let near = delta(&halo, "1");
        let m1 = halo.identity_lamp();
        let m2 = halo.lamp_mul(&m1, &near).unwrap();
        let rungs: Vec<(Leaf, Leaf)> = [m1, m2]
            .into_iter()
            .map(|l| {
                let q = halo.lamp_mul(&l, &c).unwrap();
                (Leaf { label: l }, Leaf { label: q })
            })
            .collect();
        let bad = Ladder { rungs, eps: 1, r: 8 };
        let verdict = validate_ladder(&metric, &bad).unwrap();
        assert!(!verdict.valid);
        assert_eq!(verdict.offending.as_ref().unwrap().0, 0);
    }

    #[test]
    fn transport_bound_on_trivial_data() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let c = delta(&halo, "0");
        let rung = (
            Leaf { label: halo.identity_lamp() },
            Leaf { label: c.clone() },
        );
        let ladder = Ladder { rungs: vec![rung], eps: 1, r: 8 };
        let x = halo.one();
        let conn = Connection {
            to_p: GeneratorWord(vec![]),
            to_q: GeneratorWord(vec![HaloElement {
                lamp: c,
                arrow: halo.base().identity(),
            }]),
        };
        ladder_transport_check(&halo, &ladder, &x, &x, 1, &conn, &conn).unwrap();
    }

    #[test]
    fn cube_chain_in_radius_window() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let from = Leaf { label: halo.identity_lamp() };
        let mut label = halo.identity_lamp();
        for at in ["-4", "-1", "2", "3"] {
            label = halo.lamp_mul(&label, &delta(&halo, at)).unwrap();
        }
        let to = Leaf { label };
        let r = 4;
        let chain = lighter_cube_chain(&metric, &from, &to, r).unwrap();
        // partition bound: at most r classes on a line
        assert!(chain.len() as u64 <= r);
        assert!(!chain.is_empty());
    }

    #[test]
    fn thin_bound_on_samples() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let p = Leaf { label: halo.identity_lamp() };
        let q = Leaf { label: delta(&halo, "2") };
        assert!(thin_projection_check(&halo, &p, &q, 3, 10, &caps()).unwrap());
    }
}
