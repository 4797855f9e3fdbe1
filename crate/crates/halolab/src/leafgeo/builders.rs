//! Constructive ladder builders: explicit chains of ladders connecting an
//! arbitrary point of a halo product to the base leaf, realising the
//! finite-altitude bounds (two ladders for lighters, jugglers and
//! designers, four for cloners).
//!
//! Every builder returns the full witness data — rung leaves, stop points,
//! and generator words for the η-connections — so the output can be
//! revalidated from scratch by the exact leaf metric.

use super::{Connection, GeneratorWord, Ladder, LadderChain};
use crate::basegroup::{BaseSubset, MarkedGroup, Point};
use crate::halocore::{HaloElement, Leaf};
use crate::lampkit::cloner::{self, SparseMat, SparseVec};
use crate::lampkit::finite::{FiniteField, KElem};
use crate::lampkit::{Backend, Halo, Lamp, PtF};
use crate::{Caps, Error, Result};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

/// Shortest path between two base points avoiding a forbidden set.
fn route(
    g: &MarkedGroup,
    from: &Point,
    to: &Point,
    forbidden: &HashSet<Point>,
) -> Result<Vec<Point>> {
    if forbidden.contains(from) || forbidden.contains(to) {
        return Err(Error::PreconditionViolated("route endpoint is forbidden".into()));
    }
    if from == to {
        return Ok(vec![from.clone()]);
    }
    let mut prev: HashMap<Point, Point> = HashMap::new();
    let mut queue = VecDeque::from([from.clone()]);
    prev.insert(from.clone(), from.clone());
    let limit = 4 * (g.dist(from, to) + 40);
    let mut expanded = 0u64;
    while let Some(p) = queue.pop_front() {
        expanded += 1;
        if expanded > limit * limit + 1000 {
            break;
        }
        for q in g.neighbors(&p) {
            if forbidden.contains(&q) || prev.contains_key(&q) {
                continue;
            }
            prev.insert(q.clone(), p.clone());
            if q == *to {
                let mut path = vec![q.clone()];
                let mut cur = q;
                while cur != *from {
                    cur = prev[&cur].clone();
                    path.push(cur.clone());
                }
                path.reverse();
                return Ok(path);
            }
            queue.push_back(q);
        }
    }
    Err(Error::PreconditionViolated("no route around the forbidden set".into()))
}

/// First point (in BFS order from the center) whose `r`-ball avoids the
/// dirty set.
fn find_clear_point(
    g: &MarkedGroup,
    center: &Point,
    r: u32,
    dirty: &HashSet<Point>,
    caps: &Caps,
) -> Result<Point> {
    let mut seen: HashSet<Point> = HashSet::from([center.clone()]);
    let mut frontier = vec![center.clone()];
    for _ in 0..=caps.ball_radius {
        for q in &frontier {
            let ball = g.ball(q, r, caps)?;
            if ball.iter().all(|b| !dirty.contains(b)) {
                return Ok(q.clone());
            }
        }
        let mut next = Vec::new();
        for p in &frontier {
            for q in g.neighbors(p) {
                if seen.insert(q.clone()) {
                    next.push(q);
                }
            }
        }
        frontier = next;
        frontier.sort();
    }
    Err(Error::CapExceeded("no clear point within the ball-radius cap".into()))
}

/// One-endedness at desk scale: the complement of the ball stays connected
/// in a surrounding window. Holds for ℤ², fails for ℤ.
fn assert_ball_complement_connected(g: &MarkedGroup, center: &Point, r: u32, caps: &Caps) -> Result<()> {
    let inner = g.ball(center, r, caps)?;
    let outer = g.ball(center, r + 2, caps)?;
    let annulus: BaseSubset = outer.iter().filter(|p| !inner.contains(p)).cloned().collect();
    if annulus.is_empty() || !g.is_connected(&annulus) {
        return Err(Error::PreconditionViolated(
            "ball complement is not connected; a one-ended base group is required".into(),
        ));
    }
    Ok(())
}

/// Generator word walking the arrow along a base path.
fn walk_word(halo: &Halo, path: &[Point]) -> GeneratorWord {
    let g = halo.base();
    let mut word = Vec::new();
    for pair in path.windows(2) {
        let step = g.mul(&g.inv(&pair[0]), &pair[1]);
        word.push(HaloElement { lamp: halo.identity_lamp(), arrow: step });
    }
    GeneratorWord(word)
}

/// Straight-line path between base points (no obstacles).
fn straight_path(g: &MarkedGroup, from: &Point, to: &Point) -> Vec<Point> {
    route(g, from, to, &HashSet::new()).expect("unobstructed route exists")
}

/// Assemble a ladder from a start label, rung steps, and a rung mate that
/// commutes with every step.
fn assemble_ladder(
    halo: &Halo,
    start: &Lamp,
    steps: &[Lamp],
    mate: &Lamp,
    eps: u32,
    r: u64,
) -> Result<Ladder> {
    let mut rungs = Vec::with_capacity(steps.len() + 1);
    let mut label = start.clone();
    rungs.push((
        Leaf { label: label.clone() },
        Leaf { label: halo.lamp_mul(&label, mate)? },
    ));
    for s in steps {
        label = halo.lamp_mul(&label, s)?;
        rungs.push((
            Leaf { label: label.clone() },
            Leaf { label: halo.lamp_mul(&label, mate)? },
        ));
    }
    Ok(Ladder { rungs, eps, r })
}

/// The connection of a stop `(lamp, arrow)` to a rung whose P-leaf carries
/// exactly `lamp` and whose mate generator sits at `anchor`.
fn stop_connection(
    halo: &Halo,
    arrow: &Point,
    anchor: &Point,
    mate_gen: &HaloElement,
) -> Connection {
    let path = straight_path(halo.base(), arrow, anchor);
    let mut to_q = walk_word(halo, &path);
    to_q.0.push(mate_gen.clone());
    Connection { to_p: GeneratorWord(vec![]), to_q }
}

/// Chain assembly helper: stops interleaved with ladders; each ladder's
/// start label must equal the previous stop's lamp.
struct ChainBuilder<'a> {
    halo: &'a Halo,
    stops: Vec<HaloElement>,
    ladders: Vec<Ladder>,
    conns: Vec<(Connection, Connection)>,
    eta: u32,
}

impl<'a> ChainBuilder<'a> {
    fn new(halo: &'a Halo, start: HaloElement) -> ChainBuilder<'a> {
        ChainBuilder { halo, stops: vec![start], ladders: Vec::new(), conns: Vec::new(), eta: 0 }
    }

    /// Append a ladder whose rungs run from the current stop's lamp via the
    /// given steps; the next stop is `(end lamp, next_arrow)`.
    fn push_stage(
        &mut self,
        steps: &[Lamp],
        mate_gen: &HaloElement,
        anchor: &Point,
        next_arrow: Point,
        eps: u32,
        r: u64,
    ) -> Result<()> {
        if steps.is_empty() {
            // degenerate stage: the lamp is already right, no ladder needed;
            // the following stage connects from the current stop directly
            return Ok(());
        }
        let halo = self.halo;
        let start = self.stops.last().unwrap().clone();
        let mate = match &mate_gen.lamp {
            lamp => halo.act(anchor, lamp),
        };
        let ladder = assemble_ladder(halo, &start.lamp, steps, &mate, eps, r)?;
        let end_label = ladder.rungs.last().unwrap().0.label.clone();
        let start_conn = stop_connection(halo, &start.arrow, anchor, mate_gen);
        let end_stop = HaloElement { lamp: end_label, arrow: next_arrow };
        let end_conn = stop_connection(halo, &end_stop.arrow, anchor, mate_gen);
        self.eta = self
            .eta
            .max(start_conn.to_q.len() as u32)
            .max(end_conn.to_q.len() as u32);
        self.ladders.push(ladder);
        self.conns.push((start_conn, end_conn));
        self.stops.push(end_stop);
        Ok(())
    }

    fn finish(self) -> LadderChain {
        LadderChain {
            stops: self.stops,
            ladders: self.ladders,
            conns: self.conns,
            eta: self.eta.max(1),
        }
    }
}

/// Ladder chain for a lamplighter point: factor the lamp outside `B(p, R)`
/// into single-point pieces, then relocate and clear the remainder.
/// At most two ladders.
pub fn build_ladder_lighter(halo: &Halo, x: &HaloElement, r: u32, caps: &Caps) -> Result<LadderChain> {
    let Backend::Lighter { .. } = halo.backend() else {
        return Err(Error::BackendMismatch("lighter builder needs a lighter backend".into()));
    };
    let Lamp::Lighter(entries) = &x.lamp else { unreachable!() };
    let g = halo.base();
    let p = &x.arrow;
    let ball = g.ball(p, r, caps)?;
    let mate_gen = HaloElement {
        lamp: halo.module_generators()[0].clone(),
        arrow: g.identity(),
    };

    let mut chain = ChainBuilder::new(halo, x.clone());
    let outside: Vec<(Point, u8)> = entries
        .iter()
        .filter(|(q, _)| !ball.contains(q))
        .map(|(q, v)| (q.clone(), *v))
        .collect();
    let inside_left = entries.len() != outside.len();

    // stage 1: clear the lamps outside B(p, R), square mates anchored at p
    let steps: Vec<Lamp> = outside
        .iter()
        .map(|(q, v)| {
            let inv = match halo.backend() {
                Backend::Lighter { f } => f.inv(*v),
                _ => unreachable!(),
            };
            Lamp::Lighter(BTreeMap::from([(q.clone(), inv)]))
        })
        .collect();
    // next arrow: where stage 2 will operate
    let q_center = if inside_left {
        // a ball disjoint from B(p, R)
        let dirty: HashSet<Point> = ball.iter().cloned().collect();
        find_clear_point(g, p, r, &dirty, caps)?
    } else {
        p.clone()
    };
    chain.push_stage(&steps, &mate_gen, p, q_center.clone(), 1, r as u64)?;

    // stage 2: clear the remainder, now far from the working ball at q
    if inside_left {
        let current = chain.stops.last().unwrap().lamp.clone();
        let Lamp::Lighter(rest) = &current else { unreachable!() };
        let steps: Vec<Lamp> = rest
            .iter()
            .map(|(qq, v)| {
                let inv = match halo.backend() {
                    Backend::Lighter { f } => f.inv(*v),
                    _ => unreachable!(),
                };
                Lamp::Lighter(BTreeMap::from([(qq.clone(), inv)]))
            })
            .collect();
        chain.push_stage(&steps, &mate_gen, &q_center, q_center.clone(), 1, r as u64)?;
    }
    let chain = chain.finish();
    debug_assert!(chain.stops.last().unwrap().lamp.is_identity());
    Ok(chain)
}

/// Factor the cell transposition `(a b)` into transpositions of cells at
/// adjacent vertices, routing around the forbidden set. Verifies the
/// factorisation by composing it back.
fn factor_cell_transposition(
    g: &MarkedGroup,
    a: &PtF,
    b: &PtF,
    forbidden: &HashSet<Point>,
) -> Result<Vec<BTreeMap<PtF, PtF>>> {
    let swap = |x: &PtF, y: &PtF| BTreeMap::from([(x.clone(), y.clone()), (y.clone(), x.clone())]);
    if a.0 != b.0 && g.dist(&a.0, &b.0) == 1 {
        return Ok(vec![swap(a, b)]);
    }
    let (path, last_cell): (Vec<Point>, PtF) = if a.0 == b.0 {
        // same vertex: detour through an allowed neighbour
        let w = g
            .neighbors(&a.0)
            .into_iter()
            .find(|n| !forbidden.contains(n))
            .ok_or_else(|| Error::PreconditionViolated("no allowed neighbour".into()))?;
        (vec![a.0.clone(), w], b.clone())
    } else {
        (route(g, &a.0, &b.0, forbidden)?, b.clone())
    };
    // carry the content of `a` along the path, swap with b, carry back
    let carrier: Vec<PtF> = path[..path.len() - 1]
        .iter()
        .map(|v| (v.clone(), a.1))
        .collect();
    let mut word: Vec<BTreeMap<PtF, PtF>> = Vec::new();
    for w in carrier.windows(2) {
        word.push(swap(&w[0], &w[1]));
    }
    let forward = word.clone();
    word.push(swap(carrier.last().unwrap(), &last_cell));
    for s in forward.iter().rev() {
        word.push(s.clone());
    }
    // verify: composition equals (a b)
    let mut acc: BTreeMap<PtF, PtF> = BTreeMap::new();
    for piece in &word {
        acc = compose_cells(&acc, piece);
    }
    let expect = swap(a, b);
    if acc != expect {
        return Err(Error::PreconditionViolated("transposition factorisation failed".into()));
    }
    Ok(word)
}

fn compose_cells(a: &BTreeMap<PtF, PtF>, b: &BTreeMap<PtF, PtF>) -> BTreeMap<PtF, PtF> {
    let app = |m: &BTreeMap<PtF, PtF>, x: &PtF| m.get(x).cloned().unwrap_or_else(|| x.clone());
    let mut out = BTreeMap::new();
    for x in b.keys().chain(a.keys()) {
        let y = app(a, &app(b, x));
        if y != *x {
            out.insert(x.clone(), y);
        } else {
            out.remove(x);
        }
    }
    out
}

/// Normalise a finitely supported cell permutation relative to the ball:
/// returns adjacent-transposition steps after which every cell outside the
/// ball is fixed or mapped into it.
pub(crate) fn clear_cells_outside(
    g: &MarkedGroup,
    perm: &BTreeMap<PtF, PtF>,
    forbidden: &HashSet<Point>,
) -> Result<(Vec<BTreeMap<PtF, PtF>>, BTreeMap<PtF, PtF>)> {
    let mut current = perm.clone();
    let mut steps = Vec::new();
    loop {
        let target = current.iter().find(|(a, img)| {
            !forbidden.contains(&a.0) && !forbidden.contains(&img.0)
        });
        let Some((a, b)) = target.map(|(a, b)| (a.clone(), b.clone())) else {
            break;
        };
        let pieces = factor_cell_transposition(g, &a, &b, forbidden)?;
        for piece in &pieces {
            current = compose_cells(&current, piece);
        }
        steps.extend(pieces);
        debug_assert!(current.get(&b).is_none());
    }
    Ok((steps, current))
}

fn juggler_cells(lamp: &Lamp) -> &BTreeMap<PtF, PtF> {
    match lamp {
        Lamp::Juggler(m) => m,
        _ => unreachable!(),
    }
}

/// Ladder chain for a lampjuggler point over a one-ended base. Two stages:
/// clear the permutation outside the working ball, relocate to a clean
/// ball, clear everything.
pub fn build_ladder_juggler(halo: &Halo, x: &HaloElement, r: u32, caps: &Caps) -> Result<LadderChain> {
    let Backend::Juggler { .. } = halo.backend() else {
        return Err(Error::BackendMismatch("juggler builder needs a juggler backend".into()));
    };
    let g = halo.base();
    let p = &x.arrow;
    assert_ball_complement_connected(g, p, r, caps)?;
    let ball = g.ball(p, r, caps)?;
    let forbidden: HashSet<Point> = ball.iter().cloned().collect();
    let mate_gen = HaloElement {
        lamp: halo.module_generators()[0].clone(),
        arrow: g.identity(),
    };
    let mut chain = ChainBuilder::new(halo, x.clone());

    // stage 1
    let (steps, zeta) = clear_cells_outside(g, juggler_cells(&x.lamp), &forbidden)?;
    let step_lamps: Vec<Lamp> = steps.into_iter().map(Lamp::Juggler).collect();
    let mut dirty: HashSet<Point> = forbidden.clone();
    for (a, b) in &zeta {
        dirty.insert(a.0.clone());
        dirty.insert(b.0.clone());
    }
    let q_center = if zeta.is_empty() { p.clone() } else { find_clear_point(g, p, r, &dirty, caps)? };
    chain.push_stage(&step_lamps, &mate_gen, p, q_center.clone(), 1, r as u64)?;

    // stage 2: everything is now far from the clean ball
    if !zeta.is_empty() {
        let ball2 = g.ball(&q_center, r, caps)?;
        let forbidden2: HashSet<Point> = ball2.iter().cloned().collect();
        let current = juggler_cells(&chain.stops.last().unwrap().lamp).clone();
        let (steps2, rest) = clear_cells_outside(g, &current, &forbidden2)?;
        if !rest.is_empty() {
            return Err(Error::PreconditionViolated(
                "stage 2 left a nontrivial permutation".into(),
            ));
        }
        let step_lamps: Vec<Lamp> = steps2.into_iter().map(Lamp::Juggler).collect();
        chain.push_stage(&step_lamps, &mate_gen, &q_center, q_center.clone(), 1, r as u64)?;
    }
    let chain = chain.finish();
    debug_assert!(chain.stops.last().unwrap().lamp.is_identity());
    Ok(chain)
}

/// Ladder chain for a lampdesigner point: the block permutation is cleared
/// like a juggler, point labels are cleared like a lighter, in the same
/// two-stage pattern.
pub fn build_ladder_designer(halo: &Halo, x: &HaloElement, r: u32, caps: &Caps) -> Result<LadderChain> {
    let Backend::Designer { f } = halo.backend() else {
        return Err(Error::BackendMismatch("designer builder needs a designer backend".into()));
    };
    let f = f.clone();
    let g = halo.base();
    let p = &x.arrow;
    assert_ball_complement_connected(g, p, r, caps)?;
    let ball = g.ball(p, r, caps)?;
    let forbidden: HashSet<Point> = ball.iter().cloned().collect();
    let mate_gen = HaloElement {
        lamp: halo
            .module_generators()
            .into_iter()
            .find(|l| matches!(l, Lamp::Designer { perm, .. } if !perm.is_empty()))
            .expect("designer has a block-swap generator"),
        arrow: g.identity(),
    };
    let mut chain = ChainBuilder::new(halo, x.clone());

    let designer_parts = |lamp: &Lamp| -> (BTreeMap<Point, u8>, BTreeMap<Point, Point>) {
        match lamp {
            Lamp::Designer { labels, perm } => (labels.clone(), perm.clone()),
            _ => unreachable!(),
        }
    };

    let stage = |current: &Lamp, forbidden: &HashSet<Point>| -> Result<Vec<Lamp>> {
        let (_, perm) = designer_parts(current);
        // block permutation phase, reusing the cell machinery at fibre 0
        let cells: BTreeMap<PtF, PtF> = perm
            .iter()
            .map(|(a, b)| ((a.clone(), 0u8), (b.clone(), 0u8)))
            .collect();
        let (steps, _) = clear_cells_outside(g, &cells, forbidden)?;
        let mut lamps: Vec<Lamp> = steps
            .into_iter()
            .map(|piece| {
                let perm: BTreeMap<Point, Point> =
                    piece.into_iter().map(|((a, _), (b, _))| (a, b)).collect();
                Lamp::Designer { labels: BTreeMap::new(), perm }
            })
            .collect();
        // label phase: apply the permutation pieces to know the current state
        let mut state = current.clone();
        for l in &lamps {
            state = halo.lamp_mul(&state, l)?;
        }
        let (labels, perm_now) = designer_parts(&state);
        for (y, v) in &labels {
            if forbidden.contains(y) {
                continue;
            }
            // the label at y is reachable iff the block at y is unmoved
            let pre = perm_now
                .iter()
                .find(|(_, to)| *to == y)
                .map(|(from, _)| from.clone())
                .unwrap_or_else(|| y.clone());
            if pre == *y {
                lamps.push(Lamp::Designer {
                    labels: BTreeMap::from([(y.clone(), f.inv(*v))]),
                    perm: BTreeMap::new(),
                });
            }
        }
        Ok(lamps)
    };

    // stage 1 around p
    let steps1 = stage(&x.lamp, &forbidden)?;
    let mut after1 = x.lamp.clone();
    for l in &steps1 {
        after1 = halo.lamp_mul(&after1, l)?;
    }
    let mut dirty: HashSet<Point> = forbidden.clone();
    for s in halo.support(&after1).iter() {
        dirty.insert(s.clone());
    }
    let need_stage2 = !after1.is_identity();
    let q_center = if need_stage2 { find_clear_point(g, p, r, &dirty, caps)? } else { p.clone() };
    chain.push_stage(&steps1, &mate_gen, p, q_center.clone(), 1, r as u64)?;

    if need_stage2 {
        let ball2 = g.ball(&q_center, r, caps)?;
        let forbidden2: HashSet<Point> = ball2.iter().cloned().collect();
        let current = chain.stops.last().unwrap().lamp.clone();
        let steps2 = stage(&current, &forbidden2)?;
        chain.push_stage(&steps2, &mate_gen, &q_center, q_center.clone(), 1, r as u64)?;
    }
    let chain = chain.finish();
    if !chain.stops.last().unwrap().lamp.is_identity() {
        return Err(Error::PreconditionViolated("designer chain did not reach identity".into()));
    }
    Ok(chain)
}

// ---- lampcloner: four-stage construction -------------------------------

struct DenseSpace {
    field: FiniteField,
    coords: Vec<Point>,
    index: HashMap<Point, usize>,
}

impl DenseSpace {
    fn new(field: FiniteField, coords: Vec<Point>) -> DenseSpace {
        let index = coords.iter().cloned().zip(0..).collect();
        DenseSpace { field, coords, index }
    }

    fn dense(&self, v: &SparseVec) -> Vec<KElem> {
        let mut out = vec![0; self.coords.len()];
        for (p, c) in v {
            out[self.index[p]] = *c;
        }
        out
    }

    fn sparse(&self, v: &[KElem]) -> SparseVec {
        v.iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(i, c)| (self.coords[i].clone(), *c))
            .collect()
    }

    fn unit(&self, p: &Point) -> Vec<KElem> {
        let mut out = vec![0; self.coords.len()];
        out[self.index[p]] = 1;
        out
    }

    /// Solve `Σ c_i cols_i = target`; the columns must be independent.
    fn solve(&self, cols: &[Vec<KElem>], target: &[KElem]) -> Option<Vec<KElem>> {
        let f = &self.field;
        let n = self.coords.len();
        let m = cols.len();
        // augmented [cols | target], row-reduce
        let mut a: Vec<Vec<KElem>> = (0..n)
            .map(|r| {
                let mut row: Vec<KElem> = cols.iter().map(|c| c[r]).collect();
                row.push(target[r]);
                row
            })
            .collect();
        let mut pivot_of_col: Vec<Option<usize>> = vec![None; m];
        let mut r = 0;
        for c in 0..m {
            let Some(pr) = (r..n).find(|&i| a[i][c] != 0) else { continue };
            a.swap(r, pr);
            let inv = f.inv(a[r][c]);
            for x in a[r].iter_mut() {
                *x = f.mul(*x, inv);
            }
            for i in 0..n {
                if i != r && a[i][c] != 0 {
                    let factor = a[i][c];
                    let (ri, rr): (&mut Vec<KElem>, &Vec<KElem>) = if i < r {
                        let (h, t) = a.split_at_mut(r);
                        (&mut h[i], &t[0])
                    } else {
                        let (h, t) = a.split_at_mut(i);
                        (&mut t[0], &h[r])
                    };
                    for k in 0..=m {
                        ri[k] = f.sub(ri[k], f.mul(factor, rr[k]));
                    }
                }
            }
            pivot_of_col[c] = Some(r);
            r += 1;
        }
        // consistency: rows beyond the rank must have zero target
        for row in a.iter().skip(r) {
            if row[m] != 0 {
                return None;
            }
        }
        let mut coeffs = vec![0; m];
        for (c, p) in pivot_of_col.iter().enumerate() {
            if let Some(p) = p {
                coeffs[c] = a[*p][m];
            }
        }
        Some(coeffs)
    }
}

/// Reduced-row-echelon pivots with a fixed coordinate order; returns the
/// reduced rows and the pivot coordinate index of each row.
fn rref(field: &FiniteField, rows: &[Vec<KElem>]) -> (Vec<Vec<KElem>>, Vec<usize>) {
    let mut a: Vec<Vec<KElem>> = rows.to_vec();
    let n = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(pr) = (r..a.len()).find(|&i| a[i][c] != 0) else { continue };
        a.swap(r, pr);
        let inv = field.inv(a[r][c]);
        for x in a[r].iter_mut() {
            *x = field.mul(*x, inv);
        }
        for i in 0..a.len() {
            if i != r && a[i][c] != 0 {
                let factor = a[i][c];
                let (ri, rr): (&mut Vec<KElem>, &Vec<KElem>) = if i < r {
                    let (h, t) = a.split_at_mut(r);
                    (&mut h[i], &t[0])
                } else {
                    let (h, t) = a.split_at_mut(i);
                    (&mut t[0], &h[r])
                };
                for k in 0..n {
                    ri[k] = field.sub(ri[k], field.mul(factor, rr[k]));
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == a.len() {
            break;
        }
    }
    a.truncate(r);
    (a, pivots)
}

/// Rank-extend `current` (dense, independent) by greedily taking candidates.
fn extend_to_rank(
    field: &FiniteField,
    current: &mut Vec<Vec<KElem>>,
    candidates: &[Vec<KElem>],
    target_rank: usize,
) -> Vec<Vec<KElem>> {
    let mut chosen = Vec::new();
    for cand in candidates {
        if current.len() >= target_rank {
            break;
        }
        let mut trial = current.clone();
        trial.push(cand.clone());
        let (reduced, _) = rref(field, &trial);
        if reduced.len() > current.len() {
            current.push(cand.clone());
            chosen.push(cand.clone());
        }
    }
    chosen
}

fn cloner_field(halo: &Halo) -> FiniteField {
    match halo.backend() {
        Backend::Cloner { field } => field.clone(),
        _ => unreachable!(),
    }
}

/// Factor an invertible map supported away from the forbidden set into
/// adjacent elementary lamps (transvections between neighbouring base
/// points and single-point dilations), routing around the forbidden set.
/// The product of the returned lamps equals `e`; verified before returning.
pub fn factor_cloner_avoiding(
    halo: &Halo,
    e: &SparseMat,
    forbidden: &HashSet<Point>,
) -> Result<Vec<Lamp>> {
    let field = cloner_field(halo);
    let g = halo.base();
    let active = cloner::mat_support(e);
    if active.iter().any(|p| forbidden.contains(p)) {
        return Err(Error::PreconditionViolated("support meets the forbidden set".into()));
    }
    if active.is_empty() {
        return Ok(Vec::new());
    }
    let n = active.len();
    // Gauss-Jordan on the transpose: row operations there are column
    // operations on e, i.e. right multiplication by elementary matrices.
    let mut a: Vec<Vec<KElem>> = (0..n)
        .map(|r| {
            // row r of the transpose = column active[r] of e
            (0..n)
                .map(|c| *cloner::column(e, &active[r]).get(&active[c]).unwrap_or(&0))
                .collect()
        })
        .collect();
    enum Op {
        Transvection(Point, Point, KElem), // col_v += λ col_u on e
        Dilation(Point, KElem),
    }
    let mut ops: Vec<Op> = Vec::new();
    for j in 0..n {
        if a[j][j] == 0 {
            let i = (j + 1..n)
                .find(|&i| a[i][j] != 0)
                .expect("invertible matrix has a pivot below the diagonal");
            let (head, tail) = a.split_at_mut(i);
            let src = tail[0].clone();
            for (x, y) in head[j].iter_mut().zip(&src) {
                *x = field.add(*x, *y);
            }
            ops.push(Op::Transvection(active[i].clone(), active[j].clone(), 1));
        }
        if a[j][j] != 1 {
            let lam = field.inv(a[j][j]);
            for x in a[j].iter_mut() {
                *x = field.mul(*x, lam);
            }
            ops.push(Op::Dilation(active[j].clone(), lam));
        }
        for i in 0..n {
            if i != j && a[i][j] != 0 {
                let lam = field.neg(a[i][j]);
                let (row_i, row_j) = if i < j {
                    let (h, t) = a.split_at_mut(j);
                    (&mut h[i], &t[0])
                } else {
                    let (h, t) = a.split_at_mut(i);
                    (&mut t[0], &h[j])
                };
                for (x, y) in row_i.iter_mut().zip(row_j.iter()) {
                    *x = field.add(*x, field.mul(lam, *y));
                }
                ops.push(Op::Transvection(active[j].clone(), active[i].clone(), lam));
            }
        }
    }
    debug_assert!((0..n).all(|r| (0..n).all(|c| a[r][c] == u16::from(r == c))));

    // expand to adjacent elementary lamps: e = (op_1 ⋯ op_k)^{-1} read
    // backwards, with long transvections conjugated along routes
    let mut rungs: Vec<SparseMat> = Vec::new();
    for op in ops.iter().rev() {
        match op {
            Op::Dilation(p, lam) => rungs.push(cloner::dilation(p, field.inv(*lam))),
            Op::Transvection(u, v, lam) => {
                let inv_lam = field.neg(*lam);
                for piece in expand_transvection(&field, g, u, v, inv_lam, forbidden)? {
                    rungs.push(piece);
                }
            }
        }
    }
    // verify the product
    let mut acc = SparseMat::new();
    for r in &rungs {
        acc = cloner::mat_mul(&field, &acc, r);
    }
    if acc != *e {
        return Err(Error::PreconditionViolated("elementary factorisation failed".into()));
    }
    Ok(rungs.into_iter().map(Lamp::Cloner).collect())
}

/// Expand τ_{u,v}(λ) into adjacent elementary matrices via signed swaps
/// along a route. Each returned matrix is an adjacent transvection.
fn expand_transvection(
    field: &FiniteField,
    g: &MarkedGroup,
    u: &Point,
    v: &Point,
    lam: KElem,
    forbidden: &HashSet<Point>,
) -> Result<Vec<SparseMat>> {
    if g.dist(u, v) == 1 {
        return Ok(vec![cloner::transvection(u, v, lam)]);
    }
    let path = route(g, u, v, forbidden)?;
    let m = path.len() - 1;
    // C: signed swaps carrying the u-line to the penultimate vertex
    let mut c_ops: Vec<SparseMat> = Vec::new();
    for w in path[..m].windows(2) {
        // S_ab = τ_ab(1) τ_ba(-1) τ_ab(1)
        let one = 1;
        let minus = field.neg(1);
        c_ops.push(cloner::transvection(&w[0], &w[1], one));
        c_ops.push(cloner::transvection(&w[1], &w[0], minus));
        c_ops.push(cloner::transvection(&w[0], &w[1], one));
    }
    let mut c_mat = SparseMat::new();
    for op in &c_ops {
        c_mat = cloner::mat_mul(field, &c_mat, op);
    }
    let c_inv = cloner::mat_inv(field, &c_mat);
    let tau = cloner::transvection(u, v, lam);
    // mid = C^{-1} τ C so that C · mid · C^{-1} = τ
    let mid = cloner::mat_mul(field, &cloner::mat_mul(field, &c_inv, &tau), &c_mat);
    // mid must itself be an adjacent transvection
    let ok = mid.len() == 1
        && mid.iter().all(|(q, col)| {
            col.len() == 2 && col.get(q) == Some(&1) && col.keys().all(|r| g.dist(r, q) <= 1)
        });
    if !ok {
        return Err(Error::PreconditionViolated("conjugated transvection is not adjacent".into()));
    }
    let mut out = c_ops.clone();
    out.push(mid);
    for op in c_ops.iter().rev() {
        out.push(cloner::mat_inv(field, op));
    }
    Ok(out)
}

/// Ladder chain for a lampcloner point over a one-ended base: the
/// four-stage construction through the intermediate maps φ₀, φ₁, φ₂.
/// At most four ladders.
pub fn build_ladder_cloner(halo: &Halo, x: &HaloElement, r: u32, caps: &Caps) -> Result<LadderChain> {
    let field = cloner_field(halo);
    let g = halo.base();
    let p = &x.arrow;
    assert_ball_complement_connected(g, p, r, caps)?;
    let Lamp::Cloner(phi) = &x.lamp else { unreachable!() };

    let mate_gen = HaloElement {
        lamp: halo.module_generators()[0].clone(),
        arrow: g.identity(),
    };
    let ball_b = g.ball(p, r, caps)?;
    let supp = cloner::mat_support(phi);
    let mut z_coords: Vec<Point> = supp.clone();
    for b in ball_b.iter() {
        z_coords.push(b.clone());
    }
    z_coords.sort();
    z_coords.dedup();
    let space = DenseSpace::new(field.clone(), z_coords.clone());
    let b_set: HashSet<Point> = ball_b.iter().cloned().collect();

    // columns of φ over the working coordinates
    let col_of = |mat: &SparseMat, q: &Point| -> Vec<KElem> {
        space.dense(&cloner::column(mat, q))
    };
    let all_cols: Vec<Vec<KElem>> = z_coords.iter().map(|q| col_of(phi, q)).collect();
    let v_cols: Vec<Vec<KElem>> = z_coords
        .iter()
        .filter(|q| b_set.contains(q))
        .map(|q| col_of(phi, q))
        .collect();

    // A0: pivot coordinates of the span of the ball columns
    let (_, v_pivots) = rref(&field, &v_cols);
    let a0: Vec<Point> = v_pivots.iter().map(|&i| z_coords[i].clone()).collect();
    let a0_set: HashSet<Point> = a0.iter().cloned().collect();

    // φ0: agree with φ on the ball; outside-of-(B ∪ A0) columns become the
    // U-part of the basis decomposition; A0∖B columns complete a basis of U
    let mut phi0_cols: BTreeMap<Point, Vec<KElem>> = BTreeMap::new();
    let mut u_parts: Vec<Vec<KElem>> = Vec::new();
    for q in &z_coords {
        if b_set.contains(q) {
            phi0_cols.insert(q.clone(), col_of(phi, q));
        } else if !a0_set.contains(q) {
            let coeffs = space
                .solve(&all_cols, &space.unit(q))
                .ok_or_else(|| Error::PreconditionViolated("column solve failed".into()))?;
            let mut u = vec![0; z_coords.len()];
            for (i, c) in coeffs.iter().enumerate() {
                if *c != 0 && !b_set.contains(&z_coords[i]) {
                    for (row_idx, uval) in u.iter_mut().enumerate() {
                        *uval = field.add(*uval, field.mul(*c, all_cols[i][row_idx]));
                    }
                }
            }
            u_parts.push(u.clone());
            phi0_cols.insert(q.clone(), u);
        }
    }
    // complete the U-parts to a basis of U = span of the non-ball columns
    let u_span: Vec<Vec<KElem>> = z_coords
        .iter()
        .enumerate()
        .filter(|(_, q)| !b_set.contains(*q))
        .map(|(i, _)| all_cols[i].clone())
        .collect();
    let mut current = u_parts.clone();
    let ext = extend_to_rank(&field, &mut current, &u_span, u_span.len());
    let mut ext_iter = ext.into_iter();
    for q in &z_coords {
        if a0_set.contains(q) && !b_set.contains(q) {
            let v = ext_iter
                .next()
                .ok_or_else(|| Error::PreconditionViolated("basis completion failed".into()))?;
            phi0_cols.insert(q.clone(), v);
        }
    }
    let phi0 = sparse_from_cols(&space, &phi0_cols);
    let e0 = cloner::mat_mul(&field, &cloner::mat_inv(&field, phi),
        &{ let mut m = SparseMat::new(); m.clone_from(&phi0); m });
    if cloner::mat_support(&e0).iter().any(|pt| b_set.contains(pt)) {
        return Err(Error::PreconditionViolated("stage-0 difference meets the ball".into()));
    }

    let mut chain = ChainBuilder::new(halo, x.clone());

    // p1: ball disjoint from B ∪ A0
    let mut dirty1: HashSet<Point> = b_set.clone();
    dirty1.extend(a0.iter().cloned());
    let p1 = find_clear_point(g, p, r, &dirty1, caps)?;
    let steps0 = factor_cloner_avoiding(halo, &e0, &b_set)?;
    let cloner_steps = |v: &[Lamp]| -> Vec<Lamp> { v.to_vec() };
    chain.push_stage(&cloner_steps(&steps0), &mate_gen, p, p1.clone(), 1, r as u64)?;

    // D = B(p1, r) ∪ B ∪ A0; working coords gain the new ball
    let ball1 = g.ball(&p1, r, caps)?;
    let mut w1_coords = z_coords.clone();
    for b in ball1.iter() {
        w1_coords.push(b.clone());
    }
    w1_coords.sort();
    w1_coords.dedup();
    let space1 = DenseSpace::new(field.clone(), w1_coords.clone());
    let b1_set: HashSet<Point> = ball1.iter().cloned().collect();
    let d_set: HashSet<Point> = dirty1.union(&b1_set).cloned().collect();

    // φ1: identity off D; φ0 on B(p1, r) (identity columns there); columns
    // on C = B ∪ A0 complete a basis of U1 = span φ0(Y1)
    let phi0_col = |q: &Point| space1.dense(&cloner::column(&phi0, q));
    let mut phi1_cols: BTreeMap<Point, Vec<KElem>> = BTreeMap::new();
    let mut u1_current: Vec<Vec<KElem>> = Vec::new();
    for q in &w1_coords {
        if !d_set.contains(q) {
            let col = space1.unit(q);
            u1_current.push(col.clone());
            phi1_cols.insert(q.clone(), col);
        } else if b1_set.contains(q) {
            phi1_cols.insert(q.clone(), space1.unit(q));
        }
    }
    let u1_span: Vec<Vec<KElem>> = w1_coords
        .iter()
        .filter(|q| !b1_set.contains(*q))
        .map(|q| phi0_col(q))
        .collect();
    let target_rank = u1_span.len();
    let ext1 = extend_to_rank(&field, &mut u1_current, &u1_span, target_rank);
    let mut ext_iter = ext1.into_iter();
    let c_positions: Vec<Point> = w1_coords
        .iter()
        .filter(|q| d_set.contains(*q) && !b1_set.contains(*q))
        .cloned()
        .collect();
    for q in &c_positions {
        let v = ext_iter
            .next()
            .ok_or_else(|| Error::PreconditionViolated("U1 completion failed".into()))?;
        phi1_cols.insert(q.clone(), v);
    }
    let phi1 = sparse_from_cols(&space1, &phi1_cols);
    let e1 = cloner::mat_mul(&field, &cloner::mat_inv(&field, &phi0), &phi1);
    if cloner::mat_support(&e1).iter().any(|pt| b1_set.contains(pt)) {
        return Err(Error::PreconditionViolated("stage-1 difference meets its ball".into()));
    }
    // p2: ball disjoint from D
    let p2 = find_clear_point(g, &p1, r, &d_set, caps)?;
    let steps1 = factor_cloner_avoiding(halo, &e1, &b1_set)?;
    chain.push_stage(&steps1, &mate_gen, &p1, p2.clone(), 1, r as u64)?;

    // φ2: identity off D, basis rows e_d + a(d) over D with a supported in
    // D ∪ B(p2, r)
    let ball2 = g.ball(&p2, r, caps)?;
    let b2_set: HashSet<Point> = ball2.iter().cloned().collect();
    let mut w2_coords = w1_coords.clone();
    for b in ball2.iter() {
        w2_coords.push(b.clone());
    }
    w2_coords.sort();
    w2_coords.dedup();
    let space2 = DenseSpace::new(field.clone(), w2_coords.clone());
    // order coordinates: D first, then the rest — pivots land in D
    let mut ordered: Vec<Point> = w2_coords.iter().filter(|q| d_set.contains(*q)).cloned().collect();
    let d_len = ordered.len();
    ordered.extend(w2_coords.iter().filter(|q| !d_set.contains(*q)).cloned());
    let space2o = DenseSpace::new(field.clone(), ordered.clone());
    let rows: Vec<Vec<KElem>> = ordered
        .iter()
        .take(d_len)
        .map(|d| {
            // φ1(e_d) restricted to D ∪ B(p2, r)
            let col = cloner::column(&phi1, d);
            let trimmed: SparseVec = col
                .into_iter()
                .filter(|(row, _)| d_set.contains(row) || b2_set.contains(row))
                .collect();
            space2o.dense(&trimmed)
        })
        .collect();
    let (reduced, pivots) = rref(&field, &rows);
    if pivots.iter().any(|&c| c >= d_len) {
        return Err(Error::PreconditionViolated("stage-2 pivots escape D".into()));
    }
    let mut phi2_cols: BTreeMap<Point, Vec<KElem>> = BTreeMap::new();
    for (row, &pc) in reduced.iter().zip(&pivots) {
        phi2_cols.insert(ordered[pc].clone(), {
            // convert from the ordered space back to space2
            let sp = space2o.sparse(row);
            space2.dense(&sp)
        });
    }
    // positions of D without a pivot row would break invertibility
    if phi2_cols.len() != d_len {
        return Err(Error::PreconditionViolated("stage-2 basis incomplete".into()));
    }
    let phi2 = sparse_from_cols(&space2, &phi2_cols);
    let e2 = cloner::mat_mul(&field, &cloner::mat_inv(&field, &phi1), &phi2);
    if cloner::mat_support(&e2).iter().any(|pt| b2_set.contains(pt)) {
        return Err(Error::PreconditionViolated("stage-2 difference meets its ball".into()));
    }
    let mut dirty3: HashSet<Point> = d_set.clone();
    dirty3.extend(b2_set.iter().cloned());
    let p3 = find_clear_point(g, &p2, r, &dirty3, caps)?;
    let steps2 = factor_cloner_avoiding(halo, &e2, &b2_set)?;
    chain.push_stage(&steps2, &mate_gen, &p2, p3.clone(), 1, r as u64)?;

    // final stage: φ2 → identity around p3
    let ball3 = g.ball(&p3, r, caps)?;
    let b3_set: HashSet<Point> = ball3.iter().cloned().collect();
    let e3 = cloner::mat_inv(&field, &phi2);
    if cloner::mat_support(&e3).iter().any(|pt| b3_set.contains(pt)) {
        return Err(Error::PreconditionViolated("final difference meets its ball".into()));
    }
    let steps3 = factor_cloner_avoiding(halo, &e3, &b3_set)?;
    chain.push_stage(&steps3, &mate_gen, &p3, p3.clone(), 1, r as u64)?;

    let chain = chain.finish();
    if !chain.stops.last().unwrap().lamp.is_identity() {
        return Err(Error::PreconditionViolated("cloner chain did not reach identity".into()));
    }
    Ok(chain)
}

fn sparse_from_cols(space: &DenseSpace, cols: &BTreeMap<Point, Vec<KElem>>) -> SparseMat {
    let mut m = SparseMat::new();
    for (q, col) in cols {
        let sv = space.sparse(col);
        if !(sv.len() == 1 && sv.get(q) == Some(&1)) {
            m.insert(q.clone(), sv);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leafgeo::LeafMetric;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn lighter_chains_over_z() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let g = halo.base();
        // identity: empty chain
        let chain = build_ladder_lighter(&halo, &halo.one(), 2, &caps()).unwrap();
        assert!(chain.ladders.is_empty());
        // lamp trivial near the arrow: a single ladder
        let far = HaloElement {
            lamp: Lamp::Lighter(BTreeMap::from([(g.parse_point("7").unwrap(), 1)])),
            arrow: g.identity(),
        };
        let chain = build_ladder_lighter(&halo, &far, 2, &caps()).unwrap();
        assert_eq!(chain.ladders.len(), 1);
        chain.validate(&metric).unwrap();
        // mixed lamp: two ladders
        let mixed = HaloElement {
            lamp: Lamp::Lighter(BTreeMap::from([
                (g.parse_point("0").unwrap(), 1),
                (g.parse_point("7").unwrap(), 1),
            ])),
            arrow: g.identity(),
        };
        let chain = build_ladder_lighter(&halo, &mixed, 2, &caps()).unwrap();
        assert_eq!(chain.ladders.len(), 2);
        chain.validate(&metric).unwrap();
    }

    #[test]
    fn juggler_chain_over_z2() {
        let halo = Halo::parse("juggler:1", "Z2").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let g = halo.base();
        let a = (g.parse_point("3,0").unwrap(), 0u8);
        let b = (g.parse_point("3,2").unwrap(), 0u8);
        let x = HaloElement {
            lamp: Lamp::Juggler(BTreeMap::from([(a.clone(), b.clone()), (b, a)])),
            arrow: g.identity(),
        };
        let chain = build_ladder_juggler(&halo, &x, 1, &caps()).unwrap();
        assert!(chain.ladders.len() <= 2);
        chain.validate(&metric).unwrap();
    }

    #[test]
    fn designer_chain_over_z2() {
        let halo = Halo::parse("designer:2", "Z2").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let g = halo.base();
        let u = g.parse_point("2,1").unwrap();
        let v = g.parse_point("-1,2").unwrap();
        let x = HaloElement {
            lamp: Lamp::Designer {
                labels: BTreeMap::from([(u.clone(), 1)]),
                perm: BTreeMap::from([(u.clone(), v.clone()), (v, u)]),
            },
            arrow: g.identity(),
        };
        let chain = build_ladder_designer(&halo, &x, 1, &caps()).unwrap();
        assert!(chain.ladders.len() <= 2);
        chain.validate(&metric).unwrap();
    }

    #[test]
    fn cloner_chain_over_z2() {
        let halo = Halo::parse("cloner:2", "Z2").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let g = halo.base();
        // a single transvection far from the arrow
        let u = g.parse_point("3,1").unwrap();
        let v = g.parse_point("4,1").unwrap();
        let x = HaloElement {
            lamp: Lamp::Cloner(cloner::transvection(&u, &v, 1)),
            arrow: g.identity(),
        };
        let chain = build_ladder_cloner(&halo, &x, 1, &caps()).unwrap();
        assert!(chain.ladders.len() <= 4, "{} ladders", chain.ladders.len());
        chain.validate(&metric).unwrap();
    }

    #[test]
    fn cloner_chain_random_small_support() {
        let halo = Halo::parse("cloner:2", "Z2").unwrap();
        let cp = caps();
        let metric = LeafMetric::new(&halo, 1, &cp).unwrap();
        let g = halo.base();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let window = g.ball(&g.parse_point("2,2").unwrap(), 1, &caps()).unwrap();
        for _ in 0..3 {
            let x = HaloElement { lamp: halo.random_lamp(&window, &mut rng), arrow: g.identity() };
            let chain = build_ladder_cloner(&halo, &x, 1, &caps()).unwrap();
            assert!(chain.ladders.len() <= 4);
            chain.validate(&metric).unwrap();
        }
    }

    #[test]
    fn transposition_factorisation_routes_around() {
        let g = MarkedGroup::parse("Z2").unwrap();
        let forbidden: HashSet<Point> = g
            .ball(&g.identity(), 1, &caps())
            .unwrap()
            .iter()
            .cloned()
            .collect();
        let a = (g.parse_point("2,0").unwrap(), 0u8);
        let b = (g.parse_point("-2,0").unwrap(), 0u8);
        let pieces = factor_cell_transposition(&g, &a, &b, &forbidden).unwrap();
        // every piece is an adjacent-vertex transposition avoiding the ball
        for piece in &pieces {
            assert_eq!(piece.len(), 2);
            for ((p, _), (q, _)) in piece {
                assert!(!forbidden.contains(p));
                assert!(g.dist(p, q) <= 1);
            }
        }
    }
}
