//! The cubical model over finite windows: vertices are classes `[φ, S]` of
//! a lamp and a finite connected crowd, identified when the lamps agree
//! modulo `L(S^{+r0})`. Edges grow the crowd by one point. The module
//! builds truncated windows, walks vertices to the root constructively,
//! fills loops by complexity-decreasing square moves, embeds the group
//! through `Ψ: (φ, h) ↦ [φ, {h}]`, and counts essential crossings of
//! vertex paths against a two-sided block cover.

use crate::basegroup::{BaseSubset, Point};
use crate::halocore::HaloElement;
use crate::lampkit::{cloner, finite::FElem, Backend, Halo, Lamp};
use crate::{Caps, Error, Result};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

/// A vertex `[rep, crowd]` with a canonical coset key: two vertices are
/// equal iff their crowds coincide and their lamps agree modulo
/// `L(crowd^{+r0})`.
#[derive(Clone, Debug)]
pub struct CubeVertex {
    pub rep: Lamp,
    pub crowd: BaseSubset,
    key: String,
}

impl PartialEq for CubeVertex {
    fn eq(&self, other: &Self) -> bool {
        self.crowd == other.crowd && self.key == other.key
    }
}
impl Eq for CubeVertex {}

impl std::hash::Hash for CubeVertex {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.crowd.hash(state);
        self.key.hash(state);
    }
}

impl CubeVertex {
    pub fn height(&self) -> usize {
        self.crowd.len()
    }
}

/// Canonical key of the coset `lamp · L(region)`.
///
/// Complete invariants per backend: the payload outside the region (plus,
/// for cloners, the echelon form of the span of the region columns; for
/// designers, the labels outside the image of the region). The 2-nilpotent
/// backend falls back to the minimum over an explicit coset enumeration.
pub fn coset_key(halo: &Halo, lamp: &Lamp, region: &BaseSubset, caps: &Caps) -> Result<String> {
    Ok(match (halo.backend(), lamp) {
        (Backend::Lighter { .. }, Lamp::Lighter(m)) => {
            let outside: Vec<(&Point, &FElem)> =
                m.iter().filter(|(p, _)| !region.contains(p)).collect();
            format!("{outside:?}")
        }
        (Backend::Juggler { .. }, Lamp::Juggler(m)) => {
            let outside: Vec<_> = m.iter().filter(|((p, _), _)| !region.contains(p)).collect();
            format!("{outside:?}")
        }
        (Backend::Designer { .. }, Lamp::Designer { labels, perm }) => {
            let outside_perm: Vec<_> = perm.iter().filter(|(p, _)| !region.contains(p)).collect();
            let image: HashSet<Point> = region
                .iter()
                .map(|p| perm.get(p).cloned().unwrap_or_else(|| p.clone()))
                .collect();
            let outside_labels: Vec<_> =
                labels.iter().filter(|(p, _)| !image.contains(*p)).collect();
            format!("{outside_perm:?}|{outside_labels:?}")
        }
        (Backend::Cloner { field }, Lamp::Cloner(m)) => {
            let outside: Vec<_> = m.iter().filter(|(q, _)| !region.contains(q)).collect();
            let cols: Vec<cloner::SparseVec> =
                region.iter().map(|q| cloner::column(m, q)).collect();
            let mut coords: Vec<Point> = cols.iter().flat_map(|c| c.keys().cloned()).collect();
            coords.sort();
            coords.dedup();
            let basis = cloner::echelon_basis(field, &cols, &coords);
            format!("{outside:?}|{basis:?}")
        }
        (Backend::Nil2 { .. }, Lamp::Nil2 { .. }) => {
            let subgroup = halo.enumerate_lamps(region, caps)?;
            let mut best: Option<String> = None;
            for psi in &subgroup {
                let s = format!("{:?}", halo.lamp_mul(lamp, psi)?);
                if best.as_ref().map_or(true, |b| &s < b) {
                    best = Some(s);
                }
            }
            best.unwrap_or_default()
        }
        _ => return Err(Error::BackendMismatch("lamp does not match backend".into())),
    })
}

/// Construct the vertex `[lamp, crowd]`.
pub fn make_vertex(halo: &Halo, lamp: Lamp, crowd: BaseSubset, caps: &Caps) -> Result<CubeVertex> {
    if crowd.is_empty() {
        return Err(Error::PreconditionViolated("crowd must be non-empty".into()));
    }
    if !halo.base().is_connected(&crowd) {
        return Err(Error::PreconditionViolated("crowd must be connected".into()));
    }
    let region = crowd.thicken(halo.base(), halo.r0());
    let key = coset_key(halo, &lamp, &region, caps)?;
    Ok(CubeVertex { rep: lamp, crowd, key })
}

/// The image of a group element: `Ψ(φ, h) = [φ, {h}]`.
pub fn embed_psi(halo: &Halo, x: &HaloElement, caps: &Caps) -> Result<CubeVertex> {
    make_vertex(halo, x.lamp.clone(), BaseSubset::singleton(x.arrow.clone()), caps)
}

/// The image of the edge `x — x·gen` under Ψ: one vertex (lamp generator)
/// or a two-step path through the doubled crowd (base generator).
pub fn psi_edge_image(
    halo: &Halo,
    x: &HaloElement,
    gen: &HaloElement,
    caps: &Caps,
) -> Result<Vec<CubeVertex>> {
    let y = halo.mul(x, gen)?;
    if gen.arrow == halo.base().identity() {
        let vx = embed_psi(halo, x, caps)?;
        let vy = embed_psi(halo, &y, caps)?;
        if vx != vy {
            return Err(Error::PreconditionViolated(
                "lamp generator must fix the vertex".into(),
            ));
        }
        Ok(vec![vx])
    } else {
        let mid = make_vertex(
            halo,
            x.lamp.clone(),
            BaseSubset::new(vec![x.arrow.clone(), y.arrow.clone()]),
            caps,
        )?;
        Ok(vec![embed_psi(halo, x, caps)?, mid, embed_psi(halo, &y, caps)?])
    }
}

/// Neighbours of a vertex within height ≤ k: crowd growth by a point of
/// `S^{+1} ∖ S` (one vertex per point, since `L(S^{+r0})` is contained in
/// the larger lamp subgroup), and crowd shrinking, which branches over the
/// cosets of the smaller lamp subgroup inside `rep · L(S^{+r0})`.
pub fn vertex_neighbors(
    halo: &Halo,
    v: &CubeVertex,
    k: usize,
    caps: &Caps,
) -> Result<Vec<CubeVertex>> {
    let g = halo.base();
    let mut out = Vec::new();
    if v.height() < k {
        for p in g.outer_boundary(&v.crowd).iter() {
            let mut pts = v.crowd.points().to_vec();
            pts.push(p.clone());
            out.push(make_vertex(halo, v.rep.clone(), BaseSubset::new(pts), caps)?);
        }
    }
    if v.height() > 1 {
        let region = v.crowd.thicken(g, halo.r0());
        let coset = halo.enumerate_lamps(&region, caps)?;
        for p in v.crowd.iter() {
            let rest: BaseSubset = v.crowd.iter().filter(|q| *q != p).cloned().collect();
            if !g.is_connected(&rest) {
                continue;
            }
            let mut seen = HashSet::new();
            for psi in &coset {
                let w = make_vertex(halo, halo.lamp_mul(&v.rep, psi)?, rest.clone(), caps)?;
                if seen.insert(w.key.clone()) {
                    out.push(w);
                }
            }
        }
    }
    Ok(out)
}

/// For adjacent vertices with `y` one higher, the point `p` with
/// `y = [rep_x, crowd_x ∪ {p}]`, rewriting y's representative into x's.
pub fn up_neighbour_form(halo: &Halo, x: &CubeVertex, y: &CubeVertex, caps: &Caps) -> Result<Point> {
    if y.height() != x.height() + 1 || !x.crowd.is_subset_of(&y.crowd) {
        return Err(Error::NotAdjacent);
    }
    let extra: Vec<Point> =
        y.crowd.iter().filter(|p| !x.crowd.contains(p)).cloned().collect();
    let [p] = extra.as_slice() else { return Err(Error::NotAdjacent) };
    let candidate = make_vertex(halo, x.rep.clone(), y.crowd.clone(), caps)?;
    if &candidate == y {
        Ok(p.clone())
    } else {
        Err(Error::NotAdjacent)
    }
}

/// A finite window of the complex: all vertices with crowds inside the ball
/// of the given radius, heights ≤ k, and lamps within the cost budget.
pub struct CubeWindow {
    pub k: usize,
    pub radius: u32,
    pub budget: u32,
    pub vertices: Vec<CubeVertex>,
    pub edges: Vec<(usize, usize)>,
    index: HashMap<(BaseSubset, String), usize>,
}

impl CubeWindow {
    pub fn find(&self, v: &CubeVertex) -> Option<usize> {
        self.index.get(&(v.crowd.clone(), v.key.clone())).copied()
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in &self.edges {
            adj[*a].push(*b);
            adj[*b].push(*a);
        }
        let mut seen = vec![false; self.vertices.len()];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn to_json(&self, halo: &Halo) -> serde_json::Value {
        serde_json::json!({
            "k": self.k,
            "radius": self.radius,
            "budget": self.budget,
            "vertices": self.vertices.iter().map(|v| serde_json::json!({
                "rep": halo.lamp_to_json(&v.rep),
                "crowd": v.crowd.to_strings(),
            })).collect::<Vec<_>>(),
            "edges": self.edges,
        })
    }
}

/// Build the truncated window.
pub fn build_window(
    halo: &Halo,
    k: usize,
    radius: u32,
    budget: u32,
    caps: &Caps,
) -> Result<CubeWindow> {
    let g = halo.base();
    let ball = g.ball(&g.identity(), radius, caps)?;
    let mut crowds: HashSet<BaseSubset> =
        ball.iter().map(|p| BaseSubset::singleton(p.clone())).collect();
    let mut frontier: Vec<BaseSubset> = crowds.iter().cloned().collect();
    for _ in 1..k {
        let mut next = Vec::new();
        for s in &frontier {
            for p in g.outer_boundary(s).iter() {
                if !ball.contains(p) {
                    continue;
                }
                let mut pts = s.points().to_vec();
                pts.push(p.clone());
                let bigger = BaseSubset::new(pts);
                if crowds.insert(bigger.clone()) {
                    next.push(bigger);
                }
            }
        }
        frontier = next;
    }
    let mut crowds: Vec<BaseSubset> = crowds.into_iter().collect();
    crowds.sort_by(|a, b| a.points().cmp(b.points()));

    let lamp_costs = halo.lamp_costs(budget, caps)?;
    let mut lamps: Vec<&Lamp> = lamp_costs.keys().collect();
    lamps.sort_by_key(|l| format!("{l:?}"));

    let mut vertices: Vec<CubeVertex> = Vec::new();
    let mut index: HashMap<(BaseSubset, String), usize> = HashMap::new();
    for crowd in &crowds {
        for lamp in &lamps {
            let v = make_vertex(halo, (*lamp).clone(), crowd.clone(), caps)?;
            let slot = (v.crowd.clone(), v.key.clone());
            if !index.contains_key(&slot) {
                index.insert(slot, vertices.len());
                vertices.push(v);
            }
        }
    }
    let mut edges = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        if v.height() >= k {
            continue;
        }
        for p in g.outer_boundary(&v.crowd).iter() {
            if !ball.contains(p) {
                continue;
            }
            let mut pts = v.crowd.points().to_vec();
            pts.push(p.clone());
            let up = make_vertex(halo, v.rep.clone(), BaseSubset::new(pts), caps)?;
            if let Some(j) = index.get(&(up.crowd.clone(), up.key.clone())) {
                edges.push((i, *j));
            }
        }
    }
    Ok(CubeWindow { k, radius, budget, vertices, edges, index })
}

/// Constructive path from a vertex to the root `[1, {1}]`, following the
/// crowd-shrinking walk and peeling locally supported factors of the lamp.
/// Every consecutive pair of returned vertices is adjacent, and heights
/// stay ≤ max(initial height, 2).
pub fn connect_to_root(halo: &Halo, v: &CubeVertex, caps: &Caps) -> Result<Vec<CubeVertex>> {
    let g = halo.base();
    let mut path = vec![v.clone()];
    let mut crowd = v.crowd.clone();
    while crowd.len() > 1 {
        let removable = crowd
            .iter()
            .find(|p| {
                let rest: BaseSubset = crowd.iter().filter(|q| q != p).cloned().collect();
                g.is_connected(&rest)
            })
            .cloned()
            .ok_or_else(|| Error::PreconditionViolated("no removable crowd point".into()))?;
        crowd = crowd.iter().filter(|q| **q != removable).cloned().collect();
        path.push(make_vertex(halo, v.rep.clone(), crowd.clone(), caps)?);
    }
    let mut here = crowd.min_point().unwrap().clone();
    let mut lamp = v.rep.clone();
    let mut pieces = halo.factor_local(&lamp)?;
    while let Some((anchor, piece)) = pieces.pop() {
        let mut cur = here.clone();
        while cur != anchor {
            let next = g
                .neighbors(&cur)
                .into_iter()
                .min_by_key(|n| g.dist(n, &anchor))
                .unwrap();
            path.push(make_vertex(
                halo,
                lamp.clone(),
                BaseSubset::new(vec![cur.clone(), next.clone()]),
                caps,
            )?);
            path.push(make_vertex(halo, lamp.clone(), BaseSubset::singleton(next.clone()), caps)?);
            cur = next;
        }
        here = cur;
        // representative rewrite: the piece lives in L(B(anchor, r0))
        let new_lamp = halo.lamp_mul(&lamp, &halo.lamp_inv(&piece)?)?;
        let before = path.last().unwrap().clone();
        let after =
            make_vertex(halo, new_lamp.clone(), BaseSubset::singleton(here.clone()), caps)?;
        if before != after {
            return Err(Error::PreconditionViolated(
                "local piece did not preserve the vertex".into(),
            ));
        }
        lamp = new_lamp;
    }
    if !lamp.is_identity() {
        return Err(Error::PreconditionViolated("lamp factorisation incomplete".into()));
    }
    let mut cur = here;
    let id = g.identity();
    while cur != id {
        let next = g
            .neighbors(&cur)
            .into_iter()
            .min_by_key(|n| g.dist(n, &id))
            .unwrap();
        path.push(make_vertex(
            halo,
            lamp.clone(),
            BaseSubset::new(vec![cur.clone(), next.clone()]),
            caps,
        )?);
        path.push(make_vertex(halo, lamp.clone(), BaseSubset::singleton(next.clone()), caps)?);
        cur = next;
    }
    path.push(make_vertex(halo, halo.identity_lamp(), BaseSubset::singleton(id), caps)?);
    path.dedup();
    Ok(path)
}

/// One move of the loop-filling algorithm.
#[derive(Debug, Clone)]
pub enum FillMove {
    /// Backtrack cancellation at the position.
    Cancel(usize),
    /// Square move lifting the position to the doubled crowd.
    Square(usize),
}

#[derive(Debug)]
pub struct FillTrace {
    pub moves: Vec<FillMove>,
    pub max_crowd: usize,
    pub final_vertex: CubeVertex,
}

/// Fill a combinatorial loop by complexity-decreasing square moves: pick a
/// vertex of minimal height, lift it across the square spanned by its two
/// neighbours, cancel backtracks. Terminates with a single vertex.
pub fn fill_loop(halo: &Halo, cycle: &[CubeVertex], caps: &Caps) -> Result<FillTrace> {
    if cycle.is_empty() {
        return Err(Error::PreconditionViolated("empty loop".into()));
    }
    for i in 0..cycle.len() {
        let a = &cycle[i];
        let b = &cycle[(i + 1) % cycle.len()];
        if a != b
            && up_neighbour_form(halo, a, b, caps).is_err()
            && up_neighbour_form(halo, b, a, caps).is_err()
        {
            return Err(Error::PreconditionViolated(format!(
                "loop vertices {i} and its successor are not adjacent"
            )));
        }
    }
    let mut cur: Vec<CubeVertex> = cycle.to_vec();
    cur.dedup();
    while cur.len() > 1 && cur.first() == cur.last() {
        cur.pop();
    }
    let mut moves = Vec::new();
    let mut max_crowd = cur.iter().map(|v| v.height()).max().unwrap_or(1);
    let mut guard = 0usize;
    while cur.len() > 1 {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::CapExceeded("filling did not terminate".into()));
        }
        if cur.len() == 2 {
            moves.push(FillMove::Cancel(1));
            cur.pop();
            continue;
        }
        let n = cur.len();
        let (i, _) = cur.iter().enumerate().min_by_key(|(_, v)| v.height()).unwrap();
        let u = cur[(i + n - 1) % n].clone();
        let v = cur[i].clone();
        let w = cur[(i + 1) % n].clone();
        if u == w {
            moves.push(FillMove::Cancel(i));
            let j = (i + 1) % n;
            if j > i {
                cur.remove(j);
                cur.remove(i);
            } else {
                cur.remove(i);
                cur.remove(j);
            }
        } else {
            let p = up_neighbour_form(halo, &v, &u, caps)?;
            let q = up_neighbour_form(halo, &v, &w, caps)?;
            debug_assert_ne!(p, q);
            let mut pts = v.crowd.points().to_vec();
            pts.push(p);
            pts.push(q);
            let lifted = make_vertex(halo, v.rep.clone(), BaseSubset::new(pts), caps)?;
            max_crowd = max_crowd.max(lifted.height());
            moves.push(FillMove::Square(i));
            cur[i] = lifted;
        }
        cur.dedup();
        while cur.len() > 1 && cur.first() == cur.last() {
            cur.pop();
        }
    }
    Ok(FillTrace { moves, max_crowd, final_vertex: cur.pop().unwrap() })
}

/// Graph distance between two vertices within height ≤ k, by lazy BFS.
pub fn complex_distance(
    halo: &Halo,
    from: &CubeVertex,
    to: &CubeVertex,
    k: usize,
    cap: u32,
    caps: &Caps,
) -> Result<u32> {
    if from == to {
        return Ok(0);
    }
    let mut seen: HashSet<CubeVertex> = HashSet::from([from.clone()]);
    let mut frontier = vec![from.clone()];
    for d in 1..=cap {
        let mut next = Vec::new();
        for v in &frontier {
            for w in vertex_neighbors(halo, v, k, caps)? {
                if &w == to {
                    return Ok(d);
                }
                if seen.insert(w.clone()) {
                    if seen.len() as u64 > caps.bfs_states {
                        return Err(Error::CapExceeded("complex BFS state cap".into()));
                    }
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    Err(Error::Unreachable { cap })
}

/// Measure `M_k`: the maximum diameter of `L(S^{+r0})` in translated module
/// generators, over connected crowds of size ≤ k inside the window ball.
pub fn measure_m_k(halo: &Halo, k: usize, radius: u32, caps: &Caps) -> Result<u32> {
    let g = halo.base();
    let ball = g.ball(&g.identity(), radius, caps)?;
    let mut crowds: Vec<BaseSubset> =
        ball.iter().map(|p| BaseSubset::singleton(p.clone())).collect();
    if k >= 2 {
        let singles = crowds.clone();
        for s in &singles {
            for p in g.outer_boundary(s).iter() {
                if ball.contains(p) {
                    let mut pts = s.points().to_vec();
                    pts.push(p.clone());
                    crowds.push(BaseSubset::new(pts));
                }
            }
        }
    }
    crowds.sort_by(|a, b| a.points().cmp(b.points()));
    crowds.dedup();
    let mut m_k = 0;
    for crowd in &crowds {
        let region = crowd.thicken(g, halo.r0());
        let mut gens = Vec::new();
        for h in region.iter() {
            for base_gen in halo.module_generators() {
                let moved = halo.act(h, &base_gen);
                if halo.support(&moved).is_subset_of(&region) {
                    gens.push(moved);
                }
            }
        }
        let total = halo.lamp_count(region.len() as u32);
        if total > num_bigint::BigUint::from(caps.enumeration) {
            return Err(Error::CapExceeded("region subgroup too large to measure".into()));
        }
        let mut dist: HashMap<Lamp, u32> = HashMap::from([(halo.identity_lamp(), 0)]);
        let mut frontier = vec![halo.identity_lamp()];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for x in &frontier {
                for gen in &gens {
                    let y = halo.lamp_mul(x, gen)?;
                    if !dist.contains_key(&y) {
                        dist.insert(y.clone(), depth);
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        let full = halo.enumerate_lamps(&region, caps)?;
        if dist.len() != full.len() {
            return Err(Error::PreconditionViolated(
                "module generators do not generate the region subgroup".into(),
            ));
        }
        m_k = m_k.max(dist.values().copied().max().unwrap_or(0));
    }
    Ok(m_k)
}

/// A block: the vertices with crowd inside the region and lamp in a fixed
/// coset of `L(region^{+r0})`.
pub struct Block {
    pub region: BaseSubset,
    pub key: String,
}

impl Block {
    pub fn of(halo: &Halo, lamp: &Lamp, x: &BaseSubset, caps: &Caps) -> Result<Block> {
        let thick = x.thicken(halo.base(), halo.r0());
        Ok(Block { region: x.clone(), key: coset_key(halo, lamp, &thick, caps)? })
    }

    pub fn contains(&self, halo: &Halo, v: &CubeVertex, caps: &Caps) -> Result<bool> {
        if !v.crowd.is_subset_of(&self.region) {
            return Ok(false);
        }
        let thick = self.region.thicken(halo.base(), halo.r0());
        Ok(coset_key(halo, &v.rep, &thick, caps)? == self.key)
    }
}

/// Count the reduced crossings of W-type cover nodes along a vertex path,
/// against the two-sided cover attached to the separating set `V`: W-nodes
/// hold crowds inside `W := V^{+r0+k}` (split by cosets of `L(W^{+r0})`),
/// U-nodes hold crowds avoiding `U := V^{+r0}` (split by cosets of the
/// complement-supported subgroup).
pub fn block_crossings(
    halo: &Halo,
    path: &[CubeVertex],
    v_set: &BaseSubset,
    k: usize,
    caps: &Caps,
) -> Result<u32> {
    if path.len() < 2 {
        return Ok(0);
    }
    let g = halo.base();
    let r0 = halo.r0();
    let u_region = v_set.thicken(g, r0);
    let w_region = u_region.thicken(g, k as u32);
    let w_thick = w_region.thicken(g, r0);
    let eroded: BaseSubset = u_region
        .iter()
        .filter(|p| {
            g.ball(p, r0, caps)
                .map(|b| b.is_subset_of(&u_region))
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    for end in [path.first().unwrap(), path.last().unwrap()] {
        let far = end.crowd.dist_to(g, v_set).map_or(true, |d| d > r0 as u64);
        if !far {
            return Err(Error::PreconditionViolated(
                "path endpoint crowd too close to the separating set".into(),
            ));
        }
    }

    #[derive(Clone, PartialEq, Eq, Debug)]
    enum Node {
        W(String),
        U(usize),
    }
    let mut u_reps: Vec<Lamp> = Vec::new();
    let mut u_id = |lamp: &Lamp| -> Result<usize> {
        for (i, rep) in u_reps.iter().enumerate() {
            let diff = halo.lamp_mul(&halo.lamp_inv(rep)?, lamp)?;
            if halo.support(&diff).intersect(&eroded).is_empty() {
                return Ok(i);
            }
        }
        u_reps.push(lamp.clone());
        Ok(u_reps.len() - 1)
    };

    let fits_w = |v: &CubeVertex| v.crowd.is_subset_of(&w_region);
    let fits_u = |v: &CubeVertex| v.crowd.intersect(&u_region).is_empty();

    let mut walk: Vec<Node> = Vec::new();
    for pair in path.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a == b {
            continue;
        }
        let node = if fits_u(a) && fits_u(b) {
            Node::U(u_id(&a.rep)?)
        } else if fits_w(a) && fits_w(b) {
            Node::W(coset_key(halo, &a.rep, &w_thick, caps)?)
        } else {
            return Err(Error::PreconditionViolated(
                "edge fits neither cover side; enlarge the window".into(),
            ));
        };
        if walk.last() != Some(&node) {
            walk.push(node);
        }
    }
    // free reduction of the nerve walk
    let mut reduced: Vec<Node> = Vec::new();
    for node in walk {
        if reduced.len() >= 2 && reduced[reduced.len() - 2] == node {
            reduced.pop();
        } else {
            reduced.push(node);
        }
    }
    Ok(reduced.iter().filter(|n| matches!(n, Node::W(_))).count() as u32)
}

impl Halo {
    /// Edge-supported factorisation of a lamp: ordered pieces, each
    /// supported in `B(anchor, r0)`, whose product is the lamp. The
    /// factorisation is verified before returning.
    pub fn factor_local(&self, lamp: &Lamp) -> Result<Vec<(Point, Lamp)>> {
        let g = self.base();
        let out: Vec<(Point, Lamp)> = match (self.backend(), lamp) {
            (Backend::Lighter { .. }, Lamp::Lighter(m)) => m
                .iter()
                .map(|(p, v)| (p.clone(), Lamp::Lighter(BTreeMap::from([(p.clone(), *v)]))))
                .collect(),
            (Backend::Nil2 { f, tensor }, Lamp::Nil2 { f: fm, z }) => {
                let single = |p: &Point, v: FElem| Lamp::Nil2 {
                    f: BTreeMap::from([(p.clone(), v)]),
                    z: BTreeMap::new(),
                };
                let mut pieces: Vec<(Point, Lamp)> =
                    fm.iter().map(|(p, v)| (p.clone(), single(p, *v))).collect();
                for ((i, j), t) in z {
                    for (s, tt, count) in tensor.pure_decomposition(t) {
                        let a = f.ab_section(s);
                        let b = f.ab_section(tt);
                        for _ in 0..count {
                            // [x, y] = x⁻¹ y⁻¹ x y lands on the pure tensor
                            pieces.push((i.clone(), single(i, f.inv(a))));
                            pieces.push((j.clone(), single(j, f.inv(b))));
                            pieces.push((i.clone(), single(i, a)));
                            pieces.push((j.clone(), single(j, b)));
                        }
                    }
                }
                pieces
            }
            (Backend::Juggler { .. }, Lamp::Juggler(cells)) => {
                factor_cells_product(g, cells)?
                    .into_iter()
                    .map(|(anchor, piece)| (anchor, Lamp::Juggler(piece)))
                    .collect()
            }
            (Backend::Designer { .. }, Lamp::Designer { labels, perm }) => {
                let mut pieces: Vec<(Point, Lamp)> = labels
                    .iter()
                    .map(|(p, v)| {
                        (
                            p.clone(),
                            Lamp::Designer {
                                labels: BTreeMap::from([(p.clone(), *v)]),
                                perm: BTreeMap::new(),
                            },
                        )
                    })
                    .collect();
                let cells: BTreeMap<crate::lampkit::PtF, crate::lampkit::PtF> = perm
                    .iter()
                    .map(|(a, b)| ((a.clone(), 0u8), (b.clone(), 0u8)))
                    .collect();
                for (anchor, piece) in factor_cells_product(g, &cells)? {
                    let perm: BTreeMap<Point, Point> =
                        piece.into_iter().map(|((a, _), (b, _))| (a, b)).collect();
                    pieces.push((anchor, Lamp::Designer { labels: BTreeMap::new(), perm }));
                }
                pieces
            }
            (Backend::Cloner { .. }, Lamp::Cloner(m)) => {
                let lamps = crate::leafgeo::builders::factor_cloner_avoiding(
                    self,
                    m,
                    &HashSet::new(),
                )?;
                lamps
                    .into_iter()
                    .map(|l| {
                        let anchor = self.support(&l).min_point().unwrap().clone();
                        (anchor, l)
                    })
                    .collect()
            }
            _ => return Err(Error::BackendMismatch("lamp does not match backend".into())),
        };
        let mut acc = self.identity_lamp();
        for (anchor, piece) in &out {
            let hood = BaseSubset::singleton(anchor.clone()).thicken(g, self.r0());
            if !self.support(piece).is_subset_of(&hood) {
                return Err(Error::PreconditionViolated("piece is not local".into()));
            }
            acc = self.lamp_mul(&acc, piece)?;
        }
        if &acc != lamp {
            return Err(Error::PreconditionViolated("local factorisation failed".into()));
        }
        Ok(out)
    }
}

/// Factor a finitely supported cell permutation into transpositions of
/// cells at adjacent vertices whose ordered product (apply-last-first, the
/// lamp multiplication order) equals the permutation.
fn factor_cells_product(
    g: &crate::basegroup::MarkedGroup,
    cells: &BTreeMap<crate::lampkit::PtF, crate::lampkit::PtF>,
) -> Result<Vec<(Point, BTreeMap<crate::lampkit::PtF, crate::lampkit::PtF>)>> {
    let (steps, rest) =
        crate::leafgeo::builders::clear_cells_outside(g, cells, &HashSet::new())?;
    if !rest.is_empty() {
        return Err(Error::PreconditionViolated("cell clearing left a remainder".into()));
    }
    // σ · s1 ⋯ sN = id with involutive si, so σ = sN ⋯ s1
    Ok(steps
        .into_iter()
        .rev()
        .map(|piece| {
            let anchor = piece.keys().next().unwrap().0.clone();
            (anchor, piece)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn caps() -> Caps {
        Caps::default()
    }

    fn delta(halo: &Halo, at: &str) -> Lamp {
        Lamp::Lighter(BTreeMap::from([(halo.base().parse_point(at).unwrap(), 1)]))
    }

    #[test]
    fn vertex_identification() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let g = halo.base();
        let crowd = BaseSubset::singleton(g.identity());
        let phi = delta(&halo, "4");
        let psi = delta(&halo, "1");
        let v1 = make_vertex(&halo, phi.clone(), crowd.clone(), &caps()).unwrap();
        let v2 =
            make_vertex(&halo, halo.lamp_mul(&phi, &psi).unwrap(), crowd.clone(), &caps()).unwrap();
        assert_eq!(v1, v2, "[φ,S] = [φψ,S] for ψ in L(S^{{+1}})");
        let psi_far = delta(&halo, "2");
        let v3 =
            make_vertex(&halo, halo.lamp_mul(&phi, &psi_far).unwrap(), crowd, &caps()).unwrap();
        assert_ne!(v1, v3);
    }

    #[test]
    fn coset_keys_respect_cosets_randomly() {
        for spec in ["lighter:2", "juggler:1", "designer:2", "cloner:2", "nil2:2"] {
            let halo = Halo::parse(spec, "Z").unwrap();
            let g = halo.base();
            let mut rng = ChaCha8Rng::seed_from_u64(21);
            let crowd = BaseSubset::new(vec![g.identity(), g.parse_point("1").unwrap()]);
            let region = crowd.thicken(g, 1);
            let window = g.ball(&g.identity(), 3, &caps()).unwrap();
            for _ in 0..40 {
                let phi = halo.random_lamp(&window, &mut rng);
                let psi = halo.random_lamp(&region, &mut rng);
                let k1 = coset_key(&halo, &phi, &region, &caps()).unwrap();
                let k2 =
                    coset_key(&halo, &halo.lamp_mul(&phi, &psi).unwrap(), &region, &caps())
                        .unwrap();
                assert_eq!(k1, k2, "{spec}: right multiplication must fix the key");
            }
        }
    }

    #[test]
    fn up_neighbour_recovers_the_point() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let g = halo.base();
        let x = make_vertex(
            &halo,
            halo.identity_lamp(),
            BaseSubset::singleton(g.identity()),
            &caps(),
        )
        .unwrap();
        let up_crowd = BaseSubset::new(vec![g.identity(), g.parse_point("1").unwrap()]);
        // y given with a different coset representative
        let y = make_vertex(&halo, delta(&halo, "2"), up_crowd, &caps()).unwrap();
        let p = up_neighbour_form(&halo, &x, &y, &caps()).unwrap();
        assert_eq!(p, g.parse_point("1").unwrap());
        let z = make_vertex(
            &halo,
            halo.identity_lamp(),
            BaseSubset::singleton(g.parse_point("3").unwrap()),
            &caps(),
        )
        .unwrap();
        assert!(matches!(up_neighbour_form(&halo, &x, &z, &caps()), Err(Error::NotAdjacent)));
    }

    #[test]
    fn psi_contracts_distances() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let ball = halo.halo_ball(3, &caps()).unwrap();
        let root = embed_psi(&halo, &halo.one(), &caps()).unwrap();
        for (x, d) in ball.iter() {
            if *d == 0 {
                continue;
            }
            let vx = embed_psi(&halo, x, &caps()).unwrap();
            let dc = complex_distance(&halo, &root, &vx, 2, 2 * d + 2, &caps()).unwrap();
            assert!(dc <= 2 * d, "Ψ must be 2-Lipschitz: {dc} vs {d}");
        }
    }

    #[test]
    fn window_is_connected_and_walkable() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let window = build_window(&halo, 2, 2, 4, &caps()).unwrap();
        assert!(window.is_connected());
        assert!(window.vertices.len() > 8);
        for v in &window.vertices {
            let path = connect_to_root(&halo, v, &caps()).unwrap();
            let root = make_vertex(&halo, halo.identity_lamp(), BaseSubset::singleton(halo.base().identity()), &caps()).unwrap();
            assert_eq!(path.last().unwrap(), &root);
            assert!(path.iter().all(|u| u.height() <= 2));
        }
    }

    #[test]
    fn fill_small_loops() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let g = halo.base();
        let id = halo.identity_lamp();
        let single = |at: &str| {
            make_vertex(
                &halo,
                id.clone(),
                BaseSubset::singleton(g.parse_point(at).unwrap()),
                &caps(),
            )
            .unwrap()
        };
        let pair = |a: &str, b: &str| {
            make_vertex(
                &halo,
                id.clone(),
                BaseSubset::new(vec![g.parse_point(a).unwrap(), g.parse_point(b).unwrap()]),
                &caps(),
            )
            .unwrap()
        };
        let trace = fill_loop(&halo, &[single("0")], &caps()).unwrap();
        assert!(trace.moves.is_empty());
        let trace = fill_loop(&halo, &[single("0"), pair("0", "1")], &caps()).unwrap();
        assert_eq!(trace.moves.len(), 1);
        let cycle = vec![single("0"), pair("0", "1"), single("1"), pair("0", "1")];
        let trace = fill_loop(&halo, &cycle, &caps()).unwrap();
        assert!(trace.max_crowd <= 2 + cycle.len());
    }

    #[test]
    fn factor_local_every_backend() {
        for spec in ["lighter:3", "juggler:2", "designer:2", "cloner:2", "nil2:2", "nil2:s3"] {
            let halo = Halo::parse(spec, "Z").unwrap();
            let g = halo.base();
            let mut rng = ChaCha8Rng::seed_from_u64(33);
            let window = g.ball(&g.identity(), 2, &caps()).unwrap();
            for _ in 0..25 {
                let lamp = halo.random_lamp(&window, &mut rng);
                halo.factor_local(&lamp).unwrap();
            }
        }
    }

    #[test]
    fn block_crossing_forced_by_support() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let g = halo.base();
        let id = halo.identity_lamp();
        let mk = |lamp: &Lamp, at: &str| {
            make_vertex(
                &halo,
                lamp.clone(),
                BaseSubset::singleton(g.parse_point(at).unwrap()),
                &caps(),
            )
            .unwrap()
        };
        let mk2 = |lamp: &Lamp, a: &str, b: &str| {
            make_vertex(
                &halo,
                lamp.clone(),
                BaseSubset::new(vec![g.parse_point(a).unwrap(), g.parse_point(b).unwrap()]),
                &caps(),
            )
            .unwrap()
        };
        let d0 = delta(&halo, "0");
        let mut path = Vec::new();
        for i in -3..=0 {
            path.push(mk(&id, &i.to_string()));
            if i < 0 {
                path.push(mk2(&id, &i.to_string(), &(i + 1).to_string()));
            }
        }
        for i in 0..=3 {
            path.push(mk(&d0, &i.to_string()));
            if i < 3 {
                path.push(mk2(&d0, &i.to_string(), &(i + 1).to_string()));
            }
        }
        let v_set = BaseSubset::singleton(g.identity());
        let crossings = block_crossings(&halo, &path, &v_set, 2, &caps()).unwrap();
        assert!(crossings >= 1);
        // doubling the path by a backtrack leaves the reduced count intact
        let mut doubled = path.clone();
        let k = path.len() - 3;
        let mut tail: Vec<CubeVertex> = path[k..path.len() - 1].to_vec();
        let mut back: Vec<CubeVertex> = tail.clone();
        back.reverse();
        doubled.extend(back.into_iter().skip(1));
        doubled.extend(tail.drain(..).skip(1));
        doubled.push(path.last().unwrap().clone());
        let doubled_crossings = block_crossings(&halo, &doubled, &v_set, 2, &caps()).unwrap();
        assert_eq!(doubled_crossings, crossings);
        // a separating set away from the difference forces nothing
        let far_v = BaseSubset::singleton(g.parse_point("9").unwrap());
        let crossings = block_crossings(&halo, &path, &far_v, 2, &caps()).unwrap();
        assert_eq!(crossings, 0);
    }

    #[test]
    fn m_k_for_small_windows() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let m2 = measure_m_k(&halo, 2, 2, &caps()).unwrap();
        // a crowd of size 2 thickens to 4 points; the all-on configuration
        // needs one generator per point
        assert_eq!(m2, 4);
    }

    #[test]
    fn blocks_membership() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let g = halo.base();
        let region: BaseSubset =
            ["0", "1"].iter().map(|s| g.parse_point(s).unwrap()).collect();
        let block = Block::of(&halo, &halo.identity_lamp(), &region, &caps()).unwrap();
        let inside = make_vertex(
            &halo,
            delta(&halo, "1"),
            BaseSubset::singleton(g.identity()),
            &caps(),
        )
        .unwrap();
        assert!(block.contains(&halo, &inside, &caps()).unwrap());
        let outside_coset = make_vertex(
            &halo,
            delta(&halo, "5"),
            BaseSubset::singleton(g.identity()),
            &caps(),
        )
        .unwrap();
        assert!(!block.contains(&halo, &outside_coset, &caps()).unwrap());
    }
}
