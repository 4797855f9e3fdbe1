//! Marked base groups: ℤ, ℤ², free groups F_k, and ℤ/m, with exact
//! arithmetic, Cayley-graph BFS, balls, connectivity, and boundary growth.

use crate::{Caps, Error, Result};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

/// An element of a marked base group, in canonical form.
///
/// Canonical forms: integer vectors for ℤ^d, reduced words for F_k (letters
/// `1..=k`, negatives for inverses), and the symmetric representative in
/// `(-m/2, m/2]` for ℤ/m.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Point {
    Lattice { x: i64, y: i64 },
    Word(Vec<i8>),
    Residue(i64),
}

impl Point {
    pub fn origin_lattice() -> Point {
        Point::Lattice { x: 0, y: 0 }
    }

    /// Word length of the element with respect to the standard generators.
    pub fn weight(&self) -> u64 {
        match self {
            Point::Lattice { x, y } => x.unsigned_abs() + y.unsigned_abs(),
            Point::Word(w) => w.len() as u64,
            Point::Residue(r) => r.unsigned_abs(),
        }
    }
}

// Total order: word length first, then a structural tiebreak. This is the
// fixed base order used for nilpotent pair keys and all set canonical forms.
impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight().cmp(&other.weight()).then_with(|| match (self, other) {
            (Point::Lattice { x: ax, y: ay }, Point::Lattice { x: bx, y: by }) => {
                (ax, ay).cmp(&(bx, by))
            }
            (Point::Word(a), Point::Word(b)) => a.cmp(b),
            (Point::Residue(a), Point::Residue(b)) => a.cmp(b),
            _ => discriminant_rank(self).cmp(&discriminant_rank(other)),
        })
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn discriminant_rank(p: &Point) -> u8 {
    match p {
        Point::Lattice { .. } => 0,
        Point::Word(_) => 1,
        Point::Residue(_) => 2,
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Lattice { x, y } => write!(f, "{x},{y}"),
            Point::Word(w) => {
                if w.is_empty() {
                    return write!(f, "1");
                }
                for &l in w {
                    let c = (b'a' + (l.unsigned_abs() - 1)) as char;
                    if l > 0 {
                        write!(f, "{c}")?;
                    } else {
                        write!(f, "{}", c.to_ascii_uppercase())?;
                    }
                }
                Ok(())
            }
            Point::Residue(r) => write!(f, "{r}"),
        }
    }
}

/// A finitely generated base group with a fixed symmetric generating set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum MarkedGroup {
    /// ℤ^rank with generators ±e_i, rank 1 or 2.
    FreeAbelian { rank: u8 },
    /// Free group of the given rank with the standard free basis.
    Free { rank: u8 },
    /// ℤ/m with generators ±1.
    Cyclic { modulus: u32 },
}

impl MarkedGroup {
    /// Parse a config name: `Z`, `Z2`, `F2`, `F3`, ..., `Zmod:m`.
    pub fn parse(name: &str) -> Result<MarkedGroup> {
        match name {
            "Z" => Ok(MarkedGroup::FreeAbelian { rank: 1 }),
            "Z2" => Ok(MarkedGroup::FreeAbelian { rank: 2 }),
            _ => {
                if let Some(k) = name.strip_prefix('F') {
                    let rank: u8 = k
                        .parse()
                        .map_err(|_| Error::Config(format!("bad free rank in `{name}`")))?;
                    if rank == 0 || rank > 13 {
                        return Err(Error::Config(format!("unsupported free rank {rank}")));
                    }
                    return Ok(MarkedGroup::Free { rank });
                }
                if let Some(m) = name.strip_prefix("Zmod:") {
                    let modulus: u32 = m
                        .parse()
                        .map_err(|_| Error::Config(format!("bad modulus in `{name}`")))?;
                    if modulus < 2 {
                        return Err(Error::Config("modulus must be at least 2".into()));
                    }
                    return Ok(MarkedGroup::Cyclic { modulus });
                }
                Err(Error::Config(format!("unknown base group `{name}`")))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            MarkedGroup::FreeAbelian { rank: 1 } => "Z".into(),
            MarkedGroup::FreeAbelian { rank } => format!("Z{rank}"),
            MarkedGroup::Free { rank } => format!("F{rank}"),
            MarkedGroup::Cyclic { modulus } => format!("Zmod:{modulus}"),
        }
    }

    pub fn identity(&self) -> Point {
        match self {
            MarkedGroup::FreeAbelian { .. } => Point::Lattice { x: 0, y: 0 },
            MarkedGroup::Free { .. } => Point::Word(Vec::new()),
            MarkedGroup::Cyclic { .. } => Point::Residue(0),
        }
    }

    /// The fixed, inversion-closed generator list. Order is part of the
    /// marking: all BFS tie-breaking follows it.
    pub fn generators(&self) -> Vec<Point> {
        match self {
            MarkedGroup::FreeAbelian { rank } => {
                let mut gens = vec![
                    Point::Lattice { x: 1, y: 0 },
                    Point::Lattice { x: -1, y: 0 },
                ];
                if *rank == 2 {
                    gens.push(Point::Lattice { x: 0, y: 1 });
                    gens.push(Point::Lattice { x: 0, y: -1 });
                }
                gens
            }
            MarkedGroup::Free { rank } => {
                let mut gens = Vec::new();
                for i in 1..=*rank as i8 {
                    gens.push(Point::Word(vec![i]));
                    gens.push(Point::Word(vec![-i]));
                }
                gens
            }
            MarkedGroup::Cyclic { modulus } => {
                if *modulus == 2 {
                    vec![Point::Residue(1)]
                } else {
                    vec![Point::Residue(1), Point::Residue(-1)]
                }
            }
        }
    }

    fn canon(&self, p: Point) -> Point {
        match (self, p) {
            (MarkedGroup::Cyclic { modulus }, Point::Residue(r)) => {
                let m = *modulus as i64;
                let mut v = r.rem_euclid(m);
                if 2 * v > m {
                    v -= m;
                }
                Point::Residue(v)
            }
            (_, p) => p,
        }
    }

    pub fn mul(&self, a: &Point, b: &Point) -> Point {
        match (a, b) {
            (Point::Lattice { x: ax, y: ay }, Point::Lattice { x: bx, y: by }) => {
                Point::Lattice { x: ax + bx, y: ay + by }
            }
            (Point::Word(a), Point::Word(b)) => {
                let mut w = a.clone();
                for &l in b {
                    if w.last() == Some(&-l) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                Point::Word(w)
            }
            (Point::Residue(a), Point::Residue(b)) => self.canon(Point::Residue(a + b)),
            _ => panic!("mixed base elements"),
        }
    }

    pub fn inv(&self, a: &Point) -> Point {
        match a {
            Point::Lattice { x, y } => Point::Lattice { x: -x, y: -y },
            Point::Word(w) => Point::Word(w.iter().rev().map(|l| -l).collect()),
            Point::Residue(r) => self.canon(Point::Residue(-r)),
        }
    }

    /// Exact word distance. Closed form in all three families; the BFS oracle
    /// in the tests cross-checks it.
    pub fn dist(&self, a: &Point, b: &Point) -> u64 {
        self.mul(&self.inv(a), b).weight()
    }

    pub fn neighbors(&self, p: &Point) -> Vec<Point> {
        self.generators().iter().map(|g| self.mul(p, g)).collect()
    }

    /// Parse an element from its canonical string.
    pub fn parse_point(&self, s: &str) -> Result<Point> {
        let bad = || Error::Config(format!("cannot parse `{s}` in {}", self.name()));
        match self {
            MarkedGroup::FreeAbelian { rank } => {
                let parts: Vec<&str> = s.split(',').collect();
                let x: i64 = parts[0].trim().parse().map_err(|_| bad())?;
                let y: i64 = match parts.len() {
                    1 => 0,
                    2 => parts[1].trim().parse().map_err(|_| bad())?,
                    _ => return Err(bad()),
                };
                if *rank == 1 && y != 0 {
                    return Err(bad());
                }
                Ok(Point::Lattice { x, y })
            }
            MarkedGroup::Free { rank } => {
                if s == "1" {
                    return Ok(Point::Word(Vec::new()));
                }
                let mut w = Point::Word(Vec::new());
                for c in s.chars() {
                    let lower = c.to_ascii_lowercase();
                    if !lower.is_ascii_lowercase() {
                        return Err(bad());
                    }
                    let idx = (lower as u8 - b'a') as i8 + 1;
                    if idx as u8 > *rank {
                        return Err(bad());
                    }
                    let letter = if c.is_ascii_uppercase() { -idx } else { idx };
                    w = self.mul(&w, &Point::Word(vec![letter]));
                }
                Ok(w)
            }
            MarkedGroup::Cyclic { .. } => {
                let r: i64 = s.trim().parse().map_err(|_| bad())?;
                Ok(self.canon(Point::Residue(r)))
            }
        }
    }
}

/// A finite set of base elements with the deterministic total order.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BaseSubset(Vec<Point>);

impl BaseSubset {
    pub fn new(mut points: Vec<Point>) -> BaseSubset {
        points.sort();
        points.dedup();
        BaseSubset(points)
    }

    pub fn empty() -> BaseSubset {
        BaseSubset(Vec::new())
    }

    pub fn singleton(p: Point) -> BaseSubset {
        BaseSubset(vec![p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.0.binary_search(p).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.0.iter()
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn min_point(&self) -> Option<&Point> {
        self.0.first()
    }

    pub fn union(&self, other: &BaseSubset) -> BaseSubset {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        BaseSubset::new(v)
    }

    pub fn intersect(&self, other: &BaseSubset) -> BaseSubset {
        BaseSubset(self.0.iter().filter(|p| other.contains(p)).cloned().collect())
    }

    pub fn minus(&self, other: &BaseSubset) -> BaseSubset {
        BaseSubset(self.0.iter().filter(|p| !other.contains(p)).cloned().collect())
    }

    pub fn is_subset_of(&self, other: &BaseSubset) -> bool {
        self.0.iter().all(|p| other.contains(p))
    }

    /// Left translate `g·S`.
    pub fn translate(&self, group: &MarkedGroup, g: &Point) -> BaseSubset {
        BaseSubset::new(self.0.iter().map(|p| group.mul(g, p)).collect())
    }

    /// `S^{+r}`: all points within distance `r` of `S`.
    pub fn thicken(&self, group: &MarkedGroup, r: u32) -> BaseSubset {
        let mut out: HashSet<Point> = self.0.iter().cloned().collect();
        let mut frontier: Vec<Point> = self.0.clone();
        for _ in 0..r {
            let mut next = Vec::new();
            for p in &frontier {
                for q in group.neighbors(p) {
                    if out.insert(q.clone()) {
                        next.push(q);
                    }
                }
            }
            frontier = next;
        }
        BaseSubset::new(out.into_iter().collect())
    }

    /// Min distance between two nonempty subsets.
    pub fn dist_to(&self, group: &MarkedGroup, other: &BaseSubset) -> Option<u64> {
        if self.is_empty() || other.is_empty() {
            return None;
        }
        let mut best = u64::MAX;
        for a in &self.0 {
            for b in &other.0 {
                best = best.min(group.dist(a, b));
            }
        }
        Some(best)
    }

    pub fn diameter(&self, group: &MarkedGroup) -> u64 {
        let mut best = 0;
        for a in &self.0 {
            for b in &self.0 {
                best = best.max(group.dist(a, b));
            }
        }
        best
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|p| p.to_string()).collect()
    }
}

impl FromIterator<Point> for BaseSubset {
    fn from_iter<T: IntoIterator<Item = Point>>(iter: T) -> Self {
        BaseSubset::new(iter.into_iter().collect())
    }
}

impl MarkedGroup {
    /// The ball `B(center, radius)` by BFS with the fixed generator order.
    pub fn ball(&self, center: &Point, radius: u32, caps: &Caps) -> Result<BaseSubset> {
        if radius > caps.ball_radius {
            return Err(Error::CapExceeded(format!(
                "ball radius {radius} exceeds cap {}",
                caps.ball_radius
            )));
        }
        let mut seen: HashSet<Point> = HashSet::new();
        seen.insert(center.clone());
        let mut frontier = vec![center.clone()];
        for _ in 0..radius {
            let mut next = Vec::new();
            for p in &frontier {
                for q in self.neighbors(p) {
                    if seen.insert(q.clone()) {
                        next.push(q);
                    }
                }
            }
            frontier = next;
        }
        Ok(BaseSubset::new(seen.into_iter().collect()))
    }

    /// Whether the Cayley subgraph induced on `s` is connected.
    pub fn is_connected(&self, s: &BaseSubset) -> bool {
        if s.len() <= 1 {
            return true;
        }
        let start = s.min_point().unwrap().clone();
        let mut seen: HashSet<Point> = HashSet::new();
        seen.insert(start.clone());
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for q in self.neighbors(&p) {
                if s.contains(&q) && seen.insert(q.clone()) {
                    queue.push_back(q);
                }
            }
        }
        seen.len() == s.len()
    }

    /// Connected components of the induced subgraph, at coarseness `scale`
    /// (scale 1 is graph connectivity, scale 2 the 2-coarse variant).
    pub fn coarse_components(&self, s: &BaseSubset, scale: u64) -> Vec<BaseSubset> {
        let mut remaining: Vec<Point> = s.points().to_vec();
        let mut comps = Vec::new();
        while let Some(seed) = remaining.first().cloned() {
            let mut comp = vec![seed.clone()];
            let mut queue = VecDeque::from([seed]);
            remaining.retain(|p| p != &comp[0]);
            while let Some(p) = queue.pop_front() {
                let close: Vec<Point> = remaining
                    .iter()
                    .filter(|q| self.dist(&p, q) <= scale)
                    .cloned()
                    .collect();
                for q in close {
                    remaining.retain(|r| r != &q);
                    comp.push(q.clone());
                    queue.push_back(q);
                }
            }
            comps.push(BaseSubset::new(comp));
        }
        comps
    }

    /// The outer vertex boundary: points at distance exactly 1 from `s`.
    pub fn outer_boundary(&self, s: &BaseSubset) -> BaseSubset {
        let mut out = HashSet::new();
        for p in s.iter() {
            for q in self.neighbors(p) {
                if !s.contains(&q) {
                    out.insert(q);
                }
            }
        }
        BaseSubset::new(out.into_iter().collect())
    }

    /// Enumerate connected subsets containing the identity, one per
    /// translation class (canonical: the minimum element is the identity),
    /// of sizes `1..=max_size`.
    pub fn connected_subsets(&self, max_size: usize, caps: &Caps) -> Result<Vec<BaseSubset>> {
        if max_size as u32 > caps.boundary_n {
            return Err(Error::CapExceeded(format!(
                "connected-subset size {max_size} exceeds cap {}",
                caps.boundary_n
            )));
        }
        let id = self.identity();
        let mut out = Vec::new();
        let mut current = vec![id.clone()];
        let mut seen: HashSet<Point> = HashSet::new();
        seen.insert(id.clone());
        let first_ext = self.neighbors(&id);
        for e in &first_ext {
            seen.insert(e.clone());
        }
        self.subsets_rec(&mut current, first_ext, &mut seen, max_size, &mut out);
        // keep one representative per translation orbit: the minimum, over
        // all translates bringing a member to the identity, of the sorted
        // point vector
        let canon: Vec<BaseSubset> = out.into_iter().filter(|s| self.is_orbit_canonical(s)).collect();
        Ok(canon)
    }

    fn is_orbit_canonical(&self, s: &BaseSubset) -> bool {
        let id = self.identity();
        debug_assert!(s.contains(&id));
        for p in s.iter() {
            let t = s.translate(self, &self.inv(p));
            if t.points() < s.points() {
                return false;
            }
        }
        true
    }

    fn subsets_rec(
        &self,
        current: &mut Vec<Point>,
        ext: Vec<Point>,
        seen: &mut HashSet<Point>,
        max_size: usize,
        out: &mut Vec<BaseSubset>,
    ) {
        if current.len() == 1 {
            out.push(BaseSubset::new(current.clone()));
        }
        if current.len() >= max_size {
            return;
        }
        for (i, v) in ext.iter().enumerate() {
            current.push(v.clone());
            out.push(BaseSubset::new(current.clone()));
            if current.len() < max_size {
                let mut added = Vec::new();
                let mut next_ext: Vec<Point> = ext[i + 1..].to_vec();
                for q in self.neighbors(v) {
                    if !seen.contains(&q) {
                        seen.insert(q.clone());
                        added.push(q.clone());
                        next_ext.push(q);
                    }
                }
                self.subsets_rec(current, next_ext, seen, max_size, out);
                for q in added {
                    seen.remove(&q);
                }
            }
            current.pop();
        }
    }

    /// Boundary growth `𝔹(n)`: the minimum outer-boundary size over
    /// connected subsets of size `n`, by exhaustive enumeration.
    pub fn boundary_growth(&self, n: u32, caps: &Caps) -> Result<u64> {
        let table = self.boundary_growth_table(n, caps)?;
        Ok(table[n as usize - 1])
    }

    /// `𝔹(1..=n)` in one enumeration pass.
    pub fn boundary_growth_table(&self, n: u32, caps: &Caps) -> Result<Vec<u64>> {
        if n == 0 {
            return Err(Error::PreconditionViolated("n must be positive".into()));
        }
        let subsets = self.connected_subsets(n as usize, caps)?;
        let mut best = vec![u64::MAX; n as usize];
        for s in &subsets {
            let b = self.outer_boundary(s).len() as u64;
            let k = s.len() - 1;
            if b < best[k] {
                best[k] = b;
            }
        }
        if best.iter().any(|&b| b == u64::MAX) {
            return Err(Error::PreconditionViolated(
                "no connected subset of a required size".into(),
            ));
        }
        Ok(best)
    }

    /// BFS distance oracle over an explicit ball, for tests and CLI use.
    pub fn bfs_distances(&self, center: &Point, radius: u32, caps: &Caps) -> Result<HashMap<Point, u32>> {
        if radius > caps.ball_radius {
            return Err(Error::CapExceeded(format!(
                "ball radius {radius} exceeds cap {}",
                caps.ball_radius
            )));
        }
        let mut dist = HashMap::new();
        dist.insert(center.clone(), 0u32);
        let mut frontier = vec![center.clone()];
        for d in 1..=radius {
            let mut next = Vec::new();
            for p in &frontier {
                for q in self.neighbors(p) {
                    if !dist.contains_key(&q) {
                        dist.insert(q.clone(), d);
                        next.push(q);
                    }
                }
            }
            frontier = next;
        }
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn ball_sizes_match_lattice_oracle() {
        let z2 = MarkedGroup::parse("Z2").unwrap();
        let b0 = z2.ball(&z2.identity(), 0, &caps()).unwrap();
        assert_eq!(b0.len(), 1);
        // exhaustive diamond oracle: |{(x,y) : |x|+|y| <= 2}| = 13
        let b2 = z2.ball(&z2.identity(), 2, &caps()).unwrap();
        let mut oracle = 0;
        for x in -2i64..=2 {
            for y in -2i64..=2 {
                if x.abs() + y.abs() <= 2 {
                    oracle += 1;
                }
            }
        }
        assert_eq!(b2.len(), oracle);
        assert_eq!(b2.len(), 13);
    }

    #[test]
    fn free_group_ball_by_reduced_words() {
        let f2 = MarkedGroup::parse("F2").unwrap();
        // 1 + 4 + 12 reduced words of length <= 2
        let b2 = f2.ball(&f2.identity(), 2, &caps()).unwrap();
        assert_eq!(b2.len(), 17);
    }

    #[test]
    fn connectivity_examples() {
        let z = MarkedGroup::parse("Z").unwrap();
        assert!(z.is_connected(&BaseSubset::singleton(z.parse_point("0").unwrap())));
        let gap = BaseSubset::new(vec![z.parse_point("0").unwrap(), z.parse_point("2").unwrap()]);
        assert!(!z.is_connected(&gap));
        let z2 = MarkedGroup::parse("Z2").unwrap();
        let l = BaseSubset::new(vec![
            z2.parse_point("0,0").unwrap(),
            z2.parse_point("1,0").unwrap(),
            z2.parse_point("1,1").unwrap(),
        ]);
        assert!(z2.is_connected(&l));
    }

    #[test]
    fn outer_boundary_examples() {
        let z2 = MarkedGroup::parse("Z2").unwrap();
        let s = BaseSubset::singleton(z2.identity());
        assert_eq!(z2.outer_boundary(&s).len(), 4);
        let z = MarkedGroup::parse("Z").unwrap();
        let seg = BaseSubset::new(vec![
            z.parse_point("0").unwrap(),
            z.parse_point("1").unwrap(),
            z.parse_point("2").unwrap(),
        ]);
        let b = z.outer_boundary(&seg);
        assert_eq!(
            b,
            BaseSubset::new(vec![z.parse_point("-1").unwrap(), z.parse_point("3").unwrap()])
        );
        assert!(z.outer_boundary(&BaseSubset::empty()).is_empty());
    }

    #[test]
    fn boundary_growth_small_values() {
        let z2 = MarkedGroup::parse("Z2").unwrap();
        let table = z2.boundary_growth_table(4, &caps()).unwrap();
        assert_eq!(table[0], 4);
        assert_eq!(table[3], 8); // the 2x2 square
    }

    #[test]
    fn connected_subset_counts_match_fixed_polyominoes() {
        // A001168: fixed polyominoes by size.
        let z2 = MarkedGroup::parse("Z2").unwrap();
        let subsets = z2.connected_subsets(5, &caps()).unwrap();
        let mut by_size = [0usize; 5];
        for s in &subsets {
            by_size[s.len() - 1] += 1;
        }
        assert_eq!(by_size, [1, 2, 6, 19, 63]);
    }

    #[test]
    fn bfs_distance_agrees_with_closed_form() {
        let f2 = MarkedGroup::parse("F2").unwrap();
        let dists = f2.bfs_distances(&f2.identity(), 4, &caps()).unwrap();
        for (p, d) in &dists {
            assert_eq!(u64::from(*d), f2.dist(&f2.identity(), p));
        }
        let zm = MarkedGroup::parse("Zmod:6").unwrap();
        let dists = zm.bfs_distances(&zm.identity(), 3, &caps()).unwrap();
        assert_eq!(dists.len(), 6);
        assert_eq!(dists[&zm.parse_point("3").unwrap()], 3);
    }

    #[test]
    fn residue_canonical_form_is_symmetric() {
        let zm = MarkedGroup::parse("Zmod:5").unwrap();
        let p = zm.parse_point("4").unwrap();
        assert_eq!(p, Point::Residue(-1));
        assert_eq!(p.weight(), 1);
    }
}
