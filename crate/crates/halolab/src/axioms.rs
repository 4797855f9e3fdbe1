//! Brute-force verification of the structural axioms on finite instances:
//! the intersection axiom, fullness, large-scale commutativity, the square
//! of leaves, and the pointed-sum (⋁) negative fixture where the
//! intersection axiom genuinely fails.

use crate::basegroup::{BaseSubset, Point};
use crate::halocore::Leaf;
use crate::lampkit::{Halo, Lamp};
use crate::{Caps, Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{HashMap, HashSet};

/// Verdict of a single structural check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Holds,
    Counterexample,
}

/// Outcome of a brute-force axiom check, with enough data to replay a
/// counterexample.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub property: String,
    pub instance: String,
    pub verdict: Verdict,
    pub enumerated: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

impl AxiomReport {
    fn holds(property: &str, instance: String, enumerated: u64) -> AxiomReport {
        AxiomReport {
            property: property.into(),
            instance,
            verdict: Verdict::Holds,
            enumerated,
            witness: None,
        }
    }

    fn counterexample(
        property: &str,
        instance: String,
        enumerated: u64,
        witness: serde_json::Value,
    ) -> AxiomReport {
        AxiomReport {
            property: property.into(),
            instance,
            verdict: Verdict::Counterexample,
            enumerated,
            witness: Some(witness),
        }
    }
}

/// Check `L(R) ∩ L(S) = L(R ∩ S)` by explicit enumeration.
pub fn check_intersection_axiom(
    halo: &Halo,
    r: &BaseSubset,
    s: &BaseSubset,
    caps: &Caps,
) -> Result<AxiomReport> {
    let lr: HashSet<Lamp> = halo.enumerate_lamps(r, caps)?.into_iter().collect();
    let ls: HashSet<Lamp> = halo.enumerate_lamps(s, caps)?.into_iter().collect();
    let lrs: HashSet<Lamp> = halo
        .enumerate_lamps(&r.intersect(s), caps)?
        .into_iter()
        .collect();
    let inter: HashSet<&Lamp> = lr.intersection(&ls).collect();
    let enumerated = (lr.len() + ls.len()) as u64;
    let instance = format!(
        "{} over {}: R={:?} S={:?}",
        halo.backend().spec(),
        halo.base().name(),
        r.to_strings(),
        s.to_strings()
    );
    let ok = inter.len() == lrs.len() && inter.iter().all(|l| lrs.contains(*l));
    if ok {
        Ok(AxiomReport::holds("intersection-axiom", instance, enumerated))
    } else {
        let bad = inter
            .iter()
            .find(|l| !lrs.contains(**l))
            .map(|l| halo.lamp_to_json(l))
            .unwrap_or_else(|| serde_json::json!("missing element of L(R∩S)"));
        Ok(AxiomReport::counterexample("intersection-axiom", instance, enumerated, bad))
    }
}

/// Check monotonicity `L(R) ⊆ L(S)` for `R ⊆ S` by enumeration.
pub fn check_monotonicity(
    halo: &Halo,
    r: &BaseSubset,
    s: &BaseSubset,
    caps: &Caps,
) -> Result<AxiomReport> {
    if !r.is_subset_of(s) {
        return Err(Error::PreconditionViolated("R must be contained in S".into()));
    }
    let lr = halo.enumerate_lamps(r, caps)?;
    let ls: HashSet<Lamp> = halo.enumerate_lamps(s, caps)?.into_iter().collect();
    let instance = format!("{}: |R|={} |S|={}", halo.backend().spec(), r.len(), s.len());
    let enumerated = (lr.len() + ls.len()) as u64;
    match lr.iter().find(|l| !ls.contains(*l)) {
        None => Ok(AxiomReport::holds("monotonicity", instance, enumerated)),
        Some(l) => Ok(AxiomReport::counterexample(
            "monotonicity",
            instance,
            enumerated,
            halo.lamp_to_json(l),
        )),
    }
}

/// A fullness instance: four subsets with the required separation pattern.
#[derive(Debug, Clone)]
pub struct FullInstance {
    pub r: BaseSubset,
    pub s: BaseSubset,
    pub t: BaseSubset,
    pub u: BaseSubset,
}

impl FullInstance {
    /// `d(R,S), d(R,T), d(R,U), d(S,T) ≥ k` (vacuous against empty sets).
    pub fn separation_ok(&self, halo: &Halo, k: u64) -> bool {
        let g = halo.base();
        let pairs =
            [(&self.r, &self.s), (&self.r, &self.t), (&self.r, &self.u), (&self.s, &self.t)];
        pairs
            .iter()
            .all(|(a, b)| a.dist_to(g, b).map_or(true, |d| d >= k))
    }
}

/// Memoised lamp enumerations and coset representatives, keyed by subsets.
#[derive(Default)]
pub struct LampCache {
    map: HashMap<BaseSubset, std::rc::Rc<Vec<Lamp>>>,
    reps: HashMap<(BaseSubset, BaseSubset, bool), std::rc::Rc<Vec<Lamp>>>,
    product_keys: HashMap<(BaseSubset, BaseSubset), std::rc::Rc<HashSet<String>>>,
}

impl LampCache {
    pub fn lamps(
        &mut self,
        halo: &Halo,
        s: &BaseSubset,
        caps: &Caps,
    ) -> Result<std::rc::Rc<Vec<Lamp>>> {
        if let Some(v) = self.map.get(s) {
            return Ok(v.clone());
        }
        let v = std::rc::Rc::new(halo.enumerate_lamps(s, caps)?);
        self.map.insert(s.clone(), v.clone());
        Ok(v)
    }

    /// One representative per coset of `L(sub)` inside `L(side)`: right
    /// cosets `x·L(sub)` when `invert` is false, left cosets otherwise.
    pub fn coset_reps(
        &mut self,
        halo: &Halo,
        side: &BaseSubset,
        sub: &BaseSubset,
        invert: bool,
        caps: &Caps,
    ) -> Result<std::rc::Rc<Vec<Lamp>>> {
        let key = (side.clone(), sub.clone(), invert);
        if let Some(v) = self.reps.get(&key) {
            return Ok(v.clone());
        }
        let all = self.lamps(halo, side, caps)?;
        let mut reps = Vec::new();
        let mut seen = HashSet::new();
        for x in all.iter() {
            let probe = if invert { halo.lamp_inv(x)? } else { x.clone() };
            let k = crate::cubemodel::coset_key(halo, &probe, sub, caps)?;
            if seen.insert(k) {
                reps.push(x.clone());
            }
        }
        let v = std::rc::Rc::new(reps);
        self.reps.insert(key, v.clone());
        Ok(v)
    }

    /// Keys of the left cosets `L(r)·b` over `b ∈ L(t)`: membership of `z`
    /// in the product `L(r)·L(t)` is then a single key lookup.
    pub fn product_keys(
        &mut self,
        halo: &Halo,
        r: &BaseSubset,
        t: &BaseSubset,
        caps: &Caps,
    ) -> Result<std::rc::Rc<HashSet<String>>> {
        let key = (r.clone(), t.clone());
        if let Some(v) = self.product_keys.get(&key) {
            return Ok(v.clone());
        }
        let bs = self.lamps(halo, t, caps)?;
        let mut keys = HashSet::new();
        for b in bs.iter() {
            keys.insert(crate::cubemodel::coset_key(halo, &halo.lamp_inv(b)?, r, caps)?);
        }
        let v = std::rc::Rc::new(keys);
        self.product_keys.insert(key, v.clone());
        Ok(v)
    }
}

/// Check `L(R∪S)·L(U) ∩ L(R∪T) ⊆ L(R)·L(T)` by scanning the lossless
/// trimmed pair space: `x ∈ L(R ∪ (S∩U))` against one representative per
/// coset of `L(S∩U)` inside `L(U ∩ (S∪T))`.
///
/// The trim and the coset reduction are justified by the intersection
/// axiom (checked independently): any witness pair has its factors in the
/// trimmed subgroups, and `L(A)·L(B) = ⋃ᵢ L(A)·uᵢ` over coset
/// representatives of `L(A∩B)\L(B)`.
pub fn check_full(
    halo: &Halo,
    inst: &FullInstance,
    k: u64,
    caps: &Caps,
    cache: &mut LampCache,
) -> Result<AxiomReport> {
    if !inst.separation_ok(halo, k) {
        return Err(Error::PreconditionViolated(format!(
            "subsets violate the distance-{k} pattern"
        )));
    }
    let s_trim = inst.s.intersect(&inst.u);
    let u_trim = inst.u.intersect(&inst.s.union(&inst.t));
    let t_inner = inst.t.intersect(&u_trim);
    let xs_count = halo.lamp_count(inst.r.union(&s_trim).len() as u32);
    let us_count = halo.lamp_count(u_trim.len() as u32);
    let s_count = halo.lamp_count(s_trim.len() as u32);
    // Lagrange: the number of coset representatives on the U side
    let rep_count = &us_count / &s_count;
    let work = xs_count.clone() * rep_count;
    if work > num_bigint::BigUint::from(caps.pair_work) {
        return Err(Error::CapExceeded(format!(
            "pair work {work} exceeds cap {}",
            caps.pair_work
        )));
    }
    // reduce one side to coset representatives modulo L(S∩U); the product
    // set is unchanged and the scan shrinks by that subgroup's order
    let x_set = inst.r.union(&s_trim);
    let (xs, us) = if xs_count <= us_count {
        (
            cache.coset_reps(halo, &x_set, &s_trim, false, caps)?,
            cache.lamps(halo, &u_trim, caps)?,
        )
    } else {
        (
            cache.lamps(halo, &x_set, caps)?,
            cache.coset_reps(halo, &u_trim, &s_trim, true, caps)?,
        )
    };
    let factor_keys = cache.product_keys(halo, &inst.r, &t_inner, caps)?;
    let rt = inst.r.union(&inst.t);
    let instance = format!(
        "{}: R={:?} S={:?} T={:?} U={:?}",
        halo.backend().spec(),
        inst.r.to_strings(),
        inst.s.to_strings(),
        inst.t.to_strings(),
        inst.u.to_strings()
    );
    let mut enumerated = 0u64;
    for x in xs.iter() {
        for u in us.iter() {
            enumerated += 1;
            let z = halo.lamp_mul(x, u)?;
            if !halo.support(&z).is_subset_of(&rt) {
                continue;
            }
            // z is in the intersection; it must factor through L(R)·L(T)
            let z_key = crate::cubemodel::coset_key(halo, &halo.lamp_inv(&z)?, &inst.r, caps)?;
            if !factor_keys.contains(&z_key) {
                return Ok(AxiomReport::counterexample(
                    "fullness",
                    instance,
                    enumerated,
                    serde_json::json!({
                        "element": halo.lamp_to_json(&z),
                        "left_factor": halo.lamp_to_json(x),
                        "right_factor": halo.lamp_to_json(u),
                    }),
                ));
            }
        }
    }
    Ok(AxiomReport::holds("fullness", instance, enumerated))
}

/// Summary of an exhaustive fullness scan over a segment window.
#[derive(Debug, Clone, Serialize)]
pub struct FullScanReport {
    pub backend: String,
    pub segment: u32,
    pub separation: u64,
    pub classes_checked: u64,
    pub classes_skipped: u64,
    pub pairs_scanned: u64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<serde_json::Value>,
}

/// Exhaustively scan all quadruples `R,S,T,U` of subsets of the segment
/// `{0, …, len-1} ⊆ ℤ` meeting the distance-k pattern (for k = 1: R
/// disjoint from S, T, U, and S disjoint from T; U may meet S and T).
///
/// Quadruples are deduplicated by the translation-canonical form of the
/// trimmed data; classes whose pair work exceeds the cap are counted as
/// skipped, never silently passed.
pub fn full_scan_segment(halo: &Halo, len: u32, k: u64, caps: &Caps) -> Result<FullScanReport> {
    let g = halo.base();
    let pts: Vec<Point> = (0..len as i64)
        .map(|x| g.parse_point(&x.to_string()))
        .collect::<Result<_>>()?;
    // per-point labels: 0 none, 1 R, 2 S, 3 T, 4 U, 5 S∩U, 6 T∩U
    let mut labels = vec![0u8; len as usize];
    let mut seen: HashSet<Vec<(i64, u8)>> = HashSet::new();
    let mut cache = LampCache::default();
    let mut checked = 0u64;
    let mut skipped = 0u64;
    let mut pairs = 0u64;
    loop {
        let mut r = Vec::new();
        let mut s = Vec::new();
        let mut t = Vec::new();
        let mut u = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let p = pts[i].clone();
            match l {
                1 => r.push(p),
                2 => s.push(p),
                3 => t.push(p),
                4 => u.push(p),
                5 => {
                    s.push(p.clone());
                    u.push(p);
                }
                6 => {
                    t.push(p.clone());
                    u.push(p);
                }
                _ => {}
            }
        }
        let inst = FullInstance {
            r: BaseSubset::new(r),
            s: BaseSubset::new(s),
            t: BaseSubset::new(t),
            u: BaseSubset::new(u),
        };
        if inst.separation_ok(halo, k) {
            let s_trim = inst.s.intersect(&inst.u);
            let u_trim = inst.u.intersect(&inst.s.union(&inst.t));
            let key_sets = [&inst.r, &s_trim, &inst.t, &u_trim];
            let min = key_sets.iter().flat_map(|ks| ks.iter()).min().cloned();
            if let Some(min) = min {
                let shift = match &min {
                    Point::Lattice { x, .. } => *x,
                    _ => 0,
                };
                let mut key: Vec<(i64, u8)> = Vec::new();
                for (tag, ks) in key_sets.iter().enumerate() {
                    for p in ks.iter() {
                        if let Point::Lattice { x, .. } = p {
                            key.push((x - shift, tag as u8));
                        }
                    }
                }
                key.sort();
                if seen.insert(key) {
                    match check_full(halo, &inst, k, caps, &mut cache) {
                        Ok(rep) => {
                            checked += 1;
                            pairs += rep.enumerated;
                            if rep.verdict == Verdict::Counterexample {
                                return Ok(FullScanReport {
                                    backend: halo.backend().spec(),
                                    segment: len,
                                    separation: k,
                                    classes_checked: checked,
                                    classes_skipped: skipped,
                                    pairs_scanned: pairs,
                                    verdict: Verdict::Counterexample,
                                    counterexample: rep.witness,
                                });
                            }
                        }
                        Err(Error::CapExceeded(_)) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        let mut done = true;
        for l in labels.iter_mut() {
            *l += 1;
            if *l < 7 {
                done = false;
                break;
            }
            *l = 0;
        }
        if done {
            break;
        }
    }
    Ok(FullScanReport {
        backend: halo.backend().spec(),
        segment: len,
        separation: k,
        classes_checked: checked,
        classes_skipped: skipped,
        pairs_scanned: pairs,
        verdict: Verdict::Holds,
        counterexample: None,
    })
}

/// Randomised large-scale commutativity check: sample pairs of lamps with
/// supports at distance ≥ d and test commutation.
pub fn check_large_scale_commutative(
    halo: &Halo,
    d: u64,
    trials: u32,
    seed: u64,
    caps: &Caps,
) -> Result<AxiomReport> {
    let g = halo.base();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance =
        format!("{}: support distance ≥ {d}, {trials} trials", halo.backend().spec());
    let mut tested = 0u64;
    for _ in 0..trials {
        let far = (d as i64) + rng.gen_range(0..4);
        let origin = g.parse_point(&rng.gen_range(-3..3).to_string())?;
        let other = g.mul(&origin, &g.parse_point(&far.to_string())?);
        let s1 = g.ball(&origin, 1, caps)?;
        let s2 = g.ball(&other, 1, caps)?;
        if s1.dist_to(g, &s2).unwrap_or(u64::MAX) < d {
            continue;
        }
        let a = halo.random_lamp(&s1, &mut rng);
        let b = halo.random_lamp(&s2, &mut rng);
        tested += 1;
        let ab = halo.lamp_mul(&a, &b)?;
        let ba = halo.lamp_mul(&b, &a)?;
        if ab != ba {
            return Ok(AxiomReport::counterexample(
                "large-scale-commutativity",
                instance,
                tested,
                serde_json::json!({
                    "a": halo.lamp_to_json(&a),
                    "b": halo.lamp_to_json(&b),
                }),
            ));
        }
    }
    Ok(AxiomReport::holds("large-scale-commutativity", instance, tested))
}

/// Arrows on the leaf `P` whose points lie at distance ≤ ε from the leaf
/// `Q`, computed exactly via support-aligned translation candidates.
pub fn near_set(halo: &Halo, p: &Leaf, q: &Leaf, eps: u32, caps: &Caps) -> Result<Vec<Point>> {
    let e = halo.lamp_mul(&halo.lamp_inv(&p.label)?, &q.label)?;
    if e.is_identity() {
        return Err(Error::PreconditionViolated("leaves coincide".into()));
    }
    let g = halo.base();
    let costs = halo.lamp_costs(eps, caps)?;
    let mut out = Vec::new();
    for k in halo.support_aligning_translations(&e, eps + halo.r0(), caps)? {
        let cand = halo.act(&k, &e);
        if costs.get(&cand).is_some_and(|(d, _)| *d <= eps) {
            out.push(g.inv(&k));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Square-of-leaves rigidity: under the hypotheses (consecutive leaf
/// distances ≤ ε and near-sets on each leaf at distance ≥ L), the four
/// labels factor as `σ, σα, σαβ, σβ` with `α` and `β` commuting.
pub fn check_square_of_leaves(
    halo: &Halo,
    leaves: &[Leaf; 4],
    eps: u32,
    big_l: u64,
    caps: &Caps,
) -> Result<AxiomReport> {
    for i in 0..4 {
        if leaves[i].label == leaves[(i + 2) % 4].label {
            return Err(Error::PreconditionViolated("opposite leaves coincide".into()));
        }
        if leaves[i].label == leaves[(i + 1) % 4].label {
            return Err(Error::PreconditionViolated("adjacent leaves coincide".into()));
        }
    }
    let g = halo.base();
    for i in 0..4usize {
        let prev = &leaves[(i + 3) % 4];
        let next = &leaves[(i + 1) % 4];
        let here = &leaves[i];
        let to_prev = near_set(halo, here, prev, eps, caps)?;
        let to_next = near_set(halo, here, next, eps, caps)?;
        if to_prev.is_empty() || to_next.is_empty() {
            return Err(Error::PreconditionViolated(format!(
                "leaf {i} and a neighbour are farther than ε"
            )));
        }
        let min_d = to_prev
            .iter()
            .flat_map(|a| to_next.iter().map(move |b| g.dist(a, b)))
            .min()
            .unwrap();
        if min_d < big_l {
            return Err(Error::PreconditionViolated(format!(
                "near-sets on leaf {i} are {min_d} apart, below L={big_l}"
            )));
        }
    }
    let instance = format!("{}: ε={eps}, L={big_l}", halo.backend().spec());
    let sigma = &leaves[0].label;
    let sigma_inv = halo.lamp_inv(sigma)?;
    let alpha = halo.lamp_mul(&sigma_inv, &leaves[1].label)?;
    let beta = halo.lamp_mul(&sigma_inv, &leaves[3].label)?;
    let ab = halo.lamp_mul(&alpha, &beta)?;
    let ba = halo.lamp_mul(&beta, &alpha)?;
    let factors = halo.lamp_mul(sigma, &ab)? == leaves[2].label;
    if ab == ba && factors {
        Ok(AxiomReport::holds("square-of-leaves", instance, 4))
    } else {
        Ok(AxiomReport::counterexample(
            "square-of-leaves",
            instance,
            4,
            serde_json::json!({
                "alpha": halo.lamp_to_json(&alpha),
                "beta": halo.lamp_to_json(&beta),
                "commute": ab == ba,
                "factors": factors,
            }),
        ))
    }
}

/// The pointed-sum fixture: copies of a cyclic group `F` glued at their
/// identities, each copy permuting its own points and the basepoint. For
/// `|F| ≥ 4` the intersection of two overlapping assemblies contains even
/// permutations of the shared copy that no single copy produces, so the
/// intersection axiom fails.
pub struct VeeFixture {
    f_order: usize,
    positions: Vec<i64>,
}

type VeePerm = Vec<u16>;

impl VeeFixture {
    pub fn new(f_order: usize, positions: Vec<i64>) -> VeeFixture {
        assert!(f_order >= 2);
        VeeFixture { f_order, positions }
    }

    fn point_count(&self) -> usize {
        1 + self.positions.len() * (self.f_order - 1)
    }

    fn identity(&self) -> VeePerm {
        (0..self.point_count() as u16).collect()
    }

    /// The generator cycle of the copy at the given position: basepoint →
    /// (pos, 1) → (pos, 2) → … → basepoint.
    fn copy_cycle(&self, pos: i64) -> VeePerm {
        let idx = self
            .positions
            .iter()
            .position(|&p| p == pos)
            .expect("position inside the fixture window");
        let base = 1 + idx * (self.f_order - 1);
        let mut perm = self.identity();
        perm[0] = base as u16;
        for i in 0..self.f_order - 2 {
            perm[base + i] = (base + i + 1) as u16;
        }
        perm[base + self.f_order - 2] = 0;
        perm
    }

    fn compose(a: &VeePerm, b: &VeePerm) -> VeePerm {
        b.iter().map(|&x| a[x as usize]).collect()
    }

    /// Subgroup generated by the copies at the given positions, by closure.
    pub fn assembly(&self, at: &[i64]) -> HashSet<VeePerm> {
        let gens: Vec<VeePerm> = at.iter().map(|&p| self.copy_cycle(p)).collect();
        let mut seen: HashSet<VeePerm> = HashSet::from([self.identity()]);
        let mut frontier = vec![self.identity()];
        while let Some(x) = frontier.pop() {
            for g in &gens {
                let y = Self::compose(&x, g);
                if seen.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
        seen
    }
}

/// Exhibit the intersection-axiom failure on the ⋁ fixture with `R`, `S`
/// overlapping in a single position.
pub fn check_vee_counterexample(f_order: usize, r: &[i64], s: &[i64]) -> AxiomReport {
    let mut window: Vec<i64> = r.iter().chain(s.iter()).cloned().collect();
    window.sort();
    window.dedup();
    let fixture = VeeFixture::new(f_order, window);
    let lr = fixture.assembly(r);
    let ls = fixture.assembly(s);
    let shared: Vec<i64> = r.iter().filter(|p| s.contains(p)).cloned().collect();
    let lshared = fixture.assembly(&shared);
    let instance = format!("vee fixture F=Z/{f_order}, R={r:?}, S={s:?}");
    let enumerated = (lr.len() + ls.len()) as u64;
    let extra = lr.intersection(&ls).find(|x| !lshared.contains(*x));
    match extra {
        Some(w) => AxiomReport::counterexample(
            "intersection-axiom",
            instance,
            enumerated,
            serde_json::json!({ "permutation": w }),
        ),
        None => AxiomReport::holds("intersection-axiom", instance, enumerated),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn caps() -> Caps {
        Caps::default()
    }

    fn seg(halo: &Halo, pts: &[i64]) -> BaseSubset {
        pts.iter()
            .map(|x| halo.base().parse_point(&x.to_string()).unwrap())
            .collect()
    }

    #[test]
    fn intersection_axiom_small_instances() {
        for spec in ["lighter:2", "juggler:1", "designer:2", "cloner:2", "nil2:2"] {
            let halo = Halo::parse(spec, "Z").unwrap();
            let r = seg(&halo, &[0, 1]);
            let s = seg(&halo, &[1, 2]);
            let rep = check_intersection_axiom(&halo, &r, &s, &caps()).unwrap();
            assert_eq!(rep.verdict, Verdict::Holds, "{spec}");
            let rep = check_intersection_axiom(&halo, &r, &r, &caps()).unwrap();
            assert_eq!(rep.verdict, Verdict::Holds);
        }
        // cloner: the overlap {1} leaves only the identity, |GL(1, F2)| = 1
        let halo = Halo::parse("cloner:2", "Z").unwrap();
        let r = seg(&halo, &[0, 1]);
        let s = seg(&halo, &[1, 2]);
        let lr: HashSet<Lamp> = halo.enumerate_lamps(&r, &caps()).unwrap().into_iter().collect();
        let ls: HashSet<Lamp> = halo.enumerate_lamps(&s, &caps()).unwrap().into_iter().collect();
        assert_eq!(lr.intersection(&ls).count(), 1);
    }

    #[test]
    fn vee_fixture_fails_intersection() {
        let rep = check_vee_counterexample(4, &[0, 1], &[1, 2]);
        assert_eq!(rep.verdict, Verdict::Counterexample);
        // replay: the witness is in both assemblies but not the shared one
        let fixture = VeeFixture::new(4, vec![0, 1, 2]);
        let w: VeePerm =
            serde_json::from_value(rep.witness.unwrap()["permutation"].clone()).unwrap();
        assert!(fixture.assembly(&[0, 1]).contains(&w));
        assert!(fixture.assembly(&[1, 2]).contains(&w));
        assert!(!fixture.assembly(&[1]).contains(&w));
    }

    #[test]
    fn fullness_on_explicit_quadruples() {
        for spec in ["lighter:2", "juggler:1", "designer:2", "cloner:2", "nil2:2"] {
            let halo = Halo::parse(spec, "Z").unwrap();
            let inst = FullInstance {
                r: seg(&halo, &[0]),
                s: seg(&halo, &[2, 3]),
                t: seg(&halo, &[5]),
                u: seg(&halo, &[2, 3, 5]),
            };
            let mut cache = LampCache::default();
            let rep = check_full(&halo, &inst, 1, &caps(), &mut cache).unwrap();
            assert_eq!(rep.verdict, Verdict::Holds, "{spec}");
        }
    }

    #[test]
    fn fullness_rejects_bad_pattern() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let inst = FullInstance {
            r: seg(&halo, &[0]),
            s: seg(&halo, &[0, 1]), // meets R
            t: seg(&halo, &[3]),
            u: seg(&halo, &[1]),
        };
        let mut cache = LampCache::default();
        assert!(matches!(
            check_full(&halo, &inst, 1, &caps(), &mut cache),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn large_scale_commutativity_verdicts() {
        for spec in ["lighter:2", "juggler:1", "designer:2", "cloner:2"] {
            let halo = Halo::parse(spec, "Z").unwrap();
            let rep = check_large_scale_commutative(&halo, 3, 300, 42, &caps()).unwrap();
            assert_eq!(rep.verdict, Verdict::Holds, "{spec}");
        }
        let nil2 = Halo::parse("nil2:2", "Z").unwrap();
        let rep = check_large_scale_commutative(&nil2, 5, 500, 42, &caps()).unwrap();
        assert_eq!(rep.verdict, Verdict::Counterexample);
        // replay the witness
        let w = rep.witness.unwrap();
        let a = nil2.lamp_from_json(&w["a"]).unwrap();
        let b = nil2.lamp_from_json(&w["b"]).unwrap();
        assert_ne!(nil2.lamp_mul(&a, &b).unwrap(), nil2.lamp_mul(&b, &a).unwrap());
    }

    #[test]
    fn square_of_leaves_on_z2_lamplighter() {
        let halo = Halo::parse("lighter:2", "Z2").unwrap();
        let g = halo.base();
        let a = g.parse_point("0,0").unwrap();
        let b = g.parse_point("8,0").unwrap();
        let da = Lamp::Lighter(BTreeMap::from([(a, 1)]));
        let db = Lamp::Lighter(BTreeMap::from([(b, 1)]));
        let sigma = halo.identity_lamp();
        let leaves = [
            Leaf { label: sigma.clone() },
            Leaf { label: da.clone() },
            Leaf { label: halo.lamp_mul(&da, &db).unwrap() },
            Leaf { label: db.clone() },
        ];
        let rep = check_square_of_leaves(&halo, &leaves, 1, 6, &caps()).unwrap();
        assert_eq!(rep.verdict, Verdict::Holds);
        // degenerate square: opposite leaves equal
        let degenerate = [
            Leaf { label: sigma.clone() },
            Leaf { label: da.clone() },
            Leaf { label: sigma.clone() },
            Leaf { label: db },
        ];
        assert!(matches!(
            check_square_of_leaves(&halo, &degenerate, 1, 6, &caps()),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn full_scan_tiny_segment() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let rep = full_scan_segment(&halo, 4, 1, &caps()).unwrap();
        assert_eq!(rep.verdict, Verdict::Holds);
        assert!(rep.classes_checked > 50);
        assert_eq!(rep.classes_skipped, 0);
    }
}
