//! The halo product itself: pairs `(lamp, arrow)` with semidirect
//! multiplication, the word metric for the generating set
//! `X_{L(H)} ∪ X_H`, leaves (H-cosets), leaf distances with witnesses,
//! and pseudo-leaf membership.

use crate::basegroup::{BaseSubset, Point};
use crate::lampkit::{Halo, Lamp};
use crate::{Caps, Error, Result};
use std::collections::HashMap;

/// An element `(c, h)` of the halo product `L(H) ⋊ H`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct HaloElement {
    pub lamp: Lamp,
    pub arrow: Point,
}

/// A leaf: the coset `cH`, named by its (canonical) lamp label.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Leaf {
    pub label: Lamp,
}

/// The data of a pseudo-leaf: all `(c, h)` with
/// `supp(c0⁻¹ c) ⊆ B(h0, R) ∪ B(h, R)`.
#[derive(Clone, Debug)]
pub struct PseudoLeafSpec {
    pub c0: Lamp,
    pub h0: Point,
    pub r: u32,
}

/// Outcome of a leaf-distance computation: the distance and a realising
/// pair of points, one on each leaf.
#[derive(Clone, Debug)]
pub struct LeafDistance {
    pub dist: u32,
    pub witness_p: HaloElement,
    pub witness_q: HaloElement,
}

impl Halo {
    pub fn one(&self) -> HaloElement {
        HaloElement { lamp: self.identity_lamp(), arrow: self.base().identity() }
    }

    /// Semidirect product: `(c1, h1)(c2, h2) = (c1 · act(h1, c2), h1 h2)`.
    pub fn mul(&self, a: &HaloElement, b: &HaloElement) -> Result<HaloElement> {
        Ok(HaloElement {
            lamp: self.lamp_mul(&a.lamp, &self.act(&a.arrow, &b.lamp))?,
            arrow: self.base().mul(&a.arrow, &b.arrow),
        })
    }

    pub fn inv(&self, a: &HaloElement) -> Result<HaloElement> {
        let arrow_inv = self.base().inv(&a.arrow);
        Ok(HaloElement {
            lamp: self.act(&arrow_inv, &self.lamp_inv(&a.lamp)?),
            arrow: arrow_inv,
        })
    }

    /// The generating set of the halo product: module generators paired with
    /// the trivial arrow, plus base generators with the trivial lamp.
    pub fn halo_generators(&self) -> Vec<HaloElement> {
        let mut gens: Vec<HaloElement> = self
            .module_generators()
            .into_iter()
            .map(|lamp| HaloElement { lamp, arrow: self.base().identity() })
            .collect();
        for t in self.base().generators() {
            gens.push(HaloElement { lamp: self.identity_lamp(), arrow: t });
        }
        gens
    }

    fn right_mul_gen(&self, x: &HaloElement, g: &HaloElement) -> HaloElement {
        self.mul(x, g).expect("generator backend matches")
    }

    /// BFS ball of the halo product, with exact distances.
    pub fn halo_ball(&self, radius: u32, caps: &Caps) -> Result<HashMap<HaloElement, u32>> {
        if radius > caps.bfs_radius {
            return Err(Error::CapExceeded(format!(
                "BFS radius {radius} exceeds cap {}",
                caps.bfs_radius
            )));
        }
        let gens = self.halo_generators();
        let mut dist: HashMap<HaloElement, u32> = HashMap::new();
        dist.insert(self.one(), 0);
        let mut frontier = vec![self.one()];
        for d in 1..=radius {
            let mut next = Vec::new();
            for x in &frontier {
                for g in &gens {
                    let y = self.right_mul_gen(x, g);
                    if !dist.contains_key(&y) {
                        if dist.len() as u64 >= caps.bfs_states {
                            return Err(Error::CapExceeded(format!(
                                "BFS states exceed cap {}",
                                caps.bfs_states
                            )));
                        }
                        dist.insert(y.clone(), d);
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        Ok(dist)
    }

    /// Exact word length of `x`, or `Unreachable` if outside the cap radius.
    pub fn word_length(&self, x: &HaloElement, cap: u32, caps: &Caps) -> Result<u32> {
        if cap > caps.bfs_radius {
            return Err(Error::CapExceeded(format!(
                "requested cap {cap} exceeds BFS cap {}",
                caps.bfs_radius
            )));
        }
        if x == &self.one() {
            return Ok(0);
        }
        let gens = self.halo_generators();
        let mut dist: HashMap<HaloElement, u32> = HashMap::new();
        dist.insert(self.one(), 0);
        let mut frontier = vec![self.one()];
        for d in 1..=cap {
            let mut next = Vec::new();
            for y in &frontier {
                for g in &gens {
                    let z = self.right_mul_gen(y, g);
                    if z == *x {
                        return Ok(d);
                    }
                    if !dist.contains_key(&z) {
                        if dist.len() as u64 >= caps.bfs_states {
                            return Err(Error::CapExceeded(format!(
                                "BFS states exceed cap {}",
                                caps.bfs_states
                            )));
                        }
                        dist.insert(z.clone(), d);
                        next.push(z);
                    }
                }
            }
            frontier = next;
        }
        Err(Error::Unreachable { cap })
    }

    /// Minimum word length over all elements with the given lamp, i.e. the
    /// distance from the identity to the leaf labelled by the lamp, by BFS
    /// with a free terminal arrow.
    pub fn lamp_cost(&self, lamp: &Lamp, cap: u32, caps: &Caps) -> Result<u32> {
        if lamp.is_identity() {
            return Ok(0);
        }
        let gens = self.halo_generators();
        let mut dist: HashMap<HaloElement, u32> = HashMap::new();
        dist.insert(self.one(), 0);
        let mut frontier = vec![self.one()];
        for d in 1..=cap.min(caps.bfs_radius) {
            let mut next = Vec::new();
            for y in &frontier {
                for g in &gens {
                    let z = self.right_mul_gen(y, g);
                    if &z.lamp == lamp {
                        return Ok(d);
                    }
                    if !dist.contains_key(&z) {
                        if dist.len() as u64 >= caps.bfs_states {
                            return Err(Error::CapExceeded(format!(
                                "BFS states exceed cap {}",
                                caps.bfs_states
                            )));
                        }
                        dist.insert(z.clone(), d);
                        next.push(z);
                    }
                }
            }
            frontier = next;
        }
        Err(Error::Unreachable { cap: cap.min(caps.bfs_radius) })
    }

    /// Map from lamps to the minimum word length of any element carrying
    /// them, over the BFS ball of the given radius. The arrow realising the
    /// minimum is recorded.
    pub fn lamp_costs(&self, radius: u32, caps: &Caps) -> Result<HashMap<Lamp, (u32, Point)>> {
        let ball = self.halo_ball(radius, caps)?;
        let mut out: HashMap<Lamp, (u32, Point)> = HashMap::new();
        for (x, d) in ball {
            match out.get(&x.lamp) {
                Some((best, _)) if *best <= d => {}
                _ => {
                    out.insert(x.lamp, (d, x.arrow));
                }
            }
        }
        Ok(out)
    }

    /// Candidate translations `k` with `k · supp(e) ⊆ B(1, radius)`;
    /// exhaustive because any element of cost ≤ radius has its support in
    /// that ball.
    pub fn support_aligning_translations(
        &self,
        e: &Lamp,
        radius: u32,
        caps: &Caps,
    ) -> Result<Vec<Point>> {
        let supp = self.support(e);
        let Some(s0) = supp.min_point() else {
            return Ok(vec![self.base().identity()]);
        };
        let g = self.base();
        let ball = g.ball(&g.identity(), radius, caps)?;
        let s0_inv = g.inv(s0);
        let mut out = Vec::new();
        for b in ball.iter() {
            // k s0 = b
            let k = g.mul(b, &s0_inv);
            if supp.iter().all(|s| g.dist(&g.identity(), &g.mul(&k, s)) <= radius as u64) {
                out.push(k);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Distance between leaves `P = pH` and `Q = qH`, with witnesses.
    ///
    /// `d(P, Q) = min_k cost(act(k, p⁻¹q))` over translations `k`; the search
    /// radius grows until the cap. Exact whenever it returns.
    pub fn leaf_distance(&self, p: &Leaf, q: &Leaf, cap: u32, caps: &Caps) -> Result<LeafDistance> {
        let e = self.lamp_mul(&self.lamp_inv(&p.label)?, &q.label)?;
        if e.is_identity() {
            let w = HaloElement { lamp: p.label.clone(), arrow: self.base().identity() };
            return Ok(LeafDistance { dist: 0, witness_p: w.clone(), witness_q: w });
        }
        let mut radius = 1u32;
        loop {
            let costs = self.lamp_costs(radius, caps)?;
            let mut best: Option<(u32, Point, Point)> = None;
            for k in self.support_aligning_translations(&e, radius + self.r0(), caps)? {
                let cand = self.act(&k, &e);
                if let Some((d, arrow)) = costs.get(&cand) {
                    if best.as_ref().map_or(true, |(b, _, _)| d < b) {
                        best = Some((*d, k.clone(), arrow.clone()));
                    }
                }
            }
            if let Some((d, k, end_arrow)) = best {
                if d <= radius {
                    let g = self.base();
                    let h = g.inv(&k);
                    let witness_p = HaloElement { lamp: p.label.clone(), arrow: h.clone() };
                    let witness_q =
                        HaloElement { lamp: q.label.clone(), arrow: g.mul(&h, &end_arrow) };
                    debug_assert_eq!(
                        self.mul(&self.inv(&witness_p)?, &witness_q)?.lamp,
                        self.act(&k, &e)
                    );
                    return Ok(LeafDistance { dist: d, witness_p, witness_q });
                }
            }
            if radius >= cap {
                return Err(Error::Unreachable { cap });
            }
            radius = (radius * 2).min(cap);
        }
    }

    /// Distance from a point to a leaf: `d((c,h), dH) = cost(act(h⁻¹, c⁻¹d))`.
    pub fn point_leaf_distance(
        &self,
        x: &HaloElement,
        q: &Leaf,
        cap: u32,
        caps: &Caps,
    ) -> Result<u32> {
        let e = self.lamp_mul(&self.lamp_inv(&x.lamp)?, &q.label)?;
        let moved = self.act(&self.base().inv(&x.arrow), &e);
        self.lamp_cost(&moved, cap, caps)
    }

    /// Pseudo-leaf membership: `supp(c0⁻¹ · lamp(x)) ⊆ B(h0,R) ∪ B(arrow,R)`.
    pub fn in_pseudo_leaf(&self, x: &HaloElement, spec: &PseudoLeafSpec) -> Result<bool> {
        let diff = self.lamp_mul(&self.lamp_inv(&spec.c0)?, &x.lamp)?;
        let supp = self.support(&diff);
        let g = self.base();
        let inside = supp.iter().all(|s| {
            g.dist(&spec.h0, s) <= spec.r as u64 || g.dist(&x.arrow, s) <= spec.r as u64
        });
        Ok(inside)
    }

    /// All `q` in the ball of the given radius whose translation stabilises
    /// the support of `c`: `q · supp(c) = supp(c)`.
    pub fn coset_stabiliser_sample(&self, c: &Lamp, radius: u32, caps: &Caps) -> Result<BaseSubset> {
        let supp = self.support(c);
        if supp.is_empty() {
            return Err(Error::EmptySupport);
        }
        let g = self.base();
        let ball = g.ball(&g.identity(), radius, caps)?;
        Ok(ball
            .iter()
            .filter(|q| supp.translate(g, q) == supp)
            .cloned()
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lampkit::Halo;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn caps() -> Caps {
        Caps::default()
    }

    fn delta(halo: &Halo, at: &str) -> Lamp {
        let p = halo.base().parse_point(at).unwrap();
        Lamp::Lighter(BTreeMap::from([(p, 1)]))
    }

    #[test]
    fn word_lengths_in_lamplighter_over_z() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        assert_eq!(halo.word_length(&halo.one(), 4, &caps()).unwrap(), 0);
        let x = HaloElement { lamp: delta(&halo, "0"), arrow: halo.base().identity() };
        assert_eq!(halo.word_length(&x, 4, &caps()).unwrap(), 1);
        // light the lamp at 1 and come back: go, light, return
        let y = HaloElement { lamp: delta(&halo, "1"), arrow: halo.base().identity() };
        assert_eq!(halo.word_length(&y, 6, &caps()).unwrap(), 3);
    }

    #[test]
    fn unreachable_is_reported() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let far = HaloElement { lamp: delta(&halo, "9"), arrow: halo.base().identity() };
        match halo.word_length(&far, 5, &caps()) {
            Err(Error::Unreachable { cap: 5 }) => {}
            other => panic!("expected Unreachable, got {other:?}"),
        }
    }

    #[test]
    fn mul_inverse_and_conjugation() {
        for spec in ["lighter:2", "juggler:1", "designer:2", "cloner:2", "nil2:2"] {
            let halo = Halo::parse(spec, "Z").unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let g = halo.base();
            let window = g.ball(&g.identity(), 2, &caps()).unwrap();
            for _ in 0..200 {
                let a = HaloElement {
                    lamp: halo.random_lamp(&window, &mut rng),
                    arrow: g.parse_point("2").unwrap(),
                };
                let b = HaloElement {
                    lamp: halo.random_lamp(&window, &mut rng),
                    arrow: g.parse_point("-1").unwrap(),
                };
                let c = HaloElement {
                    lamp: halo.random_lamp(&window, &mut rng),
                    arrow: g.parse_point("1").unwrap(),
                };
                let ab_c = halo.mul(&halo.mul(&a, &b).unwrap(), &c).unwrap();
                let a_bc = halo.mul(&a, &halo.mul(&b, &c).unwrap()).unwrap();
                assert_eq!(ab_c, a_bc, "{spec} associativity");
                let ai = halo.inv(&a).unwrap();
                assert_eq!(halo.mul(&a, &ai).unwrap(), halo.one());
                // (1,h)(c,1)(1,h)^{-1} = (act(h,c), 1)
                let h = HaloElement {
                    lamp: halo.identity_lamp(),
                    arrow: g.parse_point("3").unwrap(),
                };
                let cl = HaloElement { lamp: b.lamp.clone(), arrow: g.identity() };
                let conj = halo
                    .mul(&halo.mul(&h, &cl).unwrap(), &halo.inv(&h).unwrap())
                    .unwrap();
                assert_eq!(conj.arrow, g.identity());
                assert_eq!(conj.lamp, halo.act(&h.arrow, &b.lamp));
            }
        }
    }

    #[test]
    fn leaf_distance_basics() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let base = Leaf { label: halo.identity_lamp() };
        assert_eq!(halo.leaf_distance(&base, &base, 8, &caps()).unwrap().dist, 0);
        let q = Leaf { label: delta(&halo, "0") };
        let ld = halo.leaf_distance(&base, &q, 8, &caps()).unwrap();
        assert_eq!(ld.dist, 1);
        // witnesses realise the distance
        let d = halo
            .word_length(
                &halo.mul(&halo.inv(&ld.witness_p).unwrap(), &ld.witness_q).unwrap(),
                4,
                &caps(),
            )
            .unwrap();
        assert_eq!(d, 1);
    }

    #[test]
    fn leaf_distance_minimises_over_translates() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        // difference supported far away still costs only its local work
        let p = Leaf { label: delta(&halo, "7") };
        let q_lamp = halo.lamp_mul(&delta(&halo, "7"), &delta(&halo, "8")).unwrap();
        let q = Leaf { label: q_lamp };
        let ld = halo.leaf_distance(&p, &q, 8, &caps()).unwrap();
        assert_eq!(ld.dist, 1, "translate puts the difference at the identity");
    }

    #[test]
    fn pseudo_leaf_membership() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let g = halo.base();
        let spec = PseudoLeafSpec { c0: halo.identity_lamp(), h0: g.identity(), r: 0 };
        let x = HaloElement { lamp: delta(&halo, "5"), arrow: g.parse_point("5").unwrap() };
        assert!(halo.in_pseudo_leaf(&x, &spec).unwrap());
        let y = HaloElement { lamp: delta(&halo, "5"), arrow: g.identity() };
        assert!(!halo.in_pseudo_leaf(&y, &spec).unwrap());
        // any point on the leaf of c0 qualifies
        for a in ["-3", "0", "9"] {
            let z = HaloElement { lamp: halo.identity_lamp(), arrow: g.parse_point(a).unwrap() };
            assert!(halo.in_pseudo_leaf(&z, &spec).unwrap());
        }
    }

    #[test]
    fn stabiliser_samples() {
        let halo = Halo::parse("lighter:2", "Z2").unwrap();
        let c = delta(&halo, "0,0");
        let stab = halo.coset_stabiliser_sample(&c, 5, &caps()).unwrap();
        assert_eq!(stab.len(), 1);
        assert!(stab.contains(&halo.base().identity()));

        let halo_z = Halo::parse("lighter:2", "Z").unwrap();
        let c2 = halo_z
            .lamp_mul(&delta(&halo_z, "0"), &delta(&halo_z, "3"))
            .unwrap();
        let stab2 = halo_z.coset_stabiliser_sample(&c2, 10, &caps()).unwrap();
        assert_eq!(stab2.len(), 1);

        assert!(matches!(
            halo_z.coset_stabiliser_sample(&halo_z.identity_lamp(), 3, &caps()),
            Err(Error::EmptySupport)
        ));
    }

    #[test]
    fn word_metric_properties_on_sampled_ball() {
        let halo = Halo::parse("lighter:2", "Z").unwrap();
        let ball = halo.halo_ball(5, &caps()).unwrap();
        let elems: Vec<&HaloElement> = ball.keys().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        for _ in 0..60 {
            let a = elems[rng.gen_range(0..elems.len())];
            let b = elems[rng.gen_range(0..elems.len())];
            // symmetry under inversion
            let ab = halo.mul(&halo.inv(a).unwrap(), b).unwrap();
            let ba = halo.mul(&halo.inv(b).unwrap(), a).unwrap();
            let d1 = halo.word_length(&ab, 12, &caps()).unwrap();
            let d2 = halo.word_length(&ba, 12, &caps()).unwrap();
            assert_eq!(d1, d2);
            // triangle through a third point
            let c = elems[rng.gen_range(0..elems.len())];
            let ac = halo.mul(&halo.inv(a).unwrap(), c).unwrap();
            let cb = halo.mul(&halo.inv(c).unwrap(), b).unwrap();
            let dac = halo.word_length(&ac, 12, &caps()).unwrap();
            let dcb = halo.word_length(&cb, 12, &caps()).unwrap();
            assert!(d1 <= dac + dcb);
        }
    }
}
