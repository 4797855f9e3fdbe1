//! Finite coefficient structures: finite groups with abelianisation data,
//! finite fields 𝔽_{p^e} with table arithmetic, and tensor squares of
//! finite abelian groups.

use crate::{Error, Result};

/// A finite group given by an explicit multiplication table, together with
/// its abelianisation (as a product of cyclic groups) and the quotient map.
///
/// Elements are indices into the table; index 0 is the identity.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    spec: String,
    order: usize,
    mul: Vec<u8>,
    inv: Vec<u8>,
    /// Moduli of the cyclic factors of the abelianisation.
    ab_moduli: Vec<u64>,
    /// Image of each element in the abelianisation.
    ab_map: Vec<Vec<u64>>,
    /// A section of the abelianisation: for each cyclic factor, an element
    /// mapping to its generator.
    ab_section: Vec<u8>,
}

impl PartialEq for FiniteGroup {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}
impl Eq for FiniteGroup {}

pub type FElem = u8;

impl FiniteGroup {
    /// Parse `m` (cyclic ℤ/m) or `sK` (symmetric group S_K).
    pub fn parse(spec: &str) -> Result<FiniteGroup> {
        if let Some(k) = spec.strip_prefix('s') {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad symmetric group `{spec}`")))?;
            if !(2..=5).contains(&k) {
                return Err(Error::Config(format!("unsupported symmetric degree {k}")));
            }
            return Ok(Self::symmetric(k));
        }
        let m: u64 = spec
            .parse()
            .map_err(|_| Error::Config(format!("bad finite group `{spec}`")))?;
        if !(2..=64).contains(&m) {
            return Err(Error::Config(format!("unsupported cyclic order {m}")));
        }
        Ok(Self::cyclic(m))
    }

    pub fn cyclic(m: u64) -> FiniteGroup {
        let n = m as usize;
        let mut mul = vec![0u8; n * n];
        let mut inv = vec![0u8; n];
        for a in 0..n {
            for b in 0..n {
                mul[a * n + b] = ((a + b) % n) as u8;
            }
            inv[a] = ((n - a) % n) as u8;
        }
        FiniteGroup {
            spec: m.to_string(),
            order: n,
            mul,
            inv,
            ab_moduli: vec![m],
            ab_map: (0..n).map(|a| vec![a as u64]).collect(),
            ab_section: vec![1u8.min((n - 1) as u8)],
        }
    }

    pub fn symmetric(k: usize) -> FiniteGroup {
        // elements are permutations of 0..k in lexicographic order; index 0
        // is the identity
        let perms = all_perms(k);
        let n = perms.len();
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
        let mut mul = vec![0u8; n * n];
        let mut inv = vec![0u8; n];
        for (a, pa) in perms.iter().enumerate() {
            for (b, pb) in perms.iter().enumerate() {
                // (a·b)(x) = pa[pb[x]]
                let prod: Vec<usize> = (0..k).map(|x| pa[pb[x]]).collect();
                mul[a * n + b] = index(&prod) as u8;
            }
            let mut ia = vec![0usize; k];
            for (x, &y) in pa.iter().enumerate() {
                ia[y] = x;
            }
            inv[a] = index(&ia) as u8;
        }
        let sign = |p: &Vec<usize>| -> u64 {
            let mut s = 0u64;
            for i in 0..k {
                for j in i + 1..k {
                    if p[i] > p[j] {
                        s += 1;
                    }
                }
            }
            s % 2
        };
        let ab_map: Vec<Vec<u64>> = perms.iter().map(|p| vec![sign(p)]).collect();
        let section = perms.iter().position(|p| sign(p) == 1).unwrap() as u8;
        FiniteGroup {
            spec: format!("s{k}"),
            order: n,
            mul,
            inv,
            ab_moduli: vec![2],
            ab_map,
            ab_section: vec![section],
        }
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: FElem, b: FElem) -> FElem {
        self.mul[a as usize * self.order + b as usize]
    }

    pub fn inv(&self, a: FElem) -> FElem {
        self.inv[a as usize]
    }

    pub fn ab_moduli(&self) -> &[u64] {
        &self.ab_moduli
    }

    pub fn ab_order(&self) -> u64 {
        self.ab_moduli.iter().product()
    }

    pub fn ab(&self, a: FElem) -> &[u64] {
        &self.ab_map[a as usize]
    }

    /// An element mapping to the generator of the i-th abelianisation factor.
    pub fn ab_section(&self, i: usize) -> FElem {
        self.ab_section[i]
    }

    /// An element with the given abelianisation image (product of section
    /// generator powers).
    pub fn lift_ab(&self, coords: &[u64]) -> FElem {
        let mut out = 0u8;
        for (i, &c) in coords.iter().enumerate() {
            let g = self.ab_section(i);
            for _ in 0..c {
                out = self.mul(out, g);
            }
        }
        out
    }
}

fn all_perms(k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let mut i = k;
        for j in (1..k).rev() {
            if cur[j - 1] < cur[j] {
                i = j;
                break;
            }
        }
        if i == k {
            break;
        }
        let pivot = i - 1;
        let mut j = k - 1;
        while cur[j] <= cur[pivot] {
            j -= 1;
        }
        cur.swap(pivot, j);
        cur[i..].reverse();
    }
    out
}

/// An element of the tensor square `A ⊗ A` of a finite abelian group
/// `A = ℤ/m₁ × … × ℤ/m_k`, stored as the k×k matrix of residues, the
/// (i,j) entry living in ℤ/gcd(mᵢ,mⱼ).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Tensor(pub Vec<u64>);

/// Tensor-square arithmetic for a fixed list of cyclic moduli.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TensorSpace {
    moduli: Vec<u64>,
    entry_mod: Vec<u64>,
}

impl TensorSpace {
    pub fn new(moduli: &[u64]) -> TensorSpace {
        let k = moduli.len();
        let mut entry_mod = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                entry_mod.push(gcd(moduli[i], moduli[j]));
            }
        }
        TensorSpace { moduli: moduli.to_vec(), entry_mod }
    }

    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    pub fn order(&self) -> u64 {
        self.entry_mod.iter().product()
    }

    pub fn zero(&self) -> Tensor {
        Tensor(vec![0; self.entry_mod.len()])
    }

    pub fn is_zero(&self, t: &Tensor) -> bool {
        t.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, a: &Tensor, b: &Tensor) -> Tensor {
        Tensor(
            a.0.iter()
                .zip(&b.0)
                .zip(&self.entry_mod)
                .map(|((x, y), m)| (x + y) % m)
                .collect(),
        )
    }

    pub fn neg(&self, a: &Tensor) -> Tensor {
        Tensor(a.0.iter().zip(&self.entry_mod).map(|(x, m)| (m - x) % m).collect())
    }

    /// Pure tensor `x ⊗ y` of two abelianisation vectors.
    pub fn pure(&self, x: &[u64], y: &[u64]) -> Tensor {
        let k = self.rank();
        let mut out = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let m = self.entry_mod[i * k + j];
                out.push((x[i] % m) * (y[j] % m) % m);
            }
        }
        Tensor(out)
    }

    /// The swap `x ⊗ y ↦ -(y ⊗ x)` extended linearly: negated transpose.
    pub fn swap_neg(&self, a: &Tensor) -> Tensor {
        let k = self.rank();
        let mut out = vec![0u64; k * k];
        for i in 0..k {
            for j in 0..k {
                let m = self.entry_mod[j * k + i];
                out[j * k + i] = (m - a.0[i * k + j] % m) % m;
            }
        }
        Tensor(out)
    }

    /// All tensor values, odometer order.
    pub fn all(&self) -> Vec<Tensor> {
        let mut out = vec![self.zero()];
        for (idx, &m) in self.entry_mod.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * m as usize);
            for t in &out {
                for v in 0..m {
                    let mut u = t.clone();
                    u.0[idx] = v;
                    next.push(u);
                }
            }
            out = next;
        }
        out
    }

    /// Decompose into pure tensors of factor generators: the (i,j) entry `v`
    /// contributes `v` copies of `eᵢ ⊗ eⱼ`.
    pub fn pure_decomposition(&self, t: &Tensor) -> Vec<(usize, usize, u64)> {
        let k = self.rank();
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let v = t.0[i * k + j];
                if v != 0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The field 𝔽_{p^e} with exact table arithmetic. Elements are indices
/// `0..q`; 0 is zero and 1 is one.
#[derive(Clone, Debug)]
pub struct FiniteField {
    q: u16,
    p: u16,
    e: u16,
    add: Vec<u16>,
    mul: Vec<u16>,
    neg: Vec<u16>,
    inv: Vec<u16>,
}

impl PartialEq for FiniteField {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q
    }
}
impl Eq for FiniteField {}

pub type KElem = u16;

impl FiniteField {
    pub fn new(q: u32) -> Result<FiniteField> {
        let (p, e) = prime_power(q).ok_or_else(|| {
            Error::Config(format!("field order {q} is not a prime power"))
        })?;
        if q > 256 {
            return Err(Error::Config(format!("field order {q} too large")));
        }
        // polynomial representation over F_p modulo the lexicographically
        // least monic irreducible of degree e
        let modulus = least_irreducible(p, e);
        let q = q as usize;
        let to_poly = |mut v: usize| -> Vec<u32> {
            let mut c = vec![0u32; e as usize];
            for ci in c.iter_mut() {
                *ci = (v % p as usize) as u32;
                v /= p as usize;
            }
            c
        };
        let from_poly = |c: &[u32]| -> usize {
            let mut v = 0usize;
            for &ci in c.iter().rev() {
                v = v * p as usize + ci as usize;
            }
            v
        };
        let mut add = vec![0u16; q * q];
        let mut mul = vec![0u16; q * q];
        let mut neg = vec![0u16; q];
        let mut inv = vec![0u16; q];
        for a in 0..q {
            let pa = to_poly(a);
            let pneg: Vec<u32> = pa.iter().map(|&c| (p - c) % p).collect();
            neg[a] = from_poly(&pneg) as u16;
            for b in 0..q {
                let pb = to_poly(b);
                let psum: Vec<u32> = pa.iter().zip(&pb).map(|(&x, &y)| (x + y) % p).collect();
                add[a * q + b] = from_poly(&psum) as u16;
                let pprod = poly_mulmod(&pa, &pb, &modulus, p);
                mul[a * q + b] = from_poly(&pprod) as u16;
            }
        }
        for a in 1..q {
            for b in 1..q {
                if mul[a * q + b] == 1 {
                    inv[a] = b as u16;
                    break;
                }
            }
        }
        Ok(FiniteField { q: q as u16, p: p as u16, e, add, mul, neg, inv })
    }

    pub fn order(&self) -> u16 {
        self.q
    }

    pub fn characteristic(&self) -> u16 {
        self.p
    }

    pub fn degree(&self) -> u16 {
        self.e
    }

    pub fn add(&self, a: KElem, b: KElem) -> KElem {
        self.add[a as usize * self.q as usize + b as usize]
    }

    pub fn mul(&self, a: KElem, b: KElem) -> KElem {
        self.mul[a as usize * self.q as usize + b as usize]
    }

    pub fn neg(&self, a: KElem) -> KElem {
        self.neg[a as usize]
    }

    pub fn inv(&self, a: KElem) -> KElem {
        debug_assert!(a != 0);
        self.inv[a as usize]
    }

    pub fn sub(&self, a: KElem, b: KElem) -> KElem {
        self.add(a, self.neg(b))
    }

    /// Nonzero elements.
    pub fn units(&self) -> impl Iterator<Item = KElem> {
        1..self.q
    }
}

fn prime_power(q: u32) -> Option<(u32, u16)> {
    if q < 2 {
        return None;
    }
    let mut p = 0;
    for d in 2..=q {
        if q % d == 0 {
            p = d;
            break;
        }
    }
    let mut v = q;
    let mut e = 0;
    while v > 1 {
        if v % p != 0 {
            return None;
        }
        v /= p;
        e += 1;
    }
    Some((p, e))
}

fn poly_mulmod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let e = a.len();
    let mut prod = vec![0u32; 2 * e];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + ai * bj) % p;
        }
    }
    // reduce by the monic modulus of degree e
    for i in (e..2 * e).rev() {
        let c = prod[i];
        if c == 0 {
            continue;
        }
        prod[i] = 0;
        for (k, &mk) in modulus.iter().enumerate().take(e) {
            let idx = i - e + k;
            prod[idx] = (prod[idx] + c * (p - mk) % p) % p;
        }
    }
    prod.truncate(e);
    prod
}

/// Lexicographically least monic irreducible of degree e over F_p,
/// returned as its low coefficients (constant first, degree-e coeff is 1).
fn least_irreducible(p: u32, e: u16) -> Vec<u32> {
    if e == 1 {
        return vec![0];
    }
    let e = e as usize;
    let count = (p as usize).pow(e as u32);
    'cand: for v in 0..count {
        let mut c = vec![0u32; e];
        let mut w = v;
        for ci in c.iter_mut() {
            *ci = (w % p as usize) as u32;
            w /= p as usize;
        }
        // irreducible iff no root-free factorisation; for e <= 3 it is
        // enough to check for roots; for larger e do trial division
        if has_factor(&c, p) {
            continue 'cand;
        }
        return c;
    }
    unreachable!("irreducible polynomial exists for every degree");
}

fn has_factor(low: &[u32], p: u32) -> bool {
    let e = low.len();
    // full coefficient vector of the monic candidate
    let mut f = low.to_vec();
    f.push(1);
    // trial divide by every monic polynomial of degree 1..=e/2
    for d in 1..=e / 2 {
        let count = (p as usize).pow(d as u32);
        for v in 0..count {
            let mut g = vec![0u32; d];
            let mut w = v;
            for gi in g.iter_mut() {
                *gi = (w % p as usize) as u32;
                w /= p as usize;
            }
            g.push(1);
            if poly_divides(&g, &f, p) {
                return true;
            }
        }
    }
    false
}

fn poly_divides(g: &[u32], f: &[u32], p: u32) -> bool {
    let mut r: Vec<u32> = f.to_vec();
    let dg = g.len() - 1;
    while r.len() > dg && r.iter().any(|&c| c != 0) {
        while r.last() == Some(&0) && r.len() > 1 {
            r.pop();
        }
        if r.len() <= dg {
            break;
        }
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dg;
        for (k, &gk) in g.iter().enumerate() {
            r[shift + k] = (r[shift + k] + lead * (p - gk) % p) % p;
        }
    }
    r.iter().all(|&c| c == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_group_axioms() {
        let g = FiniteGroup::cyclic(6);
        for a in 0..6u8 {
            assert_eq!(g.mul(a, g.inv(a)), 0);
            for b in 0..6u8 {
                for c in 0..6u8 {
                    assert_eq!(g.mul(g.mul(a, b), c), g.mul(a, g.mul(b, c)));
                }
            }
        }
    }

    #[test]
    fn symmetric_group_s3() {
        let g = FiniteGroup::symmetric(3);
        assert_eq!(g.order(), 6);
        assert_eq!(g.ab_moduli(), &[2]);
        // half the elements are even
        let even = (0..6u8).filter(|&a| g.ab(a)[0] == 0).count();
        assert_eq!(even, 3);
        for a in 0..6u8 {
            for b in 0..6u8 {
                let ab = g.mul(a, b);
                assert_eq!(g.ab(ab)[0], (g.ab(a)[0] + g.ab(b)[0]) % 2);
            }
        }
    }

    #[test]
    fn field_f4_arithmetic() {
        let f = FiniteField::new(4).unwrap();
        assert_eq!(f.characteristic(), 2);
        // multiplicative group cyclic of order 3
        let mut pow = 1u16;
        let mut seen = vec![];
        for _ in 0..3 {
            pow = f.mul(pow, 2);
            seen.push(pow);
        }
        assert_eq!(seen[2], 1);
        assert_eq!(seen.iter().collect::<std::collections::HashSet<_>>().len(), 3);
        for a in f.units() {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn field_f9_axioms() {
        let f = FiniteField::new(9).unwrap();
        for a in 0..9u16 {
            for b in 0..9u16 {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in 0..9u16 {
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                }
            }
        }
    }

    #[test]
    fn tensor_swap_involution() {
        let t = TensorSpace::new(&[3]);
        let x = t.pure(&[2], &[1]);
        let y = t.swap_neg(&t.swap_neg(&x));
        assert_eq!(x, y);
        assert_eq!(t.order(), 3);
    }
}
