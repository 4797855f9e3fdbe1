//! Sparse finitely-supported linear algebra over a finite field: the lamp
//! backend of lampcloner groups. An element is an invertible linear map of
//! the free module over the base group fixing all but finitely many basis
//! vectors; it is stored column-wise, keeping only columns that differ from
//! the corresponding basis vector.

use super::finite::{FiniteField, KElem};
use crate::basegroup::Point;
use std::collections::BTreeMap;

pub type SparseVec = BTreeMap<Point, KElem>;
pub type SparseMat = BTreeMap<Point, SparseVec>;

pub fn basis_vec(p: &Point) -> SparseVec {
    let mut v = SparseVec::new();
    v.insert(p.clone(), 1);
    v
}

fn is_basis(col: &SparseVec, q: &Point) -> bool {
    col.len() == 1 && col.get(q) == Some(&1)
}

/// Drop zero entries and identity columns.
pub fn trim(m: &mut SparseMat) {
    let keys: Vec<Point> = m.keys().cloned().collect();
    for q in keys {
        let col = m.get_mut(&q).unwrap();
        col.retain(|_, v| *v != 0);
        if is_basis(col, &q) || col.is_empty() && false {
            m.remove(&q);
        }
    }
}

pub fn column<'a>(m: &'a SparseMat, q: &Point) -> SparseVec {
    m.get(q).cloned().unwrap_or_else(|| basis_vec(q))
}

fn vec_add_scaled(field: &FiniteField, acc: &mut SparseVec, coeff: KElem, v: &SparseVec) {
    if coeff == 0 {
        return;
    }
    for (r, &c) in v {
        let add = field.mul(coeff, c);
        if add == 0 {
            continue;
        }
        let e = acc.entry(r.clone()).or_insert(0);
        *e = field.add(*e, add);
        if *e == 0 {
            acc.remove(r);
        }
    }
}

/// Composition `a ∘ b` (apply `b` first).
pub fn mat_mul(field: &FiniteField, a: &SparseMat, b: &SparseMat) -> SparseMat {
    let mut out = SparseMat::new();
    let mut cols: Vec<&Point> = b.keys().collect();
    for q in a.keys() {
        if !b.contains_key(q) {
            cols.push(q);
        }
    }
    for q in cols {
        let bq = column(b, q);
        let mut acc = SparseVec::new();
        for (r, &c) in &bq {
            let ar = column(a, r);
            vec_add_scaled(field, &mut acc, c, &ar);
        }
        if !is_basis(&acc, q) {
            out.insert(q.clone(), acc);
        }
    }
    out
}

/// All base points where the map differs from the identity: columns that are
/// not basis vectors together with rows carrying off-diagonal entries.
pub fn mat_support(m: &SparseMat) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for (q, col) in m {
        out.push(q.clone());
        for r in col.keys() {
            if r != q {
                out.push(r.clone());
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Exact inverse via dense Gaussian elimination on the active coordinates.
pub fn mat_inv(field: &FiniteField, m: &SparseMat) -> SparseMat {
    let active = mat_support(m);
    if active.is_empty() {
        return SparseMat::new();
    }
    let n = active.len();
    let idx: BTreeMap<&Point, usize> = active.iter().zip(0..n).collect();
    // dense [M | I]
    let mut a = vec![vec![0 as KElem; 2 * n]; n];
    for (j, q) in active.iter().enumerate() {
        let col = column(m, q);
        for (r, &c) in &col {
            a[idx[r]][j] = c;
        }
        a[j][n + j] = 1;
    }
    assert!(dense_solve(field, &mut a, n), "lamp matrix is not invertible");
    let mut out = SparseMat::new();
    for (j, q) in active.iter().enumerate() {
        let mut col = SparseVec::new();
        for (i, r) in active.iter().enumerate() {
            if a[i][n + j] != 0 {
                col.insert(r.clone(), a[i][n + j]);
            }
        }
        if !is_basis(&col, q) {
            out.insert(q.clone(), col);
        }
    }
    out
}

/// Reduce `[A | B]` to `[I | A⁻¹B]`; returns false if A is singular.
fn dense_solve(field: &FiniteField, a: &mut [Vec<KElem>], n: usize) -> bool {
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != 0);
        let Some(pivot) = pivot else { return false };
        a.swap(col, pivot);
        let pinv = field.inv(a[col][col]);
        for x in a[col].iter_mut() {
            *x = field.mul(*x, pinv);
        }
        for r in 0..n {
            if r != col && a[r][col] != 0 {
                let f = a[r][col];
                let (head, tail) = a.split_at_mut(col.max(r));
                let (row_r, row_c) = if r < col {
                    (&mut head[r], &tail[0])
                } else {
                    (&mut tail[0], &head[col])
                };
                for k in 0..2 * n {
                    row_r[k] = field.sub(row_r[k], field.mul(f, row_c[k]));
                }
            }
        }
    }
    true
}

pub fn is_invertible_dense(field: &FiniteField, rows: &[Vec<KElem>]) -> bool {
    let n = rows.len();
    let mut a: Vec<Vec<KElem>> = rows
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.resize(2 * n, 0);
            row
        })
        .collect();
    for (j, row) in a.iter_mut().enumerate() {
        row[n + j] = 1;
    }
    dense_solve(field, &mut a, n)
}

/// The transvection τ_{pq}(λ): adds λ·(q-coordinate) to the p-coordinate,
/// i.e. column q becomes e_q + λ e_p.
pub fn transvection(p: &Point, q: &Point, lambda: KElem) -> SparseMat {
    assert!(p != q && lambda != 0);
    let mut col = basis_vec(q);
    col.insert(p.clone(), lambda);
    let mut m = SparseMat::new();
    m.insert(q.clone(), col);
    m
}

/// The dilation δ_p(λ): scales the p-coordinate by λ.
pub fn dilation(p: &Point, lambda: KElem) -> SparseMat {
    assert!(lambda != 0);
    let mut m = SparseMat::new();
    if lambda != 1 {
        let mut col = SparseVec::new();
        col.insert(p.clone(), lambda);
        m.insert(p.clone(), col);
    }
    m
}

/// All invertible n×n matrices over the field, as dense row-major tables.
/// Order is the odometer order on entries.
pub fn enumerate_gl(field: &FiniteField, n: usize) -> Vec<Vec<Vec<KElem>>> {
    let q = field.order() as u64;
    let total = q.pow((n * n) as u32);
    let mut out = Vec::new();
    let mut entries = vec![0 as KElem; n * n];
    for _ in 0..total {
        let rows: Vec<Vec<KElem>> = (0..n).map(|i| entries[i * n..(i + 1) * n].to_vec()).collect();
        if is_invertible_dense(field, &rows) {
            out.push(rows);
        }
        // odometer
        for e in entries.iter_mut() {
            *e += 1;
            if *e < field.order() {
                break;
            }
            *e = 0;
        }
    }
    out
}

/// Echelonise the given vectors (over the listed coordinates) into reduced
/// row-echelon form; returns the echelon basis. Deterministic: pivots are
/// chosen in coordinate order.
pub fn echelon_basis(field: &FiniteField, vecs: &[SparseVec], coords: &[Point]) -> Vec<SparseVec> {
    let mut rows: Vec<Vec<KElem>> = vecs
        .iter()
        .map(|v| coords.iter().map(|c| *v.get(c).unwrap_or(&0)).collect())
        .collect();
    let n = coords.len();
    let mut pivot_rows: Vec<usize> = Vec::new();
    let mut r = 0usize;
    for c in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else { continue };
        rows.swap(r, p);
        let inv = field.inv(rows[r][c]);
        for x in rows[r].iter_mut() {
            *x = field.mul(*x, inv);
        }
        for i in 0..rows.len() {
            if i != r && rows[i][c] != 0 {
                let f = rows[i][c];
                let (a, b) = if i < r {
                    let (h, t) = rows.split_at_mut(r);
                    (&mut h[i], &t[0])
                } else {
                    let (h, t) = rows.split_at_mut(i);
                    (&mut t[0], &h[r])
                };
                for k in 0..n {
                    a[k] = field.sub(a[k], field.mul(f, b[k]));
                }
            }
        }
        pivot_rows.push(r);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows.iter()
        .map(|row| {
            let mut v = SparseVec::new();
            for (k, &c) in row.iter().enumerate() {
                if c != 0 {
                    v.insert(coords[k].clone(), c);
                }
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: i64) -> Point {
        Point::Lattice { x, y: 0 }
    }

    #[test]
    fn transvection_support_and_inverse() {
        let f = FiniteField::new(2).unwrap();
        let t = transvection(&pt(0), &pt(1), 1);
        assert_eq!(mat_support(&t), vec![pt(0), pt(1)]);
        let ti = mat_inv(&f, &t);
        assert!(mat_mul(&f, &t, &ti).is_empty());
    }

    #[test]
    fn gl_orders() {
        let f2 = FiniteField::new(2).unwrap();
        assert_eq!(enumerate_gl(&f2, 2).len(), 6);
        assert_eq!(enumerate_gl(&f2, 3).len(), 168);
        let f3 = FiniteField::new(3).unwrap();
        assert_eq!(enumerate_gl(&f3, 2).len(), 48);
    }

    #[test]
    fn composition_matches_dense() {
        let f = FiniteField::new(3).unwrap();
        let a = transvection(&pt(0), &pt(1), 2);
        let b = transvection(&pt(1), &pt(2), 1);
        let ab = mat_mul(&f, &a, &b);
        // apply to e_2: b(e_2) = e_2 + e_1, then a: e_2 + (e_1 + 2 e_0)
        let col = column(&ab, &pt(2));
        assert_eq!(col.get(&pt(0)), Some(&2));
        assert_eq!(col.get(&pt(1)), Some(&1));
        assert_eq!(col.get(&pt(2)), Some(&1));
    }
}
