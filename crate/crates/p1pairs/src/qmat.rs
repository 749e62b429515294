//! Dense exact matrices over the rationals.
//!
//! The substrate for every linear-algebra question in the crate: kernels,
//! cokernels, ranks, minors. Correctness over speed; all matrices here are
//! desk-scale.

use crate::rat::{rat, rat_one, rat_zero, Rat};
use crate::rng::Rng;
use itertools::Itertools;
use num::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMat {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Rat>,
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMat { rows, cols, entries: vec![rat_zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, rat_one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        QMat { rows: r, cols: c, entries: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rat) -> Self {
        let mut m = QMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn transpose(&self) -> QMat {
        QMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn scale(&self, c: &Rat) -> QMat {
        QMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * c)
    }

    pub fn add(&self, other: &QMat) -> QMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        QMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &QMat) -> QMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        QMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn mul(&self, other: &QMat) -> QMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols);
        let mut out = QMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let v = out.get(i, j) + a * b;
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    pub fn col(&self, j: usize) -> Vec<Rat> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn hstack(&self, other: &QMat) -> QMat {
        assert_eq!(self.rows, other.rows);
        QMat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols { self.get(i, j).clone() } else { other.get(i, j - self.cols).clone() }
        })
    }

    pub fn vstack(&self, other: &QMat) -> QMat {
        assert_eq!(self.cols, other.cols);
        QMat::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows { self.get(i, j).clone() } else { other.get(i - self.rows, j).clone() }
        })
    }

    pub fn block_diag(&self, other: &QMat) -> QMat {
        QMat::from_fn(self.rows + other.rows, self.cols + other.cols, |i, j| {
            if i < self.rows && j < self.cols {
                self.get(i, j).clone()
            } else if i >= self.rows && j >= self.cols {
                other.get(i - self.rows, j - self.cols).clone()
            } else {
                rat_zero()
            }
        })
    }

    /// Stack a list of column blocks side by side.
    pub fn hcat(blocks: &[QMat]) -> QMat {
        assert!(!blocks.is_empty());
        blocks[1..].iter().fold(blocks[0].clone(), |acc, b| acc.hstack(b))
    }

    /// Stack a list of row blocks top to bottom.
    pub fn vcat(blocks: &[QMat]) -> QMat {
        assert!(!blocks.is_empty());
        blocks[1..].iter().fold(blocks[0].clone(), |acc, b| acc.vstack(b))
    }

    /// Submatrix picking the given rows and columns in order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> QMat {
        QMat::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    pub fn select_columns(&self, cols: &[usize]) -> QMat {
        self.submatrix(&(0..self.rows).collect_vec(), cols)
    }

    pub fn select_rows(&self, rows: &[usize]) -> QMat {
        self.submatrix(rows, &(0..self.cols).collect_vec())
    }
}

/// Reduced row-echelon form, rank and pivot columns.
pub fn rref(m: &QMat) -> (QMat, usize, Vec<usize>) {
    let mut a = m.clone();
    let mut pivots = Vec::new();
    let mut r = 0usize;
    for c in 0..a.cols {
        if r == a.rows {
            break;
        }
        // pick the entry of smallest textual size to slow coefficient growth
        let mut best: Option<usize> = None;
        for i in r..a.rows {
            if !a.get(i, c).is_zero() {
                match best {
                    None => best = Some(i),
                    Some(b) => {
                        let sz = |x: &Rat| x.numer().bits() + x.denom().bits();
                        if sz(a.get(i, c)) < sz(a.get(b, c)) {
                            best = Some(i);
                        }
                    }
                }
            }
        }
        let Some(p) = best else { continue };
        // swap into place
        if p != r {
            for j in 0..a.cols {
                let x = a.get(r, j).clone();
                let y = a.get(p, j).clone();
                a.set(r, j, y);
                a.set(p, j, x);
            }
        }
        let inv = rat_one() / a.get(r, c).clone();
        for j in c..a.cols {
            let v = a.get(r, j) * &inv;
            a.set(r, j, v);
        }
        for i in 0..a.rows {
            if i != r && !a.get(i, c).is_zero() {
                let f = a.get(i, c).clone();
                for j in c..a.cols {
                    let v = a.get(i, j) - &f * a.get(r, j);
                    a.set(i, j, v);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, r, pivots)
}

pub fn rank(m: &QMat) -> usize {
    rref(m).1
}

/// Columns form a basis of the null space of `m`.
pub fn kernel_basis(m: &QMat) -> QMat {
    let (red, rank, pivots) = rref(m);
    let free: Vec<usize> = (0..m.cols).filter(|c| !pivots.contains(c)).collect();
    let mut k = QMat::zeros(m.cols, free.len());
    for (fi, &fc) in free.iter().enumerate() {
        k.set(fc, fi, rat_one());
        for (pi, &pc) in pivots.iter().enumerate().take(rank) {
            k.set(pc, fi, -red.get(pi, fc).clone());
        }
    }
    k
}

/// The pivot columns of `m`: a basis of the column space.
pub fn image_basis(m: &QMat) -> QMat {
    let (_, _, pivots) = rref(m);
    m.select_columns(&pivots)
}

/// A surjection from the codomain of `m` whose kernel is exactly im(m).
/// Has `rows(m) - rank(m)` rows and full row rank.
pub fn cokernel_projection(m: &QMat) -> QMat {
    kernel_basis(&m.transpose()).transpose()
}

/// Solve A·X = B; `None` when inconsistent.
pub fn solve(a: &QMat, b: &QMat) -> Option<QMat> {
    assert_eq!(a.rows, b.rows);
    let aug = a.hstack(b);
    let (red, _, pivots) = rref(&aug);
    // inconsistent iff some pivot falls in the B block
    if pivots.iter().any(|&p| p >= a.cols) {
        return None;
    }
    let mut x = QMat::zeros(a.cols, b.cols);
    for (pi, &pc) in pivots.iter().enumerate() {
        for j in 0..b.cols {
            x.set(pc, j, red.get(pi, a.cols + j).clone());
        }
    }
    Some(x)
}

/// Right inverse of a full-row-rank matrix: P·X = I.
pub fn right_inverse(p: &QMat) -> QMat {
    solve(p, &QMat::identity(p.rows)).expect("matrix does not have full row rank")
}

/// True when the matrix is square and invertible.
pub fn is_invertible(m: &QMat) -> bool {
    m.rows == m.cols && rank(m) == m.rows
}

pub fn inverse(m: &QMat) -> Option<QMat> {
    if m.rows != m.cols {
        return None;
    }
    let x = solve(m, &QMat::identity(m.rows))?;
    if m.mul(&x) == QMat::identity(m.rows) {
        Some(x)
    } else {
        None
    }
}

/// Determinant by rational Gaussian elimination.
pub fn det(m: &QMat) -> Rat {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    let mut d = rat_one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a.get(i, c).is_zero()) else {
            return rat_zero();
        };
        if p != c {
            d = -d;
            for j in 0..n {
                let x = a.get(c, j).clone();
                let y = a.get(p, j).clone();
                a.set(c, j, y);
                a.set(p, j, x);
            }
        }
        d = d * a.get(c, c);
        let inv = rat_one() / a.get(c, c).clone();
        for i in (c + 1)..n {
            if !a.get(i, c).is_zero() {
                let f = a.get(i, c) * &inv;
                for j in c..n {
                    let v = a.get(i, j) - &f * a.get(c, j);
                    a.set(i, j, v);
                }
            }
        }
    }
    d
}

/// Matrix of all r×r minors, rows/columns indexed lexicographically by the
/// size-r subsets of row/column indices, with the standard alternating sign
/// convention baked into each determinant. `exterior_power(m, r) = 0` iff
/// `rank(m) < r`.
pub fn exterior_power(m: &QMat, r: usize) -> QMat {
    assert!(r >= 1 && r <= m.rows.min(m.cols), "minor size out of range");
    let row_sets: Vec<Vec<usize>> = (0..m.rows).combinations(r).collect();
    let col_sets: Vec<Vec<usize>> = (0..m.cols).combinations(r).collect();
    QMat::from_fn(row_sets.len(), col_sets.len(), |i, j| {
        det(&m.submatrix(&row_sets[i], &col_sets[j]))
    })
}

/// All cofactors of a square matrix: adj(m)ᵀ, i.e. cof[i][j] = ∂det/∂m[i][j].
pub fn cofactor_matrix(m: &QMat) -> QMat {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    QMat::from_fn(n, n, |i, j| {
        let rows: Vec<usize> = (0..n).filter(|&x| x != i).collect();
        let cols: Vec<usize> = (0..n).filter(|&x| x != j).collect();
        let minor = det(&m.submatrix(&rows, &cols));
        if (i + j) % 2 == 0 { minor } else { -minor }
    })
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, coeff_bound: i64) -> QMat {
    assert!(coeff_bound >= 1);
    QMat::from_fn(rows, cols, |_, _| rat(rng.int_in(coeff_bound)))
}

pub fn random_vector(rng: &mut Rng, len: usize, coeff_bound: i64) -> Vec<Rat> {
    assert!(coeff_bound >= 1);
    (0..len).map(|_| rat(rng.int_in(coeff_bound))).collect()
}

/// Do the two matrices agree up to one nonzero scalar?
pub fn proportional(a: &QMat, b: &QMat) -> bool {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return false;
    }
    if a.is_zero() || b.is_zero() {
        return a.is_zero() && b.is_zero();
    }
    let mut lambda: Option<Rat> = None;
    for i in 0..a.rows {
        for j in 0..a.cols {
            let (x, y) = (a.get(i, j), b.get(i, j));
            match (x.is_zero(), y.is_zero()) {
                (true, true) => {}
                (true, false) | (false, true) => return false,
                (false, false) => {
                    let l = y / x;
                    match &lambda {
                        None => lambda = Some(l),
                        Some(prev) => {
                            if *prev != l {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_frac;

    fn mat(rows: &[&[i64]]) -> QMat {
        QMat::from_rows(rows.iter().map(|r| r.iter().map(|&x| rat(x)).collect()).collect())
    }

    #[test]
    fn rref_identity() {
        let (red, rank, pivots) = rref(&QMat::identity(2));
        assert_eq!(red, QMat::identity(2));
        assert_eq!(rank, 2);
        assert_eq!(pivots, vec![0, 1]);
    }

    #[test]
    fn rref_zero() {
        let (red, rank, pivots) = rref(&QMat::zeros(2, 2));
        assert!(red.is_zero());
        assert_eq!(rank, 0);
        assert!(pivots.is_empty());
    }

    #[test]
    fn rref_rank_one() {
        // hand row reduction: [[1,2],[2,4]] -> [[1,2],[0,0]]
        let (red, rank, pivots) = rref(&mat(&[&[1, 2], &[2, 4]]));
        assert_eq!(red, mat(&[&[1, 2], &[0, 0]]));
        assert_eq!(rank, 1);
        assert_eq!(pivots, vec![0]);
    }

    #[test]
    fn kernel_cases() {
        assert_eq!(kernel_basis(&QMat::identity(3)).cols, 0);
        // x + y = 0 solved by hand: basis {(1, -1)} up to scale
        let k = kernel_basis(&mat(&[&[1, 1]]));
        assert_eq!(k.cols, 1);
        assert!(proportional(&k, &mat(&[&[1], &[-1]])));
        assert_eq!(kernel_basis(&QMat::zeros(2, 2)).cols, 2);
    }

    #[test]
    fn cokernel_cases() {
        assert_eq!(cokernel_projection(&QMat::identity(2)).rows, 0);
        assert_eq!(cokernel_projection(&mat(&[&[1, 1]])).rows, 0);
        // complement of span{e1}
        let p = cokernel_projection(&mat(&[&[1], &[0]]));
        assert!(proportional(&p, &mat(&[&[0, 1]])));
    }

    #[test]
    fn exterior_power_cases() {
        let e = exterior_power(&QMat::identity(3), 2);
        assert_eq!(e, QMat::identity(3));
        let z = exterior_power(&mat(&[&[1, 2], &[2, 4]]), 2);
        assert_eq!((z.rows, z.cols), (1, 1));
        assert!(z.is_zero());
        let d = exterior_power(&mat(&[&[1, 0], &[0, 0]]), 1);
        assert_eq!(d, mat(&[&[1, 0], &[0, 0]]));
    }

    #[test]
    fn random_matrix_determinism() {
        let mut a = Rng::new(5);
        let mut b = Rng::new(5);
        let m1 = random_matrix(&mut a, 3, 3, 9);
        let m2 = random_matrix(&mut b, 3, 3, 9);
        assert_eq!(m1, m2);
        // one extra prior draw shifts the stream
        let mut c = Rng::new(5);
        let _ = c.next_u64();
        assert_ne!(random_matrix(&mut c, 3, 3, 9), m1);
        // coeff bound 1 keeps entries in {-1,0,1}
        let mut d = Rng::new(1);
        let m = random_matrix(&mut d, 4, 4, 1);
        for i in 0..4 {
            for j in 0..4 {
                assert!(rat_abs(m.get(i, j)) <= rat_one());
            }
        }
    }

    use crate::rat::rat_abs;

    #[test]
    fn solve_and_inverse() {
        let a = mat(&[&[2, 1], &[1, 1]]);
        let inv = inverse(&a).unwrap();
        assert_eq!(a.mul(&inv), QMat::identity(2));
        assert_eq!(inv.get(0, 0), &rat_frac(1, 1));
        assert!(solve(&mat(&[&[1, 1], &[1, 1]]), &mat(&[&[0], &[1]])).is_none());
    }

    #[test]
    fn rank_nullity_and_cokernel_relations() {
        let mut rng = Rng::new(11);
        for _ in 0..30 {
            let m = random_matrix(&mut rng, 4, 4, 3);
            let r = rank(&m);
            assert_eq!(r + kernel_basis(&m).cols, m.cols);
            let p = cokernel_projection(&m);
            assert!(p.mul(&m).is_zero());
            assert_eq!(rank(&p) + r, m.rows);
            // exterior power vanishing matches rref rank
            for s in 1..=4usize {
                let vanish = exterior_power(&m, s).is_zero();
                assert_eq!(vanish, r < s);
            }
        }
    }
}
