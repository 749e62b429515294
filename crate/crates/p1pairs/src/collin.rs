//! Determinantal picture of stable pairs.
//!
//! Evaluating ψ: V⊗O → O(n) on forms of degree m gives one rational matrix
//! Γ: V⊗W_m → W_{n+m}; for m large enough its rank determines deg im ψ, so the
//! degeneration strata of pairs become determinantal rank strata. A complete
//! chain of pairs becomes a complete collineation chain of matrices, the
//! strata admit an explicit multiplication parameterization, and tangent
//! spaces can be computed two independent ways (Jacobian of minors versus
//! differential of the parameterization).

use crate::binform::{gcd_many, BinForm};
use crate::pairchain::{PairError, PsiChain, StablePair};
use crate::qmat::{
    cokernel_projection, exterior_power, inverse, kernel_basis, rank, right_inverse, solve, QMat,
};
use crate::rat::{rat_zero, Rat};
use num::Zero;

/// Matrix of ψ on degree-m forms, in the monomial bases: the j-th column
/// block multiplies degree-m forms by the j-th coordinate form of the pair.
pub fn gamma(p: &StablePair, m: usize) -> QMat {
    let n = p.n;
    QMat::from_fn(n + m + 1, p.nv * (m + 1), |i, c| {
        let (j, col) = (c / (m + 1), c % (m + 1));
        match &p.forms[j] {
            BinForm::Zero => rat_zero(),
            f => {
                if i >= col && i - col <= n {
                    f.coeffs()[i - col].clone()
                } else {
                    rat_zero()
                }
            }
        }
    })
}

/// Smallest m₀ so that for every m > m₀ the rank of `gamma` computes the
/// image degree (rank = m + 1 + deg im ψ). Beyond this bound the kernel and
/// image sheaves twisted by m have no higher cohomology.
pub fn m0_bound(n: usize) -> i64 {
    n as i64 - 2
}

/// Default evaluation degree used by the command-line tools: one beyond the
/// last degree where the rank formula could fail, with a safety margin.
pub fn default_m(n: usize) -> usize {
    n + 1
}

/// rank Γ = m + 1 + deg im ψ, with the image degree taken from the
/// independent gcd computation.
pub fn rank_formula_check(p: &StablePair, m: usize) -> bool {
    assert!(m as i64 >= p.n as i64 - 1, "evaluation degree too small");
    let g = gcd_many(&p.forms);
    let deg_im = p.n - g.degree().expect("nonzero pair has nonzero gcd");
    rank(&gamma(p, m)) == m + 1 + deg_im
}

/// Minimal j with deg im ψ ≤ j, read off the matrix rank.
pub fn stratum_index(p: &StablePair, m: usize) -> usize {
    assert!(m as i64 >= p.n as i64 - 1, "evaluation degree too small");
    rank(&gamma(p, m)) - m - 1
}

/// A complete collineation: Γ₀ plus the induced matrices on
/// ker Γ_{i-1} → coker Γ_{i-1} (in the stored bases), ending at the first
/// level whose cokernel vanishes.
#[derive(Debug, Clone)]
pub struct CollineationChain {
    pub levels: Vec<QMat>,
    /// Column basis of ker Γ_i, in level-i source coordinates.
    pub kernel_bases: Vec<QMat>,
    /// Projection of level-i target coordinates onto coker Γ_i.
    pub coker_projs: Vec<QMat>,
}

/// Evaluate every map of a pair chain on degree-m forms. Level i ≥ 1 is the
/// matrix of the chain's i-th step on global sections, rewritten in the
/// row-reduction bases of ker Γ_{i-1} and coker Γ_{i-1}; along the way the
/// sheaf-level and matrix-level kernels and cokernels are checked to match.
pub fn embed_chain(c: &PsiChain, m: usize) -> CollineationChain {
    let n = c.base.n;
    assert!(m as i64 >= n as i64 - 1, "evaluation degree too small");
    assert!((m as i64) <= c.psi0.source.d_hi(), "evaluation degree outside the chain window");
    let g0 = gamma(&c.base, m);
    assert_eq!(
        g0,
        c.psi0.maps[c.psi0.source.idx(m as i64)],
        "matrix of the base map disagrees with its sheaf-side evaluation"
    );
    let mut levels = vec![g0];
    let mut kernel_bases = Vec::new();
    let mut coker_projs = Vec::new();
    // a: level-i linear source coordinates -> degree-m coordinates of the
    // sheaf-side source module; b: same for targets (identities at level 0)
    let mut a = QMat::identity(levels[0].cols);
    let mut b = QMat::identity(levels[0].rows);
    for i in 0..=c.m() {
        let gi = levels[i].clone();
        let kb = kernel_basis(&gi);
        let pr = cokernel_projection(&gi);
        kernel_bases.push(kb.clone());
        coker_projs.push(pr.clone());
        if i == c.m() {
            break;
        }
        let step = &c.steps[i];
        let map_i: &crate::tailmod::SheafMap = if i == 0 { &c.psi0 } else { &c.steps[i - 1] };
        let (_, incl) = map_i.kernel();
        let (_, proj) = map_i.cokernel();
        let s = &step.maps[step.source.idx(m as i64)];
        let tk = &incl.maps[incl.source.idx(m as i64)];
        let tp = &proj.maps[proj.source.idx(m as i64)];
        // matrix and sheaf kernels span the same subspace of the source
        assert_eq!(kb.cols, tk.cols, "matrix kernel and sheaf kernel dimensions differ");
        let a_next = solve(tk, &a.mul(&kb)).expect("matrix kernel does not match the sheaf kernel");
        // rewrite sheaf cokernel coordinates in the matrix cokernel basis
        let b_inv = inverse(&b).expect("target identification is not invertible");
        let to_linear = pr.mul(&b_inv).mul(&right_inverse(tp));
        assert_eq!(
            to_linear.mul(tp),
            pr.mul(&b_inv),
            "matrix cokernel does not match the sheaf cokernel"
        );
        let b_next = inverse(&to_linear).expect("cokernel identification is not invertible");
        levels.push(to_linear.mul(s).mul(&a_next));
        a = a_next;
        b = b_next;
    }
    let cc = CollineationChain { levels, kernel_bases, coker_projs };
    assert!(validate_collineation(&cc), "embedded chain fails validation");
    cc
}

/// Brute-force validity: every level nonzero, level i defined on exactly
/// ker/coker of level i-1 (recomputed by row reduction), and termination
/// exactly at the first surjective level.
pub fn validate_collineation(cc: &CollineationChain) -> bool {
    let k = cc.levels.len();
    if k == 0 || cc.kernel_bases.len() != k || cc.coker_projs.len() != k {
        return false;
    }
    for i in 0..k {
        let g = &cc.levels[i];
        if g.is_zero() {
            return false;
        }
        let kb = kernel_basis(g);
        let pr = cokernel_projection(g);
        if kb != cc.kernel_bases[i] || pr != cc.coker_projs[i] {
            return false;
        }
        let surjective = pr.rows == 0;
        if i + 1 < k {
            if surjective {
                return false; // chain continues past a surjection
            }
            if cc.levels[i + 1].cols != kb.cols || cc.levels[i + 1].rows != pr.rows {
                return false;
            }
        } else if !surjective {
            return false; // chain stops before reaching a surjection
        }
    }
    true
}

/// The stratum parameterization: multiply a lower-degree pair by a fixed
/// form, (ψ, s) ↦ sψ. Image degree is preserved, so strata pull back to
/// strata.
pub fn stratum_map_g(pk: &StablePair, s: &BinForm) -> Result<StablePair, PairError> {
    let ds = s
        .degree()
        .ok_or_else(|| PairError::Invalid("multiplier form is zero".into()))?;
    StablePair::new(
        pk.nv,
        pk.n + ds,
        pk.forms.iter().map(|f| f.mul(s)).collect(),
    )
}

/// Tangent dimension of the rank stratum at p, computed two independent
/// ways: the kernel of the Jacobian of all rank-bounding minors of Γ in the
/// affine chart through p, and the rank of the differential of the
/// multiplication parameterization at a preimage of p. At generic points of
/// the stratum both equal (j+1)·dim V − 1 + (n − j).
pub fn tangent_dim_at(p: &StablePair, m: usize) -> (usize, usize) {
    let n = p.n;
    let nv = p.nv;
    let j = stratum_index(p, m);
    assert!(j < n, "pair lies in the open stratum; no minor conditions apply");
    let ncoords = nv * (n + 1);
    let coord = |c: usize| -> Rat {
        let (blk, k) = (c / (n + 1), c % (n + 1));
        match &p.forms[blk] {
            BinForm::Zero => rat_zero(),
            f => f.coeffs()[k].clone(),
        }
    };
    // gamma is linear in the pair's coordinates; basis_gammas[c] = Γ of the
    // c-th coordinate pair
    let basis_gammas: Vec<QMat> = (0..ncoords)
        .map(|c| {
            let (blk, k) = (c / (n + 1), c % (n + 1));
            let mut forms = vec![BinForm::Zero; nv];
            forms[blk] = BinForm::monomial(n, k);
            gamma(&StablePair { nv, n, forms }, m)
        })
        .collect();
    let g_at_p = gamma(p, m);
    let r = m + 2 + j; // minor size whose vanishing cuts out the stratum
    let rows_all: Vec<Vec<usize>> = subsets(g_at_p.rows, r);
    let cols_all: Vec<Vec<usize>> = subsets(g_at_p.cols, r);
    let chart = (0..ncoords)
        .find(|&c| !coord(c).is_zero())
        .expect("pair has a nonzero coordinate");
    let mut grads: Vec<Vec<Rat>> = Vec::new();
    for rs in &rows_all {
        for cs in &cols_all {
            let sub = g_at_p.submatrix(rs, cs);
            let cof = crate::qmat::cofactor_matrix(&sub);
            // d det(sub) = Σ cof[a][b] · d sub[a][b]; entries are linear in
            // the coordinates
            let mut grad = vec![rat_zero(); ncoords];
            for (ai, &ri) in rs.iter().enumerate() {
                for (bi, &ci) in cs.iter().enumerate() {
                    let cf = cof.get(ai, bi);
                    if cf.is_zero() {
                        continue;
                    }
                    for (c, bg) in basis_gammas.iter().enumerate() {
                        let e = bg.get(ri, ci);
                        if !e.is_zero() {
                            grad[c] = grad[c].clone() + cf.clone() * e.clone();
                        }
                    }
                }
            }
            if grad.iter().any(|x| !x.is_zero()) {
                grads.push(grad);
            }
        }
    }
    // restrict to the affine chart: drop the fixed coordinate's column
    let jac = QMat::from_fn(grads.len().max(1), ncoords - 1, |i, cc| {
        if grads.is_empty() {
            return rat_zero();
        }
        let c = if cc < chart { cc } else { cc + 1 };
        grads[i][c].clone()
    });
    let jac_dim = (ncoords - 1) - rank(&jac);

    // parameterization side: preimage (ψ', s₀) with s₀ = gcd, ψ' = forms/s₀
    let s0 = gcd_many(&p.forms);
    let ds = s0.degree().unwrap();
    assert_eq!(n - ds, j);
    let psi_p: Vec<BinForm> = p
        .forms
        .iter()
        .map(|f| match f {
            BinForm::Zero => BinForm::Zero,
            _ => f.divide(&s0).expect("gcd divides every form"),
        })
        .collect();
    // D(δψ', δs) = s₀·δψ' + δs·ψ'; columns over the N(j+1) + (n-j+1) params
    let nparams = nv * (j + 1) + (n - j + 1);
    let d = QMat::from_fn(ncoords, nparams + 1, |row, col| {
        let (blk, k) = (row / (n + 1), row % (n + 1));
        if col < nv * (j + 1) {
            let (pb, pk) = (col / (j + 1), col % (j + 1));
            if pb != blk {
                return rat_zero();
            }
            // coefficient of z-monomial k in s₀ · (monomial pk of degree j)
            if k >= pk && k - pk <= ds {
                s0.coeffs()[k - pk].clone()
            } else {
                rat_zero()
            }
        } else if col < nparams {
            let sk = col - nv * (j + 1); // monomial index in δs, degree n-j
            match &psi_p[blk] {
                BinForm::Zero => rat_zero(),
                f => {
                    if k >= sk && k - sk <= j {
                        f.coeffs()[k - sk].clone()
                    } else {
                        rat_zero()
                    }
                }
            }
        } else {
            // the scaling direction of p itself, modded out by projectivizing
            coord(row)
        }
    });
    let param_rank = rank(&d) - 1;
    (jac_dim, param_rank)
}

/// All size-r subsets of 0..n in lexicographic order.
fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..n).combinations(r).collect()
}

/// The expected stratum tangent dimension at a generic point.
pub fn expected_stratum_dim(nv: usize, n: usize, j: usize) -> usize {
    (j + 1) * nv - 1 + (n - j)
}

/// Every rank-bounding minor vanishes exactly down to the pair's stratum:
/// the exterior power of Γ of size s is zero iff s > rank.
pub fn minor_vanishing_profile(p: &StablePair, m: usize) -> Vec<bool> {
    let g = gamma(p, m);
    let top = g.rows.min(g.cols);
    (1..=top).map(|s| exterior_power(&g, s).is_zero()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairchain::{analyze, extend_chain, random_complete_chain};
    use crate::rng::Rng;

    fn pair(n: usize, forms: &[&[i64]]) -> StablePair {
        StablePair::new(
            forms.len(),
            n,
            forms.iter().map(|f| BinForm::from_ints(f)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn gamma_small_examples() {
        // (z0, z1) at m = 0: columns are the two coordinate forms
        let g = gamma(&pair(1, &[&[1, 0], &[0, 1]]), 0);
        assert_eq!((g.rows, g.cols), (2, 2));
        assert_eq!(rank(&g), 2);
        // (z0^2, z0 z1) at m = 1: image is z0·(degree-2 forms), dimension 3
        let g = gamma(&pair(2, &[&[1, 0, 0], &[0, 1, 0]]), 1);
        assert_eq!((g.rows, g.cols), (4, 4));
        assert_eq!(rank(&g), 3);
    }

    #[test]
    fn rank_is_stable_in_m() {
        let rng = Rng::new(0);
        for t in 0..30 {
            let mut r = rng.child(t);
            let n = 2 + (t % 3) as usize;
            let p = StablePair::random(&mut r, 2 + (t % 2) as usize, n, 9);
            let deltas: Vec<i64> = (n.max(1) - 1..=n + 1)
                .map(|m| rank(&gamma(&p, m)) as i64 - (m as i64 + 1))
                .collect();
            assert!(deltas.windows(2).all(|w| w[0] == w[1]), "rank defect varies with m");
            assert!(rank_formula_check(&p, n + 1));
        }
    }

    #[test]
    fn rank_formula_examples() {
        assert!(rank_formula_check(&pair(1, &[&[1, 0], &[0, 1]]), 2));
        assert_eq!(rank(&gamma(&pair(1, &[&[1, 0], &[0, 1]]), 2)), 4);
        assert_eq!(rank(&gamma(&pair(2, &[&[1, 0, 0], &[0, 1, 0]]), 2)), 4);
        assert_eq!(rank(&gamma(&pair(2, &[&[1, 0, 0], &[2, 0, 0]]), 2)), 3);
    }

    #[test]
    fn stratum_index_examples() {
        // coprime forms: open stratum j = n
        assert_eq!(stratum_index(&pair(2, &[&[1, 0, 0], &[0, 0, 1]]), 3), 2);
        // fixed form times a vector: bottom stratum j = 0
        assert_eq!(stratum_index(&pair(2, &[&[1, 0, 0], &[2, 0, 0]]), 3), 0);
        assert_eq!(stratum_index(&pair(2, &[&[1, 0, 0], &[0, 1, 0]]), 3), 1);
        // agrees with the sheaf-side image degree
        let p = pair(2, &[&[1, 0, 0], &[0, 1, 0]]);
        assert_eq!(stratum_index(&p, 3) as i64, analyze(&p).deg_im);
    }

    #[test]
    fn minor_vanishing_matches_stratum() {
        let p = pair(2, &[&[1, 0, 0], &[0, 1, 0]]); // j = 1 at any valid m
        let m = 2;
        let prof = minor_vanishing_profile(&p, m);
        let r = m + 1 + 1;
        for (idx, vanished) in prof.iter().enumerate() {
            let size = idx + 1;
            assert_eq!(*vanished, size > r, "minor size {size}");
        }
    }

    #[test]
    fn embed_surjective_chain() {
        let c = PsiChain::new(pair(2, &[&[1, 0, 0], &[0, 0, 1]]));
        let cc = embed_chain(&c, 3);
        assert_eq!(cc.levels.len(), 1);
        assert_eq!(rank(&cc.levels[0]), cc.levels[0].rows);
        assert!(validate_collineation(&cc));
    }

    #[test]
    fn embed_two_level_chain() {
        let mut rng = Rng::new(1);
        let c0 = PsiChain::new(pair(2, &[&[1, 0, 0], &[0, 1, 0]]));
        let c = extend_chain(&c0, &mut rng).unwrap();
        let m = 3;
        let cc = embed_chain(&c, m);
        assert_eq!(cc.levels.len(), 2);
        // level-1 map goes from h⁰(ker(m)) = m dims for a degree -1 kernel
        // onto the 1-dimensional sections of the length-1 cokernel
        assert_eq!(cc.levels[1].cols, 3);
        assert_eq!(cc.levels[1].rows, 1);
        assert!(validate_collineation(&cc));
    }

    #[test]
    fn embed_random_chains() {
        let rng = Rng::new(6);
        for t in 0..5 {
            let mut r = rng.child(t);
            let n = 2 + (t % 2) as usize;
            let c = random_complete_chain(&mut r, 2, n, 5);
            let cc = embed_chain(&c, n + 1);
            assert!(validate_collineation(&cc));
            assert_eq!(cc.levels.len(), c.m() + 1);
        }
    }

    #[test]
    fn validation_rejects_malformed_chains() {
        // surjective level followed by another level
        let g0 = QMat::identity(2);
        let bad = CollineationChain {
            levels: vec![g0.clone(), QMat::identity(0)],
            kernel_bases: vec![kernel_basis(&g0), QMat::identity(0)],
            coker_projs: vec![cokernel_projection(&g0), QMat::identity(0)],
        };
        assert!(!validate_collineation(&bad));
        // chain stopping while the cokernel is nonzero
        let g = QMat::from_fn(2, 2, |i, j| {
            if i == 0 && j == 0 { crate::rat::rat_one() } else { rat_zero() }
        });
        let short = CollineationChain {
            levels: vec![g.clone()],
            kernel_bases: vec![kernel_basis(&g)],
            coker_projs: vec![cokernel_projection(&g)],
        };
        assert!(!validate_collineation(&short));
    }

    #[test]
    fn stratum_map_multiplies_gcd_degrees() {
        // surjective degree-1 pair times z1 lands in stratum 1 of degree 2
        let pk = pair(1, &[&[1, 0], &[0, 1]]);
        let s = BinForm::from_ints(&[0, 1]);
        let q = stratum_map_g(&pk, &s).unwrap();
        assert_eq!(q.n, 2);
        assert_eq!(stratum_index(&q, 3), 1);
        // degree-0 multiplier is the identity
        let id = stratum_map_g(&pk, &BinForm::from_ints(&[1])).unwrap();
        assert_eq!(id, pk);
        // gcd degrees add
        let rng = Rng::new(2);
        for t in 0..10 {
            let mut r = rng.child(t);
            let pk = StablePair::random(&mut r, 2, 2, 9);
            let s = BinForm::random(&mut r, 1, 9);
            let q = stratum_map_g(&pk, &s).unwrap();
            let d0 = gcd_many(&pk.forms).degree().unwrap();
            assert_eq!(gcd_many(&q.forms).degree().unwrap(), d0 + 1);
            // strata pull back: q ∈ stratum j ⟺ pk ∈ stratum j, j ≤ k
            assert_eq!(stratum_index(&q, q.n + 1), stratum_index(&pk, pk.n + 1));
        }
    }

    #[test]
    fn tangent_dimensions_on_small_strata() {
        let m = 2; // smallest valid evaluation degree for n = 2
        // two coordinates, degree 2, bottom stratum: product of lines and
        // conics has dimension 3
        let p = pair(2, &[&[1, 1, 1], &[2, 2, 2]]);
        assert_eq!(stratum_index(&p, m), 0);
        let (jd, pr) = tangent_dim_at(&p, m);
        assert_eq!((jd, pr), (3, 3));
        assert_eq!(expected_stratum_dim(2, 2, 0), 3);
        // middle stratum j = 1
        let p = pair(2, &[&[1, 1, 0], &[0, 1, 1]]); // gcd z0 + z1
        assert_eq!(stratum_index(&p, m), 1);
        let (jd, pr) = tangent_dim_at(&p, m);
        assert_eq!((jd, pr), (4, 4));
        assert_eq!(expected_stratum_dim(2, 2, 1), 4);
        // three coordinates, bottom stratum: expected (0+1)·3 − 1 + 2 = 4
        let p = pair(2, &[&[1, 2, 1], &[2, 4, 2], &[1, 2, 1]]);
        assert_eq!(stratum_index(&p, m), 0);
        let (jd, pr) = tangent_dim_at(&p, m);
        assert_eq!((jd, pr), (4, 4));
        assert_eq!(expected_stratum_dim(3, 2, 0), 4);
    }
}
