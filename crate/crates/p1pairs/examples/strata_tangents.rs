//! Determinantal strata of the space of pairs: the section matrix of a pair
//! has bounded rank exactly on the locus where the pair degenerates, and the
//! stratum index does not depend on the evaluation degree once that degree is
//! large enough. At a generic point of a proper stratum, the tangent space of
//! the rank locus matches the dimension predicted by the parameterization.

use p1pairs::binform::BinForm;
use p1pairs::collin::{
    default_m, expected_stratum_dim, rank_formula_check, stratum_index, tangent_dim_at,
};
use p1pairs::pairchain::{analyze, StablePair};
use p1pairs::rng::Rng;

/// A generic point of stratum j: random forms of degree j scaled by a shared
/// random factor of degree n − j.
fn stratum_point(rng: &mut Rng, nv: usize, n: usize, j: usize) -> StablePair {
    loop {
        let common = BinForm::random(rng, n - j, 9);
        let forms: Vec<BinForm> = (0..nv)
            .map(|_| common.mul(&BinForm::random(rng, j, 9)))
            .collect();
        if let Ok(p) = StablePair::new(nv, n, forms) {
            let m = default_m(n);
            if stratum_index(&p, m) == j {
                return p;
            }
        }
    }
}

fn main() {
    let mut rng = Rng::new(0);
    let (nv, n) = (2, 2);
    let m = default_m(n);

    for j in 0..n {
        let pair = stratum_point(&mut rng, nv, n, j);
        assert!(rank_formula_check(&pair, m));
        assert_eq!(j, analyze(&pair).deg_im as usize);
        assert_eq!(j, stratum_index(&pair, m + 1), "index is stable in the degree");

        let (jac_dim, param_rank) = tangent_dim_at(&pair, m);
        let expected = expected_stratum_dim(nv, n, j);
        println!(
            "stratum {j}: tangent dim {jac_dim}, parameterization rank {param_rank}, \
             expected {expected}"
        );
        assert_eq!(jac_dim, expected);
        assert_eq!(param_rank, expected);
    }

    let generic = StablePair::random(&mut rng, nv, n, 9);
    println!(
        "random pair lands in stratum {} of {} (open stratum = surjective pair map)",
        stratum_index(&generic, m),
        n
    );
    println!("rank formula and tangent dimensions confirmed");
}
