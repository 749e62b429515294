//! Evaluate a complete chain on global sections of a fixed twist to obtain a
//! complete collineation: a tower of matrices in which each one is induced on
//! the kernel/cokernel of the previous one, ending only when the last matrix
//! has full rank on its domain.

use p1pairs::binform::BinForm;
use p1pairs::collin::{default_m, embed_chain, validate_collineation};
use p1pairs::pairchain::{extend_chain, PsiChain, StablePair};
use p1pairs::qmat::rank;
use p1pairs::rng::Rng;

fn main() {
    let base = StablePair::new(
        2,
        2,
        vec![BinForm::from_ints(&[1, 0, 0]), BinForm::from_ints(&[0, 1, 0])],
    )
    .unwrap();
    let mut rng = Rng::new(0);
    let mut chain = PsiChain::new(base);
    while !chain.is_complete() {
        chain = extend_chain(&chain, &mut rng).unwrap();
    }

    let m = default_m(chain.base.n);
    let cc = embed_chain(&chain, m);
    println!("evaluation degree m = {m}");
    for (i, g) in cc.levels.iter().enumerate() {
        println!("level {i}: {}x{} matrix of rank {}", g.rows, g.cols, rank(g));
    }

    assert!(validate_collineation(&cc));
    println!("each level acts on the kernel of the previous and the tower rank-saturates");
}
