//! Pass from a complete chain of pairs to its dual chain of quotients and
//! verify the exchange of invariants: at every level the torsion length of
//! the quotient equals the cokernel length of the pair, the locally free
//! part splits with the negated exponents of the pair's kernel, and the
//! final quotient is locally free.

use p1pairs::binform::BinForm;
use p1pairs::duality::{dual_chain, dualize_pair, validate_quot_chain, verify_duality};
use p1pairs::pairchain::{extend_chain, PsiChain, StablePair};
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

    let (rho, g0) = dualize_pair(&chain.base);
    let (r, d) = g0.rank_degree();
    println!(
        "dual of the base pair: rank {r}, degree {d}, torsion length {} (surjection: {})",
        g0.torsion_length(),
        rho.is_surjective()
    );

    let quot = dual_chain(&chain, &mut rng);
    for (i, level) in quot.levels.iter().enumerate() {
        let (tf, _) = level.torsion_free_quotient();
        let mut split = tf.splitting_type();
        split.sort();
        println!(
            "quotient level {i}: torsion length {}, locally free part splits as {:?}",
            level.torsion_length(),
            split
        );
    }

    let structure = validate_quot_chain(&quot, &mut rng);
    assert!(structure.ok(), "{:?}", structure.violations);
    println!("quotient chain structure: ok (strict torsion drop, exact extensions)");

    let duality = verify_duality(&chain, &quot, &mut rng);
    assert!(duality.ok(), "{:?}", duality.violations);
    println!("duality invariants match the chain level by level");
}
