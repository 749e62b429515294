//! Analyze a single stable pair: the two quadrics z0^2 and z0*z1 share a
//! common zero, so the evaluation map V ⊗ O → O(2) is not surjective. The
//! analysis reports the degree of the image, the length of the cokernel, and
//! the splitting type of the kernel.

use p1pairs::binform::BinForm;
use p1pairs::collin::{default_m, gamma, stratum_index};
use p1pairs::pairchain::{analyze, StablePair};
use p1pairs::qmat::rank;

fn main() {
    let pair = StablePair::new(
        2,
        2,
        vec![BinForm::from_ints(&[1, 0, 0]), BinForm::from_ints(&[0, 1, 0])],
    )
    .unwrap();

    let a = analyze(&pair);
    println!("pair: (z0^2, z0*z1) on the projective line");
    println!("image degree:      {}", a.deg_im);
    println!("cokernel length:   {}", a.coker_length);
    println!("kernel splitting:  {:?}", a.kernel_splitting);
    println!("surjective:        {}", a.surjective);

    let m = default_m(pair.n);
    println!(
        "evaluated at degree {}: section-matrix rank {} => stratum index {}",
        m,
        rank(&gamma(&pair, m)),
        stratum_index(&pair, m)
    );

    assert_eq!(a.deg_im, 1);
    assert_eq!(a.coker_length, 1);
    assert_eq!(a.kernel_splitting, vec![-1]);
    assert_eq!(stratum_index(&pair, m), 1);
    println!("all assertions passed");
}
