//! Dual quotient chains: from a chain of pairs to a tower of quotients of
//! V^∨⊗O trading torsion for local freeness.
//!
//! Dualizing the base pair gives ρ: V^∨⊗O → 𝒢₀. The kernels of the chain
//! steps form a flag of locally free subsheaves 𝒦_m ⊂ … ⊂ 𝒦₀ ⊂ V⊗O, and
//! each inclusion 𝒦_{i+1} ⊂ 𝒦_i is a free resolution of the torsion sheaf
//! 𝒫_i = 𝒦_i/𝒦_{i+1}, which is also the image of step i+1. Transposing the
//! resolution yields 0 → 𝒦_i^∨ → 𝒦_{i+1}^∨ → Ext¹(𝒫_i) → 0; pulling that
//! extension back along the surjection Ext¹(𝒯_i) → Ext¹(𝒫_i) (the dual of
//! the inclusion 𝒫_i ⊂ 𝒯_i) produces the next quotient level 𝒢_{i+1} as a
//! fiber product. Its torsion part is Ext¹(𝒯_{i+1}) and its torsion-free
//! part is 𝒦_{i+1}^∨, so torsion strictly drains away until the last level
//! is locally free.

use crate::binform::BinForm;
use crate::pairchain::{PsiChain, StablePair};
use crate::qmat::{inverse, right_inverse, solve, QMat};
use crate::rng::Rng;
use crate::tailmod::{
    iso_test, map_of_free, transposed_presentation_map, IsoResult, Presentation, SheafMap,
    TailModule,
};

/// One extension level of a quotient chain: the inclusion of the previous
/// torsion-free part (modelled on the dual of the previous kernel) and the
/// projection onto the previous torsion part (modelled on Ext¹ of the
/// previous cokernel).
#[derive(Debug, Clone)]
pub struct Extension {
    pub incl: SheafMap,
    pub proj: SheafMap,
}

/// A quotient chain: the base quotient ρ: V^∨⊗O → 𝒢₀ and the tower
/// 𝒢₀, …, 𝒢_m with the connecting extension data.
#[derive(Debug, Clone)]
pub struct QuotChain {
    pub rho: SheafMap,
    pub levels: Vec<TailModule>,
    pub exts: Vec<Extension>,
}

impl QuotChain {
    pub fn m(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Dualize a single pair: 𝒢₀ is the cokernel of the transposed-forms map
/// O(−n) → V^∨⊗O, with the quotient map ρ.
pub fn dualize_pair(p: &StablePair) -> (SheafMap, TailModule) {
    let n = p.n as i64;
    let w = n + 3;
    let forms: Vec<Vec<BinForm>> = p.forms.iter().map(|f| vec![f.clone()]).collect();
    let phidual = map_of_free(&vec![0; p.nv], &[-n], &forms, -w, w);
    let (g0, rho) = phidual.cokernel();
    let (r, d) = g0.rank_degree();
    assert_eq!(r, p.nv as i64 - 1, "dual quotient has the wrong rank");
    assert_eq!(d, n, "dual quotient has the wrong degree");
    (rho, g0)
}

/// Isomorphism test on the common window of two modules.
fn iso_on_common(a: &TailModule, b: &TailModule, rng: &mut Rng) -> bool {
    let lo = a.d_lo.max(b.d_lo);
    let hi = a.d_hi().min(b.d_hi());
    let (x, y) = (a.restrict_window(lo, hi), b.restrict_window(lo, hi));
    if x.dims != y.dims {
        return false;
    }
    if x.is_zero_module() {
        return true;
    }
    matches!(iso_test(&x, &y, rng), IsoResult::Iso(_))
}

/// Column offset of the block of generator `c` in a free module with the
/// given twists, at degree d.
fn gen_offset(twists: &[i64], c: usize, d: i64) -> usize {
    twists[..c].iter().map(|t| (t + d + 1).max(0) as usize).sum()
}

/// Read off the binary forms of a map into a free module, given the images
/// of the source generators (each a column vector at the generator's degree).
fn forms_from_images(
    dst_twists: &[i64],
    src_twists: &[i64],
    images: &[QMat],
) -> Vec<Vec<BinForm>> {
    let mut forms: Vec<Vec<BinForm>> =
        dst_twists.iter().map(|_| Vec::with_capacity(src_twists.len())).collect();
    for (c, &s) in src_twists.iter().enumerate() {
        let d = -s;
        let v = &images[c];
        let mut row0 = 0usize;
        for (i, &t) in dst_twists.iter().enumerate() {
            let len = (t + d + 1).max(0) as usize;
            let coeffs = (0..len).map(|l| v.get(row0 + l, 0).clone()).collect();
            forms[i].push(BinForm::from_coeffs(coeffs));
            row0 += len;
        }
        assert_eq!(row0, v.rows, "image vector does not match the free layout");
    }
    forms
}

/// The binary forms of a map between free modules, read off at the source
/// generators' degrees (which must lie inside the map's window).
fn forms_of_free_map(f: &SheafMap, dst_twists: &[i64], src_twists: &[i64]) -> Vec<Vec<BinForm>> {
    let images: Vec<QMat> = src_twists
        .iter()
        .enumerate()
        .map(|(c, &s)| {
            let d = -s;
            assert!(
                d >= f.source.d_lo && d <= f.source.d_hi(),
                "generator degree outside the window"
            );
            f.maps[f.source.idx(d)].select_columns(&[gen_offset(src_twists, c, d)])
        })
        .collect();
    forms_from_images(dst_twists, src_twists, &images)
}

/// Lift a composite `through ∘ ? = target_vals` at each source generator:
/// for generator c of `src_twists` at degree d, solve
/// `through.maps[d] · w = vals.maps[d] · (generator column)`.
fn lift_at_generators(src_twists: &[i64], vals: &SheafMap, through: &SheafMap) -> Vec<QMat> {
    src_twists
        .iter()
        .enumerate()
        .map(|(c, &s)| {
            let d = -s;
            assert!(d >= vals.source.d_lo && d <= vals.source.d_hi(), "window misses a generator");
            let v = vals.maps[vals.source.idx(d)].select_columns(&[gen_offset(src_twists, c, d)]);
            solve(&through.maps[through.source.idx(d)], &v)
                .expect("lift through the presentation failed; widen the window")
        })
        .collect()
}

fn negated(twists: &[i64]) -> Vec<i64> {
    twists.iter().map(|t| -t).collect()
}

fn transposed_forms(forms: &[Vec<BinForm>], ncols: usize) -> Vec<Vec<BinForm>> {
    (0..ncols).map(|j| forms.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Restrict a map to a common window with the given bounds.
fn restrict2(f: &SheafMap, lo: i64, hi: i64) -> SheafMap {
    f.restrict_window(lo, hi)
}

/// Build the full quotient chain dual to a chain of pairs, asserting the
/// structural contracts (torsion part = Ext¹ of the cokernel, torsion-free
/// part dual to the kernel, last level locally free).
pub fn dual_chain(c: &PsiChain, rng: &mut Rng) -> QuotChain {
    let n = c.base.n as i64;
    let w = n + 3;
    let (rho, g0) = dualize_pair(&c.base);
    let mut levels = vec![g0];
    let mut exts: Vec<Extension> = Vec::new();
    for i in 0..c.m() {
        let ki = &c.levels[i].kernel;
        let kip = &c.levels[i + 1].kernel;
        let lo = ki.d_lo.max(kip.d_lo);
        let hi = ki.d_hi().min(kip.d_hi());
        let inci = restrict2(&c.levels[i].incl_ambient, lo, hi);
        let incip = restrict2(&c.levels[i + 1].incl_ambient, lo, hi);
        // the inclusion of kernels, solved through the ambient embeddings
        let iota_maps: Vec<QMat> = (0..inci.maps.len())
            .map(|k| {
                solve(&inci.maps[k], &incip.maps[k])
                    .expect("kernel flag is not nested in the ambient module")
            })
            .collect();
        let iota = SheafMap::new(incip.source.clone(), inci.source.clone(), iota_maps);
        // free models of both kernels (locally free: relation-free covers)
        let (pres_i, cover_i) = iota.target.minimal_presentation();
        let (pres_ip, cover_ip) = iota.source.minimal_presentation();
        assert!(pres_i.rel_twists.is_empty(), "kernel is not locally free");
        assert!(pres_ip.rel_twists.is_empty(), "kernel is not locally free");
        // lift the inclusion to the free models
        let jmaps: Vec<QMat> = (0..cover_i.maps.len())
            .map(|k| {
                inverse(&cover_i.maps[k])
                    .expect("free cover of a locally free module must be invertible")
                    .mul(&iota.maps[k])
                    .mul(&cover_ip.maps[k])
            })
            .collect();
        let jmap = SheafMap::new(cover_ip.source.clone(), cover_i.source.clone(), jmaps);
        let forms_j = forms_of_free_map(&jmap, &pres_i.gen_twists, &pres_ip.gen_twists);
        // 𝒦_{i+1} → 𝒦_i is a free resolution of 𝒫_i = image of step i+1
        let pres_p = Presentation {
            gen_twists: pres_i.gen_twists.clone(),
            rel_twists: pres_ip.gen_twists.clone(),
            forms: forms_j,
        };
        let step = &c.steps[i];
        let (p_im, _) = step.image();
        {
            let regen = TailModule::from_presentation(&pres_p, p_im.d_lo, p_im.d_hi());
            assert_eq!(regen.dims, p_im.dims, "kernel quotient does not present the step image");
        }
        let t_i = &c.levels[i].coker;
        let (pres_t, cover_t) = t_i.minimal_presentation();
        // lift 𝒫_i ⊂ 𝒯_i to the presentations: on generators of 𝒫_i the
        // composite with the cover of 𝒦_i is the step map itself
        let lo2 = lo.max(step.source.d_lo).max(cover_t.source.d_lo);
        let hi2 = hi.min(step.source.d_hi()).min(cover_t.source.d_hi());
        let sc = restrict2(step, lo2, hi2).compose(&restrict2(&cover_i, lo2, hi2));
        let k0_images = lift_at_generators(&pres_p.gen_twists, &sc, &restrict2(&cover_t, lo2, hi2));
        let forms_k0 = forms_from_images(&pres_t.gen_twists, &pres_p.gen_twists, &k0_images);
        let l0 = 0i64.min(lo2);
        let h0 = c.levels[0].kernel.d_hi();
        let k0 = map_of_free(&pres_t.gen_twists, &pres_p.gen_twists, &forms_k0, l0, h0);
        let jw = map_of_free(&pres_i.gen_twists, &pres_ip.gen_twists, &pres_p.forms, l0, h0);
        let r_t = map_of_free(&pres_t.gen_twists, &pres_t.rel_twists, &pres_t.forms, l0, h0);
        // relation-level lift: κ₀ ∘ j factors through the relations of 𝒯_i
        let k0j = k0.compose(&jw);
        let k1_images = lift_at_generators(&pres_p.rel_twists, &k0j, &r_t);
        let forms_k1 = forms_from_images(&pres_t.rel_twists, &pres_p.rel_twists, &k1_images);
        let k1 = map_of_free(&pres_t.rel_twists, &pres_p.rel_twists, &forms_k1, l0, h0);
        assert_eq!(
            r_t.compose(&k1).maps,
            k0j.maps,
            "relation-level lift does not close the square"
        );
        // transpose: the two maps into Ext¹(𝒫_i)
        let (dp, _) = transposed_presentation_map(&pres_p, -w, w);
        let (extp, projp) = dp.cokernel();
        let (dt, _) = transposed_presentation_map(&pres_t, -w, w);
        let (extt, projt) = dt.cokernel();
        let k1t = map_of_free(
            &negated(&pres_p.rel_twists),
            &negated(&pres_t.rel_twists),
            &transposed_forms(&forms_k1, pres_p.rel_twists.len()),
            -w,
            w,
        );
        let lo4 = extp.d_lo.max(extt.d_lo);
        let hi4 = extp.d_hi().min(extt.d_hi());
        let projp_r = restrict2(&projp, lo4, hi4);
        let projt_r = restrict2(&projt, lo4, hi4);
        let k1t_r = restrict2(&k1t, lo4, hi4);
        // the surjection Ext¹(𝒯_i) → Ext¹(𝒫_i) dual to 𝒫_i ⊂ 𝒯_i
        let alpha_maps: Vec<QMat> = (0..projt_r.maps.len())
            .map(|k| {
                let a = projp_r.maps[k].mul(&k1t_r.maps[k]).mul(&right_inverse(&projt_r.maps[k]));
                assert_eq!(
                    a.mul(&projt_r.maps[k]),
                    projp_r.maps[k].mul(&k1t_r.maps[k]),
                    "dual of the torsion inclusion does not descend"
                );
                a
            })
            .collect();
        let alpha =
            SheafMap::new(projt_r.target.clone(), projp_r.target.clone(), alpha_maps);
        assert!(alpha.is_surjective(), "dual of the torsion inclusion must be surjective");
        // fiber product: 𝒢_{i+1} = ker(𝒦_{i+1}^∨ ⊕ Ext¹(𝒯_i) → Ext¹(𝒫_i))
        let kdual = projp_r.source.clone();
        let sum = kdual.direct_sum(&alpha.source);
        let diff_maps: Vec<QMat> = (0..projp_r.maps.len())
            .map(|k| {
                projp_r.maps[k].hstack(&alpha.maps[k].scale(&crate::rat::rat(-1)))
            })
            .collect();
        let diff = SheafMap::new(sum, projp_r.target.clone(), diff_maps);
        let (g, incl_g) = diff.kernel();
        // ζ data: 𝒦_i^∨ includes via the transposed resolution; the second
        // block projects onto Ext¹(𝒯_i)
        let dp_r = restrict2(&dp, g.d_lo, g.d_hi());
        let incl_maps: Vec<QMat> = (0..dp_r.maps.len())
            .map(|k| {
                let s = dp_r.maps[k].vstack(&QMat::zeros(
                    alpha.source.dims[alpha.source.idx(g.d_lo + k as i64)],
                    dp_r.maps[k].cols,
                ));
                solve(&incl_g.maps[k], &s)
                    .expect("dual of the previous kernel does not land in the fiber product")
            })
            .collect();
        let incl = SheafMap::new(dp_r.source.clone(), g.clone(), incl_maps);
        let extt_g = restrict2(
            &SheafMap::identity(&alpha.source),
            g.d_lo,
            g.d_hi(),
        )
        .source;
        let proj_maps: Vec<QMat> = (0..incl_g.maps.len())
            .map(|k| {
                let kd = kdual.dims[kdual.idx(g.d_lo + k as i64)];
                let tot = incl_g.maps[k].rows;
                incl_g.maps[k].select_rows(&(kd..tot).collect::<Vec<_>>())
            })
            .collect();
        let proj = SheafMap::new(g.clone(), extt_g, proj_maps);
        assert!(proj.is_surjective(), "fiber product must surject onto Ext¹ of the cokernel");
        assert!(incl.is_injective(), "dual of the previous kernel must inject");
        // structural contracts of the new level
        let t_next = &c.levels[i + 1].coker;
        let (tor, _) = g.torsion_inclusion();
        let ext_next = t_next.ext1(-w, w);
        assert!(
            iso_on_common(&tor, &ext_next, rng),
            "torsion part is not Ext¹ of the next cokernel"
        );
        let (tf, _) = g.torsion_free_quotient();
        let mut want: Vec<i64> = negated(&pres_ip.gen_twists);
        want.sort();
        let mut got = tf.splitting_type();
        got.sort();
        assert_eq!(got, want, "torsion-free part is not the dual of the next kernel");
        levels.push(g);
        exts.push(Extension { incl, proj });
    }
    assert_eq!(
        levels.last().unwrap().torsion_length(),
        0,
        "last level of a complete dual chain must be locally free"
    );
    QuotChain { rho, levels, exts }
}

/// Negative control: replace level 1 and the first extension by the split
/// direct sum of the torsion and torsion-free parts of level 0. On the
/// mutant the torsion length no longer drops across the first extension, so
/// structural validation must reject it. Requires at least one extension.
pub fn split_middle_mutant(q: &QuotChain) -> QuotChain {
    assert!(!q.exts.is_empty(), "the control needs a chain with an extension");
    let mut out = q.clone();
    let (tf0, _) = q.levels[0].torsion_free_quotient();
    let (tor0, _) = q.levels[0].torsion_inclusion();
    let lo = tf0.d_lo.max(tor0.d_lo);
    let hi = tf0.d_hi().min(tor0.d_hi());
    let (a, b) = (tf0.restrict_window(lo, hi), tor0.restrict_window(lo, hi));
    let split = a.direct_sum(&b);
    let incl_maps: Vec<QMat> = (lo..=hi)
        .map(|d| {
            let (da, db) = (a.dim_at(d), b.dim_at(d));
            QMat::identity(da).vstack(&QMat::zeros(db, da))
        })
        .collect();
    let proj_maps: Vec<QMat> = (lo..=hi)
        .map(|d| {
            let (da, db) = (a.dim_at(d), b.dim_at(d));
            QMat::zeros(db, da).hstack(&QMat::identity(db))
        })
        .collect();
    out.levels[1] = split.clone();
    out.exts[0] = Extension {
        incl: SheafMap::new(a, split.clone(), incl_maps),
        proj: SheafMap::new(split, b, proj_maps),
    };
    out
}

/// Per-clause validation report for a quotient chain; `torsion_profile`
/// records the torsion length at every level (the length at level 0 settles
/// membership in each locus "torsion length ≥ k").
#[derive(Debug, Clone, Default)]
pub struct QuotReport {
    pub violations: Vec<String>,
    pub torsion_profile: Vec<usize>,
}

impl QuotReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
    fn check(&mut self, cond: bool, what: &str) {
        if !cond {
            self.violations.push(what.to_string());
        }
    }
}

/// Validate the structure of a quotient chain: ρ surjective, torsion lengths
/// strictly decreasing to zero (only the last level locally free — for a
/// split extension the middle torsion would not drop, so the strict decrease
/// certifies non-splitness), and each extension short exact with ends
/// isomorphic to the previous level's torsion-free and torsion parts.
pub fn validate_quot_chain(q: &QuotChain, rng: &mut Rng) -> QuotReport {
    let mut rep = QuotReport::default();
    rep.torsion_profile = q.levels.iter().map(|g| g.torsion_length()).collect();
    rep.check(q.rho.is_surjective(), "base quotient map is surjective");
    rep.check(
        iso_on_common(&q.rho.target, &q.levels[0], rng),
        "base quotient target is the first level",
    );
    rep.check(q.exts.len() + 1 == q.levels.len(), "one extension per step");
    for i in 0..q.levels.len() - 1 {
        rep.check(
            rep.torsion_profile[i + 1] < rep.torsion_profile[i],
            "torsion length drops strictly at each level (non-split extension)",
        );
    }
    rep.check(
        *rep.torsion_profile.last().unwrap() == 0,
        "last level is locally free",
    );
    for (i, e) in q.exts.iter().enumerate() {
        let g = &q.levels[i + 1];
        rep.check(e.incl.is_injective(), "extension inclusion is injective");
        rep.check(e.proj.is_surjective(), "extension projection is surjective");
        let lo = e.incl.source.d_lo.max(e.proj.source.d_lo);
        let hi = e.incl.source.d_hi().min(e.proj.source.d_hi());
        let comp = restrict2(&e.proj, lo, hi).compose(&restrict2(&e.incl, lo, hi));
        rep.check(comp.is_zero(), "extension composite vanishes");
        for d in lo..=hi {
            rep.check(
                e.incl.source.dim_at(d) + e.proj.target.dim_at(d) == g.dim_at(d),
                "extension is exact in the middle",
            );
        }
        let (prev_tf, _) = q.levels[i].torsion_free_quotient();
        let (prev_tor, _) = q.levels[i].torsion_inclusion();
        rep.check(
            iso_on_common(&e.incl.source, &prev_tf, rng),
            "extension kernel is the previous torsion-free part",
        );
        rep.check(
            iso_on_common(&e.proj.target, &prev_tor, rng),
            "extension quotient is the previous torsion part",
        );
    }
    rep
}

/// Cross-check a quotient chain against the chain of pairs it should be dual
/// to: equal lengths, torsion lengths matching the cokernel lengths, negated
/// splitting types on the torsion-free parts, and the base level matching
/// the dual of the base pair.
pub fn verify_duality(c: &PsiChain, q: &QuotChain, rng: &mut Rng) -> QuotReport {
    let mut rep = QuotReport::default();
    rep.torsion_profile = q.levels.iter().map(|g| g.torsion_length()).collect();
    rep.check(q.levels.len() == c.m() + 1, "chain lengths agree");
    let levels = q.levels.len().min(c.m() + 1);
    for i in 0..levels {
        rep.check(
            q.levels[i].torsion_length() == c.levels[i].coker.torsion_length(),
            "torsion length equals the cokernel length at each level",
        );
        let (tf, _) = q.levels[i].torsion_free_quotient();
        let mut got = tf.splitting_type();
        got.sort();
        let mut want: Vec<i64> =
            c.levels[i].kernel.splitting_type().iter().map(|a| -a).collect();
        want.sort();
        rep.check(got == want, "torsion-free splitting is the negated kernel splitting");
    }
    let (_, g0) = dualize_pair(&c.base);
    rep.check(
        iso_on_common(&q.levels[0], &g0, rng),
        "first level matches the dual of the base pair",
    );
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairchain::{extend_chain, random_complete_chain, PsiChain};

    fn pair(forms: &[&[i64]], n: usize) -> StablePair {
        StablePair::new(
            forms.len(),
            n,
            forms.iter().map(|c| BinForm::from_ints(c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn dual_of_the_euler_pair_is_a_line_bundle() {
        let (rho, g0) = dualize_pair(&pair(&[&[1, 0], &[0, 1]], 1));
        assert!(rho.is_surjective());
        assert_eq!(g0.rank_degree(), (1, 1));
        assert_eq!(g0.torsion_length(), 0);
        assert_eq!(g0.splitting_type(), vec![1]);
    }

    #[test]
    fn dual_of_a_pair_with_common_zero_has_torsion() {
        // forms z0² and z0z1 share the zero at (0:1)
        let (_, g0) = dualize_pair(&pair(&[&[1, 0, 0], &[0, 1, 0]], 2));
        assert_eq!(g0.rank_degree(), (1, 2));
        assert_eq!(g0.torsion_length(), 1);
        let (tf, _) = g0.torsion_free_quotient();
        assert_eq!(tf.splitting_type(), vec![1]);
    }

    #[test]
    fn dual_torsion_length_matches_the_cokernel() {
        // forms z0² and 0: the cokernel of the pair has length 2
        let (_, g0) = dualize_pair(&pair(&[&[1, 0, 0], &[0, 0, 0]], 2));
        assert_eq!(g0.torsion_length(), 2);
    }

    #[test]
    fn surjective_pair_dualizes_to_a_single_locally_free_level() {
        let base = pair(&[&[1, 0, 0], &[0, 0, 1]], 2); // z0², z1²: coprime
        let c = PsiChain::new(base);
        assert!(c.is_complete());
        let mut rng = Rng::new(0);
        let q = dual_chain(&c, &mut rng);
        assert_eq!(q.m(), 0);
        assert_eq!(q.levels[0].torsion_length(), 0);
        assert!(validate_quot_chain(&q, &mut rng).ok());
    }

    fn example_chain() -> PsiChain {
        let mut rng = Rng::new(5);
        let mut c = PsiChain::new(pair(&[&[1, 0, 0], &[0, 1, 0]], 2));
        while !c.is_complete() {
            c = extend_chain(&c, &mut rng).unwrap();
        }
        c
    }

    #[test]
    fn dual_chain_of_the_common_zero_pair() {
        let c = example_chain();
        assert_eq!(c.m(), 1);
        let mut rng = Rng::new(1);
        let q = dual_chain(&c, &mut rng);
        let rep = validate_quot_chain(&q, &mut rng);
        assert!(rep.ok(), "{:?}", rep.violations);
        assert_eq!(rep.torsion_profile, vec![1, 0]);
        let dual_rep = verify_duality(&c, &q, &mut rng);
        assert!(dual_rep.ok(), "{:?}", dual_rep.violations);
        // kernel of the base splits as O(-1); its dual shows up downstairs
        assert_eq!(c.levels[0].kernel.splitting_type(), vec![-1]);
        let (tf0, _) = q.levels[0].torsion_free_quotient();
        assert_eq!(tf0.splitting_type(), vec![1]);
    }

    #[test]
    fn split_middle_level_is_rejected() {
        let c = example_chain();
        let mut rng = Rng::new(2);
        let q = split_middle_mutant(&dual_chain(&c, &mut rng));
        let rep = validate_quot_chain(&q, &mut rng);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.contains("drops strictly")), "{:?}", rep.violations);
    }

    #[test]
    fn truncated_quotient_chain_fails_verification() {
        let c = example_chain();
        let mut rng = Rng::new(3);
        let mut q = dual_chain(&c, &mut rng);
        q.levels.pop();
        q.exts.pop();
        let rep = verify_duality(&c, &q, &mut rng);
        assert!(rep.violations.iter().any(|v| v.contains("lengths agree")));
    }

    #[test]
    fn random_chains_dualize_with_all_contracts() {
        let rng = Rng::new(11);
        for (t, (nv, n)) in [(2usize, 2usize), (2, 3), (3, 2)].iter().enumerate() {
            let mut r = rng.child(t as u64);
            let c = random_complete_chain(&mut r, *nv, *n, 4);
            let q = dual_chain(&c, &mut r);
            let rep = validate_quot_chain(&q, &mut r);
            assert!(rep.ok(), "validate ({nv},{n}): {:?}", rep.violations);
            let rep2 = verify_duality(&c, &q, &mut r);
            assert!(rep2.ok(), "verify ({nv},{n}): {:?}", rep2.violations);
        }
    }
}
