//! Homogeneous binary forms in two variables z0, z1 with rational
//! coefficients, stored densely by the exponent of z1.

use crate::qmat::QMat;
use crate::rat::{format_rat, parse_rat, rat_one, rat_zero, Rat};
use crate::rng::Rng;
use num::Zero;
use serde::{Deserialize, Serialize};

/// A homogeneous form of a fixed degree, or the zero form (which has no
/// well-defined degree and is kept as its own variant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinForm {
    Zero,
    /// `coeffs[k]` multiplies z0^(d-k) z1^k; length d+1, not all zero.
    Form { coeffs: Vec<Rat> },
}

impl BinForm {
    pub fn zero() -> Self {
        BinForm::Zero
    }

    pub fn from_coeffs(coeffs: Vec<Rat>) -> Self {
        if coeffs.iter().all(|c| c.is_zero()) {
            BinForm::Zero
        } else {
            BinForm::Form { coeffs }
        }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        BinForm::from_coeffs(coeffs.iter().map(|&c| crate::rat::rat(c)).collect())
    }

    pub fn constant_one() -> Self {
        BinForm::Form { coeffs: vec![rat_one()] }
    }

    /// z0^(d-k) z1^k as a degree-d form.
    pub fn monomial(d: usize, k: usize) -> Self {
        assert!(k <= d);
        let mut coeffs = vec![rat_zero(); d + 1];
        coeffs[k] = rat_one();
        BinForm::Form { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BinForm::Zero)
    }

    /// Degree; `None` for the zero form.
    pub fn degree(&self) -> Option<usize> {
        match self {
            BinForm::Zero => None,
            BinForm::Form { coeffs } => Some(coeffs.len() - 1),
        }
    }

    pub fn coeffs(&self) -> &[Rat] {
        match self {
            BinForm::Zero => &[],
            BinForm::Form { coeffs } => coeffs,
        }
    }

    pub fn eval(&self, z0: &Rat, z1: &Rat) -> Rat {
        let BinForm::Form { coeffs } = self else { return rat_zero() };
        let d = coeffs.len() - 1;
        let mut acc = rat_zero();
        let mut p0 = rat_one(); // z0^(d-k), built from the top down
        let mut pow0: Vec<Rat> = Vec::with_capacity(d + 1);
        for _ in 0..=d {
            pow0.push(p0.clone());
            p0 = p0 * z0;
        }
        let mut p1 = rat_one();
        for (k, c) in coeffs.iter().enumerate() {
            acc = acc + c * &pow0[d - k] * &p1;
            p1 = p1 * z1;
        }
        acc
    }

    pub fn mul(&self, other: &BinForm) -> BinForm {
        let (BinForm::Form { coeffs: a }, BinForm::Form { coeffs: b }) = (self, other) else {
            return BinForm::Zero;
        };
        let mut out = vec![rat_zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] = &out[i + j] + x * y;
            }
        }
        BinForm::from_coeffs(out)
    }

    /// Sum of two forms of the same degree (zero is absorbing-neutral).
    pub fn add(&self, other: &BinForm) -> BinForm {
        match (self, other) {
            (BinForm::Zero, _) => other.clone(),
            (_, BinForm::Zero) => self.clone(),
            (BinForm::Form { coeffs: a }, BinForm::Form { coeffs: b }) => {
                assert_eq!(a.len(), b.len(), "degree mismatch in add");
                BinForm::from_coeffs(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
        }
    }

    pub fn scale(&self, c: &Rat) -> BinForm {
        if c.is_zero() {
            return BinForm::Zero;
        }
        match self {
            BinForm::Zero => BinForm::Zero,
            BinForm::Form { coeffs } => {
                BinForm::Form { coeffs: coeffs.iter().map(|x| x * c).collect() }
            }
        }
    }

    /// Divide first coefficient chain so the lowest nonzero coefficient is 1.
    pub fn normalize_monic(&self) -> BinForm {
        match self {
            BinForm::Zero => BinForm::Zero,
            BinForm::Form { coeffs } => {
                let lead = coeffs.iter().find(|c| !c.is_zero()).unwrap().clone();
                self.scale(&(rat_one() / lead))
            }
        }
    }

    /// Matrix of multiplication by `self` from degree-`d` forms to
    /// degree-`d + deg self` forms, in the monomial bases.
    pub fn mult_map(&self, d: usize) -> QMat {
        let e = self.degree().expect("mult_map of the zero form");
        QMat::from_fn(d + e + 1, d + 1, |i, j| {
            if i >= j && i - j <= e {
                self.coeffs()[i - j].clone()
            } else {
                rat_zero()
            }
        })
    }

    /// Exact divisor test with quotient.
    pub fn divide(&self, divisor: &BinForm) -> Option<BinForm> {
        let e = divisor.degree()?;
        let d = self.degree()?;
        if e > d {
            return None;
        }
        // solve mult_map(divisor, d - e) * q = self
        let m = divisor.mult_map(d - e);
        let rhs = QMat::from_fn(d + 1, 1, |i, _| self.coeffs()[i].clone());
        let q = crate::qmat::solve(&m, &rhs)?;
        let qf = BinForm::from_coeffs((0..=(d - e)).map(|i| q.get(i, 0).clone()).collect());
        if self == &divisor.mul(&qf) {
            Some(qf)
        } else {
            None
        }
    }

    pub fn gcd(&self, other: &BinForm) -> BinForm {
        match (self, other) {
            (BinForm::Zero, _) => other.normalize_monic(),
            (_, BinForm::Zero) => self.normalize_monic(),
            _ => {
                // strip common powers of z1 (low-end zeros) and z0 (high-end
                // zeros), run univariate Euclid on the dehomogenizations.
                let val1 = |f: &BinForm| f.coeffs().iter().position(|c| !c.is_zero()).unwrap();
                let val0 = |f: &BinForm| {
                    let c = f.coeffs();
                    c.len() - 1 - c.iter().rposition(|x| !x.is_zero()).unwrap()
                };
                let v1 = val1(self).min(val1(other));
                let v0 = val0(self).min(val0(other));
                let core = |f: &BinForm| -> Vec<Rat> {
                    let c = f.coeffs();
                    c[val1(f)..=(c.len() - 1 - val0(f))].to_vec()
                };
                let mut a = core(self);
                let mut b = core(other);
                // univariate Euclid in t = z1/z0 on the stripped cores
                while !b.iter().all(|c| c.is_zero()) {
                    let r = poly_rem(&a, &b);
                    a = b;
                    b = r;
                }
                // trim trailing zeros: the homogeneous degree is the degree
                // of the dehomogenized gcd, not the working-buffer length
                let alen = a.iter().rposition(|c| !c.is_zero()).unwrap() + 1;
                a.truncate(alen);
                let mut g = vec![rat_zero(); v1];
                g.extend(a);
                g.extend(vec![rat_zero(); v0]);
                BinForm::from_coeffs(g).normalize_monic()
            }
        }
    }

    pub fn random(rng: &mut Rng, degree: usize, coeff_bound: i64) -> BinForm {
        loop {
            let coeffs: Vec<Rat> =
                (0..=degree).map(|_| crate::rat::rat(rng.int_in(coeff_bound))).collect();
            if coeffs.iter().any(|c| !c.is_zero()) {
                return BinForm::Form { coeffs };
            }
        }
    }
}

/// Remainder of univariate division, coefficients by ascending degree.
fn poly_rem(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let bl = b.iter().rposition(|c| !c.is_zero()).unwrap();
    let mut r = a.to_vec();
    loop {
        let rl = match r.iter().rposition(|c| !c.is_zero()) {
            Some(x) => x,
            None => return vec![],
        };
        if rl < bl {
            return r;
        }
        let f = &r[rl] / &b[bl];
        for i in 0..=bl {
            r[rl - bl + i] = &r[rl - bl + i] - &f * &b[i];
        }
    }
}

/// gcd of a nonempty list of forms, skipping zero forms; `Zero` when all are.
pub fn gcd_many(forms: &[BinForm]) -> BinForm {
    forms.iter().fold(BinForm::Zero, |acc, f| acc.gcd(f))
}

/// Serialized shape: a list of coefficient strings, empty for the zero form.
#[derive(Serialize, Deserialize)]
pub struct BinFormJson(pub Vec<String>);

impl From<&BinForm> for BinFormJson {
    fn from(f: &BinForm) -> Self {
        BinFormJson(f.coeffs().iter().map(format_rat).collect())
    }
}

impl BinFormJson {
    pub fn decode(&self) -> Result<BinForm, String> {
        let coeffs = self.0.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(BinForm::from_coeffs(coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::rank;
    use crate::rat::rat;

    #[test]
    fn degree_and_zero() {
        assert_eq!(BinForm::from_ints(&[0, 0]), BinForm::Zero);
        assert_eq!(BinForm::from_ints(&[1, 0, 2]).degree(), Some(2));
        assert_eq!(BinForm::Zero.degree(), None);
    }

    #[test]
    fn multiplication() {
        // (z0 + z1)^2 = z0^2 + 2 z0 z1 + z1^2
        let f = BinForm::from_ints(&[1, 1]);
        assert_eq!(f.mul(&f), BinForm::from_ints(&[1, 2, 1]));
        assert_eq!(f.mul(&BinForm::Zero), BinForm::Zero);
    }

    #[test]
    fn evaluation() {
        let f = BinForm::from_ints(&[1, 2, 1]);
        assert_eq!(f.eval(&rat(1), &rat(1)), rat(4));
        assert_eq!(f.eval(&rat(1), &rat(-1)), rat(0));
        assert_eq!(f.eval(&rat(0), &rat(1)), rat(1));
    }

    #[test]
    fn gcd_cases() {
        // by hand: gcd(z0 z1, z1^2) = z1
        let a = BinForm::from_ints(&[0, 1, 0]);
        let b = BinForm::from_ints(&[0, 0, 1]);
        assert_eq!(a.gcd(&b), BinForm::from_ints(&[0, 1]));
        // coprime forms
        let c = BinForm::from_ints(&[1, 0]); // z0
        let d = BinForm::from_ints(&[0, 1]); // z1
        assert_eq!(c.gcd(&d), BinForm::constant_one());
        // gcd((z0+z1)^2 z0, (z0+z1) z1) = z0 + z1
        let s = BinForm::from_ints(&[1, 1]);
        let p = s.mul(&s).mul(&c);
        let q = s.mul(&d);
        assert_eq!(p.gcd(&q), s);
        // zero absorbs
        assert_eq!(BinForm::Zero.gcd(&p.normalize_monic()), p.normalize_monic());
        assert_eq!(BinForm::Zero.gcd(&BinForm::Zero), BinForm::Zero);
        // coprime dense forms: the gcd must be the constant, not a padded
        // degree-n form (regression: trailing zeros in the Euclid buffer)
        let e = BinForm::from_ints(&[-5, 1, 7]);
        let f = BinForm::from_ints(&[6, 9, -6]);
        assert_eq!(e.gcd(&f), BinForm::constant_one());
    }

    #[test]
    fn gcd_many_and_divide() {
        let s = BinForm::from_ints(&[1, 2]);
        let fs = vec![
            s.mul(&BinForm::from_ints(&[3, 1])),
            s.mul(&BinForm::from_ints(&[0, 5])),
            BinForm::Zero,
        ];
        assert_eq!(gcd_many(&fs), s.normalize_monic());
        let q = fs[0].divide(&s).unwrap();
        assert_eq!(s.mul(&q), fs[0]);
        assert!(fs[1].divide(&BinForm::from_ints(&[1, 0, 0])).is_none());
    }

    #[test]
    fn mult_map_shape_and_rank() {
        // multiplication by a nonzero form is injective on forms
        let f = BinForm::from_ints(&[1, 0, -2]);
        for d in 0..4 {
            let m = f.mult_map(d);
            assert_eq!((m.rows, m.cols), (d + 3, d + 1));
            assert_eq!(rank(&m), d + 1);
        }
        // against eval: (f * g)(1,2) = f(1,2) g(1,2)
        let g = BinForm::from_ints(&[2, 1]);
        let prod = f.mul(&g);
        assert_eq!(prod.eval(&rat(1), &rat(2)), f.eval(&rat(1), &rat(2)) * g.eval(&rat(1), &rat(2)));
    }

    #[test]
    fn json_roundtrip() {
        let f = BinForm::from_coeffs(vec![rat(1), crate::rat::rat_frac(-3, 2), rat(0)]);
        let enc = serde_json::to_string(&BinFormJson::from(&f)).unwrap();
        let dec: BinFormJson = serde_json::from_str(&enc).unwrap();
        assert_eq!(dec.decode().unwrap(), f);
    }
}
