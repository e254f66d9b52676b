//! Circuit matrices of the rank-`p` generalized hypergeometric equation in
//! the normalized basis whose λ-eigenvector of `M₁` is `(1, …, 1)`.
//!
//! Loop composition: continuation along `ρ∘σ` maps to `M_ρ · M_σ`, so
//! `M_∞ = (M₀ M₁)⁻¹`.

use num_rational::Rational64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::{half_precision_margin, product, BigComplex, CMatrix};
use crate::params::{format_rational, ExpParams, GhgParams};

/// Local exponents at `x = 0, 1, ∞`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiemannScheme {
    pub exponents_at_0: Vec<Rational64>,
    pub exponents_at_1: Vec<Rational64>,
    pub exponents_at_inf: Vec<Rational64>,
}

impl RiemannScheme {
    pub fn total(&self) -> Rational64 {
        self.exponents_at_0.iter().chain(&self.exponents_at_1).chain(&self.exponents_at_inf).sum()
    }

    /// Fuchs relation for three regular singular points: the exponents sum
    /// to `p(p−1)/2`.
    pub fn satisfies_fuchs(&self) -> bool {
        let p = self.exponents_at_0.len() as i64;
        self.total() == Rational64::from_integer(p * (p - 1) / 2)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let f = |v: &[Rational64]| v.iter().map(format_rational).collect::<Vec<_>>();
        json!({
            "kind": "riemann_scheme",
            "at_0": f(&self.exponents_at_0),
            "at_1": f(&self.exponents_at_1),
            "at_inf": f(&self.exponents_at_inf),
        })
    }
}

pub fn riemann_scheme(params: &GhgParams) -> RiemannScheme {
    let p = params.p();
    let one = Rational64::from_integer(1);
    let mut at_0 = vec![Rational64::from_integer(0)];
    at_0.extend(params.b.iter().map(|b| one - b));
    let mut at_1: Vec<Rational64> = (0..p as i64 - 1).map(Rational64::from_integer).collect();
    at_1.push(params.b.iter().sum::<Rational64>() - params.a.iter().sum::<Rational64>());
    RiemannScheme { exponents_at_0: at_0, exponents_at_1: at_1, exponents_at_inf: params.a.clone() }
}

/// `diag(1, B₁⁻¹, …, B_{p−1}⁻¹)`.
pub fn build_m0(exp: &ExpParams) -> CMatrix {
    let prec = exp.prec();
    let mut d = vec![BigComplex::one(prec)];
    d.extend(exp.b.iter().map(|b| b.recip()));
    CMatrix::diag(d)
}

/// Normalized invariant form `diag(1, h₁, …, h_{p−1})`.
pub fn build_h(exp: &ExpParams) -> CMatrix {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let a_minus_one: Vec<BigComplex> = exp.a.iter().map(|a| a - &one).collect();
    let prod_a_minus_one = product(&a_minus_one, prec);
    let mut d = vec![one.clone()];
    for (k, bk) in exp.b.iter().enumerate() {
        let mut num = BigComplex::one(prec);
        let mut den = bk.clone();
        for (j, bj) in exp.b.iter().enumerate() {
            if j != k {
                num = &num * &(bj - &one);
                den = &den * &(bj - bk);
            }
        }
        for a in &exp.a {
            num = &num * &(a - bk);
        }
        den = &den * &prod_a_minus_one;
        d.push(-(&num / &den));
    }
    CMatrix::diag(d)
}

/// `λ = ∏B / ∏A`.
pub fn lambda_ghg(exp: &ExpParams) -> BigComplex {
    let prec = exp.prec();
    &product(&exp.b, prec) / &product(&exp.a, prec)
}

/// Closed form of `Tr(H)`.
pub fn trace_h_closed_form(exp: &ExpParams) -> BigComplex {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let diff = &product(&exp.a, prec) - &product(&exp.b, prec);
    let bm1 = product(&exp.b.iter().map(|b| b - &one).collect::<Vec<_>>(), prec);
    let am1 = product(&exp.a.iter().map(|a| a - &one).collect::<Vec<_>>(), prec);
    &(&diff * &bm1) / &(&am1 * &product(&exp.b, prec))
}

/// Closed form of the reflection coefficient `(1 − λ)/Tr(H)`.
pub fn reflection_coefficient_closed_form(exp: &ExpParams) -> BigComplex {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let am1 = product(&exp.a.iter().map(|a| a - &one).collect::<Vec<_>>(), prec);
    let bm1 = product(&exp.b.iter().map(|b| b - &one).collect::<Vec<_>>(), prec);
    &(&am1 * &product(&exp.b, prec)) / &(&product(&exp.a, prec) * &bm1)
}

/// Complex reflection `id − ((1 − λ)/Tr H) · H ᵗ𝟙 𝟙` for diagonal `H`, i.e.
/// entry `(i, j) = δ_ij − (1 − λ) H_ii / Tr H`.
pub fn build_reflection(h: &CMatrix, lambda: &BigComplex) -> Result<CMatrix> {
    let prec = h.prec().max(lambda.prec());
    let tr = h.trace();
    let mag = tr.abs_f64();
    if mag <= half_precision_margin(prec) {
        return Err(Error::DegenerateForm { trace: mag });
    }
    let coef = &(&BigComplex::one(prec) - lambda) / &tr;
    let scaled: Vec<BigComplex> = (0..h.n()).map(|i| &coef * h.get(i, i)).collect();
    let one = BigComplex::one(prec);
    Ok(CMatrix::from_fn(h.n(), prec, |i, j| if i == j { &one - &scaled[i] } else { -&scaled[i] }))
}

/// The full normalized data for one parameter set.
#[derive(Clone, Debug)]
pub struct CircuitSetGhg {
    pub params: GhgParams,
    pub exp: ExpParams,
    pub m0: CMatrix,
    pub m1: CMatrix,
    pub h: CMatrix,
    pub lambda: BigComplex,
}

impl CircuitSetGhg {
    pub fn p(&self) -> usize {
        self.params.p()
    }

    pub fn prec(&self) -> u32 {
        self.m1.prec()
    }

    /// `M_∞ = (M₀ M₁)⁻¹`, derived on demand.
    pub fn m_inf(&self) -> Result<CMatrix> {
        self.m0.mul(&self.m1)?.inv()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "kind": "ghg_circuit_set",
            "p": self.p(),
            "params": self.params.to_json(),
            "lambda": self.lambda.to_decimal_strings(),
            "H": self.h.to_json(),
            "M0": self.m0.to_json(),
            "M1": self.m1.to_json(),
        })
    }
}

/// Builds `M₀`, `H`, `λ` and `M₁`. The parameters must already be validated.
pub fn build_circuit_set(params: &GhgParams, prec: u32) -> Result<CircuitSetGhg> {
    let exp = params.exponentiate(prec);
    let m0 = build_m0(&exp);
    let h = build_h(&exp);
    let lambda = lambda_ghg(&exp);
    let m1 = build_reflection(&h, &lambda)?;
    Ok(CircuitSetGhg { params: params.clone(), exp, m0, m1, h, lambda })
}

/// The explicit 2×2 matrix for `p = 2`, written out entry by entry.
pub fn explicit_p2_m1(exp: &ExpParams) -> CMatrix {
    assert_eq!(exp.a.len(), 2);
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let (a1, a2, b1) = (&exp.a[0], &exp.a[1], &exp.b[0]);
    let a1a2 = a1 * a2;
    let top = &(&(b1 * &(a1 - &one)) * &(a2 - &one)) / &(&a1a2 * &(b1 - &one));
    // second row carries the factor h, hence the sign
    let bottom = -(&(&(b1 - a1) * &(b1 - a2)) / &(&a1a2 * &(b1 - &one)));
    CMatrix::from_entries(2, vec![&one - &top, -&top, -&bottom, &one - &bottom]).expect("2x2")
}

/// `h` for `p = 2`, written out.
pub fn explicit_p2_h(exp: &ExpParams) -> BigComplex {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let (a1, a2, b1) = (&exp.a[0], &exp.a[1], &exp.b[0]);
    -(&(&(b1 - a1) * &(b1 - a2)) / &(&(b1 * &(a1 - &one)) * &(a2 - &one)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::det;

    const P: u32 = 256;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn example() -> CircuitSetGhg {
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5)], vec![r(1, 2)]).unwrap();
        build_circuit_set(&params, P).unwrap()
    }

    #[test]
    fn scheme_p2() {
        let s = riemann_scheme(&GhgParams::new(vec![r(1, 3), r(1, 5)], vec![r(1, 2)]).unwrap());
        assert_eq!(s.exponents_at_0, vec![r(0, 1), r(1, 2)]);
        assert_eq!(s.exponents_at_1, vec![r(0, 1), r(1, 2) - r(1, 3) - r(1, 5)]);
        assert_eq!(s.exponents_at_inf, vec![r(1, 3), r(1, 5)]);
        assert!(s.satisfies_fuchs());
    }

    #[test]
    fn scheme_p3() {
        let s = riemann_scheme(&GhgParams::new(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 4)]).unwrap());
        // 3/4 − 71/105 = 31/420
        assert_eq!(s.exponents_at_1, vec![r(0, 1), r(1, 1), r(31, 420)]);
        assert!(s.satisfies_fuchs());
    }

    #[test]
    fn m0_examples() {
        let e = GhgParams::new(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 3)]).unwrap().exponentiate(P);
        let m0 = build_m0(&e);
        assert_eq!(m0.get(0, 0), &BigComplex::one(P));
        assert_eq!(m0.get(1, 1), &BigComplex::from_int(-1, P));
        assert!((m0.get(2, 2) - &BigComplex::unit_phase(r(-1, 3), P)).abs_f64() < 1e-75);
        assert!(m0.is_diagonal());
    }

    #[test]
    fn h_p2_value() {
        // independently evaluated at 80 digits with mpmath
        let set = example();
        let h = set.h.get(1, 1);
        assert!((h.re().to_f64() + 0.7946544722917661).abs() < 1e-15);
        assert!(h.im().to_f64().abs() < 1e-60);
        assert!((h - &explicit_p2_h(&set.exp)).abs_f64() < 1e-70);
    }

    #[test]
    fn h_p2_trace_cross_check() {
        // tr(M₀M₁) = 1/A₁ + 1/A₂
        let set = example();
        let tr = set.m0.mul(&set.m1).unwrap().trace();
        let expected = &set.exp.a[0].recip() + &set.exp.a[1].recip();
        assert!((tr - expected).abs_f64() < 1e-70);
    }

    #[test]
    fn lambda_phase() {
        let set = example();
        let expected = BigComplex::unit_phase(r(-1, 30), P);
        assert!((&set.lambda - &expected).abs_f64() < 1e-70);
        assert!((set.lambda.abs_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reflection_matches_explicit_p2() {
        let set = example();
        assert!(set.m1.max_abs_diff(&explicit_p2_m1(&set.exp)).unwrap() < 1e-70);
    }

    #[test]
    fn opposite_sign_second_row_breaks_det() {
        let set = example();
        let m = explicit_p2_m1(&set.exp);
        assert!((det(&m) - &set.lambda).abs_f64() < 1e-70);
        // negate the rank-one part of the second row
        let two = BigComplex::from_int(2, P);
        let mut flipped = m.clone();
        flipped.set(1, 0, -m.get(1, 0));
        flipped.set(1, 1, &two - m.get(1, 1));
        assert!((det(&flipped) - &set.lambda).abs_f64() > 1e-3);
    }

    #[test]
    fn column_sums_are_lambda() {
        let set = example();
        for j in 0..2 {
            let s = set.m1.get(0, j) + set.m1.get(1, j);
            assert!((s - &set.lambda).abs_f64() < 1e-70);
        }
    }

    #[test]
    fn coefficient_and_trace_closed_forms() {
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5), r(2, 7)], vec![r(1, 2), r(3, 4)]).unwrap();
        let set = build_circuit_set(&params, P).unwrap();
        let tr = set.h.trace();
        assert!((&tr - &trace_h_closed_form(&set.exp)).abs_f64() < 1e-70);
        let coef = &(&BigComplex::one(P) - &set.lambda) / &tr;
        assert!((coef - reflection_coefficient_closed_form(&set.exp)).abs_f64() < 1e-70);
    }

    #[test]
    fn determinants() {
        let set = example();
        assert!((det(&set.m1) - &set.lambda).abs_f64() < 1e-70);
        let prod = set.m0.mul(&set.m1).unwrap();
        let inv_prod_a = product(&set.exp.a, P).recip();
        assert!((det(&prod) - inv_prod_a).abs_f64() < 1e-70);
        let m_inf = set.m_inf().unwrap();
        assert!(m_inf.mul(&prod).unwrap().max_abs_diff(&CMatrix::identity(2, P)).unwrap() < 1e-70);
    }

    #[test]
    fn unit_eigenvector_p2() {
        // (h, −1) is fixed by M₁
        let set = example();
        let v = vec![set.h.get(1, 1).clone(), BigComplex::from_int(-1, P)];
        let w = set.m1.left_mul_vec(&v).unwrap();
        assert!((&w[0] - &v[0]).abs_f64() < 1e-70 && (&w[1] - &v[1]).abs_f64() < 1e-70);
    }

    #[test]
    fn degenerate_trace_is_rejected() {
        let h = CMatrix::diag(vec![BigComplex::one(P), BigComplex::from_int(-1, P)]);
        assert!(matches!(build_reflection(&h, &BigComplex::i(P)), Err(Error::DegenerateForm { .. })));
    }
}
