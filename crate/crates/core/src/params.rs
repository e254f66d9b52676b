//! Rational exponent parameters, the non-integrality conditions, the map to
//! the unit circle and the ∨-involution.

use std::fmt;

use num_rational::Rational64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::{BigComplex, CMatrix};

/// Largest `m` accepted by [`validate_fc`] (the subset scan is `2^m`).
pub const FC_VALIDATE_MAX_M: usize = 16;

/// Parses `"u/d"` or `"u"`.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(n, d))
        }
        None => s.parse::<i64>().map(Rational64::from_integer).map_err(|_| bad()),
    }
}

/// Comma-separated list of rationals.
pub fn parse_rational_list(s: &str) -> Result<Vec<Rational64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_rational).collect()
}

pub fn format_rational(r: &Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn is_integer(r: &Rational64) -> bool {
    r.is_integer()
}

fn sub(i: usize) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    i.to_string().chars().map(|c| DIGITS[c.to_digit(10).unwrap() as usize]).collect()
}

/// One failed non-integrality condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub expression: String,
    #[serde(serialize_with = "ser_rational")]
    pub value: Rational64,
}

fn ser_rational<S: serde::Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} ∈ ℤ", self.expression, format_rational(&self.value))
    }
}

/// Parameters `a₁..a_p`, `b₁..b_{p−1}` of the rank-`p` hypergeometric equation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GhgParams {
    pub a: Vec<Rational64>,
    pub b: Vec<Rational64>,
}

impl GhgParams {
    pub fn new(a: Vec<Rational64>, b: Vec<Rational64>) -> Result<Self> {
        if a.len() < 2 || b.len() + 1 != a.len() {
            return Err(Error::Parse(format!(
                "expected p ≥ 2 upper and p − 1 lower parameters, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(GhgParams { a, b })
    }

    /// Constructs and validates in one go.
    pub fn validated(a: Vec<Rational64>, b: Vec<Rational64>) -> Result<Self> {
        let params = Self::new(a, b)?;
        let violations = validate_ghg(&params);
        if violations.is_empty() {
            Ok(params)
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn exponentiate(&self, prec: u32) -> ExpParams {
        ExpParams {
            a: self.a.iter().map(|r| BigComplex::unit_phase(*r, prec)).collect(),
            b: self.b.iter().map(|r| BigComplex::unit_phase(*r, prec)).collect(),
            source: ParamSource::Ghg(self.clone()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "system": "ghg",
            "a": self.a.iter().map(format_rational).collect::<Vec<_>>(),
            "b": self.b.iter().map(format_rational).collect::<Vec<_>>(),
        })
    }
}

/// Parameters `a₁, a₂, b₁..b_m` of Lauricella's F_C system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FcParams {
    pub a1: Rational64,
    pub a2: Rational64,
    pub b: Vec<Rational64>,
}

impl FcParams {
    pub fn new(a1: Rational64, a2: Rational64, b: Vec<Rational64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Parse("F_C needs at least one lower parameter".into()));
        }
        Ok(FcParams { a1, a2, b })
    }

    pub fn validated(a1: Rational64, a2: Rational64, b: Vec<Rational64>) -> Result<Self> {
        let params = Self::new(a1, a2, b)?;
        let violations = validate_fc(&params)?;
        if violations.is_empty() {
            Ok(params)
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn exponentiate(&self, prec: u32) -> ExpParams {
        ExpParams {
            a: vec![BigComplex::unit_phase(self.a1, prec), BigComplex::unit_phase(self.a2, prec)],
            b: self.b.iter().map(|r| BigComplex::unit_phase(*r, prec)).collect(),
            source: ParamSource::Fc(self.clone()),
        }
    }

    /// The `(m−1)`-variable system obtained by dropping the last variable.
    pub fn truncated(&self) -> Option<FcParams> {
        (self.m() >= 2).then(|| FcParams { a1: self.a1, a2: self.a2, b: self.b[..self.m() - 1].to_vec() })
    }

    /// The `(m−1)`-variable system with `(a₁, a₂) → (a₁ − b_m, a₂ − b_m)`.
    pub fn shifted(&self) -> Option<FcParams> {
        let bm = *self.b.last()?;
        (self.m() >= 2).then(|| FcParams {
            a1: self.a1 - bm,
            a2: self.a2 - bm,
            b: self.b[..self.m() - 1].to_vec(),
        })
    }

    /// The m = 1 system viewed as ₂F₁ parameters.
    pub fn as_ghg(&self) -> Option<GhgParams> {
        (self.m() == 1).then(|| GhgParams { a: vec![self.a1, self.a2], b: self.b.clone() })
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "system": "fc",
            "a": [format_rational(&self.a1), format_rational(&self.a2)],
            "b": self.b.iter().map(format_rational).collect::<Vec<_>>(),
        })
    }
}

/// Either parameter family; used for JSON input and report context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamSource {
    Ghg(GhgParams),
    Fc(FcParams),
}

impl ParamSource {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParamSource::Ghg(p) => p.to_json(),
            ParamSource::Fc(p) => p.to_json(),
        }
    }

    /// Reads `{"system":"ghg"|"fc","a":[...],"b":[...]}`.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            system: String,
            a: Vec<String>,
            b: Vec<String>,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        let a = raw.a.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
        let b = raw.b.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
        match raw.system.as_str() {
            "ghg" => Ok(ParamSource::Ghg(GhgParams::new(a, b)?)),
            "fc" => {
                if a.len() != 2 {
                    return Err(Error::Parse(format!("F_C takes two upper parameters, got {}", a.len())));
                }
                Ok(ParamSource::Fc(FcParams::new(a[0], a[1], b)?))
            }
            other => Err(Error::Parse(format!("unknown system `{other}`"))),
        }
    }
}

/// Non-integrality of `a_i`, `b_j`, `a_i − b_j`, `b_j − b_j'` and `Σa − Σb`.
pub fn validate_ghg(params: &GhgParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |expression: String, value: Rational64| {
        if is_integer(&value) {
            out.push(Violation { expression, value });
        }
    };
    for (i, a) in params.a.iter().enumerate() {
        push(format!("a{}", sub(i + 1)), *a);
    }
    for (j, b) in params.b.iter().enumerate() {
        push(format!("b{}", sub(j + 1)), *b);
    }
    for (i, a) in params.a.iter().enumerate() {
        for (j, b) in params.b.iter().enumerate() {
            push(format!("a{}−b{}", sub(i + 1), sub(j + 1)), a - b);
        }
    }
    for j in 0..params.b.len() {
        for k in (j + 1)..params.b.len() {
            push(format!("b{}−b{}", sub(j + 1), sub(k + 1)), params.b[j] - params.b[k]);
        }
    }
    let total: Rational64 = params.a.iter().sum::<Rational64>() - params.b.iter().sum::<Rational64>();
    push("Σa−Σb".to_string(), total);
    out
}

/// Non-integrality of `b_j`, `a_i − Σ_{j∈J} b_j` for every `J ⊆ {1..m}` and
/// `2(a₁ + a₂ − Σb)`.
pub fn validate_fc(params: &FcParams) -> Result<Vec<Violation>> {
    let m = params.m();
    if m > FC_VALIDATE_MAX_M {
        return Err(Error::MTooLarge { m, max: FC_VALIDATE_MAX_M });
    }
    let mut out = Vec::new();
    let mut push = |expression: String, value: Rational64| {
        if is_integer(&value) {
            out.push(Violation { expression, value });
        }
    };
    for (j, b) in params.b.iter().enumerate() {
        push(format!("b{}", sub(j + 1)), *b);
    }
    for mask in 0u32..(1u32 << m) {
        let members: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let bsum: Rational64 = members.iter().map(|&i| params.b[i]).sum();
        let label = match members.len() {
            0 => String::new(),
            1 => format!("−b{}", sub(members[0] + 1)),
            _ => format!(
                "−({})",
                members.iter().map(|&i| format!("b{}", sub(i + 1))).collect::<Vec<_>>().join("+")
            ),
        };
        push(format!("a₁{label}"), params.a1 - bsum);
        push(format!("a₂{label}"), params.a2 - bsum);
    }
    let total: Rational64 = params.a1 + params.a2 - params.b.iter().sum::<Rational64>();
    push("2(a₁+a₂−Σb)".to_string(), total * 2);
    Ok(out)
}

/// Unit-circle values `A_i = e^{2πi a_i}`, `B_j = e^{2πi b_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpParams {
    pub a: Vec<BigComplex>,
    pub b: Vec<BigComplex>,
    pub source: ParamSource,
}

impl ExpParams {
    pub fn prec(&self) -> u32 {
        self.a.iter().chain(&self.b).map(|x| x.prec()).max().unwrap_or(crate::numerics::DEFAULT_PRECISION)
    }

    /// Smallest separation among the pairs that validation keeps apart:
    /// `|A_i − 1|`, `|B_j − 1|` and, for the rank-`p` system, `|A_i − B_j|`,
    /// `|B_j − B_j'|`, `|∏A − ∏B|`.
    pub fn min_separation(&self) -> f64 {
        let prec = self.prec();
        let one = BigComplex::one(prec);
        let mut seps: Vec<f64> = self.a.iter().chain(&self.b).map(|x| (x - &one).abs_f64()).collect();
        if let ParamSource::Ghg(_) = self.source {
            for a in &self.a {
                for b in &self.b {
                    seps.push((a - b).abs_f64());
                }
            }
            for j in 0..self.b.len() {
                for k in (j + 1)..self.b.len() {
                    seps.push((&self.b[j] - &self.b[k]).abs_f64());
                }
            }
            let pa = crate::numerics::product(&self.a, prec);
            let pb = crate::numerics::product(&self.b, prec);
            seps.push((pa - pb).abs_f64());
        }
        seps.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// The ∨-involution `z(a, b) ↦ z(−a, −b)`. With real parameters it is
/// complex conjugation on values built from `A_i`, `B_j`.
pub trait Vee {
    fn vee(&self) -> Self;
}

impl Vee for BigComplex {
    fn vee(&self) -> Self {
        self.conj()
    }
}

impl Vee for CMatrix {
    fn vee(&self) -> Self {
        self.conj()
    }
}

impl Vee for Vec<BigComplex> {
    fn vee(&self) -> Self {
        self.iter().map(|x| x.conj()).collect()
    }
}

/// Uniform rational with denominator in `1..=12` and value in `[−1, 1]`.
pub fn random_rational<R: Rng + ?Sized>(rng: &mut R) -> Rational64 {
    let d: i64 = rng.gen_range(1..=12);
    let n: i64 = rng.gen_range(-d..=d);
    Rational64::new(n, d)
}

const MAX_REJECTIONS: usize = 1_000_000;

/// Rejection-samples validated rank-`p` parameters.
pub fn random_ghg<R: Rng + ?Sized>(rng: &mut R, p: usize) -> GhgParams {
    for _ in 0..MAX_REJECTIONS {
        let a: Vec<_> = (0..p).map(|_| random_rational(rng)).collect();
        let b: Vec<_> = (0..p - 1).map(|_| random_rational(rng)).collect();
        let params = GhgParams { a, b };
        if validate_ghg(&params).is_empty() {
            return params;
        }
    }
    panic!("no valid rank-{p} parameters after {MAX_REJECTIONS} draws")
}

/// Rejection-samples validated `m`-variable F_C parameters.
pub fn random_fc<R: Rng + ?Sized>(rng: &mut R, m: usize) -> FcParams {
    assert!(m >= 1 && m <= FC_VALIDATE_MAX_M);
    for _ in 0..MAX_REJECTIONS {
        let params = FcParams {
            a1: random_rational(rng),
            a2: random_rational(rng),
            b: (0..m).map(|_| random_rational(rng)).collect(),
        };
        if validate_fc(&params).map(|v| v.is_empty()).unwrap_or(false) {
            return params;
        }
    }
    panic!("no valid {m}-variable F_C parameters after {MAX_REJECTIONS} draws")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("1/3").unwrap(), r(1, 3));
        assert_eq!(parse_rational(" -2/4 ").unwrap(), r(-1, 2));
        assert_eq!(parse_rational("5").unwrap(), r(5, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!(parse_rational_list("1/3,1/5").unwrap(), vec![r(1, 3), r(1, 5)]);
    }

    #[test]
    fn ghg_validation_examples() {
        let ok = GhgParams::new(vec![r(1, 3), r(1, 5)], vec![r(1, 2)]).unwrap();
        assert!(validate_ghg(&ok).is_empty());

        let resonant = GhgParams::new(vec![r(1, 2), r(1, 3)], vec![r(1, 2)]).unwrap();
        let v = validate_ghg(&resonant);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].expression, "a₁−b₁");
        assert_eq!(v[0].value, r(0, 1));
        assert_eq!(v[0].to_string(), "a₁−b₁ = 0 ∈ ℤ");

        let equal_b = GhgParams::new(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 2)]).unwrap();
        let v = validate_ghg(&equal_b);
        assert!(v.iter().any(|x| x.expression == "b₁−b₂"));
    }

    #[test]
    fn ghg_reports_every_violation() {
        let bad = GhgParams::new(vec![r(1, 1), r(1, 2)], vec![r(1, 2)]).unwrap();
        let names: Vec<_> = validate_ghg(&bad).into_iter().map(|v| v.expression).collect();
        assert!(names.contains(&"a₁".to_string()));
        assert!(names.contains(&"a₂−b₁".to_string()));
        assert!(names.contains(&"Σa−Σb".to_string()));
    }

    #[test]
    fn fc_validation_examples() {
        let ok = FcParams::new(r(1, 3), r(1, 5), vec![r(1, 2)]).unwrap();
        assert!(validate_fc(&ok).unwrap().is_empty());

        let ok2 = FcParams::new(r(1, 3), r(1, 5), vec![r(1, 2), r(1, 7)]).unwrap();
        // 2(1/3 + 1/5 − 1/2 − 1/7) = −23/105
        assert_eq!((ok2.a1 + ok2.a2 - ok2.b[0] - ok2.b[1]) * 2, r(-23, 105));
        assert!(validate_fc(&ok2).unwrap().is_empty());

        let resonant = FcParams::new(r(3, 4), r(1, 5), vec![r(1, 2), r(1, 4)]).unwrap();
        let v = validate_fc(&resonant).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].expression, "a₁−(b₁+b₂)");
        assert_eq!(v[0].value, r(0, 1));
    }

    #[test]
    fn fc_factor_two_is_honored() {
        // a₁ + a₂ − b₁ = 1/2 is not an integer but twice it is
        let p = FcParams::new(r(1, 3), r(1, 3), vec![r(1, 6)]).unwrap();
        let v = validate_fc(&p).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].expression, "2(a₁+a₂−Σb)");
    }

    #[test]
    fn fc_too_many_variables() {
        let p = FcParams::new(r(1, 3), r(1, 5), vec![r(1, 2); 17]).unwrap();
        assert!(matches!(validate_fc(&p), Err(Error::MTooLarge { m: 17, .. })));
    }

    #[test]
    fn exponentiate_examples() {
        let p = GhgParams::new(vec![r(1, 2), r(1, 3)], vec![r(1, 4)]).unwrap();
        let e = p.exponentiate(256);
        assert_eq!(e.a[0], BigComplex::from_int(-1, 256));
        assert_eq!(e.b[0], BigComplex::i(256));
        assert!((e.a[1].re().to_f64() + 0.5).abs() < 1e-15);
        assert!((e.a[1].im().to_f64() - 0.8660254037844386).abs() < 1e-15);
    }

    #[test]
    fn vee_examples() {
        let prec = 256;
        let b = BigComplex::unit_phase(r(2, 7), prec);
        assert!((b.recip().vee() - &b).abs_f64() < 1e-70);
        let lambda = BigComplex::unit_phase(r(-1, 30), prec);
        assert!((&lambda.vee() * &lambda - BigComplex::one(prec)).abs_f64() < 1e-70);
    }

    #[test]
    fn random_params_validate_and_are_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut again = ChaCha8Rng::seed_from_u64(7);
        for p in 2..=6 {
            let x = random_ghg(&mut rng, p);
            assert!(validate_ghg(&x).is_empty());
            assert_eq!(x, random_ghg(&mut again, p));
            assert!(x.exponentiate(256).min_separation() > crate::numerics::half_precision_margin(256));
        }
        for m in 1..=6 {
            let x = random_fc(&mut rng, m);
            assert!(validate_fc(&x).unwrap().is_empty());
            assert_eq!(x, random_fc(&mut again, m));
        }
    }

    #[test]
    fn params_json_round_trip() {
        let p = ParamSource::Fc(FcParams::new(r(1, 3), r(-1, 5), vec![r(1, 2), r(1, 7)]).unwrap());
        assert_eq!(ParamSource::from_json(&p.to_json()).unwrap(), p);
        let j = serde_json::json!({"system":"ghg","a":["1/3","1/5"],"b":["1/2"]});
        assert!(matches!(ParamSource::from_json(&j).unwrap(), ParamSource::Ghg(_)));
    }
}
