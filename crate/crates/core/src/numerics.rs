//! Arbitrary-precision complex scalars and dense square matrices.
//!
//! Scalars are pairs of MPFR floats. Binary operations run at the larger of
//! the two operand precisions. Matrices are row-major and carry a single
//! precision for all entries. Only the linear algebra the monodromy
//! computations need is provided: products, LU-based inverse and
//! determinant. There is deliberately no eigensolver; spectral claims are
//! checked by evaluating characteristic polynomials at the claimed roots.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Rational64;
use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PRECISION: u32 = 256;
pub const MIN_PRECISION: u32 = 64;

/// Default identity tolerance: 1e-40 at 256 bits, with the decimal exponent
/// scaled linearly in the precision.
pub fn default_tolerance(precision_bits: u32) -> f64 {
    10f64.powf(-40.0 * precision_bits as f64 / 256.0)
}

/// `2^(-precision_bits / 2)`, the separation margin used for pivots and
/// "nonzero" tests.
pub fn half_precision_margin(precision_bits: u32) -> f64 {
    2f64.powf(-(precision_bits as f64) / 2.0)
}

fn clamp_prec(prec: u32) -> u32 {
    prec.max(MIN_PRECISION)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BigComplex {
    re: Float,
    im: Float,
}

impl BigComplex {
    pub fn new(re: Float, im: Float) -> Self {
        let prec = clamp_prec(re.prec().max(im.prec()));
        let mut re = re;
        let mut im = im;
        re.set_prec(prec);
        im.set_prec(prec);
        BigComplex { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        let prec = clamp_prec(prec);
        BigComplex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(1.0, prec)
    }

    pub fn i(prec: u32) -> Self {
        let prec = clamp_prec(prec);
        BigComplex { re: Float::new(prec), im: Float::with_val(prec, 1) }
    }

    pub fn from_f64(re: f64, prec: u32) -> Self {
        let prec = clamp_prec(prec);
        BigComplex { re: Float::with_val(prec, re), im: Float::new(prec) }
    }

    pub fn from_parts_f64(re: f64, im: f64, prec: u32) -> Self {
        let prec = clamp_prec(prec);
        BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_int(v: i64, prec: u32) -> Self {
        let prec = clamp_prec(prec);
        BigComplex { re: Float::with_val(prec, v), im: Float::new(prec) }
    }

    pub fn from_rational(r: Rational64, prec: u32) -> Self {
        let prec = clamp_prec(prec);
        let mut re = Float::with_val(prec, *r.numer());
        re /= *r.denom();
        BigComplex { re, im: Float::new(prec) }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        Self::new(re, Float::new(prec))
    }

    /// `exp(2πi·r)` for a rational `r`. Quarter turns are exact.
    pub fn unit_phase(r: Rational64, prec: u32) -> Self {
        let prec = clamp_prec(prec);
        let d = *r.denom();
        let n = r.numer().rem_euclid(d);
        if (4 * n) % d == 0 {
            let (re, im) = match 4 * n / d {
                0 => (1, 0),
                1 => (0, 1),
                2 => (-1, 0),
                _ => (0, -1),
            };
            return BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) };
        }
        // work with a few guard bits, then round to the target precision
        let wp = prec + 32;
        let mut angle = Float::with_val(wp, Constant::Pi);
        angle *= 2 * n;
        angle /= d;
        let (s, c) = angle.sin_cos(Float::new(wp));
        BigComplex { re: Float::with_val(prec, c), im: Float::with_val(prec, s) }
    }

    pub fn re(&self) -> &Float {
        &self.re
    }

    pub fn im(&self) -> &Float {
        &self.im
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        let prec = clamp_prec(prec);
        BigComplex { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn conj(&self) -> Self {
        BigComplex { re: self.re.clone(), im: Float::with_val(self.im.prec(), -&self.im) }
    }

    pub fn norm_sqr(&self) -> Float {
        let prec = self.prec();
        let mut n = Float::with_val(prec, self.re.square_ref());
        n += Float::with_val(prec, self.im.square_ref());
        n
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    /// `|z|` rounded to `f64`. Underflows to 0 below the `f64` range.
    pub fn abs_f64(&self) -> f64 {
        self.abs().to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn recip(&self) -> Self {
        BigComplex::one(self.prec()) / self
    }

    pub fn scale_int(&self, k: i64) -> Self {
        let prec = self.prec();
        BigComplex { re: Float::with_val(prec, &self.re * k), im: Float::with_val(prec, &self.im * k) }
    }

    pub fn pow_u(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = BigComplex::one(self.prec());
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Principal logarithm, argument in (−π, π].
    pub fn ln(&self) -> Self {
        let prec = self.prec();
        let modulus = self.abs().ln();
        let arg = Float::with_val(prec, self.im.atan2_ref(&self.re));
        BigComplex::new(modulus, arg)
    }

    pub fn exp(&self) -> Self {
        let prec = self.prec();
        let r = Float::with_val(prec, self.re.exp_ref());
        let (s, c) = self.im.clone().sin_cos(Float::new(prec));
        BigComplex::new(Float::with_val(prec, &r * &c), Float::with_val(prec, &r * &s))
    }

    /// Principal branch `z^s = exp(s · ln z)`.
    pub fn powc(&self, s: &BigComplex) -> Self {
        if self.is_zero() {
            return BigComplex::zero(self.prec());
        }
        (&self.ln() * s).exp()
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        let prec = self.prec();
        if self.is_zero() {
            return BigComplex::zero(prec);
        }
        let r = self.abs();
        // sqrt((r + |re|)/2) is computed without cancellation
        let mut t = Float::with_val(prec, self.re.abs_ref());
        t += &r;
        t /= 2;
        let t = t.sqrt();
        let mut other = Float::with_val(prec, &self.im / &t);
        other /= 2;
        if self.re >= 0 {
            BigComplex::new(t, other)
        } else if self.im >= 0 {
            BigComplex::new(other, t)
        } else {
            BigComplex::new(Float::with_val(prec, -other), Float::with_val(prec, -t))
        }
    }

    /// Decimal strings with at least `0.3 · precision` significant digits.
    pub fn to_decimal_strings(&self) -> [String; 2] {
        let digits = decimal_digits(self.prec());
        [self.re.to_string_radix(10, Some(digits)), self.im.to_string_radix(10, Some(digits))]
    }

    pub fn parse_decimal(re: &str, im: &str, prec: u32) -> Result<Self> {
        let prec = clamp_prec(prec);
        let parse = |s: &str| -> Result<Float> {
            Float::parse(s.trim())
                .map(|p| Float::with_val(prec, p))
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        Ok(BigComplex { re: parse(re)?, im: parse(im)? })
    }
}

pub fn decimal_digits(prec: u32) -> usize {
    (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
}

impl fmt::Display for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(12);
        let re = self.re.to_string_radix(10, Some(digits));
        let im = self.im.to_string_radix(10, Some(digits));
        if self.im.is_sign_negative() {
            write!(f, "{re} - {}i", im.trim_start_matches('-'))
        } else {
            write!(f, "{re} + {im}i")
        }
    }
}

impl Neg for &BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        let prec = self.prec();
        BigComplex { re: Float::with_val(prec, -&self.re), im: Float::with_val(prec, -&self.im) }
    }
}

impl Neg for BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        -&self
    }
}

impl Add for &BigComplex {
    type Output = BigComplex;
    fn add(self, rhs: &BigComplex) -> BigComplex {
        let prec = self.prec().max(rhs.prec());
        BigComplex {
            re: Float::with_val(prec, &self.re + &rhs.re),
            im: Float::with_val(prec, &self.im + &rhs.im),
        }
    }
}

impl Sub for &BigComplex {
    type Output = BigComplex;
    fn sub(self, rhs: &BigComplex) -> BigComplex {
        let prec = self.prec().max(rhs.prec());
        BigComplex {
            re: Float::with_val(prec, &self.re - &rhs.re),
            im: Float::with_val(prec, &self.im - &rhs.im),
        }
    }
}

impl Mul for &BigComplex {
    type Output = BigComplex;
    fn mul(self, rhs: &BigComplex) -> BigComplex {
        let prec = self.prec().max(rhs.prec());
        let mut re = Float::with_val(prec, &self.re * &rhs.re);
        re -= Float::with_val(prec, &self.im * &rhs.im);
        let mut im = Float::with_val(prec, &self.re * &rhs.im);
        im += Float::with_val(prec, &self.im * &rhs.re);
        BigComplex { re, im }
    }
}

impl Div for &BigComplex {
    type Output = BigComplex;
    fn div(self, rhs: &BigComplex) -> BigComplex {
        let prec = self.prec().max(rhs.prec());
        let den = rhs.norm_sqr();
        let mut re = Float::with_val(prec, &self.re * &rhs.re);
        re += Float::with_val(prec, &self.im * &rhs.im);
        re /= &den;
        let mut im = Float::with_val(prec, &self.im * &rhs.re);
        im -= Float::with_val(prec, &self.re * &rhs.im);
        im /= &den;
        BigComplex { re, im }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<BigComplex> for BigComplex {
            type Output = BigComplex;
            fn $m(self, rhs: BigComplex) -> BigComplex {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&BigComplex> for BigComplex {
            type Output = BigComplex;
            fn $m(self, rhs: &BigComplex) -> BigComplex {
                (&self).$m(rhs)
            }
        }
        impl $tr<BigComplex> for &BigComplex {
            type Output = BigComplex;
            fn $m(self, rhs: BigComplex) -> BigComplex {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

/// Product of an iterator of scalars; the empty product is 1.
pub fn product<'a, I>(items: I, prec: u32) -> BigComplex
where
    I: IntoIterator<Item = &'a BigComplex>,
{
    items.into_iter().fold(BigComplex::one(prec), |acc, x| &acc * x)
}

pub fn sum<'a, I>(items: I, prec: u32) -> BigComplex
where
    I: IntoIterator<Item = &'a BigComplex>,
{
    items.into_iter().fold(BigComplex::zero(prec), |acc, x| &acc + x)
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    prec: u32,
    entries: Vec<BigComplex>,
}

impl CMatrix {
    pub fn zeros(n: usize, prec: u32) -> Self {
        assert!(n >= 1, "matrix size must be positive");
        let prec = clamp_prec(prec);
        CMatrix { n, prec, entries: vec![BigComplex::zero(prec); n * n] }
    }

    pub fn identity(n: usize, prec: u32) -> Self {
        let mut m = Self::zeros(n, prec);
        for i in 0..n {
            m.entries[i * n + i] = BigComplex::one(m.prec);
        }
        m
    }

    pub fn diag(values: Vec<BigComplex>) -> Self {
        let n = values.len();
        let prec = values.iter().map(|v| v.prec()).max().unwrap_or(DEFAULT_PRECISION);
        let mut m = Self::zeros(n, prec);
        for (i, v) in values.into_iter().enumerate() {
            m.entries[i * n + i] = v.with_prec(m.prec);
        }
        m
    }

    /// Builds an `n × n` matrix from a row-major entry list.
    pub fn from_entries(n: usize, entries: Vec<BigComplex>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::DimensionMismatch { left: n * n, right: entries.len() });
        }
        let prec = entries.iter().map(|v| v.prec()).max().unwrap_or(DEFAULT_PRECISION);
        let entries = entries.into_iter().map(|e| e.with_prec(prec)).collect();
        Ok(CMatrix { n, prec, entries })
    }

    pub fn from_fn(n: usize, prec: u32, mut f: impl FnMut(usize, usize) -> BigComplex) -> Self {
        let prec = clamp_prec(prec);
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j).with_prec(prec));
            }
        }
        CMatrix { n, prec, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn get(&self, i: usize, j: usize) -> &BigComplex {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigComplex) {
        self.entries[i * self.n + j] = v.with_prec(self.prec);
    }

    pub fn entries(&self) -> &[BigComplex] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[BigComplex] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<BigComplex> {
        (0..self.n).map(|i| self.get(i, i).clone()).collect()
    }

    pub fn trace(&self) -> BigComplex {
        sum((0..self.n).map(|i| self.get(i, i)), self.prec)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j).is_zero()))
    }

    pub fn transpose(&self) -> Self {
        CMatrix::from_fn(self.n, self.prec, |i, j| self.get(j, i).clone())
    }

    pub fn conj(&self) -> Self {
        CMatrix { n: self.n, prec: self.prec, entries: self.entries.iter().map(|e| e.conj()).collect() }
    }

    pub fn scale(&self, s: &BigComplex) -> Self {
        CMatrix { n: self.n, prec: self.prec, entries: self.entries.iter().map(|e| e * s).collect() }
    }

    pub fn sub(&self, other: &CMatrix) -> Result<Self> {
        self.check_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(CMatrix { n: self.n, prec: self.prec.max(other.prec), entries })
    }

    pub fn add(&self, other: &CMatrix) -> Result<Self> {
        self.check_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(CMatrix { n: self.n, prec: self.prec.max(other.prec), entries })
    }

    /// Largest entrywise `|self − other|`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs_f64()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.abs_f64()).fold(0.0, f64::max)
    }

    /// Principal submatrix on rows and columns `start..start + size`.
    pub fn block(&self, start: usize, size: usize) -> Self {
        CMatrix::from_fn(size, self.prec, |i, j| self.get(start + i, start + j).clone())
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[BigComplex]) -> Result<Vec<BigComplex>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { left: v.len(), right: self.n });
        }
        Ok((0..self.n)
            .map(|j| {
                let mut acc = BigComplex::zero(self.prec);
                for (i, vi) in v.iter().enumerate() {
                    acc = &acc + &(vi * self.get(i, j));
                }
                acc
            })
            .collect())
    }

    pub fn mul(&self, other: &CMatrix) -> Result<Self> {
        mat_mul(self, other)
    }

    pub fn inv(&self) -> Result<Self> {
        mat_inv(self)
    }

    pub fn det(&self) -> BigComplex {
        det(self)
    }

    fn check_dim(&self, other: &CMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            n: self.n,
            precision_bits: self.prec,
            entries: self.entries.iter().map(|e| e.to_decimal_strings()).collect(),
        }
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        if json.entries.len() != json.n * json.n {
            return Err(Error::DimensionMismatch { left: json.n * json.n, right: json.entries.len() });
        }
        let entries = json
            .entries
            .iter()
            .map(|[re, im]| BigComplex::parse_decimal(re, im, json.precision_bits))
            .collect::<Result<Vec<_>>>()?;
        CMatrix::from_entries(json.n, entries)
    }
}

/// Wire encoding of a matrix: decimal strings, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub precision_bits: u32,
    pub entries: Vec<[String; 2]>,
}

pub fn mat_mul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.check_dim(b)?;
    let n = a.n;
    let prec = a.prec.max(b.prec);
    // diagonal factors are the common case for the circuit matrices
    if b.is_diagonal() {
        return Ok(CMatrix::from_fn(n, prec, |i, j| a.get(i, j) * b.get(j, j)));
    }
    if a.is_diagonal() {
        return Ok(CMatrix::from_fn(n, prec, |i, j| a.get(i, i) * b.get(i, j)));
    }
    let mut out = Vec::with_capacity(n * n);
    let mut re = Float::new(prec);
    let mut im = Float::new(prec);
    let mut tmp = Float::new(prec);
    for i in 0..n {
        for j in 0..n {
            re.assign_zero();
            im.assign_zero();
            for k in 0..n {
                let x = a.get(i, k);
                let y = b.get(k, j);
                tmp.assign_mul(&x.re, &y.re);
                re += &tmp;
                tmp.assign_mul(&x.im, &y.im);
                re -= &tmp;
                tmp.assign_mul(&x.re, &y.im);
                im += &tmp;
                tmp.assign_mul(&x.im, &y.re);
                im += &tmp;
            }
            out.push(BigComplex { re: re.clone(), im: im.clone() });
        }
    }
    Ok(CMatrix { n, prec, entries: out })
}

trait FloatAssign {
    fn assign_zero(&mut self);
    fn assign_mul(&mut self, a: &Float, b: &Float);
}

impl FloatAssign for Float {
    fn assign_zero(&mut self) {
        use rug::Assign;
        self.assign(0);
    }
    fn assign_mul(&mut self, a: &Float, b: &Float) {
        use rug::Assign;
        self.assign(a * b);
    }
}

/// LU factorization with partial pivoting, stored compactly.
struct Lu {
    n: usize,
    lu: Vec<BigComplex>,
    perm: Vec<usize>,
    sign_flips: usize,
    /// First column whose pivot fell below the threshold, with its magnitude.
    small_pivot: Option<(usize, f64)>,
}

fn lu_decompose(a: &CMatrix, threshold: f64) -> Lu {
    let n = a.n;
    let mut lu = a.entries.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign_flips = 0;
    let mut small_pivot = None;
    for col in 0..n {
        let (piv_row, piv_mag) = (col..n)
            .map(|r| (r, lu[r * n + col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty pivot range");
        let mag = piv_mag.to_f64();
        if piv_mag.is_zero() || mag < threshold {
            if small_pivot.is_none() {
                small_pivot = Some((col, mag));
            }
            if piv_mag.is_zero() {
                continue;
            }
        }
        if piv_row != col {
            for j in 0..n {
                lu.swap(piv_row * n + j, col * n + j);
            }
            perm.swap(piv_row, col);
            sign_flips += 1;
        }
        let pivot = lu[col * n + col].clone();
        for r in (col + 1)..n {
            let factor = &lu[r * n + col] / &pivot;
            if factor.is_zero() {
                lu[r * n + col] = factor;
                continue;
            }
            for j in (col + 1)..n {
                let delta = &factor * &lu[col * n + j];
                lu[r * n + j] = &lu[r * n + j] - &delta;
            }
            lu[r * n + col] = factor;
        }
    }
    Lu { n, lu, perm, sign_flips, small_pivot }
}

impl Lu {
    fn solve_in_place(&self, b: &mut [BigComplex]) {
        let n = self.n;
        let mut x: Vec<BigComplex> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for k in 0..i {
                let t = &self.lu[i * n + k] * &x[k];
                x[i] = &x[i] - &t;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = &self.lu[i * n + k] * &x[k];
                x[i] = &x[i] - &t;
            }
            x[i] = &x[i] / &self.lu[i * n + i];
        }
        b.clone_from_slice(&x);
    }
}

/// Inverse via LU with partial pivoting. Fails with `SingularMatrix` when a
/// pivot magnitude drops below `2^(-precision_bits/2)`.
pub fn mat_inv(a: &CMatrix) -> Result<CMatrix> {
    let n = a.n;
    let prec = a.prec;
    if a.is_diagonal() {
        let threshold = half_precision_margin(prec);
        for i in 0..n {
            let mag = a.get(i, i).abs_f64();
            if mag < threshold {
                return Err(Error::SingularMatrix { column: i, pivot: mag });
            }
        }
        return Ok(CMatrix::diag(a.diagonal().iter().map(|d| d.recip()).collect()));
    }
    let lu = lu_decompose(a, half_precision_margin(prec));
    if let Some((column, pivot)) = lu.small_pivot {
        return Err(Error::SingularMatrix { column, pivot });
    }
    let mut out = CMatrix::zeros(n, prec);
    let mut col = vec![BigComplex::zero(prec); n];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = if i == j { BigComplex::one(prec) } else { BigComplex::zero(prec) };
        }
        lu.solve_in_place(&mut col);
        for (i, c) in col.iter().enumerate() {
            out.entries[i * n + j] = c.clone();
        }
    }
    Ok(out)
}

/// Solves `a · x = b`.
pub fn solve(a: &CMatrix, b: &[BigComplex]) -> Result<Vec<BigComplex>> {
    if b.len() != a.n {
        return Err(Error::DimensionMismatch { left: a.n, right: b.len() });
    }
    let lu = lu_decompose(a, half_precision_margin(a.prec));
    if let Some((column, pivot)) = lu.small_pivot {
        return Err(Error::SingularMatrix { column, pivot });
    }
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);
    Ok(x)
}

/// Determinant via LU with partial pivoting. A zero pivot yields 0.
pub fn det(a: &CMatrix) -> BigComplex {
    let prec = a.prec;
    if a.is_diagonal() {
        return product(a.entries.iter().step_by(a.n + 1), prec);
    }
    let lu = lu_decompose(a, 0.0);
    let n = a.n;
    let mut d = BigComplex::one(prec);
    for i in 0..n {
        d = &d * &lu.lu[i * n + i];
    }
    if lu.sign_flips % 2 == 1 {
        d = -d;
    }
    d
}

/// Characteristic polynomial `det(t·id − m)` evaluated at `t`.
pub fn char_poly_at(m: &CMatrix, t: &BigComplex) -> BigComplex {
    let shifted = CMatrix::from_fn(m.n, m.prec, |i, j| {
        if i == j {
            t - m.get(i, j)
        } else {
            -m.get(i, j)
        }
    });
    det(&shifted)
}
