//! Numerical cross-check of the closed forms for the rank-`p` equation.
//!
//! The series basis is evaluated at a real base point `ε`, continued along
//! circles around `0` and `1` by Taylor recentering of the ODE, and the raw
//! monodromy is read off from the Wronskian. A diagonal gauge is then fitted
//! so the `λ`-eigenvector becomes `(1,…,1)`.

use std::time::Instant;

use num_rational::Rational64;
use rayon::prelude::*;
use rug::float::Constant;
use rug::Float;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fc::{fc_singular_poly, SubsetIndex};
use crate::ghg;
use crate::numerics::{char_poly_at, half_precision_margin, solve, BigComplex, CMatrix};
use crate::params::{FcParams, GhgParams};
use crate::verify::{h_invariance_residual, spectrum_residual, Check, Report};

const MAX_TERMS: usize = 1_000_000;
const GUARD_BITS: u32 = 32;
const MIN_TAYLOR_ORDER: usize = 30;
const MAX_PATH_STEPS: usize = 1_000_000;
const SERIES_RADIUS: f64 = 0.9;

pub fn default_eps() -> Rational64 {
    Rational64::new(1, 10)
}

fn series_eps(prec: u32) -> f64 {
    (2f64).powi(-(prec as i32) - 16)
}

fn real(x: f64, prec: u32) -> BigComplex {
    BigComplex::from_f64(x, prec)
}

fn rat(r: Rational64, prec: u32) -> BigComplex {
    BigComplex::from_rational(r, prec)
}

/// `N (N−1) ⋯ (N−j+1)` as a float.
fn falling(n: usize, j: usize, prec: u32) -> Float {
    let mut f = Float::with_val(prec, 1);
    for q in 0..j {
        f *= (n - q) as u64;
    }
    f
}

fn is_nonpositive_integer(z: &BigComplex) -> bool {
    z.im().is_zero() && z.re().is_integer() && *z.re() <= 0
}

/// `d^r/dx^r [x^s · ₚF_q(a; b; x)]` for `r = 0..=order`.
///
/// Summation stops once the current term and a geometric bound on the
/// remaining tail both fall below `2^(−prec−16)` relative to the sum.
pub fn pfq_shifted_derivatives(
    a: &[BigComplex],
    b: &[BigComplex],
    s: &BigComplex,
    x: &BigComplex,
    order: usize,
    prec: u32,
) -> Result<Vec<BigComplex>> {
    if a.len() != b.len() + 1 {
        return Err(Error::Domain(format!("need p upper and p − 1 lower parameters, got {} and {}", a.len(), b.len())));
    }
    let xa = x.abs_f64();
    if xa > SERIES_RADIUS + 1e-12 {
        return Err(Error::Domain(format!("|x| = {xa} exceeds {SERIES_RADIUS}")));
    }
    if let Some(bad) = b.iter().find(|v| is_nonpositive_integer(v)) {
        return Err(Error::Domain(format!("lower parameter {bad} is a non-positive integer")));
    }
    if order > 0 && x.is_zero() {
        return Err(Error::Domain("derivatives of the shifted series at x = 0".into()));
    }
    let wp = prec + GUARD_BITS;
    let a: Vec<BigComplex> = a.iter().map(|v| v.with_prec(wp)).collect();
    let b: Vec<BigComplex> = b.iter().map(|v| v.with_prec(wp)).collect();
    let s = s.with_prec(wp);
    let x = x.with_prec(wp);

    let max_a = a.iter().map(|v| v.abs_f64()).fold(0.0, f64::max);
    let max_b = b.iter().map(|v| v.abs_f64()).fold(0.0, f64::max);
    let sa = s.abs_f64();
    let last_a = a.last().map(|v| v.abs_f64()).unwrap_or(0.0);
    let n0 = (2.0 * (max_a + max_b + sa + order as f64 + 1.0)).ceil() as usize;
    let eps = series_eps(prec);

    let mut sums = vec![BigComplex::zero(wp); order + 1];
    let mut term = BigComplex::one(wp);
    for n in 0..MAX_TERMS {
        let base = &s + &real(n as f64, wp);
        let mut weight = BigComplex::one(wp);
        for (r, sum) in sums.iter_mut().enumerate() {
            if r > 0 {
                weight = &weight * &(&base - &real((r - 1) as f64, wp));
            }
            *sum = &*sum + &(&term * &weight);
        }

        let nf = BigComplex::from_int(n as i64, wp);
        let mut num = x.clone();
        for ai in &a {
            num = &num * &(ai + &nf);
        }
        let mut den = BigComplex::from_int(n as i64 + 1, wp);
        for bj in &b {
            den = &den * &(bj + &nf);
        }
        term = &(&term * &num) / &den;

        let k0 = n + 1;
        if k0 >= n0 {
            let k = k0 as f64;
            let mut ratio = xa;
            for (ai, bj) in a.iter().zip(&b) {
                ratio *= (k + ai.abs_f64()) / (k - bj.abs_f64());
            }
            ratio *= f64::max(1.0, (k + last_a) / (k + 1.0));
            ratio *= ((k + sa + 1.0) / (k - sa - order as f64)).powi(order as i32);
            if ratio < 1.0 {
                let weight_bound = (k + sa).max(1.0).powi(order as i32);
                let tail = term.abs_f64() * weight_bound / (1.0 - ratio);
                let scale = sums.iter().map(|v| v.abs_f64()).fold(1.0, f64::max);
                if tail < eps * scale {
                    let prefactor = if s.is_zero() { BigComplex::one(wp) } else { x.powc(&s) };
                    let xinv = if order > 0 { x.recip() } else { BigComplex::one(wp) };
                    let mut out = Vec::with_capacity(order + 1);
                    let mut pre = prefactor;
                    for sum in &sums {
                        out.push((&pre * sum).with_prec(prec));
                        pre = &pre * &xinv;
                    }
                    return Ok(out);
                }
            }
        }
    }
    Err(Error::NoConvergence { terms: MAX_TERMS })
}

/// `ₚF_{p−1}(a; b; x)` for `|x| ≤ 0.9`.
pub fn eval_pfq(a: &[BigComplex], b: &[BigComplex], x: &BigComplex, prec: u32) -> Result<BigComplex> {
    let s = BigComplex::zero(prec);
    Ok(pfq_shifted_derivatives(a, b, &s, x, 0, prec)?.remove(0))
}

/// One entry of the local basis at `0`: exponent shift and series parameters.
struct BasisEntry {
    shift: Rational64,
    a: Vec<Rational64>,
    b: Vec<Rational64>,
}

fn basis_entries(params: &GhgParams) -> Vec<BasisEntry> {
    let one = Rational64::from_integer(1);
    let two = Rational64::from_integer(2);
    let mut out = vec![BasisEntry { shift: Rational64::from_integer(0), a: params.a.clone(), b: params.b.clone() }];
    for (k, bk) in params.b.iter().enumerate() {
        let a = params.a.iter().map(|ai| ai - bk + one).collect();
        let b = params.b.iter().enumerate().map(|(j, bj)| if j == k { two - bk } else { bj - bk + one }).collect();
        out.push(BasisEntry { shift: one - bk, a, b });
    }
    out
}

fn basis_derivatives(params: &GhgParams, x: &BigComplex, order: usize, prec: u32) -> Result<Vec<Vec<BigComplex>>> {
    let wp = prec + GUARD_BITS;
    basis_entries(params)
        .iter()
        .map(|e| {
            let a: Vec<_> = e.a.iter().map(|r| rat(*r, wp)).collect();
            let b: Vec<_> = e.b.iter().map(|r| rat(*r, wp)).collect();
            pfq_shifted_derivatives(&a, &b, &rat(e.shift, wp), x, order, prec)
        })
        .collect()
}

/// The column vector of local solutions at `0`: the plain series, then
/// `x^{1−b_k}` times the shifted series for each `k`. Principal branches.
pub fn fundamental_system_ghg(params: &GhgParams, x: &BigComplex, prec: u32) -> Result<Vec<BigComplex>> {
    Ok(basis_derivatives(params, x, 0, prec)?.into_iter().map(|mut v| v.remove(0)).collect())
}

/// Wronskian with rows `(f_k, f_k', …, f_k^{(p−1)})`.
pub fn fundamental_wronskian(params: &GhgParams, x: &BigComplex, prec: u32) -> Result<CMatrix> {
    let p = params.p();
    let rows = basis_derivatives(params, x, p - 1, prec)?;
    CMatrix::from_entries(p, rows.into_iter().flatten().collect())
}

/// Stirling numbers of the second kind `S(k, j)` for `k, j ≤ n`.
fn stirling2(n: usize) -> Vec<Vec<i64>> {
    let mut s = vec![vec![0i64; n + 1]; n + 1];
    s[0][0] = 1;
    for k in 1..=n {
        for j in 1..=k {
            s[k][j] = j as i64 * s[k - 1][j] + s[k - 1][j - 1];
        }
    }
    s
}

/// Ascending coefficients of `∏ (θ + r_i)`.
fn poly_from_shifts(shifts: &[BigComplex], prec: u32) -> Vec<BigComplex> {
    let mut c = vec![BigComplex::one(prec)];
    for r in shifts {
        let mut next = vec![BigComplex::zero(prec); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] = &next[i] + &(ci * r);
            next[i + 1] = &next[i + 1] + ci;
        }
        c = next;
    }
    c
}

/// The equation `[θ∏(θ+b_j−1) − x∏(θ+a_i)] f = 0` written as
/// `Σ_j q_j(x) f^{(j)} = 0` with polynomial `q_j` and
/// `q_p(x) = x^{p−1}(1−x)`.
#[derive(Clone, Debug)]
pub struct GhgOperator {
    p: usize,
    /// `q[j]` in ascending powers of `x`.
    q: Vec<Vec<BigComplex>>,
}

impl GhgOperator {
    pub fn new(params: &GhgParams, prec: u32) -> Self {
        let p = params.p();
        let one = Rational64::from_integer(1);
        let mut pb_shifts = vec![BigComplex::zero(prec)];
        pb_shifts.extend(params.b.iter().map(|bj| rat(bj - one, prec)));
        let pa_shifts: Vec<_> = params.a.iter().map(|ai| rat(*ai, prec)).collect();
        let beta = poly_from_shifts(&pb_shifts, prec);
        let delta_theta = poly_from_shifts(&pa_shifts, prec);
        let s = stirling2(p);
        let convert = |c: &[BigComplex], j: usize| -> BigComplex {
            let mut acc = BigComplex::zero(prec);
            for (k, ck) in c.iter().enumerate().skip(j) {
                acc = &acc + &ck.scale_int(s[k][j]);
            }
            acc
        };
        let mut q = Vec::with_capacity(p + 1);
        q.push(vec![-convert(&delta_theta, 0)]);
        for j in 1..=p {
            let mut coeffs = vec![BigComplex::zero(prec); j + 1];
            coeffs[j - 1] = convert(&beta, j);
            coeffs[j] = -convert(&delta_theta, j);
            q.push(coeffs);
        }
        GhgOperator { p, q }
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// `q_j(c + t)` in ascending powers of `t`.
    fn shifted_coefficients(&self, c: &BigComplex) -> Vec<Vec<BigComplex>> {
        let prec = c.prec();
        self.q
            .iter()
            .map(|coeffs| {
                let deg = coeffs.len() - 1;
                (0..=deg)
                    .map(|l| {
                        let mut acc = BigComplex::zero(prec);
                        let mut binom: i64 = 1;
                        let mut cpow = BigComplex::one(prec);
                        for (k, ck) in coeffs.iter().enumerate().skip(l) {
                            if k > l {
                                binom = binom * k as i64 / (k - l) as i64;
                                cpow = &cpow * c;
                            }
                            acc = &acc + &(ck * &cpow).scale_int(binom);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `Σ_j q_j(x) f^{(j)}(x)` for a full derivative vector of length `p+1`.
    pub fn apply(&self, x: &BigComplex, derivs: &[BigComplex]) -> BigComplex {
        let prec = x.prec();
        let mut acc = BigComplex::zero(prec);
        for (coeffs, d) in self.q.iter().zip(derivs) {
            let mut v = BigComplex::zero(prec);
            for c in coeffs.iter().rev() {
                v = &(&v * x) + c;
            }
            acc = &acc + &(&v * d);
        }
        acc
    }

    /// Continues `(f, f', …, f^{(p−1)})` from `c` to `c + h` by the Taylor
    /// series at `c`. The caller keeps `|h|` at most half the distance from
    /// `c` to the nearest singular point.
    pub fn taylor_step(&self, c: &BigComplex, h: &BigComplex, derivs: &[BigComplex]) -> Result<Vec<BigComplex>> {
        let p = self.p;
        let prec = c.prec().max(h.prec());
        let qc = self.shifted_coefficients(c);
        let lead = qc[p][0].clone();
        if lead.abs_f64() <= half_precision_margin(prec) {
            return Err(Error::Domain(format!("Taylor center {c} is a singular point")));
        }
        let mut hpow = vec![BigComplex::one(prec)];
        for _ in 0..2 * p {
            let next = hpow.last().expect("non-empty") * h;
            hpow.push(next);
        }
        // scaled coefficients q̃_{j,l} = q_{j,l} h^{l+p−j}
        let qt: Vec<Vec<BigComplex>> = qc
            .iter()
            .enumerate()
            .map(|(j, row)| row.iter().enumerate().map(|(l, v)| v * &hpow[l + p - j]).collect())
            .collect();

        // ũ_n = u_n h^n with u_n the Taylor coefficients at c
        let mut u: Vec<BigComplex> = Vec::with_capacity(4 * MIN_TAYLOR_ORDER);
        let mut fact = Float::with_val(prec, 1);
        for (k, d) in derivs.iter().enumerate().take(p) {
            if k > 0 {
                fact *= k as u64;
            }
            u.push(&(d * &hpow[k]) / &BigComplex::from_real(fact.clone()));
        }
        let eps = series_eps(prec);
        let mut scale = u.iter().map(|v| v.abs_f64()).fold(f64::MIN_POSITIVE, f64::max);
        let max_len = 8 * prec as usize + 200;
        let mut n = 0usize;
        loop {
            let mut acc = BigComplex::zero(prec);
            for (j, row) in qt.iter().enumerate() {
                for (l, q) in row.iter().enumerate().take(n.min(row.len() - 1) + 1) {
                    if j == p && l == 0 {
                        continue;
                    }
                    let idx = n - l + j;
                    let w = BigComplex::from_real(falling(idx, j, prec));
                    acc = &acc + &(&(q * &u[idx]) * &w);
                }
            }
            let denom = &lead * &BigComplex::from_real(falling(n + p, p, prec));
            let next = -(&acc / &denom);
            scale = scale.max(next.abs_f64());
            u.push(next);
            n += 1;
            let len = u.len();
            if len >= MIN_TAYLOR_ORDER {
                let poly = (len as f64 + 1.0).powi(p as i32);
                let small = u[len - p..].iter().all(|v| v.abs_f64() * poly < eps * scale);
                if small {
                    break;
                }
            }
            if len > max_len {
                return Err(Error::NoConvergence { terms: len });
            }
        }

        let hinv = h.recip();
        let mut out = Vec::with_capacity(p);
        let mut hr = BigComplex::one(prec);
        for r in 0..p {
            let mut acc = BigComplex::zero(prec);
            for (k, v) in u.iter().enumerate().skip(r) {
                acc = &acc + &(v * &BigComplex::from_real(falling(k, r, prec)));
            }
            out.push(&acc * &hr);
            hr = &hr * &hinv;
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopKind {
    /// Circle of radius `ε` around `0`.
    Rho0,
    /// Circle of radius `1 − ε` around `1`.
    Rho1,
    /// The constant path at the base point.
    Constant,
}

/// A positively oriented circle through the base point `ε`.
#[derive(Clone, Debug)]
pub struct LoopSpec {
    pub kind: LoopKind,
    pub eps: Rational64,
    /// Lower bound on the number of arc segments; the adaptive rule
    /// usually takes more.
    pub min_segments: usize,
}

impl LoopSpec {
    pub fn new(kind: LoopKind, eps: Rational64) -> Self {
        LoopSpec { kind, eps, min_segments: 8 }
    }

    pub fn rho0(eps: Rational64) -> Self {
        Self::new(LoopKind::Rho0, eps)
    }

    pub fn rho1(eps: Rational64) -> Self {
        Self::new(LoopKind::Rho1, eps)
    }

    pub fn constant(eps: Rational64) -> Self {
        Self::new(LoopKind::Constant, eps)
    }

    fn validate(&self) -> Result<()> {
        let half = Rational64::new(1, 2);
        if self.eps <= Rational64::from_integer(0) || self.eps >= half {
            return Err(Error::Domain(format!("base point ε = {} must lie in (0, 1/2)", self.eps)));
        }
        Ok(())
    }
}

/// The points visited by the continuation and the distance from each
/// center to the nearest singular point.
#[derive(Clone, Debug, Default)]
pub struct PathDump {
    pub centers: Vec<BigComplex>,
    pub radii: Vec<f64>,
}

impl PathDump {
    pub fn to_json(&self) -> Value {
        json!({
            "centers": self.centers.iter().map(|c| c.to_decimal_strings()).collect::<Vec<_>>(),
            "radii": self.radii.iter().map(|r| format!("{r:e}")).collect::<Vec<_>>(),
        })
    }
}

fn distance_to_singularities(z: &BigComplex) -> f64 {
    let one = BigComplex::one(z.prec());
    z.abs_f64().min((z - &one).abs_f64())
}

/// Path points from the base point back to itself.
fn loop_path(spec: &LoopSpec, prec: u32) -> Result<PathDump> {
    spec.validate()?;
    let base = rat(spec.eps, prec);
    let (center, radius, sign) = match spec.kind {
        LoopKind::Constant => return Ok(PathDump { radii: vec![distance_to_singularities(&base)], centers: vec![base] }),
        LoopKind::Rho0 => (BigComplex::zero(prec), base.clone(), 1),
        LoopKind::Rho1 => {
            let one = BigComplex::one(prec);
            (one.clone(), &one - &base, -1)
        }
    };
    let r64 = radius.abs_f64();
    let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
    let point = |t: f64| -> BigComplex {
        let angle = Float::with_val(prec, &two_pi * Float::with_val(prec, t));
        let e = BigComplex::new(Float::new(prec), angle).exp();
        let offset = &radius * &e;
        if sign > 0 {
            &center + &offset
        } else {
            &center - &offset
        }
    };

    let mut dump = PathDump { centers: vec![base.clone()], radii: vec![distance_to_singularities(&base)] };
    let max_dt = if spec.min_segments > 0 { 1.0 / spec.min_segments as f64 } else { 1.0 };
    let underflow = half_precision_margin(prec);
    let mut t = 0f64;
    while t < 1.0 {
        let z = dump.centers.last().expect("non-empty");
        let d = distance_to_singularities(z);
        let mut dt = ((d / (4.0 * r64)).min(1.0).asin() / std::f64::consts::PI).min(max_dt);
        let (next, step) = loop {
            let t_next = (t + dt).min(1.0);
            let next = if t_next >= 1.0 { base.clone() } else { point(t_next) };
            let step = (&next - z).abs_f64();
            if step <= 0.5 * d || dt < underflow {
                break (next, step);
            }
            dt *= 0.5;
        };
        if step < underflow && t + dt < 1.0 {
            return Err(Error::StepUnderflow { step });
        }
        t = (t + dt).min(1.0);
        dump.radii.push(distance_to_singularities(&next));
        dump.centers.push(next);
        if dump.centers.len() > MAX_PATH_STEPS {
            return Err(Error::NoConvergence { terms: MAX_PATH_STEPS });
        }
    }
    Ok(dump)
}

/// Raw monodromy `M̂ = W_end · W_start⁻¹` along the loop, together with the path.
pub fn numeric_monodromy_with_path(params: &GhgParams, spec: &LoopSpec, prec: u32) -> Result<(CMatrix, PathDump)> {
    let path = loop_path(spec, prec)?;
    let base = &path.centers[0];
    let w0 = fundamental_wronskian(params, base, prec)?;
    let op = GhgOperator::new(params, prec);
    let p = params.p();
    let rows: Vec<Vec<BigComplex>> = (0..p)
        .into_par_iter()
        .map(|k| {
            let mut derivs = w0.row(k).to_vec();
            for pair in path.centers.windows(2) {
                let h = &pair[1] - &pair[0];
                derivs = op.taylor_step(&pair[0], &h, &derivs)?;
            }
            Ok(derivs)
        })
        .collect::<Result<_>>()?;
    let w_end = CMatrix::from_entries(p, rows.into_iter().flatten().collect())?;
    Ok((w_end.mul(&w0.inv()?)?, path))
}

pub fn numeric_monodromy(params: &GhgParams, spec: &LoopSpec, prec: u32) -> Result<CMatrix> {
    Ok(numeric_monodromy_with_path(params, spec, prec)?.0)
}

#[derive(Clone, Debug)]
pub struct GaugeResult {
    pub g: CMatrix,
    pub raw_m0: CMatrix,
    pub raw_m1: CMatrix,
    pub gauged_m0: CMatrix,
    pub gauged_m1: CMatrix,
    /// `max |v·M̂₁ − λ v|` for the recovered eigenvector `v = diag(g)`.
    pub fit_residual: f64,
}

/// Left `λ`-eigenvector of `m` with coordinate `pin` set to one.
fn pinned_left_eigenvector(m: &CMatrix, lambda: &BigComplex, pin: usize) -> Result<Vec<BigComplex>> {
    let p = m.n();
    let prec = m.prec();
    let a = CMatrix::from_fn(p, prec, |i, j| if i == j { m.get(i, j) - lambda } else { m.get(i, j).clone() });
    let unknowns: Vec<usize> = (0..p).filter(|&i| i != pin).collect();
    // v·A = 0 gives one equation per column; drop the one whose removal
    // leaves the best conditioned system.
    let mut best: Option<(f64, usize)> = None;
    for drop in 0..p {
        let eqs: Vec<usize> = (0..p).filter(|&c| c != drop).collect();
        let sys = CMatrix::from_fn(p - 1, prec, |r, k| a.get(unknowns[k], eqs[r]).clone());
        let d = sys.det().abs_f64();
        if best.map_or(true, |(bd, _)| d > bd) {
            best = Some((d, drop));
        }
    }
    let (_, drop) = best.ok_or(Error::EigenvectorDegenerate)?;
    let eqs: Vec<usize> = (0..p).filter(|&c| c != drop).collect();
    let sys = CMatrix::from_fn(p - 1, prec, |r, k| a.get(unknowns[k], eqs[r]).clone());
    let rhs: Vec<BigComplex> = eqs.iter().map(|&c| -a.get(pin, c)).collect();
    let sol = solve(&sys, &rhs).map_err(|_| Error::EigenvectorDegenerate)?;
    let mut v = vec![BigComplex::zero(prec); p];
    v[pin] = BigComplex::one(prec);
    for (k, &i) in unknowns.iter().enumerate() {
        v[i] = sol[k].clone();
    }
    Ok(v)
}

/// [`gauge_normalize`] with an arbitrary pinned coordinate; the result is
/// rescaled so that `g₁₁ = 1`.
pub fn gauge_normalize_pinned(raw_m0: &CMatrix, raw_m1: &CMatrix, lambda: &BigComplex, pin: usize) -> Result<GaugeResult> {
    let prec = raw_m1.prec();
    let margin = (2f64).powf(-(prec as f64) / 4.0);
    let mut v = pinned_left_eigenvector(raw_m1, lambda, pin)?;
    let v0 = v[0].abs_f64();
    if v0 < margin {
        return Err(Error::VanishingComponent { index: 0, magnitude: v0 });
    }
    let inv0 = v[0].recip();
    for x in v.iter_mut() {
        *x = &*x * &inv0;
    }
    for (index, x) in v.iter().enumerate() {
        let magnitude = x.abs_f64();
        if magnitude < margin {
            return Err(Error::VanishingComponent { index, magnitude });
        }
    }
    let applied = raw_m1.left_mul_vec(&v)?;
    let fit_residual = applied.iter().zip(&v).map(|(x, y)| (x - &(y * lambda)).abs_f64()).fold(0.0, f64::max);
    let g = CMatrix::diag(v.clone());
    let ginv = CMatrix::diag(v.iter().map(|x| x.recip()).collect());
    let gauged_m0 = g.mul(raw_m0)?.mul(&ginv)?;
    let gauged_m1 = g.mul(raw_m1)?.mul(&ginv)?;
    Ok(GaugeResult { g, raw_m0: raw_m0.clone(), raw_m1: raw_m1.clone(), gauged_m0, gauged_m1, fit_residual })
}

/// Diagonal `g` with `g₁₁ = 1` such that `(1,…,1)` is a left
/// `λ`-eigenvector of `g·M̂₁·g⁻¹`; both generators are conjugated by it.
pub fn gauge_normalize(raw_m0: &CMatrix, raw_m1: &CMatrix, lambda: &BigComplex) -> Result<GaugeResult> {
    gauge_normalize_pinned(raw_m0, raw_m1, lambda, 0)
}

/// `max_t |det(t − M) − (t−1)^{p−1}(t−λ)|` over `t = 2, …, p+1`.
fn reflection_spectrum_residual(m: &CMatrix, lambda: &BigComplex) -> f64 {
    let p = m.n();
    let prec = m.prec();
    let one = BigComplex::one(prec);
    (2..=p + 1)
        .map(|t| {
            let t = BigComplex::from_int(t as i64, prec);
            let expected = &(&t - &one).pow_u(p as u32 - 1) * &(&t - lambda);
            (char_poly_at(m, &t) - expected).abs_f64()
        })
        .fold(0.0, f64::max)
}

/// Runs both loops, fits the gauge and compares with the closed forms.
pub fn compare_to_closed_form(params: &GhgParams, prec: u32, tol: f64, eps: Rational64) -> Result<Report> {
    let start = Instant::now();
    if params.p() > 4 {
        return Err(Error::Domain(format!("oracle comparison supports p ≤ 4, got {}", params.p())));
    }
    let set = ghg::build_circuit_set(params, prec)?;
    let (raw0, raw1) = rayon::join(
        || numeric_monodromy(params, &LoopSpec::rho0(eps), prec),
        || numeric_monodromy(params, &LoopSpec::rho1(eps), prec),
    );
    let (raw0, raw1) = (raw0?, raw1?);
    let gauge = gauge_normalize(&raw0, &raw1, &set.lambda)?;

    let mut checks = vec![
        Check::measured("oracle/raw_m0", raw0.max_abs_diff(&set.m0)?, tol),
        Check::measured("oracle/m1_spectrum", reflection_spectrum_residual(&raw1, &set.lambda), tol),
        Check::measured("oracle/gauge_fit", gauge.fit_residual, tol),
        Check::measured("oracle/gauged_m0", gauge.gauged_m0.max_abs_diff(&set.m0)?, tol),
        Check::measured("oracle/gauged_m1", gauge.gauged_m1.max_abs_diff(&set.m1)?, tol),
    ];
    let composed = gauge.gauged_m0.mul(&gauge.gauged_m1)?;
    checks.push(Check::measured("oracle/loop_composition", spectrum_residual(&composed, &set.exp.a), tol));
    checks.push(Check::measured("oracle/h_invariance", h_invariance_residual(&gauge.gauged_m1, &set.h)?, tol));
    let pinned = gauge_normalize_pinned(&raw0, &raw1, &set.lambda, params.p() - 1)?;
    checks.push(Check::measured("oracle/pin_invariance", pinned.gauged_m1.max_abs_diff(&gauge.gauged_m1)?, tol));

    let ctx = json!({ "params": params.to_json(), "eps": crate::params::format_rational(&eps) });
    Ok(Report {
        suite: "oracle".to_string(),
        seed: None,
        precision_bits: prec,
        checks: checks.into_iter().map(|c| c.with_context(ctx.clone())).collect(),
        wall_time: start.elapsed(),
    })
}

/// Base point `(ε₁, …, ε_m)` for the F_C basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FcBasePoint {
    pub eps: Vec<Rational64>,
}

pub const FC_EPS_RATIO: i64 = 100;

impl FcBasePoint {
    /// Requires `ε_{i+1} ≤ ε_i/100`, `Σ√ε_i < 1` and a point off the
    /// singular locus.
    pub fn new(eps: Vec<Rational64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::Domain("empty base point".into()));
        }
        let zero = Rational64::from_integer(0);
        if eps.iter().any(|e| *e <= zero) {
            return Err(Error::Domain("base point coordinates must be positive".into()));
        }
        for w in eps.windows(2) {
            if w[1] * FC_EPS_RATIO > w[0] {
                return Err(Error::Domain(format!("need ε_(i+1) ≤ ε_i/{FC_EPS_RATIO}, got {} after {}", w[1], w[0])));
            }
        }
        let root_sum: f64 = eps.iter().map(|e| (*e.numer() as f64 / *e.denom() as f64).sqrt()).sum();
        if root_sum >= 1.0 {
            return Err(Error::Domain(format!("Σ√ε = {root_sum} is not below 1")));
        }
        let point: Vec<BigComplex> = eps.iter().map(|e| rat(*e, 128)).collect();
        if fc_singular_poly(&point).abs_f64() <= half_precision_margin(128) {
            return Err(Error::Domain("base point lies on the singular locus".into()));
        }
        Ok(FcBasePoint { eps })
    }

    /// `ε_i = 1/(10·100^{i−1})`.
    pub fn default_for(m: usize) -> Self {
        let eps = (0..m).map(|i| Rational64::new(1, 10 * FC_EPS_RATIO.pow(i as u32))).collect();
        FcBasePoint::new(eps).expect("default base point is admissible")
    }

    pub fn m(&self) -> usize {
        self.eps.len()
    }

    pub fn point(&self, prec: u32) -> Vec<BigComplex> {
        self.eps.iter().map(|e| rat(*e, prec)).collect()
    }
}

/// The `J`-th basis solution of the F_C system at `x`: the prefactor
/// `∏_{j∈J} x_j^{1−b_j}` times the F_C series with shifted parameters,
/// summed shell by shell in the total degree.
pub fn eval_fc_series(params: &FcParams, x: &[BigComplex], j: &SubsetIndex, prec: u32) -> Result<BigComplex> {
    let m = params.m();
    if x.len() != m || j.m() != m {
        return Err(Error::DimensionMismatch { left: m, right: x.len() });
    }
    let root_sum: f64 = x.iter().map(|v| v.abs_f64().sqrt()).sum();
    let limit = SERIES_RADIUS.sqrt();
    if root_sum > limit + 1e-12 {
        return Err(Error::Domain(format!("Σ√|x_i| = {root_sum} exceeds √{SERIES_RADIUS}")));
    }
    let wp = prec + GUARD_BITS;
    let one = Rational64::from_integer(1);
    let two = Rational64::from_integer(2);
    let sigma: Rational64 = j.elements().iter().map(|&i| one - params.b[i - 1]).sum();
    let a1 = rat(params.a1 + sigma, wp);
    let a2 = rat(params.a2 + sigma, wp);
    let c: Vec<BigComplex> = (0..m)
        .map(|i| rat(if j.contains(i + 1) { two - params.b[i] } else { params.b[i] }, wp))
        .collect();
    if let Some(bad) = c.iter().find(|v| is_nonpositive_integer(v)) {
        return Err(Error::Domain(format!("lower parameter {bad} is a non-positive integer")));
    }
    let xs: Vec<BigComplex> = x.iter().map(|v| v.with_prec(wp)).collect();
    let bound = [&a1, &a2].iter().map(|v| v.abs_f64()).sum::<f64>() + c.iter().map(|v| v.abs_f64()).fold(0.0, f64::max);
    let n0 = (2.0 * bound).ceil() as usize + 4;
    let eps = series_eps(prec);

    // every multi-index of degree N+1 is reached once, by raising the last
    // nonzero coordinate or one after it
    let mut shell: Vec<(Vec<u32>, usize, BigComplex)> = vec![(vec![0; m], 0, BigComplex::one(wp))];
    let mut sum = BigComplex::one(wp);
    let mut prev_mass = 1f64;
    let mut terms = 1usize;
    for n in 0usize.. {
        let nf = BigComplex::from_int(n as i64, wp);
        let common = &(&a1 + &nf) * &(&a2 + &nf);
        let mut next = Vec::new();
        for (idx, last, t) in &shell {
            let base = t * &common;
            for i in *last..m {
                let ni = BigComplex::from_int(idx[i] as i64, wp);
                let den = &(&c[i] + &ni) * &(&ni + &BigComplex::one(wp));
                let term = &(&base * &xs[i]) / &den;
                let mut k = idx.clone();
                k[i] += 1;
                next.push((k, i, term));
            }
        }
        terms += next.len();
        if terms > MAX_TERMS {
            return Err(Error::NoConvergence { terms });
        }
        let mass: f64 = next.iter().map(|(_, _, t)| t.abs_f64()).sum();
        for (_, _, t) in &next {
            sum = &sum + t;
        }
        shell = next;
        if n + 1 >= n0 && prev_mass > 0.0 {
            let ratio = mass / prev_mass;
            if ratio < 1.0 {
                let tail = mass * ratio / (1.0 - ratio);
                if mass.max(tail) < eps * sum.abs_f64().max(1.0) {
                    break;
                }
            }
        }
        if mass == 0.0 {
            break;
        }
        prev_mass = mass;
    }

    let mut prefactor = BigComplex::one(wp);
    for i in j.elements() {
        let s = rat(one - params.b[i - 1], wp);
        prefactor = &prefactor * &xs[i - 1].powc(&s);
    }
    Ok((&prefactor * &sum).with_prec(prec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn c(re: f64, im: f64, prec: u32) -> BigComplex {
        BigComplex::from_parts_f64(re, im, prec)
    }

    fn example() -> GhgParams {
        GhgParams::validated(vec![r(1, 3), r(1, 5)], vec![r(1, 2)]).unwrap()
    }

    /// `−ln(1−x)/x` from its own power series `Σ x^n/(n+1)`.
    fn log_series(x: &BigComplex, prec: u32) -> BigComplex {
        let mut acc = BigComplex::zero(prec);
        let mut pw = BigComplex::one(prec);
        for n in 0..2000 {
            acc = &acc + &(&pw / &BigComplex::from_int(n + 1, prec));
            pw = &pw * x;
        }
        acc
    }

    #[test]
    fn pfq_at_zero_is_one() {
        let a = vec![c(0.3, 0.0, 128), c(0.7, 0.0, 128)];
        let b = vec![c(0.5, 0.0, 128)];
        let v = eval_pfq(&a, &b, &BigComplex::zero(128), 128).unwrap();
        assert_eq!(v, BigComplex::one(128));
    }

    #[test]
    fn two_f_one_log() {
        let prec = 256;
        let one = BigComplex::one(prec);
        let two = BigComplex::from_int(2, prec);
        let x = BigComplex::from_rational(r(1, 2), prec);
        let v = eval_pfq(&[one.clone(), one.clone()], &[two.clone()], &x, prec).unwrap();
        let expected = -(&(&one - &x).ln() / &x);
        assert!((&v - &expected).abs_f64() < 1e-70);
        assert!((&v - &log_series(&x, prec)).abs_f64() < 1e-70);
        assert!((v.re().to_f64() - 1.3862943611198906).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_domain() {
        let one = BigComplex::one(64);
        let x = BigComplex::from_f64(0.95, 64);
        assert!(matches!(eval_pfq(&[one.clone(), one.clone()], &[one.clone()], &x, 64), Err(Error::Domain(_))));
        let zero = BigComplex::zero(64);
        let half = BigComplex::from_f64(0.5, 64);
        assert!(matches!(eval_pfq(&[one.clone(), one], &[zero], &half, 64), Err(Error::Domain(_))));
    }

    #[test]
    fn basis_p2_matches_two_f_one() {
        let prec = 128;
        let params = example();
        let x = BigComplex::from_rational(r(1, 10), prec);
        let f = fundamental_system_ghg(&params, &x, prec).unwrap();
        let q = |n, d| rat(r(n, d), prec);
        let f1 = eval_pfq(&[q(1, 3), q(1, 5)], &[q(1, 2)], &x, prec).unwrap();
        let f2 = &x.powc(&q(1, 2)) * &eval_pfq(&[q(5, 6), q(7, 10)], &[q(3, 2)], &x, prec).unwrap();
        assert!((&f[0] - &f1).abs_f64() < 1e-35);
        assert!((&f[1] - &f2).abs_f64() < 1e-35);
    }

    #[test]
    fn small_x_leading_behaviour() {
        let prec = 128;
        let params = example();
        let x = BigComplex::from_rational(r(1, 1_000_000), prec);
        let f = fundamental_system_ghg(&params, &x, prec).unwrap();
        assert!((&f[0] - &BigComplex::one(prec)).abs_f64() < 1e-6);
        assert!(f[1].abs_f64() < 2e-3);
    }

    #[test]
    fn p3_parameter_shifts() {
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 4)]).unwrap();
        let e = basis_entries(&params);
        assert_eq!(e[2].shift, r(3, 4));
        assert_eq!(e[2].a, vec![r(13, 12), r(19, 20), r(25, 28)]);
        assert_eq!(e[2].b, vec![r(5, 4), r(7, 4)]);
        assert_eq!(e[1].b, vec![r(3, 2), r(3, 4)]);
    }

    #[test]
    fn basis_satisfies_the_operator() {
        let prec = 128;
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 4)]).unwrap();
        let op = GhgOperator::new(&params, prec);
        let x = c(0.2, 0.05, prec);
        for row in basis_derivatives(&params, &x, 3, prec).unwrap() {
            assert!(op.apply(&x, &row).abs_f64() < 1e-30);
        }
    }

    #[test]
    fn taylor_step_matches_series() {
        let prec = 192;
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 4)]).unwrap();
        let op = GhgOperator::new(&params, prec);
        let x0 = BigComplex::from_rational(r(1, 10), prec);
        let h = c(0.02, 0.03, prec);
        let x1 = &x0 + &h;
        let w0 = fundamental_wronskian(&params, &x0, prec).unwrap();
        let w1 = fundamental_wronskian(&params, &x1, prec).unwrap();
        let bound = (2f64).powf(-(prec as f64) / 2.0 + 16.0);
        for k in 0..3 {
            let stepped = op.taylor_step(&x0, &h, w0.row(k)).unwrap();
            for (a, b) in stepped.iter().zip(w1.row(k)) {
                assert!((a - b).abs_f64() <= bound);
            }
        }
    }

    #[test]
    fn constant_loop_is_identity() {
        let m = numeric_monodromy(&example(), &LoopSpec::constant(default_eps()), 128).unwrap();
        assert!(m.max_abs_diff(&CMatrix::identity(2, 128)).unwrap() < 1e-30);
    }

    #[test]
    fn rho0_is_diagonal() {
        let prec = 128;
        let params = example();
        let m = numeric_monodromy(&params, &LoopSpec::rho0(default_eps()), prec).unwrap();
        let set = ghg::build_circuit_set(&params, prec).unwrap();
        assert!(m.max_abs_diff(&set.m0).unwrap() < 1e-25);
    }

    #[test]
    fn rho1_spectrum() {
        let prec = 128;
        let params = example();
        let (m, path) = numeric_monodromy_with_path(&params, &LoopSpec::rho1(default_eps()), prec).unwrap();
        let lambda = ghg::lambda_ghg(&params.exponentiate(prec));
        assert!(reflection_spectrum_residual(&m, &lambda) < 1e-25);
        assert_eq!(path.centers.first(), path.centers.last());
        assert!(path.centers.windows(2).zip(&path.radii).all(|(w, d)| (&w[1] - &w[0]).abs_f64() <= 0.5 * d));
        let json = path.to_json();
        assert_eq!(json["centers"].as_array().unwrap().len(), path.centers.len());
    }

    #[test]
    fn gauge_identity_when_already_normalized() {
        let set = ghg::build_circuit_set(&example(), 128).unwrap();
        let g = gauge_normalize(&set.m0, &set.m1, &set.lambda).unwrap();
        assert!(g.g.max_abs_diff(&CMatrix::identity(2, 128)).unwrap() < 1e-30);
    }

    #[test]
    fn gauge_round_trip() {
        let prec = 128;
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5), r(1, 7)], vec![r(1, 2), r(1, 4)]).unwrap();
        let set = ghg::build_circuit_set(&params, prec).unwrap();
        let d = CMatrix::diag(vec![BigComplex::one(prec), c(0.3, -1.7, prec), c(-2.5, 0.4, prec)]);
        let dinv = d.inv().unwrap();
        let raw1 = dinv.mul(&set.m1).unwrap().mul(&d).unwrap();
        let raw0 = dinv.mul(&set.m0).unwrap().mul(&d).unwrap();
        for pin in 0..3 {
            let g = gauge_normalize_pinned(&raw0, &raw1, &set.lambda, pin).unwrap();
            assert!(g.g.max_abs_diff(&d).unwrap() < 1e-30);
            assert!(g.gauged_m1.max_abs_diff(&set.m1).unwrap() < 1e-30);
        }
    }

    #[test]
    fn vanishing_component_is_reported() {
        let prec = 128;
        let set = ghg::build_circuit_set(&example(), prec).unwrap();
        // λ-eigenvector (1, 0) when the second column of M − λ vanishes
        let m = CMatrix::from_fn(2, prec, |i, j| match (i, j) {
            (0, 0) => set.lambda.clone(),
            (1, 1) => BigComplex::one(prec),
            (1, 0) => BigComplex::one(prec),
            _ => BigComplex::zero(prec),
        });
        assert!(matches!(gauge_normalize(&m, &m, &set.lambda), Err(Error::VanishingComponent { index: 1, .. })));
    }

    #[test]
    fn oracle_p2_end_to_end() {
        let rep = compare_to_closed_form(&example(), 128, 1e-10, default_eps()).unwrap();
        for c in &rep.checks {
            assert!(c.pass, "{} {:?}", c.name, c.residual);
        }
    }

    #[test]
    fn wrong_sign_h_is_detected() {
        let prec = 128;
        let params = example();
        let set = ghg::build_circuit_set(&params, prec).unwrap();
        let raw0 = numeric_monodromy(&params, &LoopSpec::rho0(default_eps()), prec).unwrap();
        let raw1 = numeric_monodromy(&params, &LoopSpec::rho1(default_eps()), prec).unwrap();
        let g = gauge_normalize(&raw0, &raw1, &set.lambda).unwrap();
        let mut h = set.h.clone();
        h.set(1, 1, -set.h.get(1, 1));
        let wrong = ghg::build_reflection(&h, &set.lambda).unwrap();
        assert!(g.gauged_m1.max_abs_diff(&wrong).unwrap() >= 1e-2);
    }

    #[test]
    fn fc_base_point_rules() {
        assert!(FcBasePoint::new(vec![r(1, 10), r(1, 100)]).is_err());
        assert!(FcBasePoint::new(vec![r(1, 10), r(1, 1000)]).is_ok());
        assert!(FcBasePoint::new(vec![r(9, 10)]).is_ok());
        assert!(FcBasePoint::new(vec![r(1, 1)]).is_err());
        assert_eq!(FcBasePoint::default_for(3).eps[2], r(1, 100_000));
    }

    #[test]
    fn fc_series_trivial_and_m1_collapse() {
        let prec = 128;
        let params = FcParams::validated(r(1, 3), r(1, 5), vec![r(1, 2), r(1, 7)]).unwrap();
        let zero = vec![BigComplex::zero(prec); 2];
        let v = eval_fc_series(&params, &zero, &SubsetIndex::empty(2), prec).unwrap();
        assert_eq!(v, BigComplex::one(prec));

        let p1 = FcParams::validated(r(1, 3), r(1, 5), vec![r(1, 2)]).unwrap();
        let g = p1.as_ghg().unwrap();
        for &t in &[0.05, 0.3, 0.6, 0.8] {
            let x = BigComplex::from_f64(t, prec);
            let basis = fundamental_system_ghg(&g, &x, prec).unwrap();
            for (k, jset) in SubsetIndex::all(1).enumerate() {
                let v = eval_fc_series(&p1, std::slice::from_ref(&x), &jset, prec).unwrap();
                assert!((&v - &basis[k]).abs_f64() < 1e-30);
            }
        }
    }

    #[test]
    fn fc_series_m2_prefactor() {
        let prec = 128;
        let params = FcParams::validated(r(1, 3), r(1, 5), vec![r(1, 2), r(1, 7)]).unwrap();
        let x = vec![BigComplex::from_rational(r(1, 10), prec), BigComplex::from_rational(r(1, 1000), prec)];
        let j = SubsetIndex::from_elements(2, &[2]);
        let v = eval_fc_series(&params, &x, &j, prec).unwrap();
        // as x₂ → 0 the series tends to ₂F₁(a₁+σ, a₂+σ; b₁; x₁), σ = 1 − b₂
        let lead = x[1].powc(&rat(r(6, 7), prec));
        let limit = eval_pfq(&[rat(r(8, 7) + r(1, 21), prec), rat(r(6, 7) + r(1, 5), prec)], &[rat(r(1, 2), prec)], &x[0], prec)
            .unwrap();
        let ratio = &v / &lead;
        assert!((&ratio - &limit).abs_f64() < 1e-2);
        assert!((&ratio - &BigComplex::one(prec)).abs_f64() > 0.1);
    }

    #[test]
    fn fc_series_m1_random_points() {
        let prec = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = FcParams::validated(r(2, 7), r(-1, 3), vec![r(3, 8)]).unwrap();
        let g = params.as_ghg().unwrap();
        let q: Vec<BigComplex> = g.a.iter().map(|v| rat(*v, prec)).collect();
        let b: Vec<BigComplex> = g.b.iter().map(|v| rat(*v, prec)).collect();
        for _ in 0..5 {
            let radius: f64 = rng.gen_range(0.0..0.9);
            let angle: f64 = rng.gen_range(-3.1..3.1);
            let x = c(radius * angle.cos(), radius * angle.sin(), prec);
            let v = eval_fc_series(&params, std::slice::from_ref(&x), &SubsetIndex::empty(1), prec).unwrap();
            assert!((&v - &eval_pfq(&q, &b, &x, prec).unwrap()).abs_f64() < 1e-30);
        }
    }
}
