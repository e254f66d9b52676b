//! Named, seeded checks of the closed-form identities.
//!
//! Each check reports a residual and a tolerance. Structural failures (wrong
//! block shape, rank other than one) report an infinite residual. A check
//! whose preconditions fail is kept in the report as skipped, with a reason.

use std::ops::RangeInclusive;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::fc::{self, CircuitSetFc, SubsetIndex};
use crate::ghg::{self, CircuitSetGhg};
use crate::numerics::{char_poly_at, default_tolerance, BigComplex, CMatrix};
use crate::params::{random_fc, random_ghg, validate_fc, FcParams, GhgParams, ParamSource, Vee};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    /// `None` only for skipped checks.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub skipped: Option<String>,
    pub note: Option<String>,
    pub context: Option<Value>,
}

impl Check {
    pub fn measured(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            residual: Some(residual),
            tolerance,
            pass: residual <= tolerance,
            skipped: None,
            note: None,
            context: None,
        }
    }

    /// Like [`Check::measured`], but a residual above tolerance is reported
    /// as `∞` with the measured value kept in the note.
    pub fn structural(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        if residual <= tolerance {
            return Check::measured(name, residual, tolerance);
        }
        let mut c = Check::measured(name, f64::INFINITY, tolerance);
        c.note = Some(format!("measured {residual:.3e}"));
        c
    }

    pub fn skipped(name: impl Into<String>, tolerance: f64, reason: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            residual: None,
            tolerance,
            pass: false,
            skipped: Some(reason.into()),
            note: None,
            context: None,
        }
    }

    /// A check that could not be evaluated because the computation errored.
    pub fn errored(name: impl Into<String>, tolerance: f64, err: &crate::Error) -> Self {
        let mut c = Check::measured(name, f64::INFINITY, tolerance);
        c.note = Some(err.to_string());
        c
    }

    fn from_result(name: &str, r: Result<f64>, tolerance: f64) -> Self {
        match r {
            Ok(v) => Check::measured(name, v, tolerance),
            Err(e) => Check::errored(name, tolerance, &e),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_context(mut self, context: Value) -> Self {
        self.context = Some(context);
        self
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }

    pub fn failed(&self) -> bool {
        !self.is_skipped() && !self.pass
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("name".into(), json!(self.name));
        obj.insert("residual".into(), self.residual.map_or(Value::Null, |r| json!(format_residual(r))));
        obj.insert("tolerance".into(), json!(format!("{:e}", self.tolerance)));
        obj.insert("pass".into(), json!(self.pass));
        if let Some(s) = &self.skipped {
            obj.insert("skipped".into(), json!(s));
        }
        if let Some(n) = &self.note {
            obj.insert("note".into(), json!(n));
        }
        if let Some(Value::Object(ctx)) = &self.context {
            for (k, v) in ctx {
                obj.insert(k.clone(), v.clone());
            }
        }
        Value::Object(obj)
    }
}

pub fn format_residual(r: f64) -> String {
    if r.is_infinite() {
        "inf".to_string()
    } else if r.is_nan() {
        "nan".to_string()
    } else {
        format!("{r:.1e}")
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suite: String,
    pub seed: Option<u64>,
    pub precision_bits: u32,
    pub checks: Vec<Check>,
    /// Not serialized, so that the JSON is reproducible.
    pub wall_time: Duration,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| !c.failed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn skipped_count(&self) -> usize {
        self.checks.iter().filter(|c| c.is_skipped()).count()
    }

    /// Largest residual among checks whose name starts with `prefix`.
    pub fn max_residual(&self, prefix: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .filter_map(|c| c.residual)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "suite": self.suite,
            "seed": self.seed,
            "precision_bits": self.precision_bits,
            "checks": self.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn summary(&self) -> String {
        let failed = self.failures().count();
        let skipped = self.skipped_count();
        let passed = self.checks.len() - failed - skipped;
        format!(
            "{}: {} checks, {} passed, {} failed, {} skipped in {:.2?}",
            self.suite,
            self.checks.len(),
            passed,
            failed,
            skipped,
            self.wall_time
        )
    }
}

fn vec_max_diff(a: &[BigComplex], b: &[BigComplex]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs_f64()).fold(0.0, f64::max)
}

/// `max |M·H·ᵗ(M^∨) − H|`.
pub fn h_invariance_residual(m: &CMatrix, h: &CMatrix) -> Result<f64> {
    let lhs = m.mul(h)?.mul(&m.vee().transpose())?;
    lhs.max_abs_diff(h)
}

pub fn check_h_invariance(m: &CMatrix, h: &CMatrix, tol: f64) -> Check {
    match h_invariance_residual(m, h) {
        Ok(r) => Check::measured("h_invariance", r, tol),
        Err(e) => Check::errored("h_invariance", tol, &e),
    }
}

/// `max_ℓ |det((1/A_ℓ)·id − P)|` for a candidate `P = M₀M₁`.
pub fn spectrum_residual(product: &CMatrix, a: &[BigComplex]) -> f64 {
    a.iter().map(|x| char_poly_at(product, &x.recip()).abs_f64()).fold(0.0, f64::max)
}

pub fn check_spectrum_ghg(set: &CircuitSetGhg, tol: f64) -> Check {
    match set.m0.mul(&set.m1) {
        Ok(prod) => Check::measured("spectrum", spectrum_residual(&prod, &set.exp.a), tol),
        Err(e) => Check::errored("spectrum", tol, &e),
    }
}

/// `max_j |Σ_i M_ij − λ|`.
pub fn column_sum_residual(m: &CMatrix, lambda: &BigComplex) -> f64 {
    let ones = vec![BigComplex::one(m.prec()); m.n()];
    match m.left_mul_vec(&ones) {
        Ok(sums) => sums.iter().map(|s| (s - lambda).abs_f64()).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

/// `max_k |v_k M − v_k|` over the fixed row vectors `H_kk e₁ − H_11 e_k`.
pub fn fixed_vector_residual(m: &CMatrix, h: &CMatrix) -> f64 {
    let n = m.n();
    let prec = m.prec();
    let mut worst = 0f64;
    for k in 1..n {
        let mut v = vec![BigComplex::zero(prec); n];
        v[0] = h.get(k, k).clone();
        v[k] = -h.get(0, 0);
        match m.left_mul_vec(&v) {
            Ok(w) => worst = worst.max(vec_max_diff(&w, &v)),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// Largest 2×2 minor of `M − id`; zero exactly when the rank is at most one.
pub fn rank_one_residual(m: &CMatrix) -> f64 {
    let n = m.n();
    let x = m.sub(&CMatrix::identity(n, m.prec())).expect("same size");
    let mut worst = 0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            for j in 0..n {
                for l in (j + 1)..n {
                    let minor = &(x.get(i, j) * x.get(k, l)) - &(x.get(i, l) * x.get(k, j));
                    worst = worst.max(minor.abs_f64());
                }
            }
        }
    }
    worst
}

/// The full per-set check list for the rank-`p` system.
pub fn ghg_checks(set: &CircuitSetGhg, tol: f64) -> Vec<Check> {
    let mut out = vec![
        check_h_invariance(&set.m0, &set.h, tol).named("h_invariance/M0"),
        check_h_invariance(&set.m1, &set.h, tol).named("h_invariance/M1"),
        check_spectrum_ghg(set, tol),
        Check::measured("reflection/column_sums", column_sum_residual(&set.m1, &set.lambda), tol),
        Check::measured("reflection/fixed_vectors", fixed_vector_residual(&set.m1, &set.h), tol),
        Check::structural("reflection/rank_one", rank_one_residual(&set.m1), tol),
        Check::measured("det_m1", (set.m1.det() - &set.lambda).abs_f64(), tol),
        Check::measured("trace_h", (set.h.trace() - ghg::trace_h_closed_form(&set.exp)).abs_f64(), tol),
    ];
    if set.p() == 2 {
        out.push(Check::from_result(
            "p2/explicit_m1",
            set.m1.max_abs_diff(&ghg::explicit_p2_m1(&set.exp)),
            tol,
        ));
        out.push(Check::measured("p2/h", (set.h.get(1, 1) - &ghg::explicit_p2_h(&set.exp)).abs_f64(), tol));
    }
    out
}

/// Commutation of the diagonal generators and the braid relations
/// `(M_i M_{m+1})² = (M_{m+1} M_i)²`.
pub fn fc_relations_residual(set: &CircuitSetFc) -> Result<f64> {
    let mut worst = 0f64;
    for i in 0..set.m.len() {
        for j in (i + 1)..set.m.len() {
            let ab = set.m[i].mul(&set.m[j])?;
            let ba = set.m[j].mul(&set.m[i])?;
            worst = worst.max(ab.max_abs_diff(&ba)?);
        }
    }
    for mi in &set.m {
        let x = mi.mul(&set.mlast)?;
        let y = set.mlast.mul(mi)?;
        worst = worst.max(x.mul(&x)?.max_abs_diff(&y.mul(&y)?)?);
    }
    Ok(worst)
}

pub fn check_fc_relations(set: &CircuitSetFc, tol: f64) -> Check {
    Check::from_result("relations", fc_relations_residual(set), tol)
}

/// Fixed row vectors `h_J e_∅ − e_J` of `M_{m+1}`, the λ-eigenvector
/// `(1,…,1)`, and the eigenvalues `1`, `1/B_i` of each `M_i` on unit vectors.
pub fn fc_eigen_residual(set: &CircuitSetFc) -> f64 {
    let n = set.mlast.n();
    let prec = set.prec();
    let mut worst = fixed_vector_residual(&set.mlast, &set.h);
    let ones = vec![BigComplex::one(prec); n];
    match set.mlast.left_mul_vec(&ones) {
        Ok(w) => {
            let target: Vec<BigComplex> = ones.iter().map(|x| x * &set.lambda).collect();
            worst = worst.max(vec_max_diff(&w, &target));
        }
        Err(_) => return f64::INFINITY,
    }
    for (i, mi) in set.m.iter().enumerate() {
        let binv = set.exp.b[i].recip();
        for j in SubsetIndex::all(set.vars()) {
            let mut e = vec![BigComplex::zero(prec); n];
            e[j.index()] = BigComplex::one(prec);
            let expected: Vec<BigComplex> =
                e.iter().map(|x| if j.contains(i + 1) { x * &binv } else { x.clone() }).collect();
            match mi.left_mul_vec(&e) {
                Ok(w) => worst = worst.max(vec_max_diff(&w, &expected)),
                Err(_) => return f64::INFINITY,
            }
        }
    }
    worst
}

/// Residual of `(1+B_m)(1−λ) = (𝟙H ᵗw^∨ / 𝟙H ᵗ𝟙) B_m (1−λ)²` with
/// `w = 𝟙 M_m⁻¹` evaluated from the built matrices.
pub fn lambda_quadratic_residual(set: &CircuitSetFc) -> Result<f64> {
    let m = set.vars();
    let prec = set.prec();
    let n = set.h.n();
    let ones = vec![BigComplex::one(prec); n];
    let w = set.m[m - 1].inv()?.left_mul_vec(&ones)?;
    let one = BigComplex::one(prec);
    let diag = set.h.diagonal();
    let vhv = crate::numerics::sum(&diag, prec);
    let wv: Vec<BigComplex> = diag.iter().zip(w.vee()).map(|(h, x)| h * &x).collect();
    let vhw = crate::numerics::sum(&wv, prec);
    let bm = &set.exp.b[m - 1];
    let oml = &one - &set.lambda;
    let lhs = &(&one + bm) * &oml;
    let rhs = &(&(&vhw / &vhv) * bm) * &(&oml * &oml);
    Ok((lhs - rhs).abs_f64())
}

fn shifted_case(
    name: &str,
    label: &str,
    candidate: Option<FcParams>,
    prec: u32,
    tol: f64,
) -> std::result::Result<CircuitSetFc, Check> {
    let params = match candidate {
        Some(p) => p,
        None => return Err(Check::skipped(name, tol, format!("{label}: no reduced system"))),
    };
    match validate_fc(&params) {
        Ok(v) if v.is_empty() => {}
        Ok(v) => {
            let list = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
            return Err(Check::skipped(name, tol, format!("{label}: {list}")));
        }
        Err(e) => return Err(Check::skipped(name, tol, format!("{label}: {e}"))),
    }
    fc::build_circuit_set(&params, prec).map_err(|e| Check::errored(name, tol, &e))
}

/// Block structure of the reduction chain and identification of the
/// diagonal blocks of `N_m` with the `(m−1)`-variable builds.
pub fn check_reduction(set: &CircuitSetFc, tol: f64) -> Vec<Check> {
    let m = set.vars();
    let prec = set.prec();
    if m < 2 {
        return Vec::new();
    }
    let chain = match fc::reduction_chain(set) {
        Ok(c) => c,
        Err(e) => return vec![Check::errored("reduction/chain", tol, &e)],
    };
    let mut out = Vec::new();
    for (k, n) in chain.iter().enumerate() {
        let block = 1usize << (m - k - 1);
        out.push(Check::structural(
            format!("reduction/off_block/N{}", m - k),
            fc::off_block_mass(n, block),
            tol,
        ));
    }

    let half = 1usize << (m - 1);
    let nm = &chain[0];
    let truncated = shifted_case("reduction/top_left", "SkippedTruncatedCase", set.params.truncated(), prec, tol);
    let shifted = shifted_case("reduction/bottom_right", "SkippedShiftedCase", set.params.shifted(), prec, tol);

    match &truncated {
        Ok(t) => out.push(Check::from_result("reduction/top_left", nm.block(0, half).max_abs_diff(&t.mlast), tol)),
        Err(c) => out.push(c.clone()),
    }
    match &shifted {
        Ok(s) => out.push(Check::from_result("reduction/bottom_right", nm.block(half, half).max_abs_diff(&s.mlast), tol)),
        Err(c) => out.push(c.clone()),
    }

    let lambda2 = &set.lambda * &set.lambda;
    out.push(Check::measured("reduction/det", (nm.det() - lambda2).abs_f64(), tol));

    // M_1 … M_{m−1} restrict to the same two blocks.
    let mut worst = 0f64;
    for (i, mi) in set.m.iter().take(m - 1).enumerate() {
        worst = worst.max(fc::off_block_mass(mi, half));
        if let Ok(t) = &truncated {
            worst = worst.max(mi.block(0, half).max_abs_diff(&t.m[i]).unwrap_or(f64::INFINITY));
        }
        if let Ok(s) = &shifted {
            worst = worst.max(mi.block(half, half).max_abs_diff(&s.m[i]).unwrap_or(f64::INFINITY));
        }
    }
    if m > 1 {
        out.push(Check::measured("reduction/restricted_generators", worst, tol));
    }
    out
}

/// `m = 1` F_C data against the rank-2 build with the same parameters.
pub fn fc_m1_vs_ghg_residual(set: &CircuitSetFc) -> Result<f64> {
    let params = set.params.as_ghg().expect("m = 1");
    let g = ghg::build_circuit_set(&params, set.prec())?;
    Ok(set.m[0]
        .max_abs_diff(&g.m0)?
        .max(set.mlast.max_abs_diff(&g.m1)?)
        .max(set.h.max_abs_diff(&g.h)?)
        .max((&set.lambda - &g.lambda).abs_f64()))
}

/// The full per-set check list for the `m`-variable F_C system.
pub fn fc_checks(set: &CircuitSetFc, tol: f64) -> Vec<Check> {
    let m = set.vars();
    let mut out: Vec<Check> = set
        .generators()
        .enumerate()
        .map(|(i, g)| check_h_invariance(g, &set.h, tol).named(format!("h_invariance/M{}", i + 1)))
        .collect();
    // with one variable the group is free: no relations, no N_m
    if m >= 2 {
        out.push(check_fc_relations(set, tol));
    } else {
        out.push(Check::skipped("relations", tol, "NotApplicable: relations need m ≥ 2"));
    }
    out.push(Check::measured("eigenstructure", fc_eigen_residual(set), tol));
    out.push(Check::measured("det_mlast", (set.mlast.det() - &set.lambda).abs_f64(), tol));
    out.push(Check::measured("trace_h", (set.h.trace() - fc::fc_trace_h_closed_form(&set.exp)).abs_f64(), tol));
    if m >= 2 {
        out.push(Check::from_result("lambda_quadratic", lambda_quadratic_residual(set), tol));
    } else {
        out.push(Check::skipped("lambda_quadratic", tol, "NotApplicable: the quadratic comes from N_m, m ≥ 2"));
    }
    if m >= 2 {
        out.extend(check_reduction(set, tol));
    }
    if m == 1 {
        out.push(Check::from_result("m1_equals_p2", fc_m1_vs_ghg_residual(set), tol));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum System {
    Ghg,
    Fc,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::Ghg => "ghg",
            System::Fc => "fc",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub system: System,
    pub trials: usize,
    pub seed: u64,
    pub precision_bits: u32,
    pub tolerance: f64,
    /// `p` for the rank-`p` system, `m` for F_C.
    pub sizes: RangeInclusive<usize>,
    pub jobs: Option<usize>,
}

impl SuiteOptions {
    pub fn new(system: System, trials: usize, seed: u64, precision_bits: u32) -> Self {
        let sizes = match system {
            System::Ghg => 2..=6,
            System::Fc => 1..=3,
        };
        SuiteOptions {
            system,
            trials,
            seed,
            precision_bits,
            tolerance: default_tolerance(precision_bits),
            sizes,
            jobs: None,
        }
    }

    pub fn sizes(mut self, sizes: RangeInclusive<usize>) -> Self {
        self.sizes = sizes;
        self
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn jobs(mut self, jobs: Option<usize>) -> Self {
        self.jobs = jobs;
        self
    }
}

/// Parameters for one trial: a ChaCha8 stream per trial index, so trials
/// are independent of scheduling.
pub fn trial_params(opts: &SuiteOptions, trial: usize) -> ParamSource {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(trial as u64);
    let size = rng.gen_range(opts.sizes.clone());
    match opts.system {
        System::Ghg => ParamSource::Ghg(random_ghg(&mut rng, size)),
        System::Fc => ParamSource::Fc(random_fc(&mut rng, size)),
    }
}

/// Builds the circuit set and runs every applicable check.
pub fn checks_for(source: &ParamSource, precision_bits: u32, tol: f64) -> Vec<Check> {
    match source {
        ParamSource::Ghg(p) => match ghg::build_circuit_set(p, precision_bits) {
            Ok(set) => ghg_checks(&set, tol),
            Err(e) => vec![Check::errored("build", tol, &e)],
        },
        ParamSource::Fc(p) => match fc::build_circuit_set(p, precision_bits) {
            Ok(set) => fc_checks(&set, tol),
            Err(e) => vec![Check::errored("build", tol, &e)],
        },
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

pub fn run_suite(opts: &SuiteOptions) -> Report {
    let start = Instant::now();
    let per_trial: Vec<Vec<Check>> = in_pool(opts.jobs, || {
        (0..opts.trials.max(1))
            .into_par_iter()
            .map(|trial| {
                let source = trial_params(opts, trial);
                let ctx = json!({ "params": source.to_json(), "seed": opts.seed, "trial": trial });
                checks_for(&source, opts.precision_bits, opts.tolerance)
                    .into_iter()
                    .map(|c| c.with_context(ctx.clone()))
                    .collect()
            })
            .collect()
    });
    Report {
        suite: opts.system.name().to_string(),
        seed: Some(opts.seed),
        precision_bits: opts.precision_bits,
        checks: per_trial.into_iter().flatten().collect(),
        wall_time: start.elapsed(),
    }
}

/// A one-trial report for explicitly given parameters.
pub fn run_fixed(source: &ParamSource, precision_bits: u32, tol: f64) -> Report {
    let start = Instant::now();
    let suite = match source {
        ParamSource::Ghg(_) => "ghg",
        ParamSource::Fc(_) => "fc",
    };
    let ctx = json!({ "params": source.to_json() });
    let checks = checks_for(source, precision_bits, tol).into_iter().map(|c| c.with_context(ctx.clone())).collect();
    Report { suite: suite.to_string(), seed: None, precision_bits, checks, wall_time: start.elapsed() }
}

/// Convenience for callers holding a rank-`p` parameter set.
pub fn run_fixed_ghg(params: &GhgParams, precision_bits: u32, tol: f64) -> Report {
    run_fixed(&ParamSource::Ghg(params.clone()), precision_bits, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    const P: u32 = 256;
    const TOL: f64 = 1e-40;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn ghg_example() -> CircuitSetGhg {
        let params = GhgParams::validated(vec![r(1, 3), r(1, 5)], vec![r(1, 2)]).unwrap();
        ghg::build_circuit_set(&params, P).unwrap()
    }

    fn fc_example() -> CircuitSetFc {
        let params = FcParams::validated(r(1, 3), r(1, 5), vec![r(1, 2), r(1, 7)]).unwrap();
        fc::build_circuit_set(&params, P).unwrap()
    }

    #[test]
    fn invariance_of_m0_is_exact_and_identity_trivial() {
        let set = ghg_example();
        assert!(h_invariance_residual(&set.m0, &set.h).unwrap() < 1e-70);
        let id = CMatrix::identity(2, P);
        assert_eq!(h_invariance_residual(&id, &set.h).unwrap(), 0.0);
        assert!(check_h_invariance(&set.m1, &set.h, TOL).pass);
    }

    #[test]
    fn spectrum_and_negative_control() {
        let set = ghg_example();
        assert!(check_spectrum_ghg(&set, TOL).pass);
        let id = CMatrix::identity(2, P);
        let res = spectrum_residual(&id, &set.exp.a);
        assert!(res > 1e-3);
        assert!(!Check::measured("spectrum", res, TOL).pass);
    }

    #[test]
    fn ghg_example_all_pass() {
        let set = ghg_example();
        for c in ghg_checks(&set, TOL) {
            assert!(c.pass, "{} {:?}", c.name, c.residual);
        }
    }

    #[test]
    fn fc_relations_and_perturbation() {
        let mut set = fc_example();
        assert!(check_fc_relations(&set, TOL).pass);
        let prec = set.prec();
        let v = set.mlast.get(1, 2) + &BigComplex::from_f64(1e-10, prec);
        set.mlast.set(1, 2, v);
        let c = check_fc_relations(&set, TOL);
        assert!(!c.pass);
        assert!(c.residual.unwrap() >= 1e-12);
    }

    #[test]
    fn diagonal_pairs_commute_exactly() {
        let set = fc_example();
        let ab = set.m[0].mul(&set.m[1]).unwrap();
        let ba = set.m[1].mul(&set.m[0]).unwrap();
        assert_eq!(ab.max_abs_diff(&ba).unwrap(), 0.0);
    }

    #[test]
    fn fc_example_all_pass() {
        let set = fc_example();
        let checks = fc_checks(&set, TOL);
        assert!(checks.iter().any(|c| c.name == "reduction/bottom_right"));
        for c in checks {
            assert!(c.pass, "{} {:?} {:?}", c.name, c.residual, c.skipped);
        }
    }

    #[test]
    fn reduction_block_sizes_m3() {
        let params = FcParams::validated(r(1, 3), r(1, 5), vec![r(1, 2), r(1, 7), r(2, 9)]).unwrap();
        let set = fc::build_circuit_set(&params, P).unwrap();
        let checks = check_reduction(&set, TOL);
        let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"reduction/off_block/N3"));
        assert!(names.contains(&"reduction/off_block/N2"));
        assert!(checks.iter().all(|c| c.pass || c.is_skipped()));
        assert_eq!(fc::reduction_matrices(&set, 0, TOL).unwrap().len(), 2);
        assert_eq!(fc::reduction_matrices(&set, 1, TOL).unwrap()[0].n(), 2);
    }

    #[test]
    fn resonant_shift_is_skipped_not_passed() {
        // a₁+a₂−b₁−2b₂ = 1/2 makes 2(a₁+a₂−Σb) of the shifted system integral
        let params = FcParams::validated(r(1, 3), r(1, 5), vec![r(1, 7), r(-23, 420)]).unwrap();
        let shifted = params.shifted().unwrap();
        assert!(!validate_fc(&shifted).unwrap().is_empty());
        let set = fc::build_circuit_set(&params, P).unwrap();
        let checks = check_reduction(&set, TOL);
        let br = checks.iter().find(|c| c.name == "reduction/bottom_right").unwrap();
        assert!(br.is_skipped());
        assert!(!br.pass);
        assert!(br.skipped.as_ref().unwrap().starts_with("SkippedShiftedCase"));
        let off = checks.iter().find(|c| c.name == "reduction/off_block/N2").unwrap();
        assert!(off.pass);
    }

    #[test]
    fn structural_failure_is_infinite() {
        let c = Check::structural("x", 1e-3, TOL);
        assert_eq!(c.residual, Some(f64::INFINITY));
        assert!(!c.pass);
        assert_eq!(c.to_json()["residual"], "inf");
    }

    #[test]
    fn suites_are_deterministic() {
        let opts = SuiteOptions::new(System::Ghg, 3, 7, 128).jobs(Some(2));
        let a = run_suite(&opts).to_json().to_string();
        let b = run_suite(&opts.clone().jobs(Some(1))).to_json().to_string();
        assert_eq!(a, b);
    }

    #[test]
    fn fc_small_suite_passes() {
        let opts = SuiteOptions::new(System::Fc, 6, 3, P).sizes(1..=2);
        let rep = run_suite(&opts);
        assert!(rep.all_passed(), "{}", rep.summary());
        assert!(rep.checks.iter().any(|c| c.name == "m1_equals_p2") || rep.checks.iter().any(|c| c.name.starts_with("reduction")));
    }

    #[test]
    fn json_shape() {
        let rep = run_fixed_ghg(
            &GhgParams::validated(vec![r(1, 3), r(1, 5)], vec![r(1, 2)]).unwrap(),
            P,
            TOL,
        );
        let v = rep.to_json();
        assert_eq!(v["suite"], "ghg");
        assert_eq!(v["precision_bits"], 256);
        let c = &v["checks"][0];
        assert_eq!(c["tolerance"], "1e-40");
        assert!(c["residual"].as_str().unwrap().contains('e'));
        assert!(c["params"].is_object());
    }
}
