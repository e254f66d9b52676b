//! Circuit matrices of Lauricella's F_C system in `m` variables.
//!
//! Rows and columns are indexed by subsets `J ⊆ {1..m}` in the order
//! `∅, {1}, {2}, {1,2}, {3}, …`, i.e. `J` sits at 1-based position
//! `1 + Σ_{i∈J} 2^{i−1}`. [`SubsetIndex::position`] is the only place that
//! encodes this.

use serde_json::json;

use crate::error::{Error, Result};
use crate::ghg::build_reflection;
use crate::numerics::{product, BigComplex, CMatrix};
use crate::params::{ExpParams, FcParams};

/// Largest `m` for which dense `2^m × 2^m` construction is allowed.
pub const FC_BUILD_MAX_M: usize = 10;

/// A subset of `{1..m}` stored as a bitmask (bit `i−1` ⇔ `i ∈ J`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubsetIndex {
    m: usize,
    mask: u32,
}

impl SubsetIndex {
    pub fn empty(m: usize) -> Self {
        SubsetIndex { m, mask: 0 }
    }

    /// From 1-based elements. Panics if an element is outside `1..=m`.
    pub fn from_elements(m: usize, elements: &[usize]) -> Self {
        let mut mask = 0;
        for &e in elements {
            assert!((1..=m).contains(&e), "element {e} outside 1..={m}");
            mask |= 1 << (e - 1);
        }
        SubsetIndex { m, mask }
    }

    pub fn from_mask(m: usize, mask: u32) -> Self {
        assert!(m >= 32 || mask >> m == 0);
        SubsetIndex { m, mask }
    }

    /// Inverse of [`position`](Self::position).
    pub fn from_position(m: usize, position: usize) -> Self {
        Self::from_mask(m, (position - 1) as u32)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// 1-based position `1 + Σ δ_{i,J} 2^{i−1}`.
    pub fn position(&self) -> usize {
        1 + (1..=self.m).filter(|&i| self.contains(i)).map(|i| 1usize << (i - 1)).sum::<usize>()
    }

    /// 0-based matrix index.
    pub fn index(&self) -> usize {
        self.position() - 1
    }

    pub fn contains(&self, i: usize) -> bool {
        i >= 1 && i <= self.m && self.mask >> (i - 1) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Sorted 1-based elements.
    pub fn elements(&self) -> Vec<usize> {
        (1..=self.m).filter(|&i| self.contains(i)).collect()
    }

    /// All subsets of `{1..m}` in position order.
    pub fn all(m: usize) -> impl Iterator<Item = SubsetIndex> {
        (0..1u32 << m).map(move |mask| SubsetIndex { m, mask })
    }
}

fn check_size(m: usize) -> Result<()> {
    if m == 0 || m > FC_BUILD_MAX_M {
        return Err(Error::MTooLarge { m, max: FC_BUILD_MAX_M });
    }
    Ok(())
}

fn subset_b_product(exp: &ExpParams, j: &SubsetIndex) -> BigComplex {
    product(j.elements().iter().map(|&i| &exp.b[i - 1]), exp.prec())
}

/// Diagonal `M_i` with entry `B_i^{−δ_{i,J}}` at `J`.
pub fn build_fc_mi(i: usize, exp: &ExpParams) -> CMatrix {
    let m = exp.b.len();
    assert!((1..=m).contains(&i), "generator index {i} outside 1..={m}");
    let prec = exp.prec();
    let inv = exp.b[i - 1].recip();
    CMatrix::diag(
        SubsetIndex::all(m).map(|j| if j.contains(i) { inv.clone() } else { BigComplex::one(prec) }).collect(),
    )
}

/// `h_J = (−1)^{|J|} (A₁ − B_J)(A₂ − B_J) / ((A₁ − 1)(A₂ − 1) B_J)` with
/// `B_J = ∏_{j∈J} B_j`; `h_∅ = 1`.
pub fn fc_h_entry(exp: &ExpParams, j: &SubsetIndex) -> BigComplex {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let (a1, a2) = (&exp.a[0], &exp.a[1]);
    let bj = subset_b_product(exp, j);
    let num = &(a1 - &bj) * &(a2 - &bj);
    let den = &(&(a1 - &one) * &(a2 - &one)) * &bj;
    let v = &num / &den;
    if j.len() % 2 == 1 {
        -v
    } else {
        v
    }
}

pub fn build_fc_h(exp: &ExpParams) -> CMatrix {
    let m = exp.b.len();
    CMatrix::diag(SubsetIndex::all(m).map(|j| fc_h_entry(exp, &j)).collect())
}

/// `λ = (−1)^{m+1} ∏B / (A₁A₂)`.
pub fn lambda_fc(exp: &ExpParams) -> BigComplex {
    let m = exp.b.len();
    let v = &product(&exp.b, exp.prec()) / &(&exp.a[0] * &exp.a[1]);
    if m % 2 == 0 {
        -v
    } else {
        v
    }
}

/// Closed form `Tr(H) = (A₁A₂ + (−1)^m ∏B) ∏(B_j − 1) / ((A₁−1)(A₂−1) ∏B)`.
pub fn fc_trace_h_closed_form(exp: &ExpParams) -> BigComplex {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let m = exp.b.len();
    let pb = product(&exp.b, prec);
    let a1a2 = &exp.a[0] * &exp.a[1];
    let first = if m % 2 == 0 { &a1a2 + &pb } else { &a1a2 - &pb };
    let bm1 = product(&exp.b.iter().map(|b| b - &one).collect::<Vec<_>>(), prec);
    let den = &(&(&exp.a[0] - &one) * &(&exp.a[1] - &one)) * &pb;
    &(&first * &bm1) / &den
}

/// Closed form of `(1 − λ)/Tr(H)`.
pub fn fc_reflection_coefficient_closed_form(exp: &ExpParams) -> BigComplex {
    let prec = exp.prec();
    let one = BigComplex::one(prec);
    let pb = product(&exp.b, prec);
    let bm1 = product(&exp.b.iter().map(|b| b - &one).collect::<Vec<_>>(), prec);
    let num = &(&(&exp.a[0] - &one) * &(&exp.a[1] - &one)) * &pb;
    &num / &(&(&exp.a[0] * &exp.a[1]) * &bm1)
}

/// The non-diagonal generator `M_{m+1}`.
pub fn build_fc_mlast(exp: &ExpParams) -> Result<CMatrix> {
    build_reflection(&build_fc_h(exp), &lambda_fc(exp))
}

#[derive(Clone, Debug)]
pub struct CircuitSetFc {
    pub params: FcParams,
    pub exp: ExpParams,
    /// `M_1, …, M_m`.
    pub m: Vec<CMatrix>,
    /// `M_{m+1}`.
    pub mlast: CMatrix,
    pub h: CMatrix,
    pub lambda: BigComplex,
}

impl CircuitSetFc {
    pub fn vars(&self) -> usize {
        self.params.m()
    }

    pub fn prec(&self) -> u32 {
        self.mlast.prec()
    }

    /// All `m + 1` generators, `M_{m+1}` last.
    pub fn generators(&self) -> impl Iterator<Item = &CMatrix> {
        self.m.iter().chain(std::iter::once(&self.mlast))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let subsets: Vec<Vec<usize>> = SubsetIndex::all(self.vars()).map(|j| j.elements()).collect();
        json!({
            "kind": "fc_circuit_set",
            "m": self.vars(),
            "params": self.params.to_json(),
            "subsets": subsets,
            "lambda": self.lambda.to_decimal_strings(),
            "H": self.h.to_json(),
            "M": self.m.iter().map(|x| x.to_json()).collect::<Vec<_>>(),
            "Mlast": self.mlast.to_json(),
        })
    }
}

/// Builds the generators for validated parameters, `m ≤ 10`.
pub fn build_circuit_set(params: &FcParams, prec: u32) -> Result<CircuitSetFc> {
    check_size(params.m())?;
    let exp = params.exponentiate(prec);
    let m = (1..=params.m()).map(|i| build_fc_mi(i, &exp)).collect();
    let h = build_fc_h(&exp);
    let lambda = lambda_fc(&exp);
    let mlast = build_reflection(&h, &lambda)?;
    Ok(CircuitSetFc { params: params.clone(), exp, m, mlast, h, lambda })
}

/// `N_m = M_{m+1} M_m M_{m+1} M_m⁻¹` followed by
/// `N_{m−k} = N_{m−k+1} M_{m−k} N_{m−k+1} M_{m−k}⁻¹` for `k = 1..m−2`.
/// Returns `[N_m, N_{m−1}, …, N_2]`.
pub fn reduction_chain(set: &CircuitSetFc) -> Result<Vec<CMatrix>> {
    let m = set.vars();
    if m < 2 {
        return Ok(Vec::new());
    }
    let conj = |n: &CMatrix, mi: &CMatrix| -> Result<CMatrix> { n.mul(mi)?.mul(n)?.mul(&mi.inv()?) };
    let mut chain = vec![conj(&set.mlast, &set.m[m - 1])?];
    for k in 1..=m - 2 {
        let next = conj(chain.last().expect("non-empty"), &set.m[m - k - 1])?;
        chain.push(next);
    }
    Ok(chain)
}

/// Largest entry outside the diagonal blocks of size `block`.
pub fn off_block_mass(n: &CMatrix, block: usize) -> f64 {
    let mut worst = 0f64;
    for i in 0..n.n() {
        for j in 0..n.n() {
            if i / block != j / block {
                worst = worst.max(n.get(i, j).abs_f64());
            }
        }
    }
    worst
}

/// Diagonal blocks of `N_{m−k}` (block size `2^{m−k−1}`), after checking
/// that all off-block entries are at most `tol`.
pub fn reduction_matrices(set: &CircuitSetFc, k: usize, tol: f64) -> Result<Vec<CMatrix>> {
    let m = set.vars();
    if m < 2 || k > m - 2 {
        return Err(Error::Parse(format!("reduction index k = {k} needs m ≥ k + 2, have m = {m}")));
    }
    let chain = reduction_chain(set)?;
    let n = &chain[k];
    let block = 1usize << (m - k - 1);
    let off = off_block_mass(n, block);
    if off > tol {
        return Err(Error::BlockStructureViolation { max_off_block: off });
    }
    Ok((0..n.n() / block).map(|b| n.block(b * block, block)).collect())
}

/// `x₁⋯x_m · R_m(x)` where `R_m = ∏_{σ∈{±1}^m} (1 + Σ σ_i √x_i)`.
///
/// The sign product is invariant under every `√x_i ↦ −√x_i`, so it is a
/// polynomial in `x` and any choice of square-root branch gives its value.
pub fn fc_singular_poly(x: &[BigComplex]) -> BigComplex {
    let m = x.len();
    let prec = x.iter().map(|v| v.prec()).max().unwrap_or(crate::numerics::DEFAULT_PRECISION);
    let roots: Vec<BigComplex> = x.iter().map(|v| v.sqrt()).collect();
    let one = BigComplex::one(prec);
    // pair σ_1 = ±1: (u + √x₁)(u − √x₁) = u² − x₁ with u over the remaining signs
    let mut r = BigComplex::one(prec);
    for signs in 0u32..(1u32 << m.saturating_sub(1)) {
        let mut u = one.clone();
        for (i, root) in roots.iter().enumerate().skip(1) {
            if signs >> (i - 1) & 1 == 1 {
                u = &u - root;
            } else {
                u = &u + root;
            }
        }
        let factor = if m == 0 { u } else { &(&u * &u) - &x[0] };
        r = &r * &factor;
    }
    &product(x, prec) * &r
}
