//! Critical exponents, thresholds and the global-existence regime classifier.
//!
//! Every quantity here is a rational function of `(N, k, γ, p₁, p₂)`, so the
//! formulas are written once over the [`Scalar`] trait and evaluated either in
//! `f64` (boundary comparisons with a relative tolerance of `1e-12`) or in
//! exact rationals (boundary comparisons are exact).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance for floating comparisons at regime boundaries.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Dimensions of `R^N × R^k`, `x ∈ R^N` and the degenerate variable `y ∈ R^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims", into = "RawDims")]
pub struct GrushinDims {
    spatial_n: u32,
    degenerate_k: u32,
}

#[derive(Serialize, Deserialize)]
struct RawDims {
    spatial_n: u32,
    degenerate_k: u32,
}

impl TryFrom<RawDims> for GrushinDims {
    type Error = Error;
    fn try_from(raw: RawDims) -> Result<Self> {
        GrushinDims::new(raw.spatial_n, raw.degenerate_k)
    }
}

impl From<GrushinDims> for RawDims {
    fn from(d: GrushinDims) -> Self {
        RawDims {
            spatial_n: d.spatial_n,
            degenerate_k: d.degenerate_k,
        }
    }
}

impl GrushinDims {
    pub fn new(spatial_n: u32, degenerate_k: u32) -> Result<Self> {
        if spatial_n < 1 {
            return Err(invalid("spatial_n", "must be at least 1"));
        }
        if degenerate_k < 1 {
            return Err(invalid("degenerate_k", "must be at least 1"));
        }
        Ok(Self {
            spatial_n,
            degenerate_k,
        })
    }

    pub fn spatial_n(&self) -> u32 {
        self.spatial_n
    }

    pub fn degenerate_k(&self) -> u32 {
        self.degenerate_k
    }

    /// `Q = N + 2k`.
    pub fn homogeneous_dimension(&self) -> u32 {
        self.spatial_n + 2 * self.degenerate_k
    }
}

impl Default for GrushinDims {
    fn default() -> Self {
        Self {
            spatial_n: 1,
            degenerate_k: 1,
        }
    }
}

pub fn homogeneous_dimension(dims: GrushinDims) -> u32 {
    dims.homogeneous_dimension()
}

/// Data `(γ, p₁, p₂, k₁, k₂)` of the memory/power-law heat equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    gamma: f64,
    p1: f64,
    p2: f64,
    coeff1: f64,
    coeff2: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    gamma: f64,
    p1: f64,
    p2: f64,
    coeff1: f64,
    coeff2: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ProblemParams::new(r.gamma, r.p1, r.p2, r.coeff1, r.coeff2)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams {
            gamma: p.gamma,
            p1: p.p1,
            p2: p.p2,
            coeff1: p.coeff1,
            coeff2: p.coeff2,
        }
    }
}

impl ProblemParams {
    pub fn new(gamma: f64, p1: f64, p2: f64, coeff1: f64, coeff2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(invalid("gamma", format!("{gamma} not in [0, 1)")));
        }
        if !(p1 > 1.0) || !p1.is_finite() {
            return Err(invalid("p1", format!("{p1} must be a finite number > 1")));
        }
        if !(p2 > 1.0) || !p2.is_finite() {
            return Err(invalid("p2", format!("{p2} must be a finite number > 1")));
        }
        if !coeff1.is_finite() || !coeff2.is_finite() {
            return Err(invalid("coeff", "coefficients must be finite"));
        }
        Ok(Self {
            gamma,
            p1,
            p2,
            coeff1,
            coeff2,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn p1(&self) -> f64 {
        self.p1
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }
    pub fn coeff1(&self) -> f64 {
        self.coeff1
    }
    pub fn coeff2(&self) -> f64 {
        self.coeff2
    }

    pub fn with_exponents(self, p1: f64, p2: f64) -> Result<Self> {
        Self::new(self.gamma, p1, p2, self.coeff1, self.coeff2)
    }

    pub fn with_coefficients(self, coeff1: f64, coeff2: f64) -> Result<Self> {
        Self::new(self.gamma, self.p1, self.p2, coeff1, coeff2)
    }
}

/// The same data held as exact rationals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalParams {
    pub gamma: Ratio<i128>,
    pub p1: Ratio<i128>,
    pub p2: Ratio<i128>,
    pub coeff1: Ratio<i128>,
    pub coeff2: Ratio<i128>,
}

impl RationalParams {
    pub fn new(
        gamma: Ratio<i128>,
        p1: Ratio<i128>,
        p2: Ratio<i128>,
        coeff1: Ratio<i128>,
        coeff2: Ratio<i128>,
    ) -> Result<Self> {
        let one = Ratio::from_integer(1);
        if gamma.is_negative() || gamma >= one {
            return Err(invalid("gamma", format!("{gamma} not in [0, 1)")));
        }
        if p1 <= one {
            return Err(invalid("p1", format!("{p1} must be > 1")));
        }
        if p2 <= one {
            return Err(invalid("p2", format!("{p2} must be > 1")));
        }
        Ok(Self {
            gamma,
            p1,
            p2,
            coeff1,
            coeff2,
        })
    }

    pub fn to_f64(&self) -> ProblemParams {
        ProblemParams {
            gamma: ratio_to_f64(self.gamma),
            p1: ratio_to_f64(self.p1),
            p2: ratio_to_f64(self.p2),
            coeff1: ratio_to_f64(self.coeff1),
            coeff2: ratio_to_f64(self.coeff2),
        }
    }
}

fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parse `"7/3"`, `"2.5"`, `"-1"` or `"1e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Ratio<i128>> {
    let s = text.trim();
    let bad = || invalid("rational", format!("cannot parse `{text}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut numer: i128 = all.parse().map_err(|_| bad())?;
    if neg {
        numer = -numer;
    }
    let scale = exp - frac_part.len() as i32;
    let pow = |e: u32| 10i128.checked_pow(e).ok_or_else(bad);
    Ok(if scale >= 0 {
        Ratio::from_integer(numer.checked_mul(pow(scale as u32)?).ok_or_else(bad)?)
    } else {
        Ratio::new(numer, pow((-scale) as u32)?)
    })
}

/// Field arithmetic plus a boundary comparison that is exact for rationals
/// and tolerance-based for floats.
pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_int(v: i64) -> Self;
    fn is_zero_value(&self) -> bool;
    fn compare(self, other: Self) -> Ordering;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
    fn compare(self, other: Self) -> Ordering {
        let scale = 1f64.max(self.abs()).max(other.abs());
        if (self - other).abs() <= BOUNDARY_TOL * scale {
            Ordering::Equal
        } else if self < other {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Ratio<i128> {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
    fn compare(self, other: Self) -> Ordering {
        self.cmp(&other)
    }
    fn to_f64(self) -> f64 {
        ratio_to_f64(self)
    }
}

/// A value that may be the `+∞` sentinel used when `γ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended<S> {
    Finite(S),
    PosInfinity,
}

impl<S: Scalar> Extended<S> {
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v.to_f64(),
            Extended::PosInfinity => f64::INFINITY,
        }
    }
}

fn smax<S: Scalar>(a: S, b: S) -> S {
    if a.compare(b) == Ordering::Less {
        b
    } else {
        a
    }
}

/// `p_γ = 1 + (4 − 2γ)/(Q − 2 + 2γ)`.
pub fn p_gamma<S: Scalar>(q_dim: u32, gamma: S) -> S {
    let one = S::from_int(1);
    let two = S::from_int(2);
    let q = S::from_int(q_dim as i64);
    one + (S::from_int(4) - two * gamma) / (q - two + two * gamma)
}

/// `1/γ`, or `+∞` at `γ = 0`.
pub fn inverse_gamma<S: Scalar>(gamma: S) -> Extended<S> {
    if gamma.is_zero_value() {
        Extended::PosInfinity
    } else {
        Extended::Finite(S::from_int(1) / gamma)
    }
}

/// `p₁* = max{1/γ, p_γ}`; at `γ = 0` the reciprocal branch is dropped and
/// `p₁* = p_γ`.
pub fn p1_star<S: Scalar>(q_dim: u32, gamma: S) -> S {
    let pg = p_gamma(q_dim, gamma);
    match inverse_gamma(gamma) {
        Extended::Finite(inv) => smax(inv, pg),
        Extended::PosInfinity => pg,
    }
}

/// `p₂* = 1 + 2/Q`.
pub fn p2_star<S: Scalar>(q_dim: u32) -> S {
    S::from_int(1) + S::from_int(2) / S::from_int(q_dim as i64)
}

/// First branch of `p₂**`, `(γ − γ² + 1)/(γ(2 − γ))`; `+∞` at `γ = 0`.
pub fn p2_star_star_memory_branch<S: Scalar>(gamma: S) -> Extended<S> {
    if gamma.is_zero_value() {
        return Extended::PosInfinity;
    }
    let one = S::from_int(1);
    let two = S::from_int(2);
    Extended::Finite((gamma - gamma * gamma + one) / (gamma * (two - gamma)))
}

/// Second branch of `p₂**`, `1 + 2/(Q − 2 + 2γ)`.
pub fn p2_star_star_local_branch<S: Scalar>(q_dim: u32, gamma: S) -> S {
    let two = S::from_int(2);
    S::from_int(1) + two / (S::from_int(q_dim as i64) - two + two * gamma)
}

/// `p₂** = max` of the two branches; the memory branch is dropped at `γ = 0`
/// exactly as the reciprocal branch of `p₁*` is.
pub fn p2_star_star<S: Scalar>(q_dim: u32, gamma: S) -> S {
    let local = p2_star_star_local_branch(q_dim, gamma);
    match p2_star_star_memory_branch(gamma) {
        Extended::Finite(m) => smax(m, local),
        Extended::PosInfinity => local,
    }
}

/// `p̃₂ = (p₁ + 1 − γ)/(2 − γ)`.
pub fn p2_tilde<S: Scalar>(p1: S, gamma: S) -> S {
    (p1 + S::from_int(1) - gamma) / (S::from_int(2) - gamma)
}

/// `p̃₁ = (p₂ − 1)(2 − γ) + 1`.
pub fn p1_tilde<S: Scalar>(p2: S, gamma: S) -> S {
    (p2 - S::from_int(1)) * (S::from_int(2) - gamma) + S::from_int(1)
}

/// `q_sc1 = Q(p₁ − 1)/(2(2 − γ))`.
pub fn q_sc1<S: Scalar>(q_dim: u32, p1: S, gamma: S) -> S {
    let two = S::from_int(2);
    S::from_int(q_dim as i64) * (p1 - S::from_int(1)) / (two * (two - gamma))
}

/// `q_sc2 = Q(p₂ − 1)/2`.
pub fn q_sc2<S: Scalar>(q_dim: u32, p2: S) -> S {
    S::from_int(q_dim as i64) * (p2 - S::from_int(1)) / S::from_int(2)
}

/// Which branch of the scaling exponent `q_sc` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QscBranch {
    /// `p₂ > p̃₂`: `q_sc = q_sc1`.
    Memory,
    /// `p₂ < p̃₂`: `q_sc = q_sc2`.
    Local,
    /// `p₂ = p̃₂`: both branches agree.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponent {
    pub value: f64,
    pub branch: QscBranch,
}

fn scaling_exponent<S: Scalar>(q_dim: u32, p1: S, p2: S, gamma: S) -> (S, QscBranch) {
    let tilde = p2_tilde(p1, gamma);
    match p2.compare(tilde) {
        Ordering::Greater => (q_sc1(q_dim, p1, gamma), QscBranch::Memory),
        Ordering::Less => (q_sc2(q_dim, p2), QscBranch::Local),
        Ordering::Equal => (q_sc1(q_dim, p1, gamma), QscBranch::Both),
    }
}

/// Every exponent and threshold for a given problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub homogeneous_dimension: u32,
    pub p_gamma: f64,
    /// `1/γ`, `+∞` when `γ = 0`.
    #[serde(with = "crate::floats")]
    pub inverse_gamma: f64,
    pub p1_star: f64,
    pub p2_star: f64,
    /// First branch of `p₂**`, `+∞` when `γ = 0`.
    #[serde(with = "crate::floats")]
    pub p2_star_star_memory_branch: f64,
    pub p2_star_star: f64,
    pub p2_tilde: f64,
    pub p1_tilde: f64,
    pub q_sc: ScalingExponent,
    pub q_sc1: f64,
    pub q_sc2: f64,
    /// `(Q/2)·max(p₁ − 1, p₂ − 1)`: local theory needs `q` strictly above it.
    pub local_q_threshold: f64,
    /// `q` used for `α₁`, `α₂`, `β` (absent when not supplied).
    pub q: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub beta: Option<f64>,
}

/// `α_i = Q(p_i − 1)/(2 p_i q)`.
pub fn alpha(q_dim: u32, p: f64, q: f64) -> f64 {
    q_dim as f64 * (p - 1.0) / (2.0 * p * q)
}

/// `α = (Q/2)(1/q − 1/r)`, the smoothing exponent from `L^q` to `L^r`.
pub fn smoothing_exponent(q_dim: u32, q: f64, r: f64) -> f64 {
    0.5 * q_dim as f64 * (1.0 / q - 1.0 / r)
}

/// `β = Q/(2 q_sc) − Q/(2q)`.
pub fn beta(q_dim: u32, q_sc: f64, q: f64) -> f64 {
    let qd = q_dim as f64;
    qd / (2.0 * q_sc) - qd / (2.0 * q)
}

pub fn critical_exponents(
    dims: GrushinDims,
    params: &ProblemParams,
    q: Option<f64>,
) -> Result<ExponentReport> {
    if let Some(q) = q {
        if !(q > 0.0) || !q.is_finite() {
            return Err(invalid("q", format!("{q} must be a finite number > 0")));
        }
    }
    let qd = dims.homogeneous_dimension();
    let (g, p1, p2) = (params.gamma, params.p1, params.p2);
    let (qsc, branch) = scaling_exponent(qd, p1, p2, g);
    let alpha1 = q.map(|q| alpha(qd, p1, q));
    let alpha2 = q.map(|q| alpha(qd, p2, q));
    Ok(ExponentReport {
        homogeneous_dimension: qd,
        p_gamma: p_gamma(qd, g),
        inverse_gamma: inverse_gamma(g).to_f64(),
        p1_star: p1_star(qd, g),
        p2_star: p2_star(qd),
        p2_star_star_memory_branch: p2_star_star_memory_branch(g).to_f64(),
        p2_star_star: p2_star_star(qd, g),
        p2_tilde: p2_tilde(p1, g),
        p1_tilde: p1_tilde(p2, g),
        q_sc: ScalingExponent {
            value: qsc,
            branch,
        },
        q_sc1: q_sc1(qd, p1, g),
        q_sc2: q_sc2(qd, p2),
        local_q_threshold: 0.5 * qd as f64 * (p1 - 1.0).max(p2 - 1.0),
        q,
        alpha1,
        alpha2,
        beta: q.map(|q| beta(qd, qsc, q)),
    })
}

/// Open-ended interval of admissible Lebesgue exponents `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QWindow {
    pub lo: f64,
    /// `true` when the lower end is attained (the clip `q ≥ p₁` is active).
    pub lo_inclusive: bool,
    #[serde(with = "crate::floats")]
    pub hi: f64,
}

impl QWindow {
    pub fn contains(&self, q: f64) -> bool {
        let above = if self.lo_inclusive {
            q >= self.lo
        } else {
            q > self.lo
        };
        above && q < self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// The `q` satisfying
/// `(2−γ)/(p₁−1) − 1/p₁ < Q/(2q) < 1/(p₁−1)` together with `q ≥ p₁`.
///
/// Returns `None` when the window is empty, which is exactly the case
/// `p₁ ≤ max(1/γ, p_γ)`; for `γ = 0` the window is always empty.
pub fn admissible_q_window(dims: GrushinDims, p1: f64, gamma: f64) -> Result<Option<QWindow>> {
    if !(p1 > 1.0) {
        return Err(invalid("p1", format!("{p1} must be > 1")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid("gamma", format!("{gamma} not in [0, 1)")));
    }
    let qd = dims.homogeneous_dimension() as f64;
    // Lower bound on Q/(2q); always positive for p₁ > 1 and γ < 1.
    let lower = (2.0 - gamma) / (p1 - 1.0) - 1.0 / p1;
    let hi = qd / (2.0 * lower);
    let strict_lo = qd * (p1 - 1.0) / 2.0;
    let (lo, lo_inclusive) = if p1 > strict_lo {
        (p1, true)
    } else {
        (strict_lo, false)
    };
    Ok((lo < hi).then_some(QWindow {
        lo,
        lo_inclusive,
        hi,
    }))
}

/// Global-existence cases in the order they are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    GlobalCaseI,
    GlobalCaseII,
    GlobalCaseIII,
    GlobalCaseIV,
    GlobalCaseV,
    Indeterminate,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::GlobalCaseI => "GlobalCaseI",
            CaseTag::GlobalCaseII => "GlobalCaseII",
            CaseTag::GlobalCaseIII => "GlobalCaseIII",
            CaseTag::GlobalCaseIV => "GlobalCaseIV",
            CaseTag::GlobalCaseV => "GlobalCaseV",
            CaseTag::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub case_tag: CaseTag,
    /// Norms of the initial datum that must be "sufficiently small".
    pub required_smallness: Vec<String>,
    /// Inequalities that held for the reported case.
    pub matched_conditions: Vec<String>,
    /// Every case whose hypotheses hold, in test order.
    pub all_matching_cases: Vec<CaseTag>,
    pub notes: Vec<String>,
}

struct CaseMatch {
    tag: CaseTag,
    smallness: Vec<String>,
    conditions: Vec<String>,
    notes: Vec<String>,
}

fn classify_generic<S: Scalar + fmt::Display>(
    q_dim: u32,
    gamma: S,
    p1: S,
    p2: S,
    k1: S,
    k2: S,
    data_nonneg: bool,
) -> RegimeVerdict {
    let zero = S::from_int(0);
    let ps1 = p1_star(q_dim, gamma);
    let ps2 = p2_star::<S>(q_dim);
    let pss2 = p2_star_star(q_dim, gamma);
    let tilde = p2_tilde(p1, gamma);

    let gt = |a: S, b: S| a.compare(b) == Ordering::Greater;
    let le = |a: S, b: S| a.compare(b) != Ordering::Greater;
    let eq = |a: S, b: S| a.compare(b) == Ordering::Equal;

    let p1_above = gt(p1, ps1);
    let fmt_p1 = || format!("p1 = {p1} > p1* = {ps1}");
    let nonneg = || "u0 >= 0".to_string();

    let mut matches: Vec<CaseMatch> = Vec::new();

    if p1_above && eq(p2, tilde) {
        matches.push(CaseMatch {
            tag: CaseTag::GlobalCaseI,
            smallness: vec!["L^{q_sc} norm of u0".into()],
            conditions: vec![fmt_p1(), format!("p2 = {p2} = p2~ = {tilde}")],
            notes: vec![format!(
                "the existence argument also uses p2 < p1 (here p2 = {p2} < p1 = {p1})"
            )],
        });
    }
    if data_nonneg && gt(k1, zero) && gt(k2, zero) && p1_above && gt(p2, pss2) {
        matches.push(CaseMatch {
            tag: CaseTag::GlobalCaseII,
            smallness: vec!["L^inf norm of u0".into(), "L^{q_sc} norm of u0".into()],
            conditions: vec![
                nonneg(),
                format!("k1 = {k1} > 0"),
                format!("k2 = {k2} > 0"),
                fmt_p1(),
                format!("p2 = {p2} > p2** = {pss2}"),
            ],
            notes: Vec::new(),
        });
    }
    if data_nonneg && le(k1, zero) && le(k2, zero) {
        matches.push(CaseMatch {
            tag: CaseTag::GlobalCaseIII,
            smallness: Vec::new(),
            conditions: vec![
                nonneg(),
                format!("k1 = {k1} <= 0"),
                format!("k2 = {k2} <= 0"),
            ],
            notes: Vec::new(),
        });
    }
    if data_nonneg && gt(k1, zero) && le(k2, zero) && p1_above {
        matches.push(CaseMatch {
            tag: CaseTag::GlobalCaseIV,
            smallness: vec!["L^{q_sc1} norm of u0".into()],
            conditions: vec![
                nonneg(),
                format!("k1 = {k1} > 0"),
                format!("k2 = {k2} <= 0"),
                fmt_p1(),
            ],
            notes: Vec::new(),
        });
    }
    if data_nonneg && gt(k2, zero) && le(k1, zero) && gt(p2, ps2) {
        matches.push(CaseMatch {
            tag: CaseTag::GlobalCaseV,
            smallness: vec!["L^{q_sc2} norm of u0".into()],
            conditions: vec![
                nonneg(),
                format!("k2 = {k2} > 0"),
                format!("k1 = {k1} <= 0"),
                format!("p2 = {p2} > p2* = {ps2}"),
            ],
            notes: Vec::new(),
        });
    }

    let all: Vec<CaseTag> = matches.iter().map(|m| m.tag).collect();
    match matches.into_iter().next() {
        Some(first) => RegimeVerdict {
            case_tag: first.tag,
            required_smallness: first.smallness,
            matched_conditions: first.conditions,
            all_matching_cases: all,
            notes: first.notes,
        },
        None => RegimeVerdict {
            case_tag: CaseTag::Indeterminate,
            required_smallness: Vec::new(),
            matched_conditions: Vec::new(),
            all_matching_cases: Vec::new(),
            notes: Vec::new(),
        },
    }
}

/// First global-existence case whose hypotheses hold, in floating point.
pub fn classify_regime(dims: GrushinDims, params: &ProblemParams, data_nonneg: bool) -> RegimeVerdict {
    classify_generic(
        dims.homogeneous_dimension(),
        params.gamma,
        params.p1,
        params.p2,
        params.coeff1,
        params.coeff2,
        data_nonneg,
    )
}

/// Same as [`classify_regime`] with every boundary comparison exact.
pub fn classify_regime_exact(
    dims: GrushinDims,
    params: &RationalParams,
    data_nonneg: bool,
) -> RegimeVerdict {
    classify_generic(
        dims.homogeneous_dimension(),
        params.gamma,
        params.p1,
        params.p2,
        params.coeff1,
        params.coeff2,
        data_nonneg,
    )
}
