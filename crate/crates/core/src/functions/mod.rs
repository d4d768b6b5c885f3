//! Desired-function representations.
//!
//! A nomographic function has the form `f(s) = ψ(Σ φ_i(s_i))`. A
//! superposition adds `J` of them, `f(s) = Σ_j ψ_j(Σ_i φ_ij(s_i))`, which by
//! Kolmogorov's theorem covers every continuous function once `J = 2N + 1`
//! and the inner maps are chosen suitably. The inner maps of that theorem
//! are not constructive, so superpositions here are user supplied together
//! with an independent reference closure, and validated against it.

mod expr;
mod kolmogorov;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::MapExpr;
pub use kolmogorov::{
    cluster_constants, demo_alternate_fusion, demo_superposition, Branch, ClusterFunction, FusionFunction,
    KolmogorovSpec,
};

/// Pure, reentrant univariate map.
pub type UnivariateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pure, reentrant map of an argument vector.
pub type MultivariateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Points per argument used when validating declared ranges.
pub const VALIDATION_GRID: usize = 10_000;

/// Default lower end of the geometric-mean domain.
pub const DEFAULT_S_MIN: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionError {
    #[error("unknown builtin function '{0}'")]
    UnknownBuiltin(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("expected {expected} entries, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("argument {index} = {value} lies outside its domain [{lo}, {hi}]")]
    DomainViolation { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("pre-processing map {index} gives {value} at s = {at}, outside its declared range [{lo}, {hi}]")]
    RangeViolation { index: usize, at: f64, value: f64, lo: f64, hi: f64 },
    #[error("post-processing map is not finite at {0}")]
    PostNotFinite(f64),
    #[error("a superposition needs at least one branch")]
    NoBranches,
    #[error("{j} branches exceed the 2N + 1 = {limit} allowed for N = {n}")]
    TooManyBranches { j: usize, n: usize, limit: usize },
    #[error("superposition differs from its reference by {error} at {at:?} (tolerance {tolerance})")]
    ReferenceMismatch { error: f64, at: Vec<f64>, tolerance: f64 },
    #[error("node index {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("branch index {j} out of range for {count} branches")]
    BranchOutOfRange { j: usize, count: usize },
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FunctionError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(FunctionError::BadInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// The unit interval `E = [0, 1]`.
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership with a relative slack of `1e-12`.
    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.lo.abs().max(self.hi.abs()).max(1.0);
        x >= self.lo - slack && x <= self.hi + slack
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn shifted(&self, by: f64) -> Interval {
        Interval { lo: self.lo + by, hi: self.hi + by }
    }

    /// `count` evenly spaced points including both ends.
    pub fn grid(&self, count: usize) -> impl Iterator<Item = f64> + '_ {
        let step = if count > 1 { self.width() / (count - 1) as f64 } else { 0.0 };
        (0..count).map(move |i| if i + 1 == count { self.hi } else { self.lo + step * i as f64 })
    }
}

/// Sum of intervals (Minkowski).
pub fn interval_sum<'a>(items: impl IntoIterator<Item = &'a Interval>) -> Interval {
    items.into_iter().fold(Interval { lo: 0.0, hi: 0.0 }, |acc, r| Interval { lo: acc.lo + r.lo, hi: acc.hi + r.hi })
}

/// A pre-processing map with its declared range.
#[derive(Clone)]
pub struct PreMap {
    pub map: UnivariateFn,
    pub range: Interval,
}

impl PreMap {
    pub fn new(map: impl Fn(f64) -> f64 + Send + Sync + 'static, range: Interval) -> Self {
        Self { map: Arc::new(map), range }
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.map)(s)
    }

    /// Checks the declared range on a dense grid over `domain`.
    pub fn validate(&self, index: usize, domain: &Interval) -> Result<(), FunctionError> {
        for at in domain.grid(VALIDATION_GRID) {
            let value = self.eval(at);
            if !(value.is_finite() && self.range.contains(value)) {
                return Err(FunctionError::RangeViolation {
                    index,
                    at,
                    value,
                    lo: self.range.lo,
                    hi: self.range.hi,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PreMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PreMap").field("range", &self.range).finish_non_exhaustive()
    }
}

/// Checks that `post` is finite on a dense grid over `interval`.
pub fn validate_post(post: &UnivariateFn, interval: &Interval) -> Result<(), FunctionError> {
    for g in interval.grid(VALIDATION_GRID) {
        if !post(g).is_finite() {
            return Err(FunctionError::PostNotFinite(g));
        }
    }
    Ok(())
}

/// The named example functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    ArithmeticMean,
    GeometricMean {
        #[serde(default = "default_s_min")]
        s_min: f64,
    },
    EuclideanNorm,
}

fn default_s_min() -> f64 {
    DEFAULT_S_MIN
}

impl Builtin {
    /// Parses `arithmetic_mean`, `geometric_mean` or `euclidean_norm`.
    pub fn from_name(name: &str, s_min: Option<f64>) -> Result<Self, FunctionError> {
        match name {
            "arithmetic_mean" => Ok(Builtin::ArithmeticMean),
            "geometric_mean" => Ok(Builtin::GeometricMean { s_min: s_min.unwrap_or(DEFAULT_S_MIN) }),
            "euclidean_norm" => Ok(Builtin::EuclideanNorm),
            other => Err(FunctionError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::ArithmeticMean => "arithmetic_mean",
            Builtin::GeometricMean { .. } => "geometric_mean",
            Builtin::EuclideanNorm => "euclidean_norm",
        }
    }

    pub fn spec(&self, n: usize) -> Result<NomographicSpec, FunctionError> {
        if n == 0 {
            return Err(FunctionError::ZeroArity);
        }
        let nf = n as f64;
        let (domain, pre, post): (Interval, PreMap, UnivariateFn) = match *self {
            Builtin::ArithmeticMean => {
                (Interval::UNIT, PreMap::new(|s| s, Interval::UNIT), Arc::new(move |g| g / nf))
            }
            Builtin::GeometricMean { s_min } => {
                if !(s_min > 0.0 && s_min < 1.0) {
                    return Err(FunctionError::InvalidParameter(format!(
                        "geometric mean needs 0 < s_min < 1, got {s_min}"
                    )));
                }
                (
                    Interval { lo: s_min, hi: 1.0 },
                    PreMap::new(f64::ln, Interval { lo: s_min.ln(), hi: 0.0 }),
                    Arc::new(move |g| (g / nf).exp()),
                )
            }
            Builtin::EuclideanNorm => {
                (Interval::UNIT, PreMap::new(|s| s * s, Interval::UNIT), Arc::new(f64::sqrt))
            }
        };
        let mut spec = NomographicSpec::uniform(self.name(), n, domain, pre, post)?;
        spec.builtin = Some(*self);
        Ok(spec)
    }
}

/// Shorthand for `Builtin::from_name(name, s_min)?.spec(n)`.
pub fn builtin(name: &str, n: usize, s_min: Option<f64>) -> Result<NomographicSpec, FunctionError> {
    Builtin::from_name(name, s_min)?.spec(n)
}

/// `f(s) = ψ(Σ φ_i(s_i))` with per-argument domains and declared ranges.
#[derive(Clone)]
pub struct NomographicSpec {
    name: String,
    domains: Vec<Interval>,
    pre: Vec<PreMap>,
    post: UnivariateFn,
    builtin: Option<Builtin>,
}

impl fmt::Debug for NomographicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NomographicSpec")
            .field("name", &self.name)
            .field("domains", &self.domains)
            .field("pre", &self.pre)
            .finish_non_exhaustive()
    }
}

impl NomographicSpec {
    /// Validates every declared range and the post map on the range sum.
    pub fn new(
        name: impl Into<String>,
        domains: Vec<Interval>,
        pre: Vec<PreMap>,
        post: UnivariateFn,
    ) -> Result<Self, FunctionError> {
        if domains.is_empty() {
            return Err(FunctionError::ZeroArity);
        }
        if pre.len() != domains.len() {
            return Err(FunctionError::ArityMismatch { expected: domains.len(), got: pre.len() });
        }
        for (i, (m, d)) in pre.iter().zip(&domains).enumerate() {
            m.validate(i, d)?;
        }
        validate_post(&post, &interval_sum(pre.iter().map(|m| &m.range)))?;
        Ok(Self { name: name.into(), domains, pre, post, builtin: None })
    }

    /// Every argument shares `domain` and `pre`.
    pub fn uniform(
        name: impl Into<String>,
        n: usize,
        domain: Interval,
        pre: PreMap,
        post: UnivariateFn,
    ) -> Result<Self, FunctionError> {
        if n == 0 {
            return Err(FunctionError::ZeroArity);
        }
        Self::new(name, vec![domain; n], vec![pre; n], post)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[Interval] {
        &self.domains
    }

    pub fn pre(&self) -> &[PreMap] {
        &self.pre
    }

    pub fn post(&self) -> &UnivariateFn {
        &self.post
    }

    pub fn builtin(&self) -> Option<Builtin> {
        self.builtin
    }

    /// Interval that `Σ φ_i(s_i)` ranges over.
    pub fn sum_range(&self) -> Interval {
        interval_sum(self.pre.iter().map(|m| &m.range))
    }

    pub fn check_domain(&self, s: &[f64]) -> Result<(), FunctionError> {
        check_domain(&self.domains, s)
    }

    /// Exact composition `ψ(Σ φ_i(s_i))` in double precision.
    pub fn evaluate_reference(&self, s: &[f64]) -> Result<f64, FunctionError> {
        self.check_domain(s)?;
        let g: f64 = self.pre.iter().zip(s).map(|(m, &x)| m.eval(x)).sum();
        Ok((self.post)(g))
    }

    /// The same function viewed as a one-branch superposition.
    pub fn to_superposition(&self) -> KolmogorovSpec {
        let this = self.clone();
        KolmogorovSpec::from_parts_unchecked(
            self.name.clone(),
            self.domains.clone(),
            vec![Branch { pre: self.pre.clone(), post: self.post.clone() }],
            Arc::new(move |s: &[f64]| {
                let g: f64 = this.pre.iter().zip(s).map(|(m, &x)| m.eval(x)).sum();
                (this.post)(g)
            }),
            0.0,
        )
    }
}

pub(crate) fn check_domain(domains: &[Interval], s: &[f64]) -> Result<(), FunctionError> {
    if s.len() != domains.len() {
        return Err(FunctionError::ArityMismatch { expected: domains.len(), got: s.len() });
    }
    for (index, (d, &value)) in domains.iter().zip(s).enumerate() {
        if !(value >= d.lo && value <= d.hi) {
            return Err(FunctionError::DomainViolation { index, value, lo: d.lo, hi: d.hi });
        }
    }
    Ok(())
}

/// Union of the declared ranges and the shift that makes it nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMetadata {
    /// `Π = ∪ Π_i` before shifting.
    pub union: Interval,
    /// `max |ξ|` over the unshifted union.
    pub pi_max: f64,
    /// `max(0, −min Π)`.
    pub shift: f64,
    /// Largest value of the shifted range `Π + shift`.
    pub shifted_pi_max: f64,
}

impl RangeMetadata {
    pub fn of(union: Interval) -> Self {
        let shift = (-union.lo).max(0.0);
        Self {
            union,
            pi_max: union.lo.abs().max(union.hi.abs()),
            shift,
            shifted_pi_max: (union.hi + shift).max(0.0),
        }
    }

    pub fn of_ranges<'a>(ranges: impl IntoIterator<Item = &'a Interval>) -> Option<Self> {
        ranges.into_iter().copied().reduce(|a, b| a.hull(&b)).map(Self::of)
    }
}

pub fn range_metadata(spec: &NomographicSpec) -> RangeMetadata {
    RangeMetadata::of_ranges(spec.pre.iter().map(|m| &m.range)).expect("arity is at least 1")
}

/// The `2^min(n, 12)` tuples that take each argument at a domain end.
/// Beyond 12 arguments the remaining ones repeat the pattern of the first.
pub fn corner_tuples(domains: &[Interval]) -> Vec<Vec<f64>> {
    let bits = domains.len().min(12);
    (0..1usize << bits)
        .map(|mask| {
            domains
                .iter()
                .enumerate()
                .map(|(i, d)| if mask >> (i % bits.max(1)) & 1 == 1 { d.hi } else { d.lo })
                .collect()
        })
        .collect()
}
