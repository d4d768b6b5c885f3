//! Sums of nomographic branches and their per-cluster bookkeeping.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::{
    check_domain, corner_tuples, interval_sum, validate_post, FunctionError, Interval, MultivariateFn,
    PreMap, RangeMetadata, UnivariateFn,
};
use crate::channel::ClusterTopology;
use crate::rng::{self, tag};

/// Random points checked against the reference, on top of the corners.
const REFERENCE_SAMPLES: usize = 2_000;
const REFERENCE_SEED: u64 = 0x6b6f_6c6d;

/// One nomographic branch: a pre-processing map per node and a post map.
#[derive(Clone)]
pub struct Branch {
    pub pre: Vec<PreMap>,
    pub post: UnivariateFn,
}

impl Branch {
    pub fn sum_range(&self) -> Interval {
        interval_sum(self.pre.iter().map(|m| &m.range))
    }
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Branch").field("pre", &self.pre).finish_non_exhaustive()
    }
}

/// `f(s) = Σ_j ψ_j(Σ_i φ_ij(s_i))` with an independent reference for `f`.
#[derive(Clone)]
pub struct KolmogorovSpec {
    name: String,
    domains: Vec<Interval>,
    branches: Vec<Branch>,
    reference: MultivariateFn,
    tolerance: f64,
}

impl fmt::Debug for KolmogorovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KolmogorovSpec")
            .field("name", &self.name)
            .field("domains", &self.domains)
            .field("branches", &self.branches)
            .field("tolerance", &self.tolerance)
            .finish_non_exhaustive()
    }
}

impl KolmogorovSpec {
    /// Validates branch count, declared ranges, post maps, and agreement
    /// with `reference` within `tolerance` on corners plus seeded samples.
    pub fn new(
        name: impl Into<String>,
        domains: Vec<Interval>,
        branches: Vec<Branch>,
        reference: MultivariateFn,
        tolerance: f64,
    ) -> Result<Self, FunctionError> {
        let n = domains.len();
        if n == 0 {
            return Err(FunctionError::ZeroArity);
        }
        if branches.is_empty() {
            return Err(FunctionError::NoBranches);
        }
        if branches.len() > 2 * n + 1 {
            return Err(FunctionError::TooManyBranches { j: branches.len(), n, limit: 2 * n + 1 });
        }
        for b in &branches {
            if b.pre.len() != n {
                return Err(FunctionError::ArityMismatch { expected: n, got: b.pre.len() });
            }
            for (i, (m, d)) in b.pre.iter().zip(&domains).enumerate() {
                m.validate(i, d)?;
            }
            validate_post(&b.post, &b.sum_range())?;
        }
        let spec = Self::from_parts_unchecked(name.into(), domains, branches, reference, tolerance);
        let mut r = rng::stream(REFERENCE_SEED, &[tag::GRID]);
        let randoms: Vec<Vec<f64>> = (0..REFERENCE_SAMPLES)
            .map(|_| spec.domains.iter().map(|d| d.lo + r.random::<f64>() * d.width()).collect())
            .collect();
        for s in corner_tuples(&spec.domains).into_iter().chain(randoms) {
            let error = (spec.evaluate_unchecked(&s) - (spec.reference)(&s)).abs();
            if !(error <= tolerance) {
                return Err(FunctionError::ReferenceMismatch { error, at: s, tolerance });
            }
        }
        Ok(spec)
    }

    pub(crate) fn from_parts_unchecked(
        name: String,
        domains: Vec<Interval>,
        branches: Vec<Branch>,
        reference: MultivariateFn,
        tolerance: f64,
    ) -> Self {
        Self { name, domains, branches, reference, tolerance }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn domains(&self) -> &[Interval] {
        &self.domains
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn evaluate_unchecked(&self, s: &[f64]) -> f64 {
        self.branches
            .iter()
            .map(|b| (b.post)(b.pre.iter().zip(s).map(|(m, &x)| m.eval(x)).sum()))
            .sum()
    }

    /// The superposition itself.
    pub fn evaluate(&self, s: &[f64]) -> Result<f64, FunctionError> {
        check_domain(&self.domains, s)?;
        Ok(self.evaluate_unchecked(s))
    }

    /// The independent reference.
    pub fn evaluate_reference(&self, s: &[f64]) -> Result<f64, FunctionError> {
        check_domain(&self.domains, s)?;
        Ok((self.reference)(s))
    }

    /// Range bookkeeping over every pre map of every branch, so that one
    /// quantizer serves all branches.
    pub fn range_metadata(&self) -> RangeMetadata {
        RangeMetadata::of_ranges(self.branches.iter().flat_map(|b| b.pre.iter().map(|m| &m.range)))
            .expect("at least one branch and one node")
    }

    /// The post maps and reference of the spec itself.
    pub fn default_fusion(&self) -> FusionFunction {
        FusionFunction {
            name: self.name.clone(),
            posts: self.branches.iter().map(|b| b.post.clone()).collect(),
            reference: self.reference.clone(),
        }
    }
}

/// What a fusion center does with the branch sums it receives: one post
/// map per branch and a reference for the resulting function.
///
/// The reference takes the full argument vector with nodes outside the
/// cluster pinned to zero.
#[derive(Clone)]
pub struct FusionFunction {
    pub name: String,
    pub posts: Vec<UnivariateFn>,
    pub reference: MultivariateFn,
}

impl fmt::Debug for FusionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FusionFunction")
            .field("name", &self.name)
            .field("branches", &self.posts.len())
            .finish_non_exhaustive()
    }
}

impl FusionFunction {
    /// Checks that there is one post map per branch of `spec` and that each
    /// is finite over that branch's full sum range.
    pub fn new(
        name: impl Into<String>,
        posts: Vec<UnivariateFn>,
        reference: MultivariateFn,
        spec: &KolmogorovSpec,
    ) -> Result<Self, FunctionError> {
        if posts.len() != spec.branch_count() {
            return Err(FunctionError::ArityMismatch { expected: spec.branch_count(), got: posts.len() });
        }
        for (post, b) in posts.iter().zip(spec.branches()) {
            validate_post(post, &b.sum_range())?;
        }
        Ok(Self { name: name.into(), posts, reference })
    }

    /// `Σ_j ψ_j(g_j + γ_j)`.
    pub fn combine(&self, branch_sums: &[f64], constants: &[f64]) -> f64 {
        self.posts.iter().zip(branch_sums).zip(constants).map(|((psi, &g), &c)| psi(g + c)).sum()
    }
}

/// `γ_ℓj = Σ_{i ∉ C_ℓ} φ_ij(0)` for every cluster `ℓ`.
pub fn cluster_constants(
    topology: &ClusterTopology,
    spec: &KolmogorovSpec,
    j: usize,
) -> Result<Vec<f64>, FunctionError> {
    let n = spec.arity();
    if topology.node_count() != n {
        return Err(FunctionError::ArityMismatch { expected: n, got: topology.node_count() });
    }
    let branch = spec
        .branches
        .get(j)
        .ok_or(FunctionError::BranchOutOfRange { j, count: spec.branch_count() })?;
    topology
        .clusters()
        .iter()
        .map(|members| {
            if let Some(&node) = members.iter().find(|&&i| i >= n) {
                return Err(FunctionError::NodeOutOfRange { node, n });
            }
            (0..n)
                .filter(|i| !members.contains(i))
                .map(|i| {
                    let d = spec.domains[i];
                    if !(d.lo <= 0.0 && 0.0 <= d.hi) {
                        return Err(FunctionError::DomainViolation { index: i, value: 0.0, lo: d.lo, hi: d.hi });
                    }
                    Ok(branch.pre[i].eval(0.0))
                })
                .sum()
        })
        .collect()
}

/// The function one fusion center computes: its members, the constants
/// standing in for the nodes it does not hear, and its post maps.
#[derive(Debug, Clone)]
pub struct ClusterFunction {
    pub cluster: usize,
    pub members: Vec<usize>,
    /// `γ_ℓj` for every branch `j`.
    pub constants: Vec<f64>,
    pub fusion: FusionFunction,
    node_count: usize,
}

impl ClusterFunction {
    pub fn new(
        topology: &ClusterTopology,
        spec: &KolmogorovSpec,
        cluster: usize,
        fusion: FusionFunction,
    ) -> Result<Self, FunctionError> {
        if cluster >= topology.cluster_count() {
            return Err(FunctionError::InvalidParameter(format!(
                "cluster {cluster} does not exist ({} clusters)",
                topology.cluster_count()
            )));
        }
        if fusion.posts.len() != spec.branch_count() {
            return Err(FunctionError::ArityMismatch { expected: spec.branch_count(), got: fusion.posts.len() });
        }
        let members = topology.cluster(cluster).to_vec();
        let constants = if members.len() == spec.arity() {
            vec![0.0; spec.branch_count()]
        } else {
            (0..spec.branch_count())
                .map(|j| cluster_constants(topology, spec, j).map(|c| c[cluster]))
                .collect::<Result<_, _>>()?
        };
        Ok(Self { cluster, members, constants, fusion, node_count: spec.arity() })
    }

    /// A single cluster of every node computing `spec` itself.
    pub fn whole(spec: &KolmogorovSpec) -> Self {
        Self {
            cluster: 0,
            members: (0..spec.arity()).collect(),
            constants: vec![0.0; spec.branch_count()],
            fusion: spec.default_fusion(),
            node_count: spec.arity(),
        }
    }

    /// Reference value with every non-member pinned to zero.
    pub fn reference(&self, s: &[f64]) -> f64 {
        if self.members.len() == self.node_count {
            return (self.fusion.reference)(s);
        }
        let mut pinned = vec![0.0; s.len()];
        for &i in &self.members {
            pinned[i] = s[i];
        }
        (self.fusion.reference)(&pinned)
    }

    /// Interval of `Σ_{i ∈ C} φ_ij(s_i) + γ_j`.
    pub fn sum_interval(&self, spec: &KolmogorovSpec, j: usize) -> Interval {
        interval_sum(self.members.iter().map(|&i| &spec.branches[j].pre[i].range)).shifted(self.constants[j])
    }
}

/// Offset inside `ln(s + c)` of the second demo branch.
const DEMO_LOG_OFFSET: f64 = 2.0;

/// Demo superpositions on `[0, 1]^N`:
///
/// * `J = 2`: `mean(s) + (Π (s_i + 2))^(1/N)`
/// * `J = 3`: the above plus `sqrt(1 + Σ s_i²)`
pub fn demo_superposition(n: usize, j: usize) -> Result<KolmogorovSpec, FunctionError> {
    if n == 0 {
        return Err(FunctionError::ZeroArity);
    }
    if !(j == 2 || j == 3) {
        return Err(FunctionError::InvalidParameter(format!("demo superpositions have 2 or 3 branches, not {j}")));
    }
    let nf = n as f64;
    let c = DEMO_LOG_OFFSET;
    let mut branches = vec![
        Branch { pre: vec![PreMap::new(|s| s, Interval::UNIT); n], post: Arc::new(move |g| g / nf) },
        Branch {
            pre: vec![PreMap::new(move |s| (s + c).ln(), Interval { lo: c.ln(), hi: (1.0 + c).ln() }); n],
            post: Arc::new(move |g| (g / nf).exp()),
        },
    ];
    if j == 3 {
        branches.push(Branch {
            pre: vec![PreMap::new(|s| s * s, Interval::UNIT); n],
            post: Arc::new(|g| (1.0 + g).sqrt()),
        });
    }
    let reference: MultivariateFn = Arc::new(move |s: &[f64]| {
        let mean = s.iter().sum::<f64>() / nf;
        let root = s.iter().map(|x| x + c).product::<f64>().powf(1.0 / nf);
        let norm = if j == 3 { (1.0 + s.iter().map(|x| x * x).sum::<f64>()).sqrt() } else { 0.0 };
        mean + root + norm
    });
    KolmogorovSpec::new(format!("demo_j{j}"), vec![Interval::UNIT; n], branches, reference, 1e-9)
}

/// A second function reachable from the `J = 2` demo transmissions:
/// `Σ s_i + mean(ln(s_i + 2))`.
pub fn demo_alternate_fusion(spec: &KolmogorovSpec) -> Result<FusionFunction, FunctionError> {
    let nf = spec.arity() as f64;
    let c = DEMO_LOG_OFFSET;
    FusionFunction::new(
        "demo_alternate",
        vec![Arc::new(|g| g), Arc::new(move |g| g / nf)],
        Arc::new(move |s: &[f64]| s.iter().sum::<f64>() + s.iter().map(|x| (x + c).ln()).sum::<f64>() / nf),
        spec,
    )
}
