//! Closed-form computation rates and the quantizer word-length search.
//!
//! Rates are function values per channel use. `snr` is always the linear
//! ratio `P/σ²`. `b0` is the quantizer word length and `n_nodes` the
//! number of summands `N`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ClusterTopology;
use crate::exec::{self, Execution};
use crate::functions::{
    corner_tuples, Builtin, ClusterFunction, FunctionError, KolmogorovSpec, NomographicSpec, RangeMetadata,
};
use crate::quantizer::{DyadicQuantizer, QuantizerError, MAX_BITS};
use crate::rng::{self, tag};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("the SNR grid is empty")]
    EmptyGrid,
    #[error("invalid SNR grid: {0}")]
    BadGrid(String),
    #[error("unknown multi-cluster variant '{0}'")]
    UnknownVariant(String),
    #[error("accuracy target must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("no word length up to {b_max} bits reaches the target; best error {best_error}")]
    Insufficient { b_max: u32, best_error: f64 },
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
}

/// `max(0, log2 x)`.
pub fn log2_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.log2()
    } else {
        0.0
    }
}

fn bits_per_value(b0: u32, summands: usize) -> f64 {
    b0 as f64 + (summands as f64).log2()
}

/// Nested lattice computation: `½·log2⁺(snr) / (b0 + log2 N)`.
pub fn rate_lattice(snr: f64, b0: u32, n_nodes: usize) -> f64 {
    0.5 * log2_plus(snr) / bits_per_value(b0, n_nodes)
}

/// Separate transmission and computation: `(1/2N)·log2(1 + N·snr) / b0`.
pub fn rate_separation(snr: f64, b0: u32, n_nodes: usize) -> f64 {
    1.0 / (2 * n_nodes) as f64 * (1.0 + n_nodes as f64 * snr).log2() / b0 as f64
}

/// Single-user AWGN capacity normalised like the lattice rate:
/// `½·log2(1 + snr) / (b0 + log2 N)`. An upper reference only.
pub fn rate_awgn_bound(snr: f64, b0: u32, n_nodes: usize) -> f64 {
    0.5 * (1.0 + snr).log2() / bits_per_value(b0, n_nodes)
}

/// Naive time sharing: every node gets `1/N` of the channel uses at power
/// `P`, so `(1/2N)·log2(1 + snr) / b0`.
pub fn rate_tdma(snr: f64, b0: u32, n_nodes: usize) -> f64 {
    1.0 / (2 * n_nodes) as f64 * (1.0 + snr).log2() / b0 as f64
}

/// `2N + 1` successive nomographic branches:
/// `(1/(4N+2))·log2⁺(snr) / (b0 + log2 N)`.
pub fn rate_kolmogorov(snr: f64, b0: u32, n_nodes: usize) -> f64 {
    1.0 / (4 * n_nodes + 2) as f64 * log2_plus(snr) / bits_per_value(b0, n_nodes)
}

/// Schemes for several clusters sharing the medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiClusterVariant {
    /// One nomographic function per cluster, clusters time-shared.
    NomographicTdma,
    /// Separation in each cluster, clusters time-shared.
    SeparationTdma,
    /// All `2N + 1` universal branches sent once for every cluster.
    KolmogorovUniversal,
    /// `2|C_ℓ| + 1` branches per cluster, clusters time-shared.
    KolmogorovTdma,
}

impl MultiClusterVariant {
    pub const ALL: [MultiClusterVariant; 4] = [
        MultiClusterVariant::NomographicTdma,
        MultiClusterVariant::SeparationTdma,
        MultiClusterVariant::KolmogorovUniversal,
        MultiClusterVariant::KolmogorovTdma,
    ];

    pub fn from_name(name: &str) -> Result<Self, RateError> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| RateError::UnknownVariant(name.to_string()))
    }

    pub fn name(&self) -> &'static str {
        match self {
            MultiClusterVariant::NomographicTdma => "nomographic_tdma",
            MultiClusterVariant::SeparationTdma => "separation_tdma",
            MultiClusterVariant::KolmogorovUniversal => "kolmogorov_universal",
            MultiClusterVariant::KolmogorovTdma => "kolmogorov_tdma",
        }
    }
}

/// Per-cluster rates for `variant`. `b0` is the joint word length used by
/// every cluster.
pub fn rate_multicluster(snr: f64, b0: u32, topology: &ClusterTopology, variant: MultiClusterVariant) -> Vec<f64> {
    let l = topology.cluster_count();
    let n = topology.node_count();
    let lattice_bits = bits_per_value(b0, topology.max_cluster_size());
    topology
        .clusters()
        .iter()
        .map(|members| {
            let c = members.len();
            match variant {
                MultiClusterVariant::NomographicTdma => 1.0 / (2 * l) as f64 * log2_plus(snr) / lattice_bits,
                MultiClusterVariant::SeparationTdma => {
                    1.0 / (2 * l * c) as f64 * (1.0 + c as f64 * snr).log2() / b0 as f64
                }
                MultiClusterVariant::KolmogorovUniversal => {
                    1.0 / (4 * n + 2) as f64 * log2_plus(snr) / lattice_bits
                }
                MultiClusterVariant::KolmogorovTdma => {
                    1.0 / ((4 * c + 2) * l) as f64 * log2_plus(snr) / lattice_bits
                }
            }
        })
        .collect()
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `start, start + step, …` up to and including `stop` (within `1e-9·step`).
pub fn snr_grid_db(start: f64, step: f64, stop: f64) -> Result<Vec<f64>, RateError> {
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
        return Err(RateError::BadGrid("non-finite bound".into()));
    }
    if stop < start {
        return Err(RateError::BadGrid(format!("stop {stop} is below start {start}")));
    }
    if !(step > 0.0) {
        return Err(RateError::BadGrid(format!("step must be positive, got {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// What a rate sweep is evaluated for.
#[derive(Debug, Clone, PartialEq)]
pub struct RateContext {
    pub n_nodes: usize,
    pub b0: u32,
    /// When present, per-cluster rates are added to every point.
    pub topology: Option<ClusterTopology>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiClusterRates {
    pub nomographic_tdma: Vec<f64>,
    pub separation_tdma: Vec<f64>,
    pub kolmogorov_universal: Vec<f64>,
    pub kolmogorov_tdma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub snr_db: f64,
    pub snr_linear: f64,
    pub lattice: f64,
    pub separation: f64,
    pub awgn_bound: f64,
    pub tdma: f64,
    pub kolmogorov: f64,
    pub multicluster: Option<MultiClusterRates>,
}

pub fn rate_point(snr_db: f64, ctx: &RateContext) -> RatePoint {
    let snr = db_to_linear(snr_db);
    let (b0, n) = (ctx.b0, ctx.n_nodes);
    RatePoint {
        snr_db,
        snr_linear: snr,
        lattice: rate_lattice(snr, b0, n),
        separation: rate_separation(snr, b0, n),
        awgn_bound: rate_awgn_bound(snr, b0, n),
        tdma: rate_tdma(snr, b0, n),
        kolmogorov: rate_kolmogorov(snr, b0, n),
        multicluster: ctx.topology.as_ref().map(|t| MultiClusterRates {
            nomographic_tdma: rate_multicluster(snr, b0, t, MultiClusterVariant::NomographicTdma),
            separation_tdma: rate_multicluster(snr, b0, t, MultiClusterVariant::SeparationTdma),
            kolmogorov_universal: rate_multicluster(snr, b0, t, MultiClusterVariant::KolmogorovUniversal),
            kolmogorov_tdma: rate_multicluster(snr, b0, t, MultiClusterVariant::KolmogorovTdma),
        }),
    }
}

pub fn sweep(grid_db: &[f64], ctx: &RateContext) -> Result<Vec<RatePoint>, RateError> {
    if grid_db.is_empty() {
        return Err(RateError::EmptyGrid);
    }
    Ok(grid_db.iter().map(|&db| rate_point(db, ctx)).collect())
}

/// Settings of the word-length search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct B0Search {
    /// Random tuples per argument, on top of the corner tuples.
    pub grid_per_arg: usize,
    pub b_max: u32,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for B0Search {
    fn default() -> Self {
        Self { grid_per_arg: 10_000, b_max: MAX_BITS, seed: 0, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct B0Report {
    pub b0: u32,
    /// Largest `|f − f̃|` seen on the evaluation grid at `b0`.
    pub measured_sup: f64,
    /// Analytic or numeric modulus bound at `b0`.
    pub bound: f64,
    pub v: i32,
    pub eta: u32,
    pub range: RangeMetadata,
}

/// Smallest word length for which quantizing every argument keeps the
/// single-cluster error of `spec` below `eps`.
///
/// The decision uses the larger of the measured grid error and an error
/// bound. Builtins use closed-form bounds; other functions use the
/// numeric modulus of [`compute_b0_superposition`].
pub fn compute_b0(spec: &NomographicSpec, eps: f64, search: &B0Search) -> Result<B0Report, RateError> {
    let superposition = spec.to_superposition();
    let whole = [ClusterFunction::whole(&superposition)];
    let n = spec.arity() as f64;
    let closed_form: Option<Box<dyn Fn(f64) -> f64>> = spec.builtin().map(|b| -> Box<dyn Fn(f64) -> f64> {
        match b {
            Builtin::ArithmeticMean => Box::new(|step| step),
            Builtin::GeometricMean { .. } => Box::new(|step: f64| -(-step).exp_m1()),
            Builtin::EuclideanNorm => Box::new(move |step: f64| (n * step).sqrt()),
        }
    });
    search_b0(&superposition, &whole, eps, search, |q| match &closed_form {
        Some(bound) => bound(q.max_quantization_error()),
        None => numeric_modulus(&superposition, &whole, q),
    })
}

/// Joint word length for a superposition decoded at several fusion
/// centers. Every listed cluster function must stay within `eps`.
///
/// The bound is a numeric modulus of continuity: for each branch and
/// cluster the post map is probed on a grid of its sum interval against
/// downward shifts of up to `|C|·2^(−η)`, the worst case of truncating
/// `|C|` readings, and the per-branch worst cases are added.
pub fn compute_b0_superposition(
    spec: &KolmogorovSpec,
    clusters: &[ClusterFunction],
    eps: f64,
    search: &B0Search,
) -> Result<B0Report, RateError> {
    search_b0(spec, clusters, eps, search, |q| numeric_modulus(spec, clusters, q))
}

const MODULUS_GRID: usize = 2_000;
const MODULUS_SHIFTS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn numeric_modulus(spec: &KolmogorovSpec, clusters: &[ClusterFunction], q: &DyadicQuantizer) -> f64 {
    clusters
        .iter()
        .map(|c| {
            let delta = c.members.len() as f64 * q.max_quantization_error();
            (0..spec.branch_count())
                .map(|j| {
                    let psi = &c.fusion.posts[j];
                    let interval = c.sum_interval(spec, j);
                    let mut worst: f64 = 0.0;
                    for g in interval.grid(MODULUS_GRID) {
                        let top = psi(g);
                        for frac in MODULUS_SHIFTS {
                            let d = (top - psi(g - frac * delta)).abs();
                            worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
                        }
                    }
                    worst
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `|f − f̃|` at one tuple, maximised over clusters. Non-finite estimates
/// count as infinite error.
fn tuple_error(
    spec: &KolmogorovSpec,
    clusters: &[ClusterFunction],
    q: &DyadicQuantizer,
    s: &[f64],
) -> Result<f64, RateError> {
    let shift = q.shift();
    let mut worst: f64 = 0.0;
    for c in clusters {
        let mut sums = Vec::with_capacity(spec.branch_count());
        for b in spec.branches() {
            let mut levels = 0u64;
            for &i in &c.members {
                levels += q.quantize(b.pre[i].eval(s[i]) + shift)?;
            }
            sums.push(q.dequantize_sum(levels, c.members.len() as u64)?);
        }
        let err = (c.fusion.combine(&sums, &c.constants) - c.reference(s)).abs();
        worst = if err.is_finite() { worst.max(err) } else { f64::INFINITY };
    }
    Ok(worst)
}

fn search_b0(
    spec: &KolmogorovSpec,
    clusters: &[ClusterFunction],
    eps: f64,
    search: &B0Search,
    bound: impl Fn(&DyadicQuantizer) -> f64,
) -> Result<B0Report, RateError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(RateError::BadEpsilon(eps));
    }
    let range = spec.range_metadata();
    let n = spec.arity();
    let mut r = rng::stream(search.seed, &[tag::GRID]);
    let randoms = (0..search.grid_per_arg * n)
        .map(|_| spec.domains().iter().map(|d| d.lo + r.random::<f64>() * d.width()).collect::<Vec<f64>>());
    let tuples: Vec<Vec<f64>> = corner_tuples(spec.domains()).into_iter().chain(randoms).collect();

    let mut best_error = f64::INFINITY;
    for b in DyadicQuantizer::min_bits(range.shifted_pi_max)..=search.b_max {
        let q = DyadicQuantizer::new(b, range.shifted_pi_max, range.shift)?;
        let bound_b = bound(&q);
        if !(bound_b < eps) {
            best_error = best_error.min(bound_b);
            continue;
        }
        let measured = exec::map_reduce(
            search.exec,
            tuples.len(),
            || Ok(0.0),
            |t| tuple_error(spec, clusters, &q, &tuples[t]),
            |a: Result<f64, RateError>, b| Ok(a?.max(b?)),
        )?;
        best_error = best_error.min(measured.max(bound_b));
        if measured < eps {
            return Ok(B0Report { b0: b, measured_sup: measured, bound: bound_b, v: q.v(), eta: q.eta(), range });
        }
    }
    Err(RateError::Insufficient { b_max: search.b_max, best_error })
}
