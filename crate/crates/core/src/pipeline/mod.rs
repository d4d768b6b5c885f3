//! End-to-end computation chain.
//!
//! A node maps each reading through `φ`, quantizes it, packs `T` readings
//! into a message over `Z_p^k` and sends the lattice codeword of that
//! message. A fusion center decodes the modulo-`p` sum of the messages of
//! its cluster, unpacks the digit sums, dequantizes and applies `ψ`.
//! Superpositions repeat this once per branch, one block after another.

mod sim;

use std::sync::Arc;

use thiserror::Error;

use crate::channel::ChannelError;
use crate::functions::{FunctionError, Interval, PreMap, RangeMetadata, UnivariateFn};
use crate::lattice::{scale_to_power, ConstructionALattice, LatticeError, NestedLatticePair, ENUMERATION_LIMIT};
use crate::quantizer::{DyadicQuantizer, QuantizerError};
use crate::rates::RateError;
use crate::source_coding::{derive_packing, digit_base, select_prime, PackingError, PackingParams};

pub use sim::{run_kolmogorov, run_single_cluster, sum_decode_trials, BlockOutcome, SimReport, Simulation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Packing(#[from] PackingError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("expected {expected} readings, got {got}")]
    ReadingsMismatch { expected: usize, got: usize },
    #[error("codeword coordinate {value} leaves the shaping cell of half-width {half_width}")]
    ShapingViolation { value: f64, half_width: f64 },
    #[error("decoding needs {p}^{k} coset visits, above the limit of {limit}; use k = n or a smaller p")]
    Undecodable { p: u64, k: usize, limit: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// How the nested lattice pair is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeChoice {
    /// Block length `n`.
    pub block_len: usize,
    /// Message length `k ≤ n`.
    pub k: usize,
    /// Channel alphabet; the smallest admissible prime when absent.
    pub p: Option<u64>,
    pub generator_seed: u64,
    /// Message rate in bits per channel use that `p` must support.
    pub rate_target: Option<f64>,
}

impl LatticeChoice {
    pub fn new(block_len: usize, k: usize) -> Self {
        Self { block_len, k, p: None, generator_seed: 0, rate_target: None }
    }
}

/// Quantizer, packing and lattice pair shared by every node and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    quantizer: DyadicQuantizer,
    packing: PackingParams,
    pair: NestedLatticePair,
}

impl Scheme {
    /// `summands` is the largest number of messages any decoder adds up.
    pub fn build(
        b: u32,
        range: &RangeMetadata,
        summands: usize,
        choice: &LatticeChoice,
        power: f64,
    ) -> Result<Self, PipelineError> {
        let quantizer = DyadicQuantizer::new(b, range.shifted_pi_max, range.shift)?;
        let (n, k) = (choice.block_len, choice.k);
        if k == 0 || k > n {
            return Err(LatticeError::BadDimensions { k, n }.into());
        }
        let q = digit_base(b, summands as u64)?;
        let p = match choice.p {
            Some(p) => p,
            None => select_prime(q, n, k, choice.rate_target)?,
        };
        let packing = derive_packing(b, summands as u64, p, k)?;
        let lattice = ConstructionALattice::systematic(n, p, k, 1.0, choice.generator_seed)?;
        Self::from_parts(quantizer, packing, scale_to_power(&lattice, power)?)
    }

    pub fn from_parts(
        quantizer: DyadicQuantizer,
        packing: PackingParams,
        pair: NestedLatticePair,
    ) -> Result<Self, PipelineError> {
        if packing.p != pair.alphabet() || packing.k != pair.message_len() || packing.b0 != quantizer.bits() {
            return Err(PipelineError::Config(format!(
                "packing (b0 = {}, p = {}, k = {}) does not match quantizer bits {} and lattice (p = {}, k = {})",
                packing.b0,
                packing.p,
                packing.k,
                quantizer.bits(),
                pair.alphabet(),
                pair.message_len()
            )));
        }
        if !pair.lattice().is_full_space() && pair.lattice().coset_count() > ENUMERATION_LIMIT {
            return Err(PipelineError::Undecodable { p: pair.alphabet(), k: pair.message_len(), limit: ENUMERATION_LIMIT });
        }
        Ok(Self { quantizer, packing, pair })
    }

    pub fn quantizer(&self) -> &DyadicQuantizer {
        &self.quantizer
    }

    pub fn packing(&self) -> &PackingParams {
        &self.packing
    }

    pub fn pair(&self) -> &NestedLatticePair {
        &self.pair
    }

    /// Readings per node per block, `T`.
    pub fn readings_per_block(&self) -> usize {
        self.packing.readings_per_block()
    }

    pub fn block_len(&self) -> usize {
        self.pair.dimension()
    }

    /// Function values delivered per channel use by one branch, `T/n`.
    pub fn computation_rate(&self) -> f64 {
        self.readings_per_block() as f64 / self.block_len() as f64
    }

    /// Checks that every coordinate lies in the closed shaping cell.
    pub fn check_shaping(&self, x: &[f64]) -> Result<(), PipelineError> {
        let half_width = self.pair.lattice().shaping_side() / 2.0;
        let slack = 1e-9 * half_width.max(1.0);
        match x.iter().find(|v| !(v.abs() <= half_width + slack)) {
            Some(&value) => Err(PipelineError::ShapingViolation { value, half_width }),
            None => Ok(()),
        }
    }
}

/// One node's encoder for one branch.
#[derive(Debug, Clone)]
pub struct NodeEncoder {
    pub domain: Interval,
    pub pre: PreMap,
    pub scheme: Arc<Scheme>,
}

impl NodeEncoder {
    pub fn new(domain: Interval, pre: PreMap, scheme: Arc<Scheme>) -> Self {
        Self { domain, pre, scheme }
    }

    /// Quantizer levels of `T` readings.
    pub fn levels(&self, readings: &[f64]) -> Result<Vec<u64>, PipelineError> {
        let t = self.scheme.readings_per_block();
        if readings.len() != t {
            return Err(PipelineError::ReadingsMismatch { expected: t, got: readings.len() });
        }
        let q = &self.scheme.quantizer;
        readings
            .iter()
            .enumerate()
            .map(|(index, &s)| {
                if !(s >= self.domain.lo && s <= self.domain.hi) {
                    return Err(FunctionError::DomainViolation { index, value: s, lo: self.domain.lo, hi: self.domain.hi }
                        .into());
                }
                Ok(q.quantize(self.pre.eval(s) + q.shift())?)
            })
            .collect()
    }

    /// `E1(Q(φ(s[1])), …, Q(φ(s[T])))`.
    pub fn encode_message(&self, readings: &[f64]) -> Result<Vec<u64>, PipelineError> {
        Ok(self.scheme.packing.pack(&self.levels(readings)?)?)
    }

    /// Channel input for one block.
    pub fn encode_block(&self, readings: &[f64]) -> Result<Vec<f64>, PipelineError> {
        let x = self.scheme.pair.encode(&self.encode_message(readings)?)?;
        self.scheme.check_shaping(&x)?;
        Ok(x)
    }
}

/// What a fusion center recovers from one branch block.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDecode {
    /// Decoded modulo-`p` message sum.
    pub message: Vec<u64>,
    pub digit_sums: Vec<u64>,
    /// `Q⁻¹` of every digit sum, in the unshifted range.
    pub sums: Vec<f64>,
    /// True when some top digit reached `q`, which cannot happen for a
    /// correctly decoded sum.
    pub overflow: bool,
}

/// Estimated function values for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimate {
    pub branches: Vec<BranchDecode>,
    pub values: Vec<f64>,
}

/// A fusion center: mirrors the node parameters and holds the post maps
/// and constants of the function it computes.
#[derive(Clone)]
pub struct FcDecoder {
    pub scheme: Arc<Scheme>,
    /// Number of nodes whose messages are summed.
    pub summands: usize,
    pub posts: Vec<UnivariateFn>,
    pub constants: Vec<f64>,
}

impl std::fmt::Debug for FcDecoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FcDecoder")
            .field("summands", &self.summands)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl FcDecoder {
    /// `ĝ = E2⁻¹([Q_Λc(y)] mod Λs)`, then digit sums and dequantized sums.
    pub fn decode_branch(&self, y: &[f64]) -> Result<BranchDecode, PipelineError> {
        let message = self.scheme.pair.decode_ml(y)?;
        let (digit_sums, overflow) = self.scheme.packing.unpack_sum_lenient(&message);
        let q = &self.scheme.quantizer;
        let offset = self.summands as f64 * q.shift();
        let sums = digit_sums.iter().map(|&d| q.dequantize(d) - offset).collect();
        Ok(BranchDecode { message, digit_sums, sums, overflow: overflow.is_some() })
    }

    /// One received block per branch, in branch order.
    pub fn decode(&self, received: &[Vec<f64>]) -> Result<BlockEstimate, PipelineError> {
        if received.len() != self.posts.len() {
            return Err(PipelineError::Config(format!(
                "{} received blocks for {} branches",
                received.len(),
                self.posts.len()
            )));
        }
        let branches = received.iter().map(|y| self.decode_branch(y)).collect::<Result<Vec<_>, _>>()?;
        let t = self.scheme.readings_per_block();
        let values = (0..t)
            .map(|i| {
                let sums: Vec<f64> = branches.iter().map(|b| b.sums[i]).collect();
                self.posts.iter().zip(&sums).zip(&self.constants).map(|((psi, &g), &c)| psi(g + c)).sum()
            })
            .collect();
        Ok(BlockEstimate { branches, values })
    }

    /// Single-branch form of [`FcDecoder::decode`].
    pub fn decode_block(&self, y: &[f64]) -> Result<BlockEstimate, PipelineError> {
        self.decode(&[y.to_vec()])
    }
}

/// Monte Carlo tallies. One trial is one block of `T` function values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialReport {
    pub trials: u64,
    /// Trials where some decoded message sum differed from the true sum.
    pub sum_decode_failures: u64,
    /// Trials where some `|f̂ − f|` exceeded `ε` or was not finite.
    pub accuracy_failures: u64,
    /// Largest `|f̂ − f|` over trials with correct sum decoding.
    pub max_ok_error: f64,
    /// Trials with correct sum decoding but `|f̂ − f| ≥ ε`. Always zero
    /// unless the word length is below the required `b0`.
    pub bound_violations: u64,
}

impl TrialReport {
    pub fn record(&mut self, decoded: bool, error: f64, eps: f64) {
        self.trials += 1;
        if !decoded {
            self.sum_decode_failures += 1;
        }
        if !(error <= eps) {
            self.accuracy_failures += 1;
        }
        if decoded {
            self.max_ok_error = self.max_ok_error.max(error);
            if !(error < eps) {
                self.bound_violations += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &TrialReport) {
        self.trials += other.trials;
        self.sum_decode_failures += other.sum_decode_failures;
        self.accuracy_failures += other.accuracy_failures;
        self.max_ok_error = self.max_ok_error.max(other.max_ok_error);
        self.bound_violations += other.bound_violations;
    }

    pub fn sum_failure_fraction(&self) -> f64 {
        self.sum_decode_failures as f64 / self.trials as f64
    }

    pub fn accuracy_failure_fraction(&self) -> f64 {
        self.accuracy_failures as f64 / self.trials as f64
    }
}
