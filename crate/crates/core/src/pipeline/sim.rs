//! Monte Carlo over blocks.
//!
//! Readings for trial `t` come from the stream `[READINGS, t]`; the noise
//! of cluster `ℓ` in branch `j` from `[NOISE, t, ℓ, j]`. Per-trial outcomes
//! are collected in trial order and tallied sequentially.

use std::sync::Arc;

use rand::Rng;

use super::{FcDecoder, LatticeChoice, NodeEncoder, PipelineError, Scheme, TrialReport};
use crate::channel::{transmit, ChannelConfig, ClusterTopology};
use crate::exec::{self, Execution};
use crate::functions::{ClusterFunction, KolmogorovSpec, NomographicSpec};
use crate::lattice::{GoodnessEstimate, LatticeError, NestedLatticePair};
use crate::rates::{compute_b0, compute_b0_superposition, B0Search};
use crate::rng::{self, tag};
use crate::source_coding::add_mod;

/// Per-trial result for every fusion center.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    /// `(all branch sums decoded correctly, max |f̂ − f| over the block)`.
    pub clusters: Vec<(bool, f64)>,
}

/// Tallies for every fusion center and for the network as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub per_cluster: Vec<TrialReport>,
    /// A trial fails here if it fails at any fusion center.
    pub overall: TrialReport,
}

/// Encoders for every node and branch, decoders for every fusion center,
/// and the channel between them.
#[derive(Debug, Clone)]
pub struct Simulation {
    spec: KolmogorovSpec,
    topology: ClusterTopology,
    clusters: Vec<ClusterFunction>,
    scheme: Arc<Scheme>,
    /// `encoders[j][i]`.
    encoders: Vec<Vec<NodeEncoder>>,
    decoders: Vec<FcDecoder>,
    noise_var: f64,
    eps: f64,
}

impl Simulation {
    /// `clusters` lists what each fusion center computes. Several entries
    /// may refer to the same cluster; they then see the same received
    /// signal.
    pub fn new(
        spec: KolmogorovSpec,
        topology: ClusterTopology,
        clusters: Vec<ClusterFunction>,
        config: &ChannelConfig,
        eps: f64,
        b: u32,
        choice: &LatticeChoice,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        if topology.node_count() != spec.arity() {
            return Err(PipelineError::Config(format!(
                "topology has {} nodes but the function takes {} arguments",
                topology.node_count(),
                spec.arity()
            )));
        }
        if clusters.is_empty() {
            return Err(PipelineError::Config("no fusion centers".into()));
        }
        if choice.block_len != config.block_len {
            return Err(PipelineError::Config(format!(
                "lattice block length {} differs from channel block length {}",
                choice.block_len, config.block_len
            )));
        }
        let range = spec.range_metadata();
        let scheme = Arc::new(Scheme::build(b, &range, topology.max_cluster_size(), choice, config.power)?);
        let encoders = spec
            .branches()
            .iter()
            .map(|branch| {
                branch
                    .pre
                    .iter()
                    .zip(spec.domains())
                    .map(|(pre, &domain)| NodeEncoder::new(domain, pre.clone(), scheme.clone()))
                    .collect()
            })
            .collect();
        let decoders = clusters
            .iter()
            .map(|c| FcDecoder {
                scheme: scheme.clone(),
                summands: c.members.len(),
                posts: c.fusion.posts.clone(),
                constants: c.constants.clone(),
            })
            .collect();
        Ok(Self { spec, topology, clusters, scheme, encoders, decoders, noise_var: config.noise_var, eps })
    }

    /// One cluster of every node computing a nomographic function.
    pub fn single(
        spec: &NomographicSpec,
        config: &ChannelConfig,
        eps: f64,
        b: u32,
        choice: &LatticeChoice,
    ) -> Result<Self, PipelineError> {
        let sup = spec.to_superposition();
        let whole = ClusterFunction::whole(&sup);
        Self::new(sup, ClusterTopology::single(spec.arity()), vec![whole], config, eps, b, choice)
    }

    /// Every cluster computes the superposition with its own default
    /// post maps and constants.
    pub fn kolmogorov(
        spec: &KolmogorovSpec,
        topology: &ClusterTopology,
        config: &ChannelConfig,
        eps: f64,
        b: u32,
        choice: &LatticeChoice,
    ) -> Result<Self, PipelineError> {
        let clusters = (0..topology.cluster_count())
            .map(|l| ClusterFunction::new(topology, spec, l, spec.default_fusion()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(spec.clone(), topology.clone(), clusters, config, eps, b, choice)
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn spec(&self) -> &KolmogorovSpec {
        &self.spec
    }

    pub fn topology(&self) -> &ClusterTopology {
        &self.topology
    }

    pub fn cluster_functions(&self) -> &[ClusterFunction] {
        &self.clusters
    }

    pub fn encoder(&self, branch: usize, node: usize) -> &NodeEncoder {
        &self.encoders[branch][node]
    }

    pub fn decoder(&self, fc: usize) -> &FcDecoder {
        &self.decoders[fc]
    }

    /// `T` reading tuples drawn uniformly on the domain.
    pub fn draw_readings(&self, seed: u64, trial: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, &[tag::READINGS, trial]);
        (0..self.scheme.readings_per_block())
            .map(|_| self.spec.domains().iter().map(|d| d.lo + r.random::<f64>() * d.width()).collect())
            .collect()
    }

    fn node_readings(tuples: &[Vec<f64>], node: usize) -> Vec<f64> {
        tuples.iter().map(|s| s[node]).collect()
    }

    /// Messages `[j][i]` for `T` reading tuples.
    pub fn node_messages(&self, tuples: &[Vec<f64>]) -> Result<Vec<Vec<Vec<u64>>>, PipelineError> {
        self.encoders
            .iter()
            .map(|branch| {
                branch
                    .iter()
                    .enumerate()
                    .map(|(i, enc)| enc.encode_message(&Self::node_readings(tuples, i)))
                    .collect()
            })
            .collect()
    }

    /// Channel inputs `[j][i]` for `T` reading tuples. They depend only on
    /// the readings, never on what the fusion centers compute.
    pub fn node_transmissions(&self, tuples: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>, PipelineError> {
        self.node_messages(tuples)?
            .iter()
            .map(|branch| {
                branch
                    .iter()
                    .map(|m| {
                        let x = self.scheme.pair().encode(m)?;
                        self.scheme.check_shaping(&x)?;
                        Ok(x)
                    })
                    .collect()
            })
            .collect()
    }

    /// Runs one block with the given reading tuples (`T` of them).
    pub fn run_block(&self, tuples: &[Vec<f64>], seed: u64, trial: u64) -> Result<BlockOutcome, PipelineError> {
        let t = self.scheme.readings_per_block();
        if tuples.len() != t {
            return Err(PipelineError::ReadingsMismatch { expected: t, got: tuples.len() });
        }
        let messages = self.node_messages(tuples)?;
        let signals: Vec<Vec<Vec<f64>>> = messages
            .iter()
            .map(|branch| branch.iter().map(|m| self.scheme.pair().encode(m)).collect::<Result<_, _>>())
            .collect::<Result<_, LatticeError>>()?;
        let p = self.scheme.packing().p;
        let mut clusters = Vec::with_capacity(self.clusters.len());
        for (c, fc) in self.clusters.iter().zip(&self.decoders) {
            let mut received = Vec::with_capacity(signals.len());
            let mut truth = Vec::with_capacity(signals.len());
            for (j, branch) in signals.iter().enumerate() {
                let mut noise = rng::stream(seed, &[tag::NOISE, trial, c.cluster as u64, j as u64]);
                let parts: Vec<&[f64]> = c.members.iter().map(|&i| branch[i].as_slice()).collect();
                received.push(transmit(&parts, self.noise_var, &mut noise)?);
                let zero = vec![0u64; self.scheme.packing().k];
                truth.push(c.members.iter().fold(zero, |acc, &i| add_mod(&acc, &messages[j][i], p)));
            }
            let estimate = fc.decode(&received)?;
            let decoded = estimate.branches.iter().zip(&truth).all(|(b, g)| &b.message == g);
            let error = estimate
                .values
                .iter()
                .zip(tuples)
                .map(|(&v, s)| (v - c.reference(s)).abs())
                .fold(0.0, |acc: f64, e| if e.is_finite() { acc.max(e) } else { f64::INFINITY });
            clusters.push((decoded, error));
        }
        Ok(BlockOutcome { clusters })
    }

    fn tally(&self, outcomes: Vec<Result<BlockOutcome, PipelineError>>) -> Result<SimReport, PipelineError> {
        let mut per_cluster = vec![TrialReport::default(); self.clusters.len()];
        let mut overall = TrialReport::default();
        for outcome in outcomes {
            let outcome = outcome?;
            let mut all_decoded = true;
            let mut worst: f64 = 0.0;
            for (report, &(decoded, error)) in per_cluster.iter_mut().zip(&outcome.clusters) {
                report.record(decoded, error, self.eps);
                all_decoded &= decoded;
                worst = if error.is_finite() { worst.max(error) } else { f64::INFINITY };
            }
            overall.record(all_decoded, worst, self.eps);
        }
        Ok(SimReport { per_cluster, overall })
    }

    /// `trials` blocks of uniformly drawn readings.
    pub fn run(&self, trials: usize, seed: u64, exec: Execution) -> Result<SimReport, PipelineError> {
        let outcomes = exec::map_collect(exec, trials, |t| {
            let readings = self.draw_readings(seed, t as u64);
            self.run_block(&readings, seed, t as u64)
        });
        self.tally(outcomes)
    }

    /// Runs the given reading tuples, `T` per block. A short final block is
    /// padded by repeating its last tuple.
    pub fn run_tuples(&self, tuples: &[Vec<f64>], seed: u64, exec: Execution) -> Result<SimReport, PipelineError> {
        let t = self.scheme.readings_per_block();
        let blocks = tuples.len().div_ceil(t);
        let outcomes = exec::map_collect(exec, blocks, |b| {
            let mut block: Vec<Vec<f64>> = tuples[b * t..((b + 1) * t).min(tuples.len())].to_vec();
            while block.len() < t {
                block.push(block.last().expect("block is nonempty").clone());
            }
            self.run_block(&block, seed, b as u64)
        });
        self.tally(outcomes)
    }
}

/// One symbol per block when the enumerating decoder can handle the
/// alphabet, otherwise `k = n`, which decodes by rounding.
fn default_choice(
    spec: &KolmogorovSpec,
    topology: &ClusterTopology,
    config: &ChannelConfig,
    eps: f64,
    b: u32,
    clusters: &[ClusterFunction],
) -> Result<Simulation, PipelineError> {
    let n = config.block_len;
    match Simulation::new(spec.clone(), topology.clone(), clusters.to_vec(), config, eps, b, &LatticeChoice::new(n, 1)) {
        Err(PipelineError::Undecodable { .. }) => {
            Simulation::new(spec.clone(), topology.clone(), clusters.to_vec(), config, eps, b, &LatticeChoice::new(n, n))
        }
        other => other,
    }
}

/// Single-cluster Monte Carlo with `b = b0(spec, ε)` and a lattice of block
/// length `config.block_len` carrying one symbol per block (`k = n` when
/// the alphabet is too large to enumerate).
pub fn run_single_cluster(
    spec: &NomographicSpec,
    config: &ChannelConfig,
    eps: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<TrialReport, PipelineError> {
    let b0 = compute_b0(spec, eps, &B0Search { exec, ..B0Search::default() })?.b0;
    let sup = spec.to_superposition();
    let whole = [ClusterFunction::whole(&sup)];
    let sim = default_choice(&sup, &ClusterTopology::single(spec.arity()), config, eps, b0, &whole)?;
    Ok(sim.run(trials, seed, exec)?.overall)
}

/// Kolmogorov Monte Carlo with the joint `b0` of every cluster and the
/// lattice choice of [`run_single_cluster`]. Returns per-cluster reports and the network-wide report.
pub fn run_kolmogorov(
    spec: &KolmogorovSpec,
    topology: &ClusterTopology,
    config: &ChannelConfig,
    eps: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SimReport, PipelineError> {
    let clusters = (0..topology.cluster_count())
        .map(|l| ClusterFunction::new(topology, spec, l, spec.default_fusion()))
        .collect::<Result<Vec<_>, _>>()?;
    let b0 = compute_b0_superposition(spec, &clusters, eps, &B0Search { exec, ..B0Search::default() })?.b0;
    default_choice(spec, topology, config, eps, b0, &clusters)?.run(trials, seed, exec)
}

/// Lattice-only trials: `summands` nodes send codewords, the receiver
/// decodes the modulo-`p` message sum. With `messages` the same tuple is
/// sent in every trial; otherwise messages are drawn uniformly per trial.
pub fn sum_decode_trials(
    pair: &NestedLatticePair,
    summands: usize,
    messages: Option<&[Vec<u64>]>,
    noise_var: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<GoodnessEstimate, LatticeError> {
    let k = pair.message_len();
    let p = pair.alphabet();
    if let Some(m) = messages {
        if m.len() != summands {
            return Err(LatticeError::DimensionMismatch { expected: summands, got: m.len() });
        }
        for w in m {
            pair.encode(w)?;
        }
    }
    let fixed: Option<Vec<Vec<f64>>> =
        messages.map(|m| m.iter().map(|w| pair.encode(w).expect("validated above")).collect());
    let fixed_sum = messages.map(|m| m.iter().fold(vec![0u64; k], |acc, w| add_mod(&acc, w, p)));
    let outcomes = exec::map_collect(exec, trials, |t| -> Result<u64, LatticeError> {
        let (signals, sum) = match (&fixed, &fixed_sum) {
            (Some(x), Some(g)) => (x.clone(), g.clone()),
            _ => {
                let mut r = rng::stream(seed, &[tag::MESSAGES, t as u64]);
                let ws: Vec<Vec<u64>> =
                    (0..summands).map(|_| (0..k).map(|_| r.random_range(0..p)).collect()).collect();
                let g = ws.iter().fold(vec![0u64; k], |acc, w| add_mod(&acc, w, p));
                (ws.iter().map(|w| pair.encode(w)).collect::<Result<_, _>>()?, g)
            }
        };
        let mut noise = rng::stream(seed, &[tag::NOISE, t as u64]);
        let y = transmit(&signals, noise_var, &mut noise).expect("equal lengths and valid variance");
        Ok(u64::from(pair.decode_ml(&y)? != sum))
    });
    let escapes = outcomes.into_iter().sum::<Result<u64, _>>()?;
    Ok(GoodnessEstimate { escapes, trials: trials as u64 })
}
