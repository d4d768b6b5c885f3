//! Clustered Gaussian multiple-access channel.
//!
//! Nodes are grouped into possibly overlapping clusters, each served by one
//! fusion center. Within a cluster the fusion center receives the plain
//! superposition of the members' signals plus white Gaussian noise. Channel
//! gains are all one.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("a topology needs at least one node and one cluster")]
    EmptyTopology,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("cluster {cluster} names node {node}, but there are only {n} nodes")]
    NodeOutOfRange { cluster: usize, node: usize, n: usize },
    #[error("cluster {cluster} lists node {node} twice")]
    DuplicateNode { cluster: usize, node: usize },
    #[error("node {0} belongs to no cluster")]
    UncoveredNode(usize),
    #[error("signal has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no signals to superpose")]
    NoSignals,
    #[error("power must be positive and finite, got {0}")]
    BadPower(f64),
    #[error("noise variance must be nonnegative and finite, got {0}")]
    BadNoise(f64),
    #[error("block length must be at least 1")]
    BadBlockLen,
}

/// Membership of `N` nodes in `L` clusters. Clusters may overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTopology {
    n: usize,
    clusters: Vec<Vec<usize>>,
}

impl ClusterTopology {
    pub fn new(n: usize, clusters: Vec<Vec<usize>>) -> Result<Self, ChannelError> {
        if n == 0 || clusters.is_empty() {
            return Err(ChannelError::EmptyTopology);
        }
        let mut covered = vec![false; n];
        let mut sorted = Vec::with_capacity(clusters.len());
        for (cluster, mut members) in clusters.into_iter().enumerate() {
            if members.is_empty() {
                return Err(ChannelError::EmptyCluster(cluster));
            }
            members.sort_unstable();
            for w in members.windows(2) {
                if w[0] == w[1] {
                    return Err(ChannelError::DuplicateNode { cluster, node: w[0] });
                }
            }
            for &node in &members {
                if node >= n {
                    return Err(ChannelError::NodeOutOfRange { cluster, node, n });
                }
                covered[node] = true;
            }
            sorted.push(members);
        }
        if let Some(node) = covered.iter().position(|&c| !c) {
            return Err(ChannelError::UncoveredNode(node));
        }
        Ok(Self { n, clusters: sorted })
    }

    /// One cluster holding every node.
    pub fn single(n: usize) -> Self {
        Self::new(n, vec![(0..n).collect()]).expect("n >= 1")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, l: usize) -> &[usize] {
        &self.clusters[l]
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Clusters that `node` belongs to.
    pub fn memberships(&self, node: usize) -> Vec<usize> {
        (0..self.clusters.len()).filter(|&l| self.clusters[l].binary_search(&node).is_ok()).collect()
    }

    /// Nodes that belong to two or more clusters.
    pub fn common_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.memberships(i).len() >= 2).collect()
    }

    /// Channel gain from `node` to any fusion center. Fixed at one.
    pub fn gain(&self, _node: usize) -> f64 {
        1.0
    }
}

/// Power constraint, noise level and block length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub power: f64,
    /// Zero is accepted as the noiseless limit.
    pub noise_var: f64,
    pub block_len: usize,
}

impl ChannelConfig {
    pub fn new(power: f64, noise_var: f64, block_len: usize) -> Result<Self, ChannelError> {
        let c = Self { power, noise_var, block_len };
        c.validate()?;
        Ok(c)
    }

    /// Noise variance set from an SNR `P/σ²` in dB.
    pub fn from_snr_db(power: f64, snr_db: f64, block_len: usize) -> Result<Self, ChannelError> {
        Self::new(power, power / 10f64.powf(snr_db / 10.0), block_len)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(ChannelError::BadPower(self.power));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(ChannelError::BadNoise(self.noise_var));
        }
        if self.block_len == 0 {
            return Err(ChannelError::BadBlockLen);
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }
}

/// Coordinate-wise sum of the signals.
pub fn transmit_noiseless<S: AsRef<[f64]>>(signals: &[S]) -> Result<Vec<f64>, ChannelError> {
    let first = signals.first().ok_or(ChannelError::NoSignals)?.as_ref();
    let mut y = first.to_vec();
    for s in &signals[1..] {
        let s = s.as_ref();
        if s.len() != y.len() {
            return Err(ChannelError::LengthMismatch { expected: y.len(), got: s.len() });
        }
        for (a, b) in y.iter_mut().zip(s) {
            *a += b;
        }
    }
    Ok(y)
}

/// Superposition plus `N(0, noise_var)` noise drawn from `rng`.
///
/// Exactly one normal draw is consumed per coordinate, also when
/// `noise_var` is zero, so replaying a stream reproduces the noise.
pub fn transmit<S: AsRef<[f64]>, R: Rng + ?Sized>(
    signals: &[S],
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<f64>, ChannelError> {
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(ChannelError::BadNoise(noise_var));
    }
    let mut y = transmit_noiseless(signals)?;
    let sigma = noise_var.sqrt();
    for v in y.iter_mut() {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(y)
}

/// Block energy constraint `Σ x[m]² ≤ n·P`, with `1e-9` relative slack.
pub fn check_power(x: &[f64], config: &ChannelConfig) -> bool {
    let budget = x.len() as f64 * config.power;
    x.iter().map(|v| v * v).sum::<f64>() <= budget * (1.0 + 1e-9)
}

/// Time division over clusters: cluster `ℓ` transmits in slot `ℓ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TdmaSchedule {
    /// `slots[t]` is the cluster active in slot `t`.
    pub slots: Vec<usize>,
    /// Cluster pairs with no common node, which could in principle share a
    /// slot. Reported only; the schedule does not use them.
    pub merge_opportunities: Vec<(usize, usize)>,
}

pub fn tdma_schedule(topology: &ClusterTopology) -> TdmaSchedule {
    let l = topology.cluster_count();
    let disjoint = |a: &[usize], b: &[usize]| a.iter().all(|x| b.binary_search(x).is_err());
    let merge_opportunities = (0..l)
        .flat_map(|a| (a + 1..l).map(move |b| (a, b)))
        .filter(|&(a, b)| disjoint(topology.cluster(a), topology.cluster(b)))
        .collect();
    TdmaSchedule { slots: (0..l).collect(), merge_opportunities }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn topology_validation() {
        assert_eq!(ClusterTopology::new(0, vec![]), Err(ChannelError::EmptyTopology));
        assert_eq!(ClusterTopology::new(2, vec![vec![0], vec![]]), Err(ChannelError::EmptyCluster(1)));
        assert_eq!(
            ClusterTopology::new(2, vec![vec![0, 2]]),
            Err(ChannelError::NodeOutOfRange { cluster: 0, node: 2, n: 2 })
        );
        assert_eq!(ClusterTopology::new(3, vec![vec![0, 1]]), Err(ChannelError::UncoveredNode(2)));
        assert_eq!(
            ClusterTopology::new(2, vec![vec![1, 0, 1]]),
            Err(ChannelError::DuplicateNode { cluster: 0, node: 1 })
        );
    }

    #[test]
    fn common_nodes_and_sizes() {
        let t = ClusterTopology::new(6, vec![vec![0, 1, 2], vec![2, 3], vec![3, 4, 5], vec![5]]).unwrap();
        assert_eq!(t.common_nodes(), vec![2, 3, 5]);
        assert_eq!(t.max_cluster_size(), 3);
        assert_eq!(t.memberships(3), vec![1, 2]);
        assert_eq!(t.gain(4), 1.0);
    }

    #[test]
    fn schedule_examples() {
        let one = tdma_schedule(&ClusterTopology::single(4));
        assert_eq!(one.slots, vec![0]);
        assert!(one.merge_opportunities.is_empty());

        let t = ClusterTopology::new(6, vec![vec![0, 1, 2], vec![2, 3], vec![3, 4, 5], vec![5]]).unwrap();
        let s = tdma_schedule(&t);
        assert_eq!(s.slots, vec![0, 1, 2, 3]);
        assert_eq!(s.merge_opportunities, vec![(0, 2), (0, 3), (1, 3)]);

        let chained = ClusterTopology::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert!(tdma_schedule(&chained).merge_opportunities.is_empty());
    }

    #[test]
    fn noiseless_and_cancelling_sums() {
        let mut r = rng::stream(0, &[]);
        let y = transmit(&[vec![1.0, 2.0], vec![0.5, -1.0]], 0.0, &mut r).unwrap();
        assert_eq!(y, vec![1.5, 1.0]);
        let a = vec![0.3, -0.7, 1.1];
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        let mut r1 = rng::stream(4, &[]);
        let mut r2 = rng::stream(4, &[]);
        let noisy = transmit(&[a, b], 0.5, &mut r1).unwrap();
        let pure = transmit(&[vec![0.0; 3]], 0.5, &mut r2).unwrap();
        assert_eq!(noisy, pure);
        assert!(matches!(
            transmit(&[vec![0.0; 2], vec![0.0; 3]], 1.0, &mut r),
            Err(ChannelError::LengthMismatch { expected: 2, got: 3 })
        ));
        assert_eq!(transmit::<Vec<f64>, _>(&[], 1.0, &mut r), Err(ChannelError::NoSignals));
    }

    #[test]
    fn noise_variance_calibration() {
        let n = 100_000;
        let sigma2 = 0.37;
        let mut r = rng::stream(9, &[]);
        let y = transmit(&[vec![0.0; n]], sigma2, &mut r).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = sigma2 * (2.0 / n as f64).sqrt();
        assert!((var - sigma2).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn power_check_examples() {
        let c = ChannelConfig::new(2.0, 1.0, 4).unwrap();
        assert!(check_power(&[0.0; 4], &c));
        assert!(!check_power(&[2f64.sqrt() + 0.1; 4], &c));
        assert!(check_power(&[2f64.sqrt(); 4], &c));
    }

    #[test]
    fn config_validation() {
        assert_eq!(ChannelConfig::new(0.0, 1.0, 1), Err(ChannelError::BadPower(0.0)));
        assert_eq!(ChannelConfig::new(1.0, -1.0, 1), Err(ChannelError::BadNoise(-1.0)));
        assert_eq!(ChannelConfig::new(1.0, 1.0, 0), Err(ChannelError::BadBlockLen));
        let c = ChannelConfig::from_snr_db(2.0, 20.0, 3).unwrap();
        assert!((c.snr() - 100.0).abs() < 1e-9);
        assert!(ChannelConfig::new(1.0, 0.0, 1).unwrap().snr().is_infinite());
    }
}
