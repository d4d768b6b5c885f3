//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nomocomp::functions::{Branch, Interval, MapExpr, MultivariateFn, PreMap};
use nomocomp::pipeline::LatticeChoice;
use nomocomp::rates::snr_grid_db;
use nomocomp::{builtin, ChannelConfig, ClusterTopology, KolmogorovSpec, NomographicSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: FunctionConfig,
    #[serde(default)]
    pub topology: TopologyConfig,
    pub eps: f64,
    pub snr_db: SnrGrid,
    pub channel: ChannelSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    pub trials: usize,
    pub seed: u64,
    /// Output path; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    /// Builtin name, ignored when `branches` is set.
    pub name: String,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    /// TOML file describing a superposition branch by branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<PathBuf>,
    /// Fixed word length instead of the searched `b0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    /// Node lists per cluster; one cluster of every node when empty.
    #[serde(default)]
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrGrid {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub power: f64,
    pub block_len: usize,
    /// Fixed noise variance. Replaces the SNR grid in `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub k: usize,
    /// Smallest admissible prime when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(default)]
    pub generator_seed: u64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { k: 1, p: None, generator_seed: 0 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            function: FunctionConfig {
                name: "arithmetic_mean".into(),
                nodes: 5,
                s_min: None,
                branches: None,
                b0: None,
            },
            topology: TopologyConfig::default(),
            eps: 1e-3,
            snr_db: SnrGrid { start: 0.0, step: 2.0, stop: 30.0 },
            channel: ChannelSection { power: 1.0, block_len: 5, noise_var: None },
            lattice: LatticeSection::default(),
            trials: 1000,
            seed: 1,
            output: None,
        }
    }
}

impl SnrGrid {
    /// Parses `start:step:stop`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Config(format!("expected start:step:stop, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        Ok(Self { start: num(parts[0])?, step: num(parts[1])?, stop: num(parts[2])? })
    }

    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        snr_grid_db(self.start, self.step, self.stop).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// What the function section resolves to.
pub enum Target {
    Nomographic(NomographicSpec),
    Superposition(KolmogorovSpec),
}

impl Target {
    pub fn superposition(&self) -> KolmogorovSpec {
        match self {
            Target::Nomographic(s) => s.to_superposition(),
            Target::Superposition(s) => s.clone(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Target::Nomographic(s) => s.name(),
            Target::Superposition(s) => s.name(),
        }
    }
}

/// Branch file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchFile {
    name: String,
    /// Common domain `[lo, hi]` of every argument.
    domain: [f64; 2],
    branches: Vec<BranchEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchEntry {
    pre: MapExpr,
    /// Range `[lo, hi]` of `pre` over the domain.
    pre_range: [f64; 2],
    post: MapExpr,
}

fn interval(v: [f64; 2]) -> Result<Interval, CliError> {
    Interval::new(v[0], v[1]).map_err(|e| CliError::Config(e.to_string()))
}

fn load_branch_file(path: &Path, nodes: usize) -> Result<KolmogorovSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read branch file {}: {e}", path.display())))?;
    let file: BranchFile =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let domain = interval(file.domain)?;
    let branches = file
        .branches
        .iter()
        .map(|b| {
            let pre = b.pre.clone();
            Ok(Branch {
                pre: vec![PreMap::new(move |s| pre.apply(s), interval(b.pre_range)?); nodes],
                post: b.post.to_fn(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let entries = file.branches.clone();
    // The file defines the function, so the reference is the superposition itself.
    let reference: MultivariateFn = std::sync::Arc::new(move |s: &[f64]| {
        entries.iter().map(|b| b.post.apply(s.iter().map(|&x| b.pre.apply(x)).sum())).sum()
    });
    KolmogorovSpec::new(file.name, vec![domain; nodes], branches, reference, 1e-9)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(CliError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.snr_db.step <= 0.0 || self.snr_db.stop < self.snr_db.start {
            return Err(CliError::Config("snr_db grid must be ascending with a positive step".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if let Some(path) = &self.function.branches {
            if !path.exists() {
                return Err(CliError::Config(format!("branch file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn target(&self) -> Result<Target, CliError> {
        let f = &self.function;
        match &f.branches {
            Some(path) => Ok(Target::Superposition(load_branch_file(path, f.nodes)?)),
            None => builtin(&f.name, f.nodes, f.s_min)
                .map(Target::Nomographic)
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn topology(&self) -> Result<ClusterTopology, CliError> {
        if self.topology.clusters.is_empty() {
            return Ok(ClusterTopology::single(self.function.nodes));
        }
        ClusterTopology::new(self.function.nodes, self.topology.clusters.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn channel_at(&self, snr_db: f64) -> Result<ChannelConfig, CliError> {
        ChannelConfig::from_snr_db(self.channel.power, snr_db, self.channel.block_len)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn channel_fixed(&self, noise_var: f64) -> Result<ChannelConfig, CliError> {
        ChannelConfig::new(self.channel.power, noise_var, self.channel.block_len)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn lattice_choice(&self) -> LatticeChoice {
        LatticeChoice {
            p: self.lattice.p,
            generator_seed: self.lattice.generator_seed,
            ..LatticeChoice::new(self.channel.block_len, self.lattice.k)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let config = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&config.to_toml()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn full_config_round_trip() {
        let config = ExperimentConfig {
            function: FunctionConfig {
                name: "geometric_mean".into(),
                nodes: 4,
                s_min: Some(1e-20),
                branches: Some("f.toml".into()),
                b0: Some(13),
            },
            topology: TopologyConfig { clusters: vec![vec![0, 1], vec![1, 2, 3]] },
            eps: 0.1 + 0.2,
            snr_db: SnrGrid { start: -3.5, step: 0.1, stop: 12.25 },
            channel: ChannelSection { power: 2.5, block_len: 7, noise_var: Some(0.0) },
            lattice: LatticeSection { k: 3, p: Some(10_243), generator_seed: 42 },
            trials: 12,
            seed: 1 << 60,
            output: Some("out.csv".into()),
        };
        let back: ExperimentConfig = toml::from_str(&config.to_toml()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(SnrGrid::parse("0:2:30").unwrap(), SnrGrid { start: 0.0, step: 2.0, stop: 30.0 });
        assert!(SnrGrid::parse("0:2").is_err());
        assert!(SnrGrid::parse("a:1:2").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = ExperimentConfig::default().to_toml() + "\nbogus = 1\n";
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }
}
