use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use nomocomp::functions::ClusterFunction;
use nomocomp::pipeline::Simulation;
use nomocomp::rates::{compute_b0, compute_b0_superposition, rate_point, B0Report, B0Search, RateContext};
use nomocomp::source_coding::add_mod;
use nomocomp::{channel, rng, scale_to_power, ConstructionALattice, Execution};

use crate::config::{ExperimentConfig, SnrGrid, Target};
use crate::format::g6;
use crate::{Cli, CliError, Command};

/// Codebooks up to this size are listed in full.
const CODEBOOK_LISTING: u64 = 64;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = resolve_config(cli)?;
    let text = match &cli.command {
        Command::Rates => rates(&config)?,
        Command::B0 => b0(&config)?,
        Command::Simulate => simulate(&config)?,
        Command::DemoLattice { p, k, n, snr } => demo_lattice(*p, *k, *n, *snr, config.seed, config.channel.power)?,
        Command::Defaults => ExperimentConfig::default().to_toml(),
    };
    emit(config.output.as_deref(), &text)
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(grid) = &cli.snr_db {
        config.snr_db = SnrGrid::parse(grid)?;
    }
    config.validate()?;
    Ok(config)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cluster_functions(config: &ExperimentConfig, target: &Target) -> Result<Vec<ClusterFunction>, CliError> {
    let spec = target.superposition();
    let topology = config.topology()?;
    (0..topology.cluster_count())
        .map(|l| ClusterFunction::new(&topology, &spec, l, spec.default_fusion()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn search_b0(config: &ExperimentConfig, target: &Target) -> Result<B0Report, CliError> {
    let search = B0Search { seed: config.seed, ..B0Search::default() };
    let report = match target {
        Target::Nomographic(spec) if config.topology.clusters.is_empty() => compute_b0(spec, config.eps, &search),
        _ => compute_b0_superposition(
            &target.superposition(),
            &cluster_functions(config, target)?,
            config.eps,
            &search,
        ),
    };
    report.map_err(|e| CliError::Runtime(e.to_string()))
}

fn word_length(config: &ExperimentConfig, target: &Target) -> Result<u32, CliError> {
    match config.function.b0 {
        Some(b) => Ok(b),
        None => Ok(search_b0(config, target)?.b0),
    }
}

fn rates(config: &ExperimentConfig) -> Result<String, CliError> {
    let target = config.target()?;
    let ctx = RateContext { n_nodes: config.function.nodes, b0: word_length(config, &target)?, topology: None };
    let mut out = String::from("snr_db,rate_lattice,rate_separation,rate_awgn_bound,rate_tdma,rate_kolmogorov\n");
    for db in config.snr_db.points()? {
        let p = rate_point(db, &ctx);
        let row = [p.snr_db, p.lattice, p.separation, p.awgn_bound, p.tdma, p.kolmogorov];
        out += &row.map(g6).join(",");
        out.push('\n');
    }
    Ok(out)
}

fn b0(config: &ExperimentConfig) -> Result<String, CliError> {
    let target = config.target()?;
    let report = search_b0(config, &target)?;
    let mut out = String::new();
    writeln!(out, "function: {}", target.name()).unwrap();
    writeln!(out, "eps: {}", g6(config.eps)).unwrap();
    writeln!(out, "b0: {}", report.b0).unwrap();
    writeln!(out, "sup_error: {}", g6(report.measured_sup)).unwrap();
    writeln!(out, "error_bound: {}", g6(report.bound)).unwrap();
    writeln!(out, "integer_bits: {} (v = {})", report.v + 1, report.v).unwrap();
    writeln!(out, "fraction_bits: {}", report.eta).unwrap();
    Ok(out)
}

fn simulation(config: &ExperimentConfig, target: &Target, b: u32, noise: Noise) -> Result<Simulation, CliError> {
    let channel = match noise {
        Noise::Db(db) => config.channel_at(db)?,
        Noise::Variance(v) => config.channel_fixed(v)?,
    };
    let choice = config.lattice_choice();
    let sim = match target {
        Target::Nomographic(spec) if config.topology.clusters.is_empty() => {
            Simulation::single(spec, &channel, config.eps, b, &choice)
        }
        _ => Simulation::kolmogorov(&target.superposition(), &config.topology()?, &channel, config.eps, b, &choice),
    };
    sim.map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy)]
enum Noise {
    Db(f64),
    Variance(f64),
}

fn simulate(config: &ExperimentConfig) -> Result<String, CliError> {
    let target = config.target()?;
    let b = word_length(config, &target)?;
    let points: Vec<(f64, Noise)> = match config.channel.noise_var {
        Some(v) => vec![(10.0 * (config.channel.power / v).log10(), Noise::Variance(v))],
        None => config.snr_db.points()?.into_iter().map(|db| (db, Noise::Db(db))).collect(),
    };
    let mut out = String::from("snr_db,trials,sum_decode_failures,accuracy_failures,max_ok_error\n");
    for (db, noise) in points {
        let sim = simulation(config, &target, b, noise)?;
        let report = sim
            .run(config.trials, config.seed, Execution::Parallel)
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .overall;
        writeln!(
            out,
            "{},{},{},{},{}",
            g6(db),
            report.trials,
            report.sum_decode_failures,
            report.accuracy_failures,
            g6(report.max_ok_error)
        )
        .unwrap();
    }
    Ok(out)
}

fn vector(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|&x| g6(x)).collect::<Vec<_>>().join(", "))
}

fn demo_lattice(p: u64, k: usize, n: usize, snr_db: f64, seed: u64, power: f64) -> Result<String, CliError> {
    let lattice = ConstructionALattice::systematic(n, p, k, 1.0, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let pair = scale_to_power(&lattice, power).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = String::new();
    writeln!(
        out,
        "nested lattice code: n = {n}, k = {k}, p = {p}, P = {}, gamma = {}, rate = {} bit/use",
        g6(power),
        g6(pair.lattice().gamma()),
        g6(pair.message_rate())
    )
    .unwrap();
    writeln!(out, "generator:").unwrap();
    for row in pair.lattice().generator() {
        writeln!(out, "  {row:?}").unwrap();
    }
    let words = lattice.coset_count();
    if words <= CODEBOOK_LISTING {
        writeln!(out, "codebook ({words} words):").unwrap();
        for (w, x) in pair.codebook().map_err(|e| CliError::Runtime(e.to_string()))? {
            writeln!(out, "  {w:?} -> {}", vector(&x)).unwrap();
        }
    } else {
        writeln!(out, "codebook: {p}^{k} = {words} words, not listed").unwrap();
    }
    let noise_var = power / 10f64.powf(snr_db / 10.0);
    let mut r = rng::stream(seed, &[rng::tag::MESSAGES]);
    let w1: Vec<u64> = (0..k).map(|_| r.random_range(0..p)).collect();
    let w2: Vec<u64> = (0..k).map(|_| r.random_range(0..p)).collect();
    let x1 = pair.encode(&w1).map_err(|e| CliError::Runtime(e.to_string()))?;
    let x2 = pair.encode(&w2).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut noise = rng::stream(seed, &[rng::tag::NOISE]);
    let y = channel::transmit(&[&x1, &x2], noise_var, &mut noise).map_err(|e| CliError::Runtime(e.to_string()))?;
    let folded = pair.mod_shaping(&y).map_err(|e| CliError::Runtime(e.to_string()))?;
    let decoded = pair.decode_ml(&y).map_err(|e| CliError::Runtime(e.to_string()))?;
    let truth = add_mod(&w1, &w2, p);
    writeln!(out, "trace at {} dB (noise variance {}):", g6(snr_db), g6(noise_var)).unwrap();
    writeln!(out, "  w1 = {w1:?}, x1 = {}", vector(&x1)).unwrap();
    writeln!(out, "  w2 = {w2:?}, x2 = {}", vector(&x2)).unwrap();
    writeln!(out, "  y = x1 + x2 + z = {}", vector(&y)).unwrap();
    writeln!(out, "  y mod shaping = {}", vector(&folded)).unwrap();
    writeln!(
        out,
        "  decoded sum = {decoded:?}, true sum = {truth:?}: {}",
        if decoded == truth { "correct" } else { "wrong" }
    )
    .unwrap();
    Ok(out)
}
