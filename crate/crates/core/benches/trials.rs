use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nomocomp::pipeline::{LatticeChoice, Simulation};
use nomocomp::rates::{compute_b0, B0Search};
use nomocomp::{builtin, scale_to_power, ChannelConfig, ConstructionALattice, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn goodness(c: &mut Criterion) {
    let lattice = ConstructionALattice::systematic(12, 3, 4, 1.0, 0).unwrap();
    let pair = scale_to_power(&lattice, 1.0).unwrap();
    let mut group = c.benchmark_group("goodness_n12_p3_k4");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pair.empirical_goodness(0.15, 2000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn single_cluster(c: &mut Criterion) {
    let spec = builtin("arithmetic_mean", 5, None).unwrap();
    let config = ChannelConfig::from_snr_db(1.0, 20.0, 4).unwrap();
    let sim = Simulation::single(&spec, &config, 1e-3, 11, &LatticeChoice::new(4, 4)).unwrap();
    let mut group = c.benchmark_group("mean_n5_trials");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| sim.run(2000, 1, exec).unwrap()));
    }
    group.finish();
}

fn b0_search(c: &mut Criterion) {
    let spec = builtin("geometric_mean", 5, None).unwrap();
    let mut group = c.benchmark_group("b0_geometric_n5");
    group.sample_size(10);
    for (name, exec) in MODES {
        let search = B0Search { exec, ..B0Search::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| compute_b0(&spec, 1e-3, &search).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, goodness, single_cluster, b0_search);
criterion_main!(benches);
