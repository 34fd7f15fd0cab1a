use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vmg_core::game_core::{random_payoff_model, seeded_rng, NoiseKind, NoiseOracle, RegGameSpec};
use vmg_core::matrix_vmg::{run_vmg_matrix, MatrixVmgConfig};
use vmg_core::par::{par_map, seq_map};
use vmg_core::AlphaSchedule;

fn cell(oracle: &NoiseOracle, seed: u64) -> f64 {
    let spec = RegGameSpec::uniform(0.5, 6, 6).unwrap();
    let cfg = MatrixVmgConfig::new(6, 6, 3, spec, AlphaSchedule::PaperFormula { delta: 0.05 }, 40, seed);
    run_vmg_matrix(&cfg, oracle).unwrap().total_regret()
}

fn sweep(c: &mut Criterion) {
    let model = random_payoff_model(6, 6, 3, &mut seeded_rng(11)).unwrap();
    let oracle = NoiseOracle::new(model, 0.1, NoiseKind::Gaussian).unwrap();
    let seeds: Vec<u64> = (0..8).collect();
    let mut g = c.benchmark_group("seed_sweep");
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("sequential", seeds.len()), &seeds, |b, s| {
        b.iter(|| seq_map(s, |&seed| cell(&oracle, seed)))
    });
    g.bench_with_input(BenchmarkId::new("parallel", seeds.len()), &seeds, |b, s| {
        b.iter(|| par_map(s, |&seed| cell(&oracle, seed)))
    });
    g.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
