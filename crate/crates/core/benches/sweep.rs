use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mplql::montecarlo::{run_sweep, Grid, Parallelism, SweepConfig};
use mplql::{Protocol, SystemParams};

fn config(parallelism: Parallelism) -> SweepConfig {
    let mut cfg = SweepConfig::new(SystemParams {
        n_slots: 50,
        packets_per_device: 20,
        cell_radius_m: 100.0,
        ..SystemParams::default()
    });
    cfg.grid = Grid {
        protocols: vec![Protocol::MplQl, Protocol::IndependentQl],
        loading_factors: vec![2.0, 4.0],
        ..Grid::default()
    };
    cfg.n_realizations = 8;
    cfg.master_seed = 1;
    cfg.parallelism = parallelism;
    cfg
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, par) in [
        ("sequential", Parallelism::Threads(1)),
        ("parallel", Parallelism::Auto),
    ] {
        let cfg = config(par);
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run_sweep(cfg).unwrap())
        });
    }
    group.finish();
}

fn frame(c: &mut Criterion) {
    use mplql::engine::{build_devices, run_frame, Environment};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let p = SystemParams {
        packets_per_device: u32::MAX,
        ..SystemParams::default()
    };
    let env = Environment::new(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut devices = build_devices(&p, &env, &mut rng).unwrap();
    c.bench_function("frame/default-params", |b| {
        b.iter(|| run_frame(&mut devices, &p, &env, &mut rng).unwrap())
    });
}

criterion_group!(benches, sweep, frame);
criterion_main!(benches);
