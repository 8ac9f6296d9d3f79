use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sidelink_core::channel::{dbm_to_mw, SensedPowerGrid};
use sidelink_core::sps::{average_grids, stage2_candidates, stage3_select, SensingHistory, SpsPolicyConfig};
use sidelink_core::GridConfig;

fn noisy_history(grid: &GridConfig, rng: &mut ChaCha8Rng) -> SensingHistory {
    let mut h = SensingHistory::new();
    for _ in 0..10 {
        let values = (0..grid.total_subchannels())
            .map(|_| dbm_to_mw(rng.random_range(-115.0..-80.0)))
            .collect();
        h.push(SensedPowerGrid::from_values(grid, values).unwrap());
    }
    h
}

fn bench_selection(c: &mut Criterion) {
    let grid = GridConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let history = noisy_history(&grid, &mut rng);
    let cfg = SpsPolicyConfig::default();

    for alpha in [1.0, 0.4] {
        c.bench_function(&format!("average_grids alpha={alpha}"), |b| {
            b.iter(|| average_grids(black_box(&history), alpha, &grid).unwrap())
        });
    }

    let avg = average_grids(&history, 1.0, &grid).unwrap();
    c.bench_function("stage2+stage3", |b| {
        b.iter(|| {
            let s2 = stage2_candidates(black_box(&avg.rsrp), &cfg, &grid);
            stage3_select(&s2.candidates, &avg.rssi, &cfg, &grid, &mut rng).unwrap()
        })
    });
}

criterion_group!(benches, bench_selection);
criterion_main!(benches);
