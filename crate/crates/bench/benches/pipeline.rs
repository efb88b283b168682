use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oamlink::ao::{correction, CorrectionKind};
use oamlink::experiment::{Link, StreamId};
use oamlink::grid::Fft2;
use oamlink::modes::{gaussian_beacon, lg_mode};
use oamlink::propagation::{ChannelRealization, ScreenPlacement, SplitStep};
use oamlink::quantum::{accumulate_density_matrix, concurrence, RealizationAmplitudes};
use oamlink::stats::{bloch_decomposition, bootstrap_error, concurrence_error};
use oamlink::turbulence::kolmogorov_screen;
use oamlink::{make_grid, LinkConfig, ModeIndex, Profile};

const LAMBDA: f64 = 1.064e-6;

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft2");
    for n in [256usize, 512] {
        let fft = Fft2::new(n);
        let data: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        group.bench_function(format!("forward_{n}"), |b| {
            b.iter_batched_ref(|| data.clone(), |d| fft.forward(d), BatchSize::LargeInput)
        });
    }
    group.finish();
}

fn screens(c: &mut Criterion) {
    let grid = make_grid(256, 0.4).unwrap();
    let mut group = c.benchmark_group("phase_screen_256");
    for orders in [0u32, 7] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        group.bench_function(format!("subharmonics_{orders}"), |b| {
            b.iter(|| kolmogorov_screen(&grid, 0.05, orders, &mut rng))
        });
    }
    group.finish();
}

fn propagation(c: &mut Criterion) {
    let grid = make_grid(256, 0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let screens = (0..4).map(|_| kolmogorov_screen(&grid, 0.05, 7, &mut rng)).collect();
    let ch = ChannelRealization::new(screens, 500.0).unwrap();
    let step = SplitStep::new(&grid, LAMBDA, 125.0, ScreenPlacement::Symmetric);
    let mode = lg_mode(&grid, ModeIndex::oam(3), 0.03, LAMBDA, 0.0).unwrap();
    c.bench_function("split_step_4_screens_256", |b| {
        b.iter_batched(|| mode.clone(), |f| step.run(f, &ch).unwrap(), BatchSize::LargeInput)
    });

    let beacon = step.run(gaussian_beacon(&grid, 0.0735, LAMBDA).unwrap(), &ch).unwrap();
    let mut group = c.benchmark_group("ao_256");
    for kind in [CorrectionKind::TipTilt, CorrectionKind::Ideal] {
        group.bench_function(kind.name(), |b| b.iter(|| correction(kind, black_box(&beacon))));
    }
    group.finish();
}

fn realization(c: &mut Criterion) {
    let cfg = LinkConfig::profile(Profile::Desk);
    let link = Link::new(&cfg).unwrap();
    let cn2 = 3.9e-14;
    let mut group = c.benchmark_group("desk_realization");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    group.bench_function("channel", |b| {
        b.iter(|| link.channel(cn2, StreamId::realization(0, 0, 0, 0)).unwrap())
    });
    let ch = link.channel(cn2, StreamId::realization(0, 0, 0, 0)).unwrap();
    group.bench_function("amplitudes_3l0_3scenarios", |b| {
        b.iter(|| link.amplitudes(&ch, &CorrectionKind::ALL).unwrap())
    });
    group.finish();
}

fn near_bell(rng: &mut ChaCha8Rng, eps: f64) -> RealizationAmplitudes {
    let mut noise = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * eps;
    let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    RealizationAmplitudes::new(noise(), h + noise(), h + noise(), noise())
}

fn statistics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ensemble: Vec<RealizationAmplitudes> = (0..200)
        .map(|_| near_bell(&mut rng, 0.1))
        .collect();
    c.bench_function("concurrence_200", |b| {
        b.iter(|| concurrence(&accumulate_density_matrix(black_box(&ensemble)).unwrap()))
    });
    c.bench_function("concurrence_error_200", |b| {
        b.iter(|| concurrence_error(&bloch_decomposition(black_box(&ensemble)).unwrap()))
    });
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    group.bench_function("500_resamples_200", |b| {
        b.iter(|| bootstrap_error(black_box(&ensemble), 500, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fft, screens, propagation, realization, statistics);
criterion_main!(benches);
