use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use unirep::bundle::{self, RealizationSamples};
use unirep::gns::{self, State, SubGnsData};
use unirep::linalg::CVec;
use unirep::{rng, AlgebraSpec, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn setup(dims: &[usize]) -> SubGnsData {
    let spec = AlgebraSpec::new(dims).unwrap();
    let phi = State::new(&spec, spec.random_density(&mut rng::stream(1, rng::tags::STATE, 0), None)).unwrap();
    let g = gns::gns_build(&spec, &phi).unwrap();
    gns::sub_gns(&g, &spec.centralizer(phi.functional()).unwrap()).unwrap()
}

fn kernel_gram(c: &mut Criterion) {
    let sub = setup(&[3, 2]);
    let samples = RealizationSamples::draw(&sub, 40, 2);
    let xis: Vec<CVec> = (0..40)
        .map(|i| {
            let mut r = rng::stream(2, rng::tags::VECTORS, i);
            CVec::from_fn(sub.dim_h_phi(), |_, _| rng::complex_normal(&mut r))
        })
        .collect();
    let mut group = c.benchmark_group("kernel_gram_40_points");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| bundle::kernel_gram(&sub, black_box(&samples.unitaries), &xis, exec).unwrap())
        });
    }
    group.finish();
}

fn realization(c: &mut Criterion) {
    let sub = setup(&[3, 2]);
    let samples = RealizationSamples::draw(&sub, 20, 3);
    let mut group = c.benchmark_group("verify_realization_20_samples");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| bundle::verify_realization(&sub, black_box(&samples), 3, exec).unwrap())
        });
    }
    group.finish();
}

fn gns_verify(c: &mut Criterion) {
    let sub = setup(&[4, 3]);
    let mut group = c.benchmark_group("gns_verify_100_inputs");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sub.parent().verify(black_box(100), 4, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_gram, realization, gns_verify);
criterion_main!(benches);
