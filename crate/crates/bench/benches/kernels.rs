use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gzsl_core::calib::cascade_predict_batch;
use gzsl_core::datakit::{make_synthetic, sample_triplet_batch};
use gzsl_core::gml::{total_gml_loss, GmlNoise};
use gzsl_core::numkit::{Activation, DenseLayer, MlpNet};
use gzsl_core::pipeline::fit_classifiers;
use gzsl_core::{
    CascadeConfig, DualVae, DualVaeConfig, LossWeights, Matrix, RunConfig, SyntheticSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn matmul(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("matmul");
    for n in [64usize, 256] {
        let a = Matrix::<f32>::standard_normal(n, n, &mut rng);
        let b = Matrix::<f32>::standard_normal(n, n, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| black_box(&a).matmul(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Sized like a full-width visual encoder.
    let net = MlpNet::new(vec![
        DenseLayer::<f32>::init(2048, 1560, Activation::Relu, &mut rng),
        DenseLayer::init(1560, 128, Activation::Identity, &mut rng),
    ])
    .unwrap();
    let x = Matrix::standard_normal(64, 2048, &mut rng);
    c.bench_function("mlp_forward_backward", |bench| {
        bench.iter(|| {
            let (out, cache) = net.forward(black_box(&x)).unwrap();
            net.backward(&cache, &out).unwrap()
        })
    });
}

fn gml_loss(c: &mut Criterion) {
    let spec = SyntheticSpec::default();
    let ds = make_synthetic(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vae = DualVae::init(
        &DualVaeConfig::uniform(spec.visual_dim, spec.attribute_dim, 8, 64),
        &mut rng,
    );
    let batch = sample_triplet_batch(&ds, 64, &mut rng).unwrap();
    let noise = GmlNoise::sample(64, 8, &mut rng);
    let weights = LossWeights::default();
    c.bench_function("total_gml_loss", |bench| {
        bench.iter(|| total_gml_loss(&vae, black_box(&batch), &weights, &noise).unwrap())
    });
}

fn cascade(c: &mut Criterion) {
    let spec = SyntheticSpec::default();
    let ds = make_synthetic(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vae = DualVae::init(
        &DualVaeConfig::uniform(spec.visual_dim, spec.attribute_dim, 8, 64),
        &mut rng,
    );
    let cfg = RunConfig {
        classifier_steps: 20,
        ..RunConfig::default()
    };
    let bundle = fit_classifiers(&cfg, vae, &ds, &mut rng).unwrap();
    let (general, seen) = (bundle.general.unwrap(), bundle.seen.unwrap());
    let x = ds.test_visual();
    let cascade_cfg = CascadeConfig::default();
    c.bench_function("cascade_predict_batch", |bench| {
        bench.iter(|| {
            cascade_predict_batch(&general, &seen, &bundle.vae, black_box(&x), &cascade_cfg)
                .unwrap()
        })
    });
}

criterion_group!(benches, matmul, mlp, gml_loss, cascade);
criterion_main!(benches);
