//! Every cargo example runs to completion.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $name;
    };
}

example!(sample_shapes, "../examples/sample_shapes.rs");
example!(add_noise, "../examples/add_noise.rs");
example!(kde_denoise, "../examples/kde_denoise.rs");
example!(estimate_sigma, "../examples/estimate_sigma.rs");
example!(tweedie_oracle, "../examples/tweedie_oracle.rs");
example!(evaluate_metrics, "../examples/evaluate_metrics.rs");
example!(file_formats, "../examples/file_formats.rs");
example!(bench_sweep, "../examples/bench_sweep.rs");
example!(train_network, "../examples/train_network.rs");

#[test]
fn sample_shapes_runs() {
    sample_shapes::run().unwrap();
}

#[test]
fn add_noise_runs() {
    add_noise::run().unwrap();
}

#[test]
fn kde_denoise_runs() {
    kde_denoise::run().unwrap();
}

#[test]
fn estimate_sigma_runs() {
    estimate_sigma::run().unwrap();
}

#[test]
fn tweedie_oracle_runs() {
    tweedie_oracle::run().unwrap();
}

#[test]
fn evaluate_metrics_runs() {
    evaluate_metrics::run().unwrap();
}

#[test]
fn file_formats_runs() {
    file_formats::run().unwrap();
}

#[test]
fn bench_sweep_runs() {
    bench_sweep::run().unwrap();
}

#[test]
fn train_network_runs_briefly() {
    train_network::run(2).unwrap();
}
