//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the process
//! exits non-zero if any criterion fails.
//!
//! Oracles here are written independently of the library code they check.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Vector3};
use pcdenoise::geometry::{point_triangle_sq_distance, Point3, PointCloud, TriangleMesh};
use pcdenoise::io::{load_weights, save_weights, write_point_cloud};
use pcdenoise::metrics::evaluate;
use pcdenoise::noise::{add_gaussian_noise, NoiseSpec};
use pcdenoise::pipeline::{bench_case, cmd_denoise, cmd_train, fixture, BenchConfig, DenoiseArgs, ScoreSource, SigmaChoice};
use pcdenoise::prelude::*;
use pcdenoise::score::{
    evaluate_score, network_gradient, train_score_network, Dense, FnScore, NetworkWeights, Sample,
};
use pcdenoise::tvpc::SigmaSearchConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---------------------------------------------------------------------------
// Shared oracles

/// Neumaier-compensated sum.
#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Gradient of `log Σ_i exp(−‖y − x_i‖² / 2σ²)`.
fn mixture_score_oracle(y: &Point3, prior: &[Point3], sigma: f64) -> Point3 {
    let e: Vec<f64> = prior.iter().map(|x| -(y - x).norm_squared() / (2.0 * sigma * sigma)).collect();
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut g = Point3::zeros();
    for (ei, x) in e.iter().zip(prior) {
        let w = (ei - m).exp();
        z += w;
        g += (x - y) * w;
    }
    g / (z * sigma * sigma)
}

fn log_kde(points: &[Point3], h: f64, q: &Point3) -> f64 {
    let e: Vec<f64> = points.iter().map(|p| -(p - q).norm_squared() / (2.0 * h * h)).collect();
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + e.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn relu_layer(d: &Dense, x: &[f64], relu: bool) -> Vec<f64> {
    (0..d.rows)
        .map(|r| {
            let v = d.bias[r] + (0..d.cols).map(|c| d.weight[r * d.cols + c] * x[c]).sum::<f64>();
            if relu {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect()
}

/// Straight-line forward pass and loss, independent of the library's cached implementation.
fn loss_oracle(w: &NetworkWeights, batch: &[Sample], sigma_t: f64, scale: f64) -> f64 {
    let mut total = 0.0;
    for s in batch {
        let mut pooled = vec![f64::NEG_INFINITY; w.enc1.rows];
        for o in &s.offsets {
            let x = [o.x / scale, o.y / scale, o.z / scale];
            let h = relu_layer(&w.enc2, &relu_layer(&w.enc1, &x, true), true);
            for (p, v) in pooled.iter_mut().zip(h) {
                *p = p.max(v);
            }
        }
        let out = relu_layer(&w.head2, &relu_layer(&w.head1, &pooled, true), false);
        let score = Point3::new(out[0], out[1], out[2]) / scale;
        total += (score * sigma_t + s.u).norm_squared();
    }
    total / batch.len() as f64
}

fn random_points(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| Point3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .collect()
}

fn gauss3(rng: &mut impl Rng) -> Point3 {
    Point3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng))
}

// ---------------------------------------------------------------------------
// Criteria

fn tweedie_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7eed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(5..=200);
        let prior_pts = random_points(&mut rng, m, -1.0, 1.0);
        let prior = PointCloud::new(prior_pts.clone()).unwrap();
        let queries = PointCloud::new(random_points(&mut rng, 50, -1.5, 1.5)).unwrap();
        for sigma in [0.05, 0.1, 0.3, 1.0] {
            let p = prior_pts.clone();
            let field = FnScore::new("mixture", move |y: &Point3| mixture_score_oracle(y, &p, sigma));
            let out = tweedie_denoise(&queries, &field, sigma).unwrap();
            for (q, x) in queries.points().iter().zip(out.points()) {
                let want = posterior_mean_oracle(q, &prior, sigma);
                worst = worst.max((x - want).amax());
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 5.0),
        format!("max abs error {worst:.2e} (limit 1e-9), {:.2}s (limit 5s)", t.as_secs_f64()),
    )
}

fn score_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c0e);
    let pts = random_points(&mut rng, 100, 0.0, 1.0);
    let h = 0.1;
    let field = KdeScore::new(&PointCloud::new(pts.clone()).unwrap(), h).unwrap();
    let step = 1e-5;
    let mut kde_worst = 0.0f64;
    for _ in 0..100 {
        let q = random_points(&mut rng, 1, 0.0, 1.0)[0];
        let s = field.score(&q);
        let mut fd = Point3::zeros();
        for k in 0..3 {
            let mut e = Point3::zeros();
            e[k] = step;
            fd[k] = (log_kde(&pts, h, &(q + e)) - log_kde(&pts, h, &(q - e))) / (2.0 * step);
        }
        kde_worst = kde_worst.max((s - fd).norm() / fd.norm());
    }

    let mut net_worst = 0.0f64;
    for cfg in 0..3u64 {
        let mut w = NetworkWeights::zeros(4);
        for l in w.layers_mut() {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let batch: Vec<Sample> = (0..5)
            .map(|_| Sample {
                offsets: random_points(&mut rng, 3, -0.1, 0.1),
                u: gauss3(&mut rng),
            })
            .collect();
        let (sigma_t, scale) = (0.02 + 0.01 * cfg as f64, 0.05);
        let (_, grad) = network_gradient(&w, &batch, sigma_t, scale);
        let hstep = 1e-5;
        for li in 0..4 {
            let n_w = w.layers()[li].weight.len();
            let n = n_w + w.layers()[li].bias.len();
            for pi in 0..n {
                let eval = |d: f64| {
                    let mut v = w.clone();
                    let l = &mut v.layers_mut()[li];
                    if pi < n_w {
                        l.weight[pi] += d;
                    } else {
                        l.bias[pi - n_w] += d;
                    }
                    loss_oracle(&v, &batch, sigma_t, scale)
                };
                let fd = (eval(hstep) - eval(-hstep)) / (2.0 * hstep);
                let g = grad.layers()[li];
                let an = if pi < n_w { g.weight[pi] } else { g.bias[pi - n_w] };
                net_worst = net_worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-8));
            }
        }
    }
    let t = start.elapsed();
    outcome(
        kde_worst <= 1e-4 && net_worst <= 1e-4 && within(t, 30.0),
        format!(
            "KDE max rel error {kde_worst:.2e}, network gradient max rel error {net_worst:.2e} (limit 1e-4), {:.2}s (limit 30s)",
            t.as_secs_f64()
        ),
    )
}

fn denoising_efficacy() -> Outcome {
    let start = Instant::now();
    let cfg = BenchConfig { points: 10_000, ..BenchConfig::default() };
    let mut pass = true;
    let mut parts = Vec::new();
    for shape in ["sphere", "torus"] {
        for (level, limit) in [(0.01, 0.8), (0.02, 0.5), (0.03, 0.5)] {
            let ratios: Vec<f64> = (0..5)
                .map(|seed| bench_case(&cfg, shape, level, seed).unwrap().cd_ratio())
                .collect();
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            pass &= mean <= limit;
            parts.push(format!("{shape} {:.0}%: {mean:.3} (<= {limit})", level * 100.0));
        }
    }
    let t = start.elapsed();
    pass &= within(t, 120.0);
    outcome(
        pass,
        format!("CD denoised/noisy, KDE h = sigma: {}; {:.1}s (limit 120s)", parts.join(", "), t.as_secs_f64()),
    )
}

fn network_efficacy() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (mesh, clean) = fixture("sphere", 10_000, 0).unwrap();
    let (noisy, sigma_abs) = add_gaussian_noise(&clean, &NoiseSpec::gaussian(0.02, 1)).unwrap();
    let noisy_path = dir.path().join("noisy.xyz");
    write_point_cloud(&noisy_path, &noisy).unwrap();
    let weights_path = dir.path().join("sphere.n2s3");
    cmd_train(&noisy_path, &weights_path, &TrainConfig::default(), |_, _, _| {}).unwrap();

    let noisy = pcdenoise::io::read_point_cloud(&noisy_path).unwrap();
    let (noisy_n, t) = normalize_to_unit_sphere(&noisy);
    let sigma = t.scale_length(sigma_abs);
    let (w, k) = load_weights(&weights_path).unwrap();
    let net = NetworkScore::new(w, &noisy_n, k).unwrap();
    let den = t.invert(&tweedie_denoise(&noisy_n, &net, sigma).unwrap()).unwrap();
    let cd_noisy = evaluate(&noisy, &clean, Some(&mesh)).unwrap().cd;
    let cd_den = evaluate(&den, &clean, Some(&mesh)).unwrap().cd;
    let reduction = (cd_noisy - cd_den) / cd_noisy;

    let kde = KdeScore::new(&noisy_n, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc05);
    let queries: Vec<Point3> = (0..1000).map(|_| noisy_n.points()[rng.random_range(0..noisy_n.len())]).collect();
    let queries = PointCloud::new(queries).unwrap();
    let a = evaluate_score(&net, &queries);
    let b = evaluate_score(&kde, &queries);
    let cos = a
        .iter()
        .zip(&b)
        .map(|(x, y)| x.dot(y) / (x.norm() * y.norm()).max(f64::MIN_POSITIVE))
        .sum::<f64>()
        / a.len() as f64;
    let elapsed = start.elapsed();
    outcome(
        reduction >= 0.6 && cos >= 0.85 && within(elapsed, 900.0),
        format!(
            "CD reduction {reduction:.3} (CD ratio {:.3}; need reduction >= 0.6), mean cosine vs KDE {cos:.3} (>= 0.85), {:.0}s (limit 900s)",
            cd_den / cd_noisy,
            elapsed.as_secs_f64()
        ),
    )
}

fn blind_sigma() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (level, tol) in [(0.01, 0.55), (0.02, 0.15), (0.03, 0.15)] {
        let mut errs = Vec::new();
        for seed in 0..3 {
            let (_, clean) = fixture("sphere", 10_000, seed).unwrap();
            let (noisy, sigma_abs) = add_gaussian_noise(&clean, &NoiseSpec::gaussian(level, 100 + seed)).unwrap();
            let (noisy_n, t) = normalize_to_unit_sphere(&noisy);
            let sigma_true = t.scale_length(sigma_abs);
            let field = KdeScore::new(&noisy_n, sigma_true).unwrap();
            let est = estimate_sigma(&noisy_n, &field, &TvpcConfig::default(), &SigmaSearchConfig::default()).unwrap();
            let err = (est.sigma_star - sigma_true).abs() / sigma_true;
            pass &= err <= tol;
            errs.push(format!("{:.0}%", err * 100.0));
        }
        parts.push(format!("{:.0}%: [{}] (<= {:.0}%)", level * 100.0, errs.join(" "), tol * 100.0));
    }
    let t = start.elapsed();
    pass &= within(t, 300.0);
    outcome(
        pass,
        format!("relative error of sigma*, KDE h = sigma: {}; {:.1}s (limit 300s)", parts.join(", "), t.as_secs_f64()),
    )
}

fn inference_speed() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (_, clean) = fixture("sphere", 50_000, 5).unwrap();
    let (noisy, _) = add_gaussian_noise(&clean, &NoiseSpec::gaussian(0.02, 6)).unwrap();
    let (noisy_n, _) = normalize_to_unit_sphere(&noisy);
    let input = dir.path().join("noisy.xyz");
    write_point_cloud(&input, &noisy).unwrap();
    let quick = TrainConfig { epochs: 1, steps_per_epoch: Some(1), batch_points: 512, ..TrainConfig::default() };
    let trained = train_score_network(&noisy_n, &quick).unwrap();
    let weights = dir.path().join("w.n2s3");
    save_weights(&weights, &trained.weights, trained.k_feat).unwrap();

    let res = cmd_denoise(&DenoiseArgs {
        input,
        output: dir.path().join("den.xyz"),
        source: ScoreSource::Weights(weights),
        sigma: SigmaChoice::Given(0.02),
        tvpc: TvpcConfig::default(),
        search: SigmaSearchConfig::default(),
        reference: None,
        mesh: None,
    })
    .unwrap();
    let t = res.timings.inference();
    outcome(
        res.denoised.len() == 50_000 && t < 10.0,
        format!(
            "50k points, network score {:.2}s + update {:.3}s = {t:.2}s (limit 10s)",
            res.timings.score_eval, res.timings.tweedie
        ),
    )
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xcd);
    let mut cd_worst = 0.0f64;
    for case in 0..50 {
        let a = random_points(&mut rng, 20 + 10 * case, -1.0, 1.0);
        let b = random_points(&mut rng, 500 - 5 * case, -1.0, 1.0);
        let one_sided = |from: &[Point3], to: &[Point3]| {
            let mut acc = Kahan::default();
            for p in from {
                acc.add(to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min));
            }
            acc.value() / from.len() as f64
        };
        let want = one_sided(&a, &b) + one_sided(&b, &a);
        let got = chamfer_distance(&PointCloud::new(a).unwrap(), &PointCloud::new(b).unwrap()).unwrap();
        cd_worst = cd_worst.max((got - want).abs() / want);
    }
    let mut p2m_worst = 0.0f64;
    for case in 0..50 {
        let nv = 30 + case;
        let verts = random_points(&mut rng, nv, -1.0, 1.0);
        let faces: Vec<[usize; 3]> = (0..100)
            .map(|_| [rng.random_range(0..nv), rng.random_range(0..nv), rng.random_range(0..nv)])
            .collect();
        let (mesh, _) = TriangleMesh::new(verts, faces).unwrap();
        let pts = random_points(&mut rng, 200, -1.5, 1.5);
        let mut acc = Kahan::default();
        for p in &pts {
            let best = (0..mesh.faces().len())
                .map(|f| {
                    let [x, y, z] = mesh.triangle(f);
                    point_triangle_sq_distance(p, &x, &y, &z).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            acc.add(best);
        }
        let want = acc.value() / pts.len() as f64;
        let got = point_to_mesh_distance(&PointCloud::new(pts).unwrap(), &mesh).unwrap();
        p2m_worst = p2m_worst.max((got - want).abs() / want);
    }
    let t = start.elapsed();
    outcome(
        cd_worst <= 1e-12 && p2m_worst <= 1e-12 && within(t, 60.0),
        format!(
            "CD max rel error {cd_worst:.1e}, P2M max rel error {p2m_worst:.1e} over 50 cases each (limit 1e-12), {:.2}s (limit 60s)",
            t.as_secs_f64()
        ),
    )
}

fn tvpc_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70);
    let cloud = PointCloud::new((0..2000).map(|_| gauss3(&mut rng)).collect()).unwrap();
    let cfg = TvpcConfig::default();
    let base = tv_pc(&cloud, &cfg).unwrap();
    let mut rigid_worst = 0.0f64;
    for _ in 0..5 {
        let rot = Rotation3::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let shift = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let moved = cloud.map(|p| rot * p + shift).unwrap();
        rigid_worst = rigid_worst.max((tv_pc(&moved, &cfg).unwrap() - base).abs() / base);
    }

    let exact = TvpcConfig { epsilon: 0.0, ..cfg };
    let t1 = tv_pc(&cloud, &exact).unwrap();
    let mut homog_worst = 0.0f64;
    for c in [2.0, 0.5, 4.0] {
        let tc = tv_pc(&cloud.map(|p| p * c).unwrap(), &exact).unwrap();
        homog_worst = homog_worst.max((tc - c * t1).abs() / (c * t1));
    }

    let grid: Vec<Point3> = (0..30)
        .flat_map(|i| (0..30).map(move |j| Point3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0)))
        .collect();
    let grid = PointCloud::new(grid).unwrap();
    let g0 = tv_pc(&grid, &cfg).unwrap();
    let mut rougher = 0;
    for seed in 0..10 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
        let jittered: Vec<Point3> = grid.points().iter().map(|p| p + gauss3(&mut r) * 0.02).collect();
        if tv_pc(&PointCloud::new(jittered).unwrap(), &cfg).unwrap() > g0 {
            rougher += 1;
        }
    }
    outcome(
        rigid_worst <= 1e-10 && homog_worst <= 1e-12 && rougher == 10,
        format!(
            "rigid-motion rel change {rigid_worst:.1e} (<= 1e-10), homogeneity rel error {homog_worst:.1e} (<= 1e-12), jitter increases TV on {rougher}/10 seeds"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 tweedie exactness", tweedie_exactness),
        ("2 score correctness", score_correctness),
        ("3 KDE denoising efficacy", denoising_efficacy),
        ("4 trained network efficacy", network_efficacy),
        ("5 blind sigma estimation", blind_sigma),
        ("6 one-step inference speed", inference_speed),
        ("7 metric oracles", metric_oracles),
        ("8 total variation properties", tvpc_properties),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let res = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!("acceptance {name}: {} | {}", if res.pass { "PASS" } else { "FAIL" }, res.detail);
        if !res.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
