//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! straight to stdout (bypassing the test harness capture) and then asserts.
//!
//! Run with `cargo test -p regperc --test acceptance`.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regperc::gaussian_wave::{sample_ball, supercritical_bound, WaveModel};
use regperc::graph::{count_cycles, generate_regular, Graph};
use regperc::level_sets::{
    critical_curve_experiment, ratio_at, steepest_point, sweep_ratio_curve, ExperimentParams, DEFAULT_WINDOW,
};
use regperc::percolation::{analytic_bracket, growth_rate, model_curve, orthant_sequential, CriticalOptions};
use regperc::spectral::{eigendecompose, mckay_bin_masses, mckay_density, nearest_eigenpair, SpectrumSupport};

fn report(n: u32, title: &str, ok: bool, detail: &str, elapsed: Duration) {
    let status = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n} ({title}): {status} [{:.1}s] {detail}", elapsed.as_secs_f64());
    let _ = out.flush();
}

fn lambda_grid(d: usize, step: f64) -> Vec<f64> {
    let edge = SpectrumSupport::new(d).hi;
    let k = (edge / step + 1e-9).floor() as i64;
    (-k..=k).map(|i| i as f64 * step).filter(|l| l.abs() < edge).collect()
}

#[test]
fn criterion_01_kernel_recursion() {
    let start = Instant::now();
    let mut worst_rec = 0.0_f64;
    let mut worst_init = 0.0_f64;
    for d in [3usize, 4, 7, 12] {
        let edge = SpectrumSupport::new(d).hi;
        for i in 0..9 {
            let lambda = edge * (-1.0 + 0.25 * i as f64);
            let m = WaveModel::new(lambda, d).unwrap();
            let phi = m.phi_sequence(41);
            worst_init = worst_init.max((phi[0] - 1.0).abs()).max((phi[1] - lambda / d as f64).abs());
            worst_init = worst_init.max((m.phi(1) - lambda / d as f64).abs());
            for k in 1..=40 {
                let lhs = lambda * phi[k];
                let rhs = phi[k - 1] + (d as f64 - 1.0) * phi[k + 1];
                worst_rec = worst_rec.max((lhs - rhs).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_rec <= 1e-10 && worst_init <= 1e-12 && elapsed < Duration::from_secs(1);
    report(
        1,
        "kernel correctness",
        ok,
        &format!("recursion error {worst_rec:.2e}, phi(0)/phi(1) error {worst_init:.2e}"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_02_closed_forms() {
    let start = Instant::now();
    let p3 = WaveModel::new(0.0, 3).unwrap().phi_total();
    let p12 = WaveModel::new(0.0, 12).unwrap().phi_total();
    let sub = WaveModel::new(0.0, 3).unwrap().subcritical_bound();
    let sup = supercritical_bound(3).unwrap();
    let ok = (p3 - 3.0).abs() <= 1e-12
        && (p12 - 1.2).abs() <= 1e-12
        && (sub - (6.0 * 2f64.ln()).sqrt()).abs() <= 1e-9
        && (sup + 0.67449).abs() <= 1e-6
        && sup > -0.68;
    report(2, "closed forms", ok, &format!("Phi(0,3)={p3} Phi(0,12)={p12} sub={sub} sup={sup}"), start.elapsed());
    assert!(ok);
}

#[test]
fn criterion_03_sampler_exactness() {
    let start = Instant::now();
    let model = WaveModel::new(0.0, 3).unwrap();
    let count = 10_000;
    let batch = sample_ball(&model, 4, count, 31).unwrap();
    let residual = batch.interior_residual();
    let dist = batch.ball.distance_matrix();
    let m = batch.ball.len();
    let mut worst_z = 0.0_f64;
    for i in 0..m {
        for j in i..m {
            let emp = batch.values.iter().map(|row| row[i] * row[j]).sum::<f64>() / count as f64;
            let truth = model.phi(dist[i][j]);
            // Var(x_i x_j) = Σ_ii Σ_jj + Σ_ij² for a centered Gaussian pair.
            let se = ((1.0 + truth * truth) / count as f64).sqrt();
            worst_z = worst_z.max((emp - truth).abs() / se);
        }
    }
    let elapsed = start.elapsed();
    let ok = residual <= 1e-6 && worst_z <= 4.0 && elapsed < Duration::from_secs(30);
    report(
        3,
        "sampler exactness",
        ok,
        &format!("interior residual {residual:.2e}, worst covariance z {worst_z:.2} over {m} vertices"),
        elapsed,
    );
    assert!(ok);
}

fn brute_force_state(g: &Graph, f: &[f64], alpha: f64) -> (usize, usize) {
    let n = g.n();
    let inside: Vec<bool> = f.iter().map(|&x| x > alpha).collect();
    let mut seen = vec![false; n];
    let mut best = 0;
    for s in 0..n {
        if !inside[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut size = 0;
        while let Some(u) = stack.pop() {
            size += 1;
            for &v in g.neighbors(u) {
                let v = v as usize;
                if inside[v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        best = best.max(size);
    }
    (inside.iter().filter(|&&b| b).count(), best)
}

#[test]
fn criterion_04_sweep_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut checked = 0;
    for instance in 0..100u64 {
        let (n, d) = loop {
            let n = rng.random_range(4..=12usize);
            let d = rng.random_range(3..=5usize);
            if d < n && (n * d) % 2 == 0 {
                break (n, d);
            }
        };
        let g = generate_regular(n, d, instance).unwrap();
        // Small integer values force ties on some instances.
        let f: Vec<f64> = if instance % 3 == 0 {
            (0..n).map(|_| rng.random_range(0..4) as f64).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
        };
        let curve = sweep_ratio_curve(&g, &f).unwrap();
        let mut distinct = f.clone();
        distinct.sort_by(|a, b| b.total_cmp(a));
        distinct.dedup();
        if curve.thresholds != distinct {
            mismatches += 1;
            continue;
        }
        for (i, &t) in distinct.iter().enumerate() {
            // State just below threshold t: every vertex with f >= t.
            let below = if i + 1 < distinct.len() { 0.5 * (t + distinct[i + 1]) } else { t - 1.0 };
            let (ind, mx) = brute_force_state(&g, &f, below);
            checked += 1;
            if curve.induced_sizes[i] != ind || curve.max_component_sizes[i] != mx || curve.state_at(below) != (ind, mx)
            {
                mismatches += 1;
            }
            let (ind_at, mx_at) = brute_force_state(&g, &f, t);
            let want = if ind_at == 0 { 0.0 } else { mx_at as f64 / ind_at as f64 };
            if ratio_at(&curve, t) != want {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && elapsed < Duration::from_secs(5);
    report(
        4,
        "sweep oracle",
        ok,
        &format!("{checked} thresholds over 100 instances, {mismatches} mismatches"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_05_ensemble_law() {
    let start = Instant::now();
    let triangles: Vec<f64> = (0..200u64)
        .map(|s| count_cycles(&generate_regular(200, 3, 5000 + s).unwrap(), 3).unwrap()[&3] as f64)
        .collect();
    let mean = triangles.iter().sum::<f64>() / triangles.len() as f64;

    let g = generate_regular(2000, 3, 55).unwrap();
    let pairs = eigendecompose(&g).unwrap();
    let support = SpectrumSupport::new(3);
    let bins = 40;
    let width = support.width() / bins as f64;
    let mut hist = vec![0.0; bins];
    let mut outside = 0.0;
    for p in &pairs {
        if support.contains(p.lambda) {
            let b = (((p.lambda - support.lo) / width) as usize).min(bins - 1);
            hist[b] += 1.0 / g.n() as f64;
        } else {
            outside += 1.0 / g.n() as f64;
        }
    }
    let masses = mckay_bin_masses(3, bins);
    let tv = 0.5 * (hist.iter().zip(&masses).map(|(a, b)| (a - b).abs()).sum::<f64>() + outside);
    let elapsed = start.elapsed();
    let ok = (mean - 4.0 / 3.0).abs() <= 0.3 && tv <= 0.05 && elapsed < Duration::from_secs(300);
    report(5, "ensemble law", ok, &format!("mean triangles {mean:.3} (4/3), spectral TV {tv:.4}"), elapsed);
    assert!(ok);
}

#[test]
fn criterion_06_growth_rate_cross_validation() {
    let start = Instant::now();
    let model = WaveModel::new(0.0, 3).unwrap();
    let mut worst_mc = 0.0_f64;
    let mut worst_grid = 0.0_f64;
    let mut detail = String::new();
    for (i, alpha) in [-0.5, 0.0, 0.5].into_iter().enumerate() {
        let r = growth_rate(&model, alpha, 128, 8.0).unwrap();
        let r_fine = growth_rate(&model, alpha, 256, 8.0).unwrap();
        let est = orthant_sequential(&model, 8, alpha, 1_000_000, 600 + i as u64).unwrap();
        let ratio = est.ratio(8);
        worst_mc = worst_mc.max((r - ratio.estimate).abs());
        worst_grid = worst_grid.max((r - r_fine).abs());
        detail.push_str(&format!("a={alpha}: r={r:.5} P8/P7={:.5}±{:.5}; ", ratio.estimate, ratio.stderr));
    }
    let elapsed = start.elapsed();
    let ok = worst_mc <= 0.02 && worst_grid <= 1e-4 && elapsed < Duration::from_secs(120);
    report(
        6,
        "growth-rate cross-validation",
        ok,
        &format!("{detail}max |r-MC| {worst_mc:.4}, max |r128-r256| {worst_grid:.2e}"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_07_critical_equation() {
    let start = Instant::now();
    let opts = CriticalOptions::default();
    let mut bracket_ok = true;
    let mut worst_residual = 0.0_f64;
    let mut curves = Vec::new();
    for d in [3usize, 5] {
        let grid = lambda_grid(d, 0.2);
        let points = model_curve(d, &grid, &opts).unwrap();
        for p in &points {
            let model = WaveModel::new(p.lambda, d).unwrap();
            let (lo, hi) = analytic_bracket(&model).unwrap();
            bracket_ok &= p.result.alpha_c >= lo && p.result.alpha_c <= hi;
            worst_residual = worst_residual.max(p.result.r_residual);
        }
        curves.push(points);
    }
    let d3 = &curves[0];
    let argmin = d3.iter().min_by(|a, b| a.result.alpha_c.total_cmp(&b.result.alpha_c)).unwrap();
    let min_ok = (-0.8..=-0.3).contains(&argmin.lambda);
    let d5_ok = curves[1].windows(2).all(|w| w[1].result.alpha_c >= w[0].result.alpha_c);
    let elapsed = start.elapsed();
    let ok = worst_residual <= 1e-6 && bracket_ok && min_ok && d5_ok;
    report(
        7,
        "critical equation",
        ok,
        &format!(
            "max r residual {worst_residual:.2e}, all in bracket: {bracket_ok}; d=3 minimum alpha_c={:.4} at lambda={:.1} \
             (required in [-0.8,-0.3]): {min_ok}; d=5 nondecreasing: {d5_ok}",
            argmin.result.alpha_c, argmin.lambda
        ),
        elapsed,
    );
    assert!(ok);
}

/// Diagnostic only: the model averaged over a bin with Kesten–McKay weights.
fn bin_average_model(d: usize, center: f64, width: f64, opts: &CriticalOptions) -> f64 {
    let edge = SpectrumSupport::new(d).hi;
    let lo = (center - width / 2.0).max(-edge + 1e-3);
    let hi = (center + width / 2.0).min(edge - 1e-3);
    let grid: Vec<f64> = (0..15).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 15.0).collect();
    let points = model_curve(d, &grid, opts).unwrap();
    let (mut s, mut w) = (0.0, 0.0);
    for p in &points {
        let m = mckay_density(p.lambda, d).unwrap();
        s += m * p.result.alpha_c;
        w += m;
    }
    s / w
}

#[test]
fn criterion_08_model_graph_agreement() {
    let start = Instant::now();
    let opts = CriticalOptions::default();
    let mut ok = true;
    let mut detail = String::new();
    for (d, seed) in [(3usize, 8003u64), (5, 8005)] {
        let params = ExperimentParams::new(d, 1000, 10, 8, seed);
        let curve = critical_curve_experiment(&params).unwrap();
        let centers: Vec<f64> = curve.bins.iter().map(|b| b.lambda_center).collect();
        let model = model_curve(d, &centers, &opts).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for (b, m) in curve.bins.iter().zip(&model) {
            let diff = (b.alpha_c_mean - m.result.alpha_c).abs();
            let allowed = 0.1 + 2.0 * b.alpha_c_stderr;
            worst = worst.max(diff - allowed);
            if diff.is_nan() || diff > allowed {
                ok = false;
                detail.push_str(&format!(
                    "d={d} bin {:.3}: graph {:.4}±{:.4} model {:.4} (density-weighted model over the bin {:.4}); ",
                    b.lambda_center,
                    b.alpha_c_mean,
                    b.alpha_c_stderr,
                    m.result.alpha_c,
                    bin_average_model(d, b.lambda_center, centers[1] - centers[0], &opts)
                ));
            }
        }
        detail.push_str(&format!("d={d} worst excess {worst:.4} ({} skipped); ", curve.skipped));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1800);
    report(8, "model-graph agreement", ok, detail.trim_end_matches("; "), elapsed);
    assert!(ok);
}

#[test]
fn criterion_09_sharpening_with_n() {
    let start = Instant::now();
    let mut widths = Vec::new();
    for n in [100usize, 250, 1000] {
        let mut total = 0.0;
        let mut samples = 0;
        for r in 0..20u64 {
            let g = generate_regular(n, 3, 9000 + 100 * n as u64 + r).unwrap();
            let pairs = eigendecompose(&g).unwrap();
            let pair = nearest_eigenpair(&pairs, 0.0).unwrap();
            for sign in [1.0, -1.0] {
                let f: Vec<f64> = pair.vector.iter().map(|x| sign * x).collect();
                let curve = sweep_ratio_curve(&g, &f).unwrap();
                if let Ok(est) = steepest_point(&curve, DEFAULT_WINDOW) {
                    total += est.window_width();
                    samples += 1;
                }
            }
        }
        widths.push((n, total / samples as f64, samples));
    }
    let elapsed = start.elapsed();
    let ok = widths.windows(2).all(|w| w[1].1 < w[0].1)
        && widths.iter().all(|w| w.2 >= 20)
        && elapsed < Duration::from_secs(600);
    let detail: Vec<String> = widths.iter().map(|(n, w, s)| format!("n={n}: {w:.4} ({s} samples)")).collect();
    report(9, "sharpening with n", ok, &detail.join(", "), elapsed);
    assert!(ok);
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "2", "4", "1"] {
        let out = dir.path().join(format!("cc_{}_{workers}.csv", outputs.len()));
        let status = Command::new(env!("CARGO_BIN_EXE_regperc"))
            .args([
                "critical-curve",
                "--d",
                "3",
                "--n",
                "200",
                "--realizations",
                "4",
                "--lambda-bins",
                "8",
                "--seed",
                "10",
            ])
            .arg("--out")
            .arg(&out)
            .env("REGPERC_WORKERS", workers)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    let ok = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
    report(
        10,
        "determinism",
        ok,
        &format!("{} runs with REGPERC_WORKERS in 1,2,4,1, byte-identical: {ok}", outputs.len()),
        start.elapsed(),
    );
    assert!(ok);
}
