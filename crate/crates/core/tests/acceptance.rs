//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run all: `cargo test --test acceptance`; a subset: `cargo test --test
//! acceptance -- 1 7`. Set `LPBF_ACCEPTANCE_SURROGATE=<file>` to reuse a
//! surrogate built earlier with the default settings instead of rebuilding.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use lpbf_twin::calibrate::{builtin_afrl, calibrate, initial_guess, synthetic_cases, CalibrationConfig};
use lpbf_twin::control::{
    build_dataset, closed_loop, evaluate, generate_traces, gradient_check, sigmoid_targets, train, Command as Cmd,
    CommandBox, Mlp, ProcessConstants, SurrogatePlant, TrainConfig, WINDOW,
};
use lpbf_twin::heat_source::{generate_path, BeamState, PathGeometry, StochasticBeamLaw};
use lpbf_twin::hopgd::{design_grid, fit, FitOptions, SolverSampler, Surrogate, SurrogateConfig, Tensor4};
use lpbf_twin::material::MaterialModel;
use lpbf_twin::postproc::{lof_porosity, sa_roughness, spearman, ved, HeightField, Region};
use lpbf_twin::solver::{run_scan, steady_dims, Domain, ParamSource, ProcessSettings, SolverConfig};
use lpbf_twin::stats::{kld, mh_chain, silverman_bandwidth, ChainOptions, KdeModel, TriNormal, UniformGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "conduction oracle", criterion_1),
        (2, "statistics suite", criterion_2),
        (3, "separated surrogate suite", criterion_3),
        (4, "MCMC suite", criterion_4),
        (5, "calibration self-consistency", criterion_5),
        (6, "AFRL envelope", criterion_6),
        (7, "post-processing", criterion_7),
        (8, "controller", criterion_8),
        (9, "reproducibility", criterion_9),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {n} ({name}): PASS [{secs:.1} s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1} s] {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Shared surrogate built from solver runs at the default settings.

fn surrogate() -> &'static Surrogate {
    static S: OnceLock<Surrogate> = OnceLock::new();
    S.get_or_init(|| {
        if let Ok(p) = std::env::var("LPBF_ACCEPTANCE_SURROGATE") {
            if let Ok(text) = std::fs::read_to_string(&p) {
                return Surrogate::from_json(&text).expect("cached surrogate parses");
            }
        }
        let t = Instant::now();
        let sampler = SolverSampler::new(MaterialModel::in625(), SurrogateConfig::default()).unwrap();
        let (s, _) = Surrogate::build(&sampler).unwrap();
        println!(
            "  surrogate: {} snapshots in {:.0} s, rank W {} / D {}, residual W {:.1e} / D {:.1e}",
            s.provenance.snapshots,
            t.elapsed().as_secs_f64(),
            s.width.rank(),
            s.depth.rank(),
            s.width.fit_residual,
            s.depth.fit_residual
        );
        if let Ok(p) = std::env::var("LPBF_ACCEPTANCE_SURROGATE") {
            let _ = std::fs::write(p, s.to_json().unwrap());
        }
        s
    })
}

// ---------------------------------------------------------------------------
// 1. Steady conduction pool against the moving point source.

/// Temperature rise of a point source `q` moving at `v` over a half-space,
/// at distance `r` and signed distance `xi` ahead of the source.
fn point_source_rise(q: f64, k: f64, a: f64, v: f64, xi: f64, r: f64) -> f64 {
    q / (2.0 * PI * k * r) * (-v * (r + xi) / (2.0 * a)).exp()
}

/// Largest radial extent of the `dt` isotherm, found by bisection on the
/// distance at each `xi` and a scan over `xi`.
fn point_source_radius(q: f64, k: f64, a: f64, v: f64, dt: f64) -> f64 {
    let radius_at = |xi: f64| -> f64 {
        let r_min = xi.abs().max(1e-12);
        if point_source_rise(q, k, a, v, xi, r_min) < dt {
            return 0.0;
        }
        let (mut lo, mut hi) = (r_min, r_min + 1e-2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if point_source_rise(q, k, a, v, xi, mid) > dt {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * lo - xi * xi).max(0.0).sqrt()
    };
    let mut best = 0.0f64;
    let n = 20000;
    for i in 0..=n {
        let xi = -2e-3 + 2.2e-3 * i as f64 / n as f64;
        best = best.max(radius_at(xi));
    }
    best
}

fn criterion_1() -> Outcome {
    let (k, rho, cp, tm, t0) = (20.0, 8000.0, 600.0, 1600.0, 300.0);
    let m = MaterialModel {
        solid_density: rho,
        liquid_density: rho,
        powder_density: rho,
        t_solidus: tm - 0.5,
        t_liquidus: tm + 0.5,
        latent_heat: 0.0,
        cp_solid_poly: (0.0, cp),
        cp_liquid: cp,
        cp_powder_poly: (0.0, cp),
        k_solid_poly: (0.0, k),
        k_liquid: k,
        k_powder: k,
        t_ambient: t0,
        t_reference: t0,
        t_preheat: t0,
        ..MaterialModel::in625()
    };
    let (q, v) = (30.0, 0.15);
    let dx = 5e-6;
    let domain = Domain::single_track(dx, 9e-4, 6e-4, 3e-4, true).map_err(|e| e.to_string())?;
    let geom = PathGeometry::single_track(6.5e-4, [1e-4, 0.0, 0.0]);
    let path = generate_path(&geom, v, dx / v, None).map_err(|e| e.to_string())?;
    let beam = BeamState { power: q, speed: v, absorptivity: 1.0, radius: 1e-5, depth: 1e-5 };
    let cfg = SolverConfig {
        dt_safety: 0.5,
        boundary_losses: false,
        max_temperature_cap: 1e8,
        trace_stride: 0,
        ..SolverConfig::default()
    };
    let t = Instant::now();
    let run = run_scan(&domain, &m, &path, ParamSource::Beam(beam), ProcessSettings { power: q, speed: v, rhf: None }, &cfg)
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let dims = steady_dims(&run.state, &domain, &m, 4.5e-4, 5.0e-4).map_err(|e| e.to_string())?;

    // The pool boundary is where the liquidus is crossed.
    let r = point_source_radius(q, k, k / (rho * cp), v, m.t_liquidus - t0);
    let (w_ref, d_ref) = (2.0 * r, r);
    let ew = (dims.width - w_ref).abs() / w_ref;
    let ed = (dims.depth - d_ref).abs() / d_ref;
    check(
        ew <= 0.10 && ed <= 0.10 && elapsed < Duration::from_secs(300),
        format!(
            "W {:.1} µm vs {:.1} µm ({:.1}%), D {:.1} µm vs {:.1} µm ({:.1}%), runtime {:.0} s (limits 10%, 300 s)",
            dims.width * 1e6,
            w_ref * 1e6,
            100.0 * ew,
            dims.depth * 1e6,
            d_ref * 1e6,
            100.0 * ed,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Bandwidth, KDE normalization and divergences.

fn normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let u = (x - mu) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * PI).sqrt())
}

fn criterion_2() -> Outcome {
    let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0, 5.0]).map_err(|e| e.to_string())?;
    // σ̂ = √2.5, IQR = 4 − 2 by linear-interpolated quartiles.
    let h_ref = 0.9 * (2.5f64).sqrt().min(2.0 / 1.35) * 5f64.powf(-0.2);
    let e_h = (h - h_ref).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = (0..500).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect();
    let kde = KdeModel::fit(samples).map_err(|e| e.to_string())?;
    let g = UniformGrid::new(kde.min() - 12.0 * kde.bandwidth, kde.max() + 12.0 * kde.bandwidth, 20001).map_err(|e| e.to_string())?;
    let integral = g.trapezoid(&kde.pdf_on_grid(&g));

    let grid = UniformGrid::new(-12.0, 13.0, 20001).map_err(|e| e.to_string())?;
    let p: Vec<f64> = grid.nodes().iter().map(|&x| normal_pdf(x, 0.0, 1.0)).collect();
    let q: Vec<f64> = grid.nodes().iter().map(|&x| normal_pdf(x, 1.0, 1.0)).collect();
    let d_pq = kld(&p, &q, &grid).map_err(|e| e.to_string())?;
    let d_pp = kld(&p, &p, &grid).map_err(|e| e.to_string())?;

    check(
        e_h <= 1e-12 && (integral - 1.0).abs() <= 1e-6 && (d_pq - 0.5).abs() <= 1e-3 && d_pp.abs() < 1e-10,
        format!(
            "h = {h:.15} (|Δ| {e_h:.1e}), KDE integral − 1 = {:.1e}, KLD(N(0,1)‖N(1,1)) = {d_pq:.6}, KLD(p,p) = {d_pp:.1e}",
            integral - 1.0
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Separated fits.

fn criterion_3() -> Outcome {
    let ranges = [(150.0, 335.0), (1.5e-7, 5.5e-7), (5e-4, 3e-3), (0.8e-7, 3.5e-7)];
    let nodes = design_grid(ranges, [5; 4]).map_err(|e| e.to_string())?;

    let t1 = Tensor4::from_fn(nodes.clone(), |q| q[0] * q[1] * (1.0 + q[2] * 100.0) * q[3]);
    let m1 = fit(&t1, &FitOptions { tol: 1e-10, max_modes: 1, ..Default::default() }).map_err(|e| e.to_string())?;

    let unit = design_grid([(1.0, 3.0), (0.5, 1.5), (0.5, 1.5), (0.5, 1.5)], [5; 4]).map_err(|e| e.to_string())?;
    let rank2 = |q: [f64; 4]| q[0].sin() * q[1] * q[2] + q[0] * q[0] * q[3];
    let t2 = Tensor4::from_fn(unit.clone(), rank2);
    let m2 = fit(&t2, &FitOptions { tol: 1e-7, max_modes: 2, ..Default::default() }).map_err(|e| e.to_string())?;

    // Leave one interior node out and predict it.
    let mut held = Tensor4::from_fn(unit, rank2);
    let ix = [2, 3, 1, 2];
    let flat = held.flat(ix);
    held.mask[flat] = false;
    let mh = fit(&held, &FitOptions { tol: 1e-9, ..Default::default() }).map_err(|e| e.to_string())?;
    let q: [f64; 4] = std::array::from_fn(|a| held.axis_nodes[a][ix[a]]);
    let held_err = (mh.evaluate(q).0 - rank2(q)).abs() / rank2(q).abs();

    // Timing on smooth, non-separable data shaped like melt-pool widths.
    let t = Instant::now();
    let t4 = Tensor4::from_fn(nodes, |q| {
        let e = q[0];
        1e-4 * (e / 240.0).sqrt() * (1.0 + 0.3 * (q[1] * e * 1e4 - 1.0)).max(0.1) * (q[2] * e).powf(0.4) / (1.0 + q[3] * e * 5e3)
    });
    let m4 = fit(&t4, &FitOptions::default()).map_err(|e| e.to_string())?;
    let fit_time = t.elapsed();

    check(
        m1.rank() == 1
            && m1.fit_residual < 1e-8
            && m2.rank() <= 2
            && m2.fit_residual < 1e-6
            && held_err < 0.01
            && fit_time < Duration::from_secs(10),
        format!(
            "rank-1 residual {:.1e} (M={}), rank-2 residual {:.1e} (M={}), held-out error {:.2e}, 5^4 fit {:.2} s (M={}, residual {:.1e})",
            m1.fit_residual,
            m1.rank(),
            m2.fit_residual,
            m2.rank(),
            held_err,
            fit_time.as_secs_f64(),
            m4.rank(),
            m4.fit_residual
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Random-walk chain on a known normal.

/// Standard error of a correlated series by non-overlapping batch means.
fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

fn criterion_4() -> Outcome {
    let mean = [1.0, -2.0, 0.5];
    let cov = [[1.0, 0.5, 0.2], [0.5, 2.0, -0.3], [0.2, -0.3, 0.5]];
    let target = TriNormal::from_covariance(mean, cov).map_err(|e| e.to_string())?;
    let n_post = 50_000;
    let opts = ChainOptions { burn_in: 0.2, ..ChainOptions::default() };
    let n = (n_post as f64 / (1.0 - opts.burn_in)).round() as usize;
    let chain = mh_chain(|x| target.log_pdf(x), [0.0; 3], n, [0.5; 3], 42, opts).map_err(|e| e.to_string())?;
    let got = chain.mean();
    let mut worst = 0.0f64;
    for i in 0..3 {
        let xs: Vec<f64> = chain.states.iter().map(|s| s[i]).collect();
        let se = batch_means_se(&xs, 50);
        worst = worst.max((got[i] - mean[i]).abs() / se);
    }
    check(
        chain.states.len() >= n_post && worst <= 3.0 && (0.2..=0.5).contains(&chain.acceptance_rate),
        format!(
            "{} post-burn-in samples, largest |mean error| = {worst:.2} SE, acceptance {:.3}",
            chain.states.len(),
            chain.acceptance_rate
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Recover known hyperparameters from synthetic tables.

fn criterion_5() -> Outcome {
    let sur = surrogate();
    let mean = [4.0e-7, 2.2e-3, 2.0e-7];
    let sd = mean.map(|m| 0.05 * m);
    let c01 = 0.3 * sd[0] * sd[1];
    let cov = [[sd[0] * sd[0], c01, 0.0], [c01, sd[1] * sd[1], 0.0], [0.0, 0.0, sd[2] * sd[2]]];
    let truth = TriNormal::from_covariance(mean, cov).map_err(|e| e.to_string())?;
    let cases = synthetic_cases(&truth, sur, &builtin_afrl(), 20_000, 99).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let r = calibrate(&initial_guess(), sur, &cases, &CalibrationConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let got = r.hyper.covariance();
    let mu_err: Vec<f64> = (0..3).map(|i| (r.hyper.mean[i] / mean[i] - 1.0).abs()).collect();
    let var_err: Vec<f64> = (0..3).map(|i| (got[i][i] / cov[i][i] - 1.0).abs()).collect();
    let pct = |v: &[f64]| v.iter().map(|e| format!("{:.1}%", 100.0 * e)).collect::<Vec<_>>().join(", ");
    check(
        mu_err.iter().all(|e| *e <= 0.05) && var_err.iter().all(|e| *e <= 0.20) && elapsed < Duration::from_secs(1800),
        format!(
            "mean errors [{}] (limit 5%), variance errors [{}] (limit 20%), objective {:.3} after {} evaluations, {:.0} s",
            pct(&mu_err),
            pct(&var_err),
            r.objective_value,
            r.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Solver widths at the calibrated mean against the measured envelopes.

fn criterion_6() -> Outcome {
    let sur = surrogate();
    let cases = builtin_afrl();
    let r = calibrate(&initial_guess(), sur, &cases, &CalibrationConfig::default()).map_err(|e| e.to_string())?;
    let sampler = SolverSampler::new(MaterialModel::in625(), SurrogateConfig::default()).map_err(|e| e.to_string())?;
    let law = StochasticBeamLaw::from_array(r.hyper.mean).map_err(|e| e.to_string())?;
    let mut inside = 0;
    let mut rows = Vec::new();
    for c in &cases {
        let (w, _) = sampler.simulate_process(c.power, c.speed, &law).map_err(|e| e.to_string())?;
        let w = w * 1e6;
        let ok = (w - c.width_mean).abs() <= 2.0 * c.width_std;
        inside += ok as usize;
        rows.push(format!("{} {:.0}/{:.0}±{:.0}{}", c.id, w, c.width_mean, 2.0 * c.width_std, if ok { "" } else { "✗" }));
    }
    check(inside >= 9, format!("{inside}/11 inside μ ± 2σ (need 9): {}", rows.join(", ")))
}

// ---------------------------------------------------------------------------
// 7. Roughness and porosity post-processing.

fn criterion_7() -> Outcome {
    // Ten zones, each holding a hundred whole periods of A·sin(2πx/λ).
    let (amp, lambda, dx) = (5e-6, 1e-5, 1e-7);
    let (nx, ny) = (10_000, 8);
    let mut heights = Vec::with_capacity(nx * ny);
    let mut plane = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = ((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx);
            heights.push(amp * (2.0 * PI * x / lambda).sin());
            plane.push(3e-5 + 0.02 * x - 0.7 * y);
        }
    }
    let mask = vec![true; nx * ny];
    let wave = HeightField::new(nx, ny, dx, [0.0, 0.0], heights, mask.clone()).map_err(|e| e.to_string())?;
    let sa = sa_roughness(&wave, 10).map_err(|e| e.to_string())?.sa_mean;
    let sa_ref = 2.0 * amp / PI;
    let e_sa = (sa - sa_ref).abs() / sa_ref;
    let tilted = HeightField::new(nx, ny, dx, [0.0, 0.0], plane, mask).map_err(|e| e.to_string())?;
    let sa_plane = sa_roughness(&tilted, 10).map_err(|e| e.to_string())?.sa_mean;

    // Porosity against volumetric energy: three tracks over powder at
    // increasing power.
    let m = MaterialModel::in625();
    let dx = 1e-5;
    let domain = Domain::single_track(dx, 5e-4, 5e-4, 1e-4, false)
        .map_err(|e| e.to_string())?
        .with_powder_top(4);
    let speed = 1.0;
    let hatch = 1.2e-4;
    let geom = PathGeometry { n_tracks: 3, hatch, ..PathGeometry::single_track(3e-4, [1e-4, -hatch, 0.0]) };
    let path = generate_path(&geom, speed, dx / speed, None).map_err(|e| e.to_string())?;
    let region = Region { lo: [1.5e-4, -1.5 * hatch, -4.0 * dx], hi: [3.5e-4, 1.5 * hatch, 0.0] };
    let law = StochasticBeamLaw::from_array([4e-7, 2.2e-3, 2e-7]).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { trace_stride: 0, ..SolverConfig::default() };
    let (mut veds, mut pors) = (Vec::new(), Vec::new());
    for power in [120.0, 160.0, 200.0, 240.0, 280.0] {
        let run = run_scan(&domain, &m, &path, ParamSource::Law(law), ProcessSettings { power, speed, rhf: None }, &cfg)
            .map_err(|e| e.to_string())?;
        veds.push(ved(power, speed, 62.5e-6, 4e-5).map_err(|e| e.to_string())?);
        pors.push(lof_porosity(&run.state, &domain, &m, &region).map_err(|e| e.to_string())?);
    }
    let rho = spearman(&veds, &pors).map_err(|e| e.to_string())?;
    let pors_txt = pors.iter().map(|p| format!("{:.1}%", 100.0 * p)).collect::<Vec<_>>().join(", ");
    check(
        e_sa <= 0.01 && sa_plane < 1e-12 && rho <= 0.0,
        format!(
            "sinusoid Sa error {:.3}%, tilted-plane Sa {sa_plane:.1e} m, porosity [{pors_txt}] over rising VED, Spearman {rho:.2}",
            100.0 * e_sa
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Controller training and closed-loop tracking on the surrogate plant.

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Mlp::init(2 * WINDOW + 2, 3, 16, 3, &mut rng).map_err(|e| e.to_string())?;
    let inputs: Vec<Vec<f64>> = (0..8).map(|i| (0..2 * WINDOW + 2).map(|j| ((i * 7 + j) as f64 * 0.37).sin()).collect()).collect();
    let targets: Vec<Vec<f64>> = (0..8).map(|i| (0..3).map(|j| 0.2 + 0.1 * ((i + j) % 5) as f64).collect()).collect();
    let grad_err = gradient_check(&net, &inputs, &targets, 200, &mut rng);

    let sur = surrogate();
    let constants = ProcessConstants::default();
    let lag = 0.5;
    let box_ = CommandBox::default();
    let config = TrainConfig::default();
    let t = Instant::now();
    let traces = generate_traces(|c| SurrogatePlant::new(sur, constants, lag, c), &box_, 30, 120, config.seed)
        .map_err(|e| e.to_string())?;
    let ds = build_dataset(&traces, WINDOW, config.seed).map_err(|e| e.to_string())?;
    let (model, _) = train(&ds, &config).map_err(|e| e.to_string())?;
    let train_time = t.elapsed();
    let report = evaluate(&model, &ds.test).map_err(|e| e.to_string())?;

    // Depth step at constant width, both taken from steady responses
    // inside the command box so the target is reachable.
    let probe = SurrogatePlant::new(sur, constants, lag, &box_.center()).map_err(|e| e.to_string())?;
    let mut reachable = Vec::new();
    for a in 0..=20 {
        for b in 0..=20 {
            let ned = box_.ned.0 + (box_.ned.1 - box_.ned.0) * a as f64 / 20.0;
            let depth = box_.depth.0 + (box_.depth.1 - box_.depth.0) * b as f64 / 20.0;
            let cmd = Cmd { ned, radius: box_.radius_per_depth * depth, depth };
            reachable.push(probe.steady(&cmd).map_err(|e| e.to_string())?);
        }
    }
    let mut widths: Vec<f64> = reachable.iter().map(|o| o[0]).collect();
    widths.sort_by(f64::total_cmp);
    let w_target = widths[widths.len() / 2];
    let mut depths: Vec<f64> = reachable.iter().filter(|o| (o[0] / w_target - 1.0).abs() < 0.02).map(|o| o[1]).collect();
    depths.sort_by(f64::total_cmp);
    let (d0, d1) = (depths[depths.len() / 4], depths[3 * depths.len() / 4]);
    let targets = sigmoid_targets(w_target, d0, d1, 60, 3.0);
    let start = Cmd { ned: box_.center().ned, radius: box_.radius_per_depth * 0.5 * (box_.depth.0 + box_.depth.1), depth: 0.5 * (box_.depth.0 + box_.depth.1) };
    let mut plant = SurrogatePlant::new(sur, constants, lag, &start).map_err(|e| e.to_string())?;
    let steps = closed_loop(&model, &mut plant, &targets).map_err(|e| e.to_string())?;
    // The first steps are spent leaving the start state.
    let settle = WINDOW;
    let max_disc = steps[settle..].iter().map(|s| s.discrepancy).fold(0.0, f64::max);
    let max_all = steps.iter().map(|s| s.discrepancy).fold(0.0, f64::max);

    check(
        grad_err < 1e-5 && report.mean < 0.05 && max_disc <= 0.10 && train_time < Duration::from_secs(900),
        format!(
            "gradient check {grad_err:.1e}, test relative error {:.2}% (max {:.1}%), sigmoid depth {:.0}→{:.0} µm at W {:.0} µm: max aspect discrepancy {:.1}% after {settle} settling steps ({:.1}% including them), training {:.0} s",
            100.0 * report.mean,
            100.0 * report.max,
            d0 * 1e6,
            d1 * 1e6,
            w_target * 1e6,
            100.0 * max_disc,
            100.0 * max_all,
            train_time.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Every stochastic command reruns byte-identically.

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lpbf-twin"))
        .args(args)
        .env("LPBF_WORKERS", "1")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().path()).collect())
        .unwrap_or_else(|_| Vec::new());
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())).collect()
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    std::fs::write(d.join("surrogate.json"), surrogate().to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let hyper = json!({ "mean": [4e-7, 2.2e-3, 2e-7], "chol": [[2e-8, 0.0, 0.0], [3e-5, 1.05e-4, 0.0], [0.0, 0.0, 1e-8]] });
    let domain = json!({ "dx": 1e-5, "length": 5e-4, "width": 4e-4, "height": 1e-4, "powder_cells": 4 });
    let path = json!({ "track_length": 3e-4, "n_tracks": 2, "hatch": 1e-4, "n_layers": 1, "layer_thickness": 4e-5, "start": [1e-4, -5e-5, 0.0] });
    let process = json!({ "power_w": 285.0, "speed_mm_s": 960.0 });
    let configs: Vec<(&str, Value)> = vec![
        ("calibrate", json!({ "surrogate": "surrogate.json", "calibration": { "max_evaluations": 60, "restarts": 0 }, "seed": 8, "output_dir": "calibrate" })),
        ("simulate", json!({ "domain": domain, "path": path, "process": process, "source": { "kind": "hyper", "hyper": hyper, "resample_every": 10 }, "seed": 2, "snapshot": true, "output_dir": "simulate" })),
        ("sample", json!({ "calibration": "calibrate/calibration.json", "steps": 5000, "seed": 3, "output_dir": "sample" })),
        ("predict", json!({ "domain": domain, "path": path, "process": process, "source": { "kind": "chain", "path": "sample/chain.csv", "resample_every": 10 }, "quality": { "n_zones": 3 }, "seed": 4, "output_dir": "predict" })),
        ("train-control", json!({ "surrogate": "surrogate.json", "traces": 8, "steps": 60, "train": { "epochs": 40 }, "seed": 5, "output_dir": "train" })),
    ];
    let mut summary = Vec::new();
    for (cmd, cfg) in &configs {
        let p = d.join(format!("{cmd}.json"));
        std::fs::write(&p, cfg.to_string()).map_err(|e| e.to_string())?;
        let out_dir = d.join(cfg["output_dir"].as_str().unwrap());
        run_cli(&[cmd, p.to_str().unwrap()])?;
        let first = snapshot_dir(&out_dir);
        std::fs::remove_dir_all(&out_dir).map_err(|e| e.to_string())?;
        run_cli(&[cmd, p.to_str().unwrap()])?;
        let second = snapshot_dir(&out_dir);
        if first.is_empty() || first != second {
            return Err(format!("{cmd}: artifacts differ between runs"));
        }
        let hashed = first.iter().filter(|(n, _)| !n.ends_with(".bin")).all(|(_, b)| String::from_utf8_lossy(b).contains("config_hash"));
        if !hashed {
            return Err(format!("{cmd}: an artifact lacks the config hash"));
        }
        summary.push(format!("{cmd} ({} files)", first.len()));
    }
    Ok(format!("byte-identical reruns: {}", summary.join(", ")))
}
