use std::fs;
use std::time::Instant;

use boundary_core::causal::{did_2x2, event_study, REFERENCE_BIN};
use boundary_core::data::{compute_effectiveness, coverage_gaps, Dataset, EffectivenessSeries};
use boundary_core::network::{
    analytic_coverage, functional_form_test, half_distance, network_distances, sqrt_law_test, steady_state_residual, steady_state_solve,
    synthetic_distance_response, DiffusionParams, StationSpec, StreetNetwork, TimeVaryingDiffusion,
};
use boundary_core::nonparametric::{compare_fit_quality, default_grid, estimate_curve, silverman_bandwidth, KernelConfig, Method};
use boundary_core::parametric::{critical_boundary, fit_exponential_decay, DecayFit};
use boundary_core::simulate::{inject_did_treatment, simulate_incidents, SimulationConfig, TreatmentSpec};
use boundary_core::spectest::residual_specification_test;
use boundary_lab::config::RunConfig;
use boundary_lab::pipeline::run_pipeline;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn simulate(seed: u64) -> Dataset {
    simulate_incidents(&SimulationConfig { seed, ..SimulationConfig::default() }).expect("default simulation")
}

fn fit_of(ds: &Dataset) -> DecayFit {
    fit_exponential_decay(&compute_effectiveness(ds).unwrap()).unwrap()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn golden_fit(tau0: f64, lambda: f64) -> DecayFit {
    DecayFit { tau0, lambda, se_tau0: 0.0, se_lambda: 0.01, r_squared: 1.0, n: 0, residuals: Vec::new() }
}

fn c1() -> Outcome {
    let cases = [("critical", 0.7781, 0.3448, 5.95), ("urgent", 0.7836, 0.3502, 5.88), ("routine", 0.7715, 0.3425, 5.96)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, tau0, lambda, want) in cases {
        let d = critical_boundary(&golden_fit(tau0, lambda), 0.10).map_err(|e| e.to_string())?.d_star;
        ok &= (d - want).abs() <= 0.01;
        parts.push(format!("{name} {d:.3} (want {want})"));
    }
    verdict(ok, parts.join(", "))
}

fn c2() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 1..=5 {
        let f = fit_of(&simulate(seed));
        ok &= (0.30..=0.39).contains(&f.lambda) && (0.90..=0.96).contains(&f.r_squared);
        parts.push(format!("seed {seed}: lambda {:.4} R2 {:.4}", f.lambda, f.r_squared));
    }
    verdict(ok, format!("{} (want lambda in [0.30, 0.39], R2 in [0.90, 0.96])", parts.join("; ")))
}

fn c3() -> Outcome {
    let ds = simulate(42);
    let gaps = coverage_gaps(&ds, &[8.0, 15.0, 30.0]).map_err(|e| e.to_string())?;
    let want = [0.363, 0.145, 0.022];
    let ok = gaps.iter().zip(want).all(|(g, w)| (g.fraction_beyond - w).abs() <= 0.05);
    let got: Vec<String> = gaps.iter().map(|g| format!("{}min {:.1}%", g.threshold, 100.0 * g.fraction_beyond)).collect();
    verdict(ok, got.join(", "))
}

fn c4() -> Outcome {
    let spec = TreatmentSpec::default();
    let mut covered = 0;
    let mut worst_identity: f64 = 0.0;
    for seed in 1..=10 {
        let ds = inject_did_treatment(&simulate(seed), &spec, seed + 1000).map_err(|e| e.to_string())?;
        let r = did_2x2(&ds).map_err(|e| e.to_string())?;
        let d = r.did();
        if (d.estimate - spec.effect).abs() <= 3.0 * d.se {
            covered += 1;
        }
        let c = &r.cells;
        let dd = (c.treated_post.mean - c.treated_pre.mean) - (c.control_post.mean - c.control_pre.mean);
        worst_identity = worst_identity.max((dd - d.estimate).abs());
    }
    verdict(
        covered == 10 && worst_identity <= 1e-10,
        format!("{covered}/10 within 3 SE, max |2x2 - double difference| {worst_identity:.2e}"),
    )
}

fn c5() -> Outcome {
    let spec = TreatmentSpec::default();
    let (mut pre_ok, mut post_ok, mut reference_zero) = (0, 0, true);
    for seed in 1..=10 {
        let ds = inject_did_treatment(&simulate(seed), &spec, seed + 1000).map_err(|e| e.to_string())?;
        let es = event_study(&ds, 1).map_err(|e| e.to_string())?;
        reference_zero &= es.at(REFERENCE_BIN).and_then(|e| e.coefficient) == Some(0.0);
        let pre = es.estimates.iter().filter(|e| e.event_time < REFERENCE_BIN && e.coefficient.is_some());
        if pre.clone().all(|e| e.ci_lower.unwrap() <= 0.0 && e.ci_upper.unwrap() >= 0.0) {
            pre_ok += 1;
        }
        let post: Vec<f64> = es.estimates.iter().filter(|e| e.event_time >= 0).filter_map(|e| e.coefficient).collect();
        if !post.is_empty() && post.iter().all(|c| *c < 0.0) {
            post_ok += 1;
        }
    }
    verdict(
        reference_zero && pre_ok >= 8 && post_ok >= 9,
        format!("reference zero: {reference_zero}, pre CIs cover 0 in {pre_ok}/10, post all negative in {post_ok}/10"),
    )
}

fn c6() -> Outcome {
    let series = compute_effectiveness(&simulate(42)).unwrap();
    let fit = fit_exponential_decay(&series).unwrap();
    let h = silverman_bandwidth(series.times()).unwrap();
    let grid = default_grid(&series, 200).unwrap();
    let curve = estimate_curve(&series, &KernelConfig::new(Method::NadarayaWatson, h), &grid).map_err(|e| e.to_string())?;
    let cmp = compare_fit_quality(&series, &fit, &[curve]);
    let p = cmp.get("parametric").unwrap().mse;
    let k = cmp.get(Method::NadarayaWatson.as_str()).unwrap().mse;
    verdict(k < p && p / k > 2.0, format!("parametric MSE {p:.3e}, kernel MSE {k:.3e}, ratio {:.1}", p / k))
}

fn spec_series(n: usize, curvature: f64, rng: &mut ChaCha8Rng) -> EffectivenessSeries {
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let tau = t
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            (0.5f64.ln() - 0.2 * x + curvature * (x - 5.0) * (x - 5.0) + 0.1 * z).exp().min(1.0)
        })
        .collect();
    EffectivenessSeries::from_observations(t, tau).unwrap()
}

fn rejection_rate(reps: u64, n: usize, curvature: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejected = 0;
    for rep in 0..reps {
        let s = spec_series(n, curvature, &mut rng);
        let fit = fit_exponential_decay(&s).unwrap();
        let r = residual_specification_test(&s, &fit, 199, seed ^ rep).unwrap();
        if r.p_value <= 0.05 {
            rejected += 1;
        }
    }
    rejected as f64 / reps as f64
}

fn c7() -> Outcome {
    let size = rejection_rate(200, 200, 0.0, 71);
    let power = rejection_rate(50, 200, 0.03, 72);
    verdict((0.02..=0.10).contains(&size) && power > 0.9, format!("size {size:.3} over 200 reps, power {power:.2} over 50 reps"))
}

fn c8() -> Outcome {
    let net = StreetNetwork::line(200, 1.0).map_err(|e| e.to_string())?;
    let params = DiffusionParams::from_kappa_eff(0.156, 1.0).map_err(|e| e.to_string())?;
    let field = steady_state_solve(&net, &params, &[StationSpec::new(net.labels()[0].clone(), 1.0)]).map_err(|e| e.to_string())?;
    let residual = steady_state_residual(&net, &field).map_err(|e| e.to_string())?;
    let dist = network_distances(&net, &net.labels()[0]).map_err(|e| e.to_string())?;
    let reach = 3.0 / params.kappa_eff();
    let u0 = field.values[0];
    let mut worst: f64 = 0.0;
    for (u, d) in field.values.iter().zip(&dist) {
        if let Some(d) = d.filter(|d| *d <= reach) {
            worst = worst.max((u / analytic_coverage(&params, u0, d) - 1.0).abs());
        }
    }
    verdict(
        worst <= 0.02 && residual <= 1e-9,
        format!("max relative error {:.3}% for d <= {reach:.2}, residual {residual:.1e}", 100.0 * worst),
    )
}

fn c9() -> Outcome {
    let (d, y) = synthetic_distance_response(200, 15.0, 0.156, 3.0, 0.0, 1);
    let exact = functional_form_test(&d, &y).map_err(|e| e.to_string())?;
    let k = exact.kappa.kappa_eff.unwrap_or(f64::NAN);
    let resolution = (2.0f64 / 1e-4).ln() / 399.0;
    let recovered = (k / 0.156).ln().abs() <= resolution;

    let mut exp_wins = 0;
    let mut lin_wins = 0;
    for seed in 0..20 {
        let (d, y) = synthetic_distance_response(200, 15.0, 0.156, 3.0, 0.5, 100 + seed);
        if functional_form_test(&d, &y).map_err(|e| e.to_string())?.delta_aic > 0.0 {
            exp_wins += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let y: Vec<f64> = d.iter().map(|x| 1.0 + 0.8 * x + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        if functional_form_test(&d, &y).map_err(|e| e.to_string())?.delta_aic < 0.0 {
            lin_wins += 1;
        }
    }
    let d50 = half_distance(0.156).map_err(|e| e.to_string())?;
    verdict(
        recovered && exp_wins == 20 && lin_wins >= 15 && (d50 - 4.44).abs() < 0.005,
        format!(
            "noiseless kappa_eff {k:.6}, exponential wins AIC on {exp_wins}/20 exponential draws, loses on {lin_wins}/20 linear draws, d50 {d50:.4}"
        ),
    )
}

fn c10() -> Outcome {
    let d_hat = [1.0, 0.8, 0.55, 0.3, 0.9, 0.45];
    let kappa = 0.024;
    let periods: Vec<String> = (0..d_hat.len()).map(|i| format!("p{i}")).collect();
    let tv = TimeVaryingDiffusion::new(periods, d_hat.iter().map(|d| d * 30.0).collect(), d_hat.to_vec(), 30.0).unwrap();
    let k: Vec<f64> = d_hat.iter().map(|d| (kappa / d).sqrt()).collect();
    let constructed = sqrt_law_test(&tv, &k).map_err(|e| e.to_string())?;
    let digitized =
        sqrt_law_test(&TimeVaryingDiffusion::reference(), &TimeVaryingDiffusion::reference_kappa_eff()).map_err(|e| e.to_string())?;
    verdict(
        (constructed.slope + 0.5).abs() <= 1e-10 && (digitized.slope + 0.48).abs() <= 0.02,
        format!("constructed slope {:.12}, reference-table slope {:.3} (want -0.48 +/- 0.02)", constructed.slope, digitized.slope),
    )
}

fn c11() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |base: &str| {
        let config = RunConfig { out: tmp.path().join(base), ..RunConfig::default() };
        run_pipeline(&config, "run").map_err(|e| e.to_string())
    };
    let a = run("a")?;
    let b = run("b")?;
    if a.outputs != b.outputs {
        return Err("runs wrote different file lists".into());
    }
    let differing: Vec<&String> =
        a.outputs.iter().filter(|f| fs::read(a.run_dir.join(f)).ok() != fs::read(b.run_dir.join(f)).ok()).collect();
    let same_dir = a.run_dir.file_name() == b.run_dir.file_name();
    verdict(
        differing.is_empty() && same_dir,
        format!("{} files compared, {} differ, run directory name stable: {same_dir}", a.outputs.len(), differing.len()),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("C1", c1),
        ("C2", c2),
        ("C3", c3),
        ("C4", c4),
        ("C5", c5),
        ("C6", c6),
        ("C7", c7),
        ("C8", c8),
        ("C9", c9),
        ("C10", c10),
        ("C11", c11),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{name} PASS  {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("{name} FAIL  {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
}
