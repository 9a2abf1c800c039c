//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rfblt::eval::{
    coverage, holt_fit_forecast, run_expanding_window, ExpandingWindowPlan, WindowForecast,
};
use rfblt::gibbs::{gibbs_lasso, gibbs_ridge};
use rfblt::rng::StreamRng;
use rfblt::series::{euler_integrate, forward_difference};
use rfblt::sueir::{integrate_sueir, smooth_7day, SueirParams};
use rfblt::{
    sample_feature_map, Activation, DistributionSpec, Execution, GibbsConfig, MinMaxScaler, Prior,
    SeedTree, TimeSeries,
};

// Pinned tolerances and budgets.
const ORACLE_SE_MULTIPLE: f64 = 3.0;
const ORACLE_RETAINED: usize = 20_000;
const ORACLE_BATCHES: usize = 40;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const EQUALITY_DRAWS: usize = 1_000;
const RFF_FEATURES: usize = 5_000;
const RFF_PAIRS: usize = 50;
const RFF_TOL: f64 = 0.05;
const RFF_MIN_WITHIN: usize = 48;
const RFF_BUDGET: Duration = Duration::from_secs(10);
const PEAK_MAX: f64 = 0.25;
const PEAK_DAYS: (f64, f64) = (100.0, 116.0);
const PEAK_BUDGET: Duration = Duration::from_secs(1);
const ENSEMBLE_SIZE: usize = 20;
const ENSEMBLE_NOISE: f64 = 0.1;
const TRAIN_LEN: usize = 85;
const MEDIAN_RE_MAX: f64 = 0.35;
const ENSEMBLE_BUDGET: Duration = Duration::from_secs(600);
const DAY1_COVERAGE_MIN: f64 = 0.6;
const PROPERTY_CASES: u32 = 256;
const EULER_TOL: f64 = 1e-10;
const SCALER_TOL: f64 = 1e-12;
const RK4_REL_TOL: f64 = 1e-8;
const HOLT_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn gibbs_conjugate_oracle() -> Outcome {
    let (n, d, burn_in) = (50, 5, 1_000);
    let mut rng = SeedTree::new(101).rng();
    let z = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let beta_star = DVector::from_vec(vec![1.0, -0.5, 0.0, 2.0, 0.25]);
    let noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| 0.7 + (z.row(i) * &beta_star)[0] + noise[i])
        .collect();

    let cfg = GibbsConfig {
        n_samples: burn_in + ORACLE_RETAINED,
        burn_in,
        thin: 1,
        seed: 9,
        prior: Prior::Ridge,
        fixed_sigma_eps_sq: Some(1.0),
        fixed_tau_sq: Some(1.0),
        update_local_scales: false,
        ..Default::default()
    };
    let start = Instant::now();
    let draws = gibbs_ridge(&y, &z, &cfg).expect("ridge chain");
    let elapsed = start.elapsed();

    // With a flat intercept prior, β | y ~ N(A⁻¹ Z_cᵀ y, A⁻¹) with A = Z_cᵀZ_c/σ² + I/(σ²τ²).
    let col_means = DVector::from_fn(d, |j, _| z.column(j).mean());
    let zc = DMatrix::from_fn(n, d, |i, j| z[(i, j)] - col_means[j]);
    let a = zc.transpose() * &zc + DMatrix::identity(d, d);
    let exact = a
        .lu()
        .solve(&(zc.transpose() * DVector::from_vec(y)))
        .expect("nonsingular");

    let batch = ORACLE_RETAINED / ORACLE_BATCHES;
    let mut worst = 0.0f64;
    for j in 0..d {
        let col: Vec<f64> = draws.beta.column(j).iter().copied().collect();
        let means: Vec<f64> = col.chunks(batch).map(mean).collect();
        let grand = mean(&means);
        let var =
            means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (ORACLE_BATCHES - 1) as f64;
        let se = (var / ORACLE_BATCHES as f64).sqrt();
        worst = worst.max((grand - exact[j]).abs() / se);
    }
    outcome(
        worst <= ORACLE_SE_MULTIPLE && elapsed <= ORACLE_BUDGET && draws.len() == ORACLE_RETAINED,
        format!(
            "max |mean - exact| = {worst:.2} MC s.e. (limit {ORACLE_SE_MULTIPLE}), {} draws, {elapsed:.2?}",
            draws.len()
        ),
    )
}

fn ridge_lasso_degeneracy() -> Outcome {
    let (n, d) = (40, 12);
    let mut rng = SeedTree::new(202).rng();
    let z = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let y: Vec<f64> = (0..n)
        .map(|i| z[(i, 0)] - 0.5 * z[(i, 3)] + 0.2 * gauss(&mut rng))
        .collect();
    let cfg = GibbsConfig {
        n_samples: 200 + EQUALITY_DRAWS,
        burn_in: 200,
        thin: 1,
        seed: 5,
        update_local_scales: false,
        ..Default::default()
    };
    let lasso = gibbs_lasso(&y, &z, &cfg).expect("lasso chain");
    let ridge = gibbs_ridge(&y, &z, &cfg).expect("ridge chain");
    let same = lasso.beta0 == ridge.beta0
        && lasso.beta == ridge.beta
        && lasso.sigma_eps_sq == ridge.sigma_eps_sq
        && lasso.tau_sq == ridge.tau_sq
        && lasso.xi == ridge.xi
        && lasso.lambda_sq == ridge.lambda_sq;
    outcome(
        same && lasso.len() == EQUALITY_DRAWS,
        format!(
            "{} draws compared for exact equality: {}",
            lasso.len(),
            if same { "identical" } else { "differ" }
        ),
    )
}

fn rff_kernel() -> Outcome {
    let start = Instant::now();
    let map = sample_feature_map(
        9,
        RFF_FEATURES,
        &DistributionSpec::standard_normal(),
        &DistributionSpec::phase(),
        Activation::Fourier,
        SeedTree::new(303),
    )
    .expect("feature map");
    let mut rng = SeedTree::new(304).rng();
    let spread = Uniform::new(0.05, 0.6).expect("valid range");
    let point = Normal::new(0.0, 0.35).expect("valid normal");
    let mut within = 0;
    let mut worst = 0.0f64;
    for _ in 0..RFF_PAIRS {
        let x: Vec<f64> = (0..9).map(|_| point.sample(&mut rng)).collect();
        let s = spread.sample(&mut rng);
        let y: Vec<f64> = x
            .iter()
            .map(|v| v + s * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let dist_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let zx = map.transform(&x).expect("transform");
        let zy = map.transform(&y).expect("transform");
        let approx: f64 = zx.iter().zip(&zy).map(|(a, b)| a * b).sum();
        let err = (approx - (-dist_sq / 2.0).exp()).abs();
        worst = worst.max(err);
        if err <= RFF_TOL {
            within += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        within >= RFF_MIN_WITHIN && elapsed <= RFF_BUDGET,
        format!("{within}/{RFF_PAIRS} pairs within {RFF_TOL} (need {RFF_MIN_WITHIN}), worst {worst:.4}, {elapsed:.2?}"),
    )
}

fn sueir_peak() -> Outcome {
    let start = Instant::now();
    let clean = integrate_sueir(&SueirParams::default())
        .and_then(|run| run.infectious_proportion())
        .and_then(|s| smooth_7day(&s))
        .expect("simulation");
    let elapsed = start.elapsed();
    let (idx, peak) = clean
        .values()
        .iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        );
    let day = clean.times()[idx];
    outcome(
        peak > 0.0 && peak <= PEAK_MAX && (PEAK_DAYS.0..=PEAK_DAYS.1).contains(&day) && elapsed <= PEAK_BUDGET,
        format!("smoothed peak {peak:.4} on day {day} (need (0, {PEAK_MAX}] in days {PEAK_DAYS:?}), {elapsed:.2?}"),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rfblt")
}

fn rfblt(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "rfblt {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Simulated ensemble plus its evaluation, shared by the ensemble and replay criteria.
struct EnsembleRun {
    _root: tempfile::TempDir,
    sim: PathBuf,
    eval: PathBuf,
    elapsed: Duration,
    summary: serde_json::Value,
}

fn ensemble_run() -> Result<EnsembleRun, String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sim = root.path().join("sim");
    let eval = root.path().join("eval");
    let start = Instant::now();
    rfblt(&[
        "simulate",
        "--output-dir",
        path_str(&sim),
        "--seed",
        "2024",
        "--count",
        &ENSEMBLE_SIZE.to_string(),
        "--noise",
        &ENSEMBLE_NOISE.to_string(),
    ])?;
    rfblt(&[
        "evaluate",
        "--input",
        path_str(&sim),
        "--output-dir",
        path_str(&eval),
        "--train-end",
        &TRAIN_LEN.to_string(),
        "--seed",
        "7",
    ])?;
    let elapsed = start.elapsed();
    let summary =
        serde_json::from_slice(&fs::read(eval.join("summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    Ok(EnsembleRun {
        _root: root,
        sim,
        eval,
        elapsed,
        summary,
    })
}

fn ensemble_accuracy(run: &EnsembleRun) -> Outcome {
    let median = run.summary["median_relative_error"]
        .as_f64()
        .unwrap_or(f64::NAN);
    let windows = run.summary["windows"].as_u64().unwrap_or(0);
    outcome(
        median <= MEDIAN_RE_MAX && windows == ENSEMBLE_SIZE as u64 && run.elapsed <= ENSEMBLE_BUDGET,
        format!(
            "median 7-day relative error {median:.4} over {windows} trajectories (limit {MEDIAN_RE_MAX}), {:.2?}",
            run.elapsed
        ),
    )
}

fn ensemble_coverage(run: &EnsembleRun) -> Outcome {
    let day1 = run.summary["coverage_prob"][0].as_f64().unwrap_or(f64::NAN);
    outcome(
        day1 >= DAY1_COVERAGE_MIN,
        format!("day-1 95% interval coverage {day1:.2} (floor {DAY1_COVERAGE_MIN})"),
    )
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn identical_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let fa = files_under(a);
    let fb = files_under(b);
    if fa != fb {
        return Err(format!("file lists differ: {fa:?} vs {fb:?}"));
    }
    for f in &fa {
        if fs::read(a.join(f)).ok() != fs::read(b.join(f)).ok() {
            return Err(format!("{} differs", f.display()));
        }
    }
    Ok(fa.len())
}

fn manifest_replay(run: &EnsembleRun) -> Outcome {
    let root = match tempfile::tempdir() {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let sim2 = root.path().join("sim");
    let eval2 = root.path().join("eval");
    let replay = || -> Result<(usize, usize), String> {
        let sim_manifest = run.sim.join("manifest.json");
        let eval_manifest = run.eval.join("manifest.json");
        rfblt(&[
            "simulate",
            "--config",
            path_str(&sim_manifest),
            "--output-dir",
            path_str(&sim2),
        ])?;
        rfblt(&[
            "evaluate",
            "--config",
            path_str(&eval_manifest),
            "--output-dir",
            path_str(&eval2),
        ])?;
        Ok((
            identical_trees(&run.sim, &sim2)?,
            identical_trees(&run.eval, &eval2)?,
        ))
    };
    match replay() {
        Ok((ns, ne)) => outcome(
            true,
            format!("{ns} simulate files and {ne} evaluate files byte-identical on replay"),
        ),
        Err(e) => outcome(false, e),
    }
}

/// Runs `test` over `PROPERTY_CASES` deterministic cases; returns the number executed or the failure.
fn check<S, F>(strategy: S, test: F) -> Result<usize, String>
where
    S: Strategy,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let count = AtomicUsize::new(0);
    runner
        .run(&strategy, |v| {
            count.fetch_add(1, Ordering::Relaxed);
            test(v)
        })
        .map_err(|e| e.to_string())?;
    Ok(count.load(Ordering::Relaxed).min(PROPERTY_CASES as usize))
}

fn property_suites() -> Outcome {
    let mut results: Vec<(&str, Result<usize, String>)> = Vec::new();

    results.push((
        "variance draws positive",
        check(
            (10usize..30, 2usize..8, any::<u64>(), prop::bool::ANY),
            |(n, d, seed, constant)| {
                let mut rng = SeedTree::new(seed).rng();
                let z = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
                let y: Vec<f64> = (0..n)
                    .map(|i| {
                        if constant {
                            3.0
                        } else {
                            z[(i, 0)] + gauss(&mut rng)
                        }
                    })
                    .collect();
                let cfg = GibbsConfig {
                    n_samples: 40,
                    burn_in: 10,
                    thin: 1,
                    seed,
                    ..Default::default()
                };
                let dr =
                    gibbs_lasso(&y, &z, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
                let ok = |v: &f64| v.is_finite() && *v > 0.0;
                prop_assert!(dr.sigma_eps_sq.iter().all(ok));
                prop_assert!(dr.tau_sq.iter().all(ok));
                prop_assert!(dr.xi.iter().all(ok));
                prop_assert!(dr.lambda_sq.iter().all(ok));
                Ok(())
            },
        ),
    ));

    results.push((
        "Euler reconstruction",
        check(
            prop::collection::vec((0.01f64..3.0, -100.0f64..100.0), 3..80),
            |steps| {
                let mut t = 0.0;
                let times: Vec<f64> = steps
                    .iter()
                    .map(|(dt, _)| {
                        t += dt;
                        t
                    })
                    .collect();
                let values: Vec<f64> = steps.iter().map(|(_, v)| *v).collect();
                let s = TimeSeries::new(times.clone(), values.clone(), "p").unwrap();
                let d = forward_difference(&s).unwrap();
                let back = euler_integrate(values[0], &times, &d).unwrap();
                for (a, b) in back.iter().zip(&values) {
                    prop_assert!((a - b).abs() <= EULER_TOL, "{a} vs {b}");
                }
                Ok(())
            },
        ),
    ));

    results.push((
        "scaler roundtrip",
        check(prop::collection::vec(-1e3f64..1e3, 2..50), |xs| {
            prop_assume!(xs.iter().any(|&x| x != xs[0]));
            let sc = MinMaxScaler::fit(&xs).unwrap();
            for &x in &xs {
                prop_assert!((sc.invert(sc.apply(x)) - x).abs() <= SCALER_TOL);
            }
            Ok(())
        }),
    ));

    results.push((
        "window-count identity",
        check((4usize..150, 0.0f64..1.0, 1usize..10), |(n, frac, h)| {
            prop_assume!(h + 2 <= n);
            let m = 2 + ((n - h - 2) as f64 * frac) as usize;
            let s =
                TimeSeries::regular(0.0, (0..n).map(|t| t as f64 + 1.0).collect(), "w").unwrap();
            let plan = ExpandingWindowPlan::new(m, h, n).unwrap();
            let r = run_expanding_window(&s, &plan, Execution::Sequential, |_, _, times| {
                Ok(WindowForecast::point(vec![1.0; times.len()]))
            })
            .unwrap();
            prop_assert_eq!(r.len(), n - h - m + 1);
            Ok(())
        }),
    ));

    results.push((
        "RK4 step halving",
        check(
            (0.15f64..0.3, 0.15f64..0.35, 0.05f64..0.1, 0.5f64..1.0),
            |(beta, sigma, gamma, mu)| {
                let p = SueirParams {
                    beta,
                    sigma,
                    gamma,
                    mu,
                    ..Default::default()
                };
                let coarse = integrate_sueir(&p).unwrap();
                let fine = integrate_sueir(&SueirParams {
                    internal_step: p.internal_step / 2.0,
                    ..p
                })
                .unwrap();
                for (a, b) in coarse.states.iter().zip(&fine.states) {
                    prop_assert!((a[2] - b[2]).abs() <= RK4_REL_TOL * b[2].abs());
                }
                Ok(())
            },
        ),
    ));

    results.push((
        "activation range bounds",
        check((-1e3f64..1e3, 1usize..10_000), |(u, d)| {
            let f = Activation::Fourier.apply(u, d);
            prop_assert!(f.abs() <= (2.0 / d as f64).sqrt() + 1e-15);
            prop_assert!(Activation::Relu.apply(u, d) >= 0.0);
            prop_assert!((0.0..=1.0).contains(&Activation::Sigmoid.apply(u, d)));
            for a in [Activation::Tanh, Activation::Sine, Activation::Cosine] {
                prop_assert!((-1.0..=1.0).contains(&a.apply(u, d)));
            }
            Ok(())
        }),
    ));

    results.push((
        "coverage monotonicity",
        check(
            (
                prop::collection::vec(
                    prop::collection::vec((-5.0f64..5.0, -3.0f64..3.0, 0.0f64..3.0), 3),
                    1..25,
                ),
                0.0f64..2.0,
            ),
            |(rows, eps)| {
                let pick = |f: &dyn Fn(&(f64, f64, f64)) -> f64| -> Vec<Vec<f64>> {
                    rows.iter().map(|r| r.iter().map(f).collect()).collect()
                };
                let actual = pick(&|x| x.0);
                let lower = pick(&|x| x.1);
                let upper = pick(&|x| x.1 + x.2);
                let wide_l = pick(&|x| x.1 - eps);
                let wide_u = pick(&|x| x.1 + x.2 + eps);
                let base = coverage(&actual, &lower, &upper).unwrap();
                let wide = coverage(&actual, &wide_l, &wide_u).unwrap();
                for q in 0..3 {
                    prop_assert!(wide.probability[q] >= base.probability[q]);
                }
                Ok(())
            },
        ),
    ));

    results.push((
        "Holt linear extrapolation",
        check(
            (-100.0f64..100.0, -10.0f64..10.0, 10usize..60),
            |(a, b, n)| {
                let line: Vec<f64> = (1..=n).map(|t| a + b * t as f64).collect();
                let f = holt_fit_forecast(&line, 7).unwrap();
                for (q, v) in f.iter().enumerate() {
                    prop_assert!((v - (a + b * (n + q + 1) as f64)).abs() <= HOLT_TOL);
                }
                Ok(())
            },
        ),
    ));

    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| match r {
            Ok(c) if *c >= 200 => None,
            Ok(c) => Some(format!("{name}: only {c} cases")),
            Err(e) => Some(format!("{name}: {e}")),
        })
        .collect();
    let summary: Vec<String> = results
        .iter()
        .map(|(name, r)| {
            format!(
                "{name} {}",
                r.as_ref()
                    .map(|c| c.to_string())
                    .unwrap_or_else(|_| "FAIL".into())
            )
        })
        .collect();
    if failed.is_empty() {
        outcome(true, format!("cases per suite: {}", summary.join(", ")))
    } else {
        outcome(false, failed.join("; "))
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let mut all_pass = true;
    let mut report = |id: u32, name: &str, o: Outcome| {
        all_pass &= o.pass;
        println!(
            "criterion {id} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };

    report(
        1,
        "Gibbs vs conjugate oracle",
        guarded(gibbs_conjugate_oracle),
    );
    report(2, "ridge/lasso degeneracy", guarded(ridge_lasso_degeneracy));
    report(
        3,
        "random Fourier kernel approximation",
        guarded(rff_kernel),
    );
    report(4, "SμEIR peak", guarded(sueir_peak));
    match ensemble_run() {
        Ok(run) => {
            report(
                5,
                "ensemble 7-day relative error",
                guarded(|| ensemble_accuracy(&run)),
            );
            report(
                6,
                "day-1 interval coverage",
                guarded(|| ensemble_coverage(&run)),
            );
            report(7, "property suites", guarded(property_suites));
            report(
                8,
                "manifest replay determinism",
                guarded(|| manifest_replay(&run)),
            );
        }
        Err(e) => {
            report(
                5,
                "ensemble 7-day relative error",
                outcome(false, e.clone()),
            );
            report(6, "day-1 interval coverage", outcome(false, e.clone()));
            report(7, "property suites", guarded(property_suites));
            report(8, "manifest replay determinism", outcome(false, e));
        }
    }
    if !all_pass {
        std::process::exit(1);
    }
}
