use rfblt::eval::{median, run_ensemble, WindowForecast};
use rfblt::sueir::{generate_ensemble, NoiseMode, NoiseSpec, SueirParams};
use rfblt::{
    fit, Execution, FeatureMap, FitOptions, GibbsConfig, ModelKind, Smoothing, TimeSeries,
};

fn linear(a: f64, b: f64, n: usize) -> TimeSeries {
    TimeSeries::regular(0.0, (0..n).map(|t| a + b * t as f64).collect(), "line").unwrap()
}

#[test]
fn noiseless_line_is_extrapolated() {
    let (a, b, n, h) = (1.0, 0.5, 100, 7);
    let series = linear(a, b, n);
    let truth: Vec<f64> = (n..n + h).map(|t| a + b * t as f64).collect();
    let errs: Vec<f64> = (0..5)
        .map(|seed| {
            let opts = FitOptions {
                embed_dim: 5,
                smoothing: Smoothing::PassThrough,
                seed,
                ..Default::default()
            };
            let r = fit(&series, &opts).unwrap().forecast(h, 0.05).unwrap();
            r.mean
                .iter()
                .zip(&truth)
                .map(|(p, y)| (p - y).abs())
                .sum::<f64>()
                / h as f64
        })
        .collect();
    assert!(median(&errs) < 0.05 * b * h as f64, "{errs:?}");
}

#[test]
fn execution_mode_does_not_change_results() {
    let noise = NoiseSpec {
        sigma_zeta: 0.1,
        seed: 9,
        mode: NoiseMode::PerPoint,
    };
    let ens = generate_ensemble(&SueirParams::default(), &noise, 3, Execution::Parallel).unwrap();
    let trajectories: Vec<TimeSeries> = ens.into_iter().map(|t| t.series).collect();
    let run = |exec: Execution| {
        run_ensemble(&trajectories, 85, 7, exec, |_, train, times| {
            let opts = FitOptions {
                gibbs: GibbsConfig {
                    n_samples: 600,
                    burn_in: 300,
                    thin: 3,
                    ..Default::default()
                },
                seed: 4,
                execution: exec,
                ..Default::default()
            };
            let r = fit(train, &opts)?.forecast_at(times, 0.05, exec)?;
            Ok(WindowForecast::with_interval(r.mean, r.lower, r.upper))
        })
        .unwrap()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn rfbl_and_normalized_runs_stay_in_range() {
    let values: Vec<f64> = (0..80)
        .map(|t| 1000.0 + 300.0 * (t as f64 / 9.0).sin())
        .collect();
    let series = TimeSeries::regular(0.0, values, "wave").unwrap();
    for kind in [ModelKind::Rfblt, ModelKind::Rfbl] {
        let opts = FitOptions {
            kind,
            normalize: true,
            seed: 2,
            ..Default::default()
        };
        let r = fit(&series, &opts).unwrap().forecast(7, 0.05).unwrap();
        for k in 0..7 {
            let col: Vec<f64> = r.sample_paths.column(k).iter().copied().collect();
            let mid = median(&col);
            assert!(r.lower[k] <= mid && mid <= r.upper[k], "{kind:?} step {k}");
            assert!(
                r.mean[k] > 400.0 && r.mean[k] < 1600.0,
                "{kind:?} mean {}",
                r.mean[k]
            );
        }
    }
}

#[test]
fn feature_dump_reproduces_transform() {
    let model = fit(
        &linear(0.0, 1.0, 40),
        &FitOptions {
            embed_dim: 4,
            seed: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    model.feature_map.write_dump(&mut buf).unwrap();
    let back = FeatureMap::read_dump(buf.as_slice()).unwrap();
    let x = [0.1, -2.0, 3.5, 7.25];
    assert_eq!(
        back.transform(&x).unwrap(),
        model.feature_map.transform(&x).unwrap()
    );
}
