use bondform::data_io::{align, emit_dataset, load_series};
use bondform::regression::{fit, select_lag, ModelKind, ModelSpec};
use bondform::series::AssetClass;
use bondform::synthetic::{generate, MarketParams};
use proptest::prelude::*;

fn params(class: AssetClass, seed: u64) -> MarketParams {
    MarketParams {
        class,
        seed,
        months: 120,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nested_models_on_synthetic_data(seed in 0u64..10_000, vol in 0.0005f64..0.006) {
        let mut p = params(AssetClass::Government, seed);
        p.yields.vol = vol;
        let s = generate(&p).unwrap();
        let m1 = fit(&s, ModelSpec::new(ModelKind::Gov1)).unwrap();
        let m2 = fit(&s, ModelSpec::new(ModelKind::Gov2)).unwrap();
        prop_assert!(m2.r_squared >= m1.r_squared);
        prop_assert!((0.0..=1.0).contains(&m1.r_squared));
        let ss = |r: &[f64]| r.iter().map(|e| e * e).sum::<f64>();
        prop_assert!(ss(&m2.residuals) <= ss(&m1.residuals));
        let pr2 = m2.partial_r_squared.unwrap();
        prop_assert!((0.0..=1.0).contains(&pr2));
        let mean = m1.residuals.iter().sum::<f64>() / m1.n_obs as f64;
        let sd = (ss(&m1.residuals) / m1.n_obs as f64).sqrt();
        prop_assert!(mean.abs() < 1e-12 * sd.max(f64::MIN_POSITIVE));
        let c = m2.coefficients.iter().all(|c| (c.t_stat - c.estimate / c.std_error).abs() <= 1e-12 * c.t_stat.abs());
        prop_assert!(c);
    }

    #[test]
    fn planted_lag_is_found_for_any_seed(seed in 0u64..10_000, lag in 0usize..=3) {
        let mut p = params(AssetClass::InflationLinked, seed);
        p.cpi.lag_months = lag;
        let s = generate(&p).unwrap();
        let forward = select_lag(&s, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        let backward = select_lag(&s, &[6, 5, 4, 3, 2, 1, 0]).unwrap();
        prop_assert_eq!(forward.best_lag, lag);
        prop_assert_eq!(backward.best_lag, lag);
    }
}

#[test]
fn files_round_trip_and_align() {
    let dir = tempfile::tempdir().unwrap();
    let gov = generate(&params(AssetClass::Government, 3)).unwrap();
    let mut late = params(AssetClass::Corporate, 3);
    late.start = "2003-07".parse().unwrap();
    late.credit.as_mut().unwrap().issuers = 200;
    let corp = generate(&late).unwrap();

    let (gp, cp) = (dir.path().join("gov.csv"), dir.path().join("corp.csv"));
    emit_dataset(&gov, &gp).unwrap();
    emit_dataset(&corp, &cp).unwrap();
    let gov_back = load_series(&gp, AssetClass::Government).unwrap();
    let corp_back = load_series(&cp, AssetClass::Corporate).unwrap();
    assert_eq!(gov_back, gov);
    assert_eq!(corp_back, corp);

    let aligned = align(&[gov_back, corp_back], None).unwrap();
    assert_eq!(aligned[0].dates(), aligned[1].dates());
    assert_eq!(aligned[0].first_date(), "2003-07".parse().ok());
    assert_eq!(aligned[0].last_date(), gov.last_date());
    assert_eq!(aligned[0].len(), 120 - 42);
    let r = fit(&aligned[1], ModelSpec::new(ModelKind::Corp2)).unwrap();
    assert_eq!(r.data_start, "2003-07".parse().unwrap());
}

#[test]
fn wrong_class_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gov.csv");
    emit_dataset(&generate(&params(AssetClass::Government, 1)).unwrap(), &path).unwrap();
    let err = load_series(&path, AssetClass::InflationLinked).unwrap_err();
    assert!(matches!(err, bondform::Error::Schema { .. }));
    assert!(err.to_string().contains("'cpi'"));
}
