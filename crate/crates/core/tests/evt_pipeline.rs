use chrono::NaiveDate;
use housing_core::evt::{block_maxima, fit_gev, nll, GevCoefficients, GevFitOptions, MIN_BLOCKS};
use housing_core::fixtures;
use housing_core::timeseries::{align, load_csv, month_end, Frequency};
use housing_core::Error;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

#[test]
fn fixture_files_feed_windowed_fits() {
    let dir = tempfile::tempdir().unwrap();
    let files = fixtures::write_fixtures(dir.path(), 2).unwrap();
    let daily = load_csv(&files.daily_price, Frequency::Daily).unwrap();
    let cpi = load_csv(&files.cpi_monthly, Frequency::Monthly).unwrap();
    let rate = load_csv(&files.rate_monthly, Frequency::Monthly).unwrap();
    let covariates = align(&[cpi.with_name("cpi"), rate.with_name("rate")]).unwrap();
    let blocks = block_maxima(&daily, &covariates, 10).unwrap();
    assert!(blocks.dropped.is_empty());
    assert_eq!(blocks.len(), 12 * 12);

    let pre = blocks.window(date(2014, 1, 1), date(2019, 12, 31));
    let post = blocks.window(date(2021, 1, 1), date(2025, 12, 31));
    assert_eq!((pre.len(), post.len()), (72, 60));

    for (data, truth) in [
        (&pre, GevCoefficients::PRE_2020),
        (&post, GevCoefficients::POST_2020),
    ] {
        let model = fit_gev(
            data,
            &GevCoefficients::moment_init(data),
            &GevFitOptions::default(),
        )
        .unwrap();
        let fitted = model.nll.unwrap();
        assert!(
            fitted <= nll(&truth, data) + 1e-9,
            "optimum beats the generating values"
        );
        let gof = model.diagnostics.unwrap();
        for p in [gof.ks_p, gof.ad_p] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(model.converged, "{:?}", model.warnings);
        assert!(model.stderrs.is_some());
    }

    let only_2020 = blocks.window(date(2020, 1, 1), date(2020, 12, 31));
    assert_eq!(only_2020.len(), 12);
    let err = fit_gev(
        &only_2020,
        &GevCoefficients::POST_2020,
        &GevFitOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(
        err,
        Error::TooFewBlocks {
            found: 12,
            required: MIN_BLOCKS
        }
    ));
}

#[test]
fn sparse_months_are_dropped_before_covariate_lookup() {
    let rows = fixtures::covariate_rows(month_end(2021, 1), month_end(2021, 6));
    let daily = fixtures::daily_prices(&rows, 1).unwrap();
    let cpi = fixtures::monthly_cpi(month_end(2021, 1), month_end(2021, 6));
    let rate = fixtures::monthly_rates(month_end(2021, 1), month_end(2021, 6));
    let covariates = align(&[cpi, rate]).unwrap();
    let all = block_maxima(&daily, &covariates, 10).unwrap();
    assert_eq!(all.len(), 6);
    let none = block_maxima(&daily, &covariates, 30).unwrap();
    assert_eq!(none.len(), 0);
    assert_eq!(none.dropped.len(), 6);
}
