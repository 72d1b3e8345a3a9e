use std::path::Path;

use optcmd::experiments::{
    parse_dataset, run_portfolio, run_tracking, synth_market, MarketLaw, PortfolioConfig, TrackingConfig,
};
use optcmd::predictors::TrackingModel;
use optcmd::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_tracking(seed: u64) -> TrackingConfig {
    TrackingConfig {
        horizon: 60,
        repetitions: 3,
        seed,
        models: vec![TrackingModel::Perfect, TrackingModel::Random],
        ..TrackingConfig::default()
    }
}

fn tracking_bytes(seed: u64, dir: &Path) -> Vec<Vec<u8>> {
    let res = run_tracking(&small_tracking(seed)).unwrap();
    res.ledgers
        .iter()
        .map(|run| {
            let path = dir.join(format!("{}.csv", run.file_stem()));
            run.write_csv(&path).unwrap();
            std::fs::read(&path).unwrap()
        })
        .collect()
}

#[test]
fn tracking_output_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = tracking_bytes(7, dir.path());
    let b = tracking_bytes(7, dir.path());
    let c = tracking_bytes(8, dir.path());
    assert_eq!(a.len(), 5);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn tracking_ledgers_cover_every_algorithm() {
    let res = run_tracking(&small_tracking(1)).unwrap();
    for (alg, model) in [("optdcmd", "perfect"), ("doptmd", "random"), ("dmd", "none")] {
        assert!(res.final_regret(alg, model).unwrap().is_finite());
    }
    assert_eq!(res.vs_dmd.len(), 2);
    assert!(res.ledgers.iter().all(|r| r.ledgers.len() == 3));
    assert!(res.ledgers.iter().all(|r| r.ledgers.iter().all(|l| l.resummation_holds())));
}

#[test]
fn portfolio_ledger_csv_has_schema_columns() {
    let market = synth_market(4, 80, &MarketLaw::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let config = PortfolioConfig {
        repetitions: 2,
        ..PortfolioConfig::default()
    };
    let res = run_portfolio(&config, &market).unwrap();
    assert_eq!(res.ledgers.len(), config.models.len() + 1);
    assert!((res.comparator.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    res.ledgers[0].write_csv(&path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        ["t", "loss", "comparator_loss", "reg_s", "reg_d", "d_prime", "v_prime", "c_prime", "eta", "repetition", "model_id"]
    );
    assert_eq!(reader.records().count(), 2 * 80);
}

#[test]
fn dataset_errors_carry_line_numbers() {
    let ok = parse_dataset("m", "a,b\n1.0,1.1\n0.9,1.2\n").unwrap();
    assert_eq!((ok.n_assets(), ok.horizon()), (2, 2));
    match parse_dataset("m", "a,b\n1.0,1.1\n0.9,oops\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    match parse_dataset("m", "a,b\n1.0,1.1\n1.0\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(parse_dataset("m", "a,b\n1.0,-1\n"), Err(Error::Validation(_))));
    assert!(matches!(parse_dataset("m", "a,b\n"), Err(Error::Parse { .. })));
}
