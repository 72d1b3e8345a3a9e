//! One line per acceptance criterion, written straight to stdout so it shows
//! up in captured test logs. The test fails if any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use optcmd::experiments::{run_portfolio, run_tracking, synth_market, MarketLaw, PortfolioConfig, TrackingConfig};
use optcmd::verify::{run_suite, SuiteReport, VerifyOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suites(names: &[&str]) -> Outcome {
    let reports: Vec<SuiteReport> = names
        .iter()
        .map(|n| run_suite(n, VerifyOptions::default()).expect("known suite"))
        .collect();
    let passed = reports.iter().all(|r| r.passed);
    let detail = reports
        .iter()
        .map(|r| {
            let mut s = format!("{}: {} cases, {} violations", r.name, r.cases, r.violations);
            if let Some(c) = r.counterexamples.first() {
                s.push_str(&format!(" [first: {}]", &c[..c.len().min(300)]));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { passed, detail }
}

fn tracking() -> Outcome {
    let config = TrackingConfig {
        horizon: 500,
        repetitions: 20,
        seed: 2024,
        ..TrackingConfig::default()
    };
    let res = run_tracking(&config).expect("tracking run");
    let mut passed = true;
    let mut parts = Vec::new();
    for model in ["perfect", "noisy", "noisy+bias", "previous", "random"] {
        let ours = res.final_regret("optdcmd", model).expect("model present");
        let dmd = res.final_regret("dmd", "none").expect("dmd present");
        let doptmd = res.final_regret("doptmd", model).expect("model present");
        let need_dmd = matches!(model, "perfect" | "noisy" | "noisy+bias");
        passed &= ours < doptmd && (!need_dmd || ours < dmd);
        parts.push(format!("{model}: optdcmd {ours:.2} dmd {dmd:.2} doptmd {doptmd:.2}"));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn portfolio() -> Outcome {
    let law = MarketLaw::default();
    let config = PortfolioConfig::default();
    let ids: Vec<String> = config.models.iter().map(|m| m.id()).collect();
    let mut sums = vec![0.0; ids.len()];
    let mut cup = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let market = synth_market(10, 1000, &law, &mut ChaCha8Rng::seed_from_u64(seed)).expect("market");
        let res = run_portfolio(
            &PortfolioConfig {
                seed,
                ..config.clone()
            },
            &market,
        )
        .expect("portfolio run");
        for (s, id) in sums.iter_mut().zip(&ids) {
            *s += res.final_regret(id).expect("model present") / seeds as f64;
        }
        cup += res.final_regret("cup").expect("cup present") / seeds as f64;
    }
    let noisy = ids.iter().position(|i| i == "noisy").expect("noisy model");
    let random = ids.iter().position(|i| i == "random").expect("random model");
    let lowest = sums.iter().enumerate().all(|(i, v)| i == noisy || sums[noisy] < *v);
    let close = (sums[random] - cup).abs() <= 0.1 * cup.abs();
    let mut parts: Vec<String> = ids.iter().zip(&sums).map(|(i, v)| format!("{i} {v:.4}")).collect();
    parts.push(format!("cup {cup:.4}"));
    Outcome {
        passed: lowest && close,
        detail: parts.join(", "),
    }
}

#[test]
fn acceptance_criteria() {
    type Check = Box<dyn Fn() -> Outcome>;
    let criteria: Vec<(u32, &str, u64, Check)> = vec![
        (1, "prox matches grid oracle", 60, Box::new(|| suites(&["prox_grid"]))),
        (2, "prox nonexpansive in linear term", 30, Box::new(|| suites(&["lemma2"]))),
        (3, "square-root sum and log ratio inequalities", 30, Box::new(|| suites(&["lemma3", "lemma4"]))),
        (4, "convex composite bound and constant regret", 300, Box::new(|| suites(&["thm1"]))),
        (5, "strongly convex bound and log growth", 300, Box::new(|| suites(&["thm2"]))),
        (6, "dynamic bounds and step monotonicity", 300, Box::new(|| suites(&["thm3_5"]))),
        (7, "implicit-update dynamic bound", 120, Box::new(|| suites(&["thm4"]))),
        (8, "tracking beats DMD and d-OptMD", 600, Box::new(tracking)),
        (9, "portfolio predictor ranking and CUP parity", 600, Box::new(portfolio)),
        (10, "reduction identities", 30, Box::new(|| suites(&["reduction"]))),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (id, name, budget, check) in criteria {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let ok = outcome.passed && in_time;
        let line = format!(
            "criterion {id:>2} {}: {name} ({:.1}s of {budget}s) {}\n",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
        out.write_all(line.as_bytes()).expect("stdout");
        out.flush().expect("stdout");
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
