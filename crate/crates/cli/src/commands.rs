use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use optcmd::algorithms::{
    comid_step, dmd_baseline_step, doptmd_baseline_step, iomd_step, omd_step, optcmd_step, optdcmd_step, optmd_step,
};
use optcmd::experiments::{
    ingest_dataset, run_portfolio, run_tracking, synth_market, write_curve_csv, write_plot_data, Curve, RunLedgers,
};
use optcmd::verify::{oracles, run_selected};
use optcmd::{
    composite_prox, AlgorithmState, CompositeCost, DynamicsModel, FeasibleSet, MirrorSetup, NonsmoothPart,
    PredictionBundle,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::error::CliError;

/// Bumped whenever a manifest field changes meaning.
pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    /// Full resolved config; `--config manifest.json` replays the run.
    config: &'a FileConfig,
    inputs: Value,
    artifacts: Vec<String>,
    summary: Value,
    notes: &'a [String],
}

impl Manifest<'_> {
    fn write(&self, out: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(out.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn safe_name(s: &str) -> String {
    let s: String = s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    s.trim_end_matches('_').to_string()
}

fn write_ledgers(runs: &[RunLedgers], out: &Path, artifacts: &mut Vec<String>) -> Result<(), CliError> {
    for run in runs {
        let name = format!("{}.csv", run.file_stem());
        run.write_csv(&out.join(&name))?;
        artifacts.push(name);
    }
    Ok(())
}

fn write_curves(prefix: &str, curves: &[Curve], out: &Path, artifacts: &mut Vec<String>) -> Result<(), CliError> {
    for c in curves {
        let name = format!("{prefix}_{}.csv", safe_name(&c.model_id));
        write_curve_csv(c, &out.join(&name))?;
        artifacts.push(name);
    }
    Ok(())
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

pub fn track(cfg: &FileConfig, out: &Path, emit_plot_data: bool) -> Result<(), CliError> {
    let config = cfg.track.to_config()?;
    prepare_out(out)?;
    let res = run_tracking(&config)?;
    let mut artifacts = Vec::new();
    write_ledgers(&res.ledgers, out, &mut artifacts)?;
    write_curves("optdcmd_minus_dmd", &res.vs_dmd, out, &mut artifacts)?;
    write_curves("optdcmd_minus_doptmd", &res.vs_doptmd, out, &mut artifacts)?;
    if emit_plot_data {
        let groups = [("optdcmd_minus_dmd", &res.vs_dmd[..]), ("optdcmd_minus_doptmd", &res.vs_doptmd[..])];
        write_plot_data("track", &groups, &out.join("plot_data.csv"))?;
        artifacts.push("plot_data.csv".into());
    }

    let dmd = res.final_regret("dmd", "none");
    let mut finals = serde_json::Map::new();
    println!("{:<12} {:>14} {:>14} {:>14}", "model", "optdcmd", "doptmd", "dmd");
    for m in &config.models {
        let ours = res.final_regret("optdcmd", m.id());
        let dopt = res.final_regret("doptmd", m.id());
        println!(
            "{:<12} {:>14.4} {:>14.4} {:>14.4}",
            m.id(),
            ours.unwrap_or(f64::NAN),
            dopt.unwrap_or(f64::NAN),
            dmd.unwrap_or(f64::NAN)
        );
        finals.insert(m.id().into(), json!({ "optdcmd": ours, "doptmd": dopt }));
    }
    finals.insert("dmd".into(), json!(dmd));
    for n in &res.notes {
        eprintln!("note: {n}");
    }
    Manifest {
        schema_version: MANIFEST_SCHEMA,
        tool: "optcmd",
        version: env!("CARGO_PKG_VERSION"),
        command: "track",
        config: cfg,
        inputs: json!({ "seed": config.seed, "repetition_streams": config.repetitions }),
        artifacts,
        summary: json!({
            "mean_final_dynamic_regret": finals,
            "bound_checks": res.bound_checks.len(),
            "bound_violations": res.bound_violations(),
            "expansion_warnings": res.expansion_warnings,
        }),
        notes: &res.notes,
    }
    .write(out)
}

pub fn portfolio(cfg: &mut FileConfig, out: &Path, emit_plot_data: bool) -> Result<(), CliError> {
    let config = cfg.portfolio.to_config()?;
    let (market, inputs) = if cfg.portfolio.dataset.is_empty() {
        let m = &cfg.market;
        let law = m.law(&cfg.portfolio);
        let market = synth_market(m.assets, m.horizon, &law, &mut ChaCha8Rng::seed_from_u64(m.seed))?;
        let inputs = json!({ "dataset": null, "synthetic": { "assets": m.assets, "horizon": m.horizon, "seed": m.seed } });
        (market, inputs)
    } else {
        let path = PathBuf::from(&cfg.portfolio.dataset);
        let market = ingest_dataset(&path).map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))?;
        // absolute so the manifest replays from any directory
        if let Ok(abs) = path.canonicalize() {
            cfg.portfolio.dataset = abs.to_string_lossy().into_owned();
        }
        let inputs = json!({ "dataset": cfg.portfolio.dataset, "assets": market.n_assets(), "rounds": market.horizon() });
        (market, inputs)
    };
    prepare_out(out)?;
    let res = run_portfolio(&config, &market)?;
    let mut artifacts = Vec::new();
    write_ledgers(&res.ledgers, out, &mut artifacts)?;
    write_curves("optmd_minus_cup", &res.vs_cup, out, &mut artifacts)?;
    if emit_plot_data {
        write_plot_data("portfolio", &[("optmd_minus_cup", &res.vs_cup[..])], &out.join("plot_data.csv"))?;
        artifacts.push("plot_data.csv".into());
    }

    let mut finals = serde_json::Map::new();
    println!("{:<18} {:>14}", "model", "static regret");
    for id in config.models.iter().map(|m| m.id()).chain(["cup".to_string()]) {
        let r = res.final_regret(&id);
        println!("{:<18} {:>14.6}", id, r.unwrap_or(f64::NAN));
        finals.insert(id, json!(r));
    }
    if res.clipped_entries > 0 {
        eprintln!("note: clipped {} entries to [{}, {}]", res.clipped_entries, config.r_min, config.r_max);
    }
    for n in &res.notes {
        eprintln!("note: {n}");
    }
    Manifest {
        schema_version: MANIFEST_SCHEMA,
        tool: "optcmd",
        version: env!("CARGO_PKG_VERSION"),
        command: "portfolio",
        config: cfg,
        inputs,
        artifacts,
        summary: json!({
            "dataset_name": res.dataset_name,
            "clipped_entries": res.clipped_entries,
            "mean_final_static_regret": finals,
            "comparator": res.comparator,
            "comparator_gap_total": res.comparator_gap_total,
            "bound_checks": res.bound_checks.len(),
            "bound_violations": res.bound_violations(),
            "rls_breakdowns": res.rls_breakdowns,
        }),
        notes: &res.notes,
    }
    .write(out)
}

pub fn verify(cfg: &FileConfig, out: &Path) -> Result<(), CliError> {
    let opts = cfg.verify.options()?;
    let reports = run_selected(&cfg.verify.suites, opts)?;
    for r in &reports {
        println!(
            "{:<10} {} {:>7} cases {:>4} violations ({:.1}s) {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.cases,
            r.violations,
            r.seconds,
            r.description
        );
        for c in &r.counterexamples {
            println!("    counterexample: {c}");
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    prepare_out(out)?;
    let report = json!({
        "schema_version": MANIFEST_SCHEMA,
        "tool": "optcmd",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "passed": failed == 0,
        "suites": reports,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("verify_report.json"), text + "\n")?;
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

/// Mean wall time per call of `step` over `rounds` calls.
fn time_per_call(rounds: usize, mut step: impl FnMut() -> optcmd::Result<()>) -> Result<f64, CliError> {
    let start = Instant::now();
    for _ in 0..rounds {
        step()?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e9 / rounds as f64)
}

pub fn bench(cfg: &FileConfig, out: &Path) -> Result<(), CliError> {
    let b = &cfg.bench;
    if b.rounds == 0 || b.dim == 0 {
        return Err(CliError::Config("bench needs rounds >= 1 and dim >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let n = b.dim;
    let setup = MirrorSetup::euclidean(n, FeasibleSet::unit_box(n, 5.0))?;
    let targets: Vec<Vec<f64>> = (0..b.rounds).map(|_| oracles::normal_vec(&mut rng, n, 1.0)).collect();
    let costs: Vec<CompositeCost> = targets.iter().map(|u| CompositeCost::tracking(u.clone(), 0.1)).collect();
    let dynamics = DynamicsModel::Linear((0..n).map(|i| (0..n).map(|j| if i == j { 0.9 } else { 0.0 }).collect()).collect());
    let x0 = vec![0.0; n];
    let eta = 0.5;

    let mut results: Vec<(String, f64)> = Vec::new();
    macro_rules! steps {
        ($name:expr, |$s:ident, $c:ident| $body:expr) => {{
            let mut $s = AlgorithmState::new(&setup, &x0)?;
            let mut k = 0;
            let ns = time_per_call(b.rounds, || {
                let $c = &costs[k];
                k += 1;
                $body.map(|_| ())
            })?;
            results.push(($name.to_string(), ns));
        }};
    }
    let bundle = |c: &CompositeCost| PredictionBundle::perfect(c);
    steps!("omd", |s, c| omd_step(&setup, &mut s, c, eta));
    steps!("comid", |s, c| comid_step(&setup, &mut s, c, eta));
    steps!("iomd", |s, c| iomd_step(&setup, &mut s, c, eta));
    steps!("optmd", |s, c| optmd_step(&setup, &mut s, c, &bundle(c), eta));
    steps!("optcmd", |s, c| optcmd_step(&setup, &mut s, c, &bundle(c), eta));
    steps!("optdcmd", |s, c| optdcmd_step(&setup, &mut s, c, &bundle(c), &dynamics, eta));
    steps!("doptmd", |s, c| doptmd_baseline_step(&setup, &mut s, c, &bundle(c), &dynamics, eta, eta));
    steps!("dmd", |s, c| dmd_baseline_step(&setup, &mut s, c, &dynamics, eta));

    let entropy = MirrorSetup::entropy_simplex(n)?;
    let uniform = entropy.center();
    let w = oracles::normal_vec(&mut rng, n, 1.0);
    let ns = time_per_call(b.rounds, || {
        composite_prox(&entropy, &w, &NonsmoothPart::Zero, eta, &uniform).map(|_| ())
    })?;
    results.push(("prox_entropy_simplex".into(), ns));
    let ball = MirrorSetup::euclidean(n, FeasibleSet::centered_ball(n, 1.0))?;
    let ns = time_per_call(b.rounds, || {
        composite_prox(&ball, &w, &NonsmoothPart::L1 { weight: 0.3 }, eta, &x0).map(|_| ())
    })?;
    results.push(("prox_ball_l1".into(), ns));

    for (name, ns) in &results {
        println!("{name:<22} {ns:>12.0} ns/call");
    }
    prepare_out(out)?;
    let report = json!({
        "schema_version": MANIFEST_SCHEMA,
        "tool": "optcmd",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "ns_per_call": results.iter().map(|(n, v)| (n.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("bench.json"), text + "\n")?;
    Ok(())
}
