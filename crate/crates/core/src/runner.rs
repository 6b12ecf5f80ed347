//! Experiment orchestration: replication pools, result persistence, and
//! report emission. Every output byte is a deterministic function of the
//! scenario file plus the effective seed; output paths embed a content
//! hash of the scenario so reruns land in the same place.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use serde_json::json;

use crate::config::SystemConfig;
use crate::dist::replication_seed;
use crate::error::{Error, Result};
use crate::metrics::{rate_checks, Estimate, EstimatorOptions, OverflowBound, TrajectoryRecord};
use crate::oracle::{cascade_ctmc_generator, stationary_solve, CtmcSpec};
use crate::scenario::{apply_parameter, Model, Scenario};
use crate::sim::{EventLogWriter, RunOptions, Simulator};
use crate::stability::{
    backward_induction, classify_two_station_with_epsilon, Classification, SimBudget,
    StabilityVerdict,
};
use crate::stats;

/// Runs `f` over `0..count` on a bounded worker pool; results come back
/// in index order regardless of completion order.
pub fn parallel_map<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if count == 0 {
        return Ok(Vec::new());
    }
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(count);
    if workers <= 1 {
        return (0..count).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker left no result"))
        .collect()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Content-derived run identifier: same scenario, same directory.
pub fn run_id(scenario: &Scenario) -> String {
    let mut value = serde_json::to_value(scenario).expect("scenario serializes");
    value.as_object_mut().map(|m| m.remove("out_dir"));
    format!("{:016x}", fnv1a64(value.to_string().as_bytes()))
}

/// Exit codes of the harness.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAULT: i32 = 1;
pub const EXIT_BOUNDARY: i32 = 2;

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
}

/// Per-replication, per-station metric row of the simulate model.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub replication: String,
    pub station: usize,
    pub rho_star: f64,
    pub ci: f64,
    pub idle: f64,
    pub drift: f64,
    pub little_residual: Option<f64>,
    pub overflow_slack: Option<f64>,
    pub tight_l0: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::from(
        "replication,station,rho_star,ci,idle,drift,little_residual,overflow_slack,tight_l0\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.replication,
            r.station,
            r.rho_star,
            r.ci,
            r.idle,
            r.drift,
            fmt_opt(r.little_residual),
            fmt_opt(r.overflow_slack),
            r.tight_l0,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

struct RepOutcome {
    record: TrajectoryRecord,
    rows: Vec<MetricsRow>,
    overflow: Vec<Option<OverflowBound>>,
}

fn simulate_replication(
    scenario: &Scenario,
    config: &SystemConfig,
    rep: usize,
    out_dir: Option<&Path>,
) -> Result<RepOutcome> {
    let mut cfg = config.clone();
    cfg.seed = replication_seed(config.seed, rep as u64);
    let options = RunOptions::new(scenario.horizon).with_event_cap(scenario.event_cap);
    let mut sim = Simulator::new(&cfg, options)?;
    if let Some(dir) = out_dir {
        let file = fs::File::create(dir.join(format!("events-rep{rep}.csv")))?;
        let mut log = EventLogWriter::new(std::io::BufWriter::new(file), cfg.station_count())?;
        sim.run(&mut log)?;
    } else {
        sim.run(&mut crate::sim::NullObserver)?;
    }
    let record = sim.into_record();
    let opts = EstimatorOptions {
        warmup_fraction: scenario.warmup_fraction,
        batches: scenario.batches,
    };
    let k = record.stations;
    let little = record.little_residual(&opts);
    let mut rows = Vec::with_capacity(k);
    let mut overflow = Vec::with_capacity(k.saturating_sub(1));
    for i in 0..k {
        let row = if record.truncated {
            // partial record: full-span fractions, no interval machinery
            let horizon = record.horizon();
            let idle = record.idle_time[i] / horizon;
            if i + 1 < k {
                overflow.push(None);
            }
            MetricsRow {
                replication: rep.to_string(),
                station: i + 1,
                rho_star: record.busy_time[i] / horizon,
                ci: f64::INFINITY,
                idle,
                drift: record.drift_estimate(i),
                little_residual: None,
                overflow_slack: None,
                tight_l0: idle,
            }
        } else {
            let rho_star = record.effective_traffic_intensity(i, &opts)?;
            let idle = record.idle_fraction(i, &opts)?;
            let tight = record.tightness_diagnostic(i, 0, &opts)?;
            let bound = if i + 1 < k {
                let b = record.overflow_bound_check(i, &opts)?;
                overflow.push(Some(b));
                Some(b)
            } else {
                None
            };
            MetricsRow {
                replication: rep.to_string(),
                station: i + 1,
                rho_star: rho_star.value,
                ci: rho_star.half_width,
                idle: idle.value,
                drift: record.drift_estimate(i),
                little_residual: (i == 0).then_some(little).flatten(),
                overflow_slack: bound.map(|b| b.slack),
                tight_l0: tight.value,
            }
        };
        rows.push(row);
    }
    Ok(RepOutcome {
        record,
        rows,
        overflow,
    })
}

/// Aggregate of one station across replications.
#[derive(Debug, Clone, Serialize)]
pub struct StationAggregate {
    pub station: usize,
    pub rho_star: Estimate,
    pub idle: f64,
    pub drift_mean: f64,
    pub drift_std_err: f64,
    /// Declares drift when the mean exceeds three replication standard
    /// errors; transfer rates are then path rates, not limits.
    pub drifting: bool,
    pub little_residual: Option<f64>,
    pub overflow_path_rate: Option<f64>,
    pub overflow_slack: Option<f64>,
    pub tight_l0: f64,
}

fn aggregate_stations(outcomes: &[RepOutcome], warmup_fraction: f64) -> Vec<StationAggregate> {
    let k = outcomes[0].record.stations;
    let reps = outcomes.len();
    (0..k)
        .map(|i| {
            let col = |f: &dyn Fn(&MetricsRow) -> f64| -> Vec<f64> {
                outcomes.iter().map(|o| f(&o.rows[i])).collect()
            };
            let rho = col(&|r| r.rho_star);
            let drifts = col(&|r| r.drift);
            let drift_mean = stats::mean(&drifts);
            let drift_std_err = if reps >= 2 {
                stats::sample_std(&drifts) / (reps as f64).sqrt()
            } else {
                0.0
            };
            let littles: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.rows[i].little_residual)
                .collect();
            let slacks: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.rows[i].overflow_slack)
                .collect();
            let path_rates: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.overflow.get(i).and_then(|b| b.map(|b| b.path_rate)))
                .collect();
            StationAggregate {
                station: i + 1,
                rho_star: Estimate {
                    value: stats::mean(&rho),
                    half_width: if reps >= 2 {
                        stats::batch_half_width(&rho)
                    } else {
                        outcomes[0].rows[i].ci
                    },
                    batches: reps,
                    warmup_fraction,
                },
                idle: stats::mean(&col(&|r| r.idle)),
                drift_mean,
                drift_std_err,
                // the 1e-3 floor keeps a handful of customers left in a
                // stable queue at the horizon from reading as drift
                drifting: reps >= 2 && drift_mean > 3.0 * drift_std_err && drift_mean > 1e-3,
                little_residual: (!littles.is_empty()).then(|| stats::mean(&littles)),
                overflow_path_rate: (!path_rates.is_empty()).then(|| stats::mean(&path_rates)),
                overflow_slack: (!slacks.is_empty()).then(|| stats::mean(&slacks)),
                tight_l0: stats::mean(&col(&|r| r.tight_l0)),
            }
        })
        .collect()
}

fn print_header(scenario: &Scenario) {
    println!("scenario `{}` (model {})", scenario.name, scenario.model);
    println!(
        "  stations: {}, horizon {}, replications {}, seed {}, warm-up {}",
        scenario.config.station_count(),
        scenario.horizon,
        scenario.replications,
        scenario.config.seed,
        scenario.warmup_fraction,
    );
    for (i, st) in scenario.config.stations.iter().enumerate() {
        let admissible = st.arrival.check_spread_out().admissible;
        println!(
            "  station {}: arrivals {} (rate {}), service {} (rate {}){}{}",
            i + 1,
            st.arrival.family_name(),
            st.arrival.rate(),
            st.service.family_name(),
            st.service.rate(),
            st.transfer
                .as_ref()
                .map(|t| format!(
                    ", threshold {} overflow rate {}",
                    t.threshold,
                    t.service.rate()
                ))
                .unwrap_or_default(),
            if admissible { "" } else { " [not spread out]" },
        );
    }
    for w in &scenario.warnings {
        println!("  warning: {w}");
    }
}

fn print_verdict(verdict: &StabilityVerdict) {
    println!(
        "  {:<8} {:>8} {:>8} {:>8} {:>8} {:>18} {:>24} {:>10}",
        "station", "lambda", "mu", "mu_ov", "rho", "rho*", "rho~ [ci]", "class"
    );
    for s in &verdict.stations {
        let rho_star = s
            .rho_star
            .map(|e| format!("{:.4} ±{:.4}", e.value, e.half_width))
            .unwrap_or_else(|| "-".into());
        let rho_tilde = match (s.rho_tilde, s.rho_tilde_ci) {
            (Some(v), Some((lo, hi))) => format!("{v:.4} [{lo:.4}, {hi:.4}]"),
            _ => "-".into(),
        };
        println!(
            "  {:<8} {:>8.4} {:>8.4} {:>8} {:>8.4} {:>18} {:>24} {:>10}",
            s.station,
            s.lambda,
            s.mu,
            s.mu_overflow
                .map(|m| format!("{m:.4}"))
                .unwrap_or_else(|| "-".into()),
            s.rho,
            rho_star,
            rho_tilde,
            s.classification
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into()),
        );
    }
    println!(
        "  overall: {} (epsilon {})",
        verdict.overall, verdict.epsilon
    );
    if let Some(advice) = &verdict.advice {
        println!("  note: {advice}");
    }
}

fn stability_budget(scenario: &Scenario) -> SimBudget {
    SimBudget {
        horizon: scenario.horizon,
        replications: scenario.replications,
        warmup_fraction: scenario.warmup_fraction,
        batches: scenario.batches,
        epsilon: scenario.epsilon,
    }
}

fn verdict_for(config: &SystemConfig, scenario: &Scenario) -> Result<StabilityVerdict> {
    if config.station_count() == 2 {
        classify_two_station_with_epsilon(config, scenario.epsilon)
    } else {
        backward_induction(config, &stability_budget(scenario))
    }
}

/// Runs a scenario end to end, writing artifacts under
/// `out_dir/<name>/<run-id>/`. Returns the exit code and the directory.
pub fn run_experiment(scenario: &Scenario) -> Result<RunOutcome> {
    print_header(scenario);
    let out_dir = scenario.out_dir.join(&scenario.name).join(run_id(scenario));
    fs::create_dir_all(&out_dir)?;

    let exit_code = match scenario.model {
        Model::Simulate => run_simulate(scenario, &out_dir)?,
        Model::Ctmc => run_ctmc(scenario, &out_dir)?,
        Model::Stability => run_stability(scenario, &out_dir)?,
        Model::Sweep => run_sweep(scenario, &out_dir)?,
    };
    println!("artifacts in {}", out_dir.display());
    Ok(RunOutcome { exit_code, out_dir })
}

fn run_simulate(scenario: &Scenario, out_dir: &Path) -> Result<i32> {
    let log_dir = scenario.event_log.then_some(out_dir);
    let outcomes = parallel_map(scenario.replications, |rep| {
        simulate_replication(scenario, &scenario.config, rep, log_dir)
    })?;

    let mut rows: Vec<MetricsRow> = outcomes.iter().flat_map(|o| o.rows.clone()).collect();
    let aggregates = aggregate_stations(&outcomes, scenario.warmup_fraction);
    for a in &aggregates {
        rows.push(MetricsRow {
            replication: "aggregate".into(),
            station: a.station,
            rho_star: a.rho_star.value,
            ci: a.rho_star.half_width,
            idle: a.idle,
            drift: a.drift_mean,
            little_residual: a.little_residual,
            overflow_slack: a.overflow_slack,
            tight_l0: a.tight_l0,
        });
    }
    write_metrics_csv(&out_dir.join("metrics.csv"), &rows)?;

    let truncated = outcomes.iter().any(|o| o.record.truncated);
    let checks = rate_checks(&outcomes[0].record, &scenario.config);
    let report = json!({
        "scenario": scenario,
        "stations": aggregates,
        "rate_checks": checks,
        "truncated": truncated,
        "replications": outcomes.iter().map(|o| &o.rows).collect::<Vec<_>>(),
    });
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;

    for a in &aggregates {
        println!(
            "  station {}: rho* {:.4} ±{:.4}, idle {:.4}, drift {:.5}{}",
            a.station,
            a.rho_star.value,
            a.rho_star.half_width,
            a.idle,
            a.drift_mean,
            if a.drifting { " [drifting]" } else { "" },
        );
    }
    if truncated {
        println!("  event cap reached: results are partial");
        return Ok(EXIT_FAULT);
    }
    Ok(EXIT_OK)
}

fn run_ctmc(scenario: &Scenario, out_dir: &Path) -> Result<i32> {
    let truncation = scenario
        .ctmc_truncation
        .ok_or_else(|| Error::Config("ctmc model needs [ctmc] truncation".into()))?;
    let spec = CtmcSpec::from_config(&scenario.config, truncation)?;
    let table = stationary_solve(&cascade_ctmc_generator(&spec)?)?;
    if table.truncation_mass > 1e-6 {
        println!(
            "  warning: truncation mass {:.3e} exceeds 1e-6; raise the truncation",
            table.truncation_mass
        );
    }
    let m1 = table.marginal(0);
    let m2 = table.marginal(1);
    let mut csv = String::from("q,p_q1,p_q2\n");
    for q in 0..m1.len() {
        csv.push_str(&format!("{q},{},{}\n", m1[q], m2[q]));
    }
    fs::write(out_dir.join("ctmc_marginals.csv"), csv)?;

    let summary = format!(
        "rho_star1,rho_star2,p_q1_0,p_q2_0,truncation_mass,iterations\n{},{},{},{},{},{}\n",
        table.oracle_rho_star(0),
        table.oracle_rho_star(1),
        m1[0],
        m2[0],
        table.truncation_mass,
        table.iterations,
    );
    fs::write(out_dir.join("ctmc_summary.csv"), summary)?;

    let report = json!({
        "scenario": scenario,
        "spec": spec,
        "rho_star": [table.oracle_rho_star(0), table.oracle_rho_star(1)],
        "p_empty": [m1[0], m2[0]],
        "truncation_mass": table.truncation_mass,
        "iterations": table.iterations,
    });
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "  rho*_1 {:.8}, rho*_2 {:.8}, P(Q1=0) {:.8}, P(Q2=0) {:.8}",
        table.oracle_rho_star(0),
        table.oracle_rho_star(1),
        m1[0],
        m2[0]
    );
    Ok(EXIT_OK)
}

fn run_stability(scenario: &Scenario, out_dir: &Path) -> Result<i32> {
    let verdict = verdict_for(&scenario.config, scenario)?;
    print_verdict(&verdict);
    let report = json!({ "scenario": scenario, "verdict": verdict });
    fs::write(
        out_dir.join("verdict.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(match verdict.overall {
        Classification::Boundary => EXIT_BOUNDARY,
        _ => EXIT_OK,
    })
}

/// One sweep point: the verdict plus simulated diagnostics per station.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub station: usize,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub rho_tilde: Option<f64>,
    pub rho_star_sim: f64,
    pub ci: f64,
    pub drift: f64,
    pub overflow_path_rate: Option<f64>,
    pub overflow_slack: Option<f64>,
    pub station_class: Option<Classification>,
    pub verdict: Classification,
}

/// Sweeps the configured parameter, classifying and simulating each point.
pub fn sweep_points(scenario: &Scenario) -> Result<Vec<SweepRow>> {
    let axis = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep model needs a [sweep] table".into()))?;
    let mut rows = Vec::new();
    for &value in &axis.values {
        let config = apply_parameter(&scenario.config, &axis.parameter, value)?;
        let verdict = verdict_for(&config, scenario)?;
        let outcomes = parallel_map(scenario.replications, |rep| {
            simulate_replication(scenario, &config, rep, None)
        })?;
        let aggregates = aggregate_stations(&outcomes, scenario.warmup_fraction);
        for a in &aggregates {
            let station = &verdict.stations[a.station - 1];
            rows.push(SweepRow {
                value,
                station: a.station,
                lambda: station.lambda,
                mu: station.mu,
                rho: station.rho,
                rho_tilde: station.rho_tilde,
                rho_star_sim: a.rho_star.value,
                ci: a.rho_star.half_width,
                drift: a.drift_mean,
                overflow_path_rate: a.overflow_path_rate,
                overflow_slack: a.overflow_slack,
                station_class: station.classification,
                verdict: verdict.overall,
            });
        }
    }
    Ok(rows)
}

fn run_sweep(scenario: &Scenario, out_dir: &Path) -> Result<i32> {
    let rows = sweep_points(scenario)?;
    let mut csv = String::from(
        "value,station,lambda,mu,rho,rho_tilde,rho_star_sim,ci,drift,\
         overflow_path_rate,overflow_slack,station_class,verdict\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.value,
            r.station,
            r.lambda,
            r.mu,
            r.rho,
            fmt_opt(r.rho_tilde),
            r.rho_star_sim,
            r.ci,
            r.drift,
            fmt_opt(r.overflow_path_rate),
            fmt_opt(r.overflow_slack),
            r.station_class.map(|c| c.to_string()).unwrap_or_default(),
            r.verdict,
        ));
    }
    fs::write(out_dir.join("sweep.csv"), csv)?;
    let report = json!({ "scenario": scenario, "points": rows });
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    for r in rows.iter().filter(|r| r.station == 1) {
        println!(
            "  {} = {}: verdict {}, drift {:.5}",
            scenario.sweep.as_ref().unwrap().parameter,
            r.value,
            r.verdict,
            r.drift
        );
    }
    Ok(EXIT_OK)
}
