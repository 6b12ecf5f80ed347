//! Structural invariants of the simulator and its oracles, checked on
//! whole sample paths rather than single operations.

use cascade::dist::{make_stream, replication_seed, DistributionSpec};
use cascade::metrics::EstimatorOptions;
use cascade::oracle::{cascade_ctmc_generator, stationary_solve, CtmcSpec};
use cascade::runner::parallel_map;
use cascade::sim::{run_trajectory, RunOptions};
use cascade::{StationConfig, SystemConfig, TransferRule};

fn exp(rate: f64) -> DistributionSpec {
    DistributionSpec::exponential_rate(rate)
}

fn three_station(lambda1: f64, seed: u64) -> SystemConfig {
    SystemConfig {
        stations: vec![
            StationConfig {
                arrival: exp(lambda1),
                service: exp(1.0),
                transfer: Some(TransferRule {
                    threshold: 1,
                    service: exp(1.0),
                }),
            },
            StationConfig {
                arrival: exp(0.5),
                service: exp(1.0),
                transfer: Some(TransferRule {
                    threshold: 1,
                    service: exp(1.0),
                }),
            },
            StationConfig {
                arrival: exp(0.5),
                service: exp(1.0),
                transfer: None,
            },
        ],
        seed,
        initial_queues: Vec::new(),
    }
}

/// Departures of each class equal the potential-service count evaluated
/// at the class's busy time: replaying the same service stream, the
/// number of whole service times fitting into the measured busy time is
/// exactly the departure count.
#[test]
fn departures_compose_service_renewals_with_busy_time() {
    for seed in [3u64, 17, 88] {
        let cfg = SystemConfig::exponential_two_station(1.4, 1.0, 0.8, 0.6, 1.1, 2, seed);
        let record = run_trajectory(&cfg, RunOptions::new(2_000.0)).unwrap();

        let count_renewals = |spec: &DistributionSpec, stream_index: u64, budget: f64| -> u64 {
            let mut stream = make_stream(spec, seed, stream_index).unwrap();
            let tol = 1e-9 * (1.0 + budget);
            let mut sum = 0.0;
            let mut n = 0u64;
            loop {
                sum += stream.draw();
                if sum > budget + tol {
                    return n;
                }
                n += 1;
            }
        };

        for i in 0..2u64 {
            let n = count_renewals(
                &cfg.stations[i as usize].service,
                3 * i + 1,
                record.busy_time[i as usize],
            );
            assert_eq!(
                n,
                record.departures[i as usize],
                "station {} seed {seed}",
                i + 1
            );
        }
        let n = count_renewals(
            &cfg.stations[0].transfer.as_ref().unwrap().service,
            2,
            record.transfer_busy_time[0],
        );
        assert_eq!(
            n, record.transfer_departures[0],
            "transfer class seed {seed}"
        );
    }
}

/// Empirical arrival rates over 20 replications converge to the
/// configured rates within three cross-replication standard errors.
#[test]
fn arrival_rates_converge_across_replications() {
    let cfg = three_station(1.2, 360);
    let reps = 20usize;
    let rates = parallel_map(reps, |rep| {
        let mut c = cfg.clone();
        c.seed = replication_seed(cfg.seed, rep as u64);
        let record = run_trajectory(&c, RunOptions::new(50_000.0))?;
        Ok((0..3)
            .map(|i| record.arrivals[i] as f64 / record.horizon())
            .collect::<Vec<f64>>())
    })
    .unwrap();
    for i in 0..3 {
        let obs: Vec<f64> = rates.iter().map(|r| r[i]).collect();
        let mean = obs.iter().sum::<f64>() / reps as f64;
        let sd = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        let lambda = cfg.arrival_rate(i);
        assert!(
            (mean - lambda).abs() <= 3.0 * se,
            "station {}: mean {mean} vs {lambda} (se {se})",
            i + 1
        );
    }
}

/// The stability of a station does not depend on the stations above it:
/// the busy fraction of station 2 measured inside the full 3-station
/// system matches the one measured in the suffix subsystem alone.
#[test]
fn suffix_subsystem_reproduces_downstream_busy_fractions() {
    let cfg = three_station(1.2, 4242);
    let sub = cfg.subsystem(1).unwrap();
    let reps = 12usize;
    let horizon = 200_000.0;
    let opts = EstimatorOptions::default();

    let pairs = parallel_map(reps, |rep| {
        let mut full = cfg.clone();
        full.seed = replication_seed(cfg.seed, rep as u64);
        let mut suffix = sub.clone();
        suffix.seed = replication_seed(sub.seed ^ 0x5151, rep as u64);
        let full_record = run_trajectory(&full, RunOptions::new(horizon))?;
        let suffix_record = run_trajectory(&suffix, RunOptions::new(horizon))?;
        Ok((
            full_record.effective_traffic_intensity(1, &opts)?.value,
            suffix_record.effective_traffic_intensity(0, &opts)?.value,
        ))
    })
    .unwrap();

    let mean = |sel: &dyn Fn(&(f64, f64)) -> f64| pairs.iter().map(sel).sum::<f64>() / reps as f64;
    let m_full = mean(&|p| p.0);
    let m_suffix = mean(&|p| p.1);
    let sd = |sel: &dyn Fn(&(f64, f64)) -> f64, m: f64| {
        (pairs.iter().map(|p| (sel(p) - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
            / (reps as f64).sqrt()
    };
    let se = (sd(&|p| p.0, m_full).powi(2) + sd(&|p| p.1, m_suffix).powi(2)).sqrt();
    assert!(
        (m_full - m_suffix).abs() <= 3.5 * se.max(1e-4),
        "full {m_full} vs suffix {m_suffix} (se {se})"
    );
}

/// Doubling the truncation leaves the oracle's effective intensity
/// unchanged to 1e-6 on the reference stable instance.
#[test]
fn truncation_doubling_is_converged() {
    let solve = |truncation: u32| {
        let spec = CtmcSpec {
            lambda1: 1.2,
            lambda2: 0.5,
            mu1: 1.0,
            mu2: 1.0,
            mu12: 1.0,
            c1: 1,
            truncation,
        };
        stationary_solve(&cascade_ctmc_generator(&spec).unwrap()).unwrap()
    };
    let coarse = solve(200);
    let fine = solve(400);
    assert!(coarse.truncation_mass < 1e-6);
    assert!(
        (coarse.oracle_rho_star(0) - fine.oracle_rho_star(0)).abs() < 1e-6,
        "rho*_1: {} vs {}",
        coarse.oracle_rho_star(0),
        fine.oracle_rho_star(0)
    );
}

/// The same scenario and seed produce byte-identical replications even
/// when executed on different pool shapes.
#[test]
fn replication_pool_is_order_insensitive() {
    let cfg = three_station(1.0, 99);
    let run_batch = || {
        parallel_map(8, |rep| {
            let mut c = cfg.clone();
            c.seed = replication_seed(cfg.seed, rep as u64);
            let record = run_trajectory(&c, RunOptions::new(5_000.0))?;
            Ok((record.arrivals.clone(), record.busy_time.clone()))
        })
        .unwrap()
    };
    let a = run_batch();
    let b = run_batch();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0, y.0);
        for (bx, by) in x.1.iter().zip(&y.1) {
            assert_eq!(bx.to_bits(), by.to_bits());
        }
    }
}
