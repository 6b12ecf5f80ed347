//! Stability criteria for the cascade system.
//!
//! Station `i` is judged by the criterion value
//!
//! ```text
//! rho~_i = lambda_i / (mu_i + mu_{i|(i+1)} * (1 - rho*_{i+1}))
//! ```
//!
//! with `rho~_k = rho_k` at the last station: the system is positive
//! recurrent exactly when every `rho~_i < 1`. For two stations the
//! criterion is closed-form (station 2 is an autonomous GI/G/1 queue, so
//! `rho*_2 = rho_2`). For longer cascades `rho*_{i+1}` has no closed
//! form; the classifier walks backward from station `k`, simulating each
//! suffix subsystem — whose law does not depend on the stations above
//! it — to estimate the effective intensity it feeds upstream.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::dist::replication_seed;
use crate::error::{Error, Result};
use crate::metrics::{Estimate, EstimatorOptions};
use crate::runner::parallel_map;
use crate::sim::{run_trajectory, RunOptions};
use crate::stats;

/// Half-width of the indifference band around `rho~ = 1`.
pub const DEFAULT_BOUNDARY_EPSILON: f64 = 0.02;

/// Criterion value `lambda / (mu + mu_overflow * (1 - rho_star_next))`.
///
/// Strictly increasing in `lambda` and `rho_star_next`, strictly
/// decreasing in `mu` and `mu_overflow`; never exceeds the nominal
/// `lambda / mu`.
pub fn rho_tilde(lambda: f64, mu: f64, mu_overflow: f64, rho_star_next: f64) -> Result<f64> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::Config(format!("service rate must be > 0, got {mu}")));
    }
    if !mu_overflow.is_finite() || mu_overflow < 0.0 {
        return Err(Error::Config(format!(
            "overflow service rate must be >= 0, got {mu_overflow}"
        )));
    }
    if !(0.0..=1.0).contains(&rho_star_next) {
        return Err(Error::Config(format!(
            "effective traffic intensity must lie in [0, 1], got {rho_star_next}"
        )));
    }
    Ok(lambda / (mu + mu_overflow * (1.0 - rho_star_next)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    Boundary,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationVerdict {
    /// 1-based station number, matching report conventions.
    pub station: usize,
    pub lambda: f64,
    pub mu: f64,
    pub mu_overflow: Option<f64>,
    /// Nominal intensity `lambda / mu`.
    pub rho: f64,
    /// Estimated effective intensity of this station, from simulating the
    /// suffix subsystem it heads (absent when induction stopped earlier).
    pub rho_star: Option<Estimate>,
    /// Criterion value; `None` when the suffix below was not credibly
    /// stable, which leaves the criterion undefined here.
    pub rho_tilde: Option<f64>,
    /// Criterion value at the ends of the `rho*` confidence interval.
    pub rho_tilde_ci: Option<(f64, f64)>,
    /// Criterion chain computed from downstream criterion values instead
    /// of effective intensities. Reported for comparison only — it is
    /// not the stability criterion.
    pub rho_tilde_naive: Option<f64>,
    pub classification: Option<Classification>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub epsilon: f64,
    pub overall: Classification,
    pub stations: Vec<StationVerdict>,
    /// Set when the verdict is boundary-inconclusive.
    pub advice: Option<String>,
}

impl StabilityVerdict {
    /// Station (1-based) whose condition failed first, if any.
    pub fn unstable_at(&self) -> Option<usize> {
        self.stations
            .iter()
            .find(|s| s.classification == Some(Classification::Unstable))
            .map(|s| s.station)
    }
}

/// Simulation effort for estimating effective traffic intensities.
#[derive(Debug, Clone, Copy)]
pub struct SimBudget {
    pub horizon: f64,
    pub replications: usize,
    pub warmup_fraction: f64,
    pub batches: usize,
    pub epsilon: f64,
}

impl Default for SimBudget {
    fn default() -> Self {
        SimBudget {
            horizon: 1_000_000.0,
            replications: 10,
            warmup_fraction: 0.1,
            batches: 32,
            epsilon: DEFAULT_BOUNDARY_EPSILON,
        }
    }
}

fn classify_value(value: f64, lo: f64, hi: f64, epsilon: f64) -> Classification {
    debug_assert!(lo <= value + 1e-12 && value <= hi + 1e-12);
    if hi < 1.0 - epsilon {
        Classification::Stable
    } else if lo > 1.0 + epsilon {
        Classification::Unstable
    } else {
        Classification::Boundary
    }
}

fn blank_station_rows(config: &SystemConfig) -> Vec<StationVerdict> {
    (0..config.station_count())
        .map(|i| StationVerdict {
            station: i + 1,
            lambda: config.arrival_rate(i),
            mu: config.service_rate(i),
            mu_overflow: config.transfer_rate(i),
            rho: config.nominal_rho(i),
            rho_star: None,
            rho_tilde: None,
            rho_tilde_ci: None,
            rho_tilde_naive: None,
            classification: None,
        })
        .collect()
}

/// Criterion chain that substitutes downstream criterion values for
/// effective intensities; reported side by side for k >= 3 because the
/// two genuinely differ.
fn naive_chain(rows: &mut [StationVerdict]) {
    let k = rows.len();
    if k < 3 {
        return;
    }
    let mut next = rows[k - 1].rho;
    rows[k - 1].rho_tilde_naive = Some(next);
    for i in (0..k - 1).rev() {
        let value = rows[i].lambda
            / (rows[i].mu + rows[i].mu_overflow.unwrap_or(0.0) * (1.0 - next.min(1.0)));
        rows[i].rho_tilde_naive = Some(value);
        next = value;
    }
}

/// Closed-form classification of a two-station system. Station 2 runs
/// autonomously, so its effective intensity equals `rho_2` and no
/// simulation is needed.
pub fn classify_two_station(config: &SystemConfig) -> Result<StabilityVerdict> {
    classify_two_station_with_epsilon(config, DEFAULT_BOUNDARY_EPSILON)
}

pub fn classify_two_station_with_epsilon(
    config: &SystemConfig,
    epsilon: f64,
) -> Result<StabilityVerdict> {
    config.validate()?;
    if config.station_count() != 2 {
        return Err(Error::Config(format!(
            "two-station classifier got {} stations",
            config.station_count()
        )));
    }
    let mut rows = blank_station_rows(config);
    let rho2 = rows[1].rho;
    rows[1].rho_tilde = Some(rho2);
    rows[1].rho_tilde_ci = Some((rho2, rho2));
    rows[1].rho_star = Some(Estimate {
        value: rho2.min(1.0),
        half_width: 0.0,
        batches: 0,
        warmup_fraction: 0.0,
    });
    rows[1].classification = Some(classify_value(rho2, rho2, rho2, epsilon));

    // a saturated station 2 is never empty, so the switch grants no help
    let rho_star_2 = rho2.min(1.0);
    let rt1 = rho_tilde(
        rows[0].lambda,
        rows[0].mu,
        rows[0].mu_overflow.unwrap(),
        rho_star_2,
    )?;
    rows[0].rho_tilde = Some(rt1);
    rows[0].rho_tilde_ci = Some((rt1, rt1));
    rows[0].classification = Some(classify_value(rt1, rt1, rt1, epsilon));

    let overall = match (
        rows[0].classification.unwrap(),
        rows[1].classification.unwrap(),
    ) {
        (_, Classification::Unstable) | (Classification::Unstable, _) => Classification::Unstable,
        (_, Classification::Boundary) | (Classification::Boundary, _) => Classification::Boundary,
        _ => Classification::Stable,
    };
    Ok(StabilityVerdict {
        epsilon,
        overall,
        stations: rows,
        advice: (overall == Classification::Boundary)
            .then(|| "criterion within the boundary band; the theory gives no verdict here".into()),
    })
}

/// Estimates the effective traffic intensity of the station heading the
/// suffix subsystem that starts at `start` (0-based), by replicated
/// simulation of that subsystem alone.
pub fn estimate_suffix_rho_star(
    config: &SystemConfig,
    start: usize,
    budget: &SimBudget,
) -> Result<Estimate> {
    let sub = config.subsystem(start)?;
    let opts = EstimatorOptions {
        warmup_fraction: budget.warmup_fraction,
        batches: budget.batches,
    };
    let reps = budget.replications.max(1);
    let estimates = parallel_map(reps, |rep| {
        let mut cfg = sub.clone();
        cfg.seed = replication_seed(sub.seed, rep as u64);
        let record = run_trajectory(&cfg, RunOptions::new(budget.horizon))?;
        record.effective_traffic_intensity(0, &opts)
    })?;
    if reps == 1 {
        return Ok(estimates[0]);
    }
    let points: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    Ok(Estimate {
        value: stats::mean(&points),
        half_width: stats::batch_half_width(&points),
        batches: reps,
        warmup_fraction: budget.warmup_fraction,
    })
}

/// Backward-induction stability classification for any station count.
///
/// Walks from station `k` to station 1. The last station is judged by its
/// nominal intensity. While the suffix so far is credibly stable, the
/// suffix subsystem is simulated to estimate the effective intensity
/// `rho*` it feeds upstream, and the next criterion value is computed
/// with that estimate; confidence intervals propagate into the verdict.
/// Induction stops at the first station that is unstable or within the
/// boundary band, leaving upstream stations unclassified.
pub fn backward_induction(config: &SystemConfig, budget: &SimBudget) -> Result<StabilityVerdict> {
    config.validate()?;
    let k = config.station_count();
    let epsilon = budget.epsilon;
    let mut rows = blank_station_rows(config);
    naive_chain(&mut rows);

    let rho_k = rows[k - 1].rho;
    rows[k - 1].rho_tilde = Some(rho_k);
    rows[k - 1].rho_tilde_ci = Some((rho_k, rho_k));
    let last_class = classify_value(rho_k, rho_k, rho_k, epsilon);
    rows[k - 1].classification = Some(last_class);

    match last_class {
        Classification::Unstable => {
            return Ok(StabilityVerdict {
                epsilon,
                overall: Classification::Unstable,
                stations: rows,
                advice: None,
            })
        }
        Classification::Boundary => {
            return Ok(StabilityVerdict {
                epsilon,
                overall: Classification::Boundary,
                stations: rows,
                advice: Some(
                    "last station sits in the boundary band; upstream stations were not evaluated"
                        .into(),
                ),
            })
        }
        Classification::Stable => {}
    }

    if k == 1 {
        return Ok(StabilityVerdict {
            epsilon,
            overall: Classification::Stable,
            stations: rows,
            advice: None,
        });
    }

    let mut rho_star_next = estimate_suffix_rho_star(config, k - 1, budget)?;
    rows[k - 1].rho_star = Some(rho_star_next);

    let mut overall = Classification::Stable;
    let mut advice = None;
    for i in (0..k - 1).rev() {
        let lambda = rows[i].lambda;
        let mu = rows[i].mu;
        let mu_overflow = rows[i].mu_overflow.unwrap();
        let mid = rho_tilde(lambda, mu, mu_overflow, rho_star_next.value.clamp(0.0, 1.0))?;
        let lo = rho_tilde(
            lambda,
            mu,
            mu_overflow,
            (rho_star_next.value - rho_star_next.half_width).clamp(0.0, 1.0),
        )?;
        let hi = rho_tilde(
            lambda,
            mu,
            mu_overflow,
            (rho_star_next.value + rho_star_next.half_width).clamp(0.0, 1.0),
        )?;
        rows[i].rho_tilde = Some(mid);
        rows[i].rho_tilde_ci = Some((lo, hi));
        let class = classify_value(mid, lo, hi, epsilon);
        rows[i].classification = Some(class);
        match class {
            Classification::Stable => {}
            Classification::Unstable => {
                overall = Classification::Unstable;
                break;
            }
            Classification::Boundary => {
                overall = Classification::Boundary;
                if lo <= 1.0 && 1.0 <= hi {
                    advice = Some(format!(
                        "the rho* confidence interval at station {} straddles the \
                         stability boundary; raise the simulation budget",
                        i + 2
                    ));
                } else {
                    advice = Some(
                        "criterion within the boundary band; the theory gives no verdict here"
                            .into(),
                    );
                }
                break;
            }
        }
        if i > 0 {
            rho_star_next = estimate_suffix_rho_star(config, i, budget)?;
            rows[i].rho_star = Some(rho_star_next);
        }
    }

    Ok(StabilityVerdict {
        epsilon,
        overall,
        stations: rows,
        advice,
    })
}
