//! Independent ground truths used to validate the simulator: the Lindley
//! recursion for a standalone GI/G/1 station, M/M/1 closed forms, and an
//! exact stationary solve of the truncated CTMC for the fully exponential
//! two-station cascade. Nothing here shares code with the event engine.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::dist::VariateStream;
use crate::error::{Error, Result};

/// Waiting times of the first `n` customers of a GI/G/1 queue:
/// `W_1 = 0`, `W_{j+1} = max(0, W_j + S_j - T_j)`.
pub fn lindley_waiting(
    arrivals: &mut VariateStream,
    services: &mut VariateStream,
    n: usize,
) -> Vec<f64> {
    let mut waits = Vec::with_capacity(n);
    let mut w = 0.0f64;
    for _ in 0..n {
        waits.push(w);
        w = (w + services.draw() - arrivals.draw()).max(0.0);
    }
    waits
}

/// M/M/1 stationary probability of an empty system.
pub fn mm1_idle_probability(lambda: f64, mu: f64) -> f64 {
    1.0 - lambda / mu
}

/// M/M/1 mean waiting time in queue, `rho / (mu - lambda)`.
pub fn mm1_mean_wait(lambda: f64, mu: f64) -> f64 {
    (lambda / mu) / (mu - lambda)
}

/// M/M/1 stationary queue-length law truncated at `n` (birth-death
/// balance with arrivals lost at the cap).
pub fn mm1_truncated_distribution(lambda: f64, mu: f64, n: usize) -> Vec<f64> {
    let rho = lambda / mu;
    let mut probs: Vec<f64> = (0..=n).map(|q| rho.powi(q as i32)).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Exponential two-station cascade with queues truncated at `truncation`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CtmcSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Service rate of transferred customers; zero decouples the stations.
    pub mu12: f64,
    pub c1: u32,
    pub truncation: u32,
}

impl CtmcSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ] {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::Config(format!(
                    "ctmc rate {name} must be > 0, got {rate}"
                )));
            }
        }
        if !(self.mu12.is_finite() && self.mu12 >= 0.0) {
            return Err(Error::Config(format!(
                "ctmc rate mu12 must be >= 0, got {}",
                self.mu12
            )));
        }
        if self.c1 < 1 {
            return Err(Error::Config("ctmc threshold c1 must be >= 1".into()));
        }
        if self.truncation <= self.c1 + 10 {
            return Err(Error::Config(format!(
                "truncation {} must exceed c1 + 10 = {}",
                self.truncation,
                self.c1 + 10
            )));
        }
        Ok(())
    }

    /// Reads the rates off a fully exponential two-station configuration.
    pub fn from_config(config: &SystemConfig, truncation: u32) -> Result<Self> {
        config.validate()?;
        if config.station_count() != 2 {
            return Err(Error::Config(format!(
                "the CTMC oracle covers exactly 2 stations, got {}",
                config.station_count()
            )));
        }
        let exponential = |spec: &crate::dist::DistributionSpec, what: &str| -> Result<f64> {
            match spec {
                crate::dist::DistributionSpec::Exponential { mean } => Ok(1.0 / mean),
                other => Err(Error::Config(format!(
                    "the CTMC oracle needs exponential laws; {what} is {}",
                    other.family_name()
                ))),
            }
        };
        let spec = CtmcSpec {
            lambda1: exponential(&config.stations[0].arrival, "station 1 arrival")?,
            lambda2: exponential(&config.stations[1].arrival, "station 2 arrival")?,
            mu1: exponential(&config.stations[0].service, "station 1 service")?,
            mu2: exponential(&config.stations[1].service, "station 2 service")?,
            mu12: exponential(
                &config.stations[0].transfer.as_ref().unwrap().service,
                "transfer service",
            )?,
            c1: u32::try_from(config.threshold(0).unwrap())
                .map_err(|_| Error::Config("threshold too large for the CTMC oracle".into()))?,
            truncation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Sparse generator over states `(q1, q2, b)` with `b` the transfer-slot
/// occupancy bit; instantaneous transfers are composed into single
/// transitions so the chain is conservative.
pub struct CtmcGenerator {
    pub spec: CtmcSpec,
    n: usize,
    /// Outgoing transitions per state as `(to, rate)`.
    rows: Vec<Vec<(u32, f64)>>,
    exit: Vec<f64>,
}

fn state_index(n: usize, q1: usize, q2: usize, b: usize) -> usize {
    (q1 * (n + 1) + q2) * 2 + b
}

/// Builds the generator for the exponential two-station cascade.
///
/// Transitions from `(q1, q2, b)`:
/// - class-1 arrival (rate `lambda1`): if the switch condition would hold
///   with the arriving customer counted (`q1 >= c1`, `q2 = 0`, `b = 0`)
///   the arrival transfers immediately, giving `(q1, q2, 1)`; otherwise
///   `(q1 + 1, q2, b)`, lost at the cap;
/// - class-1 completion (rate `mu1`, `q1 >= 1`): `(q1 - 1, q2, b)`;
/// - class-2 arrival (rate `lambda2`): `(q1, q2 + 1, b)`, lost at the cap;
/// - class-2 completion (rate `mu2`, `q2 >= 1`): `(q1, q2 - 1, b)`,
///   composed with an instantaneous transfer when it empties station 2
///   while `b = 0` and `q1 > c1`;
/// - transfer-service completion (rate `mu12`, `b = 1`, `q2 = 0`):
///   `(q1, 0, 0)`, composed with an instantaneous transfer when `q1 > c1`.
pub fn cascade_ctmc_generator(spec: &CtmcSpec) -> Result<CtmcGenerator> {
    spec.validate()?;
    let n = spec.truncation as usize;
    let c1 = spec.c1 as usize;
    let count = (n + 1) * (n + 1) * 2;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(5); count];
    let mut exit = vec![0.0; count];

    // landing state of "station 2 just became empty with slot state b=0"
    let compose_transfer = |q1: usize| -> (usize, usize, usize) {
        if q1 > c1 {
            (q1 - 1, 0, 1)
        } else {
            (q1, 0, 0)
        }
    };

    for q1 in 0..=n {
        for q2 in 0..=n {
            for b in 0..2usize {
                let from = state_index(n, q1, q2, b);
                let mut push = |(t1, t2, tb): (usize, usize, usize), rate: f64| {
                    if rate > 0.0 {
                        rows[from].push((state_index(n, t1, t2, tb) as u32, rate));
                        exit[from] += rate;
                    }
                };
                // class-1 arrival
                if q1 >= c1 && q2 == 0 && b == 0 {
                    push((q1, 0, 1), spec.lambda1);
                } else if q1 < n {
                    push((q1 + 1, q2, b), spec.lambda1);
                }
                // class-1 completion
                if q1 >= 1 {
                    push((q1 - 1, q2, b), spec.mu1);
                }
                // class-2 arrival
                if q2 < n {
                    push((q1, q2 + 1, b), spec.lambda2);
                }
                // class-2 completion
                if q2 >= 1 {
                    if q2 == 1 && b == 0 {
                        push(compose_transfer(q1), spec.mu2);
                    } else {
                        push((q1, q2 - 1, b), spec.mu2);
                    }
                }
                // transfer-service completion (only served while q2 = 0)
                if b == 1 && q2 == 0 {
                    push(compose_transfer(q1), spec.mu12);
                }
            }
        }
    }
    Ok(CtmcGenerator {
        spec: *spec,
        n,
        rows,
        exit,
    })
}

impl CtmcGenerator {
    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    /// Row sums of the full generator matrix are zero by construction:
    /// the diagonal is minus the accumulated exit rate.
    pub fn exit_rate(&self, idx: usize) -> f64 {
        self.exit[idx]
    }

    pub fn transitions(&self, q1: usize, q2: usize, b: usize) -> Vec<((usize, usize, usize), f64)> {
        let from = state_index(self.n, q1, q2, b);
        self.rows[from]
            .iter()
            .map(|(to, rate)| {
                let to = *to as usize;
                let b = to % 2;
                let rest = to / 2;
                ((rest / (self.n + 1), rest % (self.n + 1), b), *rate)
            })
            .collect()
    }
}

/// Stationary distribution over `(q1, q2, b)` up to the truncation cap.
#[derive(Debug, Clone)]
pub struct StationaryTable {
    pub spec: CtmcSpec,
    n: usize,
    probs: Vec<f64>,
    pub iterations: u64,
    /// Mass within two states of either queue cap; values above 1e-6
    /// mean the truncation visibly distorts the solution.
    pub truncation_mass: f64,
}

/// Solves `nu G = 0` by uniformization and power iteration from the empty
/// state, stopping when successive iterates differ by less than 1e-12 in
/// total variation.
pub fn stationary_solve(generator: &CtmcGenerator) -> Result<StationaryTable> {
    const TV_TOL: f64 = 1e-12;
    const MAX_ITERATIONS: u64 = 2_000_000;

    let count = generator.state_count();
    let uniformization = generator.exit.iter().fold(0.0f64, |a, b| a.max(*b));
    if uniformization <= 0.0 {
        return Err(Error::Config("generator has no transitions".into()));
    }
    let mut current = vec![0.0f64; count];
    current[state_index(generator.n, 0, 0, 0)] = 1.0;
    let mut next = vec![0.0f64; count];

    let mut iterations = 0u64;
    loop {
        iterations += 1;
        // nu P where P = I + G / Lambda
        for (idx, mass) in current.iter().enumerate() {
            next[idx] += mass * (1.0 - generator.exit[idx] / uniformization);
            if *mass > 0.0 {
                for (to, rate) in &generator.rows[idx] {
                    next[*to as usize] += mass * rate / uniformization;
                }
            }
        }
        let tv: f64 = current
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * 0.5;
        std::mem::swap(&mut current, &mut next);
        next.iter_mut().for_each(|v| *v = 0.0);
        if tv < TV_TOL {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::CtmcConvergence {
                iterations,
                residual: tv,
            });
        }
        if iterations.is_multiple_of(1024) {
            let total: f64 = current.iter().sum();
            current.iter_mut().for_each(|v| *v /= total);
        }
    }
    let total: f64 = current.iter().sum();
    current.iter_mut().for_each(|v| *v /= total);

    let n = generator.n;
    let mut truncation_mass = 0.0;
    for q1 in 0..=n {
        for q2 in 0..=n {
            if q1 + 2 >= n || q2 + 2 >= n {
                for b in 0..2 {
                    truncation_mass += current[state_index(n, q1, q2, b)];
                }
            }
        }
    }
    Ok(StationaryTable {
        spec: generator.spec,
        n,
        probs: current,
        iterations,
        truncation_mass,
    })
}

impl StationaryTable {
    pub fn probability(&self, q1: usize, q2: usize, b: usize) -> f64 {
        self.probs[state_index(self.n, q1, q2, b)]
    }

    /// Marginal law of `Q_i` for `station` 0 or 1.
    pub fn marginal(&self, station: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        for q1 in 0..=self.n {
            for q2 in 0..=self.n {
                for b in 0..2 {
                    let q = if station == 0 { q1 } else { q2 };
                    out[q] += self.probability(q1, q2, b);
                }
            }
        }
        out
    }

    /// Effective traffic intensity from the stationary law:
    /// `rho*_i = 1 - P(Q_i = 0)`.
    pub fn oracle_rho_star(&self, station: usize) -> f64 {
        1.0 - self.marginal(station)[0]
    }

    /// Mass on states violating the no-instantaneous-switch predicate
    /// (`q1 > c1`, `q2 = 0`, `b = 0`); must be zero.
    pub fn forbidden_mass(&self) -> f64 {
        let c1 = self.spec.c1 as usize;
        ((c1 + 1)..=self.n)
            .map(|q1| self.probability(q1, 0, 0))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{make_stream, DistributionSpec};

    fn reference_spec() -> CtmcSpec {
        CtmcSpec {
            lambda1: 1.2,
            lambda2: 0.5,
            mu1: 1.0,
            mu2: 1.0,
            mu12: 1.0,
            c1: 1,
            truncation: 200,
        }
    }

    #[test]
    fn lindley_fast_service_never_waits() {
        let arrivals = DistributionSpec::Deterministic { value: 1.0 };
        let services = DistributionSpec::Deterministic { value: 0.5 };
        let mut a = make_stream(&arrivals, 1, 0).unwrap();
        let mut s = make_stream(&services, 1, 1).unwrap();
        assert!(lindley_waiting(&mut a, &mut s, 1000)
            .iter()
            .all(|w| *w == 0.0));
    }

    #[test]
    fn lindley_critical_deterministic_boundary() {
        let arrivals = DistributionSpec::Deterministic { value: 1.0 };
        let services = DistributionSpec::Deterministic { value: 1.0 };
        let mut a = make_stream(&arrivals, 1, 0).unwrap();
        let mut s = make_stream(&services, 1, 1).unwrap();
        assert!(lindley_waiting(&mut a, &mut s, 1000)
            .iter()
            .all(|w| *w == 0.0));
    }

    #[test]
    fn lindley_mm1_mean_wait() {
        let lambda = 0.5;
        let mu = 1.0;
        let arrivals = DistributionSpec::Exponential { mean: 1.0 / lambda };
        let services = DistributionSpec::Exponential { mean: 1.0 / mu };
        let mut a = make_stream(&arrivals, 17, 0).unwrap();
        let mut s = make_stream(&services, 17, 1).unwrap();
        let waits = lindley_waiting(&mut a, &mut s, 1_000_000);
        let mean = waits.iter().sum::<f64>() / waits.len() as f64;
        let expected = mm1_mean_wait(lambda, mu);
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean wait {mean} vs {expected}"
        );
    }

    #[test]
    fn generator_rows_and_transitions() {
        let spec = CtmcSpec {
            truncation: 20,
            ..reference_spec()
        };
        let g = cascade_ctmc_generator(&spec).unwrap();

        // empty system: only the two arrival transitions
        let from_empty = g.transitions(0, 0, 0);
        assert_eq!(from_empty.len(), 2);
        assert!(from_empty.contains(&((1, 0, 0), 1.2)));
        assert!(from_empty.contains(&((0, 1, 0), 0.5)));

        // arrival at the switch condition transfers immediately
        let ts = g.transitions(1, 0, 0);
        assert!(ts.contains(&((1, 0, 1), 1.2)), "transitions {ts:?}");

        // class-2 completion that lands on an occupied slot does not
        // trigger another transfer
        let ts = g.transitions(3, 1, 1);
        assert!(ts.contains(&((3, 0, 1), 1.0)), "transitions {ts:?}");

        // class-2 completion emptying station 2 with q1 > c1 composes one
        let ts = g.transitions(3, 1, 0);
        assert!(ts.contains(&((2, 0, 1), 1.0)), "transitions {ts:?}");
    }

    #[test]
    fn stationary_mass_concentrates_when_arrivals_vanish() {
        let spec = CtmcSpec {
            lambda1: 1e-8,
            lambda2: 1e-8,
            mu1: 1.0,
            mu2: 1.0,
            mu12: 1.0,
            c1: 1,
            truncation: 15,
        };
        let table = stationary_solve(&cascade_ctmc_generator(&spec).unwrap()).unwrap();
        assert!(table.probability(0, 0, 0) > 0.9999);
        assert!((table.total_mass() - 1.0).abs() < 1e-10);
        assert!(table.oracle_rho_star(0) < 1e-4);
        assert!(table.oracle_rho_star(1) < 1e-4);
    }

    #[test]
    fn generator_is_conservative_with_nonnegative_rates() {
        let spec = CtmcSpec {
            truncation: 15,
            ..reference_spec()
        };
        let g = cascade_ctmc_generator(&spec).unwrap();
        for q1 in 0..=15 {
            for q2 in 0..=15 {
                for b in 0..2 {
                    let ts = g.transitions(q1, q2, b);
                    let total: f64 = ts.iter().map(|(_, r)| *r).sum();
                    assert!(ts.iter().all(|(_, r)| *r > 0.0));
                    let idx = (q1 * 16 + q2) * 2 + b;
                    assert!((total - g.exit_rate(idx)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn decoupled_system_factorizes_into_mm1_marginals() {
        // mu12 = 0 and a threshold far beyond reachable mass decouple the
        // stations into independent M/M/1 queues
        let spec = CtmcSpec {
            lambda1: 0.5,
            lambda2: 0.6,
            mu1: 1.0,
            mu2: 1.0,
            mu12: 0.0,
            c1: 49,
            truncation: 60,
        };
        let table = stationary_solve(&cascade_ctmc_generator(&spec).unwrap()).unwrap();
        let m1 = mm1_truncated_distribution(spec.lambda1, spec.mu1, 60);
        let m2 = mm1_truncated_distribution(spec.lambda2, spec.mu2, 60);
        for q1 in 0..=60 {
            for q2 in 0..=60 {
                let joint = table.probability(q1, q2, 0) + table.probability(q1, q2, 1);
                assert!(
                    (joint - m1[q1] * m2[q2]).abs() < 1e-8,
                    "q1={q1} q2={q2}: {joint} vs {}",
                    m1[q1] * m2[q2]
                );
            }
        }
        assert!((table.oracle_rho_star(0) - 0.5).abs() < 1e-8);
        assert!((table.oracle_rho_star(1) - 0.6).abs() < 1e-8);
    }

    #[test]
    fn reference_instance_solves_cleanly() {
        let table = stationary_solve(
            &cascade_ctmc_generator(&CtmcSpec {
                truncation: 100,
                ..reference_spec()
            })
            .unwrap(),
        )
        .unwrap();
        assert!((table.total_mass() - 1.0).abs() < 1e-10);
        assert_eq!(table.forbidden_mass(), 0.0);
        assert!(table.truncation_mass < 1e-6);

        // station 2 stays an autonomous M/M/1
        let m2 = mm1_truncated_distribution(0.5, 1.0, 100);
        let marginal = table.marginal(1);
        for q in 0..=100 {
            assert!((marginal[q] - m2[q]).abs() < 1e-8, "q={q}");
        }
        let rho_star_1 = table.oracle_rho_star(0);
        assert!(
            rho_star_1 > 0.5 && rho_star_1 < 1.0,
            "rho*_1 = {rho_star_1}"
        );
    }
}
