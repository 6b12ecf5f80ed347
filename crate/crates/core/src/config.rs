//! Full description of a k-station cascade system.

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};

/// Switching rule of a station that can push work downstream: once its
/// queue exceeds `threshold` while the next station is empty, one waiting
/// customer moves down and is served there under `service`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRule {
    pub threshold: u64,
    pub service: DistributionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub arrival: DistributionSpec,
    pub service: DistributionSpec,
    /// Present on every station except the last.
    pub transfer: Option<TransferRule>,
}

/// A k-station cascade: stations in series, each with exogenous renewal
/// arrivals, plus the transfer rules between adjacent stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub stations: Vec<StationConfig>,
    pub seed: u64,
    /// Initial queue lengths; empty means all zero. The simulator applies
    /// the switching rule once at time zero, so a configured state that
    /// violates it is normalized before the run starts.
    #[serde(default)]
    pub initial_queues: Vec<u64>,
}

impl SystemConfig {
    /// Two-station exponential system from rates; the common benchmark shape.
    pub fn exponential_two_station(
        lambda1: f64,
        mu1: f64,
        mu12: f64,
        lambda2: f64,
        mu2: f64,
        c1: u64,
        seed: u64,
    ) -> Self {
        SystemConfig {
            stations: vec![
                StationConfig {
                    arrival: DistributionSpec::exponential_rate(lambda1),
                    service: DistributionSpec::exponential_rate(mu1),
                    transfer: Some(TransferRule {
                        threshold: c1,
                        service: DistributionSpec::exponential_rate(mu12),
                    }),
                },
                StationConfig {
                    arrival: DistributionSpec::exponential_rate(lambda2),
                    service: DistributionSpec::exponential_rate(mu2),
                    transfer: None,
                },
            ],
            seed,
            initial_queues: Vec::new(),
        }
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn arrival_rate(&self, i: usize) -> f64 {
        self.stations[i].arrival.rate()
    }

    pub fn service_rate(&self, i: usize) -> f64 {
        self.stations[i].service.rate()
    }

    /// Service rate of the transfer class leaving station `i`.
    pub fn transfer_rate(&self, i: usize) -> Option<f64> {
        self.stations[i].transfer.as_ref().map(|t| t.service.rate())
    }

    pub fn threshold(&self, i: usize) -> Option<u64> {
        self.stations[i].transfer.as_ref().map(|t| t.threshold)
    }

    /// Nominal traffic intensity `lambda_i / mu_i`, ignoring transfers.
    pub fn nominal_rho(&self, i: usize) -> f64 {
        self.arrival_rate(i) / self.service_rate(i)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.stations.len();
        if k == 0 {
            return Err(Error::Config("at least one station is required".into()));
        }
        if !self.initial_queues.is_empty() && self.initial_queues.len() != k {
            return Err(Error::Config(format!(
                "initial_queues has {} entries for {k} stations",
                self.initial_queues.len()
            )));
        }
        for (i, st) in self.stations.iter().enumerate() {
            st.arrival.validate()?;
            st.service.validate()?;
            let last = i + 1 == k;
            match (&st.transfer, last) {
                (None, false) => {
                    return Err(Error::Config(format!(
                        "station {} needs a transfer rule (only the last station has none)",
                        i + 1
                    )))
                }
                (Some(_), true) => {
                    return Err(Error::Config(format!(
                        "last station {} must not have a transfer rule",
                        i + 1
                    )))
                }
                (Some(t), false) => {
                    if t.threshold < 1 {
                        return Err(Error::Config(format!(
                            "station {}: threshold must be >= 1",
                            i + 1
                        )));
                    }
                    t.service.validate()?;
                }
                (None, true) => {}
            }
        }
        Ok(())
    }

    /// Projection onto the last `k - start` stations. Station `start`
    /// (0-based) becomes the top of the subsystem and receives no inflow
    /// from above; everything else, including the seed, carries over.
    pub fn subsystem(&self, start: usize) -> Result<SystemConfig> {
        if start >= self.stations.len() {
            return Err(Error::StationIndex {
                index: start,
                count: self.stations.len(),
            });
        }
        Ok(SystemConfig {
            stations: self.stations[start..].to_vec(),
            seed: self.seed,
            initial_queues: if self.initial_queues.is_empty() {
                Vec::new()
            } else {
                self.initial_queues[start..].to_vec()
            },
        })
    }

    /// Admissibility warnings for laws outside the spread-out conditions.
    pub fn admissibility_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for (i, st) in self.stations.iter().enumerate() {
            let report = st.arrival.check_spread_out();
            if !report.admissible {
                warnings.push(format!(
                    "station {} arrival law ({}) is not spread out \
                     (unbounded support: {}, density component: {}); \
                     the stability characterization is not guaranteed",
                    i + 1,
                    st.arrival.family_name(),
                    report.unbounded_support,
                    report.density_component,
                ));
            }
        }
        warnings
    }
}
