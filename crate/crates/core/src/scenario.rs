//! Scenario files: the user surface of the harness.
//!
//! A scenario is one TOML document naming the model kind, the stations,
//! and the experiment parameters. Example:
//!
//! ```toml
//! name = "reference"
//! model = "simulate"
//! horizon = 1e6
//! replications = 20
//! seed = 20240601
//!
//! [[station]]
//! arrival = { family = "exponential", rate = 1.2 }
//! service = { family = "exponential", rate = 1.0 }
//! threshold = 1
//! overflow = { family = "exponential", rate = 1.0 }
//!
//! [[station]]
//! arrival = { family = "exponential", rate = 0.5 }
//! service = { family = "exponential", rate = 1.0 }
//! ```
//!
//! Distribution tables accept `mean` or `rate` (exactly one) for the
//! scale families, plus family-specific parameters (`shape`; `low`/`high`;
//! `value`; `mu`/`sigma`; `probs`/`rates`). Validation reports every
//! violation at once, naming the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{StationConfig, SystemConfig, TransferRule};
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::sim::DEFAULT_EVENT_CAP;
use crate::stability::DEFAULT_BOUNDARY_EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Simulate,
    Ctmc,
    Stability,
    Sweep,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Simulate => "simulate",
            Model::Ctmc => "ctmc",
            Model::Stability => "stability",
            Model::Sweep => "sweep",
        })
    }
}

/// One swept parameter: a path into the configuration plus the values to
/// visit, given either explicitly or as `from`/`to`/`step`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub config: SystemConfig,
    pub horizon: f64,
    pub replications: usize,
    pub warmup_fraction: f64,
    pub batches: usize,
    pub event_cap: u64,
    pub event_log: bool,
    pub out_dir: PathBuf,
    pub epsilon: f64,
    pub sweep: Option<SweepAxis>,
    pub ctmc_truncation: Option<u32>,
    /// Admissibility warnings collected at load time; runs proceed.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------
// raw document shape
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    model: Model,
    horizon: f64,
    replications: Option<usize>,
    seed: Option<u64>,
    warmup: Option<f64>,
    batches: Option<usize>,
    event_cap: Option<u64>,
    event_log: Option<bool>,
    out_dir: Option<PathBuf>,
    epsilon: Option<f64>,
    initial_queues: Option<Vec<u64>>,
    #[serde(default, rename = "station")]
    stations: Vec<RawStation>,
    ctmc: Option<RawCtmc>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStation {
    arrival: RawDist,
    service: RawDist,
    threshold: Option<u64>,
    overflow: Option<RawDist>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCtmc {
    truncation: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: String,
    values: Option<Vec<f64>>,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    family: String,
    mean: Option<f64>,
    rate: Option<f64>,
    shape: Option<u32>,
    low: Option<f64>,
    high: Option<f64>,
    value: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    probs: Option<Vec<f64>>,
    rates: Option<Vec<f64>>,
}

struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, msg: String) {
        self.0.push(msg);
    }
}

fn scale_parameter(raw: &RawDist, at: &str, errs: &mut Violations) -> Option<f64> {
    match (raw.mean, raw.rate) {
        (Some(mean), None) => Some(mean),
        (None, Some(rate)) => {
            if rate > 0.0 {
                Some(1.0 / rate)
            } else {
                errs.push(format!("{at}.rate: must be > 0, got {rate}"));
                None
            }
        }
        (Some(_), Some(_)) => {
            errs.push(format!("{at}: give either mean or rate, not both"));
            None
        }
        (None, None) => {
            errs.push(format!("{at}: needs mean or rate"));
            None
        }
    }
}

fn convert_dist(raw: &RawDist, at: &str, errs: &mut Violations) -> Option<DistributionSpec> {
    let reject_scale = |errs: &mut Violations| {
        if raw.mean.is_some() || raw.rate.is_some() {
            errs.push(format!("{at}: {} takes no mean/rate field", raw.family));
        }
    };
    let spec = match raw.family.as_str() {
        "exponential" => DistributionSpec::Exponential {
            mean: scale_parameter(raw, at, errs)?,
        },
        "erlang" => {
            let Some(shape) = raw.shape else {
                errs.push(format!("{at}.shape: required for erlang"));
                return None;
            };
            DistributionSpec::Erlang {
                shape,
                mean: scale_parameter(raw, at, errs)?,
            }
        }
        "hyperexponential" => {
            reject_scale(errs);
            let (Some(probs), Some(rates)) = (raw.probs.clone(), raw.rates.clone()) else {
                errs.push(format!("{at}: hyperexponential needs probs and rates"));
                return None;
            };
            DistributionSpec::Hyperexponential { probs, rates }
        }
        "uniform" => {
            reject_scale(errs);
            let (Some(low), Some(high)) = (raw.low, raw.high) else {
                errs.push(format!("{at}: uniform needs low and high"));
                return None;
            };
            DistributionSpec::Uniform { low, high }
        }
        "deterministic" => {
            let value = match (raw.value, raw.mean, raw.rate) {
                (Some(v), None, None) => v,
                (None, _, _) => scale_parameter(raw, at, errs)?,
                _ => {
                    errs.push(format!("{at}: give value, mean, or rate (one of them)"));
                    return None;
                }
            };
            DistributionSpec::Deterministic { value }
        }
        "lognormal" => {
            reject_scale(errs);
            let (Some(mu), Some(sigma)) = (raw.mu, raw.sigma) else {
                errs.push(format!("{at}: lognormal needs mu and sigma"));
                return None;
            };
            DistributionSpec::Lognormal { mu, sigma }
        }
        other => {
            errs.push(format!(
                "{at}.family: unknown family `{other}` (expected exponential, erlang, \
                 hyperexponential, uniform, deterministic, or lognormal)"
            ));
            return None;
        }
    };
    if let Err(e) = spec.validate() {
        errs.push(format!("{at}: {e}"));
        return None;
    }
    Some(spec)
}

/// Parses and validates a scenario document. `fallback_name` seeds the
/// scenario name when the file does not set one.
pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text)?;
    let mut errs = Violations(Vec::new());

    let station_count = raw.stations.len();
    if station_count == 0 {
        errs.push("at least one [[station]] is required".into());
    }
    let mut stations = Vec::with_capacity(station_count);
    for (idx, st) in raw.stations.iter().enumerate() {
        let at = format!("station.{}", idx + 1);
        let arrival = convert_dist(&st.arrival, &format!("{at}.arrival"), &mut errs);
        let service = convert_dist(&st.service, &format!("{at}.service"), &mut errs);
        let last = idx + 1 == station_count;
        let transfer = if last {
            if st.threshold.is_some() || st.overflow.is_some() {
                errs.push(format!(
                    "{at}: the last station takes no threshold or overflow law"
                ));
            }
            None
        } else {
            let threshold = match st.threshold {
                Some(c) if c >= 1 => Some(c),
                Some(c) => {
                    errs.push(format!("{at}.threshold: must be >= 1, got {c}"));
                    None
                }
                None => {
                    errs.push(format!("{at}.threshold: required (station is not last)"));
                    None
                }
            };
            let overflow = match &st.overflow {
                Some(o) => convert_dist(o, &format!("{at}.overflow"), &mut errs),
                None => {
                    errs.push(format!("{at}.overflow: required (station is not last)"));
                    None
                }
            };
            match (threshold, overflow) {
                (Some(threshold), Some(service)) => Some(TransferRule { threshold, service }),
                _ => None,
            }
        };
        if let (Some(arrival), Some(service)) = (arrival, service) {
            stations.push(StationConfig {
                arrival,
                service,
                transfer,
            });
        }
    }

    if !(raw.horizon.is_finite() && raw.horizon > 0.0) {
        errs.push(format!(
            "horizon: must be finite and > 0, got {}",
            raw.horizon
        ));
    }
    let replications = raw.replications.unwrap_or(1);
    if replications < 1 {
        errs.push("replications: must be >= 1".into());
    }
    let warmup_fraction = raw.warmup.unwrap_or(0.1);
    if !(0.0..1.0).contains(&warmup_fraction) {
        errs.push(format!("warmup: must lie in [0, 1), got {warmup_fraction}"));
    }
    let batches = raw.batches.unwrap_or(32);
    if batches < 2 {
        errs.push("batches: must be >= 2".into());
    }
    if let Some(q) = &raw.initial_queues {
        if q.len() != station_count {
            errs.push(format!(
                "initial_queues: has {} entries for {station_count} stations",
                q.len()
            ));
        }
    }

    if raw.model == Model::Ctmc && raw.ctmc.is_none() {
        errs.push("model = \"ctmc\" needs a [ctmc] table with a truncation".into());
    }
    if raw.model == Model::Sweep && raw.sweep.is_none() {
        errs.push("model = \"sweep\" needs a [sweep] table".into());
    }

    let sweep = match &raw.sweep {
        None => None,
        Some(s) => {
            let values = match (&s.values, s.from, s.to, s.step) {
                (Some(values), None, None, None) if !values.is_empty() => values.clone(),
                (None, Some(from), Some(to), Some(step)) if step > 0.0 && to >= from => {
                    let count = ((to - from) / step).round() as usize + 1;
                    (0..count).map(|j| from + j as f64 * step).collect()
                }
                _ => {
                    errs.push(
                        "sweep: give either a non-empty `values` list or `from`/`to`/`step`".into(),
                    );
                    Vec::new()
                }
            };
            Some(SweepAxis {
                parameter: s.parameter.clone(),
                values,
            })
        }
    };

    if stations.len() == station_count && station_count > 0 {
        // parameter paths can only be checked against a complete config
        if let Some(axis) = &sweep {
            if let Err(e) = parse_parameter_path(&axis.parameter, station_count) {
                errs.push(format!("sweep.parameter: {e}"));
            }
        }
    }

    if !errs.0.is_empty() {
        return Err(Error::ScenarioValidation(errs.0));
    }

    let config = SystemConfig {
        stations,
        seed: raw.seed.unwrap_or(0),
        initial_queues: raw.initial_queues.unwrap_or_default(),
    };
    config.validate()?;
    let warnings = config.admissibility_warnings();

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
        model: raw.model,
        config,
        horizon: raw.horizon,
        replications,
        warmup_fraction,
        batches,
        event_cap: raw.event_cap.unwrap_or(DEFAULT_EVENT_CAP),
        event_log: raw.event_log.unwrap_or(false),
        out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        epsilon: raw.epsilon.unwrap_or(DEFAULT_BOUNDARY_EPSILON),
        sweep,
        ctmc_truncation: raw.ctmc.map(|c| c.truncation),
        warnings,
    })
}

/// Loads a scenario from disk; the file stem is the fallback name.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &fallback)
}

/// A parameter path a sweep can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    ArrivalRate(usize),
    ServiceRate(usize),
    OverflowRate(usize),
    Threshold(usize),
}

/// Parses paths of the form `station.<n>.arrival.rate`,
/// `station.<n>.service.rate`, `station.<n>.overflow.rate`, and
/// `station.<n>.threshold` (`<n>` 1-based).
pub fn parse_parameter_path(path: &str, station_count: usize) -> Result<SweepTarget> {
    let parts: Vec<&str> = path.split('.').collect();
    let invalid = || {
        Error::Config(format!(
            "parameter path `{path}` not recognized; expected \
             station.<n>.{{arrival|service|overflow}}.rate or station.<n>.threshold"
        ))
    };
    if parts.len() < 3 || parts[0] != "station" {
        return Err(invalid());
    }
    let n: usize = parts[1].parse().map_err(|_| invalid())?;
    if n < 1 || n > station_count {
        return Err(Error::Config(format!(
            "parameter path `{path}`: station {n} out of range (1..={station_count})"
        )));
    }
    let idx = n - 1;
    match (parts.len(), parts[2]) {
        (3, "threshold") => {
            if idx + 1 == station_count {
                Err(Error::Config(format!(
                    "parameter path `{path}`: the last station has no threshold"
                )))
            } else {
                Ok(SweepTarget::Threshold(idx))
            }
        }
        (4, "arrival") if parts[3] == "rate" => Ok(SweepTarget::ArrivalRate(idx)),
        (4, "service") if parts[3] == "rate" => Ok(SweepTarget::ServiceRate(idx)),
        (4, "overflow") if parts[3] == "rate" => {
            if idx + 1 == station_count {
                Err(Error::Config(format!(
                    "parameter path `{path}`: the last station has no overflow law"
                )))
            } else {
                Ok(SweepTarget::OverflowRate(idx))
            }
        }
        _ => Err(invalid()),
    }
}

/// Returns a copy of `config` with the swept parameter set to `value`.
pub fn apply_parameter(config: &SystemConfig, path: &str, value: f64) -> Result<SystemConfig> {
    let target = parse_parameter_path(path, config.station_count())?;
    let mut out = config.clone();
    match target {
        SweepTarget::ArrivalRate(i) => {
            out.stations[i].arrival = out.stations[i].arrival.with_rate(value)?;
        }
        SweepTarget::ServiceRate(i) => {
            out.stations[i].service = out.stations[i].service.with_rate(value)?;
        }
        SweepTarget::OverflowRate(i) => {
            let rule = out.stations[i].transfer.as_mut().unwrap();
            rule.service = rule.service.with_rate(value)?;
        }
        SweepTarget::Threshold(i) => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "threshold values must be integers >= 1, got {value}"
                )));
            }
            out.stations[i].transfer.as_mut().unwrap().threshold = value as u64;
        }
    }
    Ok(out)
}
