//! Counting processes and time integrals accumulated along one sample
//! path, and the steady-state estimators built on them.
//!
//! A [`TrajectoryRecord`] carries, for each station `i`, the arrival and
//! departure counts `A_i`/`D_i`, the transfer-class counts
//! `A_{i|(i+1)}`/`D_{i|(i+1)}`, and the exact time integrals
//!
//! - `B_i`: time with `Q_i > 0` (busy time),
//! - `I_i`: time with `Q_i = 0` (accumulated directly, not derived),
//! - `B_{i|(i+1)}`: time the transferred customer is actually in service,
//! - `J_{i|(i+1)}`: time with `Q_i > c_i` while `Q_{i+1} = 0`,
//! - `K_i`: time with `Q_i <= c_i`,
//! - the occupancy integral of `Q_i`.
//!
//! Integrals are additionally split over a fixed grid of time windows so
//! that estimators can discard a warm-up prefix and form batch-means
//! confidence intervals without retaining the event stream.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::stats;

/// Point estimate with a batch-means confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
    pub batches: usize,
    pub warmup_fraction: f64,
}

/// Estimator settings: warm-up fraction discarded and batch count.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub warmup_fraction: f64,
    pub batches: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            warmup_fraction: 0.1,
            batches: 32,
        }
    }
}

/// Outcome of the transfer-departure rate bound check at one station pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OverflowBound {
    /// Observed transfer departure rate `D_{i|(i+1)}(T) / T`. In an
    /// unstable regime this is a path rate, not a limiting rate.
    pub path_rate: f64,
    /// Estimated service rate of transferred customers.
    pub service_rate: f64,
    /// `service_rate * idle fraction of station i+1`.
    pub bound: f64,
    /// Tolerance granted: three half-widths of the idle estimate, scaled.
    pub tolerance: f64,
    /// `bound + tolerance - path_rate`.
    pub slack: f64,
    pub holds: bool,
}

/// One window of the accumulation grid.
#[derive(Debug, Clone, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    /// Time actually covered (less than `end - start` on truncated runs).
    pub duration: f64,
    /// Busy time per station.
    pub busy: Vec<f64>,
    /// Time at queue length `q` per station, `q` capped at the histogram cap.
    pub occupancy: Vec<Vec<f64>>,
}

/// Counting processes and time integrals over one trajectory segment.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub stations: usize,
    pub start_time: f64,
    pub end_time: f64,
    /// True when the run stopped at the event cap instead of the horizon.
    pub truncated: bool,
    pub event_count: u64,

    pub arrivals: Vec<u64>,
    pub departures: Vec<u64>,
    pub transfer_arrivals: Vec<u64>,
    pub transfer_departures: Vec<u64>,

    pub busy_time: Vec<f64>,
    pub idle_time: Vec<f64>,
    pub queue_time_integral: Vec<f64>,
    pub transfer_busy_time: Vec<f64>,
    pub switch_pressure_time: Vec<f64>,
    pub at_or_below_threshold_time: Vec<f64>,

    pub initial_queues: Vec<u64>,
    pub initial_transfer_present: Vec<bool>,
    pub final_queues: Vec<u64>,
    pub final_transfer_present: Vec<bool>,

    pub occupancy_cap: usize,
    pub windows: Vec<Window>,

    #[serde(skip)]
    thresholds: Vec<u64>,
    #[serde(skip)]
    cursor: f64,
    #[serde(skip)]
    window_index: usize,
}

impl TrajectoryRecord {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        stations: usize,
        thresholds: Vec<u64>,
        start_time: f64,
        planned_end: f64,
        n_windows: usize,
        occupancy_cap: usize,
        initial_queues: Vec<u64>,
        initial_transfer_present: Vec<bool>,
    ) -> Self {
        let pairs = stations.saturating_sub(1);
        let width = (planned_end - start_time) / n_windows as f64;
        let windows = (0..n_windows)
            .map(|w| Window {
                start: start_time + w as f64 * width,
                end: if w + 1 == n_windows {
                    planned_end
                } else {
                    start_time + (w + 1) as f64 * width
                },
                duration: 0.0,
                busy: vec![0.0; stations],
                occupancy: vec![vec![0.0; occupancy_cap + 1]; stations],
            })
            .collect();
        TrajectoryRecord {
            stations,
            start_time,
            end_time: start_time,
            truncated: false,
            event_count: 0,
            arrivals: vec![0; stations],
            departures: vec![0; stations],
            transfer_arrivals: vec![0; pairs],
            transfer_departures: vec![0; pairs],
            busy_time: vec![0.0; stations],
            idle_time: vec![0.0; stations],
            queue_time_integral: vec![0.0; stations],
            transfer_busy_time: vec![0.0; pairs],
            switch_pressure_time: vec![0.0; pairs],
            at_or_below_threshold_time: vec![0.0; pairs],
            final_queues: initial_queues.clone(),
            final_transfer_present: initial_transfer_present.clone(),
            initial_queues,
            initial_transfer_present,
            occupancy_cap,
            windows,
            thresholds,
            cursor: start_time,
            window_index: 0,
        }
    }

    /// Advances the integrals to `t` with the state held constant.
    pub(crate) fn advance(&mut self, t: f64, queues: &[u64], transfer_present: &[bool]) {
        while self.cursor < t {
            let window_end = self.windows[self.window_index].end;
            let seg_end = if t < window_end || self.window_index + 1 == self.windows.len() {
                t
            } else {
                window_end
            };
            let dt = seg_end - self.cursor;
            if dt > 0.0 {
                self.accumulate(dt, queues, transfer_present);
            }
            self.cursor = seg_end;
            if seg_end >= window_end && self.window_index + 1 < self.windows.len() {
                self.window_index += 1;
            }
        }
    }

    fn accumulate(&mut self, dt: f64, queues: &[u64], transfer_present: &[bool]) {
        let win = &mut self.windows[self.window_index];
        win.duration += dt;
        for (i, &q) in queues.iter().enumerate() {
            if q > 0 {
                self.busy_time[i] += dt;
                win.busy[i] += dt;
            } else {
                self.idle_time[i] += dt;
            }
            self.queue_time_integral[i] += q as f64 * dt;
            let bucket = (q as usize).min(self.occupancy_cap);
            win.occupancy[i][bucket] += dt;
        }
        for i in 0..self.stations.saturating_sub(1) {
            let next_empty = queues[i + 1] == 0;
            if transfer_present[i] && next_empty {
                self.transfer_busy_time[i] += dt;
            }
            if queues[i] > self.thresholds[i] && next_empty {
                self.switch_pressure_time[i] += dt;
            }
            if queues[i] <= self.thresholds[i] {
                self.at_or_below_threshold_time[i] += dt;
            }
        }
    }

    pub(crate) fn count_event(&mut self) {
        self.event_count += 1;
    }
    pub(crate) fn count_arrival(&mut self, i: usize) {
        self.arrivals[i] += 1;
    }
    pub(crate) fn count_departure(&mut self, i: usize) {
        self.departures[i] += 1;
    }
    pub(crate) fn count_transfer_arrival(&mut self, i: usize) {
        self.transfer_arrivals[i] += 1;
    }
    pub(crate) fn count_transfer_departure(&mut self, i: usize) {
        self.transfer_departures[i] += 1;
    }

    pub(crate) fn finalize(&mut self, queues: &[u64], transfer_present: &[bool], truncated: bool) {
        self.end_time = self.cursor;
        self.truncated = truncated;
        self.final_queues = queues.to_vec();
        self.final_transfer_present = transfer_present.to_vec();
    }

    /// Covered time span `T` of this record.
    pub fn horizon(&self) -> f64 {
        self.end_time - self.start_time
    }

    /// Flow-balance reconstruction: `Q_i(0) + A_i - D_i - A_{i|(i+1)}`,
    /// which must equal the terminal `Q_i(T)` exactly.
    pub fn reconstructed_queue(&self, station: usize) -> i128 {
        let out = if station + 1 < self.stations {
            self.transfer_arrivals[station] as i128
        } else {
            0
        };
        self.initial_queues[station] as i128 + self.arrivals[station] as i128
            - self.departures[station] as i128
            - out
    }

    pub fn flow_balance_exact(&self) -> bool {
        (0..self.stations).all(|i| self.reconstructed_queue(i) == self.final_queues[i] as i128)
            && (0..self.stations.saturating_sub(1)).all(|i| {
                let occ = self.initial_transfer_present[i] as i128
                    + self.transfer_arrivals[i] as i128
                    - self.transfer_departures[i] as i128;
                occ == self.final_transfer_present[i] as i128 && (0..=1).contains(&occ)
            })
    }

    fn postwarmup_windows(&self, warmup_fraction: f64) -> Result<&[Window]> {
        if !(0.0..1.0).contains(&warmup_fraction) {
            return Err(Error::Estimation(format!(
                "warm-up fraction must lie in [0, 1), got {warmup_fraction}"
            )));
        }
        let boundary = self.start_time + warmup_fraction * self.horizon();
        let tol = 1e-9 * self.horizon().max(1.0);
        let first = self
            .windows
            .iter()
            .position(|w| w.start >= boundary - tol)
            .ok_or_else(|| Error::Estimation("warm-up consumes the whole horizon".into()))?;
        Ok(&self.windows[first..])
    }

    /// Batch means over post-warm-up windows; `f(window) -> measure`.
    fn batched_fraction<F: Fn(&Window) -> f64>(
        &self,
        opts: &EstimatorOptions,
        f: F,
    ) -> Result<Estimate> {
        let windows: Vec<&Window> = self
            .postwarmup_windows(opts.warmup_fraction)?
            .iter()
            .filter(|w| w.duration > 0.0)
            .collect();
        if windows.len() < opts.batches || opts.batches < 2 {
            return Err(Error::Estimation(format!(
                "window too short: {} usable windows for {} batches",
                windows.len(),
                opts.batches
            )));
        }
        let total_measure: f64 = windows.iter().map(|w| f(w)).sum();
        let total_duration: f64 = windows.iter().map(|w| w.duration).sum();
        let base = windows.len() / opts.batches;
        let extra = windows.len() % opts.batches;
        let mut means = Vec::with_capacity(opts.batches);
        let mut at = 0;
        for b in 0..opts.batches {
            let len = base + usize::from(b < extra);
            let chunk = &windows[at..at + len];
            at += len;
            let m: f64 = chunk.iter().map(|w| f(w)).sum();
            let d: f64 = chunk.iter().map(|w| w.duration).sum();
            means.push(m / d);
        }
        Ok(Estimate {
            value: total_measure / total_duration,
            half_width: stats::batch_half_width(&means),
            batches: opts.batches,
            warmup_fraction: opts.warmup_fraction,
        })
    }

    /// Post-warm-up busy fraction without a confidence interval.
    pub fn busy_fraction(&self, station: usize, warmup_fraction: f64) -> Result<f64> {
        self.check_station(station)?;
        let windows = self.postwarmup_windows(warmup_fraction)?;
        let busy: f64 = windows.iter().map(|w| w.busy[station]).sum();
        let dur: f64 = windows.iter().map(|w| w.duration).sum();
        if dur <= 0.0 {
            return Err(Error::Estimation("empty post-warm-up window".into()));
        }
        Ok(busy / dur)
    }

    /// Effective traffic intensity of a station: post-warm-up time-average
    /// probability that the queue is non-empty, with a batch-means CI.
    pub fn effective_traffic_intensity(
        &self,
        station: usize,
        opts: &EstimatorOptions,
    ) -> Result<Estimate> {
        self.check_station(station)?;
        self.batched_fraction(opts, |w| w.busy[station])
    }

    /// Complement of [`Self::effective_traffic_intensity`] on the same window.
    pub fn idle_fraction(&self, station: usize, opts: &EstimatorOptions) -> Result<Estimate> {
        let busy = self.effective_traffic_intensity(station, opts)?;
        Ok(Estimate {
            value: 1.0 - busy.value,
            ..busy
        })
    }

    /// Terminal queue over horizon, `Q_i(T) / T`: the saturated-regime
    /// drift, near zero on any positive recurrent path.
    pub fn drift_estimate(&self, station: usize) -> f64 {
        self.final_queues[station] as f64 / self.horizon()
    }

    /// In-service Little's-law residual for station 1:
    /// `| (D_1/B_1) * rho*_1 - (A_1 - A_{1|2}) / T |`.
    ///
    /// Both sides estimate the class-1 departure rate in a stable regime.
    /// `None` when station 1 was never busy.
    pub fn little_residual(&self, opts: &EstimatorOptions) -> Option<f64> {
        if self.busy_time[0] <= 0.0 {
            return None;
        }
        let horizon = self.horizon();
        let mu_hat = self.departures[0] as f64 / self.busy_time[0];
        let rho_star = self.busy_fraction(0, opts.warmup_fraction).ok()?;
        let out = if self.stations > 1 {
            self.transfer_arrivals[0] as f64
        } else {
            0.0
        };
        let net_rate = (self.arrivals[0] as f64 - out) / horizon;
        Some((mu_hat * rho_star - net_rate).abs())
    }

    /// Checks the transfer departure rate bound
    /// `D_{i|(i+1)}/T <= mu_{i|(i+1)} * (idle fraction of station i+1)`,
    /// granting three idle-CI half-widths of tolerance.
    pub fn overflow_bound_check(
        &self,
        pair: usize,
        opts: &EstimatorOptions,
    ) -> Result<OverflowBound> {
        if pair + 1 >= self.stations {
            return Err(Error::StationIndex {
                index: pair,
                count: self.stations.saturating_sub(1),
            });
        }
        let path_rate = self.transfer_departures[pair] as f64 / self.horizon();
        let service_rate = if self.transfer_busy_time[pair] > 0.0 {
            self.transfer_departures[pair] as f64 / self.transfer_busy_time[pair]
        } else {
            0.0
        };
        let idle = self.idle_fraction(pair + 1, opts)?;
        let bound = service_rate * idle.value;
        let tolerance = 3.0 * service_rate * idle.half_width;
        let slack = bound + tolerance - path_rate;
        Ok(OverflowBound {
            path_rate,
            service_rate,
            bound,
            tolerance,
            slack,
            holds: slack >= 0.0,
        })
    }

    /// Post-warm-up time-average of `1(Q_i <= level)`. A strictly positive
    /// limit certifies tightness on average of the queue at this station.
    pub fn tightness_diagnostic(
        &self,
        station: usize,
        level: u64,
        opts: &EstimatorOptions,
    ) -> Result<Estimate> {
        self.check_station(station)?;
        let level = level as usize;
        if level >= self.occupancy_cap {
            return Err(Error::Estimation(format!(
                "tightness level {level} not resolved by the occupancy histogram (cap {})",
                self.occupancy_cap
            )));
        }
        self.batched_fraction(opts, |w| w.occupancy[station][..=level].iter().sum())
    }

    /// Appends a contiguous continuation segment of the same trajectory.
    pub fn append(&mut self, other: &TrajectoryRecord) -> Result<()> {
        if other.stations != self.stations {
            return Err(Error::Config(
                "cannot merge records of different systems".into(),
            ));
        }
        if (other.start_time - self.end_time).abs() > 1e-9
            || other.initial_queues != self.final_queues
            || other.initial_transfer_present != self.final_transfer_present
        {
            return Err(Error::Config(
                "records are not contiguous segments of one trajectory".into(),
            ));
        }
        self.end_time = other.end_time;
        self.truncated |= other.truncated;
        self.event_count += other.event_count;
        for i in 0..self.stations {
            self.arrivals[i] += other.arrivals[i];
            self.departures[i] += other.departures[i];
            self.busy_time[i] += other.busy_time[i];
            self.idle_time[i] += other.idle_time[i];
            self.queue_time_integral[i] += other.queue_time_integral[i];
        }
        for i in 0..self.stations.saturating_sub(1) {
            self.transfer_arrivals[i] += other.transfer_arrivals[i];
            self.transfer_departures[i] += other.transfer_departures[i];
            self.transfer_busy_time[i] += other.transfer_busy_time[i];
            self.switch_pressure_time[i] += other.switch_pressure_time[i];
            self.at_or_below_threshold_time[i] += other.at_or_below_threshold_time[i];
        }
        self.final_queues = other.final_queues.clone();
        self.final_transfer_present = other.final_transfer_present.clone();
        self.windows.extend(other.windows.iter().cloned());
        self.cursor = other.cursor;
        Ok(())
    }

    fn check_station(&self, station: usize) -> Result<()> {
        if station < self.stations {
            Ok(())
        } else {
            Err(Error::StationIndex {
                index: station,
                count: self.stations,
            })
        }
    }
}

/// One empirical-rate check of the modeling assumptions on a sample path.
#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    pub quantity: String,
    pub observed: f64,
    pub expected: f64,
    /// Standardized deviation; observations beyond ~3 flag a violation.
    pub z: f64,
}

/// Sample-path rate checks of the modeling assumptions: empirical
/// arrival rates against the configured rates and empirical service
/// rates against the laws. Large `z` values mean the run does not look
/// like the configured renewal inputs.
pub fn rate_checks(record: &TrajectoryRecord, config: &SystemConfig) -> Vec<RateCheck> {
    let horizon = record.horizon();
    let mut out = Vec::new();
    for i in 0..record.stations {
        let spec = &config.stations[i].arrival;
        let lambda = spec.rate();
        let observed = record.arrivals[i] as f64 / horizon;
        // renewal CLT: sd of the count rate ~ sqrt(lambda^3 var / T)
        let sd = (lambda.powi(3) * spec.variance() / horizon).sqrt();
        let z = if sd > 0.0 {
            (observed - lambda) / sd
        } else {
            0.0
        };
        out.push(RateCheck {
            quantity: format!("arrival_rate_{}", i + 1),
            observed,
            expected: lambda,
            z,
        });
        if record.busy_time[i] > 0.0 && record.departures[i] > 0 {
            let spec = &config.stations[i].service;
            let mu = spec.rate();
            let observed = record.departures[i] as f64 / record.busy_time[i];
            let sd = (mu.powi(3) * spec.variance() / record.busy_time[i]).sqrt();
            let z = if sd > 0.0 { (observed - mu) / sd } else { 0.0 };
            out.push(RateCheck {
                quantity: format!("service_rate_{}", i + 1),
                observed,
                expected: mu,
                z,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{StationConfig, SystemConfig};
    use crate::dist::DistributionSpec;
    use crate::sim::{run_trajectory, RunOptions};

    fn single_station(arrival_mean: f64, service_mean: f64, seed: u64) -> SystemConfig {
        SystemConfig {
            stations: vec![StationConfig {
                arrival: DistributionSpec::Exponential { mean: arrival_mean },
                service: DistributionSpec::Exponential { mean: service_mean },
                transfer: None,
            }],
            seed,
            initial_queues: Vec::new(),
        }
    }

    fn reference_two_station(lambda1: f64, seed: u64) -> SystemConfig {
        SystemConfig::exponential_two_station(lambda1, 1.0, 1.0, 0.5, 1.0, 1, seed)
    }

    #[test]
    fn zero_arrival_system_has_zero_intensity() {
        let cfg = single_station(1e15, 1.0, 3);
        let record = run_trajectory(&cfg, RunOptions::new(10_000.0)).unwrap();
        let opts = EstimatorOptions::default();
        let rho = record.effective_traffic_intensity(0, &opts).unwrap();
        assert_eq!(rho.value, 0.0);
        assert_eq!(rho.half_width, 0.0);
        assert_eq!(record.idle_fraction(0, &opts).unwrap().value, 1.0);
        assert_eq!(record.drift_estimate(0), 0.0);
        // never busy: the in-service Little's law has no estimate
        assert!(record.little_residual(&opts).is_none());
    }

    #[test]
    fn busy_and_idle_fractions_are_exact_complements() {
        let cfg = reference_two_station(1.2, 11);
        let record = run_trajectory(&cfg, RunOptions::new(20_000.0)).unwrap();
        let opts = EstimatorOptions::default();
        for i in 0..2 {
            let busy = record.effective_traffic_intensity(i, &opts).unwrap();
            let idle = record.idle_fraction(i, &opts).unwrap();
            assert_eq!(busy.value + idle.value, 1.0);
            assert_eq!(busy.half_width, idle.half_width);
        }
    }

    #[test]
    fn mm1_intensity_interval_covers_rho() {
        let cfg = single_station(2.0, 1.0, 5);
        let record = run_trajectory(&cfg, RunOptions::new(500_000.0)).unwrap();
        let est = record
            .effective_traffic_intensity(0, &EstimatorOptions::default())
            .unwrap();
        assert!(
            (est.value - 0.5).abs() < 3.0 * est.half_width.max(1e-3),
            "estimate {est:?}"
        );
        assert!(est.half_width > 0.0 && est.half_width < 0.02);
    }

    #[test]
    fn saturated_station_idle_vanishes() {
        // lambda = 2 mu: the queue drifts up and the server never rests
        let cfg = single_station(0.5, 1.0, 8);
        let record = run_trajectory(&cfg, RunOptions::new(100_000.0)).unwrap();
        let idle = record
            .idle_fraction(0, &EstimatorOptions::default())
            .unwrap();
        assert!(idle.value < 0.01, "idle {idle:?}");
        // and the drift matches lambda - mu
        assert!((record.drift_estimate(0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn unstable_reference_drift_matches_the_identity() {
        // lambda1 - mu1 - mu12 (1 - rho2) = 1.8 - 1 - 0.5 = 0.3
        let cfg = reference_two_station(1.8, 13);
        let record = run_trajectory(&cfg, RunOptions::new(300_000.0)).unwrap();
        let drift = record.drift_estimate(0);
        assert!((drift - 0.3).abs() < 0.03, "drift {drift}");
    }

    #[test]
    fn tightness_at_level_zero_equals_idle_fraction() {
        let cfg = reference_two_station(1.2, 17);
        let record = run_trajectory(&cfg, RunOptions::new(50_000.0)).unwrap();
        let opts = EstimatorOptions::default();
        let tight = record.tightness_diagnostic(0, 0, &opts).unwrap();
        let idle = record.idle_fraction(0, &opts).unwrap();
        assert!((tight.value - idle.value).abs() < 1e-12);
    }

    #[test]
    fn tightness_vanishes_on_drifting_queue_and_saturates_high() {
        let cfg = reference_two_station(1.8, 19);
        let record = run_trajectory(&cfg, RunOptions::new(200_000.0)).unwrap();
        let opts = EstimatorOptions::default();
        let tight = record.tightness_diagnostic(0, 10, &opts).unwrap();
        assert!(tight.value <= 0.01, "tightness {tight:?}");

        // a stable queue keeps all its mass below a high level
        let cfg = reference_two_station(1.2, 19);
        let record = run_trajectory(&cfg, RunOptions::new(50_000.0)).unwrap();
        let tight = record.tightness_diagnostic(1, 63, &opts).unwrap();
        assert_eq!(tight.value, 1.0);

        // levels at or above the histogram cap are not resolved
        assert!(record.tightness_diagnostic(1, 64, &opts).is_err());
    }

    #[test]
    fn little_residual_reduces_to_flow_conservation_for_one_station() {
        let cfg = single_station(2.0, 1.0, 23);
        let record = run_trajectory(&cfg, RunOptions::new(200_000.0)).unwrap();
        let residual = record
            .little_residual(&EstimatorOptions::default())
            .unwrap();
        assert!(residual < 0.01, "residual {residual}");
    }

    #[test]
    fn overflow_bound_trivial_when_threshold_never_crossed() {
        let mut cfg = reference_two_station(1.2, 29);
        cfg.stations[0].transfer.as_mut().unwrap().threshold = 1_000_000_000;
        let record = run_trajectory(&cfg, RunOptions::new(20_000.0)).unwrap();
        assert_eq!(record.transfer_arrivals[0], 0);
        let bound = record
            .overflow_bound_check(0, &EstimatorOptions::default())
            .unwrap();
        assert!(bound.holds);
        assert_eq!(bound.path_rate, 0.0);
    }

    #[test]
    fn overflow_bound_holds_on_stable_reference() {
        let cfg = reference_two_station(1.2, 31);
        let record = run_trajectory(&cfg, RunOptions::new(200_000.0)).unwrap();
        let bound = record
            .overflow_bound_check(0, &EstimatorOptions::default())
            .unwrap();
        assert!(bound.holds, "{bound:?}");
        assert!(bound.path_rate > 0.1, "transfers did happen: {bound:?}");
    }

    #[test]
    fn near_boundary_overflow_bound_is_tight_but_holds() {
        // at lambda1 = 1.5 station 1 saturates and the transfer rate
        // approaches its ceiling: the bound still holds with thin slack
        let cfg = reference_two_station(1.5, 53);
        let record = run_trajectory(&cfg, RunOptions::new(500_000.0)).unwrap();
        let bound = record
            .overflow_bound_check(0, &EstimatorOptions::default())
            .unwrap();
        assert!(bound.holds, "{bound:?}");
        assert!(bound.slack < 0.02, "slack should be thin: {bound:?}");
        assert!(bound.path_rate > 0.45, "{bound:?}");
    }

    #[test]
    fn short_window_errors_advise_longer_horizon() {
        let cfg = single_station(1.0, 1.0, 37);
        let mut options = RunOptions::new(100.0);
        options.windows = 8;
        let record = run_trajectory(&cfg, options).unwrap();
        let err = record
            .effective_traffic_intensity(0, &EstimatorOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("longer horizon"), "{err}");
    }

    #[test]
    fn switch_pressure_never_exceeds_transfer_busy_nor_idle() {
        // J <= B_{1|2} <= I_2, with all three accumulated independently
        for seed in 0..5u64 {
            let cfg = reference_two_station(1.6, 40 + seed);
            let record = run_trajectory(&cfg, RunOptions::new(5_000.0)).unwrap();
            let j = record.switch_pressure_time[0];
            let b = record.transfer_busy_time[0];
            let i2 = record.idle_time[1];
            assert!(j <= b && b <= i2, "J={j} B12={b} I2={i2}");
            assert!(j > 0.0);
        }
    }

    #[test]
    fn rate_checks_flag_nothing_on_conforming_runs() {
        let cfg = reference_two_station(1.2, 41);
        let record = run_trajectory(&cfg, RunOptions::new(200_000.0)).unwrap();
        for check in rate_checks(&record, &cfg) {
            assert!(check.z.abs() < 4.0, "{check:?}");
        }
    }
}
