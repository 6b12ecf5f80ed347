//! Event-driven simulation of the cascade system.
//!
//! The simulator maintains the Markov state of the system: per-station
//! queue lengths, the at-most-one transferred customer between each
//! adjacent pair, and the remaining interarrival/service times. Times are
//! kept as absolute 64-bit floats (next-arrival instants and service
//! completion instants), so residuals never degrade by repeated
//! subtraction; the preempt-resume service of a transferred customer
//! tracks accumulated work against its total requirement.
//!
//! Dynamics per event:
//!
//! - an exogenous arrival joins its station's queue and, if the server
//!   was free, starts service (preempting a transferred customer in
//!   service there, whose remaining work freezes);
//! - a service completion removes the head customer; if the queue empties
//!   and a transferred customer is present, its service resumes;
//! - a transfer-service completion removes the transferred customer.
//!
//! After every event the switching rule runs to a fixed point, stations
//! in ascending order: while station `i` holds more than `threshold_i`
//! of its own customers and station `i+1` is empty, one waiting customer
//! moves down, drawing a fresh service requirement and starting service
//! immediately. The arriving customer itself counts toward the queue
//! length before the rule is evaluated. Each transfer makes the receiving
//! station non-empty, so at most `k - 1` transfers fire per instant.
//!
//! Ties between simultaneous events break deterministically: service
//! completions, then transfer-service completions, then arrivals, then by
//! ascending station index.

use crate::config::SystemConfig;
use crate::dist::{make_stream, VariateStream};
use crate::error::{Error, Result};
use crate::metrics::TrajectoryRecord;

/// Default number of accumulation windows per run (divides cleanly into
/// 32 batches after the default 10% warm-up).
pub const DEFAULT_WINDOWS: usize = 320;
/// Default cap of the per-station occupancy histogram.
pub const DEFAULT_OCCUPANCY_CAP: usize = 64;
/// Default event budget per replication.
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub horizon: f64,
    pub windows: usize,
    pub occupancy_cap: usize,
    pub event_cap: u64,
}

impl RunOptions {
    pub fn new(horizon: f64) -> Self {
        RunOptions {
            horizon,
            windows: DEFAULT_WINDOWS,
            occupancy_cap: DEFAULT_OCCUPANCY_CAP,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Exogenous arrival at `station`.
    Arrival { station: usize },
    /// Service completion of the station's own class.
    ServiceCompletion { station: usize },
    /// Completion of the transferred customer that left station `from`
    /// (served at station `from + 1`).
    TransferServiceCompletion { from: usize },
    /// One customer moved from station `from` to `from + 1`.
    Transfer { from: usize },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Arrival { .. } => "arrival",
            EventKind::ServiceCompletion { .. } => "service",
            EventKind::TransferServiceCompletion { .. } => "overflow_service",
            EventKind::Transfer { .. } => "transfer",
        }
    }

    /// Station the event is attributed to (transfer classes report their
    /// origin station).
    pub fn station(&self) -> usize {
        match *self {
            EventKind::Arrival { station } | EventKind::ServiceCompletion { station } => station,
            EventKind::TransferServiceCompletion { from } | EventKind::Transfer { from } => from,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            EventKind::ServiceCompletion { .. } => 0,
            EventKind::TransferServiceCompletion { .. } => 1,
            EventKind::Arrival { .. } => 2,
            EventKind::Transfer { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub seq: u64,
    pub time: f64,
    pub kind: EventKind,
}

/// Hook invoked after each event (and each induced transfer) with the
/// post-event state.
pub trait Observer {
    fn on_event(&mut self, sim: &Simulator, event: &Event);
}

/// Observer that ignores everything.
pub struct NullObserver;

impl Observer for NullObserver {
    fn on_event(&mut self, _sim: &Simulator, _event: &Event) {}
}

/// The full Markov state at one instant, with residual times.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub clock: f64,
    pub queues: Vec<u64>,
    pub transfer_present: Vec<bool>,
    pub remaining_arrival: Vec<f64>,
    pub remaining_service: Vec<f64>,
    pub remaining_transfer_service: Vec<f64>,
}

/// Preempt-resume bookkeeping for a transferred customer.
#[derive(Debug, Clone, Copy)]
struct TransferJob {
    total: f64,
    served: f64,
    /// Set while in service (the receiving station has none of its own
    /// customers); cleared while preempted.
    resumed_at: Option<f64>,
}

impl TransferJob {
    fn remaining(&self, clock: f64) -> f64 {
        let in_progress = self.resumed_at.map_or(0.0, |t| clock - t);
        self.total - self.served - in_progress
    }
}

pub struct Simulator {
    config: SystemConfig,
    thresholds: Vec<u64>,
    arrival_streams: Vec<VariateStream>,
    service_streams: Vec<VariateStream>,
    transfer_streams: Vec<VariateStream>,

    clock: f64,
    queues: Vec<u64>,
    next_arrival: Vec<f64>,
    service_done: Vec<Option<f64>>,
    transfer_jobs: Vec<Option<TransferJob>>,
    transfer_present: Vec<bool>,

    seq: u64,
    options: RunOptions,
    record: TrajectoryRecord,
}

impl Simulator {
    /// Builds the simulator at time zero: fresh interarrival draws, fresh
    /// service draws for initially occupied stations, and the switching
    /// rule applied once so the initial state is admissible.
    pub fn new(config: &SystemConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        if !(options.horizon.is_finite() && options.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be finite and > 0, got {}",
                options.horizon
            )));
        }
        let k = config.station_count();
        let thresholds: Vec<u64> = (0..k.saturating_sub(1))
            .map(|i| config.threshold(i).unwrap())
            .collect();

        // Stream addressing: station i owns indices 3i (arrivals),
        // 3i + 1 (service), 3i + 2 (transfer-class service).
        let mut arrival_streams = Vec::with_capacity(k);
        let mut service_streams = Vec::with_capacity(k);
        let mut transfer_streams = Vec::with_capacity(k.saturating_sub(1));
        for (i, st) in config.stations.iter().enumerate() {
            arrival_streams.push(make_stream(&st.arrival, config.seed, 3 * i as u64)?);
            service_streams.push(make_stream(&st.service, config.seed, 3 * i as u64 + 1)?);
            if let Some(rule) = &st.transfer {
                transfer_streams.push(make_stream(&rule.service, config.seed, 3 * i as u64 + 2)?);
            }
        }

        let mut queues = if config.initial_queues.is_empty() {
            vec![0; k]
        } else {
            config.initial_queues.clone()
        };
        let mut next_arrival = Vec::with_capacity(k);
        let mut service_done = Vec::with_capacity(k);
        for i in 0..k {
            next_arrival.push(arrival_streams[i].draw());
            service_done.push(if queues[i] > 0 {
                Some(service_streams[i].draw())
            } else {
                None
            });
        }
        let mut transfer_jobs: Vec<Option<TransferJob>> = vec![None; k.saturating_sub(1)];
        let mut transfer_present = vec![false; k.saturating_sub(1)];

        // Normalize the configured initial state: switching rule at t = 0.
        // These moves are state preparation, not counted events.
        loop {
            let mut moved = false;
            for i in 0..k.saturating_sub(1) {
                if queues[i] > thresholds[i] && queues[i + 1] == 0 && transfer_jobs[i].is_none() {
                    queues[i] -= 1;
                    transfer_jobs[i] = Some(TransferJob {
                        total: transfer_streams[i].draw(),
                        served: 0.0,
                        resumed_at: Some(0.0),
                    });
                    transfer_present[i] = true;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }

        let record = TrajectoryRecord::new(
            k,
            thresholds.clone(),
            0.0,
            options.horizon,
            options.windows,
            options.occupancy_cap,
            queues.clone(),
            transfer_present.clone(),
        );

        Ok(Simulator {
            config: config.clone(),
            thresholds,
            arrival_streams,
            service_streams,
            transfer_streams,
            clock: 0.0,
            queues,
            next_arrival,
            service_done,
            transfer_jobs,
            transfer_present,
            seq: 0,
            options,
            record,
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn queues(&self) -> &[u64] {
        &self.queues
    }

    pub fn transfer_present(&self) -> &[bool] {
        &self.transfer_present
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn record(&self) -> &TrajectoryRecord {
        &self.record
    }

    /// Snapshot of the Markov state with residual times.
    pub fn state(&self) -> SystemState {
        let k = self.queues.len();
        SystemState {
            clock: self.clock,
            queues: self.queues.clone(),
            transfer_present: self.transfer_present.clone(),
            remaining_arrival: (0..k).map(|i| self.next_arrival[i] - self.clock).collect(),
            remaining_service: (0..k)
                .map(|i| self.service_done[i].map_or(0.0, |t| t - self.clock))
                .collect(),
            remaining_transfer_service: self
                .transfer_jobs
                .iter()
                .map(|j| j.map_or(0.0, |j| j.remaining(self.clock)))
                .collect(),
        }
    }

    /// The next event: minimum pending time, ties broken by kind rank
    /// (service, transfer service, arrival) then station index.
    pub fn next_event(&self) -> Event {
        let mut best_time = f64::INFINITY;
        let mut best_kind = EventKind::Arrival { station: 0 };
        let mut consider = |time: f64, kind: EventKind| {
            if time < best_time
                || (time == best_time
                    && (kind.rank(), kind.station()) < (best_kind.rank(), best_kind.station()))
            {
                best_time = time;
                best_kind = kind;
            }
        };
        for (i, done) in self.service_done.iter().enumerate() {
            if let Some(t) = done {
                consider(*t, EventKind::ServiceCompletion { station: i });
            }
        }
        for (i, job) in self.transfer_jobs.iter().enumerate() {
            if let Some(job) = job {
                if let Some(resumed) = job.resumed_at {
                    consider(
                        resumed + (job.total - job.served),
                        EventKind::TransferServiceCompletion { from: i },
                    );
                }
            }
        }
        for (i, t) in self.next_arrival.iter().enumerate() {
            consider(*t, EventKind::Arrival { station: i });
        }
        Event {
            seq: self.seq,
            time: best_time,
            kind: best_kind,
        }
    }

    /// Applies the next event (plus any induced transfers) and reports it.
    pub fn step<O: Observer>(&mut self, observer: &mut O) -> Result<Event> {
        let event = self.next_event();
        self.apply(event, observer)?;
        Ok(event)
    }

    fn apply<O: Observer>(&mut self, event: Event, observer: &mut O) -> Result<()> {
        self.record
            .advance(event.time, &self.queues, &self.transfer_present);
        self.clock = event.time;
        self.seq += 1;
        self.record.count_event();

        match event.kind {
            EventKind::Arrival { station } => self.apply_arrival(station),
            EventKind::ServiceCompletion { station } => self.apply_completion(station),
            EventKind::TransferServiceCompletion { from } => self.apply_transfer_completion(from),
            EventKind::Transfer { .. } => {
                return Err(Error::SimFault(
                    "transfer scheduled as a primary event".into(),
                ))
            }
        }

        let transfers = self.apply_transfer_rule();
        self.check_invariants()?;
        observer.on_event(self, &event);
        let first_seq = self.seq - transfers.len() as u64;
        for (j, from) in transfers.iter().enumerate() {
            observer.on_event(
                self,
                &Event {
                    seq: first_seq + j as u64,
                    time: self.clock,
                    kind: EventKind::Transfer { from: *from },
                },
            );
        }
        Ok(())
    }

    fn apply_arrival(&mut self, station: usize) {
        self.queues[station] += 1;
        self.record.count_arrival(station);
        self.next_arrival[station] = self.clock + self.arrival_streams[station].draw();
        if self.queues[station] == 1 {
            // server was free for this class; preempt a transferred
            // customer in service here, then start service
            if station >= 1 {
                if let Some(job) = &mut self.transfer_jobs[station - 1] {
                    if let Some(resumed) = job.resumed_at.take() {
                        job.served += self.clock - resumed;
                    }
                }
            }
            self.service_done[station] = Some(self.clock + self.service_streams[station].draw());
        }
    }

    fn apply_completion(&mut self, station: usize) {
        debug_assert!(self.queues[station] >= 1);
        self.queues[station] -= 1;
        self.record.count_departure(station);
        if self.queues[station] >= 1 {
            self.service_done[station] = Some(self.clock + self.service_streams[station].draw());
        } else {
            self.service_done[station] = None;
            if station >= 1 {
                if let Some(job) = &mut self.transfer_jobs[station - 1] {
                    job.resumed_at = Some(self.clock);
                }
            }
        }
    }

    fn apply_transfer_completion(&mut self, from: usize) {
        debug_assert!(self.transfer_jobs[from].is_some());
        self.transfer_jobs[from] = None;
        self.transfer_present[from] = false;
        self.record.count_transfer_departure(from);
    }

    /// Switching rule to fixed point; returns the pairs that fired, in order.
    fn apply_transfer_rule(&mut self) -> Vec<usize> {
        let k = self.queues.len();
        let mut fired = Vec::new();
        loop {
            let mut moved = false;
            for i in 0..k - 1 {
                while self.queues[i] > self.thresholds[i]
                    && self.queues[i + 1] == 0
                    && self.transfer_jobs[i].is_none()
                {
                    // queue > threshold >= 1, so a waiting (not in
                    // service) customer exists; it starts service at the
                    // empty next station immediately
                    self.queues[i] -= 1;
                    self.transfer_jobs[i] = Some(TransferJob {
                        total: self.transfer_streams[i].draw(),
                        served: 0.0,
                        resumed_at: Some(self.clock),
                    });
                    self.transfer_present[i] = true;
                    self.record.count_transfer_arrival(i);
                    self.record.count_event();
                    self.seq += 1;
                    fired.push(i);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        fired
    }

    fn check_invariants(&self) -> Result<()> {
        #[cfg(debug_assertions)]
        {
            let k = self.queues.len();
            for i in 0..k.saturating_sub(1) {
                if self.queues[i] > self.thresholds[i]
                    && self.queues[i + 1] == 0
                    && self.transfer_jobs[i].is_none()
                {
                    return Err(Error::SimFault(format!(
                        "switching rule violated at station {}",
                        i + 1
                    )));
                }
                let gap = self.record.transfer_arrivals[i] as i128
                    + self.record.initial_transfer_present[i] as i128
                    - self.record.transfer_departures[i] as i128;
                if !(0..=1).contains(&gap) || (gap == 1) != self.transfer_jobs[i].is_some() {
                    return Err(Error::SimFault(format!(
                        "transfer occupancy out of range at pair {}",
                        i + 1
                    )));
                }
            }
            for i in 0..k {
                if (self.queues[i] >= 1) != self.service_done[i].is_some() {
                    return Err(Error::SimFault(format!(
                        "service residual inconsistent at station {}",
                        i + 1
                    )));
                }
                if self.record.reconstructed_queue(i) != self.queues[i] as i128 {
                    return Err(Error::SimFault(format!(
                        "flow balance violated at station {}",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Runs until the clock reaches the horizon (or the event cap trips,
    /// which truncates the record). The record then covers exactly the
    /// elapsed span.
    pub fn run<O: Observer>(&mut self, observer: &mut O) -> Result<()> {
        let horizon = self.options.horizon;
        let mut truncated = false;
        loop {
            let event = self.next_event();
            if event.time > horizon {
                break;
            }
            if self.record.event_count >= self.options.event_cap {
                truncated = true;
                break;
            }
            self.apply(event, observer)?;
        }
        if !truncated {
            self.record
                .advance(horizon, &self.queues, &self.transfer_present);
            self.clock = horizon;
        }
        self.record
            .finalize(&self.queues, &self.transfer_present, truncated);
        Ok(())
    }

    pub fn into_record(self) -> TrajectoryRecord {
        self.record
    }

    /// Closes out the record so far and starts a fresh one at the current
    /// instant (used to check that records are additive over segments).
    pub fn split_record(&mut self) -> TrajectoryRecord {
        self.record
            .advance(self.clock, &self.queues, &self.transfer_present);
        let mut finished = TrajectoryRecord::new(
            self.queues.len(),
            self.thresholds.clone(),
            self.clock,
            self.options.horizon,
            self.options.windows,
            self.options.occupancy_cap,
            self.queues.clone(),
            self.transfer_present.clone(),
        );
        std::mem::swap(&mut finished, &mut self.record);
        finished.finalize(&self.queues, &self.transfer_present, false);
        finished
    }
}

/// Runs one replication and returns its record.
pub fn run_trajectory(config: &SystemConfig, options: RunOptions) -> Result<TrajectoryRecord> {
    let mut sim = Simulator::new(config, options)?;
    sim.run(&mut NullObserver)?;
    Ok(sim.into_record())
}

/// Observer that writes the line-delimited event log:
/// `seq,t,kind,station,Q1..Qk,Q12..Q(k-1)k` (stations 1-based,
/// timestamps at full precision, state after the event).
pub struct EventLogWriter<W: std::io::Write> {
    out: W,
}

impl<W: std::io::Write> EventLogWriter<W> {
    pub fn new(mut out: W, station_count: usize) -> std::io::Result<Self> {
        let mut header = String::from("seq,t,kind,station");
        for i in 1..=station_count {
            header.push_str(&format!(",Q{i}"));
        }
        for i in 1..station_count {
            header.push_str(&format!(",Q{}{}", i, i + 1));
        }
        writeln!(out, "{header}")?;
        Ok(EventLogWriter { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: std::io::Write> Observer for EventLogWriter<W> {
    fn on_event(&mut self, sim: &Simulator, event: &Event) {
        let mut line = format!(
            "{},{},{},{}",
            event.seq,
            event.time,
            event.kind.label(),
            event.kind.station() + 1
        );
        for q in sim.queues() {
            line.push_str(&format!(",{q}"));
        }
        for present in sim.transfer_present() {
            line.push_str(&format!(",{}", u8::from(*present)));
        }
        let _ = writeln!(self.out, "{line}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{StationConfig, TransferRule};
    use crate::dist::DistributionSpec;

    fn two_station_deterministic(
        arrival1: f64,
        service1: f64,
        arrival2: f64,
        service2: f64,
        transfer: f64,
        c1: u64,
        initial: Vec<u64>,
    ) -> SystemConfig {
        SystemConfig {
            stations: vec![
                StationConfig {
                    arrival: DistributionSpec::Deterministic { value: arrival1 },
                    service: DistributionSpec::Deterministic { value: service1 },
                    transfer: Some(TransferRule {
                        threshold: c1,
                        service: DistributionSpec::Deterministic { value: transfer },
                    }),
                },
                StationConfig {
                    arrival: DistributionSpec::Deterministic { value: arrival2 },
                    service: DistributionSpec::Deterministic { value: service2 },
                    transfer: None,
                },
            ],
            seed: 1,
            initial_queues: initial,
        }
    }

    #[test]
    fn init_default_state_is_empty() {
        let cfg = SystemConfig::exponential_two_station(1.2, 1.0, 1.0, 0.5, 1.0, 1, 42);
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        let state = sim.state();
        assert_eq!(state.queues, vec![0, 0]);
        assert_eq!(state.transfer_present, vec![false]);
        assert_eq!(state.remaining_service, vec![0.0, 0.0]);
        assert_eq!(state.remaining_transfer_service, vec![0.0]);
        assert!(state.remaining_arrival.iter().all(|r| *r > 0.0));
    }

    #[test]
    fn init_applies_switching_rule_once() {
        let mut cfg = SystemConfig::exponential_two_station(1.2, 1.0, 1.0, 0.5, 1.0, 1, 42);
        cfg.initial_queues = vec![5, 0];
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        assert_eq!(sim.queues(), &[4, 0]);
        assert_eq!(sim.transfer_present(), &[true]);
        let state = sim.state();
        assert!(state.remaining_transfer_service[0] > 0.0);
    }

    #[test]
    fn single_station_state_has_no_transfer_fields() {
        let cfg = SystemConfig {
            stations: vec![StationConfig {
                arrival: DistributionSpec::exponential_rate(0.5),
                service: DistributionSpec::exponential_rate(1.0),
                transfer: None,
            }],
            seed: 9,
            initial_queues: Vec::new(),
        };
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        let state = sim.state();
        assert_eq!(state.queues.len(), 1);
        assert!(state.transfer_present.is_empty());
        assert!(state.remaining_transfer_service.is_empty());
    }

    #[test]
    fn tie_break_prefers_service_completion() {
        // arrival and service both pending at t = 0.5
        let cfg = two_station_deterministic(0.5, 0.5, 100.0, 1.0, 1.0, 1, vec![1, 0]);
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        let ev = sim.next_event();
        assert_eq!(ev.time, 0.5);
        assert_eq!(ev.kind, EventKind::ServiceCompletion { station: 0 });
    }

    #[test]
    fn arrival_fires_when_earliest() {
        let cfg = two_station_deterministic(0.3, 10.0, 100.0, 0.7, 1.0, 1, vec![0, 1]);
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        let ev = sim.next_event();
        assert_eq!(ev.kind, EventKind::Arrival { station: 0 });
        assert_eq!(ev.time, 0.3);
    }

    #[test]
    fn switching_rule_moves_exactly_one_customer() {
        let mut cfg = two_station_deterministic(100.0, 100.0, 100.0, 100.0, 1.0, 1, vec![3, 0]);
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        assert_eq!(sim.queues(), &[2, 0]);
        assert_eq!(sim.transfer_present(), &[true]);

        // next station occupied: no transfer
        cfg.initial_queues = vec![3, 1];
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        assert_eq!(sim.queues(), &[3, 1]);
        assert_eq!(sim.transfer_present(), &[false]);

        // at the threshold ("greater than" is strict): no transfer
        cfg.initial_queues = vec![1, 0];
        let sim = Simulator::new(&cfg, RunOptions::new(10.0)).unwrap();
        assert_eq!(sim.queues(), &[1, 0]);
        assert_eq!(sim.transfer_present(), &[false]);
    }

    #[test]
    fn class2_arrival_preempts_and_completion_resumes() {
        // transferred customer needs 10.0 of work; a class-2 customer
        // arrives at t = 7 with service 2.0 and preempts it
        let cfg = two_station_deterministic(100.0, 100.0, 7.0, 2.0, 10.0, 1, vec![2, 0]);
        let mut sim = Simulator::new(&cfg, RunOptions::new(200.0)).unwrap();
        assert_eq!(sim.queues(), &[1, 0]);
        assert_eq!(sim.transfer_present(), &[true]);
        assert_eq!(sim.state().remaining_transfer_service[0], 10.0);

        let ev = sim.step(&mut NullObserver).unwrap();
        assert_eq!(ev.kind, EventKind::Arrival { station: 1 });
        assert_eq!(sim.clock(), 7.0);
        // frozen with 3.0 of work left, class-2 in service
        assert_eq!(sim.state().remaining_transfer_service[0], 3.0);
        assert_eq!(sim.state().remaining_service[1], 2.0);

        let ev = sim.step(&mut NullObserver).unwrap();
        assert_eq!(ev.kind, EventKind::ServiceCompletion { station: 1 });
        assert_eq!(sim.clock(), 9.0);
        // resumed from the frozen value
        assert_eq!(sim.state().remaining_transfer_service[0], 3.0);

        let ev = sim.step(&mut NullObserver).unwrap();
        assert_eq!(ev.kind, EventKind::TransferServiceCompletion { from: 0 });
        assert_eq!(sim.clock(), 12.0);
        assert_eq!(sim.transfer_present(), &[false]);
    }

    #[test]
    fn emptying_station_clears_residual() {
        let cfg = two_station_deterministic(100.0, 1.0, 100.0, 1.0, 1.0, 1, vec![1, 0]);
        let mut sim = Simulator::new(&cfg, RunOptions::new(50.0)).unwrap();
        let ev = sim.step(&mut NullObserver).unwrap();
        assert_eq!(ev.kind, EventKind::ServiceCompletion { station: 0 });
        assert_eq!(sim.queues(), &[0, 0]);
        assert_eq!(sim.state().remaining_service[0], 0.0);
    }

    #[test]
    fn identical_seeds_replay_identical_event_logs() {
        let cfg = SystemConfig::exponential_two_station(1.2, 1.0, 1.0, 0.5, 1.0, 1, 2024);
        let mut logs = Vec::new();
        for _ in 0..2 {
            let mut sim = Simulator::new(&cfg, RunOptions::new(500.0)).unwrap();
            let mut log = EventLogWriter::new(Vec::new(), 2).unwrap();
            sim.run(&mut log).unwrap();
            logs.push(log.into_inner());
        }
        assert!(!logs[0].is_empty());
        assert_eq!(logs[0], logs[1]);
    }

    #[test]
    fn no_arrivals_means_no_events() {
        let cfg = two_station_deterministic(1e15, 1.0, 1e15, 1.0, 1.0, 1, vec![]);
        let record = run_trajectory(&cfg, RunOptions::new(1000.0)).unwrap();
        assert_eq!(record.event_count, 0);
        assert_eq!(record.arrivals, vec![0, 0]);
        assert_eq!(record.busy_time, vec![0.0, 0.0]);
        assert_eq!(record.idle_time, vec![1000.0, 1000.0]);
        assert!(record.flow_balance_exact());
    }

    #[test]
    fn mm1_idle_fraction_matches_birth_death_balance() {
        // M/M/1 with rho = 0.5 is idle half the time
        let cfg = SystemConfig {
            stations: vec![StationConfig {
                arrival: DistributionSpec::Exponential { mean: 2.0 },
                service: DistributionSpec::Exponential { mean: 1.0 },
                transfer: None,
            }],
            seed: 31,
            initial_queues: Vec::new(),
        };
        let record = run_trajectory(&cfg, RunOptions::new(1_000_000.0)).unwrap();
        let idle = record.idle_time[0] / record.horizon();
        assert!((idle - 0.5).abs() < 0.005, "idle fraction {idle}");
        assert!(record.flow_balance_exact());
    }

    #[test]
    fn event_cap_truncates_and_flags() {
        let cfg = SystemConfig::exponential_two_station(1.2, 1.0, 1.0, 0.5, 1.0, 1, 7);
        let record =
            run_trajectory(&cfg, RunOptions::new(1_000_000.0).with_event_cap(1000)).unwrap();
        assert!(record.truncated);
        assert!(record.event_count >= 1000);
        assert!(record.horizon() < 1_000_000.0);
        assert!(record.flow_balance_exact());
    }

    #[test]
    fn split_records_merge_back_to_whole() {
        let cfg = SystemConfig::exponential_two_station(1.4, 1.0, 0.9, 0.6, 1.0, 2, 77);
        let opts = RunOptions::new(2000.0);

        let mut whole = Simulator::new(&cfg, opts).unwrap();
        whole.run(&mut NullObserver).unwrap();
        let whole = whole.into_record();

        let mut sim = Simulator::new(&cfg, opts).unwrap();
        while sim.next_event().time <= 700.0 {
            sim.step(&mut NullObserver).unwrap();
        }
        let mut first = sim.split_record();
        sim.run(&mut NullObserver).unwrap();
        let second = sim.into_record();
        first.append(&second).unwrap();

        assert_eq!(first.arrivals, whole.arrivals);
        assert_eq!(first.departures, whole.departures);
        assert_eq!(first.transfer_arrivals, whole.transfer_arrivals);
        assert_eq!(first.transfer_departures, whole.transfer_departures);
        assert_eq!(first.final_queues, whole.final_queues);
        assert_eq!(first.event_count, whole.event_count);
        for i in 0..2 {
            assert!((first.busy_time[i] - whole.busy_time[i]).abs() < 1e-7);
            assert!((first.queue_time_integral[i] - whole.queue_time_integral[i]).abs() < 1e-6);
        }
        assert!((first.transfer_busy_time[0] - whole.transfer_busy_time[0]).abs() < 1e-7);
        assert!((first.switch_pressure_time[0] - whole.switch_pressure_time[0]).abs() < 1e-7);
    }
}
