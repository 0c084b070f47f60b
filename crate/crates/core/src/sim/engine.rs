//! Event-driven simulation of the polling server in continuous time.
//!
//! The server's pending phase event (service completion, credit or timer
//! expiry, switchover end) and the per-station next-arrival times drive the
//! timeline; there is never more than one pending phase event, so event
//! selection is a minimum over N+1 candidates. Ties at identical timestamps
//! resolve phase-before-arrival, then lowest station index, which keeps runs
//! with deterministic laws reproducible.
//!
//! Delays are recorded when service starts. Between events the engine
//! integrates the total unfinished work, the per-station queue lengths, and
//! the time spent in each server state, so conditional workload averages and
//! state fractions come out of the same pass.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::model::CheckedConfig;
use crate::sim::dist::Sampler;
use crate::sim::stats::DelayTally;
use crate::sim::Strategy;

/// Stream ids per replication; arrivals, services, and switchovers each get
/// their own counter-derived stream so that runs differing only in strategy
/// (or in one station's credit) share the same arrival and service
/// realizations. That keeps paired comparisons between strategies sharp.
const STREAM_STRIDE: u64 = 4096;

pub(crate) struct EngineSettings {
    pub strategy: Strategy,
    pub service: Vec<Sampler>,
    pub switchover: Vec<Sampler>,
    pub seed: u64,
    pub stream: u64,
    pub warmup_arrivals: u64,
    pub warmup_cycles: u64,
    pub measured_arrivals: u64,
    pub batches: usize,
    pub boxma_all_stations: bool,
    pub queue_guard: usize,
}

struct Message {
    arrival: f64,
    work: f64,
    batch: Option<usize>,
}

struct Station {
    queue: VecDeque<Message>,
    next_arrival: f64,
    interarrival: Exp<f64>,
    arrival_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    switch_rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Serving { until: f64 },
    /// Strategy-I wait; ends when the remaining credit is spent.
    WaitingCredit { until: f64, started: f64 },
    /// Strategy-II pre-cutoff idle or an armed timer.
    WaitingTimer { until: f64, started: f64 },
    Switching { until: f64, from: usize },
    /// Degenerate mode for systems with no switchover and no credit at all:
    /// the server parks until the next arrival anywhere.
    IdleEmpty,
}

pub(crate) struct RunOutput {
    pub tally: DelayTally,
    pub time_working: f64,
    pub time_switching: Vec<f64>,
    pub time_waiting: Vec<f64>,
    pub workload_switching: Vec<f64>,
    pub workload_waiting: Vec<f64>,
    pub queue_integral: Vec<f64>,
    pub window: f64,
    pub cycle_sum: f64,
    pub cycle_count: u64,
    pub unstable: bool,
}

pub(crate) struct Engine<'a> {
    config: &'a CheckedConfig,
    settings: EngineSettings,

    now: f64,
    stations: Vec<Station>,
    at: usize,
    phase: Phase,

    // Per-visit bookkeeping.
    remaining_credit: f64,
    cutoff: f64,
    visit_waited: f64,
    instant_visits: usize,

    // Global workload (all unfinished work) and queued work excluding the
    // message in service; the latter resyncs the former at each completion.
    workload: f64,
    queued_work: f64,
    queued_messages: usize,

    total_arrivals: u64,
    cycles_done: u64,
    cycle_mark: Option<f64>,

    measuring: bool,
    measure_start: f64,
    assigned: u64,
    recorded: u64,
    done: bool,
    unstable: bool,

    tally: DelayTally,
    time_working: f64,
    time_switching: Vec<f64>,
    time_waiting: Vec<f64>,
    workload_switching: Vec<f64>,
    workload_waiting: Vec<f64>,
    queue_integral: Vec<f64>,
    cycle_sum: f64,
    cycle_count: u64,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a CheckedConfig, settings: EngineSettings) -> Self {
        let n = config.len();
        let base = settings.stream * STREAM_STRIDE;
        let stream_rng = |offset: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(base + offset);
            rng
        };
        let stations = config
            .stations()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let interarrival = Exp::new(s.lambda).expect("validated arrival rate");
                let mut arrival_rng = stream_rng(i as u64);
                let next_arrival = interarrival.sample(&mut arrival_rng);
                Station {
                    queue: VecDeque::new(),
                    next_arrival,
                    interarrival,
                    arrival_rng,
                    service_rng: stream_rng(n as u64 + i as u64),
                    switch_rng: stream_rng(2 * n as u64 + i as u64),
                }
            })
            .collect();
        let batches = settings.batches;
        Engine {
            config,
            settings,
            now: 0.0,
            stations,
            at: 0,
            phase: Phase::IdleEmpty,
            remaining_credit: 0.0,
            cutoff: 0.0,
            visit_waited: 0.0,
            instant_visits: 0,
            workload: 0.0,
            queued_work: 0.0,
            queued_messages: 0,
            total_arrivals: 0,
            cycles_done: 0,
            cycle_mark: None,
            measuring: false,
            measure_start: 0.0,
            assigned: 0,
            recorded: 0,
            done: false,
            unstable: false,
            tally: DelayTally::new(n, batches),
            time_working: 0.0,
            time_switching: vec![0.0; n],
            time_waiting: vec![0.0; n],
            workload_switching: vec![0.0; n],
            workload_waiting: vec![0.0; n],
            queue_integral: vec![0.0; n],
            cycle_sum: 0.0,
            cycle_count: 0,
        }
    }

    fn credit(&self, station: usize) -> f64 {
        self.config.stations()[station].credit
    }

    /// Integrates state time, workload, and queue lengths over [now, to].
    fn advance(&mut self, to: f64) {
        let dt = to - self.now;
        debug_assert!(dt >= 0.0, "time must not run backwards");
        if dt > 0.0 {
            if self.measuring {
                match self.phase {
                    Phase::Serving { .. } => {
                        self.time_working += dt;
                    }
                    Phase::Switching { from, .. } => {
                        self.time_switching[from] += dt;
                        self.workload_switching[from] += self.workload * dt;
                    }
                    Phase::WaitingCredit { .. } | Phase::WaitingTimer { .. } | Phase::IdleEmpty => {
                        self.time_waiting[self.at] += dt;
                        self.workload_waiting[self.at] += self.workload * dt;
                    }
                }
                for (integral, station) in self.queue_integral.iter_mut().zip(&self.stations) {
                    *integral += station.queue.len() as f64 * dt;
                }
            }
            if matches!(self.phase, Phase::Serving { .. }) {
                // Work drains at unit rate while serving.
                self.workload -= dt;
            }
        }
        self.now = to;
    }

    fn maybe_start_measuring(&mut self) {
        if !self.measuring
            && self.total_arrivals >= self.settings.warmup_arrivals
            && self.cycles_done >= self.settings.warmup_cycles
        {
            self.measuring = true;
            self.measure_start = self.now;
        }
    }

    fn start_service(&mut self, station: usize) {
        let msg = self.stations[station]
            .queue
            .pop_front()
            .expect("start_service requires a queued message");
        self.queued_work -= msg.work;
        self.queued_messages -= 1;
        if let Some(batch) = msg.batch {
            self.tally.record(station, batch, self.now - msg.arrival);
            self.recorded += 1;
            if self.recorded == self.settings.measured_arrivals {
                self.done = true;
            }
        }
        self.phase = Phase::Serving { until: self.now + msg.work };
    }

    fn begin_switch(&mut self) {
        let from = self.at;
        if self.settings.strategy == Strategy::WaitAndSee {
            let credit = self.credit(from);
            debug_assert!(
                (self.visit_waited - credit).abs() <= 1e-9 * (1.0 + credit),
                "a visit must spend its credit exactly: waited {} of {}",
                self.visit_waited,
                credit
            );
        }
        let length = self.switchover_sample(from);
        self.phase = Phase::Switching { until: self.now + length, from };
    }

    fn switchover_sample(&mut self, from: usize) -> f64 {
        self.settings.switchover[from].sample(&mut self.stations[from].switch_rng)
    }

    fn begin_visit(&mut self) {
        let here = self.at;
        if here == 0 {
            if let Some(mark) = self.cycle_mark {
                self.cycles_done += 1;
                if self.measuring && mark >= self.measure_start {
                    self.cycle_sum += self.now - mark;
                    self.cycle_count += 1;
                }
            }
            self.cycle_mark = Some(self.now);
            self.maybe_start_measuring();
        }
        self.visit_waited = 0.0;

        // A full silent lap of instant visits means nothing can advance time
        // except an arrival; park instead of spinning.
        if self.stations[here].queue.is_empty()
            && self.credit(here) == 0.0
            && self.config.switchovers()[here].r == 0.0
        {
            self.instant_visits += 1;
            if self.instant_visits >= self.config.len()
                && self.stations.iter().all(|s| s.queue.is_empty())
            {
                self.phase = Phase::IdleEmpty;
                return;
            }
        } else {
            self.instant_visits = 0;
        }

        match self.settings.strategy {
            Strategy::Exhaustive => {
                if !self.stations[here].queue.is_empty() {
                    self.start_service(here);
                } else {
                    self.begin_switch();
                }
            }
            Strategy::WaitAndSee => {
                self.remaining_credit = self.credit(here);
                if !self.stations[here].queue.is_empty() {
                    self.start_service(here);
                } else if self.remaining_credit > 0.0 {
                    self.phase = Phase::WaitingCredit {
                        until: self.now + self.remaining_credit,
                        started: self.now,
                    };
                } else {
                    self.begin_switch();
                }
            }
            Strategy::TotalTimer => {
                self.cutoff = self.now + self.credit(here);
                if !self.stations[here].queue.is_empty() {
                    self.start_service(here);
                } else if self.credit(here) > 0.0 {
                    self.phase = Phase::WaitingTimer { until: self.cutoff, started: self.now };
                } else {
                    self.begin_switch();
                }
            }
            Strategy::BoxmaTimer => {
                let timer_here = here == 0 || self.settings.boxma_all_stations;
                if !self.stations[here].queue.is_empty() {
                    self.start_service(here);
                } else if timer_here && self.credit(here) > 0.0 {
                    self.phase =
                        Phase::WaitingTimer { until: self.now + self.credit(here), started: self.now };
                } else {
                    self.begin_switch();
                }
            }
        }
    }

    fn after_queue_empty(&mut self) {
        match self.settings.strategy {
            Strategy::Exhaustive | Strategy::BoxmaTimer => self.begin_switch(),
            Strategy::WaitAndSee => {
                if self.remaining_credit > 0.0 {
                    self.phase = Phase::WaitingCredit {
                        until: self.now + self.remaining_credit,
                        started: self.now,
                    };
                } else {
                    self.begin_switch();
                }
            }
            Strategy::TotalTimer => {
                if self.now >= self.cutoff {
                    self.begin_switch();
                } else {
                    self.phase = Phase::WaitingTimer { until: self.cutoff, started: self.now };
                }
            }
        }
    }

    fn handle_phase_end(&mut self) {
        match self.phase {
            Phase::Serving { .. } => {
                // Resync kills the drift the unit-rate drain accumulates.
                self.workload = self.queued_work;
                let here = self.at;
                if !self.stations[here].queue.is_empty() {
                    self.start_service(here);
                } else {
                    self.after_queue_empty();
                }
            }
            Phase::WaitingCredit { until, started } => {
                self.visit_waited += until - started;
                self.remaining_credit = 0.0;
                self.begin_switch();
            }
            Phase::WaitingTimer { until, started } => {
                self.visit_waited += until - started;
                self.begin_switch();
            }
            Phase::Switching { from, .. } => {
                self.at = (from + 1) % self.config.len();
                self.begin_visit();
            }
            Phase::IdleEmpty => unreachable!("idle parking has no phase event"),
        }
    }

    fn handle_arrival(&mut self, station: usize) {
        let work = self.settings.service[station].sample(&mut self.stations[station].service_rng);
        let batch = if self.measuring && self.assigned < self.settings.measured_arrivals {
            let batch =
                (self.assigned * self.settings.batches as u64 / self.settings.measured_arrivals) as usize;
            self.assigned += 1;
            Some(batch)
        } else {
            None
        };
        self.stations[station].queue.push_back(Message { arrival: self.now, work, batch });
        self.workload += work;
        self.queued_work += work;
        self.queued_messages += 1;
        if self.queued_messages > self.settings.queue_guard {
            self.unstable = true;
            self.done = true;
        }
        self.total_arrivals += 1;
        self.maybe_start_measuring();

        let st = &mut self.stations[station];
        let next = st.interarrival.sample(&mut st.arrival_rng);
        st.next_arrival = self.now + next;

        match self.phase {
            Phase::IdleEmpty => {
                // Zero-idle degenerate mode: the server reaches any station
                // instantly.
                self.at = station;
                self.instant_visits = 0;
                self.start_service(station);
            }
            Phase::WaitingCredit { started, .. } if self.at == station => {
                self.remaining_credit -= self.now - started;
                self.visit_waited += self.now - started;
                self.start_service(station);
            }
            Phase::WaitingTimer { started, .. } if self.at == station => {
                self.visit_waited += self.now - started;
                self.start_service(station);
            }
            _ => {}
        }
    }

    pub fn run(mut self) -> RunOutput {
        self.begin_visit();
        while !self.done {
            let phase_end = match self.phase {
                Phase::Serving { until } => Some(until),
                Phase::WaitingCredit { until, .. } => Some(until),
                Phase::WaitingTimer { until, .. } => Some(until),
                Phase::Switching { until, .. } => Some(until),
                Phase::IdleEmpty => None,
            };
            let (arrival_station, arrival_time) = self
                .stations
                .iter()
                .enumerate()
                .map(|(i, s)| (i, s.next_arrival))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("at least one station");

            match phase_end {
                Some(t) if t <= arrival_time => {
                    self.advance(t);
                    self.handle_phase_end();
                }
                _ => {
                    self.advance(arrival_time);
                    self.handle_arrival(arrival_station);
                }
            }
        }
        let window = self.now - self.measure_start;
        RunOutput {
            tally: self.tally,
            time_working: self.time_working,
            time_switching: self.time_switching,
            time_waiting: self.time_waiting,
            workload_switching: self.workload_switching,
            workload_waiting: self.workload_waiting,
            queue_integral: self.queue_integral,
            window,
            cycle_sum: self.cycle_sum,
            cycle_count: self.cycle_count,
            unstable: self.unstable,
        }
    }
}
