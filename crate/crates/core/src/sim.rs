//! Slotted simulation loop and run metrics.
//!
//! Within a slot: sample channel, arrivals and harvest; let the policy
//! decide; clamp the decision to the stored energy; then charge the battery,
//! advance the task queues and finally the virtual energy queue, which uses
//! the battery level from before this slot's update.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::make_scheduler;
use crate::channel::{ChannelRealization, ChannelSampler};
use crate::error::Result;
use crate::jcora::drift_bound_constant;
use crate::policy::{LinkBudget, Scheduler, SlotContext};
use crate::queueing::{self, NetworkState, SlotOutcome};
use crate::scenario::{
    build_topology, ArrivalPmf, Phenomenon, RandomStreams, ScenarioConfig, Topology,
};

/// Per-TU arrival sampler over `{0, ..., g_max}`.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    rngs: Vec<ChaCha8Rng>,
    max: u64,
    /// Cumulative pmf for the truncated Poisson mode.
    cdf: Option<Vec<f64>>,
}

impl ArrivalSampler {
    pub fn new(cfg: &ScenarioConfig, num_tus: usize, streams: &RandomStreams) -> Self {
        let max = cfg.traffic.max_arrivals;
        let cdf = match cfg.traffic.arrival_pmf {
            ArrivalPmf::Uniform => None,
            ArrivalPmf::TruncatedPoisson => Some(truncated_poisson_cdf(cfg.traffic.poisson_mean, max)),
        };
        Self {
            rngs: (0..num_tus)
                .map(|i| streams.stream(Phenomenon::Arrivals, i))
                .collect(),
            max,
            cdf,
        }
    }

    pub fn sample(&mut self) -> Vec<u64> {
        let max = self.max;
        let cdf = self.cdf.as_deref();
        self.rngs
            .iter_mut()
            .map(|rng| sample_arrivals(rng, max, cdf))
            .collect()
    }
}

fn truncated_poisson_cdf(mean: f64, max: u64) -> Vec<f64> {
    // log-space pmf avoids overflow of mean^g / g!
    let log_pmf: Vec<f64> = (0..=max)
        .scan(0.0_f64, |log_fact, g| {
            if g > 0 {
                *log_fact += (g as f64).ln();
            }
            let lp = if mean > 0.0 {
                g as f64 * mean.ln() - mean - *log_fact
            } else if g == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            Some(lp)
        })
        .collect();
    let peak = log_pmf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_pmf.iter().map(|lp| (lp - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

/// One draw of `g_i(t)`: uniform over `{0, ..., max}`, or by inverse CDF.
pub fn sample_arrivals<R: Rng + ?Sized>(rng: &mut R, max: u64, cdf: Option<&[f64]>) -> u64 {
    match cdf {
        None => rng.random_range(0..=max),
        Some(cdf) => {
            let u: f64 = rng.random();
            cdf.partition_point(|&c| c < u).min(max as usize) as u64
        }
    }
}

/// Per-MIS harvest sampler, `e_k(t) ~ U[0, e_max]`.
#[derive(Debug, Clone)]
pub struct HarvestSampler {
    rngs: Vec<ChaCha8Rng>,
    max: f64,
}

impl HarvestSampler {
    pub fn new(cfg: &ScenarioConfig, num_mis: usize, streams: &RandomStreams) -> Self {
        Self {
            rngs: (0..num_mis)
                .map(|k| streams.stream(Phenomenon::Harvest, k))
                .collect(),
            max: cfg.energy.max_charge_j_per_slot,
        }
    }

    pub fn sample(&mut self) -> Vec<f64> {
        let max = self.max;
        self.rngs
            .iter_mut()
            .map(|rng| sample_harvest(rng, max))
            .collect()
    }
}

pub fn sample_harvest<R: Rng + ?Sized>(rng: &mut R, max: f64) -> f64 {
    rng.random::<f64>() * max
}

/// Metrics of one slot. Queue, battery and virtual-queue fields are the
/// values at the start of the slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub rate_bps: Vec<f64>,
    /// `H(t)`, the sum of uplink rates.
    pub throughput_bps: f64,
    pub q_tu: Vec<u64>,
    pub q_mis: Vec<u64>,
    pub battery_j: Vec<f64>,
    pub z_virtual: Vec<f64>,
    pub arrivals: Vec<u64>,
    pub harvest_j: Vec<f64>,
    pub theta: Vec<u64>,
    pub mu: Vec<u64>,
    pub migrate: Vec<u64>,
    pub requested_energy_j: Vec<f64>,
    pub consumed_energy_j: Vec<f64>,
    /// MISs whose decision had to be scaled down to fit the battery.
    pub energy_clamped: Vec<bool>,
    pub processed_tasks: u64,
    pub migrated_tasks: u64,
    pub dropped_tasks: u64,
    /// Realized Lyapunov increment `L(t+1) - L(t)`.
    pub drift: f64,
    /// Right-hand side of the per-slot drift bound.
    pub drift_bound: f64,
}

impl SlotRecord {
    pub fn total_queue(&self) -> u64 {
        self.q_tu.iter().sum::<u64>() + self.q_mis.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisSummary {
    pub avg_energy_j: f64,
    pub avg_requested_energy_j: f64,
    pub avg_battery_j: f64,
    pub final_z: f64,
    pub final_z_over_t: f64,
    pub clamp_rate: f64,
}

/// Time averages of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub slots: u64,
    pub warmup_slots: u64,
    /// Mean of `H(t)` over every slot, bits/s.
    pub avg_throughput_bps: f64,
    pub avg_throughput_warm_bps: f64,
    /// Diagnostic only: tasks processed or migrated, times Y, per second.
    pub goodput_bps: f64,
    /// Mean over TUs of the Little's-law latency, slots. `None` if no TU saw arrivals.
    pub avg_latency_slots: Option<f64>,
    pub avg_latency_warm_slots: Option<f64>,
    pub tu_latency_slots: Vec<Option<f64>>,
    /// Time average of the network-wide backlog `sum_i (Q_i + Q_ik)`, tasks.
    pub avg_queue_tasks: f64,
    pub avg_queue_warm_tasks: f64,
    pub tu_avg_queue_tasks: Vec<f64>,
    /// Mean consumed energy per MIS per slot, J.
    pub avg_energy_j: f64,
    pub max_final_z_over_t: f64,
    /// Fraction of (MIS, slot) pairs whose decision needed the battery clamp.
    pub violation_rate: f64,
    pub violation_rate_final_half: f64,
    pub drift_violations: u64,
    pub mis: Vec<MisSummary>,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    slots: u64,
    warm_slots: u64,
    throughput: f64,
    throughput_warm: f64,
    delivered: u64,
    tu_queue: Vec<f64>,
    tu_queue_warm: Vec<f64>,
    tu_arrivals: Vec<f64>,
    tu_arrivals_warm: Vec<f64>,
    total_queue: f64,
    total_queue_warm: f64,
    mis_energy: Vec<f64>,
    mis_requested: Vec<f64>,
    mis_battery: Vec<f64>,
    mis_clamped: Vec<u64>,
    clamped_half: u64,
    half_pairs: u64,
    drift_violations: u64,
}

impl Accumulator {
    fn new(num_tus: usize, num_mis: usize) -> Self {
        Self {
            tu_queue: vec![0.0; num_tus],
            tu_queue_warm: vec![0.0; num_tus],
            tu_arrivals: vec![0.0; num_tus],
            tu_arrivals_warm: vec![0.0; num_tus],
            mis_energy: vec![0.0; num_mis],
            mis_requested: vec![0.0; num_mis],
            mis_battery: vec![0.0; num_mis],
            mis_clamped: vec![0; num_mis],
            ..Default::default()
        }
    }

    fn add(&mut self, rec: &SlotRecord, warm: bool, final_half: bool) {
        self.slots += 1;
        self.throughput += rec.throughput_bps;
        self.delivered += rec.processed_tasks + rec.migrated_tasks;
        let total = rec.total_queue() as f64;
        self.total_queue += total;
        for i in 0..rec.q_tu.len() {
            let q = (rec.q_tu[i] + rec.q_mis[i]) as f64;
            self.tu_queue[i] += q;
            self.tu_arrivals[i] += rec.arrivals[i] as f64;
            if warm {
                self.tu_queue_warm[i] += q;
                self.tu_arrivals_warm[i] += rec.arrivals[i] as f64;
            }
        }
        if warm {
            self.warm_slots += 1;
            self.throughput_warm += rec.throughput_bps;
            self.total_queue_warm += total;
        }
        for k in 0..rec.battery_j.len() {
            self.mis_energy[k] += rec.consumed_energy_j[k];
            self.mis_requested[k] += rec.requested_energy_j[k];
            self.mis_battery[k] += rec.battery_j[k];
            if rec.energy_clamped[k] {
                self.mis_clamped[k] += 1;
                if final_half {
                    self.clamped_half += 1;
                }
            }
        }
        if final_half {
            self.half_pairs += rec.battery_j.len() as u64;
        }
        if rec.drift > rec.drift_bound {
            self.drift_violations += 1;
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn latencies(queue: &[f64], arrivals: &[f64], exec_delay: f64) -> Vec<Option<f64>> {
    queue
        .iter()
        .zip(arrivals)
        .map(|(&q, &g)| (g > 0.0).then(|| q / g + exec_delay))
        .collect()
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Destination for per-slot records.
pub trait SlotSink {
    fn record(&mut self, rec: &SlotRecord) -> Result<()>;
}

/// Discards records.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl SlotSink for NullSink {
    fn record(&mut self, _rec: &SlotRecord) -> Result<()> {
        Ok(())
    }
}

impl SlotSink for Vec<SlotRecord> {
    fn record(&mut self, rec: &SlotRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

impl<F: FnMut(&SlotRecord)> SlotSink for F {
    fn record(&mut self, rec: &SlotRecord) -> Result<()> {
        self(rec);
        Ok(())
    }
}

/// Writes `slots.csv`: fixed leading columns, then per-TU and per-MIS blocks
/// in index order.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> Self {
        Self {
            writer: csv::Writer::from_writer(inner),
            header_written: false,
        }
    }

    pub fn header(num_tus: usize, num_mis: usize) -> Vec<String> {
        let mut cols: Vec<String> = [
            "slot",
            "throughput_bps",
            "total_queue",
            "processed",
            "migrated",
            "dropped",
            "drift",
            "drift_bound",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for prefix in ["rate_bps", "q_tu", "q_mis", "arrivals", "theta", "mu", "m"] {
            cols.extend((0..num_tus).map(|i| format!("{prefix}_{i}")));
        }
        for prefix in ["battery_j", "z", "harvest_j", "requested_j", "consumed_j", "clamped"] {
            cols.extend((0..num_mis).map(|k| format!("{prefix}_{k}")));
        }
        cols
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| csv::Error::from(e).into())
    }
}

impl<W: Write> SlotSink for CsvSink<W> {
    fn record(&mut self, rec: &SlotRecord) -> Result<()> {
        if !self.header_written {
            self.writer
                .write_record(Self::header(rec.q_tu.len(), rec.battery_j.len()))?;
            self.header_written = true;
        }
        let mut row = vec![
            rec.slot.to_string(),
            rec.throughput_bps.to_string(),
            rec.total_queue().to_string(),
            rec.processed_tasks.to_string(),
            rec.migrated_tasks.to_string(),
            rec.dropped_tasks.to_string(),
            rec.drift.to_string(),
            rec.drift_bound.to_string(),
        ];
        row.extend(rec.rate_bps.iter().map(f64::to_string));
        for block in [&rec.q_tu, &rec.q_mis, &rec.arrivals, &rec.theta, &rec.mu, &rec.migrate] {
            row.extend(block.iter().map(u64::to_string));
        }
        for block in [
            &rec.battery_j,
            &rec.z_virtual,
            &rec.harvest_j,
            &rec.requested_energy_j,
            &rec.consumed_energy_j,
        ] {
            row.extend(block.iter().map(f64::to_string));
        }
        row.extend(rec.energy_clamped.iter().map(|&c| u8::from(c).to_string()));
        self.writer.write_record(&row)?;
        Ok(())
    }
}

/// A single run: owns its state, random streams and scheduler.
pub struct Simulation {
    cfg: ScenarioConfig,
    topo: Topology,
    scheduler: Box<dyn Scheduler>,
    state: NetworkState,
    channel: ChannelSampler,
    arrivals: ArrivalSampler,
    harvest: HarvestSampler,
    gamma_prev: Vec<Vec<f64>>,
    drift_constant: f64,
    acc: Accumulator,
    decide_time: Duration,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        let scheduler = make_scheduler(cfg.control.policy, cfg.num_tus());
        Self::with_scheduler(cfg, scheduler)
    }

    pub fn with_scheduler(cfg: ScenarioConfig, scheduler: Box<dyn Scheduler>) -> Result<Self> {
        cfg.validate()?;
        let streams = RandomStreams::new(cfg.sim.seed);
        let topo = build_topology(&cfg, &streams);
        let num_tus = topo.num_tus();
        let num_mis = topo.num_mis();
        Ok(Self {
            channel: ChannelSampler::new(&topo, &streams),
            arrivals: ArrivalSampler::new(&cfg, num_tus, &streams),
            harvest: HarvestSampler::new(&cfg, num_mis, &streams),
            gamma_prev: vec![vec![0.0; cfg.network.subchannels_per_mis]; num_mis],
            state: NetworkState::empty(num_tus, num_mis),
            drift_constant: drift_bound_constant(&cfg),
            acc: Accumulator::new(num_tus, num_mis),
            decide_time: Duration::ZERO,
            scheduler,
            topo,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    /// Wall time spent inside the scheduler so far.
    pub fn decision_time(&self) -> Duration {
        self.decide_time
    }

    /// Channel realization the next `step` will use, without consuming randomness.
    pub fn peek_channel(&self) -> ChannelRealization {
        self.channel.clone().sample(self.state.slot, &self.topo, &self.cfg)
    }

    /// Advances one slot and returns its record.
    pub fn step(&mut self) -> SlotRecord {
        let cfg = &self.cfg;
        let topo = &self.topo;
        let slot = self.state.slot;
        let chan = self.channel.sample(slot, topo, cfg);
        let arrivals = self.arrivals.sample();
        let harvest = self.harvest.sample();

        let ctx = SlotContext {
            cfg,
            topo,
            state: &self.state,
            chan: &chan,
            gamma_estimate: &self.gamma_prev,
            arrivals: &arrivals,
        };
        let started = Instant::now();
        let mut decision = self.scheduler.decide(&ctx);
        self.decide_time += started.elapsed();
        let link = LinkBudget::realize(&decision, &ctx);

        let num_mis = topo.num_mis();
        let mut requested = Vec::with_capacity(num_mis);
        let mut executed = Vec::with_capacity(num_mis);
        let mut clamped = Vec::with_capacity(num_mis);
        for k in 0..num_mis {
            let tus = topo.tus_of(k);
            let backhaul = link.backhaul_bps[k];
            let want = queueing::slot_energy_cost(k, &decision.f[tus.clone()], &decision.m[tus.clone()], backhaul, cfg)
                .unwrap_or_else(|_| {
                    // a policy asked to migrate over a dead backhaul: drop the migration
                    decision.m[tus.clone()].iter_mut().for_each(|m| *m = 0);
                    queueing::slot_energy_cost(k, &decision.f[tus.clone()], &decision.m[tus.clone()], backhaul, cfg)
                        .expect("no migration left")
                });
            let (f, m) = (&mut decision.f[tus.clone()], &mut decision.m[tus.clone()]);
            let scaled = queueing::enforce_energy_budget(f, m, &want, self.state.battery[k]);
            let got = if scaled {
                queueing::slot_energy_cost(k, f, m, backhaul, cfg).expect("migration only shrinks")
            } else {
                want
            };
            requested.push(want);
            executed.push(got);
            clamped.push(scaled);
        }

        let mu: Vec<u64> = decision
            .f
            .iter()
            .map(|&f| queueing::processing_capacity(f, cfg))
            .collect();
        let outcome = SlotOutcome {
            theta: link.theta.clone(),
            mu,
            m: decision.m.clone(),
            arrivals,
            harvest,
            requested,
            executed,
        };

        let (q_tu, q_mis, flows) = queueing::step_task_queues(&self.state, &outcome, cfg);
        let battery: Vec<f64> = (0..num_mis)
            .map(|k| {
                queueing::step_energy(
                    self.state.battery[k],
                    outcome.harvest[k],
                    outcome.executed[k].total,
                    cfg,
                )
            })
            .collect();
        let z_virtual: Vec<f64> = (0..num_mis)
            .map(|k| {
                queueing::step_virtual_queue(
                    self.state.z_virtual[k],
                    outcome.requested[k].total,
                    self.state.battery[k],
                )
            })
            .collect();
        let next = NetworkState {
            slot: slot + 1,
            q_tu,
            q_mis,
            z_virtual,
            battery,
        };

        let drift = next.lyapunov() - self.state.lyapunov();
        let drift_bound = self.drift_constant + drift_linear_terms(&self.state, &outcome);

        let rec = SlotRecord {
            slot,
            throughput_bps: link.rate_bps.iter().sum(),
            rate_bps: link.rate_bps,
            q_tu: self.state.q_tu.clone(),
            q_mis: self.state.q_mis.clone(),
            battery_j: self.state.battery.clone(),
            z_virtual: self.state.z_virtual.clone(),
            arrivals: outcome.arrivals,
            harvest_j: outcome.harvest,
            theta: outcome.theta,
            mu: outcome.mu,
            migrate: outcome.m,
            requested_energy_j: outcome.requested.iter().map(|c| c.total).collect(),
            consumed_energy_j: outcome.executed.iter().map(|c| c.total).collect(),
            energy_clamped: clamped,
            processed_tasks: flows.processed.iter().sum(),
            migrated_tasks: flows.migrated.iter().sum(),
            dropped_tasks: flows.dropped.iter().sum(),
            drift,
            drift_bound,
        };
        self.gamma_prev = link.gamma;
        self.state = next;

        let horizon = self.cfg.sim.horizon_slots;
        let warm = slot >= warmup_slots(&self.cfg);
        let final_half = slot >= horizon / 2;
        self.acc.add(&rec, warm, final_half);
        rec
    }

    /// Runs the remaining slots up to the configured horizon.
    pub fn run(&mut self, sink: &mut dyn SlotSink) -> Result<RunSummary> {
        while self.state.slot < self.cfg.sim.horizon_slots {
            let rec = self.step();
            sink.record(&rec)?;
        }
        Ok(self.summary())
    }

    pub fn summary(&self) -> RunSummary {
        let acc = &self.acc;
        let t = acc.slots as f64;
        let warm_t = acc.warm_slots as f64;
        let exec_delay = self.cfg.traffic.exec_delay_slots;
        let tu_avg_queue: Vec<f64> = acc.tu_queue.iter().map(|q| ratio(*q, t)).collect();
        let tu_latency = latencies(&acc.tu_queue, &acc.tu_arrivals, exec_delay);
        let tu_latency_warm = latencies(&acc.tu_queue_warm, &acc.tu_arrivals_warm, exec_delay);
        let mis: Vec<MisSummary> = (0..self.topo.num_mis())
            .map(|k| MisSummary {
                avg_energy_j: ratio(acc.mis_energy[k], t),
                avg_requested_energy_j: ratio(acc.mis_requested[k], t),
                avg_battery_j: ratio(acc.mis_battery[k], t),
                final_z: self.state.z_virtual[k],
                final_z_over_t: ratio(self.state.z_virtual[k], t),
                clamp_rate: ratio(acc.mis_clamped[k] as f64, t),
            })
            .collect();
        let num_mis = mis.len() as f64;
        RunSummary {
            policy: self.scheduler.name().to_string(),
            seed: self.cfg.sim.seed,
            slots: acc.slots,
            warmup_slots: acc.slots - acc.warm_slots,
            avg_throughput_bps: ratio(acc.throughput, t),
            avg_throughput_warm_bps: ratio(acc.throughput_warm, warm_t),
            goodput_bps: ratio(
                acc.delivered as f64 * self.cfg.traffic.task_bits,
                t * self.cfg.sim.slot_seconds,
            ),
            avg_latency_slots: mean_defined(&tu_latency),
            avg_latency_warm_slots: mean_defined(&tu_latency_warm),
            tu_latency_slots: tu_latency,
            avg_queue_tasks: ratio(acc.total_queue, t),
            avg_queue_warm_tasks: ratio(acc.total_queue_warm, warm_t),
            tu_avg_queue_tasks: tu_avg_queue,
            avg_energy_j: ratio(mis.iter().map(|m| m.avg_energy_j).sum(), num_mis),
            max_final_z_over_t: mis.iter().map(|m| m.final_z_over_t).fold(0.0, f64::max),
            violation_rate: ratio(acc.mis_clamped.iter().sum::<u64>() as f64, t * num_mis),
            violation_rate_final_half: ratio(acc.clamped_half as f64, acc.half_pairs as f64),
            drift_violations: acc.drift_violations,
            mis,
        }
    }
}

fn warmup_slots(cfg: &ScenarioConfig) -> u64 {
    (cfg.sim.warmup_fraction * cfg.sim.horizon_slots as f64).floor() as u64
}

/// `sum Z (c - E) + sum Q_i (g - theta) + sum Q_ik (theta - mu - m)`.
pub fn drift_linear_terms(state: &NetworkState, outcome: &SlotOutcome) -> f64 {
    let energy: f64 = (0..state.z_virtual.len())
        .map(|k| state.z_virtual[k] * (outcome.requested[k].total - state.battery[k]))
        .sum();
    let tasks: f64 = (0..state.q_tu.len())
        .map(|i| {
            let theta = outcome.theta[i] as f64;
            state.q_tu[i] as f64 * (outcome.arrivals[i] as f64 - theta)
                + state.q_mis[i] as f64 * (theta - outcome.mu[i] as f64 - outcome.m[i] as f64)
        })
        .sum();
    energy + tasks
}

/// Runs `cfg` to its horizon, keeping every record in memory.
pub fn run_simulation(cfg: &ScenarioConfig) -> Result<(RunSummary, Vec<SlotRecord>)> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut records = Vec::with_capacity(cfg.sim.horizon_slots as usize);
    let summary = sim.run(&mut records)?;
    Ok((summary, records))
}

/// Runs `cfg` to its horizon, streaming records to `sink`.
pub fn run_with_sink(cfg: &ScenarioConfig, sink: &mut dyn SlotSink) -> Result<RunSummary> {
    Simulation::new(cfg.clone())?.run(sink)
}

/// Arithmetic mean of `H(t)` over the records.
pub fn throughput_metrics(records: &[SlotRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.throughput_bps).sum::<f64>() / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Policy, QueueMode};
    use rand::SeedableRng;

    fn small(policy: Policy, slots: u64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.control.policy = policy;
        cfg.sim.horizon_slots = slots;
        cfg
    }

    #[test]
    fn zero_max_arrivals_always_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| sample_arrivals(&mut rng, 0, None) == 0));
    }

    #[test]
    fn uniform_arrival_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_arrivals(&mut rng, 300, None) as f64).sum::<f64>() / n as f64;
        assert!((mean - 150.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn truncated_poisson_mean_and_support() {
        let cdf = truncated_poisson_cdf(20.0, 300);
        assert!((cdf.last().unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let draws: Vec<u64> = (0..n).map(|_| sample_arrivals(&mut rng, 300, Some(&cdf))).collect();
        let mean = draws.iter().sum::<u64>() as f64 / n as f64;
        assert!((mean - 20.0).abs() < 0.1);
        let tight = truncated_poisson_cdf(500.0, 10);
        assert!((0..100).all(|_| sample_arrivals(&mut rng, 10, Some(&tight)) <= 10));
    }

    #[test]
    fn harvest_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..1000).all(|_| sample_harvest(&mut rng, 0.0) == 0.0));
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_harvest(&mut rng, 4.0)).collect();
        assert!(draws.iter().all(|&e| (0.0..=4.0).contains(&e)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn arrival_streams_deterministic() {
        let cfg = ScenarioConfig::default();
        let mut a = ArrivalSampler::new(&cfg, 4, &RandomStreams::new(8));
        let mut b = ArrivalSampler::new(&cfg, 4, &RandomStreams::new(8));
        for _ in 0..10 {
            assert_eq!(a.sample(), b.sample());
        }
    }

    #[test]
    fn zero_horizon_gives_empty_run() {
        let (summary, records) = run_simulation(&small(Policy::Jcora, 0)).unwrap();
        assert!(records.is_empty());
        assert_eq!(summary.slots, 0);
        assert_eq!(summary.avg_throughput_bps, 0.0);
        assert_eq!(summary.avg_latency_slots, None);
    }

    #[test]
    fn same_seed_same_summary() {
        for policy in Policy::ALL {
            let cfg = small(policy, 300);
            let (a, _) = run_simulation(&cfg).unwrap();
            let (b, _) = run_simulation(&cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn no_load_single_link() {
        let mut cfg = small(Policy::Jcora, 200);
        cfg.network.num_mis = 1;
        cfg.network.tus_per_mis = vec![1];
        cfg.network.subchannels_per_mis = 1;
        cfg.traffic.max_arrivals = 0;
        let (summary, records) = run_simulation(&cfg).unwrap();
        assert!(records.iter().all(|r| r.total_queue() == 0));
        assert_eq!(summary.avg_queue_tasks, 0.0);
        assert_eq!(summary.avg_latency_slots, None);
        // no TU ever holds a task, so nothing is delivered
        assert_eq!(summary.goodput_bps, 0.0);
    }

    #[test]
    fn throughput_metric_examples() {
        let (_, mut records) = run_simulation(&small(Policy::Tra, 4)).unwrap();
        for (t, r) in records.iter_mut().enumerate() {
            r.throughput_bps = if t % 2 == 0 { 6.0 } else { 0.0 };
        }
        assert_eq!(throughput_metrics(&records), 3.0);
        records.iter_mut().for_each(|r| r.throughput_bps = 5.0);
        assert_eq!(throughput_metrics(&records), 5.0);
    }

    #[test]
    fn summary_throughput_matches_records() {
        let (summary, records) = run_simulation(&small(Policy::Jcora, 500)).unwrap();
        assert!((summary.avg_throughput_bps - throughput_metrics(&records)).abs() < 1e-6);
        for r in &records {
            let h: f64 = r.rate_bps.iter().sum();
            assert_eq!(h, r.throughput_bps);
        }
    }

    #[test]
    fn degenerate_inputs_do_not_panic() {
        for policy in Policy::ALL {
            let mut cfg = small(policy, 50);
            cfg.network.tus_per_mis = vec![0, 3, 0, 1, 0];
            cfg.energy.max_charge_j_per_slot = 0.0;
            run_simulation(&cfg).unwrap();
            cfg.network.tus_per_mis = vec![0; 5];
            run_simulation(&cfg).unwrap();
            cfg.radio.backhaul_ratio = 0.0;
            cfg.network.tus_per_mis = vec![2; 5];
            run_simulation(&cfg).unwrap();
        }
    }

    #[test]
    fn invariants_hold_every_slot() {
        for policy in Policy::ALL {
            let mut cfg = small(policy, 400);
            cfg.energy.max_charge_j_per_slot = 1.0;
            let (_, records) = run_simulation(&cfg).unwrap();
            let mut arrived = 0u64;
            let mut delivered = 0u64;
            for r in &records {
                assert!(r.battery_j.iter().all(|&e| (0.0..=20.0).contains(&e)));
                assert!(r.z_virtual.iter().all(|&z| z >= 0.0));
                // queues are recorded at the start of the slot
                assert_eq!(r.total_queue() + delivered, arrived, "{policy}: slot {}", r.slot);
                arrived += r.arrivals.iter().sum::<u64>();
                delivered += r.processed_tasks + r.migrated_tasks + r.dropped_tasks;
                for i in 0..r.theta.len() {
                    assert!(r.migrate[i] <= r.theta[i].saturating_sub(r.mu[i]));
                }
            }
            let last = records.last().unwrap();
            let mut sim = Simulation::new(cfg.clone()).unwrap();
            sim.run(&mut NullSink).unwrap();
            let end: u64 = sim.state().q_tu.iter().sum::<u64>() + sim.state().q_mis.iter().sum::<u64>();
            assert_eq!(end + delivered, arrived, "{policy}: conservation");
            assert!(last.slot == 399);
        }
    }

    #[test]
    fn literal_mode_keeps_drift_bound() {
        let mut cfg = small(Policy::Jcora, 2000);
        cfg.control.queue_mode = QueueMode::Literal;
        let (summary, _) = run_simulation(&cfg).unwrap();
        assert_eq!(summary.drift_violations, 0);
    }

    #[test]
    fn csv_sink_writes_header_and_rows() {
        let cfg = small(Policy::Jcora, 3);
        let mut buf = Vec::new();
        {
            let mut sink = CsvSink::new(&mut buf);
            run_with_sink(&cfg, &mut sink).unwrap();
            sink.flush().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let header = CsvSink::<Vec<u8>>::header(10, 5).join(",");
        assert_eq!(lines[0], header);
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
    }
}
