//! Task, battery and virtual energy queue dynamics.

use crate::error::{Error, Result};
use crate::scenario::{QueueMode, ScenarioConfig};

/// Queue backlogs at the start of a slot.
///
/// `q_mis[i]` is TU `i`'s buffer at its home MIS, so both task vectors are
/// indexed by global TU index.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub slot: u64,
    pub q_tu: Vec<u64>,
    pub q_mis: Vec<u64>,
    pub z_virtual: Vec<f64>,
    pub battery: Vec<f64>,
}

impl NetworkState {
    /// Empty queues, empty virtual queues and empty batteries.
    pub fn empty(num_tus: usize, num_mis: usize) -> Self {
        Self {
            slot: 0,
            q_tu: vec![0; num_tus],
            q_mis: vec![0; num_tus],
            z_virtual: vec![0.0; num_mis],
            battery: vec![0.0; num_mis],
        }
    }

    /// `L = 1/2 sum (Z_k^2 + Q_i^2 + Q_{i,k}^2)`.
    pub fn lyapunov(&self) -> f64 {
        let z: f64 = self.z_virtual.iter().map(|z| z * z).sum();
        let q: f64 = self
            .q_tu
            .iter()
            .chain(&self.q_mis)
            .map(|&q| (q as f64).powi(2))
            .sum();
        0.5 * (z + q)
    }

    pub fn total_tasks(&self, tu: usize) -> u64 {
        self.q_tu[tu] + self.q_mis[tu]
    }
}

/// Everything that happened in one slot, as consumed by the state update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotOutcome {
    pub theta: Vec<u64>,
    pub mu: Vec<u64>,
    pub m: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub harvest: Vec<f64>,
    /// Consumption the decision asked for, per MIS.
    pub requested: Vec<EnergyCost>,
    /// Consumption actually drawn after the battery clamp, per MIS.
    pub executed: Vec<EnergyCost>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyCost {
    pub base: f64,
    pub transmit: f64,
    pub compute: f64,
    pub total: f64,
}

/// Tasks moved by the queue update, per TU.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueFlows {
    pub transferred: Vec<u64>,
    pub processed: Vec<u64>,
    pub migrated: Vec<u64>,
    pub dropped: Vec<u64>,
}

/// `floor(r tau / Y)`, capped at `theta^max`.
pub fn offload_capacity(rate_bps: f64, cfg: &ScenarioConfig) -> u64 {
    let tasks = (rate_bps * cfg.sim.slot_seconds / cfg.traffic.task_bits).floor();
    (tasks.max(0.0) as u64).min(cfg.traffic.max_offload_tasks)
}

/// `floor(f F tau / (alpha Y))`.
pub fn processing_capacity(share: f64, cfg: &ScenarioConfig) -> u64 {
    let cycles = share * cfg.compute.cpu_hz * cfg.sim.slot_seconds;
    (cycles / (cfg.compute.cycles_per_bit * cfg.traffic.task_bits))
        .floor()
        .max(0.0) as u64
}

pub fn compute_energy(shares: &[f64], cfg: &ScenarioConfig) -> f64 {
    let eps = cfg.energy.power_coeff;
    let cpu = cfg.compute.cpu_hz;
    shares
        .iter()
        .map(|f| eps * (f * cpu).powi(3) * cfg.sim.slot_seconds)
        .sum()
}

/// Energy drawn by one MIS: base + migration transmission + computation.
pub fn slot_energy_cost(
    mis: usize,
    shares: &[f64],
    migrated: &[u64],
    backhaul_bps: f64,
    cfg: &ScenarioConfig,
) -> Result<EnergyCost> {
    let tasks: u64 = migrated.iter().sum();
    let transmit = if tasks == 0 {
        0.0
    } else if backhaul_bps <= 0.0 {
        return Err(Error::InfeasibleMigration { mis, tasks });
    } else {
        cfg.radio.mis_tx_power_w * tasks as f64 * cfg.traffic.task_bits / backhaul_bps
    };
    let base = cfg.energy.base_power_j_per_slot;
    let compute = compute_energy(shares, cfg);
    Ok(EnergyCost {
        base,
        transmit,
        compute,
        total: base + transmit + compute,
    })
}

/// Scales one MIS's compute shares, then its migrations, until the slot's
/// consumption fits in the stored energy. Returns `true` when any scaling
/// was needed.
pub fn enforce_energy_budget(
    shares: &mut [f64],
    migrated: &mut [u64],
    cost: &EnergyCost,
    stored_j: f64,
) -> bool {
    if cost.total <= stored_j {
        return false;
    }
    let compute_budget = stored_j - cost.base - cost.transmit;
    if compute_budget >= 0.0 {
        // compute energy is cubic in the shares
        let s = (compute_budget / cost.compute).cbrt() * (1.0 - 1e-12);
        shares.iter_mut().for_each(|f| *f *= s);
        return true;
    }
    shares.iter_mut().for_each(|f| *f = 0.0);
    let transmit_budget = stored_j - cost.base;
    if transmit_budget > 0.0 && cost.transmit > 0.0 {
        let s = transmit_budget / cost.transmit;
        migrated
            .iter_mut()
            .for_each(|m| *m = (*m as f64 * s).floor() as u64);
    } else {
        migrated.iter_mut().for_each(|m| *m = 0);
    }
    true
}

/// `E' = min(max(0, E + e - c), E_max)`.
pub fn step_energy(battery: f64, harvest: f64, consumed: f64, cfg: &ScenarioConfig) -> f64 {
    (battery + harvest - consumed)
        .max(0.0)
        .min(cfg.energy.battery_capacity_j)
}

/// `Z' = max(Z + c - E, 0)` with `E` the battery before this slot's update.
pub fn step_virtual_queue(z: f64, consumed: f64, battery: f64) -> f64 {
    (z + consumed - battery).max(0.0)
}

/// Advances both task queues of every TU.
///
/// The TU queue follows `max(Q_i - theta, 0) + g`. The MIS queue loses
/// `mu + m` and gains the transferred tasks: `min(theta, Q_i)` in
/// conserving mode, the raw `theta` in literal mode. Finite buffers drop
/// the overflow.
pub fn step_task_queues(
    state: &NetworkState,
    outcome: &SlotOutcome,
    cfg: &ScenarioConfig,
) -> (Vec<u64>, Vec<u64>, QueueFlows) {
    let n = state.q_tu.len();
    let mut flows = QueueFlows {
        transferred: vec![0; n],
        processed: vec![0; n],
        migrated: vec![0; n],
        dropped: vec![0; n],
    };
    let mut q_tu = Vec::with_capacity(n);
    let mut q_mis = Vec::with_capacity(n);
    for i in 0..n {
        let theta = outcome.theta[i];
        let transferred = match cfg.control.queue_mode {
            QueueMode::Conserving => theta.min(state.q_tu[i]),
            QueueMode::Literal => theta,
        };
        let mut tu = state.q_tu[i].saturating_sub(theta) + outcome.arrivals[i];
        if let Some(cap) = cfg.traffic.tu_buffer_tasks {
            if tu > cap {
                flows.dropped[i] += tu - cap;
                tu = cap;
            }
        }

        let held = state.q_mis[i];
        let processed = outcome.mu[i].min(held);
        let migrated = outcome.m[i].min(held - processed);
        let mut mis = held - processed - migrated + transferred;
        if let Some(cap) = cfg.traffic.mis_buffer_tasks {
            if mis > cap {
                flows.dropped[i] += mis - cap;
                mis = cap;
            }
        }
        flows.transferred[i] = transferred;
        flows.processed[i] = processed;
        flows.migrated[i] = migrated;
        q_tu.push(tu);
        q_mis.push(mis);
    }
    (q_tu, q_mis, flows)
}

/// Little's-law latency `mean(Q_i + Q_{i,k}) / g_bar + T^c`, in slots.
///
/// Returns `None` when the TU saw no arrivals, since the ratio is undefined.
pub fn average_latency(queue_samples: &[u64], mean_arrival: f64, exec_delay_slots: f64) -> Option<f64> {
    if queue_samples.is_empty() || mean_arrival <= 0.0 {
        return None;
    }
    let avg = queue_samples.iter().map(|&q| q as f64).sum::<f64>() / queue_samples.len() as f64;
    Some(avg / mean_arrival + exec_delay_slots)
}
