//! Joint computation offloading and resource allocation (JCORA).
//!
//! Each slot minimizes the drift-plus-penalty bound in closed form, one
//! subproblem at a time:
//!
//! 1. subchannels go to the TU with the smallest weight
//!    `([Q_ik - Q_i] tau / Y - V) * W log2(1 + p beta / (gamma + sigma^2))`;
//! 2. a TU offloads iff `[Q_ik - Q_i] G tau / Y - V G <= 0`, `G` being the
//!    rate of its assigned subchannels;
//! 3. compute shares take the interior optimum
//!    `sqrt(Q_ik / (3 alpha Y Z epsilon F^2))`, or `sqrt(Q_ik)`-proportional
//!    shares when those overflow the CPU;
//! 4. all tasks beyond local processing migrate iff `Z p Y / R - Q_ik <= 0`.
//!
//! Interference is unknown while cells decide in parallel, so weights use the
//! previous slot's realized interference.

use crate::channel;
use crate::decision::Decision;
use crate::policy::{LinkBudget, Scheduler, SlotContext};
use crate::queueing;
use crate::scenario::ScenarioConfig;

/// Weight of a TU on one subchannel. Negative weights favour assignment.
pub fn subchannel_weight(q_mis: u64, q_tu: u64, gain: f64, gamma: f64, cfg: &ScenarioConfig) -> f64 {
    let backlog = (q_mis as f64 - q_tu as f64) * cfg.sim.slot_seconds / cfg.traffic.task_bits;
    (backlog - cfg.control.control_v) * channel::subchannel_rate(cfg, gain, gamma)
}

/// Gain a scheduler sees for TU `i` on subchannel `n`: `beta`, or
/// `beta |h|^2` when fading-aware weights are enabled.
fn decision_gain(ctx: &SlotContext<'_>, i: usize, n: usize) -> f64 {
    let beta = ctx.chan.beta[i][n];
    if ctx.cfg.control.fading_aware_weights {
        beta * ctx.chan.fading2[i][n]
    } else {
        beta
    }
}

/// Assigns every subchannel of MIS `k` to its minimum-weight TU. Ties go to
/// the lowest TU index. Returns the owner (global TU index) per subchannel,
/// or `None` for every subchannel when the MIS has no TUs.
pub fn allocate_subchannels(k: usize, ctx: &SlotContext<'_>) -> Vec<Option<usize>> {
    let tus = ctx.topo.tus_of(k);
    let state = ctx.state;
    (0..ctx.cfg.network.subchannels_per_mis)
        .map(|n| {
            let gamma = ctx.gamma_estimate[k][n];
            let mut best: Option<(usize, f64)> = None;
            for i in tus.clone() {
                let w = subchannel_weight(
                    state.q_mis[i],
                    state.q_tu[i],
                    decision_gain(ctx, i, n),
                    gamma,
                    ctx.cfg,
                );
                if best.is_none_or(|(_, bw)| w < bw) {
                    best = Some((i, w));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect()
}

/// Offload iff `[Q_ik - Q_i] G tau / Y - V G <= 0`.
pub fn offload_decision(q_mis: u64, q_tu: u64, assigned_rate: f64, cfg: &ScenarioConfig) -> bool {
    let backlog = (q_mis as f64 - q_tu as f64) * cfg.sim.slot_seconds / cfg.traffic.task_bits;
    backlog * assigned_rate - cfg.control.control_v * assigned_rate <= 0.0
}

/// Migrate everything beyond local processing iff `Z p Y / R - Q_ik <= 0`.
/// A zero backhaul rate makes migration infinitely expensive.
pub fn migration_decision(
    z_virtual: f64,
    q_mis: u64,
    backhaul_bps: f64,
    theta: u64,
    mu: u64,
    cfg: &ScenarioConfig,
) -> u64 {
    if theta <= mu || backhaul_bps <= 0.0 {
        return 0;
    }
    let unit_cost = z_virtual * cfg.radio.mis_tx_power_w * cfg.traffic.task_bits / backhaul_bps;
    if unit_cost - q_mis as f64 <= 0.0 {
        theta - mu
    } else {
        0
    }
}

/// Compute shares of one MIS's TUs given their MIS backlogs.
///
/// A zero virtual queue leaves the interior optimum unbounded; it is clamped
/// to 1 like any other share above 1.
pub fn allocate_compute(q_mis: &[u64], z_virtual: f64, cfg: &ScenarioConfig) -> Vec<f64> {
    let coeff = 3.0
        * cfg.compute.cycles_per_bit
        * cfg.traffic.task_bits
        * z_virtual
        * cfg.energy.power_coeff
        * cfg.compute.cpu_hz.powi(2);
    let interior: Vec<f64> = q_mis
        .iter()
        .map(|&q| match q {
            0 => 0.0,
            _ if coeff <= 0.0 => 1.0,
            _ => (q as f64 / coeff).sqrt().min(1.0),
        })
        .collect();
    if interior.iter().sum::<f64>() <= 1.0 {
        return interior;
    }
    let roots: Vec<f64> = q_mis.iter().map(|&q| (q as f64).sqrt()).collect();
    let total: f64 = roots.iter().sum();
    roots.iter().map(|r| r / total).collect()
}

/// Subchannel assignment and offloading bits for every MIS, plus each TU's
/// assigned rate `G` as the scheduler estimates it.
pub fn offload_and_assign(ctx: &SlotContext<'_>) -> (Decision, Vec<f64>) {
    let cfg = ctx.cfg;
    let n_sub = cfg.network.subchannels_per_mis;
    let mut d = Decision::idle(ctx.topo.num_tus(), n_sub);
    let mut assigned = vec![0.0; ctx.topo.num_tus()];
    for k in 0..ctx.topo.num_mis() {
        let owners = allocate_subchannels(k, ctx);
        for (n, owner) in owners.iter().enumerate() {
            if let Some(i) = *owner {
                d.z[i][n] = 1.0;
                assigned[i] +=
                    channel::subchannel_rate(cfg, decision_gain(ctx, i, n), ctx.gamma_estimate[k][n]);
            }
        }
        for i in ctx.topo.tus_of(k) {
            d.y[i] = offload_decision(ctx.state.q_mis[i], ctx.state.q_tu[i], assigned[i], cfg);
        }
        if cfg.control.reallocate_idle {
            reallocate_idle(k, ctx, &mut d, &mut assigned);
        }
    }
    (d, assigned)
}

/// Hands subchannels owned by non-offloading TUs to the best offloading TU.
fn reallocate_idle(k: usize, ctx: &SlotContext<'_>, d: &mut Decision, assigned: &mut [f64]) {
    let tus = ctx.topo.tus_of(k);
    for n in 0..ctx.cfg.network.subchannels_per_mis {
        let Some(owner) = tus.clone().find(|&i| d.z[i][n] == 1.0) else {
            continue;
        };
        if d.y[owner] {
            continue;
        }
        let gamma = ctx.gamma_estimate[k][n];
        let best = tus
            .clone()
            .filter(|&i| d.y[i])
            .map(|i| {
                let w = subchannel_weight(
                    ctx.state.q_mis[i],
                    ctx.state.q_tu[i],
                    decision_gain(ctx, i, n),
                    gamma,
                    ctx.cfg,
                );
                (i, w)
            })
            .fold(None::<(usize, f64)>, |acc, (i, w)| match acc {
                Some((_, bw)) if bw <= w => acc,
                _ => Some((i, w)),
            });
        if let Some((i, _)) = best {
            d.z[owner][n] = 0.0;
            d.z[i][n] = 1.0;
            assigned[i] += channel::subchannel_rate(ctx.cfg, decision_gain(ctx, i, n), gamma);
        }
    }
}

/// Compute shares and migrations given realized offload capacities.
pub fn process_and_migrate(ctx: &SlotContext<'_>, d: &mut Decision, link: &LinkBudget) {
    for k in 0..ctx.topo.num_mis() {
        let tus = ctx.topo.tus_of(k);
        let q: Vec<u64> = tus.clone().map(|i| ctx.state.q_mis[i]).collect();
        let z = ctx.state.z_virtual[k];
        let shares = allocate_compute(&q, z, ctx.cfg);
        for (i, f) in tus.zip(shares) {
            d.f[i] = f;
            let mu = queueing::processing_capacity(f, ctx.cfg);
            d.m[i] = migration_decision(z, ctx.state.q_mis[i], link.backhaul_bps[k], link.theta[i], mu, ctx.cfg);
        }
    }
}

/// One slot of JCORA: subchannels, offloading, offload capacity, compute
/// shares, then migration. Compute runs before migration because the
/// migration bound needs the processing count.
pub fn schedule_slot(ctx: &SlotContext<'_>) -> Decision {
    let (mut d, _) = offload_and_assign(ctx);
    let link = LinkBudget::realize(&d, ctx);
    process_and_migrate(ctx, &mut d, &link);
    d
}

/// Constant `C` of the per-slot drift bound:
/// `sum_k { E_max^2 + sum_i [theta_max^2 + g_max^2 + mu_max^2 / 2] }`.
pub fn drift_bound_constant(cfg: &ScenarioConfig) -> f64 {
    drift_bound_from_maxima(
        &cfg.network.tus_per_mis,
        cfg.energy.battery_capacity_j,
        cfg.traffic.max_offload_tasks as f64,
        cfg.traffic.max_arrivals as f64,
        cfg.max_processed_tasks() as f64,
    )
}

pub fn drift_bound_from_maxima(
    tus_per_mis: &[usize],
    e_max: f64,
    theta_max: f64,
    g_max: f64,
    mu_max: f64,
) -> f64 {
    let per_tu = theta_max.powi(2) + g_max.powi(2) + 0.5 * mu_max.powi(2);
    tus_per_mis
        .iter()
        .map(|&m| e_max.powi(2) + m as f64 * per_tu)
        .sum()
}

#[derive(Debug, Default, Clone)]
pub struct Jcora;

impl Scheduler for Jcora {
    fn name(&self) -> &'static str {
        "jcora"
    }

    fn decide(&mut self, ctx: &SlotContext<'_>) -> Decision {
        schedule_slot(ctx)
    }
}
