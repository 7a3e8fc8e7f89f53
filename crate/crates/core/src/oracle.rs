//! Brute-force reference for the per-slot objective, used to certify the
//! closed-form JCORA decisions on small instances.
//!
//! The per-slot objective is
//! `sum_k Z_k c_k - V sum_i r_i + sum_i (Q_ik - Q_i) theta_i - sum_i Q_ik (mu_i + m_i)`.
//! It splits into a link part in `(y, z)` and an MIS part in `(f, m)`; each
//! JCORA decision is checked against exhaustive search of its own part with
//! the other variables held at JCORA's values. Rate terms inside the
//! offloading and subchannel parts use the estimated interference the
//! scheduler saw, and the un-floored offload count `r tau / Y` the closed
//! forms are derived from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{self, ChannelRealization};
use crate::decision::Decision;
use crate::error::{Error, Result};
use crate::jcora;
use crate::policy::{LinkBudget, SlotContext};
use crate::queueing::{self, NetworkState};
use crate::scenario::{build_topology, RandomStreams, ScenarioConfig, Topology};

const REL_TOL: f64 = 1e-9;

/// Default compute grid resolution (shares in steps of `1 / 100`).
pub const DEFAULT_GRID: u32 = 100;
/// Default cap on the joint enumeration size.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

/// A tiny network with a fully specified state and channel.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub cfg: ScenarioConfig,
    pub topo: Topology,
    pub state: NetworkState,
    pub chan: ChannelRealization,
    /// Interference estimate per `(k, n)` handed to the scheduler.
    pub gamma_estimate: Vec<Vec<f64>>,
    pub arrivals: Vec<u64>,
    pub grid: u32,
    pub budget: u128,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

impl SmallInstance {
    /// Random instance with at most 2 MISs, 3 TUs per MIS and 3 subchannels.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut cfg = ScenarioConfig::default();
        let num_mis = rng.random_range(1..=2);
        cfg.network.num_mis = num_mis;
        cfg.network.subchannels_per_mis = rng.random_range(1..=3);
        loop {
            cfg.network.tus_per_mis = (0..num_mis).map(|_| rng.random_range(0..=3)).collect();
            if cfg.num_tus() > 0 {
                break;
            }
        }
        cfg.control.control_v = [0.0, 0.01, 0.1, 1.0, 10.0][rng.random_range(0..5)];
        cfg.control.fading_aware_weights = rng.random_bool(0.25);
        cfg.sim.seed = rng.random();

        let n_sub = cfg.network.subchannels_per_mis;
        let topo = build_topology(&cfg, &RandomStreams::new(cfg.sim.seed));
        let num_tus = topo.num_tus();
        let small = |rng: &mut R| {
            if rng.random_bool(0.2) {
                0
            } else {
                rng.random_range(0..=3000)
            }
        };
        let state = NetworkState {
            slot: 0,
            q_tu: (0..num_tus).map(|_| small(rng)).collect(),
            q_mis: (0..num_tus).map(|_| small(rng)).collect(),
            z_virtual: (0..num_mis)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        0.0
                    } else {
                        log_uniform(rng, 1e-1, 1e8)
                    }
                })
                .collect(),
            battery: (0..num_mis).map(|_| rng.random_range(0.0..=20.0)).collect(),
        };
        let chan = ChannelRealization {
            slot: 0,
            beta: (0..num_tus)
                .map(|_| (0..n_sub).map(|_| log_uniform(rng, 1e-11, 1e-8)).collect())
                .collect(),
            fading2: (0..num_tus)
                .map(|_| {
                    (0..n_sub)
                        .map(|_| channel::sample_small_scale(cfg.radio.rician_k, rng))
                        .collect()
                })
                .collect(),
            beta_backhaul: (0..num_mis)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0.0
                    } else {
                        log_uniform(rng, 1e-14, 1e-9)
                    }
                })
                .collect(),
            horizontal_m: vec![0.0; num_tus],
        };
        let gamma_estimate = (0..num_mis)
            .map(|_| {
                (0..n_sub)
                    .map(|_| {
                        if num_mis == 1 || rng.random_bool(0.3) {
                            0.0
                        } else {
                            log_uniform(rng, 1e-14, 1e-9)
                        }
                    })
                    .collect()
            })
            .collect();
        let arrivals = (0..num_tus).map(|_| rng.random_range(0..=300)).collect();
        Self {
            cfg,
            topo,
            state,
            chan,
            gamma_estimate,
            arrivals,
            grid: DEFAULT_GRID,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn context(&self) -> SlotContext<'_> {
        SlotContext {
            cfg: &self.cfg,
            topo: &self.topo,
            state: &self.state,
            chan: &self.chan,
            gamma_estimate: &self.gamma_estimate,
            arrivals: &self.arrivals,
        }
    }

    /// Size of the joint action space at compute resolution `grid`, with
    /// migration restricted to its two extreme values (the objective is
    /// linear in `m`).
    pub fn joint_size(&self, grid: u32) -> u128 {
        let n = self.cfg.network.subchannels_per_mis as u32;
        (0..self.topo.num_mis())
            .map(|k| {
                let m = self.topo.tus_of(k).len() as u32;
                let links = 2u128.pow(m) * (m as u128 + 1).pow(n);
                links * simplex_points(m, grid) * 2u128.pow(m)
            })
            .product()
    }
}

/// Number of points `a / grid` with `sum a <= grid`, i.e. C(grid + m, m).
fn simplex_points(m: u32, grid: u32) -> u128 {
    (1..=m as u128).fold(1u128, |acc, j| acc * (grid as u128 + j) / j)
}

/// Calls `visit` on every vector of `m` nonnegative integers summing to at most `grid`.
fn for_each_simplex_point(m: usize, grid: u32, visit: &mut dyn FnMut(&[u32])) {
    fn rec(pt: &mut Vec<u32>, m: usize, left: u32, visit: &mut dyn FnMut(&[u32])) {
        if pt.len() == m {
            visit(pt);
            return;
        }
        for a in 0..=left {
            pt.push(a);
            rec(pt, m, left - a, visit);
            pt.pop();
        }
    }
    rec(&mut Vec::with_capacity(m), m, grid, visit);
}

fn noise(cfg: &ScenarioConfig, bandwidth: f64) -> f64 {
    10f64.powf((cfg.radio.noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth
}

fn link_rate(cfg: &ScenarioConfig, gain: f64, gamma: f64) -> f64 {
    let w = cfg.radio.subchannel_bandwidth_hz;
    w * (1.0 + cfg.radio.tu_tx_power_w * gain / (gamma + noise(cfg, w))).log2()
}

fn backhaul(cfg: &ScenarioConfig, beta: f64) -> f64 {
    let bw = cfg.radio.backhaul_ratio * cfg.radio.cbs_bandwidth_hz;
    if bw <= 0.0 {
        return 0.0;
    }
    bw * (1.0 + cfg.radio.mis_tx_power_w * beta / noise(cfg, bw)).log2()
}

fn per_slot_tasks(cfg: &ScenarioConfig) -> f64 {
    cfg.sim.slot_seconds / cfg.traffic.task_bits
}

fn cpu_tasks(cfg: &ScenarioConfig) -> f64 {
    cfg.compute.cpu_hz * cfg.sim.slot_seconds / (cfg.compute.cycles_per_bit * cfg.traffic.task_bits)
}

fn cube_cost(cfg: &ScenarioConfig) -> f64 {
    cfg.energy.power_coeff * cfg.compute.cpu_hz.powi(3) * cfg.sim.slot_seconds
}

/// Uplink rates with fading under the given interference.
fn uplink_rates(
    decision: &Decision,
    chan: &ChannelRealization,
    gamma: &[Vec<f64>],
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> Vec<f64> {
    (0..topo.num_tus())
        .map(|i| {
            if !decision.y[i] {
                return 0.0;
            }
            let k = topo.home_mis[i];
            decision.z[i]
                .iter()
                .enumerate()
                .map(|(n, &z)| z * link_rate(cfg, chan.beta[i][n] * chan.fading2[i][n], gamma[k][n]))
                .sum()
        })
        .collect()
}

/// The per-slot objective with floored `theta` and `mu`, constants dropped.
/// `gamma` is the interference under which rates are evaluated.
pub fn p2_objective(
    state: &NetworkState,
    decision: &Decision,
    chan: &ChannelRealization,
    gamma: &[Vec<f64>],
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    let rates = uplink_rates(decision, chan, gamma, topo, cfg);
    let theta: Vec<u64> = rates
        .iter()
        .map(|r| ((r * per_slot_tasks(cfg)).floor() as u64).min(cfg.traffic.max_offload_tasks))
        .collect();
    let mu: Vec<u64> = decision.f.iter().map(|f| (f * cpu_tasks(cfg)).floor() as u64).collect();
    decision.check(topo, true, Some((&theta, &mu)))?;
    let mut value = 0.0;
    for k in 0..topo.num_mis() {
        let tus = topo.tus_of(k);
        let migrated: u64 = decision.m[tus.clone()].iter().sum();
        let r_back = backhaul(cfg, chan.beta_backhaul[k]);
        if migrated > 0 && r_back <= 0.0 {
            return Err(Error::InfeasibleMigration { mis: k, tasks: migrated });
        }
        let transmit = if migrated > 0 {
            cfg.radio.mis_tx_power_w * cfg.traffic.task_bits * migrated as f64 / r_back
        } else {
            0.0
        };
        let compute: f64 = decision.f[tus.clone()].iter().map(|f| cube_cost(cfg) * f.powi(3)).sum();
        value += state.z_virtual[k] * (cfg.energy.base_power_j_per_slot + transmit + compute);
    }
    for i in 0..topo.num_tus() {
        let (qt, qm) = (state.q_tu[i] as f64, state.q_mis[i] as f64);
        value += -cfg.control.control_v * rates[i] + (qm - qt) * theta[i] as f64
            - qm * (mu[i] + decision.m[i]) as f64;
    }
    Ok(value)
}

/// Same objective assembled from the library's own channel and queueing
/// routines as a link part plus an MIS part.
pub fn p2_objective_split(
    state: &NetworkState,
    decision: &Decision,
    chan: &ChannelRealization,
    gamma: &[Vec<f64>],
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    let mut link_part = 0.0;
    let mut theta = vec![0; topo.num_tus()];
    for i in 0..topo.num_tus() {
        let k = topo.home_mis[i];
        let r = channel::uplink_rate(
            decision.y[i],
            &decision.z[i],
            &chan.beta[i],
            &chan.fading2[i],
            &gamma[k],
            cfg,
        );
        theta[i] = queueing::offload_capacity(r, cfg);
        link_part += (state.q_mis[i] as f64 - state.q_tu[i] as f64) * theta[i] as f64
            - cfg.control.control_v * r;
    }
    let mut mis_part = 0.0;
    for k in 0..topo.num_mis() {
        let tus = topo.tus_of(k);
        let cost = queueing::slot_energy_cost(
            k,
            &decision.f[tus.clone()],
            &decision.m[tus.clone()],
            channel::backhaul_rate(cfg, chan.beta_backhaul[k]),
            cfg,
        )?;
        let served: f64 = tus
            .map(|i| {
                let mu = queueing::processing_capacity(decision.f[i], cfg);
                state.q_mis[i] as f64 * (mu + decision.m[i]) as f64
            })
            .sum();
        mis_part += state.z_virtual[k] * cost.total - served;
    }
    Ok(link_part + mis_part)
}

/// Link-part value of TU `i` given its assigned estimated rate `g`:
/// `(Q_ik - Q_i) g tau / Y - V g`.
fn link_value(state: &NetworkState, i: usize, g: f64, cfg: &ScenarioConfig) -> f64 {
    (state.q_mis[i] as f64 - state.q_tu[i] as f64) * g * per_slot_tasks(cfg) - cfg.control.control_v * g
}

/// Gain the subchannel rule ranks TUs by.
fn ranking_gain(inst: &SmallInstance, i: usize, n: usize) -> f64 {
    let beta = inst.chan.beta[i][n];
    if inst.cfg.control.fading_aware_weights {
        beta * inst.chan.fading2[i][n]
    } else {
        beta
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Best full subchannel assignment of MIS `k` (every subchannel to one TU),
/// lexicographically first among ties. Returns `(owners, value)`.
pub fn brute_force_subchannels(inst: &SmallInstance, k: usize) -> Option<(Vec<usize>, f64)> {
    let tus: Vec<usize> = inst.topo.tus_of(k).collect();
    if tus.is_empty() {
        return None;
    }
    let n_sub = inst.cfg.network.subchannels_per_mis;
    let mut owners = vec![0usize; n_sub];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let value = assignment_value(inst, k, &tus, &owners);
        if best.as_ref().is_none_or(|(_, v)| value < *v && !close(value, *v)) {
            best = Some((owners.iter().map(|&o| tus[o]).collect(), value));
        }
        // odometer over M^N assignments
        let mut pos = n_sub;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            owners[pos] += 1;
            if owners[pos] < tus.len() {
                break;
            }
            owners[pos] = 0;
        }
    }
}

fn assignment_value(inst: &SmallInstance, k: usize, tus: &[usize], owners: &[usize]) -> f64 {
    tus.iter()
        .enumerate()
        .map(|(local, &i)| {
            let g: f64 = owners
                .iter()
                .enumerate()
                .filter(|(_, &o)| o == local)
                .map(|(n, _)| link_rate(&inst.cfg, ranking_gain(inst, i, n), inst.gamma_estimate[k][n]))
                .sum();
            link_value(&inst.state, i, g, &inst.cfg)
        })
        .sum()
}

/// MIS-part value of compute shares alone, with un-floored processing.
fn compute_value(inst: &SmallInstance, k: usize, shares: &[f64]) -> f64 {
    let z = inst.state.z_virtual[k];
    inst.topo
        .tus_of(k)
        .zip(shares)
        .map(|(i, &f)| {
            z * cube_cost(&inst.cfg) * f.powi(3) - inst.state.q_mis[i] as f64 * f * cpu_tasks(&inst.cfg)
        })
        .sum()
}

/// Best compute shares of MIS `k` on the simplex grid of resolution `grid`.
pub fn brute_force_compute(inst: &SmallInstance, k: usize, grid: u32) -> (Vec<f64>, f64) {
    let m = inst.topo.tus_of(k).len();
    let mut best = (vec![0.0; m], compute_value(inst, k, &vec![0.0; m]));
    for_each_simplex_point(m, grid, &mut |pt| {
        let shares: Vec<f64> = pt.iter().map(|&a| a as f64 / grid as f64).collect();
        let v = compute_value(inst, k, &shares);
        if v < best.1 && !close(v, best.1) {
            best = (shares, v);
        }
    });
    best
}

/// Worst-case loss from restricting shares to the grid when the continuous
/// optimum is interior: `sum_i 3 Z eps F^3 tau / G^2`.
pub fn grid_gap_bound(inst: &SmallInstance, k: usize, grid: u32) -> f64 {
    let m = inst.topo.tus_of(k).len() as f64;
    m * 3.0 * inst.state.z_virtual[k] * cube_cost(&inst.cfg) / (grid as f64).powi(2)
}

/// Best integer migration for TU `i` over `0..=bound`.
pub fn brute_force_migration(inst: &SmallInstance, i: usize, bound: u64, backhaul_bps: f64) -> (u64, f64) {
    let k = inst.topo.home_mis[i];
    let z = inst.state.z_virtual[k];
    let q = inst.state.q_mis[i] as f64;
    let cfg = &inst.cfg;
    let value = |m: u64| {
        if m == 0 {
            return 0.0;
        }
        z * cfg.radio.mis_tx_power_w * cfg.traffic.task_bits * m as f64 / backhaul_bps - q * m as f64
    };
    let top = if backhaul_bps > 0.0 { bound } else { 0 };
    let mut best = (0, 0.0);
    for m in 1..=top {
        let v = value(m);
        if v < best.1 && !close(v, best.1) {
            best = (m, v);
        }
    }
    best
}

/// Exhaustive joint minimum of the per-slot objective over
/// `y`, `z` (including unassigned subchannels), compute shares on a grid of
/// resolution `grid`, and migration at its extreme values. Interference is
/// the one each candidate itself creates.
pub fn brute_force_slot(inst: &SmallInstance, grid: u32) -> Result<(Decision, f64)> {
    let size = inst.joint_size(grid);
    if size > inst.budget {
        return Err(Error::BudgetExceeded {
            size,
            budget: inst.budget,
        });
    }
    let cfg = &inst.cfg;
    let topo = &inst.topo;
    let n_sub = cfg.network.subchannels_per_mis;
    let num_tus = topo.num_tus();
    // link configurations per MIS: (y bits, owner per subchannel or none)
    let per_mis: Vec<Vec<(Vec<bool>, Vec<Option<usize>>)>> = (0..topo.num_mis())
        .map(|k| {
            let tus: Vec<usize> = topo.tus_of(k).collect();
            let mut out = Vec::new();
            for ybits in 0..(1u32 << tus.len()) {
                let y: Vec<bool> = (0..tus.len()).map(|b| ybits >> b & 1 == 1).collect();
                let choices = tus.len() + 1;
                for code in 0..choices.pow(n_sub as u32) {
                    let mut c = code;
                    let owners = (0..n_sub)
                        .map(|_| {
                            let o = c % choices;
                            c /= choices;
                            (o > 0).then(|| tus[o - 1])
                        })
                        .collect();
                    out.push((y.clone(), owners));
                }
            }
            out
        })
        .collect();

    let mut best: Option<(Decision, f64)> = None;
    let mut index = vec![0usize; topo.num_mis()];
    loop {
        let mut d = Decision::idle(num_tus, n_sub);
        for (k, &ix) in index.iter().enumerate() {
            let (y, owners) = &per_mis[k][ix];
            for (local, i) in topo.tus_of(k).enumerate() {
                d.y[i] = y[local];
            }
            for (n, owner) in owners.iter().enumerate() {
                if let Some(i) = owner {
                    d.z[*i][n] = 1.0;
                }
            }
        }
        let gamma = own_interference(&d, inst);
        let rates = uplink_rates(&d, &inst.chan, &gamma, topo, cfg);
        let theta: Vec<u64> = rates
            .iter()
            .map(|r| ((r * per_slot_tasks(cfg)).floor() as u64).min(cfg.traffic.max_offload_tasks))
            .collect();
        for k in 0..topo.num_mis() {
            best_mis_part(inst, k, grid, &theta, &mut d);
        }
        let value = p2_objective(&inst.state, &d, &inst.chan, &gamma, topo, cfg)?;
        if best.as_ref().is_none_or(|(_, v)| value < *v && !close(value, *v)) {
            best = Some((d, value));
        }
        let mut pos = index.len();
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one candidate"));
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < per_mis[pos].len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Interference a candidate creates, with serving-cell or cross-cell gains
/// as configured.
fn own_interference(d: &Decision, inst: &SmallInstance) -> Vec<Vec<f64>> {
    channel::interference_matrix(d, &inst.chan, &inst.topo, &inst.cfg)
}

/// Fills `f` and `m` of MIS `k` with the grid-and-extremes minimiser of its
/// MIS part plus the floored processing term.
fn best_mis_part(inst: &SmallInstance, k: usize, grid: u32, theta: &[u64], d: &mut Decision) {
    let cfg = &inst.cfg;
    let tus: Vec<usize> = inst.topo.tus_of(k).collect();
    let r_back = backhaul(cfg, inst.chan.beta_backhaul[k]);
    let z = inst.state.z_virtual[k];
    let unit = if r_back > 0.0 {
        z * cfg.radio.mis_tx_power_w * cfg.traffic.task_bits / r_back
    } else {
        f64::INFINITY
    };
    let mut best: Option<(Vec<f64>, Vec<u64>, f64)> = None;
    for_each_simplex_point(tus.len(), grid, &mut |pt| {
        let mut value = 0.0;
        let mut ms = Vec::with_capacity(tus.len());
        let shares: Vec<f64> = pt.iter().map(|&a| a as f64 / grid as f64).collect();
        for (local, &i) in tus.iter().enumerate() {
            let f = shares[local];
            let mu = (f * cpu_tasks(cfg)).floor() as u64;
            let q = inst.state.q_mis[i] as f64;
            value += z * cube_cost(cfg) * f.powi(3) - q * mu as f64;
            let bound = theta[i].saturating_sub(mu);
            let m = if bound > 0 && unit.is_finite() && bound as f64 * (unit - q) < 0.0 {
                bound
            } else {
                0
            };
            if m > 0 {
                value += (unit - q) * m as f64;
            }
            ms.push(m);
        }
        if best.as_ref().is_none_or(|(_, _, v)| value < *v && !close(value, *v)) {
            best = Some((shares, ms, value));
        }
    });
    let (shares, ms, _) = best.expect("simplex has the origin");
    for (local, &i) in tus.iter().enumerate() {
        d.f[i] = shares[local];
        d.m[i] = ms[local];
    }
}

/// Outcome of certifying one instance.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceReport {
    pub index: usize,
    pub certified: bool,
    pub mismatches: Vec<String>,
    /// `Some(oracle, jcora)` when the joint search fit in the budget.
    pub joint: Option<(f64, f64)>,
}

/// Summary over many instances.
#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub seed: u64,
    pub instances: usize,
    pub certified: usize,
    pub joint_checked: usize,
    pub failures: Vec<InstanceReport>,
}

impl CertificationReport {
    pub fn all_certified(&self) -> bool {
        self.certified == self.instances
    }
}

/// Checks JCORA's decision on `inst` against each exhaustive subproblem
/// search, and against the joint search when it fits in the budget.
pub fn certify_instance(inst: &SmallInstance, index: usize) -> InstanceReport {
    let ctx = inst.context();
    let cfg = &inst.cfg;
    let topo = &inst.topo;
    let mut bad = Vec::new();

    let (mut d, _) = jcora::offload_and_assign(&ctx);
    let link = LinkBudget::realize(&d, &ctx);
    jcora::process_and_migrate(&ctx, &mut d, &link);
    let mu: Vec<u64> = d.f.iter().map(|&f| queueing::processing_capacity(f, cfg)).collect();
    if let Err(e) = d.check(topo, true, Some((&link.theta, &mu))) {
        bad.push(format!("infeasible: {e}"));
    }

    for k in 0..topo.num_mis() {
        let tus: Vec<usize> = topo.tus_of(k).collect();
        if tus.is_empty() {
            continue;
        }
        // subchannels: full assignments only, as every subchannel is handed out
        let owners: Option<Vec<usize>> = (0..cfg.network.subchannels_per_mis)
            .map(|n| tus.iter().copied().find(|&i| d.z[i][n] == 1.0))
            .collect();
        match (owners, brute_force_subchannels(inst, k)) {
            (Some(owners), Some((_, best))) => {
                let local: Vec<usize> = owners
                    .iter()
                    .map(|o| tus.iter().position(|i| i == o).expect("own TU"))
                    .collect();
                let got = assignment_value(inst, k, &tus, &local);
                if !close(got, best) {
                    bad.push(format!("MIS {k}: subchannel value {got} vs optimum {best}"));
                }
            }
            _ => bad.push(format!("MIS {k}: subchannel left unassigned")),
        }

        // offloading bit given the assignment
        for &i in &tus {
            let g: f64 = (0..cfg.network.subchannels_per_mis)
                .filter(|&n| d.z[i][n] == 1.0)
                .map(|n| link_rate(cfg, ranking_gain(inst, i, n), inst.gamma_estimate[k][n]))
                .sum();
            let on = link_value(&inst.state, i, g, cfg);
            let got = if d.y[i] { on } else { 0.0 };
            if !close(got, on.min(0.0)) {
                bad.push(format!("TU {i}: offload value {got} vs optimum {}", on.min(0.0)));
            }
        }

        // compute shares
        let z = inst.state.z_virtual[k];
        let coeff = 3.0 * cfg.compute.cycles_per_bit * cfg.traffic.task_bits * z
            * cfg.energy.power_coeff
            * cfg.compute.cpu_hz.powi(2);
        let unconstrained: f64 = tus
            .iter()
            .map(|&i| {
                let q = inst.state.q_mis[i] as f64;
                if q == 0.0 {
                    0.0
                } else if coeff <= 0.0 {
                    1.0
                } else {
                    (q / coeff).sqrt().min(1.0)
                }
            })
            .sum();
        let shares: Vec<f64> = tus.iter().map(|&i| d.f[i]).collect();
        if unconstrained <= 1.0 {
            let got = compute_value(inst, k, &shares);
            let (_, grid_best) = brute_force_compute(inst, k, inst.grid);
            let gap = grid_gap_bound(inst, k, inst.grid);
            let slack = REL_TOL * got.abs().max(grid_best.abs()).max(1.0);
            if got > grid_best + slack || grid_best - got > gap + slack {
                bad.push(format!(
                    "MIS {k}: compute value {got} vs grid optimum {grid_best} (gap bound {gap})"
                ));
            }
        } else {
            let roots: Vec<f64> = tus.iter().map(|&i| (inst.state.q_mis[i] as f64).sqrt()).collect();
            let total: f64 = roots.iter().sum();
            for (f, r) in shares.iter().zip(&roots) {
                if !close(*f, r / total) {
                    bad.push(format!("MIS {k}: fallback share {f} vs {}", r / total));
                }
            }
        }

        // migration given theta and mu
        for &i in &tus {
            let bound = link.theta[i].saturating_sub(mu[i]);
            let (_, best) = brute_force_migration(inst, i, bound, link.backhaul_bps[k]);
            let (_, got) = {
                let r = link.backhaul_bps[k];
                let m = d.m[i];
                let v = if m == 0 {
                    0.0
                } else {
                    z * cfg.radio.mis_tx_power_w * cfg.traffic.task_bits * m as f64 / r
                        - inst.state.q_mis[i] as f64 * m as f64
                };
                (m, v)
            };
            if !close(got, best) {
                bad.push(format!("TU {i}: migration value {got} vs optimum {best}"));
            }
        }
    }

    let joint = if bad.is_empty() && inst.joint_size(10) <= inst.budget {
        match (brute_force_slot(inst, 10), p2_objective(&inst.state, &d, &inst.chan, &link.gamma, topo, cfg)) {
            (Ok((_, oracle)), Ok(mine)) => {
                // JCORA's continuous shares may sit between grid points: rounding
                // them down costs the cubic gap plus a few processed tasks each
                let step = (cpu_tasks(cfg) / 10.0).ceil() + 1.0;
                let gap: f64 = (0..topo.num_mis()).map(|k| grid_gap_bound(inst, k, 10)).sum::<f64>()
                    + step * inst.state.q_mis.iter().sum::<u64>() as f64;
                let slack = gap + REL_TOL * oracle.abs().max(mine.abs()).max(1.0);
                if oracle > mine + slack {
                    bad.push(format!("joint oracle {oracle} above JCORA {mine}"));
                }
                Some((oracle, mine))
            }
            (Err(e), _) | (_, Err(e)) => {
                bad.push(format!("joint evaluation failed: {e}"));
                None
            }
        }
    } else {
        None
    };

    InstanceReport {
        index,
        certified: bad.is_empty(),
        mismatches: bad,
        joint,
    }
}

/// Certifies JCORA on `instances` random small instances drawn from `seed`.
pub fn certify(instances: usize, seed: u64) -> CertificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<SmallInstance> = (0..instances).map(|_| SmallInstance::random(&mut rng)).collect();
    let reports: Vec<InstanceReport> = all
        .par_iter()
        .enumerate()
        .map(|(ix, inst)| certify_instance(inst, ix))
        .collect();
    CertificationReport {
        seed,
        instances,
        certified: reports.iter().filter(|r| r.certified).count(),
        joint_checked: reports.iter().filter(|r| r.joint.is_some()).count(),
        failures: reports.into_iter().filter(|r| !r.certified).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instances(n: usize, seed: u64) -> Vec<SmallInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| SmallInstance::random(&mut rng)).collect()
    }

    #[test]
    fn simplex_counts() {
        assert_eq!(simplex_points(0, 100), 1);
        assert_eq!(simplex_points(1, 100), 101);
        assert_eq!(simplex_points(2, 2), 6);
        let mut n = 0;
        for_each_simplex_point(3, 10, &mut |_| n += 1);
        assert_eq!(n as u128, simplex_points(3, 10));
    }

    #[test]
    fn idle_decision_costs_base_power() {
        for inst in instances(20, 4) {
            let d = Decision::idle(inst.topo.num_tus(), inst.cfg.network.subchannels_per_mis);
            let v = p2_objective(&inst.state, &d, &inst.chan, &inst.gamma_estimate, &inst.topo, &inst.cfg)
                .unwrap();
            let expect: f64 = inst.state.z_virtual.iter().sum::<f64>() * inst.cfg.energy.base_power_j_per_slot;
            assert!(close(v, expect), "{v} vs {expect}");
        }
    }

    #[test]
    fn two_evaluation_paths_agree() {
        for inst in instances(100, 9) {
            let ctx = inst.context();
            let d = jcora::schedule_slot(&ctx);
            let gamma = LinkBudget::realize(&d, &ctx).gamma;
            let a = p2_objective(&inst.state, &d, &inst.chan, &gamma, &inst.topo, &inst.cfg).unwrap();
            let b = p2_objective_split(&inst.state, &d, &inst.chan, &gamma, &inst.topo, &inst.cfg).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn doubling_v_changes_only_rate_term() {
        for inst in instances(30, 2) {
            let ctx = inst.context();
            let d = jcora::schedule_slot(&ctx);
            let gamma = LinkBudget::realize(&d, &ctx).gamma;
            let eval = |v: f64| {
                let mut cfg = inst.cfg.clone();
                cfg.control.control_v = v;
                p2_objective(&inst.state, &d, &inst.chan, &gamma, &inst.topo, &cfg).unwrap()
            };
            let h: f64 = uplink_rates(&d, &inst.chan, &gamma, &inst.topo, &inst.cfg).iter().sum();
            let (v1, v2) = (eval(0.3), eval(0.6));
            assert!(((v1 - v2) - 0.3 * h).abs() <= 1e-9 * h.max(1.0));
        }
    }

    #[test]
    fn infeasible_decision_rejected() {
        let inst = &instances(1, 1)[0];
        let mut d = Decision::idle(inst.topo.num_tus(), inst.cfg.network.subchannels_per_mis);
        d.f[0] = 1.5;
        assert!(p2_objective(&inst.state, &d, &inst.chan, &inst.gamma_estimate, &inst.topo, &inst.cfg).is_err());
    }

    #[test]
    fn empty_queues_joint_optimum_is_base_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut inst = SmallInstance::random(&mut rng);
        inst.cfg.control.control_v = 0.0;
        inst.state.q_tu.iter_mut().for_each(|q| *q = 0);
        inst.state.q_mis.iter_mut().for_each(|q| *q = 0);
        inst.budget = u128::MAX;
        let (d, v) = brute_force_slot(&inst, 4).unwrap();
        let expect: f64 = inst.state.z_virtual.iter().sum::<f64>() * inst.cfg.energy.base_power_j_per_slot;
        assert!(close(v, expect));
        assert!(d.f.iter().all(|&f| f == 0.0) && d.m.iter().all(|&m| m == 0));
        assert!(d.y.iter().all(|&y| !y));
    }

    #[test]
    fn budget_is_enforced() {
        let mut inst = instances(1, 3).remove(0);
        inst.budget = 1;
        assert!(matches!(brute_force_slot(&inst, 10), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn migration_search_examples() {
        let mut inst = instances(1, 5).remove(0);
        let i = 0;
        let k = inst.topo.home_mis[i];
        inst.state.z_virtual[k] = 0.0;
        inst.state.q_mis[i] = 10;
        assert_eq!(brute_force_migration(&inst, i, 7, 1e6).0, 7);
        assert_eq!(brute_force_migration(&inst, i, 7, 0.0).0, 0);
        inst.state.z_virtual[k] = 1e9;
        assert_eq!(brute_force_migration(&inst, i, 7, 1e6).0, 0);
    }

    #[test]
    fn compute_grid_brackets_interior_optimum() {
        let mut inst = instances(1, 6).remove(0);
        let k = 0;
        let tus: Vec<usize> = inst.topo.tus_of(k).collect();
        if tus.is_empty() {
            return;
        }
        inst.state.z_virtual[k] = 1e6;
        for &i in &tus {
            inst.state.q_mis[i] = 1000;
        }
        let f = jcora::allocate_compute(&vec![1000; tus.len()], 1e6, &inst.cfg);
        let exact = compute_value(&inst, k, &f);
        let (_, grid) = brute_force_compute(&inst, k, 100);
        assert!(exact <= grid + 1e-9 * grid.abs());
        assert!(grid - exact <= grid_gap_bound(&inst, k, 100));
    }

    #[test]
    fn certifies_random_instances() {
        let report = certify(40, 17);
        assert!(report.all_certified(), "{:#?}", report.failures);
    }
}
