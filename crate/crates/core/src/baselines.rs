//! Comparison policies. None of them look at the virtual energy queue;
//! energy feasibility is left to the execution-time battery clamp.
//!
//! - FRA: first-come first-served. The TU whose backlog became non-empty
//!   earliest gets every subchannel and the whole CPU.
//! - LRA: CPU shares sized to clear each MIS buffer within the latency
//!   threshold, subchannels round-robin over backlogged TUs, no migration.
//! - PRA: TUs ranked by current arrivals; each in turn takes enough
//!   subchannels and CPU to clear its backlog until resources run out.
//! - TRA: TDMA. Every TU gets a `1 / M_k` airtime share of every subchannel
//!   and `1 / M_k` of the CPU.

use crate::channel;
use crate::decision::Decision;
use crate::policy::{LinkBudget, Scheduler, SlotContext};
use crate::queueing;
use crate::scenario::{Policy, ScenarioConfig};

/// Migrates whatever was offloaded beyond local processing, when a backhaul exists.
fn migrate_overflow(ctx: &SlotContext<'_>, d: &mut Decision) {
    let link = LinkBudget::realize(d, ctx);
    for k in 0..ctx.topo.num_mis() {
        for i in ctx.topo.tus_of(k) {
            let mu = queueing::processing_capacity(d.f[i], ctx.cfg);
            d.m[i] = if link.backhaul_bps[k] > 0.0 {
                link.theta[i].saturating_sub(mu)
            } else {
                0
            };
        }
    }
}

/// Share of the CPU that processes `tasks` tasks in one slot.
fn share_for_tasks(tasks: u64, cfg: &ScenarioConfig) -> f64 {
    tasks as f64 * cfg.compute.cycles_per_bit * cfg.traffic.task_bits
        / (cfg.compute.cpu_hz * cfg.sim.slot_seconds)
}

#[derive(Debug, Clone)]
pub struct Fra {
    backlog_since: Vec<Option<u64>>,
}

impl Fra {
    pub fn new(num_tus: usize) -> Self {
        Self {
            backlog_since: vec![None; num_tus],
        }
    }

    /// Head-of-line TU of MIS `k`, if any TU there is backlogged.
    pub fn head_of_line(&self, k: usize, ctx: &SlotContext<'_>) -> Option<usize> {
        ctx.topo
            .tus_of(k)
            .filter_map(|i| self.backlog_since[i].map(|since| (since, i)))
            .min()
            .map(|(_, i)| i)
    }
}

impl Scheduler for Fra {
    fn name(&self) -> &'static str {
        "fra"
    }

    fn decide(&mut self, ctx: &SlotContext<'_>) -> Decision {
        for (i, since) in self.backlog_since.iter_mut().enumerate() {
            if ctx.state.total_tasks(i) == 0 {
                *since = None;
            } else if since.is_none() {
                *since = Some(ctx.state.slot);
            }
        }
        let n_sub = ctx.cfg.network.subchannels_per_mis;
        let mut d = Decision::idle(ctx.topo.num_tus(), n_sub);
        for k in 0..ctx.topo.num_mis() {
            if let Some(head) = self.head_of_line(k, ctx) {
                d.y[head] = true;
                d.z[head] = vec![1.0; n_sub];
                d.f[head] = 1.0;
            }
        }
        migrate_overflow(ctx, &mut d);
        d
    }
}

#[derive(Debug, Default, Clone)]
pub struct Lra;

impl Scheduler for Lra {
    fn name(&self) -> &'static str {
        "lra"
    }

    fn decide(&mut self, ctx: &SlotContext<'_>) -> Decision {
        let cfg = ctx.cfg;
        let n_sub = cfg.network.subchannels_per_mis;
        let mut d = Decision::idle(ctx.topo.num_tus(), n_sub);
        let deadline_share = cfg.compute.cycles_per_bit * cfg.traffic.task_bits
            / (cfg.compute.cpu_hz * cfg.sim.slot_seconds * cfg.traffic.latency_threshold_slots);
        for k in 0..ctx.topo.num_mis() {
            let tus = ctx.topo.tus_of(k);
            for i in tus.clone() {
                d.f[i] = (deadline_share * ctx.state.q_mis[i] as f64).clamp(0.0, 1.0);
            }
            let total: f64 = tus.clone().map(|i| d.f[i]).sum();
            if total > 1.0 {
                tus.clone().for_each(|i| d.f[i] /= total);
            }
            let backlogged: Vec<usize> = tus.filter(|&i| ctx.state.q_tu[i] > 0).collect();
            if backlogged.is_empty() {
                continue;
            }
            for &i in &backlogged {
                d.y[i] = true;
            }
            let offset = ctx.state.slot as usize;
            for n in 0..n_sub {
                d.z[backlogged[(n + offset) % backlogged.len()]][n] = 1.0;
            }
        }
        d
    }
}

#[derive(Debug, Default, Clone)]
pub struct Pra;

impl Pra {
    /// TUs of MIS `k` in service order: current arrivals descending, lower index first on ties.
    pub fn priority_order(k: usize, ctx: &SlotContext<'_>) -> Vec<usize> {
        let mut order: Vec<usize> = ctx.topo.tus_of(k).collect();
        order.sort_by(|&a, &b| ctx.arrivals[b].cmp(&ctx.arrivals[a]).then(a.cmp(&b)));
        order
    }
}

impl Scheduler for Pra {
    fn name(&self) -> &'static str {
        "pra"
    }

    fn decide(&mut self, ctx: &SlotContext<'_>) -> Decision {
        let cfg = ctx.cfg;
        let n_sub = cfg.network.subchannels_per_mis;
        let mut d = Decision::idle(ctx.topo.num_tus(), n_sub);
        for k in 0..ctx.topo.num_mis() {
            let order = Self::priority_order(k, ctx);
            let mut next_sub = 0;
            let mut cpu_left = 1.0_f64;
            for &i in &order {
                let mut planned = 0.0;
                let need = ctx.state.q_tu[i] as f64 * cfg.traffic.task_bits / cfg.sim.slot_seconds;
                while next_sub < n_sub && planned < need {
                    d.z[i][next_sub] = 1.0;
                    planned += channel::subchannel_rate(
                        cfg,
                        ctx.chan.beta[i][next_sub],
                        ctx.gamma_estimate[k][next_sub],
                    );
                    next_sub += 1;
                }
                d.y[i] = planned > 0.0;
                let share = share_for_tasks(ctx.state.q_mis[i], cfg).min(cpu_left);
                d.f[i] = share;
                cpu_left = (cpu_left - share).max(0.0);
            }
            // spare subchannels go to the top-priority backlogged TU
            if next_sub < n_sub {
                if let Some(&top) = order.iter().find(|&&i| ctx.state.q_tu[i] > 0) {
                    for n in next_sub..n_sub {
                        d.z[top][n] = 1.0;
                    }
                    d.y[top] = true;
                }
            }
        }
        migrate_overflow(ctx, &mut d);
        d
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tra;

impl Scheduler for Tra {
    fn name(&self) -> &'static str {
        "tra"
    }

    fn decide(&mut self, ctx: &SlotContext<'_>) -> Decision {
        let n_sub = ctx.cfg.network.subchannels_per_mis;
        let mut d = Decision::idle(ctx.topo.num_tus(), n_sub);
        for k in 0..ctx.topo.num_mis() {
            let tus = ctx.topo.tus_of(k);
            if tus.is_empty() {
                continue;
            }
            let share = 1.0 / tus.len() as f64;
            for i in tus {
                d.y[i] = true;
                d.z[i] = vec![share; n_sub];
                d.f[i] = share;
            }
        }
        migrate_overflow(ctx, &mut d);
        d
    }

    fn exclusive_subchannels(&self) -> bool {
        false
    }
}

/// Builds the scheduler for `policy`.
pub fn make_scheduler(policy: Policy, num_tus: usize) -> Box<dyn Scheduler> {
    match policy {
        Policy::Jcora => Box::new(crate::jcora::Jcora),
        Policy::Fra => Box::new(Fra::new(num_tus)),
        Policy::Lra => Box::new(Lra),
        Policy::Pra => Box::new(Pra),
        Policy::Tra => Box::new(Tra),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::queueing::NetworkState;
    use crate::scenario::{build_topology, RandomStreams, Topology};

    struct Fixture {
        cfg: ScenarioConfig,
        topo: Topology,
        state: NetworkState,
        chan: ChannelRealization,
        gamma: Vec<Vec<f64>>,
        arrivals: Vec<u64>,
    }

    impl Fixture {
        fn new(tus: usize, subchannels: usize) -> Self {
            let mut cfg = ScenarioConfig::default();
            cfg.network.num_mis = 1;
            cfg.network.tus_per_mis = vec![tus];
            cfg.network.subchannels_per_mis = subchannels;
            let topo = build_topology(&cfg, &RandomStreams::new(0));
            Self {
                chan: ChannelRealization {
                    slot: 0,
                    beta: vec![vec![1e-9; subchannels]; tus],
                    fading2: vec![vec![1.0; subchannels]; tus],
                    beta_backhaul: vec![1e-12],
                    horizontal_m: vec![0.0; tus],
                },
                state: NetworkState::empty(tus, 1),
                gamma: vec![vec![0.0; subchannels]],
                arrivals: vec![0; tus],
                cfg,
                topo,
            }
        }

        fn ctx(&self) -> SlotContext<'_> {
            SlotContext {
                cfg: &self.cfg,
                topo: &self.topo,
                state: &self.state,
                chan: &self.chan,
                gamma_estimate: &self.gamma,
                arrivals: &self.arrivals,
            }
        }

        fn check(&self, s: &dyn Scheduler, d: &Decision) {
            let link = LinkBudget::realize(d, &self.ctx());
            let mu: Vec<u64> = d.f.iter().map(|&f| queueing::processing_capacity(f, &self.cfg)).collect();
            d.check(&self.topo, s.exclusive_subchannels(), Some((&link.theta, &mu)))
                .unwrap();
        }
    }

    #[test]
    fn fra_single_backlogged_tu_gets_everything() {
        let mut fx = Fixture::new(3, 4);
        fx.state.q_tu = vec![0, 12, 0];
        let mut fra = Fra::new(3);
        let d = fra.decide(&fx.ctx());
        assert_eq!(d.z[1], vec![1.0; 4]);
        assert_eq!(d.f[1], 1.0);
        assert!(d.y[1] && !d.y[0] && !d.y[2]);
        fx.check(&fra, &d);
    }

    #[test]
    fn fra_keeps_first_comer_at_head() {
        let mut fx = Fixture::new(2, 2);
        let mut fra = Fra::new(2);
        fx.state.q_tu = vec![0, 5];
        fra.decide(&fx.ctx());
        fx.state.slot = 1;
        fx.state.q_tu = vec![50, 5];
        let d = fra.decide(&fx.ctx());
        assert!(d.y[1] && !d.y[0]);
        assert_eq!(d.y.iter().filter(|&&y| y).count(), 1);
    }

    #[test]
    fn tra_equal_shares() {
        let fx = Fixture::new(4, 3);
        let mut tra = Tra;
        let d = tra.decide(&fx.ctx());
        assert!(d.f.iter().all(|&f| f == 0.25));
        assert_eq!(d.f.iter().sum::<f64>(), 1.0);
        assert!(d.z.iter().all(|row| row.iter().all(|&z| z == 0.25)));
        fx.check(&tra, &d);
    }

    #[test]
    fn pra_orders_by_arrivals() {
        let mut fx = Fixture::new(3, 6);
        fx.arrivals = vec![10, 50, 30];
        assert_eq!(Pra::priority_order(0, &fx.ctx()), vec![1, 2, 0]);
        fx.state.q_tu = vec![1, 1, 1];
        fx.state.q_mis = vec![20, 20, 20];
        let mut pra = Pra;
        let d = pra.decide(&fx.ctx());
        // one subchannel clears a one-task backlog, top priority gets the spare ones
        assert_eq!(d.z[2].iter().sum::<f64>(), 1.0);
        assert_eq!(d.z[0].iter().sum::<f64>(), 1.0);
        assert_eq!(d.z[1].iter().sum::<f64>(), 4.0);
        // CPU: 20 tasks need 0.4 each, the third TU gets the remainder
        assert!((d.f[1] - 0.4).abs() < 1e-12);
        assert!((d.f[2] - 0.4).abs() < 1e-12);
        assert!((d.f[0] - 0.2).abs() < 1e-12);
        fx.check(&pra, &d);
    }

    #[test]
    fn lra_shares_follow_deadline_and_never_migrate() {
        let mut fx = Fixture::new(2, 4);
        fx.state.q_tu = vec![3, 0];
        // 500 tasks over 20 slots at 50 tasks/slot needs half the CPU
        fx.state.q_mis = vec![500, 5000];
        let mut lra = Lra;
        let d = lra.decide(&fx.ctx());
        assert!((d.f[0] - 0.5 / 1.5).abs() < 1e-12);
        assert!((d.f[1] - 1.0 / 1.5).abs() < 1e-12);
        assert!(d.m.iter().all(|&m| m == 0));
        assert!(d.y[0] && !d.y[1]);
        assert_eq!(d.z[0], vec![1.0; 4]);
        fx.check(&lra, &d);
    }

    #[test]
    fn every_baseline_feasible_on_random_states() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let tus = rng.random_range(0..5);
            let mut fx = Fixture::new(tus, rng.random_range(1..6));
            for i in 0..tus {
                fx.state.q_tu[i] = rng.random_range(0..400);
                fx.state.q_mis[i] = rng.random_range(0..400);
                fx.arrivals[i] = rng.random_range(0..300);
                fx.chan.beta[i].iter_mut().for_each(|b| *b = rng.random::<f64>() * 1e-8);
            }
            for policy in [Policy::Fra, Policy::Lra, Policy::Pra, Policy::Tra] {
                let mut s = make_scheduler(policy, tus);
                let d = s.decide(&fx.ctx());
                fx.check(s.as_ref(), &d);
                if policy == Policy::Fra {
                    assert!(d.y.iter().filter(|&&y| y).count() <= 1);
                }
            }
        }
    }
}
