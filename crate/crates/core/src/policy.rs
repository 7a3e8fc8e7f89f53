//! Interface shared by the proposed scheduler and the baselines.

use crate::channel::{self, ChannelRealization};
use crate::decision::Decision;
use crate::queueing::{self, NetworkState};
use crate::scenario::{ScenarioConfig, Topology};

/// Everything a policy may observe at the start of a slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub cfg: &'a ScenarioConfig,
    pub topo: &'a Topology,
    pub state: &'a NetworkState,
    pub chan: &'a ChannelRealization,
    /// Interference estimate per `(k, n)`; the previous slot's realized value.
    pub gamma_estimate: &'a [Vec<f64>],
    /// Arrivals `g_i(t)` of the current slot.
    pub arrivals: &'a [u64],
}

/// Rates and capacities implied by the offloading and subchannel part of a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub gamma: Vec<Vec<f64>>,
    pub rate_bps: Vec<f64>,
    pub theta: Vec<u64>,
    pub backhaul_bps: Vec<f64>,
}

impl LinkBudget {
    /// Realized interference, uplink rates and offload capacities once every
    /// cell has fixed `y` and `z`.
    pub fn realize(decision: &Decision, ctx: &SlotContext<'_>) -> Self {
        let SlotContext { cfg, topo, chan, .. } = *ctx;
        let gamma = channel::interference_matrix(decision, chan, topo, cfg);
        let rate_bps: Vec<f64> = (0..topo.num_tus())
            .map(|i| {
                channel::uplink_rate(
                    decision.y[i],
                    &decision.z[i],
                    &chan.beta[i],
                    &chan.fading2[i],
                    &gamma[topo.home_mis[i]],
                    cfg,
                )
            })
            .collect();
        let theta = rate_bps
            .iter()
            .map(|&r| queueing::offload_capacity(r, cfg))
            .collect();
        let backhaul_bps = chan
            .beta_backhaul
            .iter()
            .map(|&b| channel::backhaul_rate(cfg, b))
            .collect();
        Self {
            gamma,
            rate_bps,
            theta,
            backhaul_bps,
        }
    }
}

/// A per-slot resource allocation rule.
pub trait Scheduler: Send {
    fn name(&self) -> &'static str;

    /// Returns a feasible decision, with migrations bounded against the
    /// realized link budget of that decision.
    fn decide(&mut self, ctx: &SlotContext<'_>) -> Decision;

    /// Whether decisions are exclusive per subchannel (binary `z`).
    fn exclusive_subchannels(&self) -> bool {
        true
    }
}
