//! Maritime link model: two-ray large-scale attenuation, Rician small-scale
//! fading, inter-cell interference and Shannon rates.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::decision::Decision;
use crate::error::{Error, Result};
use crate::scenario::{InterferenceModel, Phenomenon, RandomStreams, ScenarioConfig, Topology};

/// Channel state of one slot. Per-TU rows are towards the TU's home MIS.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub slot: u64,
    /// Large-scale gain, `beta[i][n]`.
    pub beta: Vec<Vec<f64>>,
    /// Small-scale power gain |h|^2, `fading2[i][n]`.
    pub fading2: Vec<Vec<f64>>,
    /// MIS to CBS large-scale gain per MIS.
    pub beta_backhaul: Vec<f64>,
    /// Signed along-lane offset of each TU from its MIS, m.
    pub horizontal_m: Vec<f64>,
}

/// Along-lane offset of a TU from its MIS after `slot` slots.
///
/// TUs starting in the near half sail towards and past the MIS, the others
/// sail back towards it. The offset wraps within `[-R/2, R/2]` so a TU that
/// leaves the coverage edge re-enters at the opposite edge; `|offset|` and
/// therefore the distance stay continuous across the wrap.
pub fn tu_horizontal_offset(topo: &Topology, tu: usize, slot: u64, cfg: &ScenarioConfig) -> f64 {
    let radius = cfg.network.coverage_radius_m;
    let half = radius / 2.0;
    let d0 = topo.initial_offset_m[tu];
    let travelled = topo.speed_mps[tu] * slot as f64 * cfg.sim.slot_seconds;
    let x = if d0 <= half {
        half - d0 - travelled
    } else {
        half - d0 + travelled
    };
    if (-half..=half).contains(&x) {
        x
    } else {
        (x + half).rem_euclid(radius) - half
    }
}

pub fn tu_mis_distance(topo: &Topology, tu: usize, slot: u64, cfg: &ScenarioConfig) -> f64 {
    cfg.network
        .mis_antenna_m
        .hypot(tu_horizontal_offset(topo, tu, slot, cfg))
}

/// Two-ray maritime attenuation `(lambda / 4 pi d)^2 sin^2(2 pi h_tx h_rx / (lambda d))`.
pub fn large_scale_gain(wavelength: f64, dist: f64, h_tx: f64, h_rx: f64) -> Result<f64> {
    if dist <= 0.0 || dist.is_nan() {
        return Err(Error::NonPositiveDistance(dist));
    }
    let free_space = (wavelength / (4.0 * PI * dist)).powi(2);
    let phase = 2.0 * PI * h_tx * h_rx / (wavelength * dist);
    Ok(free_space * phase.sin().powi(2))
}

/// One Rician power gain `|sqrt(K/(1+K)) + sqrt(1/(1+K)) s|^2`, `s ~ CN(0, 1)`.
pub fn sample_small_scale<R: Rng + ?Sized>(rician_k: f64, rng: &mut R) -> f64 {
    let los = (rician_k / (1.0 + rician_k)).sqrt();
    let scatter = (1.0 / (1.0 + rician_k)).sqrt();
    let re: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
    let im: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
    (los + scatter * re).powi(2) + (scatter * im).powi(2)
}

/// Shannon rate of one subchannel, bits/s.
pub fn subchannel_rate(cfg: &ScenarioConfig, gain: f64, interference_w: f64) -> f64 {
    let w = cfg.radio.subchannel_bandwidth_hz;
    let sinr = cfg.radio.tu_tx_power_w * gain / (interference_w + cfg.noise_power_w(w));
    w * (1.0 + sinr).log2()
}

/// Uplink rate of one TU: `y * sum_n z_n W log2(1 + p beta |h|^2 / (gamma + sigma^2))`.
pub fn uplink_rate(
    y: bool,
    z_row: &[f64],
    beta_row: &[f64],
    fading_row: &[f64],
    gamma: &[f64],
    cfg: &ScenarioConfig,
) -> f64 {
    if !y {
        return 0.0;
    }
    z_row
        .iter()
        .enumerate()
        .filter(|(_, &z)| z > 0.0)
        .map(|(n, &z)| z * subchannel_rate(cfg, beta_row[n] * fading_row[n], gamma[n]))
        .sum()
}

/// MIS to CBS rate `rho W_c log2(1 + p_k beta / sigma^2)` with noise over `rho W_c`.
pub fn backhaul_rate(cfg: &ScenarioConfig, beta_backhaul: f64) -> f64 {
    let bw = cfg.radio.backhaul_ratio * cfg.radio.cbs_bandwidth_hz;
    if bw <= 0.0 {
        return 0.0;
    }
    let snr = cfg.radio.mis_tx_power_w * beta_backhaul / cfg.noise_power_w(bw);
    bw * (1.0 + snr).log2()
}

/// Gain from TU `j` to MIS `k` used in the interference sum.
fn interferer_gain(
    j: usize,
    n: usize,
    k: usize,
    chan: &ChannelRealization,
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> f64 {
    match cfg.radio.interference {
        InterferenceModel::ServingGain => chan.beta[j][n],
        InterferenceModel::CrossGain => {
            let q = topo.home_mis[j];
            let along = chan.horizontal_m[j] + (q as f64 - k as f64) * cfg.network.mis_spacing_m;
            let dist = cfg.network.mis_antenna_m.hypot(along);
            large_scale_gain(
                cfg.radio.wavelength_mis_m,
                dist,
                cfg.network.tu_antenna_m,
                cfg.network.mis_antenna_m,
            )
            .unwrap_or(0.0)
        }
    }
}

/// Interference received on subchannel `n` at MIS `k` from active TUs of other cells.
pub fn interference_power(
    decision: &Decision,
    chan: &ChannelRealization,
    n: usize,
    k: usize,
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> f64 {
    let p = cfg.radio.tu_tx_power_w;
    (0..topo.num_mis())
        .filter(|&q| q != k)
        .flat_map(|q| topo.tus_of(q))
        .filter(|&j| decision.y[j] && decision.z[j][n] > 0.0)
        .map(|j| decision.z[j][n] * p * interferer_gain(j, n, k, chan, topo, cfg))
        .sum()
}

/// Interference for every `(k, n)`; row `k` holds MIS `k`'s subchannels.
///
/// With serving-cell gains this is `O(K N M_k)`: the network-wide sum per
/// subchannel minus the receiving cell's own contribution.
pub fn interference_matrix(
    decision: &Decision,
    chan: &ChannelRealization,
    topo: &Topology,
    cfg: &ScenarioConfig,
) -> Vec<Vec<f64>> {
    let num_mis = topo.num_mis();
    let subchannels = cfg.network.subchannels_per_mis;
    match cfg.radio.interference {
        InterferenceModel::ServingGain => {
            let p = cfg.radio.tu_tx_power_w;
            let mut own = vec![vec![0.0; subchannels]; num_mis];
            for (k, row) in own.iter_mut().enumerate() {
                for j in topo.tus_of(k).filter(|&j| decision.y[j]) {
                    for (n, acc) in row.iter_mut().enumerate() {
                        let z = decision.z[j][n];
                        if z > 0.0 {
                            *acc += z * p * chan.beta[j][n];
                        }
                    }
                }
            }
            let total: Vec<f64> = (0..subchannels)
                .map(|n| own.iter().map(|row| row[n]).sum())
                .collect();
            own.iter()
                .map(|row| {
                    row.iter()
                        .zip(&total)
                        .map(|(mine, all)| (all - mine).max(0.0))
                        .collect()
                })
                .collect()
        }
        InterferenceModel::CrossGain => (0..num_mis)
            .map(|k| {
                (0..subchannels)
                    .map(|n| interference_power(decision, chan, n, k, topo, cfg))
                    .collect()
            })
            .collect(),
    }
}

/// Draws per-slot channel state. Fading is block fading: every `(i, n)` gets
/// a fresh draw each slot from TU `i`'s own substream.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    fading_rngs: Vec<ChaCha8Rng>,
}

impl ChannelSampler {
    pub fn new(topo: &Topology, streams: &RandomStreams) -> Self {
        Self {
            fading_rngs: (0..topo.num_tus())
                .map(|i| streams.stream(Phenomenon::Fading, i))
                .collect(),
        }
    }

    pub fn sample(&mut self, slot: u64, topo: &Topology, cfg: &ScenarioConfig) -> ChannelRealization {
        let subchannels = cfg.network.subchannels_per_mis;
        let net = &cfg.network;
        let mut horizontal_m = Vec::with_capacity(topo.num_tus());
        let mut beta = Vec::with_capacity(topo.num_tus());
        let mut fading2 = Vec::with_capacity(topo.num_tus());
        for (i, rng) in self.fading_rngs.iter_mut().enumerate() {
            let x = tu_horizontal_offset(topo, i, slot, cfg);
            let dist = net.mis_antenna_m.hypot(x);
            // every subchannel of an MIS shares one carrier wavelength
            let b = large_scale_gain(cfg.radio.wavelength_mis_m, dist, net.tu_antenna_m, net.mis_antenna_m)
                .expect("distance is at least the MIS antenna height");
            horizontal_m.push(x);
            beta.push(vec![b; subchannels]);
            fading2.push(
                (0..subchannels)
                    .map(|_| sample_small_scale(cfg.radio.rician_k, rng))
                    .collect(),
            );
        }
        let beta_backhaul = topo
            .mis_cbs_distance_m
            .iter()
            .map(|&d| {
                large_scale_gain(cfg.radio.wavelength_cbs_m, d, net.mis_antenna_m, net.cbs_antenna_m)
                    .expect("validated positive distance")
            })
            .collect();
        ChannelRealization {
            slot,
            beta,
            fading2,
            beta_backhaul,
            horizontal_m,
        }
    }
}
