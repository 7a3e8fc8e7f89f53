//! Scenario configuration, topology and random-stream management.
//!
//! The config file is TOML with one table per concern. Every key, its unit
//! and its default is listed on the corresponding struct field below; an
//! empty file yields [`ScenarioConfig::default`].
//!
//! ```toml
//! [network]
//! num_mis = 5
//! tus_per_mis = [2, 2, 2, 2, 2]
//!
//! [radio]
//! backhaul_ratio = 0.1
//!
//! [control]
//! control_v = 0.1
//! policy = "jcora"
//! ```

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scheduling policy driving a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Jcora,
    Fra,
    Lra,
    Pra,
    Tra,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Jcora,
        Policy::Fra,
        Policy::Lra,
        Policy::Pra,
        Policy::Tra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Jcora => "jcora",
            Policy::Fra => "fra",
            Policy::Lra => "lra",
            Policy::Pra => "pra",
            Policy::Tra => "tra",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::field("control.policy", format!("unknown policy `{s}`")))
    }
}

/// Which gain enters the inter-cell interference sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    /// Interferer's gain towards its own serving MIS, as written in the rate formula.
    #[default]
    ServingGain,
    /// Interferer-to-victim gain from the along-lane geometry.
    CrossGain,
}

/// How offloaded tasks enter the MIS buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QueueMode {
    /// Adds `min(theta, Q_i)`: a TU cannot send more tasks than it holds.
    #[default]
    Conserving,
    /// Adds the raw offload capacity `theta`, exactly as the MIS queue recursion is written.
    Literal,
}

/// Probability mass function of per-slot task arrivals over `{0, ..., max_arrivals}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalPmf {
    #[default]
    Uniform,
    /// Poisson with mean `traffic.poisson_mean`, truncated to the support.
    TruncatedPoisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of MISs, K.
    pub num_mis: usize,
    /// Orthogonal subchannels per MIS, N.
    pub subchannels_per_mis: usize,
    /// TUs attached to each MIS, M_k. Length must equal `num_mis`.
    pub tus_per_mis: Vec<usize>,
    /// Coverage radius R_k in m.
    pub coverage_radius_m: f64,
    /// TU antenna height above sea level, m.
    pub tu_antenna_m: f64,
    /// MIS antenna height above sea level, m.
    pub mis_antenna_m: f64,
    /// CBS antenna height above sea level, m (backhaul gain only).
    pub cbs_antenna_m: f64,
    /// MIS to CBS distance, m.
    pub mis_cbs_distance_m: f64,
    /// Spacing between adjacent MISs along the lane, m (cross-gain interference only).
    pub mis_spacing_m: f64,
    /// TU sailing speed, m/s.
    pub tu_speed_mps: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_mis: 5,
            subchannels_per_mis: 30,
            tus_per_mis: vec![2; 5],
            coverage_radius_m: 400.0,
            tu_antenna_m: 10.0,
            mis_antenna_m: 50.0,
            cbs_antenna_m: 100.0,
            mis_cbs_distance_m: 1200.0,
            mis_spacing_m: 800.0,
            tu_speed_mps: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Bandwidth of one MIS subchannel W, Hz.
    pub subchannel_bandwidth_hz: f64,
    /// CBS uplink spectrum W_c, Hz.
    pub cbs_bandwidth_hz: f64,
    /// Share of CBS spectrum granted to each MIS, rho_k in [0, 1].
    pub backhaul_ratio: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Rician factor K_r (LOS to scattered power ratio).
    pub rician_k: f64,
    /// TU transmit power per subchannel, W.
    pub tu_tx_power_w: f64,
    /// MIS transmit power towards the CBS, W.
    pub mis_tx_power_w: f64,
    /// Carrier wavelength of MIS subchannels, m.
    pub wavelength_mis_m: f64,
    /// Carrier wavelength of the CBS link, m.
    pub wavelength_cbs_m: f64,
    pub interference: InterferenceModel,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            subchannel_bandwidth_hz: 1e6,
            cbs_bandwidth_hz: 100e6,
            backhaul_ratio: 0.1,
            noise_psd_dbm_hz: -174.0,
            rician_k: 10.0,
            tu_tx_power_w: 0.1,
            mis_tx_power_w: 1.0,
            wavelength_mis_m: 0.125,
            wavelength_cbs_m: 0.02,
            interference: InterferenceModel::ServingGain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    /// Battery capacity E_max, J.
    pub battery_capacity_j: f64,
    /// Upper bound of the uniform per-slot harvest e_k^max, J.
    pub max_charge_j_per_slot: f64,
    /// Chip power coefficient epsilon, J s^2 / cycle^3.
    pub power_coeff: f64,
    /// Maintenance energy c_k^bas, J per slot.
    pub base_power_j_per_slot: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            battery_capacity_j: 20.0,
            max_charge_j_per_slot: 5.0,
            power_coeff: 1e-25,
            base_power_j_per_slot: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeConfig {
    /// MIS CPU frequency F_k, cycles/s.
    pub cpu_hz: f64,
    /// CPU cycles per task bit, alpha.
    pub cycles_per_bit: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            cpu_hz: 1e9,
            cycles_per_bit: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Task size Y, bits.
    pub task_bits: f64,
    /// Largest per-slot arrival count g^max, tasks.
    pub max_arrivals: u64,
    pub arrival_pmf: ArrivalPmf,
    /// Mean of the truncated Poisson pmf, tasks per slot.
    pub poisson_mean: f64,
    /// Per-TU latency requirement T_i^th, slots.
    pub latency_threshold_slots: f64,
    /// Constant execution delay T^c, slots.
    pub exec_delay_slots: f64,
    /// Per-slot offload cap theta^max, tasks.
    pub max_offload_tasks: u64,
    /// TU transmit buffer Q_i^max, tasks. Absent means unbounded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tu_buffer_tasks: Option<u64>,
    /// MIS processing buffer Q_{i,k}^max, tasks. Absent means unbounded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mis_buffer_tasks: Option<u64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            task_bits: 1000.0,
            max_arrivals: 300,
            arrival_pmf: ArrivalPmf::Uniform,
            poisson_mean: 150.0,
            latency_threshold_slots: 20.0,
            exec_delay_slots: 0.0,
            max_offload_tasks: 5000,
            tu_buffer_tasks: None,
            mis_buffer_tasks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Drift-plus-penalty weight V.
    pub control_v: f64,
    pub policy: Policy,
    /// Include small-scale fading in subchannel weights.
    pub fading_aware_weights: bool,
    /// Hand subchannels of TUs that decline to offload to the next-best TU.
    pub reallocate_idle: bool,
    pub queue_mode: QueueMode,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            control_v: 0.1,
            policy: Policy::Jcora,
            fading_aware_weights: false,
            reallocate_idle: false,
            queue_mode: QueueMode::Conserving,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Slot length tau, s.
    pub slot_seconds: f64,
    /// Number of simulated slots T.
    pub horizon_slots: u64,
    pub seed: u64,
    /// Leading fraction of slots excluded from the warm averages.
    pub warmup_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            slot_seconds: 0.05,
            horizon_slots: 10_000,
            seed: 1,
            warmup_fraction: 0.1,
        }
    }
}

/// Complete parameter set for one simulation run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub radio: RadioConfig,
    pub energy: EnergyConfig,
    pub compute: ComputeConfig,
    pub traffic: TrafficConfig,
    pub control: ControlConfig,
    pub sim: SimConfig,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::field(field, format!("must be > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::field(field, format!("must be >= 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Reads and validates a config file. Missing keys take their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if n.tus_per_mis.len() != n.num_mis {
            return Err(Error::field(
                "network.tus_per_mis",
                format!("has {} entries but num_mis = {}", n.tus_per_mis.len(), n.num_mis),
            ));
        }
        positive("network.coverage_radius_m", n.coverage_radius_m)?;
        positive("network.tu_antenna_m", n.tu_antenna_m)?;
        positive("network.mis_antenna_m", n.mis_antenna_m)?;
        positive("network.cbs_antenna_m", n.cbs_antenna_m)?;
        positive("network.mis_cbs_distance_m", n.mis_cbs_distance_m)?;
        positive("network.mis_spacing_m", n.mis_spacing_m)?;
        non_negative("network.tu_speed_mps", n.tu_speed_mps)?;

        let r = &self.radio;
        positive("radio.subchannel_bandwidth_hz", r.subchannel_bandwidth_hz)?;
        positive("radio.cbs_bandwidth_hz", r.cbs_bandwidth_hz)?;
        non_negative("radio.backhaul_ratio", r.backhaul_ratio)?;
        if r.backhaul_ratio > 1.0 {
            return Err(Error::field(
                "radio.backhaul_ratio",
                format!("must be <= 1, got {}", r.backhaul_ratio),
            ));
        }
        if !r.noise_psd_dbm_hz.is_finite() {
            return Err(Error::field("radio.noise_psd_dbm_hz", "must be finite"));
        }
        non_negative("radio.rician_k", r.rician_k)?;
        positive("radio.tu_tx_power_w", r.tu_tx_power_w)?;
        positive("radio.mis_tx_power_w", r.mis_tx_power_w)?;
        positive("radio.wavelength_mis_m", r.wavelength_mis_m)?;
        positive("radio.wavelength_cbs_m", r.wavelength_cbs_m)?;

        let e = &self.energy;
        positive("energy.battery_capacity_j", e.battery_capacity_j)?;
        non_negative("energy.max_charge_j_per_slot", e.max_charge_j_per_slot)?;
        positive("energy.power_coeff", e.power_coeff)?;
        non_negative("energy.base_power_j_per_slot", e.base_power_j_per_slot)?;

        positive("compute.cpu_hz", self.compute.cpu_hz)?;
        positive("compute.cycles_per_bit", self.compute.cycles_per_bit)?;

        let t = &self.traffic;
        positive("traffic.task_bits", t.task_bits)?;
        non_negative("traffic.poisson_mean", t.poisson_mean)?;
        positive("traffic.latency_threshold_slots", t.latency_threshold_slots)?;
        non_negative("traffic.exec_delay_slots", t.exec_delay_slots)?;

        non_negative("control.control_v", self.control.control_v)?;

        positive("sim.slot_seconds", self.sim.slot_seconds)?;
        if !(0.0..1.0).contains(&self.sim.warmup_fraction) {
            return Err(Error::field("sim.warmup_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn num_tus(&self) -> usize {
        self.network.tus_per_mis.iter().sum()
    }

    /// Spreads `total` TUs over the MISs as evenly as possible, lower indices first.
    pub fn set_total_tus(&mut self, total: usize) {
        let k = self.network.num_mis.max(1);
        self.network.tus_per_mis = (0..self.network.num_mis)
            .map(|m| total / k + usize::from(m < total % k))
            .collect();
    }

    /// Noise power over `bandwidth_hz`, W.
    pub fn noise_power_w(&self, bandwidth_hz: f64) -> f64 {
        10f64.powf((self.radio.noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz
    }

    /// Largest per-slot processing count, mu^max (f = 1).
    pub fn max_processed_tasks(&self) -> u64 {
        (self.compute.cpu_hz * self.sim.slot_seconds
            / (self.compute.cycles_per_bit * self.traffic.task_bits))
            .floor() as u64
    }
}

/// Static placement: which MIS each TU belongs to and how it sails.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Initial offset d_i^0 per TU, m, in `[0, R_k]`.
    pub initial_offset_m: Vec<f64>,
    pub speed_mps: Vec<f64>,
    pub home_mis: Vec<usize>,
    pub mis_cbs_distance_m: Vec<f64>,
    ranges: Vec<Range<usize>>,
}

impl Topology {
    pub fn num_tus(&self) -> usize {
        self.home_mis.len()
    }

    pub fn num_mis(&self) -> usize {
        self.ranges.len()
    }

    /// Global indices of the TUs served by MIS `k`.
    pub fn tus_of(&self, k: usize) -> Range<usize> {
        self.ranges[k].clone()
    }
}

/// Draws TU offsets uniformly over the coverage disc radius. TUs are numbered
/// MIS by MIS so each MIS owns a contiguous index range.
pub fn build_topology(cfg: &ScenarioConfig, streams: &RandomStreams) -> Topology {
    let mut rng = streams.stream(Phenomenon::Topology, 0);
    let radius = cfg.network.coverage_radius_m;
    let mut ranges = Vec::with_capacity(cfg.network.num_mis);
    let mut home_mis = Vec::new();
    let mut initial_offset_m = Vec::new();
    for (k, &m) in cfg.network.tus_per_mis.iter().enumerate() {
        let start = home_mis.len();
        for _ in 0..m {
            home_mis.push(k);
            initial_offset_m.push(rng.random::<f64>() * radius);
        }
        ranges.push(start..home_mis.len());
    }
    Topology {
        speed_mps: vec![cfg.network.tu_speed_mps; home_mis.len()],
        initial_offset_m,
        home_mis,
        mis_cbs_distance_m: vec![cfg.network.mis_cbs_distance_m; cfg.network.num_mis],
        ranges,
    }
}

/// Stochastic phenomena that own an independent random substream per entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phenomenon {
    Topology = 1,
    Arrivals = 2,
    Fading = 3,
    Harvest = 4,
}

/// Factory for per-(phenomenon, entity) ChaCha substreams under one seed.
#[derive(Debug, Clone, Copy)]
pub struct RandomStreams {
    seed: u64,
}

impl RandomStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn stream(&self, phenomenon: Phenomenon, entity: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((phenomenon as u64) << 40) | entity as u64);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_table_defaults() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.radio.subchannel_bandwidth_hz, 1e6);
        assert_eq!(cfg.sim.slot_seconds, 0.05);
        assert_eq!(cfg.energy.battery_capacity_j, 20.0);
        assert_eq!(cfg.compute.cpu_hz, 1e9);
        assert_eq!(cfg.energy.power_coeff, 1e-25);
        assert_eq!(cfg.compute.cycles_per_bit, 1000.0);
        assert_eq!(cfg.traffic.task_bits, 1000.0);
        assert_eq!(cfg.radio.backhaul_ratio, 0.1);
        assert_eq!(cfg.traffic.max_arrivals, 300);
        assert_eq!(cfg.radio.tu_tx_power_w, 0.1);
        assert_eq!(cfg.radio.mis_tx_power_w, 1.0);
        assert_eq!(cfg.radio.noise_psd_dbm_hz, -174.0);
        assert_eq!(cfg.radio.wavelength_mis_m, 0.125);
        assert_eq!(cfg.radio.wavelength_cbs_m, 0.02);
        assert_eq!(cfg.radio.cbs_bandwidth_hz, 100e6);
        assert_eq!(cfg.network.subchannels_per_mis, 30);
        assert_eq!(cfg.network.num_mis, 5);
    }

    #[test]
    fn backhaul_ratio_above_one_names_field() {
        let err = ScenarioConfig::from_toml_str("[radio]\nbackhaul_ratio = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("backhaul_ratio"), "{err}");
    }

    #[test]
    fn mismatched_tu_list_is_rejected() {
        let err = ScenarioConfig::from_toml_str("[network]\nnum_mis = 2\ntus_per_mis = [1]\n")
            .unwrap_err();
        assert!(err.to_string().contains("network.tus_per_mis"));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let err = ScenarioConfig::from_toml_str("[radio]\nbogus = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn serialized_config_reparses_identically() {
        let mut cfg = ScenarioConfig::default();
        cfg.control.policy = Policy::Tra;
        cfg.traffic.mis_buffer_tasks = Some(400);
        cfg.radio.interference = InterferenceModel::CrossGain;
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn topology_is_deterministic_per_seed() {
        let cfg = ScenarioConfig::default();
        let a = build_topology(&cfg, &RandomStreams::new(9));
        let b = build_topology(&cfg, &RandomStreams::new(9));
        assert_eq!(a, b);
        let c = build_topology(&cfg, &RandomStreams::new(10));
        assert_ne!(a.initial_offset_m, c.initial_offset_m);
    }

    #[test]
    fn five_mis_six_tus_each() {
        let mut cfg = ScenarioConfig::default();
        cfg.network.tus_per_mis = vec![6; 5];
        let topo = build_topology(&cfg, &RandomStreams::new(1));
        assert_eq!(topo.num_tus(), 30);
        for k in 0..5 {
            assert_eq!(topo.tus_of(k).len(), 6);
            assert!(topo.tus_of(k).all(|i| topo.home_mis[i] == k));
        }
        let r = cfg.network.coverage_radius_m;
        assert!(topo.initial_offset_m.iter().all(|&d| (0.0..=r).contains(&d)));
    }

    #[test]
    fn zero_tus_is_valid() {
        let mut cfg = ScenarioConfig::default();
        cfg.network.tus_per_mis = vec![0; 5];
        cfg.validate().unwrap();
        let topo = build_topology(&cfg, &RandomStreams::new(1));
        assert_eq!(topo.num_tus(), 0);
        assert_eq!(topo.num_mis(), 5);
    }

    #[test]
    fn streams_are_independent_per_entity() {
        let s = RandomStreams::new(3);
        let a: u64 = s.stream(Phenomenon::Arrivals, 0).random();
        let b: u64 = s.stream(Phenomenon::Arrivals, 1).random();
        let c: u64 = s.stream(Phenomenon::Fading, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, s.stream(Phenomenon::Arrivals, 0).random::<u64>());
    }

    #[test]
    fn total_tus_spread_evenly() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_total_tus(12);
        assert_eq!(cfg.network.tus_per_mis, vec![3, 3, 2, 2, 2]);
        assert_eq!(cfg.num_tus(), 12);
    }

    #[test]
    fn noise_power_matches_psd() {
        let cfg = ScenarioConfig::default();
        // -174 dBm/Hz over 1 MHz is -114 dBm.
        let expected = 10f64.powf(-14.4) * 1e-3 * 1e3;
        let got = cfg.noise_power_w(1e6);
        assert!((got - expected).abs() / expected < 1e-12);
        assert_eq!(cfg.max_processed_tasks(), 50);
    }
}
