use maritime_mec::sim::NullSink;
use maritime_mec::{run_simulation, Policy, ScenarioConfig, Simulation};

fn one_cell(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.network.num_mis = 1;
    cfg.network.tus_per_mis = vec![1];
    cfg.sim.horizon_slots = 3_000;
    cfg.sim.seed = seed;
    cfg
}

#[test]
fn single_link_throughput_is_reproducible_across_seeds() {
    let h: Vec<f64> = (1..=8)
        .map(|seed| {
            Simulation::new(one_cell(seed))
                .unwrap()
                .run(&mut NullSink)
                .unwrap()
                .avg_throughput_bps
        })
        .collect();
    let n = h.len() as f64;
    let mean = h.iter().sum::<f64>() / n;
    let sd = (h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let half_width = 2.365 * sd / n.sqrt();
    assert!(mean > 0.0);
    assert!(half_width < 0.05 * mean, "mean {mean:.3e}, 95% half-width {half_width:.3e}");
}

#[test]
fn tasks_are_conserved() {
    for policy in Policy::ALL {
        let mut cfg = ScenarioConfig::default();
        cfg.control.policy = policy;
        cfg.sim.horizon_slots = 500;
        let (_, records) = run_simulation(&cfg).unwrap();
        let mut expected = 0u64;
        for r in &records {
            // recorded queues are start-of-slot backlogs
            assert_eq!(r.total_queue(), expected, "{policy} slot {}", r.slot);
            let arrived: u64 = r.arrivals.iter().sum();
            expected = expected + arrived - r.processed_tasks - r.migrated_tasks - r.dropped_tasks;
        }
    }
}

#[test]
fn batteries_stay_in_range_and_never_overspend() {
    for policy in Policy::ALL {
        let mut cfg = ScenarioConfig::default();
        cfg.control.policy = policy;
        cfg.energy.max_charge_j_per_slot = 1.0;
        cfg.sim.horizon_slots = 800;
        let (_, records) = run_simulation(&cfg).unwrap();
        for pair in records.windows(2) {
            for k in 0..cfg.network.num_mis {
                // only the maintenance draw may exceed what is stored
                let allowed = pair[0].battery_j[k].max(cfg.energy.base_power_j_per_slot);
                assert!(pair[0].consumed_energy_j[k] <= allowed + 1e-9, "{policy}");
                assert!((0.0..=cfg.energy.battery_capacity_j + 1e-9).contains(&pair[1].battery_j[k]));
            }
        }
    }
}

#[test]
fn summary_matches_per_slot_records() {
    let mut cfg = ScenarioConfig::default();
    cfg.sim.horizon_slots = 400;
    let (summary, records) = run_simulation(&cfg).unwrap();
    let h = records.iter().map(|r| r.throughput_bps).sum::<f64>() / 400.0;
    assert!((summary.avg_throughput_bps - h).abs() <= 1e-9 * h);
    let q = records.iter().map(|r| r.total_queue() as f64).sum::<f64>() / 400.0;
    assert!((summary.avg_queue_tasks - q).abs() <= 1e-9 * q.max(1.0));
    let clamps = records.iter().flat_map(|r| &r.energy_clamped).filter(|&&c| c).count();
    assert!((summary.violation_rate - clamps as f64 / (400.0 * 5.0)).abs() < 1e-12);
}
