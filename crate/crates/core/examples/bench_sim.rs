use m2hr_core::analytic::NetworkConfig;
use m2hr_core::simulator::{run, MobilityModel, SimConfig, Simulator};
use std::time::Instant;

fn main() {
    let config = SimConfig {
        network: NetworkConfig::new(72, 36, 5).unwrap(),
        lambda: 0.0232,
        mobility: MobilityModel::Iid,
        n_slots: u64::MAX / 2,
        warmup_slots: 0,
        seed: 1,
        stream: 0,
    };
    let n = 2_000_000u64;

    let mut sim = Simulator::new(config).unwrap();
    let t = Instant::now();
    for _ in 0..n {
        sim.step_mobility();
    }
    println!("mobility:      {:.0} ns/slot", t.elapsed().as_nanos() as f64 / n as f64);

    let mut sim = Simulator::new(config).unwrap();
    let t = Instant::now();
    for _ in 0..n {
        sim.step_arrivals(None);
    }
    println!("arrivals:      {:.0} ns/slot", t.elapsed().as_nanos() as f64 / n as f64);

    let mut sim = Simulator::new(config).unwrap();
    let t = Instant::now();
    for _ in 0..n {
        sim.step_mobility();
        sim.execute_slot_transmissions(None);
    }
    println!("mob+transmit:  {:.0} ns/slot", t.elapsed().as_nanos() as f64 / n as f64);

    let config2 = SimConfig { n_slots: n, warmup_slots: 0, ..config };
    let t = Instant::now();
    let stats = run(config2).unwrap();
    println!("full step:     {:.0} ns/slot thr={:.6}", t.elapsed().as_nanos() as f64 / n as f64, stats.mean_throughput());
}
