//! Slot-accurate discrete-time simulation of the cell-partitioned MANET.
//!
//! Each slot runs three phases in order: mobility, exogenous arrivals,
//! transmissions. A packet generated in a slot is eligible for transmission
//! in the same slot. Per cell and slot at most one packet moves, selected by
//! the two-hop relay rules with a source-to-relay handshake that refuses
//! transmissions into a full relay buffer, so no packet is ever dropped.

use std::collections::VecDeque;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::NetworkConfig;
use crate::error::{Error, Result};

/// Node mobility: a fresh uniform cell every slot, or a random walk over
/// the Moore neighborhood (current cell plus 8 adjacent, torus wraparound)
/// of a square cell grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityModel {
    Iid,
    #[serde(alias = "walk")]
    RandomWalk,
}

impl std::fmt::Display for MobilityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MobilityModel::Iid => write!(f, "iid"),
            MobilityModel::RandomWalk => write!(f, "random_walk"),
        }
    }
}

/// One simulation run, fully determined by these fields (including `seed`
/// and `stream`: replications use one RNG stream per replication index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub network: NetworkConfig,
    /// Per-node Bernoulli arrival probability per slot.
    pub lambda: f64,
    pub mobility: MobilityModel,
    pub n_slots: u64,
    /// Leading slots excluded from all measurements.
    pub warmup_slots: u64,
    pub seed: u64,
    /// RNG stream index, one per replication.
    #[serde(default)]
    pub stream: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.warmup_slots >= self.n_slots {
            return Err(Error::InvalidConfig(format!(
                "warmup ({}) must be shorter than the horizon ({})",
                self.warmup_slots, self.n_slots
            )));
        }
        if self.mobility == MobilityModel::RandomWalk {
            let c = self.network.n_cells();
            let side = (c as f64).sqrt().round() as u32;
            if side * side != c {
                return Err(Error::InvalidConfig(format!(
                    "random walk mobility needs a square cell count, got C = {c}"
                )));
            }
        }
        Ok(())
    }
}

/// A packet as seen by traces and inspection. The destination is always the
/// traffic partner of the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Packet {
    pub source: u32,
    pub destination: u32,
    /// Per-source creation counter.
    pub sequence: u64,
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionKind {
    /// Source delivered its own packet directly to the destination.
    Direct,
    /// Source handed a packet to a relay (handshake passed).
    SourceToRelay,
    /// Relay delivered a carried packet to its destination.
    RelayToDestination,
}

/// Trace stream of a simulation run. Emitting a trace never changes the
/// random stream, so traced and untraced runs are identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Arrival {
        slot: u64,
        node: u32,
        packet: Packet,
    },
    Transmission {
        slot: u64,
        cell: u32,
        kind: TransmissionKind,
        source: u32,
        receiver: u32,
        packet: Packet,
    },
}

/// Statistics over the measured (post-warmup) window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    /// Packets received at each node as destination.
    pub delivered_per_node: Vec<u64>,
    /// Deliveries per measured slot, per destination node.
    pub throughput_per_node: Vec<f64>,
    /// Fraction of measured slots each node's relay buffer was full,
    /// sampled at slot boundaries (the state a next-slot handshake sees).
    pub relay_full_fraction: Vec<f64>,
    /// Mean slots a packet spends in its source's local queue, counting the
    /// creation slot through the departure slot inclusive. Zero if nothing
    /// departed in the measured window.
    pub mean_local_delay: f64,
    /// Mean relay-buffer occupancy in packets, over nodes and slots.
    pub mean_relay_occupancy: f64,
    pub measured_slots: u64,
    /// Packets generated over the whole run, warmup included.
    pub generated_packets: u64,
    /// Packets delivered over the whole run, warmup included.
    pub delivered_packets: u64,
}

impl SimStats {
    /// Throughput averaged over all destination nodes.
    pub fn mean_throughput(&self) -> f64 {
        self.throughput_per_node.iter().sum::<f64>() / self.throughput_per_node.len() as f64
    }

    /// Empirical full-buffer probability averaged over nodes.
    pub fn mean_relay_full_fraction(&self) -> f64 {
        self.relay_full_fraction.iter().sum::<f64>() / self.relay_full_fraction.len() as f64
    }
}

/// Self-generated packets awaiting dispatch. Sequences are consecutive, so
/// only creation slots are stored; the head's sequence is reconstructed
/// from the counter and the queue length.
#[derive(Debug, Clone, Default)]
struct LocalQueue {
    created: VecDeque<u64>,
    next_seq: u64,
}

#[derive(Debug, Clone, Copy)]
struct RelayEntry {
    source: u32,
    sequence: u64,
    created_at: u64,
}

/// The simulation state machine. Use [`run`] for a complete run, or drive
/// [`Simulator::step`] directly for instrumented execution.
pub struct Simulator {
    config: SimConfig,
    n_nodes: usize,
    n_cells: usize,
    buffer: usize,
    rng: ChaCha8Rng,
    cell_dist: Uniform<u32>,
    walk_dist: Uniform<u8>,
    /// Moore-neighborhood lookup per cell; empty under i.i.d. mobility.
    walk_neighbors: Vec<[u32; 9]>,
    cell_of: Vec<u32>,
    /// Nodes grouped by cell, rebuilt each slot by counting sort: cell c
    /// occupies members_flat[cell_start[c]..cell_start[c + 1]].
    members_flat: Vec<u32>,
    cell_start: Vec<u32>,
    cell_cursor: Vec<u32>,
    /// Number of co-located traffic pairs per cell this slot. Partners have
    /// adjacent ids, so one sequential pass over cell_of fills this and the
    /// per-cell member scan only runs for cells that actually hold a pair.
    pairs_in_cell: Vec<u32>,
    pair_scratch: Vec<u32>,
    local: Vec<LocalQueue>,
    relay: Vec<VecDeque<RelayEntry>>,
    /// Dense mirrors of the queue lengths. The transmission rules test
    /// queue emptiness far more often than they move packets, and the
    /// per-slot sampling pass reads every relay length; the mirrors keep
    /// those reads off the scattered queue allocations.
    relay_len: Vec<u32>,
    local_len: Vec<u32>,
    /// Slot of each node's next Bernoulli arrival. Successive arrivals are
    /// geometric inter-arrival gaps, which is the same process as one
    /// Bernoulli(lambda) trial per slot without drawing for every slot.
    next_arrival: Vec<u64>,
    /// ln(1 - lambda), precomputed for the gap sampler.
    ln_arrival_miss: f64,
    slot: u64,
    delivered_per_node: Vec<u64>,
    full_slot_counts: Vec<u64>,
    relay_occupancy_sum: u64,
    local_delay_sum: u64,
    local_departures: u64,
    generated: u64,
    delivered_total: u64,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let n_nodes = config.network.n_nodes() as usize;
        let n_cells = config.network.n_cells() as usize;

        let walk_neighbors = if config.mobility == MobilityModel::RandomWalk {
            moore_neighbor_table(config.network.n_cells())
        } else {
            Vec::new()
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(config.stream);

        // Initial placement is uniform, the stationary distribution of both
        // mobility models.
        let cell_dist = Uniform::new(0, n_cells as u32).expect("non-empty cell range");
        let cell_of = (0..n_nodes).map(|_| cell_dist.sample(&mut rng)).collect();

        let ln_arrival_miss = (-config.lambda).ln_1p();
        let next_arrival = (0..n_nodes)
            .map(|_| {
                if config.lambda == 0.0 {
                    u64::MAX
                } else {
                    arrival_gap(&mut rng, ln_arrival_miss) - 1
                }
            })
            .collect();

        Ok(Self {
            n_nodes,
            n_cells,
            buffer: config.network.buffer_size() as usize,
            rng,
            cell_dist,
            walk_dist: Uniform::new(0u8, 9).expect("static range"),
            walk_neighbors,
            cell_of,
            members_flat: vec![0; n_nodes],
            cell_start: vec![0; n_cells + 1],
            cell_cursor: vec![0; n_cells],
            pairs_in_cell: vec![0; n_cells],
            pair_scratch: Vec::new(),
            local: vec![LocalQueue::default(); n_nodes],
            relay: vec![VecDeque::with_capacity(config.network.buffer_size() as usize); n_nodes],
            relay_len: vec![0; n_nodes],
            local_len: vec![0; n_nodes],
            next_arrival,
            ln_arrival_miss,
            slot: 0,
            delivered_per_node: vec![0; n_nodes],
            full_slot_counts: vec![0; n_nodes],
            relay_occupancy_sum: 0,
            local_delay_sum: 0,
            local_departures: 0,
            generated: 0,
            delivered_total: 0,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.n_slots
    }

    pub fn current_cell(&self, node: u32) -> u32 {
        self.cell_of[node as usize]
    }

    pub fn local_len(&self, node: u32) -> usize {
        self.local[node as usize].created.len()
    }

    pub fn relay_len(&self, node: u32) -> usize {
        self.relay[node as usize].len()
    }

    /// Packets currently carried in the relay buffer of `node`.
    pub fn relay_contents(&self, node: u32) -> Vec<Packet> {
        self.relay[node as usize]
            .iter()
            .map(|e| Packet {
                source: e.source,
                destination: e.source ^ 1,
                sequence: e.sequence,
                created_at: e.created_at,
            })
            .collect()
    }

    pub fn generated_packets(&self) -> u64 {
        self.generated
    }

    pub fn delivered_packets(&self) -> u64 {
        self.delivered_total
    }

    /// Packets sitting in queues right now: (local total, relay total).
    pub fn packets_in_flight(&self) -> (u64, u64) {
        let local = self.local.iter().map(|q| q.created.len() as u64).sum();
        let relay = self.relay.iter().map(|q| q.len() as u64).sum();
        (local, relay)
    }

    /// Move every node to its next cell.
    pub fn step_mobility(&mut self) {
        match self.config.mobility {
            MobilityModel::Iid => {
                for cell in self.cell_of.iter_mut() {
                    *cell = self.cell_dist.sample(&mut self.rng);
                }
            }
            MobilityModel::RandomWalk => {
                for cell in self.cell_of.iter_mut() {
                    let d = self.walk_dist.sample(&mut self.rng);
                    *cell = self.walk_neighbors[*cell as usize][d as usize];
                }
            }
        }
    }

    /// Bernoulli arrivals: each node appends one self-sourced packet with
    /// probability lambda, independently per node and slot.
    pub fn step_arrivals(&mut self, mut trace: Option<&mut dyn FnMut(TraceEvent)>) {
        for n in 0..self.n_nodes {
            if self.next_arrival[n] == self.slot {
                let gap = arrival_gap(&mut self.rng, self.ln_arrival_miss);
                self.next_arrival[n] = self.slot.saturating_add(gap);
                let q = &mut self.local[n];
                if let Some(t) = trace.as_deref_mut() {
                    t(TraceEvent::Arrival {
                        slot: self.slot,
                        node: n as u32,
                        packet: Packet {
                            source: n as u32,
                            destination: n as u32 ^ 1,
                            sequence: q.next_seq,
                            created_at: self.slot,
                        },
                    });
                }
                q.created.push_back(self.slot);
                q.next_seq += 1;
                self.local_len[n] += 1;
                self.generated += 1;
            }
        }
    }

    /// Run the per-cell transmission rules for the current slot.
    ///
    /// In every cell holding at least two nodes exactly one of the
    /// following happens:
    /// - at least one traffic pair is co-located: one ordered
    ///   source-destination pair is picked uniformly; the source sends its
    ///   head local packet, or idles if it has none (even when another
    ///   co-located pair does have traffic);
    /// - otherwise a sender and then a receiver are drawn uniformly and a
    ///   fair coin picks the direction: heads attempts source-to-relay
    ///   (needs a local packet and, by handshake, a non-full receiver
    ///   buffer), tails attempts relay-to-destination (delivers the oldest
    ///   carried packet destined for the receiver, if any).
    pub fn execute_slot_transmissions(&mut self, mut trace: Option<&mut dyn FnMut(TraceEvent)>) {
        let slot = self.slot;
        let measured = slot >= self.config.warmup_slots;

        self.cell_cursor.fill(0);
        for &c in &self.cell_of {
            self.cell_cursor[c as usize] += 1;
        }
        let mut acc = 0u32;
        for c in 0..self.n_cells {
            self.cell_start[c] = acc;
            acc += self.cell_cursor[c];
            self.cell_cursor[c] = self.cell_start[c];
        }
        self.cell_start[self.n_cells] = acc;
        for n in 0..self.n_nodes {
            let c = self.cell_of[n] as usize;
            self.members_flat[self.cell_cursor[c] as usize] = n as u32;
            self.cell_cursor[c] += 1;
        }

        self.pairs_in_cell.fill(0);
        for pair in self.cell_of.chunks_exact(2) {
            if pair[0] == pair[1] {
                self.pairs_in_cell[pair[0] as usize] += 1;
            }
        }

        for cell in 0..self.n_cells {
            let start = self.cell_start[cell] as usize;
            let end = self.cell_start[cell + 1] as usize;
            let count = end - start;
            if count < 2 {
                continue;
            }

            if self.pairs_in_cell[cell] > 0 {
                // Ordered source->destination pairs fully inside the cell;
                // each candidate is the source endpoint.
                self.pair_scratch.clear();
                for idx in start..end {
                    let m = self.members_flat[idx];
                    if self.cell_of[(m ^ 1) as usize] as usize == cell {
                        self.pair_scratch.push(m);
                    }
                }
                let pick = self.rng.random_range(0..self.pair_scratch.len() as u32);
                let source = self.pair_scratch[pick as usize];
                let q = &mut self.local[source as usize];
                if let Some(created_at) = q.created.pop_front() {
                    let sequence = q.next_seq - q.created.len() as u64 - 1;
                    let destination = source ^ 1;
                    if measured {
                        self.delivered_per_node[destination as usize] += 1;
                        self.local_delay_sum += slot - created_at + 1;
                        self.local_departures += 1;
                    }
                    self.delivered_total += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t(TraceEvent::Transmission {
                            slot,
                            cell: cell as u32,
                            kind: TransmissionKind::Direct,
                            source,
                            receiver: destination,
                            packet: Packet {
                                source,
                                destination,
                                sequence,
                                created_at,
                            },
                        });
                    }
                }
                continue;
            }

            // No co-located pair: relaying branch. The receiver can never
            // be the sender's own destination here, otherwise the pair
            // branch would have fired.
            let si = self.rng.random_range(0..count as u32) as usize;
            let sender = self.members_flat[start + si];
            let mut ri = self.rng.random_range(0..count as u32 - 1) as usize;
            if ri >= si {
                ri += 1;
            }
            let receiver = self.members_flat[start + ri];

            if self.rng.random::<bool>() {
                // Source-to-relay, gated by the buffer handshake.
                if !self.local[sender as usize].created.is_empty()
                    && self.relay_len[receiver as usize] < self.buffer as u32
                {
                    let q = &mut self.local[sender as usize];
                    let created_at = q.created.pop_front().expect("checked non-empty");
                    let sequence = q.next_seq - q.created.len() as u64 - 1;
                    self.relay[receiver as usize].push_back(RelayEntry {
                        source: sender,
                        sequence,
                        created_at,
                    });
                    self.relay_len[receiver as usize] += 1;
                    if measured {
                        self.local_delay_sum += slot - created_at + 1;
                        self.local_departures += 1;
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t(TraceEvent::Transmission {
                            slot,
                            cell: cell as u32,
                            kind: TransmissionKind::SourceToRelay,
                            source: sender,
                            receiver,
                            packet: Packet {
                                source: sender,
                                destination: sender ^ 1,
                                sequence,
                                created_at,
                            },
                        });
                    }
                }
            } else {
                // Relay-to-destination: oldest carried packet whose
                // destination is the receiver.
                let pos = self.relay[sender as usize]
                    .iter()
                    .position(|e| e.source ^ 1 == receiver);
                if let Some(pos) = pos {
                    let entry = self.relay[sender as usize].remove(pos).expect("valid index");
                    self.relay_len[sender as usize] -= 1;
                    if measured {
                        self.delivered_per_node[receiver as usize] += 1;
                    }
                    self.delivered_total += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t(TraceEvent::Transmission {
                            slot,
                            cell: cell as u32,
                            kind: TransmissionKind::RelayToDestination,
                            source: sender,
                            receiver,
                            packet: Packet {
                                source: entry.source,
                                destination: receiver,
                                sequence: entry.sequence,
                                created_at: entry.created_at,
                            },
                        });
                    }
                }
            }
        }
    }

    /// Advance one slot: mobility, arrivals, transmissions, then end-of-slot
    /// queue sampling.
    pub fn step(&mut self, mut trace: Option<&mut dyn FnMut(TraceEvent)>) {
        debug_assert!(!self.is_done());
        self.step_mobility();
        let reborrow = match trace {
            Some(ref mut t) => Some(&mut **t as &mut dyn FnMut(TraceEvent)),
            None => None,
        };
        self.step_arrivals(reborrow);
        self.execute_slot_transmissions(trace);

        if self.slot >= self.config.warmup_slots {
            let full = self.buffer as u32;
            let mut occupancy = 0u64;
            for (&len, count) in self.relay_len.iter().zip(self.full_slot_counts.iter_mut()) {
                *count += u64::from(len == full);
                occupancy += u64::from(len);
            }
            self.relay_occupancy_sum += occupancy;
        }
        self.slot += 1;
    }

    /// Consume the simulator and produce the measured-window statistics.
    pub fn finish(self) -> SimStats {
        assert!(self.is_done(), "finish called before the horizon");
        let measured = self.config.n_slots - self.config.warmup_slots;
        let m = measured as f64;
        SimStats {
            throughput_per_node: self
                .delivered_per_node
                .iter()
                .map(|&d| d as f64 / m)
                .collect(),
            delivered_per_node: self.delivered_per_node,
            relay_full_fraction: self
                .full_slot_counts
                .iter()
                .map(|&f| f as f64 / m)
                .collect(),
            mean_local_delay: if self.local_departures == 0 {
                0.0
            } else {
                self.local_delay_sum as f64 / self.local_departures as f64
            },
            mean_relay_occupancy: self.relay_occupancy_sum as f64 / (m * self.n_nodes as f64),
            measured_slots: measured,
            generated_packets: self.generated,
            delivered_packets: self.delivered_total,
        }
    }
}

/// Run a configuration to completion without tracing.
pub fn run(config: SimConfig) -> Result<SimStats> {
    let mut sim = Simulator::new(config)?;
    while !sim.is_done() {
        sim.step(None);
    }
    Ok(sim.finish())
}

/// Run a configuration to completion, streaming every trace event into the
/// callback. The random stream is identical to an untraced run.
pub fn run_traced(config: SimConfig, mut on_event: impl FnMut(TraceEvent)) -> Result<SimStats> {
    let mut sim = Simulator::new(config)?;
    while !sim.is_done() {
        sim.step(Some(&mut on_event));
    }
    Ok(sim.finish())
}

/// Slots until the next success of a Bernoulli(lambda) trial sequence,
/// inclusive: a geometric variate starting at 1. `ln_miss` is ln(1-lambda);
/// lambda = 1 collapses the gap to 1 through the infinite denominator.
fn arrival_gap(rng: &mut ChaCha8Rng, ln_miss: f64) -> u64 {
    let u: f64 = rng.random();
    let g = (u.ln() / ln_miss).floor() + 1.0;
    if g.is_finite() {
        g as u64
    } else {
        u64::MAX
    }
}

/// Cells as a side x side torus grid: every cell has exactly nine
/// Moore-neighborhood choices (itself plus 8 neighbors), which keeps the
/// walk doubly stochastic and its stationary cell occupancy uniform.
fn moore_neighbor_table(n_cells: u32) -> Vec<[u32; 9]> {
    let side = (n_cells as f64).sqrt().round() as u32;
    debug_assert_eq!(side * side, n_cells);
    let mut table = Vec::with_capacity(n_cells as usize);
    for cell in 0..n_cells {
        let row = cell / side;
        let col = cell % side;
        let mut nbrs = [0u32; 9];
        let mut idx = 0;
        for dr in [side - 1, 0, 1] {
            for dc in [side - 1, 0, 1] {
                let r = (row + dr) % side;
                let c = (col + dc) % side;
                nbrs[idx] = r * side + c;
                idx += 1;
            }
        }
        table.push(nbrs);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(lambda: f64, n_slots: u64) -> SimConfig {
        SimConfig {
            network: NetworkConfig::new(72, 36, 5).unwrap(),
            lambda,
            mobility: MobilityModel::Iid,
            n_slots,
            warmup_slots: 0,
            seed: 7,
            stream: 0,
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut c = base_config(1.5, 100);
        assert!(c.validate().is_err());
        c.lambda = 0.5;
        c.warmup_slots = 100;
        assert!(c.validate().is_err());
        c.warmup_slots = 0;
        c.mobility = MobilityModel::RandomWalk;
        c.network = NetworkConfig::new(72, 35, 5).unwrap();
        assert!(c.validate().is_err());
        c.network = NetworkConfig::new(72, 36, 5).unwrap();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn no_arrivals_means_no_traffic() {
        let stats = run(base_config(0.0, 10_000)).unwrap();
        assert_eq!(stats.generated_packets, 0);
        assert_eq!(stats.delivered_packets, 0);
        assert!(stats.throughput_per_node.iter().all(|&t| t == 0.0));
        assert_eq!(stats.mean_relay_occupancy, 0.0);
        assert_eq!(stats.mean_local_delay, 0.0);
    }

    #[test]
    fn saturated_arrivals_generate_every_slot() {
        let mut sim = Simulator::new(base_config(1.0, 10)).unwrap();
        for expected in 1..=10u64 {
            sim.step(None);
            assert_eq!(sim.generated_packets(), expected * 72);
        }
    }

    #[test]
    fn arrival_counts_match_bernoulli_rate() {
        // 4 nodes x 250k slots = 1e6 node-slots at lambda = 0.02.
        let mut c = base_config(0.02, 250_000);
        c.network = NetworkConfig::new(4, 2, 1).unwrap();
        let stats = run(c).unwrap();
        let expect = 1e6 * 0.02;
        let sigma = (1e6f64 * 0.02 * 0.98).sqrt();
        let got = stats.generated_packets as f64;
        assert!(
            (got - expect).abs() <= 3.0 * sigma,
            "arrivals {got} vs {expect} +- {sigma}"
        );
    }

    #[test]
    fn single_cell_holds_everyone() {
        let mut c = base_config(0.0, 10);
        c.network = NetworkConfig::new(4, 1, 1).unwrap();
        let mut sim = Simulator::new(c).unwrap();
        for _ in 0..10 {
            sim.step_mobility();
            for n in 0..4 {
                assert_eq!(sim.current_cell(n), 0);
            }
        }
    }

    #[test]
    fn iid_mobility_is_uniform() {
        let mut c = base_config(0.0, 1);
        c.network = NetworkConfig::new(4, 36, 1).unwrap();
        let mut sim = Simulator::new(c).unwrap();
        let steps = 1_000_000u64;
        let mut counts = vec![0u64; 36];
        for _ in 0..steps {
            sim.step_mobility();
            counts[sim.current_cell(0) as usize] += 1;
        }
        let p = 1.0 / 36.0;
        let sigma = (steps as f64 * p * (1.0 - p)).sqrt();
        for (cell, &count) in counts.iter().enumerate() {
            assert!(
                (count as f64 - steps as f64 * p).abs() <= 4.0 * sigma,
                "cell {cell}: {count}"
            );
        }
    }

    #[test]
    fn moore_neighbors_wrap_on_the_torus() {
        let table = moore_neighbor_table(36);
        let mut got = table[0].to_vec();
        got.sort_unstable();
        // Cell 0 of a 6x6 torus: rows {5,0,1} x cols {5,0,1}.
        assert_eq!(got, vec![0, 1, 5, 6, 7, 11, 30, 31, 35]);
        let mut inner = table[7].to_vec(); // row 1, col 1: no wrap
        inner.sort_unstable();
        assert_eq!(inner, vec![0, 1, 2, 6, 7, 8, 12, 13, 14]);
    }

    #[test]
    fn random_walk_stationary_occupancy_is_uniform() {
        let mut c = base_config(0.0, 1);
        c.network = NetworkConfig::new(4, 36, 1).unwrap();
        c.mobility = MobilityModel::RandomWalk;
        let mut sim = Simulator::new(c).unwrap();
        let steps = 2_000_000u64;
        let mut counts = vec![0u64; 36];
        for _ in 0..steps {
            sim.step_mobility();
            counts[sim.current_cell(0) as usize] += 1;
        }
        let p = 1.0 / 36.0;
        // The walk mixes slowly compared to i.i.d. draws; inflate the
        // binomial sigma by an effective-sample-size factor.
        let sigma = (steps as f64 * p * (1.0 - p)).sqrt() * 4.0;
        for (cell, &count) in counts.iter().enumerate() {
            assert!(
                (count as f64 - steps as f64 * p).abs() <= 4.0 * sigma,
                "cell {cell}: {count}"
            );
        }
    }

    #[test]
    fn random_walk_moves_stay_in_neighborhood() {
        let mut c = base_config(0.0, 1);
        c.network = NetworkConfig::new(4, 36, 1).unwrap();
        c.mobility = MobilityModel::RandomWalk;
        let table = moore_neighbor_table(36);
        let mut sim = Simulator::new(c).unwrap();
        for _ in 0..10_000 {
            let before = sim.current_cell(2);
            sim.step_mobility();
            let after = sim.current_cell(2);
            assert!(table[before as usize].contains(&after));
        }
    }

    #[test]
    fn direct_only_network_splits_deliveries_evenly() {
        // C = 1: all four nodes always co-located, so both traffic pairs
        // are always present and only direct transmissions ever happen.
        let mut c = base_config(1.0, 40_000);
        c.network = NetworkConfig::new(4, 1, 1).unwrap();
        let stats = run(c).unwrap();
        assert_eq!(stats.delivered_packets, 40_000);
        let expect = 10_000.0;
        let sigma = (40_000.0f64 * 0.25 * 0.75).sqrt();
        for (node, &d) in stats.delivered_per_node.iter().enumerate() {
            assert!(
                (d as f64 - expect).abs() <= 4.0 * sigma,
                "node {node}: {d}"
            );
        }
        // Saturated local queues: mean delay is the queueing backlog, and
        // every slot delivers exactly one packet.
        assert!((stats.mean_throughput() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn relay_buffers_never_exceed_capacity() {
        let mut c = base_config(0.9, 20_000);
        c.network = NetworkConfig::new(8, 16, 2).unwrap();
        let mut sim = Simulator::new(c).unwrap();
        while !sim.is_done() {
            sim.step(None);
            for n in 0..8 {
                assert!(sim.relay_len(n) <= 2);
            }
        }
    }

    #[test]
    fn packet_conservation_holds_every_slot() {
        let mut c = base_config(0.3, 5_000);
        c.network = NetworkConfig::new(8, 4, 3).unwrap();
        let mut sim = Simulator::new(c).unwrap();
        while !sim.is_done() {
            sim.step(None);
            let (local, relay) = sim.packets_in_flight();
            assert_eq!(
                sim.generated_packets(),
                local + relay + sim.delivered_packets()
            );
        }
    }

    #[test]
    fn relay_queue_holds_only_third_party_packets() {
        let mut c = base_config(0.5, 5_000);
        c.network = NetworkConfig::new(8, 4, 3).unwrap();
        let mut sim = Simulator::new(c).unwrap();
        while !sim.is_done() {
            sim.step(None);
            for n in 0..8u32 {
                for p in sim.relay_contents(n) {
                    assert_ne!(p.source, n);
                    assert_ne!(p.destination, n);
                    assert_eq!(p.destination, p.source ^ 1);
                }
            }
        }
    }

    #[test]
    fn identical_seeds_reproduce_bit_exact_stats() {
        let c = base_config(0.02, 30_000);
        let a = run(c).unwrap();
        let b = run(c).unwrap();
        assert_eq!(a, b);
        let mut c2 = c;
        c2.stream = 1;
        let other = run(c2).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn tracing_does_not_change_the_run() {
        let c = base_config(0.05, 10_000);
        let untraced = run(c).unwrap();
        let mut events = 0u64;
        let traced = run_traced(c, |_| events += 1).unwrap();
        assert_eq!(untraced, traced);
        assert!(events > 0);
    }

    #[test]
    fn trace_packets_travel_at_most_two_hops() {
        use std::collections::HashMap;
        let mut c = base_config(0.1, 20_000);
        c.network = NetworkConfig::new(8, 4, 3).unwrap();
        let mut hops: HashMap<(u32, u64), Vec<TransmissionKind>> = HashMap::new();
        run_traced(c, |e| {
            if let TraceEvent::Transmission { kind, packet, .. } = e {
                hops.entry((packet.source, packet.sequence))
                    .or_default()
                    .push(kind);
            }
        })
        .unwrap();
        assert!(!hops.is_empty());
        for (id, kinds) in hops {
            match kinds.as_slice() {
                [TransmissionKind::Direct] => {}
                [TransmissionKind::SourceToRelay] => {}
                [TransmissionKind::SourceToRelay, TransmissionKind::RelayToDestination] => {}
                other => panic!("packet {id:?} path {other:?}"),
            }
        }
    }

    #[test]
    fn warmup_slots_are_excluded_from_measurement() {
        let mut c = base_config(1.0, 1_000);
        c.network = NetworkConfig::new(4, 1, 1).unwrap();
        c.warmup_slots = 500;
        let stats = run(c).unwrap();
        assert_eq!(stats.measured_slots, 500);
        // One direct delivery per slot under saturation in a single cell.
        assert_eq!(stats.delivered_per_node.iter().sum::<u64>(), 500);
        assert_eq!(stats.delivered_packets, 1_000);
    }
}
