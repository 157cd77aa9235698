//! Closed-form throughput model: per-slot contact probabilities, the
//! state-dependent relay-queue Markov chain, the full-buffer fixed point,
//! throughput capacity and local-queue delay.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{occupancy_distribution, CompensatedSum};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Residual the fixed-point bisection must reach before a solution is
/// accepted.
const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Iteration cap for the fixed-point bisection.
const FIXED_POINT_MAX_ITER: usize = 200;
/// Absolute tolerance on the capacity root of mu_S(lambda) = lambda.
const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawNetworkConfig {
    nodes: u32,
    cells: u32,
    buffer: u32,
}

/// Network parameters: node count N (even, >= 4), cell count C and relay
/// buffer size B in packets.
///
/// Traffic is the fixed pairing 1<->2, 3<->4, ..., (N-1)<->N, which is why N
/// must be even; N >= 4 guarantees at least two potential relays per flow.
/// B = 0 is rejected: with no relay buffer the relaying branch of the
/// routing algorithm is void and the capacity degenerates to the direct
/// contact rate `p_sd`, which needs no solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawNetworkConfig", into = "RawNetworkConfig")]
pub struct NetworkConfig {
    n_nodes: u32,
    n_cells: u32,
    buffer_size: u32,
}

impl NetworkConfig {
    pub fn new(n_nodes: u32, n_cells: u32, buffer_size: u32) -> Result<Self> {
        if n_nodes < 4 || n_nodes % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "node count must be even and at least 4, got {n_nodes}"
            )));
        }
        if n_cells == 0 {
            return Err(Error::InvalidConfig("cell count must be positive".into()));
        }
        if buffer_size == 0 {
            return Err(Error::InvalidConfig(
                "relay buffer size must be at least 1 packet".into(),
            ));
        }
        Ok(Self {
            n_nodes,
            n_cells,
            buffer_size,
        })
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_nodes
    }

    pub fn n_cells(&self) -> u32 {
        self.n_cells
    }

    pub fn buffer_size(&self) -> u32 {
        self.buffer_size
    }

    /// Traffic partner of a node (0-based ids): 0<->1, 2<->3, ...
    pub fn partner(&self, node: u32) -> u32 {
        node ^ 1
    }
}

impl TryFrom<RawNetworkConfig> for NetworkConfig {
    type Error = Error;

    fn try_from(raw: RawNetworkConfig) -> Result<Self> {
        NetworkConfig::new(raw.nodes, raw.cells, raw.buffer)
    }
}

impl From<NetworkConfig> for RawNetworkConfig {
    fn from(c: NetworkConfig) -> Self {
        RawNetworkConfig {
            nodes: c.n_nodes,
            cells: c.n_cells,
            buffer: c.buffer_size,
        }
    }
}

impl std::fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "N={} C={} B={}",
            self.n_nodes, self.n_cells, self.buffer_size
        )
    }
}

/// Per-slot contact probabilities of the cell-partitioned network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactProbabilities<F> {
    /// Probability a given cell holds at least two nodes.
    pub p: F,
    /// Probability a given cell holds at least one traffic pair.
    pub q: F,
    /// Probability a given node gets a source-to-destination opportunity.
    pub p_sd: F,
    /// Probability a given node gets a source-to-relay opportunity.
    pub p_sr: F,
    /// Probability a given node gets a relay-to-destination opportunity.
    pub p_rd: F,
}

/// Contact probabilities without the config-level validity checks; the
/// formulas themselves are well defined for any n >= 2, c >= 1.
fn contact_from_counts<F: Real>(n_nodes: u32, n_cells: u32) -> ContactProbabilities<F> {
    let n = F::from_count(u64::from(n_nodes));
    let c = F::from_count(u64::from(n_cells));
    let half = F::c(0.5);

    // ln(1 - 1/C) and ln(1 - 1/C^2), kept in log form for accuracy at
    // large C where the direct powers cancel badly against 1.
    let ln_miss = (-c.recip()).ln_1p();
    let ln_pair_miss = (-(c * c).recip()).ln_1p();

    let p = -(n * ln_miss).exp_m1() - (n / c) * ((n - F::one()) * ln_miss).exp();
    let q = -(half * n * ln_pair_miss).exp_m1();
    let p_sd = c / n * q;
    // p >= q holds exactly in the model; guard the subtraction against
    // rounding producing a negative opportunity probability.
    let p_sr = (c * (p - q) / (F::c(2.0) * n)).max(F::zero());

    ContactProbabilities {
        p,
        q,
        p_sd,
        p_sr,
        p_rd: p_sr,
    }
}

/// Contact probabilities for a validated network configuration.
pub fn contact_probabilities<F: Real>(config: NetworkConfig) -> ContactProbabilities<F> {
    contact_from_counts(config.n_nodes(), config.n_cells())
}

/// Relay-queue birth-death model solved at one arrival rate: the cached
/// service rates mu_R(1..=B), the arrival rate lambda-tilde and the
/// limiting occupancy distribution pi(0..=B).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelayQueueModel<F> {
    service_rates: Vec<F>,
    arrival_rate: F,
    limiting_distribution: Vec<F>,
}

impl<F: Real> RelayQueueModel<F> {
    /// mu_R(k) for k = 1..=B.
    pub fn service_rates(&self) -> &[F] {
        &self.service_rates
    }

    pub fn service_rate(&self, k: u32) -> F {
        self.service_rates[(k - 1) as usize]
    }

    pub fn arrival_rate(&self) -> F {
        self.arrival_rate
    }

    /// pi(k) for k = 0..=B.
    pub fn limiting_distribution(&self) -> &[F] {
        &self.limiting_distribution
    }

    /// Probability the relay buffer is full, pi(B).
    pub fn p_full(&self) -> F {
        *self.limiting_distribution.last().unwrap()
    }

    pub fn buffer_size(&self) -> u32 {
        self.service_rates.len() as u32
    }
}

/// Self-consistent solution of the coupled local/relay queue model at one
/// exogenous arrival rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSolution<F> {
    /// Exogenous per-node arrival rate.
    pub lambda: F,
    /// Probability the relay queue is full.
    pub p_full: F,
    /// Local-queue service rate mu_S = p_sd + p_sr * (1 - p_full).
    pub mu_s: F,
    /// Arrival rate at a non-full relay queue, lambda * p_sr / mu_S.
    pub lambda_tilde: F,
    /// The relay-queue model at that arrival rate.
    pub relay_model: RelayQueueModel<F>,
}

/// Throughput capacity and the fixed point at the capacity operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult<F> {
    /// Largest sustainable per-node arrival rate, packets/slot.
    pub throughput_capacity: F,
    pub solution_at_capacity: FixedPointSolution<F>,
    pub config: NetworkConfig,
}

/// Precomputed per-config quantities: contact probabilities and the
/// lambda-independent relay service rates. The capacity bisection evaluates
/// many fixed points against the same config, so these are computed once.
#[derive(Debug, Clone)]
pub struct NetworkModel<F> {
    config: NetworkConfig,
    contact: ContactProbabilities<F>,
    service_rates: Vec<F>,
}

impl<F: Real> NetworkModel<F> {
    pub fn new(config: NetworkConfig) -> Self {
        let contact = contact_probabilities(config);
        let n_destinations = config.n_nodes() - 2;
        let service_rates = (1..=config.buffer_size())
            .map(|k| {
                let occ = occupancy_distribution::<F>(n_destinations, k)
                    .expect("validated config yields valid occupancy arguments");
                contact.p_rd * occ.expected_distinct_fraction()
            })
            .collect();
        Self {
            config,
            contact,
            service_rates,
        }
    }

    pub fn config(&self) -> NetworkConfig {
        self.config
    }

    pub fn contact(&self) -> &ContactProbabilities<F> {
        &self.contact
    }

    /// Cached mu_R(k) for k = 1..=B.
    pub fn service_rates(&self) -> &[F] {
        &self.service_rates
    }

    /// Limiting distribution of the relay queue at a fixed arrival rate.
    pub fn limiting_distribution(&self, lambda_tilde: F) -> Result<RelayQueueModel<F>> {
        if lambda_tilde < F::zero() || lambda_tilde >= F::one() {
            return Err(Error::Domain(format!(
                "relay arrival rate must lie in [0, 1), got {lambda_tilde}"
            )));
        }
        Ok(self.relay_model(lambda_tilde))
    }

    fn relay_model(&self, lambda_tilde: F) -> RelayQueueModel<F> {
        RelayQueueModel {
            service_rates: self.service_rates.clone(),
            arrival_rate: lambda_tilde,
            limiting_distribution: stationary_from_rates(&self.service_rates, lambda_tilde),
        }
    }

    /// Full-buffer probability as a function of an assumed full-buffer
    /// probability; the fixed point of this map is the model solution.
    fn p_full_map(&self, lambda: F, assumed_p_full: F) -> F {
        let lambda_tilde = self.lambda_tilde(lambda, assumed_p_full);
        *stationary_from_rates(&self.service_rates, lambda_tilde)
            .last()
            .unwrap()
    }

    fn lambda_tilde(&self, lambda: F, p_full: F) -> F {
        let mu_s = self.contact.p_sd + self.contact.p_sr * (F::one() - p_full);
        lambda * self.contact.p_sr / mu_s
    }

    /// Solve P_B = pi(B; lambda_tilde(P_B)) by bisection.
    ///
    /// The map is continuous and non-decreasing in P_B with range inside
    /// [0, 1], so x -> map(x) - x brackets a root on [0, 1].
    pub fn solve_fixed_point(&self, lambda: F) -> Result<FixedPointSolution<F>> {
        if lambda < F::zero() || lambda > F::one() {
            return Err(Error::Domain(format!(
                "arrival rate must lie in [0, 1], got {lambda}"
            )));
        }

        let h = |x: F| self.p_full_map(lambda, x) - x;
        let mut lo = F::zero();
        let mut hi = F::one();
        // h(0) >= 0 and h(1) <= 0 by construction.
        for _ in 0..FIXED_POINT_MAX_ITER {
            let mid = (lo + hi) * F::c(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = h(mid);
            if s == F::zero() {
                lo = mid;
                hi = mid;
                break;
            } else if s > F::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p_full = if h(lo).abs() <= h(hi).abs() { lo } else { hi };

        // The stated tolerance is for f64; at lower precision the best
        // reachable residual is bounded by the epsilon of the scalar.
        let tolerance = F::c(FIXED_POINT_TOLERANCE).max(F::epsilon() * F::c(1024.0));
        let residual = h(p_full).abs();
        if residual > tolerance {
            return Err(Error::SolverDiverged {
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }

        let mu_s = self.contact.p_sd + self.contact.p_sr * (F::one() - p_full);
        let lambda_tilde = lambda * self.contact.p_sr / mu_s;
        Ok(FixedPointSolution {
            lambda,
            p_full,
            mu_s,
            lambda_tilde,
            relay_model: self.relay_model(lambda_tilde),
        })
    }

    /// Local-queue service rate at one arrival rate.
    pub fn mu_s(&self, lambda: F) -> Result<F> {
        Ok(self.solve_fixed_point(lambda)?.mu_s)
    }

    /// Throughput capacity: the root of mu_S(lambda) = lambda.
    ///
    /// mu_S decreases monotonically in lambda while the identity grows, so
    /// g(lambda) = mu_S(lambda) - lambda crosses zero exactly once on
    /// [0, p_sd + p_sr]: g(0) = p_sd + p_sr > 0 and mu_S never exceeds the
    /// upper bracket end.
    pub fn throughput_capacity(&self) -> CapacityResult<F> {
        let mut lo = F::zero();
        let mut hi = self.contact.p_sd + self.contact.p_sr;
        let g = |lambda: F| {
            self.solve_fixed_point(lambda)
                .expect("in-bracket arrival rates are valid")
                .mu_s
                - lambda
        };
        let tol = F::c(CAPACITY_TOLERANCE);
        if g(hi) >= F::zero() {
            // Degenerate relaying (p_sr = 0): capacity is the bracket end.
            lo = hi;
        }
        while hi - lo > tol {
            let mid = (lo + hi) * F::c(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > F::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let capacity = (lo + hi) * F::c(0.5);
        CapacityResult {
            throughput_capacity: capacity,
            solution_at_capacity: self
                .solve_fixed_point(capacity)
                .expect("capacity lies inside the valid arrival range"),
            config: self.config,
        }
    }

    /// Mean local-queue delay E[D] = (1 - lambda) / (mu_S(lambda) - lambda).
    pub fn local_queue_delay(&self, lambda: F) -> Result<F> {
        let capacity = self.throughput_capacity().throughput_capacity;
        if lambda >= capacity {
            return Err(Error::UnstableLoad {
                lambda: lambda.to_f64().unwrap_or(f64::NAN),
                capacity: capacity.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mu_s = self.mu_s(lambda)?;
        Ok((F::one() - lambda) / (mu_s - lambda))
    }
}

/// Limiting distribution of the finite birth-death chain with constant
/// birth rate and state-dependent death rates, via the ratio recurrence
/// pi(k)/pi(k-1) = lambda_tilde / mu_R(k) carried in log space and
/// normalized in one pass. Raw products of the rates underflow long before
/// the distribution itself degenerates, hence the log form.
fn stationary_from_rates<F: Real>(service_rates: &[F], lambda_tilde: F) -> Vec<F> {
    let buffer = service_rates.len();
    if lambda_tilde == F::zero() {
        // No arrivals: the queue is empty with probability 1. Handled
        // outside the log-space path, where ln(0) would poison the sums.
        let mut pi = vec![F::zero(); buffer + 1];
        pi[0] = F::one();
        return pi;
    }
    let log_lambda = lambda_tilde.ln();
    let mut log_weights = Vec::with_capacity(buffer + 1);
    log_weights.push(F::zero());
    let mut cum = CompensatedSum::new();
    for &rate in service_rates {
        cum.add(log_lambda - rate.ln());
        log_weights.push(cum.value());
    }
    let max = log_weights
        .iter()
        .cloned()
        .fold(F::neg_infinity(), F::max);
    let weights: Vec<F> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total = weights.iter().fold(F::zero(), |a, &b| a + b);
    weights.into_iter().map(|w| w / total).collect()
}

/// Relay-queue service rate mu_R(k) for a buffer holding k packets.
pub fn service_rate_relay<F: Real>(config: NetworkConfig, k: u32) -> Result<F> {
    if k == 0 || k > config.buffer_size() {
        return Err(Error::Domain(format!(
            "relay occupancy k = {k} outside 1..={}",
            config.buffer_size()
        )));
    }
    let contact = contact_probabilities::<F>(config);
    let occ = occupancy_distribution::<F>(config.n_nodes() - 2, k)?;
    Ok(contact.p_rd * occ.expected_distinct_fraction())
}

/// Limiting distribution of the relay queue at a fixed relay arrival rate.
pub fn limiting_distribution<F: Real>(
    config: NetworkConfig,
    lambda_tilde: F,
) -> Result<RelayQueueModel<F>> {
    NetworkModel::new(config).limiting_distribution(lambda_tilde)
}

/// Solve the full-buffer fixed point at one exogenous arrival rate.
pub fn solve_fixed_point<F: Real>(config: NetworkConfig, lambda: F) -> Result<FixedPointSolution<F>> {
    NetworkModel::new(config).solve_fixed_point(lambda)
}

/// Throughput capacity of a network configuration.
pub fn throughput_capacity<F: Real>(config: NetworkConfig) -> CapacityResult<F> {
    NetworkModel::new(config).throughput_capacity()
}

/// Mean local-queue delay at a stable arrival rate.
pub fn local_queue_delay<F: Real>(config: NetworkConfig, lambda: F) -> Result<F> {
    NetworkModel::new(config).local_queue_delay(lambda)
}
