//! Numerically stable binomial coefficients and the occupancy distribution
//! of buffered relay packets over destination nodes.
//!
//! Everything here works in log space: the occupancy denominator is a
//! binomial of order `n_destinations + k - 1` which overflows integer and
//! plain floating-point arithmetic for modest inputs.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Neumaier compensated accumulator.
///
/// Keeps the running error of a long sum of same-scale terms at a couple of
/// ulps of the total instead of growing linearly with the term count.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CompensatedSum<F> {
    sum: F,
    compensation: F,
}

impl<F: Real> CompensatedSum<F> {
    pub fn new() -> Self {
        Self {
            sum: F::zero(),
            compensation: F::zero(),
        }
    }

    pub fn add(&mut self, x: F) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation = self.compensation + ((self.sum - t) + x);
        } else {
            self.compensation = self.compensation + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> F {
        self.sum + self.compensation
    }
}

/// Direct summation handles every min(k, n-k) up to this bound; beyond it
/// the Stirling-series log-gamma difference is both cheap and accurate
/// relative to the (then large) magnitude of the result.
const DIRECT_SUM_MAX: u64 = 2048;

/// ln Gamma(x) by the Stirling asymptotic series.
///
/// Only called with x > DIRECT_SUM_MAX, where three correction terms already
/// put the truncation error far below f64 rounding.
fn ln_gamma_stirling<F: Real>(x: F) -> F {
    let half_ln_two_pi = F::c(0.918_938_533_204_672_74);
    let inv = x.recip();
    let inv2 = inv * inv;
    // Bernoulli-number coefficients of the asymptotic expansion.
    let series = inv
        * (F::c(1.0 / 12.0) + inv2 * (F::c(-1.0 / 360.0) + inv2 * F::c(1.0 / 1260.0)));
    (x - F::c(0.5)) * x.ln() - x + half_ln_two_pi + series
}

/// Natural log of the binomial coefficient C(n, k).
///
/// Evaluated on the symmetric side m = min(k, n-k): for small m as a
/// compensated sum of ln((n-j)/(j+1)) terms, otherwise as a log-gamma
/// difference. The split keeps the relative error of the result at or below
/// ~1e-12 for all n up to 1e6 in f64, which a plain three-way log-gamma
/// difference cannot do (it cancels catastrophically when m << n).
pub fn log_binomial<F: Real>(n: u64, k: u64) -> Result<F> {
    if k > n {
        return Err(Error::Domain(format!(
            "log_binomial: k = {k} exceeds n = {n}"
        )));
    }
    let m = k.min(n - k);
    if m == 0 {
        return Ok(F::zero());
    }
    if m <= DIRECT_SUM_MAX {
        let mut acc = CompensatedSum::new();
        for j in 0..m {
            let num = F::from_count(n - j);
            let den = F::from_count(j + 1);
            acc.add((num / den).ln());
        }
        Ok(acc.value())
    } else {
        let a = ln_gamma_stirling(F::from_count(n + 1));
        let b = ln_gamma_stirling(F::from_count(m + 1));
        let c = ln_gamma_stirling(F::from_count(n - m + 1));
        Ok(a - b - c)
    }
}

/// Distribution of the number of distinct destinations among k buffered
/// relay packets, under the uniform measure over star/bar arrangements.
///
/// `probs()[i - 1]` is the probability that the k packets are destined for
/// exactly i distinct nodes, for i = 1..=min(k, n_destinations).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyDistribution<F> {
    n_destinations: u32,
    k: u32,
    probs: Vec<F>,
}

impl<F: Real> OccupancyDistribution<F> {
    pub fn n_destinations(&self) -> u32 {
        self.n_destinations
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    /// Probability of exactly `i` distinct destinations (1-based `i`).
    pub fn prob(&self, i: u32) -> F {
        self.probs[(i - 1) as usize]
    }

    /// Expected fraction of destination nodes holding at least one packet,
    /// i.e. E[i] / n_destinations. This is the state-dependent factor of the
    /// relay service rate.
    pub fn expected_distinct_fraction(&self) -> F {
        let mut acc = CompensatedSum::new();
        for (idx, &p) in self.probs.iter().enumerate() {
            acc.add(p * F::from_count(idx as u64 + 1));
        }
        acc.value() / F::from_count(u64::from(self.n_destinations))
    }
}

/// Occupancy probabilities for k packets spread over `n_destinations`
/// equally likely destinations:
///
/// P(i distinct) = C(n_destinations, i) * C(k-1, k-i) / C(n_destinations + k - 1, k)
///
/// The index runs over i = 1..=min(k, n_destinations); larger i would pick
/// more destinations than exist and carries zero weight, so truncating is
/// exact. Numerator logs are carried incrementally with compensated
/// accumulators, one exp per entry.
pub fn occupancy_distribution<F: Real>(n_destinations: u32, k: u32) -> Result<OccupancyDistribution<F>> {
    if n_destinations == 0 {
        return Err(Error::Domain(
            "occupancy_distribution: n_destinations must be positive".into(),
        ));
    }
    if k == 0 {
        return Err(Error::Domain(
            "occupancy_distribution: k must be positive".into(),
        ));
    }
    let nd = u64::from(n_destinations);
    let k64 = u64::from(k);
    let len = k64.min(nd);

    let log_denom: F = log_binomial(nd + k64 - 1, k64)?;

    // log C(nd, i) and log C(k-1, k-i), both advanced by exact ratio steps.
    let mut log_choose_nd = CompensatedSum::new();
    log_choose_nd.add(F::from_count(nd).ln());
    let mut log_choose_k = CompensatedSum::new(); // C(k-1, k-1) = 1

    let mut probs = Vec::with_capacity(len as usize);
    for i in 1..=len {
        let log_p = log_choose_nd.value() + log_choose_k.value() - log_denom;
        probs.push(log_p.exp());
        if i < len {
            // C(nd, i+1) / C(nd, i) = (nd - i) / (i + 1)
            log_choose_nd.add((F::from_count(nd - i) / F::from_count(i + 1)).ln());
            // C(k-1, k-i-1) / C(k-1, k-i) = (k - i) / i
            log_choose_k.add((F::from_count(k64 - i) / F::from_count(i)).ln());
        }
    }

    Ok(OccupancyDistribution {
        n_destinations,
        k,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn big_binomial(n: u64, k: u64) -> BigUint {
        let m = k.min(n - k);
        let mut acc = BigUint::from(1u64);
        for j in 0..m {
            acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
        }
        acc
    }

    /// ln of an arbitrary-precision integer, accurate to a few ulps.
    fn ln_big(x: &BigUint) -> f64 {
        let bits = x.bits();
        if bits <= 63 {
            return (x.to_u64().unwrap() as f64).ln();
        }
        let shift = bits - 63;
        let top = (x >> shift).to_u64().unwrap() as f64;
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }

    /// Exact ln C(n,k) through the prime factorization of the factorials
    /// (Legendre's formula). Independent of any floating-point binomial
    /// path and usable far beyond big-integer practicality.
    fn ln_binomial_prime_oracle(n: u64, k: u64) -> f64 {
        let mut is_composite = vec![false; (n + 1) as usize];
        let mut acc = CompensatedSum::<f64>::new();
        let nu = |m: u64, p: u64| -> u64 {
            let mut total = 0;
            let mut q = p;
            while q <= m {
                total += m / q;
                match q.checked_mul(p) {
                    Some(next) => q = next,
                    None => break,
                }
            }
            total
        };
        for p in 2..=n {
            if is_composite[p as usize] {
                continue;
            }
            let mut m = p * p;
            while m <= n {
                is_composite[m as usize] = true;
                m += p;
            }
            let e = nu(n, p) as i64 - nu(k, p) as i64 - nu(n - k, p) as i64;
            if e != 0 {
                acc.add(e as f64 * (p as f64).ln());
            }
        }
        acc.value()
    }

    /// Brute-force stars-and-bars: enumerate every weak composition of k
    /// over nd bins and tally the number of occupied bins. Exact integer
    /// counting; the uniform measure over arrangements is literal.
    fn enumerate_occupancy(nd: u32, k: u32) -> Vec<(u64, u64)> {
        fn rec(bins_left: u32, packets_left: u32, occupied: u32, counts: &mut Vec<u64>, total: &mut u64) {
            if bins_left == 0 {
                if packets_left == 0 {
                    *total += 1;
                    counts[occupied as usize] += 1;
                }
                return;
            }
            for take in 0..=packets_left {
                rec(
                    bins_left - 1,
                    packets_left - take,
                    occupied + u32::from(take > 0),
                    counts,
                    total,
                );
            }
        }
        let mut counts = vec![0u64; (k + 1) as usize];
        let mut total = 0u64;
        rec(nd, k, 0, &mut counts, &mut total);
        (1..=k as usize)
            .map(|i| (counts[i], total))
            .collect()
    }

    #[test]
    fn log_binomial_hand_values() {
        assert_eq!(log_binomial::<f64>(5, 0).unwrap(), 0.0);
        assert_eq!(log_binomial::<f64>(5, 5).unwrap(), 0.0);
        let ln6 = log_binomial::<f64>(4, 2).unwrap();
        assert!((ln6 - 6.0f64.ln()).abs() < 1e-14, "got {ln6}");
    }

    #[test]
    fn log_binomial_rejects_k_above_n() {
        assert!(matches!(log_binomial::<f64>(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn log_binomial_symmetric_path_is_bit_exact() {
        for &(n, k) in &[(17u64, 5u64), (1000, 499), (123_456, 1000), (1_000_000, 3)] {
            let a: f64 = log_binomial(n, k).unwrap();
            let b: f64 = log_binomial(n, n - k).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "n={n} k={k}");
        }
    }

    #[test]
    fn log_binomial_matches_big_integer_oracle() {
        // (1000, 500) exercises the compensated direct sum near its widest.
        let exact = big_binomial(1000, 500);
        let expect = ln_big(&exact);
        let got: f64 = log_binomial(1000, 500).unwrap();
        assert!(
            ((got - expect) / expect).abs() <= 1e-12,
            "got {got}, oracle {expect}"
        );
    }

    #[test]
    fn log_binomial_million_scale_against_prime_oracle() {
        for &k in &[1u64, 17, 1000, 2047, 2048, 2049, 10_000, 499_999, 500_000] {
            let n = 1_000_000u64;
            let expect = ln_binomial_prime_oracle(n, k);
            let got: f64 = log_binomial(n, k).unwrap();
            assert!(
                ((got - expect) / expect).abs() <= 1e-12,
                "k={k}: got {got}, oracle {expect}"
            );
        }
    }

    #[test]
    fn prime_oracle_agrees_with_big_integers() {
        for &(n, k) in &[(50u64, 13u64), (500, 250), (1999, 3), (1234, 617)] {
            let a = ln_binomial_prime_oracle(n, k);
            let b = ln_big(&big_binomial(n, k));
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "n={n} k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn occupancy_single_packet_is_deterministic() {
        let d = occupancy_distribution::<f64>(70, 1).unwrap();
        assert_eq!(d.probs(), &[1.0]);
    }

    #[test]
    fn occupancy_two_packets_two_destinations() {
        // Three equally likely arrangements: (2,0), (1,1), (0,2).
        let d = occupancy_distribution::<f64>(2, 2).unwrap();
        assert_eq!(d.probs().len(), 2);
        assert!((d.prob(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn occupancy_rejects_zero_inputs() {
        assert!(occupancy_distribution::<f64>(0, 3).is_err());
        assert!(occupancy_distribution::<f64>(3, 0).is_err());
    }

    #[test]
    fn occupancy_matches_exhaustive_enumeration() {
        for nd in 1..=6u32 {
            for k in 1..=6u32 {
                let d = occupancy_distribution::<f64>(nd, k).unwrap();
                let oracle = enumerate_occupancy(nd, k);
                assert_eq!(d.probs().len(), (k.min(nd)) as usize, "nd={nd} k={k}");
                for (idx, &(count, total)) in oracle.iter().take(d.probs().len()).enumerate() {
                    let exact = count as f64 / total as f64;
                    assert!(
                        (d.probs()[idx] - exact).abs() <= 1e-13,
                        "nd={nd} k={k} i={}: {} vs exact {exact}",
                        idx + 1,
                        d.probs()[idx]
                    );
                }
                // Entries beyond min(k, nd) would have zero weight; the
                // oracle must agree they carry no mass.
                for &(count, _) in oracle.iter().skip(d.probs().len()) {
                    assert_eq!(count, 0);
                }
            }
        }
    }

    #[test]
    fn occupancy_truncation_at_four_packets_three_bins() {
        // C(6,4) = 15 arrangements over 3 destinations.
        let d = occupancy_distribution::<f64>(3, 4).unwrap();
        let total: f64 = d.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let oracle = enumerate_occupancy(3, 4);
        assert_eq!(oracle[0].1, 15);
    }

    proptest! {
        #[test]
        fn occupancy_normalizes(nd in 3u32..=500, k in 1u32..=200) {
            let d = occupancy_distribution::<f64>(nd, k).unwrap();
            let sum: f64 = d.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "nd={} k={} sum={}", nd, k, sum);
            prop_assert!(d.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn log_binomial_tracks_big_integer_oracle(n in 1u64..=20_000, frac in 0.0f64..=1.0) {
            let k = ((n as f64) * frac).round() as u64;
            let k = k.min(n);
            let got: f64 = log_binomial(n, k).unwrap();
            let expect = ln_big(&big_binomial(n, k));
            if expect == 0.0 {
                prop_assert!(got.abs() < 1e-12);
            } else {
                prop_assert!(((got - expect) / expect).abs() <= 1e-12,
                    "n={} k={} got={} expect={}", n, k, got, expect);
            }
        }
    }
}
