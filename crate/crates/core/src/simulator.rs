//! Monte Carlo oracle for the busy-cycle age/excess mean.
//!
//! Each cycle is an exponential idle period followed by a busy period. Since
//! M|G|∞ customers never wait, the busy period is the union of the service
//! intervals `[a_i, a_i + S_i)` that chain together from the first arrival,
//! so it is generated by a running maximum of departure times rather than by
//! an event calendar.
//!
//! Within one cycle of length `Z` the age grows linearly from 0 to `Z`, so
//! `∫ age dt = Z²/2`; the time-average age over many cycles is the ratio
//! `Σ Zᵢ² / (2 Σ Zᵢ)`. The excess integrates the same triangle mirrored.
//!
//! Replication `r` draws from a ChaCha8 stream seeded with
//! [`replication_seed`]`(seed, r)`, where
//! `replication_seed(s, r) = splitmix64(s + 0x9E3779B97F4A7C15·(r + 1))`
//! (wrapping arithmetic). Replications may run in parallel; their summaries
//! are merged in replication order, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::QueueParameters;
use crate::error::{domain, Error, Result};

/// Hard cap on arrivals inside one busy period.
pub const MAX_EVENTS_PER_CYCLE: u64 = 1_000_000_000;

/// Smallest accepted number of cycles per replication.
pub const MIN_CYCLES: u64 = 1_000;

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.96;

/// One idle period and the busy period that follows it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub idle: f64,
    pub busy: f64,
}

impl Cycle {
    pub fn length(&self) -> f64 {
        self.idle + self.busy
    }
}

/// Result of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationEstimate {
    /// `e_z2_hat / (2 e_z_hat)`.
    pub beta_c_hat: f64,
    pub e_z_hat: f64,
    pub e_z2_hat: f64,
    /// Delta-method standard error of `beta_c_hat`.
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub e_z2_std_error: f64,
    pub idle_mean: f64,
    pub idle_std_error: f64,
    pub busy_mean: f64,
    pub busy_std_error: f64,
    /// Cycles per replication.
    pub n_cycles: u64,
    pub replications: u32,
    pub seed: u64,
    /// Per-replication point estimates, in replication order.
    pub replication_estimates: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r` derived from the run seed.
pub fn replication_seed(seed: u64, r: u32) -> u64 {
    splitmix64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(r as u64 + 1)))
}

fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    -(-rng.random::<f64>()).ln_1p() / rate
}

/// Simulates one busy cycle.
pub fn simulate_one_cycle<R: Rng + ?Sized>(params: &QueueParameters, rng: &mut R) -> Result<Cycle> {
    let lambda = params.arrival_rate();
    let service = params.service();
    let idle = exponential(lambda, rng);
    let mut end = service.sample(rng);
    let mut clock = 0.0;
    let mut events = 0u64;
    loop {
        clock += exponential(lambda, rng);
        if clock >= end {
            break;
        }
        end = end.max(clock + service.sample(rng));
        events += 1;
        if events > MAX_EVENTS_PER_CYCLE {
            return Err(Error::Runaway(MAX_EVENTS_PER_CYCLE));
        }
    }
    Ok(Cycle { idle, busy: end })
}

/// Running means and co-moments, merged with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default)]
struct Summary {
    n: f64,
    mean_z: f64,
    mean_z2: f64,
    m2_z: f64,
    m2_z2: f64,
    cross: f64,
    mean_idle: f64,
    m2_idle: f64,
    mean_busy: f64,
    m2_busy: f64,
}

impl Summary {
    fn push(&mut self, c: Cycle) {
        let z = c.length();
        let x = z * z;
        self.n += 1.0;
        let n = self.n;
        let dz = z - self.mean_z;
        let dx = x - self.mean_z2;
        self.mean_z += dz / n;
        self.mean_z2 += dx / n;
        self.m2_z += dz * (z - self.mean_z);
        self.m2_z2 += dx * (x - self.mean_z2);
        self.cross += dz * (x - self.mean_z2);
        let di = c.idle - self.mean_idle;
        self.mean_idle += di / n;
        self.m2_idle += di * (c.idle - self.mean_idle);
        let db = c.busy - self.mean_busy;
        self.mean_busy += db / n;
        self.m2_busy += db * (c.busy - self.mean_busy);
    }

    fn merge(&self, o: &Summary) -> Summary {
        if self.n == 0.0 {
            return *o;
        }
        let n = self.n + o.n;
        let w = self.n * o.n / n;
        let dz = o.mean_z - self.mean_z;
        let dx = o.mean_z2 - self.mean_z2;
        let di = o.mean_idle - self.mean_idle;
        let db = o.mean_busy - self.mean_busy;
        Summary {
            n,
            mean_z: self.mean_z + dz * o.n / n,
            mean_z2: self.mean_z2 + dx * o.n / n,
            m2_z: self.m2_z + o.m2_z + dz * dz * w,
            m2_z2: self.m2_z2 + o.m2_z2 + dx * dx * w,
            cross: self.cross + o.cross + dz * dx * w,
            mean_idle: self.mean_idle + di * o.n / n,
            m2_idle: self.m2_idle + o.m2_idle + di * di * w,
            mean_busy: self.mean_busy + db * o.n / n,
            m2_busy: self.m2_busy + o.m2_busy + db * db * w,
        }
    }

    fn ratio(&self) -> f64 {
        self.mean_z2 / (2.0 * self.mean_z)
    }

    fn ratio_std_error(&self) -> f64 {
        let dof = self.n - 1.0;
        let var_z = self.m2_z / dof;
        let var_x = self.m2_z2 / dof;
        let cov = self.cross / dof;
        let r = self.mean_z2 / self.mean_z;
        let var_d = (var_x - 2.0 * r * cov + r * r * var_z).max(0.0);
        var_d.sqrt() / (self.n.sqrt() * 2.0 * self.mean_z)
    }

    fn se(m2: f64, n: f64) -> f64 {
        (m2 / (n - 1.0) / n).sqrt()
    }
}

fn run_replication(params: &QueueParameters, n_cycles: u64, seed: u64) -> Result<Summary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Summary::default();
    for _ in 0..n_cycles {
        s.push(simulate_one_cycle(params, &mut rng)?);
    }
    Ok(s)
}

/// Estimates `β_c` as `Σ Zᵢ² / (2 Σ Zᵢ)` over `replications × n_cycles` cycles.
pub fn estimate_beta_c(
    params: &QueueParameters,
    n_cycles: u64,
    seed: u64,
    replications: u32,
) -> Result<SimulationEstimate> {
    if n_cycles < MIN_CYCLES {
        return domain(format!("need at least {MIN_CYCLES} cycles per replication, got {n_cycles}"));
    }
    if replications == 0 {
        return domain("need at least one replication");
    }
    let summaries: Vec<Summary> = (0..replications)
        .into_par_iter()
        .map(|r| run_replication(params, n_cycles, replication_seed(seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let total = summaries.iter().fold(Summary::default(), |acc, s| acc.merge(s));

    let beta_c_hat = total.mean_z2 / (2.0 * total.mean_z);
    let std_error = total.ratio_std_error();
    let half = Z95 * std_error;
    Ok(SimulationEstimate {
        beta_c_hat,
        e_z_hat: total.mean_z,
        e_z2_hat: total.mean_z2,
        std_error,
        ci95: (beta_c_hat - half, beta_c_hat + half),
        e_z2_std_error: Summary::se(total.m2_z2, total.n),
        idle_mean: total.mean_idle,
        idle_std_error: Summary::se(total.m2_idle, total.n),
        busy_mean: total.mean_busy,
        busy_std_error: Summary::se(total.m2_busy, total.n),
        n_cycles,
        replications,
        seed,
        replication_estimates: summaries.iter().map(Summary::ratio).collect(),
    })
}

/// Time-average age over a sequence of complete cycles.
pub fn time_average_age(cycles: &[f64]) -> Result<f64> {
    average_over_cycles(cycles, |z| z * z / 2.0)
}

/// Time-average excess (time until the next renewal) over complete cycles.
pub fn time_average_excess(cycles: &[f64]) -> Result<f64> {
    // ∫₀^Z (Z − t) dt
    average_over_cycles(cycles, |z| z * z - z * z / 2.0)
}

fn average_over_cycles(cycles: &[f64], per_cycle: impl Fn(f64) -> f64) -> Result<f64> {
    if cycles.is_empty() {
        return domain("time average needs at least one cycle");
    }
    let area: f64 = cycles.iter().map(|&z| per_cycle(z)).sum();
    let length: f64 = cycles.iter().sum();
    Ok(area / length)
}

/// Expected number of customers served per busy cycle, `e^ρ`.
pub fn expected_arrivals_per_cycle(params: &QueueParameters) -> f64 {
    params.traffic_intensity().exp()
}

/// Loads at or above this traffic intensity are slow to simulate.
pub const HIGH_LOAD_RHO: f64 = 5.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ServiceDistribution;

    #[test]
    fn single_customer_busy_period() {
        let p = QueueParameters::new(0.01, ServiceDistribution::deterministic(0.5).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut singles = 0;
        for _ in 0..1000 {
            let c = simulate_one_cycle(&p, &mut rng).unwrap();
            // 0.5 is attained only when nobody else arrives during service
            if c.busy == 0.5 {
                singles += 1;
            } else {
                assert!(c.busy > 0.5);
            }
        }
        assert!(singles > 980);
    }

    #[test]
    fn zero_service_gives_idle_only_cycles() {
        let p = QueueParameters::idle_only(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let c = simulate_one_cycle(&p, &mut rng).unwrap();
            assert_eq!(c.busy, 0.0);
            assert_eq!(c.length(), c.idle);
        }
    }

    #[test]
    fn same_seed_same_cycle() {
        let p = QueueParameters::new(1.0, ServiceDistribution::exponential(1.0).unwrap()).unwrap();
        let a = simulate_one_cycle(&p, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = simulate_one_cycle(&p, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a.idle.to_bits(), b.idle.to_bits());
        assert_eq!(a.busy.to_bits(), b.busy.to_bits());
    }

    #[test]
    fn time_average_examples() {
        assert_eq!(time_average_age(&[2.0]).unwrap(), 1.0);
        assert_eq!(time_average_age(&[1.0; 17]).unwrap(), 0.5);
        assert!(time_average_age(&[]).is_err());
        let zs = [0.3, 4.0, 1.25, 0.01];
        assert_eq!(time_average_age(&zs).unwrap(), time_average_excess(&zs).unwrap());
    }

    #[test]
    fn rejects_small_runs() {
        let p = QueueParameters::idle_only(1.0).unwrap();
        assert!(estimate_beta_c(&p, 999, 1, 1).is_err());
        assert!(estimate_beta_c(&p, 1000, 1, 0).is_err());
    }

    #[test]
    fn merge_matches_single_pass() {
        let p = QueueParameters::new(1.0, ServiceDistribution::exponential(0.8).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cycles: Vec<Cycle> = (0..5000).map(|_| simulate_one_cycle(&p, &mut rng).unwrap()).collect();
        let mut whole = Summary::default();
        cycles.iter().for_each(|c| whole.push(*c));
        let (mut a, mut b) = (Summary::default(), Summary::default());
        cycles[..1234].iter().for_each(|c| a.push(*c));
        cycles[1234..].iter().for_each(|c| b.push(*c));
        let merged = a.merge(&b);
        assert!((merged.ratio() - whole.ratio()).abs() < 1e-12 * whole.ratio());
        assert!((merged.ratio_std_error() - whole.ratio_std_error()).abs() < 1e-9 * whole.ratio_std_error());
        let zs: Vec<f64> = cycles.iter().map(Cycle::length).collect();
        assert!((time_average_age(&zs).unwrap() - whole.ratio()).abs() < 1e-12 * whole.ratio());
    }

    #[test]
    fn replication_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| replication_seed(17, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
