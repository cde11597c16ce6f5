#![allow(dead_code)]

use busycycle::distributions::{QueueParameters, ServiceDistribution};
use busycycle::numeric::CompensatedSum;

pub const MEMBERS: [&str; 5] = ["exponential", "deterministic", "special_a", "special_b", "power"];

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Queue for a catalog member at traffic intensity `rho`. The power member
/// is the uniform-like law with c = 1 (mean 0.5), so λ = 2ρ; the others use
/// λ = 2 and mean ρ/2.
pub fn member_queue(member: &str, rho: f64) -> QueueParameters {
    let (lambda, service) = match member {
        "exponential" => (2.0, ServiceDistribution::exponential(rho / 2.0)),
        "deterministic" => (2.0, ServiceDistribution::deterministic(rho / 2.0)),
        "special_a" => (2.0, ServiceDistribution::special_a(2.0, rho)),
        "special_b" => (2.0, ServiceDistribution::special_b(2.0, rho)),
        "power" => (2.0 * rho, ServiceDistribution::power(1.0)),
        other => panic!("unknown member {other}"),
    };
    QueueParameters::new(lambda, service.unwrap()).unwrap()
}

/// Exponential integral by Ramanujan's rapidly converging series:
/// `Ei(x) = γ + ln x + e^{x/2} Σ_{n≥1} (−1)^{n−1} xⁿ/(n! 2^{n−1}) Σ_{k=0}^{⌊(n−1)/2⌋} 1/(2k+1)`.
pub fn ei_ramanujan(x: f64) -> f64 {
    let mut sum = CompensatedSum::new();
    let mut coeff = 1.0; // xⁿ/(n! 2^{n−1}) at n = 1 is x
    let mut inner = 0.0;
    for n in 1..2000u32 {
        coeff *= if n == 1 { x } else { x / (n as f64 * 2.0) };
        if (n - 1) % 2 == 0 {
            inner += 1.0 / n as f64;
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * coeff * inner;
        sum.add(term);
        if n > 2 && term.abs() < 1e-18 * sum.value().abs() {
            break;
        }
    }
    EULER_GAMMA + x.ln() + (x / 2.0).exp() * sum.value()
}
