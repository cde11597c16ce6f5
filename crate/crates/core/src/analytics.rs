//! Mean values of the M|G|∞ busy cycle.
//!
//! With `ρ = λα`, the busy cycle `Z` (idle period plus busy period) has
//! `E[Z] = e^ρ/λ` and the busy period `E[B] = (e^ρ − 1)/λ`. The long-run mean
//! age (equivalently excess) of the busy-cycle renewal process is
//!
//! ```text
//! β_c = β + 1/λ,     β = ∫₀^∞ ( e^{λ ∫ₜ^∞ [1 − G(v)] dv} − 1 ) dt
//! ```
//!
//! and `E[Z²] = 2 E[Z] β_c`. The integrand is nonnegative, nonincreasing and
//! vanishes past the support of `G`.
//!
//! Three engines compute `β`: closed forms for the constant and special laws,
//! series for the exponential and power laws, and adaptive quadrature for
//! anything else.

use serde::Serialize;

use crate::distributions::{Law, QueueParameters};
use crate::error::{domain, Error, Result};
use crate::numeric::{exp_minus_linear, CompensatedSum};
use crate::quadrature::{integrate_with_breakpoints, Quadrature, Tolerance};

pub const DEFAULT_SERIES_TOL: f64 = 1e-10;
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-9;

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Series,
    Quadrature,
    Simulation,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Series => "series",
            Method::Quadrature => "quadrature",
            Method::Simulation => "simulation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Closed form or series when the law has one, quadrature otherwise.
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub series: f64,
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { series: DEFAULT_SERIES_TOL, quadrature: DEFAULT_QUADRATURE_TOL }
    }
}

/// Busy-cycle mean values for one queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BusyCycleMetrics {
    pub e_z: f64,
    pub e_b: f64,
    pub beta: f64,
    pub beta_c: f64,
    pub z_second_moment: f64,
    pub method: Method,
    pub error_estimate: f64,
}

/// Value of a truncated series with a bound on the neglected part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series {
    pub value: f64,
    pub abs_error: f64,
    pub terms: usize,
}

/// `E[Z] = e^ρ/λ`.
pub fn mean_cycle(params: &QueueParameters) -> f64 {
    params.traffic_intensity().exp() / params.arrival_rate()
}

/// `E[B] = (e^ρ − 1)/λ`.
pub fn mean_busy_period(params: &QueueParameters) -> f64 {
    params.traffic_intensity().exp_m1() / params.arrival_rate()
}

/// `β` by adaptive quadrature of its defining integral, to relative `tol`.
pub fn beta_quadrature(params: &QueueParameters, tol: f64) -> Result<Quadrature> {
    if !(tol > 0.0) {
        return domain("quadrature tolerance must be positive");
    }
    let rho = params.traffic_intensity();
    if rho == 0.0 {
        return Ok(Quadrature { value: 0.0, abs_error: 0.0, panels: 0 });
    }
    let lambda = params.arrival_rate();
    let service = params.service();
    let integrand = |t: f64| (lambda * service.residual_tail(t)).exp_m1();

    let end = match service.support_end() {
        Some(end) => end,
        None => {
            let mut t = service.mean().max(1.0 / lambda);
            while lambda * service.residual_tail(t) >= 1e-16 {
                t *= 2.0;
                if t > 1e15 * service.mean() {
                    return Err(Error::Accuracy { estimate: f64::NAN, achieved: f64::INFINITY });
                }
            }
            t
        }
    };
    let mut points = vec![0.0];
    points.extend(service.breakpoints().into_iter().filter(|p| *p < end));
    // Sharp initial decay at large ρ; seed a few geometric panels near 0.
    let first = points.get(1).copied().unwrap_or(end);
    let mut seeds: Vec<f64> = (1..=12).map(|k| first / f64::powi(2.0, k)).collect();
    seeds.reverse();
    let mut all = vec![0.0];
    all.extend(seeds);
    all.extend(points.into_iter().skip(1));
    all.push(end);
    all.dedup();

    integrate_with_breakpoints(integrand, &all, Tolerance { rel: tol, abs: 0.0, max_panels: 20_000 })
}

/// `S(ρ) = Σ_{n≥1} ρⁿ/(n·n!)`, so that the exponential law has `β = α S(ρ)`.
pub fn exp_series(rho: f64, tol: f64) -> Result<Series> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return domain(format!("series needs rho >= 0, got {rho}"));
    }
    if !(tol > 0.0) {
        return domain("series tolerance must be positive");
    }
    if rho == 0.0 {
        return Ok(Series { value: 0.0, abs_error: 0.0, terms: 0 });
    }
    let mut power_over_factorial = 1.0; // ρⁿ/n!
    let mut sum = CompensatedSum::new();
    for n in 1..=20_000usize {
        let nf = n as f64;
        power_over_factorial *= rho / nf;
        let term = power_over_factorial / nf;
        sum.add(term);
        let ratio = rho / (nf + 1.0);
        if ratio < 1.0 {
            let tail = term * ratio / (1.0 - ratio);
            let s = sum.value();
            if tail <= tol * s {
                return Ok(Series { value: s, abs_error: tail + 4.0 * f64::EPSILON * s, terms: n });
            }
        }
        if !power_over_factorial.is_finite() {
            break;
        }
    }
    Err(Error::Accuracy { estimate: sum.value(), achieved: f64::INFINITY })
}

/// `β_c` for the power law `G(t) = t^c` on `[0, 1]` by series.
///
/// Expanding `e^{λ t^{c+1}/(c+1)}` inside `β + 1 = ∫₀¹ e^{ρ − λt + λt^{c+1}/(c+1)} dt`
/// and integrating each term against `e^{ρ−λt}` in closed form gives
///
/// ```text
/// β + 1 = e^{ρ−λ} Σ_j (λ/(c+1))^j / j! · Σ_i λ^i / ((m_j+1)(m_j+2)…(m_j+1+i)),   m_j = j(c+1)
/// ```
///
/// Every term is positive, so the sum is stable where the fully expanded
/// alternating triple sum ([`power_expansion_direct`]) is not.
pub fn power_double_series(lambda: f64, c: f64, tol: f64) -> Result<Series> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("power exponent must be positive, got {c}"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("arrival rate must be positive, got {lambda}"));
    }
    if !(tol > 0.0) {
        return domain("series tolerance must be positive");
    }
    let rho = lambda * c / (c + 1.0);
    let growth = lambda / (c + 1.0);

    let mut weight = 1.0; // (λ/(c+1))^j / j!
    let mut outer = CompensatedSum::new();
    let mut terms = 0usize;
    for j in 0..=50_000usize {
        if j > 0 {
            weight *= growth / j as f64;
        }
        let m = j as f64 * (c + 1.0);
        let inner = incomplete_gamma_kernel(lambda, m)?;
        terms += inner.terms;
        let contribution = weight * inner.value;
        outer.add(contribution);

        let s = outer.value();
        if !s.is_finite() {
            break;
        }
        let ratio = growth / (j as f64 + 1.0);
        if ratio < 1.0 {
            // the kernel is nonincreasing in m, so the weights bound the tail
            let tail = contribution * ratio / (1.0 - ratio);
            if tail <= tol * s {
                let scale = (rho - lambda).exp();
                let beta = scale * s - 1.0;
                let beta_c = beta + 1.0 / lambda;
                let abs_error = scale * (tail + 8.0 * f64::EPSILON * s);
                return Ok(Series { value: beta_c, abs_error, terms });
            }
        }
    }
    Err(Error::Accuracy { estimate: f64::NAN, achieved: f64::INFINITY })
}

/// `Σ_i λ^i / ((m+1)(m+2)…(m+1+i))`, which equals `e^λ ∫₀¹ t^m e^{−λt} dt`.
fn incomplete_gamma_kernel(lambda: f64, m: f64) -> Result<Series> {
    let mut term = 1.0 / (m + 1.0);
    let mut sum = CompensatedSum::new();
    sum.add(term);
    for i in 1..=100_000usize {
        let denom = m + 1.0 + i as f64;
        term *= lambda / denom;
        sum.add(term);
        let ratio = lambda / (denom + 1.0);
        if ratio < 1.0 {
            let tail = term * ratio / (1.0 - ratio);
            if tail <= 1e-17 * sum.value() {
                return Ok(Series { value: sum.value(), abs_error: tail, terms: i + 1 });
            }
        }
        if !term.is_finite() {
            break;
        }
    }
    Err(Error::Accuracy { estimate: sum.value(), achieved: f64::INFINITY })
}

/// `β_c` for the unit power law by the fully expanded triple sum
///
/// ```text
/// 1/λ + Σ_{n≥1} Σ_{k=0}^{n} ρ^{n−k}/(n−k)! · λ^k Σ_{j=0}^{k} (−1)^{k−j} / ((c+1)^j j! (k−j)! (k+jc+1))
/// ```
///
/// The inner sums alternate and cancel catastrophically as `ρ` grows, so
/// this is only offered for `ρ ≤ 2`.
pub fn power_expansion_direct(lambda: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && lambda > 0.0) {
        return domain("power expansion needs c > 0 and lambda > 0");
    }
    let rho = lambda * c / (c + 1.0);
    if rho > 2.0 {
        return Err(Error::Unsupported(format!("direct power expansion is unstable at rho = {rho} > 2")));
    }
    const N: usize = 80;
    let mut fact = [1.0f64; N + 1];
    for i in 1..=N {
        fact[i] = fact[i - 1] * i as f64;
    }
    // inner[k] = λ^k Σ_j (−1)^{k−j} / ((c+1)^j j! (k−j)! (k+jc+1))
    let inner: Vec<f64> = (0..=N)
        .map(|k| {
            let mut s = CompensatedSum::new();
            for j in 0..=k {
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                let denom = (c + 1.0).powi(j as i32) * fact[j] * fact[k - j] * (k as f64 + j as f64 * c + 1.0);
                s.add(sign / denom);
            }
            lambda.powi(k as i32) * s.value()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for n in 1..=N {
        let mut row = CompensatedSum::new();
        for k in 0..=n {
            row.add(rho.powi((n - k) as i32) / fact[n - k] * inner[k]);
        }
        total.add(row.value());
        if n > 10 && row.value().abs() < 1e-17 * total.value().abs() {
            break;
        }
    }
    Ok(1.0 / lambda + total.value())
}

/// Busy-cycle metrics using the requested engine.
pub fn beta_c(params: &QueueParameters, strategy: Strategy) -> Result<BusyCycleMetrics> {
    beta_c_with(params, strategy, Tolerances::default())
}

pub fn beta_c_with(params: &QueueParameters, strategy: Strategy, tol: Tolerances) -> Result<BusyCycleMetrics> {
    let rho = params.traffic_intensity();
    if rho == 0.0 {
        return Ok(assemble(params, 0.0, Method::ClosedForm, 0.0));
    }
    let closed = match strategy {
        Strategy::Quadrature => None,
        Strategy::Auto | Strategy::ClosedForm => closed_form_beta(params, tol.series)?,
    };
    match (closed, strategy) {
        (Some((beta, method, err)), _) => Ok(assemble(params, beta, method, err)),
        (None, Strategy::ClosedForm) => {
            Err(Error::Unsupported(format!("no closed form for the {} service law", params.service().name())))
        }
        (None, _) => {
            let q = beta_quadrature(params, tol.quadrature)?;
            Ok(assemble(params, q.value, Method::Quadrature, q.abs_error))
        }
    }
}

fn closed_form_beta(params: &QueueParameters, series_tol: f64) -> Result<Option<(f64, Method, f64)>> {
    let lambda = params.arrival_rate();
    let rho = params.traffic_intensity();
    let ulp = |x: f64| 4.0 * f64::EPSILON * x.abs();
    Ok(match params.service().law() {
        Law::Exponential { mean } => {
            let s = exp_series(rho, series_tol)?;
            Some((mean * s.value, Method::Series, mean * s.abs_error))
        }
        Law::Deterministic { .. } => {
            let beta = exp_minus_linear(rho) / lambda;
            Some((beta, Method::ClosedForm, ulp(beta)))
        }
        Law::SpecialA { .. } => {
            let beta = rho.exp_m1() / lambda;
            Some((beta, Method::ClosedForm, ulp(beta)))
        }
        Law::SpecialB { .. } => {
            // e^ρ + e^{−ρ} − 2 = 4 sinh²(ρ/2)
            let sh = (0.5 * rho).sinh();
            let beta = 4.0 * sh * sh / lambda;
            Some((beta, Method::ClosedForm, ulp(beta)))
        }
        Law::Power { c, scale } => {
            // time-unit covariance: β(λ, scale s) = s · β(λs, unit scale)
            let unit_rate = lambda * scale;
            let s = power_double_series(unit_rate, *c, series_tol)?;
            let beta = scale * (s.value - 1.0 / unit_rate);
            Some((beta, Method::Series, scale * s.abs_error))
        }
        Law::Custom(_) => None,
    })
}

fn assemble(params: &QueueParameters, beta: f64, method: Method, error_estimate: f64) -> BusyCycleMetrics {
    let lambda = params.arrival_rate();
    let e_z = mean_cycle(params);
    let beta_c = beta + 1.0 / lambda;
    BusyCycleMetrics {
        e_z,
        e_b: mean_busy_period(params),
        beta,
        beta_c,
        z_second_moment: 2.0 * e_z * beta_c,
        method,
        error_estimate,
    }
}

/// `E[Z²] = 2 E[Z] β_c`.
pub fn z_second_moment(params: &QueueParameters) -> Result<f64> {
    Ok(beta_c(params, Strategy::Auto)?.z_second_moment)
}

/// `E[Z²]` under the alternative reading of the Takács formula whose first
/// term carries the prefactor `2e^ρ/λ` instead of `2e^{2ρ}/λ`:
/// `2β/λ + 2e^ρ/λ²`. Kept so simulation can arbitrate between the two.
pub fn z_second_moment_alternative(params: &QueueParameters) -> Result<f64> {
    let m = beta_c(params, Strategy::Auto)?;
    let lambda = params.arrival_rate();
    Ok(2.0 * m.beta / lambda + 2.0 * m.e_z / lambda)
}
