//! Service-time distributions for the M|G|∞ queue.
//!
//! Every catalog member carries closed forms for its CDF `G`, the integrated
//! tail `I(t) = ∫₀ᵗ [1 − G(v)] dv`, the residual tail `α − I(t)`, the quantile
//! function used for inverse-transform sampling, and its moments. Point
//! masses are kept as explicit atoms so quadrature can break panels there.
//!
//! User-supplied laws go through [`ServiceDistribution::custom`]; their tails
//! are integrated numerically and they carry no reliability-class tags unless
//! the caller asserts them.

use std::fmt;
use std::sync::Arc;

use bitflags::bitflags;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::dilog;
use crate::quadrature::{integrate_with_breakpoints, Tolerance};

bitflags! {
    /// Reliability classes known to hold for a service law.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct ClassTags: u8 {
        /// New better than used in expectation.
        const NBUE = 0b0001;
        /// New worse than used in expectation.
        const NWUE = 0b0010;
        /// Decreasing failure rate.
        const DFR = 0b0100;
        /// Increasing mean residual life.
        const IMRL = 0b1000;
    }
}

/// A point mass of the service law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

type CdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Caller-provided CDF with its analytic support information.
#[derive(Clone)]
pub struct CustomLaw {
    cdf: CdfFn,
    support_end: Option<f64>,
    atoms: Vec<Atom>,
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw")
            .field("support_end", &self.support_end)
            .field("atoms", &self.atoms)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Law {
    Exponential {
        mean: f64,
    },
    /// Unit mass at `mean`. A zero mean is only reachable through
    /// [`ServiceDistribution::zero`].
    Deterministic {
        mean: f64,
    },
    /// `G(t) = e^{−ρ} / (e^{−ρ} + (1 − e^{−ρ}) e^{−λt})`, atom `e^{−ρ}` at 0.
    SpecialA {
        lambda: f64,
        rho: f64,
    },
    /// `G(t) = 1 − 1 / (1 + e^{−ρ}(e^{λt/(1−e^{−ρ})} − 1))`.
    SpecialB {
        lambda: f64,
        rho: f64,
    },
    /// `G(t) = (t/scale)^c` on `[0, scale]`.
    Power {
        c: f64,
        scale: f64,
    },
    Custom(CustomLaw),
}

/// A service-time law with the moments and class tags the analytic modules need.
#[derive(Debug, Clone)]
pub struct ServiceDistribution {
    law: Law,
    mean: f64,
    moment2: Option<f64>,
    moment3: Option<f64>,
    tags: ClassTags,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {x}"))
    }
}

impl ServiceDistribution {
    pub fn exponential(mean: f64) -> Result<Self> {
        check_positive("exponential mean", mean)?;
        Ok(Self {
            law: Law::Exponential { mean },
            mean,
            moment2: Some(2.0 * mean * mean),
            moment3: Some(6.0 * mean * mean * mean),
            tags: ClassTags::all(),
        })
    }

    pub fn deterministic(mean: f64) -> Result<Self> {
        check_positive("deterministic service time", mean)?;
        Ok(Self {
            law: Law::Deterministic { mean },
            mean,
            moment2: Some(mean * mean),
            moment3: None,
            tags: ClassTags::NBUE,
        })
    }

    /// Service identically zero: the `ρ = 0` limit where every cycle is idle.
    pub fn zero() -> Self {
        Self {
            law: Law::Deterministic { mean: 0.0 },
            mean: 0.0,
            moment2: Some(0.0),
            moment3: None,
            tags: ClassTags::empty(),
        }
    }

    /// The first special law; its busy-cycle age mean equals `E[Z]`.
    pub fn special_a(lambda: f64, rho: f64) -> Result<Self> {
        check_positive("arrival rate", lambda)?;
        check_positive("traffic intensity", rho)?;
        let moment2 = -2.0 * dilog(-rho.exp_m1()) / (lambda * lambda);
        Ok(Self {
            law: Law::SpecialA { lambda, rho },
            mean: rho / lambda,
            moment2: Some(moment2),
            moment3: None,
            tags: ClassTags::empty(),
        })
    }

    /// The second special law; its busy-cycle age mean is `(e^ρ + e^{−ρ} − 1)/λ`.
    pub fn special_b(lambda: f64, rho: f64) -> Result<Self> {
        check_positive("arrival rate", lambda)?;
        check_positive("traffic intensity", rho)?;
        // same Fermi–Dirac integral as SpecialA, scaled by 1 − e^{−ρ}
        let moment2 = -2.0 * (-(-rho).exp_m1()) * dilog(-rho.exp_m1()) / (lambda * lambda);
        Ok(Self {
            law: Law::SpecialB { lambda, rho },
            mean: rho / lambda,
            moment2: Some(moment2),
            moment3: None,
            tags: ClassTags::NBUE,
        })
    }

    /// Power function law `G(t) = t^c` on `[0, 1]`.
    pub fn power(c: f64) -> Result<Self> {
        Self::power_scaled(c, 1.0)
    }

    /// Uniform on `[0, 1]`, i.e. the power law with `c = 1`.
    pub fn uniform01() -> Self {
        Self::power(1.0).expect("c = 1 is valid")
    }

    fn power_scaled(c: f64, scale: f64) -> Result<Self> {
        check_positive("power exponent c", c)?;
        check_positive("power scale", scale)?;
        // increasing hazard for c >= 1
        let tags = if c >= 1.0 { ClassTags::NBUE } else { ClassTags::empty() };
        Ok(Self {
            law: Law::Power { c, scale },
            mean: scale * c / (c + 1.0),
            moment2: Some(scale * scale * c / (c + 2.0)),
            moment3: Some(scale.powi(3) * c / (c + 3.0)),
            tags,
        })
    }

    /// A caller-supplied law. `support_end` is the right end of the support when
    /// bounded; `atoms` lists point masses. The stated mean is checked against
    /// the numerically integrated tail to relative 1e-8.
    pub fn custom<F>(
        cdf: F,
        mean: f64,
        moment2: Option<f64>,
        moment3: Option<f64>,
        support_end: Option<f64>,
        atoms: Vec<Atom>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_positive("mean", mean)?;
        if let Some(end) = support_end {
            check_positive("support end", end)?;
        }
        if let Some(m2) = moment2 {
            if !(m2.is_finite() && m2 >= mean * mean * (1.0 - 1e-12)) {
                return domain(format!("second moment {m2} is inconsistent with mean {mean}"));
            }
        }
        let dist = Self {
            law: Law::Custom(CustomLaw { cdf: Arc::new(cdf), support_end, atoms }),
            mean,
            moment2,
            moment3,
            tags: ClassTags::empty(),
        };
        let total = dist.numeric_tail_integral(0.0, dist.numeric_horizon())?;
        if (total - mean).abs() > 1e-8 * mean {
            return domain(format!("stated mean {mean} disagrees with integrated tail {total}"));
        }
        Ok(dist)
    }

    /// Adds caller-asserted reliability classes.
    pub fn with_asserted_tags(mut self, tags: ClassTags) -> Self {
        self.tags |= tags;
        self
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    /// Short identifier used in reports.
    pub fn name(&self) -> &'static str {
        match &self.law {
            Law::Exponential { .. } => "exponential",
            Law::Deterministic { .. } => "deterministic",
            Law::SpecialA { .. } => "special_a",
            Law::SpecialB { .. } => "special_b",
            Law::Power { c, scale } if *c == 1.0 && *scale == 1.0 => "uniform01",
            Law::Power { .. } => "power",
            Law::Custom(_) => "custom",
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn moment2(&self) -> Result<f64> {
        self.moment2.ok_or(Error::UnsupportedMoment("second moment"))
    }

    pub fn moment3(&self) -> Result<f64> {
        self.moment3.ok_or(Error::UnsupportedMoment("third moment"))
    }

    pub fn tags(&self) -> ClassTags {
        self.tags
    }

    /// Squared coefficient of variation `(μ₂ − α²)/α²`.
    pub fn scv(&self) -> Result<f64> {
        let m2 = self.moment2()?;
        if self.mean == 0.0 {
            return Ok(0.0);
        }
        let a2 = self.mean * self.mean;
        Ok(((m2 - a2) / a2).max(0.0))
    }

    /// Arrival rate the law was built for, for the λ-parametrized members.
    pub fn bound_rate(&self) -> Option<f64> {
        match self.law {
            Law::SpecialA { lambda, .. } | Law::SpecialB { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    /// Right end of the support, `None` when unbounded.
    pub fn support_end(&self) -> Option<f64> {
        match &self.law {
            Law::Exponential { .. } | Law::SpecialA { .. } | Law::SpecialB { .. } => None,
            Law::Deterministic { mean } => Some(*mean),
            Law::Power { scale, .. } => Some(*scale),
            Law::Custom(c) => c.support_end,
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        match &self.law {
            Law::Deterministic { mean } => vec![Atom { location: *mean, mass: 1.0 }],
            Law::SpecialA { rho, .. } => vec![Atom { location: 0.0, mass: (-rho).exp() }],
            Law::Custom(c) => c.atoms.clone(),
            _ => Vec::new(),
        }
    }

    /// Points where `1 − G` may have a kink or jump on `[0, ∞)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.atoms().iter().map(|a| a.location).collect();
        pts.extend(self.support_end());
        pts.retain(|p| *p > 0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `G(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.law {
            Law::Exponential { mean } => -(-t / mean).exp_m1(),
            Law::Deterministic { mean } => {
                if t >= *mean {
                    1.0
                } else {
                    0.0
                }
            }
            Law::SpecialA { lambda, rho } => {
                let p = (-rho).exp();
                p / (p + (1.0 - p) * (-lambda * t).exp())
            }
            Law::SpecialB { .. } => 1.0 - self.survival(t),
            Law::Power { c, scale } => {
                if t >= *scale {
                    1.0
                } else {
                    (t / scale).powf(*c)
                }
            }
            Law::Custom(c) => (c.cdf)(t).clamp(0.0, 1.0),
        }
    }

    /// `1 − G(t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match &self.law {
            Law::Exponential { mean } => (-t / mean).exp(),
            Law::SpecialA { lambda, rho } => {
                // 1 / (1 + e^{λt}/(e^ρ − 1))
                1.0 / (1.0 + (lambda * t).exp() / rho.exp_m1())
            }
            Law::SpecialB { lambda, rho } => {
                let p = (-rho).exp();
                let kappa = lambda / -(-rho).exp_m1();
                1.0 / (1.0 + p * (kappa * t).exp_m1())
            }
            _ => 1.0 - self.cdf(t),
        }
    }

    /// `I(t) = ∫₀ᵗ [1 − G(v)] dv`.
    pub fn integrated_tail(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("integrated tail needs t >= 0, got {t}"));
        }
        Ok(match &self.law {
            Law::Exponential { mean } => -mean * (-t / mean).exp_m1(),
            Law::Deterministic { mean } => t.min(*mean),
            Law::SpecialA { lambda, rho } => {
                let p = (-rho).exp();
                -(p + (1.0 - p) * (-lambda * t).exp()).ln() / lambda
            }
            Law::SpecialB { lambda, rho } => {
                let p = (-rho).exp();
                let kappa = lambda / -(-rho).exp_m1();
                if kappa * t < 500.0 {
                    (kappa * t - (p * (kappa * t).exp_m1()).ln_1p()) / lambda
                } else {
                    self.mean - self.residual_tail(t)
                }
            }
            Law::Power { c, scale } => {
                if t >= *scale {
                    self.mean
                } else {
                    let x = t / scale;
                    scale * (x - x.powf(c + 1.0) / (c + 1.0))
                }
            }
            Law::Custom(_) => self.numeric_tail_integral(0.0, t)?,
        })
    }

    /// `∫ₜ^∞ [1 − G(v)] dv = α − I(t)` for `t ≥ 0`, evaluated without cancellation
    /// where a closed form allows it.
    pub fn residual_tail(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.law {
            Law::Exponential { mean } => mean * (-t / mean).exp(),
            Law::Deterministic { mean } => (mean - t).max(0.0),
            Law::SpecialA { lambda, rho } => (rho.exp_m1() * (-lambda * t).exp()).ln_1p() / lambda,
            Law::SpecialB { lambda, rho } => {
                let kappa = lambda / -(-rho).exp_m1();
                (rho.exp_m1() * (-kappa * t).exp()).ln_1p() / lambda
            }
            Law::Power { c, scale } => {
                if t >= *scale {
                    0.0
                } else {
                    let x = t / scale;
                    scale * ((1.0 - x) - (1.0 - x.powf(c + 1.0)) / (c + 1.0))
                }
            }
            Law::Custom(cl) => match cl.support_end {
                Some(end) if t >= end => 0.0,
                Some(end) => self.numeric_tail_integral(t, end).unwrap_or(f64::NAN),
                None => {
                    let horizon = self.numeric_horizon().max(t);
                    self.numeric_tail_integral(t, horizon).unwrap_or(f64::NAN)
                }
            },
        }
    }

    /// Inverse CDF, `inf{t : G(t) ≥ u}` for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.law {
            Law::Exponential { mean } => -mean * (-u).ln_1p(),
            Law::Deterministic { mean } => *mean,
            Law::SpecialA { lambda, rho } => {
                let p = (-rho).exp();
                if u <= p {
                    0.0
                } else {
                    (u * rho.exp_m1() / (1.0 - u)).ln() / lambda
                }
            }
            Law::SpecialB { lambda, rho } => {
                let kappa = lambda / -(-rho).exp_m1();
                (u * rho.exp() / (1.0 - u)).ln_1p() / kappa
            }
            Law::Power { c, scale } => scale * u.powf(1.0 / c),
            Law::Custom(_) => self.numeric_quantile(u),
        }
    }

    /// One service duration by inverse transform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Deterministic { mean } => *mean,
            _ => self.quantile(rng.random::<f64>()),
        }
    }

    /// The same law with every service time multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        check_positive("scale factor", k)?;
        let mut out = match &self.law {
            Law::Exponential { mean } => Self::exponential(mean * k)?,
            Law::Deterministic { mean } if *mean == 0.0 => Self::zero(),
            Law::Deterministic { mean } => Self::deterministic(mean * k)?,
            Law::SpecialA { lambda, rho } => Self::special_a(lambda / k, *rho)?,
            Law::SpecialB { lambda, rho } => Self::special_b(lambda / k, *rho)?,
            Law::Power { c, scale } => Self::power_scaled(*c, scale * k)?,
            Law::Custom(cl) => {
                let inner = cl.cdf.clone();
                Self {
                    law: Law::Custom(CustomLaw {
                        cdf: Arc::new(move |t| inner(t / k)),
                        support_end: cl.support_end.map(|e| e * k),
                        atoms: cl.atoms.iter().map(|a| Atom { location: a.location * k, mass: a.mass }).collect(),
                    }),
                    mean: self.mean * k,
                    moment2: self.moment2.map(|m| m * k * k),
                    moment3: self.moment3.map(|m| m * k * k * k),
                    tags: ClassTags::empty(),
                }
            }
        };
        out.tags = self.tags;
        Ok(out)
    }

    fn numeric_horizon(&self) -> f64 {
        if let Some(end) = self.support_end() {
            return end;
        }
        let mut t = self.mean.max(1.0);
        while self.survival(t) > 1e-17 && t < 1e12 {
            t *= 2.0;
        }
        t
    }

    fn numeric_tail_integral(&self, from: f64, to: f64) -> Result<f64> {
        if to <= from {
            return Ok(0.0);
        }
        let mut pts = vec![from];
        pts.extend(self.breakpoints().into_iter().filter(|p| *p > from && *p < to));
        pts.push(to);
        // 1 − G(v) carries absolute rounding noise of order ε, so a purely
        // relative target is unreachable far in the tail
        let noise = 4.0 * f64::EPSILON * (to - from);
        let tol = Tolerance { rel: 1e-12, abs: noise.max(1e-15 * self.mean), max_panels: 4000 };
        Ok(integrate_with_breakpoints(|v| self.survival(v), &pts, tol)?.value)
    }

    fn numeric_quantile(&self, u: f64) -> f64 {
        let mut hi = self.support_end().unwrap_or_else(|| self.mean.max(1.0));
        while self.cdf(hi) < u && hi < 1e15 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        if self.cdf(0.0) >= u {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Arrival rate plus service law; `ρ = λα` is always derived.
#[derive(Debug, Clone)]
pub struct QueueParameters {
    arrival_rate: f64,
    service: ServiceDistribution,
}

impl QueueParameters {
    pub fn new(arrival_rate: f64, service: ServiceDistribution) -> Result<Self> {
        check_positive("arrival rate", arrival_rate)?;
        if let Some(bound) = service.bound_rate() {
            if (bound - arrival_rate).abs() > 1e-12 * arrival_rate {
                return Err(Error::RateMismatch { service: bound, queue: arrival_rate });
            }
        }
        Ok(Self { arrival_rate, service })
    }

    /// Queue whose service is identically zero (`ρ = 0`).
    pub fn idle_only(arrival_rate: f64) -> Result<Self> {
        Self::new(arrival_rate, ServiceDistribution::zero())
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }

    pub fn service(&self) -> &ServiceDistribution {
        &self.service
    }

    pub fn traffic_intensity(&self) -> f64 {
        self.arrival_rate * self.service.mean()
    }

    /// The same queue in time units `k` times longer: `λ/k`, services `× k`.
    pub fn rescaled(&self, k: f64) -> Result<Self> {
        Self::new(self.arrival_rate / k, self.service.scaled(k)?)
    }
}

/// Textual distribution specification used by the CLI and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Exponential { mean: f64 },
    Deterministic { mean: f64 },
    SpecialA { rho: f64 },
    SpecialB { rho: f64 },
    Power { c: f64 },
    Uniform01,
}

impl DistSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad distribution spec {text:?}: {e}")))
    }

    /// Builds the law; `special_a`/`special_b` take `λ` from the queue.
    pub fn build(&self, arrival_rate: f64) -> Result<ServiceDistribution> {
        match *self {
            DistSpec::Exponential { mean } => ServiceDistribution::exponential(mean),
            DistSpec::Deterministic { mean } => ServiceDistribution::deterministic(mean),
            DistSpec::SpecialA { rho } => ServiceDistribution::special_a(arrival_rate, rho),
            DistSpec::SpecialB { rho } => ServiceDistribution::special_b(arrival_rate, rho),
            DistSpec::Power { c } => ServiceDistribution::power(c),
            DistSpec::Uniform01 => Ok(ServiceDistribution::uniform01()),
        }
    }

    pub fn queue(&self, arrival_rate: f64) -> Result<QueueParameters> {
        QueueParameters::new(arrival_rate, self.build(arrival_rate)?)
    }
}
