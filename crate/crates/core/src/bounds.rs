//! Bounds on the busy-cycle age/excess mean `β_c`.
//!
//! Two families:
//!
//! * distribution-free bounds that depend only on `λ`, `α` and the squared
//!   coefficient of variation `γ²` of the service time,
//! * reliability-class bounds (exponential/NWUE/DFR/IMRL lower bounds,
//!   exponential/NBUE upper bounds, and the power-function family).
//!
//! None of these functions look at `β_c` itself, so comparing them against
//! the analytic engines is an independent check.

use std::fmt;

use serde::Serialize;

use crate::analytics::{mean_busy_period, mean_cycle};
use crate::distributions::{ClassTags, Law, QueueParameters};
use crate::error::{domain, Error, Result};
use crate::numeric::exp_minus_linear;

/// Bound family labels as they appear in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundLabel {
    Sathe,
    Universal,
    #[serde(rename = "M/NWUE")]
    MNwue,
    #[serde(rename = "M/NBUE")]
    MNbue,
    #[serde(rename = "DFR")]
    Dfr,
    #[serde(rename = "IMRL")]
    Imrl,
    Power(f64),
    Uniform01,
}

impl fmt::Display for BoundLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundLabel::Sathe => write!(f, "Sathe"),
            BoundLabel::Universal => write!(f, "Universal"),
            BoundLabel::MNwue => write!(f, "M/NWUE"),
            BoundLabel::MNbue => write!(f, "M/NBUE"),
            BoundLabel::Dfr => write!(f, "DFR"),
            BoundLabel::Imrl => write!(f, "IMRL"),
            BoundLabel::Power(c) => write!(f, "Power({c})"),
            BoundLabel::Uniform01 => write!(f, "Uniform01"),
        }
    }
}

/// Classes with a lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerClass {
    /// Exponential service, valid for every NWUE law.
    MNwue,
    Dfr,
    Imrl,
    Power(f64),
    Uniform01,
}

/// Classes with an upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperClass {
    /// Exponential service, valid for every NBUE law.
    MNbue,
    Power(f64),
    Uniform01,
}

impl LowerClass {
    pub fn label(self) -> BoundLabel {
        match self {
            LowerClass::MNwue => BoundLabel::MNwue,
            LowerClass::Dfr => BoundLabel::Dfr,
            LowerClass::Imrl => BoundLabel::Imrl,
            LowerClass::Power(c) => BoundLabel::Power(c),
            LowerClass::Uniform01 => BoundLabel::Uniform01,
        }
    }
}

impl UpperClass {
    pub fn label(self) -> BoundLabel {
        match self {
            UpperClass::MNbue => BoundLabel::MNbue,
            UpperClass::Power(c) => BoundLabel::Power(c),
            UpperClass::Uniform01 => BoundLabel::Uniform01,
        }
    }
}

/// Where `β_c` sits relative to `E[Z]` given only `ρ` and `γ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CycleComparison {
    /// `β_c ≤ E[Z]`.
    BelowEZ,
    /// `β_c ≥ E[Z]`.
    AboveEZ,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabeledBound {
    pub label: BoundLabel,
    pub value: f64,
}

/// All bounds that apply to one queue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub lower_bounds: Vec<LabeledBound>,
    pub upper_bounds: Vec<LabeledBound>,
    /// `[max lower, min upper]`.
    pub tightest: (f64, f64),
    pub gap_ratio: Option<f64>,
    /// False when some lower bound exceeds some upper bound.
    pub consistent: bool,
}

impl BoundsReport {
    /// Whether `value` lies inside every bound.
    pub fn contains(&self, value: f64) -> bool {
        let slack = 1e-12 * value.abs();
        self.lower_bounds.iter().all(|b| b.value <= value + slack)
            && self.upper_bounds.iter().all(|b| value <= b.value + slack)
    }

    /// Bounds that `value` violates, lower ones first.
    pub fn violations(&self, value: f64) -> Vec<(&'static str, LabeledBound)> {
        let slack = 1e-12 * value.abs();
        let lows = self.lower_bounds.iter().filter(|b| b.value > value + slack).map(|b| ("lower", *b));
        let ups = self.upper_bounds.iter().filter(|b| value > b.value + slack).map(|b| ("upper", *b));
        lows.chain(ups).collect()
    }
}

fn check_rate_mean(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite() && alpha > 0.0 && alpha.is_finite()) {
        return domain(format!("bounds need lambda > 0 and alpha > 0, got {lambda}, {alpha}"));
    }
    Ok(())
}

/// Distribution-free interval:
/// `E[Z] − α + ρ²γ²/(2λ) ≤ β_c ≤ E[Z] − α + (γ²/λ)(e^ρ − 1 − ρ)`.
pub fn sathe_interval(lambda: f64, alpha: f64, scv: f64) -> Result<(f64, f64)> {
    check_rate_mean(lambda, alpha)?;
    if !(scv >= 0.0) {
        return domain(format!("scv must be nonnegative, got {scv}"));
    }
    let rho = lambda * alpha;
    let base = rho.exp() / lambda - alpha;
    let lower = base + rho * rho * scv / (2.0 * lambda);
    let upper = base + scv / lambda * exp_minus_linear(rho);
    Ok((lower, upper))
}

/// Universal lower bound `E[Z] − α + ρ²γ²/(2λ)`; the constant law attains it.
pub fn universal_lower_bound(lambda: f64, alpha: f64, scv: f64) -> Result<f64> {
    Ok(sathe_interval(lambda, alpha, scv)?.0)
}

/// Sign of `β_c − E[Z]` from `ρ` and `γ²` alone.
pub fn classify_against_mean_cycle(rho: f64, scv: f64) -> Result<CycleComparison> {
    if !(rho > 0.0 && rho.is_finite()) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if !(scv >= 0.0) {
        return domain(format!("scv must be nonnegative, got {scv}"));
    }
    if scv <= rho / exp_minus_linear(rho) {
        Ok(CycleComparison::BelowEZ)
    } else if scv >= 2.0 / rho {
        Ok(CycleComparison::AboveEZ)
    } else {
        Ok(CycleComparison::Indeterminate)
    }
}

/// `2/ρ − ρ/(e^ρ − 1 − ρ)`: width of the indeterminate band; nonnegative,
/// tending to 2/3 as `ρ → 0`.
pub fn indeterminate_band_width(rho: f64) -> f64 {
    2.0 / rho - rho / exp_minus_linear(rho)
}

fn require_tag(params: &QueueParameters, tag: ClassTags, class: BoundLabel) -> Result<()> {
    if params.service().tags().contains(tag) {
        Ok(())
    } else {
        Err(Error::ClassViolation { class: class.to_string(), required: format!("{tag:?}") })
    }
}

fn require_power(params: &QueueParameters, c: f64, class: BoundLabel) -> Result<()> {
    match params.service().law() {
        Law::Power { c: have, scale } if *have == c && *scale == 1.0 => Ok(()),
        _ => Err(Error::ClassViolation { class: class.to_string(), required: format!("power law t^{c} on [0,1]") }),
    }
}

/// Lower bound for the given class.
pub fn class_lower_bound(class: LowerClass, params: &QueueParameters) -> Result<f64> {
    let lambda = params.arrival_rate();
    let alpha = params.service().mean();
    check_rate_mean(lambda, alpha)?;
    let rho = lambda * alpha;
    let ez = mean_cycle(params);
    match class {
        LowerClass::MNwue => {
            require_tag(params, ClassTags::NWUE, class.label())?;
            Ok(ez - alpha + alpha * rho / 2.0 * (1.0 + rho / 6.0))
        }
        LowerClass::Dfr => {
            require_tag(params, ClassTags::DFR, class.label())?;
            let scv = params.service().scv()?;
            // 1 − G(t) ≥ K e^{−t/α} with K = e^{(1−γ²)/2}; keep the first two
            // series terms in ρK. At γ² = 1 this is the exponential bound.
            let k = (0.5 * (1.0 - scv)).exp();
            let k2 = (1.0 - scv).exp();
            Ok(ez - alpha + alpha * rho / 2.0 * (2.0 * k - 1.0 + rho * (3.0 * k2 - 2.0) / 6.0))
        }
        LowerClass::Imrl => {
            require_tag(params, ClassTags::IMRL, class.label())?;
            let mu2 = params.service().moment2()?;
            let mu3 = params.service().moment3()?;
            // ∫ₜ^∞ [1 − G] ≥ α E e^{−2αt/μ₂}, E = e^{1 − 2αμ₃/(3μ₂²)}; same two-term
            // expansion. Exponential moments give E = 1 and the exponential bound.
            let e = (1.0 - 2.0 * alpha * mu3 / (3.0 * mu2 * mu2)).exp();
            let inner = 2.0 * mu2 * e - 2.0 * alpha * alpha + rho * (3.0 * mu2 * e * e - 4.0 * alpha * alpha) / 6.0;
            Ok(ez - alpha + lambda / 4.0 * inner)
        }
        LowerClass::Power(c) => {
            require_power(params, c, class.label())?;
            Ok(ez + (rho - 2.0 * c * (c + 2.0)) / (2.0 * (c + 1.0) * (c + 2.0)))
        }
        LowerClass::Uniform01 => {
            require_power(params, 1.0, class.label())?;
            Ok(ez + (lambda / 2.0 - 6.0) / 12.0)
        }
    }
}

/// Upper bound for the given class.
pub fn class_upper_bound(class: UpperClass, params: &QueueParameters) -> Result<f64> {
    let lambda = params.arrival_rate();
    let alpha = params.service().mean();
    check_rate_mean(lambda, alpha)?;
    let rho = lambda * alpha;
    let eb = mean_busy_period(params);
    match class {
        UpperClass::MNbue => {
            require_tag(params, ClassTags::NBUE, class.label())?;
            Ok(1.0 / lambda + f64::min(2.0 * (eb - alpha), rho / 2.0 * (eb + alpha)))
        }
        UpperClass::Power(c) => {
            require_power(params, c, class.label())?;
            Ok(1.0 / lambda + (c + 1.0) * (c + 1.0) / (c * (c + 2.0)) * eb - (c + 1.0) / (c + 2.0))
        }
        UpperClass::Uniform01 => {
            require_power(params, 1.0, class.label())?;
            Ok(1.0 / lambda + 4.0 / 3.0 * eb - 2.0 / 3.0)
        }
    }
}

/// `(upper − lower)/reference`.
pub fn gap_ratio(lower: f64, upper: f64, reference: f64) -> Result<f64> {
    if !(upper >= lower) {
        return domain(format!("upper bound {upper} is below lower bound {lower}"));
    }
    if !(reference > 0.0) {
        return domain(format!("reference value must be positive, got {reference}"));
    }
    Ok((upper - lower) / reference)
}

/// Collects every bound whose hypotheses the queue's service law satisfies.
pub fn bounds_report(params: &QueueParameters, reference: Option<f64>) -> Result<BoundsReport> {
    let lambda = params.arrival_rate();
    let service = params.service();
    let alpha = service.mean();
    check_rate_mean(lambda, alpha)?;

    let mut lower_bounds = Vec::new();
    let mut upper_bounds = Vec::new();
    if let Ok(scv) = service.scv() {
        let (lo, hi) = sathe_interval(lambda, alpha, scv)?;
        lower_bounds.push(LabeledBound { label: BoundLabel::Sathe, value: lo });
        lower_bounds.push(LabeledBound { label: BoundLabel::Universal, value: lo });
        upper_bounds.push(LabeledBound { label: BoundLabel::Sathe, value: hi });
    }

    let mut lower_classes = vec![LowerClass::MNwue, LowerClass::Dfr, LowerClass::Imrl];
    let mut upper_classes = vec![UpperClass::MNbue];
    if let Law::Power { c, scale } = service.law() {
        if *scale == 1.0 {
            lower_classes.push(LowerClass::Power(*c));
            upper_classes.push(UpperClass::Power(*c));
            if *c == 1.0 {
                lower_classes.push(LowerClass::Uniform01);
                upper_classes.push(UpperClass::Uniform01);
            }
        }
    }
    for class in lower_classes {
        match class_lower_bound(class, params) {
            Ok(value) => lower_bounds.push(LabeledBound { label: class.label(), value }),
            Err(Error::ClassViolation { .. }) | Err(Error::UnsupportedMoment(_)) => {}
            Err(e) => return Err(e),
        }
    }
    for class in upper_classes {
        match class_upper_bound(class, params) {
            Ok(value) => upper_bounds.push(LabeledBound { label: class.label(), value }),
            Err(Error::ClassViolation { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let lo = lower_bounds.iter().map(|b| b.value).fold(f64::NEG_INFINITY, f64::max);
    let hi = upper_bounds.iter().map(|b| b.value).fold(f64::INFINITY, f64::min);
    let consistent = lo <= hi + 1e-12 * hi.abs();
    let gap = match reference {
        Some(r) if consistent && lo.is_finite() && hi.is_finite() => Some(gap_ratio(lo, hi.max(lo), r)?),
        _ => None,
    };
    Ok(BoundsReport { lower_bounds, upper_bounds, tightest: (lo, hi), gap_ratio: gap, consistent })
}
