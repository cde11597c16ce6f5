//! Small numerical kernels shared by the analytic engines.

use std::f64::consts::PI;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `e^x - 1 - x`, accurate for small `x`.
pub fn exp_minus_linear(x: f64) -> f64 {
    if x.abs() < 1.0 {
        // x^2/2! + x^3/3! + ...
        let mut term = x * x / 2.0;
        let mut acc = CompensatedSum::new();
        let mut n = 2.0;
        while term.abs() > f64::EPSILON * 1e-3 * (x * x) {
            acc.add(term);
            n += 1.0;
            term *= x / n;
        }
        acc.value()
    } else {
        x.exp_m1() - x
    }
}

/// Dilogarithm `Li2(x)` for real `x <= 1`.
pub fn dilog(x: f64) -> f64 {
    const PI2_6: f64 = PI * PI / 6.0;
    if x == 1.0 {
        return PI2_6;
    }
    if x > 1.0 {
        return f64::NAN;
    }
    if x < -1.0 {
        // inversion: Li2(x) = -pi^2/6 - ln^2(-x)/2 - Li2(1/x)
        let l = (-x).ln();
        return -PI2_6 - 0.5 * l * l - dilog(1.0 / x);
    }
    if x < 0.0 {
        // Landen: Li2(x) = -Li2(x/(x-1)) - ln^2(1-x)/2, maps [-1,0) onto (0,1/2]
        let l = (-x).ln_1p();
        return -dilog_series(x / (x - 1.0)) - 0.5 * l * l;
    }
    if x <= 0.5 {
        return dilog_series(x);
    }
    // reflection: Li2(x) = pi^2/6 - ln(x) ln(1-x) - Li2(1-x)
    PI2_6 - x.ln() * (1.0 - x).ln() - dilog_series(1.0 - x)
}

fn dilog_series(x: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut power = x;
    let mut k = 1.0_f64;
    while power.abs() / (k * k) > 1e-18 * acc.value().abs().max(f64::MIN_POSITIVE) {
        acc.add(power / (k * k));
        power *= x;
        k += 1.0;
        if k > 400.0 {
            break;
        }
    }
    acc.value()
}
