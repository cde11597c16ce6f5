//! Globally adaptive 21-point Gauss–Kronrod quadrature on finite intervals.
//!
//! Panels are bisected in order of their error estimate until the summed
//! estimate falls below `max(abs_tol, rel_tol * |I|)`. Callers pass known
//! kinks (atoms, support edges) as breakpoints so that no panel straddles one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, Error, Result};
use crate::numeric::CompensatedSum;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
}

/// Stopping rule for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: 0.0, max_panels: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let resabs = abs_sum * half.abs();
    let resasc = asc * half.abs();

    // QUADPACK error heuristic
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let round_floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(round_floor);
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Quadrature> {
    integrate_with_breakpoints(f, &[a, b], tol)
}

/// Integrates `f` over `[points[0], points[last]]`, never letting a panel
/// straddle one of the interior `points`.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<Quadrature> {
    if points.len() < 2 {
        return domain("quadrature needs at least two interval endpoints");
    }
    if points.windows(2).any(|w| !(w[0] <= w[1])) || points.iter().any(|p| !p.is_finite()) {
        return domain("quadrature breakpoints must be finite and nondecreasing");
    }
    if !(tol.rel >= 0.0 && tol.abs >= 0.0) || (tol.rel == 0.0 && tol.abs == 0.0) {
        return domain("quadrature tolerance must be positive");
    }

    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod(&f, w[0], w[1]));
        }
    }
    if heap.is_empty() {
        return Ok(Quadrature { value: 0.0, abs_error: 0.0, panels: 0 });
    }

    loop {
        let (value, error) = totals(&heap);
        if !value.is_finite() {
            return Err(Error::Accuracy { estimate: value, achieved: f64::INFINITY });
        }
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Quadrature { value, abs_error: error, panels: heap.len() });
        }
        if heap.len() >= tol.max_panels {
            return Err(Error::Accuracy { estimate: value, achieved: error });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            return Err(Error::Accuracy { estimate: value, achieved: error });
        }
        heap.push(gauss_kronrod(&f, worst.a, mid));
        heap.push(gauss_kronrod(&f, mid, worst.b));
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    // Heap iteration order is arbitrary; sort so the sum is reproducible.
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    for p in panels {
        value.add(p.value);
        error += p.error;
    }
    (value.value(), error)
}
