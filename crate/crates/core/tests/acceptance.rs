//! Acceptance suite. Prints one line per sub-check and one verdict line per
//! criterion, and exits nonzero if any criterion fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::process::Command;
use std::time::Instant;

use busycycle::analytics::{beta_c, exp_series, Strategy};
use busycycle::bounds::{
    bounds_report, class_lower_bound, class_upper_bound, classify_against_mean_cycle, gap_ratio, sathe_interval,
    CycleComparison, LowerClass, UpperClass,
};
use busycycle::distributions::{QueueParameters, ServiceDistribution};
use busycycle::numeric::exp_minus_linear;
use busycycle::simulator::estimate_beta_c;
use busycycle::tables::computed_beta_c;
use common::{member_queue, rel, MEMBERS};

const BIN: &str = env!("CARGO_BIN_EXE_busycycle");

#[derive(Default)]
struct Criterion {
    passed: usize,
    failed: Vec<String>,
}

struct Suite {
    current: Criterion,
    verdicts: Vec<(u8, String, bool, String)>,
}

impl Suite {
    fn new() -> Self {
        Suite { current: Criterion::default(), verdicts: Vec::new() }
    }

    fn check(&mut self, ok: bool, label: impl Into<String>) {
        let label = label.into();
        println!("    [{}] {label}", if ok { "pass" } else { "FAIL" });
        if ok {
            self.current.passed += 1;
        } else {
            self.current.failed.push(label);
        }
    }

    fn info(&self, label: impl AsRef<str>) {
        println!("    [info] {}", label.as_ref());
    }

    fn finish(&mut self, number: u8, title: &str) {
        let c = std::mem::take(&mut self.current);
        let ok = c.failed.is_empty();
        let summary = format!("{}/{} sub-checks passed", c.passed, c.passed + c.failed.len());
        println!("criterion {number} {}: {title} ({summary})\n", if ok { "PASS" } else { "FAIL" });
        self.verdicts.push((number, title.to_string(), ok, summary));
    }
}

fn fmt_rel(computed: f64, target: f64, tol: f64) -> String {
    format!("computed {computed:.10e} vs {target:.8e}, rel {:.2e} (tol {tol:.0e})", rel(computed, target))
}

fn golden_cells(s: &mut Suite) {
    let start = Instant::now();
    let t1 = [
        ("deterministic", [1.1487213, 1.7182818, 143.41316, 22016.466, 5.1847055e21]),
        ("special_a", [1.6487213, 2.7182818, 148.41316, 22026.466, 5.1847055e21]),
        ("special_b", [1.2552519, 2.0861613, 147.41990, 22025.466, 5.1847055e21]),
    ];
    let alphas = [0.5, 1.0, 5.0, 10.0, 50.0];
    for (row, values) in t1 {
        for (alpha, want) in alphas.into_iter().zip(values) {
            let got = computed_beta_c(row, 1.0, alpha).unwrap();
            s.check(rel(got, want) <= 1e-6, format!("table 1 {row} alpha={alpha}: {}", fmt_rel(got, want, 1e-6)));
        }
    }
    for (alpha, want) in [(0.5, 1.2850757), (1.0, 2.3178568)] {
        let got = computed_beta_c("exponential", 1.0, alpha).unwrap();
        s.check(rel(got, want) <= 1e-6, format!("table 1 exponential alpha={alpha}: {}", fmt_rel(got, want, 1e-6)));
    }

    let lambdas = [2.0, 10.0, 20.0, 100.0];
    let t2 = [
        ("deterministic", [0.85914091, 14.341316, 1100.8233, 5.1847055e19]),
        ("special_a", [1.3591409, 14.841316, 1101.3233, 5.1847055e19]),
        ("special_b", [1.0430806, 14.741990, 1101.2733, 5.1847055e19]),
    ];
    for (row, values) in t2 {
        for (lambda, want) in lambdas.into_iter().zip(values) {
            let got = computed_beta_c(row, lambda, 0.5).unwrap();
            s.check(rel(got, want) <= 1e-6, format!("table 2 {row} lambda={lambda}: {}", fmt_rel(got, want, 1e-6)));
        }
    }
    for (lambda, want) in [(2.0, 1.1589511), (10.0, 19.099311), (20.0, 1244.7304)] {
        let got = computed_beta_c("exponential", lambda, 0.5).unwrap();
        s.check(rel(got, want) <= 1e-6, format!("table 2 exponential lambda={lambda}: {}", fmt_rel(got, want, 1e-6)));
    }
    for (lambda, want) in [(2.0, 1.9626517), (10.0, 17.272158)] {
        let got = computed_beta_c("power", lambda, 0.5).unwrap();
        s.check(rel(got, want) <= 1e-6, format!("table 2 power lambda={lambda}: {}", fmt_rel(got, want, 1e-6)));
    }

    let series = exp_series(50.0, 1e-15).unwrap();
    let got = 1.0 + 50.0 * series.value;
    s.check(
        rel(got, 5.2920661e21) <= 1e-7,
        format!("table 1 exponential alpha=50 (series): {}", fmt_rel(got, 5.2920661e21, 1e-7)),
    );

    let elapsed = start.elapsed().as_secs_f64();
    s.check(elapsed < 1.0, format!("runtime {elapsed:.3} s < 1 s"));
    s.info("power cells: independent quadrature gives 0.96265175 and 16.272158, exactly 1 below the printed values");
    s.info("exponential alpha=1 is tied to table 2 lambda=2 by scale covariance: 2 x 1.1589511 = 2.3179022");
}

fn table_csv(which: &str) -> String {
    let out = Command::new(BIN).args(["table", "--which", which, "--format", "csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "table {which} exited with {:?}", out.status);
    String::from_utf8(out.stdout).unwrap()
}

fn cli_status(csv: &str, distribution: &str, lambda: &str, alpha: &str, quantity: &str) -> String {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c[0] == distribution && c[1] == lambda && c[2] == alpha && c[4] == quantity)
        .map(|c| c[8].to_string())
        .unwrap_or_else(|| "missing".to_string())
}

fn errata_detection(s: &mut Suite) {
    let t1 = table_csv("1");
    let t2 = table_csv("2");
    let cases = [
        (
            "table 1 exponential alpha=5",
            computed_beta_c("exponential", 1.0, 5.0).unwrap(),
            190.99311,
            &t1,
            "exponential",
            "1.0000000",
            "5.0000000",
        ),
        (
            "table 1 exponential alpha=10",
            computed_beta_c("exponential", 1.0, 10.0).unwrap(),
            24894.5,
            &t1,
            "exponential",
            "1.0000000",
            "10.000000",
        ),
        (
            "table 2 exponential lambda=100",
            computed_beta_c("exponential", 100.0, 0.5).unwrap(),
            5.2920661e19,
            &t2,
            "exponential",
            "100.00000",
            "0.50000000",
        ),
        (
            "table 2 power lambda=20",
            computed_beta_c("power", 20.0, 0.5).unwrap(),
            1266.0,
            &t2,
            "power",
            "20.000000",
            "0.50000000",
        ),
    ];
    for (label, got, replacement, csv, dist, lambda, alpha) in cases {
        s.check(rel(got, replacement) <= 1e-3, format!("{label} replacement: {}", fmt_rel(got, replacement, 1e-3)));
        let status = cli_status(csv, dist, lambda, alpha, "beta_c");
        s.check(status == "ERRATUM", format!("{label} marked {status} by the CLI"));
    }
    s.info("table 2 power lambda=20: series 1167.2805, quadrature 1167.2805; no method yields 1266.0");
}

fn table3_ratios(s: &mut Suite) {
    let ratio = |row: &str, lambda: f64, reference: f64| {
        let params = if row == "exponential" {
            QueueParameters::new(lambda, ServiceDistribution::exponential(0.5).unwrap()).unwrap()
        } else {
            QueueParameters::new(lambda, ServiceDistribution::power(1.0).unwrap()).unwrap()
        };
        let (lo, hi) = if row == "exponential" {
            (
                class_lower_bound(LowerClass::MNwue, &params).unwrap(),
                class_upper_bound(UpperClass::MNbue, &params).unwrap(),
            )
        } else {
            (
                class_lower_bound(LowerClass::Power(1.0), &params).unwrap(),
                class_upper_bound(UpperClass::Power(1.0), &params).unwrap(),
            )
        };
        gap_ratio(lo, hi, reference).unwrap()
    };
    for (lambda, want) in [(2.0, 0.024818024), (10.0, 0.62565866), (20.0, 0.87899084)] {
        let got = ratio("exponential", lambda, computed_beta_c("exponential", lambda, 0.5).unwrap());
        s.check(rel(got, want) <= 1e-3, format!("exponential lambda={lambda}: {}", fmt_rel(got, want, 1e-3)));
    }
    // printed table 2 power values serve as the reference, as for exponential lambda=100
    for (lambda, printed_ref, want) in [(2.0, 1.9626517, 0.018536302), (10.0, 17.272158, 0.25071787)] {
        let got = ratio("power", lambda, printed_ref);
        s.check(
            rel(got, want) <= 1e-3,
            format!("power lambda={lambda} (printed reference): {}", fmt_rel(got, want, 1e-3)),
        );
        let computed = ratio("power", lambda, computed_beta_c("power", lambda, 0.5).unwrap());
        s.info(format!("power lambda={lambda} with computed reference: {computed:.8}"));
    }
    let got = ratio("power", 100.0, computed_beta_c("power", 100.0, 0.5).unwrap());
    s.check(rel(got, 0.32992972) <= 1e-3, format!("power lambda=100: {}", fmt_rel(got, 0.32992972, 1e-3)));

    let printed = ratio("exponential", 100.0, 5.9392749e19);
    s.check(
        rel(printed, 0.87295261) <= 1e-3,
        format!("exponential lambda=100 (printed reference): {}", fmt_rel(printed, 0.87295261, 1e-3)),
    );
    let computed = ratio("exponential", 100.0, computed_beta_c("exponential", 100.0, 0.5).unwrap());
    s.check(
        rel(computed, 0.9798) <= 1e-3,
        format!("exponential lambda=100 (computed reference): {}", fmt_rel(computed, 0.9798, 1e-3)),
    );
}

const GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn closed_vs_quadrature(s: &mut Suite) {
    let start = Instant::now();
    for member in MEMBERS {
        for rho in GRID {
            let q = member_queue(member, rho);
            let closed = beta_c(&q, Strategy::ClosedForm).unwrap().beta_c;
            let quad = beta_c(&q, Strategy::Quadrature).unwrap().beta_c;
            s.check(rel(closed, quad) <= 1e-8, format!("{member} rho={rho}: {}", fmt_rel(quad, closed, 1e-8)));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    s.check(elapsed < 10.0, format!("runtime {elapsed:.3} s < 10 s"));
}

fn simulation_oracle(s: &mut Suite) {
    let start = Instant::now();
    for (i, member) in MEMBERS.iter().enumerate() {
        for (j, rho) in [0.25, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let q = member_queue(member, rho);
            let exact = beta_c(&q, Strategy::Auto).unwrap().beta_c;
            let est = estimate_beta_c(&q, 1_000_000, 500 + (10 * i + j) as u64, 1).unwrap();
            let tol = f64::max(3.0 * est.std_error, 0.005 * exact);
            let diff = (est.beta_c_hat - exact).abs();
            s.check(
                diff <= tol,
                format!(
                    "{member} rho={rho}: simulated {:.6} ± {:.6}, analytic {exact:.6}, |diff| {diff:.2e} <= {tol:.2e}",
                    est.beta_c_hat, est.std_error
                ),
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    s.check(elapsed < 120.0, format!("runtime {elapsed:.1} s < 120 s"));
}

fn sandwich(s: &mut Suite) {
    let mut checked = 0;
    for member in MEMBERS {
        let mut grid = GRID.to_vec();
        if matches!(member, "exponential" | "deterministic" | "power") {
            grid.push(10.0);
        }
        for rho in grid {
            let q = member_queue(member, rho);
            let value = beta_c(&q, Strategy::Auto).unwrap().beta_c;
            let report = bounds_report(&q, Some(value)).unwrap();
            checked += report.lower_bounds.len() + report.upper_bounds.len();
            let v = report.violations(value);
            s.check(
                v.is_empty(),
                format!(
                    "{member} rho={rho}: {:.8e} <= {value:.8e} <= {:.8e} ({} bounds, {} violations)",
                    report.tightest.0,
                    report.tightest.1,
                    report.lower_bounds.len() + report.upper_bounds.len(),
                    v.len()
                ),
            );
        }
    }
    s.info(format!("{checked} bound evaluations"));
}

fn properties(s: &mut Suite) {
    let mut worst = 0.0f64;
    for member in MEMBERS {
        for rho in [0.1, 0.5, 1.0, 3.0, 8.0] {
            for k in [0.01, 0.3, 7.0, 250.0] {
                let q = member_queue(member, rho);
                let a = beta_c(&q, Strategy::Auto).unwrap().beta_c;
                let b = beta_c(&q.rescaled(k).unwrap(), Strategy::Auto).unwrap().beta_c;
                worst = worst.max(rel(b, k * a));
            }
        }
    }
    s.check(worst <= 1e-10, format!("scale covariance: worst rel {worst:.2e} (tol 1e-10)"));

    let mut ok = true;
    for (lambda, alpha) in [(1.0, 0.5), (2.0, 3.0), (0.3, 0.1), (20.0, 0.5)] {
        let (lo, hi) = sathe_interval(lambda, alpha, 0.0).unwrap();
        let q = QueueParameters::new(lambda, ServiceDistribution::deterministic(alpha).unwrap()).unwrap();
        let v = beta_c(&q, Strategy::Auto).unwrap().beta_c;
        ok &= lo == hi && rel(v, lo) <= 1e-12;
    }
    s.check(ok, "constant-service collapse: interval is a point equal to the constant-service value");

    let mut worst_mean = 0.0f64;
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    for rho in [0.1, 0.5, 1.0, 5.0, 10.0, 50.0] {
        for lambda in [0.5, 1.0, 4.0] {
            let a = QueueParameters::new(lambda, ServiceDistribution::special_a(lambda, rho).unwrap()).unwrap();
            worst_mean = worst_mean.max(rel(a.service().mean(), rho / lambda));
            let m = beta_c(&a, Strategy::Auto).unwrap();
            worst_a = worst_a.max(rel(m.beta_c, m.e_z));
            let b = QueueParameters::new(lambda, ServiceDistribution::special_b(lambda, rho).unwrap()).unwrap();
            let want = (rho.exp() + (-rho).exp() - 1.0) / lambda;
            worst_b = worst_b.max(rel(beta_c(&b, Strategy::Auto).unwrap().beta_c, want));
        }
    }
    s.check(worst_mean <= 1e-13, format!("special_a mean = rho/lambda: worst rel {worst_mean:.2e}"));
    s.check(worst_a <= 1e-13, format!("special_a beta_c = E[Z]: worst rel {worst_a:.2e}"));
    s.check(worst_b <= 1e-13, format!("special_b beta_c = (e^rho + e^-rho - 1)/lambda: worst rel {worst_b:.2e}"));

    let mut worst_red = 0.0f64;
    for rho in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let q = member_queue("exponential", rho);
        let base = class_lower_bound(LowerClass::MNwue, &q).unwrap();
        for class in [LowerClass::Dfr, LowerClass::Imrl] {
            worst_red = worst_red.max(rel(class_lower_bound(class, &q).unwrap(), base));
        }
    }
    s.check(
        worst_red <= 1e-12,
        format!("DFR and IMRL bounds reduce to M/NWUE for exponential service: worst rel {worst_red:.2e} (tol 1e-12)"),
    );

    let mut contradictions = 0;
    let mut decided = 0;
    for member in MEMBERS {
        for rho in [0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let q = member_queue(member, rho);
            let m = beta_c(&q, Strategy::Auto).unwrap();
            match classify_against_mean_cycle(rho, q.service().scv().unwrap()).unwrap() {
                CycleComparison::BelowEZ => {
                    decided += 1;
                    contradictions += usize::from(m.beta_c > m.e_z * (1.0 + 1e-12));
                }
                CycleComparison::AboveEZ => {
                    decided += 1;
                    contradictions += usize::from(m.beta_c < m.e_z * (1.0 - 1e-12));
                }
                CycleComparison::Indeterminate => {}
            }
        }
    }
    s.check(
        contradictions == 0,
        format!("comparison with E[Z]: {decided} decided verdicts, {contradictions} contradictions"),
    );

    let mut holds = true;
    let mut rho = 1e-3;
    while rho <= 50.0 {
        holds &= 2.0 / rho >= rho / exp_minus_linear(rho);
        rho *= 1.01;
    }
    s.check(holds, "2/rho >= rho/(e^rho - 1 - rho) on (0, 50]");
    let tiny = 1e-6;
    let diff = 2.0 / tiny - tiny / exp_minus_linear(tiny);
    s.check((diff - 2.0 / 3.0).abs() <= 1e-4, format!("difference at rho=1e-6 is {diff:.8} (limit 2/3, tol 1e-4)"));
}

fn determinism(s: &mut Suite) {
    let args = [
        "simulate",
        "--lambda",
        "2",
        "--dist",
        r#"{"type":"exponential","mean":0.5}"#,
        "--cycles",
        "200000",
        "--seed",
        "77",
        "--reps",
        "4",
    ];
    let a = Command::new(BIN).args(args).output().unwrap();
    let b = Command::new(BIN).args(args).output().unwrap();
    s.check(a.status.success() && b.status.success(), "both runs exit 0");
    s.check(!a.stdout.is_empty() && a.stdout == b.stdout, format!("outputs byte-identical ({} bytes)", a.stdout.len()));
}

fn second_moment_arbitration(s: &mut Suite) {
    let q = QueueParameters::new(2.0, ServiceDistribution::exponential(0.5).unwrap()).unwrap();
    let m = beta_c(&q, Strategy::Auto).unwrap();
    let normative = 2.0 * m.e_z * m.beta_c;
    let alternative = busycycle::analytics::z_second_moment_alternative(&q).unwrap();
    let est = estimate_beta_c(&q, 2_500_000, 20240, 4).unwrap();
    let n = est.n_cycles * est.replications as u64;
    let se = est.e_z2_std_error;
    let d_norm = (est.e_z2_hat - normative).abs() / se;
    let d_alt = (est.e_z2_hat - alternative).abs() / se;
    s.check(n >= 10_000_000, format!("{n} cycles simulated"));
    s.check(
        d_norm <= 3.0,
        format!("simulated E[Z^2] {:.6} ± {se:.6}; 2E[Z]beta_c = {normative:.6} is {d_norm:.2} SE away", est.e_z2_hat),
    );
    s.check(d_alt >= 5.0, format!("alternative prefactor value {alternative:.6} is {d_alt:.1} SE away"));
    s.info(format!(
        "discrepancy report: E[Z^2] = 2E[Z]beta_c = {normative:.6} is supported; the reading with prefactor 2e^rho/lambda gives {alternative:.6} (differs by {:.6})",
        normative - alternative
    ));
}

fn main() {
    let mut s = Suite::new();
    let criteria: [(u8, &str, fn(&mut Suite)); 9] = [
        (1, "golden cells", golden_cells),
        (2, "errata detection", errata_detection),
        (3, "table 3 ratios", table3_ratios),
        (4, "closed form vs quadrature", closed_vs_quadrature),
        (5, "simulation oracle", simulation_oracle),
        (6, "sandwich suite", sandwich),
        (7, "property suite", properties),
        (8, "determinism", determinism),
        (9, "E[Z^2] arbitration", second_moment_arbitration),
    ];
    for (number, title, run) in criteria {
        println!("criterion {number}: {title}");
        run(&mut s);
        s.finish(number, title);
    }
    println!("summary");
    for (number, title, ok, summary) in &s.verdicts {
        println!("  criterion {number} {}: {title} ({summary})", if *ok { "PASS" } else { "FAIL" });
    }
    if s.verdicts.iter().any(|v| !v.2) {
        std::process::exit(1);
    }
}
