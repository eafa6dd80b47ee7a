#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use sbm_thresholds::detection::{
    bayes_overlap_experiment, birkhoff_bound_check, entropy_bound_check, exact_posterior, Labeling,
};
use sbm_thresholds::experiments::{default_window, exact_second_moment, DEFAULT_BUDGET};
use sbm_thresholds::graph::{cycle_poisson_check, sample_er};
use sbm_thresholds::numeric::{psi, CompensatedSum};
use sbm_thresholds::qfunc::{
    an_entropy_bound, doubly_stochastic_entropy, kl_divergence, phi_max, q_value_for, random_doubly_stochastic,
    small_subgraph_identity, sufficiency_verdict, Sufficiency,
};
use sbm_thresholds::rng::rng_from_seed;
use sbm_thresholds::thresholds::{asymptotic_ratio, d_lower, d_upper, lambda_star};
use sbm_thresholds::ModelParams;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn lambda_star_table() -> Outcome {
    let table = [
        (5usize, -0.239),
        (6, -0.166),
        (7, -0.112),
        (8, -0.070),
        (9, -0.036),
        (11, 0.014),
        (20, 0.127),
        (100, 0.286),
        (1000, 0.372),
        (10_000, 0.410),
    ];
    let mut worst: f64 = 0.0;
    for (q, want) in table {
        match lambda_star(q) {
            Ok(got) => worst = worst.max((got - want).abs()),
            Err(e) => return outcome(false, format!("q={q}: {e}")),
        }
    }
    let q10 = lambda_star(10).map_or(f64::NAN, |l| l);
    outcome(worst <= 1.5e-3, format!("max deviation {worst:.2e}; q=10 computed {q10:.6} (excluded)"))
}

fn closed_form_corners() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut below = true;
    for q in 3..=50usize {
        let qf = q as f64;
        let got = d_upper(q, -1.0 / (qf - 1.0)).unwrap();
        let want = 2.0 * qf.ln() / -(1.0 - 1.0 / qf).ln();
        worst = worst.max((got - want).abs());
        below &= got < 2.0 * qf * qf.ln();
    }
    let exact_two = (2..=50).all(|q| d_upper(q, 1.0).unwrap() == 2.0);
    outcome(
        worst <= 1e-10 && below && exact_two,
        format!("max |error| {worst:.2e}; below 2q·ln q: {below}; d_upper(q, 1) == 2: {exact_two}"),
    )
}

fn asymptotic_ratios() -> Outcome {
    let q = 1_000_000usize;
    let mut worst: f64 = 0.0;
    for mu in [-1.0, -0.5, 0.5, 1.0] {
        let lambda = mu / q as f64;
        let ratio = d_upper(q, lambda).unwrap() / d_lower(q, lambda).unwrap();
        let limit = asymptotic_ratio(mu).unwrap();
        worst = worst.max((ratio - limit).abs() / ratio);
    }
    let at_minus_one = asymptotic_ratio(-1.0).unwrap();
    outcome(
        worst < 0.02 && (at_minus_one - 1.0).abs() < 1e-12,
        format!("max relative gap {worst:.2e}; limit at mu=-1 is {at_minus_one}"),
    )
}

fn sufficiency_grid() -> Outcome {
    let restarts = 32;
    let mut points = 0;
    let mut skipped = 0;
    let mut worst_phi = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for q in 3..=8usize {
        let floor = -1.0 / (q as f64 - 1.0);
        for lambda in [0.1, -0.1, 0.3, -0.3, floor] {
            if lambda < floor - 1e-12 {
                skipped += 1;
                continue;
            }
            points += 1;
            let seed = (q * 100) as u64 + points;
            let d = 0.95 * d_lower(q, lambda).unwrap();
            let phi = phi_max(q, d, lambda, restarts, seed).unwrap().value;
            worst_phi = worst_phi.max(phi);
            let params = ModelParams::symmetric(q, d, lambda).unwrap();
            let verdict = sufficiency_verdict(&params, restarts, seed).unwrap();
            if phi > 1e-8 || verdict.sufficiency != Sufficiency::ContiguousNondetectable {
                failures.push(format!("q={q} λ={lambda:.3}: Φ={phi:.2e}, Q={:.4}", verdict.q.value));
            }
            let above = ModelParams::symmetric(q, 1.05 / (lambda * lambda), lambda).unwrap();
            let qv = q_value_for(&above, restarts, seed).unwrap().value;
            if !(qv > 1.0) {
                failures.push(format!("q={q} λ={lambda:.3}: Q={qv:.4} at dλ²=1.05"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{points} points ({skipped} inadmissible λ skipped); max Φ {worst_phi:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

/// For `q = 2` the polytope is the segment `a ↦ [[a, ½−a], [½−a, a]]`.
fn q2_grid_oracle(d: f64, lambda: f64) -> f64 {
    let params = ModelParams::symmetric(2, d, lambda).unwrap();
    let a = params.centered() / (2.0 * d).sqrt();
    let p = DMatrix::from_element(2, 2, 0.25);
    const GRID: usize = 200_000;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=GRID {
        let t = 0.5 * k as f64 / GRID as f64;
        let alpha = DMatrix::from_row_slice(2, 2, &[t, 0.5 - t, 0.5 - t, t]);
        let delta = &alpha - &p;
        let num = delta.component_mul(&(&a * &delta * a.transpose())).sum();
        let den = kl_divergence(alpha.as_slice(), p.as_slice()).unwrap();
        if den > 1e-9 {
            best = best.max(num / den);
        }
    }
    best
}

fn q2_oracle() -> Outcome {
    let mut rng = rng_from_seed(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let lambda: f64 = rng.random_range(-0.95..0.95);
        let signal: f64 = rng.random_range(0.05..0.95);
        let d = signal / (lambda * lambda);
        let got = q_value_for(&ModelParams::symmetric(2, d, lambda).unwrap(), 16, 1).unwrap().value;
        worst = worst.max((got - q2_grid_oracle(d, lambda)).abs());
    }
    outcome(worst <= 1e-4, format!("20 points, max |Q − grid| {worst:.2e}"))
}

fn cycle_means() -> Outcome {
    let params = ModelParams::symmetric(2, 3.0, 0.6).unwrap();
    let report = cycle_poisson_check(&params, 5000, 5, 200, 77).unwrap();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &report.rows {
        let (zq, zp) = row.z_scores();
        worst = worst.max(zq.abs()).max(zp.abs());
        pass &= zq.abs() <= 4.0 && zp.abs() <= 4.0;
        parts.push(format!("m={}: z_Q={zq:+.2}, z_P={zp:+.2}", row.m));
    }
    outcome(pass && report.rows.len() == 3, parts.join("; "))
}

/// Direct sum over all `(σ, τ) ∈ Ω_n × Ω_n` of `P(σ)P(τ)∏_{u<v} E_Q[W W]` with
/// the per-pair expectation `st/(nd) + (1 − s/n)(1 − t/n)/(1 − d/n)`.
fn direct_second_moment(params: &ModelParams, n: usize, a_n: f64) -> f64 {
    let m = params.connectivity();
    let (d, nf) = (params.degree(), n as f64);
    let mut factor = [[[[0.0; 2]; 2]; 2]; 2];
    for (su, fu) in factor.iter_mut().enumerate() {
        for (sv, fv) in fu.iter_mut().enumerate() {
            for (tu, ft) in fv.iter_mut().enumerate() {
                for (tv, f) in ft.iter_mut().enumerate() {
                    let (s, t) = (m[(su, sv)], m[(tu, tv)]);
                    *f = s * t / (nf * d) + (1.0 - s / nf) * (1.0 - t / nf) / (1.0 - d / nf);
                }
            }
        }
    }
    let pi = params.pi();
    let admissible: Vec<(u32, f64)> = (0..1u32 << n)
        .filter_map(|mask| {
            let ones = mask.count_ones() as f64;
            let ok = (ones - nf * pi[1]).abs() <= a_n + 1e-9 && (nf - ones - nf * pi[0]).abs() <= a_n + 1e-9;
            ok.then(|| (mask, pi[1].powf(ones) * pi[0].powf(nf - ones)))
        })
        .collect();
    let bit = |mask: u32, v: usize| ((mask >> v) & 1) as usize;
    let mut total = CompensatedSum::new();
    for &(sigma, ps) in &admissible {
        for &(tau, pt) in &admissible {
            let mut prod = ps * pt;
            for u in 0..n {
                for v in u + 1..n {
                    prod *= factor[bit(sigma, u)][bit(sigma, v)][bit(tau, u)][bit(tau, v)];
                }
            }
            total.add(prod);
        }
    }
    total.value()
}

fn second_moment_oracle() -> Outcome {
    let mut rng = rng_from_seed(99);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [6usize, 8, 10] {
        for _ in 0..10 {
            let lambda: f64 = rng.random_range(-0.9..0.9);
            let d: f64 = rng.random_range(0.5..(n as f64 / 2.5));
            let params = ModelParams::symmetric(2, d, lambda).unwrap();
            let a_n = default_window(n);
            let fast = exact_second_moment(&params, n, a_n, DEFAULT_BUDGET).unwrap().exact_value;
            let slow = direct_second_moment(&params, n, a_n);
            worst = worst.max((fast - slow).abs() / slow);
            count += 1;
        }
    }
    outcome(worst <= 1e-13, format!("{count} instances, max relative error {worst:.2e}"))
}

fn second_moment_trend() -> Outcome {
    let ladder = [50usize, 100, 200];
    let run = |d: f64| -> Vec<f64> {
        let params = ModelParams::symmetric(2, d, 0.5).unwrap();
        ladder
            .iter()
            .map(|&n| exact_second_moment(&params, n, default_window(n), DEFAULT_BUDGET).unwrap().exact_value)
            .collect()
    };
    let target = psi(0.5);
    let sub = run(2.0);
    let gaps: Vec<f64> = sub.iter().map(|v| (v - target).abs()).collect();
    let converging = sub.iter().all(|v| v.is_finite() && *v <= 1.2) && gaps.windows(2).all(|w| w[1] < w[0]);
    let sup = run(4.8);
    let growing = sup.windows(2).all(|w| w[1] > w[0]);
    outcome(
        converging && growing,
        format!("dλ²=0.5: {sub:.6?} vs ψ(0.5)={target:.6}; dλ²=1.2: {sup:.4?}"),
    )
}

fn subgraph_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for q in [2usize, 3, 5] {
        for signal in [0.25, 0.5, 0.9] {
            let lambda = 0.5;
            let params = ModelParams::symmetric(q, signal / (lambda * lambda), lambda).unwrap();
            worst = worst.max(small_subgraph_identity(&params, 400).unwrap().gap);
        }
    }
    outcome(worst <= 1e-10, format!("max gap {worst:.2e}"))
}

fn property_suites() -> Outcome {
    let mut rng = rng_from_seed(10);
    let mut violations = [0usize; 5];
    for k in 0..10_000 {
        let q = 2 + k % 4;
        let n = q * (2 + k % 5);
        let sigma = Labeling::random_balanced(q, n, &mut rng).unwrap();
        let tau = Labeling::random_balanced(q, n, &mut rng).unwrap();
        violations[0] += !birkhoff_bound_check(&sigma, &tau).unwrap().ok as usize;
        violations[1] += !entropy_bound_check(&sigma, &tau).unwrap().ok as usize;
    }
    for k in 0..10_000 {
        let q = 2 + k % 6;
        let alpha = random_doubly_stochastic(q, &mut rng);
        let rho = alpha.norm_squared().clamp(1.0, q as f64);
        violations[2] += (doubly_stochastic_entropy(&alpha) > an_entropy_bound(q, rho).unwrap() + 1e-12) as usize;
    }
    for k in 0..10_000 {
        let len = 2 + k % 5;
        let draw = |rng: &mut sbm_thresholds::rng::Rng| {
            let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (p, r) = (draw(&mut rng), draw(&mut rng));
        let kl = kl_divergence(&p, &r).unwrap();
        violations[3] += (!(kl > 0.0) || kl_divergence(&p, &p).unwrap() != 0.0) as usize;
    }
    for k in 0..100 {
        let q = 2 + k % 2;
        let n = 4 + k % 5;
        let params = ModelParams::symmetric(q, 2.0, 0.0).unwrap();
        let g = sample_er(n, 2.0, 1000 + k as u64).unwrap();
        let post = exact_posterior(&g, &params, k % n).unwrap();
        violations[4] += post.iter().any(|&p| (p - 1.0 / q as f64).abs() > 1e-12) as usize;
    }
    outcome(
        violations.iter().all(|&v| v == 0),
        format!(
            "violations: birkhoff {}, overlap entropy {}, doubly stochastic entropy {}, KL {}, null posterior {}",
            violations[0], violations[1], violations[2], violations[3], violations[4]
        ),
    )
}

fn bayes_overlap() -> Outcome {
    let run = |d: f64, lambda: f64| {
        bayes_overlap_experiment(&ModelParams::symmetric(2, d, lambda).unwrap(), 12, 200, 31).unwrap()
    };
    let null = run(4.0, 0.0);
    let weak = run(4.0, 0.2);
    let strong = run(4.0, 0.9);
    let null_ok = null.ci_low <= 0.0 && 0.0 <= null.ci_high;
    outcome(
        null_ok && strong.mean > weak.mean,
        format!(
            "λ=0: {:.4} [{:.4}, {:.4}]; λ=0.2: {:.4}; λ=0.9: {:.4}",
            null.mean, null.ci_low, null.ci_high, weak.mean, strong.mean
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("lambda-star table", Duration::from_secs(10), lambda_star_table),
        ("closed-form corners", Duration::from_secs(1), closed_form_corners),
        ("asymptotic ratio", Duration::from_secs(1), asymptotic_ratios),
        ("Q/Φ sufficiency", Duration::from_secs(120), sufficiency_grid),
        ("q=2 Q oracle", Duration::from_secs(30), q2_oracle),
        ("cycle Poisson means", Duration::from_secs(120), cycle_means),
        ("second-moment oracle", Duration::from_secs(60), second_moment_oracle),
        ("second-moment trend", Duration::from_secs(300), second_moment_trend),
        ("small-subgraph identity", Duration::from_secs(1), subgraph_identity),
        ("property suites", Duration::from_secs(120), property_suites),
        ("Bayes overlap", Duration::from_secs(180), bayes_overlap),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed < *budget;
        failed += !pass as usize;
        println!(
            "criterion {:>2} {:<24} {} in {:.2}s (limit {}s): {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            result.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
