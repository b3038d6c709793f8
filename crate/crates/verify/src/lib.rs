//! Acceptance criteria A1–A11, shared by `cascade verify` and the
//! `acceptance` test target.
//!
//! Every criterion reports PASS/FAIL with the measured numbers. Seeds are
//! split from fixed masters, so runs are reproducible.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use cascade_core::estimators::{box_count, lq_spectrum, BoxTarget, Window};
use cascade_core::measures::{
    build_mu_q, cantor_filter, local_dimension, median, pushforward, riesz_energy, sample_points, EnergyMode, PushTarget,
    DEFAULT_PAIR_BUDGET,
};
use cascade_core::rng::split_seed;
use cascade_core::{
    check_assumptions, derivatives, interval_j, predicted_spectra, presets, tau, tau_star, AssumptionReport,
    CascadeRealization, GeneratorSpec, IntervalJ, Result,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Master seed every criterion splits its run seeds from.
pub const MASTER_SEED: u64 = 0x5EED_CA5C;

pub const ALL: [&str; 11] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11"];

const TAIL: usize = 6;
const DEEP_LEVEL: usize = 16;

/// Result of one criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} [{:.2}s / {}s] {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

/// What a criterion computed: verdict, explanation and its data as CSV.
struct Check {
    passed: bool,
    detail: String,
    csv: String,
}

/// Specs under test with their precomputed exact data.
pub struct Context {
    pub spec: GeneratorSpec,
    pub reference: GeneratorSpec,
    pub assumptions: AssumptionReport,
    pub j: Option<IntervalJ>,
}

impl Context {
    /// `spec` is the spec under test; the multinomial preset serves as the
    /// closed-form reference.
    pub fn new(spec: GeneratorSpec) -> Self {
        let assumptions = check_assumptions(&spec);
        let j = interval_j(&spec).ok();
        Self {
            spec,
            reference: presets::multinomial(),
            assumptions,
            j,
        }
    }
}

fn meta(id: &str) -> (&'static str, &'static str, u64) {
    match id {
        "A1" => ("A1", "tau closed form", 1),
        "A2" => ("A2", "tau derivative vs finite difference", 1),
        "A3" => ("A3", "Legendre identity on J", 1),
        "A4" => ("A4", "partition-sum martingale mean", 30),
        "A5" => ("A5", "empirical L^q spectrum", 120),
        "A6" => ("A6", "whole-graph box dimension", 120),
        "A7" => ("A7", "local dimension of the domain measure", 120),
        "A8" => ("A8", "level-set box dimension, random direction", 180),
        "A9" => ("A9", "energy growth dichotomy", 120),
        "A10" => ("A10", "Cantor filter complement decay", 60),
        "A11" => ("A11", "thread-count determinism of A5-A8", 600),
        _ => ("?", "unknown criterion", 0),
    }
}

fn needs_theorem(id: &str) -> bool {
    matches!(id, "A5" | "A6" | "A7" | "A8" | "A9" | "A10" | "A11")
}

/// Run one criterion by id.
pub fn run_one(ctx: &Context, id: &str) -> Outcome {
    let (id, title, budget) = meta(id);
    let start = Instant::now();
    let check = if needs_theorem(id) && !ctx.assumptions.all_hold() {
        Ok(Check {
            passed: false,
            detail: format!("assumptions violated: {}", ctx.assumptions.violations.join("; ")),
            csv: String::new(),
        })
    } else {
        match id {
            "A1" => a1(ctx),
            "A2" => a2(ctx),
            "A3" => a3(ctx),
            "A4" => a4(ctx),
            "A5" => a5(ctx),
            "A6" => a6(ctx),
            "A7" => a7(ctx),
            "A8" => a8(ctx),
            "A9" => a9(ctx),
            "A10" => a10(ctx),
            "A11" => a11(ctx),
            _ => Ok(Check {
                passed: false,
                detail: "unknown criterion".into(),
                csv: String::new(),
            }),
        }
    };
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget);
    let (mut passed, mut detail) = match check {
        Ok(c) => (c.passed, c.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if elapsed > budget {
        passed = false;
        detail.push_str(&format!("; over time budget ({:.1}s)", elapsed.as_secs_f64()));
    }
    Outcome {
        id,
        title,
        passed,
        detail,
        elapsed,
        budget,
    }
}

pub fn run_all(ctx: &Context) -> Vec<Outcome> {
    ALL.iter().map(|id| run_one(ctx, id)).collect()
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn a1(ctx: &Context) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for q in grid(-5.0, 5.0, 0.05) {
        let exact = -(0.25f64.powf(q) + 0.75f64.powf(q)).log2();
        worst = worst.max((tau(&ctx.reference, q)? - exact).abs());
    }
    Ok(Check {
        passed: worst <= 1e-10,
        detail: format!("max |tau - closed form| = {worst:.3e} over 201 q (tol 1e-10)"),
        csv: String::new(),
    })
}

fn a2(ctx: &Context) -> Result<Check> {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for spec in [&ctx.spec, &ctx.reference] {
        for q in grid(-5.0, 5.0, 0.05) {
            let fd = (tau(spec, q + h)? - tau(spec, q - h)?) / (2.0 * h);
            let tp = derivatives(spec, q)?.tau_prime;
            worst = worst.max((tp - fd).abs() / (1.0 + tp.abs()));
        }
    }
    Ok(Check {
        passed: worst <= 1e-6,
        detail: format!("max relative derivative gap = {worst:.3e} (tol 1e-6)"),
        csv: String::new(),
    })
}

fn a3(ctx: &Context) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for spec in [&ctx.spec, &ctx.reference] {
        let j = interval_j(spec)?;
        for q in grid(-5.0, 5.0, 0.05).into_iter().filter(|&q| j.contains(q)) {
            let p = derivatives(spec, q)?;
            worst = worst.max((tau_star(spec, p.tau_prime) - p.tau_star).abs());
            count += 1;
        }
    }
    Ok(Check {
        passed: count > 0 && worst <= 1e-8,
        detail: format!("max Legendre gap = {worst:.3e} over {count} q in J (tol 1e-8)"),
        csv: String::new(),
    })
}

fn a4(ctx: &Context) -> Result<Check> {
    let j = ctx.j.as_ref();
    let qs: Vec<f64> = [0.0, 0.5, 1.0, 1.5].into_iter().filter(|&q| j.is_some_and(|j| j.contains(q))).collect();
    if qs.is_empty() {
        return Ok(Check {
            passed: false,
            detail: "no test q in J".into(),
            csv: String::new(),
        });
    }
    let mut passed = true;
    let mut detail = String::new();
    for q in qs {
        let totals: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|i| {
                let real = CascadeRealization::sample(&ctx.spec, split_seed(MASTER_SEED + 4, i), 10)?;
                Ok(build_mu_q(&real, q, 10, 0)?.total())
            })
            .collect::<Result<_>>()?;
        let n = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / n;
        let se = (totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        // Float slack covers specs where Y is deterministic at this q.
        let ok = (mean - 1.0).abs() <= 3.0 * se + 1e-12;
        passed &= ok;
        let _ = write!(detail, "q={q}: mean {mean:.4} se {se:.4}{}; ", if ok { "" } else { " (out)" });
    }
    Ok(Check {
        passed,
        detail,
        csv: String::new(),
    })
}

fn deep_trace(spec: &GeneratorSpec, seed: u64) -> Result<(CascadeRealization, cascade_core::FunctionTrace)> {
    let real = CascadeRealization::sample(spec, seed, DEEP_LEVEL + TAIL)?;
    let trace = real.build_trace(DEEP_LEVEL, TAIL)?;
    Ok((real, trace))
}

fn a5(ctx: &Context) -> Result<Check> {
    let qs = grid(-1.0, 2.0, 0.25);
    let window = Window::new(4, 14);
    let per_seed: Vec<Vec<f64>> = (0..8u64)
        .into_par_iter()
        .map(|i| {
            let (_, trace) = deep_trace(&ctx.spec, split_seed(MASTER_SEED + 5, i))?;
            Ok(lq_spectrum(&trace, &qs, window)?.iter().map(|f| f.tau_hat()).collect())
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("seed,q,tau_hat,tau\n");
    let mut passed = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_q = 0.0;
    for (k, &q) in qs.iter().enumerate() {
        let exact = tau(&ctx.spec, q)?;
        let mut err = 0.0;
        for (i, row) in per_seed.iter().enumerate() {
            let _ = writeln!(csv, "{i},{q},{},{exact}", row[k]);
            err += (row[k] - exact).abs();
        }
        err /= per_seed.len() as f64;
        let tol = 0.05 * (1.0 + q.abs());
        passed &= err <= tol;
        if err / tol > worst_ratio {
            worst_ratio = err / tol;
            worst_q = q;
        }
    }
    Ok(Check {
        passed,
        detail: format!("worst mean |tau_hat - tau| / tol = {worst_ratio:.3} at q={worst_q}"),
        csv,
    })
}

fn a6(ctx: &Context) -> Result<Check> {
    let target = 1.0 - tau(&ctx.spec, 1.0)?;
    let slopes: Vec<f64> = (0..8u64)
        .into_par_iter()
        .map(|i| {
            let (_, trace) = deep_trace(&ctx.spec, split_seed(MASTER_SEED + 6, i))?;
            Ok(box_count(&trace, BoxTarget::Graph, Window::new(6, 14))?.fit.slope)
        })
        .collect::<Result<_>>()?;
    let csv = slopes.iter().enumerate().fold(String::from("seed,slope\n"), |mut s, (i, v)| {
        let _ = writeln!(s, "{i},{v}");
        s
    });
    let m = median(&mut slopes.clone());
    Ok(Check {
        passed: (m - target).abs() <= 0.10,
        detail: format!("median slope {m:.4}, target {target:.5} +/- 0.10"),
        csv,
    })
}

fn a7(ctx: &Context) -> Result<Check> {
    let target = derivatives(&ctx.spec, 1.0)?.tau_star;
    let seed = split_seed(MASTER_SEED + 7, 0);
    let (real, trace) = deep_trace(&ctx.spec, seed)?;
    let table = build_mu_q(&real, 1.0, DEEP_LEVEL, TAIL)?;
    let map = pushforward(&table, &trace, PushTarget::Domain, 1 << DEEP_LEVEL)?;
    let points = sample_points(&map, 200, split_seed(MASTER_SEED + 7, 1))?;
    let radii: Vec<f64> = (6..=14).map(|j| 2f64.powi(-j)).collect();
    let ld = local_dimension(&map, &points, &radii)?;
    let mut csv = String::from("point,x,slope\n");
    for (i, (p, s)) in points.iter().zip(&ld.slopes).enumerate() {
        let _ = writeln!(csv, "{i},{},{}", p[0], s.map(|v| v.to_string()).unwrap_or_default());
    }
    Ok(Check {
        passed: (ld.median - target).abs() <= 0.10,
        detail: format!(
            "median local dimension {:.4} over {} points ({} excluded), target {target:.5} +/- 0.10",
            ld.median,
            points.len() - ld.excluded.len(),
            ld.excluded.len()
        ),
        csv,
    })
}

fn a8(ctx: &Context) -> Result<Check> {
    let h = derivatives(&ctx.spec, 1.0)?.tau_prime;
    let target = predicted_spectra(&ctx.spec, h)?.dim_level;
    let draws: Vec<(f64, f64, f64)> = (0..16u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(MASTER_SEED + 8, 1000 + i));
            let theta = rng.gen_range(-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4);
            let (real, trace) = deep_trace(&ctx.spec, split_seed(MASTER_SEED + 8, i))?;
            let table = build_mu_q(&real, 1.0, DEEP_LEVEL, TAIL)?;
            let map = pushforward(&table, &trace, PushTarget::Projection { theta }, 1 << DEEP_LEVEL)?;
            let y = sample_points(&map, 1, rng.gen())?[0][0];
            let fit = box_count(&trace, BoxTarget::LevelSet { y, theta }, Window::default_for(DEEP_LEVEL))?.fit;
            Ok((theta, y, fit.slope))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("draw,theta,y,slope\n");
    for (i, (t, y, s)) in draws.iter().enumerate() {
        let _ = writeln!(csv, "{i},{t},{y},{s}");
    }
    let m = median(&mut draws.iter().map(|d| d.2).collect::<Vec<_>>());
    Ok(Check {
        passed: target.is_finite() && (m - target).abs() <= 0.15,
        detail: format!("median level-set slope {m:.4}, target {target:.5} +/- 0.15"),
        csv,
    })
}

/// Seed-averaged graph energies of `μ_1` at levels `levels`.
fn mean_energies(ctx: &Context, gamma: f64, levels: &[usize], seeds: u64) -> Result<Vec<f64>> {
    levels
        .iter()
        .map(|&n| {
            let vals: Vec<f64> = (0..seeds)
                .into_par_iter()
                .map(|i| {
                    let real = CascadeRealization::sample(&ctx.spec, split_seed(MASTER_SEED + 9, i), n + TAIL)?;
                    let table = build_mu_q(&real, 1.0, n, TAIL)?;
                    let trace = real.build_trace(n, TAIL)?;
                    Ok(riesz_energy(&table, &trace, gamma, EnergyMode::Graph, DEFAULT_PAIR_BUDGET)?.value)
                })
                .collect::<Result<_>>()?;
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

fn a9(ctx: &Context) -> Result<Check> {
    let gamma_g = derivatives(&ctx.spec, 1.0)?.gamma_g;
    let levels: Vec<usize> = (6..=11).collect();
    let below = mean_energies(ctx, gamma_g - 0.3, &levels, 4)?;
    let above = mean_energies(ctx, gamma_g + 0.3, &levels, 4)?;
    let ratios = |e: &[f64]| e.windows(2).map(|w| w[1] / w[0]).collect::<Vec<_>>();
    let (rb, ra) = (ratios(&below), ratios(&above));
    let ok_below = rb.iter().all(|&r| r <= 1.5);
    let ok_above = ra.iter().all(|&r| r >= 2.0);
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
    Ok(Check {
        passed: ok_below && ok_above,
        detail: format!(
            "growth per level at gammaG-0.3: [{}] (need <= 1.5), at gammaG+0.3: [{}] (need >= 2)",
            fmt(&rb),
            fmt(&ra)
        ),
        csv: String::new(),
    })
}

fn a10(ctx: &Context) -> Result<Check> {
    let checkpoints = [6usize, 8, 10, 12];
    let per_seed: Vec<(Vec<f64>, Vec<f64>)> = (0..32u64)
        .into_par_iter()
        .map(|i| {
            let real = CascadeRealization::sample(&ctx.spec, split_seed(MASTER_SEED + 10, i), 12 + TAIL)?;
            let trace = real.build_trace(12, TAIL)?;
            let res = cantor_filter(&real, &trace, 1.0, 0.15, checkpoints[0])?;
            Ok((
                checkpoints.iter().map(|&p| res.complement_mass_by_level[p - 1]).collect(),
                checkpoints.iter().map(|&p| res.level_failure_mass[p - 1]).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let average = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..checkpoints.len())
            .map(|k| per_seed.iter().map(|r| pick(r)[k]).sum::<f64>() / per_seed.len() as f64)
            .collect()
    };
    let means = average(&|r| &r.0);
    let single = average(&|r| &r.1);
    let fmt = |v: &[f64]| v.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", ");
    Ok(Check {
        passed: means.windows(2).all(|w| w[1] < w[0]),
        detail: format!(
            "mean complement of C_n at n=6,8,10,12: [{}]; single-level band failures: [{}]",
            fmt(&means),
            fmt(&single)
        ),
        csv: String::new(),
    })
}

/// CSV outputs of A5–A8 joined in order.
pub fn experiment_csvs(ctx: &Context) -> Result<Vec<String>> {
    Ok(vec![a5(ctx)?.csv, a6(ctx)?.csv, a7(ctx)?.csv, a8(ctx)?.csv])
}

fn a11(ctx: &Context) -> Result<Check> {
    let many = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2).max(2);
    let run = |threads: usize| -> Result<Vec<String>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| cascade_core::Error::Capacity(e.to_string()))?;
        pool.install(|| experiment_csvs(ctx))
    };
    let one = run(1)?;
    let all = run(many)?;
    let same: Vec<bool> = one.iter().zip(&all).map(|(a, b)| a == b).collect();
    Ok(Check {
        passed: same.iter().all(|&s| s),
        detail: format!(
            "A5-A8 CSV identical with 1 and {many} threads: {}",
            same.iter().map(|s| if *s { "yes" } else { "no" }).collect::<Vec<_>>().join(",")
        ),
        csv: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_criteria_pass_on_canonical() {
        let ctx = Context::new(presets::canonical());
        for id in ["A1", "A2", "A3"] {
            let o = run_one(&ctx, id);
            assert!(o.passed, "{}", o.line());
            assert!(o.line().starts_with("PASS"));
        }
    }

    #[test]
    fn theorem_criteria_refuse_conservative_specs() {
        let ctx = Context::new(presets::multinomial());
        let o = run_one(&ctx, "A6");
        assert!(!o.passed);
        assert!(o.detail.starts_with("assumptions violated"));
        assert!(!run_one(&ctx, "A42").passed);
    }
}
