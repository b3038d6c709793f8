//! Subcommands of the `cascade` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cascade_core::estimators::{box_count, lq_spectrum, BoxCountResult, BoxTarget, Window};
use cascade_core::measures::{build_mu_q, pushforward, riesz_energy, sample_points, EnergyMode, PushTarget, DEFAULT_PAIR_BUDGET};
use cascade_core::rng::split_seed;
use cascade_core::spectrum::{spectrum_table, Subinterval};
use cascade_core::{check_assumptions, derivatives, interval_j, presets, tau, CascadeRealization, Error, GeneratorSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use cascade_verify::{self as criteria, Context};
use serde_json::json;

use crate::manifest::RunManifest;
use crate::plot::{Plot, Series, Style};

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "Simulate and analyse b-adic independent cascade functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact τ, τ', τ*, γ^G, γ^R on a q-grid.
    Spectrum(SpectrumArgs),
    /// Sample one realization and write its trace.
    Simulate(SimulateArgs),
    /// L^q spectrum and box-counting fits over seeds.
    Estimate(EstimateArgs),
    /// Masses of μ_q on the level-n cylinders.
    Measure(MeasureArgs),
    /// Discrete Riesz energies of μ_q.
    Energy(EnergyArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Generator spec JSON file, or a preset name (canonical, multinomial).
    #[arg(long, default_value = "canonical")]
    pub spec: String,
    /// Root directory for run outputs.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    /// q-grid as LO:HI:STEP.
    #[arg(long, default_value = "-5:5:0.1", allow_hyphen_values = true)]
    pub q: QGrid,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trace level n.
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    /// Extra tree levels below each trace cell.
    #[arg(long, default_value_t = 6)]
    pub tail: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 14)]
    pub depth: usize,
    #[arg(long, default_value_t = 6)]
    pub tail: usize,
    /// Master seed; run seeds are split from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of realizations.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value = "-1:2:0.25", allow_hyphen_values = true)]
    pub q: QGrid,
    /// Fit window JMIN:JMAX (default 4:depth-2).
    #[arg(long)]
    pub window: Option<WindowArg>,
    /// Random directions for projection and level-set counts.
    #[arg(long, default_value_t = 0)]
    pub theta_samples: usize,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    #[arg(long, default_value_t = 6)]
    pub tail: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub q: QGrid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Graph,
    Range,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest level n.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Smallest level n (default: depth).
    #[arg(long)]
    pub from: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub tail: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub q: QGrid,
    /// Kernel exponents, comma separated (default γ^G(q) ± 0.3).
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long, value_enum, default_value = "graph")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_PAIR_BUDGET)]
    pub pair_budget: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Only these criteria, comma separated (e.g. A1,A5).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}

/// `LO:HI:STEP` or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrid(pub Vec<f64>);

impl FromStr for QGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number {p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [q] => Ok(QGrid(vec![q])),
            [lo, hi, step] if step > 0.0 && hi >= lo => {
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                Ok(QGrid((0..=n).map(|i| lo + i as f64 * step).collect()))
            }
            _ => Err(format!("expected LO:HI:STEP with STEP > 0, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowArg(pub Window);

impl FromStr for WindowArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected JMIN:JMAX, got {s:?}"))?;
        let a = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b = b.trim().parse().map_err(|e| format!("{e}"))?;
        Ok(WindowArg(Window::new(a, b)))
    }
}

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assumption violation: {0}")]
    Assumption(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Capacity(m) => CliError::Capacity(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn load_spec(name: &str) -> CliResult<GeneratorSpec> {
    let path = Path::new(name);
    if !path.exists() {
        return match name {
            "canonical" => Ok(presets::canonical()),
            "multinomial" => Ok(presets::multinomial()),
            _ => Err(CliError::Config(format!("spec file {name} not found"))),
        };
    }
    let text = fs::read_to_string(path)?;
    Ok(GeneratorSpec::parse(&text)?)
}

/// Create the manifest's output directory and write `manifest.json`.
fn prepare(manifest: &RunManifest, root: &Path) -> CliResult<PathBuf> {
    let dir = manifest.output_dir(root);
    fs::create_dir_all(&dir)?;
    let body = serde_json::to_string_pretty(&manifest.to_json()).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), body + "\n")?;
    Ok(dir)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Config(e.to_string()))?)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Measure(a) => measure(a),
        Command::Energy(a) => energy(a),
        Command::Verify(a) => verify(a),
    }
}

fn spectrum(a: SpectrumArgs) -> CliResult<()> {
    let spec = load_spec(&a.common.spec)?;
    let manifest = RunManifest::new("spectrum", &spec, json!({ "q": a.q.0 }));
    let dir = prepare(&manifest, &a.common.out)?;
    let j = interval_j(&spec).ok();
    let points = spectrum_table(&spec, &a.q.0)?;
    let mut w = csv_writer(&dir.join("spectrum.csv"))?;
    w.write_record(["q", "tau", "tau_prime", "tau_star", "gammaG", "gammaR", "inJ", "subinterval"])
        .map_err(csv_err)?;
    for p in &points {
        let in_j = j.as_ref().is_some_and(|j| j.contains(p.q));
        let sub = if in_j { Subinterval::classify(p).as_str() } else { "" };
        w.write_record([
            p.q.to_string(),
            p.tau.to_string(),
            p.tau_prime.to_string(),
            p.tau_star.to_string(),
            p.gamma_g.to_string(),
            p.gamma_r.to_string(),
            in_j.to_string(),
            sub.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let plot = Plot::new(format!("{}: structure function", spec.label()), "q", "value")
        .with(Series::new("tau(q)", points.iter().map(|p| (p.q, p.tau)).collect(), Style::Line))
        .with(Series::new("tau*(tau'(q))", points.iter().map(|p| (p.q, p.tau_star)).collect(), Style::Dashed));
    fs::write(dir.join("spectrum.svg"), plot.to_svg())?;
    match &j {
        Some(j) => println!("J = ({}, {})", j.q_lo, j.q_hi),
        None => println!("J is empty"),
    }
    println!("{}", dir.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let spec = load_spec(&a.common.spec)?;
    let manifest = RunManifest::new("simulate", &spec, json!({ "depth": a.depth, "tail": a.tail, "seed": a.seed }));
    let real = CascadeRealization::sample(&spec, a.seed, a.depth + a.tail)?;
    let trace = real.build_trace(a.depth, a.tail)?;
    let dir = prepare(&manifest, &a.common.out)?;
    trace.write_csv(fs::File::create(dir.join("trace.csv"))?)?;
    let step = (trace.fl().len() / 4096).max(1);
    let pts: Vec<(f64, f64)> = trace.fl().iter().zip(trace.fw()).step_by(step).map(|(x, y)| (*x, *y)).collect();
    let plot = Plot::new(format!("{} seed {}", spec.label(), a.seed), "F_L", "F_W").with(Series::new("graph", pts, Style::Line));
    fs::write(dir.join("graph.svg"), plot.to_svg())?;
    println!("{}", dir.display());
    Ok(())
}

fn write_counts(path: &Path, res: &BoxCountResult) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["j", "N_j"]).map_err(csv_err)?;
    for (j, n) in res.counts.iter().enumerate() {
        w.write_record([j.to_string(), n.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn fit_plot(title: &str, res: &BoxCountResult, b: usize, theory: Option<f64>) -> Plot {
    let lb = (b as f64).ln();
    let data: Vec<(f64, f64)> = res
        .counts
        .iter()
        .enumerate()
        .filter(|(_, n)| **n > 0)
        .map(|(j, n)| (j as f64, (*n as f64).ln() / lb))
        .collect();
    let f = &res.fit;
    let (j0, j1) = (f.window.j_min as f64, f.window.j_max as f64);
    let mut plot = Plot::new(title, "level j", "log_b N_j")
        .with(Series::new("counts", data, Style::Markers))
        .with(Series::new(
            format!("fit slope {:.4}", f.slope),
            vec![(j0, f.intercept + f.slope * j0), (j1, f.intercept + f.slope * j1)],
            Style::Line,
        ));
    if let Some(t) = theory {
        let mid = 0.5 * (j0 + j1);
        let y_mid = f.intercept + f.slope * mid;
        plot = plot.with(Series::new(
            format!("theory slope {t:.4}"),
            vec![(j0, y_mid + t * (j0 - mid)), (j1, y_mid + t * (j1 - mid))],
            Style::Dashed,
        ));
    }
    plot
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let spec = load_spec(&a.common.spec)?;
    let window = a.window.map(|w| w.0).unwrap_or_else(|| Window::default_for(a.depth));
    let manifest = RunManifest::new(
        "estimate",
        &spec,
        json!({
            "depth": a.depth, "tail": a.tail, "seed": a.seed, "seeds": a.seeds,
            "q": a.q.0, "window": [window.j_min, window.j_max], "theta_samples": a.theta_samples,
        }),
    );
    // Fail on capacity before creating anything.
    CascadeRealization::sample(&spec, 0, a.depth + a.tail)?;
    let dir = prepare(&manifest, &a.common.out)?;
    let exact: Vec<f64> = a.q.0.iter().map(|&q| tau(&spec, q)).collect::<Result<_, _>>()?;
    let graph_theory = 1.0 - tau(&spec, 1.0)?;
    let h1 = derivatives(&spec, 1.0)?.tau_prime;
    let level_theory = cascade_core::predicted_spectra(&spec, h1)?.dim_level;

    let summaries: Vec<Vec<String>> = (0..a.seeds)
        .into_par_iter()
        .map(|i| -> CliResult<Vec<String>> {
            let seed = split_seed(a.seed, i);
            let sub = dir.join(format!("seed_{i}"));
            fs::create_dir_all(&sub)?;
            let real = CascadeRealization::sample(&spec, seed, a.depth + a.tail)?;
            let trace = real.build_trace(a.depth, a.tail)?;
            let mut rows = Vec::new();

            let fits = lq_spectrum(&trace, &a.q.0, window)?;
            let mut w = csv_writer(&sub.join("lq.csv"))?;
            w.write_record(["q", "tau_hat", "r2"]).map_err(csv_err)?;
            for f in &fits {
                w.write_record([f.q.to_string(), f.tau_hat().to_string(), f.fit.r2.to_string()]).map_err(csv_err)?;
            }
            w.flush()?;
            let plot = Plot::new(format!("L^q spectrum, seed {i}"), "q", "tau")
                .with(Series::new("estimate", fits.iter().map(|f| (f.q, f.tau_hat())).collect(), Style::Markers))
                .with(Series::new("exact", a.q.0.iter().copied().zip(exact.iter().copied()).collect(), Style::Line));
            fs::write(sub.join("lq.svg"), plot.to_svg())?;

            let mut targets: Vec<(String, BoxTarget, Option<f64>)> = vec![
                ("graph".into(), BoxTarget::Graph, Some(graph_theory)),
                ("range".into(), BoxTarget::Range, Some(1.0)),
            ];
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 1));
            let table = if a.theta_samples > 0 { Some(build_mu_q(&real, 1.0, a.depth, a.tail)?) } else { None };
            for k in 0..a.theta_samples {
                let theta = rng.gen_range(-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4);
                targets.push((format!("projection_{k}"), BoxTarget::Projection { theta }, None));
                let table = table.as_ref().expect("table built when theta samples requested");
                let map = pushforward(table, &trace, PushTarget::Projection { theta }, 1 << a.depth.min(20))?;
                let y = sample_points(&map, 1, rng.gen())?[0][0];
                targets.push((format!("levelset_{k}"), BoxTarget::LevelSet { y, theta }, Some(level_theory)));
            }
            for (name, target, theory) in targets {
                let res = box_count(&trace, target, window)?;
                write_counts(&sub.join(format!("box_{name}.csv")), &res)?;
                let plot = fit_plot(&format!("{name} box counts, seed {i}"), &res, spec.b(), theory);
                fs::write(sub.join(format!("box_{name}.svg")), plot.to_svg())?;
                rows.push(format!(
                    "{i},{name},{},{},{}",
                    res.fit.slope,
                    res.fit.r2,
                    theory.map(|t| t.to_string()).unwrap_or_default()
                ));
            }
            Ok(rows)
        })
        .collect::<CliResult<_>>()?;
    let mut text = String::from("seed,target,slope,r2,theory\n");
    for r in summaries.into_iter().flatten() {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(dir.join("summary.csv"), text)?;
    println!("{}", dir.display());
    Ok(())
}

fn single_q(grid: &QGrid) -> CliResult<f64> {
    match grid.0[..] {
        [q] => Ok(q),
        _ => Err(CliError::Config("this command takes a single --q value".into())),
    }
}

fn measure(a: MeasureArgs) -> CliResult<()> {
    let spec = load_spec(&a.common.spec)?;
    let q = single_q(&a.q)?;
    let manifest = RunManifest::new("measure", &spec, json!({ "depth": a.depth, "tail": a.tail, "seed": a.seed, "q": q }));
    let real = CascadeRealization::sample(&spec, a.seed, a.depth + a.tail)?;
    let table = build_mu_q(&real, q, a.depth, a.tail)?;
    let dir = prepare(&manifest, &a.common.out)?;
    table.write_csv(fs::File::create(dir.join("measure.csv"))?)?;
    println!("total {}", table.total());
    println!("{}", dir.display());
    Ok(())
}

fn energy(a: EnergyArgs) -> CliResult<()> {
    let spec = load_spec(&a.common.spec)?;
    let q = single_q(&a.q)?;
    let from = a.from.unwrap_or(a.depth);
    if from > a.depth {
        return Err(CliError::Config(format!("--from {from} exceeds --depth {}", a.depth)));
    }
    let gammas = if a.gamma.is_empty() {
        let g = derivatives(&spec, q)?.gamma_g;
        vec![g - 0.3, g + 0.3]
    } else {
        a.gamma.clone()
    };
    let mode = match a.mode {
        ModeArg::Graph => EnergyMode::Graph,
        ModeArg::Range => EnergyMode::Range,
    };
    let manifest = RunManifest::new(
        "energy",
        &spec,
        json!({
            "depth": a.depth, "from": from, "tail": a.tail, "seed": a.seed, "q": q,
            "gamma": gammas, "mode": format!("{:?}", a.mode).to_lowercase(), "pair_budget": a.pair_budget,
        }),
    );
    CascadeRealization::sample(&spec, a.seed, a.depth + a.tail)?;
    let dir = prepare(&manifest, &a.common.out)?;
    let mut w = csv_writer(&dir.join("energy.csv"))?;
    w.write_record(["gamma", "n", "value", "subsampled"]).map_err(csv_err)?;
    for n in from..=a.depth {
        let real = CascadeRealization::sample(&spec, a.seed, n + a.tail)?;
        let table = build_mu_q(&real, q, n, a.tail)?;
        let trace = real.build_trace(n, a.tail)?;
        for &g in &gammas {
            let e = riesz_energy(&table, &trace, g, mode, a.pair_budget)?;
            w.write_record([g.to_string(), n.to_string(), e.value.to_string(), e.subsampled.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    println!("{}", dir.display());
    Ok(())
}

fn verify(a: VerifyArgs) -> CliResult<()> {
    let spec = load_spec(&a.common.spec)?;
    let ids: Vec<String> = if a.only.is_empty() {
        criteria::ALL.iter().map(|s| s.to_string()).collect()
    } else {
        a.only.iter().map(|s| s.trim().to_uppercase()).collect()
    };
    if let Some(bad) = ids.iter().find(|id| !criteria::ALL.contains(&id.as_str())) {
        return Err(CliError::Config(format!("unknown criterion {bad}")));
    }
    let manifest = RunManifest::new("verify", &spec, json!({ "criteria": ids, "master_seed": criteria::MASTER_SEED }));
    let dir = prepare(&manifest, &a.common.out)?;
    let report = check_assumptions(&spec);
    let ctx = Context::new(spec);
    let mut text = String::from("criterion,passed,seconds,detail\n");
    let mut failed = Vec::new();
    for id in &ids {
        let o = criteria::run_one(&ctx, id);
        println!("{}", o.line());
        text.push_str(&format!(
            "{},{},{:.3},\"{}\"\n",
            o.id,
            o.passed,
            o.elapsed.as_secs_f64(),
            o.detail.replace('"', "'")
        ));
        if !o.passed {
            failed.push(o.id);
        }
    }
    fs::write(dir.join("verify.csv"), text)?;
    println!("{}", dir.display());
    if !report.all_hold() {
        return Err(CliError::Assumption(report.violations.join("; ")));
    }
    if !failed.is_empty() {
        return Err(CliError::Acceptance(format!("failed: {}", failed.join(", "))));
    }
    Ok(())
}
