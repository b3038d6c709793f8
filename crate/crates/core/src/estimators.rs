//! Empirical scaling estimates from a [`FunctionTrace`]: oscillation
//! `L^q` spectra, their numerical Legendre transform, and box counts.
//!
//! Every estimate is an OLS slope over a window of b-adic levels `j`.

use std::fmt;

use rayon::prelude::*;

use crate::cascade::FunctionTrace;
use crate::error::{Error, Result};
use crate::generator::log_sum_exp;

/// Below this `r²` a fit is flagged but still returned.
pub const LOW_R2: f64 = 0.9;

/// Inclusive range of levels used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub j_min: usize,
    pub j_max: usize,
}

impl Window {
    pub fn new(j_min: usize, j_max: usize) -> Self {
        Self { j_min, j_max }
    }

    /// `j_min = 4`, `j_max = level − 2`, shrunk for shallow traces.
    pub fn default_for(level: usize) -> Self {
        let j_max = level.saturating_sub(2).max(1);
        Self {
            j_min: 4.min(j_max.saturating_sub(2)),
            j_max,
        }
    }

    fn check(&self, level: usize) -> Result<()> {
        if self.j_min >= self.j_max || self.j_max > level {
            return Err(Error::Degenerate(format!(
                "window {}..{} invalid for trace level {level}",
                self.j_min, self.j_max
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.j_min, self.j_max)
    }
}

/// Straight-line least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `ys` on `xs`; `None` with fewer than two
/// distinct abscissae. A flat response has `r² = 1`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-24 * (1.0 + my * my) * n as f64 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some(LineFit { slope, intercept, r2 })
}

/// Log-log fit over a window of levels.
///
/// `stats[i]` is the base-`b` log statistic at `levels[i]`. The regressor is
/// `j` for box counts and `−j` for partition sums, so that the slope is the
/// dimension or the exponent directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub levels: Vec<usize>,
    pub stats: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: Window,
    pub low_r2: bool,
}

fn fit_levels(levels: Vec<usize>, stats: Vec<f64>, sign: f64, window: Window) -> Result<ScalingFit> {
    if levels.len() < 3 {
        return Err(Error::Degenerate(format!(
            "{} usable levels in window {window}, need 3",
            levels.len()
        )));
    }
    let xs: Vec<f64> = levels.iter().map(|&j| sign * j as f64).collect();
    let line = ols(&xs, &stats).expect("three distinct levels");
    Ok(ScalingFit {
        levels,
        stats,
        slope: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        window,
        low_r2: line.r2 < LOW_R2,
    })
}

/// Slope of `log_b N_j` against `j` over `window`; `counts[j] = N_j`.
/// Levels with `N_j = 0` are skipped.
pub fn fit_dimension(counts: &[f64], b: usize, window: Window) -> Result<ScalingFit> {
    let lb = (b as f64).ln();
    let (levels, stats): (Vec<usize>, Vec<f64>) = (window.j_min..=window.j_max)
        .filter(|&j| j < counts.len() && counts[j] > 0.0)
        .map(|j| (j, counts[j].ln() / lb))
        .unzip();
    let fit = fit_levels(levels, stats, 1.0, window)?;
    if fit.low_r2 {
        log::warn!("dimension fit over {window} has r2 = {:.3}", fit.r2);
    }
    Ok(fit)
}

/// `τ̂(q)` with the fit it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LqFit {
    pub q: f64,
    pub fit: ScalingFit,
}

impl LqFit {
    pub fn tau_hat(&self) -> f64 {
        self.fit.slope
    }
}

/// Oscillation partition sums `S_j(q) = Σ osc^q` over cells with positive
/// oscillation, fitted as `log_b S_j ≈ τ̂(q)·(−j)`.
pub fn lq_spectrum(trace: &FunctionTrace, qs: &[f64], window: Window) -> Result<Vec<LqFit>> {
    window.check(trace.level())?;
    let lb = (trace.b() as f64).ln();
    // ln osc of nonzero cells, per level.
    let ln_osc: Vec<Vec<f64>> = (window.j_min..=window.j_max)
        .into_par_iter()
        .map(|j| trace.osc_w(j).iter().filter(|&&o| o > 0.0).map(|o| o.ln()).collect())
        .collect();
    qs.par_iter()
        .map(|&q| {
            let (levels, stats): (Vec<usize>, Vec<f64>) = ln_osc
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_empty())
                .map(|(i, v)| (window.j_min + i, log_sum_exp(v.iter().map(|x| q * x)) / lb))
                .unzip();
            Ok(LqFit {
                q,
                fit: fit_levels(levels, stats, -1.0, window)?,
            })
        })
        .collect()
}

/// Discrete Legendre transform of sampled `(q, τ(q))` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreEstimate {
    /// `(h, inf_q q h − τ(q))` on an even grid spanning the chord slopes.
    pub points: Vec<(f64, f64)>,
    /// Fewer than five `q` values were supplied.
    pub low_confidence: bool,
}

/// `inf_q (q h − τ(q))` over the supplied samples.
pub fn legendre_at(samples: &[(f64, f64)], h: f64) -> f64 {
    samples
        .iter()
        .map(|(q, t)| q * h - t)
        .fold(f64::INFINITY, f64::min)
}

pub fn legendre_numeric(samples: &[(f64, f64)], h_points: usize) -> LegendreEstimate {
    let low_confidence = samples.len() < 5;
    if samples.is_empty() {
        return LegendreEstimate {
            points: Vec::new(),
            low_confidence,
        };
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let chords: Vec<f64> = sorted
        .windows(2)
        .filter(|p| p[1].0 > p[0].0)
        .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
        .collect();
    let (h_lo, h_hi) = if chords.is_empty() {
        (0.0, 0.0)
    } else {
        chords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)))
    };
    let n = if h_hi - h_lo > 1e-12 * (1.0 + h_hi.abs()) { h_points.max(2) } else { 1 };
    let points = (0..n)
        .map(|i| {
            let h = if n == 1 { h_lo } else { h_lo + (h_hi - h_lo) * i as f64 / (n - 1) as f64 };
            (h, legendre_at(&sorted, h))
        })
        .collect();
    LegendreEstimate { points, low_confidence }
}

/// Set whose box counts are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxTarget {
    /// Graph of `F` in the plane.
    Graph,
    /// Range `F([0, F_L(1)])` on the y-axis.
    Range,
    /// Orthogonal projection of the graph onto the line at angle `θ` from
    /// the y-axis.
    Projection { theta: f64 },
    /// Points of the graph whose projection in direction `θ` equals `y`,
    /// counted by x-columns.
    LevelSet { y: f64, theta: f64 },
}

impl BoxTarget {
    pub fn name(&self) -> &'static str {
        match self {
            BoxTarget::Graph => "graph",
            BoxTarget::Range => "range",
            BoxTarget::Projection { .. } => "projection",
            BoxTarget::LevelSet { .. } => "levelset",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxCountResult {
    pub target: BoxTarget,
    /// `counts[j] = N_j` for `j = 0..=level`.
    pub counts: Vec<u64>,
    pub fit: ScalingFit,
}

/// Box counts at every level of the trace with box side `b^{-j}·F_L(1)`,
/// fitted over `window`.
pub fn box_count(trace: &FunctionTrace, target: BoxTarget, window: Window) -> Result<BoxCountResult> {
    window.check(trace.level())?;
    let counts = box_counts(trace, target)?;
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fit = fit_dimension(&as_f, trace.b(), window)?;
    Ok(BoxCountResult { target, counts, fit })
}

/// `N_j` for `j = 0..=level`.
pub fn box_counts(trace: &FunctionTrace, target: BoxTarget) -> Result<Vec<u64>> {
    let levels: Vec<usize> = (0..=trace.level()).collect();
    match target {
        BoxTarget::Graph => Ok(levels.par_iter().map(|&j| graph_count(trace, j)).collect()),
        BoxTarget::Range => {
            let intervals = cell_intervals(trace, |_, _, lo, hi| (lo, hi));
            Ok(levels.par_iter().map(|&j| covered_bins(&intervals, side(trace, j))).collect())
        }
        BoxTarget::Projection { theta } => {
            let (s, c) = theta.sin_cos();
            let intervals = cell_intervals(trace, |x0, x1, lo, hi| {
                let corners = [x0 * s + lo * c, x0 * s + hi * c, x1 * s + lo * c, x1 * s + hi * c];
                corners
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
            });
            Ok(levels.par_iter().map(|&j| covered_bins(&intervals, side(trace, j))).collect())
        }
        BoxTarget::LevelSet { y, theta } => {
            let xs = level_crossings(trace, y, theta)?;
            Ok(levels
                .par_iter()
                .map(|&j| {
                    let cols = trace.b().pow(j as u32);
                    let s = side(trace, j);
                    let mut last = None;
                    let mut n = 0u64;
                    for &x in &xs {
                        let c = ((x / s) as usize).min(cols - 1);
                        if last != Some(c) {
                            n += 1;
                            last = Some(c);
                        }
                    }
                    n
                })
                .collect())
        }
    }
}

fn side(trace: &FunctionTrace, j: usize) -> f64 {
    trace.domain_length() * (trace.b() as f64).powi(-(j as i32))
}

/// `Σ_col (⌈osc/s⌉ + 1)` over x-columns of width `s`, each column's
/// y-extent gathered from the finest cells overlapping it.
fn graph_count(trace: &FunctionTrace, j: usize) -> u64 {
    let cols = trace.b().pow(j as u32);
    let s = side(trace, j);
    let mut lo = vec![f64::INFINITY; cols];
    let mut hi = vec![f64::NEG_INFINITY; cols];
    let fl = trace.fl();
    for k in 0..fl.len() - 1 {
        let (a, c) = trace.w_range(k);
        let first = ((fl[k] / s) as usize).min(cols - 1);
        let last = ((fl[k + 1] / s) as usize).min(cols - 1);
        // A cell ending exactly on a column edge does not enter the next column.
        let last = if last > first && fl[k + 1] <= last as f64 * s { last - 1 } else { last };
        for col in first..=last {
            lo[col] = lo[col].min(a);
            hi[col] = hi[col].max(c);
        }
    }
    lo.iter()
        .zip(&hi)
        .filter(|(a, _)| a.is_finite())
        .map(|(a, c)| ((c - a) / s).ceil() as u64 + 1)
        .sum()
}

/// Value interval of every finest cell, sorted and merged.
fn cell_intervals<F>(trace: &FunctionTrace, map: F) -> Vec<(f64, f64)>
where
    F: Fn(f64, f64, f64, f64) -> (f64, f64),
{
    let fl = trace.fl();
    let mut iv: Vec<(f64, f64)> = (0..fl.len() - 1)
        .map(|k| {
            let (lo, hi) = trace.w_range(k);
            map(fl[k], fl[k + 1], lo, hi)
        })
        .collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, c) in iv {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(c),
            _ => merged.push((a, c)),
        }
    }
    merged
}

/// Number of bins `[i s, (i+1) s)` meeting a sorted disjoint interval union.
fn covered_bins(intervals: &[(f64, f64)], s: f64) -> u64 {
    let mut n = 0u64;
    let mut last: Option<i64> = None;
    for &(a, c) in intervals {
        let mut first = (a / s).floor() as i64;
        let end = (c / s).floor() as i64;
        if let Some(l) = last {
            first = first.max(l + 1);
        }
        if end >= first {
            n += (end - first + 1) as u64;
            last = Some(end);
        }
    }
    n
}

/// Sorted x-positions where `x sinθ + F(x) cosθ = y`, by linear
/// interpolation inside each finest cell.
pub fn level_crossings(trace: &FunctionTrace, y: f64, theta: f64) -> Result<Vec<f64>> {
    let (s, c) = theta.sin_cos();
    let fl = trace.fl();
    let g: Vec<f64> = fl.iter().zip(trace.fw()).map(|(x, w)| x * s + w * c).collect();
    let (lo, hi) = g
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(lo..=hi).contains(&y) {
        return Err(Error::OutOfRange { y, lo, hi });
    }
    let mut xs = Vec::new();
    for k in 0..g.len() - 1 {
        let (a, d) = (g[k] - y, g[k + 1] - y);
        if a == 0.0 {
            xs.push(fl[k]);
        } else if a * d < 0.0 {
            let t = a / (a - d);
            xs.push(fl[k] + t * (fl[k + 1] - fl[k]));
        }
    }
    if g[g.len() - 1] == y {
        xs.push(fl[g.len() - 1]);
    }
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::CascadeRealization;
    use crate::generator::{presets::canonical, presets::multinomial, GeneratorSpec};
    use crate::spectrum;
    use proptest::prelude::*;

    fn linear_trace(level: usize) -> FunctionTrace {
        let n = 1usize << level;
        let x: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        FunctionTrace::from_grid(2, x.clone(), x).unwrap()
    }

    #[test]
    fn ols_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = ols(&xs, &ys).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn fit_dimension_examples() {
        let exact: Vec<f64> = (0..12).map(|j| 2f64.powi(j)).collect();
        let f = fit_dimension(&exact, 2, Window::new(2, 10)).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);

        let flat = vec![7.0; 12];
        let f = fit_dimension(&flat, 2, Window::new(2, 10)).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(!f.low_r2);

        let synth: Vec<f64> = (0..15).map(|j| 2f64.powf(1.263 * j as f64).round()).collect();
        let f = fit_dimension(&synth, 2, Window::new(4, 14)).unwrap();
        assert!((f.slope - 1.263).abs() < 0.01);

        let sparse = vec![0.0, 0.0, 0.0, 4.0, 8.0, 0.0];
        assert!(matches!(fit_dimension(&sparse, 2, Window::new(0, 5)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn lq_of_identity() {
        let t = linear_trace(10);
        let fits = lq_spectrum(&t, &[-1.0, 0.0, 1.0, 2.5], Window::new(2, 9)).unwrap();
        for f in fits {
            assert!((f.tau_hat() - (f.q - 1.0)).abs() < 1e-9, "q={} got {}", f.q, f.tau_hat());
        }
    }

    #[test]
    fn lq_at_zero_counts_cells() {
        let r = CascadeRealization::sample(&canonical(), 3, 14).unwrap();
        let t = r.build_trace(10, 4).unwrap();
        let f = &lq_spectrum(&t, &[0.0], Window::new(3, 9)).unwrap()[0];
        assert!((f.tau_hat() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn lq_degenerate_window() {
        let t = linear_trace(4);
        assert!(lq_spectrum(&t, &[1.0], Window::new(3, 3)).is_err());
        assert!(lq_spectrum(&t, &[1.0], Window::new(1, 6)).is_err());
    }

    #[test]
    fn legendre_of_exact_tau() {
        let m = multinomial();
        let samples: Vec<(f64, f64)> = (0..=8000)
            .map(|i| -4.0 + i as f64 * 1e-3)
            .map(|q| (q, spectrum::tau(&m, q).unwrap()))
            .collect();
        let est = legendre_numeric(&samples, 51);
        assert!(!est.low_confidence);
        let hmid = spectrum::derivatives(&m, 0.5).unwrap().tau_prime;
        let d = legendre_at(&samples, hmid);
        assert!((d - spectrum::tau_star(&m, hmid)).abs() < 1e-3);
        for (h, d) in est.points.iter().skip(5).take(40) {
            assert!((d - spectrum::tau_star(&m, *h)).abs() < 1e-3, "h={h}");
        }
    }

    #[test]
    fn legendre_of_affine() {
        let samples: Vec<(f64, f64)> = (-20..=20).map(|i| i as f64 * 0.1).map(|q| (q, q - 1.0)).collect();
        let est = legendre_numeric(&samples, 11);
        assert_eq!(est.points.len(), 1);
        assert!((est.points[0].0 - 1.0).abs() < 1e-12 && (est.points[0].1 - 1.0).abs() < 1e-12);
        assert!((legendre_at(&samples, 1.5) - 0.0).abs() < 1e-12);
        assert!((legendre_at(&samples, 1.2) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn legendre_single_point() {
        let est = legendre_numeric(&[(1.0, 0.3)], 11);
        assert!(est.low_confidence);
        assert_eq!(est.points.len(), 1);
    }

    #[test]
    fn identity_graph_dimension_one() {
        let t = linear_trace(14);
        let r = box_count(&t, BoxTarget::Graph, Window::new(4, 12)).unwrap();
        assert!((r.fit.slope - 1.0).abs() < 0.02);
    }

    #[test]
    fn range_never_exceeds_graph() {
        let r = CascadeRealization::sample(&canonical(), 5, 16).unwrap();
        let t = r.build_trace(12, 4).unwrap();
        let g = box_counts(&t, BoxTarget::Graph).unwrap();
        let y = box_counts(&t, BoxTarget::Range).unwrap();
        for j in 0..=12 {
            assert!(y[j] <= g[j], "level {j}: {} > {}", y[j], g[j]);
        }
        let p = box_counts(&t, BoxTarget::Projection { theta: 0.0 }).unwrap();
        assert_eq!(p, y);
    }

    #[test]
    fn levelset_bounded_by_columns() {
        let r = CascadeRealization::sample(&canonical(), 9, 16).unwrap();
        let t = r.build_trace(12, 4).unwrap();
        let mid = 0.5 * t.fw()[t.fw().len() - 1];
        for theta in [-0.5f64, 0.0, 0.3] {
            let y = mid * theta.cos() + 0.5 * theta.sin();
            let c = box_counts(&t, BoxTarget::LevelSet { y, theta }).unwrap();
            for (j, n) in c.iter().enumerate() {
                assert!(*n <= 1u64 << j);
                assert!(j == 0 || *n >= c[j - 1]);
            }
        }
        assert!(matches!(
            box_counts(&t, BoxTarget::LevelSet { y: 1e6, theta: 0.0 }),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn increasing_function_levelsets_are_points() {
        let spec = GeneratorSpec::parse(
            r#"{"b":2,"label":"pos","atoms":[{"w":[0.3,0.7],"l":[0.5,0.5],"p":0.5},{"w":[0.7,0.3],"l":[0.5,0.5],"p":0.5}]}"#,
        )
        .unwrap();
        let r = CascadeRealization::sample(&spec, 2, 16).unwrap();
        let t = r.build_trace(14, 2).unwrap();
        for y in [0.1, 0.37, 0.8] {
            let res = box_count(&t, BoxTarget::LevelSet { y, theta: 0.0 }, Window::new(4, 12)).unwrap();
            assert!(res.fit.slope <= 0.05, "y={y} slope {}", res.fit.slope);
        }
    }

    proptest! {
        #[test]
        fn covered_bins_counts_union(a in 0.0..5.0f64, len in 0.0..3.0f64, s in 0.1..1.0f64) {
            let direct = ((a + len) / s).floor() as i64 - (a / s).floor() as i64 + 1;
            prop_assert_eq!(covered_bins(&[(a, a + len)], s), direct as u64);
            // splitting an interval does not change its cover
            let mid = a + len / 2.0;
            prop_assert_eq!(covered_bins(&[(a, mid), (mid, a + len)], s), direct as u64);
        }

        #[test]
        fn concave_synthetic_fit(c in 0.2..0.8f64) {
            // Partition sums of a binomial cell measure give a concave τ̂.
            let level = 10;
            let mut cells = vec![1.0f64];
            for _ in 0..level {
                cells = cells.iter().flat_map(|m| [m * c, m * (1.0 - c)]).collect();
            }
            let mut fw = vec![0.0];
            for m in &cells {
                fw.push(fw.last().unwrap() + m);
            }
            let n = cells.len();
            let x: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
            let t = FunctionTrace::from_grid(2, fw, x).unwrap();
            let qs: Vec<f64> = (0..9).map(|i| -1.0 + 0.5 * i as f64).collect();
            let fits = lq_spectrum(&t, &qs, Window::new(2, 9)).unwrap();
            for w in fits.windows(3) {
                let second = w[2].tau_hat() - 2.0 * w[1].tau_hat() + w[0].tau_hat();
                prop_assert!(second <= 0.05);
            }
        }
    }
}
