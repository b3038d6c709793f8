//! Exact multifractal functions of an atomic `(W, L)` law.
//!
//! Units: `xi`, `xi_tilde` and `gamma` are in nats per tree level. Dimensions
//! on the coding space divide `gamma` by `ln b`; dimensions on the domain
//! (`tau_star`, the predicted spectra) are used directly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;

/// Bracket expansion limit for the root of `Φ(q, ·) = 1`.
pub const TAU_BRACKET_LIMIT: f64 = 1e3;
/// Root accuracy: `|Φ(q, τ(q)) − 1|` is below this.
pub const TAU_TOL: f64 = 1e-12;

/// `τ(q)`: the unique `t` with `Φ(q, t) = 1`.
pub fn tau(spec: &GeneratorSpec, q: f64) -> Result<f64> {
    // ln Φ(q, ·) is increasing and convex; solve ln Φ = 0.
    let f = |t: f64| spec.ln_moment(q, t);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(0.0);
    }
    if f0 > 0.0 {
        let mut step = 1.0;
        loop {
            lo = -step;
            if f(lo) < 0.0 {
                break;
            }
            hi = lo;
            step *= 2.0;
            if step > TAU_BRACKET_LIMIT * 2.0 {
                return Err(Error::Bracket { q, limit: TAU_BRACKET_LIMIT });
            }
        }
    } else {
        let mut step = 1.0;
        loop {
            hi = step;
            if f(hi) > 0.0 {
                break;
            }
            lo = hi;
            step *= 2.0;
            if step > TAU_BRACKET_LIMIT * 2.0 {
                return Err(Error::Bracket { q, limit: TAU_BRACKET_LIMIT });
            }
        }
    }

    // Safeguarded Newton on the bracket.
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(t);
        if v.abs() <= 1e-14 {
            break;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = ln_moment_dt(spec, q, t);
        let newton = t - v / slope;
        t = if newton > lo && newton < hi && slope > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    Ok(t)
}

/// `∂/∂t ln Φ(q,t)`.
fn ln_moment_dt(spec: &GeneratorSpec, q: f64, t: f64) -> f64 {
    let w = tilted_weights(spec, q, t);
    w.pi.iter().zip(spec.terms()).map(|(p, x)| -p * x.ln_l).sum()
}

/// Normalized term weights `π ∝ p |w|^q l^{-t}` with accurate logs.
struct Tilted {
    pi: Vec<f64>,
    ln_pi: Vec<f64>,
}

fn tilted_weights(spec: &GeneratorSpec, q: f64, t: f64) -> Tilted {
    let a: Vec<f64> = spec
        .terms()
        .iter()
        .map(|x| x.ln_p + q * x.ln_w - t * x.ln_l)
        .collect();
    let (imax, m) = a
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(i, m), (j, v)| if v > m { (j, v) } else { (i, m) });
    let rest: f64 = a
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != imax)
        .map(|(_, v)| (v - m).exp())
        .sum();
    let log_norm = rest.ln_1p();
    let ln_pi: Vec<f64> = a.iter().map(|v| (v - m) - log_norm).collect();
    let pi = ln_pi.iter().map(|v| v.exp()).collect();
    Tilted { pi, ln_pi }
}

/// Every exact quantity attached to one `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub q: f64,
    pub tau: f64,
    /// `−∂Φ/∂q` at `(q, τ(q))`, nats/level.
    pub xi: f64,
    /// `∂Φ/∂t` at `(q, τ(q))`, nats/level, always `> 0`.
    pub xi_tilde: f64,
    pub tau_prime: f64,
    /// `q ξ − τ ξ̃`, nats/level.
    pub gamma: f64,
    /// `q τ'(q) − τ(q) = τ*(τ'(q))`.
    pub tau_star: f64,
    pub gamma_g: f64,
    pub gamma_r: f64,
}

impl SpectrumPoint {
    /// Lower Hausdorff dimension of `μ_q` on the coding space.
    pub fn coding_dimension(&self, b: usize) -> f64 {
        self.gamma / (b as f64).ln()
    }
}

/// Graph and range dimension formulas at exponent `h` with spectrum value `d`.
fn graph_dim(d: f64, h: f64) -> f64 {
    (d / h).min(d + 1.0 - h).max(d)
}

fn range_dim(d: f64, h: f64) -> f64 {
    (d / h).min(1.0)
}

/// `τ(q)` with its analytic derivatives and the predicted dimensions.
pub fn derivatives(spec: &GeneratorSpec, q: f64) -> Result<SpectrumPoint> {
    let t = tau(spec, q)?;
    let w = tilted_weights(spec, q, t);
    let terms = spec.terms();
    let xi: f64 = w.pi.iter().zip(terms).map(|(p, x)| -p * x.ln_w).sum();
    let xi_tilde: f64 = w.pi.iter().zip(terms).map(|(p, x)| -p * x.ln_l).sum();
    // q ξ − τ ξ̃ = Σ π (ln p − ln π): no cancellation at large |q|.
    let gamma: f64 = w
        .pi
        .iter()
        .zip(&w.ln_pi)
        .zip(terms)
        .map(|((p, lp), x)| if *p > 0.0 { p * (x.ln_p - lp) } else { 0.0 })
        .sum();
    let tau_prime = xi / xi_tilde;
    let tau_star = q * tau_prime - t;
    let (gamma_g, gamma_r) = if tau_prime > 0.0 {
        (graph_dim(tau_star, tau_prime), range_dim(tau_star, tau_prime))
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SpectrumPoint {
        q,
        tau: t,
        xi,
        xi_tilde,
        tau_prime,
        gamma,
        tau_star,
        gamma_g,
        gamma_r,
    })
}

/// True when `τ` is affine (all terms share one exponent `ln|w|/ln l`).
pub fn is_monofractal(spec: &GeneratorSpec) -> bool {
    let (lo, hi) = spec.exponent_range();
    (hi - lo).abs() <= 1e-12 * (1.0 + hi.abs())
}

const LEGENDRE_Q_CAP: f64 = 256.0;

/// Legendre transform `τ*(h) = inf_q (q h − τ(q))`.
///
/// Solved through `τ'(q) = h` by bisection (`τ'` is non-increasing).
/// Outside the closure of the range of `τ'` the infimum is `−∞`. Values
/// extremely close to the range boundary are taken at `|q| = 256`.
pub fn tau_star(spec: &GeneratorSpec, h: f64) -> f64 {
    let (h_min, h_max) = spec.exponent_range();
    if is_monofractal(spec) {
        return if (h - h_min).abs() <= 1e-12 * (1.0 + h.abs()) {
            tau(spec, 0.0).map(|t| -t).unwrap_or(f64::NAN)
        } else {
            f64::NEG_INFINITY
        };
    }
    if h < h_min || h > h_max {
        return f64::NEG_INFINITY;
    }
    let tp = |q: f64| derivatives(spec, q).map(|p| p.tau_prime);
    let legendre = |q: f64| tau(spec, q).map(|t| q * h - t).unwrap_or(f64::NAN);

    // Bracket: τ'(lo) ≥ h ≥ τ'(hi).
    let mut reach = 1.0;
    let (mut lo, mut hi) = (-reach, reach);
    loop {
        let (a, c) = match (tp(lo), tp(hi)) {
            (Ok(a), Ok(c)) => (a, c),
            _ => return f64::NAN,
        };
        if a < h {
            if reach >= LEGENDRE_Q_CAP {
                return legendre(lo);
            }
        } else if c > h {
            if reach >= LEGENDRE_Q_CAP {
                return legendre(hi);
            }
        } else {
            break;
        }
        reach *= 2.0;
        lo = -reach;
        hi = reach;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match tp(mid) {
            Ok(v) if v >= h => lo = mid,
            Ok(_) => hi = mid,
            Err(_) => return f64::NAN,
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    legendre(0.5 * (lo + hi))
}

/// Which piece of `J` a parameter falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subinterval {
    /// `γ^G(q) > 1`.
    J1,
    /// `γ^G(q) ≤ 1`, `τ'(q) < 1`.
    J2,
    /// `γ^G(q) ≤ 1`, `τ'(q) ≥ 1`.
    J3,
}

impl Subinterval {
    pub fn classify(p: &SpectrumPoint) -> Self {
        if p.gamma_g > 1.0 {
            Subinterval::J1
        } else if p.tau_prime < 1.0 {
            Subinterval::J2
        } else {
            Subinterval::J3
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Subinterval::J1 => "J1",
            Subinterval::J2 => "J2",
            Subinterval::J3 => "J3",
        }
    }
}

/// Scan settings for locating `J`.
#[derive(Debug, Clone, Copy)]
pub struct JScan {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
    pub tol: f64,
}

impl Default for JScan {
    fn default() -> Self {
        Self {
            q_min: -50.0,
            q_max: 50.0,
            points: 10_000,
            tol: 1e-8,
        }
    }
}

/// `J = {q : q τ'(q) − τ(q) > 0}` with its `J₁/J₂/J₃` labels on the scan grid.
///
/// Endpoints that stay positive up to the scan boundary are reported as
/// `±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalJ {
    pub q_lo: f64,
    pub q_hi: f64,
    pub labels: Vec<(f64, Subinterval)>,
}

impl IntervalJ {
    pub fn contains(&self, q: f64) -> bool {
        q > self.q_lo && q < self.q_hi
    }
}

pub fn interval_j(spec: &GeneratorSpec) -> Result<IntervalJ> {
    interval_j_with(spec, JScan::default())
}

pub fn interval_j_with(spec: &GeneratorSpec, scan: JScan) -> Result<IntervalJ> {
    let n = scan.points.max(2);
    let grid: Vec<f64> = (0..=n)
        .map(|i| scan.q_min + (scan.q_max - scan.q_min) * i as f64 / n as f64)
        .collect();
    let points: Vec<SpectrumPoint> = grid
        .par_iter()
        .map(|&q| derivatives(spec, q))
        .collect::<Result<_>>()?;
    let positive: Vec<bool> = points.iter().map(|p| p.gamma > 0.0).collect();

    // Longest run of positive grid points.
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < positive.len() {
        if positive[i] {
            let start = i;
            while i + 1 < positive.len() && positive[i + 1] {
                i += 1;
            }
            if best.is_none_or(|(s, e)| i - start > e - s) {
                best = Some((start, i));
            }
        }
        i += 1;
    }
    let (s, e) = best.ok_or(Error::EmptyJ)?;
    let gamma = |q: f64| derivatives(spec, q).map(|p| p.gamma);
    let root = |mut neg: f64, mut pos: f64| -> Result<f64> {
        while (pos - neg).abs() > scan.tol {
            let mid = 0.5 * (neg + pos);
            if gamma(mid)? > 0.0 {
                pos = mid;
            } else {
                neg = mid;
            }
        }
        Ok(0.5 * (neg + pos))
    };
    let q_lo = if s == 0 { f64::NEG_INFINITY } else { root(grid[s - 1], grid[s])? };
    let q_hi = if e == grid.len() - 1 { f64::INFINITY } else { root(grid[e + 1], grid[e])? };
    let labels = points[s..=e]
        .iter()
        .map(|p| (p.q, Subinterval::classify(p)))
        .collect();
    Ok(IntervalJ { q_lo, q_hi, labels })
}

/// Predicted graph/range/level-set dimensions at exponent `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedSpectra {
    pub dim_graph: f64,
    pub dim_range: f64,
    /// `τ*(h) − h` when positive, else NaN.
    pub dim_level: f64,
    /// `1 − τ(1)`.
    pub dim_graph_whole: f64,
}

pub fn predicted_spectra(spec: &GeneratorSpec, h: f64) -> Result<PredictedSpectra> {
    let d = tau_star(spec, h);
    let whole = 1.0 - tau(spec, 1.0)?;
    let (dim_graph, dim_range) = if d >= 0.0 && h > 0.0 {
        (graph_dim(d, h), range_dim(d, h))
    } else {
        (f64::NAN, f64::NAN)
    };
    let level = d - h;
    Ok(PredictedSpectra {
        dim_graph,
        dim_range,
        dim_level: if level > 0.0 { level } else { f64::NAN },
        dim_graph_whole: whole,
    })
}

/// General upper bounds for a set `E` of exponent `≥ h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBounds {
    pub graph: f64,
    pub range: f64,
    pub level: f64,
}

pub fn upper_bounds(dim_e: f64, h: f64, gamma_level: f64) -> UpperBounds {
    UpperBounds {
        graph: graph_dim(dim_e, h),
        range: range_dim(dim_e, h),
        level: dim_e - h * gamma_level,
    }
}

/// `SpectrumPoint`s on a grid, computed in parallel.
pub fn spectrum_table(spec: &GeneratorSpec, qs: &[f64]) -> Result<Vec<SpectrumPoint>> {
    qs.par_iter().map(|&q| derivatives(spec, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::presets::{canonical, multinomial};
    use proptest::prelude::*;

    fn closed_form_multinomial(q: f64) -> f64 {
        -(0.25f64.powf(q) + 0.75f64.powf(q)).log2()
    }

    #[test]
    fn tau_examples() {
        let m = multinomial();
        assert!((tau(&m, 2.0).unwrap() - 0.67807).abs() < 1e-5);
        assert!((tau(&m, 2.0).unwrap() - closed_form_multinomial(2.0)).abs() < 1e-12);
        let c = canonical();
        assert!((tau(&c, 1.0).unwrap() + 1.2f64.log2()).abs() < 1e-12);
        assert!((tau(&c, 0.0).unwrap() + 1.0).abs() < 1e-12);
        for q in [-5.0, -1.0, 0.5, 3.0] {
            let t = tau(&c, q).unwrap();
            assert!((c.moment(q, t) - 1.0).abs() <= TAU_TOL);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = multinomial();
        let h = 1e-5;
        let fd = (tau(&m, h).unwrap() - tau(&m, -h).unwrap()) / (2.0 * h);
        let p = derivatives(&m, 0.0).unwrap();
        assert!(((p.tau_prime - fd) / fd).abs() < 1e-6, "{} vs {fd}", p.tau_prime);
        // closed form at q=0: -(1/2)(ln p0 + ln p1)/ln 2
        let want = -0.5 * (0.25f64.ln() + 0.75f64.ln()) / 2f64.ln();
        assert!((p.tau_prime - want).abs() < 1e-10);
    }

    #[test]
    fn canonical_identities_at_one() {
        let c = canonical();
        let p = derivatives(&c, 1.0).unwrap();
        assert!((p.tau_star - (p.tau_prime - p.tau)).abs() < 1e-12);
        assert!((p.tau_star - p.gamma / p.xi_tilde).abs() < 1e-9);
        assert!((p.tau_prime - p.xi / p.xi_tilde).abs() < 1e-10);
        assert!((p.xi_tilde - 2f64.ln()).abs() < 1e-12);
        // γ^G(1) collapses to the whole-graph dimension 1 − τ(1).
        assert!((p.gamma_g - (1.0 - p.tau)).abs() < 1e-12);
        assert_eq!(Subinterval::classify(&p), Subinterval::J1);
    }

    #[test]
    fn xi_tilde_positive() {
        for s in [canonical(), multinomial()] {
            for q in [-10.0, -1.0, 0.0, 2.0, 15.0] {
                assert!(derivatives(&s, q).unwrap().xi_tilde > 0.0);
            }
        }
    }

    #[test]
    fn tau_star_examples() {
        let c = canonical();
        let p0 = derivatives(&c, 0.0).unwrap();
        assert!((tau_star(&c, p0.tau_prime) - 1.0).abs() < 1e-9);
        let p1 = derivatives(&c, 1.0).unwrap();
        assert!((tau_star(&c, p1.tau_prime) - (p1.tau_prime - p1.tau)).abs() < 1e-9);

        // Grid oracle for the multinomial at h = τ'(2).
        let m = multinomial();
        let p2 = derivatives(&m, 2.0).unwrap();
        let h = p2.tau_prime;
        let grid_min = (0..=40_000)
            .map(|i| -20.0 + i as f64 * 1e-3)
            .map(|q| q * h - closed_form_multinomial(q))
            .fold(f64::INFINITY, f64::min);
        let exact = 2.0 * p2.tau_prime - p2.tau;
        assert!((tau_star(&m, h) - exact).abs() < 1e-9);
        assert!((tau_star(&m, h) - grid_min).abs() < 1e-6);
    }

    #[test]
    fn tau_star_outside_range() {
        let c = canonical();
        let (lo, hi) = c.exponent_range();
        assert_eq!(tau_star(&c, lo * 0.9), f64::NEG_INFINITY);
        assert_eq!(tau_star(&c, hi * 1.1), f64::NEG_INFINITY);
    }

    #[test]
    fn interval_j_canonical() {
        let c = canonical();
        let j = interval_j(&c).unwrap();
        assert!(j.contains(1.0));
        assert!(j.q_lo.is_finite() && j.q_lo < 0.0);
        assert_eq!(j.q_hi, f64::INFINITY);
        let p = derivatives(&c, j.q_lo).unwrap();
        assert!(p.tau_star.abs() < 1e-6, "{}", p.tau_star);
        // labels partition J: one label per grid point, all inside J
        assert!(j.labels.iter().all(|(q, _)| j.contains(*q)));
    }

    #[test]
    fn interval_j_multinomial_unbounded() {
        // For a deterministic binomial measure, τ*(τ'(q)) > 0 for every q.
        let m = multinomial();
        let j = interval_j(&m).unwrap();
        assert_eq!((j.q_lo, j.q_hi), (f64::NEG_INFINITY, f64::INFINITY));
        for i in 0..=1000 {
            let q = -50.0 + i as f64 * 0.1;
            assert!(derivatives(&m, q).unwrap().gamma > 0.0);
        }
    }

    #[test]
    fn interval_j_empty() {
        // W = (1.5, -0.5) deterministic: ln|w| ratios give τ* < 0 everywhere? check via error path
        let doc = r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.5],"l":[0.5,0.5],"p":1}]}"#;
        let s = GeneratorSpec::parse(doc).unwrap();
        // Lebesgue: τ(q) = q − 1, q τ' − τ = 1 > 0 everywhere.
        let j = interval_j(&s).unwrap();
        assert!(j.q_lo.is_infinite() && j.q_hi.is_infinite());
        assert!(is_monofractal(&s));
        assert!((tau_star(&s, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(tau_star(&s, 0.9), f64::NEG_INFINITY);
    }

    #[test]
    fn predicted_spectra_examples() {
        let c = canonical();
        let p1 = derivatives(&c, 1.0).unwrap();
        let ps = predicted_spectra(&c, p1.tau_prime).unwrap();
        assert!((ps.dim_graph_whole - 1.26303).abs() < 1e-5);
        assert!((ps.dim_level - 0.26303).abs() < 1e-5);
        assert!((ps.dim_graph - p1.gamma_g).abs() < 1e-9);

        // Conservative multinomial: τ(1) = 0 so τ*(h₁) = h₁ and both graph branches give 1.
        let m = multinomial();
        let q1 = derivatives(&m, 1.0).unwrap();
        assert!(q1.tau.abs() < 1e-12);
        let pm = predicted_spectra(&m, q1.tau_prime).unwrap();
        assert!((pm.dim_graph - 1.0).abs() < 1e-9);
        assert!((pm.dim_range - 1.0).abs() < 1e-9);
        assert!(pm.dim_level.is_nan());
    }

    #[test]
    fn upper_bound_examples() {
        assert_eq!(upper_bounds(1.0, 1.0, 1.0), UpperBounds { graph: 1.0, range: 1.0, level: 0.0 });
        assert_eq!(upper_bounds(0.5, 0.5, 1.0), UpperBounds { graph: 1.0, range: 1.0, level: 0.0 });
        let beta = 0.3;
        assert!((upper_bounds(1.0, beta, 0.0).graph - (2.0 - beta)).abs() < 1e-15);
    }

    #[test]
    fn ledrappier_young_form_on_grid() {
        let c = canonical();
        let j = interval_j(&c).unwrap();
        for i in 0..=80 {
            let q = -2.0 + i as f64 * 0.1;
            if !j.contains(q) {
                continue;
            }
            let p = derivatives(&c, q).unwrap();
            assert!(p.gamma_r > 0.0 && p.gamma_r <= 1.0);
            assert!(p.gamma_g >= p.gamma_r * p.tau_prime.min(1.0) - 1e-12);
            let ly = p.tau_star + p.gamma_r * (1.0 - p.tau_prime).max(0.0);
            assert!((p.gamma_g - ly).abs() < 1e-12, "q={q}");
        }
    }

    fn spec_strategy() -> impl Strategy<Value = GeneratorSpec> {
        prop_oneof![Just(canonical()), Just(multinomial())]
    }

    proptest! {
        #[test]
        fn tau_concave(s in spec_strategy(), q in -8.0..8.0f64, d in 0.01..1.0f64) {
            let second = tau(&s, q + d).unwrap() - 2.0 * tau(&s, q).unwrap() + tau(&s, q - d).unwrap();
            prop_assert!(second <= 1e-9);
        }

        #[test]
        fn legendre_involution(s in spec_strategy(), q in -5.0..5.0f64) {
            let p = derivatives(&s, q).unwrap();
            let ts = tau_star(&s, p.tau_prime);
            prop_assert!((ts - (q * p.tau_prime - p.tau)).abs() <= 1e-8, "q={} {} {}", q, ts, p.tau_star);
        }
    }
}
