//! Auxiliary measures `μ_q` on a realization, their images in the plane,
//! local dimensions, Cantor-filter survival and discrete Riesz energies.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cascade::{pow_b, CascadeRealization, FunctionTrace, Word};
use crate::error::{Error, Result};
use crate::estimators::ols;
use crate::rng;
use crate::spectrum;

/// Narrowest bin accepted by [`pushforward`].
pub const MIN_BIN_WIDTH: f64 = 1.0 / (1u64 << 40) as f64;
/// Default number of pairs summed exactly by [`riesz_energy`].
pub const DEFAULT_PAIR_BUDGET: u64 = 20_000_000;

/// `μ_q` on the level-`n` cylinders of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    pub q: f64,
    pub tau: f64,
    pub level: usize,
    pub tail: usize,
    pub seed: u64,
    b: usize,
    masses: Vec<f64>,
    total: f64,
}

impl MeasureTable {
    pub fn b(&self) -> usize {
        self.b
    }

    /// Masses in lexicographic word order.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, word: &Word) -> f64 {
        self.masses[word.index(self.b)]
    }

    /// `Σ mass`, the approximation of `Y_q` at the root.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Masses of the level-`j` cylinders, `j ≤ level`.
    pub fn coarsen(&self, j: usize) -> Vec<f64> {
        let mut m = self.masses.clone();
        for _ in j..self.level {
            m = m.chunks(self.b).map(|c| c.iter().sum()).collect();
        }
        m
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut wtr = crate::cascade::csv_writer(out);
        wtr.write_record(["word", "mass"])?;
        for (k, m) in self.masses.iter().enumerate() {
            let w = Word::from_index(k, self.level, self.b);
            wtr.write_record([w.to_string(), m.to_string()])?;
        }
        wtr.flush()
    }
}

/// Multiplier `1{w≠0}|w|^q l^{-τ}` of every branch of every atom.
fn branch_factors(real: &CascadeRealization, q: f64, tau: f64) -> Vec<Vec<f64>> {
    real.spec()
        .atoms()
        .iter()
        .map(|a| {
            a.w.iter()
                .zip(&a.l)
                .map(|(w, l)| if *w == 0.0 { 0.0 } else { w.abs().powf(q) * l.powf(-tau) })
                .collect()
        })
        .collect()
}

/// `mass(w) = W_{q,w}(∅) · Ŷ_q(w)` with `Ŷ_q(w) = Σ_{|u| = tail} W_{q,u}(w)`.
pub fn build_mu_q(real: &CascadeRealization, q: f64, level: usize, tail: usize) -> Result<MeasureTable> {
    if level + tail > real.depth() {
        return Err(Error::Depth(format!(
            "level {level} + tail {tail} exceeds sampled depth {}",
            real.depth()
        )));
    }
    let point = spectrum::derivatives(real.spec(), q)?;
    if point.gamma <= 0.0 {
        log::warn!("q = {q} lies outside J; μ_q is computed but carries no dimension statement");
    }
    let tau = point.tau;
    let factors = branch_factors(real, q, tau);
    let spec = real.spec();
    let index_of = |key: u64| spec.atom_index(rng::unit(key));

    // Top-down products, keyed by node.
    let b = real.b();
    pow_b(b, level)?;
    let mut nodes = vec![(rng::root_key(real.seed()), 1.0f64)];
    for _ in 0..level {
        nodes = (0..nodes.len() * b)
            .into_par_iter()
            .map(|i| {
                let (key, v) = nodes[i / b];
                let d = i % b;
                (rng::child_key(key, d), v * factors[index_of(key)][d])
            })
            .collect();
    }

    fn tail_sum(key: u64, m: usize, factors: &[Vec<f64>], index_of: &(dyn Fn(u64) -> usize + Sync)) -> f64 {
        if m == 0 {
            return 1.0;
        }
        let f = &factors[index_of(key)];
        f.iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(d, a)| a * tail_sum(rng::child_key(key, d), m - 1, factors, index_of))
            .sum()
    }
    let masses: Vec<f64> = nodes
        .par_iter()
        .map(|&(key, v)| if v == 0.0 { 0.0 } else { v * tail_sum(key, tail, &factors, &index_of) })
        .collect();
    let total = masses.iter().sum();
    Ok(MeasureTable {
        q,
        tau,
        level,
        tail,
        seed: real.seed(),
        b,
        masses,
        total,
    })
}

/// Where a table's mass is deposited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PushTarget {
    /// `[F_L(λw), F_L(λw) + ΔF_L]` on the x-axis.
    Domain,
    /// Cell box: x-interval × range of `F_W` over the cell.
    Graph,
    /// Range of `F_W` over the cell.
    Range,
    /// Graph box projected onto the line at angle `θ` from the y-axis,
    /// coordinate `x sinθ + y cosθ`.
    Projection { theta: f64 },
}

/// Uniform histogram on `[lo, lo + width·len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub width: f64,
    pub mass: Vec<f64>,
}

/// Uniform `nx × ny` histogram, row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub x_lo: f64,
    pub y_lo: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MassMap {
    Line(Grid1D),
    Plane(Grid2D),
}

impl MassMap {
    pub fn total(&self) -> f64 {
        match self {
            MassMap::Line(g) => g.mass.iter().sum(),
            MassMap::Plane(g) => g.mass.iter().sum(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MassMap::Line(_) => 1,
            MassMap::Plane(_) => 2,
        }
    }
}

/// Fractions of `[a, c]` falling in each bin of a uniform grid, as
/// `(first_bin, fractions)`. A degenerate interval goes to the bin of `a`.
fn split_interval(a: f64, c: f64, lo: f64, width: f64, bins: usize) -> (usize, Vec<f64>) {
    let bin = |x: f64| (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
    let (i0, i1) = (bin(a), bin(c));
    if c <= a || i0 == i1 {
        return (i0, vec![1.0]);
    }
    let len = c - a;
    let fr = (i0..=i1)
        .map(|i| {
            let left = if i == i0 { a } else { lo + i as f64 * width };
            let right = if i == i1 { c } else { lo + (i + 1) as f64 * width };
            (right - left).max(0.0) / len
        })
        .collect();
    (i0, fr)
}

fn extent(iv: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (lo, hi) = iv.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, y)| (a.min(x), b.max(y)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn check_width(width: f64) -> Result<()> {
    if !(width >= MIN_BIN_WIDTH) {
        return Err(Error::Binning { width });
    }
    Ok(())
}

/// Deposit each cell's mass on its image, split proportionally across
/// `bins` uniform bins per axis.
pub fn pushforward(table: &MeasureTable, trace: &FunctionTrace, target: PushTarget, bins: usize) -> Result<MassMap> {
    if trace.level() != table.level || trace.b() != table.b {
        return Err(Error::Degenerate(format!(
            "table level {} does not match trace level {}",
            table.level,
            trace.level()
        )));
    }
    let bins = bins.max(1);
    let fl = trace.fl();
    let cells = table.masses.len();
    let x_iv: Vec<(f64, f64)> = (0..cells).map(|k| (fl[k], fl[k + 1])).collect();
    let y_iv: Vec<(f64, f64)> = (0..cells).map(|k| trace.w_range(k)).collect();

    let line = |iv: &[(f64, f64)]| -> Result<MassMap> {
        let (lo, hi) = extent(iv.iter().copied());
        let width = (hi - lo) / bins as f64;
        check_width(width)?;
        let mut mass = vec![0.0; bins];
        for (&(a, c), &m) in iv.iter().zip(&table.masses) {
            if m == 0.0 {
                continue;
            }
            let (i0, fr) = split_interval(a, c, lo, width, bins);
            for (i, f) in fr.iter().enumerate() {
                mass[i0 + i] += m * f;
            }
        }
        Ok(MassMap::Line(Grid1D { lo, width, mass }))
    };

    match target {
        PushTarget::Domain => line(&x_iv),
        PushTarget::Range => line(&y_iv),
        PushTarget::Projection { theta } => {
            let (s, c) = theta.sin_cos();
            let iv: Vec<(f64, f64)> = x_iv
                .iter()
                .zip(&y_iv)
                .map(|(&(x0, x1), &(y0, y1))| {
                    let p = [x0 * s + y0 * c, x0 * s + y1 * c, x1 * s + y0 * c, x1 * s + y1 * c];
                    p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
                })
                .collect();
            line(&iv)
        }
        PushTarget::Graph => {
            let (x_lo, x_hi) = extent(x_iv.iter().copied());
            let (y_lo, y_hi) = extent(y_iv.iter().copied());
            let (dx, dy) = ((x_hi - x_lo) / bins as f64, (y_hi - y_lo) / bins as f64);
            check_width(dx)?;
            check_width(dy)?;
            let mut mass = vec![0.0; bins * bins];
            for ((&(a, c), &(e, g)), &m) in x_iv.iter().zip(&y_iv).zip(&table.masses) {
                if m == 0.0 {
                    continue;
                }
                let (i0, fx) = split_interval(a, c, x_lo, dx, bins);
                let (j0, fy) = split_interval(e, g, y_lo, dy, bins);
                for (i, u) in fx.iter().enumerate() {
                    for (j, v) in fy.iter().enumerate() {
                        mass[(i0 + i) * bins + j0 + j] += m * u * v;
                    }
                }
            }
            Ok(MassMap::Plane(Grid2D {
                x_lo,
                y_lo,
                dx,
                dy,
                nx: bins,
                ny: bins,
                mass,
            }))
        }
    }
}

/// Cumulative mass `μ((-∞, x])` with mass spread uniformly in each bin.
fn cdf_1d(g: &Grid1D, prefix: &[f64], x: f64) -> f64 {
    let t = (x - g.lo) / g.width;
    if t <= 0.0 {
        return 0.0;
    }
    let n = g.mass.len();
    if t >= n as f64 {
        return prefix[n];
    }
    let i = t.floor() as usize;
    prefix[i] + (t - i as f64) * g.mass[i]
}

/// `μ((-∞, x] × (-∞, y])` from a 2-D prefix table.
fn cdf_2d(g: &Grid2D, prefix: &[f64], x: f64, y: f64) -> f64 {
    let tx = ((x - g.x_lo) / g.dx).clamp(0.0, g.nx as f64);
    let ty = ((y - g.y_lo) / g.dy).clamp(0.0, g.ny as f64);
    let at = |i: usize, j: usize| prefix[i * (g.ny + 1) + j];
    let (i, j) = ((tx.floor() as usize).min(g.nx - 1), (ty.floor() as usize).min(g.ny - 1));
    let (fx, fy) = (tx - i as f64, ty - j as f64);
    // Bilinear interpolation of the prefix table.
    at(i, j) * (1.0 - fx) * (1.0 - fy)
        + at(i + 1, j) * fx * (1.0 - fy)
        + at(i, j + 1) * (1.0 - fx) * fy
        + at(i + 1, j + 1) * fx * fy
}

/// Per-point slopes of `log μ(B(x, r))` against `log r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDimension {
    /// `None` for points whose smallest ball is empty.
    pub slopes: Vec<Option<f64>>,
    /// Indices of the excluded points.
    pub excluded: Vec<usize>,
    pub median: f64,
}

/// Least-squares local dimension at each point using balls of the given
/// radii (intervals in 1-D, squares in 2-D).
pub fn local_dimension(map: &MassMap, points: &[Vec<f64>], radii: &[f64]) -> Result<LocalDimension> {
    if radii.len() < 4 {
        return Err(Error::Degenerate(format!("{} radii given, need at least 4", radii.len())));
    }
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let ln_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ball: Box<dyn Fn(&[f64], f64) -> f64 + Sync> = match map {
        MassMap::Line(g) => {
            let mut prefix = vec![0.0];
            for m in &g.mass {
                prefix.push(prefix.last().unwrap() + m);
            }
            let g = g.clone();
            Box::new(move |p: &[f64], r: f64| cdf_1d(&g, &prefix, p[0] + r) - cdf_1d(&g, &prefix, p[0] - r))
        }
        MassMap::Plane(g) => {
            let stride = g.ny + 1;
            let mut prefix = vec![0.0; (g.nx + 1) * stride];
            for i in 0..g.nx {
                for j in 0..g.ny {
                    prefix[(i + 1) * stride + j + 1] = g.mass[i * g.ny + j] + prefix[i * stride + j + 1]
                        + prefix[(i + 1) * stride + j]
                        - prefix[i * stride + j];
                }
            }
            let g = g.clone();
            Box::new(move |p: &[f64], r: f64| {
                let c = |x, y| cdf_2d(&g, &prefix, x, y);
                let (x0, x1, y0, y1) = (p[0] - r, p[0] + r, p[1] - r, p[1] + r);
                c(x1, y1) - c(x0, y1) - c(x1, y0) + c(x0, y0)
            })
        }
    };
    let slopes: Vec<Option<f64>> = points
        .par_iter()
        .map(|p| {
            if ball(p, r_min) <= 0.0 {
                return None;
            }
            let ln_mu: Vec<f64> = radii.iter().map(|&r| ball(p, r).max(f64::MIN_POSITIVE).ln()).collect();
            ols(&ln_r, &ln_mu).map(|f| f.slope)
        })
        .collect();
    let excluded: Vec<usize> = slopes.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i).collect();
    let mut kept: Vec<f64> = slopes.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::EmptyBall {
            point: points.first().cloned().unwrap_or_default(),
        });
    }
    for &i in &excluded {
        log::warn!("point {:?} has an empty ball at radius {r_min}; excluded", points[i]);
    }
    Ok(LocalDimension {
        slopes,
        excluded,
        median: median(&mut kept),
    })
}

/// Median of a non-empty slice (mean of the two middle values when even).
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Points drawn from the mass map: a bin by mass, then uniform inside it.
pub fn sample_points(map: &MassMap, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = match map {
        MassMap::Line(g) => &g.mass,
        MassMap::Plane(g) => &g.mass,
    };
    let pick = WeightedIndex::new(weights).map_err(|e| Error::Degenerate(format!("mass map: {e}")))?;
    Ok((0..count)
        .map(|_| {
            let i = pick.sample(&mut rng);
            match map {
                MassMap::Line(g) => vec![g.lo + (i as f64 + rng.gen::<f64>()) * g.width],
                MassMap::Plane(g) => {
                    let (ix, iy) = (i / g.ny, i % g.ny);
                    vec![
                        g.x_lo + (ix as f64 + rng.gen::<f64>()) * g.dx,
                        g.y_lo + (iy as f64 + rng.gen::<f64>()) * g.dy,
                    ]
                }
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CantorFilterResult {
    pub q: f64,
    pub epsilon: f64,
    pub n: usize,
    /// Level `N` of the words survival is decided on (the trace level).
    pub word_level: usize,
    /// Lexicographic indices of the level-`N` words inside `C_n`.
    pub surviving: Vec<usize>,
    /// `μ_q(C_n)`.
    pub retained_mass: f64,
    /// `μ_q(Ω ∖ C_p)` for `p = 1..=N`.
    pub complement_mass_by_level: Vec<f64>,
    /// `μ_q` of the level-`p` words failing the level-`p` bands alone.
    pub level_failure_mass: Vec<f64>,
}

/// Band survival of every level-`p` word: weight product, length product
/// and normalized oscillations of `v`, `v⁻`, `v⁺` inside their bands.
fn band_survivors(trace: &FunctionTrace, p: usize, xi: f64, xi_tilde: f64, eps: f64) -> Vec<bool> {
    let (wp, lp) = (trace.w_prod(p), trace.l_prod(p));
    let (ow, ol) = (trace.osc_w(p), trace.osc_l(p));
    let pf = p as f64;
    let in_band = |x: f64, centre: f64| x >= (-pf * (centre + eps)).exp() && x <= (-pf * (centre - eps)).exp();
    let osc_ok = |o: f64, u: f64| {
        let r = o / u.abs();
        r >= (-pf * eps).exp() && r <= (pf * eps).exp()
    };
    let own: Vec<bool> = (0..wp.len())
        .map(|k| {
            in_band(wp[k].abs(), xi) && in_band(lp[k], xi_tilde) && osc_ok(ow[k], wp[k]) && osc_ok(ol[k], lp[k])
        })
        .collect();
    (0..own.len())
        .map(|k| own[k] && (k == 0 || own[k - 1]) && (k + 1 == own.len() || own[k + 1]))
        .collect()
}

/// The set `C_n(q, ε)` of points passing the bands of `μ_q` at every level
/// `p` from `n` to the trace level `N`; `ε = ∞` keeps everything.
pub fn cantor_filter(real: &CascadeRealization, trace: &FunctionTrace, q: f64, epsilon: f64, n: usize) -> Result<CantorFilterResult> {
    let top = trace.level();
    if n > top || n == 0 {
        return Err(Error::Depth(format!("filter level {n} not in 1..={top}")));
    }
    let table = build_mu_q(real, q, top, trace.tail())?;
    let point = spectrum::derivatives(real.spec(), q)?;
    let b = trace.b();
    let survivors = |p: usize| -> Vec<bool> {
        if epsilon.is_infinite() {
            vec![true; trace.w_prod(p).len()]
        } else {
            band_survivors(trace, p, point.xi, point.xi_tilde, epsilon)
        }
    };

    let m = table.masses();
    let mut inside = vec![true; m.len()];
    let mut complement_mass_by_level = vec![0.0; top];
    let mut level_failure_mass = vec![0.0; top];
    let mut surviving = Vec::new();
    for p in (1..=top).rev() {
        let alive = survivors(p);
        let stride = b.pow((top - p) as u32);
        for (k, ok) in inside.iter_mut().enumerate() {
            *ok &= alive[k / stride];
        }
        complement_mass_by_level[p - 1] = inside.iter().zip(m).filter(|(ok, _)| !**ok).map(|(_, v)| v).sum();
        level_failure_mass[p - 1] = alive
            .iter()
            .zip(table.coarsen(p))
            .filter(|(ok, _)| !**ok)
            .map(|(_, v)| v)
            .sum();
        if p == n {
            surviving = inside.iter().enumerate().filter(|(_, ok)| **ok).map(|(k, _)| k).collect();
        }
    }
    let retained_mass = surviving.iter().map(|&k| m[k]).sum();
    Ok(CantorFilterResult {
        q,
        epsilon,
        n,
        word_level: top,
        surviving,
        retained_mass,
        complement_mass_by_level,
        level_failure_mass,
    })
}

/// Which kernel an energy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMode {
    /// `max(d^{-γ}, 1)` with `d` the planar distance of graph points.
    Graph,
    /// `max(|ΔF_W|^{-γ}, 1)`.
    Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub gamma: f64,
    pub depth: usize,
    pub value: f64,
    /// Unordered distinct pairs summed (or sampled).
    pub pair_count: u64,
    pub subsampled: bool,
    /// Standard error of the estimate; zero when exact.
    pub std_error: f64,
}

const ENERGY_BLOCK: usize = 256;
const SAMPLE_BLOCK: u64 = 1 << 16;

/// `Σ_{u≠v} K_γ(u, v) m_u m_v + Σ_u m_u²` with cells represented by their
/// left endpoints. Falls back to uniform pair sampling when the number of
/// distinct pairs exceeds `pair_budget`.
pub fn riesz_energy(table: &MeasureTable, trace: &FunctionTrace, gamma: f64, mode: EnergyMode, pair_budget: u64) -> Result<EnergyEstimate> {
    if trace.level() != table.level {
        return Err(Error::Degenerate("table and trace levels differ".into()));
    }
    if gamma <= 0.0 {
        return Err(Error::invariant("gamma", "must be > 0"));
    }
    let m = &table.masses;
    let xs = &trace.fl()[..m.len()];
    let ys = &trace.fw()[..m.len()];
    let kernel = |i: usize, j: usize| -> f64 {
        let dy = ys[i] - ys[j];
        let d = match mode {
            EnergyMode::Graph => (xs[i] - xs[j]).hypot(dy),
            EnergyMode::Range => dy.abs(),
        };
        d.powf(-gamma).max(1.0)
    };
    let diag: f64 = m.iter().map(|v| v * v).sum();
    let n = m.len() as u64;
    let pairs = n * n.saturating_sub(1) / 2;

    if pairs <= pair_budget {
        // Fixed blocks of rows, reduced in block order: thread-count independent.
        let rows: Vec<usize> = (0..m.len()).collect();
        let partial: Vec<f64> = rows
            .par_chunks(ENERGY_BLOCK)
            .map(|block| {
                block
                    .iter()
                    .map(|&i| {
                        if m[i] == 0.0 {
                            return 0.0;
                        }
                        let row: f64 = (i + 1..m.len()).map(|j| kernel(i, j) * m[j]).sum();
                        2.0 * m[i] * row
                    })
                    .sum()
            })
            .collect();
        return Ok(EnergyEstimate {
            gamma,
            depth: table.level,
            value: diag + partial.iter().sum::<f64>(),
            pair_count: pairs,
            subsampled: false,
            std_error: 0.0,
        });
    }

    let blocks = pair_budget.div_ceil(SAMPLE_BLOCK);
    let sums: Vec<(f64, f64, u64)> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut r = ChaCha8Rng::seed_from_u64(rng::split_seed(table.seed ^ gamma.to_bits(), blk));
            let count = SAMPLE_BLOCK.min(pair_budget - blk * SAMPLE_BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let i = r.gen_range(0..m.len());
                let mut j = r.gen_range(0..m.len() - 1);
                if j >= i {
                    j += 1;
                }
                let v = kernel(i, j) * m[i] * m[j];
                s += v;
                s2 += v * v;
            }
            (s, s2, count)
        })
        .collect();
    let (s, s2, k) = sums.iter().fold((0.0, 0.0, 0u64), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let kf = k as f64;
    let mean = s / kf;
    let var = (s2 / kf - mean * mean).max(0.0) * kf / (kf - 1.0).max(1.0);
    let ordered = 2.0 * pairs as f64;
    Ok(EnergyEstimate {
        gamma,
        depth: table.level,
        value: diag + ordered * mean,
        pair_count: k,
        subsampled: true,
        std_error: ordered * (var / kf).sqrt(),
    })
}
