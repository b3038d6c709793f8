//! Weight trees, the limit functions `F_W`, `F_L` on b-adic grids, and the
//! composed graph of `F = F_W ∘ F_L⁻¹`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{Atom, GeneratorSpec};
use crate::rng;

/// Leaves allowed in a realization: `depth · log2(b) ≤ 34`.
pub const MAX_LEAF_BITS: f64 = 34.0;

/// Default Z-tail depth.
pub const DEFAULT_TAIL: usize = 6;

/// A finite word over `{0, …, b-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    digits: Vec<u8>,
}

impl Word {
    pub fn new(digits: Vec<u8>) -> Self {
        Self { digits }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The level-`len` word whose lexicographic rank is `index`.
    pub fn from_index(mut index: usize, len: usize, b: usize) -> Self {
        let mut digits = vec![0u8; len];
        for d in digits.iter_mut().rev() {
            *d = (index % b) as u8;
            index /= b;
        }
        Self { digits }
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Lexicographic rank among words of the same length.
    pub fn index(&self, b: usize) -> usize {
        self.digits.iter().fold(0, |acc, &d| acc * b + d as usize)
    }

    /// `λ(w) = Σ_k w_k b^{-k}`.
    pub fn lambda(&self, b: usize) -> f64 {
        let inv = 1.0 / b as f64;
        self.digits
            .iter()
            .rev()
            .fold(0.0, |acc, &d| (acc + d as f64) * inv)
    }

    pub fn prefix(&self, k: usize) -> Word {
        Word::new(self.digits[..k].to_vec())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut digits = self.digits.clone();
        digits.extend_from_slice(&other.digits);
        Word::new(digits)
    }

    /// `w⁻`: the same-length word immediately to the left, if `λ(w) ≠ 0`.
    pub fn left_neighbor(&self, b: usize) -> Option<Word> {
        let k = self.index(b);
        (k > 0).then(|| Word::from_index(k - 1, self.len(), b))
    }

    /// `w⁺`: the same-length word immediately to the right, if any.
    pub fn right_neighbor(&self, b: usize) -> Option<Word> {
        let k = self.index(b);
        let count = b.pow(self.len() as u32);
        (k + 1 < count).then(|| Word::from_index(k + 1, self.len(), b))
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "-");
        }
        for d in &self.digits {
            if *d < 10 {
                write!(f, "{d}")?;
            } else {
                write!(f, "[{d}]")?;
            }
        }
        Ok(())
    }
}

/// `b^n` with an overflow guard.
pub(crate) fn pow_b(b: usize, n: usize) -> Result<usize> {
    b.checked_pow(n as u32)
        .ok_or_else(|| Error::Capacity(format!("{b}^{n} overflows")))
}

/// A weight tree sampled to a fixed depth.
///
/// Nodes are never stored: the atom at a word is a pure function of
/// `(seed, word)` through the counter-based key.
#[derive(Debug, Clone)]
pub struct CascadeRealization {
    spec: GeneratorSpec,
    seed: u64,
    depth: usize,
}

impl CascadeRealization {
    pub fn sample(spec: &GeneratorSpec, seed: u64, depth: usize) -> Result<Self> {
        let bits = depth as f64 * (spec.b() as f64).log2();
        if bits > MAX_LEAF_BITS {
            return Err(Error::Capacity(format!(
                "depth {depth} with b={} needs 2^{bits:.1} leaves (cap 2^{MAX_LEAF_BITS})",
                spec.b()
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            seed,
            depth,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn b(&self) -> usize {
        self.spec.b()
    }

    #[inline]
    pub(crate) fn atom_at_key(&self, key: u64) -> &Atom {
        self.spec.atom_for(rng::unit(key))
    }

    /// Atom index drawn at `word`; only nodes with `|word| < depth` exist.
    pub fn node_index(&self, word: &Word) -> Result<usize> {
        if word.len() >= self.depth {
            return Err(Error::Depth(format!(
                "node at level {} requested, realization depth {}",
                word.len(),
                self.depth
            )));
        }
        Ok(self
            .spec
            .atom_index(rng::unit(rng::word_key(self.seed, word.digits()))))
    }

    /// `(W(word), L(word))` vectors.
    pub fn node(&self, word: &Word) -> Result<&Atom> {
        Ok(&self.spec.atoms()[self.node_index(word)?])
    }

    /// Atom indices of every node at `level`, in lexicographic order.
    pub fn level_nodes(&self, level: usize) -> Result<Vec<usize>> {
        if level >= self.depth {
            return Err(Error::Depth(format!("level {level} >= depth {}", self.depth)));
        }
        let keys = self.level_keys(level)?;
        Ok(keys
            .par_iter()
            .map(|&k| self.spec.atom_index(rng::unit(k)))
            .collect())
    }

    /// Node keys of every word at `level`.
    pub(crate) fn level_keys(&self, level: usize) -> Result<Vec<u64>> {
        let b = self.b();
        pow_b(b, level)?;
        let mut keys = vec![rng::root_key(self.seed)];
        for _ in 0..level {
            keys = (0..keys.len() * b)
                .into_par_iter()
                .map(|i| rng::child_key(keys[i / b], i % b))
                .collect();
        }
        Ok(keys)
    }

    /// Top-down products along every path: for each level `j ≤ level`, the
    /// node keys and the carried value `T` of each word of length `j`.
    pub(crate) fn descend<T, F>(&self, level: usize, root: T, step: F) -> Result<Vec<Vec<(u64, T)>>>
    where
        T: Copy + Send + Sync,
        F: Fn(&T, &Atom, usize) -> T + Sync,
    {
        let b = self.b();
        pow_b(b, level)?;
        let mut levels = vec![vec![(rng::root_key(self.seed), root)]];
        for _ in 0..level {
            let prev = levels.last().unwrap();
            let next: Vec<(u64, T)> = (0..prev.len() * b)
                .into_par_iter()
                .map(|i| {
                    let (key, val) = &prev[i / b];
                    let atom = self.atom_at_key(*key);
                    (rng::child_key(*key, i % b), step(val, atom, i % b))
                })
                .collect();
            levels.push(next);
        }
        Ok(levels)
    }

    /// `(W_u(prefix), L_u(prefix))` as telescoping products.
    pub fn weight_product(&self, prefix: &Word, u: &Word) -> Result<(f64, f64)> {
        if prefix.len() + u.len() > self.depth {
            return Err(Error::Depth(format!(
                "|prefix|+|u| = {} exceeds depth {}",
                prefix.len() + u.len(),
                self.depth
            )));
        }
        let mut key = rng::word_key(self.seed, prefix.digits());
        let (mut w, mut l) = (1.0, 1.0);
        for &d in u.digits() {
            let atom = self.atom_at_key(key);
            w *= atom.w[d as usize];
            l *= atom.l[d as usize];
            key = rng::child_key(key, d as usize);
        }
        Ok((w, l))
    }

    /// Sample `F_W` and `F_L` at level-`level` b-adic points using a
    /// Z-tail of depth `tail` below each cell.
    pub fn build_trace(&self, level: usize, tail: usize) -> Result<FunctionTrace> {
        if level + tail > self.depth {
            return Err(Error::Depth(format!(
                "level {level} + tail {tail} exceeds sampled depth {}",
                self.depth
            )));
        }
        let b = self.b();
        let levels = self.descend(level, (1.0f64, 1.0f64), |&(w, l), atom, d| {
            (w * atom.w[d], l * atom.l[d])
        })?;
        let finest = levels.last().unwrap();
        let summaries: Vec<TailSummary> = finest
            .par_iter()
            .map(|(key, _)| self.tail_summary(*key, tail))
            .collect();

        let n_cells = finest.len();
        let mut fw = Vec::with_capacity(n_cells + 1);
        let mut fl = Vec::with_capacity(n_cells + 1);
        let mut w_lo = Vec::with_capacity(n_cells);
        let mut w_hi = Vec::with_capacity(n_cells);
        let (mut acc_w, mut acc_l) = (0.0f64, 0.0f64);
        for ((_, (wp, lp)), s) in finest.iter().zip(&summaries) {
            fw.push(acc_w);
            fl.push(acc_l);
            let (a, c) = scaled_range(*wp, s.w_min, s.w_max);
            w_lo.push(acc_w + a);
            w_hi.push(acc_w + c);
            acc_w += wp * s.w_z;
            acc_l += lp * s.l_z;
        }
        fw.push(acc_w);
        fl.push(acc_l);

        // L-ranges: F_L is increasing, so the cell range is its endpoints.
        let l_lo: Vec<f64> = fl[..n_cells].to_vec();
        let l_hi: Vec<f64> = fl[1..].to_vec();

        let w_prod: Vec<Vec<f64>> = levels.iter().map(|lv| lv.iter().map(|(_, (w, _))| *w).collect()).collect();
        let l_prod: Vec<Vec<f64>> = levels.iter().map(|lv| lv.iter().map(|(_, (_, l))| *l).collect()).collect();

        Ok(FunctionTrace::assemble(b, level, tail, fw, fl, w_lo, w_hi, l_lo, l_hi, w_prod, l_prod))
    }

    fn tail_summary(&self, key: u64, m: usize) -> TailSummary {
        if m == 0 {
            return TailSummary::UNIT;
        }
        let atom = self.atom_at_key(key);
        let mut s = TailSummary::ZERO;
        for j in 0..self.b() {
            let c = self.tail_summary(rng::child_key(key, j), m - 1);
            let w = atom.w[j];
            let (a, d) = scaled_range(w, c.w_min, c.w_max);
            s.w_min = s.w_min.min(s.w_z + a);
            s.w_max = s.w_max.max(s.w_z + d);
            s.w_z += w * c.w_z;
            let l = atom.l[j];
            s.l_z += l * c.l_z;
        }
        s
    }
}

/// Normalized sub-cascade on `[0,1]`: endpoint value `z` and the extremes
/// over its finest sub-endpoints (both always bracket 0 and `z`).
#[derive(Debug, Clone, Copy)]
struct TailSummary {
    w_z: f64,
    w_min: f64,
    w_max: f64,
    l_z: f64,
}

impl TailSummary {
    const UNIT: Self = Self {
        w_z: 1.0,
        w_min: 0.0,
        w_max: 1.0,
        l_z: 1.0,
    };
    const ZERO: Self = Self {
        w_z: 0.0,
        w_min: 0.0,
        w_max: 0.0,
        l_z: 0.0,
    };
}

#[inline]
fn scaled_range(w: f64, lo: f64, hi: f64) -> (f64, f64) {
    if w >= 0.0 {
        (w * lo, w * hi)
    } else {
        (w * hi, w * lo)
    }
}

/// Values of `F_W`, `F_L` at the `b^n + 1` level-`n` points plus per-cell
/// oscillation tables for every level `j ≤ n`.
///
/// Oscillations are taken over the finest stored sub-endpoints (level
/// `n + tail`), so they under-estimate the true supremum by at most the
/// variation inside one finest cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTrace {
    b: usize,
    level: usize,
    tail: usize,
    fw: Vec<f64>,
    fl: Vec<f64>,
    w_lo: Vec<f64>,
    w_hi: Vec<f64>,
    osc_w: Vec<Vec<f64>>,
    osc_l: Vec<Vec<f64>>,
    w_prod: Vec<Vec<f64>>,
    l_prod: Vec<Vec<f64>>,
}

impl FunctionTrace {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        b: usize,
        level: usize,
        tail: usize,
        fw: Vec<f64>,
        fl: Vec<f64>,
        w_lo: Vec<f64>,
        w_hi: Vec<f64>,
        l_lo: Vec<f64>,
        l_hi: Vec<f64>,
        w_prod: Vec<Vec<f64>>,
        l_prod: Vec<Vec<f64>>,
    ) -> Self {
        let osc_w = coarsen_ranges(b, level, w_lo.clone(), w_hi.clone());
        let osc_l = coarsen_ranges(b, level, l_lo, l_hi);
        Self {
            b,
            level,
            tail,
            fw,
            fl,
            w_lo,
            w_hi,
            osc_w,
            osc_l,
            w_prod,
            l_prod,
        }
    }

    /// Trace of a function known only on a b-adic grid and taken to be
    /// linear inside each finest cell. `fw`, `fl` must have `b^n + 1`
    /// entries. Weight products are replaced by the cell increments.
    pub fn from_grid(b: usize, fw: Vec<f64>, fl: Vec<f64>) -> Result<Self> {
        if fw.len() != fl.len() || fw.len() < 2 {
            return Err(Error::Degenerate("grids must have equal length >= 2".into()));
        }
        let cells = fw.len() - 1;
        let mut level = 0;
        let mut c = 1usize;
        while c < cells {
            c *= b;
            level += 1;
        }
        if c != cells {
            return Err(Error::Degenerate(format!("{cells} cells is not a power of {b}")));
        }
        let w_lo: Vec<f64> = fw.windows(2).map(|p| p[0].min(p[1])).collect();
        let w_hi: Vec<f64> = fw.windows(2).map(|p| p[0].max(p[1])).collect();
        let l_lo: Vec<f64> = fl.windows(2).map(|p| p[0].min(p[1])).collect();
        let l_hi: Vec<f64> = fl.windows(2).map(|p| p[0].max(p[1])).collect();
        let incr = |f: &[f64], j: usize| -> Vec<f64> {
            let step = b.pow((level - j) as u32);
            (0..b.pow(j as u32)).map(|k| f[(k + 1) * step] - f[k * step]).collect()
        };
        let w_prod = (0..=level).map(|j| incr(&fw, j)).collect();
        let l_prod = (0..=level).map(|j| incr(&fl, j)).collect();
        Ok(Self::assemble(b, level, 0, fw, fl, w_lo, w_hi, l_lo, l_hi, w_prod, l_prod))
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn tail(&self) -> usize {
        self.tail
    }

    /// `F_W` at `k·b^{-n}`, `k = 0..=b^n`.
    pub fn fw(&self) -> &[f64] {
        &self.fw
    }

    /// `F_L` at `k·b^{-n}`, `k = 0..=b^n`.
    pub fn fl(&self) -> &[f64] {
        &self.fl
    }

    /// Range `[lo, hi]` of `F_W` over each level-`n` cell.
    pub fn w_range(&self, k: usize) -> (f64, f64) {
        (self.w_lo[k], self.w_hi[k])
    }

    /// `Osc_{F_W}(I_w)` for every word of length `j`.
    pub fn osc_w(&self, j: usize) -> &[f64] {
        &self.osc_w[j]
    }

    /// `Osc_{F_L}(I_w)` for every word of length `j`.
    pub fn osc_l(&self, j: usize) -> &[f64] {
        &self.osc_l[j]
    }

    /// `W_w(∅)` for every word of length `j`.
    pub fn w_prod(&self, j: usize) -> &[f64] {
        &self.w_prod[j]
    }

    /// `L_w(∅)` for every word of length `j`.
    pub fn l_prod(&self, j: usize) -> &[f64] {
        &self.l_prod[j]
    }

    /// `F_W` at the left endpoint of cell `k` of level `j`.
    pub fn fw_at(&self, j: usize, k: usize) -> f64 {
        self.fw[k * self.b.pow((self.level - j) as u32)]
    }

    pub fn fl_at(&self, j: usize, k: usize) -> f64 {
        self.fl[k * self.b.pow((self.level - j) as u32)]
    }

    /// `F_L(1)`: the length of the domain of `F`.
    pub fn domain_length(&self) -> f64 {
        *self.fl.last().unwrap()
    }

    /// Planar samples `(F_L(t_k), F_W(t_k))` of the graph of `F_W ∘ F_L⁻¹`.
    pub fn compose(&self) -> Result<Vec<(f64, f64)>> {
        if let Some(i) = self.fl.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::NonMonotone { index: i + 1 });
        }
        Ok(self.fl.iter().copied().zip(self.fw.iter().copied()).collect())
    }

    /// CSV export: one row per cell of each level plus the terminal point
    /// `x = 1` (with zero oscillation) at the finest level.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut wtr = csv_writer(out);
        wtr.write_record(["level", "k", "x", "FW", "FL", "oscW", "oscL"])?;
        for j in 0..=self.level {
            let cells = self.b.pow(j as u32);
            let scale = (self.b as f64).powi(-(j as i32));
            for k in 0..cells {
                wtr.write_record([
                    j.to_string(),
                    k.to_string(),
                    (k as f64 * scale).to_string(),
                    self.fw_at(j, k).to_string(),
                    self.fl_at(j, k).to_string(),
                    self.osc_w[j][k].to_string(),
                    self.osc_l[j][k].to_string(),
                ])?;
            }
        }
        let end = self.fw.len() - 1;
        wtr.write_record([
            self.level.to_string(),
            end.to_string(),
            "1".to_string(),
            self.fw[end].to_string(),
            self.fl[end].to_string(),
            "0".to_string(),
            "0".to_string(),
        ])?;
        wtr.flush()
    }
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Per-level `(max - min)` tables from finest-level cell ranges.
fn coarsen_ranges(b: usize, level: usize, lo: Vec<f64>, hi: Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); level + 1];
    let (mut lo, mut hi) = (lo, hi);
    for j in (0..=level).rev() {
        out[j] = lo.iter().zip(&hi).map(|(a, c)| c - a).collect();
        if j > 0 {
            lo = lo.chunks(b).map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
            hi = hi.chunks(b).map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        }
    }
    out
}
