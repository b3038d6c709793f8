//! Joint law of the weight vectors `(W, L)` and its exact moment functionals.
//!
//! Only finitely-atomic laws are supported, so every expectation below is a
//! finite sum and the downstream structure function is exact.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-9;
const CONSERVATIVE_TOL: f64 = 1e-12;
/// Largest branch count accepted; digits are stored as `u8`.
pub const MAX_BRANCHES: usize = 255;
const MAX_ATOMS: usize = 1 << 16;

/// One atom of the joint law: the pair of vectors and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub w: Vec<f64>,
    pub l: Vec<f64>,
    pub p: f64,
}

/// A `(ln p, ln|w_j|, ln l_j)` triple for every nonzero weight entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub ln_p: f64,
    pub ln_w: f64,
    pub ln_l: f64,
}

/// Validated joint distribution of `(W, L)` with `b` branches.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    b: usize,
    atoms: Vec<Atom>,
    label: String,
    cdf: Vec<f64>,
    terms: Vec<Term>,
}

/// Which of the two weight vectors a functional refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    W,
    L,
}

impl GeneratorSpec {
    /// Build and validate a spec from explicit atoms.
    pub fn new(b: usize, atoms: Vec<Atom>, label: impl Into<String>) -> Result<Self> {
        if !(2..=MAX_BRANCHES).contains(&b) {
            return Err(Error::invariant("b", format!("branch count {b} not in [2, {MAX_BRANCHES}]")));
        }
        if atoms.is_empty() {
            return Err(Error::invariant("atoms", "at least one atom required"));
        }
        if atoms.len() > MAX_ATOMS {
            return Err(Error::invariant("atoms", format!("{} atoms exceed cap {MAX_ATOMS}", atoms.len())));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.w.len() != b {
                return Err(Error::invariant(format!("atoms[{i}].w"), format!("length {} != b={b}", a.w.len())));
            }
            if a.l.len() != b {
                return Err(Error::invariant(format!("atoms[{i}].l"), format!("length {} != b={b}", a.l.len())));
            }
            if !a.w.iter().all(|x| x.is_finite()) {
                return Err(Error::invariant(format!("atoms[{i}].w"), "non-finite entry"));
            }
            if let Some(x) = a.l.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
                return Err(Error::invariant(format!("atoms[{i}].l"), format!("entry {x} not in (0,1)")));
            }
            if !(a.p > 0.0 && a.p.is_finite()) {
                return Err(Error::invariant(format!("atoms[{i}].p"), format!("probability {} must be > 0", a.p)));
            }
        }
        let total_p: f64 = atoms.iter().map(|a| a.p).sum();
        if (total_p - 1.0).abs() > PROB_TOL {
            return Err(Error::invariant("p", format!("probabilities sum to {total_p}, expected 1")));
        }
        let mean_l: f64 = atoms.iter().map(|a| a.p * a.l.iter().sum::<f64>()).sum();
        if (mean_l - 1.0).abs() > MEAN_TOL {
            return Err(Error::invariant("l", format!("E(sum L) = {mean_l}, expected 1")));
        }
        let mean_w: f64 = atoms.iter().map(|a| a.p * a.w.iter().sum::<f64>()).sum();
        if (mean_w - 1.0).abs() > MEAN_TOL {
            return Err(Error::invariant("w", format!("E(sum W) = {mean_w}, expected 1")));
        }

        let mut cdf = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.p;
            cdf.push(acc / total_p);
        }
        *cdf.last_mut().unwrap() = 1.0;

        let terms = atoms
            .iter()
            .flat_map(|a| {
                a.w.iter().zip(&a.l).filter(|(w, _)| **w != 0.0).map(move |(w, l)| Term {
                    ln_p: a.p.ln(),
                    ln_w: w.abs().ln(),
                    ln_l: l.ln(),
                })
            })
            .collect();

        Ok(Self {
            b,
            atoms,
            label: label.into(),
            cdf,
            terms,
        })
    }

    /// Parse the JSON config format (explicit atoms or iid-marginal shorthand).
    pub fn parse(document: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(document).map_err(|e| Error::schema("<document>", e.to_string()))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::schema("<document>", "expected a JSON object"))?;
        let b = obj
            .get("b")
            .ok_or_else(|| Error::schema("b", "missing"))?
            .as_u64()
            .ok_or_else(|| Error::schema("b", "expected a non-negative integer"))? as usize;
        let label = match obj.get("label") {
            Some(v) => v.as_str().ok_or_else(|| Error::schema("label", "expected a string"))?.to_string(),
            None => return Err(Error::schema("label", "missing")),
        };
        if !(2..=MAX_BRANCHES).contains(&b) {
            return Err(Error::invariant("b", format!("branch count {b} not in [2, {MAX_BRANCHES}]")));
        }

        let atoms = match (obj.get("atoms"), obj.get("iid_marginal")) {
            (Some(_), Some(_)) => {
                return Err(Error::schema("atoms", "`atoms` and `iid_marginal` are mutually exclusive"))
            }
            (Some(atoms), None) => parse_atoms(atoms)?,
            (None, Some(marginal)) => expand_iid(b, marginal, obj.get("l"))?,
            (None, None) => return Err(Error::schema("atoms", "missing (or give `iid_marginal`)")),
        };
        Self::new(b, atoms, label)
    }

    /// Canonical JSON form: always explicit atoms, keys sorted.
    pub fn to_json(&self) -> Value {
        let atoms: Vec<Value> = self
            .atoms
            .iter()
            .map(|a| json!({ "w": a.w, "l": a.l, "p": a.p }))
            .collect();
        json!({ "b": self.b, "label": self.label, "atoms": atoms })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Index of the atom selected by a uniform draw `u ∈ [0,1)`.
    #[inline]
    pub fn atom_index(&self, u: f64) -> usize {
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.atoms.len() - 1)
    }

    #[inline]
    pub fn atom_for(&self, u: f64) -> &Atom {
        &self.atoms[self.atom_index(u)]
    }

    /// Conservative: every atom has `sum_j w_j = 1`.
    pub fn is_conservative(&self) -> bool {
        self.atoms
            .iter()
            .all(|a| (a.w.iter().sum::<f64>() - 1.0).abs() <= CONSERVATIVE_TOL)
    }

    /// `Φ(q,t) = E(Σ_j 1{W_j≠0} |W_j|^q L_j^{-t})`, exact for atomic laws.
    pub fn moment(&self, q: f64, t: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                a.p * a
                    .w
                    .iter()
                    .zip(&a.l)
                    .filter(|(w, _)| **w != 0.0)
                    .map(|(w, l)| w.abs().powf(q) * l.powf(-t))
                    .sum::<f64>()
            })
            .sum()
    }

    /// `ln Φ(q,t)` evaluated with log-sum-exp, safe for large `|q|`, `|t|`.
    pub fn ln_moment(&self, q: f64, t: f64) -> f64 {
        log_sum_exp(self.terms.iter().map(|x| x.ln_p + q * x.ln_w - t * x.ln_l))
    }

    /// `φ_U(p) = -log_b E(Σ_j 1{U_j≠0} |U_j|^p)`.
    pub fn phi(&self, side: Side, p: f64) -> Result<f64> {
        let m = match side {
            Side::W => self.moment(p, 0.0),
            Side::L => self
                .atoms
                .iter()
                .map(|a| a.p * a.l.iter().map(|l| l.powf(p)).sum::<f64>())
                .sum(),
        };
        if m == 0.0 || !m.is_finite() {
            return Err(Error::Diverged(format!("E-moment of {side:?} at p={p} is {m}")));
        }
        Ok(-m.ln() / (self.b as f64).ln())
    }

    /// `E(Σ_j L_j ln L_j)`.
    pub fn l_entropy(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.p * a.l.iter().map(|l| l * l.ln()).sum::<f64>())
            .sum()
    }

    /// Slopes `ln|w| / ln l` over nonzero entries: the asymptotic range of `τ'`.
    pub fn exponent_range(&self) -> (f64, f64) {
        self.terms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            let h = t.ln_w / t.ln_l;
            (lo.min(h), hi.max(h))
        })
    }
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn as_f64_vec(v: &Value, field: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::schema(field, "expected an array of numbers"))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::schema(field, "expected a number")))
        .collect()
}

fn parse_atoms(atoms: &Value) -> Result<Vec<Atom>> {
    let arr = atoms
        .as_array()
        .ok_or_else(|| Error::schema("atoms", "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, a)| {
            let o: &Map<String, Value> = a
                .as_object()
                .ok_or_else(|| Error::schema(format!("atoms[{i}]"), "expected an object"))?;
            let get = |k: &str| {
                o.get(k)
                    .ok_or_else(|| Error::schema(format!("atoms[{i}].{k}"), "missing"))
            };
            Ok(Atom {
                w: as_f64_vec(get("w")?, &format!("atoms[{i}].w"))?,
                l: as_f64_vec(get("l")?, &format!("atoms[{i}].l"))?,
                p: get("p")?
                    .as_f64()
                    .ok_or_else(|| Error::schema(format!("atoms[{i}].p"), "expected a number"))?,
            })
        })
        .collect()
}

/// Expand an iid marginal for `W` into the product law over `b` coordinates.
fn expand_iid(b: usize, marginal: &Value, l: Option<&Value>) -> Result<Vec<Atom>> {
    let m = marginal
        .as_object()
        .ok_or_else(|| Error::schema("iid_marginal", "expected an object"))?;
    let values = as_f64_vec(
        m.get("values").ok_or_else(|| Error::schema("iid_marginal.values", "missing"))?,
        "iid_marginal.values",
    )?;
    let probs = as_f64_vec(
        m.get("probs").ok_or_else(|| Error::schema("iid_marginal.probs", "missing"))?,
        "iid_marginal.probs",
    )?;
    if values.is_empty() || values.len() != probs.len() {
        return Err(Error::schema(
            "iid_marginal",
            "`values` and `probs` must be non-empty and of equal length",
        ));
    }
    let l = match l {
        None => return Err(Error::schema("l", "missing (use \"uniform\" or an array)")),
        Some(Value::String(s)) if s == "uniform" => vec![1.0 / b as f64; b],
        Some(Value::String(s)) => return Err(Error::schema("l", format!("unknown keyword `{s}`"))),
        Some(v) => as_f64_vec(v, "l")?,
    };
    let k = values.len();
    let count = k
        .checked_pow(b as u32)
        .filter(|&c| c <= MAX_ATOMS)
        .ok_or_else(|| Error::invariant("iid_marginal", format!("{k}^{b} atoms exceed cap {MAX_ATOMS}")))?;

    Ok((0..count)
        .map(|mut idx| {
            let mut choice = vec![0usize; b];
            for c in choice.iter_mut().rev() {
                *c = idx % k;
                idx /= k;
            }
            Atom {
                w: choice.iter().map(|&c| values[c]).collect(),
                l: l.clone(),
                p: choice.iter().map(|&c| probs[c]).product(),
            }
        })
        .collect())
}

/// Outcome of checking the standing assumptions on a spec.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub a1_holds: bool,
    /// Maximizer of `φ_W` over the search interval.
    pub a1_witness: f64,
    pub a2_holds: bool,
    pub a3_holds: bool,
    pub conservative: bool,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.a1_holds && self.a2_holds && self.a3_holds
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    // Concave objective: the endpoint may beat the interior bracket.
    if f(b) >= f(x) {
        b
    } else {
        x
    }
}

/// Check the standing assumptions on `(W, L)`.
pub fn check_assumptions(spec: &GeneratorSpec) -> AssumptionReport {
    let conservative = spec.is_conservative();
    let mut violations = Vec::new();
    let phi_w = |p: f64| spec.phi(Side::W, p).unwrap_or(f64::NEG_INFINITY);

    let upper = if conservative { 16.0 } else { 2.0 };
    let witness = golden_max(phi_w, 1.0 + 1e-9, upper, 1e-9);
    let phi_at = phi_w(witness);
    let l_ent = spec.l_entropy();
    let a1_holds = phi_at > 0.0 && l_ent < 0.0;
    if phi_at <= 0.0 {
        violations.push(format!("phi_W(p) <= 0 for all p in (1,{upper}] (max {phi_at:.6} at p={witness:.6})"));
    }
    if l_ent >= 0.0 {
        violations.push("E(sum L_j log L_j) < 0 fails".to_string());
    }

    let phi_neg_finite = spec.phi(Side::W, -1.0).map(f64::is_finite).unwrap_or(false);
    let two_nonzero = spec
        .atoms()
        .iter()
        .all(|a| a.w.iter().filter(|w| **w != 0.0).count() >= 2);
    if !phi_neg_finite {
        violations.push("phi_W(-1) not finite".to_string());
    }
    if !two_nonzero {
        violations.push("P(#{j: W_j != 0} >= 2) = 1 fails".to_string());
    }
    let a2_holds = phi_neg_finite && two_nonzero;

    let all_nonzero = spec.atoms().iter().all(|a| a.w.iter().all(|w| w.abs() > 0.0));
    let phi_finite = (-10..=10).all(|k| spec.phi(Side::W, k as f64 * 0.5).map(f64::is_finite).unwrap_or(false));
    if conservative {
        violations.push("P(sum W_j = 1) < 1 fails (conservative)".to_string());
    }
    if !all_nonzero {
        violations.push("|W_j|>0 fails".to_string());
    }
    if !phi_finite {
        violations.push("phi_W not finite on tested grid".to_string());
    }
    let a3_holds = !conservative && all_nonzero && phi_finite;

    AssumptionReport {
        a1_holds,
        a1_witness: witness,
        a2_holds,
        a3_holds,
        conservative,
        violations,
        notes: vec![
            "A3 checked in its strong form; the weaker form (phi_W(q) finite for some q < -1) is not evaluated separately"
                .to_string(),
        ],
    }
}

/// Built-in specs used by tests, examples and the `verify` command.
pub mod presets {
    use super::*;

    /// Signed binary cascade: iid `W_j ∈ {0.6875 (p=0.8), -0.25 (p=0.2)}`, `L = (1/2, 1/2)`.
    pub const CANONICAL_JSON: &str = r#"{
  "b": 2,
  "label": "canonical",
  "iid_marginal": { "values": [0.6875, -0.25], "probs": [0.8, 0.2] },
  "l": "uniform"
}"#;

    /// Deterministic binomial measure `W = (0.25, 0.75)`, `L = (1/2, 1/2)`.
    pub const MULTINOMIAL_JSON: &str = r#"{
  "b": 2,
  "label": "multinomial",
  "atoms": [ { "w": [0.25, 0.75], "l": [0.5, 0.5], "p": 1.0 } ]
}"#;

    pub fn canonical() -> GeneratorSpec {
        GeneratorSpec::parse(CANONICAL_JSON).expect("canonical preset is valid")
    }

    pub fn multinomial() -> GeneratorSpec {
        GeneratorSpec::parse(MULTINOMIAL_JSON).expect("multinomial preset is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_expands_to_four_atoms() {
        let s = canonical();
        assert_eq!(s.b(), 2);
        assert_eq!(s.atoms().len(), 4);
        assert_eq!(s.atoms()[0].w, vec![0.6875, 0.6875]);
        assert!((s.atoms()[0].p - 0.64).abs() < 1e-15);
        assert_eq!(s.atoms()[1].w, vec![0.6875, -0.25]);
        let mean_w: f64 = s.atoms().iter().map(|a| a.p * a.w.iter().sum::<f64>()).sum();
        assert!((mean_w - 2.0 * (0.8 * 0.6875 - 0.2 * 0.25)).abs() < 1e-15);
        assert!((mean_w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_is_conservative() {
        let s = multinomial();
        assert!(s.is_conservative());
        assert_eq!(s.atoms().len(), 1);
    }

    #[test]
    fn l_entry_one_is_rejected() {
        let doc = r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.5],"l":[1.0,0.0],"p":1}]}"#;
        match GeneratorSpec::parse(doc) {
            Err(Error::Invariant { field, .. }) => assert!(field.ends_with(".l"), "{field}"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_fields() {
        let cases = [
            (r#"{"label":"x","atoms":[]}"#, "b"),
            (r#"{"b":2,"atoms":[]}"#, "label"),
            (r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.5],"p":1}]}"#, "atoms[0].l"),
            (r#"{"b":2,"label":"x","iid_marginal":{"values":[1]},"l":"uniform"}"#, "iid_marginal.probs"),
            (r#"{"b":2,"label":"x","iid_marginal":{"values":[0.5],"probs":[1]},"l":"wide"}"#, "l"),
            ("not json", "<document>"),
        ];
        for (doc, want) in cases {
            match GeneratorSpec::parse(doc) {
                Err(Error::Schema { field, .. }) => assert_eq!(field, want, "{doc}"),
                other => panic!("{doc}: expected schema error, got {other:?}"),
            }
        }
    }

    #[test]
    fn normalization_violations() {
        let bad_p = r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.5],"l":[0.5,0.5],"p":0.9}]}"#;
        assert!(matches!(GeneratorSpec::parse(bad_p), Err(Error::Invariant { field, .. }) if field == "p"));
        let bad_w = r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.6],"l":[0.5,0.5],"p":1}]}"#;
        assert!(matches!(GeneratorSpec::parse(bad_w), Err(Error::Invariant { field, .. }) if field == "w"));
        let bad_l = r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.5],"l":[0.4,0.5],"p":1}]}"#;
        assert!(matches!(GeneratorSpec::parse(bad_l), Err(Error::Invariant { field, .. }) if field == "l"));
    }

    #[test]
    fn moment_examples() {
        assert!((multinomial().moment(1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((canonical().moment(1.0, 0.0) - 1.2).abs() < 1e-12);
        for s in [canonical(), multinomial()] {
            assert!((s.moment(0.0, -1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_examples() {
        let c = canonical();
        let m2 = 2.0 * (0.8 * 0.6875f64.powi(2) + 0.2 * 0.25f64.powi(2));
        assert!((m2 - 0.78125).abs() < 1e-15);
        assert!((c.phi(Side::W, 2.0).unwrap() - (-(0.78125f64).log2())).abs() < 1e-12);
        assert!((c.phi(Side::W, 2.0).unwrap() - 0.35614).abs() < 1e-5);
        assert!((c.phi(Side::W, 1.0).unwrap() + 0.26303).abs() < 1e-5);
        assert!(multinomial().phi(Side::L, 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn assumptions_canonical() {
        let r = check_assumptions(&canonical());
        assert!(r.a1_holds && r.a2_holds && r.a3_holds, "{r:?}");
        assert!(!r.conservative);
        assert!((r.a1_witness - 2.0).abs() < 1e-6, "witness {}", r.a1_witness);
    }

    #[test]
    fn assumptions_multinomial() {
        let r = check_assumptions(&multinomial());
        assert!(r.conservative);
        assert!(!r.a3_holds);
        assert!(r.a1_holds);
    }

    #[test]
    fn assumptions_zero_weight() {
        let doc = r#"{"b":2,"label":"z","atoms":[
            {"w":[1.5,0.0],"l":[0.5,0.5],"p":0.5},
            {"w":[0.25,0.25],"l":[0.5,0.5],"p":0.5}]}"#;
        let r = check_assumptions(&GeneratorSpec::parse(doc).unwrap());
        assert!(!r.a3_holds);
        assert!(!r.a2_holds);
        assert!(r.violations.iter().any(|v| v == "|W_j|>0 fails"), "{:?}", r.violations);
    }

    #[test]
    fn canonical_json_round_trip() {
        let c = canonical();
        let back = GeneratorSpec::from_value(&c.to_json()).unwrap();
        assert_eq!(c, back);
    }

    fn spec_strategy() -> impl Strategy<Value = GeneratorSpec> {
        prop_oneof![Just(canonical()), Just(multinomial())]
    }

    proptest! {
        #[test]
        fn moment_increasing_in_t(s in spec_strategy(), q in -5.0..5.0f64, t1 in -5.0..5.0f64, dt in 1e-3..3.0f64) {
            prop_assert!(s.moment(q, t1 + dt) > s.moment(q, t1));
        }

        #[test]
        fn moment_log_convex_in_q(s in spec_strategy(), q1 in -5.0..5.0f64, q2 in -5.0..5.0f64, t in -3.0..3.0f64) {
            let mid = s.moment(0.5 * (q1 + q2), t).ln();
            let avg = 0.5 * (s.moment(q1, t).ln() + s.moment(q2, t).ln());
            prop_assert!(mid <= avg + 1e-12);
        }

        #[test]
        fn phi_w_concave(s in spec_strategy(), p1 in -5.0..5.0f64, p2 in -5.0..5.0f64) {
            let mid = s.phi(Side::W, 0.5 * (p1 + p2)).unwrap();
            let avg = 0.5 * (s.phi(Side::W, p1).unwrap() + s.phi(Side::W, p2).unwrap());
            prop_assert!(mid >= avg - 1e-12);
        }
    }
}
