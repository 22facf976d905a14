//! Exact information-theoretic kernels over explicit finite supports.
//!
//! All information quantities are reported in bits. Probabilities are `f64`
//! and validated to sum to one within [`PMF_TOLERANCE`].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Normalization tolerance for every probability vector.
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Negative mutual-information residue below this magnitude is rounding noise.
const MI_CLAMP: f64 = 1e-12;

/// A real number or `+∞`.
///
/// Divergences that fail absolute continuity evaluate to [`ExtReal::PosInf`]
/// instead of a float sentinel so that arithmetic never silently absorbs it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInf => None,
        }
    }

    /// `self ≥ rhs − tol`, where `+∞` dominates every finite value.
    pub fn ge_within(self, rhs: ExtReal, tol: f64) -> bool {
        match (self, rhs) {
            (ExtReal::PosInf, _) => true,
            (ExtReal::Finite(_), ExtReal::PosInf) => false,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a >= b - tol,
        }
    }

    /// `self − rhs`; `None` when both sides are infinite.
    pub fn margin(self, rhs: ExtReal) -> Option<ExtReal> {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => Some(ExtReal::Finite(a - b)),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(ExtReal::PosInf),
            // finite minus infinity is -inf, which this type cannot hold
            (ExtReal::Finite(_), ExtReal::PosInf) => None,
            (ExtReal::PosInf, ExtReal::PosInf) => None,
        }
    }

    pub fn scale(self, factor: f64) -> ExtReal {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x * factor),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }

    /// Value for CSV emission (`inf` for the infinite case).
    pub fn to_csv_field(self) -> String {
        match self {
            ExtReal::Finite(x) => format_f64(x),
            ExtReal::PosInf => "inf".to_string(),
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => serializer.serialize_f64(*x),
            ExtReal::PosInf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(x) => Ok(ExtReal::Finite(x)),
            Raw::Text(s) if s == "inf" => Ok(ExtReal::PosInf),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("bad extended real {s:?}"))),
        }
    }
}

/// Formats a float with 17 significant digits, enough to round-trip exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A probability mass function over the indices `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidPmf(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidPmf(format!("sums to {total}")));
        }
        Ok(Pmf { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        Ok(Pmf {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidPmf(format!("point mass at {at} outside 0..{n}")));
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Ok(Pmf { probs })
    }

    /// Normalizes nonnegative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPmf(
                "weights must be nonnegative with positive total".into(),
            ));
        }
        Pmf::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

impl<'de> Deserialize<'de> for Pmf {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        Pmf::new(probs).map_err(serde::de::Error::custom)
    }
}

/// A joint pmf over `(x, y) ∈ 0..rows × 0..cols`, stored sparsely.
///
/// Entries are kept sorted by `(x, y)` with duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl JointPmf {
    pub fn from_table(table: Vec<Vec<f64>>) -> Result<Self> {
        let rows = table.len();
        let cols = table.first().map_or(0, Vec::len);
        if table.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidPmf("ragged joint table".into()));
        }
        let entries = table
            .into_iter()
            .enumerate()
            .flat_map(|(x, row)| row.into_iter().enumerate().map(move |(y, p)| (x, y, p)))
            .collect();
        JointPmf::from_entries(rows, cols, entries)
    }

    pub fn from_entries(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidPmf("empty joint support".into()));
        }
        let mut total = 0.0;
        for &(x, y, p) in &entries {
            if x >= rows || y >= cols {
                return Err(Error::InvalidPmf(format!("entry ({x}, {y}) outside {rows}x{cols}")));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPmf(format!("entry ({x}, {y}) is {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidPmf(format!("joint sums to {total}")));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (x, y, p) in entries {
            if p == 0.0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == x && last.1 == y => last.2 += p,
                _ => merged.push((x, y, p)),
            }
        }
        Ok(JointPmf {
            rows,
            cols,
            entries: merged,
        })
    }

    /// Product of two marginals.
    pub fn product(px: &Pmf, py: &Pmf) -> Self {
        let entries = px
            .probs()
            .iter()
            .enumerate()
            .flat_map(|(x, &a)| py.probs().iter().enumerate().map(move |(y, &b)| (x, y, a * b)))
            .filter(|e| e.2 > 0.0)
            .collect();
        JointPmf {
            rows: px.len(),
            cols: py.len(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzero entries `(x, y, p)` sorted by `(x, y)`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(x, y)))
            .map_or(0.0, |i| self.entries[i].2)
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.rows];
        for &(x, _, p) in &self.entries {
            m[x] += p;
        }
        m
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for &(_, y, p) in &self.entries {
            m[y] += p;
        }
        m
    }
}

fn xlog2(p: f64, ratio: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * ratio.log2()
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    let h: f64 = p.probs().iter().map(|&x| -xlog2(x, x)).sum();
    h.max(0.0)
}

/// `d_KL(p ‖ q)` in bits; `+∞` when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<ExtReal> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        total += a * (a / b).log2();
    }
    Ok(ExtReal::Finite(total.max(0.0)))
}

/// `d_KL(Bern(p) ‖ Bern(q))` in bits.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<ExtReal> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::DomainError(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let mut total = 0.0;
    for (a, b) in [(p, q), (1.0 - p, 1.0 - q)] {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        total += a * (a / b).log2();
    }
    Ok(ExtReal::Finite(total.max(0.0)))
}

/// `I(X; Y)` in bits for a joint pmf.
pub fn mutual_information(j: &JointPmf) -> f64 {
    let px = j.x_marginal();
    let py = j.y_marginal();
    let mi: f64 = j.entries().iter().map(|&(x, y, p)| xlog2(p, p / (px[x] * py[y]))).sum();
    if mi < 0.0 && mi > -MI_CLAMP {
        0.0
    } else {
        mi.max(0.0)
    }
}

/// `E[values(X) | Y = y]` for every `y`.
pub fn conditional_mean(j: &JointPmf, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != j.rows() {
        return Err(Error::SupportMismatch {
            left: values.len(),
            right: j.rows(),
        });
    }
    let py = j.y_marginal();
    if let Some(index) = py.iter().position(|&m| m <= 0.0) {
        return Err(Error::ZeroMarginal { index });
    }
    let mut num = vec![0.0; j.cols()];
    for &(x, y, p) in j.entries() {
        num[y] += values[x] * p;
    }
    Ok(num.iter().zip(&py).map(|(n, m)| n / m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&Pmf::uniform(4).unwrap()) - 2.0).abs() < 1e-12);
        assert_eq!(entropy(&Pmf::point_mass(3, 1).unwrap()), 0.0);
        // -0.5 log 0.5 - 2 * 0.25 log 0.25
        assert!((entropy(&pmf(&[0.5, 0.25, 0.25])) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pmf_rejects_bad_inputs() {
        assert!(matches!(Pmf::new(vec![]), Err(Error::InvalidPmf(_))));
        assert!(matches!(Pmf::new(vec![0.5, 0.4]), Err(Error::InvalidPmf(_))));
        assert!(matches!(Pmf::new(vec![1.5, -0.5]), Err(Error::InvalidPmf(_))));
        assert!(Pmf::new(vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn kl_examples() {
        let p = pmf(&[0.2, 0.8]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), ExtReal::Finite(0.0));
        let v = kl_divergence(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap();
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            kl_divergence(&pmf(&[0.3, 0.7]), &pmf(&[0.0, 1.0])).unwrap(),
            ExtReal::PosInf
        );
        assert!(matches!(
            kl_divergence(&pmf(&[1.0]), &pmf(&[0.5, 0.5])),
            Err(Error::SupportMismatch { .. })
        ));
    }

    #[test]
    fn kl_bernoulli_examples() {
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), ExtReal::Finite(0.0));
        assert!((kl_bernoulli(1.0, 0.5).unwrap().finite().unwrap() - 1.0).abs() < 1e-12);
        // 40-digit evaluation of the definition
        let v = kl_bernoulli(0.5, 0.25).unwrap().finite().unwrap();
        assert!((v - 0.207_518_749_639_421_9).abs() < 1e-12);
        assert_eq!(kl_bernoulli(0.5, 0.0).unwrap(), ExtReal::PosInf);
        assert!(matches!(kl_bernoulli(1.1, 0.5), Err(Error::DomainError(_))));
        assert!(matches!(kl_bernoulli(0.1, -0.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn mutual_information_examples() {
        let prod = JointPmf::product(&pmf(&[0.3, 0.7]), &pmf(&[0.6, 0.4]));
        assert!(mutual_information(&prod).abs() < 1e-12);

        let ident: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.25 } else { 0.0 }).collect())
            .collect();
        let mi = mutual_information(&JointPmf::from_table(ident).unwrap());
        assert!((mi - 2.0).abs() < 1e-12);

        // 1 - H_b(0.2), evaluated at 40 digits
        let j = JointPmf::from_table(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
        assert!((mutual_information(&j) - 0.278_071_905_112_637_65).abs() < 1e-12);
    }

    #[test]
    fn conditional_mean_examples() {
        let ident = JointPmf::from_table(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(conditional_mean(&ident, &[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);

        let prod = JointPmf::product(&pmf(&[0.25, 0.75]), &pmf(&[0.5, 0.5]));
        let out = conditional_mean(&prod, &[1.0, 0.0]).unwrap();
        assert!(out.iter().all(|v| (v - 0.25).abs() < 1e-12));

        let j = JointPmf::from_table(vec![vec![0.25, 0.25], vec![0.5, 0.0]]).unwrap();
        let out = conditional_mean(&j, &[0.0, 1.0]).unwrap();
        assert!((out[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(out[1], 0.0);

        let zero = JointPmf::from_table(vec![vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(
            conditional_mean(&zero, &[0.0, 1.0]),
            Err(Error::ZeroMarginal { index: 1 })
        ));
    }

    #[test]
    fn joint_rejects_bad_tables() {
        assert!(JointPmf::from_table(vec![vec![0.5, 0.5], vec![0.1]]).is_err());
        assert!(JointPmf::from_table(vec![vec![0.5, 0.4]]).is_err());
        assert!(JointPmf::from_entries(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn ext_real_ordering_and_serde() {
        assert!(ExtReal::PosInf > ExtReal::Finite(1e300));
        assert!(ExtReal::PosInf.ge_within(ExtReal::Finite(5.0), 0.0));
        assert!(!ExtReal::Finite(5.0).ge_within(ExtReal::PosInf, 1.0));
        let s = serde_json::to_string(&vec![ExtReal::Finite(0.5), ExtReal::PosInf]).unwrap();
        assert_eq!(s, r#"[0.5,"inf"]"#);
        let back: Vec<ExtReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![ExtReal::Finite(0.5), ExtReal::PosInf]);
    }

    fn arb_pmf(n: usize) -> impl Strategy<Value = Pmf> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero weights", |w| Pmf::from_weights(w).ok())
    }

    fn arb_joint() -> impl Strategy<Value = JointPmf> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            prop::collection::vec(0.0f64..1.0, r * c).prop_filter_map("zero weights", move |w| {
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return None;
                }
                let entries = w.iter().enumerate().map(|(i, p)| (i / c, i % c, p / total)).collect();
                JointPmf::from_entries(r, c, entries).ok()
            })
        })
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_on_diagonal(p in arb_pmf(5), q in arb_pmf(5)) {
            let d = kl_divergence(&p, &q).unwrap();
            prop_assert!(d >= ExtReal::Finite(0.0));
            prop_assert!(kl_divergence(&p, &p).unwrap().finite().unwrap().abs() < 1e-9);
            let diff: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum();
            if diff > 1e-3 {
                prop_assert!(d > ExtReal::Finite(0.0));
            }
        }

        #[test]
        fn mi_bounded_by_marginal_entropies(j in arb_joint()) {
            let mi = mutual_information(&j);
            let hx = entropy(&Pmf::new(j.x_marginal()).unwrap());
            let hy = entropy(&Pmf::new(j.y_marginal()).unwrap());
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= hx.min(hy) + 1e-9);
        }

        #[test]
        fn data_processing_under_deterministic_maps(j in arb_joint(), seed in 0u64..1000) {
            // g merges y-columns pseudo-randomly into at most two classes
            let g: Vec<usize> = (0..j.cols()).map(|y| ((seed >> (y % 16)) & 1) as usize).collect();
            let entries = j.entries().iter().map(|&(x, y, p)| (x, g[y], p)).collect();
            let coarse = JointPmf::from_entries(j.rows(), 2, entries).unwrap();
            prop_assert!(mutual_information(&coarse) <= mutual_information(&j) + 1e-9);
        }

        #[test]
        fn kl_bernoulli_matches_two_point_kl(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let a = kl_bernoulli(p, q).unwrap();
            let b = kl_divergence(&pmf(&[p, 1.0 - p]), &pmf(&[q, 1.0 - q])).unwrap();
            match (a, b) {
                (ExtReal::Finite(x), ExtReal::Finite(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
