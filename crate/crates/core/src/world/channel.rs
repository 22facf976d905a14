use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::prior::{WorldPrior, DEFAULT_CAP};
use super::reward::{to_units, Codeword, CodewordKey};
use crate::error::{Error, Result};
use crate::prob::{JointPmf, Pmf, PMF_TOLERANCE};

/// Scaling and shift recorded by the independent-noise constructor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub k_scale: f64,
    pub m_shift: f64,
}

/// `P(r̂ | r*)` over a finite codebook. Rows are indexed by reward table
/// only, so `r̂ ⊥ ρ* | r*` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct ProxyChannel {
    denom: i64,
    codebook: Vec<Codeword>,
    /// Sparse rows: `(codeword index, probability)` with positive mass.
    rows: Vec<Vec<(usize, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseMeta>,
}

#[derive(Deserialize)]
struct RawChannel {
    denom: i64,
    codebook: Vec<Codeword>,
    rows: Vec<Vec<(usize, f64)>>,
    #[serde(default)]
    noise: Option<NoiseMeta>,
}

impl TryFrom<RawChannel> for ProxyChannel {
    type Error = Error;
    fn try_from(raw: RawChannel) -> Result<Self> {
        Ok(ProxyChannel::from_parts(raw.codebook, raw.rows, raw.denom)?.with_noise(raw.noise))
    }
}

/// Interns codewords so that equal tables share one index.
struct CodebookBuilder {
    denom: i64,
    codebook: Vec<Codeword>,
    index: HashMap<CodewordKey, usize>,
}

impl CodebookBuilder {
    fn new(denom: i64) -> Self {
        CodebookBuilder {
            denom,
            codebook: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn intern(&mut self, c: Codeword) -> usize {
        let key = c.key();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.codebook.len();
        self.codebook.push(c);
        self.index.insert(key, i);
        i
    }

    fn finish(self, rows: Vec<Vec<(usize, f64)>>, noise: Option<NoiseMeta>) -> ProxyChannel {
        ProxyChannel {
            denom: self.denom,
            codebook: self.codebook,
            rows: rows.into_iter().map(merge_row).collect(),
            noise,
        }
    }
}

fn merge_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (c, p) in row {
        if p <= 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += p,
            _ => out.push((c, p)),
        }
    }
    out
}

impl ProxyChannel {
    /// Validated channel from an explicit codebook and sparse rows.
    pub fn from_parts(codebook: Vec<Codeword>, rows: Vec<Vec<(usize, f64)>>, denom: i64) -> Result<Self> {
        if codebook.is_empty() {
            return Err(Error::ChannelPriorMismatch("empty codebook".into()));
        }
        let n = codebook[0].len();
        if codebook.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("codewords differ in length".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut total = 0.0;
            for &(c, p) in row {
                if c >= codebook.len() {
                    return Err(Error::InvalidPmf(format!("row {i} references codeword {c}")));
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidPmf(format!("row {i} has probability {p}")));
                }
                total += p;
            }
            if (total - 1.0).abs() > PMF_TOLERANCE {
                return Err(Error::InvalidPmf(format!("row {i} sums to {total}")));
            }
        }
        Ok(ProxyChannel {
            denom,
            codebook,
            rows: rows.into_iter().map(merge_row).collect(),
            noise: None,
        })
    }

    /// Same codebook and rows, with independent-noise metadata attached.
    pub(crate) fn with_noise(mut self, noise: Option<NoiseMeta>) -> Self {
        self.noise = noise;
        self
    }

    pub fn codebook(&self) -> &[Codeword] {
        &self.codebook
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn noise(&self) -> Option<NoiseMeta> {
        self.noise
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn n_codewords(&self) -> usize {
        self.codebook.len()
    }

    /// Errors unless this channel was built against `prior`'s support.
    pub fn check_against(&self, prior: &WorldPrior) -> Result<()> {
        if self.rows.len() != prior.n_rewards() {
            return Err(Error::ChannelPriorMismatch(format!(
                "{} rows for {} reward tables",
                self.rows.len(),
                prior.n_rewards()
            )));
        }
        if self.codebook[0].len() != prior.n_outcomes() {
            return Err(Error::ChannelPriorMismatch(format!(
                "codewords cover {} outcomes, prior has {}",
                self.codebook[0].len(),
                prior.n_outcomes()
            )));
        }
        Ok(())
    }
}

/// `r̂ = r*`.
pub fn identity_channel(prior: &WorldPrior) -> ProxyChannel {
    let mut b = CodebookBuilder::new(prior.denom());
    let rows = prior
        .tables()
        .iter()
        .map(|t| vec![(b.intern(Codeword::from_table(t)), 1.0)])
        .collect();
    b.finish(rows, None)
}

/// Deterministic `k`-bit message: tables sorted lexicographically and split
/// into at most `2^k` contiguous runs; each run maps to its posterior mean.
pub fn make_quantizer_channel(prior: &WorldPrior, k_bits: u32) -> ProxyChannel {
    let n = prior.n_rewards();
    let buckets = if k_bits >= usize::BITS - 1 {
        n
    } else {
        n.min(1usize << k_bits)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| prior.table(a).units().cmp(prior.table(b).units()));
    let weights = prior.reward_marginal();
    let n_out = prior.n_outcomes();
    let mut b = CodebookBuilder::new(prior.denom());
    let mut rows = vec![Vec::new(); n];
    for j in 0..buckets {
        let run = &order[j * n / buckets..(j + 1) * n / buckets];
        let mass: f64 = run.iter().map(|&i| weights[i]).sum();
        let mut mean = vec![0.0; n_out];
        for &i in run {
            // zero-mass runs fall back to the plain average
            let w = if mass > 0.0 {
                weights[i] / mass
            } else {
                1.0 / run.len() as f64
            };
            for (m, v) in mean.iter_mut().zip(prior.table(i).values()) {
                *m += w * v;
            }
        }
        let c = b.intern(Codeword::from_values(mean, prior.denom()));
        for &i in run {
            rows[i] = vec![(c, 1.0)];
        }
    }
    b.finish(rows, None)
}

/// A finite law over noise vectors (one value per outcome).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLaw {
    pub support: Vec<Vec<f64>>,
    pub probs: Pmf,
}

impl NoiseLaw {
    pub fn new(support: Vec<Vec<f64>>, probs: Pmf) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch(
                "noise support and law differ in length".into(),
            ));
        }
        let n = support.first().map_or(0, Vec::len);
        if support.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch("noise vectors differ in length".into()));
        }
        Ok(NoiseLaw { support, probs })
    }

    pub fn zero(n_outcomes: usize) -> Self {
        NoiseLaw {
            support: vec![vec![0.0; n_outcomes]],
            probs: Pmf::point_mass(1, 0).expect("one-point law"),
        }
    }

    /// Independent coordinates, coordinate `o` drawn from `laws[o]`.
    pub fn product(laws: &[(Vec<f64>, Pmf)]) -> Result<Self> {
        let size = laws
            .iter()
            .try_fold(1u128, |acc, (v, _)| acc.checked_mul(v.len() as u128))
            .unwrap_or(u128::MAX);
        if size > DEFAULT_CAP as u128 {
            return Err(Error::EnsembleTooLarge { size, cap: DEFAULT_CAP });
        }
        let mut support = vec![Vec::new()];
        let mut probs = vec![1.0];
        for (values, law) in laws {
            if values.len() != law.len() {
                return Err(Error::DimensionMismatch("coordinate values and law differ".into()));
            }
            let mut next_s = Vec::with_capacity(support.len() * values.len());
            let mut next_p = Vec::with_capacity(support.len() * values.len());
            for (s, p) in support.iter().zip(&probs) {
                for (v, q) in values.iter().zip(law.probs()) {
                    let mut t = s.clone();
                    t.push(*v);
                    next_s.push(t);
                    next_p.push(p * q);
                }
            }
            support = next_s;
            probs = next_p;
        }
        NoiseLaw::new(support, Pmf::new(probs)?)
    }

    /// Noise on outcome `o` only; every other coordinate is zero.
    pub fn single_outcome(n_outcomes: usize, o: usize, values: &[f64], law: &Pmf) -> Result<Self> {
        if o >= n_outcomes || values.len() != law.len() {
            return Err(Error::DimensionMismatch("bad single-outcome noise".into()));
        }
        let support = values
            .iter()
            .map(|&v| {
                let mut t = vec![0.0; n_outcomes];
                t[o] = v;
                t
            })
            .collect();
        NoiseLaw::new(support, law.clone())
    }

    fn units(&self, denom: i64) -> Result<Vec<Vec<i64>>> {
        self.support
            .iter()
            .map(|v| {
                v.iter()
                    .map(|&x| {
                        to_units(x, denom)
                            .ok_or_else(|| Error::GridOverflow(format!("noise value {x} is off the grid")))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Parameters of `r̂ = k·r* + w + v⊙r* + m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub k_scale: f64,
    pub m_shift: f64,
    pub w: NoiseLaw,
    pub v: NoiseLaw,
}

fn check_centered(units: &[Vec<i64>], law: &Pmf) -> Result<()> {
    let n = units.first().map_or(0, Vec::len);
    for o in 0..n {
        let mean: f64 = units.iter().zip(law.probs()).map(|(u, p)| u[o] as f64 * p).sum();
        if mean.abs() > 1e-6 {
            return Err(Error::NoiseNotCentered { outcome: o, mean });
        }
    }
    Ok(())
}

/// Exact `a·b / denom` in units, if integral and representable.
fn scaled_product(a: i64, b: i64, denom: i64) -> Result<i64> {
    let prod = a as i128 * b as i128;
    if prod % denom as i128 != 0 {
        return Err(Error::GridOverflow(format!(
            "product {}·{} leaves the 1/{denom} grid",
            a as f64 / denom as f64,
            b as f64 / denom as f64
        )));
    }
    i64::try_from(prod / denom as i128).map_err(|_| Error::GridOverflow("product overflows".into()))
}

/// Independent-noise proxy with scaling `k` and shift `m`.
pub fn make_noise_channel(prior: &WorldPrior, spec: &NoiseSpec) -> Result<ProxyChannel> {
    let denom = prior.denom();
    let n = prior.n_outcomes();
    if !(spec.k_scale > 0.0) {
        return Err(Error::DomainError(format!("scaling {} must be positive", spec.k_scale)));
    }
    let k = to_units(spec.k_scale, denom)
        .ok_or_else(|| Error::GridOverflow(format!("scaling {} is off the grid", spec.k_scale)))?;
    let m = to_units(spec.m_shift, denom)
        .ok_or_else(|| Error::GridOverflow(format!("shift {} is off the grid", spec.m_shift)))?;
    let w = spec.w.units(denom)?;
    let v = spec.v.units(denom)?;
    for law in [&w, &v] {
        if law.iter().any(|x| x.len() != n) {
            return Err(Error::DimensionMismatch(format!("noise vectors must have {n} entries")));
        }
    }
    check_centered(&w, &spec.w.probs)?;
    check_centered(&v, &spec.v.probs)?;

    let mut b = CodebookBuilder::new(denom);
    let mut rows = Vec::with_capacity(prior.n_rewards());
    for table in prior.tables() {
        let r = table.units();
        let mut row = Vec::with_capacity(w.len() * v.len());
        for (wu, wp) in w.iter().zip(spec.w.probs.probs()) {
            for (vu, vp) in v.iter().zip(spec.v.probs.probs()) {
                let mut out = Vec::with_capacity(n);
                for o in 0..n {
                    let x = scaled_product(k, r[o], denom)? as i128
                        + wu[o] as i128
                        + scaled_product(vu[o], r[o], denom)? as i128
                        + m as i128;
                    out.push(i64::try_from(x).map_err(|_| Error::GridOverflow("sum overflows".into()))?);
                }
                let c = b.intern(Codeword::on_grid(out, denom));
                row.push((c, wp * vp));
            }
        }
        rows.push(row);
    }
    Ok(b.finish(
        rows,
        Some(NoiseMeta {
            k_scale: spec.k_scale,
            m_shift: spec.m_shift,
        }),
    ))
}

/// Joint law of (reward table index, codeword index).
pub fn joint_reward_proxy(prior: &WorldPrior, channel: &ProxyChannel) -> Result<JointPmf> {
    channel.check_against(prior)?;
    let pr = prior.reward_marginal();
    let entries = channel
        .rows()
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(c, q)| (i, c, pr[i] * q)))
        .collect();
    JointPmf::from_entries(prior.n_rewards(), channel.n_codewords(), entries)
}

/// Builds a channel by interning arbitrary codewords per row.
pub(crate) fn channel_from_codewords(
    denom: i64,
    rows: Vec<Vec<(Codeword, f64)>>,
    noise: Option<NoiseMeta>,
) -> ProxyChannel {
    let mut b = CodebookBuilder::new(denom);
    let rows = rows
        .into_iter()
        .map(|row| row.into_iter().map(|(c, p)| (b.intern(c), p)).collect())
        .collect();
    b.finish(rows, noise)
}
