use serde::{Deserialize, Serialize};

use crate::agent::{optimal_uninformed_set, tilt, PolicyDistribution};
use crate::error::{Error, Result};
use crate::prob::{mutual_information, Pmf};
use crate::valuation::{contemporary_value, primordial_quantities, Evaluator, PrimordialMode};
use crate::world::reward::dot;
use crate::world::{joint_reward_proxy, make_noise_channel, NoiseLaw, NoiseSpec, ProxyChannel, WorldPrior};

/// Step used by the central finite difference.
pub const DERIVATIVE_STEP: f64 = 1e-4;

/// Expected true value of the λ-regularized agent.
///
/// Negative `λ` is allowed; callers validate.
fn regularized_value(eval: &Evaluator<'_>, channel: &ProxyChannel, base: &[f64], lambda: f64) -> f64 {
    let prior = eval.prior();
    let model = prior.model();
    let mut cache: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; channel.n_codewords()]; model.n_envs()];
    let mut total = 0.0;
    for (k, (a, p)) in prior.weighted_atoms().enumerate() {
        for &(c, q) in channel.row(a.reward) {
            let law = cache[a.env][c].get_or_insert_with(|| {
                let code = channel.codebook()[c].values();
                let f_hat: Vec<f64> = model.env(a.env).iter().map(|row| dot(row, code)).collect();
                tilt(&f_hat, base, lambda)
            });
            total += p * q * dot(law, &eval.atom_values()[k]);
        }
    }
    total
}

fn check_base(prior: &WorldPrior, base: &PolicyDistribution) -> Result<()> {
    if base.len() != prior.model().n_policies() {
        return Err(Error::SupportMismatch {
            left: base.len(),
            right: prior.model().n_policies(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub value: f64,
    pub v0: f64,
    pub v_bar: Option<f64>,
    pub sigma_bar: Option<f64>,
    pub mutual_information: f64,
}

/// `V̂_λ` along a grid of pressures, starting from `base` (by default the
/// uniform law on the optimal uninformed policies).
pub fn value_curve(
    prior: &WorldPrior,
    channel: &ProxyChannel,
    lambdas: &[f64],
    base: Option<&PolicyDistribution>,
) -> Result<Vec<CurvePoint>> {
    let default_base;
    let base = match base {
        Some(b) => b,
        None => {
            default_base = optimal_uninformed_set(prior).1;
            &default_base
        }
    };
    check_base(prior, base)?;
    if let Some(&bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::DomainError(format!("pressure {bad} must be a nonnegative real")));
    }
    let eval = Evaluator::new(prior);
    let mi = mutual_information(&joint_reward_proxy(prior, channel)?);
    let v0 = contemporary_value(prior);
    let reference = primordial_quantities(prior, &PrimordialMode::ExactIid)
        .or_else(|_| primordial_quantities(prior, &PrimordialMode::default_grid_search()))
        .ok();
    Ok(lambdas
        .iter()
        .map(|&lambda| CurvePoint {
            lambda,
            value: regularized_value(&eval, channel, base.probs(), lambda),
            v0,
            v_bar: reference.as_ref().map(|p| p.value),
            sigma_bar: reference.as_ref().map(|p| p.sigma()),
            mutual_information: mi,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    /// `k · E[Var_{π∼base} f*(π)]`.
    pub closed_form: f64,
    pub finite_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Slope of `λ ↦ V̂_λ` at zero for a noise proxy, against a central difference.
pub fn derivative_check(
    prior: &WorldPrior,
    channel: &ProxyChannel,
    base: Option<&PolicyDistribution>,
) -> Result<DerivativeCheck> {
    let meta = channel.noise().ok_or(Error::NotNoiseChannel)?;
    channel.check_against(prior)?;
    let default_base;
    let base = match base {
        Some(b) => b,
        None => {
            default_base = optimal_uninformed_set(prior).1;
            &default_base
        }
    };
    check_base(prior, base)?;
    let eval = Evaluator::new(prior);
    let b = base.probs();
    let mut expected_var = 0.0;
    for (k, (_, p)) in prior.weighted_atoms().enumerate() {
        let f = &eval.atom_values()[k];
        let mean = dot(b, f);
        expected_var += p * b.iter().zip(f).map(|(w, x)| w * (x - mean) * (x - mean)).sum::<f64>();
    }
    let closed_form = meta.k_scale * expected_var;
    let h = DERIVATIVE_STEP;
    let finite_difference =
        (regularized_value(&eval, channel, b, h) - regularized_value(&eval, channel, b, -h)) / (2.0 * h);
    let tolerance = 1e-6 * closed_form.abs().max(1.0);
    Ok(DerivativeCheck {
        closed_form,
        finite_difference,
        tolerance,
        pass: (closed_form - finite_difference).abs() <= tolerance,
    })
}

/// Some atom where the optimal uninformed policies disagree in true value.
pub fn uninformed_policies_disagree(prior: &WorldPrior) -> bool {
    let (set, _) = optimal_uninformed_set(prior);
    let eval = Evaluator::new(prior);
    eval.atom_values().iter().any(|f| {
        let (lo, hi) = set
            .iter()
            .map(|&p| f[p])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        hi - lo > 1e-12
    })
}

/// One-parameter noise families indexed by a magnitude `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// `r̂ = η(1 + odds)·r*` with probability `1/(odds+1)`, otherwise zero.
    Erasure { odds: u32 },
    /// `r̂ = r* + w` with `w(o)` iid uniform on `{−η, η}`.
    AdditiveUniform,
}

impl NoiseFamily {
    pub fn spec(&self, n_outcomes: usize, eta: f64) -> Result<NoiseSpec> {
        match *self {
            NoiseFamily::Erasure { odds } => {
                let j = odds as f64;
                let v = NoiseLaw::new(
                    vec![vec![-eta; n_outcomes], vec![j * eta; n_outcomes]],
                    Pmf::new(vec![j / (j + 1.0), 1.0 / (j + 1.0)])?,
                )?;
                Ok(NoiseSpec {
                    k_scale: eta,
                    m_shift: 0.0,
                    w: NoiseLaw::zero(n_outcomes),
                    v,
                })
            }
            NoiseFamily::AdditiveUniform => {
                let coin = (vec![-eta, eta], Pmf::uniform(2)?);
                Ok(NoiseSpec {
                    k_scale: 1.0,
                    m_shift: 0.0,
                    w: NoiseLaw::product(&vec![coin; n_outcomes])?,
                    v: NoiseLaw::zero(n_outcomes),
                })
            }
        }
    }
}

/// `η ∈ {0.01, 0.02, …, 1}`.
pub fn default_eta_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldilocksWitness {
    pub family: NoiseFamily,
    pub eta: f64,
    pub lambda: f64,
    pub value: f64,
    pub mutual_information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldilocksResult {
    /// The optimal uninformed policies disagree somewhere.
    pub applicable: bool,
    pub found: bool,
    pub v0: f64,
    pub best: Option<GoldilocksWitness>,
    /// Channels skipped because they left the reward grid.
    pub skipped: usize,
}

/// Looks for a noise proxy carrying at most `k_bits` of information whose
/// regularized agent beats `V₀`.
pub fn goldilocks_search(
    prior: &WorldPrior,
    k_bits: f64,
    eta_grid: &[f64],
    lambda_grid: &[f64],
    families: &[NoiseFamily],
) -> Result<GoldilocksResult> {
    let v0 = contemporary_value(prior);
    if !uninformed_policies_disagree(prior) {
        return Ok(GoldilocksResult {
            applicable: false,
            found: false,
            v0,
            best: None,
            skipped: 0,
        });
    }
    let eval = Evaluator::new(prior);
    let base = optimal_uninformed_set(prior).1;
    let mut best: Option<GoldilocksWitness> = None;
    let mut skipped = 0;
    for family in families {
        for &eta in eta_grid {
            let channel = match make_noise_channel(prior, &family.spec(prior.n_outcomes(), eta)?) {
                Ok(c) => c,
                Err(Error::GridOverflow(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mi = mutual_information(&joint_reward_proxy(prior, &channel)?);
            if mi > k_bits + 1e-9 {
                continue;
            }
            for &lambda in lambda_grid {
                if !(lambda >= 0.0) {
                    return Err(Error::DomainError(format!("pressure {lambda} must be nonnegative")));
                }
                let value = regularized_value(&eval, &channel, base.probs(), lambda);
                if best.is_none_or(|b| value > b.value) {
                    best = Some(GoldilocksWitness {
                        family: *family,
                        eta,
                        lambda,
                        value,
                        mutual_information: mi,
                    });
                }
            }
        }
    }
    Ok(GoldilocksResult {
        applicable: true,
        found: best.is_some_and(|b| b.value > v0 + 1e-6),
        v0,
        best,
        skipped,
    })
}
