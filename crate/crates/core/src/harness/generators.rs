//! Seeded random instances for every check family.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::config::{ChannelSpec, EnvKind, GoldilocksSettings, Sizes};
use super::rng::trial_rng;
use crate::agent::coherent_projection;
use crate::error::{Error, Result};
use crate::prob::Pmf;
use crate::theorems::{uninformed_policies_disagree, value_curve, TuplePmf};
use crate::valuation::{contemporary_value, primordial_quantities, PrimordialMode};
use crate::world::{
    build_cellwise_iid_ensemble, build_iid_reward_ensemble, compose_prior, identity_channel, make_noise_channel,
    make_quantizer_channel, Codeword, Coupling, EnsembleOptions, FiniteModel, NoiseLaw, NoiseSpec, OutcomePartition,
    ProxyChannel, RewardEnsemble, RewardTable, WorldPrior, DEFAULT_DENOM,
};

/// Uniform draw from the simplex with `n` vertices.
pub fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Pmf {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-300).collect();
    Pmf::from_weights(w).expect("positive weights")
}

fn sample_row(rng: &mut ChaCha8Rng, n: usize, kind: EnvKind) -> Vec<f64> {
    match kind {
        EnvKind::Simplex => random_pmf(rng, n).probs().to_vec(),
        EnvKind::Sparse => {
            let mut row = vec![0.0; n];
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let u: f64 = rng.random();
            row[a] += u;
            row[b] += 1.0 - u;
            row
        }
        EnvKind::Deterministic => {
            let mut row = vec![0.0; n];
            row[rng.random_range(0..n)] = 1.0;
            row
        }
        EnvKind::Mixed => unreachable!("resolved per environment"),
    }
}

/// One environment: a row per policy.
pub fn sample_environment(rng: &mut ChaCha8Rng, n_outcomes: usize, n_policies: usize, kind: EnvKind) -> Vec<Vec<f64>> {
    let kind = match kind {
        EnvKind::Mixed => [EnvKind::Simplex, EnvKind::Sparse, EnvKind::Deterministic][rng.random_range(0..3)],
        k => k,
    };
    (0..n_policies).map(|_| sample_row(rng, n_outcomes, kind)).collect()
}

fn sample_model(rng: &mut ChaCha8Rng, sizes: &Sizes) -> Result<FiniteModel> {
    let envs = (0..sizes.n_envs)
        .map(|_| sample_environment(rng, sizes.n_outcomes, sizes.n_policies, sizes.env_kind))
        .collect();
    FiniteModel::new(sizes.n_outcomes, sizes.n_policies, envs)
}

/// Proxy with arbitrary off-grid codewords and random rows.
pub fn random_garbled_channel(rng: &mut ChaCha8Rng, prior: &WorldPrior, n_codewords: usize) -> Result<ProxyChannel> {
    let n = prior.n_outcomes();
    let codebook: Vec<Codeword> = (0..n_codewords)
        .map(|_| Codeword::from_values((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect(), prior.denom()))
        .collect();
    let rows = (0..prior.n_rewards())
        .map(|_| {
            let support = rng.random_range(1..=n_codewords);
            let mut idx: Vec<usize> = (0..n_codewords).collect();
            idx.shuffle(rng);
            let w = random_pmf(rng, support);
            idx[..support].iter().copied().zip(w.probs().iter().copied()).collect()
        })
        .collect();
    ProxyChannel::from_parts(codebook, rows, prior.denom())
}

/// Centered noise with integer scaling so every product stays on the grid.
pub fn random_noise_spec(rng: &mut ChaCha8Rng, n_outcomes: usize) -> Result<NoiseSpec> {
    let tenth = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.random_range(lo..=hi) as f64 / 10.0;
    let w = if n_outcomes <= 6 {
        let coins: Vec<(Vec<f64>, Pmf)> = (0..n_outcomes)
            .map(|_| {
                let d = tenth(rng, 0, 5);
                (vec![-d, d], Pmf::uniform(2).expect("two points"))
            })
            .collect();
        NoiseLaw::product(&coins)?
    } else {
        let d = tenth(rng, 1, 5);
        NoiseLaw::single_outcome(n_outcomes, rng.random_range(0..n_outcomes), &[-d, d], &Pmf::uniform(2)?)?
    };
    let v = if rng.random_bool(0.5) {
        NoiseLaw::zero(n_outcomes)
    } else {
        let j = rng.random_range(1..=3) as f64;
        NoiseLaw::new(
            vec![vec![-1.0; n_outcomes], vec![j; n_outcomes]],
            Pmf::new(vec![j / (j + 1.0), 1.0 / (j + 1.0)])?,
        )?
    };
    Ok(NoiseSpec {
        k_scale: rng.random_range(1..=3) as f64,
        m_shift: tenth(rng, -5, 5),
        w,
        v,
    })
}

/// The proxies checked against one prior, with labels.
pub fn channel_menu(
    rng: &mut ChaCha8Rng,
    prior: &WorldPrior,
    spec: &ChannelSpec,
) -> Result<Vec<(String, ProxyChannel)>> {
    let mut menu = Vec::new();
    if spec.identity {
        menu.push(("identity".to_string(), identity_channel(prior)));
    }
    for &k in &spec.quantizer_bits {
        menu.push((format!("quantizer-{k}"), make_quantizer_channel(prior, k)));
    }
    for i in 0..spec.noise {
        let noise = random_noise_spec(rng, prior.n_outcomes())?;
        menu.push((format!("noise-{i}"), make_noise_channel(prior, &noise)?));
    }
    for i in 0..spec.garbled {
        let c = rng.random_range(1..=4);
        menu.push((format!("garbled-{i}"), random_garbled_channel(rng, prior, c)?));
    }
    Ok(menu)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub prior: WorldPrior,
    pub menu: Vec<(String, ProxyChannel)>,
}

/// Iid rewards on `sizes.grid` with a random marginal, environments drawn
/// independently of rewards.
pub fn sample_thm1_prior(rng: &mut ChaCha8Rng, sizes: &Sizes) -> Result<WorldPrior> {
    let marginal = random_pmf(rng, sizes.grid.len());
    let ensemble = build_iid_reward_ensemble(sizes.n_outcomes, &sizes.grid, &marginal, &EnsembleOptions::default())?;
    let model = sample_model(rng, sizes)?;
    let envs = random_pmf(rng, sizes.n_envs);
    compose_prior(model, ensemble, Coupling::Independent(envs))
}

pub fn sample_thm1_instance(rng: &mut ChaCha8Rng, sizes: &Sizes, channels: &ChannelSpec) -> Result<Instance> {
    let prior = sample_thm1_prior(rng, sizes)?;
    let menu = channel_menu(rng, &prior, channels)?;
    Ok(Instance { prior, menu })
}

pub fn gen_thm1_instance(seed: u64, trial: u64, sizes: &Sizes, channels: &ChannelSpec) -> Result<Instance> {
    sample_thm1_instance(&mut trial_rng(seed, trial), sizes, channels)
}

/// A partition with exactly `cells` nonempty cells, assigned at random.
pub fn random_partition(rng: &mut ChaCha8Rng, n_outcomes: usize, cells: usize) -> Result<OutcomePartition> {
    let mut order: Vec<usize> = (0..n_outcomes).collect();
    order.shuffle(rng);
    let mut cell_of = vec![0; n_outcomes];
    for (rank, &o) in order.iter().enumerate() {
        cell_of[o] = if rank < cells { rank } else { rng.random_range(0..cells) };
    }
    OutcomePartition::new(cell_of, cells)
}

#[derive(Debug, Clone)]
pub struct CellInstance {
    pub prior: WorldPrior,
    pub partition: OutcomePartition,
    pub menu: Vec<(String, ProxyChannel)>,
}

/// Rewards constant on cells with iid cell values.
pub fn sample_thm2_instance(rng: &mut ChaCha8Rng, sizes: &Sizes, channels: &ChannelSpec) -> Result<CellInstance> {
    let partition = random_partition(rng, sizes.n_outcomes, sizes.cells)?;
    let marginal = random_pmf(rng, sizes.grid.len());
    let ensemble = build_cellwise_iid_ensemble(&partition, &sizes.grid, &marginal, &EnsembleOptions::default())?;
    let model = sample_model(rng, sizes)?;
    let envs = random_pmf(rng, sizes.n_envs);
    let prior = compose_prior(model, ensemble, Coupling::Independent(envs))?;
    let menu = channel_menu(rng, &prior, channels)?;
    Ok(CellInstance { prior, partition, menu })
}

pub fn gen_thm2_instance(seed: u64, trial: u64, sizes: &Sizes, channels: &ChannelSpec) -> Result<CellInstance> {
    sample_thm2_instance(&mut trial_rng(seed, trial), sizes, channels)
}

/// Number of environments (and of cyclic policies) in the Goldilocks world.
pub const GOLDILOCKS_ENVS: usize = 3;

/// Pressure used to emulate an unregularized optimizer.
pub const HIGH_PRESSURE: f64 = 1e6;

/// `V̂_λ` of the quantizer with `bits` bits, starting from the optimal
/// uninformed policies.
pub fn quantizer_value_at(prior: &WorldPrior, bits: u32, lambda: f64) -> Result<f64> {
    let channel = make_quantizer_channel(prior, bits);
    Ok(value_curve(prior, &channel, &[lambda], None)?[0].value)
}

/// World where two cyclic policies tie for `V₀`, the best fixed reward
/// sits below `V₀` by a margin, and a 1-bit summary of the reward misleads
/// a high-pressure optimizer.
///
/// Outcome 0 carries an iid ±1 nuisance value and is never reached; outcome
/// `1 + j` is reached by policy `k` in environment `e` iff `j = (e + k) mod 3`.
pub fn gen_goldilocks_instance(seed: u64, trial: u64, settings: &GoldilocksSettings) -> Result<WorldPrior> {
    let mut rng = trial_rng(seed, trial);
    let m = GOLDILOCKS_ENVS;
    let denom = DEFAULT_DENOM;
    let targets: Vec<Vec<usize>> = (0..m).map(|e| (0..m).map(|k| 1 + (e + k) % m).collect()).collect();
    let p = 1.0 / m as f64;
    for _ in 0..settings.max_attempts {
        let mut units: Vec<Vec<i64>> = (0..m)
            .map(|_| (0..m).map(|_| 100 * rng.random_range(-10..=10)).collect())
            .collect();
        let diag = |u: &Vec<Vec<i64>>, k: usize| (0..m).map(|e| u[e][(e + k) % m]).sum::<i64>();
        let fixed = units[m - 1][0] + diag(&units, 0) - diag(&units, 1);
        if fixed.abs() > denom {
            continue;
        }
        units[m - 1][0] = fixed;
        if (1..m).any(|e| (0..e).any(|f| units[e] == units[f])) {
            continue;
        }

        // arithmetic screen before building anything
        let val = |x: i64| x as f64 / denom as f64;
        let diags: Vec<f64> = (0..m).map(|k| diag(&units, k) as f64 * p / denom as f64).collect();
        let v0 = diags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let optimal: Vec<usize> = (0..m).filter(|&k| diags[k] >= v0 - 1e-9).collect();
        if optimal.len() < 2 {
            continue;
        }
        let cols: Vec<f64> = (0..m)
            .map(|j| (0..m).map(|e| val(units[e][j])).sum::<f64>() * p)
            .collect();
        let (best_col, _) = cols.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (j, &c)| if c > acc.1 { (j, c) } else { acc },
        );
        let var = (0..m).map(|e| val(units[e][best_col]).powi(2)).sum::<f64>() * p - cols[best_col].powi(2);
        if v0 - (cols[best_col] + var.max(0.0).sqrt() / 2.0) < settings.gap {
            continue;
        }
        let mut hack = 0.0;
        for (e, row) in units.iter().enumerate() {
            let reach: Vec<usize> = optimal.iter().map(|k| (e + k) % m).collect();
            let top = reach.iter().map(|&j| cols[j]).fold(f64::NEG_INFINITY, f64::max);
            let chosen: Vec<usize> = reach.into_iter().filter(|&j| cols[j] >= top - 1e-12).collect();
            hack += p * chosen.iter().map(|&j| val(row[j])).sum::<f64>() / chosen.len() as f64;
        }
        if hack >= v0 - settings.gap {
            continue;
        }

        let mut tables = Vec::with_capacity(2 * m);
        let mut coupling = Vec::with_capacity(2 * m);
        for s in [-denom, denom] {
            for (e, row) in units.iter().enumerate() {
                let mut t = vec![s];
                t.extend_from_slice(row);
                coupling.push((tables.len(), e, p / 2.0));
                tables.push(RewardTable::from_units(t, denom)?);
            }
        }
        let ensemble = RewardEnsemble::explicit(tables, vec![1.0 / (2 * m) as f64; 2 * m])?;
        let model = FiniteModel::deterministic(m + 1, &targets)?;
        let prior = compose_prior(model, ensemble, Coupling::Explicit(coupling))?;

        let v0 = contemporary_value(&prior);
        let primordial = primordial_quantities(&prior, &PrimordialMode::default_grid_search())?;
        if uninformed_policies_disagree(&prior)
            && v0 - primordial.threshold() >= settings.gap
            && quantizer_value_at(&prior, 1, HIGH_PRESSURE)? < v0
        {
            return Ok(prior);
        }
    }
    Err(Error::GenerationFailed {
        attempts: settings.max_attempts,
    })
}

/// Capped probability vector, nonincreasing sequence and cap for the
/// frontloading inequality.
pub fn random_frontloading_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let len = rng.random_range(1..=8);
    let q = rng.random_range(1.0 / len as f64..=1.0);
    let raw = random_pmf(rng, len).probs().to_vec();
    // clip at q and hand the excess to unclipped entries until none is left
    let mut w = raw.clone();
    let mut clipped = vec![false; len];
    loop {
        let excess: f64 = w.iter().map(|x| (x - q).max(0.0)).sum();
        if excess <= 0.0 {
            break;
        }
        for i in 0..len {
            if w[i] >= q {
                w[i] = q;
                clipped[i] = true;
            }
        }
        let free: f64 = (0..len).filter(|&i| !clipped[i]).map(|i| raw[i]).sum();
        if free <= 0.0 {
            break;
        }
        for i in (0..len).filter(|&i| !clipped[i]) {
            w[i] += excess * raw[i] / free;
        }
    }
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.into_iter().map(|x| (x / total).min(q)).collect();
    let mut a: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    (w, a, q)
}

/// Joint law over at most four coordinates, sometimes with holes, and
/// strictly positive reference marginals.
pub fn random_kl_case(rng: &mut ChaCha8Rng) -> (TuplePmf, Vec<Pmf>) {
    let t = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..t).map(|_| rng.random_range(2..=3)).collect();
    let size: usize = dims.iter().product();
    let sparse = rng.random_bool(0.3);
    let mut w: Vec<f64> = (0..size).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    if sparse {
        for x in w.iter_mut().skip(1) {
            if rng.random_bool(0.5) {
                *x = 0.0;
            }
        }
    }
    let x =
        TuplePmf::new(dims.clone(), Pmf::from_weights(w).expect("nonzero").probs().to_vec()).expect("consistent dims");
    let y = dims.iter().map(|&d| random_pmf(rng, d)).collect();
    (x, y)
}

/// Finite law on values in `[-1, 1]`.
pub fn random_positive_part_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Pmf) {
    let n = rng.random_range(1..=6);
    let values = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    (values, random_pmf(rng, n))
}

/// A thm1-style prior with the coherent projection of a random channel.
pub fn random_coherent_instance(rng: &mut ChaCha8Rng, sizes: &Sizes) -> Result<(WorldPrior, ProxyChannel)> {
    let prior = sample_thm1_prior(rng, sizes)?;
    let c = rng.random_range(1..=4);
    let channel = random_garbled_channel(rng, &prior, c)?;
    let coherent = coherent_projection(&prior, &channel)?;
    Ok((prior, coherent))
}

/// Distinct bitstrings of length at most 8.
pub fn random_injective_code(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut code = Vec::with_capacity(n);
    while code.len() < n {
        let len = rng.random_range(0..=8);
        let word: String = (0..len).map(|_| if rng.random_bool(0.5) { '1' } else { '0' }).collect();
        if seen.insert(word.clone()) {
            code.push(word);
        }
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::coherence_residual;
    use crate::valuation::executed_value;
    use crate::world::check_reward_env_independence;

    #[test]
    fn thm1_instances_are_honest_and_reproducible() {
        let sizes = Sizes {
            n_outcomes: 3,
            n_policies: 3,
            n_envs: 2,
            grid: vec![0.0, 1.0],
            ..Sizes::default()
        };
        let a = gen_thm1_instance(5, 0, &sizes, &ChannelSpec::default()).unwrap();
        let b = gen_thm1_instance(5, 0, &sizes, &ChannelSpec::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a.prior).unwrap(),
            serde_json::to_string(&b.prior).unwrap()
        );
        assert_eq!(a.prior.n_rewards(), 8);
        assert_eq!(a.prior.model().n_envs(), 2);
        assert!(a.prior.iid_rewards() && check_reward_env_independence(&a.prior));
        assert_eq!(a.menu.len(), 1 + 4 + 2 + 1);
    }

    #[test]
    fn single_policy_worlds_have_no_choice() {
        let sizes = Sizes {
            n_policies: 1,
            ..Sizes::default()
        };
        let inst = gen_thm1_instance(1, 2, &sizes, &ChannelSpec::default()).unwrap();
        let v0 = contemporary_value(&inst.prior);
        for (_, ch) in &inst.menu {
            assert!((executed_value(&inst.prior, ch).unwrap() - v0).abs() < 1e-12);
        }
    }

    #[test]
    fn goldilocks_instances_meet_their_contract() {
        let settings = GoldilocksSettings::default();
        let prior = gen_goldilocks_instance(11, 0, &settings).unwrap();
        assert!(uninformed_policies_disagree(&prior));
        let v0 = contemporary_value(&prior);
        let grid = primordial_quantities(&prior, &PrimordialMode::default_grid_search()).unwrap();
        assert!(v0 > grid.value);
        assert!(executed_value(&prior, &identity_channel(&prior)).unwrap() >= v0);
        assert!(quantizer_value_at(&prior, 1, HIGH_PRESSURE).unwrap() < v0);
    }

    #[test]
    fn generation_gives_up() {
        let settings = GoldilocksSettings {
            gap: 5.0,
            max_attempts: 50,
            ..GoldilocksSettings::default()
        };
        assert!(matches!(
            gen_goldilocks_instance(0, 0, &settings),
            Err(Error::GenerationFailed { attempts: 50 })
        ));
    }

    #[test]
    fn lemma_cases_are_well_formed() {
        let mut rng = trial_rng(0, 0);
        for _ in 0..1000 {
            let (w, a, q) = random_frontloading_case(&mut rng);
            assert!(crate::theorems::check_frontloading(&w, &a, q).is_ok());
        }
        let (prior, ch) = random_coherent_instance(&mut rng, &Sizes::default()).unwrap();
        assert!(coherence_residual(&prior, &ch).unwrap() <= 1e-9);
        let code = random_injective_code(&mut rng, 20);
        let set: std::collections::HashSet<_> = code.iter().collect();
        assert_eq!(set.len(), 20);
    }
}
