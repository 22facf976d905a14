//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use goodhart::agent::{coherence_residual, coherent_projection};
use goodhart::harness::{
    execute, gen_goldilocks_instance, quantizer_value_at, random_coherent_instance, random_frontloading_case,
    random_garbled_channel, random_injective_code, random_kl_case, random_noise_spec, random_positive_part_case,
    run_experiment, sample_thm1_prior, trial_rng, ExperimentConfig, Family, GoldilocksSettings, RunOutput, Sizes,
    VDaggerRule, HIGH_PRESSURE,
};
use goodhart::prob::{ExtReal, Pmf};
use goodhart::theorems::{
    check_dominating_performance, check_fixed_length_protocol, check_frontloading, check_kl_decomposition,
    check_positive_part_bounds, check_variable_length_protocol, default_eta_grid, derivative_check, fixed_length_code,
    goldilocks_search, safe_set_information_demo, verify_thm1,
};
use goodhart::valuation::{attainability_profile, executed_value, primordial_quantities, PrimordialMode};
use goodhart::world::{
    build_iid_reward_ensemble, compose_prior, identity_channel, make_noise_channel, Coupling, EnsembleOptions,
    FiniteModel, RewardEnsemble, RewardTable,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn failing_rows(out: &RunOutput) -> usize {
    out.rows.iter().filter(|r| r.applicable && !r.pass).count()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut applicable = 0;
    for (seed, sizes) in [
        (101, Sizes::default()),
        (
            102,
            Sizes {
                n_outcomes: 8,
                n_policies: 8,
                n_envs: 4,
                ..Sizes::default()
            },
        ),
    ] {
        let mut config = ExperimentConfig::new(Family::Thm1, seed, 500);
        config.sizes = sizes;
        config.v_dagger = VDaggerRule::EqualToVHat;
        let out = execute(&config).map_err(|e| e.to_string())?;
        if failing_rows(&out) > 0 {
            return Err(format!("{} violations at seed {seed}", failing_rows(&out)));
        }
        applicable += out.summary.applicable;
    }
    let elapsed = start.elapsed();
    if applicable == 0 || elapsed > Duration::from_secs(300) {
        return Err(format!("{applicable} applicable checks in {elapsed:.1?}"));
    }
    Ok(format!(
        "1000 instances, {applicable} applicable checks, 0 violations, {elapsed:.1?}"
    ))
}

fn criterion_2() -> Outcome {
    let mut config = ExperimentConfig::new(Family::Thm2, 202, 300);
    config.sizes = Sizes {
        n_outcomes: 8,
        n_policies: 4,
        n_envs: 3,
        cells: 4,
        ..Sizes::default()
    };
    let out = execute(&config).map_err(|e| e.to_string())?;
    let trivial = out.rows.iter().filter(|r| r.check == "thm2-trivial").count();
    let bound = out.rows.iter().filter(|r| r.check == "thm2" && r.applicable).count();
    if failing_rows(&out) > 0 || trivial == 0 || bound == 0 {
        return Err(format!(
            "{} failures, {bound} applicable, {trivial} trivial comparisons",
            failing_rows(&out)
        ));
    }
    Ok(format!(
        "{bound} applicable cell bounds and {trivial} identical trivial-partition reports"
    ))
}

fn criterion_3() -> Outcome {
    let ensemble = build_iid_reward_ensemble(3, &[0.0, 1.0], &Pmf::uniform(2).unwrap(), &EnsembleOptions::default())
        .map_err(|e| e.to_string())?;
    let prior = compose_prior(
        FiniteModel::identity(3).unwrap(),
        ensemble,
        Coupling::Independent(Pmf::uniform(1).unwrap()),
    )
    .map_err(|e| e.to_string())?;
    let channel = identity_channel(&prior);
    let v_hat = executed_value(&prior, &channel).map_err(|e| e.to_string())?;
    let prim = primordial_quantities(&prior, &PrimordialMode::ExactIid).map_err(|e| e.to_string())?;
    let p_att = attainability_profile(&prior, None)
        .map_err(|e| e.to_string())?
        .sup_outcome;
    let report = verify_thm1(&prior, &channel, v_hat).map_err(|e| e.to_string())?;
    let rhs = report.rhs.and_then(ExtReal::finite).unwrap_or(f64::NAN);
    let lhs = report.lhs.finite().unwrap_or(f64::NAN);
    let checks = [
        (v_hat, 0.875),
        (prim.value, 0.5),
        (prim.variance, 0.25),
        (p_att, 1.0),
        (rhs, 0.069_593_368_669_391_94),
        (lhs, 3.0),
    ];
    if checks
        .iter()
        .any(|(a, b)| (a - b).abs().is_nan() || (a - b).abs() > 1e-9)
        || !report.applicable
        || !report.pass
    {
        return Err(format!("{checks:?}"));
    }
    Ok(format!(
        "V̂ = {v_hat}, V̄ = {}, σ̄² = {}, rhs = {rhs:.4}, lhs = {lhs}",
        prim.value, prim.variance
    ))
}

fn criterion_4() -> Outcome {
    let sizes = Sizes::default();
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let mut rng = trial_rng(404, trial);
        let prior = sample_thm1_prior(&mut rng, &sizes).map_err(|e| e.to_string())?;
        let spec = random_noise_spec(&mut rng, prior.n_outcomes()).map_err(|e| e.to_string())?;
        let channel = make_noise_channel(&prior, &spec).map_err(|e| e.to_string())?;
        let base = Pmf::uniform(prior.model().n_policies()).unwrap();
        let d = derivative_check(&prior, &channel, Some(&base)).map_err(|e| e.to_string())?;
        if !d.pass {
            return Err(format!("trial {trial}: {d:?}"));
        }
        worst = worst.max((d.closed_form - d.finite_difference).abs() / d.closed_form.abs().max(1.0));
    }
    Ok(format!("100 noise channels, worst relative gap {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let settings = GoldilocksSettings::default();
    let lambdas = ExperimentConfig::new(Family::Goldilocks, 0, 1).lambdas;
    let mut worst_margin = f64::INFINITY;
    for trial in 0..20 {
        let prior = gen_goldilocks_instance(505, trial, &settings).map_err(|e| e.to_string())?;
        let r = goldilocks_search(&prior, 1.0, &default_eta_grid(), &lambdas, &settings.families)
            .map_err(|e| e.to_string())?;
        let best = r.best.ok_or(format!("trial {trial}: no admissible channel"))?;
        if !r.found || best.mutual_information > 1.0 + 1e-9 || best.value <= r.v0 + 1e-6 {
            return Err(format!("trial {trial}: {r:?}"));
        }
        let hacked = quantizer_value_at(&prior, 1, HIGH_PRESSURE).map_err(|e| e.to_string())?;
        if hacked >= r.v0 {
            return Err(format!(
                "trial {trial}: quantizer at high pressure reaches {hacked} ≥ V₀ = {}",
                r.v0
            ));
        }
        worst_margin = worst_margin.min(best.value - r.v0);
    }
    Ok(format!(
        "20 instances improved with ≤ 1 bit (smallest gain {worst_margin:.4}), all hacked at λ = 1e6"
    ))
}

fn criterion_6() -> Outcome {
    let sizes = Sizes::default();
    let mut worst = 0.0f64;
    for trial in 0..500 {
        let mut rng = trial_rng(606, trial);
        let prior = sample_thm1_prior(&mut rng, &sizes).map_err(|e| e.to_string())?;
        let c = rng.random_range(1..=5);
        let channel = random_garbled_channel(&mut rng, &prior, c).map_err(|e| e.to_string())?;
        let coherent = coherent_projection(&prior, &channel).map_err(|e| e.to_string())?;
        let before = executed_value(&prior, &channel).map_err(|e| e.to_string())?;
        let after = executed_value(&prior, &coherent).map_err(|e| e.to_string())?;
        let residual = coherence_residual(&prior, &coherent).map_err(|e| e.to_string())?;
        if after < before - 1e-9 || residual > 1e-9 {
            return Err(format!("trial {trial}: {before} → {after}, residual {residual:e}"));
        }
        worst = worst.max(residual);
    }
    Ok(format!(
        "500 channels, projection never worse, worst residual {worst:.1e}"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = trial_rng(707, 0);
    for i in 0..100_000 {
        let (w, a, q) = random_frontloading_case(&mut rng);
        let r = check_frontloading(&w, &a, q).map_err(|e| format!("case {i}: {e}"))?;
        if !r.pass {
            return Err(format!("frontloading case {i}: {r:?}"));
        }
    }
    for i in 0..200 {
        let (x, y) = random_kl_case(&mut rng);
        let r = check_kl_decomposition(&x, &y).map_err(|e| e.to_string())?;
        if !r.pass {
            return Err(format!("KL case {i}: {r:?}"));
        }
    }
    let equality = check_positive_part_bounds(&[-1.0, 1.0], &Pmf::uniform(2).unwrap()).map_err(|e| e.to_string())?;
    if !equality.pass || equality.expected_positive != 0.5 || equality.sqrt_bound != 0.5 {
        return Err(format!("±1 equality case: {equality:?}"));
    }
    for i in 0..10_000 {
        let (values, law) = random_positive_part_case(&mut rng);
        let r = check_positive_part_bounds(&values, &law).map_err(|e| e.to_string())?;
        if !r.pass {
            return Err(format!("positive-part case {i}: {r:?}"));
        }
    }
    let sizes = Sizes::default();
    for i in 0..100 {
        let (prior, coherent) = random_coherent_instance(&mut rng, &sizes).map_err(|e| e.to_string())?;
        let r = check_dominating_performance(&prior, &coherent).map_err(|e| e.to_string())?;
        if !r.pass {
            return Err(format!("dominating case {i}: {r:?}"));
        }
    }
    Ok("1e5 frontloading, 200 KL decompositions, 1e4 positive parts, 100 dominating bounds".into())
}

fn criterion_8() -> Outcome {
    let sizes = Sizes::default();
    for trial in 0..100 {
        let mut rng = trial_rng(808, trial);
        let prior = sample_thm1_prior(&mut rng, &sizes).map_err(|e| e.to_string())?;
        for k in 0..=6 {
            let r = check_fixed_length_protocol(&prior, k).map_err(|e| e.to_string())?;
            if !r.pass {
                return Err(format!("prior {trial}, k = {k}: {r:?}"));
            }
        }
    }
    let tables = (0..256)
        .map(|i| RewardTable::from_units(vec![i, 0], 1000).unwrap())
        .collect();
    let ensemble = RewardEnsemble::explicit(tables, vec![1.0 / 256.0; 256]).map_err(|e| e.to_string())?;
    let uniform = compose_prior(
        FiniteModel::identity(2).unwrap(),
        ensemble,
        Coupling::Independent(Pmf::uniform(1).unwrap()),
    )
    .map_err(|e| e.to_string())?;
    let r = check_variable_length_protocol(&uniform, &fixed_length_code(256)).map_err(|e| e.to_string())?;
    if !r.pass || r.expected_length != 8.0 || (r.bound - 3.387_379_957_668_724).abs() > 1e-12 {
        return Err(format!("uniform-256: {r:?}"));
    }
    let mut rng = trial_rng(808, 1000);
    for i in 0..50 {
        let prior = sample_thm1_prior(&mut rng, &sizes).map_err(|e| e.to_string())?;
        let code = random_injective_code(&mut rng, prior.n_rewards());
        let r = check_variable_length_protocol(&prior, &code).map_err(|e| e.to_string())?;
        if !r.pass {
            return Err(format!("random code {i}: {r:?}"));
        }
    }
    Ok(format!(
        "700 fixed-length checks, uniform-256 E|M| = 8 ≥ {:.6}, 50 random codes",
        r.bound
    ))
}

fn criterion_9() -> Outcome {
    let mut parts = Vec::new();
    for p in [0.1, 0.25, 0.5] {
        let d = safe_set_information_demo(8, p, 0.9, None).map_err(|e| e.to_string())?;
        let gap = (d.mutual_information - d.expected_log_ratio).abs();
        if gap > 1e-9 || (d.expected_kl - d.expected_log_ratio).abs() > 1e-9 {
            return Err(format!("p = {p}: {d:?}"));
        }
        parts.push(format!("p={p}: I = {:.6}", d.mutual_information));
    }
    Ok(parts.join(", "))
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut count = 0;
    for (family, trials) in [
        (Family::Thm1, 40),
        (Family::Thm2, 20),
        (Family::Goldilocks, 3),
        (Family::Lemmas, 40),
        (Family::Protocols, 20),
    ] {
        let mut config = ExperimentConfig::new(family, 1010, trials);
        config.out_dir = Some(root.path().join(family.name()));
        let dir = config.out_dir.clone().unwrap();
        run_experiment(&config).map_err(|e| e.to_string())?;
        let first = read_all(&dir);
        // second run on one worker thread, same directory
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| run_experiment(&config)).map_err(|e| e.to_string())?;
        if read_all(&dir) != first {
            return Err(format!("{} outputs differ between runs", family.name()));
        }
        count += first.len();
    }
    Ok(format!("{count} files byte-identical across reruns and thread counts"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("thm1 bound over generated instances", criterion_1),
        ("thm2 cell bound and trivial partition", criterion_2),
        ("pinned worked example", criterion_3),
        ("value derivative at zero pressure", criterion_4),
        ("low-information improvement and hacking", criterion_5),
        ("coherent projection", criterion_6),
        ("lemma oracles", criterion_7),
        ("communication protocols", criterion_8),
        ("safe-set information identity", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS [{secs:6.2}s] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{secs:6.2}s] {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
