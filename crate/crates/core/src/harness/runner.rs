use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Family, VDaggerRule};
use super::generators::{
    gen_goldilocks_instance, quantizer_value_at, random_coherent_instance, random_frontloading_case,
    random_garbled_channel, random_injective_code, random_kl_case, random_positive_part_case, sample_thm1_instance,
    sample_thm1_prior, sample_thm2_instance, HIGH_PRESSURE,
};
use super::plot::emit_plot;
use super::rng::trial_rng;
use crate::agent::{coherence_residual, coherent_projection};
use crate::error::{Error, Result};
use crate::prob::{format_f64, ExtReal};
use crate::theorems::{
    check_dominating_performance, check_fixed_length_protocol, check_frontloading, check_kl_decomposition,
    check_positive_part_bounds, check_variable_length_protocol, fixed_length_code, goldilocks_search, one_to_one_code,
    value_curve, verify_thm1, verify_thm2, CurvePoint, VerificationReport,
};
use crate::valuation::{contemporary_value, executed_value, primordial_quantities, PrimordialMode};
use crate::world::{
    instance_digest, make_noise_channel, make_quantizer_channel, OutcomePartition, ProxyChannel, WorldPrior,
};

pub const CSV_SCHEMA: &str = "ghl-csv/1";
pub const REPORT_SCHEMA: &str = "ghl-report/1";
pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

/// One line of `trials.csv`. Numbers are written with 17 significant
/// digits; `inf` marks an infinite side; empty means undefined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub check: String,
    pub item: String,
    pub applicable: bool,
    pub pass: bool,
    pub lhs: String,
    pub rhs: String,
    pub margin: String,
    pub digest: String,
}

/// One line of a `curve-NNNN.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveRow {
    pub trial: u64,
    pub channel: String,
    pub lambda: String,
    pub value: String,
    pub v0: String,
    pub v_bar: String,
    pub sigma_bar: String,
    pub mutual_information: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub csv_schema: String,
    pub family: Family,
    pub seed: u64,
    pub trials: usize,
    /// Rows in `trials.csv`; every count below refers to rows.
    pub checks: usize,
    pub applicable: usize,
    pub passed: usize,
    pub min_margin: Option<ExtReal>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.applicable
    }
}

/// A row with its margin kept exact for aggregation.
#[derive(Debug, Clone)]
struct Check {
    row: TrialRow,
    margin: Option<ExtReal>,
}

#[derive(Debug, Clone, Default)]
struct TrialOutput {
    checks: Vec<Check>,
    curves: Vec<CurveRow>,
}

fn opt_num(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

fn opt_ext(x: Option<ExtReal>) -> String {
    x.map(ExtReal::to_csv_field).unwrap_or_default()
}

impl TrialOutput {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        trial: u64,
        check: &str,
        item: &str,
        applicable: bool,
        pass: bool,
        lhs: Option<ExtReal>,
        rhs: Option<ExtReal>,
        margin: Option<ExtReal>,
        digest: &str,
    ) {
        self.checks.push(Check {
            row: TrialRow {
                trial,
                check: check.to_string(),
                item: item.to_string(),
                applicable,
                pass: applicable && pass,
                lhs: opt_ext(lhs),
                rhs: opt_ext(rhs),
                margin: opt_ext(margin),
                digest: digest.to_string(),
            },
            margin: if applicable { margin } else { None },
        });
    }

    /// `lhs ≤ rhs` style check with finite sides.
    fn push_le(&mut self, trial: u64, check: &str, item: &str, lhs: f64, rhs: f64, pass: bool) {
        let f = ExtReal::Finite;
        self.push(
            trial,
            check,
            item,
            true,
            pass,
            Some(f(lhs)),
            Some(f(rhs)),
            Some(f(rhs - lhs)),
            "",
        );
    }

    fn push_report(&mut self, trial: u64, item: &str, r: &VerificationReport) {
        self.push(
            trial,
            &r.theorem,
            item,
            r.applicable,
            r.pass,
            Some(r.lhs),
            r.rhs,
            r.margin,
            &r.context.digest,
        );
    }

    fn push_curve(&mut self, trial: u64, channel: &str, points: &[CurvePoint]) {
        for p in points {
            self.curves.push(CurveRow {
                trial,
                channel: channel.to_string(),
                lambda: format_f64(p.lambda),
                value: format_f64(p.value),
                v0: format_f64(p.v0),
                v_bar: opt_num(p.v_bar),
                sigma_bar: opt_num(p.sigma_bar),
                mutual_information: format_f64(p.mutual_information),
            });
        }
    }
}

/// `V†` under the configured rule.
pub fn choose_v_dagger(rule: VDaggerRule, prior: &WorldPrior, channel: &ProxyChannel) -> Result<f64> {
    match rule {
        VDaggerRule::Absolute { value } => Ok(value),
        VDaggerRule::EqualToVHat => executed_value(prior, channel),
        VDaggerRule::Midpoint => {
            let p = primordial_quantities(prior, &PrimordialMode::ExactIid)
                .or_else(|_| primordial_quantities(prior, &PrimordialMode::default_grid_search()))?;
            let (t, v0) = (p.threshold(), contemporary_value(prior));
            Ok(if v0 > t { (t + v0) / 2.0 } else { t })
        }
    }
}

fn thm1_trial(config: &ExperimentConfig, trial: u64, rng: &mut ChaCha8Rng, out: &mut TrialOutput) -> Result<()> {
    let inst = sample_thm1_instance(rng, &config.sizes, &config.channels)?;
    for (label, ch) in &inst.menu {
        let v_dagger = choose_v_dagger(config.v_dagger, &inst.prior, ch)?;
        out.push_report(trial, label, &verify_thm1(&inst.prior, ch, v_dagger)?);
    }
    Ok(())
}

fn thm2_trial(config: &ExperimentConfig, trial: u64, rng: &mut ChaCha8Rng, out: &mut TrialOutput) -> Result<()> {
    let inst = sample_thm2_instance(rng, &config.sizes, &config.channels)?;
    for (label, ch) in &inst.menu {
        let v_dagger = choose_v_dagger(config.v_dagger, &inst.prior, ch)?;
        out.push_report(trial, label, &verify_thm2(&inst.prior, &inst.partition, ch, v_dagger)?);
    }
    // with singleton cells the two bounds must agree exactly
    let plain = sample_thm1_instance(rng, &config.sizes, &config.channels)?;
    let trivial = OutcomePartition::trivial(plain.prior.n_outcomes())?;
    let digest = instance_digest(&plain.prior);
    for (label, ch) in &plain.menu {
        let v_dagger = choose_v_dagger(config.v_dagger, &plain.prior, ch)?;
        let a = verify_thm1(&plain.prior, ch, v_dagger)?;
        let b = verify_thm2(&plain.prior, &trivial, ch, v_dagger)?;
        out.push(
            trial,
            "thm2-trivial",
            label,
            true,
            a.same_verdict(&b),
            None,
            None,
            None,
            &digest,
        );
    }
    Ok(())
}

fn goldilocks_trial(config: &ExperimentConfig, trial: u64, out: &mut TrialOutput) -> Result<()> {
    let g = &config.goldilocks;
    let prior = gen_goldilocks_instance(config.seed, trial, g)?;
    let digest = instance_digest(&prior);
    let search = goldilocks_search(&prior, g.k_bits, &g.eta_grid, &config.lambdas, &g.families)?;
    let v0 = ExtReal::Finite(search.v0);
    let best = search.best.map(|b| ExtReal::Finite(b.value));
    out.push(
        trial,
        "goldilocks-search",
        &format!("K={}", g.k_bits),
        search.applicable,
        search.found,
        best,
        Some(v0),
        best.and_then(|b| b.margin(v0)),
        &digest,
    );
    let hacked = quantizer_value_at(&prior, 1, HIGH_PRESSURE)?;
    out.push(
        trial,
        "quantizer-hack",
        "k=1",
        true,
        hacked < search.v0,
        Some(ExtReal::Finite(hacked)),
        Some(v0),
        Some(ExtReal::Finite(search.v0 - hacked)),
        &digest,
    );
    if let Some(w) = search.best {
        let channel = make_noise_channel(&prior, &w.family.spec(prior.n_outcomes(), w.eta)?)?;
        out.push_curve(trial, "witness", &value_curve(&prior, &channel, &config.lambdas, None)?);
    }
    let quantizer = make_quantizer_channel(&prior, 1);
    out.push_curve(
        trial,
        "quantizer-1",
        &value_curve(&prior, &quantizer, &config.lambdas, None)?,
    );
    Ok(())
}

fn lemmas_trial(config: &ExperimentConfig, trial: u64, rng: &mut ChaCha8Rng, out: &mut TrialOutput) -> Result<()> {
    let (w, a, q) = random_frontloading_case(rng);
    let r = check_frontloading(&w, &a, q)?;
    out.push_le(trial, "frontloading", "", r.lhs, r.rhs, r.pass);

    let (x, y) = random_kl_case(rng);
    let r = check_kl_decomposition(&x, &y)?;
    out.push(
        trial,
        "kl-decomposition",
        "",
        true,
        r.pass,
        Some(r.direct),
        Some(r.decomposed),
        None,
        "",
    );

    let (values, law) = random_positive_part_case(rng);
    let r = check_positive_part_bounds(&values, &law)?;
    let rhs = r.sigma_bound.map_or(r.sqrt_bound, |s| s.min(r.sqrt_bound));
    out.push_le(trial, "positive-part", "", r.expected_positive, rhs, r.pass);

    let prior = sample_thm1_prior(rng, &config.sizes)?;
    let c = rand::Rng::random_range(rng, 1..=4);
    let garbled = random_garbled_channel(rng, &prior, c)?;
    let coherent = coherent_projection(&prior, &garbled)?;
    let (before, after) = (executed_value(&prior, &garbled)?, executed_value(&prior, &coherent)?);
    let residual = coherence_residual(&prior, &coherent)?;
    out.push_le(
        trial,
        "coherence",
        "",
        before,
        after,
        after >= before - 1e-9 && residual <= 1e-9,
    );

    let (prior, coherent) = random_coherent_instance(rng, &config.sizes)?;
    let r = check_dominating_performance(&prior, &coherent)?;
    out.push_le(trial, "dominating-performance", "", r.lhs, r.rhs, r.pass);
    Ok(())
}

fn protocols_trial(config: &ExperimentConfig, trial: u64, rng: &mut ChaCha8Rng, out: &mut TrialOutput) -> Result<()> {
    let prior = sample_thm1_prior(rng, &config.sizes)?;
    for k in 0..=6 {
        let r = check_fixed_length_protocol(&prior, k)?;
        // k ≥ I is the inequality, so k sits on the right
        out.push_le(
            trial,
            "fixed-length",
            &format!("k={k}"),
            r.information,
            k as f64,
            r.pass,
        );
    }
    let n = prior.n_rewards();
    let codes = [
        ("fixed-code", fixed_length_code(n)),
        ("one-to-one", one_to_one_code(prior.reward_marginal())),
        ("random-code", random_injective_code(rng, n)),
    ];
    for (label, code) in &codes {
        let r = check_variable_length_protocol(&prior, code)?;
        out.push_le(trial, "variable-length", label, r.bound, r.expected_length, r.pass);
    }
    Ok(())
}

fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialOutput> {
    let mut rng = trial_rng(config.seed, trial);
    let mut out = TrialOutput::default();
    match config.family {
        Family::Thm1 => thm1_trial(config, trial, &mut rng, &mut out)?,
        Family::Thm2 => thm2_trial(config, trial, &mut rng, &mut out)?,
        Family::Goldilocks => goldilocks_trial(config, trial, &mut out)?,
        Family::Lemmas => lemmas_trial(config, trial, &mut rng, &mut out)?,
        Family::Protocols => protocols_trial(config, trial, &mut rng, &mut out)?,
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Full output of a run before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub rows: Vec<TrialRow>,
    pub curves: Vec<CurveRow>,
}

/// Runs every trial (in parallel, collected in trial order) without
/// writing files.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let outputs = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut min_margin: Option<ExtReal> = None;
    let (mut applicable, mut passed) = (0, 0);
    for out in outputs {
        for c in out.checks {
            if c.row.applicable {
                applicable += 1;
                passed += c.row.pass as usize;
            }
            if let Some(m) = c.margin {
                min_margin = Some(match min_margin {
                    Some(old) if old <= m => old,
                    _ => m,
                });
            }
            rows.push(c.row);
        }
        curves.extend(out.curves);
    }
    let summary = RunSummary {
        schema: REPORT_SCHEMA.to_string(),
        csv_schema: CSV_SCHEMA.to_string(),
        family: config.family,
        seed: config.seed,
        trials: config.trials,
        checks: rows.len(),
        applicable,
        passed,
        min_margin,
        files: Vec::new(),
        wall_time: start.elapsed(),
    };
    Ok(RunOutput { summary, rows, curves })
}

/// Runs the experiment and, when `config.out_dir` is set, writes
/// `config.json`, `trials.csv`, per-trial curves with plots, and
/// `summary.json` there.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let RunOutput {
        mut summary,
        rows,
        curves,
    } = execute(config)?;
    let Some(dir) = &config.out_dir else {
        return Ok(summary);
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| -> PathBuf { dir.join(name) };

    let cfg = path(CONFIG_FILE);
    fs::write(&cfg, serde_json::to_string_pretty(config)? + "\n").map_err(|e| Error::io(&cfg, e))?;
    write_csv(&path(TRIALS_FILE), &rows)?;
    summary.files = vec![CONFIG_FILE.to_string(), TRIALS_FILE.to_string()];

    let mut start = 0;
    while start < curves.len() {
        let trial = curves[start].trial;
        let end = start + curves[start..].iter().take_while(|c| c.trial == trial).count();
        let csv_name = format!("curve-{trial:04}.csv");
        let svg_name = format!("curve-{trial:04}.svg");
        write_csv(&path(&csv_name), &curves[start..end])?;
        emit_plot(&path(&csv_name), &path(&svg_name))?;
        summary.files.push(csv_name);
        summary.files.push(svg_name);
        start = end;
    }
    let sum = path(SUMMARY_FILE);
    fs::write(&sum, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&sum, e))?;
    Ok(summary)
}
