//! Executes validated experiments and persists results: JSON-lines records,
//! a run manifest, per-run training curves, and net checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use taskred_core::advest::{
    alpha_sweep, estimate_alg1, estimate_alg2, model_complexity_study, EstimateOutcome, MapNet,
};
use taskred_core::complexity::consistency_check;
use taskred_core::envs::{
    calibrate_success_threshold, gridworld::GridWorldFamily, make_speed_tracker,
    rotation_decoder, rotation_decoder_space, toy,
};
use taskred_core::props::gridworld_audit_inputs;
use taskred_core::reduction::{
    check_reduction, partial_order_audit, Decoder, DecoderSpace, Encoder, EncoderSpace,
    FunctionSpace, Witness,
};
use taskred_core::taskcore::{enumerate_admissible, Candidates, Policy, TaskSpec};

use crate::config::{
    ExperimentFile, ExperimentKind, SpacesBlock, TaskBlock,
};

pub struct RunReport {
    pub records_path: PathBuf,
    pub n_records: usize,
    pub had_compute_errors: bool,
}

#[derive(Serialize)]
struct VerdictRecord<'a> {
    schema: u32,
    kind: &'static str,
    holds: bool,
    n_policies: usize,
    witnesses: &'a [Witness],
    counterexample: Option<usize>,
    family_digest: &'a str,
    task1_digest: &'a str,
    task2_digest: &'a str,
}

#[derive(Serialize)]
struct ConsistencyRecord<'a> {
    schema: u32,
    kind: &'static str,
    value: f64,
    reduction_holds: bool,
    consistent: bool,
    task1_digest: &'a str,
    task2_digest: &'a str,
}

#[derive(Serialize)]
struct AuditCheckRecord {
    name: String,
    passed: bool,
    violations: Vec<String>,
}

#[derive(Serialize)]
struct AuditRecord {
    schema: u32,
    kind: &'static str,
    hypotheses_hold: bool,
    all_passed: bool,
    reductions: Vec<Vec<bool>>,
    checks: Vec<AuditCheckRecord>,
}

#[derive(Serialize)]
struct CalibrationRecord {
    schema: u32,
    kind: &'static str,
    v: f64,
    r_star: f64,
    individual_return: f64,
    individual_stderr: f64,
    seed: u64,
    task_digest: String,
}

#[derive(Serialize)]
struct StudyCellRecord {
    schema: u32,
    kind: &'static str,
    space: String,
    arch: String,
    mean: f64,
    std: f64,
    values: Vec<f64>,
    admissible: Vec<bool>,
}

#[derive(Serialize)]
struct SweepSummaryRecord {
    schema: u32,
    kind: &'static str,
    selected_alpha: Option<f64>,
    mean_value_at_selected: Option<f64>,
    no_admissible_alpha: bool,
}

#[derive(Serialize)]
struct ErrorRecord {
    schema: u32,
    kind: &'static str,
    context: String,
    message: String,
}

#[derive(Serialize)]
struct Manifest {
    schema: u32,
    config_digest: String,
    version: String,
    kind: String,
    seeds: Vec<u64>,
    wall_time_secs: f64,
    records: String,
}

fn line<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

struct Outputs {
    lines: Vec<String>,
    seeds: Vec<u64>,
    had_errors: bool,
    curves: Vec<(String, String)>,
    checkpoints: Vec<(String, String)>,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            lines: Vec::new(),
            seeds: Vec::new(),
            had_errors: false,
            curves: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    fn push_outcome_files(&mut self, tag: &str, outcome: &EstimateOutcome) -> Result<()> {
        let mut csv = String::from("iter,r2,r1_composed,c1,c2\n");
        for p in &outcome.curve {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                p.iter, p.r2, p.r1_composed, p.c1, p.c2
            ));
        }
        self.curves.push((format!("{tag}.csv"), csv));
        self.checkpoints
            .push((format!("{tag}.pi2.json"), outcome.pi2.to_checkpoint_json()?));
        if let MapNet::Net(n) = &outcome.h {
            self.checkpoints.push((format!("{tag}.h.json"), n.to_checkpoint_json()?));
        }
        if let MapNet::Net(n) = &outcome.g {
            self.checkpoints.push((format!("{tag}.g.json"), n.to_checkpoint_json()?));
        }
        Ok(())
    }
}

/// Resolve spaces + admissible family for the exact kinds.
struct ExactInputs {
    task1: TaskSpec,
    task2: TaskSpec,
    h_space: EncoderSpace,
    g_space: DecoderSpace,
    admissible2: Vec<Policy>,
}

fn exact_inputs(file: &ExperimentFile) -> Result<ExactInputs> {
    let block1 = file.task1.as_ref().expect("validated");
    let block2 = file.task2.as_ref().expect("validated");
    let task1 = file.build_task(block1)?;
    let task2 = file.build_task(block2)?;
    let spaces = file.spaces.as_ref().expect("validated");
    let family_cfg = file.family.clone().unwrap_or_default();

    match (block1, block2) {
        (
            TaskBlock::Gridworld { n, m, layout_seed, .. },
            TaskBlock::Gridworld { n: n2, m: m2, goal: goal2, layout_seed: ls2 },
        ) => {
            if n != n2 || m != m2 || layout_seed != ls2 {
                bail!("config validation: gridworld task blocks must share n, m, layout_seed");
            }
            let family = GridWorldFamily::build(*n, *m, *layout_seed, 64)?;
            let (h_space, g_space) = match spaces {
                SpacesBlock::Rotations => {
                    (family.rotation_encoder_space()?, rotation_decoder_space())
                }
                SpacesBlock::SingletonRotation { k } => (
                    FunctionSpace::explicit(vec![family.rotation_encoder(*k)?])?,
                    FunctionSpace::explicit(vec![rotation_decoder(*k)])?,
                ),
                SpacesBlock::Identity => (
                    FunctionSpace::explicit(vec![Encoder::identity(family.observation_count())])?,
                    FunctionSpace::explicit(vec![Decoder::identity(4)])?,
                ),
                SpacesBlock::AllFiniteMaps => {
                    bail!("config validation: all-finite-maps spaces are toy-scale only")
                }
            };
            let admissible2 =
                family.admissible_family(goal2.to_core(), family_cfg.size, family_cfg.seed)?;
            Ok(ExactInputs { task1, task2, h_space, g_space, admissible2 })
        }
        (TaskBlock::Toy { .. }, TaskBlock::Toy { .. }) => {
            let n_obs1 = task1.observations.size().expect("toys are finite");
            let n_obs2 = task2.observations.size().expect("toys are finite");
            let n_act1 = task1.actions.size().expect("toys are finite");
            let n_act2 = task2.actions.size().expect("toys are finite");
            let (h_space, g_space) = match spaces {
                SpacesBlock::Identity => {
                    if n_obs1 != n_obs2 || n_act1 != n_act2 {
                        bail!("config validation: identity spaces need matching space sizes");
                    }
                    (
                        FunctionSpace::explicit(vec![Encoder::identity(n_obs1)])?,
                        FunctionSpace::explicit(vec![Decoder::identity(n_act1)])?,
                    )
                }
                SpacesBlock::AllFiniteMaps => (
                    EncoderSpace::from_tables(toy::all_maps(n_obs1, n_obs2))?,
                    DecoderSpace::from_tables(toy::all_maps(n_act2, n_act1))?,
                ),
                _ => bail!("config validation: rotation spaces need gridworld tasks"),
            };
            let admissible2 = enumerate_admissible(&task2, Candidates::FullEnumeration)?;
            Ok(ExactInputs { task1, task2, h_space, g_space, admissible2 })
        }
        _ => bail!("config validation: exact kinds need matching gridworld or toy task blocks"),
    }
}

fn execute(file: &ExperimentFile) -> Result<Outputs> {
    let mut out = Outputs::new();
    match file.kind {
        ExperimentKind::CheckReduction => {
            let inputs = exact_inputs(file)?;
            let verdict = check_reduction(
                &inputs.task1,
                &inputs.task2,
                &inputs.h_space,
                &inputs.g_space,
                &inputs.admissible2,
            )?;
            out.lines.push(line(&VerdictRecord {
                schema: 1,
                kind: "reduction-verdict",
                holds: verdict.holds,
                n_policies: verdict.n_policies,
                witnesses: &verdict.witnesses,
                counterexample: verdict.counterexample,
                family_digest: &verdict.family_digest,
                task1_digest: inputs.task1.digest(),
                task2_digest: inputs.task2.digest(),
            })?);
        }
        ExperimentKind::ExactComplexity => {
            let inputs = exact_inputs(file)?;
            let report = consistency_check(
                &inputs.task1,
                &inputs.task2,
                &inputs.h_space,
                &inputs.g_space,
                &inputs.admissible2,
            )?;
            out.lines.push(line(&report.complexity)?);
            out.lines.push(line(&ConsistencyRecord {
                schema: 1,
                kind: "consistency",
                value: report.complexity.value,
                reduction_holds: report.reduction_holds,
                consistent: report.consistent,
                task1_digest: inputs.task1.digest(),
                task2_digest: inputs.task2.digest(),
            })?);
        }
        ExperimentKind::Estimate => {
            let task1 = file.build_task(file.task1.as_ref().expect("validated"))?;
            let task2 = file.build_task(file.task2.as_ref().expect("validated"))?;
            let config = file.estimator_config()?;
            let arch = file.architecture();
            out.seeds.push(config.seed);
            let outcome = if task1.actions.is_finite() {
                estimate_alg1(
                    &task1,
                    &task2,
                    arch.encoder.to_core(),
                    arch.decoder.to_core(),
                    arch.policy_hidden_layers,
                    &config,
                )?
            } else {
                estimate_alg2(
                    &task1,
                    &task2,
                    arch.encoder.to_core(),
                    arch.decoder.to_core(),
                    arch.policy_hidden_layers,
                    &config,
                )?
            };
            out.lines.push(line(&outcome.result)?);
            out.push_outcome_files("estimate", &outcome)?;
        }
        ExperimentKind::AlphaSweep => {
            let task1 = file.build_task(file.task1.as_ref().expect("validated"))?;
            let task2 = file.build_task(file.task2.as_ref().expect("validated"))?;
            let config = file.estimator_config()?;
            let arch = file.architecture();
            let sweep_cfg = file.sweep.as_ref().expect("validated");
            let sweep = alpha_sweep(
                &task1,
                &task2,
                &sweep_cfg.alphas,
                arch.encoder.to_core(),
                arch.decoder.to_core(),
                arch.policy_hidden_layers,
                &config,
                sweep_cfg.seeds_per_alpha,
            )?;
            for job in &sweep.jobs {
                out.seeds.push(job.seed);
                match &job.outcome {
                    Ok(o) => {
                        out.lines.push(line(&o.result)?);
                        out.push_outcome_files(
                            &format!("alpha{}_seed{}", job.alpha_index, job.seed_index),
                            o,
                        )?;
                    }
                    Err(msg) => {
                        out.had_errors = true;
                        out.lines.push(line(&ErrorRecord {
                            schema: 1,
                            kind: "error",
                            context: format!("alpha={} seed_index={}", job.alpha, job.seed_index),
                            message: msg.clone(),
                        })?);
                    }
                }
            }
            out.lines.push(line(&SweepSummaryRecord {
                schema: 1,
                kind: "sweep-summary",
                selected_alpha: sweep.selected_alpha,
                mean_value_at_selected: sweep.selected_mean_value(),
                no_admissible_alpha: sweep.selected_alpha.is_none(),
            })?);
        }
        ExperimentKind::ModelStudy => {
            let task1 = file.build_task(file.task1.as_ref().expect("validated"))?;
            let task2 = file.build_task(file.task2.as_ref().expect("validated"))?;
            let config = file.estimator_config()?;
            let arch = file.architecture();
            let study = file.study.as_ref().expect("validated");
            let h_variants: Vec<_> = study.h_variants.iter().map(|a| a.to_core()).collect();
            let g_variants: Vec<_> = study.g_variants.iter().map(|a| a.to_core()).collect();
            let cells = model_complexity_study(
                &task1,
                &task2,
                &h_variants,
                &g_variants,
                arch.policy_hidden_layers,
                &config,
                study.seeds,
            )?;
            for cell in &cells {
                out.lines.push(line(&StudyCellRecord {
                    schema: 1,
                    kind: "study-cell",
                    space: format!("{:?}", cell.space),
                    arch: cell.arch.label(),
                    mean: cell.mean,
                    std: cell.std,
                    values: cell.values.clone(),
                    admissible: cell.admissible.clone(),
                })?);
            }
        }
        ExperimentKind::Audit => {
            let audit = file.audit.as_ref().expect("validated");
            let (tasks, spaces, families) = gridworld_audit_inputs(
                audit.n,
                audit.m,
                audit.family_size,
                audit.family_seed ^ audit.layout_seed,
            )?;
            let report = partial_order_audit(&tasks, &spaces, &families)?;
            out.lines.push(line(&AuditRecord {
                schema: 1,
                kind: "audit",
                hypotheses_hold: report.axioms.hypotheses_hold(),
                all_passed: report.all_passed(),
                reductions: report.reductions.clone(),
                checks: report
                    .checks
                    .iter()
                    .map(|c| AuditCheckRecord {
                        name: c.name.to_string(),
                        passed: c.passed,
                        violations: c.violations.clone(),
                    })
                    .collect(),
            })?);
        }
        ExperimentKind::Calibrate => {
            let calibrate = file.calibrate.as_ref().expect("validated");
            let config = file.estimator_config()?;
            for &v in &calibrate.speeds {
                let task = make_speed_tracker(v)?;
                out.seeds.push(config.seed);
                match calibrate_success_threshold(&task, &config) {
                    Ok(outcome) => {
                        out.lines.push(line(&CalibrationRecord {
                            schema: 1,
                            kind: "calibration",
                            v,
                            r_star: outcome.task.success_threshold,
                            individual_return: outcome.individual_return.value,
                            individual_stderr: outcome.individual_return.stderr,
                            seed: outcome.seed,
                            task_digest: outcome.task.digest().to_string(),
                        })?);
                    }
                    Err(e) => {
                        out.had_errors = true;
                        out.lines.push(line(&ErrorRecord {
                            schema: 1,
                            kind: "error",
                            context: format!("calibrate v={v}"),
                            message: e.to_string(),
                        })?);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Run a validated experiment and persist everything under its output
/// directory. Returns the record count and whether any record is an error.
pub fn run(file: &ExperimentFile, canonical: &str, output_override: Option<&Path>) -> Result<RunReport> {
    let start = Instant::now();
    let out_dir = output_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&file.output));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let outputs = match file.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| anyhow!("building worker pool: {e}"))?;
            pool.install(|| execute(file))?
        }
        None => execute(file)?,
    };

    let records_path = out_dir.join("results.jsonl");
    let mut body = String::new();
    for l in &outputs.lines {
        body.push_str(l);
        body.push('\n');
    }
    fs::write(&records_path, body)?;

    if !outputs.curves.is_empty() {
        let curve_dir = out_dir.join("curves");
        fs::create_dir_all(&curve_dir)?;
        for (name, csv) in &outputs.curves {
            fs::write(curve_dir.join(name), csv)?;
        }
    }
    if !outputs.checkpoints.is_empty() {
        let ck_dir = out_dir.join("checkpoints");
        fs::create_dir_all(&ck_dir)?;
        for (name, json) in &outputs.checkpoints {
            fs::write(ck_dir.join(name), json)?;
        }
    }

    fs::write(out_dir.join("config.resolved.toml"), canonical)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let config_digest: String =
        hasher.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        schema: 1,
        config_digest,
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: format!("{:?}", file.kind),
        seeds: outputs.seeds.clone(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        records: "results.jsonl".to_string(),
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    Ok(RunReport {
        records_path,
        n_records: outputs.lines.len(),
        had_compute_errors: outputs.had_errors,
    })
}

