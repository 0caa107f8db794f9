use rayon::prelude::*;

use crate::advest::actor_critic::estimate_alg2;
use crate::advest::config::{derive_seed, EstimatorConfig};
use crate::advest::driver::EstimateOutcome;
use crate::advest::qlearn::estimate_alg1;
use crate::advest::MapArch;
use crate::error::{Error, Result};
use crate::taskcore::TaskSpec;

/// One sweep cell: a (α, seed replicate) estimation run. Failed runs carry
/// the error text so a single divergence does not sink the batch.
#[derive(Debug)]
pub struct SweepJob {
    pub alpha_index: usize,
    pub alpha: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<EstimateOutcome, String>,
}

/// The per-α curve plus the α-selection outcome: the largest α whose every
/// seed replicate ended with an admissible inner policy.
#[derive(Debug)]
pub struct SweepResult {
    pub jobs: Vec<SweepJob>,
    pub selected_alpha: Option<f64>,
}

impl SweepResult {
    pub fn entries_at(&self, alpha_index: usize) -> Vec<&SweepJob> {
        self.jobs.iter().filter(|j| j.alpha_index == alpha_index).collect()
    }

    pub fn selected_jobs(&self) -> Vec<&SweepJob> {
        match self.selected_alpha {
            None => Vec::new(),
            Some(a) => self.jobs.iter().filter(|j| j.alpha == a).collect(),
        }
    }

    /// Mean estimated complexity across seeds at the selected α.
    pub fn selected_mean_value(&self) -> Option<f64> {
        let jobs = self.selected_jobs();
        if jobs.is_empty() {
            return None;
        }
        let values: Vec<f64> = jobs
            .iter()
            .filter_map(|j| j.outcome.as_ref().ok().map(|o| o.result.value))
            .collect();
        if values.is_empty() {
            return None;
        }
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn run_one(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_arch: MapArch,
    g_arch: MapArch,
    pi_hidden_layers: usize,
    config: &EstimatorConfig,
) -> Result<EstimateOutcome> {
    if task1.actions.is_finite() && task2.actions.is_finite() {
        estimate_alg1(task1, task2, h_arch, g_arch, pi_hidden_layers, config)
    } else if !task1.actions.is_finite() && !task2.actions.is_finite() {
        estimate_alg2(task1, task2, h_arch, g_arch, pi_hidden_layers, config)
    } else {
        Err(Error::Config("tasks mix discrete and continuous actions".into()))
    }
}

/// Run the estimator per (α, seed) over an ascending α grid. Jobs are
/// independent and run in parallel; results merge in deterministic
/// (α, seed) order. Selection follows the protocol of taking the largest α
/// with all replicates admissible.
#[allow(clippy::too_many_arguments)]
pub fn alpha_sweep(
    task1: &TaskSpec,
    task2: &TaskSpec,
    alphas: &[f64],
    h_arch: MapArch,
    g_arch: MapArch,
    pi_hidden_layers: usize,
    base_config: &EstimatorConfig,
    per_alpha_seeds: usize,
) -> Result<SweepResult> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs a nonempty grid".into()));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("alphas must be strictly ascending".into()));
    }
    if per_alpha_seeds == 0 {
        return Err(Error::Config("need at least one seed per alpha".into()));
    }
    base_config.validate()?;

    let mut specs = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for si in 0..per_alpha_seeds {
            let seed = derive_seed(base_config.seed, ((ai as u64) << 32) | si as u64);
            specs.push((ai, alpha, si, seed));
        }
    }
    let jobs: Vec<SweepJob> = specs
        .par_iter()
        .map(|&(ai, alpha, si, seed)| {
            let config = base_config.with_alpha_seed(alpha, seed);
            let outcome = run_one(task1, task2, h_arch, g_arch, pi_hidden_layers, &config)
                .map_err(|e| e.to_string());
            SweepJob { alpha_index: ai, alpha, seed_index: si, seed, outcome }
        })
        .collect();

    let mut selected_alpha = None;
    for (ai, &alpha) in alphas.iter().enumerate() {
        let entries: Vec<&SweepJob> = jobs.iter().filter(|j| j.alpha_index == ai).collect();
        let all_admissible = !entries.is_empty()
            && entries.iter().all(|j| {
                j.outcome.as_ref().map(|o| o.result.inner_admissible).unwrap_or(false)
            });
        if all_admissible {
            selected_alpha = Some(alpha);
        }
    }
    Ok(SweepResult { jobs, selected_alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StudySpace {
    H,
    G,
}

/// One cell of the model-complexity study: the swept stage's architecture
/// and the per-seed estimates.
#[derive(Debug)]
pub struct StudyCell {
    pub space: StudySpace,
    pub arch: MapArch,
    pub values: Vec<f64>,
    pub admissible: Vec<bool>,
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Sensitivity of the estimate to encoder/decoder model complexity: sweep H
/// variants against a fixed 1-hidden-layer decoder, and G variants against a
/// fixed 2-hidden-layer encoder, `seeds` replicates per cell.
#[allow(clippy::too_many_arguments)]
pub fn model_complexity_study(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_variants: &[MapArch],
    g_variants: &[MapArch],
    pi_hidden_layers: usize,
    base_config: &EstimatorConfig,
    seeds: usize,
) -> Result<Vec<StudyCell>> {
    base_config.validate()?;
    if seeds == 0 {
        return Err(Error::Config("need at least one seed per cell".into()));
    }
    let mut specs: Vec<(StudySpace, MapArch, MapArch, MapArch)> = Vec::new();
    for &h in h_variants {
        specs.push((StudySpace::H, h, h, MapArch::Mlp { hidden_layers: 1 }));
    }
    for &g in g_variants {
        specs.push((StudySpace::G, g, MapArch::Mlp { hidden_layers: 2 }, g));
    }

    let mut flat: Vec<(usize, usize, u64)> = Vec::new();
    for (ci, _) in specs.iter().enumerate() {
        for si in 0..seeds {
            let seed = derive_seed(base_config.seed, 0x5000_0000 | ((ci as u64) << 20) | si as u64);
            flat.push((ci, si, seed));
        }
    }
    let runs: Vec<(usize, Result<EstimateOutcome>)> = flat
        .par_iter()
        .map(|&(ci, _si, seed)| {
            let (_, _, h_arch, g_arch) = specs[ci];
            let config = base_config.with_alpha_seed(base_config.alpha, seed);
            (ci, run_one(task1, task2, h_arch, g_arch, pi_hidden_layers, &config))
        })
        .collect();

    let mut cells = Vec::new();
    for (ci, (space, arch, _, _)) in specs.iter().enumerate() {
        let mut values = Vec::new();
        let mut admissible = Vec::new();
        for (rci, outcome) in &runs {
            if *rci == ci {
                let o = outcome.as_ref().map_err(|e| Error::Training(e.to_string()))?;
                values.push(o.result.value);
                admissible.push(o.result.inner_admissible);
            }
        }
        let (mean, std) = summarize(&values);
        cells.push(StudyCell { space: *space, arch: *arch, values, admissible, mean, std });
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::toy::{graded_task, matching_task};

    fn tiny_config(seed: u64) -> EstimatorConfig {
        let mut c = EstimatorConfig::q_learning_defaults(seed);
        c.max_iters = 40;
        c.batch_size = 32;
        c.warmup_steps = 32;
        c.hidden_width = 8;
        c.env_steps_per_iter = 16;
        c.eval_every = 10;
        c.eval_rollouts = 50;
        c
    }

    #[test]
    fn sweep_validates_the_grid() {
        let t1 = graded_task();
        let t2 = matching_task();
        let c = tiny_config(0);
        let arch = MapArch::Mlp { hidden_layers: 1 };
        assert!(alpha_sweep(&t1, &t2, &[], arch, arch, 1, &c, 1).is_err());
        assert!(alpha_sweep(&t1, &t2, &[1.0, 0.5], arch, arch, 1, &c, 1).is_err());
        assert!(alpha_sweep(&t1, &t2, &[0.5, 1.0], arch, arch, 1, &c, 0).is_err());
    }

    #[test]
    fn single_alpha_selection_matches_admissibility() {
        let t1 = graded_task();
        let t2 = matching_task();
        let c = tiny_config(3);
        let arch = MapArch::Mlp { hidden_layers: 1 };
        let sweep = alpha_sweep(&t1, &t2, &[0.1], arch, arch, 1, &c, 2).unwrap();
        assert_eq!(sweep.jobs.len(), 2);
        let all_admissible = sweep
            .jobs
            .iter()
            .all(|j| j.outcome.as_ref().map(|o| o.result.inner_admissible).unwrap_or(false));
        assert_eq!(sweep.selected_alpha.is_some(), all_admissible);
        // Selection is replayable from the per-job records.
        if let Some(a) = sweep.selected_alpha {
            assert_eq!(a, 0.1);
            assert_eq!(sweep.selected_jobs().len(), 2);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let t1 = graded_task();
        let t2 = matching_task();
        let c = tiny_config(9);
        let arch = MapArch::Mlp { hidden_layers: 1 };
        let a = alpha_sweep(&t1, &t2, &[0.1, 1.0], arch, arch, 1, &c, 2).unwrap();
        let b = alpha_sweep(&t1, &t2, &[0.1, 1.0], arch, arch, 1, &c, 2).unwrap();
        for (x, y) in a.jobs.iter().zip(&b.jobs) {
            let (ox, oy) = (x.outcome.as_ref().unwrap(), y.outcome.as_ref().unwrap());
            assert_eq!(ox.result, oy.result);
        }
        assert_eq!(a.selected_alpha, b.selected_alpha);
    }
}
