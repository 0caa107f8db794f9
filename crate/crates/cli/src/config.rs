//! Declarative experiment files: schema-validated TOML with key=value
//! overrides. Unknown keys are rejected everywhere so manifests fully
//! determine runs.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use taskred_core::advest::{EstimatorConfig, MapArch};
use taskred_core::envs::{self, GoalDir, GravityDir};
use taskred_core::taskcore::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CheckReduction,
    ExactComplexity,
    Estimate,
    AlphaSweep,
    ModelStudy,
    Audit,
    Calibrate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskBlock {
    Cartpole {
        direction: CartpoleDirection,
    },
    Gridworld {
        n: i32,
        m: usize,
        goal: Goal,
        #[serde(default)]
        layout_seed: u64,
    },
    SpeedTracker {
        v: f64,
        /// Calibrated success threshold from a `calibrate` run; the builder
        /// default (the horizon) applies when absent.
        #[serde(default)]
        success_threshold: Option<f64>,
    },
    Toy {
        name: ToyName,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CartpoleDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Goal {
    N,
    E,
    S,
    W,
}

impl Goal {
    pub fn to_core(self) -> GoalDir {
        match self {
            Goal::N => GoalDir::N,
            Goal::E => GoalDir::E,
            Goal::S => GoalDir::S,
            Goal::W => GoalDir::W,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyName {
    Matching,
    Graded,
    GradedFlipped,
    Pay0,
    Pay1,
}

/// Explicit function spaces for exact experiment kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpacesBlock {
    /// All four 90°-rotation encoders/decoders of a gridworld family.
    Rotations,
    /// Exactly one rotation pair (the analytic witness when k matches).
    SingletonRotation { k: usize },
    /// Identity-only spaces.
    Identity,
    /// Every function between the finite observation/action index sets
    /// (toy-scale only).
    AllFiniteMaps,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FamilyBlock {
    fn default() -> Self {
        FamilyBlock { size: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    QLearning,
    ActorCritic,
}

/// Estimator overrides; anything omitted takes the algorithm's default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    pub algorithm: Option<Algorithm>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub lr_policy: Option<f64>,
    pub lr_enc_dec: Option<f64>,
    pub lr_critic: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_iters: Option<usize>,
    pub eval_rollouts: Option<usize>,
    pub curve_eval_rollouts: Option<usize>,
    pub admissibility_tolerance: Option<f64>,
    pub gamma: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub env_steps_per_iter: Option<usize>,
    pub eval_every: Option<usize>,
    pub convergence_window: Option<usize>,
    pub target_update_every: Option<usize>,
    pub warmup_steps: Option<usize>,
    pub hidden_width: Option<usize>,
    pub critic_hidden_layers: Option<usize>,
    pub critic_updates_per_iter: Option<usize>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    pub epsilon_fraction: Option<f64>,
    pub gaussian_std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArchSpec {
    Identity,
    Mlp { hidden_layers: usize },
    MlpNearIdentity { hidden_layers: usize },
}

impl ArchSpec {
    pub fn to_core(self) -> MapArch {
        match self {
            ArchSpec::Identity => MapArch::Identity,
            ArchSpec::Mlp { hidden_layers } => MapArch::Mlp { hidden_layers },
            ArchSpec::MlpNearIdentity { hidden_layers } => {
                MapArch::MlpNearIdentity { hidden_layers }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureBlock {
    pub encoder: ArchSpec,
    pub decoder: ArchSpec,
    #[serde(default = "default_pi_hidden")]
    pub policy_hidden_layers: usize,
}

fn default_pi_hidden() -> usize {
    2
}

impl Default for ArchitectureBlock {
    fn default() -> Self {
        ArchitectureBlock {
            encoder: ArchSpec::Mlp { hidden_layers: 2 },
            decoder: ArchSpec::Mlp { hidden_layers: 1 },
            policy_hidden_layers: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub alphas: Vec<f64>,
    pub seeds_per_alpha: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    #[serde(default)]
    pub h_variants: Vec<ArchSpec>,
    #[serde(default)]
    pub g_variants: Vec<ArchSpec>,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBlock {
    pub n: i32,
    pub m: usize,
    #[serde(default)]
    pub layout_seed: u64,
    #[serde(default = "default_audit_family")]
    pub family_size: usize,
    #[serde(default)]
    pub family_seed: u64,
}

fn default_audit_family() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    pub speeds: Vec<f64>,
}

/// The whole experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub output: String,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub task1: Option<TaskBlock>,
    #[serde(default)]
    pub task2: Option<TaskBlock>,
    #[serde(default)]
    pub spaces: Option<SpacesBlock>,
    #[serde(default)]
    pub family: Option<FamilyBlock>,
    #[serde(default)]
    pub estimator: Option<EstimatorBlock>,
    #[serde(default)]
    pub architecture: Option<ArchitectureBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub study: Option<StudyBlock>,
    #[serde(default)]
    pub audit: Option<AuditBlock>,
    #[serde(default)]
    pub calibrate: Option<CalibrateBlock>,
}

impl ExperimentFile {
    /// Parse + override + validate. Override keys are dotted TOML paths,
    /// e.g. `estimator.alpha=10.0`.
    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, overrides)
    }

    /// Returns the experiment and the canonical (post-override) TOML text
    /// that the manifest digest is computed over.
    pub fn parse(text: &str, overrides: &[String]) -> Result<(Self, String)> {
        let mut value: toml::Value = text.parse().context("config is not valid TOML")?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let canonical = toml::to_string(&value).context("re-serializing config")?;
        let file: ExperimentFile =
            value.try_into().map_err(|e| anyhow::anyhow!("config validation: {e}"))?;
        file.validate()?;
        Ok((file, canonical))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            bail!("config validation: field 'schema' must be 1, got {}", self.schema);
        }
        let need = |cond: bool, what: &str| -> Result<()> {
            if cond {
                Ok(())
            } else {
                bail!("config validation: kind {:?} requires the '{what}' block", self.kind)
            }
        };
        match self.kind {
            ExperimentKind::CheckReduction | ExperimentKind::ExactComplexity => {
                need(self.task1.is_some(), "task1")?;
                need(self.task2.is_some(), "task2")?;
                need(self.spaces.is_some(), "spaces")?;
            }
            ExperimentKind::Estimate => {
                need(self.task1.is_some(), "task1")?;
                need(self.task2.is_some(), "task2")?;
            }
            ExperimentKind::AlphaSweep => {
                need(self.task1.is_some(), "task1")?;
                need(self.task2.is_some(), "task2")?;
                need(self.sweep.is_some(), "sweep")?;
            }
            ExperimentKind::ModelStudy => {
                need(self.task1.is_some(), "task1")?;
                need(self.task2.is_some(), "task2")?;
                need(self.study.is_some(), "study")?;
            }
            ExperimentKind::Audit => need(self.audit.is_some(), "audit")?,
            ExperimentKind::Calibrate => need(self.calibrate.is_some(), "calibrate")?,
        }
        if let Some(sweep) = &self.sweep {
            if sweep.alphas.is_empty() {
                bail!("config validation: field 'sweep.alphas' must be nonempty");
            }
            if sweep.alphas.windows(2).any(|w| w[0] >= w[1]) {
                bail!("config validation: field 'sweep.alphas' must be strictly ascending");
            }
            if sweep.seeds_per_alpha == 0 {
                bail!("config validation: field 'sweep.seeds_per_alpha' must be >= 1");
            }
        }
        // Build the estimator config early so bad fields are named now.
        if self.estimator.is_some() {
            self.estimator_config()?;
        }
        Ok(())
    }

    pub fn build_task(&self, block: &TaskBlock) -> Result<TaskSpec> {
        let task = match block {
            TaskBlock::Cartpole { direction } => envs::make_cartpole(match direction {
                CartpoleDirection::Up => GravityDir::Up,
                CartpoleDirection::Down => GravityDir::Down,
            })?,
            TaskBlock::Gridworld { n, m, goal, layout_seed } => {
                let params = envs::GridWorldParams::new(*n, *m, goal.to_core());
                envs::make_gridworld(&params, *layout_seed)?
            }
            TaskBlock::SpeedTracker { v, success_threshold } => {
                let task = envs::make_speed_tracker(*v)?;
                match success_threshold {
                    Some(t) => task.with_success_threshold(*t)?,
                    None => task,
                }
            }
            TaskBlock::Toy { name } => match name {
                ToyName::Matching => envs::toy::matching_task(),
                ToyName::Graded => envs::toy::graded_task(),
                ToyName::GradedFlipped => envs::toy::graded_task_flipped(),
                ToyName::Pay0 => envs::toy::one_obs_mismatch_pair().1,
                ToyName::Pay1 => envs::toy::one_obs_mismatch_pair().0,
            },
        };
        Ok(task)
    }

    /// Materialize the estimator config: algorithm defaults overlaid with
    /// the block's explicit fields, then validated (naming bad fields).
    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        let block = self.estimator.clone().unwrap_or_default();
        let algorithm = block.algorithm.unwrap_or_else(|| self.infer_algorithm());
        let mut c = match algorithm {
            Algorithm::QLearning => EstimatorConfig::q_learning_defaults(block.seed.unwrap_or(0)),
            Algorithm::ActorCritic => {
                EstimatorConfig::actor_critic_defaults(block.seed.unwrap_or(0))
            }
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = block.$field { c.$field = v; })*
            };
        }
        set!(
            alpha,
            lr_policy,
            lr_enc_dec,
            lr_critic,
            batch_size,
            max_iters,
            eval_rollouts,
            curve_eval_rollouts,
            admissibility_tolerance,
            gamma,
            replay_capacity,
            env_steps_per_iter,
            eval_every,
            convergence_window,
            target_update_every,
            warmup_steps,
            hidden_width,
            critic_hidden_layers,
            critic_updates_per_iter
        );
        if let Some(seed) = block.seed {
            c.seed = seed;
        }
        use taskred_core::advest::Exploration;
        match algorithm {
            Algorithm::QLearning => {
                if let Exploration::EpsGreedy { mut start, mut end, mut fraction } = c.exploration {
                    if let Some(v) = block.epsilon_start {
                        start = v;
                    }
                    if let Some(v) = block.epsilon_end {
                        end = v;
                    }
                    if let Some(v) = block.epsilon_fraction {
                        fraction = v;
                    }
                    c.exploration = Exploration::EpsGreedy { start, end, fraction };
                }
            }
            Algorithm::ActorCritic => {
                if let Some(std) = block.gaussian_std {
                    c.exploration = Exploration::Gaussian { std };
                }
            }
        }
        for (name, bad) in [
            ("estimator.lr_policy", c.lr_policy <= 0.0),
            ("estimator.lr_enc_dec", c.lr_enc_dec <= 0.0),
            ("estimator.lr_critic", c.lr_critic <= 0.0),
            ("estimator.alpha", c.alpha < 0.0),
            ("estimator.admissibility_tolerance", c.admissibility_tolerance < 0.0),
        ] {
            if bad {
                bail!("config validation: field '{name}' is out of range");
            }
        }
        c.validate().map_err(|e| anyhow::anyhow!("config validation: {e}"))?;
        Ok(c)
    }

    fn infer_algorithm(&self) -> Algorithm {
        match &self.task2 {
            Some(TaskBlock::SpeedTracker { .. }) => Algorithm::ActorCritic,
            _ => Algorithm::QLearning,
        }
    }

    pub fn architecture(&self) -> ArchitectureBlock {
        self.architecture.clone().unwrap_or_default()
    }
}

fn apply_override(value: &mut toml::Value, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .with_context(|| format!("override '{item}' is not key=value"))?;
    let parsed: toml::Value = match format!("x = {raw}").parse::<toml::Table>() {
        Ok(t) => t["x"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .with_context(|| format!("override path '{path}' crosses a non-table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema = 1
kind = "estimate"
output = "out"

[task1]
env = "toy"
name = "graded"

[task2]
env = "toy"
name = "matching"
"#;

    #[test]
    fn minimal_config_parses() {
        let (file, _) = ExperimentFile::parse(MINIMAL, &[]).unwrap();
        assert_eq!(file.kind, ExperimentKind::Estimate);
        file.build_task(file.task1.as_ref().unwrap()).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let bad = format!("{MINIMAL}\n[estimator]\nmystery_knob = 3\n");
        let err = ExperimentFile::parse(&bad, &[]).unwrap_err().to_string();
        assert!(err.contains("mystery_knob"), "{err}");
    }

    #[test]
    fn negative_learning_rate_is_named() {
        let bad = format!("{MINIMAL}\n[estimator]\nlr_policy = -0.5\n");
        let err = ExperimentFile::parse(&bad, &[]).unwrap_err().to_string();
        assert!(err.contains("lr_policy"), "{err}");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let (file, canonical) =
            ExperimentFile::parse(MINIMAL, &["estimator.alpha=2.5".to_string()]).unwrap();
        assert_eq!(file.estimator.as_ref().unwrap().alpha, Some(2.5));
        assert!(canonical.contains("alpha = 2.5"));
    }

    #[test]
    fn sweep_grid_must_ascend() {
        let bad = format!(
            "{}\n[sweep]\nalphas = [1.0, 0.5]\nseeds_per_alpha = 2\n",
            MINIMAL.replace("kind = \"estimate\"", "kind = \"alpha-sweep\"")
        );
        let err = ExperimentFile::parse(&bad, &[]).unwrap_err().to_string();
        assert!(err.contains("sweep.alphas"), "{err}");
    }
}
