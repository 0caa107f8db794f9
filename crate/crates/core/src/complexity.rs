//! Exact relative complexity by sup-inf enumeration on finite instances, and
//! the reduction⇔zero-complexity consistency oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::reduction::{
    check_reduction, composed_exact_return, family_digest, DecoderSpace, EncoderSpace, MapFn,
};
use crate::taskcore::{is_admissible, EvalMode, Policy, TaskSpec};

/// Values within this of zero are treated as an exact zero when linking
/// complexity to reduction verdicts (covers DP float error at 1e-10 scale).
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Adversarial,
}

/// Reference to the policy attaining the sup: an index into the supplied
/// family (exact) or a checkpoint digest (adversarial).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ref", rename_all = "snake_case")]
pub enum PolicyRef {
    Index { index: usize },
    Checkpoint { digest: String },
}

/// Reference to the attaining (encoder, decoder) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ref", rename_all = "snake_case")]
pub enum PairRef {
    Indices { encoder: usize, decoder: usize },
    Checkpoints { encoder: String, decoder: String },
}

/// A relative-complexity value with the metadata needed to audit it. One
/// JSON object per line in result files; `method` discriminates exact from
/// adversarial records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityResult {
    pub schema: u32,
    pub value: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attaining_policy: Option<PolicyRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attaining_pair: Option<PairRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inner_admissible: bool,
    pub config_digest: String,
    pub task1_digest: String,
    pub task2_digest: String,
}

pub const RESULT_SCHEMA: u32 = 1;

fn short_hex(hasher: Sha256) -> String {
    hasher.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn spaces_digest(h_space: &EncoderSpace, g_space: &DecoderSpace) -> Result<String> {
    let mut hasher = Sha256::new();
    for m in h_space.explicit_members()? {
        match &m.map {
            MapFn::Finite(f) => {
                for &v in &f.table {
                    hasher.update((v as u64).to_le_bytes());
                }
                hasher.update([0xfe]);
            }
            MapFn::Neural { net, .. } => {
                for &p in &net.params {
                    hasher.update(p.to_le_bytes());
                }
            }
        }
    }
    hasher.update([0xff]);
    for m in g_space.explicit_members()? {
        match &m.map {
            MapFn::Finite(f) => {
                for &v in &f.table {
                    hasher.update((v as u64).to_le_bytes());
                }
                hasher.update([0xfe]);
            }
            MapFn::Neural { net, .. } => {
                for &p in &net.params {
                    hasher.update(p.to_le_bytes());
                }
            }
        }
    }
    Ok(short_hex(hasher))
}

/// Exact relative complexity of task 1 with respect to task 2:
/// the max over the supplied admissible family of the min over (h, g) of
/// `1 - R1(g ∘ π ∘ h) / R*1`, with deterministic first-in-order tie-breaking.
pub fn exact_relative_complexity(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_space: &EncoderSpace,
    g_space: &DecoderSpace,
    admissible2: &[Policy],
) -> Result<ComplexityResult> {
    if admissible2.is_empty() {
        return Err(Error::Precondition(
            "admissible set for task 2 is empty: relative complexity undefined".into(),
        ));
    }
    if !task1.is_finite() || !task2.is_finite() {
        return Err(Error::Unsupported("exact relative complexity needs finite tasks".into()));
    }
    let encoders = h_space.finite_members()?;
    let decoders = g_space.finite_members()?;
    if encoders.is_empty() || decoders.is_empty() {
        return Err(Error::Config("function spaces must be nonempty".into()));
    }
    for (k, policy) in admissible2.iter().enumerate() {
        if !is_admissible(task2, policy, EvalMode::Exact)? {
            return Err(Error::Precondition(format!(
                "policy {k} in the supplied family is not admissible on task '{}'",
                task2.name
            )));
        }
    }

    let r_star = task1.success_threshold;
    // Inner min per policy, parallel; ties keep the first (h, g) in
    // lexicographic order.
    let inner: Vec<Result<(f64, usize, usize)>> = admissible2
        .par_iter()
        .map(|policy| {
            let mut best = f64::INFINITY;
            let mut best_pair = (0, 0);
            for (i, h) in encoders.iter().enumerate() {
                for (j, g) in decoders.iter().enumerate() {
                    let r = composed_exact_return(task1, policy, h, g)?;
                    let c = 1.0 - r / r_star;
                    if c < best {
                        best = c;
                        best_pair = (i, j);
                    }
                }
            }
            Ok((best, best_pair.0, best_pair.1))
        })
        .collect();

    let mut value = f64::NEG_INFINITY;
    let mut attaining = (0usize, 0usize, 0usize);
    for (k, entry) in inner.into_iter().enumerate() {
        let (c, i, j) = entry?;
        if c > value {
            value = c;
            attaining = (k, i, j);
        }
    }
    // Clamp float dust at the boundaries; DP returns are clipped at R*.
    let value = value.clamp(0.0, 1.0);

    let mut config = Sha256::new();
    config.update(task1.digest().as_bytes());
    config.update(task2.digest().as_bytes());
    config.update(spaces_digest(h_space, g_space)?.as_bytes());
    config.update(family_digest(admissible2).as_bytes());

    Ok(ComplexityResult {
        schema: RESULT_SCHEMA,
        value,
        method: Method::Exact,
        attaining_policy: Some(PolicyRef::Index { index: attaining.0 }),
        attaining_pair: Some(PairRef::Indices { encoder: attaining.1, decoder: attaining.2 }),
        alpha: None,
        seed: None,
        inner_admissible: true,
        config_digest: short_hex(config),
        task1_digest: task1.digest().to_string(),
        task2_digest: task2.digest().to_string(),
    })
}

/// Both sides of the zero⇔reduction equivalence, computed on the same
/// quantification set. A mismatch indicates an implementation bug.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub complexity: ComplexityResult,
    pub reduction_holds: bool,
    pub consistent: bool,
}

pub fn consistency_check(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_space: &EncoderSpace,
    g_space: &DecoderSpace,
    admissible2: &[Policy],
) -> Result<ConsistencyReport> {
    let complexity = exact_relative_complexity(task1, task2, h_space, g_space, admissible2)?;
    let verdict = check_reduction(task1, task2, h_space, g_space, admissible2)?;
    let zero = complexity.value.abs() <= ZERO_TOL;
    let consistent = zero == verdict.holds;
    Ok(ConsistencyReport { complexity, reduction_holds: verdict.holds, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{Decoder, Encoder, FiniteMap, FunctionSpace};
    use crate::taskcore::TabularModel;

    fn one_obs_task(rewarded: usize) -> TaskSpec {
        let mut reward = vec![0.0, 0.0];
        reward[rewarded] = 1.0;
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![reward],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        TaskSpec::tabular(format!("one-obs-{rewarded}"), 1, 2, 1, model, 1.0, 1).unwrap()
    }

    #[test]
    fn identical_tasks_have_zero_complexity() {
        let task = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let out = exact_relative_complexity(&task, &task, &h, &g, &family).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.method, Method::Exact);
        assert!(out.inner_admissible);
    }

    #[test]
    fn impossible_transfer_has_complexity_one() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let out = exact_relative_complexity(&task1, &task2, &h, &g, &family).unwrap();
        assert_eq!(out.value, 1.0);
    }

    #[test]
    fn empty_family_is_an_error() {
        let task = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let out = exact_relative_complexity(&task, &task, &h, &g, &[]);
        assert!(matches!(out, Err(Error::Precondition(_))));
    }

    #[test]
    fn monotone_in_the_decoder_space() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g_small = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let g_big = FunctionSpace::explicit(vec![
            Decoder::identity(2),
            Decoder::finite(FiniteMap::from_table(vec![1, 0], 2).unwrap()),
        ])
        .unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let small = exact_relative_complexity(&task1, &task2, &h, &g_small, &family).unwrap();
        let big = exact_relative_complexity(&task1, &task2, &h, &g_big, &family).unwrap();
        assert!(big.value <= small.value);
        assert_eq!(big.value, 0.0);
        assert_eq!(small.value, 1.0);
    }

    #[test]
    fn consistency_links_zero_to_reduction() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];

        let g_id = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let rep = consistency_check(&task1, &task2, &h, &g_id, &family).unwrap();
        assert!(rep.consistent);
        assert!(!rep.reduction_holds);
        assert!(rep.complexity.value > 0.0);

        let g_full = FunctionSpace::explicit(vec![
            Decoder::identity(2),
            Decoder::finite(FiniteMap::from_table(vec![1, 0], 2).unwrap()),
        ])
        .unwrap();
        let rep = consistency_check(&task1, &task2, &h, &g_full, &family).unwrap();
        assert!(rep.consistent);
        assert!(rep.reduction_holds);
        assert_eq!(rep.complexity.value, 0.0);
    }

    #[test]
    fn recomputing_the_attaining_triple_reproduces_value() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let out = exact_relative_complexity(&task1, &task2, &h, &g, &family).unwrap();
        let (pi, hi, gi) = match (&out.attaining_policy, &out.attaining_pair) {
            (Some(PolicyRef::Index { index }), Some(PairRef::Indices { encoder, decoder })) => {
                (*index, *encoder, *decoder)
            }
            other => panic!("unexpected refs {other:?}"),
        };
        let hm = h.finite_members().unwrap()[hi].clone();
        let gm = g.finite_members().unwrap()[gi].clone();
        let r = composed_exact_return(&task1, &family[pi], &hm, &gm).unwrap();
        assert!((1.0 - r / task1.success_threshold - out.value).abs() <= 1e-10);
    }

    #[test]
    fn result_json_round_trip() {
        let task = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let out = exact_relative_complexity(&task, &task, &h, &g, &family).unwrap();
        let line = serde_json::to_string(&out).unwrap();
        let back: ComplexityResult = serde_json::from_str(&line).unwrap();
        assert_eq!(out, back);
    }
}
