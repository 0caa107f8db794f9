use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::reduction::compose::compose;
use crate::reduction::function_space::{DecoderSpace, EncoderSpace};
use crate::reduction::maps::{Decoder, Encoder, FiniteMap, MapFn};
use crate::taskcore::{exact_return, is_admissible, EvalMode, Policy, TaskSpec, EXACT_TOL};

/// One (encoder, decoder) witness for one admissible policy, by index into
/// the supplied spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Witness {
    pub policy: usize,
    pub encoder: usize,
    pub decoder: usize,
}

/// Outcome of an exact reduction check. When the reduction holds there is a
/// witness per examined policy (first in lexicographic (h, g) order); when it
/// does not, `counterexample` is the first policy defeating every pair.
#[derive(Debug, Clone)]
pub struct ReductionVerdict {
    pub holds: bool,
    pub witnesses: Vec<Witness>,
    pub counterexample: Option<usize>,
    /// Size and digest of the quantification set actually examined.
    pub n_policies: usize,
    pub family_digest: String,
}

/// Stable digest of a policy family, recorded so verdicts state what was
/// actually quantified over.
pub fn family_digest(policies: &[Policy]) -> String {
    let mut hasher = Sha256::new();
    for p in policies {
        match p {
            Policy::Tabular { table, n_actions } => {
                hasher.update([0u8]);
                hasher.update((*n_actions as u64).to_le_bytes());
                for &a in table {
                    hasher.update((a as u64).to_le_bytes());
                }
            }
            Policy::Neural { net, .. } => {
                hasher.update([1u8]);
                for &p in &net.params {
                    hasher.update(p.to_le_bytes());
                }
            }
        }
    }
    let out = hasher.finalize();
    out.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn check_spaces_against_tasks(
    task1: &TaskSpec,
    task2: &TaskSpec,
    encoders: &[&FiniteMap],
    decoders: &[&FiniteMap],
) -> Result<()> {
    let o1 = task1
        .observations
        .size()
        .ok_or_else(|| Error::Unsupported("exact verdicts need finite tasks".into()))?;
    let o2 = task2
        .observations
        .size()
        .ok_or_else(|| Error::Unsupported("exact verdicts need finite tasks".into()))?;
    let a1 = task1.actions.size().expect("finite checked by caller");
    let a2 = task2.actions.size().expect("finite checked by caller");
    for (i, h) in encoders.iter().enumerate() {
        if h.domain_size != o1 || h.codomain_size != o2 {
            return Err(Error::Config(format!(
                "encoder {i} maps {} -> {}, tasks need {o1} -> {o2}",
                h.domain_size, h.codomain_size
            )));
        }
    }
    for (j, g) in decoders.iter().enumerate() {
        if g.domain_size != a2 || g.codomain_size != a1 {
            return Err(Error::Config(format!(
                "decoder {j} maps {} -> {}, tasks need {a2} -> {a1}",
                g.domain_size, g.codomain_size
            )));
        }
    }
    Ok(())
}

/// Exact clipped return of g ∘ π ∘ h on `task1`.
pub fn composed_exact_return(
    task1: &TaskSpec,
    policy: &Policy,
    h: &FiniteMap,
    g: &FiniteMap,
) -> Result<f64> {
    let composed = compose(
        Decoder { map: MapFn::Finite(g.clone()) },
        policy.clone(),
        Encoder { map: MapFn::Finite(h.clone()) },
    )?;
    exact_return(task1, &composed)
}

/// Does task 1 reduce to task 2 over the given explicit spaces and
/// admissible family? Exact, deterministic, parallel over policies.
pub fn check_reduction(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_space: &EncoderSpace,
    g_space: &DecoderSpace,
    admissible2: &[Policy],
) -> Result<ReductionVerdict> {
    if !task1.is_finite() || !task2.is_finite() {
        return Err(Error::Unsupported("exact reduction checks need finite tasks".into()));
    }
    if admissible2.is_empty() {
        return Err(Error::Precondition("admissible family for task 2 is empty".into()));
    }
    let encoders = h_space.finite_members()?;
    let decoders = g_space.finite_members()?;
    if encoders.is_empty() || decoders.is_empty() {
        return Err(Error::Config("function spaces must be nonempty".into()));
    }
    check_spaces_against_tasks(task1, task2, &encoders, &decoders)?;
    for (k, policy) in admissible2.iter().enumerate() {
        if !is_admissible(task2, policy, EvalMode::Exact)? {
            return Err(Error::Precondition(format!(
                "policy {k} in the supplied family is not admissible on task '{}'",
                task2.name
            )));
        }
    }

    let per_policy: Vec<Result<Option<(usize, usize)>>> = admissible2
        .par_iter()
        .map(|policy| {
            for (i, h) in encoders.iter().enumerate() {
                for (j, g) in decoders.iter().enumerate() {
                    let r = composed_exact_return(task1, policy, h, g)?;
                    if (r - task1.success_threshold).abs() <= EXACT_TOL {
                        return Ok(Some((i, j)));
                    }
                }
            }
            Ok(None)
        })
        .collect();

    let mut witnesses = Vec::with_capacity(admissible2.len());
    let mut counterexample = None;
    for (k, found) in per_policy.into_iter().enumerate() {
        match found? {
            Some((i, j)) => witnesses.push(Witness { policy: k, encoder: i, decoder: j }),
            None => {
                counterexample = Some(k);
                break;
            }
        }
    }
    let holds = counterexample.is_none();
    Ok(ReductionVerdict {
        holds,
        witnesses: if holds { witnesses } else { Vec::new() },
        counterexample,
        n_policies: admissible2.len(),
        family_digest: family_digest(admissible2),
    })
}

/// Task equivalence: reduction in both directions.
#[allow(clippy::too_many_arguments)]
pub fn check_equivalence(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h12: &EncoderSpace,
    g21: &DecoderSpace,
    h21: &EncoderSpace,
    g12: &DecoderSpace,
    admissible1: &[Policy],
    admissible2: &[Policy],
) -> Result<bool> {
    let forward = check_reduction(task1, task2, h12, g21, admissible2)?;
    if !forward.holds {
        return Ok(false);
    }
    let backward = check_reduction(task2, task1, h21, g12, admissible1)?;
    Ok(backward.holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::function_space::FunctionSpace;
    use crate::taskcore::TabularModel;

    /// 1 observation, 2 actions; only `rewarded` earns R*.
    pub(crate) fn one_obs_task(rewarded: usize) -> TaskSpec {
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

    fn identity_spaces() -> (EncoderSpace, DecoderSpace) {
        (
            FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap(),
            FunctionSpace::explicit(vec![Decoder::identity(2)]).unwrap(),
        )
    }

    #[test]
    fn reflexivity_with_identity_spaces() {
        let task = one_obs_task(0);
        let (h, g) = identity_spaces();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let verdict = check_reduction(&task, &task, &h, &g, &family).unwrap();
        assert!(verdict.holds);
        assert_eq!(verdict.witnesses, vec![Witness { policy: 0, encoder: 0, decoder: 0 }]);
    }

    #[test]
    fn counterexample_when_action_cannot_decode() {
        // Task 1 rewards action 1; task 2's only admissible policy emits 0;
        // G = {identity} cannot repair it.
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let (h, g) = identity_spaces();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let verdict = check_reduction(&task1, &task2, &h, &g, &family).unwrap();
        assert!(!verdict.holds);
        assert_eq!(verdict.counterexample, Some(0));
        // The counterexample is verifiably admissible on task 2 and fails on
        // task 1 under every supplied pair.
        assert!(is_admissible(&task2, &family[0], EvalMode::Exact).unwrap());
        let r = composed_exact_return(
            &task1,
            &family[0],
            &FiniteMap::identity(1),
            &FiniteMap::identity(2),
        )
        .unwrap();
        assert!(r < task1.success_threshold - EXACT_TOL);
    }

    #[test]
    fn swap_decoder_repairs_it() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![
            Decoder::identity(2),
            Decoder::finite(FiniteMap::from_table(vec![1, 0], 2).unwrap()),
        ])
        .unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let verdict = check_reduction(&task1, &task2, &h, &g, &family).unwrap();
        assert!(verdict.holds);
        // Witness search is lexicographic: identity fails, swap (index 1) wins.
        assert_eq!(verdict.witnesses[0].decoder, 1);
    }

    #[test]
    fn inadmissible_family_member_is_named() {
        let task = one_obs_task(0);
        let (h, g) = identity_spaces();
        let family =
            vec![Policy::tabular(vec![0], 2).unwrap(), Policy::tabular(vec![1], 2).unwrap()];
        match check_reduction(&task, &task, &h, &g, &family) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("policy 1"), "{msg}"),
            other => panic!("expected precondition violation, got {other:?}"),
        }
    }

    #[test]
    fn equivalence_is_two_directed_checks() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let (h, g) = identity_spaces();
        let fam1 = vec![Policy::tabular(vec![1], 2).unwrap()];
        let fam2 = vec![Policy::tabular(vec![0], 2).unwrap()];
        // Same task both ways: equivalent.
        assert!(check_equivalence(&task1, &task1, &h, &g, &h, &g, &fam1, &fam1).unwrap());
        // Mismatched pair with identity-only spaces: not equivalent.
        assert!(!check_equivalence(&task1, &task2, &h, &g, &h, &g, &fam1, &fam2).unwrap());
    }

    #[test]
    fn verdicts_are_deterministic() {
        let task1 = one_obs_task(1);
        let task2 = one_obs_task(0);
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)]).unwrap();
        let g = FunctionSpace::explicit(vec![
            Decoder::identity(2),
            Decoder::finite(FiniteMap::from_table(vec![1, 0], 2).unwrap()),
            Decoder::finite(FiniteMap::from_table(vec![1, 1], 2).unwrap()),
        ])
        .unwrap();
        let family = vec![Policy::tabular(vec![0], 2).unwrap()];
        let a = check_reduction(&task1, &task2, &h, &g, &family).unwrap();
        let b = check_reduction(&task1, &task2, &h, &g, &family).unwrap();
        assert_eq!(a.witnesses, b.witnesses);
        assert_eq!(a.family_digest, b.family_digest);
    }
}
