//! Handcrafted finite tasks: one-step matching bandits used as exact oracles
//! for the reduction/complexity machinery and as the estimator's designated
//! validation pair.

use crate::error::Result;
use crate::reduction::FiniteMap;
use crate::taskcore::{ProbRow, TabularModel, TaskSpec};

/// A one-step task: uniform initial state over `n` states, observation =
/// state, reward `reward[s][a]`, R* = max achievable expected reward.
pub fn matching_bandit(name: &str, reward: Vec<Vec<f64>>, r_star: f64) -> Result<TaskSpec> {
    let n_states = reward.len();
    let n_actions = reward[0].len();
    let transition = (0..n_states)
        .map(|s| (0..n_actions).map(|_| vec![(s, 1.0)]).collect())
        .collect();
    let sensor = (0..n_states).map(|s| vec![(s, 1.0)]).collect();
    let p = 1.0 / n_states as f64;
    let init: ProbRow = (0..n_states).map(|s| (s, p)).collect();
    let model = TabularModel {
        transition,
        sensor,
        reward,
        init,
        terminal: vec![false; n_states],
    };
    TaskSpec::tabular(name, n_states, n_actions, n_states, model, r_star, 1)
}

/// Every function between finite index sets, in lexicographic table order.
pub fn all_maps(domain_size: usize, codomain_size: usize) -> Vec<FiniteMap> {
    let total = codomain_size.pow(domain_size as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut table = Vec::with_capacity(domain_size);
        for _ in 0..domain_size {
            table.push(code % codomain_size);
            code /= codomain_size;
        }
        out.push(FiniteMap::from_table(table, codomain_size).expect("entries in range"));
    }
    out
}

/// The 2-observation / 2-action matching bandit: reward 1 iff action ==
/// observation; its unique admissible policy is the identity table.
pub fn matching_task() -> TaskSpec {
    matching_bandit("match-2", vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).expect("valid")
}

/// The designated estimator-validation partner for [`matching_task`]:
/// state 0 pays 0.4 regardless, state 1 pays 0.4 or 1.0. Under full function
/// spaces the best composition earns (0.4 + 1.0) / 2 = 0.7, so the exact
/// relative complexity against the matching task is 0.3.
pub fn graded_task() -> TaskSpec {
    matching_bandit("graded-2", vec![vec![0.4, 0.4], vec![0.4, 1.0]], 1.0).expect("valid")
}

/// Variant of [`graded_task`] that rewards state 1's action 0: with
/// identity-only spaces the best composition earns 0.4 (complexity 0.6),
/// while full spaces reach 0.7 (complexity 0.3) — a strict monotonicity gap.
pub fn graded_task_flipped() -> TaskSpec {
    matching_bandit("graded-2-flip", vec![vec![0.4, 0.4], vec![1.0, 0.4]], 1.0).expect("valid")
}

/// 1-observation pair with relative complexity exactly 1: task 2's unique
/// admissible policy emits action 0, task 1 rewards only action 1.
pub fn one_obs_mismatch_pair() -> (TaskSpec, TaskSpec) {
    let task1 = matching_bandit("pay1", vec![vec![0.0, 1.0]], 1.0).expect("valid");
    let task2 = matching_bandit("pay0", vec![vec![1.0, 0.0]], 1.0).expect("valid");
    (task1, task2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskcore::{enumerate_admissible, Candidates, Policy};

    #[test]
    fn matching_task_has_unique_admissible_policy() {
        let task = matching_task();
        let admissible = enumerate_admissible(&task, Candidates::FullEnumeration).unwrap();
        assert_eq!(admissible.len(), 1);
        match &admissible[0] {
            Policy::Tabular { table, .. } => assert_eq!(table, &vec![0, 1]),
            _ => panic!(),
        }
    }

    #[test]
    fn all_maps_counts() {
        assert_eq!(all_maps(2, 2).len(), 4);
        assert_eq!(all_maps(3, 2).len(), 8);
        assert_eq!(all_maps(1, 4).len(), 4);
    }
}
