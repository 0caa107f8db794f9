use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::taskcore::policy::{Actor, Policy};
use crate::taskcore::space::Elem;
use crate::taskcore::task::{sample_row, Model, TaskSpec};

/// Full tabular policy enumeration refuses above this many policies.
pub const ENUMERATION_CAP: f64 = 1e6;

/// Exact-mode admissibility tolerance on |R(pi) - R*|.
pub const EXACT_TOL: f64 = 1e-10;

/// One rollout step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Elem,
    pub obs: Elem,
    pub action: Elem,
    pub reward: f64,
}

pub type Trajectory = Vec<Step>;

/// Monte-Carlo return estimate. `value` is the clipped mean of unclipped
/// per-rollout sums; `clipped_fraction` is the share of individual rollouts
/// whose sums exceeded `R*`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReturnEstimate {
    pub value: f64,
    pub rollouts: usize,
    pub stderr: f64,
    pub clipped_fraction: f64,
}

/// Evaluation mode for admissibility tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact,
    Sampled { n_rollouts: usize, tolerance: f64, seed: u64 },
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 on (seed, stream) so rollout batches get decorrelated,
    // reproducible generators.
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Roll the policy out once. The trajectory stops at the horizon or on
/// entering a terminal state; identical seeds replay bit-identically.
pub fn rollout(task: &TaskSpec, policy: &dyn Actor, rng_seed: u64) -> Result<Trajectory> {
    policy.validate_for(task)?;
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let mut trajectory = Vec::new();
    match &task.model {
        Model::Tabular(model) => {
            let mut s = sample_row(&model.init, &mut rng);
            for _ in 0..task.horizon {
                if model.terminal[s] {
                    break;
                }
                let o = sample_row(&model.sensor[s], &mut rng);
                let a = policy.act(&Elem::Discrete(o))?.index()?;
                if a >= model.reward[s].len() {
                    return Err(Error::Config(format!("action {a} out of task range")));
                }
                let r = model.reward[s][a];
                let next = sample_row(&model.transition[s][a], &mut rng);
                trajectory.push(Step {
                    state: Elem::Discrete(s),
                    obs: Elem::Discrete(o),
                    action: Elem::Discrete(a),
                    reward: r,
                });
                s = next;
            }
        }
        Model::Sim(sim) => {
            let mut s = sim.sample_init(&mut rng);
            for _ in 0..task.horizon {
                if sim.terminal(&s) {
                    break;
                }
                let o = sim.observe(&s, &mut rng);
                let a = policy.act(&o)?;
                if !task.actions.contains(&a) {
                    return Err(Error::Config("action outside task action space".into()));
                }
                let (next, r) = sim.step(&s, &a, &mut rng);
                trajectory.push(Step { state: Elem::Vector(s), obs: o, action: a, reward: r });
                s = next;
            }
        }
    }
    Ok(trajectory)
}

/// Monte-Carlo estimate of the clipped expected return: unclipped per-rollout
/// sums are averaged and the mean is clipped at `R*`.
pub fn estimate_return(
    task: &TaskSpec,
    policy: &dyn Actor,
    n_rollouts: usize,
    rng_seed: u64,
) -> Result<ReturnEstimate> {
    if n_rollouts == 0 {
        return Err(Error::Config("n_rollouts must be >= 1".into()));
    }
    let r_star = task.success_threshold;
    let mut sums = Vec::with_capacity(n_rollouts);
    for i in 0..n_rollouts {
        let traj = rollout(task, policy, derive_seed(rng_seed, i as u64))?;
        sums.push(traj.iter().map(|s| s.reward).sum::<f64>());
    }
    let mean = sums.iter().sum::<f64>() / n_rollouts as f64;
    let var = if n_rollouts > 1 {
        sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n_rollouts as f64 - 1.0)
    } else {
        0.0
    };
    let clipped = sums.iter().filter(|&&s| s > r_star).count();
    Ok(ReturnEstimate {
        value: mean.min(r_star),
        rollouts: n_rollouts,
        stderr: (var / n_rollouts as f64).sqrt(),
        clipped_fraction: clipped as f64 / n_rollouts as f64,
    })
}

/// Exact clipped expected return on a finite task by backward dynamic
/// programming over t = T..1.
pub fn exact_return(task: &TaskSpec, policy: &dyn Actor) -> Result<f64> {
    if !task.is_finite() {
        return Err(Error::Unsupported(format!(
            "exact return needs finite spaces; task '{}' is continuous",
            task.name
        )));
    }
    policy.validate_for(task)?;
    let model = task.tabular_model()?;
    let n_states = task.states.size().expect("finite");
    let n_obs = task.observations.size().expect("finite");

    // Memoize the deterministic policy over observation indices.
    let mut act = vec![0usize; n_obs];
    for (o, slot) in act.iter_mut().enumerate() {
        *slot = policy.act(&Elem::Discrete(o))?.index()?;
    }

    let mut value = vec![0.0f64; n_states];
    for _ in 0..task.horizon {
        let mut next = vec![0.0f64; n_states];
        for s in 0..n_states {
            if model.terminal[s] {
                continue;
            }
            let mut v = 0.0;
            for &(o, po) in &model.sensor[s] {
                let a = act[o];
                let mut q = model.reward[s][a];
                for &(s2, p) in &model.transition[s][a] {
                    q += p * value[s2];
                }
                v += po * q;
            }
            next[s] = v;
        }
        value = next;
    }
    let expected: f64 = model.init.iter().map(|&(s, p)| p * value[s]).sum();
    Ok(expected.min(task.success_threshold))
}

/// Whether the policy attains `R*` on the task: exactly (|R - R*| <= 1e-10)
/// or by sampling (estimate >= (1 - tolerance) * R*).
pub fn is_admissible(task: &TaskSpec, policy: &dyn Actor, eval: EvalMode) -> Result<bool> {
    match eval {
        EvalMode::Exact => {
            let r = exact_return(task, policy)?;
            Ok((r - task.success_threshold).abs() <= EXACT_TOL)
        }
        EvalMode::Sampled { n_rollouts, tolerance, seed } => {
            if tolerance < 0.0 {
                return Err(Error::Config(format!("admissibility tolerance {tolerance} < 0")));
            }
            let est = estimate_return(task, policy, n_rollouts, seed)?;
            Ok(est.value >= (1.0 - tolerance) * task.success_threshold)
        }
    }
}

/// The candidate set for [`enumerate_admissible`]: an explicit list, or the
/// full tabular policy space when it fits under [`ENUMERATION_CAP`].
pub enum Candidates {
    Explicit(Vec<Policy>),
    FullEnumeration,
}

/// Exactly those candidate policies attaining `R*`, in deterministic order
/// (lexicographic by table under full enumeration, input order otherwise).
pub fn enumerate_admissible(task: &TaskSpec, candidates: Candidates) -> Result<Vec<Policy>> {
    if !task.is_finite() {
        return Err(Error::Unsupported("admissible enumeration needs a finite task".into()));
    }
    match candidates {
        Candidates::Explicit(policies) => {
            let mut out = Vec::new();
            for p in policies {
                if is_admissible(task, &p, EvalMode::Exact)? {
                    out.push(p);
                }
            }
            Ok(out)
        }
        Candidates::FullEnumeration => {
            let n_obs = task.observations.size().expect("finite");
            let n_act = task.actions.size().expect("finite");
            let bound = (n_act as f64).powi(n_obs as i32);
            if bound > ENUMERATION_CAP {
                return Err(Error::EnumerationCap { bound, cap: ENUMERATION_CAP });
            }
            let mut out = Vec::new();
            let mut table = vec![0usize; n_obs];
            loop {
                let p = Policy::tabular(table.clone(), n_act)?;
                if is_admissible(task, &p, EvalMode::Exact)? {
                    out.push(p);
                }
                // Advance lexicographically: last observation index fastest.
                let mut i = n_obs;
                loop {
                    if i == 0 {
                        return Ok(out);
                    }
                    i -= 1;
                    table[i] += 1;
                    if table[i] < n_act {
                        break;
                    }
                    table[i] = 0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskcore::task::TabularModel;

    fn unit_chain(horizon: usize, r_star: f64) -> TaskSpec {
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![1.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        TaskSpec::tabular("chain", 1, 1, 1, model, r_star, horizon).unwrap()
    }

    /// Two states, uniform init, reward 1 only from state 0, T = 1.
    fn coin_flip() -> TaskSpec {
        let model = TabularModel {
            transition: vec![
                vec![vec![(0, 1.0)], vec![(0, 1.0)]],
                vec![vec![(1, 1.0)], vec![(1, 1.0)]],
            ],
            sensor: vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            reward: vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            init: vec![(0, 0.5), (1, 0.5)],
            terminal: vec![false, false],
        };
        TaskSpec::tabular("coin", 2, 2, 2, model, 1.0, 1).unwrap()
    }

    #[test]
    fn degenerate_chain_rewards() {
        let task = unit_chain(3, 10.0);
        let policy = Policy::tabular(vec![0], 1).unwrap();
        let traj = rollout(&task, &policy, 0).unwrap();
        let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
        assert_eq!(rewards, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rollout_is_seed_deterministic() {
        let task = coin_flip();
        let policy = Policy::tabular(vec![0, 1], 2).unwrap();
        let a = rollout(&task, &policy, 7).unwrap();
        let b = rollout(&task, &policy, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_return_on_chain() {
        let task = unit_chain(3, 10.0);
        let policy = Policy::tabular(vec![0], 1).unwrap();
        assert!((exact_return(&task, &policy).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_return_coin_flip_half() {
        let task = coin_flip();
        for table in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let policy = Policy::tabular(table.to_vec(), 2).unwrap();
            assert!((exact_return(&task, &policy).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_clipped_at_threshold() {
        // Every trajectory sums to exactly R* => value = R*.
        let task = unit_chain(5, 5.0);
        let policy = Policy::tabular(vec![0], 1).unwrap();
        let est = estimate_return(&task, &policy, 10, 3).unwrap();
        assert_eq!(est.value, 5.0);
        assert_eq!(est.clipped_fraction, 0.0);

        // Sums of 8 > R* = 5: the mean is clipped and every rollout exceeded.
        let task = unit_chain(8, 5.0);
        let est = estimate_return(&task, &policy, 10, 3).unwrap();
        assert_eq!(est.value, 5.0);
        assert_eq!(est.clipped_fraction, 1.0);
    }

    #[test]
    fn estimate_is_bit_deterministic() {
        let task = coin_flip();
        let policy = Policy::tabular(vec![0, 0], 2).unwrap();
        let a = estimate_return(&task, &policy, 100, 42).unwrap();
        let b = estimate_return(&task, &policy, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_agrees_with_exact() {
        let task = coin_flip();
        let policy = Policy::tabular(vec![0, 1], 2).unwrap();
        let exact = exact_return(&task, &policy).unwrap();
        let est = estimate_return(&task, &policy, 10_000, 11).unwrap();
        assert!(
            (est.value - exact).abs() <= 3.0 * est.stderr.max(1e-12),
            "estimate {} vs exact {} (stderr {})",
            est.value,
            exact,
            est.stderr
        );
    }

    #[test]
    fn admissibility_rules() {
        let task = unit_chain(3, 3.0);
        let policy = Policy::tabular(vec![0], 1).unwrap();
        assert!(is_admissible(&task, &policy, EvalMode::Exact).unwrap());

        // Sampled mode: 191/200 with tolerance 0.05 passes, 150/200 fails.
        let tol = 0.05;
        assert!(191.0 >= (1.0 - tol) * 200.0);
        assert!(150.0 < (1.0 - tol) * 200.0);
        let bad = is_admissible(
            &task,
            &policy,
            EvalMode::Sampled { n_rollouts: 10, tolerance: -0.1, seed: 0 },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn enumerate_admissible_against_brute_force() {
        // 1 observation, 2 actions, only action 0 earns R*.
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![1.0, 0.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        let task = TaskSpec::tabular("pick0", 1, 2, 1, model, 1.0, 1).unwrap();
        let got = enumerate_admissible(&task, Candidates::FullEnumeration).unwrap();
        assert_eq!(got.len(), 1);
        match &got[0] {
            Policy::Tabular { table, .. } => assert_eq!(table, &vec![0]),
            _ => panic!("expected tabular"),
        }

        // Both actions rewarded identically: both policies returned.
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![1.0, 1.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        let task = TaskSpec::tabular("both", 1, 2, 1, model, 1.0, 1).unwrap();
        let got = enumerate_admissible(&task, Candidates::FullEnumeration).unwrap();
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn enumeration_cap_is_reported() {
        // 2 actions, 30 observations: 2^30 > 1e6.
        let n_obs = 30;
        let sensor = vec![(0..n_obs).map(|o| (o, 1.0 / n_obs as f64)).collect::<Vec<_>>()];
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            sensor,
            reward: vec![vec![1.0, 1.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        let task = TaskSpec::tabular("wide", 1, 2, n_obs, model, 1.0, 1).unwrap();
        match enumerate_admissible(&task, Candidates::FullEnumeration) {
            Err(Error::EnumerationCap { bound, cap }) => {
                assert!(bound > cap);
            }
            other => panic!("expected cap refusal, got {other:?}"),
        }
    }
}
