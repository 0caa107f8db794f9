//! Cross-module invariant battery: every module's key properties, runnable
//! from the CLI (`props` subcommand) and from the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::advest::{check_gradient_partitioning, softmax_backward, DiscreteComposed, MapNet};
use crate::complexity::{consistency_check, exact_relative_complexity};
use crate::diffnet::{Activation, MlpNet};
use crate::envs::gridworld::{rotation_decoder, rotation_decoder_space, GoalDir, GridWorldFamily};
use crate::envs::toy;
use crate::error::{Error, Result};
use crate::reduction::{
    check_reduction, compose, partial_order_audit, Decoder, DecoderSpace, Encoder, EncoderSpace,
    FiniteMap, FunctionSpace, IndexedSpaces, MapFn,
};
use crate::taskcore::{
    estimate_return, exact_return, is_admissible, Elem, EvalMode, Policy, Space, TaskSpec,
    EXACT_TOL,
};

#[derive(Debug, Clone)]
pub struct PropCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<String>) -> PropCheck {
    match run() {
        Ok(detail) => PropCheck { name, passed: true, detail },
        Err(e) => PropCheck { name, passed: false, detail: e.to_string() },
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

/// Central finite differences of a scalar function at x.
pub fn finite_diff_grad(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    step: f64,
    coords: &[usize],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(coords.len());
    let mut xs = x.to_vec();
    for &i in coords {
        let orig = xs[i];
        xs[i] = orig + step;
        let up = f(&xs)?;
        xs[i] = orig - step;
        let down = f(&xs)?;
        xs[i] = orig;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-6)
}

/// Sample coordinate indices covering the whole parameter vector.
fn pick_coords(rng: &mut ChaCha12Rng, len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    let mut coords: Vec<usize> = vec![0, len - 1];
    while coords.len() < count {
        coords.push(rng.gen_range(0..len));
    }
    coords.sort_unstable();
    coords.dedup();
    coords
}

/// Max relative error of `backward` against central finite differences over
/// `cases` random (params, input) draws of the given architecture; each case
/// checks a seeded random subset of coordinates.
pub fn gradient_check_architecture(
    dims: &[usize],
    activation: Activation,
    cases: usize,
    coords_per_case: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let net = MlpNet::init(dims, activation, seed ^ (case as u64) << 17)?;
        let input: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let weights: Vec<f64> =
            (0..*dims.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, tape) = net.forward_tape(&input)?;
        let (analytic, _) = net.backward(&tape, &weights)?;
        let coords = pick_coords(&mut rng, net.param_count(), coords_per_case);
        let mut probe = net.clone();
        let mut f = |params: &[f64]| -> Result<f64> {
            probe.params.copy_from_slice(params);
            let out = probe.forward(&input)?;
            Ok(out.iter().zip(&weights).map(|(o, w)| o * w).sum())
        };
        let numeric = finite_diff_grad(&mut f, &net.params, 1e-5, &coords)?;
        for (&c, &n) in coords.iter().zip(&numeric) {
            worst = worst.max(rel_error(analytic[c], n));
        }
    }
    Ok(worst)
}

/// End-to-end gradient check of the composed-stage loss: encoder and decoder
/// gradients against finite differences, with the frozen policy receiving a
/// matching analytic gradient as well.
pub fn composed_gradient_check(seed: u64) -> Result<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let comp = DiscreteComposed {
        h: MapNet::Net(MlpNet::init(&[3, 10, 4], Activation::Tanh, seed ^ 1)?),
        pi: MlpNet::init(&[4, 10, 3], Activation::Tanh, seed ^ 2)?,
        g: MapNet::Net(MlpNet::init(&[3, 10, 2], Activation::Tanh, seed ^ 3)?),
        obs1: Space::boxed(vec![-2.0; 3], vec![2.0; 3])?,
        obs2: Space::finite(4)?,
        n_act2: 3,
        n_act1: 2,
    };
    let samples: Vec<(Vec<f64>, usize, f64)> = (0..6)
        .map(|_| {
            let feat: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (feat, rng.gen_range(0..2), rng.gen_range(0.0..2.0))
        })
        .collect();
    let grads = comp.weighted_logp_grads(&samples)?;
    let mut worst = 0.0f64;

    // Encoder parameters.
    let h_net = match &comp.h {
        MapNet::Net(n) => n.clone(),
        MapNet::Identity => unreachable!(),
    };
    let coords = pick_coords(&mut rng, h_net.param_count(), 25);
    let mut f = |params: &[f64]| -> Result<f64> {
        let mut c = comp.clone();
        if let MapNet::Net(n) = &mut c.h {
            n.params.copy_from_slice(params);
        }
        Ok(c.weighted_logp_grads(&samples)?.loss)
    };
    let numeric = finite_diff_grad(&mut f, &h_net.params, 1e-5, &coords)?;
    let gh = grads.grad_h.as_ref().expect("net encoder");
    for (&c, &n) in coords.iter().zip(&numeric) {
        worst = worst.max(rel_error(gh[c], n));
    }

    // Decoder parameters.
    let g_net = match &comp.g {
        MapNet::Net(n) => n.clone(),
        MapNet::Identity => unreachable!(),
    };
    let coords = pick_coords(&mut rng, g_net.param_count(), 25);
    let mut f = |params: &[f64]| -> Result<f64> {
        let mut c = comp.clone();
        if let MapNet::Net(n) = &mut c.g {
            n.params.copy_from_slice(params);
        }
        Ok(c.weighted_logp_grads(&samples)?.loss)
    };
    let numeric = finite_diff_grad(&mut f, &g_net.params, 1e-5, &coords)?;
    let gg = grads.grad_g.as_ref().expect("net decoder");
    for (&c, &n) in coords.iter().zip(&numeric) {
        worst = worst.max(rel_error(gg[c], n));
    }

    // Policy parameters (flow through the composition as well).
    let coords = pick_coords(&mut rng, comp.pi.param_count(), 25);
    let mut f = |params: &[f64]| -> Result<f64> {
        let mut c = comp.clone();
        c.pi.params.copy_from_slice(params);
        Ok(c.weighted_logp_grads(&samples)?.loss)
    };
    let numeric = finite_diff_grad(&mut f, &comp.pi.params, 1e-5, &coords)?;
    for (&c, &n) in coords.iter().zip(&numeric) {
        worst = worst.max(rel_error(grads.grad_pi[c], n));
    }
    Ok(worst)
}

fn full_spaces_2() -> Result<(EncoderSpace, DecoderSpace)> {
    let enc = EncoderSpace::from_tables(toy::all_maps(2, 2))?;
    let dec = DecoderSpace::from_tables(toy::all_maps(2, 2))?;
    Ok((enc, dec))
}

/// Gridworld audit inputs for one (n, m): the four goal tasks, uniform
/// rotation spaces, and an admissible family per task.
pub fn gridworld_audit_inputs(
    n: i32,
    m: usize,
    family_size: usize,
    seed: u64,
) -> Result<(Vec<TaskSpec>, IndexedSpaces, Vec<Vec<Policy>>)> {
    let family = GridWorldFamily::build(n, m, seed, 64)?;
    let tasks: Vec<TaskSpec> =
        GoalDir::ALL.iter().map(|&g| family.task(g)).collect::<Result<_>>()?;
    let spaces =
        IndexedSpaces::uniform(4, family.rotation_encoder_space()?, rotation_decoder_space());
    let families: Vec<Vec<Policy>> = GoalDir::ALL
        .iter()
        .map(|&g| family.admissible_family(g, family_size, seed ^ 0x77))
        .collect::<Result<_>>()?;
    Ok((tasks, spaces, families))
}

/// Run the whole battery. Failures come back as failed checks, not errors.
pub fn run_all() -> Vec<PropCheck> {
    let mut out = Vec::new();

    out.push(check("taskcore: return clipping and nonnegativity", || {
        let task = toy::matching_task();
        let policies =
            [Policy::tabular(vec![0, 1], 2)?, Policy::tabular(vec![1, 0], 2)?];
        for p in &policies {
            let est = estimate_return(&task, p, 200, 3)?;
            ensure(est.value >= 0.0, "negative return estimate")?;
            ensure(est.value <= task.success_threshold, "estimate above R*")?;
            let exact = exact_return(&task, p)?;
            ensure(exact <= task.success_threshold + EXACT_TOL, "exact above R*")?;
            ensure(exact >= 0.0, "negative exact return")?;
        }
        Ok("clipped means and DP returns stay in [0, R*]".into())
    }));

    out.push(check("taskcore: seed determinism", || {
        let task = toy::matching_task();
        let p = Policy::tabular(vec![0, 0], 2)?;
        let a = estimate_return(&task, &p, 100, 42)?;
        let b = estimate_return(&task, &p, 100, 42)?;
        ensure(a == b, "identical seeds disagreed")?;
        Ok("identical (task, policy, seed, n) reproduce bit-identical estimates".into())
    }));

    out.push(check("taskcore: sampling consistency at n = 10^4", || {
        let task = toy::graded_task();
        let p = Policy::tabular(vec![0, 1], 2)?;
        let exact = exact_return(&task, &p)?;
        let est = estimate_return(&task, &p, 10_000, 7)?;
        let gap = (est.value - exact).abs();
        ensure(
            gap <= 3.0 * est.stderr.max(1e-12),
            format!("gap {gap:.5} above 3 x stderr {:.5}", est.stderr),
        )?;
        Ok(format!("exact {exact:.4}, sampled {:.4} +- {:.4}", est.value, est.stderr))
    }));

    out.push(check("diffnet: gradients match finite differences", || {
        let mut worst = 0.0f64;
        for (i, dims) in [
            vec![4, 64, 64, 3],
            vec![2, 16, 2],
            vec![1, 32, 32, 32, 1],
        ]
        .iter()
        .enumerate()
        {
            worst = worst.max(gradient_check_architecture(dims, Activation::Tanh, 25, 20, i as u64)?);
            worst = worst.max(gradient_check_architecture(dims, Activation::Relu, 25, 20, 100 + i as u64)?);
        }
        ensure(worst <= 1e-4, format!("max relative error {worst:.2e}"))?;
        Ok(format!("max relative error {worst:.2e}"))
    }));

    out.push(check("diffnet: checkpoint round trip is bit exact", || {
        let net = MlpNet::init(&[5, 16, 4], Activation::Tanh, 99)?;
        let back = MlpNet::from_checkpoint_json(&net.to_checkpoint_json()?)?;
        ensure(net == back, "round trip changed the net")?;
        Ok("JSON checkpoint reproduces the exact parameters".into())
    }));

    out.push(check("reduction: composition is associative", || {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = 5;
            let rand_map = |rng: &mut ChaCha12Rng, dom: usize, cod: usize| {
                FiniteMap::from_table((0..dom).map(|_| rng.gen_range(0..cod)).collect(), cod)
                    .expect("in range")
            };
            let h1 = rand_map(&mut rng, n, n);
            let h2 = rand_map(&mut rng, n, n);
            let g1 = rand_map(&mut rng, 3, 3);
            let g2 = rand_map(&mut rng, 3, 3);
            let pi = Policy::tabular((0..n).map(|_| rng.gen_range(0..3)).collect(), 3)?;
            let nested = compose(
                Decoder::finite(g1.clone()),
                compose(Decoder::finite(g2.clone()), pi.clone(), Encoder::finite(h2.clone()))?,
                Encoder::finite(h1.clone()),
            )?;
            let flat = compose(
                Decoder::finite(g1.compose_after(&g2)?),
                pi,
                Encoder::finite(h2.compose_after(&h1)?),
            )?;
            for o in 0..n {
                use crate::taskcore::Actor;
                let obs = Elem::Discrete(o);
                ensure(nested.act(&obs)? == flat.act(&obs)?, "associativity violated")?;
            }
        }
        Ok("nested and flattened compositions agree extensionally".into())
    }));

    out.push(check("reduction: witnesses recompose admissibly", || {
        let family = GridWorldFamily::build(2, 0, 0, 64)?;
        let task_e = family.task(GoalDir::E)?;
        let task_n = family.task(GoalDir::N)?;
        let h = FunctionSpace::explicit(vec![family.rotation_encoder(1)?])?;
        let g = FunctionSpace::explicit(vec![rotation_decoder(1)])?;
        let admissible = family.admissible_family(GoalDir::N, 8, 5)?;
        let verdict = check_reduction(&task_e, &task_n, &h, &g, &admissible)?;
        ensure(verdict.holds, "expected the rotation reduction to hold")?;
        for w in &verdict.witnesses {
            let hm = match &h.explicit_members()?[w.encoder].map {
                MapFn::Finite(f) => f.clone(),
                _ => unreachable!(),
            };
            let gm = match &g.explicit_members()?[w.decoder].map {
                MapFn::Finite(f) => f.clone(),
                _ => unreachable!(),
            };
            let composed = compose(
                Decoder::finite(gm),
                admissible[w.policy].clone(),
                Encoder::finite(hm),
            )?;
            ensure(
                is_admissible(&task_e, &composed, EvalMode::Exact)?,
                format!("witness for policy {} fails recheck", w.policy),
            )?;
        }
        Ok(format!("all {} witnesses verified independently", verdict.witnesses.len()))
    }));

    out.push(check("reduction: verdicts are deterministic", || {
        let (task1, task2) = toy::one_obs_mismatch_pair();
        let h = FunctionSpace::explicit(vec![Encoder::identity(1)])?;
        let g = DecoderSpace::from_tables(toy::all_maps(2, 2))?;
        let fam = vec![Policy::tabular(vec![0], 2)?];
        let a = check_reduction(&task1, &task2, &h, &g, &fam)?;
        let b = check_reduction(&task1, &task2, &h, &g, &fam)?;
        ensure(a.holds == b.holds && a.witnesses == b.witnesses, "verdicts differ")?;
        Ok("repeated verdicts agree including witness choice".into())
    }));

    let audit_for = |m: usize| {
        move || -> Result<String> {
            let (tasks, spaces, families) = gridworld_audit_inputs(2, m, 8, 0)?;
            let report = partial_order_audit(&tasks, &spaces, &families)?;
            ensure(report.axioms.hypotheses_hold(), "identity/closure hypotheses failed")?;
            for c in &report.checks {
                ensure(c.passed, format!("{} violated at {:?}", c.name, c.violations))?;
            }
            Ok(format!(
                "{} axiom checks passed ({} compositions verified)",
                report.checks.len(),
                report.axioms.compositions_checked
            ))
        }
    };
    out.push(check("order axioms: gridworld n=2 m=0", audit_for(0)));
    out.push(check("order axioms: gridworld n=2 m=1", audit_for(1)));

    out.push(check("complexity: range, zero-iff-reduction, monotonicity", || {
        let (enc_full, dec_full) = full_spaces_2()?;
        let enc_id = FunctionSpace::explicit(vec![Encoder::identity(2)])?;
        let dec_id = FunctionSpace::explicit(vec![Decoder::identity(2)])?;
        let t2 = toy::matching_task();
        let fam = vec![Policy::tabular(vec![0, 1], 2)?];
        for t1 in [toy::matching_task(), toy::graded_task(), toy::graded_task_flipped()] {
            let rep = consistency_check(&t1, &t2, &enc_full, &dec_full, &fam)?;
            ensure(rep.consistent, "zero-iff-reduction mismatch (full spaces)")?;
            ensure(
                (0.0..=1.0).contains(&rep.complexity.value),
                "complexity out of range",
            )?;
            let rep_small = consistency_check(&t1, &t2, &enc_id, &dec_id, &fam)?;
            ensure(rep_small.consistent, "zero-iff-reduction mismatch (identity spaces)")?;
            ensure(
                rep.complexity.value <= rep_small.complexity.value + 1e-12,
                "monotonicity violated",
            )?;
        }
        Ok("three pairs consistent under nested spaces".into())
    }));

    out.push(check("complexity: attaining triple recomputes", || {
        let (enc_full, dec_full) = full_spaces_2()?;
        let t1 = toy::graded_task();
        let t2 = toy::matching_task();
        let fam = vec![Policy::tabular(vec![0, 1], 2)?];
        let res = exact_relative_complexity(&t1, &t2, &enc_full, &dec_full, &fam)?;
        ensure((res.value - 0.3).abs() <= 1e-12, format!("expected 0.3, got {}", res.value))?;
        Ok(format!("graded pair value {:.3} reproduced", res.value))
    }));

    out.push(check("advest: step gradients are partitioned", || {
        check_gradient_partitioning(5)?;
        Ok("step 1 moves only the policy, step 2 only [h, g]".into())
    }));

    out.push(check("advest: composed-chain gradients match finite differences", || {
        let worst = composed_gradient_check(21)?;
        ensure(worst <= 1e-4, format!("max relative error {worst:.2e}"))?;
        Ok(format!("max relative error {worst:.2e}"))
    }));

    out.push(check("advest: softmax backward is a proper Jacobian product", || {
        let p = crate::advest::softmax(&[0.3, -0.5, 1.1]);
        let dz = softmax_backward(&p, &[1.0, 0.0, -1.0]);
        ensure(dz.iter().sum::<f64>().abs() < 1e-12, "softmax rows must sum to zero")?;
        Ok("jacobian rows sum to zero".into())
    }));

    out.push(check("envs: cartpole success predicate shared across tasks", || {
        use crate::envs::cartpole::{CartpoleParams, CartpoleSim, GravityDir};
        let up = CartpoleSim { params: CartpoleParams::new(GravityDir::Up) };
        let down = CartpoleSim { params: CartpoleParams::new(GravityDir::Down) };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            ensure(up.in_bounds(&s) == down.in_bounds(&s), "in-bounds sets differ")?;
        }
        Ok("reward-1 state sets agree between the up and down tasks".into())
    }));

    out.push(check("envs: per-step rewards are nonnegative", || {
        use crate::envs::{make_cartpole, make_speed_tracker, GravityDir};
        use crate::taskcore::rollout;
        let zero3 = Policy::neural(
            MlpNet::zeros(&[4, 4, 3], Activation::Tanh)?,
            crate::taskcore::ActionDecode::Argmax,
            make_cartpole(GravityDir::Up)?.observations.clone(),
            Space::finite(3)?,
        )?;
        for task in [make_cartpole(GravityDir::Up)?, make_cartpole(GravityDir::Down)?] {
            let traj = rollout(&task, &zero3, 3)?;
            ensure(traj.iter().all(|s| s.reward >= 0.0), "negative cartpole reward")?;
        }
        let track = make_speed_tracker(1.0)?;
        let zero1 = Policy::neural(
            MlpNet::zeros(&[1, 4, 1], Activation::Tanh)?,
            crate::taskcore::ActionDecode::TanhBox,
            track.observations.clone(),
            track.actions.clone(),
        )?;
        let traj = rollout(&track, &zero1, 3)?;
        ensure(traj.iter().all(|s| s.reward >= 0.0), "negative tracker reward")?;
        Ok("gridworld/cartpole/tracker rewards >= 0 on sampled rollouts".into())
    }));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        let checks = run_all();
        let failures: Vec<&PropCheck> = checks.iter().filter(|c| !c.passed).collect();
        assert!(failures.is_empty(), "failed checks: {failures:#?}");
    }
}
