use taskred_core::advest::{estimate_alg1, EstimatorConfig, MapArch};
use taskred_core::envs::toy;

fn main() {
    let task1 = toy::graded_task();
    let task2 = toy::matching_task();
    // exact value on full spaces is 0.3
    for seed in 0..5u64 {
        let mut config = EstimatorConfig::q_learning_defaults(seed);
        config.alpha = 1.0;
        config.max_iters = 300;
        config.batch_size = 256;
        config.warmup_steps = 256;
        config.hidden_width = 16;
        config.env_steps_per_iter = 64;
        config.eval_every = 10;
        config.eval_rollouts = 400;
        let t0 = std::time::Instant::now();
        let out = estimate_alg1(
            &task1,
            &task2,
            MapArch::Mlp { hidden_layers: 1 },
            MapArch::Mlp { hidden_layers: 1 },
            1,
            &config,
        )
        .unwrap();
        println!(
            "seed {seed}: C~ = {:.3} (admissible={}, iters={}, r1={:.3}, r2={:.3}) in {:.1}s",
            out.result.value,
            out.result.inner_admissible,
            out.iters_run,
            out.r1_final.value,
            out.r2_final.value,
            t0.elapsed().as_secs_f64()
        );
    }
}
