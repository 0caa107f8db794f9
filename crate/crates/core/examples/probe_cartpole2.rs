use taskred_core::advest::{estimate_alg1, EstimatorConfig, MapArch};
use taskred_core::envs::{make_cartpole, GravityDir};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = args.get(1).map(String::as_str).unwrap_or("du");
    let alpha: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let iters: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let cu: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(4);
    let lrp: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(3e-3);
    let up = make_cartpole(GravityDir::Up).unwrap();
    let down = make_cartpole(GravityDir::Down).unwrap();
    let (task1, task2) = if dir == "du" { (&down, &up) } else { (&up, &down) };
    let mut config = EstimatorConfig::q_learning_defaults(seed);
    config.alpha = alpha;
    config.max_iters = iters;
    config.critic_updates_per_iter = cu;
    config.lr_policy = lrp;
    config.lr_enc_dec = lrp;
    let t0 = std::time::Instant::now();
    let out = estimate_alg1(
        task1, task2,
        MapArch::Mlp { hidden_layers: 2 },
        MapArch::Mlp { hidden_layers: 1 },
        2, &config,
    ).unwrap();
    for p in out.curve.iter().step_by(10) {
        println!("iter {:4}  r2 {:6.1}  r1comp {:6.1}  c1 {:9.3}  c2 {:9.3}", p.iter, p.r2, p.r1_composed, p.c1, p.c2);
    }
    println!(
        "dir={dir} alpha={alpha} seed={seed} cu={cu} lrp={lrp}: C~ = {:.3} (admissible={}, iters={}, r1={:.1}, r2={:.1}) in {:.1}s",
        out.result.value, out.result.inner_admissible, out.iters_run,
        out.r1_final.value, out.r2_final.value, t0.elapsed().as_secs_f64()
    );
}
