//! Scores 100 grid images, attacks each one, and correlates InvRE with the
//! attacker's expected reconstruction MSE.

use invrisk::harness::config::ExperimentConfig;
use invrisk::harness::pipeline::run_attack_eval;

const CONFIG: &str = r#"{
    "map": {
        "network": {"random": {"dims": [64, 16, 2], "activations": ["tanh", "identity"], "seed": 3}},
        "mode": "vfl_embedding",
        "cut": 1
    },
    "dataset": {"kind": "synthetic_grid", "m": 64},
    "n_instances": 100,
    "seed": 7,
    "attack": {"iters": 2000}
}"#;

fn main() -> invrisk::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let record = run_attack_eval(&cfg)?;
    let agg = &record.aggregate;
    println!("mean invre {:.4}, mean expected mse {:?}", agg.mean_invre, agg.mean_expected_mse);
    match &agg.correlation {
        Some(c) => {
            let r = &c.invre_vs_expected_mse;
            println!("invre vs expected mse: r = {:.4}, p = {:.3e}, n = {}", r.r, r.p_value, r.n);
            if let Some(s) = &c.invre_vs_ssim {
                println!("invre vs ssim:         r = {:.4}, p = {:.3e}", s.r, s.p_value);
            }
        }
        None => println!("too few attacked instances to correlate"),
    }
    Ok(())
}
