//! Mean InvRE and utility across a Dropout strength grid on a VFL embedding
//! map, driven through the same config the CLI reads.

use invrisk::harness::config::ExperimentConfig;
use invrisk::harness::pipeline::run_defense_sweep;

const CONFIG: &str = r#"{
    "map": {
        "network": {"random": {"dims": [64, 16, 2], "activations": ["tanh", "identity"], "seed": 3}},
        "mode": "vfl_embedding",
        "cut": 1
    },
    "dataset": {"kind": "synthetic_grid", "m": 64},
    "n_instances": 30,
    "seed": 11,
    "defense": {"kind": "dropout", "lambda": 0.5, "seed": 4},
    "grid": [0.0, 0.5, 0.8, 0.9, 0.95]
}"#;

fn main() -> invrisk::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let record = run_defense_sweep(&cfg)?;
    println!("{:>8}  {:>10}  {:>10}", "lambda", "mean invre", "utility");
    for row in record.sweep.as_deref().unwrap_or_default() {
        println!(
            "{:>8.2}  {:>10.5}  {:>10.4}",
            row.defense_param,
            row.aggregate.mean_invre,
            row.aggregate.utility_proxy.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
