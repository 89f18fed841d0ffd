//! Gradient-matching reconstruction of one grid image from its HFL gradient,
//! with the tiered expected MSE used to score attack strength.

use invrisk::attack::{expected_mse, tiered_attack, AttackConfig};
use invrisk::harness::data::{generate_synthetic, SyntheticKind};
use invrisk::metrics::QualityScore;
use invrisk::network::{Activation, Network};
use invrisk::shared_map::{Loss, SharedMapSpec, Target};

fn main() -> invrisk::Result<()> {
    let net = Network::random(&[64, 8, 2], &[Activation::Tanh, Activation::Identity], 3)?;
    let inst = &generate_synthetic(SyntheticKind::Grid, 1, 64, 7)?[0];
    let spec = SharedMapSpec::hfl(net, Loss::CrossEntropy, Target::Class(inst.label))?;
    let gradient = spec.forward(&inst.x)?;

    let cfg = AttackConfig { tv_weight: 1e-4, ..AttackConfig::default() };
    let run = tiered_attack(&spec, &gradient, &cfg)?;

    let mut mses = Vec::new();
    for (tier, x_hat) in run.tiers.iter().zip(&run.x_hat_by_tier) {
        let clipped: Vec<f64> = x_hat.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let q = QualityScore::compute(&clipped, &inst.x)?;
        println!("{tier:>5} iterations: mse {:.3e}  psnr {:.2} dB  ssim {:.4}", q.mse, q.psnr, q.ssim.unwrap_or(f64::NAN));
        mses.push(q.mse);
    }
    println!("expected mse {:.3e}", expected_mse(&mses, &run.tiers)?);
    println!("final matching objective {:.3e}", run.result.final_objective);
    Ok(())
}
