//! Scores a small batch against a random HFL gradient map and prints the
//! per-instance spectral pieces behind each InvRE value.

use invrisk::harness::data::{generate_synthetic, SyntheticKind};
use invrisk::linalg;
use invrisk::network::{Activation, Network};
use invrisk::risk::{calibrate_alpha, invre, SpectralProfile};
use invrisk::shared_map::{Loss, SharedMapSpec, Target};

fn main() -> invrisk::Result<()> {
    let net = Network::random(&[16, 6, 2], &[Activation::Tanh, Activation::Identity], 1)?;
    let data = generate_synthetic(SyntheticKind::Gaussian, 8, 16, 5)?;

    let mut profiles = Vec::new();
    for inst in &data {
        let spec = SharedMapSpec::hfl(net.clone(), Loss::CrossEntropy, Target::Class(inst.label))?;
        let j = spec.jacobian(&inst.x)?;
        let s = linalg::svd(&j.g)?;
        let unit: Vec<f64> = {
            let n = linalg::norm(&inst.x);
            inst.x.iter().map(|v| v / n).collect()
        };
        profiles.push(SpectralProfile::from_svd(&s, &unit, None)?);
    }

    let cal = calibrate_alpha(&profiles)?;
    println!("alpha = {:.6}, beta = {}", cal.alpha, cal.beta);
    for (i, prof) in profiles.iter().enumerate() {
        let r = invre(prof, &cal)?;
        println!(
            "instance {i}: rank {:>2}  sigma_1 {:.3e}  weighted bound {:.4}  invre {:.4}  {:?}",
            prof.rank, prof.sigma[0], r.weighted_bound, r.invre, r.band
        );
    }
    Ok(())
}
