//! Data-space noise truncated to the top-k right singular subspace raises the
//! rank-k bound exactly as much as the full draw, with less energy.

use invrisk::defense::{adaptive_noise_dnp_with, DefenseKind, DefenseSpec};
use invrisk::linalg;
use invrisk::network::{Activation, Network};
use invrisk::risk::{bound_dnp, SpectralProfile};
use invrisk::shared_map::SharedMapSpec;

fn main() -> invrisk::Result<()> {
    let net = Network::random(&[32, 24, 4], &[Activation::Tanh, Activation::Identity], 2)?;
    let spec = SharedMapSpec::vfl(net, 1)?;
    let x: Vec<f64> = (0..32).map(|i| ((i * 7 % 11) as f64 / 11.0) - 0.5).collect();
    let s = linalg::svd(&spec.jacobian(&x)?.g)?;
    let x_unit: Vec<f64> = {
        let n = linalg::norm(&x);
        x.iter().map(|v| v / n).collect()
    };

    let defense = DefenseSpec::noise(DefenseKind::InvlDnp, 1e-3, 0);
    let (mut full_energy, mut kept_energy) = (0.0, 0.0);
    for seed in 0..5 {
        let noise = adaptive_noise_dnp_with(&s, &defense.with_seed(seed))?;
        let k = noise.kept.end;
        let bound = |eps: &[f64]| bound_dnp(&SpectralProfile::from_svd(&s, &x_unit, Some(eps))?, k);
        let full = linalg::norm_sq(&noise.raw);
        println!(
            "seed {seed}: k = {k} of {}  bound full {:.10}  truncated {:.10}  energy {:.3e} -> {:.3e}",
            s.d(),
            bound(&noise.raw)?,
            bound(&noise.eps_hat)?,
            full,
            noise.energy
        );
        full_energy += full;
        kept_energy += noise.energy;
    }
    println!("energy saved: {:.1}%", 100.0 * (1.0 - kept_energy / full_energy));
    Ok(())
}
