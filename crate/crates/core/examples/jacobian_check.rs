//! Forward-mode Jacobians of both shared maps against central differences.

use invrisk::network::{Activation, Network};
use invrisk::shared_map::{jacobian_fd, Loss, SharedMapSpec, Target};

fn max_rel(a: &invrisk::linalg::Matrix, b: &invrisk::linalg::Matrix) -> invrisk::Result<f64> {
    Ok(a.sub(b)?.max_abs() / b.max_abs())
}

fn main() -> invrisk::Result<()> {
    let net = Network::random(&[12, 8, 3], &[Activation::Tanh, Activation::Identity], 7)?;
    let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();

    let hfl = SharedMapSpec::hfl(net.clone(), Loss::CrossEntropy, Target::Class(1))?;
    let vfl = SharedMapSpec::vfl(net, 1)?;
    for (name, spec) in [("hfl gradient", hfl), ("vfl embedding", vfl)] {
        let exact = spec.jacobian(&x)?;
        let fd = jacobian_fd(&spec, &x, 1e-5)?;
        println!("{name}: {}x{} jacobian, relative error {:.2e}", exact.p(), exact.m(), max_rel(&fd.g, &exact.g)?);
    }
    Ok(())
}
