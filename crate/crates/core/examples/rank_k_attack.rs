//! On a linear map the rank-k pseudo-inverse attacker's squared error equals
//! the tail energy τ_k of the input in the right singular basis.

use invrisk::attack::empirical_invloss;
use invrisk::linalg::Matrix;
use invrisk::risk::{bound_rank_k, spectral_profile};
use invrisk::shared_map::{Jacobian, MapKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> invrisk::Result<()> {
    let (p, m) = (6, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let g = Matrix::from_vec(p, m, (0..p * m).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let j = Jacobian::from_matrix(g, MapKind::Vfl)?;
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();

    let prof = spectral_profile(&j, &x, None)?;
    println!("{:>2}  {:>14}  {:>14}", "k", "attack error", "tau_k");
    for k in 0..=prof.d {
        let err = empirical_invloss(&j, &x, k)?;
        let tau = bound_rank_k(&prof, k)?;
        println!("{k:>2}  {err:>14.10}  {tau:>14.10}");
    }
    Ok(())
}
