//! Reconstruction attackers.
//!
//! [`RankKAttacker`] is the analytic attacker that inverts the locally
//! linearized shared map through a rank-`k` truncated pseudoinverse.
//! [`matching_attack`] is the iterative gradient/embedding-matching attack
//! (DLG / Inverting-Gradients style) that serves as its empirical oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::shared_map::{Jacobian, SharedMapSpec};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const TV_SMOOTHING: f64 = 1e-6;
const COSINE_FLOOR: f64 = 1e-12;

/// Iteration budgets used to model attackers of increasing strength.
pub const DEFAULT_TIERS: [usize; 3] = [100, 500, 2000];

#[derive(Debug, Clone)]
pub struct RankKAttacker {
    /// `m × p` inverse map `V_{1:k} Σ_k^{-1} U_{1:k}ᵀ`.
    pub a_star: Matrix,
    pub k: usize,
}

pub fn build_rank_k(j: &Jacobian, k: usize) -> Result<RankKAttacker> {
    let s = linalg::svd(&j.g)?;
    Ok(RankKAttacker { a_star: linalg::truncated_pinv(&s, k)?, k })
}

pub fn reconstruct_rank_k(att: &RankKAttacker, shared: &[f64]) -> Result<Vec<f64>> {
    att.a_star.matvec(shared)
}

/// Squared error the rank-`k` attacker achieves on the linearized map `x ↦ G x`.
pub fn empirical_invloss(j: &Jacobian, x: &[f64], k: usize) -> Result<f64> {
    let att = build_rank_k(j, k)?;
    let shared = j.g.matvec(x)?;
    let x_hat = reconstruct_rank_k(&att, &shared)?;
    Ok(x_hat.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Squared Euclidean distance.
    L2,
    /// `1 − cos(F(x̂), target)`.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Zeros,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default = "default_distance")]
    pub distance: Distance,
    #[serde(default)]
    pub tv_weight: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_init")]
    pub init: Init,
    /// Iteration budgets for the expected-MSE aggregation.
    #[serde(default = "default_tiers")]
    pub tiers: Vec<usize>,
}

fn default_distance() -> Distance {
    Distance::L2
}
fn default_iters() -> usize {
    2000
}
fn default_step() -> f64 {
    0.01
}
fn default_init() -> Init {
    Init::Zeros
}
fn default_tiers() -> Vec<usize> {
    DEFAULT_TIERS.to_vec()
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            distance: default_distance(),
            tv_weight: 0.0,
            iters: default_iters(),
            step_size: default_step(),
            seed: 0,
            init: default_init(),
            tiers: default_tiers(),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::Config("attack iters must be at least 1".into()));
        }
        if !(self.tv_weight >= 0.0) || !self.tv_weight.is_finite() {
            return Err(Error::Config(format!("tv_weight must be non-negative, got {}", self.tv_weight)));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if self.tiers.contains(&0) {
            return Err(Error::Config("attack tiers must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iter: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub x_hat: Vec<f64>,
    pub trajectory: Vec<Checkpoint>,
    pub final_objective: f64,
}

/// Minimizes `D(F(x̂), target) + tv_weight · TV(x̂)` with bias-corrected
/// moment (Adam) steps.
pub fn matching_attack(spec: &SharedMapSpec, shared_target: &[f64], cfg: &AttackConfig) -> Result<AttackResult> {
    run_attack(spec, shared_target, cfg, cfg.iters, &[]).map(|(r, _)| r)
}

/// Iterates reached by an attacker of each strength tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredAttack {
    pub tiers: Vec<usize>,
    /// `x_hat_by_tier[t]` is the iterate after `tiers[t]` updates.
    pub x_hat_by_tier: Vec<Vec<f64>>,
    pub result: AttackResult,
}

/// One run long enough for the strongest tier (and at least `cfg.iters`),
/// snapshotting the iterate at every tier budget. Each snapshot equals a
/// separate run of that length because the optimizer is deterministic.
pub fn tiered_attack(spec: &SharedMapSpec, shared_target: &[f64], cfg: &AttackConfig) -> Result<TieredAttack> {
    if cfg.tiers.is_empty() {
        return Err(Error::Config("attack tiers must be nonempty".into()));
    }
    let total = cfg.tiers.iter().copied().max().unwrap_or(0).max(cfg.iters);
    let (result, snaps) = run_attack(spec, shared_target, cfg, total, &cfg.tiers)?;
    Ok(TieredAttack { tiers: cfg.tiers.clone(), x_hat_by_tier: snaps, result })
}

fn run_attack(
    spec: &SharedMapSpec,
    shared_target: &[f64],
    cfg: &AttackConfig,
    iters: usize,
    snapshot_at: &[usize],
) -> Result<(AttackResult, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if shared_target.len() != spec.output_dim() {
        return Err(Error::Shape(format!(
            "target has {} entries, shared map emits {}",
            shared_target.len(),
            spec.output_dim()
        )));
    }
    let m = spec.input_dim();
    let mut x = match cfg.init {
        Init::Zeros => vec![0.0; m],
        Init::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..m).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let mut first = vec![0.0; m];
    let mut second = vec![0.0; m];
    let interval = (iters / 20).max(1);
    let mut trajectory = Vec::with_capacity(iters / interval + 2);
    let mut snaps: Vec<Option<Vec<f64>>> = vec![None; snapshot_at.len()];

    for it in 0..iters {
        let (obj, grad) = objective(spec, shared_target, cfg, &x)?;
        if !obj.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("attack objective became non-finite at iteration {it}")));
        }
        if it % interval == 0 {
            trajectory.push(Checkpoint { iter: it, objective: obj });
        }
        let t = (it + 1) as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..m {
            first[i] = ADAM_BETA1 * first[i] + (1.0 - ADAM_BETA1) * grad[i];
            second[i] = ADAM_BETA2 * second[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            x[i] -= cfg.step_size * (first[i] / c1) / ((second[i] / c2).sqrt() + ADAM_EPS);
        }
        for (slot, &at) in snaps.iter_mut().zip(snapshot_at) {
            if at == it + 1 {
                *slot = Some(x.clone());
            }
        }
    }
    let (final_objective, _) = objective(spec, shared_target, cfg, &x)?;
    if !final_objective.is_finite() {
        return Err(Error::Numeric("attack objective became non-finite at the final iterate".into()));
    }
    trajectory.push(Checkpoint { iter: iters, objective: final_objective });
    let snaps = snaps.into_iter().map(|s| s.unwrap_or_else(|| x.clone())).collect();
    Ok((AttackResult { x_hat: x, trajectory, final_objective }, snaps))
}

fn objective(spec: &SharedMapSpec, target: &[f64], cfg: &AttackConfig, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let f = spec.forward(x)?;
    let (dist, d_f) = match cfg.distance {
        Distance::L2 => {
            let diff: Vec<f64> = f.iter().zip(target).map(|(a, b)| a - b).collect();
            (linalg::norm_sq(&diff), diff.iter().map(|d| 2.0 * d).collect::<Vec<_>>())
        }
        Distance::Cosine => cosine_distance(&f, target),
    };
    let mut grad = spec.vjp(x, &d_f)?;
    let mut obj = dist;
    if cfg.tv_weight > 0.0 {
        let (tv, tv_grad) = total_variation(x);
        obj += cfg.tv_weight * tv;
        for (g, t) in grad.iter_mut().zip(tv_grad) {
            *g += cfg.tv_weight * t;
        }
    }
    Ok((obj, grad))
}

fn cosine_distance(f: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let nf = linalg::norm(f).max(COSINE_FLOOR);
    let nt = linalg::norm(t).max(COSINE_FLOOR);
    let ft = linalg::dot(f, t);
    let cos = ft / (nf * nt);
    let grad = f
        .iter()
        .zip(t)
        .map(|(&fi, &ti)| -(ti / (nf * nt) - ft * fi / (nf * nf * nf * nt)))
        .collect();
    (1.0 - cos, grad)
}

/// Anisotropic total variation with a smoothed absolute value.
///
/// Inputs whose length is a perfect square are treated as square images;
/// anything else uses adjacent differences along the vector.
pub fn total_variation(x: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    let mut add = |a: usize, b: usize| {
        let d = x[b] - x[a];
        let r = (d * d + TV_SMOOTHING * TV_SMOOTHING).sqrt();
        value += r - TV_SMOOTHING;
        let g = d / r;
        grad[b] += g;
        grad[a] -= g;
    };
    match square_side(x.len()) {
        Some(side) if side >= 2 => {
            for r in 0..side {
                for c in 0..side {
                    let i = r * side + c;
                    if c + 1 < side {
                        add(i, i + 1);
                    }
                    if r + 1 < side {
                        add(i, i + side);
                    }
                }
            }
        }
        _ => {
            for i in 1..x.len() {
                add(i - 1, i);
            }
        }
    }
    (value, grad)
}

pub(crate) fn square_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Probability of each attacker tier: `P_t ∝ 1 / T_t` with `T_t` the
/// cumulative iteration count up to tier `t`.
pub fn tier_weights(iters_by_tier: &[usize]) -> Result<Vec<f64>> {
    if iters_by_tier.is_empty() {
        return Err(Error::InvalidArgument("no attack tiers".into()));
    }
    if iters_by_tier.contains(&0) {
        return Err(Error::InvalidArgument("tier iteration counts must be positive".into()));
    }
    let mut cumulative = 0.0;
    let inv: Vec<f64> = iters_by_tier
        .iter()
        .map(|&t| {
            cumulative += t as f64;
            1.0 / cumulative
        })
        .collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / total).collect())
}

/// Tier-weighted reconstruction error `Σ_t P_t · MSE_t`.
pub fn expected_mse(mse_by_tier: &[f64], iters_by_tier: &[usize]) -> Result<f64> {
    if mse_by_tier.len() != iters_by_tier.len() {
        return Err(Error::Shape(format!(
            "{} MSE values for {} tiers",
            mse_by_tier.len(),
            iters_by_tier.len()
        )));
    }
    let w = tier_weights(iters_by_tier)?;
    Ok(w.iter().zip(mse_by_tier).map(|(p, e)| p * e).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;
    use crate::network::{Activation, DenseLayer, Network};
    use crate::shared_map::MapKind;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn jac(g: Matrix) -> Jacobian {
        Jacobian::from_matrix(g, MapKind::Vfl).unwrap()
    }

    #[test]
    fn identity_and_zero_rank() {
        let j = jac(Matrix::identity(3));
        assert_eq!(build_rank_k(&j, 3).unwrap().a_star, Matrix::identity(3));
        let att = build_rank_k(&j, 0).unwrap();
        assert_eq!(att.a_star, Matrix::zeros(3, 3));
        let x = [0.5, -1.0, 2.0];
        let rec = reconstruct_rank_k(&att, &x).unwrap();
        assert_eq!(rec, vec![0.0; 3]);
        assert!((empirical_invloss(&j, &x, 0).unwrap() - 5.25).abs() < 1e-15);
        assert!(empirical_invloss(&j, &x, 3).unwrap() < 1e-30);
    }

    #[test]
    fn full_rank_square_inverts() {
        let g = random_matrix(4, 4, 1);
        let j = jac(g.clone());
        let att = build_rank_k(&j, 4).unwrap();
        let prod = att.a_star.matmul(&g).unwrap();
        assert!(prod.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-8);
        let x = [0.3, -0.2, 0.9, 0.1];
        let rec = reconstruct_rank_k(&att, &g.matvec(&x).unwrap()).unwrap();
        let err: f64 = rec.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err < 1e-18);
    }

    #[test]
    fn rank_two_map_loses_exactly_the_null_component() {
        // G = U diag(2, 1, 0) Vᵀ with orthonormal U, V from a random SVD.
        let base = svd(&random_matrix(3, 3, 4)).unwrap();
        let sig = Matrix::from_diag(&[2.0, 1.0, 0.0]);
        let g = base.u.matmul(&sig).unwrap().matmul(&base.vt).unwrap();
        let s = svd(&g).unwrap();
        let null_dir = s.vt.row(2).to_vec();
        let c = 0.7;
        let x: Vec<f64> = (0..3).map(|i| 0.4 * s.vt[(0, i)] - 0.3 * s.vt[(1, i)] + c * null_dir[i]).collect();
        let loss = empirical_invloss(&jac(g), &x, 2).unwrap();
        assert!((loss - c * c).abs() < 1e-12);
    }

    #[test]
    fn first_singular_direction_is_recovered_at_rank_one() {
        let g = random_matrix(5, 4, 2);
        let s = svd(&g).unwrap();
        let x = s.vt.row(0).to_vec();
        let j = jac(g);
        for k in 1..=4 {
            assert!(empirical_invloss(&j, &x, k).unwrap() < 1e-9);
        }
    }

    #[test]
    fn invloss_equals_tail_energy_and_is_monotone() {
        let g = random_matrix(6, 5, 3);
        let s = svd(&g).unwrap();
        let x = [0.1, -0.4, 0.2, 0.8, -0.3];
        let proj = linalg::project(&s.vt, &x).unwrap();
        let j = jac(g);
        let mut prev = f64::INFINITY;
        for k in 0..=5 {
            let loss = empirical_invloss(&j, &x, k).unwrap();
            let tail: f64 = proj[k..].iter().map(|v| v * v).sum();
            assert!((loss - tail).abs() < 1e-9);
            assert!(loss <= prev + 1e-12);
            prev = loss;
        }
    }

    #[test]
    fn rank_beyond_effective_is_rejected() {
        let j = jac(Matrix::from_diag(&[1.0, 0.0]));
        assert!(matches!(build_rank_k(&j, 2), Err(Error::RankExceeded { effective: 1, .. })));
    }

    fn identity_activation_map(w: Matrix) -> SharedMapSpec {
        let n = w.cols();
        let layer = DenseLayer::new(w.clone().into_vec(), vec![0.0; w.rows()], n, Activation::Identity).unwrap();
        SharedMapSpec::vfl(Network::new(vec![layer]).unwrap(), 1).unwrap()
    }

    #[test]
    fn linear_matching_attack_converges() {
        // Well-conditioned square map: W = I + small perturbation.
        let mut w = random_matrix(9, 9, 5).scale(0.1);
        for i in 0..9 {
            w[(i, i)] += 1.0;
        }
        let spec = identity_activation_map(w);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let target = spec.forward(&x).unwrap();
        let res = matching_attack(&spec, &target, &AttackConfig::default()).unwrap();
        let err: f64 = res.x_hat.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err < 1e-4, "error {err}");
        assert!(res.final_objective < res.trajectory[0].objective);
    }

    #[test]
    fn zero_target_from_zero_init_starts_at_zero() {
        let spec = identity_activation_map(random_matrix(4, 4, 7));
        let target = spec.forward(&[0.0; 4]).unwrap();
        let cfg = AttackConfig { iters: 5, tv_weight: 0.3, ..AttackConfig::default() };
        let res = matching_attack(&spec, &target, &cfg).unwrap();
        assert_eq!(res.trajectory[0].objective, 0.0);
    }

    #[test]
    fn cosine_attack_is_invariant_to_target_scale() {
        let net = Network::random(&[4, 6], &[Activation::Identity], 3).unwrap();
        let spec = SharedMapSpec::vfl(net, 1).unwrap();
        let x = [0.2, 0.6, 0.1, 0.9];
        let t = spec.forward(&x).unwrap();
        let t2: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        let cfg = AttackConfig { distance: Distance::Cosine, iters: 300, init: Init::Gaussian, seed: 4, ..AttackConfig::default() };
        let a = matching_attack(&spec, &t, &cfg).unwrap();
        let b = matching_attack(&spec, &t2, &cfg).unwrap();
        for (u, v) in a.x_hat.iter().zip(&b.x_hat) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn attack_is_seed_deterministic() {
        let net = Network::random(&[9, 5, 4], &[Activation::Tanh, Activation::Tanh], 2).unwrap();
        let spec = SharedMapSpec::vfl(net, 2).unwrap();
        let target = spec.forward(&[0.5; 9]).unwrap();
        let cfg = AttackConfig { iters: 50, init: Init::Gaussian, seed: 11, tv_weight: 0.01, ..AttackConfig::default() };
        let a = matching_attack(&spec, &target, &cfg).unwrap();
        let b = matching_attack(&spec, &target, &cfg).unwrap();
        assert_eq!(a, b);
        let c = matching_attack(&spec, &target, &AttackConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.x_hat, c.x_hat);
    }

    #[test]
    fn tier_snapshots_match_separate_runs() {
        let net = Network::random(&[9, 6, 5], &[Activation::Tanh, Activation::Tanh], 4).unwrap();
        let spec = SharedMapSpec::vfl(net, 2).unwrap();
        let target = spec.forward(&[0.2; 9]).unwrap();
        let cfg = AttackConfig { iters: 30, tiers: vec![5, 12, 30], ..AttackConfig::default() };
        let tiered = tiered_attack(&spec, &target, &cfg).unwrap();
        for (t, x) in tiered.tiers.iter().zip(&tiered.x_hat_by_tier) {
            let alone = matching_attack(&spec, &target, &AttackConfig { iters: *t, ..cfg.clone() }).unwrap();
            assert_eq!(&alone.x_hat, x);
        }
        assert_eq!(tiered.result.x_hat, tiered.x_hat_by_tier[2]);
    }

    #[test]
    fn attack_rejects_bad_configs() {
        let spec = identity_activation_map(Matrix::identity(2));
        assert!(matching_attack(&spec, &[0.0, 0.0], &AttackConfig { iters: 0, ..AttackConfig::default() }).is_err());
        assert!(matching_attack(&spec, &[0.0, 0.0], &AttackConfig { tv_weight: -1.0, ..AttackConfig::default() }).is_err());
        assert!(matching_attack(&spec, &[0.0], &AttackConfig::default()).is_err());
    }

    #[test]
    fn total_variation_gradient_matches_differences() {
        for n in [9usize, 7] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64) * 0.1).collect();
            let (_, g) = total_variation(&x);
            let h = 1e-7;
            for i in 0..n {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (total_variation(&xp).0 - total_variation(&xm).0) / (2.0 * h);
                assert!((g[i] - fd).abs() < 1e-5);
            }
        }
        assert_eq!(total_variation(&[0.3; 16]).0, 0.0);
    }

    #[test]
    fn expected_mse_cases() {
        assert_eq!(expected_mse(&[0.4], &[100]).unwrap(), 0.4);
        let (a, b) = (0.9, 0.3);
        let w = tier_weights(&[1, 1]).unwrap();
        assert_eq!(w, vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!((expected_mse(&[a, b], &[1, 1]).unwrap() - (2.0 * a + b) / 3.0).abs() < 1e-15);
        let w = tier_weights(&DEFAULT_TIERS).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(expected_mse(&[], &[]).is_err());
        assert!(expected_mse(&[1.0], &[0]).is_err());
        assert!(expected_mse(&[1.0, 2.0], &[1]).is_err());
    }
}
