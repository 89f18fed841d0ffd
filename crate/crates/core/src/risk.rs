//! Reconstruction-error bounds for rank-`k` attackers and the InvRE score.
//!
//! Every bound works on a [`SpectralProfile`]: the singular values of the
//! Jacobian plus the coordinates of the (unit-normalized) instance, and
//! optionally of an injected noise vector, in its singular bases.
//!
//! The higher-order linearization remainder is not modeled; all bounds are
//! exact for linear maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SvdBundle, PINV_TOL};
use crate::shared_map::Jacobian;

pub const DEFAULT_BETA: f64 = 5.0;
const TIE_GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub sigma: Vec<f64>,
    /// `V_iᵀ x` for each of the `d` right singular vectors.
    pub proj_x: Vec<f64>,
    /// `V_iᵀ ε` for data-space noise of length `m`.
    pub proj_noise_v: Option<Vec<f64>>,
    /// `U_iᵀ ε` for shared-space noise of length `p`.
    pub proj_noise_u: Option<Vec<f64>>,
    /// Energy of `x` outside the span of the `d` right singular vectors
    /// (non-zero only when `p < m`).
    pub null_energy: f64,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    /// Number of singular values above `1e-12 · σ_1`.
    pub rank: usize,
}

/// Decomposes `j.g` and projects `x` (and `noise`, if given) onto its
/// singular vectors. Noise of length `m` is treated as data-space noise and
/// noise of length `p` as shared-space noise; when `m == p` both projections
/// are filled.
pub fn spectral_profile(j: &Jacobian, x: &[f64], noise: Option<&[f64]>) -> Result<SpectralProfile> {
    let s = linalg::svd(&j.g)?;
    SpectralProfile::from_svd(&s, x, noise)
}

impl SpectralProfile {
    pub fn from_svd(s: &SvdBundle, x: &[f64], noise: Option<&[f64]>) -> Result<Self> {
        let (m, p, d) = (s.m(), s.p(), s.d());
        if x.len() != m {
            return Err(Error::Shape(format!("instance has {} entries, Jacobian has {m} columns", x.len())));
        }
        let proj_x = linalg::project(&s.vt, x)?;
        let captured: f64 = proj_x.iter().map(|v| v * v).sum();
        let null_energy = if d == m { 0.0 } else { (linalg::norm_sq(x) - captured).max(0.0) };
        let (mut proj_noise_v, mut proj_noise_u) = (None, None);
        if let Some(eps) = noise {
            if eps.len() != m && eps.len() != p {
                return Err(Error::Shape(format!(
                    "noise of length {} matches neither m = {m} nor p = {p}",
                    eps.len()
                )));
            }
            if eps.len() == m {
                proj_noise_v = Some(linalg::project(&s.vt, eps)?);
            }
            if eps.len() == p {
                proj_noise_u = Some(s.u.tr_matvec(eps)?);
            }
        }
        Ok(SpectralProfile {
            sigma: s.sigma.clone(),
            proj_x,
            proj_noise_v,
            proj_noise_u,
            null_energy,
            m,
            p,
            d,
            rank: linalg::effective_rank(s, PINV_TOL),
        })
    }

    fn check_rank(&self, k: usize) -> Result<()> {
        if k > self.d {
            return Err(Error::InvalidArgument(format!("rank {k} outside 0..={}", self.d)));
        }
        Ok(())
    }

    fn noise_v(&self) -> Result<&[f64]> {
        self.proj_noise_v
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("profile carries no data-space noise projection".into()))
    }

    fn noise_u(&self) -> Result<&[f64]> {
        self.proj_noise_u
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("profile carries no shared-space noise projection".into()))
    }

    fn tau(&self, k: usize) -> f64 {
        let k = k.min(self.rank);
        self.proj_x[k..].iter().map(|v| v * v).sum::<f64>() + self.null_energy
    }

    fn dnp_noise_term(&self, noise: &[f64], k: usize) -> f64 {
        let k = k.min(self.rank);
        noise[..k].iter().map(|v| v * v).sum::<f64>() / self.m as f64
    }

    fn gnp_noise_term(&self, noise: &[f64], k: usize) -> f64 {
        let k = k.min(self.rank);
        noise[..k]
            .iter()
            .zip(&self.sigma)
            .map(|(n, s)| n * n / (s * s * self.p as f64))
            .sum()
    }
}

/// Residual energy left to a rank-`k` attacker, `τ_k = Σ_{i>k} (V_iᵀx)²`
/// plus any energy outside the row space. Ranks beyond the effective rank
/// give the same value as the effective rank.
pub fn bound_rank_k(prof: &SpectralProfile, k: usize) -> Result<f64> {
    prof.check_rank(k)?;
    Ok(prof.tau(k))
}

/// Bound under data-space noise: `τ_k + Σ_{i≤k} (V_iᵀε)² / m`.
pub fn bound_dnp(prof: &SpectralProfile, k: usize) -> Result<f64> {
    prof.check_rank(k)?;
    let noise = prof.noise_v()?;
    Ok(prof.tau(k) + prof.dnp_noise_term(noise, k))
}

/// Bound under gradient/embedding noise: `τ_k + Σ_{i≤k} (U_iᵀε)² / (σ_i² p)`.
pub fn bound_gnp(prof: &SpectralProfile, k: usize) -> Result<f64> {
    prof.check_rank(k)?;
    let noise = prof.noise_u()?;
    if k > prof.rank {
        return Err(Error::Numeric(format!(
            "σ_{} is zero within the summed range (effective rank {})",
            prof.rank + 1,
            prof.rank
        )));
    }
    Ok(prof.tau(k) + prof.gnp_noise_term(noise, k))
}

/// Lower bound on the error of any attacker once `q` shared dimensions are
/// dropped: the energy of `x` along the `q` weakest right singular vectors
/// of the original Jacobian.
pub fn ic_lower_bound(original: &SpectralProfile, q: usize) -> Result<f64> {
    original.check_rank(q)?;
    Ok(original.proj_x[original.d - q..].iter().map(|v| v * v).sum())
}

/// Feasibility weight of each attacker rank `k = 1..=d`.
///
/// `T_k = Σ_{i≤k} σ_i / (σ_i − σ_{i+1})` with `σ_{d+1} = 0` and gaps floored
/// at `1e-12 · σ_1`; `P_k ∝ 1 / T_k`. Ranks past the effective rank reuse
/// the same directions as rank `r` and get `P_k = 0`.
pub fn feasibility_weights(sigma: &[f64]) -> Result<Vec<f64>> {
    let top = sigma.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::InvalidArgument("feasibility weights need a non-zero singular value".into()));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("singular values must be non-increasing".into()));
    }
    let floor = TIE_GAP_FLOOR * top;
    let rank = sigma.iter().take_while(|&&v| v > PINV_TOL * top).count();
    let mut cumulative = 0.0;
    let inv: Vec<f64> = sigma
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if i >= rank {
                return 0.0;
            }
            let next = sigma.get(i + 1).copied().unwrap_or(0.0);
            cumulative += s / (s - next).max(floor);
            1.0 / cumulative
        })
        .collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl Calibration {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid calibration alpha={alpha} beta={beta}")));
        }
        Ok(Calibration { alpha, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskBand {
    Minimal,
    Moderate,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBands {
    pub minimal_below: f64,
    pub high_above: f64,
}

impl Default for RiskBands {
    fn default() -> Self {
        RiskBands { minimal_below: 0.15, high_above: 0.45 }
    }
}

impl RiskBands {
    pub fn classify(&self, invre: f64) -> RiskBand {
        if invre < self.minimal_below {
            RiskBand::Minimal
        } else if invre > self.high_above {
            RiskBand::High
        } else {
            RiskBand::Moderate
        }
    }
}

/// Which bound feeds the τ sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Plain,
    /// Data-space noise (needs `proj_noise_v`).
    Dnp,
    /// Shared-space noise (needs `proj_noise_u`).
    Gnp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// `τ_0 ..= τ_d`
    pub tau: Vec<f64>,
    /// `P_1 ..= P_d`
    pub p_weights: Vec<f64>,
    pub weighted_bound: f64,
    pub invre: f64,
    pub band: RiskBand,
}

/// `τ_0 ..= τ_d` under the chosen bound. Noise terms stop at the effective
/// rank, like the attacker itself.
pub fn tau_sequence(prof: &SpectralProfile, kind: BoundKind) -> Result<Vec<f64>> {
    let noise = match kind {
        BoundKind::Plain => None,
        BoundKind::Dnp => Some(prof.noise_v()?),
        BoundKind::Gnp => Some(prof.noise_u()?),
    };
    Ok((0..=prof.d)
        .map(|k| {
            prof.tau(k)
                + match (kind, noise) {
                    (BoundKind::Dnp, Some(n)) => prof.dnp_noise_term(n, k),
                    (BoundKind::Gnp, Some(n)) => prof.gnp_noise_term(n, k),
                    _ => 0.0,
                }
        })
        .collect())
}

/// `Σ_{k=1}^{d} P_k τ_k` and the pieces it was built from. A zero Jacobian
/// leaves every attacker with `τ_0`, so the weights are uniform there.
pub fn weighted_bound(prof: &SpectralProfile, kind: BoundKind) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let tau = tau_sequence(prof, kind)?;
    let weights = if prof.rank == 0 {
        vec![1.0 / prof.d as f64; prof.d]
    } else {
        feasibility_weights(&prof.sigma)?
    };
    let wb = weights.iter().zip(&tau[1..]).map(|(p, t)| p * t).sum();
    Ok((tau, weights, wb))
}

pub fn sigmoid_score(weighted_bound: f64, cal: &Calibration) -> f64 {
    1.0 / (1.0 + (cal.beta * (weighted_bound - cal.alpha)).exp())
}

/// Alternate score for comparing instances under one fixed model: the
/// reciprocal of the weighted bound.
pub fn inverse_bound_score(weighted_bound: f64) -> f64 {
    1.0 / weighted_bound
}

pub fn invre(prof: &SpectralProfile, cal: &Calibration) -> Result<RiskReport> {
    invre_with(prof, cal, BoundKind::Plain, &RiskBands::default())
}

pub fn invre_with(prof: &SpectralProfile, cal: &Calibration, kind: BoundKind, bands: &RiskBands) -> Result<RiskReport> {
    let (tau, p_weights, wb) = weighted_bound(prof, kind)?;
    let score = sigmoid_score(wb, cal);
    Ok(RiskReport { tau, p_weights, weighted_bound: wb, invre: score, band: bands.classify(score) })
}

/// `alpha` = mean weighted bound over the profiles, `beta` = 5.
pub fn calibrate_alpha(profiles: &[SpectralProfile]) -> Result<Calibration> {
    calibrate_alpha_with(profiles, BoundKind::Plain)
}

pub fn calibrate_alpha_with(profiles: &[SpectralProfile], kind: BoundKind) -> Result<Calibration> {
    if profiles.is_empty() {
        return Err(Error::InvalidArgument("cannot calibrate on an empty batch".into()));
    }
    let mut total = 0.0;
    for p in profiles {
        total += weighted_bound(p, kind)?.2;
    }
    Calibration::new(total / profiles.len() as f64, DEFAULT_BETA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::empirical_invloss;
    use crate::linalg::{svd, Matrix};
    use crate::shared_map::MapKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = linalg::norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    fn jac(g: Matrix) -> Jacobian {
        Jacobian::from_matrix(g, MapKind::Vfl).unwrap()
    }

    #[test]
    fn identity_profile_projects_to_coordinates() {
        let prof = spectral_profile(&jac(Matrix::identity(4)), &[1.0, 0.0, 0.0, 0.0], None).unwrap();
        assert_eq!(prof.proj_x, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(bound_rank_k(&prof, 0).unwrap(), 1.0);
        assert_eq!(bound_rank_k(&prof, 4).unwrap(), 0.0);
    }

    #[test]
    fn vector_outside_row_space_has_no_projection() {
        // 2x3 map whose row space excludes e3
        let g = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![-1.0, 1.0, 0.0]]).unwrap();
        let prof = spectral_profile(&jac(g), &[0.0, 0.0, 1.0], None).unwrap();
        assert!(prof.proj_x.iter().all(|v| v.abs() < 1e-15));
        assert!((prof.null_energy - 1.0).abs() < 1e-15);
        assert!((bound_rank_k(&prof, 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_energy_matches_recomputation() {
        let g = random_matrix(5, 8, 3);
        let x = unit((0..8).map(|i| (i as f64).sin()).collect());
        let prof = spectral_profile(&jac(g.clone()), &x, None).unwrap();
        let s = svd(&g).unwrap();
        let direct: f64 = (0..5).map(|i| linalg::dot(s.vt.row(i), &x).powi(2)).sum();
        let ours: f64 = prof.proj_x.iter().map(|v| v * v).sum();
        assert!((direct - ours).abs() < 1e-10);
        assert!(ours <= 1.0 + 1e-9);
    }

    #[test]
    fn bound_is_tight_on_linear_maps() {
        for (seed, (p, m)) in [(4, 4), (7, 4), (4, 7), (10, 6)].into_iter().enumerate() {
            let g = random_matrix(p, m, 100 + seed as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let x = unit((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
            let j = jac(g);
            let prof = spectral_profile(&j, &x, None).unwrap();
            for k in 0..=prof.d {
                let b = bound_rank_k(&prof, k).unwrap();
                let e = empirical_invloss(&j, &x, k).unwrap();
                assert!((b - e).abs() < 1e-9, "p={p} m={m} k={k}: {b} vs {e}");
            }
            assert!(bound_rank_k(&prof, prof.d + 1).is_err());
        }
    }

    #[test]
    fn rank_beyond_effective_rank_is_capped() {
        let g = Matrix::from_diag(&[2.0, 1.0, 0.0]);
        let x = unit(vec![1.0, 1.0, 1.0]);
        let prof = spectral_profile(&jac(g), &x, None).unwrap();
        assert_eq!(prof.rank, 2);
        assert_eq!(bound_rank_k(&prof, 3).unwrap(), bound_rank_k(&prof, 2).unwrap());
        assert!((bound_rank_k(&prof, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dnp_bound_cases() {
        let g = random_matrix(5, 5, 9);
        let s = svd(&g).unwrap();
        let x = unit(vec![0.3, -0.1, 0.5, 0.2, 0.9]);
        let zero = spectral_profile(&jac(g.clone()), &x, Some(&[0.0; 5])).unwrap();
        for k in 0..=5 {
            assert_eq!(bound_dnp(&zero, k).unwrap(), bound_rank_k(&zero, k).unwrap());
        }
        let c = 0.6;
        let eps: Vec<f64> = s.vt.row(0).iter().map(|v| v * c).collect();
        let prof = spectral_profile(&jac(g.clone()), &x, Some(&eps)).unwrap();
        for k in 1..=5 {
            let added = bound_dnp(&prof, k).unwrap() - bound_rank_k(&prof, k).unwrap();
            assert!((added - c * c / 5.0).abs() < 1e-12);
        }
        let bigger: Vec<f64> = eps.iter().map(|v| 2.0 * v).collect();
        let prof2 = spectral_profile(&jac(g), &x, Some(&bigger)).unwrap();
        assert!(bound_dnp(&prof2, 2).unwrap() > bound_dnp(&prof, 2).unwrap());
        assert!(bound_dnp(&spectral_profile(&jac(Matrix::identity(2)), &[1.0, 0.0], None).unwrap(), 1).is_err());
    }

    #[test]
    fn gnp_bound_cases() {
        let g = random_matrix(6, 4, 12);
        let s = svd(&g).unwrap();
        let x = unit(vec![0.1, 0.7, -0.2, 0.4]);
        let zero = spectral_profile(&jac(g.clone()), &x, Some(&[0.0; 6])).unwrap();
        assert_eq!(bound_gnp(&zero, 3).unwrap(), bound_rank_k(&zero, 3).unwrap());

        let c = 0.8;
        let eps: Vec<f64> = s.u.col(0).iter().map(|v| v * c).collect();
        let prof = spectral_profile(&jac(g.clone()), &x, Some(&eps)).unwrap();
        let added = bound_gnp(&prof, 2).unwrap() - bound_rank_k(&prof, 2).unwrap();
        let expected = c * c / (s.sigma[0].powi(2) * 6.0);
        assert!((added - expected).abs() < 1e-12);

        let doubled = spectral_profile(&jac(g.scale(2.0)), &x, Some(&eps)).unwrap();
        let added2 = bound_gnp(&doubled, 2).unwrap() - bound_rank_k(&doubled, 2).unwrap();
        assert!((added2 - expected / 4.0).abs() < 1e-12);

        let deficient = spectral_profile(&jac(Matrix::from_diag(&[1.0, 0.0])), &[1.0, 0.0], Some(&[1.0, 1.0])).unwrap();
        assert!(bound_gnp(&deficient, 1).is_ok());
        assert!(matches!(bound_gnp(&deficient, 2), Err(Error::Numeric(_))));
    }

    #[test]
    fn gnp_noise_outside_top_k_adds_nothing() {
        let g = random_matrix(7, 5, 13);
        let s = svd(&g).unwrap();
        let x = unit(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let k = 2;
        let eps: Vec<f64> = (0..7).map(|i| 0.9 * s.u[(i, 3)] - 0.4 * s.u[(i, 4)]).collect();
        let prof = spectral_profile(&jac(g), &x, Some(&eps)).unwrap();
        assert!((bound_gnp(&prof, k).unwrap() - bound_rank_k(&prof, k).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn noise_length_must_match_a_space() {
        let err = spectral_profile(&jac(random_matrix(3, 4, 1)), &[0.5; 4], Some(&[0.0; 5]));
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn ic_lower_bound_cases() {
        let g = random_matrix(4, 4, 2);
        let x = unit(vec![0.4, 0.1, -0.6, 0.2]);
        let prof = spectral_profile(&jac(g), &x, None).unwrap();
        assert_eq!(ic_lower_bound(&prof, 0).unwrap(), 0.0);
        assert!((ic_lower_bound(&prof, 4).unwrap() - 1.0).abs() < 1e-12);
        assert!(ic_lower_bound(&prof, 5).is_err());
    }

    #[test]
    fn ic_lower_bound_holds_when_weakest_rows_are_dropped() {
        // G = Σ Vᵀ: row i is σ_i V_iᵀ, so dropping the last q rows removes
        // exactly the q weakest directions.
        let base = svd(&random_matrix(5, 5, 6)).unwrap();
        let sig = Matrix::from_diag(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        let g = sig.matmul(&base.vt).unwrap();
        let x = unit(vec![0.2, -0.7, 0.4, 0.1, 0.5]);
        let prof = spectral_profile(&jac(g.clone()), &x, None).unwrap();
        for q in 0..=5 {
            let mut dropped = g.clone();
            for r in 5 - q..5 {
                dropped.row_mut(r).fill(0.0);
            }
            let rank = 5 - q;
            let err = empirical_invloss(&jac(dropped), &x, rank).unwrap();
            let lb = ic_lower_bound(&prof, q).unwrap();
            assert!(err >= lb - 1e-12, "q={q}: {err} < {lb}");
        }
    }

    #[test]
    fn ic_lower_bound_is_not_universal() {
        // Dropping the strongest row of diag(3,2,1) leaves e3 fully visible.
        let g = Matrix::from_diag(&[3.0, 2.0, 1.0]);
        let x = vec![0.0, 0.0, 1.0];
        let prof = spectral_profile(&jac(g), &x, None).unwrap();
        let dropped = Matrix::from_diag(&[0.0, 2.0, 1.0]);
        let err = empirical_invloss(&jac(dropped), &x, 2).unwrap();
        assert!(err < 1e-15);
        assert_eq!(ic_lower_bound(&prof, 1).unwrap(), 1.0);
    }

    #[test]
    fn feasibility_weight_examples() {
        assert_eq!(feasibility_weights(&[3.0]).unwrap(), vec![1.0]);
        let w = feasibility_weights(&[2.0, 1.0]).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-15 && (w[1] - 0.4).abs() < 1e-15);
        let w = feasibility_weights(&[100.0, 3.0, 2.9, 2.8]).unwrap();
        assert!(w[0] > w[1] && w[0] > w[2] && w[0] > w[3]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // a tie right after σ_1 makes every deeper attacker nearly infeasible
        let tied = feasibility_weights(&[2.0, 1.0, 1.0]).unwrap();
        assert!(tied[1] < 1e-9 && tied[2] < 1e-9);
        assert!((tied[0] - 1.0).abs() < 1e-9);
        assert!(feasibility_weights(&[0.0, 0.0]).is_err());
        assert!(feasibility_weights(&[]).is_err());
    }

    #[test]
    fn ranks_past_the_effective_rank_get_no_weight() {
        let w = feasibility_weights(&[2.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(&w[2..], &[0.0, 0.0]);
        assert_eq!(&w[..2], feasibility_weights(&[2.0, 1.0]).unwrap().as_slice());
    }

    #[test]
    fn invre_midpoint_bands_and_calibration() {
        let g = random_matrix(6, 6, 21);
        let x = unit(vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]);
        let prof = spectral_profile(&jac(g), &x, None).unwrap();
        let cal = calibrate_alpha(std::slice::from_ref(&prof)).unwrap();
        assert_eq!(cal.beta, 5.0);
        let r = invre(&prof, &cal).unwrap();
        assert_eq!(r.invre, 0.5);
        assert_eq!(r.band, RiskBand::High);
        assert_eq!(r.tau.len(), 7);
        assert!(r.tau.windows(2).all(|w| w[0] >= w[1]));
        assert!((r.p_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let dup = calibrate_alpha(&[prof.clone(), prof.clone(), prof.clone()]).unwrap();
        assert!((dup.alpha - cal.alpha).abs() < 1e-15);
        assert!(calibrate_alpha(&[]).is_err());

        let bands = RiskBands::default();
        assert_eq!(bands.classify(0.1), RiskBand::Minimal);
        assert_eq!(bands.classify(0.3), RiskBand::Moderate);
        assert_eq!(bands.classify(0.46), RiskBand::High);
        assert!(sigmoid_score(0.9, &cal) < sigmoid_score(0.1, &cal));
    }

    #[test]
    fn mixed_batch_alpha_is_the_mean() {
        let profiles: Vec<_> = (0..4)
            .map(|s| {
                let x = unit((0..5).map(|i| ((i + s) as f64).cos()).collect());
                spectral_profile(&jac(random_matrix(5, 5, 30 + s as u64)), &x, None).unwrap()
            })
            .collect();
        let cal = calibrate_alpha(&profiles).unwrap();
        let mut manual = 0.0;
        for p in &profiles {
            let w = feasibility_weights(&p.sigma).unwrap();
            manual += (1..=p.d).map(|k| w[k - 1] * bound_rank_k(p, k).unwrap()).sum::<f64>();
        }
        assert!((cal.alpha - manual / 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_jacobian_scores_full_energy() {
        let prof = spectral_profile(&jac(Matrix::zeros(3, 3)), &[0.6, 0.8, 0.0], None).unwrap();
        let r = invre(&prof, &Calibration::new(0.5, 5.0).unwrap()).unwrap();
        assert!((r.weighted_bound - 1.0).abs() < 1e-15);
    }
}
