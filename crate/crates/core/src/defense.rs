//! Baseline defenses and spectrally truncated adaptive noise.
//!
//! Noise in a direction only raises the attacker bound if that direction is
//! one the rank-`k` attacker actually inverts. The adaptive variants draw the
//! same Gaussian noise as the baselines, express it in the Jacobian's
//! singular basis, and keep only the band of coordinates that contributes:
//!
//! * `invl_dnp`: data-space noise, coordinates `[0, k)` along `V`.
//! * `invl_gnp` / `invl_enp`: shared-space noise, coordinates `[j, k)` along
//!   `U`. The leading `j` directions are dropped too because their
//!   contribution is divided by `σ_i²`.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SvdBundle};
use crate::shared_map::Jacobian;

pub const DEFAULT_SPECTRAL_KEEP: f64 = 0.95;
pub const DEFAULT_SPECTRAL_SKIP: f64 = 0.60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseKind {
    Dnp,
    Gnp,
    Enp,
    Prune,
    Dropout,
    InvlDnp,
    InvlGnp,
    InvlEnp,
}

impl DefenseKind {
    pub fn is_noise(self) -> bool {
        !matches!(self, DefenseKind::Prune | DefenseKind::Dropout)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, DefenseKind::InvlDnp | DefenseKind::InvlGnp | DefenseKind::InvlEnp)
    }

    /// Whether the defense perturbs the private input rather than the
    /// shared vector.
    pub fn acts_on_data(self) -> bool {
        matches!(self, DefenseKind::Dnp | DefenseKind::InvlDnp)
    }
}

/// How the skip fraction of `invl_gnp`/`invl_enp` picks `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipRule {
    /// Smallest `j` whose leading singular values hold the fraction of total mass.
    #[default]
    Mass,
    /// `j = ⌈fraction · d⌉`.
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseSpec {
    pub kind: DefenseKind,
    /// Noise variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Fraction of shared entries dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_keep")]
    pub spectral_keep: f64,
    #[serde(default = "default_skip")]
    pub spectral_skip: f64,
    #[serde(default)]
    pub skip_rule: SkipRule,
    #[serde(default)]
    pub seed: u64,
    /// Reuse one class-center Jacobian for `invl_dnp` instead of
    /// recomputing it for every instance.
    #[serde(default)]
    pub reuse_jacobian: bool,
}

fn default_keep() -> f64 {
    DEFAULT_SPECTRAL_KEEP
}
fn default_skip() -> f64 {
    DEFAULT_SPECTRAL_SKIP
}

impl DefenseSpec {
    pub fn noise(kind: DefenseKind, delta: f64, seed: u64) -> Self {
        DefenseSpec {
            kind,
            delta: Some(delta),
            lambda: None,
            spectral_keep: DEFAULT_SPECTRAL_KEEP,
            spectral_skip: DEFAULT_SPECTRAL_SKIP,
            skip_rule: SkipRule::Mass,
            seed,
            reuse_jacobian: false,
        }
    }

    pub fn compression(kind: DefenseKind, lambda: f64, seed: u64) -> Self {
        DefenseSpec { delta: None, lambda: Some(lambda), ..DefenseSpec::noise(kind, 0.0, seed) }
    }

    /// Same defense at a different strength (δ for noise kinds, λ otherwise).
    pub fn with_strength(&self, value: f64) -> Self {
        let mut s = self.clone();
        if self.kind.is_noise() {
            s.delta = Some(value);
        } else {
            s.lambda = Some(value);
        }
        s
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DefenseSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_noise() {
            match self.delta {
                Some(d) if d > 0.0 && d.is_finite() => {}
                other => return Err(Error::Config(format!("{:?} needs a positive delta, got {other:?}", self.kind))),
            }
            if self.lambda.is_some() {
                return Err(Error::Config(format!("{:?} takes no lambda", self.kind)));
            }
        } else {
            match self.lambda {
                Some(l) if (0.0..=1.0).contains(&l) => {}
                other => return Err(Error::Config(format!("{:?} needs lambda in [0, 1], got {other:?}", self.kind))),
            }
            if self.delta.is_some() {
                return Err(Error::Config(format!("{:?} takes no delta", self.kind)));
            }
        }
        let skip_used = matches!(self.kind, DefenseKind::InvlGnp | DefenseKind::InvlEnp);
        let skip_ok = !skip_used || (0.0 <= self.spectral_skip && self.spectral_skip < self.spectral_keep);
        if !(skip_ok && self.spectral_keep > 0.0 && self.spectral_keep <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= spectral_skip < spectral_keep <= 1, got {} and {}",
                self.spectral_skip, self.spectral_keep
            )));
        }
        Ok(())
    }

    fn delta(&self) -> Result<f64> {
        self.delta.ok_or_else(|| Error::Config(format!("{:?} needs delta", self.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveNoise {
    pub eps_hat: Vec<f64>,
    /// The untruncated draw `ε`.
    pub raw: Vec<f64>,
    pub kept: Range<usize>,
    pub energy: f64,
}

/// I.i.d. `N(0, δ)` samples (`δ` is the variance).
pub fn gaussian_noise(dim: usize, delta: f64, seed: u64) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance must be positive, got {delta}")));
    }
    let normal = Normal::new(0.0, delta.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..dim).map(|_| normal.sample(&mut rng)).collect())
}

/// Smallest `k` whose leading singular values hold `keep_fraction` of the
/// total singular-value mass.
pub fn select_k(sigma: &[f64], keep_fraction: f64) -> Result<usize> {
    let total: f64 = sigma.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("all singular values are zero".into()));
    }
    let target = keep_fraction * total;
    let mut acc = 0.0;
    if acc >= target {
        return Ok(0);
    }
    for (i, s) in sigma.iter().enumerate() {
        acc += s;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    Ok(sigma.len())
}

fn select_skip(sigma: &[f64], fraction: f64, rule: SkipRule) -> Result<usize> {
    match rule {
        SkipRule::Mass => select_k(sigma, fraction),
        SkipRule::Count => Ok(((fraction * sigma.len() as f64).ceil() as usize).min(sigma.len())),
    }
}

/// Kept band `[j, k)` for a spec; `k ≥ 1` and `j < k` always.
pub fn spectral_band(sigma: &[f64], spec: &DefenseSpec) -> Result<Range<usize>> {
    let k = select_k(sigma, spec.spectral_keep)?.max(1);
    let j = match spec.kind {
        DefenseKind::InvlGnp | DefenseKind::InvlEnp => select_skip(sigma, spec.spectral_skip, spec.skip_rule)?.min(k - 1),
        _ => 0,
    };
    Ok(j..k)
}

pub fn adaptive_noise_dnp(j: &Jacobian, spec: &DefenseSpec) -> Result<AdaptiveNoise> {
    adaptive_noise_dnp_with(&linalg::svd(&j.g)?, spec)
}

/// Data-space adaptive noise: `ε̂ = V n` with `n = Vᵀε` zeroed past `k`.
pub fn adaptive_noise_dnp_with(s: &SvdBundle, spec: &DefenseSpec) -> Result<AdaptiveNoise> {
    if spec.kind != DefenseKind::InvlDnp {
        return Err(Error::InvalidArgument(format!("{:?} is not invl_dnp", spec.kind)));
    }
    spec.validate()?;
    let band = spectral_band(&s.sigma, spec)?;
    let raw = gaussian_noise(s.m(), spec.delta()?, spec.seed)?;
    let coords = linalg::project(&s.vt, &raw)?;
    let mut eps_hat = vec![0.0; s.m()];
    for i in band.clone() {
        for (e, v) in eps_hat.iter_mut().zip(s.vt.row(i)) {
            *e += coords[i] * v;
        }
    }
    let energy = linalg::norm_sq(&eps_hat);
    Ok(AdaptiveNoise { eps_hat, raw, kept: band, energy })
}

pub fn adaptive_noise_genp(j: &Jacobian, spec: &DefenseSpec) -> Result<AdaptiveNoise> {
    adaptive_noise_genp_with(&linalg::svd(&j.g)?, spec)
}

/// Shared-space adaptive noise: `ε̂ = U n` with `n = Uᵀε` kept on `[j, k)`.
pub fn adaptive_noise_genp_with(s: &SvdBundle, spec: &DefenseSpec) -> Result<AdaptiveNoise> {
    if !matches!(spec.kind, DefenseKind::InvlGnp | DefenseKind::InvlEnp) {
        return Err(Error::InvalidArgument(format!("{:?} is not invl_gnp/invl_enp", spec.kind)));
    }
    spec.validate()?;
    let band = spectral_band(&s.sigma, spec)?;
    let raw = gaussian_noise(s.p(), spec.delta()?, spec.seed)?;
    let coords = s.u.tr_matvec(&raw)?;
    let mut eps_hat = vec![0.0; s.p()];
    for i in band.clone() {
        let c = coords[i];
        for (r, e) in eps_hat.iter_mut().enumerate() {
            *e += c * s.u[(r, i)];
        }
    }
    let energy = linalg::norm_sq(&eps_hat);
    Ok(AdaptiveNoise { eps_hat, raw, kept: band, energy })
}

/// Indices Prune or Dropout zero out.
///
/// Prune takes the `⌊λ·len⌋` smallest magnitudes, ties to the lower index.
/// Dropout takes the first `⌊λ·len⌋` positions of a seeded permutation, so a
/// larger λ with the same seed drops a superset.
pub fn dropped_indices(spec: &DefenseSpec, target: &[f64]) -> Result<Vec<usize>> {
    spec.validate()?;
    let lambda = spec
        .lambda
        .ok_or_else(|| Error::Config(format!("{:?} has no drop ratio", spec.kind)))?;
    let count = (lambda * target.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..target.len()).collect();
    match spec.kind {
        DefenseKind::Prune => order.sort_by(|&a, &b| target[a].abs().total_cmp(&target[b].abs()).then(a.cmp(&b))),
        DefenseKind::Dropout => order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed)),
        other => return Err(Error::InvalidArgument(format!("{other:?} does not drop entries"))),
    }
    order.truncate(count);
    Ok(order)
}

/// Applies a defense to `target` (the private input for data-level kinds,
/// the shared gradient/embedding otherwise). Adaptive kinds need the
/// Jacobian whose spectrum shapes the noise.
pub fn apply_defense(spec: &DefenseSpec, target: &[f64], j: Option<&Jacobian>) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec.kind {
        DefenseKind::Dnp | DefenseKind::Gnp | DefenseKind::Enp => {
            let eps = gaussian_noise(target.len(), spec.delta()?, spec.seed)?;
            Ok(target.iter().zip(&eps).map(|(a, b)| a + b).collect())
        }
        DefenseKind::Prune | DefenseKind::Dropout => {
            let mut out = target.to_vec();
            for i in dropped_indices(spec, target)? {
                out[i] = 0.0;
            }
            Ok(out)
        }
        DefenseKind::InvlDnp | DefenseKind::InvlGnp | DefenseKind::InvlEnp => {
            let j = j.ok_or_else(|| Error::InvalidArgument(format!("{:?} needs a Jacobian", spec.kind)))?;
            let (noise, expected) = if spec.kind == DefenseKind::InvlDnp {
                (adaptive_noise_dnp(j, spec)?, j.m())
            } else {
                (adaptive_noise_genp(j, spec)?, j.p())
            };
            if target.len() != expected {
                return Err(Error::Shape(format!(
                    "{:?} target has {} entries, Jacobian implies {expected}",
                    spec.kind,
                    target.len()
                )));
            }
            Ok(target.iter().zip(&noise.eps_hat).map(|(a, b)| a + b).collect())
        }
    }
}
