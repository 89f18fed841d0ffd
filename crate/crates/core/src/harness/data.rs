//! Synthetic datasets standing in for natural images.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub x: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Unit-norm standard Gaussian draws; label is the sign of the first entry.
    Gaussian,
    /// `√m × √m` images in `[0, 1]` mixing a smooth and a textured field;
    /// label 0 carries a horizontal ramp, label 1 a vertical one.
    Grid,
}

/// Range of the texture share `w` in a grid image; 0 is fully smooth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for TextureRange {
    fn default() -> Self {
        TextureRange { lo: 0.0, hi: 1.0 }
    }
}

impl TextureRange {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lo && self.lo <= self.hi && self.hi <= 1.0) {
            return Err(Error::Config(format!("texture range must satisfy 0 <= lo <= hi <= 1, got [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// `n` instances of dimension `m`; instance `i` is drawn from a stream
/// seeded with `seed ^ i`, so any prefix is independent of `n`.
pub fn generate_synthetic(kind: SyntheticKind, n: usize, m: usize, seed: u64) -> Result<Vec<Instance>> {
    generate_with_texture(kind, n, m, seed, TextureRange::default())
}

pub fn generate_with_texture(
    kind: SyntheticKind,
    n: usize,
    m: usize,
    seed: u64,
    texture: TextureRange,
) -> Result<Vec<Instance>> {
    if m < 2 {
        return Err(Error::Config(format!("instance dimension must be at least 2, got {m}")));
    }
    texture.validate()?;
    let side = match kind {
        SyntheticKind::Grid => Some(
            crate::attack::square_side(m).ok_or_else(|| Error::Config(format!("grid data needs a square dimension, got {m}")))?,
        ),
        SyntheticKind::Gaussian => None,
    };
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            match side {
                None => gaussian_instance(&mut rng, m),
                Some(s) => {
                    let w = rng.random_range(texture.lo..=texture.hi);
                    Ok(grid_instance(&mut rng, s, i % 2, w))
                }
            }
        })
        .collect()
}

fn gaussian_instance(rng: &mut ChaCha8Rng, m: usize) -> Result<Instance> {
    let mut x: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let n = linalg::norm(&x);
    if n == 0.0 {
        return Err(Error::Numeric("zero Gaussian draw".into()));
    }
    x.iter_mut().for_each(|v| *v /= n);
    let label = usize::from(x[0] > 0.0);
    Ok(Instance { x, label })
}

/// Sum of a few cosine modes with frequencies drawn from `freqs`,
/// scaled to unit max-abs.
fn cosine_field(rng: &mut ChaCha8Rng, side: usize, freqs: (f64, f64), modes: usize) -> Vec<f64> {
    let mut f = vec![0.0; side * side];
    for _ in 0..modes {
        let fx = rng.random_range(freqs.0..=freqs.1);
        let fy = rng.random_range(freqs.0..=freqs.1);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = rng.random_range(0.5..1.0);
        for r in 0..side {
            for c in 0..side {
                let u = (c as f64 + 0.5) / side as f64;
                let v = (r as f64 + 0.5) / side as f64;
                f[r * side + c] += amp * (PI * (fx * u + fy * v) + phase).cos();
            }
        }
    }
    let peak = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        f.iter_mut().for_each(|v| *v /= peak);
    }
    f
}

fn grid_instance(rng: &mut ChaCha8Rng, side: usize, label: usize, w: f64) -> Instance {
    let smooth = cosine_field(rng, side, (0.0, 1.5), 2);
    let texture = cosine_field(rng, side, (side as f64 * 0.4, side as f64 * 0.9), 4);
    let mut x = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            let t = if label == 0 { c } else { r } as f64 / (side - 1).max(1) as f64;
            let base = 0.5 + 0.3 * (t - 0.5) + 0.3 * (1.0 - w) * smooth[i] + 0.3 * w * texture[i];
            x[i] = base.clamp(0.0, 1.0);
        }
    }
    Instance { x, label }
}

/// Per-label means of the instances, ordered by label.
pub fn class_centers(instances: &[Instance]) -> Vec<Vec<f64>> {
    let labels = instances.iter().map(|i| i.label).max().map_or(0, |l| l + 1);
    let mut centers = Vec::new();
    for l in 0..labels {
        let members: Vec<&Instance> = instances.iter().filter(|i| i.label == l).collect();
        if members.is_empty() {
            continue;
        }
        let mut c = vec![0.0; members[0].x.len()];
        for inst in &members {
            for (a, b) in c.iter_mut().zip(&inst.x) {
                *a += b;
            }
        }
        c.iter_mut().for_each(|v| *v /= members.len() as f64);
        centers.push(c);
    }
    centers
}
