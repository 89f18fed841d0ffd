//! Reconstruction quality and correlation statistics.

use serde::{Deserialize, Serialize, Serializer};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Largest PSNR written to reports; an exact match has infinite PSNR.
pub const PSNR_REPORT_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty input".into()));
    }
    Ok(())
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `+∞` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, max_val: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_val * max_val / mse).log10()
    }
}

pub fn psnr(a: &[f64], b: &[f64], max_val: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, max_val))
}

pub fn capped_psnr(psnr: f64) -> f64 {
    psnr.min(PSNR_REPORT_CAP)
}

/// Side of a square image with `len` pixels.
pub fn image_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side == 0 || side * side != len {
        return Err(Error::Shape(format!("{len} pixels is not a square image")));
    }
    Ok(side)
}

/// Mean SSIM over non-overlapping `window × window` tiles with dynamic
/// range 1. Edge tiles are clipped when the side is not a multiple of the
/// window; images smaller than the window form a single tile.
pub fn ssim(a: &[f64], b: &[f64]) -> Result<f64> {
    ssim_with(a, b, SSIM_WINDOW, SSIM_K1, SSIM_K2)
}

pub fn ssim_with(a: &[f64], b: &[f64], window: usize, k1: f64, k2: f64) -> Result<f64> {
    check_lengths(a, b)?;
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let side = image_side(a.len())?;
    let w = window.min(side);
    let c1 = k1 * k1;
    let c2 = k2 * k2;
    let mut total = 0.0;
    let mut tiles = 0usize;
    for r0 in (0..side).step_by(w) {
        for c0 in (0..side).step_by(w) {
            let idx: Vec<usize> = (r0..(r0 + w).min(side))
                .flat_map(|r| (c0..(c0 + w).min(side)).map(move |c| r * side + c))
                .collect();
            let n = idx.len() as f64;
            let ma = idx.iter().map(|&i| a[i]).sum::<f64>() / n;
            let mb = idx.iter().map(|&i| b[i]).sum::<f64>() / n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for &i in &idx {
                let da = a[i] - ma;
                let db = b[i] - mb;
                va += da * da;
                vb += db * db;
                cov += da * db;
            }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            tiles += 1;
        }
    }
    Ok(total / tiles as f64)
}

fn serialize_capped<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(capped_psnr(*v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub mse: f64,
    /// Serialized with the report cap applied.
    #[serde(serialize_with = "serialize_capped")]
    pub psnr: f64,
    /// Present only when the inputs are square images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
}

impl QualityScore {
    pub fn compute(reconstruction: &[f64], truth: &[f64]) -> Result<Self> {
        let m = mse(reconstruction, truth)?;
        let ssim = match image_side(truth.len()) {
            Ok(_) => Some(ssim(reconstruction, truth)?),
            Err(_) => None,
        };
        Ok(QualityScore { mse: m, psnr: psnr_from_mse(m, 1.0), ssim })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Product-moment correlation only.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs, ys)?;
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric("correlation undefined for a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` under the t distribution with `n − 2` degrees
/// of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    let nu = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return 0.0;
    }
    let t2 = r * r * nu / one_minus;
    beta_reg(nu / 2.0, 0.5, nu / (nu + t2)).clamp(0.0, 1.0)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    check_lengths(xs, ys)?;
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 pairs, got {}", xs.len())));
    }
    let r = pearson_r(xs, ys)?;
    Ok(CorrelationResult { r, p_value: pearson_p_value(r, xs.len()), n: xs.len() })
}
