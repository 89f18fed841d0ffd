//! Run records and their JSON / CSV views.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Scoring};
use crate::metrics::{self, CorrelationResult, QualityScore};
use crate::risk::{Calibration, RiskBand};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SWEEP_CSV_HEADER: &str = "defense_param,mean_invre,mean_mse,mean_psnr,mean_ssim,utility_proxy";
/// Fewest paired samples `correlate` accepts.
pub const MIN_CORRELATION_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    /// `τ_0 = ‖x‖²` of the normalized input (1 unless noise terms apply).
    pub tau_0: f64,
    /// Full-rank residual `τ_d`.
    pub tau_d: f64,
    pub mean: f64,
    pub rank: usize,
}

impl TauSummary {
    pub fn from_tau(tau: &[f64], rank: usize) -> Self {
        TauSummary {
            tau_0: tau.first().copied().unwrap_or(0.0),
            tau_d: tau.last().copied().unwrap_or(0.0),
            mean: metrics::mean(tau),
            rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    /// MSE after each tier budget, in tier order.
    pub tier_mse: Vec<f64>,
    pub expected_mse: f64,
    /// Quality of the strongest tier's reconstruction.
    pub quality: QualityScore,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    /// `seed ^ index`; every random stream of the instance derives from it.
    pub seed: u64,
    pub label: usize,
    pub invre: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<RiskBand>,
    pub weighted_bound: f64,
    pub tau: TauSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub invre_vs_expected_mse: CorrelationResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invre_vs_ssim: Option<CorrelationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean_invre: f64,
    pub mean_expected_mse: Option<f64>,
    pub mean_mse: Option<f64>,
    /// Mean of report-capped PSNR values.
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationSet>,
    pub utility_proxy: Option<f64>,
}

impl Aggregate {
    pub fn from_instances(instances: &[InstanceRecord], utility_proxy: Option<f64>) -> Self {
        let invre: Vec<f64> = instances.iter().map(|r| r.invre).collect();
        let attacks: Vec<&AttackRecord> = instances.iter().filter_map(|r| r.attack.as_ref()).collect();
        let over = |f: &dyn Fn(&AttackRecord) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = attacks.iter().map(|a| f(a)).collect();
            v.filter(|v| !v.is_empty()).map(|v| metrics::mean(&v))
        };
        Aggregate {
            n: instances.len(),
            mean_invre: metrics::mean(&invre),
            mean_expected_mse: over(&|a| Some(a.expected_mse)),
            mean_mse: over(&|a| Some(a.quality.mse)),
            mean_psnr: over(&|a| Some(metrics::capped_psnr(a.quality.psnr))),
            mean_ssim: over(&|a| a.quality.ssim),
            correlation: None,
            utility_proxy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub defense_param: f64,
    pub aggregate: Aggregate,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub toolkit_version: String,
    pub command: String,
    pub config_fingerprint: String,
    /// Seconds since the Unix epoch; the only field allowed to differ
    /// between identical runs.
    pub timestamp: u64,
    pub seed: u64,
    pub scoring: Scoring,
    pub calibration: Option<Calibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defense: Option<DefenseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_proxy_kind: Option<String>,
    pub instances: Vec<InstanceRecord>,
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
}

impl RunRecord {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        RunRecord {
            schema: SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            command: command.to_string(),
            config_fingerprint: cfg.fingerprint(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            seed: cfg.seed,
            scoring: cfg.scoring,
            calibration: None,
            tier_weights: None,
            defense: cfg.defense.clone(),
            utility_proxy_kind: None,
            instances: Vec::new(),
            aggregate: Aggregate::from_instances(&[], None),
            sweep: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: RunRecord = serde_json::from_str(text)?;
        if rec.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported record schema {}", rec.schema)));
        }
        Ok(rec)
    }

    /// Sweep table, one row per grid point.
    pub fn sweep_csv(&self) -> Option<String> {
        self.sweep.as_ref().map(|rows| sweep_csv(rows))
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            cell(Some(r.defense_param)),
            cell(Some(a.mean_invre)),
            cell(a.mean_mse),
            cell(a.mean_psnr),
            cell(a.mean_ssim),
            cell(a.utility_proxy)
        );
    }
    out
}

/// Parses a sweep table back into `(param, invre, mse, psnr, ssim, utility)`.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<[Option<f64>; 6]>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_CSV_HEADER) {
        return Err(Error::Config("sweep CSV header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 6 {
                return Err(Error::Config(format!("sweep CSV row has {} cells", cells.len())));
            }
            let mut row = [None; 6];
            for (slot, c) in row.iter_mut().zip(cells) {
                if !c.is_empty() {
                    *slot = Some(c.parse::<f64>().map_err(|e| Error::Config(format!("sweep CSV cell {c:?}: {e}")))?);
                }
            }
            Ok(row)
        })
        .collect()
}

/// `pearson(invre, expected_mse)`, plus `pearson(invre, ssim)` for images.
pub fn correlate(instances: &[InstanceRecord]) -> Result<CorrelationSet> {
    let paired: Vec<(&InstanceRecord, &AttackRecord)> =
        instances.iter().filter_map(|r| r.attack.as_ref().map(|a| (r, a))).collect();
    if paired.len() < MIN_CORRELATION_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least {MIN_CORRELATION_SAMPLES} attacked instances, got {}",
            paired.len()
        )));
    }
    let invre: Vec<f64> = paired.iter().map(|(r, _)| r.invre).collect();
    let emse: Vec<f64> = paired.iter().map(|(_, a)| a.expected_mse).collect();
    let ssim: Option<Vec<f64>> = paired.iter().map(|(_, a)| a.quality.ssim).collect();
    Ok(CorrelationSet {
        invre_vs_expected_mse: metrics::pearson(&invre, &emse)?,
        invre_vs_ssim: match ssim {
            Some(s) => Some(metrics::pearson(&invre, &s)?),
            None => None,
        },
    })
}

/// Record JSON with the timestamp zeroed, for byte comparisons.
pub fn without_timestamp(record: &RunRecord) -> Result<String> {
    let mut r = record.clone();
    r.timestamp = 0;
    r.to_json()
}
