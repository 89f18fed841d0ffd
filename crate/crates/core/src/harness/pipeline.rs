//! Score → attack → defend → evaluate.
//!
//! Risk is scored on the unit-normalized input `x / ‖x‖` so every `τ_k` lies
//! in `[0, 1]`; Jacobians, attacks and quality metrics use the raw input.
//! Defense noise is drawn in raw units and rescaled by `1 / ‖x‖` before it
//! enters a bound.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackConfig};
use crate::defense::{self, DefenseKind, DefenseSpec};
use crate::error::{Error, Result};
use crate::harness::config::{label_target, DatasetConfig, ExperimentConfig, ModeKind, Scoring};
use crate::harness::data::{self, Instance};
use crate::harness::report::{self, Aggregate, AttackRecord, InstanceRecord, RunRecord, SweepRow, TauSummary};
use crate::io;
use crate::linalg::{self, Matrix, SvdBundle};
use crate::metrics::{self, QualityScore};
use crate::risk::{self, BoundKind, Calibration, RiskBands, SpectralProfile};
use crate::shared_map::{self, Jacobian, SharedMapSpec};

pub const THREADS_ENV: &str = "INVRISK_THREADS";
const RIDGE_LAMBDA: f64 = 1.0;
const TRAIN_SHARE: f64 = 0.7;

/// A configured map with its dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: SharedMapSpec,
    pub instances: Vec<Instance>,
    /// Instances are images in `[0, 1]`; reconstructions are clipped to
    /// that range before quality metrics.
    pub unit_image: bool,
}

impl Prepared {
    pub fn instance_spec(&self, inst: &Instance) -> Result<SharedMapSpec> {
        match &self.spec.mode {
            shared_map::MapMode::HflGradient { loss, .. } => {
                self.spec.with_label(label_target(*loss, inst.label, self.spec.network.output_dim()))
            }
            shared_map::MapMode::VflEmbedding { .. } => Ok(self.spec.clone()),
        }
    }
}

pub fn load_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    match &cfg.dataset {
        DatasetConfig::SyntheticGaussian { m } => {
            data::generate_synthetic(data::SyntheticKind::Gaussian, cfg.n_instances, *m, cfg.seed)
        }
        DatasetConfig::SyntheticGrid { m, texture } => {
            data::generate_with_texture(data::SyntheticKind::Grid, cfg.n_instances, *m, cfg.seed, *texture)
        }
        DatasetConfig::TensorFile { path, labels } => {
            let t = io::read_tensor(path)?;
            let rows = t.rows();
            if rows.len() < cfg.n_instances {
                return Err(Error::Config(format!(
                    "{} holds {} instances, {} requested",
                    path.display(),
                    rows.len(),
                    cfg.n_instances
                )));
            }
            let labels = match labels {
                Some(p) => {
                    let l = io::read_tensor(p)?;
                    if l.data().len() < cfg.n_instances {
                        return Err(Error::Config(format!("{} has too few labels", p.display())));
                    }
                    l.data()
                        .iter()
                        .map(|&v| {
                            if v >= 0.0 && v.fract() == 0.0 {
                                Ok(v as usize)
                            } else {
                                Err(Error::Config(format!("label {v} is not a class index")))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?
                }
                None => vec![0; rows.len()],
            };
            Ok(rows
                .into_iter()
                .zip(labels)
                .take(cfg.n_instances)
                .map(|(x, label)| Instance { x, label })
                .collect())
        }
    }
}

/// Builds the map, loads the data and, if asked, trains the network on it.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mut spec = cfg.map.build()?;
    let instances = load_instances(cfg)?;
    for inst in &instances {
        spec.network.check_input(inst.x.len())?;
    }
    if cfg.map.train_epochs > 0 {
        let outputs = spec.network.output_dim();
        let pairs: Vec<_> = instances
            .iter()
            .map(|i| (i.x.clone(), label_target(cfg.map.loss, i.label, outputs)))
            .collect();
        shared_map::light_training(&mut spec.network, &pairs, cfg.map.loss, cfg.map.learning_rate, cfg.map.train_epochs)?;
        if cfg.map.mode == ModeKind::HflGradient {
            spec.mode = shared_map::MapMode::HflGradient { loss: cfg.map.loss, label: label_target(cfg.map.loss, 0, outputs) };
        }
    }
    Ok(Prepared { spec, instances, unit_image: cfg.dataset.is_unit_image() })
}

/// Runs `f` on a pool sized by `INVRISK_THREADS` (unset or 0 = all cores).
pub fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn normalized(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = linalg::norm(x);
    if n == 0.0 {
        return Err(Error::Numeric("cannot normalize a zero input".into()));
    }
    Ok((x.iter().map(|v| v / n).collect(), 1.0 / n))
}

/// Per-instance state of the undefended round.
#[derive(Debug, Clone)]
pub struct CleanState {
    pub spec: SharedMapSpec,
    pub jacobian: Jacobian,
    pub svd: SvdBundle,
    pub profile: SpectralProfile,
    pub shared: Vec<f64>,
    pub x_unit: Vec<f64>,
    pub scale: f64,
}

pub fn clean_state(prep: &Prepared, inst: &Instance) -> Result<CleanState> {
    let spec = prep.instance_spec(inst)?;
    let jacobian = spec.jacobian(&inst.x)?;
    let svd = linalg::svd(&jacobian.g)?;
    let (x_unit, scale) = normalized(&inst.x)?;
    let profile = SpectralProfile::from_svd(&svd, &x_unit, None)?;
    let shared = spec.forward(&inst.x)?;
    Ok(CleanState { spec, jacobian, svd, profile, shared, x_unit, scale })
}

pub fn clean_states(prep: &Prepared) -> Result<Vec<CleanState>> {
    prep.instances.par_iter().map(|i| clean_state(prep, i)).collect()
}

/// Loaded calibration, or the batch mean of the clean weighted bounds.
pub fn calibration_for(cfg: &ExperimentConfig, states: &[CleanState]) -> Result<Calibration> {
    if let Some(c) = cfg.load_calibration()? {
        return Ok(c);
    }
    let profiles: Vec<SpectralProfile> = states.iter().map(|s| s.profile.clone()).collect();
    let alpha = risk::calibrate_alpha(&profiles)?.alpha;
    Calibration::new(alpha, cfg.beta)
}

/// What a defended round exposes.
#[derive(Debug, Clone)]
pub struct DefendedRound {
    pub profile: SpectralProfile,
    pub bound: BoundKind,
    /// Vector the attacker observes.
    pub shared: Vec<f64>,
    /// Input the client actually used (differs from `x` for data-space noise).
    pub input: Vec<f64>,
}

/// Mean of the Jacobians at each class center, each evaluated with its
/// own label.
pub fn center_jacobian(prep: &Prepared) -> Result<Jacobian> {
    let mut labels: Vec<usize> = prep.instances.iter().map(|i| i.label).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut acc: Option<Jacobian> = None;
    for &label in &labels {
        let members: Vec<Instance> = prep.instances.iter().filter(|i| i.label == label).cloned().collect();
        let center = data::class_centers(&members).pop().expect("nonempty class");
        let spec = prep.instance_spec(&Instance { x: center.clone(), label })?;
        let j = shared_map::class_center_jacobian(&spec, &[center])?;
        acc = Some(match acc {
            None => j,
            Some(mut a) => {
                a.g = Matrix::from_vec(
                    a.g.rows(),
                    a.g.cols(),
                    a.g.as_slice().iter().zip(j.g.as_slice()).map(|(x, y)| x + y).collect(),
                )?;
                a.fingerprint = a.fingerprint.rotate_left(5) ^ j.fingerprint;
                a
            }
        });
    }
    let mut j = acc.ok_or_else(|| Error::InvalidArgument("no instances".into()))?;
    j.g = j.g.scale(1.0 / labels.len() as f64);
    Ok(j)
}

/// Applies one defense to one instance. `center` is the SVD of the
/// class-center Jacobian, used by `invl_gnp` and by `invl_dnp` with
/// `reuse_jacobian`.
///
/// Bounds use the clean Jacobian at `x`; under data-space noise the
/// attacker still observes `F(x + ε)`.
pub fn defend_round(
    state: &CleanState,
    inst: &Instance,
    spec: &DefenseSpec,
    center: Option<&SvdBundle>,
) -> Result<DefendedRound> {
    let scaled = |v: &[f64]| v.iter().map(|e| e * state.scale).collect::<Vec<f64>>();
    let center = || center.ok_or_else(|| Error::InvalidArgument(format!("{:?} needs a class-center Jacobian", spec.kind)));
    match spec.kind {
        DefenseKind::Dnp | DefenseKind::InvlDnp => {
            let eps = if spec.kind == DefenseKind::Dnp {
                defense::gaussian_noise(inst.x.len(), spec.delta.unwrap_or(0.0), spec.seed)?
            } else if spec.reuse_jacobian {
                defense::adaptive_noise_dnp_with(center()?, spec)?.eps_hat
            } else {
                defense::adaptive_noise_dnp_with(&state.svd, spec)?.eps_hat
            };
            let input: Vec<f64> = inst.x.iter().zip(&eps).map(|(a, b)| a + b).collect();
            let profile = SpectralProfile::from_svd(&state.svd, &state.x_unit, Some(&scaled(&eps)))?;
            Ok(DefendedRound { profile, bound: BoundKind::Dnp, shared: state.spec.forward(&input)?, input })
        }
        DefenseKind::Gnp | DefenseKind::Enp | DefenseKind::InvlGnp | DefenseKind::InvlEnp => {
            let eps = match spec.kind {
                DefenseKind::Gnp | DefenseKind::Enp => {
                    defense::gaussian_noise(state.shared.len(), spec.delta.unwrap_or(0.0), spec.seed)?
                }
                DefenseKind::InvlGnp => defense::adaptive_noise_genp_with(center()?, spec)?.eps_hat,
                _ => defense::adaptive_noise_genp_with(&state.svd, spec)?.eps_hat,
            };
            let profile = SpectralProfile::from_svd(&state.svd, &state.x_unit, Some(&scaled(&eps)))?;
            let shared = state.shared.iter().zip(&eps).map(|(a, b)| a + b).collect();
            Ok(DefendedRound { profile, bound: BoundKind::Gnp, shared, input: inst.x.clone() })
        }
        DefenseKind::Prune | DefenseKind::Dropout => {
            let dropped = defense::dropped_indices(spec, &state.shared)?;
            let mut shared = state.shared.clone();
            let mut g = state.jacobian.g.clone();
            for &r in &dropped {
                shared[r] = 0.0;
                g.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
            }
            let profile = SpectralProfile::from_svd(&linalg::svd(&g)?, &state.x_unit, None)?;
            Ok(DefendedRound { profile, bound: BoundKind::Plain, shared, input: inst.x.clone() })
        }
    }
}

fn score(cfg: &ExperimentConfig, cal: &Calibration, profile: &SpectralProfile, bound: BoundKind) -> Result<(f64, f64, Vec<f64>, Option<risk::RiskBand>)> {
    let (tau, _, wb) = risk::weighted_bound(profile, bound)?;
    Ok(match cfg.scoring {
        Scoring::Sigmoid => {
            let s = risk::sigmoid_score(wb, cal);
            (s, wb, tau, Some(RiskBands::default().classify(s)))
        }
        Scoring::InverseBound => (risk::inverse_bound_score(wb), wb, tau, None),
    })
}

/// Tiered matching attack on `shared`, measured against the true input.
pub fn attack_instance(
    spec: &SharedMapSpec,
    shared: &[f64],
    truth: &[f64],
    cfg: &AttackConfig,
    unit_image: bool,
) -> Result<AttackRecord> {
    let tiered = attack::tiered_attack(spec, shared, cfg)?;
    let clip = |x: &[f64]| -> Vec<f64> {
        if unit_image {
            x.iter().map(|v| v.clamp(0.0, 1.0)).collect()
        } else {
            x.to_vec()
        }
    };
    let tier_mse = tiered
        .x_hat_by_tier
        .iter()
        .map(|x| metrics::mse(&clip(x), truth))
        .collect::<Result<Vec<f64>>>()?;
    let expected_mse = attack::expected_mse(&tier_mse, &tiered.tiers)?;
    let strongest = tiered
        .tiers
        .iter()
        .enumerate()
        .max_by_key(|(_, t)| **t)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let quality = QualityScore::compute(&clip(&tiered.x_hat_by_tier[strongest]), truth)?;
    Ok(AttackRecord { tier_mse, expected_mse, quality, final_objective: tiered.result.final_objective })
}

fn instance_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Defended input or shared-vector distortion, for the utility proxy.
enum UtilityPiece {
    Input(Vec<f64>),
    Distortion(f64),
}

struct Evaluation {
    record: InstanceRecord,
    utility: UtilityPiece,
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    cal: &Calibration,
    index: usize,
    state: &CleanState,
    defense_spec: Option<&DefenseSpec>,
    center: Option<&SvdBundle>,
) -> Result<Evaluation> {
    let inst = &prep.instances[index];
    let seed = instance_seed(cfg.seed, index);
    let (profile, bound, shared, input) = match defense_spec {
        None => (state.profile.clone(), BoundKind::Plain, state.shared.clone(), inst.x.clone()),
        Some(d) => {
            let d = d.with_seed(instance_seed(d.seed, index));
            let round = defend_round(state, inst, &d, center)?;
            (round.profile, round.bound, round.shared, round.input)
        }
    };
    let (invre, wb, tau, band) = score(cfg, cal, &profile, bound)?;
    let attack = match &cfg.attack {
        Some(a) => {
            let a = AttackConfig { seed: instance_seed(a.seed, index), ..a.clone() };
            Some(attack_instance(&state.spec, &shared, &inst.x, &a, prep.unit_image)?)
        }
        None => None,
    };
    let data_space = defense_spec.is_some_and(|d| d.kind.acts_on_data());
    let utility = if data_space {
        UtilityPiece::Input(input)
    } else {
        let diff: Vec<f64> = shared.iter().zip(&state.shared).map(|(a, b)| a - b).collect();
        let base = linalg::norm(&state.shared);
        UtilityPiece::Distortion(if base > 0.0 { linalg::norm(&diff) / base } else { linalg::norm(&diff) })
    };
    let record = InstanceRecord {
        index,
        seed,
        label: inst.label,
        invre,
        band,
        weighted_bound: wb,
        tau: TauSummary::from_tau(&tau, profile.rank),
        attack,
    };
    Ok(Evaluation { record, utility })
}

/// Accuracy on clean held-out instances of a ridge classifier trained on
/// the (possibly defended) inputs of a seeded 70 % split. `None` without
/// two classes in the training split or an empty test split.
pub fn ridge_utility(train_inputs: &[Vec<f64>], clean: &[Instance], seed: u64) -> Result<Option<f64>> {
    let n = clean.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * TRAIN_SHARE).round() as usize;
    let (train, test) = order.split_at(n_train.min(n));
    if test.is_empty() {
        return Ok(None);
    }
    let positive = clean.iter().map(|i| i.label).max().unwrap_or(0);
    let mut classes: Vec<usize> = train.iter().map(|&i| clean[i].label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Ok(None);
    }
    let m = clean[0].x.len() + 1;
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for &i in train {
        let mut f = train_inputs[i].clone();
        f.push(1.0);
        let y = if clean[i].label == positive { 1.0 } else { -1.0 };
        for a in 0..m {
            rhs[a] += f[a] * y;
            for b in 0..m {
                gram[a * m + b] += f[a] * f[b];
            }
        }
    }
    for a in 0..m {
        gram[a * m + a] += RIDGE_LAMBDA;
    }
    let w = cholesky_solve(Matrix::from_vec(m, m, gram)?, &rhs)?;
    let correct = test
        .iter()
        .filter(|&&i| {
            let score: f64 = clean[i].x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[m - 1];
            (score > 0.0) == (clean[i].label == positive)
        })
        .count();
    Ok(Some(correct as f64 / test.len() as f64))
}

fn cholesky_solve(a: Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                if d <= 0.0 {
                    return Err(Error::Numeric("ridge system is not positive definite".into()));
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[(i, j)] - s) / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>()) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k * n + i] * x[k]).sum::<f64>()) / l[i * n + i];
    }
    Ok(x)
}

fn utility_proxy(prep: &Prepared, evals: &[Evaluation], seed: u64) -> Result<Option<f64>> {
    match evals.first().map(|e| &e.utility) {
        Some(UtilityPiece::Input(_)) => {
            let inputs: Vec<Vec<f64>> = evals
                .iter()
                .map(|e| match &e.utility {
                    UtilityPiece::Input(x) => x.clone(),
                    UtilityPiece::Distortion(_) => Vec::new(),
                })
                .collect();
            ridge_utility(&inputs, &prep.instances, seed)
        }
        Some(UtilityPiece::Distortion(_)) => {
            let d: Vec<f64> = evals
                .iter()
                .filter_map(|e| match e.utility {
                    UtilityPiece::Distortion(v) => Some(v),
                    UtilityPiece::Input(_) => None,
                })
                .collect();
            Ok(Some(metrics::mean(&d)))
        }
        None => Ok(None),
    }
}

fn utility_kind(defense: Option<&DefenseSpec>) -> String {
    if defense.is_some_and(|d| d.kind.acts_on_data()) {
        "ridge_accuracy_on_clean_holdout".into()
    } else {
        "relative_shared_distortion".into()
    }
}

fn needs_center_jacobian(d: Option<&DefenseSpec>) -> bool {
    d.is_some_and(|d| d.kind == DefenseKind::InvlGnp || (d.kind == DefenseKind::InvlDnp && d.reuse_jacobian))
}

struct Session {
    prep: Prepared,
    states: Vec<CleanState>,
    cal: Calibration,
    center: Option<SvdBundle>,
}

fn session(cfg: &ExperimentConfig, defense_spec: Option<&DefenseSpec>) -> Result<Session> {
    let prep = prepare(cfg)?;
    let states = clean_states(&prep)?;
    let cal = calibration_for(cfg, &states)?;
    let center = if needs_center_jacobian(defense_spec) { Some(linalg::svd(&center_jacobian(&prep)?.g)?) } else { None };
    Ok(Session { prep, states, cal, center })
}

fn evaluate_all(cfg: &ExperimentConfig, s: &Session, defense_spec: Option<&DefenseSpec>) -> Result<Vec<Evaluation>> {
    (0..s.prep.instances.len())
        .into_par_iter()
        .map(|i| evaluate(cfg, &s.prep, &s.cal, i, &s.states[i], defense_spec, s.center.as_ref()))
        .collect()
}

fn finish(
    command: &str,
    cfg: &ExperimentConfig,
    s: &Session,
    evals: Vec<Evaluation>,
    defense_spec: Option<&DefenseSpec>,
) -> Result<RunRecord> {
    let utility = utility_proxy(&s.prep, &evals, cfg.seed)?;
    let instances: Vec<InstanceRecord> = evals.into_iter().map(|e| e.record).collect();
    let mut record = RunRecord::new(command, cfg);
    record.calibration = Some(s.cal);
    record.defense = defense_spec.cloned();
    if let Some(a) = &cfg.attack {
        record.tier_weights = Some(attack::tier_weights(&a.tiers)?);
    }
    let mut agg = Aggregate::from_instances(&instances, utility);
    if cfg.attack.is_some() && instances.len() >= report::MIN_CORRELATION_SAMPLES {
        agg.correlation = Some(report::correlate(&instances)?);
    }
    record.utility_proxy_kind = agg.utility_proxy.map(|_| utility_kind(defense_spec));
    record.aggregate = agg;
    record.instances = instances;
    Ok(record)
}

/// Clean InvRE per instance.
pub fn run_score(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let cfg = ExperimentConfig { attack: None, ..cfg.clone() };
    with_thread_pool(|| {
        let s = session(&cfg, None)?;
        let evals = evaluate_all(&cfg, &s, None)?;
        let mut record = finish("score", &cfg, &s, evals, None)?;
        record.aggregate.utility_proxy = None;
        record.utility_proxy_kind = None;
        Ok(record)
    })?
}

/// Clean InvRE plus the tiered matching attack per instance.
pub fn run_attack_eval(cfg: &ExperimentConfig) -> Result<RunRecord> {
    if cfg.attack.is_none() {
        return Err(Error::Config("attack evaluation needs an attack section".into()));
    }
    with_thread_pool(|| {
        let s = session(cfg, None)?;
        let evals = evaluate_all(cfg, &s, None)?;
        let mut record = finish("attack", cfg, &s, evals, None)?;
        record.aggregate.utility_proxy = None;
        record.utility_proxy_kind = None;
        Ok(record)
    })?
}

/// InvRE (and attack, if configured) under the configured defense, with
/// the calibration of the clean batch.
pub fn run_defense(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let d = cfg.defense.clone().ok_or_else(|| Error::Config("defend needs a defense section".into()))?;
    with_thread_pool(|| {
        let s = session(cfg, Some(&d))?;
        let evals = evaluate_all(cfg, &s, Some(&d))?;
        finish("defend", cfg, &s, evals, Some(&d))
    })?
}

/// One evaluation per grid strength; grid value 0 is the undefended round.
/// Calibration stays fixed at the clean batch's.
pub fn run_defense_sweep(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let d = cfg.defense.clone().ok_or_else(|| Error::Config("sweep needs a defense section".into()))?;
    let grid = cfg.grid.clone().ok_or_else(|| Error::Config("sweep needs a grid".into()))?;
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    with_thread_pool(|| {
        let s = session(cfg, Some(&d))?;
        let mut rows = Vec::with_capacity(grid.len());
        for &value in &grid {
            let point = (value > 0.0).then(|| d.with_strength(value));
            let evals = evaluate_all(cfg, &s, point.as_ref())?;
            let data_space = d.kind.acts_on_data();
            let utility = if point.is_none() && data_space {
                let inputs: Vec<Vec<f64>> = s.prep.instances.iter().map(|i| i.x.clone()).collect();
                ridge_utility(&inputs, &s.prep.instances, cfg.seed)?
            } else {
                utility_proxy(&s.prep, &evals, cfg.seed)?
            };
            let instances: Vec<InstanceRecord> = evals.into_iter().map(|e| e.record).collect();
            let aggregate = Aggregate::from_instances(&instances, utility);
            rows.push(SweepRow { defense_param: value, aggregate, instances });
        }
        let mut record = RunRecord::new("sweep", cfg);
        record.calibration = Some(s.cal);
        record.defense = Some(d.clone());
        if let Some(a) = &cfg.attack {
            record.tier_weights = Some(attack::tier_weights(&a.tiers)?);
        }
        record.utility_proxy_kind = Some(utility_kind(Some(&d)));
        record.aggregate = rows[0].aggregate.clone();
        record.instances = rows[0].instances.clone();
        record.sweep = Some(rows);
        Ok(record)
    })?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub index: usize,
    pub sigma: Vec<f64>,
    /// Running share of total singular-value mass.
    pub cumulative_mass: Vec<f64>,
    pub rank: usize,
}

/// Singular values of each instance's Jacobian.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<SpectrumEntry>> {
    with_thread_pool(|| {
        let prep = prepare(cfg)?;
        let states = clean_states(&prep)?;
        Ok(states
            .iter()
            .enumerate()
            .map(|(index, s)| {
                let total: f64 = s.svd.sigma.iter().sum();
                let mut acc = 0.0;
                let cumulative_mass = s
                    .svd
                    .sigma
                    .iter()
                    .map(|v| {
                        acc += v;
                        if total > 0.0 { acc / total } else { 0.0 }
                    })
                    .collect();
                SpectrumEntry { index, sigma: s.svd.sigma.clone(), cumulative_mass, rank: s.profile.rank }
            })
            .collect())
    })?
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn cfg(extra: serde_json::Value) -> ExperimentConfig {
        let mut v = json!({
            "map": {"network": {"random": {"dims": [16, 6, 2], "activations": ["tanh", "identity"], "seed": 2}},
                    "mode": "vfl_embedding", "cut": 1},
            "dataset": {"kind": "synthetic_grid", "m": 16},
            "n_instances": 12,
            "seed": 5
        });
        crate::harness::config::merge_missing(&mut v, &json!({}));
        if let (Some(o), serde_json::Value::Object(e)) = (v.as_object_mut(), extra) {
            o.extend(e);
        }
        ExperimentConfig::from_json(&v.to_string()).unwrap()
    }

    #[test]
    fn single_self_calibrated_instance_scores_one_half() {
        let r = run_score(&cfg(json!({"n_instances": 1}))).unwrap();
        assert!((r.instances[0].invre - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invre_orders_inversely_to_weighted_bound() {
        let r = run_score(&cfg(json!({}))).unwrap();
        let mut by_bound = r.instances.clone();
        by_bound.sort_by(|a, b| a.weighted_bound.total_cmp(&b.weighted_bound));
        for w in by_bound.windows(2) {
            assert!(w[0].invre >= w[1].invre);
        }
    }

    #[test]
    fn prune_at_zero_matches_clean_round() {
        let c = cfg(json!({"defense": {"kind": "prune", "lambda": 0.0}, "grid": [0.0, 0.5]}));
        let sweep = run_defense_sweep(&c).unwrap();
        let rows = sweep.sweep.unwrap();
        let clean = run_score(&c).unwrap();
        for (a, b) in rows[0].instances.iter().zip(&clean.instances) {
            assert_eq!(a.invre, b.invre);
        }
        let pruned = run_defense(&cfg(json!({"defense": {"kind": "prune", "lambda": 0.0}}))).unwrap();
        for (a, b) in pruned.instances.iter().zip(&clean.instances) {
            assert_eq!(a.invre, b.invre);
        }
    }

    #[test]
    fn gnp_sweep_lowers_invre() {
        let c = cfg(json!({"defense": {"kind": "gnp", "delta": 0.01}, "grid": [0.0, 0.001, 0.01, 0.1]}));
        let rows = run_defense_sweep(&c).unwrap().sweep.unwrap();
        for w in rows.windows(2) {
            assert!(w[1].aggregate.mean_invre <= w[0].aggregate.mean_invre + 1e-15);
        }
        assert!(rows.iter().all(|r| r.aggregate.utility_proxy.is_some()));
    }

    #[test]
    fn ridge_separates_clean_grid_classes() {
        let data = data::generate_synthetic(data::SyntheticKind::Grid, 60, 64, 1).unwrap();
        let inputs: Vec<Vec<f64>> = data.iter().map(|d| d.x.clone()).collect();
        let acc = ridge_utility(&inputs, &data, 3).unwrap().unwrap();
        assert!(acc > 0.8, "{acc}");
    }

    #[test]
    fn cholesky_matches_known_solution() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let x = cholesky_solve(a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn attack_eval_records_tiers() {
        let c = cfg(json!({"attack": {"iters": 40, "tiers": [10, 40]}}));
        let r = run_attack_eval(&c).unwrap();
        let w = r.tier_weights.clone().unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.aggregate.correlation.is_some());
        assert!(r.instances.iter().all(|i| i.attack.as_ref().unwrap().tier_mse.len() == 2));
    }

    #[test]
    fn adaptive_defenses_run() {
        for kind in ["invl_dnp", "invl_gnp", "invl_enp", "dnp", "enp", "dropout"] {
            let d = if kind == "dropout" { json!({"kind": kind, "lambda": 0.3}) } else { json!({"kind": kind, "delta": 0.01}) };
            let r = run_defense(&cfg(json!({"defense": d}))).unwrap();
            assert_eq!(r.instances.len(), 12);
            assert!(r.aggregate.utility_proxy.is_some(), "{kind}");
        }
    }
}
