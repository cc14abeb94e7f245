//! The alternating training loop and the final representation `Q`.
//!
//! Each epoch runs a discriminator update with every other network frozen,
//! then a main update of encoders, heads and decoders on the full objective
//! with the discriminators frozen.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Matrix, Tape, Var};
use crate::config::{ConfigError, Pairing, TrainConfig};
use crate::data::ViewSet;
use crate::losses::{self, LossBreakdown, LossError};
use crate::networks::{AdamConfig, AdamState, BoundParams, ModelParams, NetworkError, ParamGroup};

mod neighbors;

pub use neighbors::build_neighbor_sets;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("non-finite {component} at epoch {epoch}")]
    NonFinite { component: String, epoch: usize },
    #[error("dataset has {got} views but the model expects {expected}")]
    Views { expected: usize, got: usize },
}

/// Per-view representations and the assembled final representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub z: Vec<Matrix>,
    pub c: Vec<Matrix>,
    pub c_star: Matrix,
    /// `[C_star | Z^1 | ... | Z^V]`.
    pub q: Matrix,
}

impl Embeddings {
    /// Mean over samples and view pairs of `|c_i^v - c_i^u|_2`, counting only
    /// views present for the sample.
    pub fn cross_view_distance(&self, data: &ViewSet) -> f64 {
        cross_view_distance(&self.c, data)
    }
}

fn cross_view_distance(c: &[Matrix], data: &ViewSet) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for v in 0..c.len() {
        for u in v + 1..c.len() {
            for i in 0..data.n_samples() {
                if data.is_present(i, v) && data.is_present(i, u) {
                    let d: f64 = c[v].row(i).iter().zip(c[u].row(i)).map(|(a, b)| (a - b).powi(2)).sum();
                    total += d.sqrt();
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Elementwise mean of the per-view common representations.
pub fn assemble_consensus(c: &[Matrix]) -> Result<Matrix, TrainError> {
    let first = c.first().ok_or(TrainError::Views { expected: 1, got: 0 })?;
    let mut out = Matrix::zeros(first.rows(), first.cols());
    for m in c {
        if m.shape() != first.shape() {
            return Err(LossError::from(AutodiffError::Dimension {
                op: "consensus",
                shapes: c.iter().map(Matrix::shape).collect(),
            })
            .into());
        }
        out.add_assign(m);
    }
    let inv = 1.0 / c.len() as f64;
    Ok(out.map(|x| x * inv))
}

/// Per-sample mean over the views present for that sample.
pub fn assemble_consensus_masked(c: &[Matrix], data: &ViewSet) -> Result<Matrix, TrainError> {
    if data.is_complete() {
        return assemble_consensus(c);
    }
    let mut out = Matrix::zeros(c[0].rows(), c[0].cols());
    for (v, weight) in consensus_weights(data).iter().enumerate() {
        for i in 0..out.rows() {
            let w = weight.get(i, 0);
            out.row_mut(i).iter_mut().zip(c[v].row(i)).for_each(|(o, x)| *o += w * x);
        }
    }
    Ok(out)
}

/// Column `v` holds `present(i, v) / #present(i)`.
fn consensus_weights(data: &ViewSet) -> Vec<Matrix> {
    let n = data.n_samples();
    let counts: Vec<f64> = (0..n)
        .map(|i| (0..data.n_views()).filter(|&v| data.is_present(i, v)).count() as f64)
        .collect();
    (0..data.n_views())
        .map(|v| {
            Matrix::column(
                (0..n)
                    .map(|i| if data.is_present(i, v) { 1.0 / counts[i] } else { 0.0 })
                    .collect(),
            )
        })
        .collect()
}

/// `[C_star | Z^1 | ... | Z^V]`.
pub fn assemble_q(c_star: &Matrix, z: &[Matrix]) -> Matrix {
    let mut parts = vec![c_star];
    parts.extend(z.iter());
    Matrix::hcat(&parts).expect("row counts agree")
}

/// Forward pass of every view without recording gradients.
pub fn embed(params: &ModelParams, data: &ViewSet) -> Result<Embeddings, TrainError> {
    check_views(params, data)?;
    let mut z = Vec::with_capacity(data.n_views());
    let mut c = Vec::with_capacity(data.n_views());
    for v in 0..data.n_views() {
        let (h, hbar) = params.encode_view(v, data.view(v))?;
        let (zv, cv) = params.project(v, &h, &hbar)?;
        z.push(zv);
        c.push(cv);
    }
    let c_star = assemble_consensus_masked(&c, data)?;
    let q = assemble_q(&c_star, &z);
    Ok(Embeddings { z, c, c_star, q })
}

fn check_views(params: &ModelParams, data: &ViewSet) -> Result<(), TrainError> {
    if params.num_views() != data.n_views() {
        return Err(TrainError::Views {
            expected: params.num_views(),
            got: data.n_views(),
        });
    }
    Ok(())
}

/// Views whose specific representations are shown to view `v`'s discriminator as fakes.
pub fn fake_views(v: usize, views: usize, epoch: usize, pairing: Pairing) -> Vec<usize> {
    if views < 2 {
        return Vec::new();
    }
    match pairing {
        Pairing::Cyclic => vec![(v + 1 + epoch % (views - 1)) % views],
        Pairing::AllPairs => (0..views).filter(|&u| u != v).collect(),
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based; values are measured before that epoch's main update.
    pub epoch: usize,
    #[serde(flatten)]
    pub losses: LossBreakdown,
    pub cross_view_distance: f64,
}

/// Training state carried between epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    params: ModelParams,
    main_opt: AdamState,
    disc_opt: AdamState,
    rng: ChaCha8Rng,
    neighbors: Option<Vec<Vec<usize>>>,
    epoch: usize,
}

struct StepOutput {
    losses: LossBreakdown,
    distance_sum: f64,
    distance_count: usize,
}

impl Trainer {
    /// Validates `config` against `data` and initializes parameters from `config.seed`.
    pub fn new(config: &TrainConfig, data: &ViewSet) -> Result<Self, TrainError> {
        let params = ModelParams::init(config, &data.view_dims(), config.seed)?;
        Self::with_params(config, data, params)
    }

    pub fn with_params(config: &TrainConfig, data: &ViewSet, params: ModelParams) -> Result<Self, TrainError> {
        config.validate()?;
        let per_step = config.batch_size.unwrap_or(data.n_samples()).min(data.n_samples());
        config.validate_for_samples(per_step)?;
        check_views(&params, data)?;
        let adam = AdamConfig::with_learning_rate(config.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            config: config.clone(),
            params,
            main_opt: AdamState::new(adam),
            disc_opt: AdamState::new(adam),
            rng,
            neighbors: None,
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Neighbor sets currently used by the full-batch loss, if built.
    pub fn neighbors(&self) -> Option<&[Vec<usize>]> {
        self.neighbors.as_deref()
    }

    /// Runs one discriminator update then one main update per batch.
    pub fn train_epoch(&mut self, data: &ViewSet) -> Result<EpochRecord, TrainError> {
        let n = data.n_samples();
        let epoch = self.epoch;
        let batches: Vec<Option<Vec<usize>>> = match self.config.batch_size {
            Some(b) if b < n => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut self.rng);
                // a short tail joins the previous batch so every batch has negatives
                let mut chunks: Vec<Vec<usize>> = order.chunks(b).map(<[usize]>::to_vec).collect();
                if chunks.len() > 1 && chunks.last().unwrap().len() <= self.config.n_omega + 1 {
                    let tail = chunks.pop().unwrap();
                    chunks.last_mut().unwrap().extend(tail);
                }
                chunks.into_iter().map(Some).collect()
            }
            _ => vec![None],
        };
        let full_batch = batches.len() == 1;
        let refresh = epoch % self.config.neighbor_refresh == 0;

        let mut total: Option<LossBreakdown> = None;
        let (mut dist_sum, mut dist_count) = (0.0, 0usize);
        for rows in batches {
            let owned;
            let batch = match &rows {
                Some(r) => {
                    owned = data.select_rows(r);
                    &owned
                }
                None => data,
            };
            let out = self.step(batch, epoch, full_batch && !refresh)?;
            dist_sum += out.distance_sum;
            dist_count += out.distance_count;
            match &mut total {
                Some(t) => t.accumulate(&out.losses),
                None => total = Some(out.losses),
            }
        }
        let losses = total.expect("at least one batch");
        if let Some(component) = losses.non_finite_component() {
            return Err(TrainError::NonFinite {
                component: component.into(),
                epoch: epoch + 1,
            });
        }
        self.epoch += 1;
        Ok(EpochRecord {
            epoch: epoch + 1,
            losses,
            cross_view_distance: if dist_count == 0 { 0.0 } else { dist_sum / dist_count as f64 },
        })
    }

    fn non_finite(&self, component: &str, epoch: usize) -> impl Fn(LossError) -> TrainError + '_ {
        let component = component.to_string();
        move |e| match e {
            LossError::Autodiff(AutodiffError::NonFinite { .. }) => TrainError::NonFinite {
                component: component.clone(),
                epoch: epoch + 1,
            },
            other => other.into(),
        }
    }

    fn network_non_finite(component: &'static str, epoch: usize) -> impl Fn(NetworkError) -> TrainError {
        move |e| match e {
            NetworkError::Autodiff(AutodiffError::NonFinite { .. }) => TrainError::NonFinite {
                component: component.into(),
                epoch: epoch + 1,
            },
            other => other.into(),
        }
    }

    fn forward_views(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        data: &ViewSet,
        epoch: usize,
    ) -> Result<Vec<(Var, Var)>, TrainError> {
        let wrap = Self::network_non_finite("forward", epoch);
        (0..data.n_views())
            .map(|v| {
                let x = tape.constant(data.view(v).clone());
                let (h, hbar) = bound.encode_view(tape, v, x).map_err(&wrap)?;
                bound.project(tape, v, h, hbar).map_err(&wrap)
            })
            .collect()
    }

    /// Updates the discriminators against fixed specific representations `z`.
    fn discriminator_step(&mut self, data: &ViewSet, epoch: usize, z: &[Matrix]) -> Result<f64, TrainError> {
        let views = data.n_views();
        if views < 2 {
            return Ok(0.0);
        }
        let mut tape = Tape::new();
        let mut leaves = Vec::new();
        let discs: Vec<_> = self
            .params
            .discriminators
            .iter()
            .enumerate()
            .map(|(v, d)| d.bind(&mut tape, &format!("disc.{v}"), true, &mut leaves))
            .collect();
        let z: Vec<Var> = z.iter().map(|m| tape.constant(m.clone())).collect();
        let wrap = |e: AutodiffError| Self::network_non_finite("dis_discriminator", epoch)(e.into());
        let mut terms = Vec::new();
        for v in 0..views {
            let real = discs[v].forward(&mut tape, z[v]).map_err(wrap)?;
            for u in fake_views(v, views, epoch, self.config.pairing) {
                let fake = discs[v].forward(&mut tape, z[u]).map_err(wrap)?;
                let t = losses::dis_discriminator(
                    &mut tape,
                    real,
                    fake,
                    Some(data.present(v)),
                    Some(data.present(u)),
                )
                .map_err(self.non_finite("dis_discriminator", epoch))?;
                terms.push(t);
            }
        }
        let loss = sum_vars(&mut tape, &terms)?;
        let value = tape.value(loss).scalar_value().expect("scalar");
        let grads = tape.backward(loss).map_err(LossError::from)?;
        let grads = leaves
            .iter()
            .map(|(name, var)| (name.clone(), grads.get(*var).expect("leaf gradient").clone()))
            .collect();
        self.disc_opt.step(&mut self.params, &grads)?;
        Ok(value)
    }

    /// Discriminator update, then the main update against the updated discriminators.
    ///
    /// The discriminator update leaves the encoders untouched, so both share
    /// one forward pass of the encoders.
    fn step(&mut self, data: &ViewSet, epoch: usize, reuse_neighbors: bool) -> Result<StepOutput, TrainError> {
        let views = data.n_views();
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, |g| g == ParamGroup::Main);
        let reps = self.forward_views(&mut tape, &bound, data, epoch)?;
        let z_values: Vec<Matrix> = reps.iter().map(|r| tape.value(r.0).clone()).collect();
        let dis_discriminator = self.discriminator_step(data, epoch, &z_values)?;
        let discs: Vec<_> = self
            .params
            .discriminators
            .iter()
            .map(|d| d.bind(&mut tape, "", false, &mut Vec::new()))
            .collect();
        let cfg = &self.config;

        let mut rec = Vec::with_capacity(views);
        let mut cor = Vec::with_capacity(views);
        let mut objective = Vec::new();
        let mut generator = Vec::new();
        for (v, &(z, c)) in reps.iter().enumerate() {
            let x = tape.constant(data.view(v).clone());
            let xhat = bound
                .decode_view(&mut tape, v, z, c)
                .map_err(Self::network_non_finite("rec", epoch))?;
            let mask = (!data.is_complete()).then(|| data.present(v));
            let r = losses::rec(&mut tape, x, xhat, mask).map_err(self.non_finite("rec", epoch))?;
            let k = losses::cor(&mut tape, z, c).map_err(self.non_finite("cor", epoch))?;
            rec.push(r);
            cor.push(k);
            objective.push(r);
            for u in fake_views(v, views, epoch, cfg.pairing) {
                let fake = discs[v]
                    .forward(&mut tape, reps[u].0)
                    .map_err(|e| Self::network_non_finite("dis_generator", epoch)(e.into()))?;
                let g = losses::dis_generator(&mut tape, fake, Some(data.present(u)))
                    .map_err(self.non_finite("dis_generator", epoch))?;
                generator.push(g);
            }
        }

        let c_star = if data.is_complete() {
            let cs: Vec<Var> = reps.iter().map(|r| r.1).collect();
            let s = sum_vars(&mut tape, &cs)?;
            tape.scale(s, 1.0 / views as f64).map_err(LossError::from)?
        } else {
            let mut parts = Vec::with_capacity(views);
            for (w, r) in consensus_weights(data).into_iter().zip(&reps) {
                let w = tape.constant(w);
                parts.push(tape.mul(r.1, w).map_err(LossError::from)?);
            }
            sum_vars(&mut tape, &parts)?
        };
        let mut q_parts = vec![c_star];
        q_parts.extend(reps.iter().map(|r| r.0));
        let q = tape.concat_cols(&q_parts).map_err(LossError::from)?;

        let positives = match (&self.neighbors, reuse_neighbors) {
            (Some(n), true) => n.clone(),
            _ => {
                let n = build_neighbor_sets(tape.value(q), cfg.n_omega)?;
                if self.config.batch_size.is_none_or(|b| b >= data.n_samples()) {
                    self.neighbors = Some(n.clone());
                }
                n
            }
        };
        let ent = losses::ent(&mut tape, q, &positives).map_err(self.non_finite("ent", epoch))?;

        let cor_sum = sum_vars(&mut tape, &cor)?;
        let gen_sum = sum_vars(&mut tape, &generator)?;
        let reg = tape.add(cor_sum, gen_sum).map_err(LossError::from)?;
        let reg = tape.scale(reg, cfg.alpha).map_err(LossError::from)?;
        let ent_w = tape.scale(ent, cfg.beta).map_err(LossError::from)?;
        objective.push(reg);
        objective.push(ent_w);
        let j = sum_vars(&mut tape, &objective)?;

        let scalar = |t: &Tape, v: Var| t.value(v).scalar_value().expect("scalar");
        let losses = losses::total_objective(
            rec.iter().map(|v| scalar(&tape, *v)).collect(),
            cor.iter().map(|v| scalar(&tape, *v)).collect(),
            scalar(&tape, gen_sum),
            dis_discriminator,
            scalar(&tape, ent),
            cfg.alpha,
            cfg.beta,
        )?;
        if let Some(component) = losses.non_finite_component() {
            return Err(TrainError::NonFinite {
                component: component.into(),
                epoch: epoch + 1,
            });
        }

        let c_values: Vec<Matrix> = reps.iter().map(|r| tape.value(r.1).clone()).collect();
        let (distance_sum, distance_count) = distance_parts(&c_values, data);

        let grads = tape.backward(j).map_err(LossError::from)?;
        let grads = bound.collect_grads(&grads);
        self.main_opt.step(&mut self.params, &grads)?;
        Ok(StepOutput {
            losses,
            distance_sum,
            distance_count,
        })
    }
}

fn distance_parts(c: &[Matrix], data: &ViewSet) -> (f64, usize) {
    let mut count = 0;
    for v in 0..c.len() {
        for u in v + 1..c.len() {
            count += (0..data.n_samples())
                .filter(|&i| data.is_present(i, v) && data.is_present(i, u))
                .count();
        }
    }
    (cross_view_distance(c, data) * count as f64, count)
}

fn sum_vars(tape: &mut Tape, vars: &[Var]) -> Result<Var, TrainError> {
    let Some((&first, rest)) = vars.split_first() else {
        return Ok(tape.constant(Matrix::scalar(0.0)));
    };
    let mut acc = first;
    for &v in rest {
        acc = tape.add(acc, v).map_err(LossError::from)?;
    }
    Ok(acc)
}

/// Trained parameters, their final embeddings and the per-epoch log.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub params: ModelParams,
    pub embeddings: Embeddings,
    pub log: Vec<EpochRecord>,
}

pub fn fit(data: &ViewSet, config: &TrainConfig) -> Result<FitOutput, TrainError> {
    fit_with_progress(data, config, |_| {})
}

/// [`fit`], calling `progress` after every epoch.
pub fn fit_with_progress(
    data: &ViewSet,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<FitOutput, TrainError> {
    let mut trainer = Trainer::new(config, data)?;
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let record = trainer.train_epoch(data)?;
        progress(&record);
        log.push(record);
    }
    let params = trainer.into_params();
    let embeddings = embed(&params, data)?;
    Ok(FitOutput {
        params,
        embeddings,
        log,
    })
}
