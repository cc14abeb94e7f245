//! Helpers shared by the gradient tests and the acceptance harness.
#![allow(dead_code)]

use mvdis::autodiff::{finite_difference_check, AutodiffError, Matrix, OpKind, Tape, Var};
use mvdis::config::{Architecture, TrainConfig};
use mvdis::losses::{self, LossError};
use mvdis::networks::{Activation, BoundMlp, ModelParams, NamedParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const TOL: f64 = 1e-4;

/// Entries in `[-2, -0.1] U [0.1, 2]`, away from kinks at zero.
pub fn matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.random_range(0.1..2.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn positive(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    matrix(rows, cols, rng).map(f64::abs)
}

/// Reduces any output to a scalar with fixed random weights so every output entry matters.
fn weighted_sum(t: &mut Tape, y: Var, seed: u64) -> Result<Var, AutodiffError> {
    let (r, c) = t.value(y).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = t.constant(matrix(r, c, &mut rng));
    let p = t.mul(y, w)?;
    t.sum(p)
}

/// Collects the worst relative error over a sequence of checks.
#[derive(Default)]
pub struct Worst {
    pub error: f64,
    pub label: &'static str,
    pub checks: usize,
}

impl Worst {
    fn check<E: std::fmt::Debug + From<AutodiffError>>(
        &mut self,
        label: &'static str,
        f: impl Fn(&mut Tape, &[Var]) -> Result<Var, E>,
        params: &[Matrix],
    ) {
        let report = finite_difference_check(f, params, STEP, TOL).unwrap();
        self.checks += 1;
        if report.max_rel_error() >= self.error {
            self.error = report.max_rel_error();
            self.label = label;
        }
    }
}

/// Every tape primitive on random `r x c` operands, broadcasting forms included.
pub fn check_primitives(worst: &mut Worst, r: usize, c: usize, k: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = matrix(r, c, &mut rng);
    let b = matrix(r, c, &mut rng);
    let m = matrix(c, k, &mut rng);
    let row = matrix(1, c, &mut rng);
    let col = matrix(r, 1, &mut rng);
    let s = matrix(1, 1, &mut rng);
    let pos = positive(r, c, &mut rng);
    let other = matrix(k, c, &mut rng);

    worst.check("matmul", |t, v| { let y = t.matmul(v[0], v[1])?; weighted_sum(t, y, seed) }, &[a.clone(), m]);
    for kind in [OpKind::Add, OpKind::Sub, OpKind::Mul] {
        for rhs in [&b, &row, &col, &s] {
            worst.check(kind.name(), |t, v| { let y = t.apply(kind, &[v[0], v[1]])?; weighted_sum(t, y, seed) }, &[a.clone(), rhs.clone()]);
        }
    }
    for kind in [OpKind::Relu, OpKind::Sigmoid, OpKind::Tanh, OpKind::Exp, OpKind::RowL2Squared,
                 OpKind::AbsSumRows, OpKind::RowMean, OpKind::Scale(-1.7), OpKind::Shift(0.3), OpKind::Sum] {
        worst.check(kind.name(), |t, v| { let y = t.apply(kind, &[v[0]])?; weighted_sum(t, y, seed) }, &[a.clone()]);
    }
    worst.check("log", |t, v| { let y = t.log(v[0])?; weighted_sum(t, y, seed) }, &[pos]);
    // entries have magnitude >= 0.1, so the lower bound is active on some and not others
    let away_from_top = a.map(|x| if (x - 1.0).abs() < 0.01 { 1.5 } else { x });
    worst.check("clamp", |t, v| { let y = t.clamp(v[0], -0.05, 1.0)?; weighted_sum(t, y, seed) }, &[away_from_top]);
    worst.check("concat", |t, v| { let y = t.concat_cols(&[v[0], v[1], v[2]])?; weighted_sum(t, y, seed) }, &[a.clone(), col, b]);
    worst.check("cosine", |t, v| { let y = t.cosine_similarity_rows(v[0], v[1])?; weighted_sum(t, y, seed) }, &[a.clone(), other]);
    worst.check("cosine-self", |t, v| { let y = t.cosine_similarity_rows(v[0], v[0])?; weighted_sum(t, y, seed) }, &[a]);
}

/// Each loss term on random inputs with random masks and positive sets. Requires `n >= 3`.
pub fn check_losses(worst: &mut Worst, n: usize, dz: usize, dc: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = matrix(n, dz, &mut rng);
    let y = matrix(n, dz, &mut rng);
    let c = matrix(n, dc, &mut rng);
    let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    let mask2: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    worst.check::<LossError>("rec", |t, v| losses::rec(t, v[0], v[1], Some(&mask)), &[x.clone(), y]);
    worst.check::<LossError>("cor", |t, v| losses::cor(t, v[0], v[1]), &[x.clone(), c.clone()]);
    let logits = matrix(n, 1, &mut rng);
    let logits2 = matrix(n, 1, &mut rng);
    worst.check::<LossError>("dis_discriminator", |t, v| {
        let (a, b) = (t.sigmoid(v[0])?, t.sigmoid(v[1])?);
        losses::dis_discriminator(t, a, b, Some(&mask), Some(&mask2))
    }, &[logits.clone(), logits2]);
    worst.check::<LossError>("dis_generator", |t, v| {
        let a = t.sigmoid(v[0])?;
        losses::dis_generator(t, a, Some(&mask))
    }, &[logits]);
    let n_pos = rng.random_range(1..n - 1);
    let positives: Vec<Vec<usize>> = (0..n)
        .map(|i| (1..=n_pos).map(|s| (i + s) % n).collect())
        .collect();
    worst.check::<LossError>("ent", |t, v| {
        let q = t.concat_cols(&[v[0], v[1]])?;
        losses::ent(t, q, &positives)
    }, &[c, x]);
}

pub const ACTIVATIONS: [Activation; 4] =
    [Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::Identity];

/// A random MLP with the given widths, input included, differentiated in its input and every layer.
pub fn check_mlp(worst: &mut Worst, widths: &[usize], act: Activation, out_act: Option<Activation>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![matrix(3, widths[0], &mut rng)];
    for w in widths.windows(2) {
        params.push(matrix(w[0], w[1], &mut rng).map(|v| v * 0.5));
        params.push(matrix(1, w[1], &mut rng).map(|v| v * 0.5));
    }
    worst.check("mlp", |t, v| {
        let layers = v[1..].chunks(2).map(|p| (p[0], p[1])).collect();
        let net = BoundMlp::from_vars(layers, act, out_act);
        let y = net.forward(t, v[0])?;
        weighted_sum(t, y, seed)
    }, &params);
}

pub fn tiny_config() -> TrainConfig {
    TrainConfig {
        dz: 3,
        dc: 2,
        alpha: 0.3,
        beta: 0.7,
        n_omega: 2,
        architecture: Architecture {
            encoder_hidden: vec![4],
            adapter_width: 4,
            trunk_hidden: vec![3],
            decoder_hidden: vec![4],
            discriminator_hidden: vec![3],
            activation: Activation::Tanh,
        },
        ..TrainConfig::default()
    }
}

/// The full main objective, with discriminators frozen, as a function of every parameter.
pub fn objective(params: &ModelParams, views: &[Matrix], positives: &[Vec<usize>], cfg: &TrainConfig) -> (f64, Vec<(String, Matrix)>) {
    let mut t = Tape::new();
    let bound = params.bind(&mut t, |_| true);
    let mut zs = Vec::new();
    let mut cs = Vec::new();
    let mut terms = Vec::new();
    for (v, x) in views.iter().enumerate() {
        let xv = t.constant(x.clone());
        let (h, hbar) = bound.encode_view(&mut t, v, xv).unwrap();
        let (z, c) = bound.project(&mut t, v, h, hbar).unwrap();
        let xhat = bound.decode_view(&mut t, v, z, c).unwrap();
        terms.push(losses::rec(&mut t, xv, xhat, None).unwrap());
        let cor = losses::cor(&mut t, z, c).unwrap();
        terms.push(t.scale(cor, cfg.alpha).unwrap());
        zs.push(z);
        cs.push(c);
    }
    for v in 0..views.len() {
        let u = (v + 1) % views.len();
        let fake = bound.discriminate(&mut t, v, zs[u]).unwrap();
        let g = losses::dis_generator(&mut t, fake, None).unwrap();
        terms.push(t.scale(g, cfg.alpha).unwrap());
        let real = bound.discriminate(&mut t, v, zs[v]).unwrap();
        let d = losses::dis_discriminator(&mut t, real, fake, None, None).unwrap();
        terms.push(t.scale(d, 0.25).unwrap());
    }
    let mut c_star = cs[0];
    for &c in &cs[1..] {
        c_star = t.add(c_star, c).unwrap();
    }
    let c_star = t.scale(c_star, 1.0 / cs.len() as f64).unwrap();
    let mut parts = vec![c_star];
    parts.extend(&zs);
    let q = t.concat_cols(&parts).unwrap();
    let ent = losses::ent(&mut t, q, positives).unwrap();
    terms.push(t.scale(ent, cfg.beta).unwrap());
    let mut j = terms[0];
    for &x in &terms[1..] {
        j = t.add(j, x).unwrap();
    }
    let value = t.value(j).scalar_value().unwrap();
    let grads = t.backward(j).unwrap();
    (value, bound.collect_grads(&grads).into_iter().collect())
}

/// Worst relative error between the analytic gradient of the whole objective
/// and central differences, over every parameter entry of a randomized model.
pub fn whole_model_worst_error(seed: u64) -> f64 {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [2usize, 3];
    let views: Vec<Matrix> = dims.iter().map(|&d| matrix(6, d, &mut rng)).collect();
    let positives: Vec<Vec<usize>> = (0..6).map(|i| vec![(i + 1) % 6, (i + 3) % 6]).collect();
    let mut params = ModelParams::init(&cfg, &dims, seed).unwrap();
    // non-zero biases so every parameter is exercised away from its initial value
    for (_, m) in params.named_params_mut() {
        for x in m.as_mut_slice() {
            *x += rng.random_range(-0.2..0.2);
        }
    }
    let (_, analytic) = objective(&params, &views, &positives, &cfg);
    let mut worst = 0.0f64;
    for (name, grad) in &analytic {
        for idx in 0..grad.len() {
            let perturb = |delta: f64| {
                let mut p = params.clone();
                for (n, m) in p.named_params_mut() {
                    if &n == name {
                        m.as_mut_slice()[idx] += delta;
                    }
                }
                objective(&p, &views, &positives, &cfg).0
            };
            let numeric = (perturb(STEP) - perturb(-STEP)) / (2.0 * STEP);
            let a = grad.as_slice()[idx];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
        }
    }
    worst
}
