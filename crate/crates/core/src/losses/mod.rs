//! The four objective terms and their weighted combination.
//!
//! Each term has a tape form, taking [`Var`]s and returning a `1 x 1` node, and
//! a plain form over [`Matrix`] values for evaluation and testing.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Matrix, Tape, Var};

/// Scores are clamped into this window before any log.
pub const SCORE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{what}: expected {expected} entries, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("loss configuration: {0}")]
    Config(String),
    #[error("similarity of a zero vector")]
    ZeroVector,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), LossError> {
    if expected != got {
        return Err(LossError::Length { what, expected, got });
    }
    Ok(())
}

fn weight_column(flags: &[bool]) -> Matrix {
    Matrix::column(flags.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
}

fn check_same_shape(tape: &Tape, op: &'static str, a: Var, b: Var) -> Result<(), LossError> {
    let (sa, sb) = (tape.value(a).shape(), tape.value(b).shape());
    if sa != sb {
        return Err(AutodiffError::Dimension { op, shapes: vec![sa, sb] }.into());
    }
    Ok(())
}

/// Sum over present samples of the squared reconstruction error.
pub fn rec(tape: &mut Tape, x: Var, xhat: Var, mask: Option<&[bool]>) -> Result<Var, LossError> {
    check_same_shape(tape, "reconstruction", x, xhat)?;
    let diff = tape.sub(x, xhat)?;
    let per_row = tape.row_l2_squared(diff)?;
    let per_row = match mask {
        Some(m) => {
            check_len("reconstruction mask", tape.value(x).rows(), m.len())?;
            let w = tape.constant(weight_column(m));
            tape.mul(per_row, w)?
        }
        None => per_row,
    };
    Ok(tape.sum(per_row)?)
}

/// `sum_i || z_i (c_i - mean(c_i))^T ||_1`.
///
/// The entrywise l1 norm of an outer product factorises as `|z_i|_1 * |c_i - mean|_1`,
/// so the `D_z x D_c` products are never formed.
pub fn cor(tape: &mut Tape, z: Var, c: Var) -> Result<Var, LossError> {
    let (zr, cr) = (tape.value(z).rows(), tape.value(c).rows());
    if zr != cr {
        return Err(AutodiffError::Dimension {
            op: "correlation",
            shapes: vec![tape.value(z).shape(), tape.value(c).shape()],
        }
        .into());
    }
    let mean = tape.row_mean(c)?;
    let centred = tape.sub(c, mean)?;
    let cn = tape.abs_sum_rows(centred)?;
    let zn = tape.abs_sum_rows(z)?;
    let prod = tape.mul(zn, cn)?;
    Ok(tape.sum(prod)?)
}

/// `-sum_i w_i log(clamp(x_i))`
fn weighted_neg_log(tape: &mut Tape, p: Var, weights: Option<&[bool]>) -> Result<Var, LossError> {
    let n = tape.value(p).rows();
    let p = tape.clamp(p, SCORE_EPS, 1.0 - SCORE_EPS)?;
    let l = tape.log(p)?;
    let l = match weights {
        Some(w) => {
            check_len("score weights", n, w.len())?;
            let w = tape.constant(weight_column(w));
            tape.mul(l, w)?
        }
        None => l,
    };
    let s = tape.sum(l)?;
    Ok(tape.scale(s, -1.0)?)
}

/// Discriminator side: `-sum [log D(real) + log(1 - D(fake))]`.
///
/// The weight masks drop samples whose view is hidden from the respective pool.
pub fn dis_discriminator(
    tape: &mut Tape,
    real: Var,
    fake: Var,
    real_weights: Option<&[bool]>,
    fake_weights: Option<&[bool]>,
) -> Result<Var, LossError> {
    let a = weighted_neg_log(tape, real, real_weights)?;
    let flipped = tape.scale(fake, -1.0)?;
    let flipped = tape.shift(flipped, 1.0)?;
    let b = weighted_neg_log(tape, flipped, fake_weights)?;
    Ok(tape.add(a, b)?)
}

/// Encoder side, non-saturating: `-sum log D(fake)`.
pub fn dis_generator(tape: &mut Tape, fake: Var, weights: Option<&[bool]>) -> Result<Var, LossError> {
    weighted_neg_log(tape, fake, weights)
}

fn check_positives(n: usize, positives: &[Vec<usize>]) -> Result<(), LossError> {
    check_len("positive lists", n, positives.len())?;
    for (i, pos) in positives.iter().enumerate() {
        let mut seen = pos.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != pos.len() || seen.iter().any(|&j| j >= n || j == i) {
            return Err(LossError::Config(format!(
                "positives of sample {i} must be distinct other samples"
            )));
        }
        if pos.len() + 1 >= n {
            return Err(LossError::Config(format!(
                "sample {i} has {} positives among {n} samples, leaving no negatives",
                pos.len()
            )));
        }
    }
    Ok(())
}

/// Neighbor cross-entropy over the rows of `q`.
///
/// With `S = cos(Q, Q)`, the similarity kernel is `exp(S)`, so
/// `log m(q_j, q_i) = S_ij` and the loss is
/// `-(1/N) [ sum_{j in pos(i)} S_ij - sum_i |pos(i)| log sum_{k in neg(i)} exp(S_ik) ]`,
/// negatives being every sample other than `i` and its positives.
pub fn ent(tape: &mut Tape, q: Var, positives: &[Vec<usize>]) -> Result<Var, LossError> {
    let n = tape.value(q).rows();
    check_positives(n, positives)?;
    let mut pos = Matrix::zeros(n, n);
    let mut neg = Matrix::filled(n, n, 1.0);
    let mut counts = Vec::with_capacity(n);
    for (i, p) in positives.iter().enumerate() {
        neg.set(i, i, 0.0);
        for &j in p {
            pos.set(i, j, 1.0);
            neg.set(i, j, 0.0);
        }
        counts.push(p.len() as f64);
    }
    let pos = tape.constant(pos);
    let neg = tape.constant(neg);
    let counts = tape.constant(Matrix::column(counts));

    let s = tape.cosine_similarity_rows(q, q)?;
    let attract = tape.mul(s, pos)?;
    let attract = tape.sum(attract)?;
    let kernel = tape.exp(s)?;
    let kernel = tape.mul(kernel, neg)?;
    let denom = tape.row_mean(kernel)?;
    let denom = tape.scale(denom, n as f64)?;
    let log_denom = tape.log(denom)?;
    let repel = tape.mul(log_denom, counts)?;
    let repel = tape.sum(repel)?;
    let diff = tape.sub(attract, repel)?;
    Ok(tape.scale(diff, -1.0 / n as f64)?)
}

/// `exp(cos(a, b))`, in `[1/e, e]`.
pub fn similarity_m(a: &[f64], b: &[f64]) -> Result<f64, LossError> {
    check_len("similarity operand", a.len(), b.len())?;
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(LossError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0).exp())
}

fn eval(build: impl FnOnce(&mut Tape) -> Result<Var, LossError>) -> Result<f64, LossError> {
    let mut tape = Tape::new();
    let out = build(&mut tape)?;
    Ok(tape.value(out).scalar_value().expect("losses are scalar"))
}

pub fn loss_rec(x: &Matrix, xhat: &Matrix, mask: Option<&[bool]>) -> Result<f64, LossError> {
    eval(|t| {
        let (a, b) = (t.constant(x.clone()), t.constant(xhat.clone()));
        rec(t, a, b, mask)
    })
}

pub fn loss_cor(z: &Matrix, c: &Matrix) -> Result<f64, LossError> {
    eval(|t| {
        let (a, b) = (t.constant(z.clone()), t.constant(c.clone()));
        cor(t, a, b)
    })
}

pub fn loss_dis_discriminator(real: &Matrix, fake: &Matrix) -> Result<f64, LossError> {
    eval(|t| {
        let (a, b) = (t.constant(real.clone()), t.constant(fake.clone()));
        dis_discriminator(t, a, b, None, None)
    })
}

pub fn loss_dis_generator(fake: &Matrix) -> Result<f64, LossError> {
    eval(|t| {
        let a = t.constant(fake.clone());
        dis_generator(t, a, None)
    })
}

pub fn loss_ent(q: &Matrix, positives: &[Vec<usize>]) -> Result<f64, LossError> {
    eval(|t| {
        let a = t.constant(q.clone());
        ent(t, a, positives)
    })
}

/// Per-epoch loss values. `total` uses the generator-side adversarial term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rec: Vec<f64>,
    pub rec_total: f64,
    pub cor: Vec<f64>,
    pub cor_total: f64,
    pub dis_generator: f64,
    pub dis_discriminator: f64,
    pub ent: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// First component that is not finite, by name.
    pub fn non_finite_component(&self) -> Option<&'static str> {
        let parts = [
            ("rec", self.rec_total),
            ("cor", self.cor_total),
            ("dis_generator", self.dis_generator),
            ("dis_discriminator", self.dis_discriminator),
            ("ent", self.ent),
            ("total", self.total),
        ];
        parts.into_iter().find(|(_, v)| !v.is_finite()).map(|(n, _)| n)
    }

    /// Adds another breakdown componentwise, as when summing mini-batches.
    pub fn accumulate(&mut self, other: &LossBreakdown) {
        for (a, b) in self.rec.iter_mut().zip(&other.rec) {
            *a += b;
        }
        for (a, b) in self.cor.iter_mut().zip(&other.cor) {
            *a += b;
        }
        self.rec_total += other.rec_total;
        self.cor_total += other.cor_total;
        self.dis_generator += other.dis_generator;
        self.dis_discriminator += other.dis_discriminator;
        self.ent += other.ent;
        self.total += other.total;
    }
}

/// `J = sum rec + alpha (sum cor + dis_generator) + beta ent`.
pub fn total_objective(
    rec: Vec<f64>,
    cor: Vec<f64>,
    dis_generator: f64,
    dis_discriminator: f64,
    ent: f64,
    alpha: f64,
    beta: f64,
) -> Result<LossBreakdown, LossError> {
    if !(alpha >= 0.0) || !(beta >= 0.0) {
        return Err(LossError::Config(format!(
            "weights must be non-negative, got alpha={alpha} beta={beta}"
        )));
    }
    let rec_total: f64 = rec.iter().sum();
    let cor_total: f64 = cor.iter().sum();
    let total = rec_total + alpha * (cor_total + dis_generator) + beta * ent;
    Ok(LossBreakdown {
        rec,
        rec_total,
        cor,
        cor_total,
        dis_generator,
        dis_discriminator,
        ent,
        total,
    })
}
