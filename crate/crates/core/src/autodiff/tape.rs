use super::matrix::{gemm, Matrix};
use super::AutodiffError;

/// Handle to a node on a [`Tape`].
///
/// A `Var` is only meaningful for the tape that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations recordable on a tape.
///
/// Binary elementwise kinds (`Add`, `Sub`, `Mul`) accept a right operand of
/// the same shape, a `1 x c` row, an `r x 1` column, or a `1 x 1` scalar; the
/// right operand is repeated across the left operand's shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    Relu,
    Sigmoid,
    Tanh,
    Exp,
    /// Natural log; errors on any non-positive entry.
    Log,
    /// `[a | b | ...]`, all inputs sharing a row count.
    ConcatCols,
    /// `r x c -> r x 1`, squared l2 norm of each row.
    RowL2Squared,
    /// `r x c -> r x 1`, l1 norm of each row.
    AbsSumRows,
    /// `r x c -> r x 1`.
    RowMean,
    Scale(f64),
    Shift(f64),
    /// Elementwise clamp into `[min, max]`; gradient is zero where the clamp is active.
    Clamp {
        min: f64,
        max: f64,
    },
    /// Cosine similarity between every row of `a` (`n x d`) and every row of `b` (`m x d`), giving `n x m`.
    CosineSimilarityRows,
    /// Sum of all entries, `1 x 1`.
    Sum,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "subtract",
            OpKind::Mul => "elementwise-multiply",
            OpKind::Relu => "relu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::ConcatCols => "concat-cols",
            OpKind::RowL2Squared => "row-l2-squared",
            OpKind::AbsSumRows => "abs-sum-rows",
            OpKind::RowMean => "row-mean",
            OpKind::Scale(_) => "scale",
            OpKind::Shift(_) => "shift",
            OpKind::Clamp { .. } => "clamp",
            OpKind::CosineSimilarityRows => "cosine-similarity-rows",
            OpKind::Sum => "sum",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

fn broadcast_kind(lhs: (usize, usize), rhs: (usize, usize)) -> Option<Broadcast> {
    if lhs == rhs {
        Some(Broadcast::Same)
    } else if rhs == (1, 1) {
        Some(Broadcast::Scalar)
    } else if rhs == (1, lhs.1) {
        Some(Broadcast::Row)
    } else if rhs == (lhs.0, 1) {
        Some(Broadcast::Col)
    } else {
        None
    }
}

enum NodeOp {
    Leaf,
    Constant,
    Apply {
        kind: OpKind,
        inputs: Vec<Var>,
        bcast: Option<Broadcast>,
        cache: Option<CosineCache>,
    },
}

struct CosineCache {
    a_hat: Matrix,
    b_hat: Matrix,
    a_norm: Vec<f64>,
    b_norm: Vec<f64>,
}

struct Node {
    value: Matrix,
    op: NodeOp,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order of the
/// computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: Vec<Var>,
}

/// Gradients of a scalar output with respect to every leaf of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    entries: Vec<(Var, Matrix)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.entries
            .binary_search_by_key(&var, |(v, _)| *v)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Matrix)> {
        self.entries.iter().map(|(v, m)| (*v, m))
    }

    pub fn into_entries(self) -> Vec<(Var, Matrix)> {
        self.entries
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a differentiable parameter.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        let var = self.push(value, NodeOp::Leaf, true);
        self.leaves.push(var);
        var
    }

    /// Registers a value that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, NodeOp::Constant, false)
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn leaves(&self) -> &[Var] {
        &self.leaves
    }

    fn push(&mut self, value: Matrix, op: NodeOp, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn dim_err(&self, kind: OpKind, inputs: &[Var]) -> AutodiffError {
        AutodiffError::Dimension {
            op: kind.name(),
            shapes: inputs.iter().map(|v| self.value(*v).shape()).collect(),
        }
    }

    /// Evaluates `kind` on `inputs` and records the node.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var, AutodiffError> {
        let arity_ok = match kind {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::CosineSimilarityRows => inputs.len() == 2,
            OpKind::ConcatCols => !inputs.is_empty(),
            _ => inputs.len() == 1,
        };
        if !arity_ok {
            return Err(AutodiffError::Arity {
                op: kind.name(),
                got: inputs.len(),
            });
        }
        let mut bcast = None;
        let mut cache = None;
        let value = {
            let x = self.value(inputs[0]);
            match kind {
                OpKind::MatMul => {
                    let b = self.value(inputs[1]);
                    x.matmul(b).ok_or_else(|| self.dim_err(kind, inputs))?
                }
                OpKind::Add | OpKind::Sub | OpKind::Mul => {
                    let b = self.value(inputs[1]);
                    let bk = broadcast_kind(x.shape(), b.shape())
                        .ok_or_else(|| self.dim_err(kind, inputs))?;
                    bcast = Some(bk);
                    let f: fn(f64, f64) -> f64 = match kind {
                        OpKind::Add => |a, b| a + b,
                        OpKind::Sub => |a, b| a - b,
                        _ => |a, b| a * b,
                    };
                    elementwise_broadcast(x, b, bk, f)
                }
                OpKind::Relu => x.map(|v| v.max(0.0)),
                OpKind::Sigmoid => x.map(sigmoid),
                OpKind::Tanh => x.map(f64::tanh),
                OpKind::Exp => x.map(f64::exp),
                OpKind::Log => {
                    if let Some(bad) = x.as_slice().iter().find(|v| !(**v > 0.0)) {
                        return Err(AutodiffError::Domain {
                            op: kind.name(),
                            value: *bad,
                        });
                    }
                    x.map(f64::ln)
                }
                OpKind::ConcatCols => {
                    let parts: Vec<&Matrix> = inputs.iter().map(|v| self.value(*v)).collect();
                    Matrix::hcat(&parts).ok_or_else(|| self.dim_err(kind, inputs))?
                }
                OpKind::RowL2Squared => Matrix::column(
                    x.iter_rows()
                        .map(|r| r.iter().map(|v| v * v).sum())
                        .collect(),
                ),
                OpKind::AbsSumRows => Matrix::column(
                    x.iter_rows()
                        .map(|r| r.iter().map(|v| v.abs()).sum())
                        .collect(),
                ),
                OpKind::RowMean => {
                    if x.cols() == 0 {
                        return Err(self.dim_err(kind, inputs));
                    }
                    let c = x.cols() as f64;
                    Matrix::column(x.iter_rows().map(|r| r.iter().sum::<f64>() / c).collect())
                }
                OpKind::Scale(a) => x.map(|v| a * v),
                OpKind::Shift(a) => x.map(|v| v + a),
                OpKind::Clamp { min, max } => x.map(|v| v.clamp(min, max)),
                OpKind::Sum => Matrix::scalar(x.sum()),
                OpKind::CosineSimilarityRows => {
                    let b = self.value(inputs[1]);
                    if x.cols() != b.cols() {
                        return Err(self.dim_err(kind, inputs));
                    }
                    let (a_hat, a_norm) = normalize_rows(x).ok_or(AutodiffError::Domain {
                        op: kind.name(),
                        value: 0.0,
                    })?;
                    let (b_hat, b_norm) = normalize_rows(b).ok_or(AutodiffError::Domain {
                        op: kind.name(),
                        value: 0.0,
                    })?;
                    let mut out = Matrix::zeros(x.rows(), b.rows());
                    gemm(1.0, &a_hat, false, &b_hat, true, 0.0, &mut out);
                    cache = Some(CosineCache {
                        a_hat,
                        b_hat,
                        a_norm,
                        b_norm,
                    });
                    out
                }
            }
        };
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: kind.name() });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(
            value,
            NodeOp::Apply {
                kind,
                inputs: inputs.to_vec(),
                bcast,
                cache,
            },
            requires_grad,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Mul, &[a, b])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Relu, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Sigmoid, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Tanh, &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Exp, &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Log, &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        self.apply(OpKind::ConcatCols, parts)
    }

    pub fn row_l2_squared(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::RowL2Squared, &[a])
    }

    pub fn abs_sum_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::AbsSumRows, &[a])
    }

    pub fn row_mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::RowMean, &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Scale(factor), &[a])
    }

    pub fn shift(&mut self, a: Var, offset: f64) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Shift(offset), &[a])
    }

    pub fn clamp(&mut self, a: Var, min: f64, max: f64) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Clamp { min, max }, &[a])
    }

    pub fn cosine_similarity_rows(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::CosineSimilarityRows, &[a, b])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(OpKind::Sum, &[a])
    }

    /// Reverse accumulation from a `1 x 1` output.
    ///
    /// Every leaf on the tape gets an entry; leaves the output does not depend
    /// on get a zero matrix.
    pub fn backward(&self, output: Var) -> Result<Gradients, AutodiffError> {
        let out_shape = self.value(output).shape();
        if out_shape != (1, 1) {
            return Err(AutodiffError::NotScalar { shape: out_shape });
        }
        let mut grads: Vec<Option<Matrix>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let NodeOp::Apply {
                kind,
                inputs,
                bcast,
                cache,
            } = &node.op
            else {
                continue;
            };
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let contributions =
                self.local_backward(*kind, inputs, *bcast, cache.as_ref(), &node.value, &g);
            for (input, contrib) in inputs.iter().zip(contributions) {
                let Some(contrib) = contrib else { continue };
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }

        let entries = self
            .leaves
            .iter()
            .map(|&leaf| {
                let shape = self.value(leaf).shape();
                let g = grads
                    .get_mut(leaf.0)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1));
                (leaf, g)
            })
            .collect();
        Ok(Gradients { entries })
    }

    fn local_backward(
        &self,
        kind: OpKind,
        inputs: &[Var],
        bcast: Option<Broadcast>,
        cache: Option<&CosineCache>,
        out: &Matrix,
        g: &Matrix,
    ) -> Vec<Option<Matrix>> {
        let needs = |i: usize| self.nodes[inputs[i].0].requires_grad;
        let x = self.value(inputs[0]);
        match kind {
            OpKind::MatMul => {
                let b = self.value(inputs[1]);
                let da = needs(0).then(|| {
                    let mut da = Matrix::zeros(x.rows(), x.cols());
                    gemm(1.0, g, false, b, true, 0.0, &mut da);
                    da
                });
                let db = needs(1).then(|| {
                    let mut db = Matrix::zeros(b.rows(), b.cols());
                    gemm(1.0, x, true, g, false, 0.0, &mut db);
                    db
                });
                vec![da, db]
            }
            OpKind::Add | OpKind::Sub => {
                let b = self.value(inputs[1]);
                let bk = bcast.expect("broadcast recorded");
                let da = needs(0).then(|| g.clone());
                let db = needs(1).then(|| {
                    let r = reduce_broadcast(g, bk, b.shape());
                    if kind == OpKind::Sub {
                        r.map(|v| -v)
                    } else {
                        r
                    }
                });
                vec![da, db]
            }
            OpKind::Mul => {
                let b = self.value(inputs[1]);
                let bk = bcast.expect("broadcast recorded");
                let da = needs(0).then(|| elementwise_broadcast(g, b, bk, |g, b| g * b));
                let db =
                    needs(1).then(|| reduce_broadcast(&g.zip_map(x, |g, a| g * a), bk, b.shape()));
                vec![da, db]
            }
            OpKind::Relu => vec![Some(g.zip_map(x, |g, x| if x > 0.0 { g } else { 0.0 }))],
            OpKind::Sigmoid => vec![Some(g.zip_map(out, |g, y| g * y * (1.0 - y)))],
            OpKind::Tanh => vec![Some(g.zip_map(out, |g, y| g * (1.0 - y * y)))],
            OpKind::Exp => vec![Some(g.zip_map(out, |g, y| g * y))],
            OpKind::Log => vec![Some(g.zip_map(x, |g, x| g / x))],
            OpKind::ConcatCols => {
                let mut start = 0;
                inputs
                    .iter()
                    .map(|v| {
                        let w = self.value(*v).cols();
                        let part = self.nodes[v.0]
                            .requires_grad
                            .then(|| g.slice_cols(start, start + w));
                        start += w;
                        part
                    })
                    .collect()
            }
            OpKind::RowL2Squared => {
                let mut dx = x.clone();
                for r in 0..x.rows() {
                    let gr = 2.0 * g.get(r, 0);
                    dx.row_mut(r).iter_mut().for_each(|v| *v *= gr);
                }
                vec![Some(dx)]
            }
            OpKind::AbsSumRows => {
                let mut dx = x.map(|v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
                for r in 0..x.rows() {
                    let gr = g.get(r, 0);
                    dx.row_mut(r).iter_mut().for_each(|v| *v *= gr);
                }
                vec![Some(dx)]
            }
            OpKind::RowMean => {
                let c = x.cols() as f64;
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let gr = g.get(r, 0) / c;
                    dx.row_mut(r).iter_mut().for_each(|v| *v = gr);
                }
                vec![Some(dx)]
            }
            OpKind::Scale(a) => vec![Some(g.map(|v| a * v))],
            OpKind::Shift(_) => vec![Some(g.clone())],
            OpKind::Clamp { min, max } => vec![Some(g.zip_map(x, |g, x| {
                if x >= min && x <= max {
                    g
                } else {
                    0.0
                }
            }))],
            OpKind::Sum => {
                let s = g.get(0, 0);
                vec![Some(Matrix::filled(x.rows(), x.cols(), s))]
            }
            OpKind::CosineSimilarityRows => {
                let c = cache.expect("cosine cache recorded");
                let da = needs(0).then(|| {
                    let mut gh = Matrix::zeros(c.a_hat.rows(), c.a_hat.cols());
                    gemm(1.0, g, false, &c.b_hat, false, 0.0, &mut gh);
                    unnormalize_grad(&gh, &c.a_hat, &c.a_norm)
                });
                let db = needs(1).then(|| {
                    let mut gh = Matrix::zeros(c.b_hat.rows(), c.b_hat.cols());
                    gemm(1.0, g, true, &c.a_hat, false, 0.0, &mut gh);
                    unnormalize_grad(&gh, &c.b_hat, &c.b_norm)
                });
                vec![da, db]
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn elementwise_broadcast(
    a: &Matrix,
    b: &Matrix,
    bk: Broadcast,
    f: impl Fn(f64, f64) -> f64,
) -> Matrix {
    let mut out = a.clone();
    let cols = a.cols();
    match bk {
        Broadcast::Same => {
            for (o, bv) in out.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *o = f(*o, *bv);
            }
        }
        Broadcast::Scalar => {
            let s = b.get(0, 0);
            out.as_mut_slice().iter_mut().for_each(|o| *o = f(*o, s));
        }
        Broadcast::Row => {
            let brow = b.as_slice();
            for r in 0..a.rows() {
                for (o, bv) in out.row_mut(r).iter_mut().zip(brow) {
                    *o = f(*o, *bv);
                }
            }
        }
        Broadcast::Col => {
            for r in 0..a.rows() {
                let s = b.get(r, 0);
                out.as_mut_slice()[r * cols..(r + 1) * cols]
                    .iter_mut()
                    .for_each(|o| *o = f(*o, s));
            }
        }
    }
    out
}

fn reduce_broadcast(g: &Matrix, bk: Broadcast, shape: (usize, usize)) -> Matrix {
    match bk {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => Matrix::scalar(g.sum()),
        Broadcast::Row => {
            let mut out = Matrix::zeros(1, shape.1);
            for row in g.iter_rows() {
                for (o, v) in out.as_mut_slice().iter_mut().zip(row) {
                    *o += v;
                }
            }
            out
        }
        Broadcast::Col => Matrix::column(g.iter_rows().map(|r| r.iter().sum()).collect()),
    }
}

fn normalize_rows(m: &Matrix) -> Option<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = m.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return None;
        }
        out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Some((out, norms))
}

/// Pulls a gradient w.r.t. normalized rows back to the raw rows.
fn unnormalize_grad(g_hat: &Matrix, x_hat: &Matrix, norms: &[f64]) -> Matrix {
    let mut out = g_hat.clone();
    for r in 0..g_hat.rows() {
        let xr = x_hat.row(r);
        let dot: f64 = g_hat.row(r).iter().zip(xr).map(|(a, b)| a * b).sum();
        let n = norms[r];
        for (o, xh) in out.row_mut(r).iter_mut().zip(xr) {
            *o = (*o - xh * dot) / n;
        }
    }
    out
}
