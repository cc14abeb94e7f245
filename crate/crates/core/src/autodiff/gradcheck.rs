use super::{AutodiffError, Matrix, Tape, Var};

/// Worst central-difference disagreement for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub param: usize,
    pub max_rel_error: f64,
    pub worst_entry: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_error)
            .fold(0.0, f64::max)
    }
}

/// Relative error with a small absolute floor so entries whose true gradient is
/// near zero are judged on absolute agreement.
pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `f` receives a fresh tape with each of `params` registered as a leaf (in
/// order) and must return a `1 x 1` node. Every entry of every parameter is
/// perturbed by `±step`.
pub fn finite_difference_check<F, E>(
    f: F,
    params: &[Matrix],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    let eval = |values: &[Matrix]| -> Result<(Tape, Vec<Var>, Var), E> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.leaf(m.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };

    let (tape, vars, out) = eval(params)?;
    let grads = tape.backward(out)?;

    let mut work: Vec<Matrix> = params.to_vec();
    let mut entries = Vec::with_capacity(params.len());
    for (p, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).expect("leaf gradient").clone();
        let mut worst = GradCheckEntry {
            param: p,
            max_rel_error: 0.0,
            worst_entry: (0, 0),
            analytic: 0.0,
            numeric: 0.0,
        };
        for idx in 0..params[p].len() {
            let orig = work[p].as_slice()[idx];
            work[p].as_mut_slice()[idx] = orig + step;
            let plus = scalar_of(eval(&work)?);
            work[p].as_mut_slice()[idx] = orig - step;
            let minus = scalar_of(eval(&work)?);
            work[p].as_mut_slice()[idx] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.as_slice()[idx];
            let err = relative_error(a, numeric);
            if err > worst.max_rel_error || idx == 0 {
                let cols = params[p].cols().max(1);
                worst = GradCheckEntry {
                    param: p,
                    max_rel_error: err,
                    worst_entry: (idx / cols, idx % cols),
                    analytic: a,
                    numeric,
                };
            }
        }
        entries.push(worst);
    }
    Ok(GradCheckReport { entries, tolerance })
}

fn scalar_of((tape, _, out): (Tape, Vec<Var>, Var)) -> f64 {
    tape.value(out).get(0, 0)
}
