//! Central finite-difference gradient checking.

use std::collections::BTreeMap;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use super::NumericsError;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub per_parameter_errors: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub passed: bool,
    /// Element with the largest relative error.
    pub worst: Option<ElementError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementError {
    pub param: String,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// A named parameter tensor fed to a scalar function under test.
#[derive(Clone, Debug)]
pub struct NamedParam {
    pub name: String,
    pub value: Tensor,
}

impl NamedParam {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        NamedParam {
            name: name.into(),
            value,
        }
    }
}

/// Element-wise relative error with a `max(|a|, |n|, 1e-12)` denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-12);
    (analytic - numeric).abs() / denom
}

fn eval<F>(f: &F, params: &[NamedParam]) -> Result<(Graph, Vec<Var>, Var), NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.value.clone())).collect();
    let out = f(&mut g, &vars)?;
    Ok((g, vars, out))
}

fn eval_output<F>(f: &F, params: &[NamedParam], expected_len: usize) -> Result<Vec<f64>, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    let (g, _, out) = eval(f, params)?;
    let t = g.value(out);
    if t.len() != expected_len {
        return Err(NumericsError::ShapeMismatch {
            op: "finite_difference_check",
            left: t.shape().to_vec(),
            right: vec![expected_len],
        });
    }
    Ok(t.data().to_vec())
}

/// Reverse-mode gradients of scalar `f` with respect to each parameter.
pub fn analytic_gradients<F>(f: &F, params: &[NamedParam]) -> Result<Vec<Vec<f64>>, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    analytic_gradients_weighted(f, &[1.0], params)
}

/// Reverse-mode gradients of `weights · f(params)`.
pub fn analytic_gradients_weighted<F>(
    f: &F,
    weights: &[f64],
    params: &[NamedParam],
) -> Result<Vec<Vec<f64>>, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    let (g, vars, out) = eval(f, params)?;
    if g.value(out).len() != weights.len() {
        return Err(if weights.len() == 1 {
            NumericsError::NotScalar(g.value(out).shape().to_vec())
        } else {
            NumericsError::ShapeMismatch {
                op: "finite_difference_check",
                left: g.value(out).shape().to_vec(),
                right: vec![weights.len()],
            }
        });
    }
    let grads = g.backward_with(out, weights.to_vec());
    Ok(vars
        .iter()
        .zip(params)
        .map(|(v, p)| {
            grads
                .get(*v)
                .map(|s| s.to_vec())
                .unwrap_or_else(|| vec![0.0; p.value.len()])
        })
        .collect())
}

/// Central differences `(f(p+h) - f(p-h)) / 2h` of scalar `f`, one element
/// at a time.
pub fn numeric_gradients<F>(f: &F, params: &[NamedParam], h: f64) -> Result<Vec<Vec<f64>>, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    numeric_gradients_weighted(f, &[1.0], params, h)
}

/// Central differences of `weights · f(params)`.
///
/// The difference is taken per output element before weighting,
/// `Σ w_i (f_i(p+h) - f_i(p-h)) / 2h`, so outputs untouched by the
/// perturbation cancel exactly instead of adding rounding noise. For a
/// scalar `f` this is the plain central difference.
pub fn numeric_gradients_weighted<F>(
    f: &F,
    weights: &[f64],
    params: &[NamedParam],
    h: f64,
) -> Result<Vec<Vec<f64>>, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(NumericsError::InvalidStep(h));
    }
    let mut work: Vec<NamedParam> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut grad = vec![0.0; params[pi].value.len()];
        for (e, slot) in grad.iter_mut().enumerate() {
            let orig = params[pi].value.data()[e];
            work[pi].value.data_mut()[e] = orig + h;
            let plus = eval_output(f, &work, weights.len())?;
            work[pi].value.data_mut()[e] = orig - h;
            let minus = eval_output(f, &work, weights.len())?;
            work[pi].value.data_mut()[e] = orig;
            if plus.iter().chain(&minus).any(|x| !x.is_finite()) {
                return Err(NumericsError::NonFinite {
                    param: params[pi].name.clone(),
                    element: e,
                });
            }
            let diff: f64 = weights
                .iter()
                .zip(plus.iter().zip(&minus))
                .map(|(w, (p, m))| w * (p - m))
                .sum();
            *slot = diff / (2.0 * h);
        }
        out.push(grad);
    }
    Ok(out)
}

/// Builds a report from precomputed analytic and numeric gradients.
pub fn compare_gradients(
    params: &[NamedParam],
    analytic: &[Vec<f64>],
    numeric: &[Vec<f64>],
    tolerance: f64,
) -> GradCheckReport {
    let mut per_parameter_errors = BTreeMap::new();
    let mut max_relative_error: f64 = 0.0;
    let mut worst: Option<ElementError> = None;
    for ((p, a), n) in params.iter().zip(analytic).zip(numeric) {
        let slot = per_parameter_errors.entry(p.name.clone()).or_insert(0.0f64);
        for (element, (&a, &n)) in a.iter().zip(n).enumerate() {
            let err = relative_error(a, n);
            *slot = slot.max(err);
            if worst.as_ref().is_none_or(|w| err > w.relative_error) {
                worst = Some(ElementError {
                    param: p.name.clone(),
                    element,
                    analytic: a,
                    numeric: n,
                    relative_error: err,
                });
            }
            max_relative_error = max_relative_error.max(err);
        }
    }
    GradCheckReport {
        max_relative_error,
        per_parameter_errors,
        tolerance,
        passed: max_relative_error < tolerance,
        worst,
    }
}

/// Checks the analytic gradient of scalar-valued `f` against central
/// differences with step `h`.
pub fn finite_difference_check<F>(
    f: F,
    params: &[NamedParam],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    finite_difference_check_weighted(f, &[1.0], params, h, tolerance)
}

/// Same as [`finite_difference_check`] for the scalar `weights · f(params)`
/// where `f` returns a tensor with `weights.len()` elements.
pub fn finite_difference_check_weighted<F>(
    f: F,
    weights: &[f64],
    params: &[NamedParam],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, NumericsError>,
{
    let analytic = analytic_gradients_weighted(&f, weights, params)?;
    for (p, a) in params.iter().zip(&analytic) {
        if let Some(e) = a.iter().position(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite {
                param: p.name.clone(),
                element: e,
            });
        }
    }
    let numeric = numeric_gradients_weighted(&f, weights, params, h)?;
    Ok(compare_gradients(params, &analytic, &numeric, tolerance))
}
