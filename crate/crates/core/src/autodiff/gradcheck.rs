//! Central-difference verification of analytic gradients.
//!
//! Checks run over `ParameterSet<f64>` only; the element type is what pins them to
//! checking precision.

use super::params::{ParamGrads, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-5;

/// A scalar function of a parameter set together with its analytic gradient.
pub trait Objective {
    fn evaluate(&self, params: &ParameterSet<f64>) -> Result<(f64, ParamGrads<f64>)>;
}

/// Adapts a closure that records a scalar loss on a fresh tape.
pub struct TapeObjective<F>(pub F);

impl<F> Objective for TapeObjective<F>
where
    F: Fn(&mut Tape<f64>, &ParameterSet<f64>) -> Result<Var>,
{
    fn evaluate(&self, params: &ParameterSet<f64>) -> Result<(f64, ParamGrads<f64>)> {
        let mut tape = Tape::new();
        let loss = (self.0)(&mut tape, params)?;
        let value = tape.value(loss).item();
        let grads = tape.backward(loss)?;
        Ok((value, grads.params))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic − numeric| / max(|analytic|, |numeric|, 1e-8) over every scalar.
    pub max_rel_err: f64,
    /// Parameter name and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient of `objective` against `(f(θ+h) − f(θ−h)) / 2h` for
/// every scalar in `params`.
///
/// The objective is evaluated twice up front; differing results mean it is not a
/// deterministic function of the parameters (dropout left on, say) and the check is
/// refused with a contract error.
pub fn grad_check(objective: &impl Objective, params: &ParameterSet<f64>, h: f64) -> Result<GradCheckReport> {
    let (value, grads) = objective.evaluate(params)?;
    let (again, _) = objective.evaluate(params)?;
    if value.to_bits() != again.to_bits() {
        return Err(Error::Contract(
            "objective is not deterministic; disable dropout or freeze its seed".into(),
        ));
    }

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
    };
    let mut probe = params.clone();
    for (id, param) in params.iter() {
        let analytic = grads.dense(id, param.value.len());
        for (i, &a) in analytic.iter().enumerate() {
            let orig = param.value.data()[i];
            probe.value_mut(id).data_mut()[i] = orig + h;
            let (plus, _) = objective.evaluate(&probe)?;
            probe.value_mut(id).data_mut()[i] = orig - h;
            let (minus, _) = objective.evaluate(&probe)?;
            probe.value_mut(id).data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = err;
                report.worst = Some((param.name.clone(), i));
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    Ok(report)
}
