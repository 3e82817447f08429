//! Central finite-difference comparison against reverse-mode gradients.

use super::tape::{Tape, Var};
use super::tensor::{ParamId, ParamSet};
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so that gradients dominated by
/// floating-point noise near zero are compared on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat indices whose relative error exceeded the tolerance.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamCheck>,
    pub tolerance: f64,
    /// Distance of the base point to the nearest non-differentiable input.
    pub kink_margin: f64,
    pub elements_checked: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_param
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.per_param.iter().all(|p| p.flagged.is_empty())
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares reverse-mode gradients of `f` with `(f(θ+h) − f(θ−h)) / 2h`
/// for every element of every parameter.
///
/// `f` records a scalar-valued computation on the tape it is given. Values
/// passed through `detach` are held at the base point during the perturbed
/// evaluations, so stop-gradient objectives are checked as the function
/// whose gradient backward actually computes.
pub fn check_gradients<F>(f: F, params: &ParamSet, step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Config {
            key: "step".into(),
            reason: format!("must be positive, got {step}"),
        });
    }
    let (analytic, kink_margin, frozen) = {
        let mut tape = Tape::new(params);
        let out = f(&mut tape)?;
        let frozen = tape.detached_values().to_vec();
        let first = tape.scalar(out);
        let mut again = Tape::new(params);
        let out2 = f(&mut again)?;
        let second = again.scalar(out2);
        if first.to_bits() != second.to_bits() {
            return Err(Error::NonDeterministic { first, second });
        }
        (tape.backward(out)?, tape.kink_margin(), frozen)
    };
    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::with_frozen_detach(p, frozen.clone());
        let out = f(&mut tape)?;
        if tape.detached_values().len() != frozen.len() {
            return Err(Error::Constraint("graph structure changed under perturbation".into()));
        }
        Ok(tape.scalar(out))
    };

    let mut work = params.clone();
    let mut per_param = Vec::with_capacity(params.len());
    let mut elements_checked = 0;
    for id in params.ids() {
        let n = params.get(id).len();
        let grad = analytic.get(id);
        let mut check = ParamCheck {
            name: params.name(id).to_string(),
            max_rel_error: 0.0,
            flagged: Vec::new(),
        };
        for k in 0..n {
            let numeric = central_difference(&eval, &mut work, id, k, step)?;
            let a = grad.map_or(0.0, |g| g[k]);
            let err = relative_error(a, numeric);
            check.max_rel_error = check.max_rel_error.max(err);
            if !(err <= tol) {
                check.flagged.push(k);
            }
            elements_checked += 1;
        }
        per_param.push(check);
    }
    Ok(GradCheckReport {
        per_param,
        tolerance: tol,
        kink_margin,
        elements_checked,
    })
}

fn central_difference(
    eval: &impl Fn(&ParamSet) -> Result<f64>,
    work: &mut ParamSet,
    id: ParamId,
    k: usize,
    h: f64,
) -> Result<f64> {
    let orig = work.get(id).data()[k];
    work.get_mut(id).data_mut()[k] = orig + h;
    let plus = eval(work)?;
    work.get_mut(id).data_mut()[k] = orig - h;
    let minus = eval(work)?;
    work.get_mut(id).data_mut()[k] = orig;
    Ok((plus - minus) / (2.0 * h))
}
