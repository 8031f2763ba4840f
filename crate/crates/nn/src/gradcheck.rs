//! Central finite-difference checks of tape gradients.

use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::NnError;

/// Relative error with a small absolute floor so that gradients that are
/// both essentially zero compare equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compare analytic parameter gradients of `loss` against central
/// differences with step `eps` over every parameter coordinate.
pub fn check_params<F>(store: &ParamStore, eps: f64, loss: F) -> Result<GradCheck, NnError>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, NnError>,
{
    let mut work = store.clone();
    work.zero_grads();
    let mut tape = Tape::new();
    let l = loss(&mut tape, &work)?;
    tape.backward(l)?.accumulate_into(&mut work);

    let eval = |s: &ParamStore| -> Result<f64, NnError> {
        let mut t = Tape::new();
        let l = loss(&mut t, s)?;
        Ok(t.value(l).item())
    };

    let mut report = GradCheck { max_rel_error: 0.0, worst: None, checked: 0 };
    let mut probe = store.clone();
    for id in store.ids() {
        for i in 0..store.value(id).len() {
            let x = store.value(id).data()[i];
            probe.value_mut(id).data_mut()[i] = x + eps;
            let plus = eval(&probe)?;
            probe.value_mut(id).data_mut()[i] = x - eps;
            let minus = eval(&probe)?;
            probe.value_mut(id).data_mut()[i] = x;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(work.grad(id).data()[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((store.name(id).to_string(), i));
                }
            }
        }
    }
    Ok(report)
}
