use super::{NodeId, ParamId, ParamStore, Tape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |fd - analytic| / max(1, |analytic|)` over all coordinates.
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub coordinates: usize,
    /// Smallest ReLU input magnitude seen at the unperturbed point.
    pub relu_margin: f64,
}

/// Compares tape gradients against central finite differences
/// `(L(θ+ε) − L(θ−ε)) / 2ε` for every scalar coordinate of every parameter
/// in `params`.
///
/// `forward` must be a pure function of the store: same parameters, same
/// loss (seed any dropout inside it).
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    epsilon: f64,
    mut forward: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<(Tape, NodeId)>,
{
    if !(1e-8..=1e-4).contains(&epsilon) {
        return Err(Error::config("grad check", "epsilon", format!("must lie in [1e-8, 1e-4], got {epsilon}")));
    }
    let (mut tape, loss) = forward(store)?;
    let relu_margin = tape.min_relu_margin();
    tape.backward(loss, store)?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|&id| store.get(id).grad.data().to_vec())
        .collect();

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let (tape, loss) = forward(store)?;
        let v = tape.value(loss).data()[0];
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss {v} during finite-difference perturbation")));
        }
        Ok(v)
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        coordinates: 0,
        relu_margin,
    };
    for (&id, grads) in params.iter().zip(&analytic) {
        for (k, &g) in grads.iter().enumerate() {
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + epsilon;
            let plus = eval(store);
            store.get_mut(id).value.data_mut()[k] = orig - epsilon;
            let minus = eval(store);
            store.get_mut(id).value.data_mut()[k] = orig;
            let fd = (plus? - minus?) / (2.0 * epsilon);
            let err = (fd - g).abs() / g.abs().max(1.0);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst_param.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst_param = Some(store.get(id).name.clone());
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}
