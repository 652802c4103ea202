use crate::autodiff::ParamStore;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// One Adam update with bias correction. Weight decay is added to the
/// gradient (coupled L2) for every parameter not marked exempt.
pub fn adam_step(store: &mut ParamStore, lr: f64, weight_decay: f64) {
    for p in store.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let decay = if p.weight_decay_exempt { 0.0 } else { weight_decay };
        let value = p.value.data_mut();
        let grad = p.grad.data();
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for k in 0..value.len() {
            let g = grad[k] + decay * value[k];
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * g;
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * g * g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            value[k] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}
