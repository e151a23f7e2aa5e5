use super::kernels::dot;
use super::{NnError, ParamStore};

/// Moment buffers indexed like the parameter store.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_grad_norm: Option<f64>,
    pub state: AdamState,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, max_grad_norm: None, state: AdamState::default() }
    }

    pub fn with_max_grad_norm(mut self, max: f64) -> Self {
        self.max_grad_norm = Some(max);
        self
    }

    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    /// Applies one update to every trainable parameter, then clears gradients.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), NnError> {
        for id in store.ids() {
            if store.is_trainable(id) && store.grad(id).is_none() {
                return Err(NnError::MissingGrad(store.name(id).to_string()));
            }
        }
        if let Some(max) = self.max_grad_norm {
            clip_grad_norm(store, max);
        }
        self.state.step += 1;
        let t = self.state.step as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let n = store.len();
        self.state.m.resize(n, Vec::new());
        self.state.v.resize(n, Vec::new());
        for id in store.ids().collect::<Vec<_>>() {
            if !store.is_trainable(id) {
                continue;
            }
            let g = store.grad(id).expect("checked").data().to_vec();
            let (m, v) = (&mut self.state.m[id.index()], &mut self.state.v[id.index()]);
            if m.len() != g.len() {
                *m = vec![0.0; g.len()];
                *v = vec![0.0; g.len()];
            }
            let w = store.get_mut(id).data_mut();
            for k in 0..g.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                w[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        store.zero_grads();
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max`; returns the original norm.
pub fn clip_grad_norm(store: &mut ParamStore, max: f64) -> f64 {
    let total: f64 = store.grads_mut().iter().flatten().map(|g| dot(g.data(), g.data())).sum::<f64>().sqrt();
    if total > max && total > 0.0 {
        let s = max / total;
        for g in store.grads_mut().iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    total
}
