use super::params::ParamStore;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update; `grads` pairs parameter indices with gradients.
    /// Non-trainable entries are ignored.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[(usize, Vec<f64>)]) {
        if self.m.len() != params.len() {
            self.m = params.entries().iter().map(|e| vec![0.0; e.tensor.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, g) in grads {
            if !params.entry(*i).trainable {
                continue;
            }
            let (m, v) = (&mut self.m[*i], &mut self.v[*i]);
            let p = params.tensor_mut(*i).data_mut();
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * p[j]);
            }
        }
    }
}
