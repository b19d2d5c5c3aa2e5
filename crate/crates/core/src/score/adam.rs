//! Adam with decoupled weight decay.

use super::network::NetworkWeights;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: NetworkWeights,
    v: NetworkWeights,
}

impl Adam {
    pub fn new(like: &NetworkWeights, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// `θ ← θ − lr·(m̂/(√v̂ + eps) + wd·θ)`.
    pub fn update(&mut self, params: &mut NetworkWeights, grads: &NetworkWeights) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, wd, eps) = (self.beta1, self.beta2, self.lr, self.weight_decay, self.eps);
        let layers = params
            .layers_mut()
            .into_iter()
            .zip(grads.layers())
            .zip(self.m.layers_mut().into_iter().zip(self.v.layers_mut()));
        for ((p, g), (m, v)) in layers {
            let ps = p.weight.iter_mut().chain(p.bias.iter_mut());
            let gs = g.weight.iter().chain(&g.bias);
            let ms = m.weight.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weight.iter_mut().chain(v.bias.iter_mut());
            for (((p, &g), m), v) in ps.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= lr * (mhat / (vhat.sqrt() + eps) + wd * *p);
            }
        }
    }
}
