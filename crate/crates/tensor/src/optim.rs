use ndarray::Array2;

use crate::params::{Gradients, ParamStore};

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first_moment: Vec<Array2<f64>>,
    pub second_moment: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Array2<f64>> = store
            .iter()
            .map(|(_, v)| Array2::zeros(v.dim()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// Applies one update. Parameters without a gradient still decay their
    /// moments, matching a zero gradient.
    pub fn update(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        for id in store.ids().collect::<Vec<_>>() {
            let m = &mut self.first_moment[id.0];
            let v = &mut self.second_moment[id.0];
            match grads.get(id) {
                Some(g) => {
                    ndarray::Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                    });
                }
                None => {
                    m.mapv_inplace(|x| b1 * x);
                    v.mapv_inplace(|x| b2 * x);
                }
            }
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.insert("x", Array2::from_elem((1, 2), 3.0));
        let mut adam = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let grads = {
                let mut g = Graph::new(&store);
                let x = g.param(id);
                let sq = g.mul(x, x);
                let loss = g.sum_all(sq);
                g.backward(loss)
            };
            adam.update(&mut store, &grads);
        }
        assert!(store.get(id).iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut store = ParamStore::new();
        let id = store.insert("x", Array2::from_elem((2, 2), 10.0));
        let mut g = Graph::new(&store);
        let x = g.param(id);
        let loss = g.sum_all(x);
        let mut grads = {
            let y = g.scale(loss, 100.0);
            g.backward(y)
        };
        let before = grads.clip_global_norm(10.0);
        assert!((before - 200.0).abs() < 1e-9);
        assert!((grads.global_norm() - 10.0).abs() < 1e-9);
    }
}
