use crate::nn::{MlpNet, Scalar};

/// Adam moments for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar = f32> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Moments for tensors of the given lengths.
    pub fn new(lengths: &[usize], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// Moments matching every weight and bias tensor of `net`.
    pub fn for_net(net: &MlpNet<T>, lr: f64) -> Self {
        let lengths: Vec<usize> = net
            .layers()
            .iter()
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect();
        AdamState::new(&lengths, lr)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Advance the step counter; call once per optimizer step before
    /// [`AdamState::update`] on each tensor.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// Bias-corrected Adam update of tensor `index`.
    pub fn update(&mut self, index: usize, params: &mut [T], grads: &[T]) {
        let t = self.step.max(1) as i32;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let step_size = T::from_f64_lossy(self.lr / (1.0 - b1.powi(t)));
        let corr2 = T::from_f64_lossy(1.0 / (1.0 - b2.powi(t)));
        let eps = T::from_f64_lossy(self.epsilon);
        let (b1t, b2t) = (T::from_f64_lossy(b1), T::from_f64_lossy(b2));
        let (c1, c2) = (T::one() - b1t, T::one() - b2t);
        let m = &mut self.first[index];
        let v = &mut self.second[index];
        for ((p, g), (mi, vi)) in params.iter_mut().zip(grads).zip(m.iter_mut().zip(v.iter_mut())) {
            *mi = b1t * *mi + c1 * *g;
            *vi = b2t * *vi + c2 * *g * *g;
            *p = *p - step_size * *mi / ((*vi * corr2).sqrt() + eps);
        }
    }
}

/// One Adam step over every parameter of `net` using its accumulated
/// gradients. Gradients are not cleared.
pub fn adam_step<T: Scalar>(net: &mut MlpNet<T>, opt: &mut AdamState<T>) {
    opt.begin_step();
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        opt.update(2 * i, &mut layer.weight, &layer.grad_weight);
        opt.update(2 * i + 1, &mut layer.bias, &layer.grad_bias);
    }
}
