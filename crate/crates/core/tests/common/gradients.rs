use dockrl::agents::AgentConfig;
use dockrl::env::{ACT_DIM, OBS_DIM};
use dockrl::nn::{Activation, Matrix, MlpNet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Outcome;

pub const H: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor so exact zeros (dead units) compare cleanly.
const FLOOR: f64 = 1e-8;

/// Every (name, layer sizes, output activation) an agent builds at the given
/// hidden sizes.
pub fn agent_shapes(hidden: &[usize]) -> Vec<(&'static str, Vec<usize>, Activation)> {
    let cfg = AgentConfig {
        hidden_sizes: hidden.to_vec(),
        ..AgentConfig::default()
    };
    vec![
        ("td3 actor", cfg.layer_sizes(OBS_DIM, ACT_DIM), Activation::Tanh),
        ("td3/sac critic", cfg.layer_sizes(OBS_DIM + ACT_DIM, 1), Activation::Identity),
        ("sac actor", cfg.layer_sizes(OBS_DIM, 2 * ACT_DIM), Activation::Identity),
        ("ppo policy", cfg.layer_sizes(OBS_DIM, ACT_DIM), Activation::Identity),
        ("ppo value", cfg.layer_sizes(OBS_DIM, 1), Activation::Identity),
    ]
}

/// Plain-loop reference network over flat parameters (weights then bias per
/// layer), independent of the library's forward code.
struct Reference<'a> {
    sizes: &'a [usize],
    output: Activation,
    params: &'a [f64],
    offsets: Vec<usize>,
}

impl<'a> Reference<'a> {
    fn new(sizes: &'a [usize], output: Activation, params: &'a [f64]) -> Self {
        let mut offsets = vec![0];
        for pair in sizes.windows(2) {
            offsets.push(offsets.last().unwrap() + pair[0] * pair[1] + pair[1]);
        }
        Reference { sizes, output, params, offsets }
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn w(&self, l: usize, o: usize, i: usize) -> f64 {
        self.params[self.offsets[l] + o * self.sizes[l] + i]
    }

    fn b(&self, l: usize, o: usize) -> f64 {
        self.params[self.offsets[l] + self.sizes[l] * self.sizes[l + 1] + o]
    }

    /// Index of weight (l, o, i) or, with `i = None`, of bias (l, o).
    fn index(&self, l: usize, o: usize, i: Option<usize>) -> usize {
        match i {
            Some(i) => self.offsets[l] + o * self.sizes[l] + i,
            None => self.offsets[l] + self.sizes[l] * self.sizes[l + 1] + o,
        }
    }

    /// Pre-activations of every layer.
    fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pre: Vec<Vec<f64>> = Vec::new();
        let mut act = x.to_vec();
        for l in 0..self.layers() {
            let z: Vec<f64> = (0..self.sizes[l + 1])
                .map(|o| self.b(l, o) + (0..self.sizes[l]).map(|i| self.w(l, o, i) * act[i]).sum::<f64>())
                .collect();
            act = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
        }
        pre
    }

    fn head(&self, z: f64) -> f64 {
        match self.output {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    fn activation(&self, pre: &[Vec<f64>], l: usize, x: &[f64], i: usize) -> f64 {
        if l == 0 {
            x[i]
        } else {
            pre[l - 1][i].max(0.0)
        }
    }

    /// Change in `Σ c·y` when layer-`k` pre-activations move by `delta`
    /// (sparse), with `None` if any ReLU switches.
    fn perturbed_change(&self, pre: &[Vec<f64>], c: &[f64], k: usize, delta: &[(usize, f64)]) -> Option<f64> {
        let last = self.layers() - 1;
        let mut diff: Vec<(usize, f64)> = delta.to_vec();
        for l in k..=last {
            if l == last {
                return Some(diff.iter().map(|&(o, d)| c[o] * (self.head(pre[l][o] + d) - self.head(pre[l][o]))).sum());
            }
            // ReLU on layer l, then push the activation change into layer l + 1
            let mut act_diff = Vec::with_capacity(diff.len());
            for &(u, d) in &diff {
                let (before, after) = (pre[l][u], pre[l][u] + d);
                if (before > 0.0) != (after > 0.0) {
                    return None;
                }
                let a = after.max(0.0) - before.max(0.0);
                if a != 0.0 {
                    act_diff.push((u, a));
                }
            }
            diff = (0..self.sizes[l + 2])
                .map(|o| (o, act_diff.iter().map(|&(u, a)| self.w(l + 1, o, u) * a).sum::<f64>()))
                .collect();
        }
        unreachable!()
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ShapeReport {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
}

/// Compare analytic parameter and input gradients against central
/// differences for `instances` random networks of one shape.
pub fn check_shape(sizes: &[usize], output: Activation, instances: usize, seed: u64) -> ShapeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ShapeReport::default();
    let batch = 2;
    for _ in 0..instances {
        let mut net = MlpNet::<f64>::new(sizes, output, 1.0, &mut rng).unwrap();
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..sizes[0]).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let out_dim = sizes[sizes.len() - 1];
        let coeffs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..out_dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();

        let x = Matrix::from_rows(&inputs).unwrap();
        net.forward_cached(&x).unwrap();
        net.zero_grads();
        let input_grad = net.backward(&Matrix::from_rows(&coeffs).unwrap()).unwrap();
        let grads = net.grads_flat();
        let params = net.params_flat();
        let reference = Reference::new(sizes, output, &params);
        let pres: Vec<Vec<Vec<f64>>> = inputs.iter().map(|x| reference.pre_activations(x)).collect();

        let mut probe = |analytic: f64, plus: Option<f64>, minus: Option<f64>| match (plus, minus) {
            (Some(p), Some(m)) => {
                let numeric = (p - m) / (2.0 * H);
                report.checked += 1;
                report.worst = report.worst.max(rel_err(analytic, numeric));
            }
            _ => report.skipped += 1,
        };

        // parameters: a weight or bias moves one pre-activation per sample
        for l in 0..reference.layers() {
            for o in 0..sizes[l + 1] {
                let inputs_of = (0..sizes[l]).map(Some).chain(std::iter::once(None));
                for i in inputs_of {
                    let change = |sign: f64| -> Option<f64> {
                        let mut total = 0.0;
                        for (b, pre) in pres.iter().enumerate() {
                            let x = i.map_or(1.0, |i| reference.activation(pre, l, &inputs[b], i));
                            total += reference.perturbed_change(pre, &coeffs[b], l, &[(o, sign * H * x)])?;
                        }
                        Some(total)
                    };
                    probe(grads[reference.index(l, o, i)], change(1.0), change(-1.0));
                }
            }
        }
        // inputs: one input coordinate moves every first-layer pre-activation
        for b in 0..batch {
            for i in 0..sizes[0] {
                let change = |sign: f64| {
                    let delta: Vec<(usize, f64)> = (0..sizes[1]).map(|o| (o, sign * H * reference.w(0, o, i))).collect();
                    reference.perturbed_change(&pres[b], &coeffs[b], 0, &delta)
                };
                probe(input_grad.get(b, i), change(1.0), change(-1.0));
            }
        }
    }
    report
}

pub fn run(instances: usize) -> Outcome {
    let hidden = AgentConfig::default().hidden_sizes;
    let mut lines = Vec::new();
    let mut bad = Vec::new();
    for (i, (name, sizes, act)) in agent_shapes(&hidden).into_iter().enumerate() {
        let r = check_shape(&sizes, act, instances, 1000 + i as u64);
        let line = format!("{name} {sizes:?}: worst {:.1e} ({} checked, {} skipped)", r.worst, r.checked, r.skipped);
        if r.worst > REL_TOL || r.checked == 0 {
            bad.push(line);
        } else {
            lines.push(line);
        }
    }
    if bad.is_empty() {
        Ok(format!("{instances} networks per shape; {}", lines.join("; ")))
    } else {
        Err(bad.join("; "))
    }
}
