use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::GNConfig;
use super::rbf;

/// Fully connected layer `y = W x + b`, `W` stored row-major as out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<f64>,
    /// Empty when the layer has no bias.
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize, bias: bool) -> Self {
        Dense {
            n_in,
            n_out,
            weight: vec![0.0; n_in * n_out],
            bias: if bias { vec![0.0; n_out] } else { Vec::new() },
        }
    }

    fn init(n_in: usize, n_out: usize, bias: bool, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Dense::zeros(n_in, n_out, bias);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        for w in &mut layer.weight {
            *w = rng.gen_range(-limit..limit);
        }
        layer
    }

    #[inline]
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = if self.bias.is_empty() { 0.0 } else { self.bias[o] };
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *yo = acc;
        }
    }

    /// Accumulates `Wᵀ dy` into `dx`.
    #[inline]
    pub fn backprop_input(&self, dy: &[f64], dx: &mut [f64]) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
            for (d, w) in dx.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }

    /// Accumulates `dy xᵀ` and `dy` into this layer's gradient buffers.
    #[inline]
    pub fn accumulate(&mut self, x: &[f64], dy: &[f64]) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &mut self.weight[o * self.n_in..(o + 1) * self.n_in];
            for (w, xi) in row.iter_mut().zip(x) {
                *w += g * xi;
            }
            if !self.bias.is_empty() {
                self.bias[o] += g;
            }
        }
    }
}

/// Parameters of one interaction block.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionParams {
    /// Filter network, radial basis → features → features.
    pub filter1: Dense,
    pub filter2: Dense,
    /// Linear map applied to sender features before the filter product.
    pub premix: Dense,
    pub post1: Dense,
    pub post2: Dense,
}

/// All trainable parameters of the graph network.
#[derive(Debug, Clone, PartialEq)]
pub struct GNParams {
    /// max_z × F embedding table.
    pub embedding: Vec<f64>,
    pub rbf_means: Vec<f64>,
    pub rbf_betas: Vec<f64>,
    pub layers: Vec<InteractionParams>,
    pub head1: Dense,
    pub head2: Dense,
    /// Learnable per-element reference energies, when trained jointly.
    pub atomref: Option<Vec<f64>>,
}

impl GNParams {
    /// Random initialization: Glorot-uniform weights, zero biases, uniform
    /// embeddings and the standard expnorm basis.
    pub fn init(config: &GNConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = config.embedding_dimension;
        let k = config.num_rbf;
        let h = config.head_dimension();
        let embedding = (0..config.max_z * f)
            .map(|_| rng.gen_range(-3f64.sqrt()..3f64.sqrt()))
            .collect();
        let (rbf_means, rbf_betas) = rbf::initial_params(k, config.cutoff_lower, config.cutoff_upper);
        let layers = (0..config.num_layers)
            .map(|_| InteractionParams {
                filter1: Dense::init(k, f, true, &mut rng),
                filter2: Dense::init(f, f, true, &mut rng),
                premix: Dense::init(f, f, false, &mut rng),
                post1: Dense::init(f, f, true, &mut rng),
                post2: Dense::init(f, f, true, &mut rng),
            })
            .collect();
        GNParams {
            embedding,
            rbf_means,
            rbf_betas,
            layers,
            head1: Dense::init(f, h, true, &mut rng),
            head2: Dense::init(h, 1, true, &mut rng),
            atomref: None,
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_mut(|_, t| t.iter_mut().for_each(|v| *v = 0.0));
        out
    }

    /// Visits every tensor in a fixed order with a stable name.
    pub fn for_each<'a>(&'a self, mut f: impl FnMut(&str, &'a [f64])) {
        f("embedding", &self.embedding);
        f("rbf_means", &self.rbf_means);
        f("rbf_betas", &self.rbf_betas);
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, d) in [
                ("filter1", &layer.filter1),
                ("filter2", &layer.filter2),
                ("premix", &layer.premix),
                ("post1", &layer.post1),
                ("post2", &layer.post2),
            ] {
                f(&format!("layer{l}.{name}.weight"), &d.weight);
                f(&format!("layer{l}.{name}.bias"), &d.bias);
            }
        }
        f("head1.weight", &self.head1.weight);
        f("head1.bias", &self.head1.bias);
        f("head2.weight", &self.head2.weight);
        f("head2.bias", &self.head2.bias);
        if let Some(a) = &self.atomref {
            f("atomref", a);
        }
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Vec<f64>)) {
        f("embedding", &mut self.embedding);
        f("rbf_means", &mut self.rbf_means);
        f("rbf_betas", &mut self.rbf_betas);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, d) in [
                ("filter1", &mut layer.filter1),
                ("filter2", &mut layer.filter2),
                ("premix", &mut layer.premix),
                ("post1", &mut layer.post1),
                ("post2", &mut layer.post2),
            ] {
                f(&format!("layer{l}.{name}.weight"), &mut d.weight);
                f(&format!("layer{l}.{name}.bias"), &mut d.bias);
            }
        }
        f("head1.weight", &mut self.head1.weight);
        f("head1.bias", &mut self.head1.bias);
        f("head2.weight", &mut self.head2.weight);
        f("head2.bias", &mut self.head2.bias);
        if let Some(a) = &mut self.atomref {
            f("atomref", a);
        }
    }

    /// All values concatenated in visiting order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(|_, t| out.extend_from_slice(t));
        out
    }

    /// Overwrites all values from a flat vector produced by [`flatten`](Self::flatten).
    pub fn assign(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_mut(|_, t| {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, flat.len(), "flat parameter vector has the wrong length");
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, t| n += t.len());
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }

    /// Order-sensitive hash of all parameter bits.
    pub(crate) fn fingerprint(&self, mut h: u64) -> u64 {
        self.for_each(|_, t| h = super::mix_slice(h, t));
        h
    }
}
