//! Seeded parameter generation.
//!
//! Every named parameter group draws from its own ChaCha stream keyed by
//! `(seed, name)`, so adding a group never shifts the values of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{se_hidden_width, ConvParams, Linear, SeParams};

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub struct ParamRng {
    inner: ChaCha8Rng,
}

impl ParamRng {
    pub fn new(seed: u64, name: &str) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(fnv1a(name));
        ParamRng { inner }
    }

    pub fn uniform(&mut self, lo: f32, hi: f32) -> f32 {
        self.inner.gen_range(lo..hi)
    }

    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.inner.gen_bool(p)
    }

    fn fill(&mut self, n: usize, bound: f32) -> Vec<f32> {
        (0..n).map(|_| self.uniform(-bound, bound)).collect()
    }

    /// 3x3 convolution with He-uniform weights, `U(-sqrt(6 / fan_in), ..)`,
    /// and biases from `U(-1 / sqrt(fan_in), ..)`, `fan_in = in * 9`.
    pub fn conv_params(&mut self, out_channels: usize, in_channels: usize) -> ConvParams {
        let fan_in = (in_channels * 9) as f32;
        let kernel = self.fill(out_channels * in_channels * 9, (6.0 / fan_in).sqrt());
        let bias = self.fill(out_channels, 1.0 / fan_in.sqrt());
        ConvParams::new(out_channels, in_channels, kernel, bias).expect("generated conv is valid")
    }

    /// Linear layer drawn from `U(-k, k)`, `k = 1 / sqrt(in)`.
    pub fn linear(&mut self, out_features: usize, in_features: usize) -> Linear {
        let k = 1.0 / (in_features as f32).sqrt();
        let weight = self.fill(out_features * in_features, k);
        let bias = self.fill(out_features, k);
        Linear::new(out_features, in_features, weight, bias).expect("generated linear is valid")
    }

    pub fn se_params(&mut self, channels: usize, reduction: usize) -> SeParams {
        let hidden = se_hidden_width(channels, reduction);
        let squeeze = self.linear(hidden, channels);
        let excite = self.linear(channels, hidden);
        SeParams::new(squeeze, excite).expect("generated SE layers chain")
    }
}
