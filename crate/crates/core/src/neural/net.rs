use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `u·tanh(u)`: smooth, bounded derivative, `σ′(0) = 0`.
    #[default]
    XTanh,
    Tanh,
    /// Softplus `ln(1 + eᵘ)`.
    SmoothedRelu,
}

impl Activation {
    pub fn value(self, u: f64) -> f64 {
        match self {
            Activation::XTanh => u * libm::tanh(u),
            Activation::Tanh => libm::tanh(u),
            Activation::SmoothedRelu => u.max(0.0) + libm::log1p(libm::exp(-libm::fabs(u))),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::XTanh => {
                let t = libm::tanh(u);
                t + u * (1.0 - t * t)
            }
            Activation::Tanh => {
                let t = libm::tanh(u);
                1.0 - t * t
            }
            Activation::SmoothedRelu => 1.0 / (1.0 + libm::exp(-u)),
        }
    }

    pub fn value_and_derivative(self, u: f64) -> (f64, f64) {
        match self {
            Activation::XTanh => {
                let t = libm::tanh(u);
                (u * t, t + u * (1.0 - t * t))
            }
            Activation::Tanh => {
                let t = libm::tanh(u);
                (t, 1.0 - t * t)
            }
            Activation::SmoothedRelu => (self.value(u), self.derivative(u)),
        }
    }

    /// An upper bound on `|σ′|`.
    pub fn derivative_bound(self) -> f64 {
        match self {
            Activation::XTanh => 1.2,
            Activation::Tanh | Activation::SmoothedRelu => 1.0,
        }
    }
}

/// `f(x; w) = (1/√(2m)) Σ_r b_r σ(w_rᵀx)` with frozen signs `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLayerNet {
    pub seed: u64,
    pub half_width: usize,
    pub input_dim: usize,
    pub activation: Activation,
    pub signs: Vec<f64>,
    /// `w₀`, row `r` at `[r·d, (r+1)·d)`.
    pub init: Vec<f64>,
}

impl TwoLayerNet {
    /// Signs and rows for `r < m` are drawn, then mirrored:
    /// `b_{r+m} = −b_r`, `w_{r+m} = w_r`, so `f(·; w₀) ≡ 0`.
    pub fn init_symmetric(seed: u64, half_width: usize, input_dim: usize, activation: Activation) -> Result<Self> {
        if half_width == 0 || input_dim == 0 {
            return Err(Error::InvalidDimensions("network width and input dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / libm::sqrt(input_dim as f64);
        let mut signs = vec![0.0; 2 * half_width];
        let mut init = vec![0.0; 2 * half_width * input_dim];
        for r in 0..half_width {
            let b = if rng.random::<bool>() { 1.0 } else { -1.0 };
            signs[r] = b;
            signs[r + half_width] = -b;
            for j in 0..input_dim {
                let w: f64 = rng.sample(StandardNormal);
                init[r * input_dim + j] = w * scale;
                init[(r + half_width) * input_dim + j] = w * scale;
            }
        }
        Ok(Self {
            seed,
            half_width,
            input_dim,
            activation,
            signs,
            init,
        })
    }

    pub fn width(&self) -> usize {
        2 * self.half_width
    }

    pub fn param_dim(&self) -> usize {
        self.width() * self.input_dim
    }

    fn norm_factor(&self) -> f64 {
        1.0 / libm::sqrt(self.width() as f64)
    }

    fn row<'a>(&self, w: &'a [f64], r: usize) -> &'a [f64] {
        &w[r * self.input_dim..(r + 1) * self.input_dim]
    }

    pub fn output(&self, x: &[f64], w: &[f64]) -> f64 {
        // Summing the halves separately makes the mirrored terms cancel exactly.
        let half = |range: core::ops::Range<usize>| -> f64 {
            range
                .map(|r| self.signs[r] * self.activation.value(dot(self.row(w, r), x)))
                .sum()
        };
        let m = self.half_width;
        self.norm_factor() * (half(0..m) + half(m..2 * m))
    }

    /// `f(x; w)`, also writing `∂f/∂(w_rᵀx)` into `slopes[r]` so the
    /// gradient can be formed later by [`TwoLayerNet::add_slopes`].
    pub fn forward(&self, x: &[f64], w: &[f64], slopes: &mut [f64]) -> f64 {
        let c = self.norm_factor();
        let m = self.half_width;
        let mut halves = [0.0; 2];
        for (k, half) in halves.iter_mut().enumerate() {
            for r in k * m..(k + 1) * m {
                let (v, dv) = self.activation.value_and_derivative(dot(self.row(w, r), x));
                *half += self.signs[r] * v;
                slopes[r] = c * self.signs[r] * dv;
            }
        }
        c * (halves[0] + halves[1])
    }

    /// `out += coef·∇_w f(x; w)` given the slopes from [`TwoLayerNet::forward`].
    pub fn add_slopes(&self, x: &[f64], slopes: &[f64], coef: f64, out: &mut [f64]) {
        for (r, &g) in slopes.iter().enumerate() {
            let g = coef * g;
            for (o, xi) in out[r * self.input_dim..(r + 1) * self.input_dim].iter_mut().zip(x) {
                *o += g * xi;
            }
        }
    }

    /// `∇_w f(x; w)`, block `r` equal to `(1/√(2m)) b_r σ′(w_rᵀx) x`.
    pub fn gradient(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.param_dim()];
        self.add_gradient(x, w, 1.0, &mut out);
        out
    }

    /// `out += coef·∇_w f(x; w)`.
    pub fn add_gradient(&self, x: &[f64], w: &[f64], coef: f64, out: &mut [f64]) {
        let c = self.norm_factor() * coef;
        for r in 0..self.width() {
            let g = c * self.signs[r] * self.activation.derivative(dot(self.row(w, r), x));
            for (o, xi) in out[r * self.input_dim..(r + 1) * self.input_dim].iter_mut().zip(x) {
                *o += g * xi;
            }
        }
    }

    /// Gradient features `φ(x(s,a), w)` over every state-action input.
    pub fn feature_map(&self, inputs: &FeatureMap, w: &[f64]) -> FeatureMap {
        FeatureMap::from_fn(self.param_dim(), inputs.num_states(), inputs.num_actions(), |s, a| {
            self.gradient(inputs.feature(s, a), w)
        })
    }

    pub fn output_table(&self, inputs: &FeatureMap, w: &[f64]) -> Vec<Vec<f64>> {
        (0..inputs.num_states())
            .map(|s| (0..inputs.num_actions()).map(|a| self.output(inputs.feature(s, a), w)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::testing::random_vectors;

    fn unit_ball_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
        let v = random_vectors(rng, 1, d).pop().unwrap();
        let n = norm(&v).max(1.0);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn zero_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for act in [Activation::XTanh, Activation::Tanh, Activation::SmoothedRelu] {
            for seed in [1, 2] {
                let net = TwoLayerNet::init_symmetric(seed, 32, 5, act).unwrap();
                for _ in 0..1000 {
                    let x = unit_ball_point(&mut rng, 5);
                    assert!(libm::fabs(net.output(&x, &net.init)) <= 1e-12);
                }
            }
        }
        let a = TwoLayerNet::init_symmetric(1, 4, 3, Activation::XTanh).unwrap();
        let b = TwoLayerNet::init_symmetric(2, 4, 3, Activation::XTanh).unwrap();
        assert_ne!(a.init, b.init);
    }

    #[test]
    fn fused_forward_matches_separate_passes() {
        let net = TwoLayerNet::init_symmetric(5, 6, 3, Activation::XTanh).unwrap();
        let w: Vec<f64> = net.init.iter().enumerate().map(|(i, v)| v + 0.01 * i as f64).collect();
        let x = [0.2, -0.4, 0.7];
        let mut slopes = vec![0.0; net.width()];
        let y = net.forward(&x, &w, &mut slopes);
        assert_eq!(y, net.output(&x, &w));
        let mut g = vec![0.0; net.param_dim()];
        net.add_slopes(&x, &slopes, 1.0, &mut g);
        for (a, b) in g.iter().zip(net.gradient(&x, &w)) {
            assert!(libm::fabs(a - b) <= 1e-15);
        }
    }

    #[test]
    fn mirrored_structure() {
        let net = TwoLayerNet::init_symmetric(3, 8, 4, Activation::XTanh).unwrap();
        for r in 0..8 {
            assert_eq!(net.signs[r + 8], -net.signs[r]);
            assert_eq!(net.row(&net.init, r), net.row(&net.init, r + 8));
        }
        let x = [0.5, 0.1, -0.2, 0.3];
        let g = net.gradient(&x, &net.init);
        for r in 0..8 {
            for j in 0..4 {
                assert_eq!(g[(r + 8) * 4 + j], -g[r * 4 + j]);
            }
        }
        assert!(norm(&g) <= net.activation.derivative_bound() * norm(&x));
    }

    #[test]
    fn init_row_norms_have_unit_mean() {
        let net = TwoLayerNet::init_symmetric(11, 256, 8, Activation::XTanh).unwrap();
        let mean: f64 = (0..512).map(|r| dot(net.row(&net.init, r), net.row(&net.init, r))).sum::<f64>() / 512.0;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for act in [Activation::XTanh, Activation::Tanh, Activation::SmoothedRelu] {
            let net = TwoLayerNet::init_symmetric(5, 6, 3, act).unwrap();
            for _ in 0..100 {
                let x = unit_ball_point(&mut rng, 3);
                let w: Vec<f64> = net.init.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
                let g = net.gradient(&x, &w);
                let mut fd = vec![0.0; w.len()];
                for k in 0..w.len() {
                    let (mut up, mut down) = (w.clone(), w.clone());
                    up[k] += 1e-5;
                    down[k] -= 1e-5;
                    fd[k] = (net.output(&x, &up) - net.output(&x, &down)) / 2e-5;
                }
                let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                assert!(norm(&diff) <= 1e-6 * norm(&g).max(1e-300), "{act:?}");
            }
        }
    }

    #[test]
    fn activation_derivatives() {
        for act in [Activation::XTanh, Activation::Tanh, Activation::SmoothedRelu] {
            for i in -50..=50 {
                let u = i as f64 * 0.1;
                let fd = (act.value(u + 1e-6) - act.value(u - 1e-6)) / 2e-6;
                assert!((fd - act.derivative(u)).abs() < 1e-8);
                assert!(act.derivative(u).abs() <= act.derivative_bound());
            }
        }
        assert_eq!(Activation::XTanh.derivative(0.0), 0.0);
    }
}
