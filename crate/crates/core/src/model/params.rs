use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numcore::{Scalar, Tensor2};

/// Gate weights of one LSTM direction. Each gate maps the concatenated
/// `[x_t, h_{t-1}]` row, `(d + u)` wide, to `u` units.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights<W> {
    pub input_w: W,
    pub input_b: W,
    pub forget_w: W,
    pub forget_b: W,
    pub cell_w: W,
    pub cell_b: W,
    pub output_w: W,
    pub output_b: W,
}

/// Every trainable tensor of the model, or anything parallel to it
/// (gradients, optimizer moments, tape handles).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<W> {
    pub forward: LstmWeights<W>,
    pub backward: LstmWeights<W>,
    /// d_a × 2u
    pub ws1: W,
    /// r × d_a
    pub ws2: W,
    /// (r·2u) × C
    pub classifier_w: W,
    /// 1 × C
    pub classifier_b: W,
}

pub type ModelParams<T = f64> = ParamSet<Tensor2<T>>;

/// Canonical tensor order, shared by checkpoints, initialization and Adam.
pub const PARAM_NAMES: [&str; 20] = [
    "forward.input_w",
    "forward.input_b",
    "forward.forget_w",
    "forward.forget_b",
    "forward.cell_w",
    "forward.cell_b",
    "forward.output_w",
    "forward.output_b",
    "backward.input_w",
    "backward.input_b",
    "backward.forget_w",
    "backward.forget_b",
    "backward.cell_w",
    "backward.cell_b",
    "backward.output_w",
    "backward.output_b",
    "ws1",
    "ws2",
    "classifier_w",
    "classifier_b",
];

impl<W> LstmWeights<W> {
    fn to_vec(&self) -> [&W; 8] {
        [
            &self.input_w,
            &self.input_b,
            &self.forget_w,
            &self.forget_b,
            &self.cell_w,
            &self.cell_b,
            &self.output_w,
            &self.output_b,
        ]
    }

    fn to_vec_mut(&mut self) -> [&mut W; 8] {
        [
            &mut self.input_w,
            &mut self.input_b,
            &mut self.forget_w,
            &mut self.forget_b,
            &mut self.cell_w,
            &mut self.cell_b,
            &mut self.output_w,
            &mut self.output_b,
        ]
    }

    fn from_iter(it: &mut impl Iterator<Item = W>) -> Self {
        let mut next = || it.next().expect("eight LSTM tensors");
        Self {
            input_w: next(),
            input_b: next(),
            forget_w: next(),
            forget_b: next(),
            cell_w: next(),
            cell_b: next(),
            output_w: next(),
            output_b: next(),
        }
    }
}

impl<W> ParamSet<W> {
    /// References in [`PARAM_NAMES`] order.
    pub fn tensors(&self) -> Vec<&W> {
        let mut v: Vec<&W> = Vec::with_capacity(PARAM_NAMES.len());
        v.extend(self.forward.to_vec());
        v.extend(self.backward.to_vec());
        v.extend([&self.ws1, &self.ws2, &self.classifier_w, &self.classifier_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut W> {
        let mut v: Vec<&mut W> = Vec::with_capacity(PARAM_NAMES.len());
        v.extend(self.forward.to_vec_mut());
        v.extend(self.backward.to_vec_mut());
        v.extend([
            &mut self.ws1,
            &mut self.ws2,
            &mut self.classifier_w,
            &mut self.classifier_b,
        ]);
        v
    }

    /// Inverse of [`ParamSet::tensors`]; `items` must hold exactly 20 values.
    pub fn from_ordered(items: Vec<W>) -> Result<Self> {
        if items.len() != PARAM_NAMES.len() {
            return Err(Error::Contract(format!(
                "expected {} parameter tensors, got {}",
                PARAM_NAMES.len(),
                items.len()
            )));
        }
        let mut it = items.into_iter();
        let forward = LstmWeights::from_iter(&mut it);
        let backward = LstmWeights::from_iter(&mut it);
        let mut next = || it.next().expect("length checked");
        Ok(Self {
            forward,
            backward,
            ws1: next(),
            ws2: next(),
            classifier_w: next(),
            classifier_b: next(),
        })
    }

    pub fn map<U>(&self, mut f: impl FnMut(&'static str, &W) -> U) -> ParamSet<U> {
        let items = PARAM_NAMES
            .iter()
            .zip(self.tensors())
            .map(|(name, w)| f(name, w))
            .collect();
        ParamSet::from_ordered(items).expect("same arity")
    }
}

impl<T: Scalar> ParamSet<Tensor2<T>> {
    /// Expected (rows, cols) of every tensor, in canonical order.
    pub fn expected_shapes(config: &ModelConfig) -> Vec<(usize, usize)> {
        let (d, u) = (config.input_dim, config.hidden);
        let gate = [(d + u, u), (1, u)];
        let mut shapes = Vec::with_capacity(PARAM_NAMES.len());
        for _ in 0..8 {
            shapes.extend(gate);
        }
        shapes.extend([
            (config.attention_dim, 2 * u),
            (config.hops, config.attention_dim),
            (config.content_dim(), config.n_classes),
            (1, config.n_classes),
        ]);
        shapes
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        let items = Self::expected_shapes(config)
            .into_iter()
            .map(|(r, c)| Tensor2::zeros(r, c))
            .collect();
        Self::from_ordered(items).expect("20 shapes")
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        for ((name, t), expected) in PARAM_NAMES
            .iter()
            .zip(self.tensors())
            .zip(Self::expected_shapes(config))
        {
            if t.shape() != expected {
                return Err(Error::Config(format!(
                    "parameter {name} has shape {:?}, config requires {expected:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        self.map(|_, t| t.cast())
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Xavier-uniform weights from a seeded generator, zero biases except the
/// forget gates which start at 1. Tensors are drawn in canonical order.
pub fn init_params<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = PARAM_NAMES
        .iter()
        .zip(ModelParams::<T>::expected_shapes(config))
        .map(|(name, (rows, cols))| {
            if name.ends_with("_b") {
                let fill = if name.ends_with("forget_b") {
                    T::one()
                } else {
                    T::zero()
                };
                Tensor2::filled(rows, cols, fill)
            } else {
                // Every weight maps a `rows`-wide input to `cols` outputs,
                // except Ws1/Ws2 which act on the left (out × in).
                let (fan_in, fan_out) = if *name == "ws1" || *name == "ws2" {
                    (cols, rows)
                } else {
                    (rows, cols)
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..rows * cols)
                    .map(|_| T::of(rng.gen_range(-bound..bound)))
                    .collect();
                Tensor2::from_vec(rows, cols, data).expect("shape from config")
            }
        })
        .collect();
    ModelParams::from_ordered(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let c = ModelConfig::audio(13);
        let a: ModelParams = init_params(&c, 42).unwrap();
        let b: ModelParams = init_params(&c, 42).unwrap();
        assert_eq!(a, b);
        let other: ModelParams = init_params(&c, 43).unwrap();
        assert_ne!(a.ws1, other.ws1);
    }

    #[test]
    fn default_shapes() {
        let c = ModelConfig::lyric(10);
        let p: ModelParams = init_params(&c, 0).unwrap();
        assert_eq!(p.ws1.shape(), (64, 200));
        assert_eq!(p.ws2.shape(), (10, 64));
        assert_eq!(p.classifier_w.shape(), (2000, 10));
        assert_eq!(p.forward.input_w.shape(), (228, 100));
        p.check_shapes(&c).unwrap();
    }

    #[test]
    fn xavier_bounds_and_forget_bias() {
        let c = ModelConfig {
            seq_len: 5,
            input_dim: 4,
            hidden: 3,
            attention_dim: 6,
            hops: 2,
            n_classes: 3,
        };
        let p: ModelParams = init_params(&c, 9).unwrap();
        let bound = (6.0f64 / (7 + 3) as f64).sqrt();
        assert!(p.forward.cell_w.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(p.forward.forget_b, Tensor2::filled(1, 3, 1.0));
        assert_eq!(p.backward.input_b, Tensor2::zeros(1, 3));
        let ws1_bound = (6.0f64 / (6 + 6) as f64).sqrt();
        assert!(p.ws1.data().iter().all(|v| v.abs() <= ws1_bound));
    }

    #[test]
    fn canonical_order_round_trip() {
        let c = ModelConfig::audio(4);
        let p: ModelParams = init_params(&c, 1).unwrap();
        let items: Vec<Tensor2> = p.tensors().into_iter().cloned().collect();
        assert_eq!(ModelParams::from_ordered(items).unwrap(), p);
        let names = p.map(|n, _| n);
        assert_eq!(names.ws2, "ws2");
        assert_eq!(names.backward.cell_b, "backward.cell_b");
    }
}
