use ndarray::{Array1, Array2, ArrayD, ArrayViewD, ArrayViewMutD, IxDyn, NdFloat};
use num_traits::FromPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::patcher::{Checkpoint, Tensor};

/// Float type the towers run in: f32 for training, f64 for gradient checks.
pub trait Scalar: NdFloat + FromPrimitive {}
impl<T: NdFloat + FromPrimitive> Scalar for T {}

pub(crate) fn lit<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

/// Upper bound on the logit scale `exp(log_temperature)`.
pub const MAX_LOGIT_SCALE: f64 = 100.0;

/// Shapes of the two towers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    /// Word embedding width.
    pub d_t: usize,
    /// Joint embedding width.
    pub d: usize,
    /// Image feature length.
    pub d_img: usize,
    /// 0: mean of embeddings then projection. 1: position-weighted mean,
    /// tanh hidden layer, projection.
    pub text_depth: u8,
    pub text_hidden: usize,
    /// 0: linear projection. 1: tanh hidden layer first.
    pub image_depth: u8,
    pub image_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 64,
            d_t: 32,
            d: 32,
            d_img: 45,
            text_depth: 1,
            text_hidden: 64,
            image_depth: 0,
            image_hidden: 64,
        }
    }
}

impl ModelConfig {
    /// Copy with hidden widths zeroed where the depth leaves them unused.
    pub fn normalized(&self) -> Self {
        ModelConfig {
            text_hidden: if self.text_depth == 1 { self.text_hidden } else { 0 },
            image_hidden: if self.image_depth == 1 { self.image_hidden } else { 0 },
            ..*self
        }
    }

    /// Equal up to unused hidden widths.
    pub fn same_shape(&self, other: &ModelConfig) -> bool {
        self.normalized() == other.normalized()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        if self.vocab_size < 2 {
            return bad("vocab_size must cover the <pad> and <unk> ids");
        }
        if self.d_t == 0 || self.d == 0 || self.d_img == 0 {
            return bad("embedding widths must be positive");
        }
        if self.text_depth > 1 || self.image_depth > 1 {
            return bad("tower depth must be 0 or 1");
        }
        if (self.text_depth == 1 && self.text_hidden == 0) || (self.image_depth == 1 && self.image_hidden == 0) {
            return bad("hidden width must be positive at depth 1");
        }
        Ok(())
    }
}

/// `tanh(x·weight + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Two-tower weights plus the learnable log temperature. Matrices are stored
/// input × output, so a row vector maps as `x · W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerParams<F> {
    pub text_embedding: Array2<F>,
    pub text_hidden: Option<Dense<F>>,
    pub text_projection: Array2<F>,
    pub image_hidden: Option<Dense<F>>,
    pub image_projection: Array2<F>,
    /// Shape `[1]`.
    pub log_temperature: Array1<F>,
}

pub const LOG_TEMPERATURE: &str = "logit.log_temperature";

impl<F: Scalar> TowerParams<F> {
    /// Gaussian weights with standard deviation `1/sqrt(fan_in)`, zero
    /// biases, and `log_temperature = ln(1/0.07)`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = |rows: usize, cols: usize, std: f64| {
            let normal = Normal::new(0.0, std).expect("positive std");
            Array2::from_shape_simple_fn((rows, cols), || lit::<F>(normal.sample(&mut rng)))
        };
        let fan = |n: usize| 1.0 / (n as f64).sqrt();

        let text_embedding = matrix(config.vocab_size, config.d_t, 1.0);
        let (text_hidden, text_in) = if config.text_depth == 1 {
            let dense = Dense {
                weight: matrix(config.d_t, config.text_hidden, fan(config.d_t)),
                bias: Array1::zeros(config.text_hidden),
            };
            (Some(dense), config.text_hidden)
        } else {
            (None, config.d_t)
        };
        let text_projection = matrix(text_in, config.d, fan(text_in));
        let (image_hidden, image_in) = if config.image_depth == 1 {
            let dense = Dense {
                weight: matrix(config.d_img, config.image_hidden, fan(config.d_img)),
                bias: Array1::zeros(config.image_hidden),
            };
            (Some(dense), config.image_hidden)
        } else {
            (None, config.d_img)
        };
        let image_projection = matrix(image_in, config.d, fan(image_in));
        Ok(TowerParams {
            text_embedding,
            text_hidden,
            text_projection,
            image_hidden,
            image_projection,
            log_temperature: Array1::from_elem(1, lit((1.0f64 / 0.07).ln())),
        })
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.text_embedding.nrows(),
            d_t: self.text_embedding.ncols(),
            d: self.text_projection.ncols(),
            d_img: self
                .image_hidden
                .as_ref()
                .map_or(self.image_projection.nrows(), |h| h.weight.nrows()),
            text_depth: self.text_hidden.is_some() as u8,
            text_hidden: self.text_hidden.as_ref().map_or(0, |h| h.bias.len()),
            image_depth: self.image_hidden.is_some() as u8,
            image_hidden: self.image_hidden.as_ref().map_or(0, |h| h.bias.len()),
        }
    }

    pub fn log_temperature(&self) -> F {
        self.log_temperature[0]
    }

    /// Caps `exp(log_temperature)` at [`MAX_LOGIT_SCALE`].
    pub fn clamp_temperature(&mut self) {
        let cap = lit::<F>(MAX_LOGIT_SCALE.ln());
        if self.log_temperature[0] > cap {
            self.log_temperature[0] = cap;
        }
    }

    /// All tensors in name order.
    pub fn tensors(&self) -> Vec<(&'static str, ArrayViewD<'_, F>)> {
        let mut out = Vec::with_capacity(8);
        if let Some(h) = &self.image_hidden {
            out.push(("image.hidden.bias", h.bias.view().into_dyn()));
            out.push(("image.hidden.weight", h.weight.view().into_dyn()));
        }
        out.push(("image.projection", self.image_projection.view().into_dyn()));
        out.push((LOG_TEMPERATURE, self.log_temperature.view().into_dyn()));
        out.push(("text.embedding", self.text_embedding.view().into_dyn()));
        if let Some(h) = &self.text_hidden {
            out.push(("text.hidden.bias", h.bias.view().into_dyn()));
            out.push(("text.hidden.weight", h.weight.view().into_dyn()));
        }
        out.push(("text.projection", self.text_projection.view().into_dyn()));
        out
    }

    /// Same order as [`TowerParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, F>)> {
        let mut out = Vec::with_capacity(8);
        if let Some(h) = &mut self.image_hidden {
            out.push(("image.hidden.bias", h.bias.view_mut().into_dyn()));
            out.push(("image.hidden.weight", h.weight.view_mut().into_dyn()));
        }
        out.push(("image.projection", self.image_projection.view_mut().into_dyn()));
        out.push((LOG_TEMPERATURE, self.log_temperature.view_mut().into_dyn()));
        out.push(("text.embedding", self.text_embedding.view_mut().into_dyn()));
        if let Some(h) = &mut self.text_hidden {
            out.push(("text.hidden.bias", h.bias.view_mut().into_dyn()));
            out.push(("text.hidden.weight", h.weight.view_mut().into_dyn()));
        }
        out.push(("text.projection", self.text_projection.view_mut().into_dyn()));
        out
    }

    pub fn zeros_like(&self) -> Self {
        let z2 = |a: &Array2<F>| Array2::zeros(a.raw_dim());
        let zd = |d: &Dense<F>| Dense {
            weight: z2(&d.weight),
            bias: Array1::zeros(d.bias.len()),
        };
        TowerParams {
            text_embedding: z2(&self.text_embedding),
            text_hidden: self.text_hidden.as_ref().map(zd),
            text_projection: z2(&self.text_projection),
            image_hidden: self.image_hidden.as_ref().map(zd),
            image_projection: z2(&self.image_projection),
            log_temperature: Array1::zeros(1),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<G: Scalar>(&self) -> TowerParams<G> {
        let c2 = |a: &Array2<F>| a.mapv(|x| lit::<G>(x.to_f64().expect("finite float")));
        let c1 = |a: &Array1<F>| a.mapv(|x| lit::<G>(x.to_f64().expect("finite float")));
        let cd = |d: &Dense<F>| Dense {
            weight: c2(&d.weight),
            bias: c1(&d.bias),
        };
        TowerParams {
            text_embedding: c2(&self.text_embedding),
            text_hidden: self.text_hidden.as_ref().map(cd),
            text_projection: c2(&self.text_projection),
            image_hidden: self.image_hidden.as_ref().map(cd),
            image_projection: c2(&self.image_projection),
            log_temperature: c1(&self.log_temperature),
        }
    }
}

impl TowerParams<f32> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        for (name, t) in self.tensors() {
            let tensor = Tensor::new(t.shape().to_vec(), t.iter().copied().collect()).expect("consistent shape");
            ckpt.insert(name, tensor);
        }
        ckpt
    }

    /// Rebuilds parameters from a checkpoint. Tower depths follow from which
    /// hidden tensors are present; `expected`, when given, must match the
    /// resulting shapes.
    pub fn from_checkpoint(ckpt: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Self, TrainError> {
        let get = |name: &str, rank: usize| -> Result<ArrayD<f32>, TrainError> {
            let t = ckpt
                .get(name)
                .ok_or_else(|| TrainError::Format(format!("checkpoint lacks tensor {name:?}")))?;
            if t.shape.len() != rank {
                return Err(TrainError::ShapeMismatch(format!(
                    "{name}: rank {} where {rank} was expected",
                    t.shape.len()
                )));
            }
            Ok(ArrayD::from_shape_vec(IxDyn(&t.shape), t.data.clone()).expect("consistent shape"))
        };
        let two = |name: &str| -> Result<Array2<f32>, TrainError> {
            Ok(get(name, 2)?.into_dimensionality().expect("rank 2"))
        };
        let one = |name: &str| -> Result<Array1<f32>, TrainError> {
            Ok(get(name, 1)?.into_dimensionality().expect("rank 1"))
        };
        let dense = |prefix: &str| -> Result<Option<Dense<f32>>, TrainError> {
            let w = format!("{prefix}.hidden.weight");
            if ckpt.get(&w).is_none() {
                return Ok(None);
            }
            Ok(Some(Dense {
                weight: two(&w)?,
                bias: one(&format!("{prefix}.hidden.bias"))?,
            }))
        };

        let params = TowerParams {
            text_embedding: two("text.embedding")?,
            text_hidden: dense("text")?,
            text_projection: two("text.projection")?,
            image_hidden: dense("image")?,
            image_projection: two("image.projection")?,
            log_temperature: one(LOG_TEMPERATURE)?,
        };
        params.check_shapes()?;
        let names: Vec<&str> = params.tensors().iter().map(|(n, _)| *n).collect();
        if let Some(extra) = ckpt.names().find(|n| !names.contains(n)) {
            return Err(TrainError::Format(format!("unexpected tensor {extra:?}")));
        }
        if let Some(want) = expected {
            let got = params.config();
            if !got.same_shape(want) {
                return Err(TrainError::ShapeMismatch(format!(
                    "checkpoint has {got:?}, configuration expects {want:?}"
                )));
            }
        }
        Ok(params)
    }

    fn check_shapes(&self) -> Result<(), TrainError> {
        let mismatch = |what: &str| Err(TrainError::ShapeMismatch(what.to_string()));
        let text_in = self.text_hidden.as_ref().map_or(self.text_embedding.ncols(), |h| {
            h.bias.len()
        });
        if let Some(h) = &self.text_hidden {
            if h.weight.nrows() != self.text_embedding.ncols() || h.weight.ncols() != h.bias.len() {
                return mismatch("text hidden layer does not fit the embedding width");
            }
        }
        if self.text_projection.nrows() != text_in {
            return mismatch("text projection input width");
        }
        let image_in = self.image_hidden.as_ref().map_or(self.image_projection.nrows(), |h| h.bias.len());
        if let Some(h) = &self.image_hidden {
            if h.weight.ncols() != h.bias.len() {
                return mismatch("image hidden layer bias width");
            }
        }
        if self.image_projection.nrows() != image_in {
            return mismatch("image projection input width");
        }
        if self.image_projection.ncols() != self.text_projection.ncols() {
            return mismatch("towers project to different widths");
        }
        if self.log_temperature.len() != 1 {
            return mismatch("log temperature must hold one value");
        }
        Ok(())
    }
}
