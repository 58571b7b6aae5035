use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::{lit, Scalar, TowerParams};
use super::vocab::PAD;
use super::TrainError;

/// Rows with a pre-normalization norm below this are rejected.
pub const MIN_NORM: f64 = 1e-12;

/// Intermediate values of a text-tower forward pass over a batch.
#[derive(Debug, Clone)]
pub struct TextForward<F> {
    /// Token ids actually embedded (`[PAD]` for empty sequences).
    ids: Vec<Vec<u32>>,
    /// Pooled embeddings, B × d_t.
    pooled: Array2<F>,
    /// Hidden activations after tanh, B × h (depth 1 only).
    hidden: Option<Array2<F>>,
    norms: Array1<F>,
    /// Unit-norm outputs, B × d.
    pub embeddings: Array2<F>,
}

/// Intermediate values of an image-tower forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ImageForward<F> {
    inputs: Array2<F>,
    hidden: Option<Array2<F>>,
    norms: Array1<F>,
    pub embeddings: Array2<F>,
}

/// Pooling weight of the token at `position`. Depth 0 pools uniformly, depth 1
/// down-weights later tokens so that order changes the pooled vector.
fn position_weight<F: Scalar>(depth1: bool, position: usize) -> F {
    if depth1 {
        F::one() / lit::<F>((1 + position) as f64)
    } else {
        F::one()
    }
}

fn normalize_rows<F: Scalar>(u: Array2<F>) -> Result<(Array2<F>, Array1<F>), TrainError> {
    let norms = u.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|n| !(n.to_f64().unwrap_or(0.0) >= MIN_NORM)) {
        return Err(TrainError::DegenerateEmbedding(format!("row {i} has norm {:?}", norms[i].to_f64())));
    }
    let mut e = u;
    Zip::from(e.rows_mut()).and(&norms).for_each(|mut row, &n| row.mapv_inplace(|x| x / n));
    Ok((e, norms))
}

/// Backward through row-wise L2 normalization: `du = (de − e(e·de)) / |u|`.
fn normalize_backward<F: Scalar>(e: &Array2<F>, norms: &Array1<F>, de: ArrayView2<F>) -> Array2<F> {
    let mut du = de.to_owned();
    Zip::from(du.rows_mut())
        .and(e.rows())
        .and(norms)
        .for_each(|mut g, row, &n| {
            let dot = row.dot(&g);
            Zip::from(&mut g).and(&row).for_each(|g, &x| *g = (*g - x * dot) / n);
        });
    du
}

impl<F: Scalar> TowerParams<F> {
    /// Encodes token sequences. An empty sequence embeds the pad id.
    pub fn text_forward(&self, sequences: &[&[u32]]) -> Result<TextForward<F>, TrainError> {
        let vocab = self.text_embedding.nrows();
        let depth1 = self.text_hidden.is_some();
        let mut ids = Vec::with_capacity(sequences.len());
        let mut pooled = Array2::zeros((sequences.len(), self.text_embedding.ncols()));
        for (seq, mut row) in sequences.iter().zip(pooled.rows_mut()) {
            let seq: Vec<u32> = if seq.is_empty() { vec![PAD] } else { seq.to_vec() };
            if let Some(&bad) = seq.iter().find(|&&t| t as usize >= vocab) {
                return Err(TrainError::TokenOutOfRange { token: bad, vocab });
            }
            let n = lit::<F>(seq.len() as f64);
            for (i, &t) in seq.iter().enumerate() {
                let w = position_weight::<F>(depth1, i) / n;
                row.scaled_add(w, &self.text_embedding.row(t as usize));
            }
            ids.push(seq);
        }
        let hidden = self.text_hidden.as_ref().map(|h| {
            let mut z = pooled.dot(&h.weight) + &h.bias;
            z.mapv_inplace(F::tanh);
            z
        });
        let u = hidden.as_ref().unwrap_or(&pooled).dot(&self.text_projection);
        let (embeddings, norms) = normalize_rows(u)?;
        Ok(TextForward {
            ids,
            pooled,
            hidden,
            norms,
            embeddings,
        })
    }

    /// Accumulates parameter gradients given `d_embeddings` (B × d).
    pub fn text_backward(&self, fwd: &TextForward<F>, d_embeddings: ArrayView2<F>, grads: &mut TowerParams<F>) {
        let du = normalize_backward(&fwd.embeddings, &fwd.norms, d_embeddings);
        let input = fwd.hidden.as_ref().unwrap_or(&fwd.pooled);
        grads.text_projection += &input.t().dot(&du);
        let mut d_input = du.dot(&self.text_projection.t());
        if let (Some(h), Some(z)) = (&self.text_hidden, &fwd.hidden) {
            Zip::from(&mut d_input).and(z).for_each(|g, &z| *g = *g * (F::one() - z * z));
            let gh = grads.text_hidden.as_mut().expect("gradient layout matches parameters");
            gh.weight += &fwd.pooled.t().dot(&d_input);
            gh.bias += &d_input.sum_axis(Axis(0));
            d_input = d_input.dot(&h.weight.t());
        }
        let depth1 = self.text_hidden.is_some();
        for (seq, g) in fwd.ids.iter().zip(d_input.rows()) {
            let n = lit::<F>(seq.len() as f64);
            for (i, &t) in seq.iter().enumerate() {
                let w = position_weight::<F>(depth1, i) / n;
                grads.text_embedding.row_mut(t as usize).scaled_add(w, &g);
            }
        }
    }

    /// Encodes image feature rows (B × d_img).
    pub fn image_forward(&self, features: ArrayView2<F>) -> Result<ImageForward<F>, TrainError> {
        let d_img = self
            .image_hidden
            .as_ref()
            .map_or(self.image_projection.nrows(), |h| h.weight.nrows());
        if features.ncols() != d_img {
            return Err(TrainError::DimensionMismatch {
                expected: d_img,
                got: features.ncols(),
            });
        }
        let inputs = features.to_owned();
        let hidden = self.image_hidden.as_ref().map(|h| {
            let mut z = inputs.dot(&h.weight) + &h.bias;
            z.mapv_inplace(F::tanh);
            z
        });
        let u = hidden.as_ref().unwrap_or(&inputs).dot(&self.image_projection);
        let (embeddings, norms) = normalize_rows(u)?;
        Ok(ImageForward {
            inputs,
            hidden,
            norms,
            embeddings,
        })
    }

    pub fn image_backward(&self, fwd: &ImageForward<F>, d_embeddings: ArrayView2<F>, grads: &mut TowerParams<F>) {
        let du = normalize_backward(&fwd.embeddings, &fwd.norms, d_embeddings);
        let input = fwd.hidden.as_ref().unwrap_or(&fwd.inputs);
        grads.image_projection += &input.t().dot(&du);
        if let (Some(z), Some(gh)) = (&fwd.hidden, grads.image_hidden.as_mut()) {
            let mut d_hidden = du.dot(&self.image_projection.t());
            Zip::from(&mut d_hidden).and(z).for_each(|g, &z| *g = *g * (F::one() - z * z));
            gh.weight += &fwd.inputs.t().dot(&d_hidden);
            gh.bias += &d_hidden.sum_axis(Axis(0));
        }
    }

    /// Unit-norm embedding of one token sequence.
    pub fn encode_text(&self, tokens: &[u32]) -> Result<Array1<F>, TrainError> {
        Ok(self.text_forward(&[tokens])?.embeddings.row(0).to_owned())
    }

    /// Unit-norm embedding of one feature vector.
    pub fn encode_image(&self, features: ArrayView1<F>) -> Result<Array1<F>, TrainError> {
        let x = features.insert_axis(Axis(0));
        Ok(self.image_forward(x)?.embeddings.row(0).to_owned())
    }
}

/// Splits a stacked gradient matrix at row `n`.
pub(crate) fn split_rows<F: Scalar>(m: &Array2<F>, n: usize) -> (ArrayView2<'_, F>, ArrayView2<'_, F>) {
    (m.slice(s![..n, ..]), m.slice(s![n.., ..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::ModelConfig;
    use ndarray::array;
    use proptest::prelude::*;

    fn params(text_depth: u8, image_depth: u8) -> TowerParams<f64> {
        let config = ModelConfig {
            vocab_size: 12,
            d_t: 6,
            d: 5,
            d_img: 4,
            text_depth,
            text_hidden: 7,
            image_depth,
            image_hidden: 3,
        };
        TowerParams::init(&config, 11).unwrap()
    }

    #[test]
    fn depth0_is_order_free_and_depth1_is_not() {
        let p0 = params(0, 0);
        let ab = p0.encode_text(&[3, 4]).unwrap();
        let ba = p0.encode_text(&[4, 3]).unwrap();
        assert_eq!(ab, ba);
        let p1 = params(1, 0);
        let ab = p1.encode_text(&[3, 4]).unwrap();
        let ba = p1.encode_text(&[4, 3]).unwrap();
        assert!((&ab - &ba).iter().any(|x| x.abs() > 1e-6));
    }

    #[test]
    fn single_token_is_normalized_projected_row() {
        let p = params(0, 0);
        let got = p.encode_text(&[5]).unwrap();
        let u = p.text_embedding.row(5).dot(&p.text_projection);
        let want = &u / u.dot(&u).sqrt();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_sequence_embeds_pad() {
        let p = params(1, 0);
        assert_eq!(p.encode_text(&[]).unwrap(), p.encode_text(&[PAD]).unwrap());
    }

    #[test]
    fn errors() {
        let p = params(0, 0);
        assert!(matches!(p.encode_text(&[12]), Err(TrainError::TokenOutOfRange { token: 12, vocab: 12 })));
        let x = array![1.0, 2.0, 3.0];
        assert!(matches!(p.encode_image(x.view()), Err(TrainError::DimensionMismatch { expected: 4, got: 3 })));
        let mut z = p.clone();
        z.image_projection.fill(0.0);
        let x = array![0.0, 0.0, 0.0, 0.0];
        assert!(matches!(z.encode_image(x.view()), Err(TrainError::DegenerateEmbedding(_))));
    }

    #[test]
    fn linear_image_tower() {
        let p = params(0, 0);
        let x = array![0.5, -1.0, 2.0, 0.25];
        let u = x.dot(&p.image_projection);
        let want = &u / u.dot(&u).sqrt();
        let got = p.encode_image(x.view()).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn outputs_are_unit_norm(tokens in prop::collection::vec(0u32..12, 0..9), x in prop::collection::vec(-3.0f64..3.0, 4), depth in 0u8..2) {
            let p = params(depth, depth);
            let t = p.encode_text(&tokens).unwrap();
            prop_assert!((t.dot(&t).sqrt() - 1.0).abs() < 1e-6);
            if x.iter().any(|v| v.abs() > 1e-3) {
                let x = Array1::from(x);
                let i = p.encode_image(x.view()).unwrap();
                prop_assert!((i.dot(&i).sqrt() - 1.0).abs() < 1e-6);
            }
        }
    }
}
