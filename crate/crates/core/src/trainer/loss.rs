use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::params::{lit, Scalar};
use super::TrainError;

/// Loss value, its two directional terms, and gradients for every input.
#[derive(Debug, Clone)]
pub struct InfoNce<F> {
    pub loss: F,
    /// Mean image→text cross-entropy over N + M text columns.
    pub image_to_text: F,
    /// Mean text→image cross-entropy over N image rows.
    pub text_to_image: F,
    pub d_images: Array2<F>,
    pub d_texts: Array2<F>,
    pub d_negatives: Array2<F>,
    pub d_log_temperature: F,
    /// Gradient of the loss w.r.t. the image→text logits, N × (N + M).
    pub d_logits_i2t: Array2<F>,
    /// Gradient of the loss w.r.t. the text→image logits, N × N, one row
    /// per text.
    pub d_logits_t2i: Array2<F>,
}

/// Replaces `logits` with softmax minus the one-hot target and returns the
/// cross-entropy.
fn softmax_ce<F: Scalar>(logits: &mut [F], target: usize) -> F {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let shifted_target = logits[target] - max;
    let mut sum = F::zero();
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in logits.iter_mut() {
        *x /= sum;
    }
    logits[target] -= F::one();
    sum.ln() - shifted_target
}

/// Symmetric InfoNCE with hard text negatives appended to the image→text
/// direction only. Rows must be unit-norm; logits are
/// `exp(log_temperature) · cosine`.
pub fn info_nce<F: Scalar>(
    images: ArrayView2<F>,
    texts: ArrayView2<F>,
    negatives: ArrayView2<F>,
    log_temperature: F,
) -> Result<InfoNce<F>, TrainError> {
    let n = images.nrows();
    if n < 2 {
        return Err(TrainError::DegenerateBatch(n));
    }
    if texts.nrows() != n {
        return Err(TrainError::ShapeMismatch(format!("{n} images but {} texts", texts.nrows())));
    }
    let m = negatives.nrows();
    let d = images.ncols();
    if texts.ncols() != d || (m > 0 && negatives.ncols() != d) {
        return Err(TrainError::ShapeMismatch("embedding widths differ".to_string()));
    }
    let columns = if m > 0 {
        concatenate(Axis(0), &[texts, negatives]).expect("same width")
    } else {
        texts.to_owned()
    };
    let sims = images.dot(&columns.t());
    let scale = log_temperature.exp();
    let logits = sims.mapv(|s| s * scale);
    let inv_n = F::one() / lit::<F>(n as f64);
    let half = lit::<F>(0.5);

    let mut g_i2t = logits.clone();
    let mut i2t = F::zero();
    for (i, mut row) in g_i2t.rows_mut().into_iter().enumerate() {
        i2t += softmax_ce(row.as_slice_mut().expect("standard layout"), i);
    }
    let mut g_t2i = logits.slice(ndarray::s![.., ..n]).t().as_standard_layout().into_owned();
    let mut t2i = F::zero();
    for (j, mut row) in g_t2i.rows_mut().into_iter().enumerate() {
        t2i += softmax_ce(row.as_slice_mut().expect("standard layout"), j);
    }
    let i2t = i2t * inv_n;
    let t2i = t2i * inv_n;
    let weight = half * inv_n;
    g_i2t.mapv_inplace(|g| g * weight);
    g_t2i.mapv_inplace(|g| g * weight);

    let mut g = g_i2t.clone();
    g.slice_mut(ndarray::s![.., ..n]).scaled_add(F::one(), &g_t2i.t());
    let d_scale = (&g * &sims).sum();
    let d_sims = g.mapv(|x| x * scale);
    let d_images = d_sims.dot(&columns);
    let d_columns = d_sims.t().dot(&images);
    let d_texts = d_columns.slice(ndarray::s![..n, ..]).to_owned();
    let d_negatives = d_columns.slice(ndarray::s![n.., ..]).to_owned();

    Ok(InfoNce {
        loss: half * (i2t + t2i),
        image_to_text: i2t,
        text_to_image: t2i,
        d_images,
        d_texts,
        d_negatives,
        d_log_temperature: d_scale * scale,
        d_logits_i2t: g_i2t,
        d_logits_t2i: g_t2i,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn unit_rows(raw: Vec<f64>, d: usize) -> Array2<f64> {
        let mut m = Array2::from_shape_vec((raw.len() / d, d), raw).unwrap();
        for mut r in m.rows_mut() {
            let n = r.dot(&r).sqrt().max(1e-9);
            r.mapv_inplace(|x| x / n);
        }
        m
    }

    #[test]
    fn uniform_similarities_give_ln_n() {
        for n in [2usize, 8, 64] {
            let e = Array2::from_elem((n, 3), 1.0 / 3f64.sqrt());
            for lt in [-1.0, 0.0, 2.5] {
                let out = info_nce(e.view(), e.view(), Array2::zeros((0, 3)).view(), lt).unwrap();
                assert!((out.loss - (n as f64).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_orthogonal_pairs() {
        let e = array![[1.0, 0.0], [0.0, 1.0]];
        let out = info_nce(e.view(), e.view(), Array2::zeros((0, 2)).view(), 0.0).unwrap();
        let oracle = (1.0 + (-1.0f64).exp()).ln();
        assert!((out.loss - oracle).abs() < 1e-12);
        assert!((out.loss - 0.31326).abs() < 1e-5);
    }

    #[test]
    fn needs_two_pairs() {
        let e = array![[1.0, 0.0]];
        let err = info_nce(e.view(), e.view(), Array2::zeros((0, 2)).view(), 0.0).unwrap_err();
        assert!(matches!(err, TrainError::DegenerateBatch(1)));
    }

    fn batch() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, Array2<f64>, f64)> {
        (2usize..6, 0usize..6, 2usize..5).prop_flat_map(|(n, m, d)| {
            let m = m.min(n);
            (
                prop::collection::vec(-1.0f64..1.0, n * d),
                prop::collection::vec(-1.0f64..1.0, n * d),
                prop::collection::vec(-1.0f64..1.0, m * d),
                -1.0f64..3.0,
            )
                .prop_map(move |(a, b, c, lt)| (unit_rows(a, d), unit_rows(b, d), unit_rows(c, d).into_shape_with_order((m, d)).unwrap(), lt))
        })
    }

    proptest! {
        #[test]
        fn logit_gradient_rows_sum_to_zero((v, t, neg, lt) in batch()) {
            let out = info_nce(v.view(), t.view(), neg.view(), lt).unwrap();
            for row in out.d_logits_i2t.rows().into_iter().chain(out.d_logits_t2i.rows()) {
                prop_assert!(row.sum().abs() < 1e-12);
            }
        }

        #[test]
        fn invariant_under_pair_permutation((v, t, neg, lt) in batch(), shift in 1usize..5) {
            let n = v.nrows();
            let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let pv = v.select(Axis(0), &order);
            let pt = t.select(Axis(0), &order);
            let a = info_nce(v.view(), t.view(), neg.view(), lt).unwrap().loss;
            let b = info_nce(pv.view(), pt.view(), neg.view(), lt).unwrap().loss;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn negatives_never_lower_image_to_text((v, t, neg, lt) in batch()) {
            let d = v.ncols();
            let without = info_nce(v.view(), t.view(), Array2::zeros((0, d)).view(), lt).unwrap();
            let with = info_nce(v.view(), t.view(), neg.view(), lt).unwrap();
            prop_assert!(with.image_to_text >= without.image_to_text);
            prop_assert!((with.text_to_image - without.text_to_image).abs() < 1e-12);
        }
    }
}
