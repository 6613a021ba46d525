use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SaeConfig;
use super::error::{Result, SaeError};
use super::sparsify::{sparsify_rowwise, Selection};

/// Encoder/decoder parameters of a sparse autoencoder.
///
/// Dictionary atoms are the columns of `w_dec` (`out_dim x m`) and are kept
/// at unit norm by training.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    pub config: SaeConfig,
    /// `m x input_dim`
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    /// `out_dim x m`
    pub w_dec: Array2<f64>,
    /// Output bias, also subtracted from inputs before encoding when
    /// [`SaeConfig::uses_pre_bias`] holds.
    pub b_dec: Array1<f64>,
    /// Tokens seen since each latent was last active.
    pub last_fired: Vec<u64>,
}

fn unit_gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut a = Array2::<f64>::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng));
    for mut row in a.rows_mut() {
        let n = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / n);
    }
    a
}

impl SaeModel {
    /// Seeded initialization: unit-norm random decoder columns, encoder tied
    /// to the decoder transpose, zero biases.
    pub fn init(config: SaeConfig) -> Result<Self> {
        let issues = config.validate();
        if !issues.is_empty() {
            return Err(SaeError::Config(issues));
        }
        let (d_in, d_out, m) = (config.input_dim, config.out_dim(), config.latent_dim());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let w_dec = unit_gaussian_rows(&mut rng, m, d_out).reversed_axes().as_standard_layout().to_owned();
        let w_enc = if d_in == d_out {
            w_dec.t().as_standard_layout().into_owned()
        } else {
            unit_gaussian_rows(&mut rng, m, d_in)
        };
        Ok(Self {
            w_enc,
            b_enc: Array1::zeros(m),
            w_dec,
            b_dec: Array1::zeros(d_out),
            last_fired: vec![0; m],
            config,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_enc.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w_dec.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.w_enc.nrows()
    }

    pub(crate) fn check_input(&self, found: usize) -> Result<()> {
        if found != self.input_dim() {
            return Err(SaeError::Dimension {
                what: "SAE input",
                expected: self.input_dim(),
                found,
            });
        }
        Ok(())
    }

    /// `z = W_enc (x - b_dec) + b_enc` for every row of `x`.
    pub fn encode_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let centered = if self.config.uses_pre_bias() {
            &x - &self.b_dec.view().insert_axis(Axis(0))
        } else {
            x.to_owned()
        };
        Ok(centered.dot(&self.w_enc.t()) + &self.b_enc.view().insert_axis(Axis(0)))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.encode_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// `x_hat = W_dec z_hat + b_dec` for every row.
    pub fn decode_batch(&self, codes: ArrayView2<f64>) -> Result<Array2<f64>> {
        if codes.ncols() != self.latent_dim() {
            return Err(SaeError::Dimension {
                what: "SAE code",
                expected: self.latent_dim(),
                found: codes.ncols(),
            });
        }
        Ok(codes.dot(&self.w_dec.t()) + &self.b_dec.view().insert_axis(Axis(0)))
    }

    pub fn decode(&self, code: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, code.len()), code).expect("row view");
        Ok(self.decode_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Encode and sparsify row by row (BatchTopK degrades to TopK).
    pub fn codes(&self, x: ArrayView2<f64>) -> Result<Selection> {
        let z = self.encode_batch(x)?;
        Ok(sparsify_rowwise(z.view(), &self.config))
    }

    /// Rescale every decoder column to unit norm.
    pub fn normalize_decoder(&mut self) {
        for mut col in self.w_dec.columns_mut() {
            let n = col.dot(&col).sqrt();
            if n > 0.0 {
                col.mapv_inplace(|v| v / n);
            }
        }
    }

    pub fn decoder_column_norms(&self) -> Vec<f64> {
        self.w_dec.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect()
    }

    pub fn dead_mask(&self) -> Vec<bool> {
        let threshold = self.config.effective_dead_threshold();
        self.last_fired.iter().map(|&t| t >= threshold).collect()
    }

    pub fn dead_count(&self) -> usize {
        self.dead_mask().into_iter().filter(|&d| d).count()
    }
}
