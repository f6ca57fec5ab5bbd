use nalgebra::DMatrix;

use super::{CirculantOperator, LinearOperator};
use crate::error::{check_len, MsgpError, Result};

/// Symmetric Toeplitz matrix `T[i, j] = t[|i - j|]`.
///
/// Products go through a circulant embedding of length at least `2m - 1`:
/// `v` is zero-padded, multiplied by the circulant via FFT and truncated.
#[derive(Clone, Debug)]
pub struct ToeplitzOperator {
    first_column: Vec<f64>,
    embedding: CirculantOperator,
}

impl ToeplitzOperator {
    /// Embeds into the next power of two at or above `2m - 1`.
    pub fn new(first_column: Vec<f64>) -> Result<Self> {
        let m = first_column.len();
        let len = (2 * m).saturating_sub(1).max(1).next_power_of_two();
        Self::with_embedding_len(first_column, len)
    }

    /// Embedding of the minimal length `2m - 1`.
    pub fn minimal(first_column: Vec<f64>) -> Result<Self> {
        let len = (2 * first_column.len()).saturating_sub(1).max(1);
        Self::with_embedding_len(first_column, len)
    }

    pub fn with_embedding_len(first_column: Vec<f64>, len: usize) -> Result<Self> {
        let m = first_column.len();
        if m == 0 {
            return Err(MsgpError::InvalidArgument("empty Toeplitz column".into()));
        }
        if len < 2 * m - 1 {
            return Err(MsgpError::InvalidArgument(format!(
                "circulant embedding of length {len} is too short for a {m}x{m} Toeplitz matrix"
            )));
        }
        // c = [t_0, ..., t_{m-1}, 0, ..., 0, t_{m-1}, ..., t_1]
        let mut c = vec![0.0; len];
        c[..m].copy_from_slice(&first_column);
        for k in 1..m {
            c[len - k] = first_column[k];
        }
        Ok(Self {
            embedding: CirculantOperator::new(c)?,
            first_column,
        })
    }

    pub fn first_column(&self) -> &[f64] {
        &self.first_column
    }

    pub fn embedding(&self) -> &CirculantOperator {
        &self.embedding
    }
}

impl LinearOperator for ToeplitzOperator {
    fn dim(&self) -> usize {
        self.first_column.len()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        check_len(m, v.len())?;
        let mut padded = vec![0.0; self.embedding.dim()];
        padded[..m].copy_from_slice(v);
        let mut out = self.embedding.apply(&padded)?;
        out.truncate(m);
        Ok(out)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| self.first_column[i.abs_diff(j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn se_column(m: usize, ell: f64) -> Vec<f64> {
        (0..m).map(|i| (-0.5 * (i as f64 / ell).powi(2)).exp()).collect()
    }

    #[test]
    fn two_by_two() {
        let t = ToeplitzOperator::new(vec![1.0, 0.5]).unwrap();
        assert!(rel_err(&t.apply(&[1.0, 1.0]).unwrap(), &[1.5, 1.5]) < 1e-14);
    }

    #[test]
    fn identity_column_any_size() {
        for m in [1, 2, 7, 33] {
            let mut col = vec![0.0; m];
            col[0] = 1.0;
            let t = ToeplitzOperator::new(col).unwrap();
            let v: Vec<f64> = (0..m).map(|i| i as f64 - 3.0).collect();
            let out = t.apply(&v).unwrap();
            for (a, b) in out.iter().zip(&v) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn se_column_64_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = ToeplitzOperator::new(se_column(64, 5.0)).unwrap();
        let v = random_vec(&mut rng, 64);
        assert!(rel_err(&t.apply(&v).unwrap(), &dense_mul(&t.to_dense(), &v)) < 1e-10);
    }

    #[test]
    fn embedding_length_does_not_change_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let col = se_column(50, 4.0);
        let v = random_vec(&mut rng, 50);
        let a = ToeplitzOperator::minimal(col.clone()).unwrap().apply(&v).unwrap();
        let b = ToeplitzOperator::new(col.clone()).unwrap().apply(&v).unwrap();
        let c = ToeplitzOperator::with_embedding_len(col, 301).unwrap().apply(&v).unwrap();
        assert!(rel_err(&a, &b) < 1e-10);
        assert!(rel_err(&a, &c) < 1e-10);
    }

    #[test]
    fn short_embedding_rejected() {
        assert!(ToeplitzOperator::with_embedding_len(vec![1.0, 0.5, 0.2], 4).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_the_vector(seed in 0u64..1000, m in 1usize..80) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = ToeplitzOperator::new(se_column(m, 3.0)).unwrap();
            let v1 = random_vec(&mut rng, m);
            let v2 = random_vec(&mut rng, m);
            let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
            let lhs = t.apply(&sum).unwrap();
            let rhs: Vec<f64> = t.apply(&v1).unwrap().iter().zip(t.apply(&v2).unwrap()).map(|(a, b)| a + b).collect();
            prop_assert!(rel_err(&lhs, &rhs) < 1e-10);
        }
    }
}
