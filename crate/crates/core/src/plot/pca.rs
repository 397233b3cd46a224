use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Principal components from the eigendecomposition of the sample
/// covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One unit-norm component per entry, by decreasing variance.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], components: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if d < components {
            return Err(Error::Config(format!(
                "PCA to {components} components needs at least {components} dimensions, got {d}"
            )));
        }
        if rows.len() < 2 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config(
                "PCA needs at least two rows of equal width".into(),
            ));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let centered = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j] - mean[j]);
        let cov = centered.transpose() * &centered / (n - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let basis = order[..components]
            .iter()
            .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
            .collect();
        let eigenvalues = order[..components]
            .iter()
            .map(|&c| eig.eigenvalues[c])
            .collect();
        Ok(Self {
            mean,
            basis,
            eigenvalues,
        })
    }

    /// Coordinates of `(x - mean)` in the basis.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Config(format!(
                "point of width {} for a basis of width {}",
                x.len(),
                self.mean.len()
            )));
        }
        Ok(self
            .basis
            .iter()
            .map(|v| {
                x.iter()
                    .zip(&self.mean)
                    .zip(v)
                    .map(|((a, m), b)| (a - m) * b)
                    .sum()
            })
            .collect())
    }
}
