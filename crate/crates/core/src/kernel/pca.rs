use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;

/// Options for [`kernel_pca`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcaOptions {
    /// Center the kernel in feature space before decomposition.
    pub center: bool,
    /// Eigenvalues below `rank_tol * lambda_max` count as zero.
    pub rank_tol: f64,
    /// Admissible deviation from exact symmetry.
    pub symmetry_tol: f64,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            center: true,
            rank_tol: 1e-10,
            symmetry_tol: 1e-8,
        }
    }
}

/// Explicit coordinates for kernel data.
///
/// `basis` holds the eigenvectors of all nonzero eigenvalues scaled by
/// `1/sqrt(lambda)`, so a (centered) kernel row maps to coordinates by a
/// single product; only the leading `components` columns are used.
#[derive(Clone, Debug)]
pub struct PcaEmbedding {
    /// All eigenvalues, nonincreasing, clipped at zero.
    pub eigenvalues: Vec<f64>,
    /// Cumulative explained-variance fraction; entry `m-1` covers the first `m`.
    pub variance_fraction: Vec<f64>,
    /// Number of components used by projections.
    pub components: usize,
    /// Numerical rank of the (centered) kernel.
    pub rank: usize,
    basis: DMatrix<f64>,
    center: bool,
    col_means: Vec<f64>,
    grand_mean: f64,
    n: usize,
}

impl PcaEmbedding {
    pub fn dim(&self) -> usize {
        self.components
    }

    /// Smallest `m` whose cumulative variance reaches `target`.
    pub fn components_for(&self, target: f64) -> usize {
        components_for(&self.variance_fraction, target)
    }

    /// Keep the leading `m` components (at most the numerical rank).
    pub fn with_components(mut self, m: usize) -> Self {
        self.components = m.min(self.rank);
        self
    }

    /// Coordinates of a point from its kernel values against the training
    /// items (`row[j] = k(x, x_j)`) and its self kernel.
    pub fn project(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: row.len(),
            });
        }
        let centered: Vec<f64> = if self.center {
            let rm = row.iter().sum::<f64>() / self.n as f64;
            row.iter()
                .zip(&self.col_means)
                .map(|(k, cm)| k - cm - rm + self.grand_mean)
                .collect()
        } else {
            row.to_vec()
        };
        Ok((0..self.components)
            .map(|c| {
                centered
                    .iter()
                    .enumerate()
                    .map(|(j, k)| k * self.basis[(j, c)])
                    .sum()
            })
            .collect())
    }

    /// Coordinates of the training items themselves, row per item.
    pub fn training_coordinates(&self, kernel: &KernelMatrix) -> Result<Vec<Vec<f64>>> {
        (0..kernel.n())
            .map(|i| {
                let row: Vec<f64> = (0..kernel.n()).map(|j| kernel.get(i, j)).collect();
                self.project(&row)
            })
            .collect()
    }
}

fn components_for(curve: &[f64], target: f64) -> usize {
    curve
        .iter()
        .position(|v| *v >= target - 1e-12)
        .map(|i| i + 1)
        .unwrap_or(curve.len())
}

/// Eigendecomposition of the (optionally centered) kernel; keeps the fewest
/// components whose eigenvalue mass reaches `target_variance`.
pub fn kernel_pca(kernel: &KernelMatrix, target_variance: f64, opts: PcaOptions) -> Result<PcaEmbedding> {
    if !(target_variance > 0.0 && target_variance <= 1.0) {
        return Err(Error::param("target_variance", format!("{target_variance} not in (0, 1]")));
    }
    let n = kernel.n();
    if n == 0 {
        return Err(Error::Empty("kernel matrix"));
    }
    let asym = kernel.max_asymmetry();
    if asym > opts.symmetry_tol {
        return Err(Error::NotSymmetric(asym));
    }
    let mut k = DMatrix::from_fn(n, n, |i, j| 0.5 * (kernel.get(i, j) + kernel.get(j, i)));
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / n as f64).collect();
    let grand_mean = col_means.iter().sum::<f64>() / n as f64;
    if opts.center {
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] += grand_mean - col_means[i] - col_means[j];
            }
        }
    }

    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::param("kernel", "matrix has no positive spectrum"));
    }
    let cutoff = opts.rank_tol * lambda_max;
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| {
            let l = eig.eigenvalues[i];
            if l > cutoff {
                l
            } else {
                0.0
            }
        })
        .collect();
    let rank = eigenvalues.iter().take_while(|l| **l > 0.0).count();
    let total: f64 = eigenvalues.iter().sum();
    let mut acc = 0.0;
    let variance_fraction: Vec<f64> = eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            (acc / total).min(1.0)
        })
        .collect();
    let components = components_for(&variance_fraction, target_variance).min(rank);

    let basis = DMatrix::from_fn(n, rank, |j, c| {
        let idx = order[c];
        eig.eigenvectors[(j, idx)] / eigenvalues[c].sqrt()
    });
    Ok(PcaEmbedding {
        eigenvalues,
        variance_fraction,
        components,
        rank,
        basis,
        center: opts.center,
        col_means,
        grand_mean,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::rng::{gaussian_vec, RandomSource};

    fn identity(n: usize) -> KernelMatrix {
        KernelMatrix::new(n, DMatrix::<f64>::identity(n, n).as_slice().to_vec()).unwrap()
    }

    fn gram(points: &[Vec<f64>]) -> KernelMatrix {
        let n = points.len();
        let mut v = Vec::with_capacity(n * n);
        for a in points {
            for b in points {
                v.push(linalg::dot(a, b));
            }
        }
        KernelMatrix::new(n, v).unwrap()
    }

    #[test]
    fn identity_needs_three_of_four() {
        for center in [true, false] {
            let e = kernel_pca(&identity(4), 0.75, PcaOptions { center, ..Default::default() }).unwrap();
            assert_eq!(e.components, 3);
        }
    }

    #[test]
    fn rank_one_needs_one() {
        let v = [1.0, 2.0, -1.0, 0.5];
        let vals: Vec<f64> = v.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        let k = KernelMatrix::new(4, vals).unwrap();
        for center in [true, false] {
            let e = kernel_pca(&k, 0.99, PcaOptions { center, ..Default::default() }).unwrap();
            assert_eq!(e.components, 1);
            assert_eq!(e.rank, 1);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let k = KernelMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).unwrap();
        assert!(matches!(kernel_pca(&k, 0.9, PcaOptions::default()), Err(Error::NotSymmetric(_))));
        let z = KernelMatrix::new(2, vec![0.0; 4]).unwrap();
        assert!(kernel_pca(&z, 0.9, PcaOptions::default()).is_err());
    }

    #[test]
    fn curve_is_monotone_and_embedding_isometric() {
        let mut r = RandomSource::new(4).rng();
        let pts: Vec<Vec<f64>> = (0..15).map(|_| gaussian_vec(&mut r, 6)).collect();
        let k = gram(&pts);
        let e = kernel_pca(&k, 1.0, PcaOptions::default()).unwrap();
        assert!(e.variance_fraction.windows(2).all(|w| w[1] >= w[0]));
        assert!((e.variance_fraction.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(e.eigenvalues.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(e.rank, 6);
        let coords = e.training_coordinates(&k).unwrap();
        for i in 0..15 {
            for j in 0..15 {
                let got = linalg::dist(&coords[i], &coords[j]);
                assert!((got - k.feature_distance(i, j)).abs() < 1e-8);
            }
        }
    }
}
