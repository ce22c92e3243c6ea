//! Feature-map rank profiles.
//!
//! Each `H×W` activation slice is treated as a matrix; its numerical rank is
//! the number of singular values above a tolerance. Ranks are averaged over
//! the batch, then over four contiguous channel quarters.

use alloc::vec::Vec;

use crate::tensor::DenseTensor;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Singular values of a row-major `rows × cols` matrix, descending.
///
/// One-sided Jacobi: columns are rotated pairwise until mutually
/// orthogonal; the column norms are then the singular values.
pub fn singular_values(matrix: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), rows * cols, "matrix length does not match dims");
    // Work on the orientation with fewer columns; the spectrum is unchanged.
    let (m, n, mut a) = if cols <= rows {
        (rows, cols, column_major(matrix, rows, cols))
    } else {
        (cols, rows, matrix.to_vec())
    };

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (a[p * m + i], a[q * m + i]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || libm::fabs(gamma) <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (a[p * m + i], a[q * m + i]);
                    a[p * m + i] = c * x - s * y;
                    a[q * m + i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..n)
        .map(|j| libm::sqrt(a[j * m..(j + 1) * m].iter().map(|v| v * v).sum()))
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

fn column_major(matrix: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out.push(matrix[i * cols + j]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankTolerance {
    /// `max(rows, cols) · ε · σ_max`.
    Standard,
    Absolute(f64),
}

impl RankTolerance {
    fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            RankTolerance::Standard => rows.max(cols) as f64 * f64::EPSILON * sigma_max,
            RankTolerance::Absolute(tol) => tol,
        }
    }
}

pub fn numerical_rank(matrix: &[f64], rows: usize, cols: usize, tol: RankTolerance) -> usize {
    let sv = singular_values(matrix, rows, cols);
    let Some(&sigma_max) = sv.first() else {
        return 0;
    };
    let threshold = tol.threshold(rows, cols, sigma_max);
    sv.iter().filter(|&&s| s > threshold && s > 0.0).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    /// Batch-averaged rank of every channel.
    pub per_channel_rank: Vec<f64>,
    /// Means over channels `[q·C/4, (q+1)·C/4)` for q = 0..4.
    pub quarter_means: [f64; 4],
}

pub fn feature_map_ranks(activations: &DenseTensor<f64>, tol: RankTolerance) -> Result<RankProfile> {
    let [n, c, h, w] = activations.dims();
    if h == 0 || w == 0 {
        return Err(Error::DegenerateShape(alloc::format!("feature maps are {h}x{w}")));
    }
    if n == 0 {
        return Err(Error::DegenerateShape("empty batch".into()));
    }
    if c < 4 {
        return Err(Error::DegenerateShape(alloc::format!(
            "{c} channels cannot be split into quarters"
        )));
    }
    let plane = h * w;
    let per_channel_rank: Vec<f64> = (0..c)
        .map(|ch| {
            let total: usize = (0..n)
                .map(|b| {
                    let start = activations.offset(b, ch, 0, 0);
                    numerical_rank(&activations.values()[start..start + plane], h, w, tol)
                })
                .sum();
            total as f64 / n as f64
        })
        .collect();
    let quarter_means = core::array::from_fn(|q| {
        let (lo, hi) = (q * c / 4, (q + 1) * c / 4);
        per_channel_rank[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    });
    Ok(RankProfile {
        per_channel_rank,
        quarter_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Rank by Gaussian elimination with partial pivoting.
    fn elimination_rank(matrix: &[f64], rows: usize, cols: usize, tol: f64) -> usize {
        let mut a = matrix.to_vec();
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let pivot = (rank..rows)
                .max_by(|&i, &j| a[i * cols + col].abs().total_cmp(&a[j * cols + col].abs()))
                .unwrap();
            if a[pivot * cols + col].abs() <= tol {
                continue;
            }
            for j in 0..cols {
                a.swap(rank * cols + j, pivot * cols + j);
            }
            for i in rank + 1..rows {
                let f = a[i * cols + col] / a[rank * cols + col];
                for j in col..cols {
                    a[i * cols + j] -= f * a[rank * cols + j];
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn known_spectra() {
        let diag = [3.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let sv = singular_values(&diag, 2, 3);
        assert!((sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 2.0).abs() < 1e-12);
        // [[1,1],[1,1]] has singular values 2 and 0
        let sv = singular_values(&[1.0, 1.0, 1.0, 1.0], 2, 2);
        assert!((sv[0] - 2.0).abs() < 1e-12 && sv[1].abs() < 1e-12);
        assert_eq!(numerical_rank(&[1.0, 1.0, 1.0, 1.0], 2, 2, RankTolerance::Standard), 1);
    }

    #[test]
    fn zero_activations_have_rank_zero() {
        let acts = DenseTensor::<f64>::zeros([2, 4, 5, 5]);
        let p = feature_map_ranks(&acts, RankTolerance::Standard).unwrap();
        assert!(p.per_channel_rank.iter().all(|&r| r == 0.0));
        assert_eq!(p.quarter_means, [0.0; 4]);
    }

    #[test]
    fn identity_slices_have_full_rank() {
        let acts = DenseTensor::from_fn([3, 4, 6, 6], |_, _, h, w| if h == w { 1.0 } else { 0.0 });
        let p = feature_map_ranks(&acts, RankTolerance::Standard).unwrap();
        assert!(p.per_channel_rank.iter().all(|&r| r == 6.0));
    }

    #[test]
    fn random_slices_match_elimination_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let acts = DenseTensor::from_fn([4, 8, 8, 8], |_, _, _, _| rng.gen_range(-1.0..1.0));
        let p = feature_map_ranks(&acts, RankTolerance::Standard).unwrap();
        for (ch, &r) in p.per_channel_rank.iter().enumerate() {
            assert_eq!(r, 8.0);
            let start = acts.offset(0, ch, 0, 0);
            assert_eq!(elimination_rank(&acts.values()[start..start + 64], 8, 8, 1e-9), 8);
        }
    }

    #[test]
    fn low_rank_products_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for case in 0..40 {
            let (rows, cols) = (rng.gen_range(1..9), rng.gen_range(1..9));
            let k = rng.gen_range(0..=rows.min(cols));
            // integer factors keep the elimination oracle well conditioned
            let u: Vec<f64> = (0..rows * k).map(|_| rng.gen_range(-4..=4) as f64).collect();
            let v: Vec<f64> = (0..k * cols).map(|_| rng.gen_range(-4..=4) as f64).collect();
            let m: Vec<f64> = (0..rows * cols)
                .map(|idx| {
                    let (i, j) = (idx / cols, idx % cols);
                    (0..k).map(|t| u[i * k + t] * v[t * cols + j]).sum()
                })
                .collect();
            let expected = elimination_rank(&m, rows, cols, 1e-7);
            assert_eq!(numerical_rank(&m, rows, cols, RankTolerance::Standard), expected, "case {case}");
            let mut t = vec![0.0; rows * cols];
            for i in 0..rows {
                for j in 0..cols {
                    t[j * rows + i] = m[i * cols + j];
                }
            }
            assert_eq!(numerical_rank(&t, cols, rows, RankTolerance::Standard), expected);
        }
    }

    #[test]
    fn quarter_means_are_contiguous() {
        // channel c gets rank c % 5 + 1 via a diagonal with that many ones
        let acts = DenseTensor::from_fn([1, 8, 6, 6], |_, c, h, w| {
            if h == w && h < c % 5 + 1 {
                1.0
            } else {
                0.0
            }
        });
        let p = feature_map_ranks(&acts, RankTolerance::Standard).unwrap();
        assert_eq!(p.per_channel_rank, vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 2.0, 3.0]);
        assert_eq!(p.quarter_means, [1.5, 3.5, 3.0, 2.5]);
    }

    proptest::proptest! {
        #[test]
        fn rank_is_bounded_and_transpose_invariant(seed in proptest::prelude::any::<u64>(), h in 1usize..10, w in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.gen_range(0..=h.min(w));
            // rank-k product of integer factors
            let u: Vec<f64> = (0..h * k).map(|_| rng.gen_range(-3..=3) as f64).collect();
            let v: Vec<f64> = (0..k * w).map(|_| rng.gen_range(-3..=3) as f64).collect();
            let acts = DenseTensor::from_fn([1, 4, h, w], |_, c, y, x| {
                (0..k).map(|t| u[y * k + t] * v[t * w + x]).sum::<f64>() * (c + 1) as f64
            });
            let p = feature_map_ranks(&acts, RankTolerance::Standard).unwrap();
            let t = DenseTensor::from_fn([1, 4, w, h], |b, c, y, x| acts.get(b, c, x, y));
            let pt = feature_map_ranks(&t, RankTolerance::Standard).unwrap();
            for (&r, &rt) in p.per_channel_rank.iter().zip(&pt.per_channel_rank) {
                proptest::prop_assert!(r <= k as f64 && r <= h.min(w) as f64);
                proptest::prop_assert_eq!(r, rt);
            }
        }
    }

    #[test]
    fn degenerate_shapes() {
        let acts = DenseTensor::<f64>::zeros([1, 4, 0, 3]);
        assert!(matches!(feature_map_ranks(&acts, RankTolerance::Standard), Err(Error::DegenerateShape(_))));
        let acts = DenseTensor::<f64>::zeros([1, 3, 2, 2]);
        assert!(feature_map_ranks(&acts, RankTolerance::Standard).is_err());
    }
}
