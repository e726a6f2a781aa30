//! Clustering of incomplete data where shared missingness patterns act as
//! soft constraints.
//!
//! For each pair of rows two dissimilarities are formed: the Hamming distance
//! of their observation masks, and the squared distance over the features
//! both rows observe. Their blend `D = w·D_miss + (1 − w)·D_dist` is mapped to
//! a constraint `s = 1 − 2·sqrt(D / max D)`, and constrained k-means runs on
//! the mean-imputed data.
//!
//! By default the co-observed distance is divided by the number of shared
//! features and both parts are scaled to `[0, 1]` before blending. The
//! `paper_literal` switch blends the raw quantities instead.

use serde::{Deserialize, Serialize};

use super::{scop_kmeans, Clustering, ConstraintMatrix, ScopConfig};
use crate::data::{MaskedMatrix, Matrix};
use crate::error::{Error, Result};
use crate::imputation::mean_impute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingScopConfig {
    pub scop: ScopConfig,
    /// Weight of mask dissimilarity against co-observed distance, in `[0, 1]`.
    pub w: f64,
    pub paper_literal: bool,
}

impl Default for MissingScopConfig {
    fn default() -> Self {
        Self {
            scop: ScopConfig::default(),
            w: 0.5,
            paper_literal: false,
        }
    }
}

fn max_off_diagonal(d: &Matrix) -> f64 {
    let m = d.nrows();
    let mut max = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                max = max.max(d[(i, j)]);
            }
        }
    }
    max
}

/// Mask and co-observed distance parts of the pairwise dissimilarity, after
/// the configured normalization. Diagonals are zero.
fn dissimilarity_parts(x: &MaskedMatrix, paper_literal: bool) -> (Matrix, Matrix) {
    let m = x.nrows();
    let n = x.ncols();
    let mask = x.mask();
    let values = x.zero_filled();
    let mut d_miss = Matrix::zeros(m, m);
    let mut d_dist = Matrix::zeros(m, m);
    let mut no_overlap = Vec::new();
    let mut max_dist = 0.0f64;

    for i in 0..m {
        for j in (i + 1)..m {
            let mut hamming = 0usize;
            let mut shared = 0usize;
            let mut dist = 0.0;
            for f in 0..n {
                let (a, b) = (mask[(i, f)], mask[(j, f)]);
                if a != b {
                    hamming += 1;
                }
                if a && b {
                    shared += 1;
                    let diff = values[(i, f)] - values[(j, f)];
                    dist += diff * diff;
                }
            }
            d_miss[(i, j)] = hamming as f64;
            d_miss[(j, i)] = hamming as f64;
            if shared == 0 {
                no_overlap.push((i, j));
                continue;
            }
            if !paper_literal {
                dist /= shared as f64;
            }
            d_dist[(i, j)] = dist;
            d_dist[(j, i)] = dist;
            max_dist = max_dist.max(dist);
        }
    }
    // no shared features: treat as maximally dissimilar in data
    for (i, j) in no_overlap {
        d_dist[(i, j)] = max_dist;
        d_dist[(j, i)] = max_dist;
    }

    if !paper_literal {
        for d in [&mut d_miss, &mut d_dist] {
            let max = max_off_diagonal(d);
            if max > 0.0 {
                d.unscale_mut(max);
            }
        }
    }
    (d_miss, d_dist)
}

/// Blended pairwise dissimilarity `D = w·D_miss + (1 − w)·D_dist`.
pub fn pair_dissimilarity(x: &MaskedMatrix, w: f64, paper_literal: bool) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::validation(format!("w must lie in [0, 1], got {w}")));
    }
    let (d_miss, d_dist) = dissimilarity_parts(x, paper_literal);
    Ok(d_miss * w + d_dist * (1.0 - w))
}

/// Soft constraints `s(i,j) = 1 − 2·sqrt(D(i,j) / max D)`. When every
/// dissimilarity is zero all constraints are `+1`.
pub fn missing_scop_constraints(x: &MaskedMatrix, w: f64, paper_literal: bool) -> Result<ConstraintMatrix> {
    let d = pair_dissimilarity(x, w, paper_literal)?;
    let max = max_off_diagonal(&d);
    let s = if max > 0.0 {
        d.map(|v| (1.0 - 2.0 * (v / max).sqrt()).clamp(-1.0, 1.0))
    } else {
        Matrix::from_element(d.nrows(), d.ncols(), 1.0)
    };
    ConstraintMatrix::new(s)
}

/// Constrained k-means on incomplete data; see the module docs.
///
/// Centroids live in the space of the mean-imputed data. If all rows agree
/// in both data and mask, a single cluster is returned with a warning.
pub fn missing_scop(x: &MaskedMatrix, cfg: &MissingScopConfig) -> Result<Clustering> {
    if x.nrows() < cfg.scop.base.k {
        return Err(Error::validation(format!(
            "need at least k = {} rows, got {}",
            cfg.scop.base.k,
            x.nrows()
        )));
    }
    let s = missing_scop_constraints(x, cfg.w, cfg.paper_literal)?;
    let filled = mean_impute(x);
    if s.as_matrix().iter().all(|&v| v == 1.0) {
        let centroid = filled.row_mean();
        let mut c = Clustering::from_parts(
            vec![0; x.nrows()],
            Matrix::from_row_slice(1, x.ncols(), centroid.as_slice()),
            &filled,
        );
        c.warnings
            .push("all pairwise dissimilarities are zero; returning a single cluster".into());
        return Ok(c);
    }
    scop_kmeans(&filled, &s, &cfg.scop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Mask;
    use approx::assert_relative_eq;

    fn masked(rows: usize, cols: usize, values: &[f64], mask: &[bool]) -> MaskedMatrix {
        MaskedMatrix::new(
            Matrix::from_row_slice(rows, cols, values),
            Mask::from_row_slice(rows, cols, mask),
        )
        .unwrap()
    }

    #[test]
    fn identical_rows_get_full_positive_constraint() {
        let x = masked(
            3,
            2,
            &[1.0, 2.0, 1.0, 2.0, 5.0, 0.0],
            &[true, true, true, true, true, false],
        );
        let s = missing_scop_constraints(&x, 0.5, false).unwrap();
        assert_eq!(s.get(0, 1), 1.0);
    }

    #[test]
    fn max_pair_gets_minus_one() {
        let x = masked(3, 2, &[0.0, 0.0, 1.0, 0.0, 9.0, 9.0], &[true; 6]);
        for w in [0.0, 0.3, 1.0] {
            let s = missing_scop_constraints(&x, w, false).unwrap();
            if w < 1.0 {
                assert_eq!(s.get(0, 2), -1.0);
            }
            let min = s.as_matrix().min();
            assert!(min >= -1.0);
        }
    }

    #[test]
    fn endpoints_select_one_component() {
        let x = masked(
            3,
            3,
            &[1.0, 2.0, 0.0, 1.5, 0.0, 3.0, 4.0, 2.0, 1.0],
            &[true, true, false, true, false, true, true, true, true],
        );
        // row0 mask TTF, row1 TFT, row2 TTT
        let d0 = pair_dissimilarity(&x, 0.0, false).unwrap();
        let d1 = pair_dissimilarity(&x, 1.0, false).unwrap();
        // hamming: (0,1)=2, (0,2)=1, (1,2)=1, normalized by 2
        assert_relative_eq!(d1[(0, 1)], 1.0);
        assert_relative_eq!(d1[(0, 2)], 0.5);
        assert_relative_eq!(d1[(1, 2)], 0.5);
        // co-observed per feature: (0,1): f0 → 0.25/1; (0,2): f0,f1 → (9+0)/2; (1,2): f0,f2 → (6.25+4)/2
        let raw = [0.25, 4.5, 5.125];
        assert_relative_eq!(d0[(0, 1)], raw[0] / 5.125);
        assert_relative_eq!(d0[(0, 2)], raw[1] / 5.125);
        assert_relative_eq!(d0[(1, 2)], 1.0);
    }

    #[test]
    fn paper_literal_uses_raw_sums() {
        let x = masked(2, 2, &[1.0, 0.0, 4.0, 2.0], &[true, false, true, true]);
        let d = pair_dissimilarity(&x, 0.25, true).unwrap();
        // hamming 1, co-observed squared distance 9
        assert_relative_eq!(d[(0, 1)], 0.25 * 1.0 + 0.75 * 9.0);
    }

    #[test]
    fn disjoint_masks_use_max_distance() {
        let x = masked(
            3,
            2,
            &[1.0, 0.0, 0.0, 5.0, 3.0, 9.0],
            &[true, false, false, true, true, true],
        );
        let d = pair_dissimilarity(&x, 0.0, true).unwrap();
        // (0,2): 4, (1,2): 16, (0,1): no overlap → 16
        assert_eq!(d[(0, 1)], 16.0);
    }

    #[test]
    fn degenerate_input_single_cluster() {
        let x = masked(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0], &[true; 6]);
        let cfg = MissingScopConfig::default();
        let c = missing_scop(&x, &cfg).unwrap();
        assert_eq!(c.k, 1);
        assert!(c.labels.iter().all(|&l| l == 0));
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn rejects_w_out_of_range() {
        let x = masked(2, 1, &[1.0, 2.0], &[true, true]);
        assert!(pair_dissimilarity(&x, 1.5, false).is_err());
    }

    #[test]
    fn mask_only_recovers_pattern_groups() {
        // two groups that differ only in which feature is missing
        let values = [1.0, 0.0, 1.1, 0.0, 0.9, 0.0, 0.0, 1.0, 0.0, 1.2, 0.0, 0.8];
        let mask = [
            true, false, true, false, true, false, false, true, false, true, false, true,
        ];
        let x = masked(6, 2, &values, &mask);
        let cfg = MissingScopConfig {
            w: 1.0,
            scop: ScopConfig {
                base: super::super::KmeansConfig::new(2, 1),
                penalty_scale: Some(1.0),
                ..ScopConfig::default()
            },
            ..MissingScopConfig::default()
        };
        let c = missing_scop(&x, &cfg).unwrap();
        assert_eq!(c.labels[0], c.labels[1]);
        assert_eq!(c.labels[1], c.labels[2]);
        assert_eq!(c.labels[3], c.labels[4]);
        assert_ne!(c.labels[0], c.labels[3]);
    }
}
