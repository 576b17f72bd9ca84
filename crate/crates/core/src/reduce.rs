//! Principal component analysis with elbow-based choice of the reduced
//! dimension.
//!
//! Components are eigenvectors of the sample covariance (denominator
//! `N - 1`) of the mean-centred data, ordered by decreasing eigenvalue. Each
//! component's sign is fixed so that its largest-magnitude coordinate is
//! positive, which makes fitted models reproducible bit for bit.

use std::io;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::sig9;

/// Rows are points in principal-component coordinates.
pub type ReducedMatrix = Array2<f64>;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("PCA needs at least 2 rows and 1 column, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("all rows are identical; the data has no variance")]
    RankZero,
    #[error("data contains non-finite values")]
    NonFinite,
    #[error("data has {found} columns but the model was fitted on {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("requested {requested} components, model has {available}")]
    DprimeOutOfRange { requested: usize, available: usize },
    #[error("cumulative explained variance curve needs at least 3 points, got {0}")]
    CurveTooShort(usize),
    #[error("cumulative explained variance curve is not nondecreasing at index {0}")]
    CurveNotMonotone(usize),
    #[error("cumulative explained variance curve has no elbow (it is constant or a straight line)")]
    NoElbow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// All fitted components, one per row, strongest first.
    #[serde(with = "crate::serde_rows")]
    pub components: Array2<f64>,
    #[serde(rename = "ratios")]
    pub explained_variance_ratio: Vec<f64>,
    pub chosen_dprime: usize,
}

impl PcaModel {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn component_count(&self) -> usize {
        self.components.nrows()
    }
}

/// Fits PCA to the rows of `data`. `chosen_dprime` starts at the full
/// dimension; set it after selection.
pub fn fit_pca(data: ArrayView2<f64>) -> Result<PcaModel, PcaError> {
    let (n, d) = data.dim();
    if n < 2 || d < 1 {
        return Err(PcaError::TooSmall { rows: n, cols: d });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(PcaError::NonFinite);
    }
    let first = data.row(0);
    if data.outer_iter().all(|row| row == first) {
        return Err(PcaError::RankZero);
    }

    let mean: Array1<f64> = data.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &data - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let cov = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    let eigen = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort keeps the solver's order among exactly equal eigenvalues.
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(PcaError::RankZero);
    }

    let mut components = Array2::zeros((d, d));
    for (row, &i) in order.iter().enumerate() {
        let v = eigen.eigenvectors.column(i);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (k, x)| if x.abs() > best.1 { (k, x.abs()) } else { best })
            .0;
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (k, x) in v.iter().enumerate() {
            components[[row, k]] = sign * x;
        }
    }

    Ok(PcaModel {
        mean: mean.to_vec(),
        components,
        explained_variance_ratio: eigenvalues.iter().map(|l| l / total).collect(),
        chosen_dprime: d,
    })
}

/// Coordinates of each row of `data` on the first `dprime` components.
pub fn project(model: &PcaModel, data: ArrayView2<f64>, dprime: usize) -> Result<ReducedMatrix, PcaError> {
    if data.ncols() != model.dimension() {
        return Err(PcaError::DimensionMismatch {
            found: data.ncols(),
            expected: model.dimension(),
        });
    }
    if dprime == 0 || dprime > model.component_count() {
        return Err(PcaError::DprimeOutOfRange {
            requested: dprime,
            available: model.component_count(),
        });
    }
    let mean = Array1::from(model.mean.clone());
    let centered = &data - &mean;
    let basis = model.components.slice(ndarray::s![..dprime, ..]);
    Ok(centered.dot(&basis.t()))
}

/// Running sum of the explained-variance ratios.
pub fn cumulative_explained_variance(model: &PcaModel) -> Vec<f64> {
    model
        .explained_variance_ratio
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect()
}

/// Elbow of a cumulative explained-variance curve: the 1-based index whose
/// point lies farthest from the chord joining the first and last points.
/// Ties go to the smaller index.
///
/// ```
/// use cvilab::reduce::select_dimensions_elbow;
/// assert_eq!(select_dimensions_elbow(&[0.50, 0.90, 0.95, 0.98, 1.00]).unwrap(), 2);
/// ```
pub fn select_dimensions_elbow(cevr: &[f64]) -> Result<usize, PcaError> {
    let d = cevr.len();
    if d < 3 {
        return Err(PcaError::CurveTooShort(d));
    }
    if let Some(i) = cevr.iter().position(|v| !v.is_finite()) {
        return Err(PcaError::CurveNotMonotone(i));
    }
    if let Some(i) = cevr.windows(2).position(|w| w[1] < w[0] - 1e-12) {
        return Err(PcaError::CurveNotMonotone(i + 1));
    }
    // Chord from (1, cevr[0]) to (d, cevr[d-1]); the perpendicular distance of
    // (x, y) is |dy·(x - 1) - dx·(y - cevr[0])| / hypot(dx, dy).
    let dx = (d - 1) as f64;
    let dy = cevr[d - 1] - cevr[0];
    let len = dx.hypot(dy);
    let mut best = (0usize, 0.0f64);
    for (i, &y) in cevr.iter().enumerate() {
        let dist = (dy * i as f64 - dx * (y - cevr[0])).abs() / len;
        if dist > best.1 {
            best = (i, dist);
        }
    }
    let scale = cevr.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if best.1 <= 1e-12 * scale {
        return Err(PcaError::NoElbow);
    }
    Ok(best.0 + 1)
}

/// Writes the curve as CSV `dprime,cevr`.
pub fn write_cevr_csv<W: io::Write>(mut w: W, cevr: &[f64]) -> io::Result<()> {
    writeln!(w, "dprime,cevr")?;
    for (i, v) in cevr.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, sig9(*v))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::stream(seed, 0);
        Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut r))
    }

    fn gram_error(model: &PcaModel) -> f64 {
        let g = model.components.dot(&model.components.t());
        let mut worst = 0.0f64;
        for ((i, j), v) in g.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        worst
    }

    #[test]
    fn line_in_three_d_is_rank_one() {
        let data = Array2::from_shape_fn((20, 3), |(i, j)| {
            let t = i as f64 * 0.37 - 2.0;
            [1.0, -2.0, 0.5][j] * t + [3.0, 0.0, -1.0][j]
        });
        let model = fit_pca(data.view()).unwrap();
        assert!((model.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        assert!(model.explained_variance_ratio[1..].iter().all(|r| r.abs() < 1e-9));
        assert_eq!(cumulative_explained_variance(&model).iter().filter(|c| (**c - 1.0).abs() < 1e-9).count(), 3);
    }

    #[test]
    fn identical_rows_are_rank_zero() {
        let data = array![[0.1, 0.2], [0.1, 0.2], [0.1, 0.2]];
        assert!(matches!(fit_pca(data.view()), Err(PcaError::RankZero)));
        assert!(matches!(fit_pca(array![[1.0, 2.0]].view()), Err(PcaError::TooSmall { .. })));
    }

    #[test]
    fn full_basis_reconstructs_centered_data() {
        let data = random(40, 6, 11);
        let model = fit_pca(data.view()).unwrap();
        let scores = project(&model, data.view(), 6).unwrap();
        let back = scores.dot(&model.components);
        let mean = Array1::from(model.mean.clone());
        let centered = &data - &mean;
        for (a, b) in back.iter().zip(centered.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(gram_error(&model) < 1e-9);
    }

    #[test]
    fn full_projection_is_an_isometry() {
        let data = random(25, 5, 3);
        let model = fit_pca(data.view()).unwrap();
        let scores = project(&model, data.view(), 5).unwrap();
        let dist = |m: &Array2<f64>, i: usize, j: usize| {
            m.row(i).iter().zip(m.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        for i in 0..25 {
            for j in 0..25 {
                assert!((dist(&data, i, j) - dist(&scores, i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mean_projects_to_origin() {
        let data = random(30, 4, 8);
        let model = fit_pca(data.view()).unwrap();
        let mean = Array2::from_shape_vec((1, 4), model.mean.clone()).unwrap();
        let p = project(&model, mean.view(), 4).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn projection_matches_naive_dot_products() {
        let data = random(50, 7, 21);
        let model = fit_pca(data.view()).unwrap();
        let p = project(&model, data.view(), 2).unwrap();
        for i in 0..50 {
            for c in 0..2 {
                let mut s = 0.0;
                for k in 0..7 {
                    s += model.components[[c, k]] * (data[[i, k]] - model.mean[k]);
                }
                assert!((p[[i, c]] - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_errors() {
        let data = random(10, 3, 1);
        let model = fit_pca(data.view()).unwrap();
        assert!(matches!(project(&model, data.view(), 0), Err(PcaError::DprimeOutOfRange { .. })));
        assert!(matches!(project(&model, data.view(), 4), Err(PcaError::DprimeOutOfRange { .. })));
        let wrong = random(3, 2, 1);
        assert!(matches!(project(&model, wrong.view(), 1), Err(PcaError::DimensionMismatch { .. })));
    }

    #[test]
    fn sign_convention_makes_largest_coordinate_positive() {
        let model = fit_pca(random(30, 5, 4).view()).unwrap();
        for row in model.components.outer_iter() {
            let pivot = row.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn cevr_running_sum() {
        let model = PcaModel {
            mean: vec![0.0; 3],
            components: Array2::eye(3),
            explained_variance_ratio: vec![0.7, 0.2, 0.1],
            chosen_dprime: 3,
        };
        let c = cumulative_explained_variance(&model);
        assert_eq!(c.len(), 3);
        assert!((c[0] - 0.7).abs() < 1e-15 && (c[1] - 0.9).abs() < 1e-15 && (c[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn elbow_oracle_example() {
        // Perpendicular distances to the chord from (1, .5) to (5, 1), by hand.
        let cevr = [0.50, 0.90, 0.95, 0.98, 1.00];
        let dists: Vec<f64> = (0..5)
            .map(|i| {
                let line = 0.5 + 0.125 * i as f64;
                (cevr[i] - line).abs() / (1.0f64 + 0.125 * 0.125).sqrt()
            })
            .collect();
        let oracle = dists.iter().enumerate().fold(0, |b, (i, d)| if *d > dists[b] { i } else { b }) + 1;
        assert_eq!(oracle, 2);
        assert_eq!(select_dimensions_elbow(&cevr).unwrap(), oracle);
    }

    #[test]
    fn elbow_degenerate_curves() {
        assert!(matches!(select_dimensions_elbow(&[0.2, 0.4, 0.6, 0.8, 1.0]), Err(PcaError::NoElbow)));
        assert!(matches!(select_dimensions_elbow(&[1.0, 1.0, 1.0]), Err(PcaError::NoElbow)));
        assert!(matches!(select_dimensions_elbow(&[0.5, 1.0]), Err(PcaError::CurveTooShort(2))));
        assert!(matches!(select_dimensions_elbow(&[0.5, 0.4, 1.0]), Err(PcaError::CurveNotMonotone(1))));
    }

    #[test]
    fn elbow_ties_pick_smaller_index() {
        // Indices 2 and 3 sit exactly 0.5/hypot(3, 1) above and below the chord.
        assert_eq!(select_dimensions_elbow(&[0.0, 0.5, 0.5, 1.0]).unwrap(), 2);
    }

    #[test]
    fn model_json_keys() {
        let model = fit_pca(random(5, 2, 2).view()).unwrap();
        let json = serde_json::to_value(&model).unwrap();
        for key in ["mean", "components", "ratios", "chosen_dprime"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: PcaModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, model);
    }

    proptest! {
        #[test]
        fn fitted_models_satisfy_invariants(n in 3usize..40, d in 1usize..8, seed in any::<u64>()) {
            let model = fit_pca(random(n, d, seed).view()).unwrap();
            prop_assert!(gram_error(&model) < 1e-9);
            prop_assert!(model.explained_variance_ratio.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(model.explained_variance_ratio.iter().all(|r| *r >= 0.0));
            let cevr = cumulative_explained_variance(&model);
            prop_assert!(cevr.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!((cevr[d - 1] - 1.0).abs() < 1e-9);
        }

        #[test]
        fn elbow_invariant_to_affine_rescaling(steps in prop::collection::vec(0.0f64..1.0, 3..12), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let cevr: Vec<f64> = steps.iter().scan(0.0, |s, x| { *s += x; Some(*s) }).collect();
            let scaled: Vec<f64> = cevr.iter().map(|c| a * c + b).collect();
            match (select_dimensions_elbow(&cevr), select_dimensions_elbow(&scaled)) {
                (Ok(i), Ok(j)) => prop_assert_eq!(i, j),
                (Err(_), Err(_)) => {}
                // Near-degenerate chords can straddle the no-elbow threshold.
                _ => {}
            }
        }
    }
}
