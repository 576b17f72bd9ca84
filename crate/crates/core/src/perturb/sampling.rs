//! Truncated Gaussian sampling inside a cluster's own region.

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::{PerturbConfig, PerturbError};
use crate::cvi::{distance, PartitionGeometry};
use crate::rng::Rng;

/// Draws `count` points around centroid `j` of `g` with standard deviation
/// `radius / sigma_divisor`, accepting a draw only if it lies within
/// `radius` of the centroid and that centroid is its nearest one.
pub(super) fn sample_in_region(
    g: &PartitionGeometry,
    j: usize,
    radius: f64,
    count: usize,
    config: &PerturbConfig,
    rng: &mut Rng,
) -> Result<Array2<f64>, PerturbError> {
    let label = g.cluster_labels[j];
    if radius.is_nan() || radius <= 0.0 {
        return Err(PerturbError::DegenerateCluster { cluster: label });
    }
    let center = g.centroids.row(j);
    let sigma = radius / config.sigma_divisor;
    let d = center.len();
    let mut out = Array2::zeros((count, d));
    for mut slot in out.outer_iter_mut() {
        let mut attempts = 0;
        loop {
            if attempts == config.max_rejection_attempts {
                return Err(PerturbError::RejectionBudgetExhausted { cluster: label, attempts, dimension: d });
            }
            attempts += 1;
            let x: Array1<f64> = center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(rng);
                    c + sigma * z
                })
                .collect();
            if distance(x.view(), center) <= radius && g.nearest_centroid(x.view()) == j {
                slot.assign(&x);
                break;
            }
        }
    }
    Ok(out)
}

fn cluster_position(g: &PartitionGeometry, label: usize) -> Result<usize, PerturbError> {
    g.cluster_labels
        .iter()
        .position(|&l| l == label)
        .ok_or(PerturbError::UnknownCluster(label))
}

/// Samples `count` new members for the cluster labelled `cluster`: isotropic
/// Gaussian around its centroid with `σ = radius / sigma_divisor`, where the
/// radius is the largest member-to-centroid distance, truncated to the
/// radius and to the cluster's nearest-centroid region.
pub fn inject_density(
    points: ArrayView2<f64>,
    labels: &[usize],
    cluster: usize,
    count: usize,
    config: &PerturbConfig,
    rng: &mut Rng,
) -> Result<Array2<f64>, PerturbError> {
    let g = PartitionGeometry::new(points, labels)?;
    let j = cluster_position(&g, cluster)?;
    if g.cluster_sizes[j] < 2 {
        return Err(PerturbError::DegenerateCluster { cluster });
    }
    sample_in_region(&g, j, g.radii[j], count, config, rng)
}

/// Shrinks every non-singleton cluster to `shrink_factor` of its radius at
/// constant size: members farther than the new radius from the centroid are
/// replaced, in place, by draws from the density sampler with the new
/// radius. Singleton clusters are left alone.
pub fn shrink_clusters(
    points: ArrayView2<f64>,
    labels: &[usize],
    config: &PerturbConfig,
    rng: &mut Rng,
) -> Result<Array2<f64>, PerturbError> {
    config.validate()?;
    let g = PartitionGeometry::new(points, labels)?;
    if g.k() < 2 {
        return Err(PerturbError::TooFewClusters { found: g.k(), required: 2 });
    }
    shrink_with_geometry(points, &g, config, rng)
}

pub(super) fn shrink_with_geometry(
    points: ArrayView2<f64>,
    g: &PartitionGeometry,
    config: &PerturbConfig,
    rng: &mut Rng,
) -> Result<Array2<f64>, PerturbError> {
    let mut out = points.to_owned();
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        let j = g.labels[i];
        if g.cluster_sizes[j] < 2 {
            continue;
        }
        let new_radius = config.shrink_factor * g.radii[j];
        if distance(row.view(), g.centroids.row(j)) > new_radius {
            let replacement = sample_in_region(g, j, new_radius, 1, config, rng)?;
            row.assign(&replacement.row(0));
        }
    }
    Ok(out)
}
