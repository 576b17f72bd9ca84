//! Cluster validation indices.
//!
//! All five indices work on Euclidean distances over a crisp partition;
//! Xie–Beni additionally has a fuzzy form that weights every point–centroid
//! pair by `u^m`.
//!
//! | index | better | definition |
//! |-------|--------|------------|
//! | SH | higher | mean over points of `(b − a) / max(a, b)` |
//! | CH | higher | `[Σ_j n_j ‖c_j − c̄‖² / (k − 1)] / [Σ_i ‖x_i − c_l(i)‖² / (N − k)]` |
//! | DB | lower  | `(1/k) Σ_i max_{j≠i} (S_i + S_j) / ‖c_i − c_j‖` |
//! | DI | higher | min single-linkage separation / max diameter |
//! | XB | lower  | `Σ_j Σ_i u_ij^m ‖x_i − c_j‖² / (N · min_{j≠l} ‖c_j − c_l‖²)` |
//!
//! Labels may be any integers; clusters are taken in ascending label order
//! and empty labels are ignored.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{weighted_centroids, ClusterModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CviError {
    #[error("need at least {required} clusters, found {found}")]
    TooFewClusters { found: usize, required: usize },
    #[error("need more points than clusters (N = {n}, k = {k})")]
    TooFewPoints { n: usize, k: usize },
    #[error("{labels} labels for {points} points")]
    LengthMismatch { points: usize, labels: usize },
    #[error("memberships are {rows}x{cols}, expected {n}x{k}")]
    MembershipShape { rows: usize, cols: usize, n: usize, k: usize },
    #[error("clusters {0} and {1} have coincident centroids")]
    CoincidentCentroids(usize, usize),
    #[error("points contain non-finite values")]
    NonFinite,
    #[error("no points")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CviIndex {
    #[serde(rename = "sh")]
    Silhouette,
    #[serde(rename = "ch")]
    CalinskiHarabasz,
    #[serde(rename = "db")]
    DaviesBouldin,
    #[serde(rename = "di")]
    Dunn,
    #[serde(rename = "xb")]
    XieBeni,
}

impl CviIndex {
    pub const ALL: [CviIndex; 5] = [
        CviIndex::Silhouette,
        CviIndex::CalinskiHarabasz,
        CviIndex::DaviesBouldin,
        CviIndex::Dunn,
        CviIndex::XieBeni,
    ];

    /// Short lowercase key: `sh`, `ch`, `db`, `di`, `xb`.
    pub fn key(self) -> &'static str {
        match self {
            CviIndex::Silhouette => "sh",
            CviIndex::CalinskiHarabasz => "ch",
            CviIndex::DaviesBouldin => "db",
            CviIndex::Dunn => "di",
            CviIndex::XieBeni => "xb",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, CviIndex::Silhouette | CviIndex::CalinskiHarabasz | CviIndex::Dunn)
    }

    /// Signed improvement going from `before` to `after`: positive means the
    /// index got better.
    pub fn improvement(self, before: f64, after: f64) -> f64 {
        if self.higher_is_better() {
            after - before
        } else {
            before - after
        }
    }
}

impl fmt::Display for CviIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key().to_uppercase())
    }
}

pub(crate) fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    sq_distance(a, b).sqrt()
}

pub(crate) fn sq_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Maps arbitrary labels onto `0..k` in ascending label order.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let index: BTreeMap<usize, usize> = distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), distinct.len())
}

fn check_input(points: ArrayView2<f64>, labels: &[usize]) -> Result<(), CviError> {
    if points.nrows() != labels.len() {
        return Err(CviError::LengthMismatch { points: points.nrows(), labels: labels.len() });
    }
    if points.nrows() == 0 {
        return Err(CviError::Empty);
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(CviError::NonFinite);
    }
    Ok(())
}

fn require_clusters(k: usize, required: usize) -> Result<(), CviError> {
    if k < required {
        Err(CviError::TooFewClusters { found: k, required })
    } else {
        Ok(())
    }
}

/// The centroids, spreads and separations the indices are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionGeometry {
    /// Labels renumbered to `0..k`.
    pub labels: Vec<usize>,
    /// The original label of each renumbered cluster.
    pub cluster_labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub data_centroid: Array1<f64>,
    pub cluster_sizes: Vec<usize>,
    /// Largest pairwise distance between members.
    pub diameters: Vec<f64>,
    /// Mean member distance to the centroid.
    pub mean_scatter: Vec<f64>,
    /// Largest member distance to the centroid.
    pub radii: Vec<f64>,
    /// Closest pair of points in different clusters (infinite for k = 1).
    pub min_separation_points: f64,
    /// Closest pair of centroids (infinite for k = 1).
    pub min_separation_centroids: f64,
}

impl PartitionGeometry {
    pub fn new(points: ArrayView2<f64>, labels: &[usize]) -> Result<Self, CviError> {
        check_input(points, labels)?;
        let mut cluster_labels = labels.to_vec();
        cluster_labels.sort_unstable();
        cluster_labels.dedup();
        let (labels, k) = compact(labels);
        let (n, d) = points.dim();

        let mut sizes = vec![0usize; k];
        let mut centroids = Array2::<f64>::zeros((k, d));
        for (x, &l) in points.outer_iter().zip(&labels) {
            sizes[l] += 1;
            centroids.row_mut(l).scaled_add(1.0, &x);
        }
        for (mut c, &s) in centroids.outer_iter_mut().zip(&sizes) {
            c.mapv_inplace(|v| v / s as f64);
        }
        let data_centroid = points.sum_axis(ndarray::Axis(0)) / n as f64;

        let mut mean_scatter = vec![0.0; k];
        let mut radii = vec![0.0f64; k];
        for (x, &l) in points.outer_iter().zip(&labels) {
            let dist = distance(x, centroids.row(l));
            mean_scatter[l] += dist;
            radii[l] = radii[l].max(dist);
        }
        for (s, &size) in mean_scatter.iter_mut().zip(&sizes) {
            *s /= size as f64;
        }

        // One pass over all pairs gives both diameters and single linkage.
        let (diameters, min_sep) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut diam = vec![0.0f64; k];
                let mut sep = f64::INFINITY;
                let xi = points.row(i);
                for j in (i + 1)..n {
                    let dist = distance(xi, points.row(j));
                    if labels[i] == labels[j] {
                        let slot = &mut diam[labels[i]];
                        *slot = slot.max(dist);
                    } else {
                        sep = sep.min(dist);
                    }
                }
                (diam, sep)
            })
            .reduce(
                || (vec![0.0f64; k], f64::INFINITY),
                |(mut a, sa), (b, sb)| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x = x.max(*y));
                    (a, sa.min(sb))
                },
            );

        let mut min_sep_centroids = f64::INFINITY;
        for a in 0..k {
            for b in (a + 1)..k {
                min_sep_centroids = min_sep_centroids.min(distance(centroids.row(a), centroids.row(b)));
            }
        }

        Ok(Self {
            labels,
            cluster_labels,
            centroids,
            data_centroid,
            cluster_sizes: sizes,
            diameters,
            mean_scatter,
            radii,
            min_separation_points: min_sep,
            min_separation_centroids: min_sep_centroids,
        })
    }

    pub fn k(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Index of the nearest centroid to `x`, ties to the lowest index.
    pub fn nearest_centroid(&self, x: ArrayView1<f64>) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.centroids.outer_iter().enumerate() {
            let d2 = sq_distance(x, c);
            if d2 < best.1 {
                best = (j, d2);
            }
        }
        best.0
    }
}

/// Mean silhouette. Members of singleton clusters score 0.
pub fn silhouette(points: ArrayView2<f64>, labels: &[usize]) -> Result<f64, CviError> {
    check_input(points, labels)?;
    let (labels, k) = compact(labels);
    require_clusters(k, 2)?;
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);

    let n = points.nrows();
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let xi = points.row(i);
            for (j, x) in points.outer_iter().enumerate() {
                if j != i {
                    sums[labels[j]] += distance(xi, x);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / n as f64)
}

/// Calinski–Harabasz. Zero within-cluster scatter yields `+∞`.
pub fn calinski_harabasz(points: ArrayView2<f64>, labels: &[usize]) -> Result<f64, CviError> {
    ch_from_geometry(points, &PartitionGeometry::new(points, labels)?)
}

fn ch_from_geometry(points: ArrayView2<f64>, g: &PartitionGeometry) -> Result<f64, CviError> {
    let (n, k) = (g.n(), g.k());
    require_clusters(k, 2)?;
    if k >= n {
        return Err(CviError::TooFewPoints { n, k });
    }
    let between: f64 = g
        .centroids
        .outer_iter()
        .zip(&g.cluster_sizes)
        .map(|(c, &s)| s as f64 * sq_distance(c, g.data_centroid.view()))
        .sum();
    let within: f64 = points
        .outer_iter()
        .zip(&g.labels)
        .map(|(x, &l)| sq_distance(x, g.centroids.row(l)))
        .sum();
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Davies–Bouldin with mean-distance scatter and centroid separation.
pub fn davies_bouldin(points: ArrayView2<f64>, labels: &[usize]) -> Result<f64, CviError> {
    db_from_geometry(&PartitionGeometry::new(points, labels)?)
}

fn db_from_geometry(g: &PartitionGeometry) -> Result<f64, CviError> {
    let k = g.k();
    require_clusters(k, 2)?;
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = distance(g.centroids.row(i), g.centroids.row(j));
            if sep == 0.0 {
                return Err(CviError::CoincidentCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((g.mean_scatter[i] + g.mean_scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Dunn index: single-linkage separation over the largest diameter. An
/// all-singleton partition yields `+∞`.
pub fn dunn(points: ArrayView2<f64>, labels: &[usize]) -> Result<f64, CviError> {
    let g = PartitionGeometry::new(points, labels)?;
    require_clusters(g.k(), 2)?;
    dunn_from_geometry(&g)
}

fn dunn_from_geometry(g: &PartitionGeometry) -> Result<f64, CviError> {
    let max_diameter = g.diameters.iter().copied().fold(0.0, f64::max);
    if max_diameter == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(g.min_separation_points / max_diameter)
}

/// Shared Xie–Beni kernel; `weight(i, j)` is `u_ij^m`. Sums point by point
/// so the crisp and one-hot fuzzy forms add identical terms in identical
/// order.
fn xie_beni_kernel(
    points: ArrayView2<f64>,
    centroids: ArrayView2<f64>,
    weight: impl Fn(usize, usize) -> f64,
) -> Result<f64, CviError> {
    let k = centroids.nrows();
    require_clusters(k, 2)?;
    let mut min_sep = f64::INFINITY;
    for a in 0..k {
        for b in (a + 1)..k {
            let d2 = sq_distance(centroids.row(a), centroids.row(b));
            if d2 == 0.0 {
                return Err(CviError::CoincidentCentroids(a, b));
            }
            min_sep = min_sep.min(d2);
        }
    }
    let mut compactness = 0.0;
    for (i, x) in points.outer_iter().enumerate() {
        let mut row = 0.0;
        for (j, c) in centroids.outer_iter().enumerate() {
            let w = weight(i, j);
            if w != 0.0 {
                row += w * sq_distance(x, c);
            }
        }
        compactness += row;
    }
    Ok(compactness / (points.nrows() as f64 * min_sep))
}

/// Fuzzy Xie–Beni with memberships `u` (N×k), `centroids` (k×d) and
/// fuzzifier `m`.
pub fn xie_beni(points: ArrayView2<f64>, u: ArrayView2<f64>, centroids: ArrayView2<f64>, m: f64) -> Result<f64, CviError> {
    if points.nrows() == 0 {
        return Err(CviError::Empty);
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(CviError::NonFinite);
    }
    let (n, k) = (points.nrows(), centroids.nrows());
    if u.dim() != (n, k) {
        return Err(CviError::MembershipShape { rows: u.nrows(), cols: u.ncols(), n, k });
    }
    xie_beni_kernel(points, centroids, |i, j| u[[i, j]].powf(m))
}

/// Crisp Xie–Beni: each point weighs 1 against its own cluster's mean.
pub fn xie_beni_crisp(points: ArrayView2<f64>, labels: &[usize]) -> Result<f64, CviError> {
    let g = PartitionGeometry::new(points, labels)?;
    xie_beni_kernel(points, g.centroids.view(), |i, j| if g.labels[i] == j { 1.0 } else { 0.0 })
}

/// The five indices for one partition. Failed or infinite indices are
/// `None` here, with the reason in `degenerate_flags` under the index key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviReport {
    pub sh: Option<f64>,
    pub ch: Option<f64>,
    pub db: Option<f64>,
    pub di: Option<f64>,
    pub xb: Option<f64>,
    pub k_effective: usize,
    /// Whether XB used fuzzy memberships.
    pub fuzzy: bool,
    pub degenerate_flags: BTreeMap<String, String>,
}

/// Reason recorded for an index that evaluated to `+∞`.
pub const INFINITE_FLAG: &str = "infinite";

impl CviReport {
    pub fn get(&self, index: CviIndex) -> Option<f64> {
        match index {
            CviIndex::Silhouette => self.sh,
            CviIndex::CalinskiHarabasz => self.ch,
            CviIndex::DaviesBouldin => self.db,
            CviIndex::Dunn => self.di,
            CviIndex::XieBeni => self.xb,
        }
    }

    fn slot(&mut self, index: CviIndex) -> &mut Option<f64> {
        match index {
            CviIndex::Silhouette => &mut self.sh,
            CviIndex::CalinskiHarabasz => &mut self.ch,
            CviIndex::DaviesBouldin => &mut self.db,
            CviIndex::Dunn => &mut self.di,
            CviIndex::XieBeni => &mut self.xb,
        }
    }

    fn empty(k_effective: usize, fuzzy: bool) -> Self {
        Self {
            sh: None,
            ch: None,
            db: None,
            di: None,
            xb: None,
            k_effective,
            fuzzy,
            degenerate_flags: BTreeMap::new(),
        }
    }

    fn record(&mut self, index: CviIndex, outcome: Result<f64, CviError>) {
        match outcome {
            Ok(v) if v.is_finite() => *self.slot(index) = Some(v),
            Ok(_) => {
                self.degenerate_flags.insert(index.key().to_string(), INFINITE_FLAG.to_string());
            }
            Err(e) => {
                self.degenerate_flags.insert(index.key().to_string(), e.to_string());
            }
        }
    }

    /// True when the index evaluated to `+∞`.
    pub fn is_infinite(&self, index: CviIndex) -> bool {
        self.degenerate_flags.get(index.key()).map(String::as_str) == Some(INFINITE_FLAG)
    }
}

/// All five indices on a crisp partition.
pub fn evaluate_partition(points: ArrayView2<f64>, labels: &[usize]) -> CviReport {
    evaluate(points, labels, None)
}

/// All five indices for a fitted model: the crisp indices on its hardened
/// labels, XB on its memberships. XB's centroids are the `u^m`-weighted
/// means of `points`, so the same model can be scored in any space its
/// rows live in.
pub fn evaluate_all(points: ArrayView2<f64>, model: &ClusterModel) -> CviReport {
    evaluate(points, &model.labels, Some(model))
}

fn evaluate(points: ArrayView2<f64>, labels: &[usize], model: Option<&ClusterModel>) -> CviReport {
    let geometry = PartitionGeometry::new(points, labels);
    let k_effective = geometry.as_ref().map_or(0, PartitionGeometry::k);
    let mut report = CviReport::empty(k_effective, model.is_some());
    let g = match geometry {
        Ok(g) => g,
        Err(e) => {
            for index in CviIndex::ALL {
                report.record(index, Err(e.clone()));
            }
            return report;
        }
    };

    report.record(CviIndex::Silhouette, silhouette(points, labels));
    report.record(CviIndex::CalinskiHarabasz, ch_from_geometry(points, &g));
    report.record(CviIndex::DaviesBouldin, db_from_geometry(&g));
    report.record(
        CviIndex::Dunn,
        require_clusters(g.k(), 2).and_then(|_| dunn_from_geometry(&g)),
    );
    let xb = match model {
        Some(model) if model.memberships.nrows() == points.nrows() => {
            let centroids = weighted_centroids(points, model.memberships.view(), model.fuzzifier);
            xie_beni(points, model.memberships.view(), centroids.view(), model.fuzzifier)
        }
        Some(model) => Err(CviError::MembershipShape {
            rows: model.memberships.nrows(),
            cols: model.memberships.ncols(),
            n: points.nrows(),
            k: model.k(),
        }),
        None => xie_beni_kernel(points, g.centroids.view(), |i, j| if g.labels[i] == j { 1.0 } else { 0.0 }),
    };
    report.record(CviIndex::XieBeni, xb);
    report
}
