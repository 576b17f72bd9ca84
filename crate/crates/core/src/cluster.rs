//! Fuzzy c-means in the reduced space.
//!
//! The fit alternates the two closed-form updates
//!
//! * memberships: `u[i][j] = 1 / Σ_l (‖x_i − c_j‖ / ‖x_i − c_l‖)^(2/(m−1))`
//! * centroids: `c_j = Σ_i u[i][j]^m x_i / Σ_i u[i][j]^m`
//!
//! until no centroid moves by `tol` or more, keeping the best of several
//! seeded initializations. The cluster count is picked by maximizing Dunn's
//! fuzzy partition coefficient over a range of `k`.

use std::io;
use std::ops::RangeInclusive;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::sig9;
use crate::rng;

/// Upper bound on the number of clusters considered.
pub const DEFAULT_MAX_CLUSTERS: usize = 10;

#[derive(Debug, Error)]
pub enum FcmError {
    #[error("k = {k} is outside [2, {k_max}]")]
    InvalidK { k: usize, k_max: usize },
    #[error("need more points than clusters (N = {n}, k = {k})")]
    TooFewPoints { n: usize, k: usize },
    #[error("only {distinct} distinct points, cannot seed {k} clusters")]
    TooFewDistinctPoints { distinct: usize, k: usize },
    #[error("fuzzifier m = {0} must lie in (1, 5]")]
    InvalidFuzzifier(f64),
    #[error("invalid FCM configuration: {0}")]
    InvalidConfig(String),
    #[error("data contains non-finite values")]
    NonFinite,
    #[error("membership matrix is empty")]
    EmptyMemberships,
    #[error("k range {lo}..={hi} is invalid for N = {n} (need 2 <= lo <= hi <= min(N - 1, {k_max}))")]
    InvalidKRange { lo: usize, hi: usize, n: usize, k_max: usize },
}

/// Strategy for choosing the fuzzifier from the data.
pub trait FuzzifierEstimator: Send + Sync {
    fn estimate(&self, data: ArrayView2<f64>) -> f64;
}

/// Returns `m = 2`, the conventional choice.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultFuzzifier;

impl FuzzifierEstimator for DefaultFuzzifier {
    fn estimate(&self, _data: ArrayView2<f64>) -> f64 {
        2.0
    }
}

impl<F: Fn(ArrayView2<f64>) -> f64 + Send + Sync> FuzzifierEstimator for F {
    fn estimate(&self, data: ArrayView2<f64>) -> f64 {
        self(data)
    }
}

/// Estimates `m` with the default strategy.
pub fn estimate_fuzzifier(data: ArrayView2<f64>) -> f64 {
    DefaultFuzzifier.estimate(data)
}

/// Runs `estimator` and checks its answer lies in (1, 5].
pub fn estimate_fuzzifier_with(estimator: &dyn FuzzifierEstimator, data: ArrayView2<f64>) -> Result<f64, FcmError> {
    let m = estimator.estimate(data);
    check_fuzzifier(m)?;
    Ok(m)
}

fn check_fuzzifier(m: f64) -> Result<(), FcmError> {
    if m > 1.0 && m <= 5.0 {
        Ok(())
    } else {
        Err(FcmError::InvalidFuzzifier(m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuzzifier {
    Fixed(f64),
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmConfig {
    pub k: usize,
    pub fuzzifier: Fuzzifier,
    pub max_iter: usize,
    /// Stop once the largest centroid displacement drops below this.
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    pub k_max: usize,
}

impl FcmConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            fuzzifier: Fuzzifier::Estimate,
            max_iter: 300,
            tol: 1e-6,
            seed: 0,
            restarts: 10,
            k_max: DEFAULT_MAX_CLUSTERS,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_fuzzifier(mut self, m: f64) -> Self {
        self.fuzzifier = Fuzzifier::Fixed(m);
        self
    }

    pub fn validate(&self) -> Result<(), FcmError> {
        if self.k < 2 || self.k > self.k_max {
            return Err(FcmError::InvalidK { k: self.k, k_max: self.k_max });
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(FcmError::InvalidConfig("max_iter and restarts must be positive".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(FcmError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if let Fuzzifier::Fixed(m) = self.fuzzifier {
            check_fuzzifier(m)?;
        }
        Ok(())
    }
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self::new(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    #[serde(with = "crate::serde_rows")]
    pub centroids: Array2<f64>,
    #[serde(rename = "u", with = "crate::serde_rows")]
    pub memberships: Array2<f64>,
    #[serde(rename = "m")]
    pub fuzzifier: f64,
    pub labels: Vec<usize>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Clusters that own no point after hardening.
    pub empty_clusters: Vec<usize>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Membership row of a point given its squared distances to each centroid.
/// A point sitting exactly on a centroid belongs to it crisply (lowest index
/// on ties).
fn membership_row(d2: &[f64], m: f64, out: &mut [f64]) {
    if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
        out.iter_mut().for_each(|u| *u = 0.0);
        out[hit] = 1.0;
        return;
    }
    // u_j ∝ d2_j^(-1/(m-1)); scale by the nearest distance to stay in (0, 1].
    let p = 1.0 / (m - 1.0);
    let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (u, &d) in out.iter_mut().zip(d2) {
        *u = (nearest / d).powf(p);
        total += *u;
    }
    out.iter_mut().for_each(|u| *u /= total);
}

/// Memberships of every point for fixed centroids, and the objective
/// `Σ_i Σ_j u^m ‖x_i − c_j‖²` at that pair.
fn update_memberships(data: ArrayView2<f64>, centroids: &Array2<f64>, m: f64) -> (Array2<f64>, f64) {
    let (n, k) = (data.nrows(), centroids.nrows());
    let mut u = Array2::zeros((n, k));
    let mut d2 = vec![0.0; k];
    let mut objective = 0.0;
    for (i, x) in data.outer_iter().enumerate() {
        for (j, c) in centroids.outer_iter().enumerate() {
            d2[j] = sq_dist(x, c);
        }
        let row = u.row_mut(i).into_slice().expect("standard layout");
        membership_row(&d2, m, row);
        objective += row.iter().zip(&d2).map(|(u, d)| u.powf(m) * d).sum::<f64>();
    }
    (u, objective)
}

/// Weighted means `Σ u^m x / Σ u^m`; a cluster with no weight keeps its
/// previous centroid.
fn update_centroids(data: ArrayView2<f64>, u: &Array2<f64>, m: f64, previous: &Array2<f64>) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros(previous.raw_dim());
    let mut weights = vec![0.0; previous.nrows()];
    for (x, urow) in data.outer_iter().zip(u.outer_iter()) {
        for (j, &uij) in urow.iter().enumerate() {
            let w = uij.powf(m);
            if w > 0.0 {
                weights[j] += w;
                sums.row_mut(j).scaled_add(w, &x);
            }
        }
    }
    for (j, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            sums.row_mut(j).mapv_inplace(|s| s / w);
        } else {
            sums.row_mut(j).assign(&previous.row(j));
        }
    }
    sums
}

/// Picks `k` points with pairwise distinct coordinates in a seeded random
/// order.
fn initial_centroids(data: ArrayView2<f64>, k: usize, rng: &mut rng::Rng) -> Result<Array2<f64>, FcmError> {
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for i in order {
        if chosen.iter().all(|&c| data.row(c) != data.row(i)) {
            chosen.push(i);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return Err(FcmError::TooFewDistinctPoints { distinct: chosen.len(), k });
    }
    let mut centroids = Array2::zeros((k, data.ncols()));
    for (j, &i) in chosen.iter().enumerate() {
        centroids.row_mut(j).assign(&data.row(i));
    }
    Ok(centroids)
}

fn fit_once(data: ArrayView2<f64>, config: &FcmConfig, m: f64, restart: u64) -> Result<ClusterModel, FcmError> {
    let mut rng = rng::stream(config.seed, restart);
    let mut centroids = initial_centroids(data, config.k, &mut rng)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let (u, objective) = update_memberships(data, &centroids, m);
        trace.push(objective);
        let next = update_centroids(data, &u, m, &centroids);
        let shift = next
            .outer_iter()
            .zip(centroids.outer_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;
        if shift < config.tol {
            converged = true;
            break;
        }
    }

    let (memberships, objective) = update_memberships(data, &centroids, m);
    trace.push(objective);
    let labels = harden(memberships.view());
    let mut counts = vec![0usize; config.k];
    labels.iter().for_each(|&l| counts[l] += 1);
    Ok(ClusterModel {
        centroids,
        memberships,
        fuzzifier: m,
        labels,
        objective_trace: trace,
        iterations,
        converged,
        empty_clusters: (0..config.k).filter(|&j| counts[j] == 0).collect(),
    })
}

/// Fits fuzzy c-means, estimating `m` with the default strategy when the
/// config asks for it.
pub fn fit_fcm(data: ArrayView2<f64>, config: &FcmConfig) -> Result<ClusterModel, FcmError> {
    fit_fcm_with(data, config, &DefaultFuzzifier)
}

/// Fits fuzzy c-means with a caller-supplied fuzzifier strategy. Restarts run
/// in parallel; the lowest final objective wins, ties to the earliest restart.
pub fn fit_fcm_with(
    data: ArrayView2<f64>,
    config: &FcmConfig,
    estimator: &dyn FuzzifierEstimator,
) -> Result<ClusterModel, FcmError> {
    config.validate()?;
    let n = data.nrows();
    if n <= config.k {
        return Err(FcmError::TooFewPoints { n, k: config.k });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(FcmError::NonFinite);
    }
    let m = match config.fuzzifier {
        Fuzzifier::Fixed(m) => m,
        Fuzzifier::Estimate => estimate_fuzzifier_with(estimator, data)?,
    };

    let fits: Vec<Result<ClusterModel, FcmError>> = (0..config.restarts as u64)
        .into_par_iter()
        .map(|r| fit_once(data, config, m, r))
        .collect();
    let mut best: Option<ClusterModel> = None;
    for fit in fits {
        let fit = fit?;
        if best.as_ref().is_none_or(|b| fit.objective() < b.objective()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Dunn's fuzzy partition coefficient `(1/N) Σ_i Σ_j u_ij²`.
pub fn fuzzy_partition_coefficient(u: ArrayView2<f64>) -> Result<f64, FcmError> {
    if u.nrows() == 0 || u.ncols() == 0 {
        return Err(FcmError::EmptyMemberships);
    }
    // Each row's Σ u² is evaluated as the u-weighted mean of u (equal, since
    // rows sum to 1), and rows are combined with a running mean. Running
    // means of equal values are exact, so a uniform matrix gives exactly
    // `1/k` and a crisp one exactly 1.
    let mut mean = 0.0;
    for (i, row) in u.outer_iter().enumerate() {
        let mut weight = 0.0;
        let mut row_mean = 0.0;
        for &x in row.iter().filter(|&&x| x != 0.0) {
            weight += x;
            row_mean += x / weight * (x - row_mean);
        }
        mean += (row_mean - mean) / (i + 1) as f64;
    }
    Ok(mean)
}

/// Row-wise argmax, ties to the lowest column.
pub fn harden(u: ArrayView2<f64>) -> Vec<usize> {
    u.outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcPoint {
    pub k: usize,
    pub fpc: f64,
}

#[derive(Debug, Clone)]
pub struct ClusterCountSelection {
    pub best_k: usize,
    pub curve: Vec<FpcPoint>,
    pub model: ClusterModel,
}

/// Fits one model per `k` in `k_range` and keeps the one with the largest
/// FPC, ties to the smaller `k`. `template.k` is ignored.
pub fn select_cluster_count(
    data: ArrayView2<f64>,
    template: &FcmConfig,
    k_range: RangeInclusive<usize>,
) -> Result<ClusterCountSelection, FcmError> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    let n = data.nrows();
    if lo < 2 || lo > hi || hi + 1 > n || hi > template.k_max {
        return Err(FcmError::InvalidKRange { lo, hi, n, k_max: template.k_max });
    }
    let fits: Vec<Result<(usize, f64, ClusterModel), FcmError>> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let config = FcmConfig { k, ..template.clone() };
            let model = fit_fcm(data, &config)?;
            let fpc = fuzzy_partition_coefficient(model.memberships.view())?;
            Ok((k, fpc, model))
        })
        .collect();

    let mut curve = Vec::with_capacity(fits.len());
    let mut best: Option<(usize, f64, ClusterModel)> = None;
    for fit in fits {
        let (k, fpc, model) = fit?;
        curve.push(FpcPoint { k, fpc });
        if best.as_ref().is_none_or(|b| fpc > b.1) {
            best = Some((k, fpc, model));
        }
    }
    let (best_k, _, model) = best.expect("non-empty range");
    Ok(ClusterCountSelection { best_k, curve, model })
}

/// Writes the FPC curve as CSV `k,fpc`.
pub fn write_fpc_csv<W: io::Write>(mut w: W, curve: &[FpcPoint]) -> io::Result<()> {
    writeln!(w, "k,fpc")?;
    for p in curve {
        writeln!(w, "{},{}", p.k, sig9(p.fpc))?;
    }
    w.flush()
}

/// Recomputes memberships for `data` against fixed `centroids`.
pub fn memberships_for(data: ArrayView2<f64>, centroids: &Array2<f64>, m: f64) -> Array2<f64> {
    update_memberships(data, centroids, m).0
}

/// Fuzzy centroids `Σ u^m x / Σ u^m` of `data` under memberships `u`.
pub fn weighted_centroids(data: ArrayView2<f64>, u: ArrayView2<f64>, m: f64) -> Array2<f64> {
    let k = u.ncols();
    let mut sums = Array2::<f64>::zeros((k, data.ncols()));
    let mut weights = Array1::<f64>::zeros(k);
    for (x, urow) in data.outer_iter().zip(u.outer_iter()) {
        for (j, &uij) in urow.iter().enumerate() {
            let w = uij.powf(m);
            weights[j] += w;
            sums.row_mut(j).scaled_add(w, &x);
        }
    }
    for (j, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            sums.row_mut(j).mapv_inplace(|s| s / w);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(centers: &[[f64; 2]], per: usize, spread: f64, seed: u64) -> Array2<f64> {
        let mut r = rng::stream(seed, 0);
        let mut rows = Vec::new();
        for c in centers {
            for _ in 0..per {
                let dx: f64 = StandardNormal.sample(&mut r);
                let dy: f64 = StandardNormal.sample(&mut r);
                rows.extend([c[0] + spread * dx, c[1] + spread * dy]);
            }
        }
        Array2::from_shape_vec((centers.len() * per, 2), rows).unwrap()
    }

    fn objective(data: &Array2<f64>, u: &Array2<f64>, c: &Array2<f64>, m: f64) -> f64 {
        let mut j = 0.0;
        for i in 0..data.nrows() {
            for l in 0..c.nrows() {
                let d2: f64 = (0..data.ncols()).map(|t| (data[[i, t]] - c[[l, t]]).powi(2)).sum();
                j += u[[i, l]].powf(m) * d2;
            }
        }
        j
    }

    #[test]
    fn symmetric_pairs_converge_near_midpoints() {
        // Fuzzy memberships never reach zero, so each centroid is pulled
        // slightly toward the other pair: about 6e-5 here.
        let data = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let model = fit_fcm(data.view(), &FcmConfig::new(2).with_fuzzifier(2.0).with_seed(3)).unwrap();
        let mut cs: Vec<(f64, f64)> = model.centroids.outer_iter().map(|c| (c[0], c[1])).collect();
        cs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(cs[0].0 > 0.0 && cs[0].0 < 1e-3 && (cs[0].1 - 0.5).abs() < 1e-6, "{cs:?}");
        assert!(cs[1].0 < 10.0 && cs[1].0 > 10.0 - 1e-3 && (cs[1].1 - 0.5).abs() < 1e-6, "{cs:?}");
        assert!((cs[0].0 + cs[1].0 - 10.0).abs() < 1e-9, "symmetric: {cs:?}");
        for (i, row) in model.memberships.outer_iter().enumerate() {
            assert!(row[model.labels[i]] > 0.99);
        }
        assert_eq!(model.labels[0], model.labels[1]);
        assert_ne!(model.labels[0], model.labels[2]);
    }

    #[test]
    fn exact_copies_reach_zero_objective() {
        for m in [1.5, 2.0, 3.0] {
            let data = array![[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0], [9.0, 0.0], [9.0, 0.0]];
            let model = fit_fcm(data.view(), &FcmConfig::new(3).with_fuzzifier(m)).unwrap();
            assert_eq!(model.objective(), 0.0);
            assert!(model.empty_clusters.is_empty());
        }
    }

    #[test]
    fn coincident_point_gets_crisp_membership() {
        let mut row = [0.0; 3];
        membership_row(&[4.0, 0.0, 0.0], 2.0, &mut row);
        assert_eq!(row, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn trace_matches_direct_objective_and_never_increases() {
        for seed in 0..100u64 {
            let mut r = rng::stream(seed, 99);
            let n = r.random_range(12..60);
            let d = r.random_range(1..5);
            let k = r.random_range(2..6);
            let data = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut r));
            let config = FcmConfig { restarts: 1, ..FcmConfig::new(k).with_seed(seed) };
            let model = fit_fcm(data.view(), &config).unwrap();
            for w in model.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "seed {seed}: {w:?}");
            }
            let direct = objective(&data, &model.memberships, &model.centroids, model.fuzzifier);
            assert!((direct - model.objective()).abs() <= 1e-9 * direct.max(1.0));
            for row in model.memberships.outer_iter() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|u| (0.0..=1.0).contains(u)));
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let data = blobs(&[[0.0, 0.0], [3.0, 3.0], [6.0, 0.0]], 30, 0.5, 4);
        let config = FcmConfig::new(3).with_seed(17);
        assert_eq!(fit_fcm(data.view(), &config).unwrap(), fit_fcm(data.view(), &config).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        let data = blobs(&[[0.0, 0.0]], 5, 1.0, 1);
        assert!(matches!(fit_fcm(data.view(), &FcmConfig::new(1)), Err(FcmError::InvalidK { .. })));
        assert!(matches!(fit_fcm(data.view(), &FcmConfig::new(11)), Err(FcmError::InvalidK { .. })));
        assert!(matches!(fit_fcm(data.view(), &FcmConfig::new(5)), Err(FcmError::TooFewPoints { .. })));
        assert!(matches!(
            fit_fcm(data.view(), &FcmConfig::new(2).with_fuzzifier(1.0)),
            Err(FcmError::InvalidFuzzifier(_))
        ));
        let same = Array2::<f64>::zeros((6, 2));
        assert!(matches!(
            fit_fcm(same.view(), &FcmConfig::new(2)),
            Err(FcmError::TooFewDistinctPoints { distinct: 1, k: 2 })
        ));
    }

    #[test]
    fn fuzzifier_strategies() {
        let data = blobs(&[[0.0, 0.0]], 5, 1.0, 1);
        assert_eq!(estimate_fuzzifier(data.view()), 2.0);
        let constant = Array2::<f64>::ones((4, 3));
        assert_eq!(estimate_fuzzifier(constant.view()), 2.0);
        let bad = |_: ArrayView2<f64>| 1.0;
        assert!(matches!(estimate_fuzzifier_with(&bad, data.view()), Err(FcmError::InvalidFuzzifier(_))));
        let custom = |_: ArrayView2<f64>| 1.7;
        let model = fit_fcm_with(data.view(), &FcmConfig::new(2), &custom).unwrap();
        assert_eq!(model.fuzzifier, 1.7);
    }

    #[test]
    fn fpc_bounds() {
        let crisp = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        assert_eq!(fuzzy_partition_coefficient(crisp.view()).unwrap(), 1.0);
        for k in 2..=10 {
            for n in [1, 7, 50] {
                let uniform = Array2::from_elem((n, k), 1.0 / k as f64);
                let fpc = fuzzy_partition_coefficient(uniform.view()).unwrap();
                assert_eq!(fpc, 1.0 / k as f64, "k={k} n={n}");
            }
        }
        assert!(fuzzy_partition_coefficient(Array2::<f64>::zeros((0, 3)).view()).is_err());
    }

    #[test]
    fn fpc_matches_naive_sum() {
        let mut r = rng::stream(5, 5);
        let mut u = Array2::from_shape_simple_fn((10, 3), || r.random_range(0.0..1.0));
        for mut row in u.outer_iter_mut() {
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        let mut naive = 0.0;
        for i in 0..10 {
            for j in 0..3 {
                naive += u[[i, j]] * u[[i, j]];
            }
        }
        naive /= 10.0;
        assert!((fuzzy_partition_coefficient(u.view()).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn harden_examples() {
        let crisp = array![[0.0, 1.0], [1.0, 0.0]];
        assert_eq!(harden(crisp.view()), vec![1, 0]);
        assert_eq!(harden(array![[0.5, 0.5]].view()), vec![0]);
        let mut r = rng::stream(2, 2);
        let u = Array2::from_shape_simple_fn((40, 4), || r.random_range(0.0..1.0));
        let labels = harden(u.view());
        for (i, row) in u.outer_iter().enumerate() {
            let mut best = 0;
            for j in 1..4 {
                if row[j] > row[best] {
                    best = j;
                }
            }
            assert_eq!(labels[i], best);
        }
    }

    #[test]
    fn fpc_picks_three_tight_blobs() {
        let data = blobs(&[[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]], 20, 0.3, 9);
        let sel = select_cluster_count(data.view(), &FcmConfig::new(2).with_seed(1), 2..=6).unwrap();
        assert_eq!(sel.best_k, 3);
        assert_eq!(sel.curve.iter().map(|p| p.k).collect::<Vec<_>>(), vec![2, 3, 4, 5, 6]);
        assert_eq!(sel.model.k(), 3);
    }

    #[test]
    fn selection_is_deterministic_on_one_blob() {
        let data = blobs(&[[0.0, 0.0]], 40, 1.0, 2);
        let a = select_cluster_count(data.view(), &FcmConfig::new(2), 2..=5).unwrap();
        let b = select_cluster_count(data.view(), &FcmConfig::new(2), 2..=5).unwrap();
        assert_eq!(a.best_k, b.best_k);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn selection_rejects_bad_range() {
        let data = blobs(&[[0.0, 0.0]], 5, 1.0, 2);
        assert!(select_cluster_count(data.view(), &FcmConfig::new(2), 2..=5).is_err());
        assert!(select_cluster_count(data.view(), &FcmConfig::new(2), 1..=3).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 3..=2;
        assert!(select_cluster_count(data.view(), &FcmConfig::new(2), empty).is_err());
    }

    #[test]
    fn model_json_keys() {
        let data = blobs(&[[0.0, 0.0], [5.0, 5.0]], 5, 0.2, 2);
        let model = fit_fcm(data.view(), &FcmConfig::new(2)).unwrap();
        let json = serde_json::to_value(&model).unwrap();
        for key in ["centroids", "u", "m", "labels", "objective_trace"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: ClusterModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, model);
    }

    proptest! {
        #[test]
        fn fpc_in_bounds(rows in prop::collection::vec(prop::collection::vec(0.001f64..1.0, 4), 1..20)) {
            let n = rows.len();
            let mut u = Array2::from_shape_vec((n, 4), rows.into_iter().flatten().collect()).unwrap();
            for mut row in u.outer_iter_mut() {
                let s = row.sum();
                row.mapv_inplace(|x| x / s);
            }
            let fpc = fuzzy_partition_coefficient(u.view()).unwrap();
            prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&fpc));
            // Permuting columns leaves FPC unchanged.
            let permuted = u.select(ndarray::Axis(1), &[2, 0, 3, 1]);
            prop_assert!((fuzzy_partition_coefficient(permuted.view()).unwrap() - fpc).abs() < 1e-15);
        }
    }
}
