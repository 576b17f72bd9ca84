//! Shared test support: naive reference implementations of the indices and
//! builders for the synthetic geometries the experiments are checked on.
//!
//! The references work on plain `Vec<Vec<f64>>` and loop over every pair
//! directly, sharing no code with the library.
#![allow(dead_code)]

use cvilab::rng;
use ndarray::Array2;
use rand::Rng as _;

pub type Points = Vec<Vec<f64>>;

pub fn rows(a: &Array2<f64>) -> Points {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

fn members<'a>(x: &'a Points, labels: &'a [usize], c: usize) -> Vec<&'a Vec<f64>> {
    x.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect()
}

fn mean(points: &[&Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    (0..d).map(|t| points.iter().map(|p| p[t]).sum::<f64>() / points.len() as f64).collect()
}

pub fn silhouette(x: &Points, labels: &[usize]) -> f64 {
    let clusters = distinct(labels);
    let mut total = 0.0;
    for i in 0..x.len() {
        let own = labels.iter().filter(|&&l| l == labels[i]).count();
        if own == 1 {
            continue;
        }
        let mut a = 0.0;
        for j in 0..x.len() {
            if j != i && labels[j] == labels[i] {
                a += dist(&x[i], &x[j]);
            }
        }
        a /= (own - 1) as f64;
        let mut b = f64::INFINITY;
        for &c in &clusters {
            if c == labels[i] {
                continue;
            }
            let m = members(x, labels, c);
            let avg = m.iter().map(|p| dist(&x[i], p)).sum::<f64>() / m.len() as f64;
            b = b.min(avg);
        }
        total += (b - a) / a.max(b);
    }
    total / x.len() as f64
}

pub fn calinski_harabasz(x: &Points, labels: &[usize]) -> f64 {
    let clusters = distinct(labels);
    let all: Vec<&Vec<f64>> = x.iter().collect();
    let grand = mean(&all);
    let (mut between, mut within) = (0.0, 0.0);
    for &c in &clusters {
        let m = members(x, labels, c);
        let centroid = mean(&m);
        between += m.len() as f64 * dist(&centroid, &grand).powi(2);
        within += m.iter().map(|p| dist(p, &centroid).powi(2)).sum::<f64>();
    }
    let (n, k) = (x.len() as f64, clusters.len() as f64);
    (between / (k - 1.0)) / (within / (n - k))
}

pub fn davies_bouldin(x: &Points, labels: &[usize]) -> f64 {
    let clusters = distinct(labels);
    let stats: Vec<(Vec<f64>, f64)> = clusters
        .iter()
        .map(|&c| {
            let m = members(x, labels, c);
            let centroid = mean(&m);
            let s = m.iter().map(|p| dist(p, &centroid)).sum::<f64>() / m.len() as f64;
            (centroid, s)
        })
        .collect();
    let mut total = 0.0;
    for i in 0..stats.len() {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..stats.len() {
            if i != j {
                worst = worst.max((stats[i].1 + stats[j].1) / dist(&stats[i].0, &stats[j].0));
            }
        }
        total += worst;
    }
    total / stats.len() as f64
}

pub fn dunn(x: &Points, labels: &[usize]) -> f64 {
    let (mut sep, mut diam) = (f64::INFINITY, 0.0f64);
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i == j {
                continue;
            }
            let d = dist(&x[i], &x[j]);
            if labels[i] == labels[j] {
                diam = diam.max(d);
            } else {
                sep = sep.min(d);
            }
        }
    }
    sep / diam
}

/// Fuzzy Xie–Beni with explicit centroids: a straight triple loop.
pub fn xie_beni(x: &Points, u: &Points, centroids: &Points, m: f64) -> f64 {
    let mut num = 0.0;
    for (i, p) in x.iter().enumerate() {
        for (j, c) in centroids.iter().enumerate() {
            num += u[i][j].powf(m) * dist(p, c).powi(2);
        }
    }
    let mut sep = f64::INFINITY;
    for a in 0..centroids.len() {
        for b in 0..centroids.len() {
            if a != b {
                sep = sep.min(dist(&centroids[a], &centroids[b]).powi(2));
            }
        }
    }
    num / (x.len() as f64 * sep)
}

pub fn xie_beni_crisp(x: &Points, labels: &[usize]) -> f64 {
    let clusters = distinct(labels);
    let centroids: Points = clusters.iter().map(|&c| mean(&members(x, labels, c))).collect();
    let u: Points = labels
        .iter()
        .map(|l| clusters.iter().map(|c| if c == l { 1.0 } else { 0.0 }).collect())
        .collect();
    xie_beni(x, &u, &centroids, 2.0)
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

/// Standard normal draw by Box–Muller.
pub fn normal(r: &mut rng::Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A random labelled instance: `k` Gaussian blobs in `d` dimensions, every
/// cluster non-empty. Sizes, spreads and centre spacing vary with `seed`.
pub struct Instance {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    pub k: usize,
}

pub fn random_instance(seed: u64, max_n: usize, max_k: usize, max_d: usize) -> Instance {
    let mut r = rng::stream(seed, 7);
    let k = r.random_range(2..=max_k);
    let n = r.random_range((k + 1).max(3)..=max_n);
    let d = r.random_range(1..=max_d);
    let spacing = r.random_range(0.5..8.0);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| spacing * normal(&mut r)).collect()).collect();
    let mut labels: Vec<usize> = (0..k).collect();
    labels.extend((k..n).map(|_| r.random_range(0..k)));
    let mut points = Array2::zeros((n, d));
    for (i, &l) in labels.iter().enumerate() {
        let spread = r.random_range(0.2..2.0);
        for t in 0..d {
            points[[i, t]] = centers[l][t] + spread * normal(&mut r);
        }
    }
    Instance { points, labels, k }
}

/// `per` points around each centre, Gaussian with standard deviation `sd`.
pub fn gaussian_blobs(centers: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng::stream(seed, 11);
    let d = centers[0].len();
    let mut points = Array2::zeros((centers.len() * per, d));
    let mut labels = Vec::with_capacity(centers.len() * per);
    for (c, center) in centers.iter().enumerate() {
        for i in 0..per {
            for t in 0..d {
                points[[c * per + i, t]] = center[t] + sd * normal(&mut r);
            }
            labels.push(c);
        }
    }
    (points, labels)
}

/// Appends single points as new clusters, labelled after the existing ones.
pub fn with_singletons(points: &Array2<f64>, labels: &[usize], extra: &[Vec<f64>]) -> (Array2<f64>, Vec<usize>) {
    let d = points.ncols();
    let mut data: Vec<f64> = points.iter().copied().collect();
    let mut labels = labels.to_vec();
    let next = labels.iter().max().map_or(0, |m| m + 1);
    for (i, p) in extra.iter().enumerate() {
        data.extend_from_slice(p);
        labels.push(next + i);
    }
    (Array2::from_shape_vec((labels.len(), d), data).unwrap(), labels)
}

/// Three tight blobs plus three singletons far from everything and from
/// each other.
pub fn three_blobs_three_far_singletons() -> (Array2<f64>, Vec<usize>) {
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![5.0, 8.0]];
    let (p, l) = gaussian_blobs(&centers, 30, 0.7, 31);
    with_singletons(&p, &l, &[vec![120.0, 10.0], vec![-90.0, 80.0], vec![10.0, -130.0]])
}

/// Three blobs plus one singleton, either far from the data centroid or
/// exactly on it.
pub fn ch_dichotomy(far: bool) -> (Array2<f64>, Vec<usize>) {
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![5.0, 8.0]];
    let (p, l) = gaussian_blobs(&centers, 30, 0.7, 47);
    let centroid = p.mean_axis(ndarray::Axis(0)).unwrap().to_vec();
    let singleton = if far { vec![centroid[0] + 60.0, centroid[1] + 45.0] } else { centroid };
    with_singletons(&p, &l, &[singleton])
}

/// Five well-separated 2-D Gaussian blobs of `per` points each, centres on
/// a circle of radius 12.
pub fn five_blobs(per: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let centers: Vec<Vec<f64>> = (0..5)
        .map(|j| {
            let t = j as f64 / 5.0 * std::f64::consts::TAU;
            vec![12.0 * t.cos(), 12.0 * t.sin()]
        })
        .collect();
    gaussian_blobs(&centers, per, 1.0, seed)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Sample covariance (divisor `N - 1`) by direct summation.
pub fn covariance(x: &Points) -> Vec<Vec<f64>> {
    let (n, d) = (x.len(), x[0].len());
    let mean: Vec<f64> = (0..d).map(|t| x.iter().map(|p| p[t]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| x.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect()
}

/// Fraction of points on which two labelings agree under the best
/// one-to-one matching of their labels (exhaustive for small k, greedy on
/// the contingency table otherwise).
pub fn matched_agreement(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let mut cells: Vec<(usize, usize, usize)> =
        (0..ka).flat_map(|i| (0..kb).map(move |j| (i, j))).map(|(i, j)| (table[i][j], i, j)).collect();
    cells.sort_by(|x, y| y.cmp(x));
    let (mut used_a, mut used_b, mut hits) = (vec![false; ka], vec![false; kb], 0);
    for (count, i, j) in cells {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            hits += count;
        }
    }
    hits as f64 / a.len() as f64
}
