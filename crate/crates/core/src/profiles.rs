//! Smart-meter ingestion and daily load profiles.
//!
//! Raw readings arrive as `household_id,timestamp,kw` rows at 15-minute
//! resolution. Each household is summarized by the per-slot median over all
//! observed days, and the 96-slot median profile is scaled to unit Euclidean
//! norm so that clustering compares the *shape* of demand rather than its
//! magnitude.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::io;

use chrono::{DateTime, NaiveDateTime, Timelike};
use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::format::sig9;
use crate::SLOTS_PER_DAY;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{origin}:{line}: {reason}")]
    Malformed {
        origin: String,
        line: u64,
        reason: String,
    },
    #[error("{origin}:{line}: load {value} kW is not a finite non-negative number")]
    InvalidLoad {
        origin: String,
        line: u64,
        value: String,
    },
    #[error("{origin}:{line}: duplicate reading for household {household} at {timestamp}")]
    DuplicateReading {
        origin: String,
        line: u64,
        household: String,
        timestamp: NaiveDateTime,
    },
    #[error("household {household}: slot {slot} ({time}) has no observations")]
    MissingSlot {
        household: String,
        slot: usize,
        time: String,
    },
    #[error("profile is all zeros and cannot be normalized")]
    ZeroProfile,
    #[error("profile contains a non-finite value")]
    NonFinite,
    #[error("duplicate household id {0}")]
    DuplicateHousehold(String),
    #[error("profile {household} has {found} values, expected {expected}")]
    WrongLength {
        household: String,
        found: usize,
        expected: usize,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
    #[error("synthetic profile {index} of cluster {cluster} was clipped to all zeros; reduce the spread")]
    ClippedToZero { cluster: usize, index: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

type Result<T, E = ProfileError> = std::result::Result<T, E>;

/// Time-ordered readings of one household.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingSeries {
    pub household_id: String,
    pub samples: Vec<(NaiveDateTime, f64)>,
}

impl ReadingSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Accumulates readings from one or more CSV sources (e.g. one file per
/// city) into per-household series.
#[derive(Debug, Default)]
pub struct ReadingsCollector {
    series: BTreeMap<String, BTreeMap<NaiveDateTime, f64>>,
}

impl ReadingsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses one `household_id,timestamp,kw` CSV. `origin` names the source
    /// in error messages.
    pub fn add_csv<R: io::Read>(&mut self, origin: &str, src: R) -> Result<()> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(src);
        let malformed = |line: u64, reason: String| ProfileError::Malformed {
            origin: origin.to_string(),
            line,
            reason,
        };

        let headers = reader
            .headers()
            .map_err(|e| malformed(1, e.to_string()))?
            .clone();
        let expected = ["household_id", "timestamp", "kw"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(malformed(
                1,
                format!("expected header `household_id,timestamp,kw`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }

        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                malformed(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
            }
            let household = &record[0];
            if household.is_empty() {
                return Err(malformed(line, "empty household_id".into()));
            }
            let timestamp = parse_timestamp(&record[1]).map_err(|reason| malformed(line, reason))?;
            let raw_kw = &record[2];
            let kw: f64 = raw_kw.parse().map_err(|_| ProfileError::InvalidLoad {
                origin: origin.to_string(),
                line,
                value: raw_kw.to_string(),
            })?;
            if !kw.is_finite() || kw < 0.0 {
                return Err(ProfileError::InvalidLoad {
                    origin: origin.to_string(),
                    line,
                    value: raw_kw.to_string(),
                });
            }
            match self
                .series
                .entry(household.to_string())
                .or_default()
                .entry(timestamp)
            {
                Entry::Vacant(slot) => {
                    slot.insert(kw);
                }
                Entry::Occupied(_) => {
                    return Err(ProfileError::DuplicateReading {
                        origin: origin.to_string(),
                        line,
                        household: household.to_string(),
                        timestamp,
                    })
                }
            }
        }
        Ok(())
    }

    /// One series per household, ordered by household id, samples time-sorted.
    pub fn finish(self) -> Vec<ReadingSeries> {
        self.series
            .into_iter()
            .map(|(household_id, samples)| ReadingSeries {
                household_id,
                samples: samples.into_iter().collect(),
            })
            .collect()
    }
}

/// Parses a single `household_id,timestamp,kw` CSV stream.
pub fn parse_readings<R: io::Read>(src: R) -> Result<Vec<ReadingSeries>> {
    let mut collector = ReadingsCollector::new();
    collector.add_csv("<input>", src)?;
    Ok(collector.finish())
}

/// Accepts ISO-8601 date-times with or without a UTC offset. Offsets keep
/// the local wall-clock time, which is what determines the daily slot.
fn parse_timestamp(raw: &str) -> std::result::Result<NaiveDateTime, String> {
    let ts = DateTime::parse_from_rfc3339(raw)
        .map(|dt| dt.naive_local())
        .or_else(|_| DateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%:z").map(|dt| dt.naive_local()))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%.f"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M"))
        .map_err(|_| format!("unparseable timestamp `{raw}`"))?;
    if ts.minute() % 15 != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(format!("timestamp `{raw}` is not on a 15-minute boundary"));
    }
    Ok(ts)
}

fn slot_of(ts: &NaiveDateTime) -> usize {
    (ts.hour() as usize * 60 + ts.minute() as usize) / 15
}

/// `HHMM` label of a daily slot, e.g. slot 95 → `2345`.
pub fn slot_label(slot: usize) -> String {
    let minutes = slot * 15;
    format!("{:02}{:02}", minutes / 60, minutes % 60)
}

/// Median of `values`; even counts average the two central order statistics.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per-slot median over all days of `series`, in kW.
pub fn median_daily_profile(series: &ReadingSeries) -> Result<Vec<f64>> {
    let mut by_slot: Vec<Vec<f64>> = vec![Vec::new(); SLOTS_PER_DAY];
    for (ts, kw) in &series.samples {
        by_slot[slot_of(ts)].push(*kw);
    }
    by_slot
        .iter_mut()
        .enumerate()
        .map(|(slot, values)| {
            if values.is_empty() {
                Err(ProfileError::MissingSlot {
                    household: series.household_id.clone(),
                    slot,
                    time: slot_label(slot),
                })
            } else {
                Ok(median(values))
            }
        })
        .collect()
}

/// Scales `profile` to unit Euclidean norm.
pub fn l2_normalize(profile: &[f64]) -> Result<Vec<f64>> {
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(ProfileError::NonFinite);
    }
    // Scale by the max magnitude first so tiny or huge loads cannot
    // underflow/overflow the sum of squares.
    let scale = profile.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(ProfileError::ZeroProfile);
    }
    let norm = profile.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt();
    Ok(profile.iter().map(|v| (v / scale) / norm).collect())
}

/// A household's normalized median daily profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyProfile {
    pub household_id: String,
    pub values: Vec<f64>,
}

impl DailyProfile {
    pub fn from_series(series: &ReadingSeries) -> Result<Self> {
        let median = median_daily_profile(series)?;
        Ok(Self {
            household_id: series.household_id.clone(),
            values: l2_normalize(&median)?,
        })
    }
}

/// Households × slots matrix of profiles, rows in stable household order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatrix {
    ids: Vec<String>,
    data: Array2<f64>,
}

impl ProfileMatrix {
    pub fn new(ids: Vec<String>, data: Array2<f64>) -> Result<Self> {
        if ids.len() != data.nrows() {
            return Err(ProfileError::InvalidSynthSpec(format!(
                "{} ids for {} rows",
                ids.len(),
                data.nrows()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(ProfileError::DuplicateHousehold(id.clone()));
            }
        }
        Ok(Self { ids, data })
    }

    pub fn from_profiles(profiles: Vec<DailyProfile>) -> Result<Self> {
        let d = profiles.first().map_or(SLOTS_PER_DAY, |p| p.values.len());
        let mut ids = Vec::with_capacity(profiles.len());
        let mut flat = Vec::with_capacity(profiles.len() * d);
        for p in profiles {
            if p.values.len() != d {
                return Err(ProfileError::WrongLength {
                    household: p.household_id,
                    found: p.values.len(),
                    expected: d,
                });
            }
            flat.extend_from_slice(&p.values);
            ids.push(p.household_id);
        }
        let data = Array2::from_shape_vec((ids.len(), d), flat).expect("shape checked above");
        Self::new(ids, data)
    }

    /// Median-and-normalize every series.
    pub fn from_series(series: &[ReadingSeries]) -> Result<Self> {
        let profiles = series
            .iter()
            .map(DailyProfile::from_series)
            .collect::<Result<Vec<_>>>()?;
        Self::from_profiles(profiles)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.data.ncols()
    }

    /// Writes `household_id,t0000,…,t2345` with 9 significant digits.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["household_id".to_string()];
        header.extend((0..self.dimension()).map(|s| format!("t{}", slot_label(s))));
        out.write_record(&header).map_err(csv_io)?;
        for (id, row) in self.ids.iter().zip(self.data.outer_iter()) {
            let mut record = Vec::with_capacity(row.len() + 1);
            record.push(id.clone());
            record.extend(row.iter().map(|v| sig9(*v)));
            out.write_record(&record).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a profile CSV written by [`ProfileMatrix::write_csv`].
    pub fn read_csv<R: io::Read>(origin: &str, r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let malformed = |line: u64, reason: String| ProfileError::Malformed {
            origin: origin.to_string(),
            line,
            reason,
        };
        let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
        if headers.get(0) != Some("household_id") || headers.len() < 2 {
            return Err(malformed(1, "expected header `household_id,t0000,…`".into()));
        }
        let d = headers.len() - 1;
        let mut ids = Vec::new();
        let mut flat = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            ids.push(record[0].to_string());
            for field in record.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| malformed(line, format!("bad number `{field}`")))?;
                flat.push(v);
            }
        }
        let data = Array2::from_shape_vec((ids.len(), d), flat)
            .map_err(|e| malformed(0, e.to_string()))?;
        Self::new(ids, data)
    }
}

fn csv_io(e: csv::Error) -> ProfileError {
    ProfileError::Io(io::Error::other(e))
}

/// One planted cluster of a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCluster {
    pub size: usize,
    /// Noise-free raw load shape, in kW.
    pub template: Vec<f64>,
    /// Standard deviation of the isotropic Gaussian noise added per slot, in kW.
    pub spread: f64,
}

/// Where synthetic outliers are planted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutlierPlacement {
    /// At least 5× the largest inter-template distance from every template.
    #[default]
    Far,
    /// Close to the average of the templates, i.e. near the data centroid.
    Near,
}

/// Recipe for a synthetic household population.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub clusters: Vec<SynthCluster>,
    pub outlier_count: usize,
    pub outlier_placement: OutlierPlacement,
    pub seed: u64,
}

impl SynthSpec {
    /// `cluster_count` clusters of `size` households each, with templates
    /// drawn from `seed` by [`random_templates`].
    pub fn with_random_templates(
        cluster_count: usize,
        size: usize,
        spread: f64,
        outlier_count: usize,
        seed: u64,
    ) -> Self {
        let templates = random_templates(cluster_count, SLOTS_PER_DAY, seed);
        Self {
            clusters: templates
                .into_iter()
                .map(|template| SynthCluster { size, template, spread })
                .collect(),
            outlier_count,
            outlier_placement: OutlierPlacement::Far,
            seed,
        }
    }

    fn validate(&self) -> Result<usize> {
        let invalid = |msg: String| Err(ProfileError::InvalidSynthSpec(msg));
        if self.clusters.is_empty() {
            return invalid("cluster_count must be at least 1".into());
        }
        let d = self.clusters[0].template.len();
        if d == 0 {
            return invalid("templates must be non-empty".into());
        }
        for (j, c) in self.clusters.iter().enumerate() {
            if c.size == 0 {
                return invalid(format!("cluster {j} has size 0"));
            }
            if c.template.len() != d {
                return invalid(format!("cluster {j} template has length {}, expected {d}", c.template.len()));
            }
            if !(c.spread >= 0.0 && c.spread.is_finite()) {
                return invalid(format!("cluster {j} spread must be finite and >= 0"));
            }
            if c.template.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return invalid(format!("cluster {j} template must be finite and non-negative"));
            }
        }
        if self.outlier_count > d {
            return invalid(format!("at most {d} outliers are supported"));
        }
        Ok(d)
    }
}

/// Smooth daily load shapes: a base load plus 2–4 Gaussian usage peaks.
pub fn random_templates(count: usize, slots: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = crate::rng::stream(seed, u64::MAX);
    (0..count)
        .map(|_| {
            let base = rng.random_range(0.1..0.4);
            let peaks: Vec<(f64, f64, f64)> = (0..rng.random_range(2..=4))
                .map(|_| {
                    let center = rng.random_range(0.0..slots as f64);
                    let width = rng.random_range(2.0..10.0);
                    let height = rng.random_range(0.5..2.5);
                    (center, width, height)
                })
                .collect();
            (0..slots)
                .map(|s| {
                    let t = s as f64;
                    base + peaks
                        .iter()
                        .map(|&(c, w, h)| {
                            // Wrap around midnight.
                            let dt = (t - c).abs().min(slots as f64 - (t - c).abs());
                            h * (-0.5 * (dt / w).powi(2)).exp()
                        })
                        .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// A generated population with its planted labels. Outlier `i` carries
/// label `clusters.len() + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub profiles: ProfileMatrix,
    pub labels: Vec<usize>,
}

/// Samples the population described by `spec`: template plus Gaussian noise,
/// clipped at zero and normalized, followed by the outliers.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    let d = spec.validate()?;
    let mut rng = crate::rng::stream(spec.seed, 0);
    let mut profiles = Vec::new();
    let mut labels = Vec::new();

    for (j, cluster) in spec.clusters.iter().enumerate() {
        for i in 0..cluster.size {
            let raw: Vec<f64> = cluster
                .template
                .iter()
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (t + cluster.spread * z).max(0.0)
                })
                .collect();
            let values = l2_normalize(&raw).map_err(|e| match e {
                ProfileError::ZeroProfile => ProfileError::ClippedToZero { cluster: j, index: i },
                other => other,
            })?;
            profiles.push(DailyProfile {
                household_id: format!("c{j}_{i:04}"),
                values,
            });
            labels.push(j);
        }
    }

    if spec.outlier_count > 0 {
        let templates: Vec<&[f64]> = spec.clusters.iter().map(|c| c.template.as_slice()).collect();
        for (i, raw) in outlier_shapes(spec, &templates, d, &mut rng).into_iter().enumerate() {
            profiles.push(DailyProfile {
                household_id: format!("outlier_{i}"),
                values: l2_normalize(&raw)?,
            });
            labels.push(spec.clusters.len() + i);
        }
    }

    Ok(SyntheticData {
        profiles: ProfileMatrix::from_profiles(profiles)?,
        labels,
    })
}

fn outlier_shapes(spec: &SynthSpec, templates: &[&[f64]], d: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<f64>> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let max_norm = templates.iter().map(|t| norm(t)).fold(0.0, f64::max);
    match spec.outlier_placement {
        OutlierPlacement::Far => {
            let mut max_sep = 0.0f64;
            for (a, ta) in templates.iter().enumerate() {
                for tb in &templates[a + 1..] {
                    let dist = ta.iter().zip(tb.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                    max_sep = max_sep.max(dist);
                }
            }
            // A single-slot spike of height h sits at least h - ‖t‖ from any
            // template t.
            let reference = if max_sep > 0.0 { max_sep } else { max_norm.max(1.0) };
            let height = 5.0 * reference + max_norm + 1.0;
            let slots = rand::seq::index::sample(rng, d, spec.outlier_count);
            slots
                .into_iter()
                .map(|s| {
                    let mut v = vec![0.0; d];
                    v[s] = height;
                    v
                })
                .collect()
        }
        OutlierPlacement::Near => {
            let mut mean = vec![0.0; d];
            for t in templates {
                for (m, x) in mean.iter_mut().zip(t.iter()) {
                    *m += x / templates.len() as f64;
                }
            }
            let jitter = 0.02 * max_norm / (d as f64).sqrt();
            (0..spec.outlier_count)
                .map(|_| {
                    mean.iter()
                        .map(|m| {
                            let z: f64 = StandardNormal.sample(rng);
                            (m + jitter * z).max(0.0)
                        })
                        .collect()
                })
                .collect()
        }
    }
}
