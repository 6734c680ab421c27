//! Feature datasets: CSV + `.meta` sidecar, fold splitting, fill fractions
//! and a seeded synthetic generator.
//!
//! The feature file is `label,segment,f0,...,f{n-1}` with one instance per
//! line. The sidecar sits next to it with the `.meta` extension and holds
//! TOML with `n`, `alphabet`, `classes`, and optionally `seed` and a
//! `[quantizer]` table with `lo`/`hi` arrays.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::Quantizer;

pub const SEGMENTS: u8 = 100;
pub const FOLDS: usize = 10;
pub const TEST_BUCKETS: usize = 10;
pub const REMEMBER_BUCKETS: usize = 33;

/// Fill percentages accepted by [`take_fraction`].
pub const FILL_PERCENTS: [u32; 8] = [1, 2, 4, 8, 16, 32, 64, 100];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alphabet {
    #[serde(rename = "emnist-47")]
    Emnist47,
    #[serde(rename = "emnist-36")]
    Emnist36,
    #[serde(rename = "synthetic")]
    Synthetic,
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alphabet::Emnist47 => "emnist-47",
            Alphabet::Emnist36 => "emnist-36",
            Alphabet::Synthetic => "synthetic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub n: usize,
    pub alphabet: Alphabet,
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<Quantizer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub label: usize,
    pub segment: u8,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: Metadata,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn classes(&self) -> usize {
        self.meta.classes.len()
    }

    /// Checks every instance against the metadata.
    pub fn validate(&self) -> Result<()> {
        if self.meta.n == 0 || self.meta.classes.is_empty() {
            return Err(Error::Domain(
                "dataset needs at least one feature and one class".into(),
            ));
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.features.len() != self.meta.n {
                return Err(Error::Domain(format!(
                    "instance {i}: {} features, expected {}",
                    inst.features.len(),
                    self.meta.n
                )));
            }
            if inst.label >= self.classes() {
                return Err(Error::Domain(format!(
                    "instance {i}: label {} out of range for {} classes",
                    inst.label,
                    self.classes()
                )));
            }
            if inst.segment >= SEGMENTS {
                return Err(Error::Domain(format!(
                    "instance {i}: segment {} out of range",
                    inst.segment
                )));
            }
        }
        if let Some(q) = &self.meta.quantizer {
            if q.n() != self.meta.n {
                return Err(Error::Domain(format!(
                    "quantizer has {} features, dataset has {}",
                    q.n(),
                    self.meta.n
                )));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> Summary {
        let mut per_class = vec![0usize; self.classes()];
        let mut segments = [false; SEGMENTS as usize];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for inst in &self.instances {
            per_class[inst.label] += 1;
            segments[inst.segment as usize] = true;
            for &x in &inst.features {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        Summary {
            instances: self.instances.len(),
            n: self.meta.n,
            alphabet: self.meta.alphabet,
            per_class,
            segments_used: segments.iter().filter(|&&s| s).count(),
            feature_min: lo,
            feature_max: hi,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub instances: usize,
    pub n: usize,
    pub alphabet: Alphabet,
    pub per_class: Vec<usize>,
    pub segments_used: usize,
    pub feature_min: f64,
    pub feature_max: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances: {}", self.instances)?;
        writeln!(f, "features: {}", self.n)?;
        writeln!(f, "alphabet: {}", self.alphabet)?;
        writeln!(f, "classes: {}", self.per_class.len())?;
        let min = self.per_class.iter().min().copied().unwrap_or(0);
        let max = self.per_class.iter().max().copied().unwrap_or(0);
        writeln!(f, "instances per class: min {min}, max {max}")?;
        writeln!(f, "segments used: {}/{}", self.segments_used, SEGMENTS)?;
        write!(
            f,
            "feature range: [{}, {}]",
            self.feature_min, self.feature_max
        )
    }
}

/// The sidecar path for a feature file: same basename, `.meta` extension.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Rounds to 9 significant digits, the precision features are stored at.
pub fn round_feature(x: f64) -> f64 {
    format!("{x:.8e}").parse().expect("formatted float parses")
}

pub(crate) fn format_feature(x: f64) -> String {
    format!("{}", round_feature(x))
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Metadata {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

pub fn write_metadata(meta: &Metadata, path: &Path) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| Error::Metadata {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a feature file and its sidecar.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_with_meta(path, &meta_path(path))
}

pub fn read_dataset_with_meta(path: &Path, meta: &Path) -> Result<Dataset> {
    let meta = read_metadata(meta)?;
    let instances = read_instances(path, &meta)?;
    let ds = Dataset { meta, instances };
    ds.validate().map_err(|e| Error::Metadata {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(ds)
}

fn read_instances(path: &Path, meta: &Metadata) -> Result<Vec<Instance>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = header_fields(meta.n);
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(parse_err(
            1,
            format!(
                "header has {} columns, expected `label,segment,f0,...,f{}`",
                header.len(),
                meta.n - 1
            ),
        ));
    }

    let classes = meta.classes.len();
    let mut instances = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected.len() {
            return Err(parse_err(
                line,
                format!(
                    "{} columns, expected {} ({} features)",
                    record.len(),
                    expected.len(),
                    meta.n
                ),
            ));
        }
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad label `{}`", &record[0])))?;
        if label >= classes {
            return Err(parse_err(
                line,
                format!("label {label} out of range for {classes} classes"),
            ));
        }
        let segment: u8 = record[1]
            .trim()
            .parse()
            .ok()
            .filter(|&s| s < SEGMENTS)
            .ok_or_else(|| parse_err(line, format!("bad segment `{}`", &record[1])))?;
        let features = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(i, field)| {
                field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(line, format!("bad feature f{i} `{field}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        instances.push(Instance {
            label,
            segment,
            features,
        });
    }
    Ok(instances)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn header_fields(n: usize) -> Vec<String> {
    ["label".to_string(), "segment".to_string()]
        .into_iter()
        .chain((0..n).map(|i| format!("f{i}")))
        .collect()
}

/// Writes the feature file and its sidecar.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let io = |e: csv::Error| csv_error(path, e);
    writer.write_record(header_fields(ds.n())).map_err(io)?;
    for inst in &ds.instances {
        let mut record = vec![inst.label.to_string(), inst.segment.to_string()];
        record.extend(inst.features.iter().map(|&x| format_feature(x)));
        writer.write_record(&record).map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    write_metadata(&ds.meta, &meta_path(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Train,
    Remember,
    Test,
}

/// Role of a segment bucket in a fold: ten test buckets starting at
/// `10 * fold`, the next 33 buckets (cyclically) remembered, the remaining
/// 57 used for training.
pub fn role_of_segment(segment: u8, fold: usize) -> Role {
    let start = TEST_BUCKETS * fold;
    let offset = (segment as usize + SEGMENTS as usize - start) % SEGMENTS as usize;
    if offset < TEST_BUCKETS {
        Role::Test
    } else if offset < TEST_BUCKETS + REMEMBER_BUCKETS {
        Role::Remember
    } else {
        Role::Train
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub fold: usize,
    pub roles: Vec<Role>,
}

impl SplitAssignment {
    /// Instances with the given role, in file order.
    pub fn select<'a>(&self, ds: &'a Dataset, role: Role) -> Vec<&'a Instance> {
        ds.instances
            .iter()
            .zip(&self.roles)
            .filter(|(_, &r)| r == role)
            .map(|(inst, _)| inst)
            .collect()
    }

    pub fn indices(&self, role: Role) -> Vec<usize> {
        (0..self.roles.len())
            .filter(|&i| self.roles[i] == role)
            .collect()
    }
}

pub fn split_for_fold(ds: &Dataset, fold: usize) -> Result<SplitAssignment> {
    if fold >= FOLDS {
        return Err(Error::Domain(format!("fold {fold} outside 0..{FOLDS}")));
    }
    let roles = ds
        .instances
        .iter()
        .map(|inst| role_of_segment(inst.segment, fold))
        .collect();
    Ok(SplitAssignment { fold, roles })
}

pub fn check_fill(percent: u32) -> Result<()> {
    if FILL_PERCENTS.contains(&percent) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "unsupported fill percent {percent}; expected one of {FILL_PERCENTS:?}"
        )))
    }
}

/// Per class, the first `ceil(percent / 100 * count)` items in order.
pub fn take_fraction<'a>(instances: &[&'a Instance], percent: u32) -> Result<Vec<&'a Instance>> {
    check_fill(percent)?;
    let mut totals: BTreeMap<usize, usize> = BTreeMap::new();
    for inst in instances {
        *totals.entry(inst.label).or_default() += 1;
    }
    let quota: BTreeMap<usize, usize> = totals
        .into_iter()
        .map(|(label, count)| (label, (count * percent as usize).div_ceil(100)))
        .collect();
    let mut taken: BTreeMap<usize, usize> = BTreeMap::new();
    Ok(instances
        .iter()
        .copied()
        .filter(|inst| {
            let t = taken.entry(inst.label).or_default();
            *t += 1;
            *t <= quota[&inst.label]
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct SynthParams {
    pub classes: usize,
    pub per_class: usize,
    pub n: usize,
    /// Register height the data is meant for; centroids are kept several
    /// bins of this grid apart on average.
    pub rows_hint: usize,
    /// Standard deviation of the per-feature noise around each centroid.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            classes: 10,
            per_class: 500,
            n: 64,
            rows_hint: 64,
            separation: 0.05,
            seed: 0,
        }
    }
}

const CENTROID_ATTEMPTS: usize = 1000;

/// Seeded Gaussian clusters around random centroids in `[0, 1]^n`.
///
/// Instances are interleaved by class; the k-th instance of each class gets
/// segment `k % 100`.
pub fn synth_generate(params: &SynthParams) -> Result<Dataset> {
    let SynthParams {
        classes,
        per_class,
        n,
        rows_hint,
        separation,
        seed,
    } = *params;
    if classes < 2 || per_class < 10 || n == 0 || rows_hint < 2 {
        return Err(Error::Domain(format!(
            "synthetic data needs >= 2 classes, >= 10 per class, n >= 1, rows_hint >= 2 \
             (got {classes}, {per_class}, {n}, {rows_hint})"
        )));
    }
    let noise = Normal::new(0.0, separation)
        .map_err(|_| Error::Domain(format!("invalid separation {separation}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let min_gap = 4.0 / (rows_hint - 1) as f64;
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(classes);
    while centroids.len() < classes {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..CENTROID_ATTEMPTS {
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let gap = centroids
                .iter()
                .map(|o| c.iter().zip(o).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            if gap >= min_gap {
                best = Some((gap, c));
                break;
            }
            if best.as_ref().is_none_or(|(g, _)| gap > *g) {
                best = Some((gap, c));
            }
        }
        centroids.push(best.expect("at least one attempt").1);
    }

    let mut instances = Vec::with_capacity(classes * per_class);
    for k in 0..per_class {
        for (label, centroid) in centroids.iter().enumerate() {
            let features = centroid
                .iter()
                .map(|&c| round_feature(c + noise.sample(&mut rng)))
                .collect();
            instances.push(Instance {
                label,
                segment: (k % SEGMENTS as usize) as u8,
                features,
            });
        }
    }

    Ok(Dataset {
        meta: Metadata {
            n,
            alphabet: Alphabet::Synthetic,
            classes: (0..classes).map(|c| format!("c{c}")).collect(),
            seed: Some(seed),
            quantizer: None,
        },
        instances,
    })
}

/// Occluded copy of a dataset: in every instance, `corrupted` distinct
/// features chosen at random are overwritten with uniform noise over the
/// dataset's feature range.
pub fn synth_occlude(ds: &Dataset, corrupted: usize, seed: u64) -> Result<Dataset> {
    if corrupted > ds.n() {
        return Err(Error::Domain(format!(
            "cannot corrupt {corrupted} of {} features",
            ds.n()
        )));
    }
    let summary = ds.summary();
    let (lo, hi) = (summary.feature_min, summary.feature_max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ds.clone();
    for inst in &mut out.instances {
        for i in rand::seq::index::sample(&mut rng, ds.n(), corrupted) {
            inst.features[i] = round_feature(lo + rng.random::<f64>() * (hi - lo));
        }
    }
    out.meta.seed = Some(seed);
    Ok(out)
}
