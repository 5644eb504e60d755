//! Labelled dense datasets: IDX (MNIST layout) and CSV ingestion, seeded
//! synthetic Gaussian blobs and seeded train/validation/test splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("feature dimension must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                what: "feature values",
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::domain(format!("label {bad} not below class count {classes}")));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            dim: self.dim,
            labels,
            classes: self.classes,
        }
    }

    /// First `n` rows (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    pub fn with_classes(mut self, classes: usize) -> Result<Self> {
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::domain(format!("label {bad} not below class count {classes}")));
        }
        self.classes = classes;
        Ok(self)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn read_be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn require_len(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(())
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    require_len(path, bytes, 4)?;
    let found = read_be_u32(bytes, 0);
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Reads an IDX image file (`0x00000803`) and label file (`0x00000801`).
/// Pixels are scaled by `1/255`. The class count is `max label + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;

    check_magic(images_path, &images, IDX_IMAGES_MAGIC)?;
    require_len(images_path, &images, 16)?;
    let count = read_be_u32(&images, 4) as usize;
    let rows = read_be_u32(&images, 8) as usize;
    let cols = read_be_u32(&images, 12) as usize;

    check_magic(labels_path, &labels, IDX_LABELS_MAGIC)?;
    require_len(labels_path, &labels, 8)?;
    let label_count = read_be_u32(&labels, 4) as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let dim = rows * cols;
    require_len(images_path, &images, 16 + count * dim)?;
    require_len(labels_path, &labels, 8 + count)?;

    let features = images[16..16 + count * dim]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels: Vec<usize> = labels[8..8 + count].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, dim, labels, classes)
}

/// Writes the IDX pair for `pixels` (one byte per value, row-major images).
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    rows: u32,
    cols: u32,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    std::fs::write(images_path, img)?;
    std::fs::write(labels_path, lab)?;
    Ok(())
}

/// Reads rows of `label,f1,...,fD`. Every row must have the same width.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut width = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                line,
                expected,
                found: record.len(),
            });
        }
        if expected < 2 {
            return Err(Error::domain("csv rows need a label and at least one feature"));
        }
        let label: usize = record[0].parse().map_err(|_| Error::NonNumeric {
            line,
            column: 1,
            value: record[0].to_string(),
        })?;
        labels.push(label);
        for (c, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    line,
                    column: c + 1,
                    value: cell.to_string(),
                })?;
            features.push(v);
        }
    }
    let dim = width.map_or(0, |w| w - 1);
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, dim, labels, classes)
}

/// `k` isotropic Gaussian clusters of `per_class` points each.
///
/// Cluster `c` is centred on the simplex vertex `e_(c mod dims)` plus a
/// seeded offset in `[0, 0.2)` per coordinate; points add `N(0, spread^2)`
/// noise. Rows cycle through the classes (`label = row % k`).
pub fn synth_blobs(k: usize, dims: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::domain("synthetic blobs need at least two classes"));
    }
    if dims == 0 || per_class == 0 {
        return Err(Error::domain("dims and per_class must be positive"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::domain(format!("spread must be positive, got {spread}")));
    }
    let mut mean_rng = rng::substream(seed, &[0]);
    let means: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            (0..dims)
                .map(|d| {
                    let vertex = if d == c % dims { 1.0 } else { 0.0 };
                    vertex + mean_rng.random_range(0.0..0.2)
                })
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, spread).map_err(|e| Error::domain(e.to_string()))?;
    let mut point_rng = rng::substream(seed, &[1]);
    let n = k * per_class;
    let mut features = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let c = r % k;
        labels.push(c);
        features.extend(means[c].iter().map(|m| m + noise.sample(&mut point_rng)));
    }
    Dataset::new(features, dims, labels, k)
}

/// Seeded train/validation/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Shuffles row indices with `seed` and cuts them into parts of
/// `round(f * N)` rows (the last part takes the remainder).
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<Splits> {
    if fractions.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::domain(format!("split fractions must be non-negative, got {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("split fractions sum to {total}, expected 1")));
    }
    let n = dataset.len();
    let a = (fractions[0] * n as f64).round() as usize;
    let b = (fractions[1] * n as f64).round() as usize;
    let sizes = [a, b, n.saturating_sub(a + b)];
    if a + b > n {
        return Err(Error::EmptySplit { part: 2 });
    }
    if let Some(part) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptySplit { part });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from_seed(seed));
    Ok(Splits {
        train: dataset.select(&order[..a]),
        validation: dataset.select(&order[a..a + b]),
        test: dataset.select(&order[a + b..]),
    })
}

/// Seeded two-way partition: the first part gets `round(fraction * N)` rows.
pub fn holdout(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let n = dataset.len();
    let a = (fraction * n as f64).round() as usize;
    if a == 0 {
        return Err(Error::EmptySplit { part: 0 });
    }
    if a == n {
        return Err(Error::EmptySplit { part: 1 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from_seed(seed));
    Ok((dataset.select(&order[..a]), dataset.select(&order[a..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy(n: usize) -> Dataset {
        let features = (0..n * 2).map(|v| v as f64).collect();
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::new(features, 2, labels, 2).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0; 3], 2, vec![0], 1).is_err());
        assert!(Dataset::new(vec![0.0; 2], 2, vec![3], 2).is_err());
        assert!(Dataset::new(vec![], 0, vec![], 2).is_err());
    }

    #[test]
    fn idx_fixture_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&img, &lab, 1, 2, &[0, 255, 255, 0], &[1, 0]).unwrap();
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.classes(), 2);
        assert_eq!(ds.features(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn idx_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&img, &lab, 1, 2, &[0, 255, 255, 0], &[1, 0]).unwrap();

        // labels with the image magic
        let mut bytes = std::fs::read(&lab).unwrap();
        bytes[3] = 0x03;
        let bad = dir.path().join("bad");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(
            load_idx(&img, &bad),
            Err(Error::BadMagic { expected: IDX_LABELS_MAGIC, found: 0x803, .. })
        ));

        // truncated pixels
        let bytes = std::fs::read(&img).unwrap();
        let short = dir.path().join("short");
        std::fs::write(&short, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(load_idx(&short, &lab), Err(Error::Truncated { .. })));

        // count mismatch
        let (img3, lab3) = (dir.path().join("img3"), dir.path().join("lab3"));
        write_idx(&img3, &lab3, 1, 1, &[1, 2], &[0, 1]).unwrap();
        let mut bytes = std::fs::read(&lab3).unwrap();
        bytes[7] = 3;
        bytes.push(0);
        std::fs::write(&lab3, &bytes).unwrap();
        assert!(matches!(
            load_idx(&img3, &lab3),
            Err(Error::CountMismatch { images: 2, labels: 3 })
        ));
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "label,x,y\n0,0.5,1\n2,1e-3,-4\n");
        let ds = load_csv(&p, true).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.classes(), 3);
        assert_eq!(ds.row(1), &[1e-3, -4.0]);

        let p = write_file(&dir, "b.csv", "0,1,2\n1,2\n");
        assert!(matches!(
            load_csv(&p, false),
            Err(Error::RaggedRow { line: 2, expected: 3, found: 2 })
        ));
        let p = write_file(&dir, "c.csv", "0,1,2\n1,abc,3\n");
        assert!(matches!(
            load_csv(&p, false),
            Err(Error::NonNumeric { line: 2, column: 2, .. })
        ));
        let p = write_file(&dir, "d.csv", "x,1,2\n");
        assert!(matches!(load_csv(&p, false), Err(Error::NonNumeric { column: 1, .. })));
        let p = write_file(&dir, "e.csv", "");
        assert!(matches!(load_csv(&p, false), Err(Error::EmptyDataset)));
    }

    #[test]
    fn blobs_are_balanced_and_seeded() {
        let ds = synth_blobs(3, 8, 100, 0.1, 1).unwrap();
        assert_eq!(ds.len(), 300);
        assert_eq!(ds.class_counts(), vec![100, 100, 100]);
        assert_eq!(ds, synth_blobs(3, 8, 100, 0.1, 1).unwrap());
        assert_ne!(ds, synth_blobs(3, 8, 100, 0.1, 2).unwrap());
        assert!(synth_blobs(1, 8, 10, 0.1, 1).is_err());
        assert!(synth_blobs(2, 8, 10, 0.0, 1).is_err());
    }

    #[test]
    fn degenerate_blobs_are_nearest_mean_separable() {
        let ds = synth_blobs(4, 3, 25, 1e-9, 5).unwrap();
        // class means estimated from the data itself
        let mut means = vec![vec![0.0; 3]; 4];
        for i in 0..ds.len() {
            for d in 0..3 {
                means[ds.labels()[i]][d] += ds.row(i)[d] / 25.0;
            }
        }
        let correct = (0..ds.len())
            .filter(|&i| {
                let dist = |m: &Vec<f64>| -> f64 {
                    m.iter().zip(ds.row(i)).map(|(a, b)| (a - b).powi(2)).sum()
                };
                let best = (0..4)
                    .min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b])))
                    .unwrap();
                best == ds.labels()[i]
            })
            .count();
        assert_eq!(correct, ds.len());
    }

    #[test]
    fn split_sizes_and_errors() {
        let ds = toy(10);
        let s = split(&ds, [0.6, 0.2, 0.2], 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
        assert_eq!(s, split(&ds, [0.6, 0.2, 0.2], 3).unwrap());
        assert!(matches!(
            split(&ds, [1.0, 0.0, 0.0], 3),
            Err(Error::EmptySplit { part: 1 })
        ));
        assert!(split(&ds, [0.5, 0.2, 0.2], 3).is_err());
        assert!(split(&ds, [1.2, -0.1, -0.1], 3).is_err());
    }

    #[test]
    fn holdout_partitions_rows() {
        let ds = toy(10);
        let (a, b) = holdout(&ds, 0.75, 2).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut firsts: Vec<f64> = a.features().iter().chain(b.features()).step_by(2).copied().collect();
        firsts.sort_by(f64::total_cmp);
        assert_eq!(firsts, (0..10).map(|i| (2 * i) as f64).collect::<Vec<_>>());
        assert!(holdout(&ds, 0.01, 2).is_err());
        assert!(holdout(&ds, 1.0, 2).is_err());
    }
}
