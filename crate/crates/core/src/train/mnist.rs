use std::io::Read;
use std::path::{Path, PathBuf};

use crate::charlab::open_maybe_gz;
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Images with pixels scaled to `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_features: usize,
    pub n_classes: usize,
    pixels: Vec<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        n_features: usize,
        n_classes: usize,
        pixels: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if n_features == 0 || pixels.len() != n_features * labels.len() {
            return Err(Error::Format(format!(
                "{} pixels do not form {} samples of {n_features} features",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| usize::from(l) >= n_classes) {
            return Err(Error::Format(format!(
                "label {l} outside {n_classes} classes"
            )));
        }
        Ok(Self {
            n_features,
            n_classes,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, k: usize) -> &[f32] {
        &self.pixels[k * self.n_features..(k + 1) * self.n_features]
    }

    pub fn label(&self, k: usize) -> usize {
        usize::from(self.labels[k])
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// One-hot target vector of sample `k`.
    pub fn target(&self, k: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.n_classes];
        t[self.label(k)] = 1.0;
        t
    }

    /// First `n` samples (or all if fewer).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            n_features: self.n_features,
            n_classes: self.n_classes,
            pixels: self.pixels[..n * self.n_features].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Dataset,
    pub test: Dataset,
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    open_maybe_gz(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn be_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn header(buf: &[u8], path: &Path, magic: u32, n_dims: usize) -> Result<Vec<usize>> {
    let need = 4 + 4 * n_dims;
    if buf.len() < need {
        return Err(Error::Format(format!(
            "{}: truncated header ({} bytes)",
            path.display(),
            buf.len()
        )));
    }
    let got = be_u32(buf, 0);
    if got != magic {
        return Err(Error::Format(format!(
            "{}: magic number {got:#010x}, expected {magic:#010x}",
            path.display()
        )));
    }
    let dims: Vec<usize> = (0..n_dims)
        .map(|d| be_u32(buf, 4 + 4 * d) as usize)
        .collect();
    let body: usize = dims.iter().product();
    if buf.len() != need + body {
        return Err(Error::Format(format!(
            "{}: expected {} data bytes, found {}",
            path.display(),
            body,
            buf.len() - need
        )));
    }
    Ok(dims)
}

/// Reads an IDX3 image file. Returns `(count, rows, cols, pixels in [0, 1])`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let buf = read_all(path)?;
    let dims = header(&buf, path, IMAGE_MAGIC, 3)?;
    let pixels = buf[16..].iter().map(|&b| f32::from(b) / 255.0).collect();
    Ok((dims[0], dims[1], dims[2], pixels))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let buf = read_all(path)?;
    header(&buf, path, LABEL_MAGIC, 1)?;
    Ok(buf[8..].to_vec())
}

/// Finds `name` or `name.gz` in `dir`.
fn locate(dir: &Path, name: &str) -> Option<PathBuf> {
    [dir.join(name), dir.join(format!("{name}.gz"))]
        .into_iter()
        .find(|p| p.is_file())
}

fn load_split(dir: &Path, images: &str, labels: &str) -> Result<Dataset> {
    let img = locate(dir, images);
    let lab = locate(dir, labels);
    let (Some(img), Some(lab)) = (img, lab) else {
        return Err(Error::Config(format!(
            "MNIST files not found in {}: expected {images}[.gz] and {labels}[.gz] \
             (scripts/fetch_mnist.sh downloads them)",
            dir.display()
        )));
    };
    let (n, rows, cols, pixels) = read_idx_images(&img)?;
    let labels = read_idx_labels(&lab)?;
    if labels.len() != n {
        return Err(Error::Format(format!(
            "{} has {n} images but {} has {} labels",
            img.display(),
            lab.display(),
            labels.len()
        )));
    }
    Dataset::new(rows * cols, 10, pixels, labels)
}

/// Loads the standard train and test splits from `dir`, gzip or raw.
pub fn load_mnist(dir: &Path) -> Result<Mnist> {
    Ok(Mnist {
        train: load_split(dir, TRAIN_IMAGES, TRAIN_LABELS)?,
        test: load_split(dir, TEST_IMAGES, TEST_LABELS)?,
    })
}
