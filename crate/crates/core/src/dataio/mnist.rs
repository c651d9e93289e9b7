use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::idx::{parse_idx, IdxData, IdxError, IdxTensor};
use crate::error::{Error, Result};
use crate::objectives::Dataset;

/// Read an IDX file, transparently gunzipping it when it starts with the gzip
/// magic bytes.
pub fn read_idx_file(path: &Path) -> Result<IdxTensor> {
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let raw = std::fs::read(path).map_err(io_err)?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io_err)?;
        out
    } else {
        raw
    };
    Ok(parse_idx(&bytes)?)
}

/// Paths of an image/label IDX pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistFiles {
    pub images: PathBuf,
    pub labels: PathBuf,
}

const PREFIXES: [&str; 3] = ["", "train-", "t10k-"];

impl MnistFiles {
    /// Find an image/label pair in `dir`, accepting the usual
    /// `[train-|t10k-]{images-idx3,labels-idx1}-ubyte[.gz]` names.
    pub fn in_dir(dir: &Path) -> Result<Self> {
        for prefix in PREFIXES {
            let images = find(dir, &format!("{prefix}images-idx3-ubyte"));
            let labels = find(dir, &format!("{prefix}labels-idx1-ubyte"));
            if let (Some(images), Some(labels)) = (images, labels) {
                return Ok(MnistFiles { images, labels });
            }
        }
        Err(Error::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "expected an MNIST pair such as images-idx3-ubyte[.gz] + labels-idx1-ubyte[.gz] \
                 (train-/t10k- prefixes also accepted)",
            ),
        })
    }
}

fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// Pixels scaled to `[0, 1]` (row-major, 784 per image) and digit labels.
pub fn load_mnist(files: &MnistFiles) -> Result<(Vec<f64>, Vec<u8>)> {
    let images = read_idx_file(&files.images)?;
    let labels = read_idx_file(&files.labels)?;
    let (IdxData::U8(pixels), IdxData::U8(digits)) = (images.data(), labels.data()) else {
        return Err(Error::InvalidConfig("MNIST files must hold unsigned bytes".into()));
    };
    let [n, rows, cols] = images.dims() else {
        return Err(Error::InvalidConfig(format!("image tensor must be 3-D, got dims {:?}", images.dims())));
    };
    if labels.dims() != [*n] {
        return Err(IdxError::ElementCount { expected: *n, found: labels.data().len() }.into());
    }
    debug_assert_eq!(pixels.len(), n * rows * cols);
    Ok((pixels.iter().map(|&p| p as f64 / 255.0).collect(), digits.clone()))
}

/// Even digits map to `+1`, odd digits to `-1`.
pub fn parity_labels(digits: &[u8]) -> Result<Vec<f64>> {
    digits
        .iter()
        .map(|&d| match d {
            0..=9 if d % 2 == 0 => Ok(1.0),
            0..=9 => Ok(-1.0),
            _ => Err(Error::InvalidDigit(d)),
        })
        .collect()
}

/// The even/odd classification set, optionally with a constant bias feature.
pub fn mnist_dataset(files: &MnistFiles, bias: bool) -> Result<Dataset> {
    let (pixels, digits) = load_mnist(files)?;
    let data = Dataset::labeled(pixels, 784, parity_labels(&digits)?)?;
    Ok(if bias { data.with_bias() } else { data })
}
