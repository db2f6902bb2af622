//! IDX tensors as distributed with MNIST.
//!
//! Layout: big-endian `u32` magic, one big-endian `u32` per dimension, then the
//! payload as unsigned bytes. Images use magic 2051 (three dimensions), labels
//! 2049 (one dimension).

use std::fs;
use std::path::Path;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Idx {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(self.err(self.bytes.len(), format!("file ends while reading {what}")));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..end].try_into().unwrap());
        self.pos = end;
        Ok(v)
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(self.err(
                self.bytes.len(),
                format!(
                    "truncated payload: header promises {len} bytes from offset {}, file has {}",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            ));
        }
        if end < self.bytes.len() {
            return Err(self.err(end, format!("{} trailing bytes after payload", self.bytes.len() - end)));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let m = self.u32("magic number")?;
        if m != expected {
            return Err(self.err(0, format!("bad magic number {m:#010x}, expected {expected:#010x} ({expected})")));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

impl IdxImages {
    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { path, bytes, pos: 0 };
        c.magic(IMAGE_MAGIC)?;
        let count = c.u32("image count")? as usize;
        let rows = c.u32("row count")? as usize;
        let cols = c.u32("column count")? as usize;
        let pixels = c.payload(count * rows * cols)?.to_vec();
        Ok(Self { count, rows, cols, pixels })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(path, &read(path)?)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [IMAGE_MAGIC, self.count as u32, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl IdxLabels {
    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { path, bytes, pos: 0 };
        c.magic(LABEL_MAGIC)?;
        let count = c.u32("label count")? as usize;
        let labels = c.payload(count)?.to_vec();
        Ok(Self { labels })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(path, &read(path)?)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

/// Loads an image/label file pair as a multiclass dataset with pixels scaled by 1/255.
///
/// The number of classes is 10, or `max label + 1` if that is larger.
pub fn load_idx<T: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<T>> {
    let images = IdxImages::read(images_path)?;
    let labels = IdxLabels::read(labels_path)?;
    if images.count != labels.labels.len() {
        return Err(Error::Idx {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!(
                "label count {} does not match image count {} in {}",
                labels.labels.len(),
                images.count,
                images_path.display()
            ),
        });
    }
    let d = images.rows * images.cols;
    let scale = T::lit(1.0 / 255.0);
    let data = images.pixels.iter().map(|&p| T::lit(p as f64) * scale).collect();
    let inputs = Matrix::from_vec(images.count, d, data)?;
    let classes = labels.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(10);
    let name = images_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    Dataset::from_labels(
        inputs,
        labels.labels.iter().map(|&l| l as u32).collect(),
        classes,
        name,
    )
}

/// Writes a multiclass dataset with pixel values in `[0, 1]` back to an IDX pair.
///
/// Pixels are quantized as `round(255 x)`, the inverse of the 1/255 scaling in
/// [`load_idx`]. `side` gives the image height and width.
pub fn save_idx<T: Scalar>(ds: &Dataset<T>, side: (usize, usize), images_path: &Path, labels_path: &Path) -> Result<()> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::invalid("save_idx needs a multiclass dataset"))?;
    if side.0 * side.1 != ds.input_dim() {
        return Err(Error::invalid(format!(
            "image side {}x{} does not match input dimension {}",
            side.0,
            side.1,
            ds.input_dim()
        )));
    }
    let mut pixels = Vec::with_capacity(ds.len() * ds.input_dim());
    for &x in ds.inputs().as_slice() {
        let v = x.to_f64_lossy();
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        pixels.push((v * 255.0).round() as u8);
    }
    let images = IdxImages {
        count: ds.len(),
        rows: side.0,
        cols: side.1,
        pixels,
    };
    let labels = IdxLabels {
        labels: labels
            .iter()
            .map(|&l| u8::try_from(l).map_err(|_| Error::invalid(format!("label {l} does not fit in a byte"))))
            .collect::<Result<_>>()?,
    };
    fs::write(images_path, images.encode()).map_err(|e| Error::io(format!("writing {}", images_path.display()), e))?;
    fs::write(labels_path, labels.encode()).map_err(|e| Error::io(format!("writing {}", labels_path.display()), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (IdxImages, IdxLabels) {
        let pixels = (0..3 * 2 * 2).map(|v| (v * 21) as u8).collect();
        (
            IdxImages { count: 3, rows: 2, cols: 2, pixels },
            IdxLabels { labels: vec![7, 0, 3] },
        )
    }

    #[test]
    fn bad_magic_names_expected_value() {
        let mut bytes = fixture().0.encode();
        bytes[..4].copy_from_slice(&0u32.to_be_bytes());
        let err = IdxImages::decode(Path::new("x"), &bytes).unwrap_err().to_string();
        assert!(err.contains("2051"), "{err}");
        assert!(err.contains("offset 0"), "{err}");
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = fixture().0.encode();
        bytes.truncate(bytes.len() - 2);
        let err = IdxImages::decode(Path::new("x"), &bytes).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        let err = IdxLabels::decode(Path::new("y"), &[0, 0, 8, 1, 0]).unwrap_err().to_string();
        assert!(err.contains("label count"), "{err}");
    }

    #[test]
    fn encode_decode_round_trip() {
        let (img, lab) = fixture();
        assert_eq!(IdxImages::decode(Path::new("i"), &img.encode()).unwrap(), img);
        assert_eq!(IdxLabels::decode(Path::new("l"), &lab.encode()).unwrap(), lab);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = fixture();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        fs::write(&ip, img.encode()).unwrap();
        fs::write(&lp, IdxLabels { labels: vec![1, 2] }.encode()).unwrap();
        let err = load_idx::<f64>(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("does not match"), "{err}");
    }

    #[test]
    fn dataset_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = fixture();
        let (ip, lp) = (dir.path().join("a-images"), dir.path().join("a-labels"));
        fs::write(&ip, img.encode()).unwrap();
        fs::write(&lp, lab.encode()).unwrap();
        let first = load_idx::<f64>(&ip, &lp).unwrap();
        assert_eq!(first.len(), 3);
        assert_eq!(first.input_dim(), 4);
        assert_eq!(first.labels().unwrap(), &[7, 0, 3]);

        let (ip2, lp2) = (dir.path().join("b-images"), dir.path().join("b-labels"));
        save_idx(&first, (2, 2), &ip2, &lp2).unwrap();
        assert_eq!(fs::read(&ip2).unwrap(), img.encode());
        let second = load_idx::<f64>(&ip2, &lp2).unwrap();
        assert_eq!(first.inputs(), second.inputs());
        assert_eq!(first.targets(), second.targets());
    }
}
