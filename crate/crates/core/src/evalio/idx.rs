use std::fs;
use std::path::Path;

use super::{Dataset, EvalError, Result};
use crate::quanvolve::ImageU8;

/// Unsigned-byte rank-3 tensor.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Unsigned-byte rank-1 tensor.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn header(bytes: &[u8], path: &Path, magic: u32, rank: usize) -> Result<Vec<usize>> {
    let head = 4 + 4 * rank;
    if bytes.len() < head {
        return Err(EvalError::TruncatedFile {
            path: path.into(),
            expected: head,
            found: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(EvalError::BadMagic {
            path: path.into(),
            expected: magic,
            found,
        });
    }
    let dims: Vec<usize> = (0..rank).map(|k| be_u32(bytes, 4 + 4 * k) as usize).collect();
    let expected = head + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(EvalError::TruncatedFile {
            path: path.into(),
            expected,
            found: bytes.len(),
        });
    }
    Ok(dims)
}

/// Images from the bytes of an IDX rank-3 file; `path` is only used in errors.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<ImageU8>> {
    let dims = header(bytes, path, IDX_IMAGES_MAGIC, 3)?;
    let (count, h, w) = (dims[0], dims[1], dims[2]);
    let payload = &bytes[16..];
    if h * w == 0 {
        return Ok((0..count).map(|_| ImageU8::filled(h, w, 0)).collect());
    }
    Ok(payload
        .chunks_exact(h * w)
        .map(|px| ImageU8::new(h, w, px.to_vec()).expect("chunk matches dims"))
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    header(bytes, path, IDX_LABELS_MAGIC, 1)?;
    Ok(bytes[8..].to_vec())
}

/// Reads an IDX image file and its label file. Labels must be binary.
pub fn read_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let read = |p: &Path| {
        fs::read(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => EvalError::MissingFile(p.into()),
            _ => e.into(),
        })
    };
    let imgs = parse_idx_images(&read(images)?, images)?;
    let labs = parse_idx_labels(&read(labels)?, labels)?;
    Dataset::new(imgs, labs)
}

/// Writes `dataset` as an IDX pair. All images must share one size.
pub fn write_idx(dataset: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let (h, w) = match dataset.dims() {
        Some(d) => d,
        None if dataset.is_empty() => (0, 0),
        None => return Err(EvalError::MixedDimensions),
    };
    let mut out = Vec::with_capacity(16 + dataset.len() * h * w);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for d in [dataset.len(), h, w] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for img in &dataset.images {
        out.extend_from_slice(&img.data);
    }
    fs::write(images, out)?;

    let mut out = Vec::with_capacity(8 + dataset.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    out.extend_from_slice(&dataset.labels);
    fs::write(labels, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn files(dir: &Path, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let (i, l) = (dir.join("img.idx"), dir.join("lab.idx"));
        fs::write(&i, images).unwrap();
        fs::write(&l, labels).unwrap();
        (i, l)
    }

    #[test]
    fn hand_built_file() {
        let dir = tempfile::tempdir().unwrap();
        let images = [0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3, 4, 5, 6, 7, 8];
        let labels = [0, 0, 8, 1, 0, 0, 0, 2, 1, 0];
        let (i, l) = files(dir.path(), &images, &labels);
        let ds = read_idx(&i, &l).unwrap();
        assert_eq!(ds.images[0].data, vec![1, 2, 3, 4]);
        assert_eq!(ds.images[1].data, vec![5, 6, 7, 8]);
        assert_eq!(ds.images[0].get(1, 0), 3);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        let labels = [0, 0, 8, 1, 0, 0, 0, 1, 1];
        let bad_magic = [0, 0, 8, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9];
        let (i, l) = files(dir.path(), &bad_magic, &labels);
        assert!(matches!(
            read_idx(&i, &l),
            Err(EvalError::BadMagic {
                found: 0x801,
                expected: 0x803,
                ..
            })
        ));

        let two = [0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 4, 5];
        let (i, l) = files(dir.path(), &two, &labels);
        assert!(matches!(
            read_idx(&i, &l),
            Err(EvalError::CountMismatch { images: 2, labels: 1 })
        ));

        let short = [0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 4];
        let (i, l) = files(dir.path(), &short, &labels);
        assert!(matches!(
            read_idx(&i, &l),
            Err(EvalError::TruncatedFile {
                expected: 18,
                found: 17,
                ..
            })
        ));
        assert!(matches!(
            read_idx(&dir.path().join("nope"), &l),
            Err(EvalError::MissingFile(_))
        ));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let images = (0..5u8)
            .map(|k| ImageU8::new(3, 4, (0..12).map(|p| p * 20 + k).collect()).unwrap())
            .collect();
        let ds = Dataset::new(images, vec![0, 1, 1, 0, 1]).unwrap();
        let (i, l) = (dir.path().join("a"), dir.path().join("b"));
        write_idx(&ds, &i, &l).unwrap();
        assert_eq!(read_idx(&i, &l).unwrap(), ds);

        let mixed = Dataset::new(vec![ImageU8::filled(1, 1, 0), ImageU8::filled(2, 1, 0)], vec![0, 1]).unwrap();
        assert!(matches!(write_idx(&mixed, &i, &l), Err(EvalError::MixedDimensions)));
    }
}
