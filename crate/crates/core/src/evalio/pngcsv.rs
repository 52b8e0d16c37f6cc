use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use png::{BitDepth, ColorType, Decoder, Encoder};

use super::{Dataset, EvalError, Result};
use crate::quanvolve::ImageU8;

fn png_error(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Png {
        path: path.into(),
        message: e.to_string(),
    }
}

fn read_gray(path: &Path) -> Result<ImageU8> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => EvalError::MissingFile(path.into()),
        _ => e.into(),
    })?;
    let mut reader = Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| png_error(path, e))?;
    let info = reader.info();
    if info.color_type != ColorType::Grayscale || info.bit_depth != BitDepth::Eight {
        return Err(EvalError::NonGrayscale {
            path: path.into(),
            detail: format!("{:?} at {:?} bits", info.color_type, info.bit_depth),
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_error(path, "image too large"))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| png_error(path, e))?;
    let (h, w) = (frame.height as usize, frame.width as usize);
    let data = buf
        .chunks(frame.line_size)
        .take(h)
        .flat_map(|row| &row[..w])
        .copied()
        .collect();
    Ok(ImageU8::new(h, w, data).expect("decoded size matches"))
}

/// Reads the images listed in a `filename,label` CSV, resolving file names
/// against `dir`. Images keep the CSV row order.
pub fn read_png_csv(dir: &Path, labels_csv: &Path) -> Result<Dataset> {
    let file = File::open(labels_csv).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => EvalError::MissingFile(labels_csv.into()),
        _ => e.into(),
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            EvalError::Csv(csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("missing column {name:?}"),
            )))
        })
    };
    let (fcol, lcol) = (col("filename")?, col("label")?);

    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let value = rec.get(lcol).unwrap_or_default();
        let label = match value {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(EvalError::BadLabel {
                    row: row + 1,
                    value: value.into(),
                })
            }
        };
        let path: PathBuf = dir.join(rec.get(fcol).unwrap_or_default());
        images.push(read_gray(&path)?);
        labels.push(label);
    }
    Dataset::new(images, labels)
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png_gray(path: &Path, image: &ImageU8) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = Encoder::new(file, image.width as u32, image.height as u32);
    enc.set_color(ColorType::Grayscale);
    enc.set_depth(BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| png_error(path, e))?;
    writer.write_image_data(&image.data).map_err(|e| png_error(path, e))?;
    writer.finish().map_err(|e| png_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn img(h: usize, w: usize, seed: u8) -> ImageU8 {
        ImageU8::new(
            h,
            w,
            (0..h * w)
                .map(|p| (p as u8).wrapping_mul(37).wrapping_add(seed))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn reads_in_csv_order() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = [img(4, 5, 1), img(4, 5, 2), img(3, 3, 3)];
        for (k, im) in imgs.iter().enumerate() {
            write_png_gray(&dir.path().join(format!("{k}.png")), im).unwrap();
        }
        let csv = dir.path().join("labels.csv");
        fs::write(&csv, "filename,label\n2.png,1\n0.png,0\n1.png,1\n").unwrap();
        let ds = read_png_csv(dir.path(), &csv).unwrap();
        assert_eq!(ds.images, vec![imgs[2].clone(), imgs[0].clone(), imgs[1].clone()]);
        assert_eq!(ds.labels, vec![1, 0, 1]);
        // mixed sizes are accepted here
        assert_eq!(ds.dims(), None);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        write_png_gray(&dir.path().join("a.png"), &img(2, 2, 0)).unwrap();
        let csv = dir.path().join("labels.csv");

        fs::write(&csv, "filename,label\na.png,2\n").unwrap();
        assert!(matches!(
            read_png_csv(dir.path(), &csv),
            Err(EvalError::BadLabel { row: 1, ref value }) if value == "2"
        ));

        fs::write(&csv, "filename,label\nb.png,0\n").unwrap();
        assert!(matches!(read_png_csv(dir.path(), &csv), Err(EvalError::MissingFile(_))));

        let rgb = dir.path().join("rgb.png");
        let mut enc = Encoder::new(BufWriter::new(File::create(&rgb).unwrap()), 1, 1);
        enc.set_color(ColorType::Rgb);
        enc.set_depth(BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[1, 2, 3]).unwrap();
        w.finish().unwrap();
        fs::write(&csv, "filename,label\nrgb.png,0\n").unwrap();
        assert!(matches!(
            read_png_csv(dir.path(), &csv),
            Err(EvalError::NonGrayscale { .. })
        ));

        fs::write(&csv, "name,label\na.png,0\n").unwrap();
        assert!(matches!(read_png_csv(dir.path(), &csv), Err(EvalError::Csv(_))));
    }
}
