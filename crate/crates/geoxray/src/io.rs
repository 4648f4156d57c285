//! File formats: raw little-endian binaries, CSV and 8-bit PGM images.
//!
//! Binary layout: two little-endian `u32` header words followed by the
//! values as row-major little-endian `f64`. Fields store `(n, 0)`, sinograms
//! `(n_beta, n_alpha)`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use geoxray_core::{Grid2D, ScalarField2D, Sinogram};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::RunError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> RunError {
    RunError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_binary(path: &Path, header: (u32, u32), values: &[f64]) -> Result<(), RunError> {
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(8 + 8 * values.len());
    buf.extend_from_slice(&header.0.to_le_bytes());
    buf.extend_from_slice(&header.1.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(io_err(path))
}

fn read_binary(path: &Path) -> Result<((u32, u32), Vec<f64>), RunError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.len() < 8 || (bytes.len() - 8) % 8 != 0 {
        return Err(format_err(path, format!("bad file length {}", bytes.len())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let values = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(((word(0), word(4)), values))
}

fn header_word(path: &Path, v: usize) -> Result<u32, RunError> {
    u32::try_from(v).map_err(|_| format_err(path, format!("dimension {v} does not fit in u32")))
}

pub fn write_field_bin(path: &Path, f: &ScalarField2D) -> Result<(), RunError> {
    let n = header_word(path, f.grid().n())?;
    write_binary(path, (n, 0), f.values())
}

pub fn read_field_bin(path: &Path) -> Result<ScalarField2D, RunError> {
    let ((n, reserved), values) = read_binary(path)?;
    if reserved != 0 {
        return Err(format_err(path, format!("reserved header word is {reserved}, expected 0")));
    }
    let n = n as usize;
    if values.len() != n * n {
        return Err(format_err(path, format!("expected {} values, found {}", n * n, values.len())));
    }
    let grid = Grid2D::new(n)?;
    Ok(ScalarField2D::from_values(grid, values)?)
}

pub fn write_sinogram_bin(path: &Path, s: &Sinogram) -> Result<(), RunError> {
    let (nb, na) = s.shape();
    write_binary(path, (header_word(path, nb)?, header_word(path, na)?), s.values())
}

pub fn read_sinogram_bin(path: &Path) -> Result<Sinogram, RunError> {
    let ((nb, na), values) = read_binary(path)?;
    let (nb, na) = (nb as usize, na as usize);
    if values.len() != nb * na {
        return Err(format_err(path, format!("expected {} values, found {}", nb * na, values.len())));
    }
    Ok(Sinogram::from_values(nb, na, values)?)
}

/// Writes `rows` as a headerless CSV table.
fn write_table(path: &Path, cols: usize, values: &[f64]) -> Result<(), RunError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for row in values.chunks(cols) {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| format_err(path, e.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

/// `n` rows of `n` values; row `i` holds `y = coord(i)`.
pub fn write_field_csv(path: &Path, f: &ScalarField2D) -> Result<(), RunError> {
    write_table(path, f.grid().n(), f.values())
}

pub fn read_field_csv(path: &Path) -> Result<ScalarField2D, RunError> {
    let rows = read_table(path)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(format_err(path, "field CSV is not square"));
    }
    Ok(ScalarField2D::from_values(Grid2D::new(n)?, rows.concat())?)
}

/// `n_beta` rows of `n_alpha` values.
pub fn write_sinogram_csv(path: &Path, s: &Sinogram) -> Result<(), RunError> {
    write_table(path, s.n_alpha(), s.values())
}

fn read_table(path: &Path) -> Result<Vec<Vec<f64>>, RunError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(File::open(path).map_err(io_err(path))?);
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
            rec.iter()
                .map(|v| v.trim().parse::<f64>().map_err(|_| format_err(path, format!("bad number {v:?}"))))
                .collect()
        })
        .collect()
}

/// CSV with a header row.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<(), RunError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| format_err(path, e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| format_err(path, e.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

/// Maps `[min, max]` linearly onto `0..=255`, rounding half to even. A
/// constant field maps to 0. Rows are flipped so that `y = 1` is the top
/// of the image.
pub fn pgm_pixels(f: &ScalarField2D) -> (Vec<u8>, f64, f64) {
    let (min, max) = (f.min(), f.max());
    let n = f.grid().n();
    let range = max - min;
    let mut px = Vec::with_capacity(n * n);
    for iy in (0..n).rev() {
        for ix in 0..n {
            let v = f.get(ix, iy);
            let p = if range > 0.0 {
                ((v - min) / range * 255.0).round_ties_even().clamp(0.0, 255.0)
            } else {
                0.0
            };
            px.push(p as u8);
        }
    }
    (px, min, max)
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    let mut s = pgm.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Writes a binary (P5) PGM and a sidecar `<path>.txt` recording `min` and
/// `max`, so that `v = min + p / 255 * (max - min)` inverts the mapping.
pub fn emit_image(f: &ScalarField2D, path: &Path) -> Result<(), RunError> {
    if !f.is_finite() {
        return Err(format_err(path, "field has non-finite values"));
    }
    let n = f.grid().n() as u32;
    let (px, min, max) = pgm_pixels(f);
    let mut w = create(path)?;
    PnmEncoder::new(&mut w)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&px, n, n, ExtendedColorType::L8)
        .map_err(|e| format_err(path, e.to_string()))?;
    w.flush().map_err(io_err(path))?;
    let side = sidecar_path(path);
    let mut s = create(&side)?;
    write!(s, "min = {min}\nmax = {max}\n")
        .and_then(|_| s.flush())
        .map_err(io_err(&side))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixels_round_half_to_even() {
        let g = Grid2D::new(16).unwrap();
        let mut f = ScalarField2D::zeros(g);
        f.values_mut()[0] = -1.0;
        f.values_mut()[1] = 1.0;
        let (px, min, max) = pgm_pixels(&f);
        assert_eq!((min, max), (-1.0, 1.0));
        // 0 maps to 127.5, which rounds to the even 128.
        assert_eq!(px[0], 128);
        // Node 0 is the bottom-left corner, i.e. the first pixel of the last row.
        assert_eq!(px[15 * 16], 0);
        assert_eq!(px[15 * 16 + 1], 255);
    }

    #[test]
    fn constant_field_maps_to_zero() {
        let f = ScalarField2D::constant(Grid2D::new(16).unwrap(), 3.5);
        let (px, min, max) = pgm_pixels(&f);
        assert!(px.iter().all(|&p| p == 0));
        assert_eq!(min, max);
    }
}
