use std::io::Write;
use std::path::Path;

use image::{GrayImage, Luma};
use ndarray::ArrayView4;

use crate::data::denormalize;
use crate::{Error, Result};

/// Pixels of background between and around grid tiles.
pub const GRID_PAD: usize = 2;

/// `(rows, cols)` for `n` tiles: `⌊√n⌋` rows, enough columns to fit.
/// 8 → 2×4, 16 → 4×4, 1 → 1×1.
pub fn grid_shape(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let rows = n.isqrt();
    (rows, n.div_ceil(rows))
}

/// Tiles a `(N, 1, S, S)` batch in `[-1, 1]` into one grayscale image.
pub fn grid_image(batch: ArrayView4<f32>) -> Result<GrayImage> {
    let (n, c, h, w) = batch.dim();
    if n == 0 || c != 1 {
        return Err(Error::Dimension(format!("cannot grid a ({n}, {c}, {h}, {w}) batch")));
    }
    let (rows, cols) = grid_shape(n);
    let width = cols * (w + GRID_PAD) + GRID_PAD;
    let height = rows * (h + GRID_PAD) + GRID_PAD;
    let mut img = GrayImage::from_pixel(width as u32, height as u32, Luma([255]));
    for (k, tile) in batch.outer_iter().enumerate() {
        let (r, q) = (k / cols, k % cols);
        let (x0, y0) = (GRID_PAD + q * (w + GRID_PAD), GRID_PAD + r * (h + GRID_PAD));
        for ((y, x), &v) in tile.index_axis(ndarray::Axis(0), 0).indexed_iter() {
            let g = denormalize(f64::from(v)).round() as u8;
            img.put_pixel((x0 + x) as u32, (y0 + y) as u32, Luma([g]));
        }
    }
    Ok(img)
}

pub fn write_grid(batch: ArrayView4<f32>, path: &Path) -> Result<()> {
    grid_image(batch)?.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Writes a little-endian f32 `.npy` (format 1.0) file.
pub fn write_npy(batch: ArrayView4<f32>, path: &Path) -> Result<()> {
    let shape = batch.shape();
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    let mut header = format!(
        "{{'descr': '<f4', 'fortran_order': False, 'shape': ({}), }}",
        dims.join(", ")
    );
    // Magic (6) + version (2) + length (2) + header must be a multiple of 64.
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat(unpadded.next_multiple_of(64) - unpadded));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + 4 * batch.len());
    out.extend_from_slice(b"\x93NUMPY\x01\x00");
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in batch.as_standard_layout().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(8), (2, 4));
        assert_eq!(grid_shape(16), (4, 4));
        assert_eq!(grid_shape(1), (1, 1));
        assert_eq!(grid_shape(5), (2, 3));
        for n in 1..200 {
            let (r, c) = grid_shape(n);
            assert!(r * c >= n && (r - 1) * c < n, "n = {n}");
        }
    }

    #[test]
    fn grid_pixels() {
        let mut b = Array4::<f32>::from_elem((8, 1, 4, 4), -1.0);
        b[[5, 0, 1, 2]] = 1.0;
        let img = grid_image(b.view()).unwrap();
        assert_eq!(img.dimensions(), (4 * 6 + 2, 2 * 6 + 2));
        assert_eq!(img.get_pixel(0, 0)[0], 255);
        assert_eq!(img.get_pixel(2, 2)[0], 0);
        // Tile 5 sits in row 1, column 1.
        assert_eq!(img.get_pixel(2 + 6 + 2, 2 + 6 + 1)[0], 255);
    }

    #[test]
    fn npy_header_is_aligned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.npy");
        let b = Array4::<f32>::from_shape_fn((2, 1, 3, 3), |(n, _, y, x)| (n * 9 + y * 3 + x) as f32);
        write_npy(b.view(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        let header = std::str::from_utf8(&bytes[10..10 + hlen]).unwrap();
        assert!(header.contains("'shape': (2, 1, 3, 3)"));
        assert_eq!(bytes.len(), 10 + hlen + 18 * 4);
        assert_eq!(f32::from_le_bytes(bytes[10 + hlen + 4 * 17..].try_into().unwrap()), 17.0);
    }
}
