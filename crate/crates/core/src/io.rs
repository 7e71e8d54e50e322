//! Image files and blur-map rasters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::estimate::BlurMap;
use crate::image::GrayImage;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];
const RASTER_MAGIC: &[u8; 8] = b"DFBM1\0\0\0";

fn luma(rgb: &[u16], max: f64) -> f64 {
    (LUMA[0] * rgb[0] as f64 + LUMA[1] * rgb[1] as f64 + LUMA[2] * rgb[2] as f64) / max
}

/// Reads a PNG or PNM file as intensities in `[0, 1]`. Colour images are
/// reduced with the weights 0.299 / 0.587 / 0.114.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let img = image::open(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .pixels()
            .map(|p| luma(&p.0, 65535.0))
            .collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(&[p.0[0] as u16, p.0[1] as u16, p.0[2] as u16], 255.0))
            .collect(),
    };
    GrayImage::new(w, h, data)
}

/// 8-bit code of an intensity, rounding halves up.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor() as u8
}

/// Writes an 8-bit grayscale PNG or PGM, chosen by the file extension.
/// Intensities outside `[0, 1]` are an error.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut codes = Vec::with_capacity(img.len());
    for (i, &v) in img.pixels().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange {
                value: v,
                x: i % img.width(),
                y: i / img.width(),
            });
        }
        codes.push(quantize(v));
    }
    save_codes(img.width(), img.height(), codes, path.as_ref())
}

fn save_codes(width: usize, height: usize, codes: Vec<u8>, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, codes).expect("buffer sized to image");
    buf.save(path)?;
    Ok(())
}

/// Writes the blur map as a raster: `"DFBM1"` padded to 8 bytes, width and
/// height as little-endian u32, then row-major little-endian f32 sigmas with
/// NaN at invalid pixels.
pub fn write_blur_raster<W: Write>(map: &BlurMap, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(RASTER_MAGIC)?;
    out.write_all(&(map.width() as u32).to_le_bytes())?;
    out.write_all(&(map.height() as u32).to_le_bytes())?;
    for &s in map.sigmas() {
        out.write_all(&(s as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Contents of a blur raster file.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major sigmas, NaN where invalid.
    pub values: Vec<f32>,
}

impl BlurRaster {
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let v = self.values[y * self.width + x];
        (!v.is_nan()).then_some(v)
    }
}

pub fn read_blur_raster<R: Read>(input: R) -> Result<BlurRaster> {
    let mut input = BufReader::new(input);
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..8] != RASTER_MAGIC {
        return Err(Error::Format("not a blur-map raster".into()));
    }
    let width = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != width * height * 4 {
        return Err(Error::Format(format!(
            "expected {} data bytes for {width}x{height}, found {}",
            width * height * 4,
            raw.len()
        )));
    }
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(BlurRaster {
        width,
        height,
        values,
    })
}

pub fn save_blur_raster(map: &BlurMap, path: impl AsRef<Path>) -> Result<()> {
    write_blur_raster(map, File::create(path)?)
}

pub fn load_blur_raster(path: impl AsRef<Path>) -> Result<BlurRaster> {
    read_blur_raster(File::open(path)?)
}

/// Grayscale view of a blur map: the sigma range maps linearly onto
/// 0..=255, invalid pixels are 0.
pub fn blur_visualization(map: &BlurMap) -> GrayImage {
    let (lo, hi) = map.sigma_range();
    let span = if hi > lo { hi - lo } else { 1.0 };
    GrayImage::from_fn(map.width(), map.height(), |x, y| {
        map.sigma_at(x, y)
            .map_or(0.0, |s| ((s - lo) / span).clamp(0.0, 1.0))
    })
}

pub fn save_blur_visualization(map: &BlurMap, path: impl AsRef<Path>) -> Result<()> {
    save_gray(&blur_visualization(map), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(1.0 / 510.0 - 1e-12), 0);
    }

    #[test]
    fn raster_round_trip() {
        let map = BlurMap::from_parts(
            3,
            2,
            &[Some(0.1), None, Some(2.5), Some(5.0), Some(1.0), None],
            &[0.0; 6],
            (0.1, 5.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_blur_raster(&map, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(&buf[..5], b"DFBM1");
        let r = read_blur_raster(buf.as_slice()).unwrap();
        assert_eq!((r.width, r.height), (3, 2));
        assert_eq!(r.get(0, 0), Some(0.1f32));
        assert_eq!(r.get(1, 0), None);
        assert_eq!(r.get(0, 1), Some(5.0f32));
        buf.pop();
        assert!(matches!(
            read_blur_raster(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn visualization_spans_range() {
        let map = BlurMap::from_parts(3, 1, &[Some(0.1), Some(5.0), None], &[0.0; 3], (0.1, 5.0))
            .unwrap();
        let v = blur_visualization(&map);
        assert_eq!(v.pixels(), &[0.0, 1.0, 0.0]);
    }
}
