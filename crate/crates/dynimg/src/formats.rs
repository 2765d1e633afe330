//! Image emission: 8/16-bit grayscale or RGB PNG and raw little-endian
//! f32 planes with a JSON sidecar describing the shape.

use std::fs;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use dynimg_core::{MultiChannelImage, Plane2D};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The fixed tie rule for quantization: halfway values move away from
/// zero (f64::round semantics), identically on every platform.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Quantizes a normalized value to u8, rounding half away from zero.
pub fn quantize_u8(v: f32) -> u8 {
    round_half_away(v as f64 * 255.0).clamp(0.0, 255.0) as u8
}

/// Quantizes a normalized value to u16, rounding half away from zero.
pub fn quantize_u16(v: f32) -> u16 {
    round_half_away(v as f64 * 65535.0).clamp(0.0, 65535.0) as u16
}

pub fn write_plane_png8(path: &Path, plane: &Plane2D) -> Result<(), Error> {
    let data: Vec<u8> = plane.values().iter().map(|&v| quantize_u8(v)).collect();
    let img = image::ImageBuffer::<image::Luma<u8>, _>::from_raw(
        plane.width() as u32,
        plane.height() as u32,
        data,
    )
    .expect("buffer sized from plane");
    img.save(path)?;
    Ok(())
}

pub fn write_plane_png16(path: &Path, plane: &Plane2D) -> Result<(), Error> {
    let data: Vec<u16> = plane.values().iter().map(|&v| quantize_u16(v)).collect();
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(
        plane.width() as u32,
        plane.height() as u32,
        data,
    )
    .expect("buffer sized from plane");
    img.save(path)?;
    Ok(())
}

pub fn write_multi_png8(path: &Path, multi: &MultiChannelImage) -> Result<(), Error> {
    let data: Vec<u8> = multi.values().iter().map(|&v| quantize_u8(v)).collect();
    let img = image::ImageBuffer::<image::Rgb<u8>, _>::from_raw(
        multi.width() as u32,
        multi.height() as u32,
        data,
    )
    .expect("buffer sized from image");
    img.save(path)?;
    Ok(())
}

pub fn write_multi_png16(path: &Path, multi: &MultiChannelImage) -> Result<(), Error> {
    let data: Vec<u16> = multi.values().iter().map(|&v| quantize_u16(v)).collect();
    let img = image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(
        multi.width() as u32,
        multi.height() as u32,
        data,
    )
    .expect("buffer sized from image");
    img.save(path)?;
    Ok(())
}

/// Sidecar contents for a raw f32 dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawShape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub dtype: String,
    pub byte_order: String,
}

/// A raw plane (or interleaved multi-channel image) read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<f32>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".shape");
    path.with_file_name(name)
}

/// Writes interleaved little-endian f32 samples plus the `.shape` sidecar.
pub fn write_raw_f32(
    path: &Path,
    width: usize,
    height: usize,
    channels: usize,
    values: &[f32],
) -> Result<(), Error> {
    debug_assert_eq!(values.len(), width * height * channels);
    let mut bytes = vec![0u8; values.len() * 4];
    LittleEndian::write_f32_into(values, &mut bytes);
    fs::write(path, bytes)?;
    let shape = RawShape {
        width,
        height,
        channels,
        dtype: "f32".to_owned(),
        byte_order: "little".to_owned(),
    };
    let json = serde_json::to_string(&shape).expect("static shape serializes");
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads a raw f32 dump back using its sidecar.
pub fn read_raw_f32(path: &Path) -> Result<RawImage, Error> {
    let shape_text = fs::read_to_string(sidecar_path(path))?;
    let shape: RawShape = serde_json::from_str(&shape_text)
        .map_err(|e| Error::config(format!("bad sidecar for {}: {e}", path.display())))?;
    if shape.dtype != "f32" || shape.byte_order != "little" {
        return Err(Error::config(format!(
            "unsupported raw encoding {}/{}",
            shape.dtype, shape.byte_order
        )));
    }
    let bytes = fs::read(path)?;
    let expected = shape.width * shape.height * shape.channels * 4;
    if bytes.len() != expected {
        return Err(Error::config(format!(
            "{} holds {} bytes, sidecar implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut values = vec![0f32; bytes.len() / 4];
    LittleEndian::read_f32_into(&bytes, &mut values);
    Ok(RawImage {
        width: shape.width,
        height: shape.height,
        channels: shape.channels,
        values,
    })
}

/// Joint min-max normalization over all three channels, so relative
/// channel intensities survive. A constant image maps to all-zero, same
/// rule as the single-plane path.
pub fn normalize_multi_min_max(multi: &MultiChannelImage) -> MultiChannelImage {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in multi.values() {
        min = min.min(v);
        max = max.max(v);
    }
    let values: Vec<f32> = if max > min {
        let min = min as f64;
        let range = max as f64 - min;
        multi
            .values()
            .iter()
            .map(|&v| ((v as f64 - min) / range) as f32)
            .collect()
    } else {
        vec![0.0; multi.values().len()]
    };
    MultiChannelImage::new(multi.width(), multi.height(), values).expect("values in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_rule_is_half_away_from_zero() {
        assert_eq!(round_half_away(0.5), 1.0);
        assert_eq!(round_half_away(1.5), 2.0);
        assert_eq!(round_half_away(2.5), 3.0);
        assert_eq!(round_half_away(-0.5), -1.0);
        assert_eq!(round_half_away(-2.5), -3.0);
    }

    #[test]
    fn quantization_endpoints_and_clamping() {
        assert_eq!(quantize_u8(0.0), 0);
        assert_eq!(quantize_u8(1.0), 255);
        assert_eq!(quantize_u16(0.0), 0);
        assert_eq!(quantize_u16(1.0), 65535);
        // Nearest-value behavior around a bin edge.
        assert_eq!(quantize_u8(0.6 / 255.0), 1);
        assert_eq!(quantize_u8(0.4 / 255.0), 0);
        // Out-of-range inputs clamp instead of wrapping.
        assert_eq!(quantize_u8(1.5), 255);
        assert_eq!(quantize_u8(-0.5), 0);
        assert_eq!(quantize_u16(2.0), 65535);
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.raw");
        let values: Vec<f32> = (0..12).map(|i| i as f32 * 0.25 - 1.0).collect();
        write_raw_f32(&path, 4, 3, 1, &values).unwrap();
        let back = read_raw_f32(&path).unwrap();
        assert_eq!(back.values, values);
        assert_eq!((back.width, back.height, back.channels), (4, 3, 1));
    }

    #[test]
    fn raw_byte_count_must_match_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.raw");
        write_raw_f32(&path, 2, 2, 1, &[0.0; 4]).unwrap();
        fs::write(&path, [0u8; 8]).unwrap();
        assert!(read_raw_f32(&path).is_err());
    }

    #[test]
    fn joint_normalization_covers_all_channels() {
        let planes = [
            Plane2D::filled(2, 1, -1.0).unwrap(),
            Plane2D::filled(2, 1, 0.0).unwrap(),
            Plane2D::filled(2, 1, 3.0).unwrap(),
        ];
        let multi = MultiChannelImage::from_planes(&planes).unwrap();
        let norm = normalize_multi_min_max(&multi);
        assert_eq!(norm.values(), &[0.0, 0.25, 1.0, 0.0, 0.25, 1.0]);
    }

    #[test]
    fn png16_preserves_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let values = vec![0.0f32, 0.25, 0.5, 0.75, 1.0, 0.125];
        let plane = Plane2D::new(3, 2, values.clone()).unwrap();
        write_plane_png16(&path, &plane).unwrap();
        let decoded = image::open(&path).unwrap().into_luma16();
        for (px, &v) in decoded.pixels().zip(&values) {
            assert_eq!(px.0[0], quantize_u16(v));
        }
    }
}
