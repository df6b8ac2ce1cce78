//! 8-bit PNG / PGM reading and writing. Pixel values map to `[0, 1]` as
//! `v / 255`; writing clamps and rounds back to the nearest level.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn from_dynamic(img: DynamicImage) -> Tensor {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.into_rgb8();
        Tensor::from_fn(3, h, w, |c, y, x| {
            rgb.get_pixel(x as u32, y as u32)[c] as f32 / 255.0
        })
    } else {
        let g = img.into_luma8();
        Tensor::from_fn(1, h, w, |_, y, x| g.get_pixel(x as u32, y as u32)[0] as f32 / 255.0)
    }
}

/// Decoder allocation cap. Covers an 8K RGB panorama with room to spare.
pub const MAX_DECODE_BYTES: u64 = 256 << 20;

/// Decodes PNG or PNM bytes. Grayscale images give one channel, anything
/// with color gives three; alpha is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<Tensor> {
    let format = image::guess_format(bytes)
        .map_err(|e| Error::format("image", e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(Error::format("image", format!("unsupported format {format:?}")));
    }
    let mut reader = image::ImageReader::with_format(Cursor::new(bytes), format);
    let mut limits = image::Limits::default();
    limits.max_alloc = Some(MAX_DECODE_BYTES);
    reader.limits(limits);
    let img = reader
        .decode()
        .map_err(|e| Error::format("image", e.to_string()))?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::format("image", "empty image"));
    }
    Ok(from_dynamic(img))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format { reason, .. } => {
            Error::format("image", format!("{}: {reason}", path.display()))
        }
        other => other,
    })
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_dynamic(t: &Tensor) -> Result<DynamicImage> {
    let (h, w) = (t.height() as u32, t.width() as u32);
    match t.channels() {
        1 => Ok(DynamicImage::ImageLuma8(GrayImage::from_fn(w, h, |x, y| {
            image::Luma([quantize(t.get(0, y as usize, x as usize))])
        }))),
        3 => Ok(DynamicImage::ImageRgb8(RgbImage::from_fn(w, h, |x, y| {
            image::Rgb(std::array::from_fn(|c| quantize(t.get(c, y as usize, x as usize))))
        }))),
        c => Err(Error::shape(format!("images have 1 or 3 channels, got {c}"))),
    }
}

/// Writes PNG, or binary PGM/PPM when the extension is `.pgm`/`.ppm`/`.pnm`.
pub fn save_image(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let img = to_dynamic(t)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let format = match ext.as_deref() {
        Some("pgm" | "ppm" | "pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    let mut buf = Vec::new();
    img.write_to(&mut Cursor::new(&mut buf), format)
        .map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_of_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_fn(3, 5, 7, |c, y, x| ((c * 31 + y * 7 + x * 3) % 256) as f32 / 255.0);
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            save_image(&p, &t).unwrap();
            assert!(load_image(&p).unwrap().bit_eq(&t));
        }
        let g = Tensor::from_fn(1, 4, 4, |_, y, x| (y * 4 + x) as f32 / 255.0);
        let p = dir.path().join("g.pgm");
        save_image(&p, &g).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.channels(), 1);
        assert!(back.bit_eq(&g));
    }

    #[test]
    fn garbage_is_a_format_error() {
        assert!(matches!(decode_image(b"not an image"), Err(Error::Format { .. })));
        assert!(decode_image(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_image(&[]).is_err());
    }

    #[test]
    fn missing_file_is_io() {
        assert!(load_image("/nonexistent/x.png").unwrap_err().is_io());
    }
}
