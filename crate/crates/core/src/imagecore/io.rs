//! Reading colour images (PNG, binary PPM) and writing masks (PNG, PGM).

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::raster::{BinaryMask, ChannelImage, RasterImage};
use crate::error::{Error, Result};

/// Loads any PNG or PNM file as 8-bit RGB.
pub fn read_rgb(path: &Path) -> Result<RasterImage> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.pixels().map(|p| p.0).collect();
    RasterImage::new(w, h, pixels)
}

/// Loads a grey or colour image as a binary mask; any nonzero luma is foreground.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img.pixels().map(|p| if p.0[0] != 0 { 255 } else { 0 }).collect();
    BinaryMask::new(w, h, values)
}

fn format_for(path: &Path) -> Result<ImageFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") | Some("ppm") | Some("pnm") => Ok(ImageFormat::Pnm),
        other => Err(Error::InvalidParameter(format!(
            "unsupported output extension {other:?}"
        ))),
    }
}

/// Writes RGB as PNG or binary PPM depending on the extension.
pub fn write_rgb(path: &Path, img: &RasterImage) -> Result<()> {
    let bytes: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    save(path, &bytes, img.width(), img.height(), ExtendedColorType::Rgb8)
}

/// Writes a grey image as PNG or binary PGM depending on the extension.
pub fn write_gray(path: &Path, img: &ChannelImage) -> Result<()> {
    save(path, img.values(), img.width(), img.height(), ExtendedColorType::L8)
}

fn save(path: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    let (w, h) = (w as u32, h as u32);
    match format_for(path)? {
        ImageFormat::Pnm => {
            let subtype = match color {
                ExtendedColorType::Rgb8 => PnmSubtype::Pixmap(SampleEncoding::Binary),
                _ => PnmSubtype::Graymap(SampleEncoding::Binary),
            };
            let file = std::io::BufWriter::new(std::fs::File::create(path)?);
            PnmEncoder::new(file)
                .with_subtype(subtype)
                .write_image(bytes, w, h, color)?;
        }
        format => image::save_buffer_with_format(path, bytes, w, h, color, format)?,
    }
    Ok(())
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    write_gray(path, &mask.to_channel())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_mask_is_binary_p5() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mask = BinaryMask::from_fn(3, 2, |x, y| (x + y) % 2 == 0);
        write_mask(&path, &mask).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        // Pixel payload is the raw 0/255 bytes at the end of the file.
        assert_eq!(&bytes[bytes.len() - 6..], mask.values());
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn rgb_png_and_ppm_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::new(2, 2, vec![[1, 2, 3], [250, 0, 9], [7, 7, 7], [255, 255, 0]]).unwrap();
        for name in ["a.png", "a.ppm"] {
            let path = dir.path().join(name);
            write_rgb(&path, &img).unwrap();
            assert_eq!(read_rgb(&path).unwrap(), img);
        }
        let ppm = std::fs::read(dir.path().join("a.ppm")).unwrap();
        assert!(ppm.starts_with(b"P6"));
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mask = BinaryMask::empty(2, 2);
        assert!(write_mask(&dir.path().join("m.bmp"), &mask).is_err());
    }
}
