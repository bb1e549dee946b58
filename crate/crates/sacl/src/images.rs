//! PNG in and out. Colour input is reduced to BT.601 luma with integer
//! rounding: `Y = (299 R + 587 G + 114 B + 500) / 1000`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use sacl_core::imagemetrics::GrayImage;

use crate::error::{Error, Result};

pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    ((299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b) + 500) / 1000) as u8
}

pub fn to_gray(img: DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma_bt601(p[0], p[1], p[2]))
            .collect(),
    };
    GrayImage::new(w, h, pixels).expect("decoded buffer matches its dimensions")
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    Ok(to_gray(img))
}

pub fn save_gray(path: &Path, img: &GrayImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
            .expect("gray image buffer matches its dimensions");
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn luma_rounding() {
        assert_eq!(luma_bt601(255, 255, 255), 255);
        assert_eq!(luma_bt601(0, 0, 0), 0);
        assert_eq!(luma_bt601(255, 0, 0), 76);
        assert_eq!(luma_bt601(0, 255, 0), 150);
        assert_eq!(luma_bt601(0, 0, 255), 29);
    }

    #[test]
    fn png_round_trip_and_colour_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let gray = GrayImage::from_fn(5, 3, |x, y| (x * 40 + y) as u8);
        let path = dir.path().join("nested/g.png");
        save_gray(&path, &gray).unwrap();
        assert_eq!(load_gray(&path).unwrap(), gray);

        let rgb = RgbImage::from_pixel(2, 2, Rgb([255, 0, 0]));
        let cpath = dir.path().join("c.png");
        rgb.save(&cpath).unwrap();
        assert!(load_gray(&cpath).unwrap().pixels().iter().all(|&p| p == 76));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_gray(Path::new("/nonexistent/x.png")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
