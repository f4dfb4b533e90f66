//! RGB raster images, PPM/PNG encoding and the variance comparison image.

use std::io::Cursor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {0}x{1}")]
    EmptyImage(u32, u32),
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("variance needs at least two images, got {0}")]
    TooFewImages(usize),
    #[error("malformed PPM: {0}")]
    MalformedPpm(String),
    #[error("malformed PNG: {0}")]
    MalformedPng(String),
}

/// Row-major RGB image with 8 bits per channel.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

impl Image {
    pub fn from_rgb(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage(width, height));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(ImageError::BufferSize { expected, got: data.len() });
        }
        Ok(Image { width, height, data })
    }

    /// Panics on zero dimensions.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Image { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_rgb(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Binary P6 with maxval 255.
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode_ppm(bytes: &[u8]) -> Result<Self, ImageError> {
        let bad = |m: &str| ImageError::MalformedPpm(m.to_string());
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // whitespace and comments between header fields
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(_) => break,
                    None => return Err(bad("truncated header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P6" {
            return Err(bad("magic is not P6"));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad("invalid header number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("only maxval 255 is supported"));
        }
        if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            return Err(bad("missing separator after header"));
        }
        pos += 1;
        let expected = width as usize * height as usize * 3;
        let body = &bytes[pos..];
        if body.len() < expected {
            return Err(bad("truncated pixel data"));
        }
        Image::from_rgb(width, height, body[..expected].to_vec()).map_err(|e| ImageError::MalformedPpm(e.to_string()))
    }

    /// 8-bit RGB PNG.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header().expect("writing to a Vec cannot fail");
            writer.write_image_data(&self.data).expect("buffer size matches header");
        }
        out
    }

    /// Decode 8-bit PNGs; alpha is dropped, grayscale and palettes expanded.
    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let err = |e: png::DecodingError| ImageError::MalformedPng(e.to_string());
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(err)?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| ImageError::MalformedPng("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(err)?;
        let buf = &buf[..info.buffer_size()];
        let data: Vec<u8> = match info.color_type {
            png::ColorType::Rgb => buf.to_vec(),
            png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
            png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
            png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
            other => return Err(ImageError::MalformedPng(format!("unsupported color type {other:?}"))),
        };
        Image::from_rgb(info.width, info.height, data).map_err(|e| ImageError::MalformedPng(e.to_string()))
    }
}

/// Largest population variance of samples in `[0, 1]`.
pub const MAX_VARIANCE: f64 = 0.25;

/// Grayscale image of per-pixel population variance across `images`.
///
/// Channels are normalized to `[0, 1]`; the three channel variances are
/// averaged and the standard deviation is scaled so that the maximum
/// possible variance maps to white. Identical inputs give pure black.
pub fn variance_image(images: &[Image]) -> Result<Image, ImageError> {
    let first = match images {
        [] | [_] => return Err(ImageError::TooFewImages(images.len())),
        [first, ..] => first,
    };
    for img in images {
        if (img.width, img.height) != (first.width, first.height) {
            return Err(ImageError::DimensionMismatch(first.width, first.height, img.width, img.height));
        }
    }
    let k = images.len() as f64;
    let mut out = Vec::with_capacity(first.data.len());
    for px in 0..first.data.len() / 3 {
        let mut var_sum = 0.0;
        for ch in 0..3 {
            let i = px * 3 + ch;
            let (mut sum, mut sum_sq) = (0u64, 0u64);
            for img in images {
                let v = img.data[i] as u64;
                sum += v;
                sum_sq += v * v;
            }
            // k·Σv² − (Σv)² is exact in integers and is zero iff all samples agree.
            let numer = (images.len() as u64 * sum_sq - sum * sum) as f64;
            var_sum += numer / (k * k * 255.0 * 255.0);
        }
        let value = variance_to_gray(var_sum / 3.0);
        out.extend_from_slice(&[value, value, value]);
    }
    Ok(Image { width: first.width, height: first.height, data: out })
}

/// Map an averaged variance to an 8-bit gray level.
pub fn variance_to_gray(avg_variance: f64) -> u8 {
    let raw = (avg_variance.max(0.0).sqrt() / MAX_VARIANCE.sqrt()).min(1.0);
    (255.0 * raw).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_and_errors() {
        let img = Image::filled(1, 1, [0, 0, 0]);
        let bytes = img.encode_ppm();
        assert_eq!(bytes, b"P6\n1 1\n255\n\0\0\0");
        assert_eq!(Image::decode_ppm(&bytes).unwrap(), img);
        assert!(matches!(Image::decode_ppm(&bytes[..bytes.len() - 1]), Err(ImageError::MalformedPpm(_))));
        assert!(matches!(Image::decode_ppm(b"P3\n1 1\n255\n0 0 0"), Err(ImageError::MalformedPpm(_))));
        assert!(matches!(Image::decode_ppm(b"P6\n1"), Err(ImageError::MalformedPpm(_))));
        let commented = b"P6 # comment\n2 1 # size\n255\n\x01\x02\x03\x04\x05\x06";
        assert_eq!(Image::decode_ppm(commented).unwrap().pixel(1, 0), [4, 5, 6]);
    }

    #[test]
    fn png_round_trip() {
        let black = Image::filled(2, 2, [0, 0, 0]);
        let decoded = Image::decode_png(&black.encode_png()).unwrap();
        assert_eq!(decoded, black);
        let mut img = Image::filled(3, 2, [10, 20, 30]);
        img.set_pixel(2, 1, [255, 0, 128]);
        assert_eq!(Image::decode_png(&img.encode_png()).unwrap(), img);
    }

    #[test]
    fn variance_errors() {
        let a = Image::filled(2, 2, [0, 0, 0]);
        let b = Image::filled(2, 3, [0, 0, 0]);
        assert_eq!(variance_image(std::slice::from_ref(&a)), Err(ImageError::TooFewImages(1)));
        assert_eq!(variance_image(&[]), Err(ImageError::TooFewImages(0)));
        assert!(matches!(variance_image(&[a, b]), Err(ImageError::DimensionMismatch(..))));
    }

    #[test]
    fn identical_images_give_black() {
        let mut a = Image::filled(4, 4, [17, 200, 3]);
        a.set_pixel(1, 1, [255, 255, 255]);
        let out = variance_image(&[a.clone(), a.clone(), a]).unwrap();
        assert!(out.as_rgb().iter().all(|&v| v == 0));
    }

    #[test]
    fn gray_mapping_endpoints() {
        assert_eq!(variance_to_gray(0.0), 0);
        assert_eq!(variance_to_gray(MAX_VARIANCE), 255);
        assert_eq!(variance_to_gray(1.0), 255);
    }

    #[test]
    fn constructor_checks() {
        assert!(matches!(Image::from_rgb(0, 1, vec![]), Err(ImageError::EmptyImage(0, 1))));
        assert!(matches!(Image::from_rgb(1, 1, vec![0; 2]), Err(ImageError::BufferSize { .. })));
    }
}
