//! 8-bit image buffers and codecs.
//!
//! PGM/PPM (`P2`, `P3`, `P5`, `P6`, maxval <= 255) are handled here and are
//! bit-exact. JPEG and PNG go through the `image` crate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interleaved (`HWC`) 8-bit image with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageBuffer {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::shape(format!("images have 1 or 3 channels, got {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::shape(format!("image dims must be positive, got {height}x{width}")));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "{channels}x{height}x{width} image needs {} samples, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(ImageBuffer {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: u8) -> Self {
        Self::new(channels, height, width, vec![value; channels * height * width]).expect("valid dims")
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data).expect("valid dims")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptImage(msg.into())
}

struct PnmHeader {
    binary: bool,
    channels: usize,
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    let (binary, channels) = match bytes.get(..2) {
        Some(b"P5") => (true, 1),
        Some(b"P6") => (true, 3),
        Some(b"P2") => (false, 1),
        Some(b"P3") => (false, 3),
        _ => return Err(Error::UnsupportedImage("not a PGM/PPM file".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(corrupt("PNM header ends early")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("PNM header field is not a number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| corrupt("PNM header field out of range"))?;
    }
    // Exactly one whitespace byte separates the header from binary data.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(corrupt("PNM header not terminated"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(corrupt("PNM image has zero size"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedImage(format!("PNM maxval {maxval} (only 8-bit supported)")));
    }
    Ok(PnmHeader {
        binary,
        channels,
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

/// Decodes PGM/PPM bytes.
pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    let h = parse_pnm_header(bytes)?;
    let n = h
        .width
        .checked_mul(h.height)
        .and_then(|v| v.checked_mul(h.channels))
        .ok_or_else(|| corrupt("PNM dimensions overflow"))?;
    let mut data = if h.binary {
        bytes
            .get(h.data_start..h.data_start + n)
            .ok_or_else(|| corrupt(format!("PNM data truncated: need {n} samples")))?
            .to_vec()
    } else {
        let text = std::str::from_utf8(&bytes[h.data_start..]).map_err(|_| corrupt("PNM text is not ASCII"))?;
        let values: Vec<u8> = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse::<u8>().map_err(|_| corrupt(format!("bad PNM sample {t:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != n {
            return Err(corrupt(format!("PNM data truncated: need {n} samples")));
        }
        values
    };
    if h.maxval != 255 {
        for v in &mut data {
            if *v as usize > h.maxval {
                return Err(corrupt("PNM sample exceeds maxval"));
            }
            *v = ((*v as usize * 255 + h.maxval / 2) / h.maxval) as u8;
        }
    }
    ImageBuffer::new(h.channels, h.height, h.width, data)
}

/// Binary PGM (`P5`) or PPM (`P6`) encoding with maxval 255.
pub fn encode_pnm(image: &ImageBuffer) -> Vec<u8> {
    let magic = if image.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

/// Decodes JPEG, PNG or PGM/PPM bytes by content sniffing.
pub fn decode_bytes(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.first() == Some(&b'P') {
        return decode_pnm(bytes);
    }
    let format = image::guess_format(bytes).map_err(|_| Error::UnsupportedImage("unrecognised image data".into()))?;
    if !matches!(format, image::ImageFormat::Jpeg | image::ImageFormat::Png) {
        return Err(Error::UnsupportedImage(format!("{format:?}")));
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| corrupt(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        ImageBuffer::new(3, h, w, img.into_rgb8().into_raw())
    } else {
        ImageBuffer::new(1, h, w, img.into_luma8().into_raw())
    }
}

pub fn decode_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_bytes(&bytes)
}

/// Writes by extension: `.pgm`/`.ppm`/`.pnm` (bit-exact), `.png`, `.jpg`/`.jpeg`.
pub fn encode_image(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "ppm" | "pnm" => {
            fs::write(path, encode_pnm(image))?;
            Ok(())
        }
        "png" | "jpg" | "jpeg" => {
            let color = if image.channels == 1 {
                image::ExtendedColorType::L8
            } else {
                image::ExtendedColorType::Rgb8
            };
            image::save_buffer(path, &image.data, image.width as u32, image.height as u32, color)
                .map_err(|e| Error::UnsupportedImage(e.to_string()))
        }
        other => Err(Error::UnsupportedImage(format!("cannot write extension {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(1, 3, 5, |_, y, x| (y * 50 + x * 7) as u8);
        let p = dir.path().join("a.pgm");
        encode_image(&img, &p).unwrap();
        assert_eq!(decode_image(&p).unwrap(), img);
    }

    #[test]
    fn ppm_fixture_decodes_exactly() {
        let mut bytes = b"P6\n# fixture\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30]);
        let img = decode_bytes(&bytes).unwrap();
        assert_eq!((img.channels(), img.height(), img.width()), (3, 2, 2));
        assert_eq!(img.get(0, 0, 0), 255);
        assert_eq!(img.get(1, 0, 1), 255);
        assert_eq!(img.get(2, 1, 0), 255);
        assert_eq!((img.get(0, 1, 1), img.get(1, 1, 1), img.get(2, 1, 1)), (10, 20, 30));
    }

    #[test]
    fn ascii_pgm_with_low_maxval() {
        let img = decode_bytes(b"P2 2 1 15\n0 15\n").unwrap();
        assert_eq!(img.data(), &[0, 255]);
    }

    #[test]
    fn truncated_and_unsupported() {
        let bytes = b"P5\n4 4\n255\n\x00\x01\x02";
        assert!(matches!(decode_bytes(bytes), Err(Error::CorruptImage(_))));
        assert!(matches!(decode_bytes(b"GIF89a...."), Err(Error::UnsupportedImage(_))));
        assert!(matches!(decode_bytes(b"P5\n4"), Err(Error::CorruptImage(_))));
        assert!(matches!(decode_bytes(b"P5 1 1 65535\n\x00\x00"), Err(Error::UnsupportedImage(_))));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(3, 4, 6, |c, y, x| (c * 80 + y * 10 + x) as u8);
        let p = dir.path().join("a.png");
        encode_image(&img, &p).unwrap();
        assert_eq!(decode_image(&p).unwrap(), img);
    }
}
