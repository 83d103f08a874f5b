//! 8-bit RGB images and binary PPM (P6) / PGM (P5) files.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    /// Interleaved RGB, row-major.
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(
                "image",
                format!("{} bytes for a {width}×{height} RGB image", data.len()),
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.repeat(width * height),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Single-channel 8-bit image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

struct Header {
    width: usize,
    height: usize,
    body: usize,
}

/// Parses `magic width height maxval` followed by a single whitespace byte.
/// `#` comments run to the end of the line.
fn parse_header(bytes: &[u8], magic: &[u8; 2], kind: &'static str) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::format(
            kind,
            0,
            format!("expected magic {}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            let what = ["width", "height", "maxval"][i];
            return Err(Error::format(kind, pos, format!("expected {what}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(kind, start, "number out of range"))?;
    }
    if fields[2] != 255 {
        return Err(Error::format(
            kind,
            pos,
            format!("maxval {} unsupported (only 255)", fields[2]),
        ));
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format(kind, pos, "missing whitespace after header")),
    }
    Ok(Header {
        width: fields[0],
        height: fields[1],
        body: pos,
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    const KIND: &str = "malformed PPM";
    let h = parse_header(bytes, b"P6", KIND)?;
    let need = h.width * h.height * 3;
    let have = bytes.len() - h.body;
    if have < need {
        return Err(Error::format(
            KIND,
            bytes.len(),
            format!("truncated pixel data: {have} of {need} bytes"),
        ));
    }
    RgbImage::new(h.width, h.height, bytes[h.body..h.body + need].to_vec())
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    const KIND: &str = "malformed PGM";
    let h = parse_header(bytes, b"P5", KIND)?;
    let need = h.width * h.height;
    let have = bytes.len() - h.body;
    if have < need {
        return Err(Error::format(
            KIND,
            bytes.len(),
            format!("truncated pixel data: {have} of {need} bytes"),
        ));
    }
    Ok(GrayImage {
        width: h.width,
        height: h.height,
        data: bytes[h.body..h.body + need].to_vec(),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn save_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_ppm(img))?;
    Ok(())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&std::fs::read(path)?)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}
