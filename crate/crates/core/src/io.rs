//! Image file I/O.
//!
//! Range images are read from PGM (P2/P5, any maxval up to 65535) or
//! grayscale PNG, and always written as binary PGM with maxval 65535.
//! Color images are read from PPM (P3/P6, maxval 255) or 8-bit PNG.
//! The container is detected from the file's magic bytes.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{ColorImage, RangeImage};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Single-channel raster with its original sample depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl GrayImage {
    /// Range levels rounded to the nearest integer and clamped to 16 bits.
    pub fn from_range(range: &RangeImage) -> Self {
        let data = range
            .data()
            .iter()
            .map(|v| v.round().clamp(0.0, 65535.0) as u16)
            .collect();
        Self {
            width: range.width(),
            height: range.height(),
            maxval: u16::MAX,
            data,
        }
    }

    pub fn to_range(&self) -> RangeImage {
        RangeImage::new(
            self.width,
            self.height,
            self.data.iter().map(|v| f32::from(*v)).collect(),
        )
        .expect("u16 levels are valid range values")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Color,
    Range,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Color(ColorImage),
    Range(RangeImage),
}

pub fn read_image(path: impl AsRef<Path>, kind: ImageKind) -> Result<Image> {
    Ok(match kind {
        ImageKind::Color => Image::Color(read_color(path)?),
        ImageKind::Range => Image::Range(read_range(path)?),
    })
}

pub fn read_range(path: impl AsRef<Path>) -> Result<RangeImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_gray(&bytes)?.to_range())
}

pub fn read_color(path: impl AsRef<Path>) -> Result<ColorImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_color(&bytes)
}

/// Writes a binary PGM, maxval 65535.
pub fn write_range(path: impl AsRef<Path>, range: &RangeImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(&GrayImage::from_range(range)))
}

pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(img))
}

pub fn write_color_png(path: impl AsRef<Path>, img: &ColorImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_png_rgb(img)?)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &ColorImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_ppm(img))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(PNG_MAGIC) {
        return decode_png_gray(bytes);
    }
    let mut p = HeaderParser::new(bytes);
    let magic = p.magic()?;
    let binary = match &magic {
        b"P5" => true,
        b"P2" => false,
        _ => {
            return Err(Error::format(format!(
                "magic: expected P2 or P5, found {:?}",
                String::from_utf8_lossy(&magic)
            )))
        }
    };
    let (width, height, maxval) = p.dims_and_maxval()?;
    let n = width * height;
    let data = if binary {
        let payload = p.binary_payload();
        if maxval < 256 {
            if payload.len() < n {
                return Err(Error::UnexpectedEof);
            }
            payload[..n].iter().map(|b| u16::from(*b)).collect()
        } else {
            if payload.len() < 2 * n {
                return Err(Error::UnexpectedEof);
            }
            payload[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        }
    } else {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(p.ascii_sample(maxval)?);
        }
        data
    };
    if let Some(v) = data.iter().find(|v| **v > maxval) {
        return Err(Error::format(format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(GrayImage {
        width,
        height,
        maxval,
        data,
    })
}

pub fn decode_color(bytes: &[u8]) -> Result<ColorImage> {
    if bytes.starts_with(PNG_MAGIC) {
        return decode_png_rgb(bytes);
    }
    let mut p = HeaderParser::new(bytes);
    let magic = p.magic()?;
    let binary = match &magic {
        b"P6" => true,
        b"P3" => false,
        _ => {
            return Err(Error::format(format!(
                "magic: expected P3 or P6, found {:?}",
                String::from_utf8_lossy(&magic)
            )))
        }
    };
    let (width, height, maxval) = p.dims_and_maxval()?;
    if maxval != 255 {
        return Err(Error::format(format!(
            "maxval: unsupported bit depth (maxval {maxval}, expected 255)"
        )));
    }
    let n = width * height * 3;
    let data = if binary {
        let payload = p.binary_payload();
        if payload.len() < n {
            return Err(Error::UnexpectedEof);
        }
        payload[..n].to_vec()
    } else {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(p.ascii_sample(maxval)? as u8);
        }
        data
    };
    ColorImage::new(width, height, data)
}

/// Binary PGM; 8-bit samples when maxval < 256, big-endian 16-bit otherwise.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.data.iter().map(|v| *v as u8));
    } else {
        for v in &img.data {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn encode_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn encode_png_rgb(img: &ColorImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(img.data()).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

pub fn encode_png_gray16(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(png_err)?;
        let bytes: Vec<u8> = img.data.iter().flat_map(|v| v.to_be_bytes()).collect();
        writer.write_image_data(&bytes).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::format(format!("png: {e}"))
}

fn png_frame(bytes: &[u8]) -> Result<(png::OutputInfo, Vec<u8>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(map_png_decode)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("png: image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(map_png_decode)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

fn map_png_decode(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::UnexpectedEof
        }
        other => png_err(other),
    }
}

fn decode_png_rgb(bytes: &[u8]) -> Result<ColorImage> {
    let (info, buf) = png_frame(bytes)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(format!(
            "bit depth: unsupported color PNG depth {:?}, expected 8",
            info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|v| [*v, *v, *v]).collect(),
        png::ColorType::GrayscaleAlpha => buf
            .chunks_exact(2)
            .flat_map(|p| [p[0], p[0], p[0]])
            .collect(),
        png::ColorType::Indexed => return Err(Error::format("color type: unexpanded palette")),
    };
    ColorImage::new(w, h, data)
}

fn decode_png_gray(bytes: &[u8]) -> Result<GrayImage> {
    let (info, buf) = png_frame(bytes)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => {
            return Err(Error::format(format!(
                "color type: range PNG must be grayscale, found {other:?}"
            )))
        }
    };
    let (maxval, data) = match info.bit_depth {
        png::BitDepth::Eight => (
            255,
            buf.iter()
                .step_by(channels)
                .map(|v| u16::from(*v))
                .collect(),
        ),
        png::BitDepth::Sixteen => (
            u16::MAX,
            buf.chunks_exact(2 * channels)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect(),
        ),
        other => {
            return Err(Error::format(format!(
                "bit depth: unsupported range PNG depth {other:?}"
            )))
        }
    };
    Ok(GrayImage {
        width,
        height,
        maxval,
        data,
    })
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn magic(&mut self) -> Result<[u8; 2]> {
        if self.bytes.len() < 2 {
            return Err(Error::UnexpectedEof);
        }
        self.pos = 2;
        Ok([self.bytes[0], self.bytes[1]])
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            if self.pos >= self.bytes.len() {
                return Err(Error::UnexpectedEof);
            }
            return Err(Error::format(format!(
                "malformed header: {field} is not a number"
            )));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("malformed header: {field} out of range")))
    }

    fn dims_and_maxval(&mut self) -> Result<(usize, usize, u16)> {
        let width = self.number("width")?;
        let height = self.number("height")?;
        let maxval = self.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::format(format!(
                "malformed header: width/height {width}x{height} must be positive"
            )));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::format(format!(
                "maxval: unsupported bit depth (maxval {maxval})"
            )));
        }
        // Exactly one whitespace byte separates the header from a binary payload.
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => self.pos += 1,
            Some(_) => {
                return Err(Error::format(
                    "malformed header: missing separator after maxval",
                ))
            }
            None => {}
        }
        Ok((width as usize, height as usize, maxval as u16))
    }

    fn binary_payload(&self) -> &'a [u8] {
        &self.bytes[self.pos.min(self.bytes.len())..]
    }

    fn ascii_sample(&mut self, maxval: u16) -> Result<u16> {
        self.skip_space_and_comments();
        if self.pos >= self.bytes.len() {
            return Err(Error::UnexpectedEof);
        }
        let v = self.number("sample")?;
        if v > u64::from(maxval) {
            return Err(Error::format(format!("sample {v} exceeds maxval {maxval}")));
        }
        Ok(v as u16)
    }
}
