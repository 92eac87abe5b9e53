//! Binary netpbm I/O: P6 for RGB, P5 for grayscale, 8-bit only.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    /// Offset of the first payload byte.
    data_start: usize,
}

fn parse_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() {
        match bytes[pos] {
            b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => pos += 1,
            b'#' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            _ => break,
        }
    }
    pos
}

fn read_number(bytes: &[u8], pos: usize, what: &str) -> Result<(usize, usize)> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(parse_error(start, format!("expected {what}")));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let value = text
        .parse::<usize>()
        .map_err(|_| parse_error(start, format!("{what} `{text}` out of range")))?;
    Ok((value, end))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(0..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => return Err(parse_error(0, "expected magic P5 or P6")),
    };
    let (width, pos) = read_number(bytes, 2, "width")?;
    let (height, pos) = read_number(bytes, pos, "height")?;
    let (maxval, pos) = read_number(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_error(pos, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(parse_error(pos, format!("maxval {maxval} unsupported (need 255)")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(parse_error(pos, "expected one whitespace byte after maxval")),
    }
    Ok(Header {
        channels,
        width,
        height,
        data_start: pos + 1,
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let header = parse_header(bytes)?;
    let expected = header.width * header.height * header.channels;
    let available = bytes.len() - header.data_start;
    if available < expected {
        return Err(parse_error(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {available}"),
        ));
    }
    let data = bytes[header.data_start..header.data_start + expected]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Image::from_vec(header.height, header.width, header.channels, data)
}

pub fn encode_ppm(img: &Image) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        3 => "P6",
        1 => "P5",
        c => return Err(Error::Shape(format!("PPM needs 1 or 3 channels, got {c}"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn write_ppm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)?).map_err(|e| Error::io(path, e))
}
