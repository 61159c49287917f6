//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use lasi_core::ImageTensor;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PnmError {
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("unsupported maxval {maxval} at byte {offset} (only 255 is supported)")]
    UnsupportedMaxval { offset: usize, maxval: u64 },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
}

struct Header {
    width: usize,
    height: usize,
    channels: usize,
    payload: usize,
}

fn malformed(offset: usize, reason: &'static str) -> PnmError {
    PnmError::MalformedHeader { offset, reason }
}

/// Skips whitespace and `#` comments; returns the new position.
fn skip_blank(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() {
        match bytes[pos] {
            b'#' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => pos += 1,
            _ => break,
        }
    }
    pos
}

fn number(bytes: &[u8], pos: &mut usize) -> Result<(usize, u64), PnmError> {
    let start = skip_blank(bytes, *pos);
    if start == *pos {
        return Err(malformed(start, "expected whitespace before number"));
    }
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(malformed(start, "expected a decimal number"));
    }
    let value = std::str::from_utf8(&bytes[start..end])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(start, "number out of range"))?;
    *pos = end;
    Ok((start, value))
}

fn header(bytes: &[u8]) -> Result<Header, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(malformed(0, "expected magic P5 or P6")),
    };
    let mut pos = 2;
    let (at, width) = number(bytes, &mut pos)?;
    if width == 0 {
        return Err(malformed(at, "width must be positive"));
    }
    let (at, height) = number(bytes, &mut pos)?;
    if height == 0 {
        return Err(malformed(at, "height must be positive"));
    }
    let (at, maxval) = number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval { offset: at, maxval });
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed(pos, "expected a single whitespace byte after maxval")),
    }
    let too_big = || malformed(2, "image dimensions overflow");
    Ok(Header {
        width: usize::try_from(width).map_err(|_| too_big())?,
        height: usize::try_from(height).map_err(|_| too_big())?,
        channels,
        payload: pos,
    })
}

/// Parses a P5/P6 file; byte `v` becomes `v / 255`.
pub fn decode(bytes: &[u8]) -> Result<ImageTensor, PnmError> {
    let h = header(bytes)?;
    let expected = h
        .width
        .checked_mul(h.height)
        .and_then(|v| v.checked_mul(h.channels))
        .ok_or_else(|| malformed(2, "image dimensions overflow"))?;
    let found = bytes.len() - h.payload;
    if found < expected {
        return Err(PnmError::Truncated { offset: bytes.len(), expected, found });
    }
    let data = bytes[h.payload..h.payload + expected].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(ImageTensor::new(h.height, h.width, h.channels, data).expect("bytes map into [0, 1]"))
}

/// Encodes as P5 (one channel) or P6 (three), rounding `v * 255` half up.
pub fn encode(img: &ImageTensor) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| quantize(*v)));
    out
}

pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// File extension matching [`encode`]'s output.
pub fn extension(channels: usize) -> &'static str {
    if channels == 1 {
        "pgm"
    } else {
        "ppm"
    }
}

pub fn load_image(path: &Path) -> crate::Result<ImageTensor> {
    let bytes = fs::read(path).map_err(|source| crate::CliError::io(path, source))?;
    decode(&bytes).map_err(|source| crate::CliError::Image { path: path.to_path_buf(), source })
}

pub fn save_image(img: &ImageTensor, path: &Path) -> crate::Result<()> {
    fs::write(path, encode(img)).map_err(|source| crate::CliError::io(path, source))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_bytes_scale_by_255() {
        let mut file = b"P5\n2 2\n255\n".to_vec();
        file.extend([0, 255, 128, 64]);
        let img = decode(&file).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (2, 2, 1));
        assert_eq!(img.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn colour_pixel() {
        let mut file = b"P6 1 1 255 ".to_vec();
        file.extend([255, 0, 0]);
        assert_eq!(decode(&file).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn comments_are_skipped() {
        let mut file = b"P5\n# made by hand\n1 # width\n1\n255\n".to_vec();
        file.push(51);
        assert_eq!(decode(&file).unwrap().data(), &[0.2]);
    }

    #[test]
    fn short_payload_is_reported_at_end_of_file() {
        let mut file = b"P5\n2 2\n255\n".to_vec();
        file.extend([1, 2, 3]);
        assert_eq!(decode(&file), Err(PnmError::Truncated { offset: 14, expected: 4, found: 3 }));
    }

    #[test]
    fn header_errors_carry_offsets() {
        assert_eq!(decode(b"P3\n1 1\n255\n\0"), Err(malformed(0, "expected magic P5 or P6")));
        assert!(matches!(decode(b"P5\n1 x\n255\n\0"), Err(PnmError::MalformedHeader { offset: 5, .. })));
        assert!(matches!(decode(b"P5\n0 1\n255\n\0"), Err(PnmError::MalformedHeader { offset: 3, .. })));
        assert!(matches!(decode(b"P51 1 255\n\0"), Err(PnmError::MalformedHeader { offset: 2, .. })));
        assert!(matches!(decode(b"P5\n1 1\n255"), Err(PnmError::MalformedHeader { offset: 10, .. })));
        assert_eq!(
            decode(b"P5\n1 1\n65535\n\0\0"),
            Err(PnmError::UnsupportedMaxval { offset: 7, maxval: 65535 })
        );
    }

    #[test]
    fn half_rounds_up() {
        let img = ImageTensor::new(1, 1, 1, vec![0.5]).unwrap();
        assert_eq!(*encode(&img).last().unwrap(), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
    }

    #[test]
    fn quantized_images_round_trip_exactly() {
        let data: Vec<f64> = (0..24).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
        let img = ImageTensor::new(2, 4, 3, data).unwrap();
        let bytes = encode(&img);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode(&back), bytes);
    }
}
