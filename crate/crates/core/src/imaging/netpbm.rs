//! Netpbm graymaps and pixmaps: P2/P5 (gray) and P3/P6 (color), plain or
//! binary, any maxval up to 65535. Binary samples above 255 are two bytes,
//! most significant first.

use crate::error::{GlsError, Result};

use super::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetpbmFormat {
    P2,
    P3,
    P5,
    P6,
}

impl NetpbmFormat {
    fn channels(self) -> usize {
        match self {
            NetpbmFormat::P2 | NetpbmFormat::P5 => 1,
            NetpbmFormat::P3 | NetpbmFormat::P6 => 3,
        }
    }

    fn is_binary(self) -> bool {
        matches!(self, NetpbmFormat::P5 | NetpbmFormat::P6)
    }

    fn magic(self) -> &'static str {
        match self {
            NetpbmFormat::P2 => "P2",
            NetpbmFormat::P3 => "P3",
            NetpbmFormat::P5 => "P5",
            NetpbmFormat::P6 => "P6",
        }
    }

    /// Plain or binary format for the image's channel count.
    pub fn for_image(img: &Image, binary: bool) -> Self {
        match (img.channels(), binary) {
            (1, false) => NetpbmFormat::P2,
            (1, true) => NetpbmFormat::P5,
            (_, false) => NetpbmFormat::P3,
            (_, true) => NetpbmFormat::P6,
        }
    }
}

fn format_err(msg: impl Into<String>) -> GlsError {
    GlsError::Format(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&[u8]> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token().ok_or_else(|| format_err(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("invalid {what}")))
    }
}

pub fn read_netpbm(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    let format = match cur.token() {
        Some(b"P2") => NetpbmFormat::P2,
        Some(b"P3") => NetpbmFormat::P3,
        Some(b"P5") => NetpbmFormat::P5,
        Some(b"P6") => NetpbmFormat::P6,
        _ => return Err(format_err("unsupported or missing magic number")),
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(format!("maxval {maxval} outside 1..=65535")));
    }
    let channels = format.channels();
    let count = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| format_err("image too large"))?;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(count);

    if format.is_binary() {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(format_err("missing whitespace after header")),
        }
        let width_bytes = if maxval > 255 { 2 } else { 1 };
        let raster = &bytes[cur.pos..];
        if raster.len() < count * width_bytes {
            return Err(format_err(format!(
                "truncated raster: need {} bytes, found {}",
                count * width_bytes,
                raster.len()
            )));
        }
        for i in 0..count {
            let v = if width_bytes == 2 {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as u32
            } else {
                raster[i] as u32
            };
            if v > maxval {
                return Err(format_err(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    } else {
        for _ in 0..count {
            let v = cur.number("sample").map_err(|_| format_err("truncated or invalid raster"))?;
            if v > maxval {
                return Err(format_err(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    }
    Image::new(width, height, channels, data)
}

/// Encodes `img` with samples `round(clamp(v, 0, 1) * maxval)`.
pub fn write_netpbm(img: &Image, format: NetpbmFormat, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(format_err("maxval must be positive"));
    }
    if img.channels() != format.channels() {
        return Err(format_err(format!(
            "{} needs {} channel(s), image has {}",
            format.magic(),
            format.channels(),
            img.channels()
        )));
    }
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
    let mut out = format!("{}\n{} {}\n{}\n", format.magic(), img.width(), img.height(), maxval).into_bytes();
    if format.is_binary() {
        for &v in img.data() {
            let q = quantize(v);
            if maxval > 255 {
                out.extend_from_slice(&q.to_be_bytes());
            } else {
                out.push(q as u8);
            }
        }
    } else {
        let per_row = img.width() * img.channels();
        for row in img.data().chunks(per_row) {
            let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pixel_plain() {
        let img = read_netpbm(b"P2 1 1 255 255").unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (1, 1, 1));
        assert_eq!(img.data(), &[1.0]);
    }

    #[test]
    fn comments_in_header() {
        let img = read_netpbm(b"P2\n# made by hand\n2 1 # size\n4\n0 2\n").unwrap();
        assert_eq!(img.data(), &[0.0, 0.5]);
    }

    #[test]
    fn plain_and_binary_agree() {
        let img = Image::new(3, 2, 1, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]).unwrap();
        let p2 = read_netpbm(&write_netpbm(&img, NetpbmFormat::P2, 255).unwrap()).unwrap();
        let p5 = read_netpbm(&write_netpbm(&img, NetpbmFormat::P5, 255).unwrap()).unwrap();
        assert_eq!(p2, p5);
        let back = read_netpbm(&write_netpbm(&p5, NetpbmFormat::P2, 255).unwrap()).unwrap();
        assert_eq!(back, p5);
    }

    #[test]
    fn sixteen_bit_big_endian() {
        let img = read_netpbm(b"P5 2 1 65535\n\x01\x02\xff\xff").unwrap();
        assert!((img.data()[0] - 258.0 / 65535.0).abs() < 1e-15);
        assert_eq!(img.data()[1], 1.0);
        let bytes = write_netpbm(&img, NetpbmFormat::P5, 65535).unwrap();
        assert!(bytes.ends_with(b"\x01\x02\xff\xff"));
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            &b"P4 1 1 255 0"[..],
            b"P2 1 1",
            b"P2 1 1 70000 0",
            b"P2 2 1 255 0",
            b"P5 2 2 255\n\x00\x01",
            b"P2 1 1 10 11",
            b"P6 0 1 255\n",
        ] {
            assert!(matches!(read_netpbm(bad), Err(GlsError::Format(_))), "{bad:?}");
        }
    }

    #[test]
    fn channel_mismatch_on_write() {
        let img = Image::filled(1, 1, 3, 0.5).unwrap();
        assert!(write_netpbm(&img, NetpbmFormat::P2, 255).is_err());
    }
}
