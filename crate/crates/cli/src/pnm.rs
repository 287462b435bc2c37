//! Netpbm I/O: grayscale PGM (P5, P2) and bitmap PBM (P4, P1).
//!
//! Images are always written binary. In PBM a set bit is a black pixel.

use stdmmw_core::GrayImage;

use crate::CliError;

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, CliError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_error(format!("bad {what} in header")))
    }

    fn magic(&mut self) -> Result<[u8; 2], CliError> {
        if self.data.len() < 2 || self.data[0] != b'P' {
            return Err(format_error("not a netpbm file"));
        }
        self.pos = 2;
        Ok([self.data[0], self.data[1]])
    }

    /// Consumes the single whitespace byte separating header and raster.
    fn raster(&mut self) -> Result<&'a [u8], CliError> {
        match self.data.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(&self.data[self.pos + 1..]),
            _ => Err(format_error("missing separator before raster")),
        }
    }

    fn ascii_values(&mut self, count: usize, what: &str) -> Result<Vec<usize>, CliError> {
        (0..count).map(|_| self.number(what)).collect()
    }

    fn ascii_bits(&mut self, count: usize) -> Result<Vec<bool>, CliError> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            self.skip_space();
            match self.data.get(self.pos) {
                Some(b'0') => out.push(false),
                Some(b'1') => out.push(true),
                _ => return Err(format_error("truncated or invalid P1 raster")),
            }
            self.pos += 1;
        }
        Ok(out)
    }
}

fn format_error(msg: impl Into<String>) -> CliError {
    CliError::Format(msg.into())
}

/// Parses a P5 or P2 graymap. Maxvals below 255 are rescaled to 8 bits.
pub fn parse_pgm(data: &[u8]) -> Result<GrayImage, CliError> {
    let mut h = Header { data, pos: 0 };
    let magic = h.magic()?;
    if magic != *b"P5" && magic != *b"P2" {
        return Err(format_error("expected a P5 or P2 graymap"));
    }
    let w = h.number("width")?;
    let ht = h.number("height")?;
    let maxval = h.number("maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(format_error(format!("unsupported maxval {maxval}")));
    }
    let count = w
        .checked_mul(ht)
        .ok_or_else(|| format_error("image dimensions overflow"))?;
    let raw: Vec<usize> = if magic == *b"P5" {
        let r = h.raster()?;
        if r.len() < count {
            return Err(format_error(format!(
                "raster has {} of {count} bytes",
                r.len()
            )));
        }
        r[..count].iter().map(|&b| b as usize).collect()
    } else {
        h.ascii_values(count, "sample")?
    };
    if raw.iter().any(|&v| v > maxval) {
        return Err(format_error("sample exceeds maxval"));
    }
    let pixels = raw
        .into_iter()
        .map(|v| {
            if maxval == 255 {
                v as u8
            } else {
                ((v * 255 + maxval / 2) / maxval) as u8
            }
        })
        .collect();
    GrayImage::new(w, ht, pixels).map_err(CliError::Domain)
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// A binary image of `width × height` bits, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

/// Parses a P4 or P1 bitmap.
pub fn parse_pbm(data: &[u8]) -> Result<Bitmap, CliError> {
    let mut h = Header { data, pos: 0 };
    let magic = h.magic()?;
    if magic != *b"P4" && magic != *b"P1" {
        return Err(format_error("expected a P4 or P1 bitmap"));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    if width == 0 || height == 0 {
        return Err(format_error("bitmap has no pixels"));
    }
    let bits = if magic == *b"P4" {
        let r = h.raster()?;
        let stride = width.div_ceil(8);
        if r.len() < stride * height {
            return Err(format_error("truncated P4 raster"));
        }
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(r[y * stride + x / 8] & (0x80 >> (x % 8)) != 0);
            }
        }
        bits
    } else {
        h.ascii_bits(width * height)?
    };
    Ok(Bitmap {
        width,
        height,
        bits,
    })
}

pub fn write_pbm(bm: &Bitmap) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", bm.width, bm.height).into_bytes();
    let stride = bm.width.div_ceil(8);
    for y in 0..bm.height {
        let mut row = vec![0u8; stride];
        for x in 0..bm.width {
            if bm.bits[y * bm.width + x] {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 50 + y) as u8).unwrap();
        assert_eq!(parse_pgm(&write_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn pgm_ascii_comments_and_maxval() {
        let text = b"P2\n# comment\n2 2\n# another\n15\n0 15\n7 8\n";
        let img = parse_pgm(text).unwrap();
        assert_eq!(img.pixels(), &[0, 255, 119, 136]);
        assert!(parse_pgm(b"P2\n1 1\n255\n300\n").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01\x02").is_err());
        assert!(parse_pgm(b"P6\n1 1\n255\n\x00\x00\x00").is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn pgm_raster_may_start_with_whitespace_byte() {
        let data = b"P5\n2 1\n255\n\x20\x0a";
        assert_eq!(parse_pgm(data).unwrap().pixels(), &[32, 10]);
    }

    #[test]
    fn pbm_round_trip_with_padding() {
        let bm = Bitmap {
            width: 11,
            height: 3,
            bits: (0..33).map(|i| i % 3 == 0 || i % 7 == 1).collect(),
        };
        let bytes = write_pbm(&bm);
        assert_eq!(bytes.len(), "P4\n11 3\n".len() + 6);
        assert_eq!(parse_pbm(&bytes).unwrap(), bm);
    }

    #[test]
    fn pbm_ascii() {
        let bm = parse_pbm(b"P1\n3 2\n1 0 1\n010\n").unwrap();
        assert_eq!(bm.bits, vec![true, false, true, false, true, false]);
        assert!(parse_pbm(b"P1\n3 2\n1 0 1\n01\n").is_err());
    }
}
