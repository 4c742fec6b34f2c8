//! Little-endian container shared by model files and dataset packs:
//! a 5-byte magic, a `u32` format version, a body, and a trailing CRC32 of
//! everything before it.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {found} (expected {expected})")]
    BadVersion { expected: u32, found: u32 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("invalid content: {0}")]
    Invalid(String),
}

pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 5], version: u32) -> Self {
        let mut buf = Vec::with_capacity(1 << 16);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) {
        for v in values {
            self.f64(*v);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<(), FormatError> {
        std::fs::write(path, self.finish()).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub struct Decoder<'a> {
    body: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Checks magic, version and checksum, in that order.
    pub fn new(bytes: &'a [u8], magic: &[u8; 5], version: u32) -> Result<Self, FormatError> {
        if bytes.len() < 5 || &bytes[..5] != magic {
            let found = &bytes[..bytes.len().min(5)];
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        if bytes.len() < 9 + 4 {
            return Err(FormatError::Truncated("header"));
        }
        let found = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
        if found != version {
            return Err(FormatError::BadVersion {
                expected: version,
                found,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(FormatError::Checksum { stored, computed });
        }
        Ok(Self { body, pos: 9 })
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.body.len() {
            return Err(FormatError::Truncated(what));
        }
        let out = &self.body[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &'static str) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, FormatError> {
        let raw = self.take(n.checked_mul(8).ok_or(FormatError::Truncated(what))?, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.pos == self.body.len() {
            Ok(())
        } else {
            Err(FormatError::Invalid(format!(
                "{} trailing bytes",
                self.body.len() - self.pos
            )))
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut e = Encoder::new(b"TESTS", 3);
        e.u8(7);
        e.u32(42);
        e.f64s(&[1.5, -2.25]);
        e.finish()
    }

    #[test]
    fn decode_in_order() {
        let bytes = sample();
        let mut d = Decoder::new(&bytes, b"TESTS", 3).unwrap();
        assert_eq!(d.u8("a").unwrap(), 7);
        assert_eq!(d.u32("b").unwrap(), 42);
        assert_eq!(d.f64s(2, "c").unwrap(), vec![1.5, -2.25]);
        assert!(matches!(d.u8("d"), Err(FormatError::Truncated("d"))));
    }

    #[test]
    fn header_and_checksum_errors() {
        let bytes = sample();
        assert!(matches!(Decoder::new(&bytes, b"OTHER", 3), Err(FormatError::BadMagic { .. })));
        assert!(matches!(
            Decoder::new(&bytes, b"TESTS", 4),
            Err(FormatError::BadVersion { found: 3, .. })
        ));
        let mut flipped = bytes.clone();
        flipped[12] ^= 0x10;
        assert!(matches!(Decoder::new(&flipped, b"TESTS", 3), Err(FormatError::Checksum { .. })));
        assert!(Decoder::new(&bytes[..11], b"TESTS", 3).is_err());
    }
}
