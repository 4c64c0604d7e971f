//! Canonical binary encoding: length-prefixed records with a version tag.
//!
//! Consensus agreement and the golden-file credential tests both depend on
//! encodings being byte-stable across runs and platforms, so everything is
//! little-endian with explicit lengths and no padding.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("truncated record: wanted {wanted} more bytes, had {remaining}")]
    Truncated { wanted: usize, remaining: usize },
    #[error("unsupported version {0}, expected {1}")]
    Version(u8, u8),
    #[error("length prefix {0} exceeds remaining input")]
    BadLength(u32),
    #[error("trailing garbage after record")]
    Trailing,
    #[error("invalid field: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn with_version(tag: u8) -> Self {
        let mut w = Writer::new();
        w.put_u8(tag);
        w
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_fixed(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        self.put_u32(bytes.len() as u32);
        self.buf.extend_from_slice(bytes);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_bytes(s.as_bytes());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn expect_version(&mut self, tag: u8) -> Result<(), WireError> {
        let v = self.take_u8()?;
        if v != tag {
            return Err(WireError::Version(v, tag));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(WireError::Truncated {
                wanted: n,
                remaining,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn take_u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn take_u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn take_u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn take_f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn take_fixed<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn take_bytes(&mut self) -> Result<&'a [u8], WireError> {
        let len = self.take_u32()?;
        if len as usize > self.buf.len() - self.pos {
            return Err(WireError::BadLength(len));
        }
        self.take(len as usize)
    }

    pub fn take_str(&mut self) -> Result<String, WireError> {
        let raw = self.take_bytes()?;
        String::from_utf8(raw.to_vec()).map_err(|_| WireError::Invalid("utf-8 string"))
    }

    pub fn finish(&self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::Trailing);
        }
        Ok(())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}
