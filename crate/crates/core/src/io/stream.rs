use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::BitStream;

pub const MAGIC: &[u8; 4] = b"DSMX";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

const FLAG_MULTIPLEXED: u8 = 0x01;

/// Contents of a `.dsmx` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuxStreamFile {
    pub multiplexed: bool,
    pub stream: BitStream,
}

impl MuxStreamFile {
    pub fn new(stream: BitStream, multiplexed: bool) -> Self {
        Self {
            multiplexed,
            stream,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let symbols = self.stream.symbols();
        let mut out = Vec::with_capacity(HEADER_LEN + symbols.len().div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(if self.multiplexed { FLAG_MULTIPLEXED } else { 0 });
        out.extend_from_slice(&self.stream.sample_rate().to_le_bytes());
        out.extend_from_slice(&(symbols.len() as u64).to_le_bytes());
        for chunk in symbols.chunks(8) {
            let mut byte = 0u8;
            for (i, &s) in chunk.iter().enumerate() {
                if s > 0 {
                    byte |= 0x80 >> i;
                }
            }
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected \"DSMX\"", &bytes[0..4])));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!(
                "unsupported version {}, expected {VERSION}",
                bytes[4]
            )));
        }
        let flags = bytes[5];
        if flags & !FLAG_MULTIPLEXED != 0 {
            return Err(Error::Format(format!("reserved flag bits set: {flags:#04x}")));
        }
        let sample_rate = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
        let count = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes"));
        let count = usize::try_from(count)
            .map_err(|_| Error::Format(format!("sample count {count} too large")))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != count.div_ceil(8) {
            return Err(Error::Format(format!(
                "payload is {} bytes, expected {} for {count} samples",
                payload.len(),
                count.div_ceil(8)
            )));
        }
        if count % 8 != 0 {
            let pad_mask = 0xFFu8 >> (count % 8);
            if payload[payload.len() - 1] & pad_mask != 0 {
                return Err(Error::Format("non-zero padding bits".into()));
            }
        }
        let symbols = (0..count)
            .map(|n| if payload[n / 8] & (0x80 >> (n % 8)) != 0 { 1 } else { -1 })
            .collect();
        Ok(Self {
            multiplexed: flags & FLAG_MULTIPLEXED != 0,
            stream: BitStream::new(symbols, sample_rate)?,
        })
    }
}

pub fn write_stream(path: impl AsRef<Path>, file: &MuxStreamFile) -> Result<()> {
    fs::write(path, file.to_bytes())?;
    Ok(())
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<MuxStreamFile> {
    MuxStreamFile::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_byte() {
        let s = BitStream::new(vec![1, -1, 1, -1, 1, -1, 1, -1], 5_120_000).unwrap();
        let bytes = MuxStreamFile::new(s, true).to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 1);
        assert_eq!(bytes[HEADER_LEN], 0xAA);
        assert_eq!(bytes[5], 1);
        assert_eq!(&bytes[6..10], &5_120_000u32.to_le_bytes());
    }

    #[test]
    fn empty_stream_is_header_only() {
        let f = MuxStreamFile::new(BitStream::new(vec![], 48_000).unwrap(), false);
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[10..18], &[0u8; 8]);
        assert_eq!(MuxStreamFile::from_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn padding_and_partial_byte() {
        let s = BitStream::new(vec![1, 1, -1], 1).unwrap();
        let bytes = MuxStreamFile::new(s.clone(), false).to_bytes();
        assert_eq!(bytes[HEADER_LEN], 0b1100_0000);
        assert_eq!(MuxStreamFile::from_bytes(&bytes).unwrap().stream, s);
        let mut bad = bytes.clone();
        bad[HEADER_LEN] |= 1;
        assert!(MuxStreamFile::from_bytes(&bad).is_err());
    }

    #[test]
    fn rejects_bad_header() {
        let good = MuxStreamFile::new(BitStream::new(vec![1; 9], 1).unwrap(), false).to_bytes();
        let mut m = good.clone();
        m[0] = b'X';
        assert!(matches!(MuxStreamFile::from_bytes(&m), Err(Error::Format(_))));
        let mut v = good.clone();
        v[4] = 2;
        assert!(matches!(MuxStreamFile::from_bytes(&v), Err(Error::Format(_))));
        assert!(MuxStreamFile::from_bytes(&good[..good.len() - 1]).is_err());
        assert!(MuxStreamFile::from_bytes(&good[..10]).is_err());
    }
}
