//! FNV-1a 64-bit hashing for artifact digests and file checksums.
//!
//! Not cryptographic — used to detect corruption and to give datasets,
//! checkpoints, and configs short stable identities.

use std::io::Read;
use std::path::Path;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Copy, Debug)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(FNV_OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

pub fn digest_bytes(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::new();
    h.update(bytes);
    h.finish()
}

/// Digest of a slice of f32 values via their little-endian byte encoding;
/// used for parameter bit-equality checks.
pub fn digest_f32(values: &[f32]) -> u64 {
    let mut h = Fnv1a::new();
    for v in values {
        h.update(&v.to_le_bytes());
    }
    h.finish()
}

pub fn digest_file(path: &Path) -> std::io::Result<u64> {
    let mut file = std::fs::File::open(path)?;
    let mut h = Fnv1a::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finish())
}

pub fn hex(digest: u64) -> String {
    format!("{digest:016x}")
}
