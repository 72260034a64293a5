//! Output helpers: JSON lines, file hashes and free-space queries.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_at, CliResult};

/// Writes `value` as one JSON line on stdout.
pub fn emit<T: Serialize>(value: &T) -> CliResult<()> {
    let line = serde_json::to_string(value).map_err(|e| crate::error::CliError::Failed(e.to_string()))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{line}")?;
    out.flush()?;
    Ok(())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// SHA-256 of a file's contents, streamed.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = File::open(path).map_err(io_at(path))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let got = f.read(&mut buf).map_err(io_at(path))?;
        if got == 0 {
            break;
        }
        h.update(&buf[..got]);
    }
    Ok(hex(&h.finalize()))
}

/// MiB of output per second, 0 when no time was measured.
pub fn mib_per_s(bytes: u64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        bytes as f64 / (1u64 << 20) as f64 / seconds
    } else {
        0.0
    }
}

/// Bytes available to unprivileged users on the file system holding `dir`.
pub fn free_bytes(dir: &Path) -> Option<u64> {
    use std::os::unix::ffi::OsStrExt;
    let c = std::ffi::CString::new(dir.as_os_str().as_bytes()).ok()?;
    let mut st = std::mem::MaybeUninit::<libc::statvfs>::uninit();
    // SAFETY: `c` is a valid NUL-terminated path and `st` is writable storage
    // for one statvfs record, initialised by the call when it returns 0.
    let st = unsafe {
        if libc::statvfs(c.as_ptr(), st.as_mut_ptr()) != 0 {
            return None;
        }
        st.assume_init()
    };
    Some(st.f_bavail as u64 * st.f_frsize as u64)
}

/// First difference between two byte streams: offset and the bytes at it,
/// `None` for a stream that ended there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub offset: u64,
    pub expected: Option<u8>,
    pub actual: Option<u8>,
}

fn fill(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

/// Compares `expected` with `actual`; returns the first mismatch and the
/// lengths of both streams.
pub fn compare_streams(mut expected: impl Read, mut actual: impl Read) -> io::Result<(Option<Mismatch>, u64, u64)> {
    let (mut a, mut b) = (vec![0u8; 1 << 20], vec![0u8; 1 << 20]);
    let mut offset = 0u64;
    loop {
        let ka = fill(&mut expected, &mut a)?;
        let kb = fill(&mut actual, &mut b)?;
        let k = ka.min(kb);
        if let Some(i) = a[..k].iter().zip(&b[..k]).position(|(x, y)| x != y) {
            let at = offset + i as u64;
            let m = Mismatch {
                offset: at,
                expected: Some(a[i]),
                actual: Some(b[i]),
            };
            let (la, lb) = (
                drain_len(&mut expected, ka as u64, offset)?,
                drain_len(&mut actual, kb as u64, offset)?,
            );
            return Ok((Some(m), la, lb));
        }
        if ka != kb {
            let m = Mismatch {
                offset: offset + k as u64,
                expected: (ka > k).then(|| a[k]),
                actual: (kb > k).then(|| b[k]),
            };
            let (la, lb) = (
                drain_len(&mut expected, ka as u64, offset)?,
                drain_len(&mut actual, kb as u64, offset)?,
            );
            return Ok((Some(m), la, lb));
        }
        offset += k as u64;
        if k < a.len() {
            return Ok((None, offset, offset));
        }
    }
}

/// Total stream length given `buffered` bytes already read past `offset`.
fn drain_len(r: &mut impl Read, buffered: u64, offset: u64) -> io::Result<u64> {
    Ok(offset + buffered + io::copy(r, &mut io::sink())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmp(a: &[u8], b: &[u8]) -> (Option<Mismatch>, u64, u64) {
        compare_streams(a, b).unwrap()
    }

    #[test]
    fn equal_streams() {
        assert_eq!(cmp(b"", b""), (None, 0, 0));
        let x = vec![7u8; (1 << 20) + 5];
        assert_eq!(cmp(&x, &x), (None, x.len() as u64, x.len() as u64));
    }

    #[test]
    fn reports_first_differing_byte() {
        let a = vec![1u8; 3 << 20];
        let mut b = a.clone();
        b[(1 << 20) + 9] = 2;
        b[(2 << 20) + 1] = 3;
        let (m, la, lb) = cmp(&a, &b);
        let want = Mismatch {
            offset: (1 << 20) + 9,
            expected: Some(1),
            actual: Some(2),
        };
        assert_eq!((m, la, lb), (Some(want), 3 << 20, 3 << 20));
    }

    #[test]
    fn shorter_stream_mismatches_at_its_end() {
        let (m, la, lb) = cmp(b"abcdef", b"abc");
        let want = Mismatch {
            offset: 3,
            expected: Some(b'd'),
            actual: None,
        };
        assert_eq!((m, la, lb), (Some(want), 6, 3));
        let (m, ..) = cmp(b"ab", b"abc");
        assert_eq!(m.unwrap().expected, None);
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_bytes(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn free_space_of_temp_dir() {
        assert!(free_bytes(&std::env::temp_dir()).is_some_and(|b| b > 0));
        assert!(free_bytes(Path::new("/no/such/dir")).is_none());
    }
}
