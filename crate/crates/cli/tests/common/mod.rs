//! Runs the `emlz` binary and reads its JSON-line reports.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

pub fn emlz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emlz"))
        .args(args)
        .env_remove("EMLZ_TMPDIR")
        .output()
        .expect("spawn emlz")
}

/// Runs `emlz` and returns its exit code and the parsed stdout lines.
pub fn run(args: &[&str]) -> (i32, Vec<Value>, String) {
    let out = emlz(args);
    let stdout = String::from_utf8(out.stdout).expect("utf-8 stdout");
    let lines = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("not JSON ({e}): {l}")))
        .collect();
    let code = out.status.code().expect("exit code");
    (code, lines, String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Runs `emlz`, requires exit 0 and exactly one report line.
pub fn run_ok(args: &[&str]) -> Value {
    let (code, mut lines, err) = run(args);
    assert_eq!(code, 0, "emlz {args:?} failed: {err}");
    assert_eq!(lines.len(), 1, "emlz {args:?}: {lines:?}");
    lines.pop().unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a corpus and its greedy parsing; returns the encode report.
pub fn gen_and_encode(dir: &Path, kind: &str, size: &str, seed: u64) -> Value {
    let text = dir.join("text");
    let parsing = dir.join("text.lz77");
    run_ok(&[
        "gen",
        "--kind",
        kind,
        "--size",
        size,
        "--seed",
        &seed.to_string(),
        "-o",
        s(&text),
    ]);
    run_ok(&["encode", s(&text), "-o", s(&parsing)])
}

/// Phrases of a parsing file as `(a, b)` pairs, read straight from the bytes.
pub fn raw_pairs(path: &Path) -> Vec<(u64, u64)> {
    let data = std::fs::read(path).unwrap();
    assert_eq!(&data[..8], b"LZ77EMD1");
    let w = data[8] as usize;
    let int = |b: &[u8]| {
        let mut v = [0u8; 8];
        v[..w].copy_from_slice(b);
        u64::from_le_bytes(v)
    };
    data[16..]
        .chunks_exact(2 * w)
        .map(|r| (int(&r[..w]), int(&r[w..])))
        .collect()
}

/// Total length of the pieces whose source lies more than `b` bytes back,
/// cutting phrases wherever the phrase or its source crosses a multiple of `b`.
pub fn far_bytes(pairs: &[(u64, u64)], b: u64) -> u64 {
    let (mut q, mut far) = (0u64, 0u64);
    for &(a, len) in pairs {
        if len == 0 {
            q += 1;
            continue;
        }
        let (mut p, end) = (a, q + len);
        while q < end {
            let l = (b - q % b).min(b - p % b).min(end - q);
            if q - p > b {
                far += l;
            }
            p += l;
            q += l;
        }
    }
    far
}
