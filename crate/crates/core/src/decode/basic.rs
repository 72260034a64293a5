//! Baseline decoders: whole text in RAM, and a RAM window over the output
//! with older sources read back from the output file.

use std::path::Path;

use crate::decode::{streams, DecodeConfig, DecodeReport, Run};
use crate::error::{Error, Result};
use crate::format::open_parsing;
use crate::io::{BlockWriter, PositionedReader};
use crate::phrase::{MemoryBudget, Phrase};

/// Appends `len` bytes copied from `src` to `text`, left to right, so that a
/// source overlapping the phrase repeats the overlapped prefix.
fn copy_repeat(text: &mut Vec<u8>, src: usize, len: usize) {
    let mut done = 0;
    while done < len {
        let from = src + done;
        let chunk = (len - done).min(text.len() - from);
        text.extend_from_within(from..from + chunk);
        done += chunk;
    }
}

/// Decodes a phrase sequence in memory.
pub fn decode_ram_phrases<'a>(phrases: impl IntoIterator<Item = &'a Phrase>) -> Result<Vec<u8>> {
    let mut text = Vec::new();
    for (record, ph) in phrases.into_iter().enumerate() {
        match *ph {
            Phrase::Literal(c) => text.push(c),
            Phrase::Repeat { src, len } => {
                let pos = text.len() as u64;
                if src >= pos {
                    return Err(Error::SourceNotBefore {
                        record: record as u64,
                        src,
                        pos,
                    });
                }
                copy_repeat(&mut text, src as usize, len as usize);
            }
        }
    }
    Ok(text)
}

/// Decodes with the whole text held in RAM, refusing texts longer than
/// `cfg.max_ram`.
pub fn decode_ram(input: &Path, output: &Path, cfg: &DecodeConfig) -> Result<DecodeReport> {
    let run = Run::start(input, cfg.tmp_dir.as_deref())?;
    let block = cfg.budget.block_size();
    let mut reader = open_parsing(input, block, &run.stats, streams::INPUT)?;
    let mut text: Vec<u8> = Vec::new();
    for ph in reader.by_ref() {
        let ph = ph?;
        let need = ph.end();
        if need > cfg.max_ram {
            return Err(Error::RamExceeded {
                needed: need,
                limit: cfg.max_ram,
            });
        }
        match ph.phrase {
            Phrase::Literal(c) => text.push(c),
            Phrase::Repeat { src, len } => copy_repeat(&mut text, src as usize, len as usize),
        }
    }
    let mut out = BlockWriter::create(output, block, &run.stats, streams::OUTPUT)?.charge_external(&run.gauge);
    out.put(&text)?;
    out.finish()?;
    let mut report = DecodeReport {
        algorithm: "ram".into(),
        parsing: *reader.stats(),
        parts: 1,
        ..Default::default()
    };
    run.finish(&mut report);
    Ok(report)
}

/// Bytes of recent output the naive decoder keeps in RAM.
pub fn naive_window(budget: &MemoryBudget) -> u64 {
    budget.ram_bytes() - 2 * budget.block_bytes()
}

/// Decodes left to right keeping the last [`naive_window`] bytes in a ring
/// buffer. Sources older than that are read from the output file.
pub fn decode_naive_em(input: &Path, output: &Path, cfg: &DecodeConfig) -> Result<DecodeReport> {
    let run = Run::start(input, cfg.tmp_dir.as_deref())?;
    let block = cfg.budget.block_size();
    let cap = naive_window(&cfg.budget);
    let mut ring: Vec<u8> = vec![0; cap as usize];
    let mut reader = open_parsing(input, block, &run.stats, streams::INPUT)?;
    let mut out = BlockWriter::create(output, block, &run.stats, streams::OUTPUT)?.charge_external(&run.gauge);
    let mut back: Option<PositionedReader> = None;
    let mut random_read = 0u64;
    let mut cur = 0u64;

    for ph in reader.by_ref() {
        let ph = ph?;
        match ph.phrase {
            Phrase::Literal(c) => {
                ring[(cur % cap) as usize] = c;
                out.put(&[c])?;
                cur += 1;
            }
            Phrase::Repeat { src, len } => {
                let mut done = 0;
                while done < len {
                    let s = src + done;
                    let rem = len - done;
                    let dst = (cur % cap) as usize;
                    let room = cap as usize - dst;
                    let amt;
                    if s + cap >= cur {
                        let from = (s % cap) as usize;
                        amt = (rem.min(cur - s) as usize).min(cap as usize - from).min(room);
                        ring.copy_within(from..from + amt, dst);
                    } else {
                        amt = (rem.min(cur - cap - s) as usize).min(room);
                        if s + amt as u64 > out.flushed() {
                            out.finish()?;
                        }
                        let r = match back.as_mut() {
                            Some(r) => r,
                            None => back.insert(PositionedReader::open(output, &run.stats, streams::OUTPUT_RANDOM)?),
                        };
                        r.read_at(s, &mut ring[dst..dst + amt])?;
                        random_read += amt as u64;
                    }
                    out.put(&ring[dst..dst + amt])?;
                    cur += amt as u64;
                    done += amt as u64;
                }
            }
        }
    }
    out.finish()?;
    let mut report = DecodeReport {
        algorithm: "naive".into(),
        parsing: *reader.stats(),
        parts: 1,
        random_read_bytes: random_read,
        ..Default::default()
    };
    run.finish(&mut report);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{write_parsing, IntWidth};

    fn lit(c: u8) -> Phrase {
        Phrase::Literal(c)
    }

    fn rep(src: u64, len: u64) -> Phrase {
        Phrase::Repeat { src, len }
    }

    /// Byte-at-a-time reference.
    fn bytewise(phrases: &[Phrase]) -> Vec<u8> {
        let mut t = Vec::new();
        for ph in phrases {
            match *ph {
                Phrase::Literal(c) => t.push(c),
                Phrase::Repeat { src, len } => {
                    for k in 0..len {
                        let b = t[(src + k) as usize];
                        t.push(b);
                    }
                }
            }
        }
        t
    }

    fn run_file(phrases: &[Phrase], cfg: &DecodeConfig, naive: bool) -> (Vec<u8>, DecodeReport) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.lz77");
        let output = dir.path().join("out");
        write_parsing(std::fs::File::create(&input).unwrap(), phrases, IntWidth::Five).unwrap();
        let report = if naive {
            decode_naive_em(&input, &output, cfg).unwrap()
        } else {
            decode_ram(&input, &output, cfg).unwrap()
        };
        (std::fs::read(&output).unwrap(), report)
    }

    fn small_cfg() -> DecodeConfig {
        DecodeConfig::new(MemoryBudget::new(16384, 4096).unwrap())
    }

    #[test]
    fn examples() {
        let cases: [(&[Phrase], &[u8]); 3] = [
            (&[lit(b'a'), lit(b'b'), rep(0, 4)], b"ababab"),
            (&[lit(b'a'), rep(0, 5)], b"aaaaaa"),
            (&[lit(b'a'), lit(b'b'), rep(0, 1), rep(0, 3), rep(1, 2)], b"abaababa"),
        ];
        for (phrases, text) in cases {
            assert_eq!(bytewise(phrases), text);
            assert_eq!(decode_ram_phrases(phrases).unwrap(), text);
            for naive in [false, true] {
                let (out, rep) = run_file(phrases, &small_cfg(), naive);
                assert_eq!(out, text);
                assert_eq!(rep.parsing.n, text.len() as u64);
            }
        }
    }

    #[test]
    fn ram_writes_each_byte_once() {
        let phrases = [lit(b'x'), rep(0, 10_000), lit(b'y'), rep(5, 300)];
        let (out, report) = run_file(&phrases, &small_cfg(), false);
        assert_eq!(out, bytewise(&phrases));
        assert_eq!(report.io["output"].bytes_written, out.len() as u64);
    }

    #[test]
    fn source_after_phrase_rejected_in_memory() {
        assert!(decode_ram_phrases(&[lit(b'a'), rep(1, 1)]).is_err());
    }

    #[test]
    fn ram_limit_enforced() {
        let mut cfg = small_cfg();
        cfg.max_ram = 100;
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.lz77");
        write_parsing(
            std::fs::File::create(&input).unwrap(),
            &[lit(b'a'), rep(0, 200)],
            IntWidth::Five,
        )
        .unwrap();
        let err = decode_ram(&input, &dir.path().join("o"), &cfg).unwrap_err();
        assert!(matches!(err, Error::RamExceeded { .. }));
    }

    #[test]
    fn naive_short_distances_need_no_reads() {
        let cfg = small_cfg();
        let w = naive_window(&cfg.budget);
        // every source exactly `w` back, or closer
        let mut phrases: Vec<Phrase> = (0..w).map(|i| lit((i % 251) as u8)).collect();
        let mut pos = w;
        for k in 0..200u64 {
            let len = 1 + k % 97;
            phrases.push(rep(pos - w + k % 5, len));
            pos += len;
        }
        let (out, report) = run_file(&phrases, &cfg, true);
        assert_eq!(out, bytewise(&phrases));
        assert_eq!(report.random_read_bytes, 0);
        assert_eq!(report.io.get("output.random").map_or(0, |s| s.bytes_read), 0);
    }

    #[test]
    fn naive_long_self_overlap() {
        let phrases = [lit(b'a'), rep(0, 1_000_000)];
        let (out, report) = run_file(&phrases, &small_cfg(), true);
        assert_eq!(out.len(), 1_000_001);
        assert!(out.iter().all(|&c| c == b'a'));
        assert_eq!(report.random_read_bytes, 0);
    }

    #[test]
    fn naive_far_sources_read_back() {
        let cfg = small_cfg();
        let mut phrases: Vec<Phrase> = (0..40_000u64).map(|i| lit((i * 7 % 256) as u8)).collect();
        phrases.push(rep(3, 30_000));
        phrases.push(rep(10, 5));
        let (out, report) = run_file(&phrases, &cfg, true);
        assert_eq!(out, bytewise(&phrases));
        assert!(report.random_read_bytes > 0);
    }
}
