//! `emlz`: generate corpora, factorize them into .lz77 parsings and decode
//! parsings with in-RAM or external-memory algorithms.
//!
//! Exit codes: 0 ok, 1 verification mismatch or other failure, 2 usage
//! error, 3 not enough disk or RAM.

mod bench;
mod commands;
mod error;
mod report;
mod size;

use clap::{Parser, Subcommand};

use bench::BenchArgs;
use commands::{DecodeArgs, EncodeArgs, GenArgs, PermuteArgs, VerifyArgs};

#[derive(Parser, Debug)]
#[command(name = "emlz", version, about = "External-memory LZ77 decoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus.
    Gen(GenArgs),
    /// Write a parsing that permutes k random items.
    Permute(PermuteArgs),
    /// Factorize a text into a greedy LZ77 parsing.
    Encode(EncodeArgs),
    /// Decode a parsing.
    Decode(DecodeArgs),
    /// Check that a parsing decodes to a text.
    Verify(VerifyArgs),
    /// Measure decoding throughput over corpus sizes and algorithms.
    Bench(BenchArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => commands::cmd_gen(a),
        Command::Permute(a) => commands::cmd_permute(a),
        Command::Encode(a) => commands::cmd_encode(a),
        Command::Decode(a) => commands::cmd_decode(a),
        Command::Verify(a) => commands::cmd_verify(a),
        Command::Bench(a) => bench::cmd_bench(a),
    };
    if let Err(e) = result {
        eprintln!("emlz: {e}");
        std::process::exit(e.exit_code());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn decode_defaults() {
        let cli = Cli::try_parse_from(["emlz", "decode", "in.lz77", "-o", "out"]).unwrap();
        let Command::Decode(a) = cli.command else { panic!() };
        assert_eq!(a.algorithm, emlz::Algorithm::Plain);
        assert_eq!(a.model.mem, 64 << 20);
        assert_eq!(a.model.block_size, 1 << 20);
        assert_eq!(a.tuning.lmax, None);
    }

    #[test]
    fn bench_lists() {
        let cli = Cli::try_parse_from([
            "emlz",
            "bench",
            "--corpus",
            "dna_like",
            "--sizes",
            "16MiB,64MiB",
            "--algorithms",
            "ram,plain",
        ])
        .unwrap();
        let Command::Bench(a) = cli.command else { panic!() };
        assert_eq!(a.sizes, vec![16 << 20, 64 << 20]);
        assert_eq!(a.algorithms, vec![emlz::Algorithm::Ram, emlz::Algorithm::Plain]);
    }

    #[test]
    fn rejects_unknown_algorithm_and_width() {
        assert!(Cli::try_parse_from(["emlz", "decode", "x", "-o", "y", "--algorithm", "fast"]).is_err());
        assert!(Cli::try_parse_from(["emlz", "encode", "x", "-o", "y", "--width", "6"]).is_err());
    }
}
