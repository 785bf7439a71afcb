//! Command-line front end for the SPINR toolkit.
//!
//! Subcommands cover the full pipeline: `synth` writes deterministic test
//! images, `fit` trains and serializes models (single- or multi-seed),
//! `attack` measures robustness of a saved model, `stream` pushes a bitstream
//! through the lossy channel with progressive decoding, `decode` reconstructs
//! from a damaged stream, and `report` tabulates any of the JSONL reports.
//!
//! Every run writes a manifest (full config, seeds, input hashes, output
//! paths, tool version) sufficient to replay it bit-for-bit.

mod args;
mod attack;
mod decode;
mod error;
mod fit;
mod manifest;
mod output;
mod report;
mod stream;
mod synth;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spinr", version, about = "Neural image codec over lossy channels")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a deterministic synthetic test image (P6).
    Synth(synth::SynthArgs),
    /// Fit a model to an image and serialize it, across one or more seeds.
    Fit(fit::FitArgs),
    /// Run parameter-robustness attacks against a serialized model.
    Attack(attack::AttackArgs),
    /// Transmit a bitstream over the lossy channel and decode progressively.
    Stream(stream::StreamArgs),
    /// Reconstruct an image from a (possibly damaged) bitstream.
    Decode(decode::DecodeArgs),
    /// Render JSONL reports as an aligned table.
    Report(report::ReportArgs),
}

fn main() {
    // Clap handles --help/--version and exits 2 on usage errors itself.
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Synth(a) => synth::run(a),
        Cmd::Fit(a) => fit::run(a),
        Cmd::Attack(a) => attack::run(a),
        Cmd::Stream(a) => stream::run(a),
        Cmd::Decode(a) => decode::run(a),
        Cmd::Report(a) => report::run(a),
    };
    if let Err(err) = result {
        eprintln!("spinr: {err}");
        std::process::exit(err.exit_code());
    }
}
