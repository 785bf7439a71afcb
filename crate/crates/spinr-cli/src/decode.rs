//! `spinr decode`: reconstruct an image from a (possibly damaged) bitstream.
//!
//! Deserialization is lenient — chunks that fail their CRC or never arrived
//! are dropped and reported — and the render uses the deepest stage the
//! surviving prefix supports. The command only fails (exit 4) when not even
//! stage 1 is decodable.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use spinr_core::image_io::{load_ppm, save_ppm};
use spinr_core::metrics::psnr;
use spinr_core::stream::format::deserialize;
use spinr_core::stream::progressive::progressive_decode;

use crate::args::parse_size;
use crate::error::{io_err, CliError};
use crate::manifest::{sha256_file, tool_version, write_manifest, RunManifest};
use crate::output::{json_metric, write_jsonl};

#[derive(Debug, clap::Args)]
pub struct DecodeArgs {
    /// Bitstream to decode.
    #[arg(long)]
    pub bitstream: PathBuf,

    /// Reference image: sets the render size and scores the result (P6).
    #[arg(long, conflicts_with = "size")]
    pub image: Option<PathBuf>,

    /// Render size as HxW when no reference image is given.
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),

    /// Directory the render and manifest land in (created if missing).
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
}

pub fn run(args: &DecodeArgs) -> Result<(), CliError> {
    let wrap = |source| CliError::Format { path: args.bitstream.clone(), source };
    let bytes = fs::read(&args.bitstream).map_err(io_err(&args.bitstream))?;
    let ds = deserialize(&bytes, false).map_err(wrap)?;

    let reference = match &args.image {
        Some(path) => Some(
            load_ppm(path).map_err(|source| CliError::Image { path: path.clone(), source })?,
        ),
        None => None,
    };
    let (height, width) =
        reference.as_ref().map(|img| (img.height, img.width)).unwrap_or(args.size);

    let out = progressive_decode(&ds, height, width).map_err(wrap)?;
    let score = reference.as_ref().map(|img| psnr(img, &out.image));

    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let render_path = args.out_dir.join("decode_render.ppm");
    save_ppm(&render_path, &out.image)
        .map_err(|source| CliError::Image { path: render_path.clone(), source })?;

    let deepest = ds.header.n as usize + 1;
    let total = ds.header.full_chunk_ids().len();
    let record = json!({
        "command": "decode",
        "stage": out.stage,
        "deepest_stage": deepest,
        "chunks_present": ds.chunks.len(),
        "chunks_total": total,
        "corrupt_chunks": ds.corrupt,
        "missing_chunks": ds.missing,
        "psnr": score.map(json_metric).unwrap_or(Value::Null),
    });
    write_jsonl(&args.out_dir.join("decode_report.jsonl"), &[record])?;
    println!(
        "decoded stage {}/{deepest} ({} of {} chunks{}{})",
        out.stage,
        ds.chunks.len(),
        total,
        if ds.missing.is_empty() {
            String::new()
        } else {
            format!("; missing {:?}", ds.missing)
        },
        match score {
            Some(q) => format!("; psnr {q:.4} dB"),
            None => String::new(),
        }
    );

    let mut inputs = BTreeMap::new();
    inputs.insert(args.bitstream.display().to_string(), sha256_file(&args.bitstream)?);
    if let Some(path) = &args.image {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
    }
    write_manifest(
        &args.out_dir.join("decode_manifest.json"),
        &RunManifest {
            tool: tool_version(),
            command: "decode".into(),
            config: config_json(args),
            seed: 0,
            inputs,
            outputs: vec!["decode_render.ppm".into(), "decode_report.jsonl".into()],
            replay: replay_argv(args),
        },
    )?;
    Ok(())
}

fn config_json(args: &DecodeArgs) -> Value {
    json!({
        "bitstream": args.bitstream.display().to_string(),
        "image": args.image.as_ref().map(|p| p.display().to_string()),
        "size": format!("{}x{}", args.size.0, args.size.1),
        "out_dir": args.out_dir.display().to_string(),
    })
}

fn replay_argv(args: &DecodeArgs) -> Vec<String> {
    let mut argv = vec![
        "decode".into(),
        "--bitstream".into(),
        args.bitstream.display().to_string(),
    ];
    match &args.image {
        Some(path) => argv.extend(["--image".into(), path.display().to_string()]),
        None => argv.extend(["--size".into(), format!("{}x{}", args.size.0, args.size.1)]),
    }
    argv.extend(["--out-dir".into(), args.out_dir.display().to_string()]);
    argv
}
