//! `spinr stream`: push a bitstream through the simulated lossy channel,
//! decode progressively as chunks complete, and leave a delivery log plus
//! one render per stage the received prefix could support.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};

use spinr_core::image_io::{load_ppm, save_ppm};
use spinr_core::metrics::psnr;
use spinr_core::stream::channel::{packet_census, packetize, reassemble, transmit, ChannelConfig};
use spinr_core::stream::format::{truncate_stream, Header};
use spinr_core::stream::progressive::progressive_decode;
use spinr_core::Image;

use crate::args::{parse_probability, parse_size};
use crate::error::{io_err, CliError};
use crate::manifest::{sha256_file, tool_version, write_manifest, RunManifest};
use crate::output::{json_metric, render_table, write_jsonl};

#[derive(Debug, clap::Args)]
pub struct StreamArgs {
    /// Serialized model to transmit.
    #[arg(long)]
    pub bitstream: PathBuf,

    /// Reference image: sets the render size and scores each stage (P6).
    #[arg(long, conflicts_with = "size")]
    pub image: Option<PathBuf>,

    /// Render size as HxW when no reference image is given.
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),

    /// Independent per-packet loss probability.
    #[arg(long, value_parser = parse_probability, default_value_t = 0.0)]
    pub loss_prob: f64,

    /// Channel RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Bytes of chunk data per packet (1..=1024).
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..=1024))]
    pub packet_size: u64,

    /// Transmit only the chunks needed for this stage (adaptive bit-rate):
    /// 1 keeps the first and output layers, n+1 keeps everything.
    #[arg(long)]
    pub truncate_after: Option<usize>,

    /// Directory renders, log, and manifest land in (created if missing).
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
}

pub fn run(args: &StreamArgs) -> Result<(), CliError> {
    let wrap = |source| CliError::Format { path: args.bitstream.clone(), source };
    let mut bytes = fs::read(&args.bitstream).map_err(io_err(&args.bitstream))?;
    let mut header = Header::parse(&bytes).map_err(wrap)?;

    if let Some(stage) = args.truncate_after {
        let deepest = header.n as usize + 1;
        if stage == 0 || stage > deepest {
            return Err(CliError::Usage(format!(
                "--truncate-after {stage} is outside this stream's stages 1..={deepest}"
            )));
        }
        bytes = truncate_stream(&bytes, stage - 1).map_err(wrap)?;
        header = Header::parse(&bytes).map_err(wrap)?;
    }

    let reference = match &args.image {
        Some(path) => Some(
            load_ppm(path).map_err(|source| CliError::Image { path: path.clone(), source })?,
        ),
        None => None,
    };
    let (height, width) =
        reference.as_ref().map(|img| (img.height, img.width)).unwrap_or(args.size);

    // Transmit in stage order: the chunks stage 1 needs (encoding matrix,
    // first layer, output layer) go first, then one hidden layer per stage,
    // so the receiver can render as soon as the head of the stream lands
    // instead of waiting for an output layer parked at the tail.
    let payload = args.packet_size as usize;
    let expected: BTreeMap<u8, usize> = packet_census(&header, payload).into_iter().collect();
    let output_id = *expected.keys().max().expect("streams have chunks");
    let mut packets = packetize(&bytes, payload).map_err(wrap)?;
    packets.sort_by_key(|p| match p.chunk_id {
        id if id == output_id => 2,      // right after the first layer
        id if id >= 2 => id as u64 + 1,  // hidden layers, one per stage
        id => id as u64,                 // encoding matrix, first layer
    });
    let sent = packets.len();
    let channel =
        ChannelConfig { packet_payload: payload, loss_prob: args.loss_prob, seed: args.seed };
    let tx = transmit(packets, &channel);

    // Arrival scan: decode again whenever a chunk completes, and keep the
    // render whenever that unlocks a deeper stage.
    let mut got: BTreeMap<u8, BTreeSet<u16>> = BTreeMap::new();
    let mut complete: Vec<u8> = Vec::new();
    let mut events: Vec<Value> = Vec::new();
    let mut renders: Vec<(usize, Image, Option<f64>)> = Vec::new();
    for (i, packet) in tx.delivered.iter().enumerate() {
        let frags = got.entry(packet.chunk_id).or_default();
        frags.insert(packet.frag_index);
        if frags.len() != expected[&packet.chunk_id] || complete.contains(&packet.chunk_id) {
            continue;
        }
        complete.push(packet.chunk_id);
        events.push(json!({
            "event": "chunk",
            "chunk_id": packet.chunk_id,
            "fragments": expected[&packet.chunk_id],
            "completed_at_packet": i + 1,
        }));
        let ds = reassemble(&header, &tx.delivered[..=i]);
        if let Ok(out) = progressive_decode(&ds, height, width) {
            let deepest_so_far = renders.last().map(|(s, _, _)| *s).unwrap_or(0);
            if out.stage > deepest_so_far {
                let score = reference.as_ref().map(|img| psnr(img, &out.image));
                events.push(json!({
                    "event": "stage",
                    "stage": out.stage,
                    "at_packet": i + 1,
                    "psnr": score.map(json_metric).unwrap_or(Value::Null),
                }));
                renders.push((out.stage, out.image, score));
            }
        }
    }
    for (&id, &frags) in &expected {
        if !complete.contains(&id) {
            events.push(json!({
                "event": "chunk_lost",
                "chunk_id": id,
                "fragments_delivered": got.get(&id).map(BTreeSet::len).unwrap_or(0),
                "fragments_expected": frags,
            }));
        }
    }

    // Nothing decodable at all: report why and fail.
    if renders.is_empty() {
        let ds = reassemble(&header, &tx.delivered);
        let source = progressive_decode(&ds, height, width)
            .map(|_| ())
            .expect_err("no stage completed, so the decode must fail");
        return Err(wrap(source));
    }

    let final_stage = renders.last().map(|(s, _, _)| *s).expect("checked non-empty");
    let summary = json!({
        "event": "summary",
        "sent": sent,
        "delivered": tx.delivered.len(),
        "dropped": tx.dropped,
        "loss_prob": args.loss_prob,
        "seed": args.seed,
        "packet_payload": payload,
        "chunks_complete": complete,
        "final_stage": final_stage,
    });
    let mut log = vec![summary];
    log.extend(events);

    // Single-writer phase.
    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let dir = &args.out_dir;
    let mut outputs = Vec::new();
    for (stage, image, _) in &renders {
        let name = format!("stream_stage{stage}.ppm");
        save_ppm(&dir.join(&name), image)
            .map_err(|source| CliError::Image { path: dir.join(&name), source })?;
        outputs.push(name);
    }
    let (_, final_image, final_score) = renders.last().expect("checked non-empty");
    save_ppm(&dir.join("stream_final.ppm"), final_image)
        .map_err(|source| CliError::Image { path: dir.join("stream_final.ppm"), source })?;
    outputs.push("stream_final.ppm".into());
    write_jsonl(&dir.join("stream_log.jsonl"), &log)?;
    outputs.push("stream_log.jsonl".into());

    let headers: Vec<String> =
        ["chunk", "fragments", "delivered", "complete"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = expected
        .iter()
        .map(|(&id, &frags)| {
            vec![
                id.to_string(),
                frags.to_string(),
                got.get(&id).map(BTreeSet::len).unwrap_or(0).to_string(),
                complete.contains(&id).to_string(),
            ]
        })
        .collect();
    print!("{}", render_table(&headers, &rows));
    println!(
        "{sent} sent, {} delivered, {} dropped (p = {}); decoded through stage {final_stage}{}",
        tx.delivered.len(),
        tx.dropped,
        args.loss_prob,
        match final_score {
            Some(q) => format!(", psnr {q:.4} dB"),
            None => String::new(),
        }
    );

    let mut inputs = BTreeMap::new();
    inputs.insert(args.bitstream.display().to_string(), sha256_file(&args.bitstream)?);
    if let Some(path) = &args.image {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
    }
    write_manifest(
        &dir.join("stream_manifest.json"),
        &RunManifest {
            tool: tool_version(),
            command: "stream".into(),
            config: config_json(args),
            seed: args.seed,
            inputs,
            outputs,
            replay: replay_argv(args),
        },
    )?;
    Ok(())
}

fn config_json(args: &StreamArgs) -> Value {
    json!({
        "bitstream": args.bitstream.display().to_string(),
        "image": args.image.as_ref().map(|p| p.display().to_string()),
        "size": format!("{}x{}", args.size.0, args.size.1),
        "loss_prob": args.loss_prob,
        "seed": args.seed,
        "packet_size": args.packet_size,
        "truncate_after": args.truncate_after,
        "out_dir": args.out_dir.display().to_string(),
    })
}

fn replay_argv(args: &StreamArgs) -> Vec<String> {
    let mut argv = vec![
        "stream".into(),
        "--bitstream".into(),
        args.bitstream.display().to_string(),
    ];
    match &args.image {
        Some(path) => argv.extend(["--image".into(), path.display().to_string()]),
        None => argv.extend(["--size".into(), format!("{}x{}", args.size.0, args.size.1)]),
    }
    argv.extend([
        "--loss-prob".into(),
        args.loss_prob.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--packet-size".into(),
        args.packet_size.to_string(),
    ]);
    if let Some(stage) = args.truncate_after {
        argv.extend(["--truncate-after".into(), stage.to_string()]);
    }
    argv.extend(["--out-dir".into(), args.out_dir.display().to_string()]);
    argv
}
