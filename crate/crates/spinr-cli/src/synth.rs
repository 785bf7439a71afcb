//! `spinr synth`: write a deterministic synthetic test image as P6.
//!
//! The generator mixes smooth radial/linear gradients with banded detail and
//! optional high-frequency grain, which gives fit/attack/stream runs a
//! reproducible input without shipping binary fixtures.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use spinr_core::image_io::save_ppm;
use spinr_core::synth::synth_image_with;

use crate::args::parse_size;
use crate::error::{io_err, CliError};
use crate::manifest::{tool_version, write_manifest, RunManifest};

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Image size as HxW.
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),

    /// Scene selector; each value is a different deterministic composition.
    #[arg(long, default_value_t = 0)]
    pub variant: u32,

    /// Contrast multiplier applied around mid-gray.
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,

    /// Amplitude of seeded per-pixel grain (0 disables it).
    #[arg(long, default_value_t = 0.0)]
    pub grain: f64,

    /// Output image path (parent directories are created).
    #[arg(long, default_value = "synth.ppm")]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    if !args.contrast.is_finite() || !args.grain.is_finite() || args.grain < 0.0 {
        return Err(CliError::Usage(
            "--contrast must be finite and --grain finite and non-negative".into(),
        ));
    }
    let (height, width) = args.size;
    let image = synth_image_with(height, width, args.variant, args.contrast, args.grain);

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    save_ppm(&args.out, &image)
        .map_err(|source| CliError::Image { path: args.out.clone(), source })?;
    println!("wrote {}x{} P6 to {}", height, width, args.out.display());

    write_manifest(
        &manifest_path(&args.out),
        &RunManifest {
            tool: tool_version(),
            command: "synth".into(),
            config: config_json(args),
            seed: args.variant as u64,
            inputs: BTreeMap::new(),
            outputs: vec![args.out.display().to_string()],
            replay: replay_argv(args),
        },
    )?;
    Ok(())
}

/// `runs/img.ppm` → `runs/img_manifest.json`.
fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_manifest.json"))
}

fn config_json(args: &SynthArgs) -> Value {
    json!({
        "size": format!("{}x{}", args.size.0, args.size.1),
        "variant": args.variant,
        "contrast": args.contrast,
        "grain": args.grain,
        "out": args.out.display().to_string(),
    })
}

fn replay_argv(args: &SynthArgs) -> Vec<String> {
    vec![
        "synth".into(),
        "--size".into(),
        format!("{}x{}", args.size.0, args.size.1),
        "--variant".into(),
        args.variant.to_string(),
        "--contrast".into(),
        args.contrast.to_string(),
        "--grain".into(),
        args.grain.to_string(),
        "--out".into(),
        args.out.display().to_string(),
    ]
}
