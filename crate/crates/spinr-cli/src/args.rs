//! Flag vocabulary shared across subcommands: value enums and the little
//! parsers clap delegates to.

use clap::ValueEnum;
use spinr_core::stream::format::QuantMode;
use spinr_core::Family;

/// What `fit` trains: a plain SIREN, a Fourier-feature ReLU net, or the
/// staged SIREN whose layers stream independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Siren,
    Fourier,
    Spinr,
}

impl Method {
    pub fn family(self) -> Family {
        match self {
            Method::Siren | Method::Spinr => Family::Siren,
            Method::Fourier => Family::Fourier,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Siren => "siren",
            Method::Fourier => "fourier",
            Method::Spinr => "spinr",
        }
    }
}

/// Serialization precision for the bitstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Quant {
    F32,
    U8,
    U16,
}

impl Quant {
    pub fn mode(self) -> QuantMode {
        match self {
            Quant::F32 => QuantMode::F32,
            Quant::U8 => QuantMode::U8,
            Quant::U16 => QuantMode::U16,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quant::F32 => "f32",
            Quant::U8 => "u8",
            Quant::U16 => "u16",
        }
    }
}

/// `HxW` raster dimensions, e.g. `64x64`.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW (e.g. 64x64), got {s:?}"))?;
    let parse = |part: &str| {
        part.trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format!("bad dimension {part:?} in {s:?}"))
    };
    Ok((parse(h)?, parse(w)?))
}

/// Probability flag in `[0, 1]`.
pub fn parse_probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}
