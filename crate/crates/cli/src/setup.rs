//! Turning command-line flags into a loaded platform.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use croc_core::control::protocol::parse_int;
use croc_core::loader::{load, parse_elf, FirmwareImage};
use croc_core::soc::{parse_stimulus, Soc, SocConfig, StimAction};

/// Why the process stops with a non-zero status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Load(String),
    DoubleFault(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Load(_) => 2,
            Failure::DoubleFault(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Load(m) | Failure::DoubleFault(m) => f.write_str(m),
        }
    }
}

pub fn usage(e: impl fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// `FILE@ADDR` for a raw binary.
#[derive(Debug, Clone)]
pub struct BinSpec {
    pub path: PathBuf,
    pub addr: u32,
}

pub fn parse_bin_spec(s: &str) -> Result<BinSpec, String> {
    let (path, addr) = s.rsplit_once('@').ok_or("expected FILE@ADDR")?;
    let addr = parse_int(addr)
        .and_then(|a| u32::try_from(a).ok())
        .ok_or_else(|| format!("bad load address `{addr}`"))?;
    Ok(BinSpec {
        path: path.into(),
        addr,
    })
}

/// Decimal or `0x` hex, `_` separators allowed.
pub fn parse_count(s: &str) -> Result<u64, String> {
    parse_int(&s.replace('_', "")).ok_or_else(|| format!("bad number `{s}`"))
}

#[derive(Args, Debug, Clone)]
pub struct PlatformArgs {
    /// Platform preset
    #[arg(long, default_value = "mlem")]
    pub profile: String,
    /// Override the core clock frequency in Hz
    #[arg(long, value_name = "HZ", value_parser = parse_count)]
    pub clk_hz: Option<u64>,
    /// Platform description in TOML; replaces the preset
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FirmwareArgs {
    /// ELF executable to load
    #[arg(long, value_name = "FILE", conflicts_with = "bin")]
    pub elf: Option<PathBuf>,
    /// Raw binary and its load address
    #[arg(long, value_name = "FILE@ADDR", value_parser = parse_bin_spec)]
    pub bin: Option<BinSpec>,
}

impl FirmwareArgs {
    pub fn is_empty(&self) -> bool {
        self.elf.is_none() && self.bin.is_none()
    }
}

pub fn config(args: &PlatformArgs) -> Result<SocConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => SocConfig::from_file(path).map_err(usage)?,
        None => SocConfig::profile(&args.profile)
            .ok_or_else(|| usage(format!("unknown profile `{}` (available: mlem)", args.profile)))?,
    };
    if let Some(hz) = args.clk_hz {
        cfg.clk_hz = hz;
    }
    Ok(cfg)
}

pub fn platform(args: &PlatformArgs) -> Result<Soc, Failure> {
    Soc::build(config(args)?).map_err(usage)
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Load(format!("{}: {e}", path.display())))
}

/// Load the selected firmware and point the core at its entry.
pub fn load_firmware(soc: &mut Soc, fw: &FirmwareArgs) -> Result<(), Failure> {
    let image = match (&fw.elf, &fw.bin) {
        (Some(path), _) => parse_elf(&read(path)?).map_err(|e| Failure::Load(format!("{}: {e}", path.display())))?,
        (None, Some(bin)) => FirmwareImage::from_raw(&read(&bin.path)?, bin.addr),
        (None, None) => return Err(usage("no firmware: pass --elf FILE or --bin FILE@ADDR")),
    };
    load(soc, &image, None).map_err(|e| Failure::Load(e.to_string()))
}

/// Read a stimulus script and check it against the platform's pins.
pub fn install_stimulus(soc: &mut Soc, path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let script = parse_stimulus(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let gpios = soc.config().pads.gpio;
    if let Some(bad) = script.iter().find_map(|s| match s.action {
        StimAction::Gpio { pin, .. } if pin >= gpios => Some(pin),
        _ => None,
    }) {
        return Err(usage(format!(
            "{}: gpio {bad} does not exist ({gpios} pins)",
            path.display()
        )));
    }
    soc.set_stimulus(script);
    Ok(())
}
