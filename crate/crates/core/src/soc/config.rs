//! Platform description and pad budget.
//!
//! A config file is TOML with the same keys as [`SocConfig`]; every key is
//! optional and falls back to the MLEM preset. Integers may be written in
//! hex (`0x1000_0000`).
//!
//! ```toml
//! profile = "custom"
//! clk_hz = 50_000_000
//! neopixel_base = false   # omit the NeoPixel controller
//!
//! [pads]
//! total = 48
//! croc_domain = 12
//! user = 36
//! gpio = 16
//! ```

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::obi::Arbitration;

/// Pads taken by the UART (TX, RX).
pub const UART_PADS: u32 = 2;
/// Pads taken by the NeoPixel data line.
pub const NEOPIXEL_PADS: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// The MLEM demonstrator: pad budget and peripheral set are fixed.
    Mlem,
    /// Anything goes as long as the pad arithmetic adds up.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PadBudget {
    pub total: u32,
    pub croc_domain: u32,
    pub user: u32,
    pub gpio: u32,
}

impl Default for PadBudget {
    fn default() -> Self {
        PadBudget {
            total: 48,
            croc_domain: 12,
            user: 36,
            gpio: 26,
        }
    }
}

/// Pad usage of a built platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PadReport {
    pub total: u32,
    pub croc_domain: u32,
    pub user: u32,
    pub gpio: u32,
    pub uart: u32,
    pub neopixel: u32,
    /// User pads not claimed by GPIO, UART or NeoPixel.
    pub user_spare: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("pad budget: croc domain {croc} + user {user} != total {total}")]
    PadSum { croc: u32, user: u32, total: u32 },
    #[error("pad budget: {needed} user pads needed (gpio + uart + neopixel) but only {user} available")]
    PadOvercommit { needed: u32, user: u32 },
    #[error("mlem profile requires pads total=48 croc_domain=12 user=36 gpio=26 with the NeoPixel controller")]
    MlemMismatch,
    #[error("gpio count {0} exceeds the 32-bit register width")]
    TooManyGpios(u32),
    #[error("clock frequency must be non-zero")]
    ZeroClock,
    #[error("address map: {0}")]
    Overlap(String),
    #[error("bad memory configuration: {0}")]
    Memory(String),
    #[error("config file: {0}")]
    Parse(String),
}

/// `false` in a config file disables an optional peripheral.
fn optional_base<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Base {
        Addr(u32),
        Flag(bool),
    }
    match Base::deserialize(d)? {
        Base::Addr(a) => Ok(Some(a)),
        Base::Flag(false) => Ok(None),
        Base::Flag(true) => Ok(Some(SocConfig::default().neopixel_base.unwrap())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocConfig {
    pub profile: Profile,
    pub clk_hz: u64,
    pub sram0_base: u32,
    pub sram0_size: u32,
    pub sram1_base: u32,
    pub sram1_size: u32,
    pub uart_base: u32,
    pub gpio_base: u32,
    pub timer_base: u32,
    #[serde(deserialize_with = "optional_base")]
    pub neopixel_base: Option<u32>,
    pub user_base: u32,
    pub user_size: u32,
    pub reset_pc: u32,
    pub enable_c_ext: bool,
    pub arbitration: Arbitration,
    pub pads: PadBudget,
}

impl Default for SocConfig {
    fn default() -> Self {
        Self::mlem()
    }
}

impl SocConfig {
    /// The MLEM demonstrator preset.
    pub fn mlem() -> Self {
        SocConfig {
            profile: Profile::Mlem,
            clk_hz: 20_000_000,
            sram0_base: 0x1000_0000,
            sram0_size: 64 * 1024,
            sram1_base: 0x1001_0000,
            sram1_size: 64 * 1024,
            uart_base: 0x0300_1000,
            gpio_base: 0x0300_2000,
            timer_base: 0x0300_3000,
            neopixel_base: Some(0x0300_5000),
            user_base: 0x2000_0000,
            user_size: 0x1000_0000,
            reset_pc: 0x1000_0000,
            enable_c_ext: true,
            arbitration: Arbitration::FixedPriority,
            pads: PadBudget::default(),
        }
    }

    /// Preset by name.
    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "mlem" => Some(Self::mlem()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Check the pad arithmetic and return the pad report.
    pub fn pad_report(&self) -> Result<PadReport, ConfigError> {
        let p = self.pads;
        if self.clk_hz == 0 {
            return Err(ConfigError::ZeroClock);
        }
        if p.croc_domain.checked_add(p.user) != Some(p.total) {
            return Err(ConfigError::PadSum {
                croc: p.croc_domain,
                user: p.user,
                total: p.total,
            });
        }
        if p.gpio > 32 {
            return Err(ConfigError::TooManyGpios(p.gpio));
        }
        let neopixel = if self.neopixel_base.is_some() { NEOPIXEL_PADS } else { 0 };
        let needed = p.gpio + UART_PADS + neopixel;
        if needed > p.user {
            return Err(ConfigError::PadOvercommit { needed, user: p.user });
        }
        if self.profile == Profile::Mlem && (p != PadBudget::default() || neopixel == 0) {
            return Err(ConfigError::MlemMismatch);
        }
        Ok(PadReport {
            total: p.total,
            croc_domain: p.croc_domain,
            user: p.user,
            gpio: p.gpio,
            uart: UART_PADS,
            neopixel,
            user_spare: p.user - needed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlem_pads() {
        let r = SocConfig::mlem().pad_report().unwrap();
        assert_eq!((r.total, r.croc_domain, r.user, r.gpio), (48, 12, 36, 26));
        assert_eq!(r.user_spare, 7);
    }

    #[test]
    fn user_35_fails() {
        let mut c = SocConfig::mlem();
        c.pads.user = 35;
        assert!(matches!(c.pad_report(), Err(ConfigError::PadSum { .. })));
    }

    #[test]
    fn mlem_rejects_consistent_but_different_budget() {
        let mut c = SocConfig::mlem();
        c.pads.gpio = 20;
        assert_eq!(c.pad_report(), Err(ConfigError::MlemMismatch));
        c.profile = Profile::Custom;
        assert!(c.pad_report().is_ok());
    }

    #[test]
    fn overcommitted_user_pads() {
        let mut c = SocConfig::mlem();
        c.profile = Profile::Custom;
        c.pads.gpio = 32;
        c.pads.user = 34;
        c.pads.croc_domain = 14;
        assert!(matches!(
            c.pad_report(),
            Err(ConfigError::PadOvercommit { needed: 35, .. })
        ));
    }

    #[test]
    fn toml_overrides_with_hex() {
        let c = SocConfig::from_toml(
            r#"
            profile = "custom"
            clk_hz = 50_000_000
            sram1_base = 0x1002_0000
            neopixel_base = false
            arbitration = "round-robin"
            [pads]
            gpio = 16
            "#,
        )
        .unwrap();
        assert_eq!(c.clk_hz, 50_000_000);
        assert_eq!(c.sram1_base, 0x1002_0000);
        assert_eq!(c.neopixel_base, None);
        assert_eq!(c.arbitration, Arbitration::RoundRobin);
        assert_eq!(c.pads.total, 48);
        assert_eq!(c.pad_report().unwrap().neopixel, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SocConfig::from_toml("clock = 5").is_err());
    }
}
