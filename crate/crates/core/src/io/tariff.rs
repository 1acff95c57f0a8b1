use std::path::Path;

use chrono_tz::Tz;
use serde::Deserialize;

use crate::energy::TariffConfig;
use crate::error::{Error, Result};
use crate::simulator::DEFAULT_SLOT_MINUTES;

/// Market configuration as read from a tariff file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketConfig {
    pub tariff: TariffConfig,
    pub slot_minutes: u32,
    pub timezone: Tz,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TariffFile {
    grid_buy_price_cents_per_kwh: f64,
    grid_sell_price_cents_per_kwh: f64,
    slot_minutes: Option<u32>,
    timezone: Option<String>,
}

/// Parses a TOML tariff file:
///
/// ```toml
/// grid_buy_price_cents_per_kwh = 24.6
/// grid_sell_price_cents_per_kwh = 10.0
/// slot_minutes = 15        # optional
/// timezone = "UTC"         # optional, IANA name
/// ```
pub fn load_tariff(text: &str, source_name: &str) -> Result<MarketConfig> {
    let raw: TariffFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
            .unwrap_or(0);
        Error::Parse {
            source_name: source_name.to_owned(),
            line,
            message: e.message().to_owned(),
        }
    })?;
    let tariff = TariffConfig::new(
        raw.grid_buy_price_cents_per_kwh,
        raw.grid_sell_price_cents_per_kwh,
    )?;
    let slot_minutes = raw.slot_minutes.unwrap_or(DEFAULT_SLOT_MINUTES);
    if slot_minutes == 0 {
        return Err(Error::validation("slot_minutes", "must be positive"));
    }
    let timezone = match raw.timezone {
        None => Tz::UTC,
        Some(name) => name
            .parse::<Tz>()
            .map_err(|_| Error::validation("timezone", format!("unknown time zone `{name}`")))?,
    };
    Ok(MarketConfig {
        tariff,
        slot_minutes,
        timezone,
    })
}

pub fn load_tariff_path(path: &Path) -> Result<MarketConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_tariff(&text, &path.display().to_string())
}
