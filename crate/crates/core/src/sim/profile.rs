use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerClass {
    UltraLow,
    Low,
    High,
}

/// Coverage and rate figures of a radio technology. Only the upper bound of
/// the operative range is used for detection; rate and power are reported,
/// not simulated.
#[derive(Clone, Debug, PartialEq)]
pub struct TechProfile {
    pub name: String,
    pub operative_range_m: (f64, f64),
    pub data_rate_bytes_per_s: u64,
    pub power_class: PowerClass,
}

impl TechProfile {
    pub fn new(
        name: impl Into<String>,
        min_m: f64,
        max_m: f64,
        data_rate_bytes_per_s: u64,
        power_class: PowerClass,
    ) -> Option<Self> {
        if !(min_m.is_finite() && max_m.is_finite() && 0.0 <= min_m && min_m <= max_m) {
            return None;
        }
        Some(TechProfile {
            name: name.into(),
            operative_range_m: (min_m, max_m),
            data_rate_bytes_per_s,
            power_class,
        })
    }

    pub fn max_range_m(&self) -> f64 {
        self.operative_range_m.1
    }

    /// Looks up a shipped preset by name, ignoring case.
    pub fn preset(name: &str) -> Option<TechProfile> {
        presets()
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
    }
}

/// Short-range and LPWAN technologies an entity may broadcast over.
/// "Several km" for 2G/3G is taken as 1 to 10 km.
pub fn presets() -> Vec<TechProfile> {
    use PowerClass::*;
    let rows: [(&str, f64, f64, u64, PowerClass); 8] = [
        ("6LoWPAN", 10.0, 100.0, 250_000, Low),
        ("BLE", 15.0, 30.0, 1_000_000, Low),
        ("Z-Wave", 30.0, 100.0, 40_000, Low),
        ("ZigBee", 10.0, 100.0, 250_000, Low),
        ("NFC", 0.0, 1.0, 424_000, UltraLow),
        ("RFID", 0.0, 200.0, 4_000_000, UltraLow),
        ("SigFox", 10_000.0, 50_000.0, 600, Low),
        ("2G/3G", 1_000.0, 10_000.0, 10_000_000, High),
    ];
    rows.iter()
        .map(|&(n, lo, hi, rate, power)| {
            TechProfile::new(n, lo, hi, rate, power).expect("preset ranges are ordered")
        })
        .collect()
}
