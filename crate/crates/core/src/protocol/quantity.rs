use std::fmt;

use super::number::parse_integer;
use super::ProtocolError;

/// Which suffix table a quantity is parsed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitFamily {
    Frequency,
    Memory,
    NetSpeed,
}

/// A unit of one of the three families. The position inside its family is
/// the power of 1000 relative to the base unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Hz,
    KHz,
    MHz,
    GHz,
    THz,
    PHz,
    B,
    KB,
    MB,
    GB,
    TB,
    PB,
    Bps,
    Kbps,
    Mbps,
    Gbps,
    Tbps,
    Pbps,
}

const FREQUENCY: [Unit; 6] = [Unit::Hz, Unit::KHz, Unit::MHz, Unit::GHz, Unit::THz, Unit::PHz];
const MEMORY: [Unit; 6] = [Unit::B, Unit::KB, Unit::MB, Unit::GB, Unit::TB, Unit::PB];
const NET_SPEED: [Unit; 6] = [
    Unit::Bps,
    Unit::Kbps,
    Unit::Mbps,
    Unit::Gbps,
    Unit::Tbps,
    Unit::Pbps,
];

impl UnitFamily {
    pub fn units(self) -> &'static [Unit; 6] {
        match self {
            UnitFamily::Frequency => &FREQUENCY,
            UnitFamily::Memory => &MEMORY,
            UnitFamily::NetSpeed => &NET_SPEED,
        }
    }
}

impl Unit {
    pub fn suffix(self) -> &'static str {
        match self {
            Unit::Hz => "Hz",
            Unit::KHz => "KHz",
            Unit::MHz => "MHz",
            Unit::GHz => "GHz",
            Unit::THz => "THz",
            Unit::PHz => "PHz",
            Unit::B => "B",
            Unit::KB => "KB",
            Unit::MB => "MB",
            Unit::GB => "GB",
            Unit::TB => "TB",
            Unit::PB => "PB",
            Unit::Bps => "bps",
            Unit::Kbps => "Kbps",
            Unit::Mbps => "Mbps",
            Unit::Gbps => "Gbps",
            Unit::Tbps => "Tbps",
            Unit::Pbps => "Pbps",
        }
    }

    pub fn family(self) -> UnitFamily {
        match self {
            Unit::Hz | Unit::KHz | Unit::MHz | Unit::GHz | Unit::THz | Unit::PHz => {
                UnitFamily::Frequency
            }
            Unit::B | Unit::KB | Unit::MB | Unit::GB | Unit::TB | Unit::PB => UnitFamily::Memory,
            _ => UnitFamily::NetSpeed,
        }
    }

    fn exponent(self) -> u32 {
        self.family()
            .units()
            .iter()
            .position(|u| *u == self)
            .expect("unit is listed in its own family") as u32
    }

    /// Number of base units (Hz, bytes, bit/s) in one of this unit.
    pub fn factor(self) -> u128 {
        1000u128.pow(self.exponent())
    }
}

/// Integer magnitude plus a unit, e.g. `2GHz` or `512MB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quantity {
    pub magnitude: u64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(magnitude: u64, unit: Unit) -> Self {
        Self { magnitude, unit }
    }

    pub fn family(&self) -> UnitFamily {
        self.unit.family()
    }

    /// Value in the family's base unit, with a factor of 1000 between
    /// adjacent units.
    pub fn base_value(&self) -> u128 {
        self.magnitude as u128 * self.unit.factor()
    }

    /// Base value as a float; the conversion is exact up to 2^53.
    pub fn base_value_f64(&self) -> f64 {
        self.base_value() as f64
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.magnitude, self.unit.suffix())
    }
}

/// Parses `\d+` optionally followed by one of the family's suffixes; a bare
/// number takes `default_unit`.
pub fn parse_quantity(
    text: &str,
    family: UnitFamily,
    default_unit: Unit,
) -> Result<Quantity, ProtocolError> {
    debug_assert_eq!(default_unit.family(), family);
    let malformed = || ProtocolError::MalformedQuantity(text.to_owned());
    let split = text
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(text.len());
    let (digits, suffix) = text.split_at(split);
    if digits.is_empty() {
        return Err(malformed());
    }
    let magnitude = parse_integer(digits).map_err(|_| malformed())?;
    let unit = if suffix.is_empty() {
        default_unit
    } else {
        *family
            .units()
            .iter()
            .find(|u| u.suffix() == suffix)
            .ok_or_else(malformed)?
    };
    Ok(Quantity { magnitude, unit })
}

pub fn render_quantity(q: &Quantity) -> String {
    q.to_string()
}
