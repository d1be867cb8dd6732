//! Quantities written as `"<number> <unit>"` strings.
//!
//! Power-of-ten units are applied by shifting the decimal exponent and
//! re-parsing, so `"3.42e-6 cm"` becomes exactly the double nearest to
//! `3.42e-8`. Bare numbers are taken to be in SI base units.

use evapsim_core::units::AMU;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Temperature,
    /// Ordinary frequency; converted to angular frequency on resolution.
    Frequency,
    Length,
    Area,
    Volume,
    Time,
    Mass,
}

impl Dimension {
    pub fn name(self) -> &'static str {
        match self {
            Self::Temperature => "temperature",
            Self::Frequency => "frequency",
            Self::Length => "length",
            Self::Area => "area",
            Self::Volume => "volume",
            Self::Time => "time",
            Self::Mass => "mass",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Scale {
    Pow10(i32),
    Factor(f64),
}

const UNITS: &[(Dimension, &str, Scale)] = &[
    (Dimension::Temperature, "K", Scale::Pow10(0)),
    (Dimension::Temperature, "mK", Scale::Pow10(-3)),
    (Dimension::Temperature, "uK", Scale::Pow10(-6)),
    (Dimension::Temperature, "μK", Scale::Pow10(-6)),
    (Dimension::Temperature, "nK", Scale::Pow10(-9)),
    (Dimension::Frequency, "Hz", Scale::Pow10(0)),
    (Dimension::Frequency, "kHz", Scale::Pow10(3)),
    (Dimension::Frequency, "MHz", Scale::Pow10(6)),
    (Dimension::Length, "m", Scale::Pow10(0)),
    (Dimension::Length, "cm", Scale::Pow10(-2)),
    (Dimension::Length, "mm", Scale::Pow10(-3)),
    (Dimension::Length, "um", Scale::Pow10(-6)),
    (Dimension::Length, "μm", Scale::Pow10(-6)),
    (Dimension::Length, "nm", Scale::Pow10(-9)),
    (Dimension::Area, "m2", Scale::Pow10(0)),
    (Dimension::Area, "cm2", Scale::Pow10(-4)),
    (Dimension::Area, "um2", Scale::Pow10(-12)),
    (Dimension::Area, "nm2", Scale::Pow10(-18)),
    (Dimension::Volume, "m3", Scale::Pow10(0)),
    (Dimension::Volume, "cm3", Scale::Pow10(-6)),
    (Dimension::Volume, "nm3", Scale::Pow10(-27)),
    (Dimension::Time, "s", Scale::Pow10(0)),
    (Dimension::Time, "ms", Scale::Pow10(-3)),
    (Dimension::Time, "us", Scale::Pow10(-6)),
    (Dimension::Mass, "kg", Scale::Pow10(0)),
    (Dimension::Mass, "amu", Scale::Factor(AMU)),
];

/// A number or a `"<number> <unit>"` string as written in the config.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RawQuantity {
    Number(f64),
    Text(String),
}

/// Split a numeric literal into mantissa and decimal exponent.
fn split_exponent(num: &str) -> Option<(&str, i32)> {
    match num.find(['e', 'E']) {
        Some(i) => Some((&num[..i], num[i + 1..].parse().ok()?)),
        None => Some((num, 0)),
    }
}

fn parse_number(num: &str) -> Result<f64, String> {
    let v: f64 = num.parse().map_err(|_| format!("`{num}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{num}` is not finite"))
    }
}

pub fn parse_quantity(raw: &RawQuantity, dim: Dimension) -> Result<f64, String> {
    let text = match raw {
        RawQuantity::Number(v) if v.is_finite() => return Ok(*v),
        RawQuantity::Number(v) => return Err(format!("{v} is not finite")),
        RawQuantity::Text(t) => t.trim(),
    };
    let (num, unit) = match text.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => return parse_number(text),
    };
    let known: Vec<&str> = UNITS.iter().filter(|u| u.0 == dim).map(|u| u.1).collect();
    let scale = UNITS
        .iter()
        .find(|u| u.0 == dim && u.1 == unit)
        .map(|u| u.2)
        .ok_or_else(|| format!("unknown {} unit `{unit}` (expected one of {})", dim.name(), known.join(", ")))?;
    match scale {
        Scale::Pow10(p) => {
            let (mant, exp) = split_exponent(num).ok_or_else(|| format!("`{num}` is not a number"))?;
            parse_number(mant)?;
            parse_number(&format!("{mant}e{}", exp + p))
        }
        Scale::Factor(f) => Ok(parse_number(num)? * f),
    }
}
