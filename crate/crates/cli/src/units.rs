//! Physical values written as `"<number> <unit>"` strings.
//!
//! Frequencies accept `MHz` and `kHz` (read as `f = omega / 2pi`) or
//! `rad/us`; lengths `um`; times `us`, `ns` and `ms`. `µ` may replace `u`.
//! Everything is stored in rad/us, um and us.

use std::f64::consts::TAU;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Length,
    Time,
}

impl Dimension {
    fn canonical(self) -> &'static str {
        match self {
            Dimension::Frequency => "rad/us",
            Dimension::Length => "um",
            Dimension::Time => "us",
        }
    }

    fn accepted(self) -> &'static str {
        match self {
            Dimension::Frequency => "MHz, kHz or rad/us",
            Dimension::Length => "um",
            Dimension::Time => "us, ns or ms",
        }
    }

    fn factor(self, unit: &str) -> Option<f64> {
        let unit = unit.replace('µ', "u");
        match (self, unit.as_str()) {
            (Dimension::Frequency, "MHz") => Some(TAU),
            (Dimension::Frequency, "kHz") => Some(TAU * 1e-3),
            (Dimension::Frequency, "rad/us") => Some(1.0),
            (Dimension::Length, "um") => Some(1.0),
            (Dimension::Time, "us") => Some(1.0),
            (Dimension::Time, "ns") => Some(1e-3),
            (Dimension::Time, "ms") => Some(1e3),
            _ => None,
        }
    }
}

/// Parses `"<number> <unit>"` into the canonical unit of `dim`.
pub fn parse_quantity(s: &str, dim: Dimension) -> Result<f64, String> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_whitespace()).ok_or_else(|| {
        format!("`{s}` has no unit; write a number followed by {}", dim.accepted())
    })?;
    let (num, unit) = s.split_at(split);
    let value: f64 = num.parse().map_err(|_| format!("`{num}` is not a number"))?;
    let unit = unit.trim();
    let k = dim.factor(unit).ok_or_else(|| format!("unit `{unit}` is not one of {}", dim.accepted()))?;
    if !value.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(value * k)
}

/// Canonical text of a stored value. `{}` on f64 prints the shortest string
/// that reads back to the same bits.
pub fn format_quantity(v: f64, dim: Dimension) -> String {
    format!("{v} {}", dim.canonical())
}

macro_rules! quantity {
    ($name:ident, $dim:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub f64);

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&format_quantity(self.0, $dim))
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                struct V;
                impl Visitor<'_> for V {
                    type Value = $name;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        write!(f, "a string such as \"5 {}\"", $dim.canonical())
                    }
                    fn visit_str<E: de::Error>(self, s: &str) -> Result<$name, E> {
                        parse_quantity(s, $dim).map($name).map_err(E::custom)
                    }
                    fn visit_i64<E: de::Error>(self, v: i64) -> Result<$name, E> {
                        Err(E::custom(format!("`{v}` has no unit; write it as \"{v} {}\"", $dim.canonical())))
                    }
                    fn visit_f64<E: de::Error>(self, v: f64) -> Result<$name, E> {
                        Err(E::custom(format!("`{v}` has no unit; write it as \"{v} {}\"", $dim.canonical())))
                    }
                }
                d.deserialize_any(V)
            }
        }
    };
}

quantity!(Frequency, Dimension::Frequency);
quantity!(Length, Dimension::Length);
quantity!(Time, Dimension::Time);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn megahertz_carries_two_pi() {
        assert_eq!(parse_quantity("5 MHz", Dimension::Frequency).unwrap(), TAU * 5.0);
        assert_eq!(parse_quantity("31.4 rad/us", Dimension::Frequency).unwrap(), 31.4);
        assert_eq!(parse_quantity("2 µs", Dimension::Time).unwrap(), 2.0);
        assert_eq!(parse_quantity("500 ns", Dimension::Time).unwrap(), 0.5);
    }

    #[test]
    fn rejects_missing_or_wrong_units() {
        assert!(parse_quantity("5", Dimension::Frequency).is_err());
        assert!(parse_quantity("5 um", Dimension::Frequency).is_err());
        assert!(parse_quantity("x MHz", Dimension::Frequency).is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        for v in [TAU * 5.0, 1.0 / 3.0, -1e-300, 4.4] {
            let s = format_quantity(v, Dimension::Frequency);
            assert_eq!(parse_quantity(&s, Dimension::Frequency).unwrap().to_bits(), v.to_bits());
        }
    }
}
