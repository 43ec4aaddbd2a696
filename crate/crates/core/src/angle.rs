//! Angle conventions shared by every module.
//!
//! Angles live on the unit circle and are represented in `[-π, π)`. Tables of
//! the angle map additionally keep the closed endpoint `π`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Wraps `x` into `[-π, π)` as `x - 2π·floor((x + π) / 2π)`.
///
/// `π` maps to `-π`.
pub fn wrap(x: f64) -> f64 {
    let r = x - TAU * ((x + PI) / TAU).floor();
    // rounding can land exactly on the open end
    if r >= PI {
        r - TAU
    } else if r < -PI {
        -PI
    } else {
        r
    }
}

/// Like [`wrap`], but values already in the closed interval `[-π, π]` are
/// returned untouched, so `π` stays `π`.
pub fn wrap_closed(x: f64) -> f64 {
    if (-PI..=PI).contains(&x) {
        x
    } else {
        wrap(x)
    }
}

pub(crate) fn finite(module: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { module, value })
    }
}

/// Parses an angle token.
///
/// Accepts plain decimal radians (`0.785`) and multiples of π written as
/// `pi`, `-pi`, `3pi/4`, `-pi/4`, `2pi`, `pi/2`. A `*` between the
/// multiplier and `pi` is tolerated (`3*pi/4`).
///
/// ```
/// use chsh_gauge::angle::parse_angle;
/// use std::f64::consts::PI;
/// assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
/// assert_eq!(parse_angle("-pi/4").unwrap(), -PI / 4.0);
/// assert_eq!(parse_angle("0.5").unwrap(), 0.5);
/// ```
pub fn parse_angle(token: &str) -> Result<f64> {
    let bad = || Error::AngleParse(token.to_string());
    let t = token.trim().to_ascii_lowercase().replace(' ', "");
    if t.is_empty() {
        return Err(bad());
    }
    let value = match t.find("pi") {
        None => t.parse::<f64>().map_err(|_| bad())?,
        Some(at) => {
            let (head, tail) = (&t[..at], &t[at + 2..]);
            let head = head.strip_suffix('*').unwrap_or(head);
            let numerator = match head {
                "" | "+" => 1.0,
                "-" => -1.0,
                h => h.parse::<f64>().map_err(|_| bad())?,
            };
            let denominator = match tail {
                "" => 1.0,
                d => d
                    .strip_prefix('/')
                    .ok_or_else(bad)?
                    .parse::<f64>()
                    .map_err(|_| bad())?,
            };
            if denominator == 0.0 {
                return Err(bad());
            }
            numerator * PI / denominator
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Parses a comma-separated list of angle tokens.
pub fn parse_angle_list(list: &str) -> Result<Vec<f64>> {
    list.split(',').map(parse_angle).collect()
}
