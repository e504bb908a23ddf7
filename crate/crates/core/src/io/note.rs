//! Scientific pitch notation with optional cent offsets, A4 = 440 Hz.

use crate::cents::transpose;
use crate::error::{Error, Result};

const A4_MIDI: i32 = 69;
const A4_HZ: f64 = 440.0;

/// Parses names like `A4`, `Eb3`, `F#1`, `D♯4` and `E2+41c`.
pub fn parse_note(text: &str) -> Result<f64> {
    let bad = || Error::InvalidNote(text.to_string());
    let s = text.trim();
    let mut chars = s.char_indices().peekable();
    let (_, letter) = chars.next().ok_or_else(bad)?;
    let pitch_class = match letter.to_ascii_uppercase() {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return Err(bad()),
    };
    let mut accidental = 0;
    while let Some(&(_, c)) = chars.peek() {
        match c {
            '#' | '♯' => accidental += 1,
            'b' | '♭' => accidental -= 1,
            _ => break,
        }
        chars.next();
    }
    let rest_start = chars.peek().map_or(s.len(), |&(i, _)| i);
    let rest = &s[rest_start..];
    let octave_len = rest
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && c == '-')))
        .map_or(rest.len(), |(i, _)| i);
    let octave: i32 = rest[..octave_len].parse().map_err(|_| bad())?;
    let cents = parse_cents(&rest[octave_len..]).ok_or_else(bad)?;
    let midi = (octave + 1) * 12 + pitch_class + accidental;
    Ok(transpose(A4_HZ, 100.0 * (midi - A4_MIDI) as f64 + cents))
}

/// `""`, `+41c`, `-12.5c`, `+3` or `+3 cents`.
fn parse_cents(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Some(0.0);
    }
    if !(s.starts_with('+') || s.starts_with('-')) {
        return None;
    }
    let number = s
        .trim_end_matches("cents")
        .trim_end_matches("cent")
        .trim_end_matches('c')
        .trim();
    let value: f64 = number.parse().ok()?;
    value.is_finite().then_some(value)
}

/// A frequency given as a number of Hz (`84`, `84Hz`) or as a note name.
pub fn parse_frequency(text: &str) -> Result<f64> {
    let s = text.trim();
    let numeric = s
        .strip_suffix("Hz")
        .or_else(|| s.strip_suffix("hz"))
        .unwrap_or(s)
        .trim();
    if let Ok(f) = numeric.parse::<f64>() {
        return if f > 0.0 && f.is_finite() {
            Ok(f)
        } else {
            Err(Error::InvalidNote(text.to_string()))
        };
    }
    parse_note(s)
}
