//! Integer and real number grammars.
//!
//! Integers are `\d+`; reals are `\d+\.\d+` or `\d+\.\d+[eE][+-]\d+`.
//! Neither admits a sign.

use super::ProtocolError;

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

pub fn parse_integer(text: &str) -> Result<u64, ProtocolError> {
    if !all_digits(text) {
        return Err(ProtocolError::MalformedNumber(text.to_owned()));
    }
    text.parse::<u64>()
        .map_err(|_| ProtocolError::MalformedNumber(text.to_owned()))
}

pub fn render_integer(value: u64) -> String {
    value.to_string()
}

/// The MAX_VM_NUMBER field: an integer, or `-1` for "no limit".
pub fn parse_max_vm_number(text: &str) -> Result<Option<u64>, ProtocolError> {
    if text == "-1" {
        return Ok(None);
    }
    parse_integer(text).map(Some)
}

pub fn render_max_vm_number(value: Option<u64>) -> String {
    match value {
        None => "-1".to_owned(),
        Some(v) => render_integer(v),
    }
}

fn is_real_syntax(text: &str) -> bool {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], Some(&text[pos + 1..])),
        None => (text, None),
    };
    let Some((int_part, frac_part)) = mantissa.split_once('.') else {
        return false;
    };
    if !all_digits(int_part) || !all_digits(frac_part) {
        return false;
    }
    match exponent {
        None => true,
        Some(exp) => {
            let digits = match exp.as_bytes().first() {
                Some(b'+') | Some(b'-') => &exp[1..],
                _ => return false,
            };
            all_digits(digits)
        }
    }
}

pub fn parse_real(text: &str) -> Result<f64, ProtocolError> {
    if !is_real_syntax(text) {
        return Err(ProtocolError::MalformedNumber(text.to_owned()));
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ProtocolError::MalformedNumber(text.to_owned())),
    }
}

/// Standard notation that parses back to the same `f64`.
///
/// Panics on negative or non-finite input; callers only hold values that
/// came through [`parse_real`] or admission checks.
pub fn render_real(value: f64) -> String {
    assert!(
        value.is_finite() && value >= 0.0,
        "real field out of domain: {value}"
    );
    // -0.0 prints as "-0"
    let value = if value == 0.0 { 0.0 } else { value };
    let mut s = format!("{value}");
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}
