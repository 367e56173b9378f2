//! Numeric command-line values with an optional π factor: `1.8`, `2π`,
//! `2pi/1.8`, `2*π/1.8`, `1e-3`.

use std::f64::consts::PI;

pub fn parse_expr(s: &str) -> Result<f64, String> {
    let src = s.trim();
    if src.is_empty() {
        return Err("empty value".into());
    }
    let mut value = 1.0;
    let mut divide = false;
    let mut rest = src;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let factor = parse_factor(rest[..end].trim()).ok_or_else(|| format!("cannot parse `{src}` as a number"))?;
        value = if divide { value / factor } else { value * factor };
        if end == rest.len() {
            break;
        }
        divide = rest.as_bytes()[end] == b'/';
        rest = &rest[end + 1..];
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{src}` is not finite"))
    }
}

fn parse_factor(t: &str) -> Option<f64> {
    let (num, pi) = if let Some(n) = t.strip_suffix('π') {
        (n, true)
    } else if let Some(n) = t.strip_suffix("pi") {
        (n, true)
    } else {
        (t, false)
    };
    let num = num.trim();
    let base = match (num, pi) {
        ("", true) => 1.0,
        ("-", true) => -1.0,
        _ => num.parse::<f64>().ok()?,
    };
    Some(if pi { base * PI } else { base })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_pi_forms() {
        assert_eq!(parse_expr("1.8").unwrap(), 1.8);
        assert_eq!(parse_expr("-0.5").unwrap(), -0.5);
        assert_eq!(parse_expr("1e-3").unwrap(), 1e-3);
        assert_eq!(parse_expr("π").unwrap(), PI);
        assert_eq!(parse_expr("2π").unwrap(), 2.0 * PI);
        assert_eq!(parse_expr("2pi/1.8").unwrap(), 2.0 * PI / 1.8);
        assert_eq!(parse_expr("2*π/1.8").unwrap(), 2.0 * PI / 1.8);
        assert_eq!(parse_expr(" 2 π / 1.8 ").unwrap(), 2.0 * PI / 1.8);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "abc", "2//3", "1/0", "π*", "2x"] {
            assert!(parse_expr(bad).is_err(), "{bad}");
        }
    }
}
