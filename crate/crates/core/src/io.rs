//! Output formatting. Every float is written with 17 significant digits.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Float wrapper that serializes to JSON with 17 significant digits
/// (`null` for non-finite values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw =
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn sig17_vec(xs: &[f64]) -> Vec<Sig17> {
    xs.iter().copied().map(Sig17).collect()
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let j = serde_json::to_string(&Sig17(x)).unwrap();
            assert_eq!(j, s);
        }
        assert_eq!(serde_json::to_string(&Sig17(f64::NAN)).unwrap(), "null");
    }
}
