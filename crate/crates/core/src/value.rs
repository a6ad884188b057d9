//! Runtime values and declared types.

use std::fmt;

use crate::store::ItemId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarType {
    Int,
    Real,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarType::Int => "int",
            ScalarType::Real => "real",
        })
    }
}

/// Declared base type of a parameter or local.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BaseType {
    Int,
    Real,
    Record(String),
}

impl BaseType {
    pub fn scalar(&self) -> Option<ScalarType> {
        match self {
            BaseType::Int => Some(ScalarType::Int),
            BaseType::Real => Some(ScalarType::Real),
            BaseType::Record(_) => None,
        }
    }

    pub fn record(&self) -> Option<&str> {
        match self {
            BaseType::Record(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseType::Int => f.write_str("int"),
            BaseType::Real => f.write_str("real"),
            BaseType::Record(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Value {
    Int(i64),
    Real(f64),
    /// Handle to a record instance.
    Record(ItemId),
}

impl Value {
    /// Equality used for idempotent commits: bitwise for reals.
    pub fn same_bits(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Record(a), Value::Record(b)) => a == b,
            _ => false,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Record(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match *self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Record(_) => "record",
        }
    }

    /// Convert for storage into a slot of type `ty`; ints widen to reals.
    pub fn coerce(self, ty: ScalarType) -> Option<Value> {
        match (self, ty) {
            (Value::Int(i), ScalarType::Int) => Some(Value::Int(i)),
            (Value::Int(i), ScalarType::Real) => Some(Value::Real(i as f64)),
            (Value::Real(r), ScalarType::Real) => Some(Value::Real(r)),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.same_bits(other)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => f.write_str(&format_real(*r)),
            Value::Record(id) => write!(f, "<record {id}>"),
        }
    }
}

/// Format a real with 17 significant digits in the style of C's `%.17g`,
/// keeping a decimal point so reals never read back as ints.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("numeric exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').to_string()
        } else {
            s
        };
        if s.ends_with('.') {
            format!("{s}0")
        } else if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    } else {
        let m = mantissa.trim_end_matches('0');
        let m = if m.ends_with('.') { format!("{m}0") } else { m.to_string() };
        format!("{m}e{exp}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_matches_printf_g17() {
        assert_eq!(format_real(2.0), "2.0");
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(1.5), "1.5");
        assert_eq!(format_real(-3.25), "-3.25");
        assert_eq!(format_real(1e-4), "0.0001");
        assert_eq!(format_real(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_real(1e20), "1.0e20");
        assert_eq!(format_real(123456.0), "123456.0");
    }

    #[test]
    fn formatted_reals_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, 2.0f64.sqrt(), 6.02214076e23, -1e-300, 7.999999999] {
            assert_eq!(format_real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn value_equality_is_bitwise() {
        assert_eq!(Value::Real(0.5), Value::Real(0.5));
        assert_ne!(Value::Real(0.0), Value::Real(-0.0));
        assert_ne!(Value::Int(1), Value::Real(1.0));
    }
}
