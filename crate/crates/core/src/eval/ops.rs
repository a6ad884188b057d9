//! Arithmetic shared by the body evaluator and [`eval_expr`](super::eval_expr).

use super::EvalError;
use crate::frontend::ast::{BinOp, Builtin};
use crate::value::Value;

/// Int op int stays int (truncating division, wrapping on overflow);
/// anything involving a real is computed in 64-bit floating point.
pub fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        return Ok(match op {
            BinOp::Add => Value::Int(x.wrapping_add(y)),
            BinOp::Sub => Value::Int(x.wrapping_sub(y)),
            BinOp::Mul => Value::Int(x.wrapping_mul(y)),
            BinOp::Div | BinOp::Rem if y == 0 => return Err(EvalError::DivisionByZero),
            BinOp::Div => Value::Int(x.wrapping_div(y)),
            BinOp::Rem => Value::Int(x.wrapping_rem(y)),
            _ => Value::Int(compare(op, x.cmp(&y)) as i64),
        });
    }
    let (x, y) = match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(EvalError::TypeMismatch(format!("operands of `{}` must be numbers", op.symbol()))),
    };
    Ok(match op {
        BinOp::Add => Value::Real(x + y),
        BinOp::Sub => Value::Real(x - y),
        BinOp::Mul => Value::Real(x * y),
        BinOp::Div if y == 0.0 => return Err(EvalError::DivisionByZero),
        BinOp::Div => Value::Real(x / y),
        BinOp::Rem => return Err(EvalError::TypeMismatch("`%` applies to ints only".into())),
        _ => match x.partial_cmp(&y) {
            Some(o) => Value::Int(compare(op, o) as i64),
            None => Value::Int((op == BinOp::Ne) as i64),
        },
    })
}

fn compare(op: BinOp, o: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        BinOp::Lt => o == Less,
        BinOp::Le => o != Greater,
        BinOp::Gt => o == Greater,
        BinOp::Ge => o != Less,
        BinOp::Eq => o == Equal,
        BinOp::Ne => o != Equal,
        _ => unreachable!("not a comparison"),
    }
}

pub fn negate(v: Value) -> Result<Value, EvalError> {
    match v {
        Value::Int(i) => Ok(Value::Int(i.wrapping_neg())),
        Value::Real(r) => Ok(Value::Real(-r)),
        Value::Record(_) => Err(EvalError::TypeMismatch("cannot negate a record".into())),
    }
}

pub fn builtin(func: Builtin, v: Value) -> Result<Value, EvalError> {
    match (func, v) {
        (Builtin::Abs, Value::Int(i)) => Ok(Value::Int(i.wrapping_abs())),
        (Builtin::Abs, Value::Real(r)) => Ok(Value::Real(r.abs())),
        (Builtin::Abs, Value::Record(_)) => Err(EvalError::TypeMismatch("abs of a record".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_division_truncates_toward_zero() {
        // oracle: exact rational quotient truncated
        for (a, b) in [(7i64, 2i64), (-7, 2), (7, -2), (1, 3), (-1, 3), (9, 3)] {
            let exact = a as f64 / b as f64;
            let want = exact.trunc() as i64;
            assert_eq!(binary(BinOp::Div, Value::Int(a), Value::Int(b)).unwrap(), Value::Int(want));
        }
        assert_eq!(binary(BinOp::Div, Value::Int(1), Value::Int(0)), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn mixed_arithmetic_is_real() {
        assert_eq!(binary(BinOp::Div, Value::Real(4.0), Value::Int(2)).unwrap(), Value::Real(2.0));
        assert_eq!(binary(BinOp::Lt, Value::Int(1), Value::Real(1.5)).unwrap(), Value::Int(1));
        assert_eq!(builtin(Builtin::Abs, Value::Real(2.5 - 4.0)).unwrap(), Value::Real(1.5));
        assert_eq!(binary(BinOp::Rem, Value::Int(-7), Value::Int(3)).unwrap(), Value::Int(-1));
    }
}
