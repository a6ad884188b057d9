use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Per-call choice between evaluating a callee in place and handing it to
/// the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    #[default]
    DelegateAlways,
    InlineAlways,
    /// Inline calls made by tasks at delegation depth `d` or deeper.
    InlineBelowDepth(u32),
    /// Inline calls whose int in-arguments are all smaller than `n` in
    /// magnitude.
    InlineBelowSize(i64),
}

/// Which ready task a worker takes next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    Lifo,
    Fifo,
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown {what} `{text}`")]
pub struct ParseError {
    what: &'static str,
    text: String,
}

impl FromStr for Policy {
    type Err = ParseError;

    /// `delegate-always`, `inline-always`, `inline-below-depth:D`,
    /// `inline-below-size:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseError { what: "policy", text: s.to_string() };
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("delegate-always", None) => Ok(Policy::DelegateAlways),
            ("inline-always", None) => Ok(Policy::InlineAlways),
            ("inline-below-depth", Some(a)) => a.parse().map(Policy::InlineBelowDepth).map_err(|_| bad()),
            ("inline-below-size", Some(a)) => a.parse().map(Policy::InlineBelowSize).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::DelegateAlways => f.write_str("delegate-always"),
            Policy::InlineAlways => f.write_str("inline-always"),
            Policy::InlineBelowDepth(d) => write!(f, "inline-below-depth:{d}"),
            Policy::InlineBelowSize(n) => write!(f, "inline-below-size:{n}"),
        }
    }
}

impl FromStr for Order {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lifo" => Ok(Order::Lifo),
            "fifo" => Ok(Order::Fifo),
            _ => Err(ParseError { what: "order", text: s.to_string() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_text_round_trips() {
        for p in [
            Policy::DelegateAlways,
            Policy::InlineAlways,
            Policy::InlineBelowDepth(8),
            Policy::InlineBelowSize(12),
        ] {
            assert_eq!(p.to_string().parse::<Policy>(), Ok(p));
        }
        assert!("inline-below-depth".parse::<Policy>().is_err());
        assert!("sometimes".parse::<Policy>().is_err());
        assert_eq!("fifo".parse::<Order>(), Ok(Order::Fifo));
    }
}
