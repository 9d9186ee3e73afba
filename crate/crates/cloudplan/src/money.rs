//! Money in integer micro-units.
//!
//! Ledger sums stay in `i64` micro-units so cost totals are exactly
//! associative and byte-identical across platforms. Floating point shows up
//! only in expectation math over normalized per-interval prices.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

pub const MICROS_PER_UNIT: i64 = 1_000_000;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_micro(micro: i64) -> Self {
        Money(micro)
    }

    /// Convert from fractional currency units, rounding half away from zero.
    pub fn from_units(units: f64) -> Self {
        Money((units * MICROS_PER_UNIT as f64).round() as i64)
    }

    pub fn micro(self) -> i64 {
        self.0
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / MICROS_PER_UNIT as u64;
        let frac = abs % MICROS_PER_UNIT as u64;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let frac = format!("{frac:06}");
            write!(f, "{sign}{whole}.{}", frac.trim_end_matches('0'))
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_round_trip() {
        assert_eq!(Money::from_units(0.1).micro(), 100_000);
        assert_eq!(Money::from_units(12.0).micro(), 12_000_000);
        assert_eq!(Money::from_units(-0.5).micro(), -500_000);
        assert!((Money::from_micro(123_456).units() - 0.123456).abs() < 1e-12);
    }

    #[test]
    fn exact_sums() {
        let parts = [0.1, 0.2, 0.3, 0.4].map(Money::from_units);
        let total: Money = parts.into_iter().sum();
        assert_eq!(total, Money::from_units(1.0));
    }

    #[test]
    fn display_trims_zeros() {
        assert_eq!(Money::from_units(1.5).to_string(), "1.5");
        assert_eq!(Money::from_units(2.0).to_string(), "2");
        assert_eq!(Money::from_micro(-250_000).to_string(), "-0.25");
    }
}
