//! Real parameters that remember an exact rational value when one is known.
//!
//! Case boundaries in the life-span laws (p = 1 + 1/N, A = N, A = 1/(p-1),
//! B = N + 1) are sharp, so comparisons are done on rationals whenever both
//! sides carry one and fall back to a 1e-12 relative tolerance otherwise.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Relative tolerance for boundary comparisons of floating inputs.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Param {
    value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<(i64, i64)>,
}

impl Param {
    /// A floating value with no exact form.
    pub fn float(value: f64) -> Self {
        Param { value, exact: None }
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Self::from_ratio(Ratio::new(numer, denom))
    }

    pub fn integer(n: i64) -> Self {
        Self::ratio(n, 1)
    }

    fn from_ratio(r: Ratio<i64>) -> Self {
        Param {
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some((*r.numer(), *r.denom())),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Ratio<i64>> {
        self.exact.map(|(n, d)| Ratio::new(n, d))
    }

    /// Three-way comparison that is exact on rationals and tolerant on floats.
    pub fn compare(&self, other: &Param) -> Ordering {
        if let (Some(a), Some(b)) = (self.exact(), other.exact()) {
            // Cross-multiply in i128 so large denominators cannot overflow.
            let lhs = *a.numer() as i128 * *b.denom() as i128;
            let rhs = *b.numer() as i128 * *a.denom() as i128;
            return lhs.cmp(&rhs);
        }
        let (x, y) = (self.value, other.value);
        let scale = 1f64.max(x.abs()).max(y.abs());
        if (x - y).abs() <= BOUNDARY_TOL * scale {
            Ordering::Equal
        } else if x < y {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    pub fn eq_to(&self, other: &Param) -> bool {
        self.compare(other) == Ordering::Equal
    }

    pub fn lt(&self, other: &Param) -> bool {
        self.compare(other) == Ordering::Less
    }

    pub fn gt(&self, other: &Param) -> bool {
        self.compare(other) == Ordering::Greater
    }

    fn combine(
        &self,
        other: &Param,
        exact: impl Fn(Ratio<i64>, Ratio<i64>) -> Option<Ratio<i64>>,
        float: impl Fn(f64, f64) -> f64,
    ) -> Param {
        match (self.exact(), other.exact()) {
            (Some(a), Some(b)) => match exact(a, b) {
                Some(r) => Param::from_ratio(r),
                None => Param::float(float(self.value, other.value)),
            },
            _ => Param::float(float(self.value, other.value)),
        }
    }

    pub fn add(&self, other: &Param) -> Param {
        self.combine(other, |a, b| a.checked_add(&b), |x, y| x + y)
    }

    pub fn sub(&self, other: &Param) -> Param {
        self.combine(other, |a, b| a.checked_sub(&b), |x, y| x - y)
    }

    pub fn mul(&self, other: &Param) -> Param {
        self.combine(other, |a, b| a.checked_mul(&b), |x, y| x * y)
    }

    pub fn div(&self, other: &Param) -> Param {
        self.mul(&other.recip())
    }

    pub fn neg(&self) -> Param {
        Param::integer(0).sub(self)
    }

    pub fn recip(&self) -> Param {
        match self.exact() {
            Some(r) if *r.numer() != 0 => Param::from_ratio(r.recip()),
            _ => Param::float(1.0 / self.value),
        }
    }

    /// 1 + 1/N, the critical exponent p_* in dimension N.
    pub fn critical_exponent(n: usize) -> Param {
        Param::ratio(n as i64 + 1, n as i64)
    }

    /// 1/(p - 1), the singularity threshold for exponent p.
    pub fn singular_threshold(p: &Param) -> Param {
        p.sub(&Param::integer(1)).recip()
    }
}

impl From<f64> for Param {
    fn from(value: f64) -> Self {
        Param::float(value)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some((n, 1)) => write!(f, "{n}"),
            Some((n, d)) => write!(f, "{n}/{d}"),
            None => write!(f, "{}", self.value),
        }
    }
}

/// Parse a decimal literal into an exact ratio when it fits in i64.
fn parse_decimal(s: &str) -> Option<Ratio<i64>> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(i) => (&digits[..i], &digits[i + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer: i64 = all.trim_start_matches('0').parse().unwrap_or(0);
    if all.trim_start_matches('0').len() > 18 {
        return None;
    }
    let scale = exponent - frac_part.len() as i32;
    let mut denom: i64 = 1;
    if scale >= 0 {
        numer = numer.checked_mul(10i64.checked_pow(scale as u32)?)?;
    } else {
        denom = 10i64.checked_pow((-scale) as u32)?;
    }
    if negative {
        numer = -numer;
    }
    Some(Ratio::new(numer, denom))
}

impl FromStr for Param {
    type Err = Error;

    /// Accepts `3/2`, `1.5`, `-7`, `2.5e-1`; anything else parseable as f64
    /// (e.g. `inf` is rejected, long mantissas become plain floats).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || Error::invalid("number", format!("cannot parse '{s}'"));
        if let Some((n, d)) = s.split_once('/') {
            let n = parse_decimal(n.trim()).ok_or_else(err)?;
            let d = parse_decimal(d.trim()).ok_or_else(err)?;
            if *d.numer() == 0 {
                return Err(Error::invalid("number", format!("zero denominator in '{s}'")));
            }
            return Ok(Param::from_ratio(n / d));
        }
        if let Some(r) = parse_decimal(s) {
            return Ok(Param::from_ratio(r));
        }
        let v: f64 = s.parse().map_err(|_| err())?;
        if !v.is_finite() {
            return Err(err());
        }
        Ok(Param::float(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_and_decimals_exactly() {
        let p: Param = "3/2".parse().unwrap();
        assert_eq!(p.exact(), Some(Ratio::new(3, 2)));
        let q: Param = "1.5".parse().unwrap();
        assert!(p.eq_to(&q));
        assert_eq!(q.exact(), Some(Ratio::new(3, 2)));
        let r: Param = "2.5e-1".parse().unwrap();
        assert_eq!(r.exact(), Some(Ratio::new(1, 4)));
        let s: Param = "-7".parse().unwrap();
        assert_eq!(s.value(), -7.0);
        assert!("abc".parse::<Param>().is_err());
        assert!("1/0".parse::<Param>().is_err());
    }

    #[test]
    fn exact_comparison_distinguishes_close_rationals() {
        let a = Param::ratio(100_000_000_000_001, 100_000_000_000_000);
        let b = Param::integer(1);
        assert!(a.gt(&b));
        // The same values as floats fall inside the boundary tolerance.
        assert!(Param::float(a.value()).eq_to(&Param::float(1.0)));
    }

    #[test]
    fn critical_exponent_and_threshold() {
        let p = Param::critical_exponent(2);
        assert_eq!(p.exact(), Some(Ratio::new(3, 2)));
        assert!(Param::singular_threshold(&p).eq_to(&Param::integer(2)));
        let third = Param::float(1.0 / 3.0);
        assert!(third.eq_to(&Param::ratio(1, 3)));
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let p = Param::ratio(3, 2);
        let pm1 = p.sub(&Param::integer(1));
        let e = Param::integer(2).mul(&pm1).div(&Param::integer(1).sub(&Param::ratio(1, 2).mul(&pm1))).neg();
        assert_eq!(e.exact(), Some(Ratio::new(-4, 3)));
        let f = Param::float(0.5).mul(&p);
        assert_eq!(f.exact(), None);
        assert_eq!(f.value(), 0.75);
    }

    #[test]
    fn display_round_trips() {
        for s in ["3/2", "2", "-1/3"] {
            let p: Param = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
    }
}
