//! Nonnegative rationals for logic constants and time stamps.

use alloc::format;
#[cfg(test)]
use alloc::string::String;

/// Nonnegative rational, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Rational {
    pub const ZERO: Self = Self { num: 0, den: 1 };
    pub const ONE: Self = Self { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den);
        Some(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn from_integer(k: u64) -> Self {
        Self { num: k, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// True when the value lies in `[0, 1]`.
    pub fn in_unit(&self) -> bool {
        self.num <= self.den
    }

    /// Parses `"q"`, `"q.frac"` or `"n/d"`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let num: u64 = n.trim().parse().ok()?;
            let den: u64 = d.trim().parse().ok()?;
            return Self::new(num, den);
        }
        if let Some((int_part, frac_part)) = text.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let scale = 10u64.checked_pow(frac_part.len() as u32)?;
            let int: u64 = if int_part.is_empty() {
                0
            } else {
                int_part.parse().ok()?
            };
            let frac: u64 = frac_part.parse().ok()?;
            return Self::new(int.checked_mul(scale)?.checked_add(frac)?, scale);
        }
        let int: u64 = text.parse().ok()?;
        Some(Self::from_integer(int))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl core::fmt::Display for Rational {
    /// Exact decimal when the denominator divides a power of ten,
    /// `num/den` otherwise; `parse` of the output restores the value.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut twos = 0u32;
        let mut fives = 0u32;
        let mut rest = self.den;
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        if rest != 1 {
            return write!(f, "{}/{}", self.num, self.den);
        }
        let digits = twos.max(fives);
        if digits == 0 {
            return write!(f, "{}", self.num);
        }
        let scale = 10u128.pow(digits);
        let value = self.num as u128 * (scale / self.den as u128);
        let int = value / scale;
        let mut frac = format!("{:0width$}", value % scale, width = digits as usize);
        while frac.ends_with('0') {
            frac.pop();
        }
        if frac.is_empty() {
            write!(f, "{int}")
        } else {
            write!(f, "{int}.{frac}")
        }
    }
}

#[cfg(test)]
fn display_to_string(r: &Rational) -> String {
    format!("{r}")
}
