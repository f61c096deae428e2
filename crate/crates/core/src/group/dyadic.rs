//! Exact dyadic rationals `num * 2^exp`.

use std::cmp::Ordering;
use std::fmt;

/// A dyadic rational stored in lowest terms: `num` is odd, or the value is
/// zero and `exp == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i128,
    exp: i32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };

    pub fn new(num: i128, exp: i32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        let tz = num.trailing_zeros();
        Dyadic {
            num: num >> tz,
            exp: exp + tz as i32,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::new(n as i128, 0)
    }

    pub fn numerator(self) -> i128 {
        self.num
    }

    pub fn exponent(self) -> i32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// `self * 2^k`, exact.
    pub fn mul_pow2(self, k: i32) -> Self {
        if self.num == 0 {
            self
        } else {
            Dyadic {
                num: self.num,
                exp: self.exp + k,
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 * 2f64.powi(self.exp)
    }
}

fn shift(n: i128, by: u32) -> i128 {
    let out = n.checked_shl(by).expect("dyadic overflow");
    assert_eq!(out >> by, n, "dyadic overflow");
    out
}

impl std::ops::Neg for Dyadic {
    type Output = Dyadic;

    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

/// Exact sum. Panics only if the aligned numerators leave the i128 range,
/// which needs exponents more than ~120 apart.
impl std::ops::Add for Dyadic {
    type Output = Dyadic;

    fn add(self, other: Dyadic) -> Dyadic {
        if self.num == 0 {
            return other;
        }
        if other.num == 0 {
            return self;
        }
        let e = self.exp.min(other.exp);
        let a = shift(self.num, (self.exp - e) as u32);
        let b = shift(other.num, (other.exp - e) as u32);
        Dyadic::new(a.checked_add(b).expect("dyadic overflow"), e)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = *self + -*other;
        diff.num.cmp(&0)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp >= 0 {
            write!(f, "{}", shift(self.num, self.exp as u32))
        } else {
            write!(f, "{}/2^{}", self.num, -self.exp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_even_numerators() {
        assert_eq!(Dyadic::new(12, -3), Dyadic::new(3, -1));
        assert_eq!(Dyadic::new(0, 7), Dyadic::ZERO);
    }

    #[test]
    fn addition_is_exact() {
        let a = Dyadic::new(3, -2); // 0.75
        let b = Dyadic::new(1, -3); // 0.125
        assert_eq!(a + b, Dyadic::new(7, -3));
        assert_eq!(a + -a, Dyadic::ZERO);
        assert_eq!((a + b).to_f64(), 0.875);
    }

    #[test]
    fn ordering_follows_value() {
        assert!(Dyadic::new(1, -1) < Dyadic::from_int(1));
        assert!(Dyadic::from_int(-3) < Dyadic::new(-5, -1));
        assert_eq!(Dyadic::from_int(4).to_string(), "4");
        assert_eq!(Dyadic::new(3, -2).to_string(), "3/2^2");
    }
}
