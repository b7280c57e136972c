use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Exact rational number. Always kept in lowest terms with a positive
/// denominator, so structural equality is numeric equality.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i64>);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    pub fn new(numerator: i64, denominator: i64) -> Result<Self, ModelError> {
        if denominator == 0 {
            return Err(ModelError::Rational(format!(
                "{numerator}/{denominator}: zero denominator"
            )));
        }
        Ok(Rational(Ratio::new(numerator, denominator)))
    }

    pub fn integer(value: i64) -> Self {
        Rational(Ratio::from_integer(value))
    }

    pub fn numerator(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denominator(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn in_unit_interval(&self) -> bool {
        !self.0.is_negative() && self.0 <= Ratio::one()
    }

    /// `|self - other|`.
    pub fn distance(self, other: Rational) -> Rational {
        Rational((self.0 - other.0).abs())
    }

    /// Parses and additionally requires the value to lie in `[0, 1]`.
    pub fn parse_unit(text: &str) -> Result<Self, ModelError> {
        let value: Rational = text.parse()?;
        if !value.in_unit_interval() {
            return Err(ModelError::Rational(format!("{text}: outside [0, 1]")));
        }
        Ok(value)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        Rational(self.0 - rhs.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ModelError;

    /// Accepts `"num/den"` or a bare integer.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::Rational(format!("{text:?}: expected \"num/den\""));
        let trimmed = text.trim();
        match trimmed.split_once('/') {
            Some((num, den)) => {
                let num: i64 = num.trim().parse().map_err(|_| bad())?;
                let den: i64 = den.trim().parse().map_err(|_| bad())?;
                if den <= 0 {
                    return Err(ModelError::Rational(format!("{text:?}: denominator must be positive")));
                }
                Rational::new(num, den)
            }
            None => trimmed.parse().map(Rational::integer).map_err(|_| bad()),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for tests and generators: `q(3, 5)` is 3/5. Panics on a zero denominator.
pub fn q(numerator: i64, denominator: i64) -> Rational {
    Rational::new(numerator, denominator).expect("nonzero denominator")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_lowest_terms() {
        let r = q(6, -8);
        assert_eq!(r.numerator(), -3);
        assert_eq!(r.denominator(), 4);
        assert_eq!(q(2, 4), q(1, 2));
    }

    #[test]
    fn parses_and_prints() {
        assert_eq!("3/5".parse::<Rational>().unwrap(), q(3, 5));
        assert_eq!("1".parse::<Rational>().unwrap(), Rational::ONE);
        assert_eq!(q(0, 7).to_string(), "0/1");
        assert!("1/0".parse::<Rational>().is_err());
        assert!("1/-2".parse::<Rational>().is_err());
        assert!("0.5".parse::<Rational>().is_err());
        assert!(Rational::parse_unit("3/2").is_err());
    }

    #[test]
    fn ordering_is_exact() {
        assert!(q(1, 3) < q(334, 1000));
        assert!(q(1, 3) > q(333, 1000));
        assert_eq!(q(1, 4).distance(q(3, 4)), q(1, 2));
    }

    #[test]
    fn serde_uses_strings() {
        let json = serde_json::to_string(&q(3, 10)).unwrap();
        assert_eq!(json, "\"3/10\"");
        let back: Rational = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q(3, 10));
    }
}
