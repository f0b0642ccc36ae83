//! Exact rationals and truncated formal power series over them.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reduced fraction with positive denominator; displays as `p/q`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Result<Self> {
        let d = denom.into();
        if d.is_zero() {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        Ok(Self(BigRational::new(numer.into(), d)))
    }

    pub fn from_integer(v: impl Into<BigInt>) -> Self {
        Self(BigRational::from_integer(v.into()))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl From<BigRational> for ExactRational {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for ExactRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("not a rational `p/q`: {s:?}"));
        let (p, q) = s.trim().split_once('/').ok_or_else(bad)?;
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        Self::new(p, q)
    }
}

impl Serialize for ExactRational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Coefficients `c_0..=c_N` of a truncated power series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub coefficients: Vec<ExactRational>,
}

impl SeriesCoefficients {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `exp(a(t))` for a series with `a_0 = 0`, via `n c_n = sum_{k=1}^n k a_k c_{n-k}`.
    pub fn exp_of(log: &[BigRational]) -> Result<Self> {
        if log.first().is_some_and(|a0| !a0.is_zero()) {
            return Err(Error::InvalidArgument(
                "series exponential needs a zero constant term".into(),
            ));
        }
        let order = log.len().saturating_sub(1);
        let mut c: Vec<BigRational> = Vec::with_capacity(order + 1);
        c.push(BigRational::one());
        for n in 1..=order {
            let mut acc = BigRational::zero();
            for k in 1..=n {
                acc += BigRational::from_integer(BigInt::from(k)) * &log[k] * &c[n - k];
            }
            c.push(acc / BigRational::from_integer(BigInt::from(n)));
        }
        Ok(Self {
            coefficients: c.into_iter().map(ExactRational).collect(),
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["n", "coefficient"])?;
        for (n, c) in self.coefficients.iter().enumerate() {
            wtr.write_record([n.to_string(), c.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        let r = ExactRational::new(6, 16).unwrap();
        assert_eq!(r.to_string(), "3/8");
        assert_eq!("3/8".parse::<ExactRational>().unwrap(), r);
        assert_eq!(" -2 / 4 ".parse::<ExactRational>().unwrap().to_string(), "-1/2");
        assert!("3".parse::<ExactRational>().is_err());
        assert!("1/0".parse::<ExactRational>().is_err());
        assert_eq!(ExactRational::new(1, -2).unwrap().to_string(), "-1/2");
    }

    #[test]
    fn serde_as_string() {
        let r = ExactRational::new(46189, 262144).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, "\"46189/262144\"");
        assert_eq!(serde_json::from_str::<ExactRational>(&json).unwrap(), r);
    }

    #[test]
    fn exp_of_geometric_log() {
        // exp(-log(1 - t)) = 1/(1 - t): log coefficients 1/k
        let log: Vec<BigRational> = (0..10)
            .map(|k| {
                if k == 0 {
                    BigRational::zero()
                } else {
                    BigRational::new(1.into(), BigInt::from(k))
                }
            })
            .collect();
        let s = SeriesCoefficients::exp_of(&log).unwrap();
        assert!(s.coefficients.iter().all(|c| *c == ExactRational::one()));
        assert_eq!(s.order(), 9);
        assert!(SeriesCoefficients::exp_of(&[BigRational::one()]).is_err());
    }
}
