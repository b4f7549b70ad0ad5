//! Liouville frequency vectors built from continued fractions.
//!
//! The construction produces `α = (α₁, α₂)` with `α₂ = 1` and
//! `α₁ = −β`, where `β = [a₀; a₁, a₂, …]` has partial quotients chosen
//! greedily.  For a convergent `p/q` of `β` with `p ≥ q > n`, the choice
//! `q' > pⁿ` of the next denominator guarantees
//!
//! ```text
//! |α₁ q + α₂ p| = |p − β q| < 1/q' < 1/pⁿ,
//! ```
//!
//! so `(m_{n,1}, m_{n,2}) = (q, p)` is a witness with positive entries and
//! `m_{n,2} ≥ m_{n,1} > n`.  After the last chosen quotient the expansion
//! continues with an infinite tail of ones, which keeps `β` irrational.
//! All arithmetic is exact (arbitrary-precision integers and rationals).

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of tail ones used when an exact rational stand-in for `β` is needed.
const TAIL_ONES: usize = 600;

/// One witness `(n, m_{n,1}, m_{n,2})`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub n: u32,
    pub m1: BigUint,
    pub m2: BigUint,
}

/// Liouville frequencies together with their witnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleData {
    /// Partial quotients `[a₀; a₁, …, a_K]` of `β = −α₁`; the expansion
    /// continues with ones.
    pub partial_quotients: Vec<BigUint>,
    pub witnesses: Vec<Witness>,
}

/// JSON form: integers and extended-precision values as decimal strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiouvilleFile {
    pub alpha: [String; 2],
    pub partial_quotients: Vec<String>,
    pub tail: String,
    pub witnesses: Vec<WitnessFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessFile {
    pub n: u32,
    pub m1: String,
    pub m2: String,
}

/// Convergents `(p_k, q_k)` of a finite continued fraction.
pub fn convergents(a: &[BigUint]) -> Vec<(BigUint, BigUint)> {
    let mut out = Vec::with_capacity(a.len());
    let (mut p_prev, mut q_prev) = (BigUint::one(), BigUint::zero());
    let (mut p, mut q) = (a[0].clone(), BigUint::one());
    out.push((p.clone(), q.clone()));
    for ak in &a[1..] {
        let np = ak * &p + &p_prev;
        let nq = ak * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, np);
        q_prev = std::mem::replace(&mut q, nq);
        out.push((p.clone(), q.clone()));
    }
    out
}

/// Greedy construction with witnesses for `n = 1..=n_max`.
pub fn liouville_frequencies(n_max: u32) -> Result<LiouvilleData> {
    if n_max == 0 || n_max > 8 {
        return Err(Error::Guard {
            what: "Liouville depth",
            value: n_max as f64,
            limit: 8.0,
        });
    }
    // β = [1; 2, …]: q₁ = 2 > 1 is the first usable convergent.
    let mut a: Vec<BigUint> = vec![BigUint::one(), BigUint::from(2u32)];
    let mut witnesses = Vec::new();
    for n in 1..=n_max {
        let conv = convergents(&a);
        let (p, q) = conv.last().unwrap().clone();
        if q <= BigUint::from(n) {
            return Err(Error::Precision(format!(
                "convergent denominator {q} not above {n}"
            )));
        }
        // Next quotient makes q' = a·q + q_prev exceed pⁿ.
        let pn = num_traits::pow(p.clone(), n as usize);
        let next = pn / &q + BigUint::one();
        a.push(next);
        witnesses.push(Witness { n, m1: q, m2: p });
    }
    let data = LiouvilleData {
        partial_quotients: a,
        witnesses,
    };
    data.verify()?;
    Ok(data)
}

/// Exact rational approximation of `β` using `TAIL_ONES` tail ones.
fn beta_rational(a: &[BigUint]) -> BigRational {
    let mut full = a.to_vec();
    full.extend(std::iter::repeat_n(BigUint::one(), TAIL_ONES));
    let (p, q) = convergents(&full).pop().unwrap();
    BigRational::new(
        BigInt::from_biguint(Sign::Plus, p),
        BigInt::from_biguint(Sign::Plus, q),
    )
}

/// Converts a (possibly huge) rational to the nearest double.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let n = r.numer().abs();
    let d = r.denom().abs();
    let shift = d.bits() as i64 - n.bits() as i64 + 64;
    let q = if shift >= 0 {
        (n << shift as usize) / d
    } else {
        n / (d << (-shift) as usize)
    };
    let v = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-(shift as i32));
    if neg {
        -v
    } else {
        v
    }
}

/// Decimal expansion of a rational with `digits` fractional digits.
pub fn ratio_to_decimal(r: &BigRational, digits: usize) -> String {
    let neg = r.is_negative();
    let n = r.numer().abs();
    let d = r.denom().abs();
    let (ip, rem) = n.div_rem(&d);
    let scaled = rem * num_traits::pow(BigInt::from(10), digits) / &d;
    let frac = format!("{:0>width$}", scaled.to_string(), width = digits);
    format!("{}{}.{}", if neg { "-" } else { "" }, ip, frac)
}

impl LiouvilleData {
    /// Exact rational stand-in for `α₁ = −β` (error far below every witness scale).
    pub fn alpha1_exact(&self) -> BigRational {
        -beta_rational(&self.partial_quotients)
    }

    /// Exact `α₂ = 1`.
    pub fn alpha2_exact(&self) -> BigRational {
        BigRational::one()
    }

    /// `α` as doubles.
    pub fn alpha_f64(&self) -> [f64; 2] {
        [ratio_to_f64(&self.alpha1_exact()), 1.0]
    }

    /// Exact `⟨α, m_n⟩ = α₁ m_{n,1} + α₂ m_{n,2}` for a witness.
    pub fn pairing_exact(&self, w: &Witness) -> BigRational {
        let m1 = BigRational::from_integer(BigInt::from_biguint(Sign::Plus, w.m1.clone()));
        let m2 = BigRational::from_integer(BigInt::from_biguint(Sign::Plus, w.m2.clone()));
        self.alpha1_exact() * m1 + self.alpha2_exact() * m2
    }

    /// Re-verifies every witness: `|⟨α, m_n⟩|·m_{n,2}ⁿ < 1` and `m_{n,2} ≥ m_{n,1} > n`,
    /// and that the recorded expansion does not terminate.
    pub fn verify(&self) -> Result<()> {
        if self.partial_quotients.iter().skip(1).any(|a| a.is_zero()) {
            return Err(Error::Precision("zero partial quotient".into()));
        }
        for w in &self.witnesses {
            if !(w.m2 >= w.m1 && w.m1 > BigUint::from(w.n)) {
                return Err(Error::Precision(format!(
                    "witness {} violates m₂ ≥ m₁ > n",
                    w.n
                )));
            }
            let pairing = self.pairing_exact(w).abs();
            let m2n = BigRational::from_integer(BigInt::from_biguint(
                Sign::Plus,
                num_traits::pow(w.m2.clone(), w.n as usize),
            ));
            if pairing * m2n >= BigRational::one() {
                return Err(Error::Precision(format!(
                    "witness {} fails |⟨α,m⟩|·m₂ⁿ < 1",
                    w.n
                )));
            }
        }
        Ok(())
    }

    /// `|⟨α, m_n⟩|·m_{n,2}ⁿ` as a double (diagnostic; always < 1).
    pub fn witness_margin(&self, w: &Witness) -> f64 {
        let pairing = self.pairing_exact(w).abs();
        let m2n = BigRational::from_integer(BigInt::from_biguint(
            Sign::Plus,
            num_traits::pow(w.m2.clone(), w.n as usize),
        ));
        ratio_to_f64(&(pairing * m2n))
    }

    pub fn to_file(&self) -> LiouvilleFile {
        LiouvilleFile {
            alpha: [ratio_to_decimal(&self.alpha1_exact(), 60), "1".into()],
            partial_quotients: self
                .partial_quotients
                .iter()
                .map(|a| a.to_string())
                .collect(),
            tail: "ones".into(),
            witnesses: self
                .witnesses
                .iter()
                .map(|w| WitnessFile {
                    n: w.n,
                    m1: w.m1.to_string(),
                    m2: w.m2.to_string(),
                })
                .collect(),
        }
    }

    pub fn from_file(f: &LiouvilleFile) -> Result<Self> {
        if f.tail != "ones" {
            return Err(Error::InvalidInput(format!(
                "unknown continued-fraction tail '{}'",
                f.tail
            )));
        }
        let parse = |s: &str| -> Result<BigUint> {
            s.parse::<BigUint>()
                .map_err(|e| Error::InvalidInput(format!("bad integer '{s}': {e}")))
        };
        let data = LiouvilleData {
            partial_quotients: f
                .partial_quotients
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?,
            witnesses: f
                .witnesses
                .iter()
                .map(|w| {
                    Ok(Witness {
                        n: w.n,
                        m1: parse(&w.m1)?,
                        m2: parse(&w.m2)?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        data.verify()?;
        Ok(data)
    }
}

impl Serialize for LiouvilleData {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LiouvilleData {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = LiouvilleFile::deserialize(d)?;
        LiouvilleData::from_file(&f).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_witnesses() {
        let d = liouville_frequencies(3).unwrap();
        assert_eq!(d.witnesses[0].m1, BigUint::from(2u32));
        assert_eq!(d.witnesses[0].m2, BigUint::from(3u32));
        assert_eq!(d.witnesses[1].m1, BigUint::from(5u32));
        assert_eq!(d.witnesses[1].m2, BigUint::from(7u32));
        for w in &d.witnesses {
            assert!(d.witness_margin(w) < 1.0);
        }
    }

    #[test]
    fn round_trip_and_alpha() {
        let d = liouville_frequencies(5).unwrap();
        let j = serde_json::to_string(&d).unwrap();
        let e: LiouvilleData = serde_json::from_str(&j).unwrap();
        assert_eq!(d, e);
        let a = d.alpha_f64();
        assert!(a[0] < -1.0 && a[0] > -2.0 && a[1] == 1.0);
        let dec = d.to_file().alpha[0].clone();
        assert!(dec.starts_with("-1.4"), "{dec}");
    }

    #[test]
    fn depth_guard() {
        assert!(liouville_frequencies(0).is_err());
        assert!(liouville_frequencies(9).is_err());
    }

    #[test]
    fn ratio_conversion() {
        let r = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert!((ratio_to_f64(&r) - 1.0 / 3.0).abs() < 1e-17);
        assert_eq!(ratio_to_decimal(&r, 5), "0.33333");
    }
}
