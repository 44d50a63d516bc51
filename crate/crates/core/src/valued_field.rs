//! Truncated arithmetic in the perfectoid field K = Q_p(p^{1/p^∞})^ (characteristic 0)
//! and its tilt K♭ = F_p((t^{1/p^∞}))^ (characteristic p).
//!
//! An element is a finite digit expansion `Σ d_e π^e` with `e ∈ (1/p^H)·Z`, `e < cap`
//! and `d_e ∈ {0, …, p−1}`. In characteristic 0 we fix `π = p`, so `p` copies of a digit
//! at exponent `e` carry into exponent `e + 1`. In characteristic p we fix `π = t` and
//! digits add without carries.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rationals used for exponents, valuations and caps.
pub type Q = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("exponent {exponent} needs level above {level}")]
    Level { exponent: Q, level: u32 },
    #[error("digit {digit} out of range for p = {p}")]
    Digit { digit: u32, p: u32 },
    #[error("precision cap {0} is not a multiple of 1/p^H")]
    Cap(Q),
    #[error("field parameters differ")]
    ParamsMismatch,
    #[error("division by an element that is zero up to precision")]
    Division,
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Characteristic {
    Zero,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldParams {
    p: u32,
    characteristic: Characteristic,
    level: u32,
    cap: Q,
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldParams {
    pub fn new(p: u32, characteristic: Characteristic, level: u32, cap: Q) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let denom = (p as i64)
            .checked_pow(level)
            .ok_or(FieldError::Level { exponent: Q::zero(), level })?;
        if denom % cap.denom() != 0 {
            return Err(FieldError::Cap(cap));
        }
        Ok(FieldParams { p, characteristic, level, cap })
    }

    /// Characteristic-0 parameters with an integer cap.
    pub fn char0(p: u32, level: u32, cap: i64) -> Result<Self, FieldError> {
        Self::new(p, Characteristic::Zero, level, Q::from_integer(cap))
    }

    /// Characteristic-p parameters with an integer cap.
    pub fn charp(p: u32, level: u32, cap: i64) -> Result<Self, FieldError> {
        Self::new(p, Characteristic::P, level, Q::from_integer(cap))
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn characteristic(&self) -> Characteristic {
        self.characteristic
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn cap(&self) -> Q {
        self.cap
    }

    /// `p^H`, the common exponent denominator.
    pub fn denom(&self) -> i64 {
        (self.p as i64).pow(self.level)
    }

    fn cap_index(&self) -> i64 {
        (self.cap * self.denom()).to_integer()
    }

    fn index_of(&self, e: Q) -> Result<i64, FieldError> {
        let scaled = e * self.denom();
        if !scaled.is_integer() {
            return Err(FieldError::Level { exponent: e, level: self.level });
        }
        Ok(scaled.to_integer())
    }

    fn exponent_of(&self, k: i64) -> Q {
        Q::new(k, self.denom())
    }

    pub fn with_level(&self, level: u32) -> Result<Self, FieldError> {
        Self::new(self.p, self.characteristic, level, self.cap)
    }

    pub fn with_cap(&self, cap: Q) -> Result<Self, FieldError> {
        Self::new(self.p, self.characteristic, self.level, cap)
    }

    /// The same shape of parameters in the other characteristic.
    pub fn with_characteristic(&self, characteristic: Characteristic) -> Self {
        FieldParams { characteristic, ..*self }
    }

    /// Smallest level whose exponent lattice contains `e`.
    pub fn level_needed(p: u32, e: Q) -> u32 {
        let mut d = *e.denom();
        let mut h = 0;
        while d > 1 && d % p as i64 == 0 {
            d /= p as i64;
            h += 1;
        }
        if d != 1 {
            u32::MAX
        } else {
            h
        }
    }
}

/// A valuation: a rational, or `+∞` for an element that is zero up to precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Valuation {
    Finite(Q),
    Infinite,
}

impl Valuation {
    pub fn finite(&self) -> Option<Q> {
        match self {
            Valuation::Finite(q) => Some(*q),
            Valuation::Infinite => None,
        }
    }
    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinite)
    }
    pub fn from_int(v: i64) -> Self {
        Valuation::Finite(Q::from_integer(v))
    }
}

impl Add for Valuation {
    type Output = Valuation;
    fn add(self, rhs: Valuation) -> Valuation {
        match (self, rhs) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(q) => write!(f, "{}", fmt_q(*q)),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

/// Canonical `"a/b"` rendering used by every JSON schema.
pub fn fmt_q(q: Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `"a/b"` or `"a"`.
pub fn parse_q(s: &str) -> Result<Q, FieldError> {
    let bad = || FieldError::Parse(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: i64 = a.trim().parse().map_err(|_| bad())?;
            let b: i64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            Ok(Q::new(a, b))
        }
        None => Ok(Q::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// A truncated element of K or K♭.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    params: FieldParams,
    lo: i64,
    digits: Vec<u32>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let sym = match self.params.characteristic {
            Characteristic::Zero => "p",
            Characteristic::P => "t",
        };
        let parts: Vec<String> = self
            .terms()
            .map(|(e, d)| {
                if e.is_zero() {
                    format!("{d}")
                } else {
                    format!("{d}*{sym}^({e})")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

// Dense digit kernel: `acc[i]` is the digit at index `lo + i`, indices below `cap`.
fn normalize(params: &FieldParams, lo: i64, mut acc: Vec<u64>) -> FieldElement {
    let p = params.p as u64;
    match params.characteristic {
        Characteristic::Zero => {
            let d = params.denom() as usize;
            for i in 0..acc.len() {
                if acc[i] >= p {
                    let carry = acc[i] / p;
                    acc[i] %= p;
                    if i + d < acc.len() {
                        acc[i + d] += carry;
                    }
                }
            }
        }
        Characteristic::P => {
            for a in acc.iter_mut() {
                *a %= p;
            }
        }
    }
    let first = acc.iter().position(|&a| a != 0);
    match first {
        None => FieldElement::zero(*params),
        Some(f) => {
            let last = acc.iter().rposition(|&a| a != 0).unwrap();
            FieldElement {
                params: *params,
                lo: lo + f as i64,
                digits: acc[f..=last].iter().map(|&a| a as u32).collect(),
            }
        }
    }
}

impl FieldElement {
    pub fn zero(params: FieldParams) -> Self {
        FieldElement { params, lo: 0, digits: Vec::new() }
    }

    pub fn one(params: FieldParams) -> Self {
        Self::from_int(params, 1)
    }

    /// Builds a carry-normalized element from `(exponent, digit)` pairs; exponents at or
    /// above the cap are dropped.
    pub fn make(params: FieldParams, terms: &[(Q, u32)]) -> Result<Self, FieldError> {
        let mut idx = Vec::with_capacity(terms.len());
        for &(e, d) in terms {
            if d >= params.p {
                return Err(FieldError::Digit { digit: d, p: params.p });
            }
            idx.push((params.index_of(e)?, d));
        }
        let cap = params.cap_index();
        let lo = match idx.iter().filter(|(k, d)| *k < cap && *d != 0).map(|(k, _)| *k).min() {
            Some(lo) => lo,
            None => return Ok(Self::zero(params)),
        };
        let mut acc = vec![0u64; (cap - lo) as usize];
        for (k, d) in idx {
            if k < cap && d != 0 {
                acc[(k - lo) as usize] += d as u64;
            }
        }
        Ok(normalize(&params, lo, acc))
    }

    /// `π^e` (a single digit 1).
    pub fn pi_pow(params: FieldParams, e: Q) -> Result<Self, FieldError> {
        Self::make(params, &[(e, 1)])
    }

    /// Image of an integer (in characteristic p, reduced mod p).
    pub fn from_int(params: FieldParams, n: i64) -> Self {
        Self::from_bigint(params, &BigInt::from(n))
    }

    pub fn from_bigint(params: FieldParams, n: &BigInt) -> Self {
        let p = BigInt::from(params.p);
        if params.characteristic == Characteristic::P {
            let r = n.mod_floor(&p).to_u32().unwrap();
            return Self::make(params, &[(Q::zero(), r)]).unwrap();
        }
        let mut m = n.abs();
        let mut terms = Vec::new();
        let mut e = 0i64;
        while !m.is_zero() && Q::from_integer(e) < params.cap {
            let (q, r) = m.div_rem(&p);
            terms.push((Q::from_integer(e), r.to_u32().unwrap()));
            m = q;
            e += 1;
        }
        let x = Self::make(params, &terms).unwrap();
        if n.sign() == Sign::Minus {
            -&x
        } else {
            x
        }
    }

    /// Image of a rational number; fails if the denominator vanishes in the field.
    pub fn from_rational(params: FieldParams, q: &BigRational) -> Result<Self, FieldError> {
        let num = Self::from_bigint(params, q.numer());
        if q.denom().is_one() {
            return Ok(num);
        }
        let den = Self::from_bigint(params, q.denom());
        Ok(&num * &den.invert()?)
    }

    /// Teichmüller representative of a residue digit: the root of `x^{p−1} = 1`
    /// congruent to `c`, found by Newton iteration (0 maps to 0).
    pub fn teichmuller(params: FieldParams, c: u32) -> Result<Self, FieldError> {
        if c >= params.p {
            return Err(FieldError::Digit { digit: c, p: params.p });
        }
        let x0 = Self::from_int(params, c as i64);
        if c == 0 || params.characteristic == Characteristic::P || params.p == 2 {
            return Ok(x0);
        }
        let one = Self::one(params);
        let pm1 = Self::from_int(params, params.p as i64 - 1);
        let mut x = x0;
        loop {
            let f = &x.pow((params.p - 1) as u64) - &one;
            if f.is_zero() {
                return Ok(x);
            }
            let fp = &pm1 * &x.pow((params.p - 2) as u64);
            let next = &x - &(&f * &fp.invert()?);
            if next == x {
                return Ok(x);
            }
            x = next;
        }
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    /// `(exponent, digit)` pairs in ascending exponent order, nonzero digits only.
    pub fn terms(&self) -> impl Iterator<Item = (Q, u32)> + '_ {
        self.digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .map(move |(i, &d)| (self.params.exponent_of(self.lo + i as i64), d))
    }

    /// The digit stored at exponent `e` (0 if absent or off-lattice).
    pub fn digit_at(&self, e: Q) -> u32 {
        match self.params.index_of(e) {
            Ok(k) if k >= self.lo && k < self.lo + self.digits.len() as i64 => self.digits[(k - self.lo) as usize],
            _ => 0,
        }
    }

    pub fn valuation(&self) -> Valuation {
        if self.is_zero() {
            Valuation::Infinite
        } else {
            Valuation::Finite(self.params.exponent_of(self.lo))
        }
    }

    pub fn is_topologically_nilpotent(&self) -> bool {
        self.valuation() > Valuation::Finite(Q::zero())
    }

    pub fn is_power_bounded(&self) -> bool {
        self.valuation() >= Valuation::Finite(Q::zero())
    }

    /// Smallest level `h` with every stored exponent in `(1/p^h)·Z`.
    pub fn support_level(&self) -> u32 {
        self.terms().map(|(e, _)| FieldParams::level_needed(self.params.p, e)).max().unwrap_or(0)
    }

    fn check(&self, other: &Self) -> Result<(), FieldError> {
        if self.params == other.params {
            Ok(())
        } else {
            Err(FieldError::ParamsMismatch)
        }
    }

    fn dense(&self, lo: i64, len: usize) -> Vec<u64> {
        let mut acc = vec![0u64; len];
        for (i, &d) in self.digits.iter().enumerate() {
            let k = self.lo + i as i64 - lo;
            if k >= 0 && (k as usize) < len {
                acc[k as usize] += d as u64;
            }
        }
        acc
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, FieldError> {
        self.check(other)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let lo = self.lo.min(other.lo);
        let len = (self.params.cap_index() - lo).max(0) as usize;
        let mut acc = self.dense(lo, len);
        for (a, b) in acc.iter_mut().zip(other.dense(lo, len)) {
            *a += b;
        }
        Ok(normalize(&self.params, lo, acc))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.check(other)?;
        self.try_add(&-other)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.check(other)?;
        let cap = self.params.cap_index();
        if self.is_zero() || other.is_zero() || self.lo + other.lo >= cap {
            return Ok(Self::zero(self.params));
        }
        let lo = self.lo + other.lo;
        let len = (cap - lo) as usize;
        let mut acc = vec![0u64; len];
        for (i, &a) in self.digits.iter().enumerate() {
            if a == 0 || i >= len {
                continue;
            }
            for (j, &b) in other.digits.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                acc[i + j] += a as u64 * b as u64;
            }
        }
        Ok(normalize(&self.params, lo, acc))
    }

    /// Multiplicative inverse. For `v(x) ≥ 0` the product `x·x⁻¹` is 1 below the cap;
    /// for `v(x) < 0` it is 1 below `cap + v(x)`, the most the truncated inverse can carry.
    pub fn invert(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::Division);
        }
        let cap = self.params.cap_index();
        // Invert the unit u = π^{-v}·x to index precision cap + lo, then shift back.
        let want = cap + self.lo;
        if want <= 0 {
            return Ok(Self::zero(self.params));
        }
        let work_cap = Q::new(want.max(cap - self.lo), self.params.denom());
        let wp = FieldParams { cap: work_cap, ..self.params };
        let u = FieldElement { params: wp, lo: 0, digits: self.digits.clone() };
        let u = normalize(&wp, 0, u.dense(0, (wp.cap_index()) as usize));
        let p = self.params.p as u64;
        let a0 = u.digits[0] as u64;
        let inv0 = (1..p).find(|c| (c * a0) % p == 1).unwrap();
        let one = Self::one(wp);
        let mut y = normalize(&wp, 0, {
            let mut v = vec![0u64; wp.cap_index() as usize];
            v[0] = inv0;
            v
        });
        for _ in 0..128 {
            let e = &one - &(&u * &y);
            if e.is_zero() {
                break;
            }
            y = &y + &(&y * &e);
        }
        let shifted = FieldElement { params: wp, lo: y.lo - self.lo, digits: y.digits };
        Ok(shifted.recast(self.params))
    }

    /// Reinterprets the digits under parameters of the same `p`, characteristic and level,
    /// dropping digits at or above the new cap.
    fn recast(&self, params: FieldParams) -> Self {
        let cap = params.cap_index();
        if self.is_zero() || self.lo >= cap {
            return Self::zero(params);
        }
        let len = (cap - self.lo) as usize;
        normalize(&params, self.lo, self.dense(self.lo, len))
    }

    pub fn pow(&self, mut n: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.params);
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Integer power allowing negative exponents.
    pub fn powi(&self, n: i64) -> Result<Self, FieldError> {
        if n >= 0 {
            Ok(self.pow(n as u64))
        } else {
            Ok(self.invert()?.pow(n.unsigned_abs()))
        }
    }

    /// Embeds into level `level ≥ H` (exponent lattice refinement; digits unchanged).
    pub fn embed_level(&self, level: u32) -> Result<Self, FieldError> {
        if level < self.params.level {
            return Err(FieldError::Level { exponent: Q::zero(), level });
        }
        let params = self.params.with_level(level)?;
        let f = (self.params.p as i64).pow(level - self.params.level);
        if self.is_zero() {
            return Ok(Self::zero(params));
        }
        let mut digits = vec![0u32; (self.digits.len() - 1) * f as usize + 1];
        for (i, &d) in self.digits.iter().enumerate() {
            digits[i * f as usize] = d;
        }
        Ok(FieldElement { params, lo: self.lo * f, digits })
    }

    /// Changes the precision cap: lowering truncates, raising treats missing digits as 0.
    pub fn with_cap(&self, cap: Q) -> Result<Self, FieldError> {
        let params = self.params.with_cap(cap)?;
        Ok(self.recast(params))
    }

    /// Keeps only exponents strictly below `e` (reduction modulo `π^e`).
    pub fn truncate_below(&self, e: Q) -> Self {
        let cut = (e * self.params.denom()).ceil().to_integer();
        let digits: Vec<(Q, u32)> = self
            .terms()
            .filter(|(x, _)| (*x * self.params.denom()).to_integer() < cut)
            .collect();
        Self::make(self.params, &digits).unwrap()
    }

    /// True when `self ≡ other (mod π^e)`.
    pub fn congruent_mod(&self, other: &Self, e: Q) -> bool {
        (self - other).valuation() >= Valuation::Finite(e)
    }

    /// Reads the stored digits as a rational number (exact for finite expansions).
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.params.characteristic != Characteristic::Zero {
            return None;
        }
        let mut acc = BigRational::zero();
        for (e, d) in self.terms() {
            if !e.is_integer() {
                return None;
            }
            let k = e.to_integer();
            let pk = BigRational::from_integer(BigInt::from(self.params.p)).pow(k as i32);
            acc += pk * BigRational::from_integer(BigInt::from(d));
        }
        Some(acc)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl $tr<&FieldElement> for &FieldElement {
            type Output = FieldElement;
            /// Panics when the operands carry different parameters; use the `try_` form
            /// to receive a `ParamsMismatch` error instead.
            fn $m(self, rhs: &FieldElement) -> FieldElement {
                self.$f(rhs).expect("field parameters differ")
            }
        }
        impl $tr<FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $m(self, rhs: FieldElement) -> FieldElement {
                (&self).$f(&rhs).expect("field parameters differ")
            }
        }
    };
}
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        if self.is_zero() {
            return self.clone();
        }
        let p = self.params.p as u64;
        let lo = self.lo;
        let len = (self.params.cap_index() - lo) as usize;
        let mut acc = self.dense(lo, len);
        match self.params.characteristic {
            Characteristic::P => {
                for a in acc.iter_mut() {
                    *a = (p - *a) % p;
                }
            }
            Characteristic::Zero => {
                // Digitwise complement plus one unit at the bottom of every residue class.
                for a in acc.iter_mut() {
                    *a = p - 1 - *a;
                }
                let d = self.params.denom() as usize;
                for a in acc.iter_mut().take(d) {
                    *a += 1;
                }
            }
        }
        normalize(&self.params, lo, acc)
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

/// `v_p(n!)` by Legendre's formula.
pub fn factorial_valuation(p: u64, n: u64) -> u64 {
    let mut v = 0;
    let mut q = n / p;
    while q > 0 {
        v += q;
        q /= p;
    }
    v
}

/// `v_p(binom(p^h, i))` for `0 ≤ i ≤ p^h`.
pub fn binomial_valuation(p: u32, h: u32, i: u64) -> Result<u64, FieldError> {
    if !is_prime(p) {
        return Err(FieldError::NotPrime(p));
    }
    let n = (p as u64).checked_pow(h).ok_or(FieldError::Level { exponent: Q::zero(), level: h })?;
    if i > n {
        return Err(FieldError::Parse(format!("binomial index {i} exceeds {n}")));
    }
    let p = p as u64;
    Ok(factorial_valuation(p, n) - factorial_valuation(p, i) - factorial_valuation(p, n - i))
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CharJson {
    Zero(u8),
    P(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldElementJson {
    p: u32,
    #[serde(rename = "char")]
    characteristic: CharJson,
    level: u32,
    cap: String,
    terms: Vec<(String, u32)>,
}

impl Serialize for FieldElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FieldElementJson {
            p: self.params.p,
            characteristic: match self.params.characteristic {
                Characteristic::Zero => CharJson::Zero(0),
                Characteristic::P => CharJson::P("p".into()),
            },
            level: self.params.level,
            cap: fmt_q(self.params.cap),
            terms: self.terms().map(|(e, d)| (fmt_q(e), d)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = FieldElementJson::deserialize(d)?;
        let characteristic = match j.characteristic {
            CharJson::Zero(0) => Characteristic::Zero,
            CharJson::P(ref s) if s == "p" => Characteristic::P,
            _ => return Err(D::Error::custom("char must be 0 or \"p\"")),
        };
        let cap = parse_q(&j.cap).map_err(D::Error::custom)?;
        let params = FieldParams::new(j.p, characteristic, j.level, cap).map_err(D::Error::custom)?;
        let mut terms = Vec::with_capacity(j.terms.len());
        for (e, digit) in &j.terms {
            terms.push((parse_q(e).map_err(D::Error::custom)?, *digit));
        }
        FieldElement::make(params, &terms).map_err(D::Error::custom)
    }
}
