//! Compatible p-power-root sequences, the ♯ map, unit transfer and the explicit
//! isomorphisms between the closed unit disk and the tower pieces `X_h`.

use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::report::Check;
use crate::tate_series::{SeriesError, SeriesParams, TateSeries};
use crate::valued_field::{binomial_valuation, Characteristic, FieldElement, FieldError, FieldParams, Valuation, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TiltError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("depth {depth} needs level {needed} but the field has level {level}")]
    Depth { depth: u32, needed: u32, level: u32 },
    #[error("sequence is not compatible at index {0}")]
    Integrity(usize),
    #[error("element is not a unit (valuation {0})")]
    NotUnit(Valuation),
    #[error("precision too small: need at least {required}")]
    Precision { required: i64 },
    #[error("expected a characteristic {0} field")]
    WrongCharacteristic(&'static str),
}

/// `x₀, …, x_m` in K with `x_{i+1}^p = x_i`, and the element of K♭ it represents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltElement {
    pub depth: u32,
    pub sequence: Vec<FieldElement>,
    pub flat: FieldElement,
}

/// The characteristic-p field with the same prime, level and cap.
pub fn tilt_field(k: FieldParams) -> FieldParams {
    k.with_characteristic(Characteristic::P)
}

fn check_depth(k: FieldParams, level: u32, depth: u32) -> Result<(), TiltError> {
    let needed = level.saturating_add(depth);
    if needed > k.level() {
        return Err(TiltError::Depth { depth, needed, level: k.level() });
    }
    Ok(())
}

fn tower(top: FieldElement, depth: u32) -> Vec<FieldElement> {
    let p = top.params().p() as u64;
    let mut seq = vec![top];
    for _ in 0..depth {
        let next = seq.last().unwrap().pow(p);
        seq.push(next);
    }
    seq.reverse();
    seq
}

/// `x_i = ω(c)·π^{e/p^i}`; exact since the roots of a monomial are monomials.
pub fn flat_of_monomial(k: FieldParams, c: u32, e: Q, depth: u32) -> Result<TiltElement, TiltError> {
    if k.characteristic() != Characteristic::Zero {
        return Err(TiltError::WrongCharacteristic("0"));
    }
    check_depth(k, FieldParams::level_needed(k.p(), e), depth)?;
    let c = c % k.p();
    let flat = FieldElement::make(tilt_field(k), &[(e, c)])?;
    if c == 0 {
        return Ok(TiltElement { depth, sequence: vec![FieldElement::zero(k); depth as usize + 1], flat });
    }
    let w = FieldElement::teichmuller(k, c)?;
    let p = k.p() as i64;
    let sequence = (0..=depth).map(|i| Ok(&w * &FieldElement::pi_pow(k, e / p.pow(i))?)).collect::<Result<_, TiltError>>()?;
    Ok(TiltElement { depth, sequence, flat })
}

/// Depth-`m` approximation: `x_m` is the Teichmüller-digit lift of `a^{1/p^m}` and
/// `x_i = x_m^{p^{m−i}}`.
pub fn from_flat(a: &FieldElement, k: FieldParams, depth: u32) -> Result<TiltElement, TiltError> {
    if a.params().characteristic() != Characteristic::P {
        return Err(TiltError::WrongCharacteristic("p"));
    }
    if tilt_field(k) != *a.params() {
        return Err(TiltError::Field(FieldError::ParamsMismatch));
    }
    check_depth(k, a.support_level(), depth)?;
    let scale = (k.p() as i64).pow(depth);
    let mut top = FieldElement::zero(k);
    for (e, c) in a.terms() {
        let t = &FieldElement::teichmuller(k, c)? * &FieldElement::pi_pow(k, e / scale)?;
        top = &top + &t;
    }
    Ok(TiltElement { depth, sequence: tower(top, depth), flat: a.clone() })
}

/// The deepest depth available for `a` at the field level.
pub fn max_depth(a: &FieldElement, k: FieldParams) -> u32 {
    k.level().saturating_sub(a.support_level())
}

impl TiltElement {
    pub fn one(k: FieldParams, depth: u32) -> Self {
        TiltElement { depth, sequence: vec![FieldElement::one(k); depth as usize + 1], flat: FieldElement::one(tilt_field(k)) }
    }

    pub fn field(&self) -> FieldParams {
        *self.sequence[0].params()
    }

    /// Verifies `x_{i+1}^p = x_i` below the cap and the shape of the record.
    pub fn validate(&self) -> Result<(), TiltError> {
        if self.sequence.len() != self.depth as usize + 1 {
            return Err(TiltError::Integrity(self.sequence.len()));
        }
        let k = self.field();
        if self.sequence.iter().any(|x| *x.params() != k) || tilt_field(k) != *self.flat.params() {
            return Err(TiltError::Field(FieldError::ParamsMismatch));
        }
        let p = k.p() as u64;
        for i in 0..self.depth as usize {
            if self.sequence[i + 1].pow(p) != self.sequence[i] {
                return Err(TiltError::Integrity(i));
            }
        }
        Ok(())
    }

    /// `x₀`, after checking compatibility.
    pub fn sharp(&self) -> Result<FieldElement, TiltError> {
        self.validate()?;
        Ok(self.sequence[0].clone())
    }

    /// Componentwise product at the smaller depth.
    pub fn mul(&self, other: &Self) -> Result<Self, TiltError> {
        let depth = self.depth.min(other.depth);
        let sequence = self.sequence.iter().zip(&other.sequence).map(|(a, b)| a.try_mul(b)).collect::<Result<_, _>>()?;
        Ok(TiltElement { depth, sequence, flat: self.flat.try_mul(&other.flat)? })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("tilt element serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self, TiltError> {
        let t: TiltElement = serde_json::from_value(v.clone()).map_err(|e| FieldError::Parse(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }
}

/// ♯ of a flat element at its deepest depth, with the agreement valuation against the
/// previous depth as the stabilization precision.
pub fn sharp_of_flat(a: &FieldElement, k: FieldParams) -> Result<(FieldElement, Valuation), TiltError> {
    let m = max_depth(a, k);
    let x = from_flat(a, k, m)?.sharp()?;
    let stable = if m == 0 {
        Valuation::Finite(Q::one())
    } else {
        let y = from_flat(a, k, m - 1)?.sharp()?;
        (&x - &y).valuation().min(Valuation::Finite(k.cap()))
    };
    Ok((x, stable))
}

/// `sharp(a) − 1 ≡ sharp(a − 1) mod π`, the difference taken on the flat side.
pub fn additive_congruence_check(a: &TiltElement) -> Result<bool, TiltError> {
    let k = a.field();
    let lhs = &a.sharp()? - &FieldElement::one(k);
    let shifted = a.flat.try_sub(&FieldElement::one(*a.flat.params()))?;
    let rhs = from_flat(&shifted, k, a.depth.min(max_depth(&shifted, k)))?.sharp()?;
    Ok(lhs.congruent_mod(&rhs, Q::one()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitTransfer {
    pub element: TiltElement,
    /// `v(sharp(b)·a^{−1} − 1)`.
    pub certificate: Valuation,
}

/// One residue-lift step: `b` carries the digits of `a` below exponent 1.
pub fn unit_transfer(a: &FieldElement) -> Result<UnitTransfer, TiltError> {
    let k = *a.params();
    if k.characteristic() != Characteristic::Zero {
        return Err(TiltError::WrongCharacteristic("0"));
    }
    let v = a.valuation();
    if v != Valuation::Finite(Q::zero()) {
        return Err(TiltError::NotUnit(v));
    }
    let digits: Vec<(Q, u32)> = a.terms().filter(|(e, _)| *e < Q::one()).collect();
    let b = FieldElement::make(tilt_field(k), &digits)?;
    let element = from_flat(&b, k, max_depth(&b, k))?;
    let ratio = &element.sharp()? * &a.invert()?;
    let certificate = (&ratio - &FieldElement::one(k)).valuation();
    Ok(UnitTransfer { element, certificate })
}

/// The residue of `sharp(b)` read back on the flat side: digits below exponent 1.
pub fn residue_of(b: &TiltElement) -> Result<FieldElement, TiltError> {
    let x = b.sharp()?;
    let digits: Vec<(Q, u32)> = x.terms().filter(|(e, _)| *e < Q::one()).collect();
    Ok(FieldElement::make(*b.flat.params(), &digits)?)
}

/// Coordinate maps between the disk `B¹ = Sp K⟨χ⟩` and `X_h = {ω^{p^h} = πυ + 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct B1PerfData {
    pub p: u32,
    pub h: u32,
    pub k: i64,
    pub disk: Arc<SeriesParams>,
    pub piece: Arc<SeriesParams>,
    /// `υ(χ) = (χ + π^{−1/p^h})^{p^h} − π^{−1}` expanded.
    pub upsilon_of_chi: TateSeries,
    /// `ω(χ) = π^{1/p^h}χ + 1`.
    pub omega_of_chi: TateSeries,
    /// `χ(υ, ω) = π^{−1/p^h}(ω − 1)`.
    pub chi_of: TateSeries,
}

/// Builds both maps over a field of level `h` with two guard digits above `k`.
pub fn b1perf_maps(p: u32, h: u32, k: i64) -> Result<B1PerfData, TiltError> {
    if k < 2 {
        return Err(TiltError::Precision { required: 2 });
    }
    let field = FieldParams::char0(p, h, k + 2)?;
    let ph = (p as i64).pow(h);
    let disk = SeriesParams::new(field, &["chi"], ph + 1, None)?;
    let piece = SeriesParams::new(field, &["upsilon", "omega"], ph + 1, None)?;
    let mut terms = Vec::new();
    for i in 1..=ph {
        let binom = binomial_int(ph as u64, i as u64);
        let c = &FieldElement::from_bigint(field, &binom) * &FieldElement::pi_pow(field, Q::new(-(ph - i), ph))?;
        terms.push((vec![Q::from_integer(i)], c));
    }
    let upsilon_of_chi = TateSeries::from_terms(&disk, terms)?;
    let root = FieldElement::pi_pow(field, Q::new(1, ph))?;
    let omega_of_chi = TateSeries::from_terms(&disk, [(vec![Q::zero()], FieldElement::one(field)), (vec![Q::one()], root.clone())])?;
    let inv_root = root.invert()?;
    let chi_of = (&TateSeries::var(&piece, 1) - &TateSeries::one(&piece)).scalar_mul(&inv_root)?;
    Ok(B1PerfData { p, h, k, disk, piece, upsilon_of_chi, omega_of_chi, chi_of })
}

fn binomial_int(n: u64, r: u64) -> num_bigint::BigInt {
    let mut acc = num_bigint::BigInt::one();
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Rewrites `ω^{p^h}` as `πυ + 1` until every ω-exponent is below `p^h`.
pub fn reduce_relation(f: &TateSeries, ph: i64) -> Result<TateSeries, TiltError> {
    let params = f.params().clone();
    let field = *params.field();
    let rel = &TateSeries::var(&params, 0).scalar_mul(&FieldElement::pi_pow(field, Q::one())?)? + &TateSeries::one(&params);
    let mut cur = f.clone();
    loop {
        let mut low = Vec::new();
        let mut high = TateSeries::zero(&params);
        for (e, c) in cur.terms() {
            let w = e[1].to_integer();
            if w >= ph {
                let mono = TateSeries::monomial(&params, vec![e[0], Q::from_integer(w - ph)], c.clone())?;
                high = &high + &(&mono * &rel);
            } else {
                low.push((e.clone(), c.clone()));
            }
        }
        let low = TateSeries::from_terms(&params, low)?;
        if high.is_zero() {
            return Ok(low);
        }
        cur = &low + &high;
    }
}

fn congruent(a: &TateSeries, b: &TateSeries, k: i64) -> bool {
    (a - b).gauss_norm() >= Valuation::Finite(Q::from_integer(k))
}

/// Composites are the identity below `π^k`, `v((ω−1)^{p^h}) = 1` modulo the relation,
/// and the υ-coordinate of the forward map has Gauss valuation 0.
pub fn verify_b1perf(data: &B1PerfData) -> Result<Vec<Check>, TiltError> {
    let ph = (data.p as i64).pow(data.h);
    let (disk, piece) = (&data.disk, &data.piece);
    let chi = TateSeries::var(disk, 0);
    let up = TateSeries::var(piece, 0);
    let om = TateSeries::var(piece, 1);

    let back = data.chi_of.substitute(disk, &[data.upsilon_of_chi.clone(), data.omega_of_chi.clone()], true)?;
    let forward_up = reduce_relation(&data.upsilon_of_chi.substitute(piece, &[data.chi_of.clone()], true)?, ph)?;
    let forward_om = reduce_relation(&data.omega_of_chi.substitute(piece, &[data.chi_of.clone()], true)?, ph)?;
    let composites = congruent(&back, &chi, data.k)
        && congruent(&forward_up, &reduce_relation(&up, ph)?, data.k)
        && congruent(&forward_om, &reduce_relation(&om, ph)?, data.k);
    let mut c1 = Check::new("composites_identity", composites, true, composites);
    if !composites {
        c1 = c1.with_witness(json!({"chi": back.to_json(), "upsilon": forward_up.to_json(), "omega": forward_om.to_json()}));
    }

    let w1 = &om - &TateSeries::one(piece);
    let norm = reduce_relation(&w1.pow(ph as u64), ph)?.gauss_norm();
    let c2_ok = norm == Valuation::Finite(Q::one());
    let c2 = Check::new("omega_minus_one_norm", c2_ok, "1", norm.to_string());

    let unit = data.upsilon_of_chi.gauss_norm();
    let c3_ok = unit == Valuation::Finite(Q::zero());
    let mut c3 = Check::new("unit_ball_estimate", c3_ok, "0", unit.to_string());
    // The binomial estimate behind the unit-ball bound: v(binom(p^h, i)) ≥ 1 for 0 < i < p^h.
    let bad_binom = (1..ph as u64).find(|&i| binomial_valuation(data.p, data.h, i).map(|v| v < 1).unwrap_or(true));
    if let Some(i) = bad_binom {
        c3 = Check { passed: false, ..c3 }.with_witness(json!({"binomial_index": i}));
    }
    Ok(vec![c1, c2, c3])
}
