//! Truncated strictly convergent series `Σ a_I υ^I` over `FieldElement` scalars, with
//! exponents in `(1/p^h)·Z≥0` and a cap `D` on the weighted total degree `Σ I_j`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::valued_field::{fmt_q, parse_q, FieldElement, FieldError, FieldParams, Valuation, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("series parameters differ")]
    ParamsMismatch,
    #[error("substituted series for {0} has Gauss norm above 1")]
    Convergence(String),
    #[error("variable {0} has fractional exponents and a non-monomial substitute")]
    FractionalSubstitution(String),
    #[error("degree {0} exceeds the cap")]
    Cap(Q),
    #[error("exponent {exponent} not allowed for variable {var}")]
    Exponent { var: String, exponent: Q },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("series has no invertible constant term")]
    NotInvertible,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Ambient data of a series: scalar field, ordered variables, degree cap, per-variable level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeriesParams {
    field: FieldParams,
    vars: Vec<String>,
    deg_cap: i64,
    levels: Vec<u32>,
}

impl SeriesParams {
    /// All variables get the field level unless `levels` is given.
    pub fn new(field: FieldParams, vars: &[&str], deg_cap: i64, levels: Option<Vec<u32>>) -> Result<Arc<Self>, SeriesError> {
        Self::from_names(field, vars.iter().map(|s| s.to_string()).collect(), deg_cap, levels)
    }

    pub fn from_names(field: FieldParams, vars: Vec<String>, deg_cap: i64, levels: Option<Vec<u32>>) -> Result<Arc<Self>, SeriesError> {
        let levels = levels.unwrap_or_else(|| vec![field.level(); vars.len()]);
        if deg_cap < 0 {
            return Err(SeriesError::Cap(Q::from_integer(deg_cap)));
        }
        if levels.len() != vars.len() || levels.iter().any(|&h| h > field.level()) {
            return Err(SeriesError::Field(FieldError::Level { exponent: Q::zero(), level: field.level() }));
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(SeriesError::Parse(format!("duplicate variable {v}")));
            }
        }
        Ok(Arc::new(SeriesParams { field, vars, deg_cap, levels }))
    }

    pub fn field(&self) -> &FieldParams {
        &self.field
    }
    pub fn vars(&self) -> &[String] {
        &self.vars
    }
    pub fn nvars(&self) -> usize {
        self.vars.len()
    }
    pub fn deg_cap(&self) -> i64 {
        self.deg_cap
    }
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn index(&self, name: &str) -> Result<usize, SeriesError> {
        self.vars.iter().position(|v| v == name).ok_or_else(|| SeriesError::UnknownVariable(name.to_string()))
    }

    pub fn with_deg_cap(&self, deg_cap: i64) -> Arc<Self> {
        Arc::new(SeriesParams { deg_cap, ..self.clone() })
    }

    pub fn with_field(&self, field: FieldParams) -> Result<Arc<Self>, SeriesError> {
        Self::from_names(field, self.vars.clone(), self.deg_cap, Some(self.levels.clone()))
    }

    /// Parameters with variable `r` removed.
    pub fn without(&self, r: usize) -> Arc<Self> {
        let mut vars = self.vars.clone();
        let mut levels = self.levels.clone();
        vars.remove(r);
        levels.remove(r);
        Arc::new(SeriesParams { vars, levels, ..self.clone() })
    }

    /// Parameters with extra variables appended (at the field level).
    pub fn extended(&self, names: &[String]) -> Result<Arc<Self>, SeriesError> {
        let mut vars = self.vars.clone();
        let mut levels = self.levels.clone();
        for n in names {
            vars.push(n.clone());
            levels.push(self.field.level());
        }
        Self::from_names(self.field, vars, self.deg_cap, Some(levels))
    }
}

pub type Exps = Vec<Q>;

fn degree(e: &[Q]) -> Q {
    e.iter().fold(Q::zero(), |a, b| a + b)
}

/// A truncated Tate series; terms are kept in lexicographic exponent order with no
/// zero coefficients, so structural equality is series equality.
#[derive(Clone, PartialEq, Eq)]
pub struct TateSeries {
    params: Arc<SeriesParams>,
    terms: BTreeMap<Exps, FieldElement>,
}

impl fmt::Debug for TateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for (e, c) in &self.terms {
            let mono: Vec<String> = e
                .iter()
                .zip(&self.params.vars)
                .filter(|(x, _)| !x.is_zero())
                .map(|(x, v)| if x.is_one() { v.clone() } else { format!("{v}^({x})") })
                .collect();
            if mono.is_empty() {
                parts.push(format!("({c})"));
            } else {
                parts.push(format!("({c})*{}", mono.join("*")));
            }
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl TateSeries {
    pub fn zero(params: &Arc<SeriesParams>) -> Self {
        TateSeries { params: params.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(params: &Arc<SeriesParams>, c: FieldElement) -> Result<Self, SeriesError> {
        Self::monomial(params, vec![Q::zero(); params.nvars()], c)
    }

    pub fn from_int(params: &Arc<SeriesParams>, n: i64) -> Self {
        Self::constant(params, FieldElement::from_int(params.field, n)).unwrap()
    }

    pub fn one(params: &Arc<SeriesParams>) -> Self {
        Self::from_int(params, 1)
    }

    /// The coordinate function of variable `i`.
    pub fn var(params: &Arc<SeriesParams>, i: usize) -> Self {
        let mut e = vec![Q::zero(); params.nvars()];
        e[i] = Q::one();
        Self::monomial(params, e, FieldElement::one(params.field)).unwrap()
    }

    pub fn monomial(params: &Arc<SeriesParams>, exps: Exps, c: FieldElement) -> Result<Self, SeriesError> {
        let mut s = Self::zero(params);
        s.insert_checked(exps, c)?;
        Ok(s)
    }

    pub fn from_terms(params: &Arc<SeriesParams>, terms: impl IntoIterator<Item = (Exps, FieldElement)>) -> Result<Self, SeriesError> {
        let mut s = Self::zero(params);
        for (e, c) in terms {
            s.insert_checked(e, c)?;
        }
        Ok(s)
    }

    fn insert_checked(&mut self, e: Exps, c: FieldElement) -> Result<(), SeriesError> {
        if *c.params() != self.params.field {
            return Err(SeriesError::Field(FieldError::ParamsMismatch));
        }
        if e.len() != self.params.nvars() {
            return Err(SeriesError::Parse("exponent vector length".into()));
        }
        for (i, x) in e.iter().enumerate() {
            let ok = *x >= Q::zero() && FieldParams::level_needed(self.params.field.p(), *x) <= self.params.levels[i];
            if !ok {
                return Err(SeriesError::Exponent { var: self.params.vars[i].clone(), exponent: *x });
            }
        }
        if degree(&e) > Q::from_integer(self.params.deg_cap) {
            return Ok(());
        }
        self.add_term(e, c);
        Ok(())
    }

    // Adds `c·x^e` without validation; `e` must already fit the lattice.
    fn add_term(&mut self, e: Exps, c: FieldElement) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(a) => {
                let s = &*a + &c;
                if s.is_zero() {
                    self.terms.remove(&e);
                } else {
                    *a = s;
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn params(&self) -> &Arc<SeriesParams> {
        &self.params
    }

    pub fn field(&self) -> &FieldParams {
        &self.params.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, &FieldElement)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: &[Q]) -> FieldElement {
        self.terms.get(e).cloned().unwrap_or_else(|| FieldElement::zero(self.params.field))
    }

    pub fn constant_term(&self) -> FieldElement {
        self.coefficient(&vec![Q::zero(); self.params.nvars()])
    }

    /// Highest weighted total degree present (0 for the zero series).
    pub fn max_degree(&self) -> Q {
        self.terms.keys().map(|e| degree(e)).max().unwrap_or_else(Q::zero)
    }

    /// Lowest weighted total degree present.
    pub fn min_degree(&self) -> Option<Q> {
        self.terms.keys().map(|e| degree(e)).min()
    }

    fn same(&self, other: &Self) -> Result<(), SeriesError> {
        if self.params == other.params {
            Ok(())
        } else {
            Err(SeriesError::ParamsMismatch)
        }
    }

    /// Minimum coefficient valuation (the Gauss norm in valuation form).
    pub fn gauss_norm(&self) -> Valuation {
        self.terms.values().map(|c| c.valuation()).min().unwrap_or(Valuation::Infinite)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.try_add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        TateSeries { params: self.params.clone(), terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same(other)?;
        let cap = Q::from_integer(self.params.deg_cap);
        let rhs: Vec<(Q, &Exps, &FieldElement)> = other.terms.iter().map(|(e, c)| (degree(e), e, c)).collect();
        let mut out = Self::zero(&self.params);
        for (ea, ca) in &self.terms {
            let da = degree(ea);
            for (db, eb, cb) in &rhs {
                if da + db > cap {
                    continue;
                }
                let e: Exps = ea.iter().zip(eb.iter()).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scalar_mul(&self, c: &FieldElement) -> Result<Self, SeriesError> {
        if *c.params() != self.params.field {
            return Err(SeriesError::Field(FieldError::ParamsMismatch));
        }
        let mut out = Self::zero(&self.params);
        for (e, a) in &self.terms {
            out.add_term(e.clone(), a * c);
        }
        Ok(out)
    }

    pub fn pow(&self, n: u64) -> Self {
        let mut acc = Self::one(&self.params);
        let mut base = self.clone();
        let mut n = n;
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

    /// Formal inverse of a series with invertible constant term, exact through the cap.
    pub fn formal_inverse(&self) -> Result<Self, SeriesError> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err(SeriesError::NotInvertible);
        }
        let inv0 = c0.invert()?;
        let x = &self.scalar_mul(&inv0)? - &Self::one(&self.params);
        let mut acc = Self::one(&self.params);
        let mut power = Self::one(&self.params);
        let mut sign = false;
        loop {
            power = &power * &x;
            sign = !sign;
            if power.is_zero() {
                break;
            }
            acc = if sign { &acc - &power } else { &acc + &power };
        }
        acc.scalar_mul(&inv0)
    }

    /// Drops terms of weighted degree above `d`.
    pub fn truncate_degree(&self, d: Q) -> Self {
        TateSeries {
            params: self.params.clone(),
            terms: self.terms.iter().filter(|(e, _)| degree(e) <= d).map(|(e, c)| (e.clone(), c.clone())).collect(),
        }
    }

    /// Truncation onto level `h`: drops terms with an exponent denominator above `p^h`.
    pub fn level_truncate(&self, h: u32) -> Self {
        let p = self.params.field.p();
        TateSeries {
            params: self.params.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().all(|x| FieldParams::level_needed(p, *x) <= h))
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Smallest `h` such that every exponent has denominator dividing `p^h`.
    pub fn support_level(&self) -> u32 {
        let p = self.params.field.p();
        self.terms.keys().flat_map(|e| e.iter().map(move |x| FieldParams::level_needed(p, *x))).max().unwrap_or(0)
    }

    /// Replaces each variable in `vars` by its `p`-th power.
    pub fn frobenius_pullback(&self, vars: &[usize]) -> Result<Self, SeriesError> {
        let p = Q::from_integer(self.params.field.p() as i64);
        let cap = Q::from_integer(self.params.deg_cap);
        let mut out = Self::zero(&self.params);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            for &v in vars {
                e2[v] *= p;
            }
            let d = degree(&e2);
            if d > cap {
                return Err(SeriesError::Cap(d));
            }
            out.terms.insert(e2, c.clone());
        }
        Ok(out)
    }

    /// Substitutes `θ_r = ε` keeping variable `r` in the parameters.
    pub fn set_var(&self, r: usize, eps: u8) -> Self {
        let mut out = Self::zero(&self.params);
        for (e, c) in &self.terms {
            if e[r].is_zero() {
                out.add_term(e.clone(), c.clone());
            } else if eps == 1 {
                let mut e2 = e.clone();
                e2[r] = Q::zero();
                out.add_term(e2, c.clone());
            }
        }
        out
    }

    /// The face `θ_r = ε`, as a series in the remaining variables.
    pub fn face_restrict(&self, r: usize, eps: u8) -> Result<Self, SeriesError> {
        if r >= self.params.nvars() || eps > 1 {
            return Err(SeriesError::UnknownVariable(format!("index {r}")));
        }
        let params = self.params.without(r);
        let mut out = Self::zero(&params);
        for (e, c) in &self.set_var(r, eps).terms {
            let mut e2 = e.clone();
            e2.remove(r);
            out.add_term(e2, c.clone());
        }
        Ok(out)
    }

    /// Re-expresses the series over `target`, sending variable `i` to `target` variable
    /// `map[i]`; exponents must fit the target lattice and degree cap.
    pub fn relabel(&self, target: &Arc<SeriesParams>, map: &[usize]) -> Result<Self, SeriesError> {
        let mut out = Self::zero(target);
        for (e, c) in &self.terms {
            let mut e2 = vec![Q::zero(); target.nvars()];
            for (i, x) in e.iter().enumerate() {
                e2[map[i]] += *x;
            }
            out.insert_checked(e2, c.clone())?;
        }
        Ok(out)
    }

    /// Changes the coefficient precision cap (same `p`, characteristic, level).
    pub fn with_field_cap(&self, cap: Q) -> Result<Self, SeriesError> {
        let field = self.params.field.with_cap(cap)?;
        let params = self.params.with_field(field)?;
        let mut out = Self::zero(&params);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.with_cap(cap)?);
        }
        Ok(out)
    }

    /// Composite `f(g_1, …, g_k)` with every `g_j` in `target`. Each substitute must have
    /// Gauss norm ≤ 1 unless `allow_unbounded` is set. Fractional exponents of a variable
    /// are only allowed when its substitute is a monomial `π^γ·y^e`.
    pub fn substitute(&self, target: &Arc<SeriesParams>, assignment: &[TateSeries], allow_unbounded: bool) -> Result<Self, SeriesError> {
        if assignment.len() != self.params.nvars() {
            return Err(SeriesError::Parse("assignment length".into()));
        }
        for (j, g) in assignment.iter().enumerate() {
            if g.params != *target {
                return Err(SeriesError::ParamsMismatch);
            }
            if !allow_unbounded && g.gauss_norm() < Valuation::Finite(Q::zero()) {
                return Err(SeriesError::Convergence(self.params.vars[j].clone()));
            }
        }
        if self.params.field != target.field {
            return Err(SeriesError::Field(FieldError::ParamsMismatch));
        }
        let mut cache: HashMap<(usize, Q), TateSeries> = HashMap::new();
        let mut out = Self::zero(target);
        for (e, c) in &self.terms {
            let mut prod = Self::constant(target, c.clone())?;
            for (j, x) in e.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                if !cache.contains_key(&(j, *x)) {
                    let g = Self::power_of(&assignment[j], *x, &self.params.vars[j])?;
                    cache.insert((j, *x), g);
                }
                prod = &prod * &cache[&(j, *x)];
                if prod.is_zero() {
                    break;
                }
            }
            out = &out + &prod;
        }
        Ok(out)
    }

    fn power_of(g: &TateSeries, x: Q, name: &str) -> Result<TateSeries, SeriesError> {
        if x.is_integer() {
            return Ok(g.pow(x.to_integer() as u64));
        }
        if g.is_zero() {
            return Ok(g.clone());
        }
        let frac = || SeriesError::FractionalSubstitution(name.to_string());
        if g.terms.len() != 1 {
            return Err(frac());
        }
        let (e, c) = g.terms.iter().next().unwrap();
        let mut digits = c.terms();
        let (gamma, d) = digits.next().ok_or_else(frac)?;
        if d != 1 || digits.next().is_some() {
            return Err(frac());
        }
        let coeff = FieldElement::pi_pow(g.params.field, gamma * x).map_err(|_| frac())?;
        let e2: Exps = e.iter().map(|y| y * x).collect();
        let mut out = Self::zero(&g.params);
        out.insert_checked(e2, coeff).map_err(|_| frac())?;
        Ok(out)
    }

    /// Coefficients re-embedded at field level `level` (exponent lattices unchanged).
    pub fn embed_field_level(&self, level: u32) -> Result<Self, SeriesError> {
        let field = self.params.field.with_level(level)?;
        let params = self.params.with_field(field)?;
        let mut out = Self::zero(&params);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), c.embed_level(level)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut m = Map::new();
                for (x, v) in e.iter().zip(&self.params.vars) {
                    if !x.is_zero() {
                        m.insert(v.clone(), Value::String(fmt_q(*x)));
                    }
                }
                json!({"exps": Value::Object(m), "coeff": serde_json::to_value(c).unwrap()})
            })
            .collect();
        let mut out = json!({"vars": self.params.vars, "deg_cap": self.params.deg_cap, "terms": terms});
        if self.terms.is_empty() {
            out["field"] = serde_json::to_value(FieldElement::zero(self.params.field)).unwrap();
        }
        if self.params.levels.iter().any(|&h| h != self.params.field.level()) {
            out["levels"] = json!(self.params.levels);
        }
        out
    }

    /// Parses the series schema. Field parameters come from the coefficients (or the
    /// `field` key of an empty series); variable levels default to the field level.
    pub fn from_json(v: &Value) -> Result<Self, SeriesError> {
        let bad = |m: &str| SeriesError::Parse(m.to_string());
        let obj = v.as_object().ok_or_else(|| bad("series must be an object"))?;
        for k in obj.keys() {
            if !["vars", "deg_cap", "terms", "field", "levels"].contains(&k.as_str()) {
                return Err(bad(&format!("unknown key {k}")));
            }
        }
        let vars: Vec<String> = serde_json::from_value(obj.get("vars").cloned().ok_or_else(|| bad("missing vars"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let deg_cap = obj.get("deg_cap").and_then(Value::as_i64).ok_or_else(|| bad("missing deg_cap"))?;
        let terms = obj.get("terms").and_then(Value::as_array).ok_or_else(|| bad("missing terms"))?;
        let mut parsed = Vec::with_capacity(terms.len());
        for t in terms {
            let exps = t.get("exps").and_then(Value::as_object).ok_or_else(|| bad("term without exps"))?;
            let coeff: FieldElement =
                serde_json::from_value(t.get("coeff").cloned().ok_or_else(|| bad("term without coeff"))?).map_err(|e| bad(&e.to_string()))?;
            let mut e = vec![Q::zero(); vars.len()];
            for (name, x) in exps {
                let i = vars.iter().position(|v| v == name).ok_or_else(|| SeriesError::UnknownVariable(name.clone()))?;
                e[i] = parse_q(x.as_str().ok_or_else(|| bad("exponent must be a string"))?)?;
            }
            parsed.push((e, coeff));
        }
        let field = match (parsed.first(), obj.get("field")) {
            (Some((_, c)), _) => *c.params(),
            (None, Some(f)) => *serde_json::from_value::<FieldElement>(f.clone()).map_err(|e| bad(&e.to_string()))?.params(),
            (None, None) => return Err(bad("empty series needs a field")),
        };
        let levels: Option<Vec<u32>> = match obj.get("levels") {
            Some(l) => Some(serde_json::from_value(l.clone()).map_err(|e| bad(&e.to_string()))?),
            None => None,
        };
        let params = SeriesParams::from_names(field, vars, deg_cap, levels)?;
        Self::from_terms(&params, parsed)
    }
}

macro_rules! series_binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl std::ops::$tr<&TateSeries> for &TateSeries {
            type Output = TateSeries;
            /// Panics on mismatched parameters; the `try_` form returns an error instead.
            fn $m(self, rhs: &TateSeries) -> TateSeries {
                self.$f(rhs).expect("series parameters differ")
            }
        }
    };
}
series_binop!(Add, add, try_add);
series_binop!(Sub, sub, try_sub);
series_binop!(Mul, mul, try_mul);
